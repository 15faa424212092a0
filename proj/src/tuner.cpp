#include "spikeforge/tuner.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <thread>

#include "spikeforge/error.hpp"
#include "spikeforge/random.hpp"

namespace spikeforge::tuner {

void ParamRange::validate() const {
  if (name.empty()) throw ConfigError("tuning parameter has an empty name");
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
    throw ConfigError(fmt::format("tuning parameter '{}': need finite lo < hi (got {}, {})", name, lo, hi));
  }
  if (scale == Scale::Log && lo <= 0.0) {
    throw ConfigError(fmt::format("tuning parameter '{}': log scale needs lo > 0", name));
  }
}

double ParamRange::gene_lo() const { return scale == Scale::Log ? std::log(lo) : lo; }
double ParamRange::gene_hi() const { return scale == Scale::Log ? std::log(hi) : hi; }

void GAConfig::validate() const {
  if (population < 1) throw ConfigError("tune.population must be at least 1");
  if (population < elitism + 1) throw ConfigError("tune.population must be at least elitism + 1");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) throw ConfigError("tune.crossover_rate must lie in [0, 1]");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ConfigError("tune.mutation_rate must lie in [0, 1]");
  if (!(mutation_sigma >= 0.0) || !std::isfinite(mutation_sigma)) {
    throw ConfigError("tune.mutation_sigma must be a non-negative number");
  }
  if (tournament_size < 2) throw ConfigError("tune.tournament_size must be at least 2");
  if (threads < 1) throw ConfigError("tune.threads must be at least 1");
}

Assignment decode(const Individual& ind, std::span<const ParamRange> space) {
  if (ind.genome.size() != space.size()) {
    throw ConfigError(fmt::format("genome has {} genes but the search space has {} parameters", ind.genome.size(),
                                  space.size()));
  }
  Assignment out;
  out.reserve(space.size());
  for (std::size_t k = 0; k < space.size(); ++k) {
    const auto& p = space[k];
    double x = p.scale == Scale::Log ? std::exp(ind.genome[k]) : ind.genome[k];
    if (p.kind == Kind::Integer) x = std::floor(x + 0.5);
    out.emplace_back(p.name, std::clamp(x, p.lo, p.hi));
  }
  return out;
}

namespace {

void mutate_with(Individual& ind, std::span<const ParamRange> space, double rate, double sigma, Rng& rng) {
  for (std::size_t k = 0; k < space.size(); ++k) {
    if (rng.uniform() >= rate) continue;
    const double lo = space[k].gene_lo();
    const double hi = space[k].gene_hi();
    ind.genome[k] = std::clamp(ind.genome[k] + sigma * (hi - lo) * rng.normal(), lo, hi);
  }
}

[[noreturn]] void rethrow_with_params(std::exception_ptr err, const Assignment& params) {
  const auto suffix = " (parameters: " + format_assignment(params) + ")";
  try {
    std::rethrow_exception(err);
  } catch (const ConfigError& e) {
    throw ConfigError(e.what() + suffix);
  } catch (const IoError& e) {
    throw IoError(e.what() + suffix);
  } catch (const std::exception& e) {
    throw SimulationError(std::string("fitness evaluation failed: ") + e.what() + suffix);
  }
}

void evaluate(std::vector<Individual>& pop, std::span<const ParamRange> space, const FitnessFn& fitness,
              const GAConfig& cfg, std::size_t generation) {
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (!pop[i].fitness) todo.push_back(i);
  }
  std::vector<std::exception_ptr> errors(pop.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t t = next++; t < todo.size(); t = next++) {
      const auto i = todo[t];
      try {
        const double f = fitness(decode(pop[i], space), derive_seed({cfg.seed, generation, i}));
        if (!std::isfinite(f)) throw SimulationError("fitness is not finite");
        pop[i].fitness = f;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n_threads = std::min(cfg.threads, todo.size());
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  // Report the lowest-index failure so the error does not depend on scheduling.
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (errors[i]) rethrow_with_params(errors[i], decode(pop[i], space));
  }
}

/// Population indices by descending fitness, ties to the lower index.
std::vector<std::size_t> ranking(const std::vector<Individual>& pop) {
  std::vector<std::size_t> idx(pop.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return *pop[a].fitness > *pop[b].fitness; });
  return idx;
}

std::size_t tournament(const std::vector<Individual>& pop, std::size_t size, Rng& rng) {
  std::size_t best = rng.index(pop.size());
  for (std::size_t k = 1; k < size; ++k) {
    const std::size_t c = rng.index(pop.size());
    if (*pop[c].fitness > *pop[best].fitness || (*pop[c].fitness == *pop[best].fitness && c < best)) best = c;
  }
  return best;
}

}  // namespace

void mutate(Individual& ind, std::span<const ParamRange> space, double rate, double sigma, std::uint64_t seed) {
  if (ind.genome.size() != space.size()) throw ConfigError("genome length does not match the search space");
  Rng rng(seed);
  mutate_with(ind, space, rate, sigma, rng);
}

GAResult ga_optimize(std::span<const ParamRange> space, const FitnessFn& fitness, const GAConfig& cfg) {
  if (space.empty()) throw ConfigError("tuning needs at least one parameter range");
  for (const auto& p : space) p.validate();
  cfg.validate();

  Rng rng(derive_seed({cfg.seed, 0x6761ULL}));
  std::vector<Individual> pop(cfg.population);
  for (auto& ind : pop) {
    ind.genome.resize(space.size());
    for (std::size_t k = 0; k < space.size(); ++k) ind.genome[k] = rng.uniform(space[k].gene_lo(), space[k].gene_hi());
  }

  GAResult result;
  bool have_best = false;
  for (std::size_t gen = 0;; ++gen) {
    evaluate(pop, space, fitness, cfg, gen);
    const auto order = ranking(pop);
    const auto& top = pop[order.front()];
    double sum = 0.0;
    for (const auto& ind : pop) sum += *ind.fitness;
    result.history.push_back(
        {gen, *top.fitness, sum / static_cast<double>(pop.size()), decode(top, space)});
    if (!have_best || *top.fitness > *result.best.fitness) {
      result.best = top;
      have_best = true;
    }
    if (gen == cfg.generations) break;

    std::vector<Individual> next;
    next.reserve(cfg.population);
    for (std::size_t e = 0; e < cfg.elitism; ++e) next.push_back(pop[order[e]]);
    while (next.size() < cfg.population) {
      const auto& a = pop[tournament(pop, cfg.tournament_size, rng)];
      const auto& b = pop[tournament(pop, cfg.tournament_size, rng)];
      Individual child{a.genome, std::nullopt};
      if (rng.uniform() < cfg.crossover_rate) {
        for (std::size_t k = 0; k < space.size(); ++k) {
          if (rng.uniform() < 0.5) child.genome[k] = b.genome[k];
        }
      }
      mutate_with(child, space, cfg.mutation_rate, cfg.mutation_sigma, rng);
      next.push_back(std::move(child));
    }
    pop = std::move(next);
  }
  result.best_params = decode(result.best, space);
  result.best_fitness = *result.best.fitness;
  return result;
}

std::string format_assignment(const Assignment& a) {
  std::string out;
  for (const auto& [name, value] : a) {
    if (!out.empty()) out += ';';
    out += fmt::format("{}={}", name, value);
  }
  return out;
}

void write_report(const GAResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write tuning report " + path.string());
  out << "generation,best_fitness,mean_fitness,best_params\n";
  for (const auto& g : result.history) {
    out << fmt::format("{},{},{},{}\n", g.generation, g.best_fitness, g.mean_fitness,
                       format_assignment(g.best_params));
  }
  if (!out) throw IoError("failed writing tuning report " + path.string());
}

}  // namespace spikeforge::tuner
