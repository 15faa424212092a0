#include "spikeforge/expr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

namespace spikeforge::expr {

ExprError::ExprError(std::string message, std::size_t position)
    : ConfigError(position == npos ? std::move(message)
                                   : std::move(message) + " (at position " + std::to_string(position) + ")"),
      position_(position) {}

const double* Environment::find(std::string_view name) const {
  auto it = bindings_.find(name);
  return it == bindings_.end() ? nullptr : &it->second;
}

std::string_view func_name(Func f) noexcept {
  switch (f) {
    case Func::Exp: return "exp";
    case Func::Log: return "log";
    case Func::Abs: return "abs";
    case Func::Min: return "min";
    case Func::Max: return "max";
    case Func::Tanh: return "tanh";
    case Func::Sqrt: return "sqrt";
    case Func::Pow: return "pow";
  }
  return "?";
}

namespace {

struct FuncInfo {
  std::string_view name;
  Func func;
  std::size_t arity;
};

constexpr std::array<FuncInfo, 8> kFunctions{{
    {"exp", Func::Exp, 1},
    {"log", Func::Log, 1},
    {"abs", Func::Abs, 1},
    {"min", Func::Min, 2},
    {"max", Func::Max, 2},
    {"tanh", Func::Tanh, 1},
    {"sqrt", Func::Sqrt, 1},
    {"pow", Func::Pow, 2},
}};

double checked(double r) {
  if (!std::isfinite(r)) throw ExprError("non-finite result");
  return r;
}

double divide(double a, double b) {
  if (b == 0.0) throw ExprError("division by zero");
  return checked(a / b);
}

double apply1(Func f, double x) {
  switch (f) {
    case Func::Exp: return checked(std::exp(x));
    case Func::Log:
      if (x < 0.0) throw ExprError("log of negative argument");
      return checked(std::log(x));
    case Func::Abs: return std::abs(x);
    case Func::Tanh: return std::tanh(x);
    case Func::Sqrt:
      if (x < 0.0) throw ExprError("sqrt of negative argument");
      return std::sqrt(x);
    default: break;
  }
  throw ExprError("internal: bad unary function");
}

double apply2(Func f, double a, double b) {
  switch (f) {
    case Func::Min: return std::min(a, b);
    case Func::Max: return std::max(a, b);
    case Func::Pow: return checked(std::pow(a, b));
    default: break;
  }
  throw ExprError("internal: bad binary function");
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Node parse_all() {
    Node n = parse_expr();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ExprError("syntax error: " + what, pos_); }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static Node binary(NodeKind k, Node lhs, Node rhs) {
    Node n;
    n.kind = k;
    n.args.push_back(std::move(lhs));
    n.args.push_back(std::move(rhs));
    return n;
  }

  Node parse_expr() {
    Node lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = binary(NodeKind::Add, std::move(lhs), parse_term());
      } else if (accept('-')) {
        lhs = binary(NodeKind::Sub, std::move(lhs), parse_term());
      } else {
        return lhs;
      }
    }
  }

  Node parse_term() {
    Node lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = binary(NodeKind::Mul, std::move(lhs), parse_unary());
      } else if (accept('/')) {
        lhs = binary(NodeKind::Div, std::move(lhs), parse_unary());
      } else {
        return lhs;
      }
    }
  }

  Node parse_unary() {
    if (accept('-')) {
      Node n;
      n.kind = NodeKind::Negate;
      n.args.push_back(parse_unary());
      return n;
    }
    return parse_power();
  }

  Node parse_power() {
    Node base = parse_primary();
    if (accept('^')) return binary(NodeKind::Power, std::move(base), parse_unary());
    return base;
  }

  Node parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Node inner = parse_expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  Node parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        ++pos_;
        ++n;
      }
      return n;
    };
    std::size_t nd = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      nd += digits();
    }
    if (nd == 0) {
      pos_ = start;
      fail("malformed number");
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail("malformed exponent");
    }
    Node n;
    n.kind = NodeKind::Number;
    const auto* first = src_.data() + start;
    const auto* last = src_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, last, n.value);
    if (ec != std::errc() || ptr != last || !std::isfinite(n.value)) {
      pos_ = start;
      fail("number out of range");
    }
    return n;
  }

  Node parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    std::string name(src_.substr(start, pos_ - start));
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == '(') {
      const FuncInfo* info = nullptr;
      for (const auto& f : kFunctions) {
        if (f.name == name) info = &f;
      }
      if (info == nullptr) throw ExprError("unknown function '" + name + "'", start);
      ++pos_;
      Node call;
      call.kind = NodeKind::Call;
      call.func = info->func;
      call.args.push_back(parse_expr());
      while (accept(',')) call.args.push_back(parse_expr());
      if (!accept(')')) fail("expected ')' or ','");
      if (call.args.size() != info->arity) {
        throw ExprError(name + "() takes " + std::to_string(info->arity) + " argument(s), got " +
                            std::to_string(call.args.size()),
                        start);
      }
      return call;
    }
    Node n;
    n.kind = NodeKind::Variable;
    n.name = std::move(name);
    return n;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

double eval_node(const Node& n, const Environment& env) {
  switch (n.kind) {
    case NodeKind::Number: return n.value;
    case NodeKind::Variable: {
      const double* v = env.find(n.name);
      if (v == nullptr) throw ExprError("unbound identifier '" + n.name + "'");
      return *v;
    }
    case NodeKind::Negate: return -eval_node(n.args[0], env);
    case NodeKind::Add: return checked(eval_node(n.args[0], env) + eval_node(n.args[1], env));
    case NodeKind::Sub: return checked(eval_node(n.args[0], env) - eval_node(n.args[1], env));
    case NodeKind::Mul: return checked(eval_node(n.args[0], env) * eval_node(n.args[1], env));
    case NodeKind::Div: {
      const double a = eval_node(n.args[0], env);
      return divide(a, eval_node(n.args[1], env));
    }
    case NodeKind::Power: {
      const double a = eval_node(n.args[0], env);
      return apply2(Func::Pow, a, eval_node(n.args[1], env));
    }
    case NodeKind::Call:
      if (n.args.size() == 1) return apply1(n.func, eval_node(n.args[0], env));
      {
        const double a = eval_node(n.args[0], env);
        return apply2(n.func, a, eval_node(n.args[1], env));
      }
  }
  throw ExprError("internal: bad node");
}

void collect(const Node& n, std::set<std::string>& out) {
  if (n.kind == NodeKind::Variable) out.insert(n.name);
  for (const auto& a : n.args) collect(a, out);
}

void print(const Node& n, std::ostringstream& os) {
  auto bin = [&](const char* op) {
    os << '(';
    print(n.args[0], os);
    os << ' ' << op << ' ';
    print(n.args[1], os);
    os << ')';
  };
  switch (n.kind) {
    case NodeKind::Number: {
      std::array<char, 32> buf{};
      auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), n.value);
      (void)ec;
      os << '(' << std::string_view(buf.data(), ptr - buf.data()) << ')';
      break;
    }
    case NodeKind::Variable: os << n.name; break;
    case NodeKind::Negate:
      os << "(-";
      print(n.args[0], os);
      os << ')';
      break;
    case NodeKind::Add: bin("+"); break;
    case NodeKind::Sub: bin("-"); break;
    case NodeKind::Mul: bin("*"); break;
    case NodeKind::Div: bin("/"); break;
    case NodeKind::Power: bin("^"); break;
    case NodeKind::Call:
      os << func_name(n.func) << '(';
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) os << ", ";
        print(n.args[i], os);
      }
      os << ')';
      break;
  }
}

}  // namespace

Expression parse(std::string_view source) {
  Parser p(source);
  return Expression(p.parse_all(), std::string(source));
}

double eval(const Expression& e, const Environment& env) { return checked(eval_node(e.root(), env)); }

std::set<std::string> free_vars(const Expression& e) {
  std::set<std::string> out;
  collect(e.root(), out);
  return out;
}

std::string to_string(const Expression& e) {
  std::ostringstream os;
  print(e.root(), os);
  return os.str();
}

std::size_t SlotTable::add(const std::string& name) {
  if (auto i = find(name); i != npos) return i;
  names_.push_back(name);
  return names_.size() - 1;
}

std::size_t SlotTable::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return npos;
}

Program::Program(const Expression& e, const SlotTable& slots) : slot_names_(slots.names()), source_(e.source()) {
  emit(e.root(), slots);
  std::size_t depth = 0;
  for (const auto& ins : code_) {
    switch (ins.op) {
      case Op::Push:
      case Op::Load: ++depth; break;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
      case Op::Pow:
      case Op::Min:
      case Op::Max: --depth; break;
      default: break;
    }
    max_depth_ = std::max(max_depth_, depth);
  }
}

void Program::emit(const Node& n, const SlotTable& slots) {
  switch (n.kind) {
    case NodeKind::Number: code_.push_back({Op::Push, 0, n.value}); return;
    case NodeKind::Variable: {
      const auto s = slots.find(n.name);
      if (s == SlotTable::npos) throw ExprError("unbound identifier '" + n.name + "'");
      code_.push_back({Op::Load, s, 0.0});
      return;
    }
    case NodeKind::Negate:
      emit(n.args[0], slots);
      code_.push_back({Op::Neg, 0, 0.0});
      return;
    default: break;
  }
  for (const auto& a : n.args) emit(a, slots);
  Op op = Op::Add;
  switch (n.kind) {
    case NodeKind::Add: op = Op::Add; break;
    case NodeKind::Sub: op = Op::Sub; break;
    case NodeKind::Mul: op = Op::Mul; break;
    case NodeKind::Div: op = Op::Div; break;
    case NodeKind::Power: op = Op::Pow; break;
    case NodeKind::Call:
      switch (n.func) {
        case Func::Exp: op = Op::Exp; break;
        case Func::Log: op = Op::Log; break;
        case Func::Abs: op = Op::Abs; break;
        case Func::Min: op = Op::Min; break;
        case Func::Max: op = Op::Max; break;
        case Func::Tanh: op = Op::Tanh; break;
        case Func::Sqrt: op = Op::Sqrt; break;
        case Func::Pow: op = Op::Pow; break;
      }
      break;
    default: break;
  }
  code_.push_back({op, 0, 0.0});
}

double Program::run(std::span<const double> slots) const {
  std::array<double, 64> small{};
  std::vector<double> big;
  double* st = small.data();
  if (max_depth_ > small.size()) {
    big.resize(max_depth_);
    st = big.data();
  }
  std::size_t sp = 0;
  for (const auto& ins : code_) {
    switch (ins.op) {
      case Op::Push: st[sp++] = ins.value; break;
      case Op::Load: st[sp++] = slots[ins.slot]; break;
      case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
      case Op::Add: --sp; st[sp - 1] = checked(st[sp - 1] + st[sp]); break;
      case Op::Sub: --sp; st[sp - 1] = checked(st[sp - 1] - st[sp]); break;
      case Op::Mul: --sp; st[sp - 1] = checked(st[sp - 1] * st[sp]); break;
      case Op::Div: --sp; st[sp - 1] = divide(st[sp - 1], st[sp]); break;
      case Op::Pow: --sp; st[sp - 1] = apply2(Func::Pow, st[sp - 1], st[sp]); break;
      case Op::Min: --sp; st[sp - 1] = apply2(Func::Min, st[sp - 1], st[sp]); break;
      case Op::Max: --sp; st[sp - 1] = apply2(Func::Max, st[sp - 1], st[sp]); break;
      case Op::Exp: st[sp - 1] = apply1(Func::Exp, st[sp - 1]); break;
      case Op::Log: st[sp - 1] = apply1(Func::Log, st[sp - 1]); break;
      case Op::Abs: st[sp - 1] = apply1(Func::Abs, st[sp - 1]); break;
      case Op::Tanh: st[sp - 1] = apply1(Func::Tanh, st[sp - 1]); break;
      case Op::Sqrt: st[sp - 1] = apply1(Func::Sqrt, st[sp - 1]); break;
    }
  }
  return checked(st[0]);
}

}  // namespace spikeforge::expr
