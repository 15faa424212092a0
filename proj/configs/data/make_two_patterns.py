"""Writes the two-pattern AER dataset used by configs/two_patterns.yaml.

Each 100 ms sample flashes one of two orthogonal 4x4 patterns (left or right
half of the sensor) every 20 ms and adds 20 Hz Poisson background events on
every pixel.
"""
import os
import random

PERIOD = 0.020
FIRST = 0.002
DURATION = 0.100
NOISE_HZ = 20.0
HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "two_patterns")


def pattern(label):
    return [k for k in range(16) if (k % 4 < 2) == (label == 0)]


def sample(rng, label):
    events = []
    t = FIRST
    while t < DURATION:
        events += [(round(t, 6), k) for k in pattern(label)]
        t += PERIOD
    for k in range(16):
        t = rng.expovariate(NOISE_HZ)
        while t < DURATION:
            events.append((round(t, 6), k))
            t += rng.expovariate(NOISE_HZ)
    return sorted(events)


def write_split(rng, name, per_class):
    rows = []
    for i in range(per_class):
        for label in (0, 1):
            fname = f"{name}_{i:02d}_{label}.csv"
            with open(os.path.join(OUT, fname), "w") as f:
                f.write("# time_seconds,address,polarity\n")
                for t, k in sample(rng, label):
                    f.write(f"{t},{k},1\n")
            rows.append(f"{fname},{label}\n")
    with open(os.path.join(OUT, f"{name}.csv"), "w") as f:
        f.writelines(rows)


if __name__ == "__main__":
    os.makedirs(OUT, exist_ok=True)
    rng = random.Random(2024)
    write_split(rng, "train", 5)
    write_split(rng, "test", 10)
