"""Deterministic surrogate of the hydraulic test-rig dataset.

Writes ``<signal>.txt`` files and ``profile.txt`` with the same shapes,
rates and label coding as the public rig recordings so the whole pipeline
can run offline.  The physics is a caricature: each induced fault shifts
the signals of the element it belongs to, plus weaker knock-on effects.
It is test data, not a model of the real rig.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

RATES = {
    "PS1": 100, "PS2": 100, "PS3": 100, "PS4": 100, "PS5": 100, "PS6": 100, "EPS1": 100,
    "FS1": 10, "FS2": 10,
    "TS1": 1, "TS2": 1, "TS3": 1, "TS4": 1, "VS1": 1, "CE": 1, "CP": 1, "SE": 1,
}
COOLER = (100, 20, 3)
VALVE = (100, 90, 80, 73)
PUMP = (0, 1, 2)
ACCUMULATOR = (130, 115, 100, 90)
LOAD_STEPS = np.array([0.6, 1.0, 0.8, 1.2, 0.7, 0.9])  # one level per 10 s
DURATION_S = 60


@dataclass(frozen=True)
class Condition:
    cooler: float = 100
    valve: float = 100
    pump: float = 0
    accumulator: float = 130


def _schedule(n_cycles: int, rng: np.random.Generator, healthy_fraction: float) -> tuple[list[Condition], list[int]]:
    conds: list[Condition] = []
    stable: list[int] = []
    while len(conds) < n_cycles:
        length = int(rng.integers(8, 25))
        if rng.random() < healthy_fraction:
            c = Condition()
        else:
            c = Condition()
            n_faults = 1 if rng.random() < 0.8 else 2
            for which in rng.choice(4, size=n_faults, replace=False):
                if which == 0:
                    c = Condition(float(rng.choice(COOLER[1:])), c.valve, c.pump, c.accumulator)
                elif which == 1:
                    c = Condition(c.cooler, float(rng.choice(VALVE[1:])), c.pump, c.accumulator)
                elif which == 2:
                    c = Condition(c.cooler, c.valve, float(rng.choice(PUMP[1:])), c.accumulator)
                else:
                    c = Condition(c.cooler, c.valve, c.pump, float(rng.choice(ACCUMULATOR[1:])))
        for i in range(length):
            conds.append(c)
            stable.append(1 if i < 1 else 0)
    return conds[:n_cycles], stable[:n_cycles]


def _load(rate: int) -> np.ndarray:
    t = np.arange(DURATION_S * rate) / rate
    return LOAD_STEPS[np.minimum((t // 10).astype(int), LOAD_STEPS.size - 1)]


def _lag(x: np.ndarray, rate: int, tau_s: float) -> np.ndarray:
    """First-order lag of a step profile; larger ``tau_s`` means slower switching."""
    alpha = 1.0 - np.exp(-1.0 / (rate * tau_s))
    out, _ = lfilter([alpha], [1.0, alpha - 1.0], x, zi=[(1.0 - alpha) * x[0]])
    return out


def _cycle(c: Condition, rng: np.random.Generator, drift: float) -> dict[str, np.ndarray]:
    eff = c.cooler / 100.0
    leak = c.pump
    lag_tau = 0.05 + 4.0 * (1 - c.valve / 100.0)
    acc_drop = (130 - c.accumulator) / 40.0

    def noise(rate: int, sd: float) -> np.ndarray:
        return rng.normal(0.0, sd, DURATION_S * rate)

    load100, load10, load1 = _load(100), _load(10), _load(1)
    lagged = _lag(load100, 100, lag_tau)
    wobble = rng.normal(0.0, 0.01)

    tank = 35.0 + 12.0 * (1 - eff) + drift + rng.normal(0, 0.3)
    ts1 = tank + 0.02 * np.arange(60) * (1 - eff) + noise(1, 0.05)
    ts2 = ts1 + 3.0 * load1 + noise(1, 0.05)
    ts3 = tank + 2.0 + 6.0 * (1 - eff) + noise(1, 0.05)
    ts4 = ts3 - 9.0 * eff - 0.3 + noise(1, 0.05)
    ce = 45.0 * eff + 2.0 + noise(1, 0.3) + rng.normal(0, 0.3)
    cp = 2.2 * eff + 0.1 + noise(1, 0.02)

    ps2 = 150.0 * (lagged + wobble) * (1 - 0.02 * leak) + noise(100, 0.4)
    ps1 = ps2 + 6.0 + 0.5 * leak + noise(100, 0.3)
    ps3 = 140.0 * (load100 + wobble) * (1 - 0.03 * leak) + noise(100, 0.4)
    ripple = np.sin(2 * np.pi * 2.0 * np.arange(6000) / 100)
    ps4 = 12.0 * (1 - 0.5 * acc_drop) + (0.2 + 2.0 * acc_drop) * ripple + 6.0 * (load100 - 0.85) + noise(100, 0.1)
    ps5 = 9.2 - 0.01 * (tank - 35.0) + noise(100, 0.02)
    ps6 = ps5 - 0.15 + noise(100, 0.02)
    eps1 = 2400.0 * (load100 + wobble) + 60.0 * leak + 30.0 * (1 - eff) + noise(100, 15.0)

    fs1 = 8.0 * (1 - 0.05 * leak) * (1 - 0.02 * (load10 - 0.85)) + noise(10, 0.03)
    fs2 = 10.2 + noise(10, 0.02)
    se = 60.0 - 6.0 * leak + noise(1, 0.3)
    vs1 = 0.55 + 0.03 * leak + 0.01 * (1 - eff) + noise(1, 0.005)
    return {
        "PS1": ps1, "PS2": ps2, "PS3": ps3, "PS4": ps4, "PS5": ps5, "PS6": ps6, "EPS1": eps1,
        "FS1": fs1, "FS2": fs2, "TS1": ts1, "TS2": ts2, "TS3": ts3, "TS4": ts4,
        "VS1": vs1, "CE": ce, "CP": cp, "SE": se,
    }


def generate(
    out_dir: str | os.PathLike, n_cycles: int = 300, seed: int = 0, healthy_fraction: float = 0.4
) -> dict[str, int]:
    """Write a surrogate dataset to ``out_dir``; returns label counts."""
    rng = np.random.default_rng(seed)
    conds, stable = _schedule(n_cycles, rng, healthy_fraction)
    rows: dict[str, list[np.ndarray]] = {k: [] for k in RATES}
    drift = 0.0
    for c in conds:
        drift = 0.9 * drift + rng.normal(0, 0.1)
        for k, v in _cycle(c, rng, drift).items():
            rows[k].append(v)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, vals in rows.items():
        np.savetxt(out / f"{k}.txt", np.vstack(vals), fmt="%.3f", delimiter="\t")
    profile = np.array([[c.cooler, c.valve, c.pump, c.accumulator, s] for c, s in zip(conds, stable)])
    np.savetxt(out / "profile.txt", profile, fmt="%d", delimiter="\t")
    healthy = sum(
        1 for c, s in zip(conds, stable) if c == Condition() and s == 0
    )
    return {"cycles": n_cycles, "healthy": healthy}
