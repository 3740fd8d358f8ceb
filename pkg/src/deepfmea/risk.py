"""Risk economics of a thresholded detector.

Priority numbers::

    RPN    = P * S * D
    QCPN   = P * (D * CD + (1 - D) * CU)
    QCPN*  = P * (TPR * CD + FNR * CU + FPR * CDI) + C_PHM
    dQCPN  = QCPN - QCPN*

``dQCPN > 0`` means operating the detector lowers the expected cost per
asset and interval.  Candidate thresholds are the midpoints between
consecutive distinct scores plus -inf and +inf, which together realise
every achievable confusion matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import InvariantError, PreconditionError


@dataclass(frozen=True)
class ConfusionRates:
    TPR: float
    FPR: float
    FNR: float

    def __post_init__(self):
        for name in ("TPR", "FPR", "FNR"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise InvariantError(f"{name}={v} outside [0, 1]")
        if abs(self.TPR + self.FNR - 1) > 1e-12:
            raise InvariantError(f"TPR + FNR must equal 1, got {self.TPR + self.FNR}")

    @classmethod
    def from_tpr(cls, tpr: float, fpr: float) -> "ConfusionRates":
        return cls(tpr, fpr, 1.0 - tpr)


@dataclass(frozen=True)
class CostSet:
    P: float
    D: float = 0.0
    S: float = 0.0
    CD: float = 0.0
    CU: float = 0.0
    CDI: float = 0.0
    C_PHM: float = 0.0
    name: str = ""
    assume_run_to_failure: bool = False
    assume_free_operation: bool = False
    fp_cost_unscaled_by_P: bool = False

    def __post_init__(self):
        if not 0 <= self.P <= 1:
            raise InvariantError(f"P={self.P} outside [0, 1]")
        if not 0 <= self.D <= 1:
            raise InvariantError(f"D={self.D} outside [0, 1]")
        for name in ("S", "CD", "CU", "CDI", "C_PHM"):
            if getattr(self, name) < 0:
                raise InvariantError(f"{name} must be >= 0")

    def effective(self) -> "CostSet":
        """Apply the simplification flags (D -> 0, C_PHM -> 0)."""
        out = self
        if self.assume_run_to_failure:
            out = replace(out, D=0.0)
        if self.assume_free_operation:
            out = replace(out, C_PHM=0.0)
        return out

    @classmethod
    def from_mapping(cls, d: Mapping, name: str = "") -> "CostSet":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known - {"flags"}
        if extra:
            raise InvariantError(f"unknown cost fields: {sorted(extra)}")
        kw = {k: v for k, v in d.items() if k != "flags"}
        for flag in d.get("flags", []) or []:
            if flag not in ("assume_run_to_failure", "assume_free_operation", "fp_cost_unscaled_by_P"):
                raise InvariantError(f"unknown cost flag {flag!r}")
            kw[flag] = True
        kw.setdefault("name", name)
        return cls(**kw)


@dataclass(frozen=True)
class RiskFigures:
    RPN: float
    QCPN: float
    QCPN_star: float
    delta_QCPN: float


def rpn(P, S, D):
    return P * S * D


def qcpn(P, D, CD, CU):
    return P * (D * CD + (1 - D) * CU)


def qcpn_star(P, TPR, FNR, FPR, CD, CU, CDI, C_PHM, fp_cost_unscaled_by_P: bool = False):
    """Expected cost with the detector deployed.  Works on floats or arrays."""
    if fp_cost_unscaled_by_P:
        return P * (TPR * CD + FNR * CU) + FPR * CDI + C_PHM
    return P * (TPR * CD + FNR * CU + FPR * CDI) + C_PHM


def delta_qcpn(costs: CostSet, rates: ConfusionRates) -> RiskFigures:
    c = costs.effective()
    base = qcpn(c.P, c.D, c.CD, c.CU)
    star = qcpn_star(c.P, rates.TPR, rates.FNR, rates.FPR, c.CD, c.CU, c.CDI, c.C_PHM, c.fp_cost_unscaled_by_P)
    return RiskFigures(rpn(c.P, c.S, c.D), base, star, base - star)


def _delta_arrays(costs: CostSet, tpr: np.ndarray, fpr: np.ndarray) -> np.ndarray:
    c = costs.effective()
    base = qcpn(c.P, c.D, c.CD, c.CU)
    fnr = 1.0 - tpr
    return base - qcpn_star(c.P, tpr, fnr, fpr, c.CD, c.CU, c.CDI, c.C_PHM, c.fp_cost_unscaled_by_P)


# -- threshold sweeps ------------------------------------------------------------------


def _prepare(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).astype(bool).ravel()
    if s.shape != y.shape:
        raise PreconditionError(f"{s.size} scores but {y.size} labels")
    if not np.isfinite(s).all():
        raise PreconditionError("scores must be finite")
    return s, y


def candidate_thresholds(scores) -> np.ndarray:
    u = np.unique(np.asarray(scores, dtype=float))
    mids = (u[:-1] + u[1:]) / 2
    return np.concatenate([[-np.inf], mids, [np.inf]])


@dataclass(frozen=True)
class Sweep:
    thresholds: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    n_pos: int
    n_neg: int

    @property
    def tpr(self) -> np.ndarray:
        return self.tp / self.n_pos

    @property
    def fpr(self) -> np.ndarray:
        return self.fp / self.n_neg


def sweep(scores, labels, thresholds: np.ndarray | None = None) -> Sweep:
    s, y = _prepare(scores, labels)
    t = candidate_thresholds(s) if thresholds is None else np.asarray(thresholds, dtype=float)
    pos = np.sort(s[y])
    neg = np.sort(s[~y])
    return Sweep(t, _kernels.count_above(pos, t), _kernels.count_above(neg, t), int(pos.size), int(neg.size))


def _need_both(y: np.ndarray) -> None:
    if not y.any():
        raise PreconditionError("no degraded cycles")
    if y.all():
        raise PreconditionError("no healthy cycles")


def confusion_rates(scores, labels, threshold: float) -> tuple[ConfusionRates, dict[str, int]]:
    """Rates at one threshold; a cycle counts as detected when its score exceeds it."""
    s, y = _prepare(scores, labels)
    _need_both(y)
    det = s > threshold
    tp = int(np.sum(det & y))
    fn = int(np.sum(~det & y))
    fp = int(np.sum(det & ~y))
    tn = int(np.sum(~det & ~y))
    tpr = tp / (tp + fn)
    return ConfusionRates(tpr, fp / (fp + tn), 1.0 - tpr), {"TP": tp, "FP": fp, "FN": fn, "TN": tn}


@dataclass(frozen=True)
class PRPoint:
    threshold: float
    precision: float
    recall: float


def pr_curve(scores, labels) -> list[PRPoint]:
    s, y = _prepare(scores, labels)
    if not y.any():
        raise PreconditionError("precision-recall curve needs at least one positive")
    sw = sweep(s, y)
    out = []
    for t, tp, fp in zip(sw.thresholds.tolist(), sw.tp.tolist(), sw.fp.tolist()):
        if tp + fp == 0:
            continue
        out.append(PRPoint(t, tp / (tp + fp), tp / sw.n_pos))
    return out


def average_precision(scores, labels) -> float:
    """Step-wise area under the precision-recall curve (sum of dRecall * precision)."""
    pts = sorted(pr_curve(scores, labels), key=lambda p: -p.threshold)
    area, prev = 0.0, 0.0
    for p in pts:
        area += (p.recall - prev) * p.precision
        prev = p.recall
    return area


def delta_qcpn_curve(scores, labels, costs: CostSet) -> list[tuple[float, float]]:
    s, y = _prepare(scores, labels)
    _need_both(y)
    sw = sweep(s, y)
    delta = _delta_arrays(costs, sw.tpr, sw.fpr)
    return list(zip(sw.thresholds.tolist(), delta.tolist()))


def _argmax_last(values: Sequence[float]) -> int:
    best = 0
    for i, v in enumerate(values):
        if v >= values[best]:
            best = i
    return best


def optimal_threshold(scores, labels, costs: CostSet) -> tuple[float, float]:
    """Threshold maximising dQCPN; ties go to the largest threshold."""
    curve = delta_qcpn_curve(scores, labels, costs)
    i = _argmax_last([d for _, d in curve])
    return curve[i]


@dataclass(frozen=True)
class ScenarioResult:
    name: str
    threshold: float
    delta_QCPN: float
    rates: ConfusionRates
    figures: RiskFigures


def scenario_table(scores, labels, scenarios: Sequence[CostSet]) -> list[ScenarioResult]:
    s, y = _prepare(scores, labels)
    out = []
    for i, costs in enumerate(scenarios):
        t, d = optimal_threshold(s, y, costs)
        rates, _ = confusion_rates(s, y, t)
        figs = delta_qcpn(costs, rates)
        out.append(ScenarioResult(costs.name or f"scenario{i + 1}", t, d, rates, figs))
    return out


def none_detect_value(costs: CostSet) -> float:
    """dQCPN with the detector never firing (threshold +inf)."""
    return float(_delta_arrays(costs, np.array([0.0]), np.array([0.0]))[0])


def fmt_threshold(t: float) -> str:
    if math.isinf(t):
        return "inf" if t > 0 else "-inf"
    return repr(float(t))
