"""Independent reference implementations used by the tests.

The virtual-sensor oracle evaluates one cycle at a time by plain
recursion with no memo, recomputing shared subgraphs.  The threshold
oracle scans every candidate threshold by brute force.
"""

from __future__ import annotations

import hashlib

import numpy as np

from deepfmea.model import NodeInput, OperationNode, Segment, Signal, VirtualSensor

EPS = 1e-12

# -- random virtual-sensor graphs -----------------------------------------------------

RATE = 1.0
DURATION = 30
SIGNALS = {
    "A": Signal("A", "A", ("e",), 1.0),
    "B": Signal("B", "B", ("e",), 1.0),
    "C": Signal("C", "C", ("e",), 1.0),
    "F": Signal("F", "F", ("e",), 2.0),
}
SEGMENTS = {
    "S0": Segment("S0", "S0", 0.0, 9.0),
    "S1": Segment("S1", "S1", 10.0, 19.0),
    "S2": Segment("S2", "S2", 20.0, 29.0),
}
REDUCERS = ["ME", "MEAN", "STD", "MIN", "MAX", "SUM", "SLOPE"]


def random_matrices(rng: np.random.Generator, cycles: int) -> dict[str, np.ndarray]:
    out = {}
    for sid, sig in SIGNALS.items():
        out[sid] = rng.normal(10.0, 3.0, size=(cycles, int(sig.sampling_rate_hz * DURATION)))
    # identical rows make DIFF(A, B) vanish so DIV sees zero divisors
    out["B"][0] = out["A"][0]
    out["C"][1] = 0.0
    return out


def random_graph(rng: np.random.Generator, vs_id: str, max_nodes: int = 12, others=()) -> VirtualSensor:
    """A random DAG; every vector in it has 10 samples at 1 Hz.

    ``others`` is a list of ``(vs_id, kind)`` pairs that may be used as inputs.
    """
    n = int(rng.integers(1, max_nodes + 1))
    nodes: list[OperationNode] = []
    kinds: dict[str, str] = {}
    resampled: list[str] = []

    def operand() -> tuple[NodeInput, str]:
        r = rng.random()
        prev = [k for k in kinds]
        if prev and r < 0.45:
            ref = prev[int(rng.integers(len(prev)))]
            return NodeInput(ref), kinds[ref]
        if resampled and r < 0.55:
            ref = resampled[int(rng.integers(len(resampled)))]
            return NodeInput(ref, f"S{int(rng.integers(3))}"), "vector"
        if others and r < 0.65:
            ref, kind = others[int(rng.integers(len(others)))]
            return NodeInput(ref), kind
        sig = "ABC"[int(rng.integers(3))]
        return NodeInput(sig, f"S{int(rng.integers(3))}"), "vector"

    i = 0
    while len(nodes) < n:
        nid = f"{vs_id}_n{i}"
        i += 1
        r = rng.random()
        if r < 0.1:
            nodes.append(OperationNode(nid, "MEAN", (NodeInput("F"),), {"rate_hz": 1.0}))
            resampled.append(nid)  # 30 samples: only used through a segment
            continue
        if r < 0.45:
            inp, kind = operand()
            if kind != "vector":
                inp, kind = NodeInput("ABC"[int(rng.integers(3))], f"S{int(rng.integers(3))}"), "vector"
            op = REDUCERS[int(rng.integers(len(REDUCERS)))]
            nodes.append(OperationNode(nid, op, (inp,)))
            kinds[nid] = "scalar"
        elif r < 0.55:
            inp, kind = operand()
            nodes.append(OperationNode(nid, "ABS", (inp,)))
            kinds[nid] = kind
        else:
            a, ka = operand()
            b, kb = operand()
            op = "DIFF" if rng.random() < 0.5 else "DIV"
            nodes.append(OperationNode(nid, op, (a, b)))
            kinds[nid] = "vector" if "vector" in (ka, kb) else "scalar"
    out = [n for n in nodes if n.id in kinds]
    if not out:  # only resample nodes so far; nothing references them
        nodes[-1] = OperationNode(f"{vs_id}_out", "MEAN", (NodeInput("A", "S0"),))
        out = nodes[-1:]
    return VirtualSensor(vs_id, vs_id, ("e",), out[-1].id, tuple(nodes))


class NaiveOracle:
    """Recursive single-cycle evaluation without memoization."""

    def __init__(self, sensors, segments, signals, matrices, cycle: int):
        self.sensors, self.segments, self.signals = sensors, segments, signals
        self.matrices, self.cycle = matrices, cycle

    def sensor(self, vs_id: str):
        vs = self.sensors[vs_id]
        return self.node(vs, vs.output_node_id)

    def node(self, vs: VirtualSensor, node_id: str):
        node = next(n for n in vs.nodes if n.id == node_id)
        ins = [self.input(vs, i) for i in node.inputs]
        op = node.operator.value
        if op in ("DIFF", "DIV"):
            (a, oa), (b, ob) = ins
            if op == "DIFF":
                v = np.asarray(a) - np.asarray(b)
            else:
                if np.any(np.abs(b) < EPS):
                    v = np.full(np.broadcast(np.asarray(a), np.asarray(b)).shape, np.nan)
                else:
                    v = np.asarray(a) / np.asarray(b)
            return v, (oa if oa is not None else ob)
        (a, off), = ins
        if op == "ABS":
            return np.abs(a), off
        if op == "MEAN" and "rate_hz" in node.params:
            block = int(round(self._rate(off) / node.params["rate_hz"]))
            return a.reshape(-1, block).mean(axis=-1), off[::block]
        fn = {"ME": np.median, "MEAN": np.mean, "STD": np.std, "MIN": np.min, "MAX": np.max, "SUM": np.sum}
        if op in fn:
            return np.float64(fn[op](a)), None
        x = np.arange(a.size, dtype=float)
        xc = x - x.mean()
        yc = a - np.mean(a)
        return np.float64(np.sum(xc * yc) / np.sum(xc * xc)), None

    @staticmethod
    def _rate(off):
        return 1.0 / (off[1] - off[0])

    def input(self, vs: VirtualSensor, inp: NodeInput):
        local = {n.id for n in vs.nodes}
        if inp.ref in local:
            v, off = self.node(vs, inp.ref)
        elif inp.ref in self.sensors:
            v, off = self.sensor(inp.ref)
        else:
            sig = self.signals[inp.ref]
            v = self.matrices[inp.ref][self.cycle]
            off = np.arange(v.size) / sig.sampling_rate_hz
        if inp.segment_id is not None:
            seg = self.segments[inp.segment_id]
            keep = (off >= seg.start_s - 1e-9) & (off <= seg.end_s + 1e-9)
            v, off = v[keep], off[keep]
        return v, off


def same_bits(a, b) -> bool:
    """Equal shapes, NaN in the same places, identical bits everywhere else."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape != b.shape:
        return False
    na, nb = np.isnan(a), np.isnan(b)
    if not np.array_equal(na, nb):
        return False
    return a[~na].tobytes() == b[~nb].tobytes()


# -- thresholds -----------------------------------------------------------------------


def brute_force_optimum(scores, labels, delta_fn):
    """Scan every midpoint plus both sentinels; ties go to the largest threshold."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    u = sorted(set(s.tolist()))
    grid = [-np.inf] + [(u[i] + u[i + 1]) / 2 for i in range(len(u) - 1)] + [np.inf]
    best_t, best_d = None, None
    for t in grid:
        det = s > t
        tpr = np.sum(det & y) / np.sum(y)
        fpr = np.sum(det & ~y) / np.sum(~y)
        d = delta_fn(tpr, fpr)
        if best_d is None or d >= best_d:
            best_t, best_d = t, d
    return best_t, best_d


def tree_hash(root) -> str:
    """Digest of every file path and its bytes under ``root``."""
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()
