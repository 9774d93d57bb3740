"""Central finite-difference checks of graph adjoints."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, backward, evaluate, get_dtype


@dataclass
class GradReport:
    errors: dict[str, float]
    rtol: float
    checked: dict[str, int] = field(default_factory=dict)

    @property
    def flagged(self) -> list[str]:
        return [k for k, e in self.errors.items() if not e <= self.rtol]

    @property
    def ok(self) -> bool:
        return not self.flagged

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    def __str__(self):
        lines = [f"{'parameter':40s} {'entries':>8s} {'rel.err':>10s}"]
        for k, e in self.errors.items():
            mark = "  FAIL" if k in self.flagged else ""
            lines.append(f"{k:40s} {self.checked.get(k, 0):8d} {e:10.3e}{mark}")
        return "\n".join(lines)


def check_gradients(
    graph: Graph,
    output,
    bindings: dict,
    step: float = 1e-5,
    rtol: float = 1e-5,
    wrt=None,
    samples: int | None = None,
    atol: float = 1e-8,
    seed: int = 0,
) -> GradReport:
    """Compare analytic gradients against central differences.

    For each checked tensor the error is max|analytic - numeric| divided by
    max(max|analytic|, max|numeric|, atol) over the probed entries. ``samples``
    limits the probe to that many random entries per tensor.
    """
    analytic = backward(graph, output, bindings)
    names = list(analytic) if wrt is None else list(wrt)
    rng = np.random.default_rng(seed)
    dtype = get_dtype()
    key = output if isinstance(output, str) else None

    def f(b):
        if key is not None:
            return float(np.sum(evaluate(graph, b, [key])[key]))
        graph.outputs["__gradcheck__"] = output
        try:
            return float(np.sum(evaluate(graph, b, ["__gradcheck__"])["__gradcheck__"]))
        finally:
            graph.outputs.pop("__gradcheck__", None)

    errors, checked = {}, {}
    for name in names:
        base = np.array(bindings[name], dtype=dtype)
        flat_idx = np.arange(base.size)
        if samples is not None and samples < base.size:
            flat_idx = np.sort(rng.choice(base.size, size=samples, replace=False))
        a = analytic[name].reshape(-1)[flat_idx]
        n = np.empty_like(a)
        for k, i in enumerate(flat_idx):
            trial = dict(bindings)
            plus = base.copy().reshape(-1)
            plus[i] += step
            trial[name] = plus.reshape(base.shape)
            fp = f(trial)
            minus = base.copy().reshape(-1)
            minus[i] -= step
            trial[name] = minus.reshape(base.shape)
            fm = f(trial)
            n[k] = (fp - fm) / (2.0 * step)
        denom = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(n), initial=0.0), atol)
        diff = np.max(np.abs(a - n), initial=0.0)
        errors[name] = float(diff / denom) if diff > 0 else 0.0
        checked[name] = int(len(flat_idx))
    return GradReport(errors, rtol, checked)
