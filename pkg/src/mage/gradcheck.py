"""Central-difference verification of hand-derived gradients.

``fn(params) -> (value, grads)`` is evaluated under componentwise
perturbations ``(f(p+h) - f(p-h)) / 2h`` and compared against its own
analytic gradients. The function must be deterministic: anything
stochastic (dropout masks, corruption noise) has to be frozen by
re-seeding inside ``fn``. Non-determinism is detected and rejected up
front, because central differences of a moving target mean nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError

__all__ = ["GradCheckReport", "finite_diff_grad_check"]

# Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps noise
# on true-zero components from registering as failure.
DENOM_FLOOR = 1e-3


@dataclass
class GradCheckReport:
    """Max relative error per parameter block plus the overall verdict."""

    tol: float
    blocks: dict
    passed: bool

    @property
    def max_rel_error(self) -> float:
        return max(self.blocks.values()) if self.blocks else 0.0

    def __str__(self) -> str:
        lines = [f"{'block':<24} {'max rel err':>12}  pass"]
        for name, err in sorted(self.blocks.items()):
            lines.append(f"{name:<24} {err:>12.3e}  {'ok' if err < self.tol else 'FAIL'}")
        return "\n".join(lines)


def finite_diff_grad_check(fn, params: dict, h: float = 1e-5, tol: float = 1e-5,
                           max_components: int | None = None) -> GradCheckReport:
    """Compare analytic gradients of ``fn`` against central differences.

    ``max_components`` caps the number of perturbed entries per block
    (evenly spaced, deterministic) so large models can be spot-checked.
    """
    value0, grads = fn(params)
    value1, _ = fn(params)
    if value0 != value1:
        raise UsageError(
            "fn is not deterministic between calls; freeze its randomness before checking"
        )

    blocks: dict[str, float] = {}
    for name, p in params.items():
        analytic = np.asarray(grads[name], dtype=np.float64)
        if analytic.shape != p.shape:
            raise UsageError(f"gradient shape {analytic.shape} != parameter shape {p.shape} for {name!r}")
        flat = p.reshape(-1)
        n_comp = flat.size
        if max_components is not None and n_comp > max_components:
            idx = np.linspace(0, n_comp - 1, max_components).astype(int)
        else:
            idx = np.arange(n_comp)
        worst = 0.0
        for j in idx:
            orig = flat[j]
            flat[j] = orig + h
            f_plus, _ = fn(params)
            flat[j] = orig - h
            f_minus, _ = fn(params)
            flat[j] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = analytic.reshape(-1)[j]
            err = abs(a - numeric) / max(abs(a), abs(numeric), DENOM_FLOOR)
            worst = max(worst, err)
        blocks[name] = worst
    return GradCheckReport(tol=tol, blocks=blocks, passed=all(e < tol for e in blocks.values()))
