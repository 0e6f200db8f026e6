"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError, ParameterError
from .tensor import backward


@dataclass
class GradCheckReport:
    op_name: str
    max_rel_error: float
    per_parameter: dict = field(default_factory=dict)

    def passed(self, tol=1e-4):
        return self.max_rel_error < tol


def relative_error(analytic, numeric):
    """``||a - n|| / max(||a||, ||n||)``; zero when both vanish."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def _evaluate(fn, name):
    try:
        value = fn()
    except NumericError as exc:
        raise NumericError(f"non-finite intermediate while perturbing '{name}': {exc}") from exc
    out = float(value.data.reshape(-1)[0])
    if not np.isfinite(out):
        raise NumericError(f"non-finite loss while perturbing '{name}'")
    return out


def grad_check(fn, params, eps=1e-5, op_name="", names=None):
    """Compare backprop gradients of the scalar ``fn()`` with central differences.

    ``fn`` must rebuild its graph from ``params`` on every call; each
    parameter entry is perturbed in place by ``+-eps`` and restored.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ParameterError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    loss = fn()  # first call also creates lazily-initialized parameters
    names = list(params.names() if names is None else names)
    backward(loss, params)
    analytic = {n: params[n].grad.copy() for n in names}

    per_parameter = {}
    for name in names:
        base = params[name].data.copy()
        numeric = np.zeros(base.shape)
        flat = numeric.reshape(-1)
        for i in range(base.size):
            bumped = base.copy().reshape(-1)
            bumped[i] += eps
            params.set(name, bumped.reshape(base.shape))
            f_plus = _evaluate(fn, name)
            bumped[i] -= 2 * eps
            params.set(name, bumped.reshape(base.shape))
            f_minus = _evaluate(fn, name)
            flat[i] = (f_plus - f_minus) / (2 * eps)
        params.set(name, base)
        per_parameter[name] = relative_error(analytic[name], numeric)

    worst = max(per_parameter.values(), default=0.0)
    return GradCheckReport(op_name=op_name, max_rel_error=worst, per_parameter=per_parameter)
