"""Reparameterized discrete sampling: relaxed Bernoulli and categorical draws.

Samples are deterministic functions of (parameters, exogenous uniform noise),
so gradients flow through the sampling step. Soft mode emits the relaxed
value; hard mode emits the exact discrete value forward while keeping the
relaxed derivative for the backward pass (straight-through).
"""

import numpy as np

from . import tape as tp
from .errors import ContractError

P_FLOOR = 1e-6
P_CEIL = 1.0 - 1e-6
DEFAULT_TEMPERATURE = 0.5


def _logit(x):
    return np.log(x) - np.log1p(-x)


def relaxed_bernoulli_value(p, temperature, u):
    """Relaxed sample value y = sigmoid((logit(p) + logit(u)) / tau)."""
    p = np.clip(p, P_FLOOR, P_CEIL)
    return 1.0 / (1.0 + np.exp(-(_logit(p) + _logit(u)) / temperature))


def bernoulli_hard_value(p, u):
    """Exact 0/1 draw consistent with the relaxed sample's zero-temperature limit."""
    return (u > 1.0 - np.clip(p, P_FLOOR, P_CEIL)).astype(np.float64)


def reparam_bernoulli(p, temperature, u, hard=False):
    """Differentiable Bernoulli draw on the tape.

    ``p`` is a Var (scalar or vector of probabilities), ``u`` uniform noise
    strictly inside (0, 1) with matching shape. Soft mode returns the relaxed
    value in (0, 1); hard mode returns exact 0/1 forward with the relaxed
    gradient (straight-through).
    """
    if temperature <= 0:
        raise ContractError("temperature must be positive")
    if not isinstance(p, tp.Var):
        raise ContractError("p must be a tape variable")
    p = tp.clip(p, P_FLOOR, P_CEIL)
    pv = np.asarray(p.value, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    y = relaxed_bernoulli_value(pv, temperature, u)
    dy_dp = y * (1.0 - y) / (temperature * pv * (1.0 - pv))
    if hard:
        value = (u > 1.0 - pv).astype(np.float64)
        return p.tape.record("bernoulli_st", [p], value, [dy_dp])
    return p.tape.record("bernoulli_relaxed", [p], y, [dy_dp])


def gumbel_noise(u):
    return -np.log(-np.log(u))


def reparam_categorical(logits, temperature, u, hard=False):
    """Differentiable categorical draw over a 1-d logits Var.

    Returns a vector node summing to 1 (soft) or an exact one-hot (hard,
    straight-through via the relaxed softmax Jacobian).
    """
    if temperature <= 0:
        raise ContractError("temperature must be positive")
    if not isinstance(logits, tp.Var):
        raise ContractError("logits must be a tape variable")
    lv = np.atleast_1d(np.asarray(logits.value, dtype=np.float64))
    if lv.size == 0:
        raise ContractError("logits must be non-empty")
    if not np.all(np.isfinite(lv)):
        raise ContractError("logits must be finite")
    u = np.asarray(u, dtype=np.float64)
    if u.shape != lv.shape:
        raise ContractError("need one uniform draw per category")
    perturbed = lv + gumbel_noise(u)
    z = perturbed / temperature
    z = z - z.max()
    y = np.exp(z)
    y /= y.sum()
    if hard:
        value = np.zeros_like(y)
        value[int(np.argmax(perturbed))] = 1.0
    else:
        value = y
    return logits.tape._push(
        tp.Node("cat_relax", (logits.idx,), value, (y, float(temperature)))
    )


def categorical_hard_values(probs, u):
    """Plain (non-tape) inverse-CDF categorical draws.

    ``probs``: (k,) distribution; ``u``: uniforms of any shape. Returns int
    indices shaped like ``u``.
    """
    cdf = np.cumsum(np.asarray(probs, dtype=np.float64))
    cdf[-1] = 1.0  # guard against round-off at the top
    return np.searchsorted(cdf, np.asarray(u), side="right").astype(np.int64)
