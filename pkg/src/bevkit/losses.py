"""Training losses as standalone numeric functions with analytic gradients
with respect to the predictions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Predictions are clamped into [EPS, 1-EPS] before any log.
EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    gamma: float = 0.25   # center regression weight
    lam: float = 0.25     # auxiliary (corner) branch weight
    alpha: float = 2.0    # focal exponent on the prediction
    beta: float = 4.0     # focal exponent on the soft negative target

    def __post_init__(self):
        if min(self.gamma, self.lam, self.alpha, self.beta) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class LossReport:
    total: float
    center_cls: float
    center_reg: float
    corner_cls: float
    corner_reg: float
    gradients: dict[str, np.ndarray] = field(default_factory=dict)


def focal_loss(pred: np.ndarray, target: np.ndarray, weights: LossWeights = LossWeights()):
    """Penalty-reduced focal classification loss over a heatmap stack.

    Pixels with target exactly 1 are positives; the loss is normalized by
    their count (by 1 when there are none). Returns (value, grad) where grad
    is d(loss)/d(pred); entries clamped away from (0, 1) get zero gradient.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")

    clamped = (pred < EPS) | (pred > 1.0 - EPS)
    p = np.clip(pred, EPS, 1.0 - EPS)
    pos = target == 1.0
    n_pos = max(int(pos.sum()), 1)
    a, b = weights.alpha, weights.beta

    one_minus_p = 1.0 - p
    pos_term = one_minus_p**a * np.log(p)
    neg_term = (1.0 - target) ** b * p**a * np.log(one_minus_p)
    value = -float(np.sum(np.where(pos, pos_term, neg_term))) / n_pos

    d_pos = -a * one_minus_p ** (a - 1.0) * np.log(p) + one_minus_p**a / p
    d_neg = (1.0 - target) ** b * (
        a * p ** (a - 1.0) * np.log(one_minus_p) - p**a / one_minus_p
    )
    grad = -np.where(pos, d_pos, d_neg) / n_pos
    grad[clamped] = 0.0
    return value, grad


def l1_loss(pred: np.ndarray, target: np.ndarray, mask: np.ndarray):
    """Masked L1 regression loss, normalized by the positive-pixel count.

    mask has the prediction's shape or its shape minus the channel axis (a
    positive pixel then contributes every channel). Gradient is sign/N_r on
    supervised entries, zero at exact ties and off the mask.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape == pred.shape:
        m = mask.astype(np.float64)
    elif mask.shape == pred.shape[:-1]:
        m = mask.astype(np.float64)[..., None]
    else:
        raise ValueError(f"mask shape {mask.shape} incompatible with {pred.shape}")

    n_pos = int(mask.sum())
    if n_pos == 0:
        return 0.0, np.zeros_like(pred)
    diff = (pred - target) * m
    value = float(np.abs(diff).sum()) / n_pos
    grad = np.sign(diff) * m / n_pos
    return value, grad


def total_loss(
    center_cls,
    center_reg,
    corner_cls,
    corner_reg,
    weights: LossWeights = LossWeights(),
) -> LossReport:
    """Weighted sum: center_cls + gamma*center_reg + lam*(corner_cls + corner_reg).

    Each part is a scalar or a (value, gradient) pair as returned by the loss
    functions; gradients, when present, come back scaled by their weight.
    """
    parts = {}
    grads = {}
    for name, part, weight in (
        ("center_cls", center_cls, 1.0),
        ("center_reg", center_reg, weights.gamma),
        ("corner_cls", corner_cls, weights.lam),
        ("corner_reg", corner_reg, weights.lam),
    ):
        if isinstance(part, tuple):
            value, grad = part
            grads[name] = weight * grad
        else:
            value = float(part)
        parts[name] = float(value)
    total = (
        parts["center_cls"]
        + weights.gamma * parts["center_reg"]
        + weights.lam * (parts["corner_cls"] + parts["corner_reg"])
    )
    return LossReport(total=total, gradients=grads, **parts)
