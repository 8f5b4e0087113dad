"""One-hidden-layer tanh networks trained on squared loss.

A network maps ``(z_hidden, z_linear)`` to::

    w2 . tanh(W1 z_hidden + b1) + b2 + v . z_linear

``z_linear`` is optional; it carries inputs that should enter additively
and linearly (the prediction column in separable meta-models).  Inputs and
targets are z-scored internally and the scaling is stored with the weights.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .rng import as_generator


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"  # "adam" (mini-batch) or "lbfgs" (full batch)
    epochs: int = 200
    step: float = 1e-3
    batch_size: int = 256
    init_seed: int = 0
    patience: int = 10
    maxiter: int = 500
    restarts: int = 1
    tol: float = 1e-10

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "TrainConfig":
        return cls(**(d or {}))


def _standardize(A):
    mu = A.mean(axis=0)
    sd = A.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return mu, sd


class TanhNet:
    def __init__(self, W1, b1, w2, b2, v, x_mean, x_scale, l_mean, l_scale, y_mean, y_scale):
        self.W1 = np.asarray(W1, dtype=float)
        self.b1 = np.asarray(b1, dtype=float)
        self.w2 = np.asarray(w2, dtype=float)
        self.b2 = float(b2)
        self.v = np.asarray(v, dtype=float)
        self.x_mean, self.x_scale = np.asarray(x_mean, float), np.asarray(x_scale, float)
        self.l_mean, self.l_scale = np.asarray(l_mean, float), np.asarray(l_scale, float)
        self.y_mean, self.y_scale = float(y_mean), float(y_scale)

    @property
    def units(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def linear_dim(self) -> int:
        return self.v.shape[0]

    def __call__(self, Xh, Xl=None) -> np.ndarray:
        Zh = (np.asarray(Xh, dtype=float) - self.x_mean) / self.x_scale
        out = np.tanh(Zh @ self.W1.T + self.b1) @ self.w2 + self.b2
        if self.linear_dim:
            Zl = (np.asarray(Xl, dtype=float).reshape(len(Zh), -1) - self.l_mean) / self.l_scale
            out = out + Zl @ self.v
        return self.y_mean + self.y_scale * out

    def linear_coefficients(self) -> np.ndarray:
        """Coefficients of the linear inputs in raw units."""
        return self.y_scale * self.v / self.l_scale

    def to_dict(self) -> dict:
        return {
            "W1": self.W1.tolist(), "b1": self.b1.tolist(), "w2": self.w2.tolist(),
            "b2": self.b2, "v": self.v.tolist(),
            "x_mean": self.x_mean.tolist(), "x_scale": self.x_scale.tolist(),
            "l_mean": self.l_mean.tolist(), "l_scale": self.l_scale.tolist(),
            "y_mean": self.y_mean, "y_scale": self.y_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TanhNet":
        return cls(**d)


class _Packer:
    def __init__(self, m, p, q):
        self.shapes = [(m, p), (m,), (m,), (), (q,)]
        self.sizes = [int(np.prod(s)) for s in self.shapes]

    def unpack(self, theta):
        out, i = [], 0
        for shape, size in zip(self.shapes, self.sizes):
            out.append(theta[i:i + size].reshape(shape))
            i += size
        return out

    def pack(self, parts):
        return np.concatenate([np.ravel(p) for p in parts])


def _loss_grad(parts, Zh, Zl, t):
    W1, b1, w2, b2, v = parts
    H = np.tanh(Zh @ W1.T + b1)
    out = H @ w2 + b2
    if v.size:
        out = out + Zl @ v
    r = out - t
    n = t.shape[0]
    loss = 0.5 * float(r @ r) / n
    r = r / n
    dZ = np.outer(r, w2) * (1.0 - H * H)
    grads = [dZ.T @ Zh, dZ.sum(axis=0), H.T @ r, np.array(r.sum()), Zl.T @ r if v.size else v * 0]
    return loss, grads


def _init(rng, m, p, q):
    W1 = rng.standard_normal((m, p)) / np.sqrt(p)
    w2 = rng.standard_normal(m) / np.sqrt(m)
    v = rng.standard_normal(q) / np.sqrt(max(q, 1)) if q else np.zeros(0)
    return [W1, np.zeros(m), w2, np.array(0.0), v]


def _train_adam(parts, Zh, Zl, t, cfg: TrainConfig, rng):
    n = t.shape[0]
    m_state = [np.zeros_like(p) for p in parts]
    v_state = [np.zeros_like(p) for p in parts]
    b1c, b2c, eps = 0.9, 0.999, 1e-8
    step = 0
    history = []
    best = (np.inf, [p.copy() for p in parts])
    stale = 0
    bs = max(1, min(cfg.batch_size, n))
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            loss, grads = _loss_grad(parts, Zh[idx], Zl[idx], t[idx])
            total += loss * idx.size
            step += 1
            for k, g in enumerate(grads):
                m_state[k] = b1c * m_state[k] + (1 - b1c) * g
                v_state[k] = b2c * v_state[k] + (1 - b2c) * g * g
                mh = m_state[k] / (1 - b1c ** step)
                vh = v_state[k] / (1 - b2c ** step)
                parts[k] = parts[k] - cfg.step * mh / (np.sqrt(vh) + eps)
        avg = total / n
        if not np.isfinite(avg):
            raise FloatingPointError(f"training diverged at epoch {epoch}")
        history.append(avg)
        if avg < best[0] - 1e-12:
            best = (avg, [p.copy() for p in parts])
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return best[1], history


def _train_lbfgs(parts, Zh, Zl, t, cfg: TrainConfig):
    m, p = parts[0].shape
    packer = _Packer(m, p, parts[4].size)
    history = []

    def fun(theta):
        loss, grads = _loss_grad(packer.unpack(theta), Zh, Zl, t)
        if not np.isfinite(loss):
            raise FloatingPointError(f"training diverged at iteration {len(history)}")
        return loss, packer.pack(grads)

    def record(theta):
        history.append(fun(theta)[0])

    res = minimize(fun, packer.pack(parts), jac=True, method="L-BFGS-B", callback=record,
                   options={"maxiter": cfg.maxiter, "ftol": cfg.tol, "gtol": 1e-9})
    return packer.unpack(res.x), history


def fit_tanh_net(Xh, y, units: int, config: TrainConfig = TrainConfig(), Xl=None):
    """Fit a tanh network by squared loss; returns ``(net, diagnostics)``.

    With ``config.restarts > 1`` several initializations are trained and the
    one with the lowest final training loss is kept.
    """
    if units < 1:
        raise ValueError("units must be >= 1")
    Xh = np.asarray(Xh, dtype=float)
    y = np.asarray(y, dtype=float)
    n = Xh.shape[0]
    Xl = np.zeros((n, 0)) if Xl is None else np.asarray(Xl, dtype=float).reshape(n, -1)
    x_mean, x_scale = _standardize(Xh)
    l_mean, l_scale = _standardize(Xl) if Xl.shape[1] else (np.zeros(0), np.ones(0))
    y_mean = float(y.mean())
    y_scale = float(y.std()) or 1.0
    Zh = (Xh - x_mean) / x_scale
    Zl = (Xl - l_mean) / l_scale
    t = (y - y_mean) / y_scale

    if config.optimizer not in ("adam", "lbfgs"):
        raise ValueError(f"unknown optimizer {config.optimizer!r}")
    if y.std() == 0:
        # constant labels: the output layer alone fits them exactly
        zero = TanhNet(np.zeros((units, Zh.shape[1])), np.zeros(units), np.zeros(units), 0.0,
                       np.zeros(Zl.shape[1]), x_mean, x_scale, l_mean, l_scale, y_mean, y_scale)
        return zero, {"final_risk": 0.0, "iterations": 0, "loss_history": [], "best_restart": 0}
    rng = as_generator(config.init_seed)
    best = None
    for attempt in range(max(1, config.restarts)):
        parts = _init(rng, units, Zh.shape[1], Zl.shape[1])
        if config.optimizer == "adam":
            parts, history = _train_adam(parts, Zh, Zl, t, config, rng)
        else:
            parts, history = _train_lbfgs(parts, Zh, Zl, t, config)
        loss = _loss_grad(parts, Zh, Zl, t)[0]
        if best is None or loss < best[0]:
            best = (loss, parts, history, attempt)
    loss, (W1, b1, w2, b2, v), history, attempt = best
    net = TanhNet(W1, b1, w2, float(b2), v, x_mean, x_scale, l_mean, l_scale, y_mean, y_scale)
    diag = {
        "final_risk": float(2 * loss * y_scale ** 2),
        "iterations": len(history),
        "loss_history": [float(h) for h in history],
        "best_restart": attempt,
    }
    return net, diag
