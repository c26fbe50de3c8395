"""Outcome models: win probability, payoff regressions, normalization.

The win model is a from-scratch classifier (plain logistic regression
or a one-hidden-layer tanh network) trained by mini-batch gradient
descent on the log loss.  Payoffs are two ordinary least squares
regressions: amount won on (intercept, pot, active players) and amount
lost on (intercept, own contribution).  A pooled affine normalization
then moves every raw payoff onto a positive scale whose training
minimum is exactly 1, as the downstream utility requires.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .decisions import PreflopDecision
from .features import FeatureSchema
from .rum import Gamble

_PROB_EPS = 1e-12

WIN_MODEL_KINDS = ("logistic", "mlp")


@dataclass(frozen=True)
class WinConfig:
    kind: str = "logistic"
    seed: int = 0
    test_fraction: float = 0.2
    hidden: int = 16
    epochs: int = 60
    batch_size: int = 64
    learning_rate: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in WIN_MODEL_KINDS:
            raise ValueError(f"unknown win model kind {self.kind!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")
        if self.hidden < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("hidden, epochs, and batch_size must be positive")


@dataclass(eq=False)
class WinModel:
    """Fitted classifier with its encoding schema and training record."""

    kind: str
    params: tuple[np.ndarray, ...]
    schema: FeatureSchema
    seed: int
    epochs: int
    held_out_accuracy: float
    n_train: int
    n_test: int

    @property
    def dim(self) -> int:
        return self.params[0].shape[0]


def _init_params(
    kind: str, dim: int, hidden: int, rng: np.random.Generator
) -> tuple[np.ndarray, ...]:
    if kind == "logistic":
        return (np.zeros(dim), np.zeros(1))
    return (
        rng.normal(0.0, 1.0 / np.sqrt(dim), size=(dim, hidden)),
        np.zeros(hidden),
        rng.normal(0.0, 1.0 / np.sqrt(hidden), size=hidden),
        np.zeros(1),
    )


def _logits(kind: str, params: Sequence[np.ndarray], X: np.ndarray) -> np.ndarray:
    if kind == "logistic":
        w, b = params
        return X @ w + b[0]
    W1, b1, w2, b2 = params
    return np.tanh(X @ W1 + b1) @ w2 + b2[0]


def loss_and_grad(
    kind: str, params: Sequence[np.ndarray], X: np.ndarray, y: np.ndarray
) -> tuple[float, list[np.ndarray]]:
    """Mean log loss and its gradient in every parameter array.

    Computed through the softplus form, so it stays finite and smooth
    at extreme logits (no probability clipping inside the loss).
    """
    n = X.shape[0]
    if kind == "logistic":
        w, b = params
        z = X @ w + b[0]
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
        dz = (_sigmoid(z) - y) / n
        return loss, [X.T @ dz, np.array([dz.sum()])]
    W1, b1, w2, b2 = params
    h = np.tanh(X @ W1 + b1)
    z = h @ w2 + b2[0]
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    dz = (_sigmoid(z) - y) / n
    dh = np.outer(dz, w2) * (1.0 - h * h)
    return loss, [X.T @ dh, dh.sum(axis=0), h.T @ dz, np.array([dz.sum()])]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _encode_training(
    decisions: Sequence[PreflopDecision], schema: FeatureSchema
) -> tuple[np.ndarray, np.ndarray]:
    usable = [d for d in decisions if d.sklansky is not None and not d.forced]
    if not usable:
        raise ValueError("no usable training decisions")
    X = np.stack([schema.encode(d) for d in usable])
    y = np.array([1.0 if d.outcome == "won" else 0.0 for d in usable])
    return X, y


def fit_win_model(
    decisions: Sequence[PreflopDecision],
    config: WinConfig | None = None,
    schema: FeatureSchema | None = None,
) -> WinModel:
    """Train the classifier on realized outcomes, deterministic per seed.

    Rows without a strength rank and forced rows are dropped before
    training.  Both outcome classes must be present, in the input and
    in the realized train split.
    """
    config = config or WinConfig()
    if schema is None:
        schema = FeatureSchema.from_decisions(decisions)
    X, y = _encode_training(decisions, schema)
    if len(set(y.tolist())) < 2:
        raise ValueError("training outcomes are single-class")
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(len(y))
    n_test = int(round(config.test_fraction * len(y)))
    if n_test == 0 or n_test == len(y):
        raise ValueError("not enough data for a train/test split")
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    X_tr, y_tr = X[train_idx], y[train_idx]
    X_te, y_te = X[test_idx], y[test_idx]
    if len(set(y_tr.tolist())) < 2:
        raise ValueError("training outcomes are single-class")
    params = [p.copy() for p in _init_params(config.kind, X.shape[1], config.hidden, rng)]
    for _ in range(config.epochs):
        order = rng.permutation(len(y_tr))
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            _, grads = loss_and_grad(config.kind, params, X_tr[batch], y_tr[batch])
            for p, g in zip(params, grads):
                p -= config.learning_rate * g
    p_te = _sigmoid(_logits(config.kind, params, X_te))
    accuracy = float(np.mean((p_te > 0.5) == (y_te > 0.5)))
    return WinModel(
        kind=config.kind,
        params=tuple(p.copy() for p in params),
        schema=schema,
        seed=config.seed,
        epochs=config.epochs,
        held_out_accuracy=accuracy,
        n_train=len(y_tr),
        n_test=len(y_te),
    )


def predict_win_prob(model: WinModel, features: np.ndarray) -> float:
    """Win probability for one encoded decision, strictly inside (0, 1)."""
    x = np.asarray(features, dtype=float)
    if x.shape != (model.dim,):
        raise ValueError(f"expected {model.dim} features, got shape {x.shape}")
    z = _logits(model.kind, model.params, x[None, :])[0]
    return float(np.clip(_sigmoid(np.array([z]))[0], _PROB_EPS, 1.0 - _PROB_EPS))


@dataclass(frozen=True)
class LinReg:
    names: tuple[str, ...]
    coef: tuple[float, ...]
    r_squared: float
    n_obs: int

    def predict(self, *values: float) -> float:
        if len(values) != len(self.names) - 1:
            raise ValueError(f"expected {len(self.names) - 1} regressors")
        return self.coef[0] + float(np.dot(self.coef[1:], values))


@dataclass(frozen=True)
class PayoffModels:
    win_reg: LinReg
    loss_reg: LinReg

    def predict_win(self, preflop_pot: float, n_active: float) -> float:
        return self.win_reg.predict(preflop_pot, n_active)

    def predict_loss(self, own_contribution: float) -> float:
        return self.loss_reg.predict(own_contribution)


def _ols(X: np.ndarray, y: np.ndarray, names: tuple[str, ...]) -> LinReg:
    if X.shape[0] < 3:
        raise ValueError(f"need at least 3 observations, got {X.shape[0]}")
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise ValueError(f"rank-deficient design for {names}")
    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res < 1e-12 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return LinReg(
        names=names,
        coef=tuple(float(c) for c in coef),
        r_squared=r2,
        n_obs=X.shape[0],
    )


def fit_payoff_models(decisions: Sequence[PreflopDecision]) -> PayoffModels:
    """Two OLS fits on played hands: winners' take and losers' loss."""
    won = [d for d in decisions
           if d.y == "play" and not d.forced and d.outcome == "won"]
    lost = [d for d in decisions
            if d.y == "play" and not d.forced and d.outcome == "lost"]
    X_w = np.array([[1.0, d.preflop_pot, float(d.n_active)] for d in won])
    y_w = np.array([d.amount for d in won])
    X_l = np.array([[1.0, d.own_contribution] for d in lost])
    y_l = np.array([d.amount for d in lost])
    if len(won) < 3:
        raise ValueError(f"need at least 3 winning observations, got {len(won)}")
    if len(lost) < 3:
        raise ValueError(f"need at least 3 losing observations, got {len(lost)}")
    return PayoffModels(
        win_reg=_ols(X_w, y_w, ("intercept", "preflop_pot", "n_active")),
        loss_reg=_ols(X_l, y_l, ("intercept", "own_contribution")),
    )


@dataclass(frozen=True)
class NormalizationSpec:
    """Pooled affine payoff map whose training minimum lands exactly on 1.

    ``apply`` is arranged as (v - vmin)/std + 1 so the minimum maps to
    1.0 without rounding residue; mean and shift are carried for
    reporting and serialization.
    """

    mean: float
    std: float
    vmin: float

    def __post_init__(self) -> None:
        if not self.std > 0:
            raise ValueError("payoff spread must be positive")

    @property
    def shift(self) -> float:
        return 1.0 - (self.vmin - self.mean) / self.std

    @classmethod
    def fit(cls, values: Sequence[float] | np.ndarray) -> "NormalizationSpec":
        v = np.asarray(values, dtype=float)
        if v.size < 2:
            raise ValueError("need at least 2 pooled payoffs")
        std = float(v.std())
        if std == 0.0:
            raise ValueError("payoff spread must be positive")
        return cls(mean=float(v.mean()), std=std, vmin=float(v.min()))

    def apply(self, value: float) -> float:
        return (value - self.vmin) / self.std + 1.0

    def apply_clamped(self, value: float) -> tuple[float, bool]:
        x = self.apply(value)
        if x < 1.0:
            return 1.0 + 1e-6, True
        return x, False


@dataclass
class ClampCounter:
    count: int = 0


def pooled_raw_payoffs(
    decisions: Sequence[PreflopDecision],
    win_model: WinModel,
    payoff_models: PayoffModels,
) -> np.ndarray:
    """Every raw payoff any of these decisions' gambles will contain."""
    out = []
    for d in decisions:
        if d.sklansky is None:
            continue
        out.append(payoff_models.predict_win(d.preflop_pot, d.n_active))
        out.append(payoff_models.predict_loss(d.own_contribution))
        out.append(-d.own_contribution)
    return np.array(out)


def build_gamble(
    decision: PreflopDecision,
    win_model: WinModel,
    payoff_models: PayoffModels,
    norm: NormalizationSpec,
    counter: ClampCounter | None = None,
) -> Gamble:
    """Assemble the two-option choice a decision's features imply.

    Payoffs below the pooled training minimum (out-of-sample
    predictions) are clamped just above 1, counted on ``counter``.
    """
    if win_model is None or payoff_models is None or norm is None:
        raise ValueError("all models must be fitted before building gambles")
    p_win = predict_win_prob(win_model, win_model.schema.encode(decision))
    raw = (
        payoff_models.predict_win(decision.preflop_pot, float(decision.n_active)),
        payoff_models.predict_loss(decision.own_contribution),
        -decision.own_contribution,
    )
    normed = []
    for v in raw:
        x, clamped = norm.apply_clamped(v)
        if clamped and counter is not None:
            counter.count += 1
        normed.append(x)
    v_win, v_lose, v_fold = normed
    return Gamble(
        play=((p_win, v_win), (1.0 - p_win, v_lose)),
        fold=((1.0, v_fold),),
    )


def serialize_models(
    win_model: WinModel, payoff_models: PayoffModels, norm: NormalizationSpec
) -> dict:
    return {
        "version": 1,
        "win_model": {
            "kind": win_model.kind,
            "params": [p.tolist() for p in win_model.params],
            "players": list(win_model.schema.players),
            "seed": win_model.seed,
            "epochs": win_model.epochs,
            "held_out_accuracy": win_model.held_out_accuracy,
            "n_train": win_model.n_train,
            "n_test": win_model.n_test,
        },
        "payoff_models": {
            side: {
                "names": list(reg.names),
                "coef": list(reg.coef),
                "r_squared": reg.r_squared,
                "n_obs": reg.n_obs,
            }
            for side, reg in (
                ("win", payoff_models.win_reg),
                ("loss", payoff_models.loss_reg),
            )
        },
        "normalization": {"mean": norm.mean, "std": norm.std, "vmin": norm.vmin},
    }


def deserialize_models(
    raw: dict,
) -> tuple[WinModel, PayoffModels, NormalizationSpec]:
    if raw.get("version") != 1:
        raise ValueError(f"unsupported models file version {raw.get('version')!r}")
    wm = raw["win_model"]
    win_model = WinModel(
        kind=wm["kind"],
        params=tuple(np.array(p, dtype=float) for p in wm["params"]),
        schema=FeatureSchema(players=tuple(wm["players"])),
        seed=wm["seed"],
        epochs=wm["epochs"],
        held_out_accuracy=wm["held_out_accuracy"],
        n_train=wm["n_train"],
        n_test=wm["n_test"],
    )
    regs = {}
    for side in ("win", "loss"):
        r = raw["payoff_models"][side]
        regs[side] = LinReg(
            names=tuple(r["names"]),
            coef=tuple(r["coef"]),
            r_squared=r["r_squared"],
            n_obs=r["n_obs"],
        )
    nm = raw["normalization"]
    return (
        win_model,
        PayoffModels(win_reg=regs["win"], loss_reg=regs["loss"]),
        NormalizationSpec(mean=nm["mean"], std=nm["std"], vmin=nm["vmin"]),
    )
