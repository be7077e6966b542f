"""Mode-switch detection: from-scratch LSTM, compensation surface, model I/O.

The classifier is a single-layer LSTM over two features per sample
(filtered current and its first derivative), with a logistic output per
time step: 0 = parallel mode, 1 = enveloping mode.  Training is plain
stochastic gradient descent with truncated backpropagation through
time and gradient-norm clipping; everything is numpy and fully
deterministic given the seed.

The raw switch angle read from the position at the detection sample
lags the physical contact by the filter and debounce latency; the
compensation surface, fitted as a quadratic in motor speed plus a
quartic in object size (sequential marginal least squares, combined
additively), removes that systematic bias.  The shared constant of the
additive split is attributed to the speed polynomial.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GripstatError, ModelFormatError, ModelVersionError
from .geometry import FingerGeometry
from .kinematics import GraspCase, decouple_joints
from .signal_pipeline import FilteredTrace

MODEL_FORMAT = "gripstat-model"
MODEL_VERSION = 1


class TrainingDivergedError(GripstatError):
    """Loss became non-finite during training."""


class RankDeficientError(GripstatError):
    """Too few distinct abscissae for the requested polynomial fit."""


# ---------------------------------------------------------------------------
# LSTM parameters and forward/backward
# ---------------------------------------------------------------------------

@dataclass
class LstmParams:
    """Gate weights (input/forget/candidate/output stacked) and output head."""

    wx: np.ndarray       # (input_dim, 4H)
    wh: np.ndarray       # (H, 4H)
    b: np.ndarray        # (4H,)
    w_out: np.ndarray    # (H,)
    b_out: float

    @property
    def input_dim(self) -> int:
        return self.wx.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.wh.shape[0]

    def check(self) -> None:
        h = self.hidden_dim
        if self.wx.shape[1] != 4 * h or self.wh.shape != (h, 4 * h):
            raise ValueError("inconsistent gate weight shapes")
        if self.b.shape != (4 * h,) or self.w_out.shape != (h,):
            raise ValueError("inconsistent bias/head shapes")
        for arr in (self.wx, self.wh, self.b, self.w_out):
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite weights")

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "LstmParams":
        return cls(
            wx=np.zeros((input_dim, 4 * hidden_dim)),
            wh=np.zeros((hidden_dim, 4 * hidden_dim)),
            b=np.zeros(4 * hidden_dim),
            w_out=np.zeros(hidden_dim),
            b_out=0.0,
        )

    @classmethod
    def init_random(cls, input_dim: int, hidden_dim: int, rng: np.random.Generator) -> "LstmParams":
        k = 1.0 / math.sqrt(hidden_dim)
        p = cls(
            wx=rng.uniform(-k, k, (input_dim, 4 * hidden_dim)),
            wh=rng.uniform(-k, k, (hidden_dim, 4 * hidden_dim)),
            b=np.zeros(4 * hidden_dim),
            w_out=rng.uniform(-k, k, hidden_dim),
            b_out=0.0,
        )
        p.b[hidden_dim:2 * hidden_dim] = 1.0   # forget-gate bias
        return p

    def copy(self) -> "LstmParams":
        return LstmParams(self.wx.copy(), self.wh.copy(), self.b.copy(),
                          self.w_out.copy(), float(self.b_out))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _forward_steps(p: LstmParams, x: np.ndarray):
    """Run the recurrence over (B, T, D); return probs and per-step caches."""
    bsz, t_len, _ = x.shape
    h_dim = p.hidden_dim
    h = np.zeros((bsz, h_dim))
    c = np.zeros((bsz, h_dim))
    caches = []
    probs = np.empty((bsz, t_len))
    for t in range(t_len):
        xt = x[:, t, :]
        z = xt @ p.wx + h @ p.wh + p.b
        i = _sigmoid(z[:, :h_dim])
        f = _sigmoid(z[:, h_dim:2 * h_dim])
        g = np.tanh(z[:, 2 * h_dim:3 * h_dim])
        o = _sigmoid(z[:, 3 * h_dim:])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        logit = h_new @ p.w_out + p.b_out
        probs[:, t] = _sigmoid(logit)
        caches.append((xt, h, c, i, f, g, o, c_new, tanh_c, h_new))
        h, c = h_new, c_new
    return probs, caches


def lstm_forward(p: LstmParams, features: np.ndarray) -> np.ndarray:
    """Per-sample probability of the enveloping mode for one sequence.

    ``features`` is (T, 2), already standardized.  Zero initial hidden
    and cell state; outputs are strictly inside (0, 1).
    """
    feats = np.asarray(features, dtype=float)
    if feats.ndim != 2 or feats.shape[0] == 0 or feats.shape[1] != p.input_dim:
        raise ValueError(f"features must be (T, {p.input_dim}), got {feats.shape}")
    p.check()
    probs, _ = _forward_steps(p, feats[None, :, :])
    return probs[0]


def _zero_grads(p: LstmParams) -> dict:
    return {
        "wx": np.zeros_like(p.wx),
        "wh": np.zeros_like(p.wh),
        "b": np.zeros_like(p.b),
        "w_out": np.zeros_like(p.w_out),
        "b_out": 0.0,
    }


def loss_and_grads(
    p: LstmParams,
    x: np.ndarray,
    y: np.ndarray,
    sample_weight: np.ndarray | None = None,
    mask: np.ndarray | None = None,
) -> tuple[float, dict]:
    """Weighted per-sample binary cross-entropy and its exact BPTT gradients.

    ``x`` is (B, T, D), ``y`` and the optional weight/mask are (B, T).
    The loss is the weighted mean over unmasked samples.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    bsz, t_len, _ = x.shape
    w = np.ones((bsz, t_len)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    m = np.ones((bsz, t_len)) if mask is None else np.asarray(mask, dtype=float)
    wm = w * m
    norm = float(np.sum(wm))
    if norm == 0.0:
        raise ValueError("empty mask")
    probs, caches = _forward_steps(p, x)
    eps = 1e-12
    bce = -(y * np.log(probs + eps) + (1.0 - y) * np.log(1.0 - probs + eps))
    loss = float(np.sum(wm * bce) / norm)

    h_dim = p.hidden_dim
    grads = _zero_grads(p)
    dh_carry = np.zeros((bsz, h_dim))
    dc_carry = np.zeros((bsz, h_dim))
    for t in range(t_len - 1, -1, -1):
        xt, h_prev, c_prev, i, f, g, o, c_new, tanh_c, h_new = caches[t]
        dlogit = (probs[:, t] - y[:, t]) * wm[:, t] / norm
        grads["w_out"] += h_new.T @ dlogit
        grads["b_out"] += float(np.sum(dlogit))
        dh = dlogit[:, None] * p.w_out[None, :] + dh_carry
        do = dh * tanh_c
        dc = dc_carry + dh * o * (1.0 - tanh_c ** 2)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dc_carry = dc * f
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g ** 2),
            do * o * (1.0 - o),
        ], axis=1)
        grads["wx"] += xt.T @ dz
        grads["wh"] += h_prev.T @ dz
        grads["b"] += dz.sum(axis=0)
        dh_carry = dz @ p.wh.T
    return loss, grads


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1.0
    epochs: int = 12
    bptt_horizon: int = 64     # truncation window; sequences run full length
    batch_size: int = 64
    clip_norm: float = 5.0
    seed: int = 0
    hidden_dim: int = 32
    holdout_frac: float = 0.15
    class_weighting: bool = True

    def __post_init__(self):
        for name in ("learning_rate", "epochs", "bptt_horizon", "batch_size", "clip_norm"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.holdout_frac < 1.0:
            raise ValueError("holdout_frac must be in [0, 1)")


@dataclass
class TrainReport:
    epoch_loss: list[float] = field(default_factory=list)
    holdout_accuracy: list[float] = field(default_factory=list)
    n_train: int = 0
    n_holdout: int = 0
    class_weights: tuple[float, float] = (1.0, 1.0)

    def to_text(self) -> str:
        lines = [
            f"traces: train={self.n_train} holdout={self.n_holdout} "
            f"class_weights=({self.class_weights[0]:.4g}, {self.class_weights[1]:.4g})",
            "epoch  loss        holdout_acc",
        ]
        for e, (l, a) in enumerate(zip(self.epoch_loss, self.holdout_accuracy), start=1):
            lines.append(f"{e:>5d}  {l:<10.6f}  {a:.6f}")
        return "\n".join(lines) + "\n"


def trace_features(ft: FilteredTrace) -> np.ndarray:
    """(T, 2) feature matrix: filtered current and its derivative."""
    return np.stack([ft.current_filt, ft.current_deriv], axis=1)


def _pad_batch(feats: list[np.ndarray], labels: list[np.ndarray]):
    bsz = len(feats)
    t_max = max(f.shape[0] for f in feats)
    x = np.zeros((bsz, t_max, feats[0].shape[1]))
    y = np.zeros((bsz, t_max))
    m = np.zeros((bsz, t_max))
    for j, (f, l) in enumerate(zip(feats, labels)):
        n = f.shape[0]
        x[j, :n] = f
        y[j, :n] = l
        m[j, :n] = 1.0
    return x, y, m


def _clip_gradients(grads: dict, clip_norm: float) -> None:
    total = math.sqrt(sum(float(np.sum(np.square(v))) for v in grads.values()))
    if total > clip_norm:
        scale = clip_norm / total
        for key in grads:
            grads[key] = grads[key] * scale


def lstm_train(
    dataset: list[tuple[np.ndarray, np.ndarray]],
    cfg: TrainConfig,
) -> tuple[LstmParams, np.ndarray, np.ndarray, TrainReport]:
    """Train on (features, labels) pairs; returns params + normalization.

    Features are raw (unstandardized); the z-score constants are
    computed from the training split and returned for storage in the
    model document.  Deterministic given the config seed.
    """
    if not dataset:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(dataset))
    n_hold = int(round(cfg.holdout_frac * len(dataset)))
    hold_idx = order[:n_hold]
    train_idx = order[n_hold:]
    if len(train_idx) == 0:
        raise ValueError("holdout fraction leaves no training traces")

    stacked = np.concatenate([dataset[i][0] for i in train_idx], axis=0)
    feat_mean = stacked.mean(axis=0)
    feat_std = stacked.std(axis=0)
    feat_std[feat_std < 1e-12] = 1.0

    def norm(f: np.ndarray) -> np.ndarray:
        return (f - feat_mean) / feat_std

    all_labels = np.concatenate([dataset[i][1] for i in train_idx])
    n1 = float(np.sum(all_labels))
    n0 = float(len(all_labels) - n1)
    if cfg.class_weighting and n0 > 0 and n1 > 0:
        total = n0 + n1
        class_w = (total / (2.0 * n0), total / (2.0 * n1))
    else:
        class_w = (1.0, 1.0)

    params = LstmParams.init_random(2, cfg.hidden_dim, rng)
    report = TrainReport(n_train=len(train_idx), n_holdout=len(hold_idx), class_weights=class_w)

    for epoch in range(cfg.epochs):
        perm = rng.permutation(len(train_idx))
        epoch_loss = 0.0
        n_batches = 0
        for b0 in range(0, len(perm), cfg.batch_size):
            batch = [train_idx[j] for j in perm[b0:b0 + cfg.batch_size]]
            feats = [norm(dataset[i][0]) for i in batch]
            labels = [np.asarray(dataset[i][1], dtype=float) for i in batch]
            x, y, m = _pad_batch(feats, labels)
            w = np.where(y > 0.5, class_w[1], class_w[0])
            t_len = x.shape[1]
            # truncated BPTT: forward/backward per horizon chunk, state carried
            h_state = np.zeros((x.shape[0], cfg.hidden_dim))
            c_state = np.zeros((x.shape[0], cfg.hidden_dim))
            for t0 in range(0, t_len, cfg.bptt_horizon):
                sl = slice(t0, min(t0 + cfg.bptt_horizon, t_len))
                loss, grads, h_state, c_state = _chunk_step(
                    params, x[:, sl], y[:, sl], w[:, sl], m[:, sl], h_state, c_state)
                if not math.isfinite(loss):
                    raise TrainingDivergedError(
                        f"loss became non-finite at epoch {epoch + 1}, "
                        f"batch {n_batches + 1}, chunk start {t0}"
                    )
                _clip_gradients(grads, cfg.clip_norm)
                params.wx -= cfg.learning_rate * grads["wx"]
                params.wh -= cfg.learning_rate * grads["wh"]
                params.b -= cfg.learning_rate * grads["b"]
                params.w_out -= cfg.learning_rate * grads["w_out"]
                params.b_out -= cfg.learning_rate * grads["b_out"]
                epoch_loss += loss * float(np.sum(m[:, sl]))
                n_batches += 1
        total_m = sum(dataset[i][0].shape[0] for i in train_idx)
        report.epoch_loss.append(epoch_loss / max(1, total_m))

        if len(hold_idx) > 0:
            correct = 0
            count = 0
            for i in hold_idx:
                probs = lstm_forward(params, norm(dataset[i][0]))
                pred = (probs >= 0.5).astype(int)
                correct += int(np.sum(pred == dataset[i][1]))
                count += len(pred)
            report.holdout_accuracy.append(correct / max(1, count))
        else:
            report.holdout_accuracy.append(math.nan)

    return params, feat_mean, feat_std, report


def _chunk_step(p, x, y, w, m, h0, c0):
    """One truncated-BPTT chunk with incoming state (treated as constant)."""
    bsz, t_len, _ = x.shape
    h_dim = p.hidden_dim
    h, c = h0, c0
    caches = []
    probs = np.empty((bsz, t_len))
    for t in range(t_len):
        xt = x[:, t, :]
        z = xt @ p.wx + h @ p.wh + p.b
        i = _sigmoid(z[:, :h_dim])
        f = _sigmoid(z[:, h_dim:2 * h_dim])
        g = np.tanh(z[:, 2 * h_dim:3 * h_dim])
        o = _sigmoid(z[:, 3 * h_dim:])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        probs[:, t] = _sigmoid(h_new @ p.w_out + p.b_out)
        caches.append((xt, h, c, i, f, g, o, c_new, tanh_c, h_new))
        h, c = h_new, c_new

    wm = w * m
    norm = float(np.sum(wm))
    if norm == 0.0:
        return 0.0, _zero_grads(p), h, c
    eps = 1e-12
    bce = -(y * np.log(probs + eps) + (1.0 - y) * np.log(1.0 - probs + eps))
    loss = float(np.sum(wm * bce) / norm)

    grads = _zero_grads(p)
    dh_carry = np.zeros((bsz, h_dim))
    dc_carry = np.zeros((bsz, h_dim))
    for t in range(t_len - 1, -1, -1):
        xt, h_prev, c_prev, i, f, g, o, c_new, tanh_c, h_new = caches[t]
        dlogit = (probs[:, t] - y[:, t]) * wm[:, t] / norm
        grads["w_out"] += h_new.T @ dlogit
        grads["b_out"] += float(np.sum(dlogit))
        dh = dlogit[:, None] * p.w_out[None, :] + dh_carry
        do = dh * tanh_c
        dc = dc_carry + dh * o * (1.0 - tanh_c ** 2)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dc_carry = dc * f
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g ** 2),
            do * o * (1.0 - o),
        ], axis=1)
        grads["wx"] += xt.T @ dz
        grads["wh"] += h_prev.T @ dz
        grads["b"] += dz.sum(axis=0)
        dh_carry = dz @ p.wh.T
    return loss, grads, h, c


# ---------------------------------------------------------------------------
# Compensation surface
# ---------------------------------------------------------------------------

@dataclass
class CompensationSurface:
    """Additive quadratic-in-speed + quartic-in-size correction (rad)."""

    speed_coeffs: tuple[float, float, float]            # highest power first
    size_coeffs: tuple[float, float, float, float, float]
    rule: str = "additive"
    speed_domain: tuple[float, float] = (50.0, 80.0)
    size_domain: tuple[float, float] = (0.0, 130.0)

    def value(self, speed: float, size: float) -> tuple[float, bool]:
        """Surface value and an extrapolation flag."""
        extrapolated = not (
            self.speed_domain[0] <= speed <= self.speed_domain[1]
            and self.size_domain[0] <= size <= self.size_domain[1]
        )
        v = float(np.polyval(self.speed_coeffs, speed) + np.polyval(self.size_coeffs, size))
        return v, extrapolated

    @classmethod
    def zero(cls) -> "CompensationSurface":
        return cls(speed_coeffs=(0.0, 0.0, 0.0), size_coeffs=(0.0, 0.0, 0.0, 0.0, 0.0))


@dataclass
class CompensationFitReport:
    residual_rms: float
    speed_marginal_rms: float
    size_marginal_rms: float
    n_samples: int


def fit_compensation(
    samples: list[tuple[float, float, float]]
) -> tuple[CompensationSurface, CompensationFitReport]:
    """Sequential marginal least squares on (speed, size, deviation) triples.

    First a quadratic is fitted to the per-speed mean deviations, then a
    quartic to the per-size means of the residuals; the two are summed.
    Any constant shared between the marginals lands in the quadratic.
    """
    if not samples:
        raise RankDeficientError("no samples")
    arr = np.asarray(samples, dtype=float)
    speeds, sizes, devs = arr[:, 0], arr[:, 1], arr[:, 2]
    u_speeds = np.unique(speeds)
    u_sizes = np.unique(sizes)
    if len(u_speeds) < 3:
        raise RankDeficientError(f"need >= 3 distinct speeds, got {len(u_speeds)}")
    if len(u_sizes) < 5:
        raise RankDeficientError(f"need >= 5 distinct sizes, got {len(u_sizes)}")

    speed_means = np.array([devs[speeds == s].mean() for s in u_speeds])
    q = np.polyfit(u_speeds, speed_means, 2)
    residual = devs - np.polyval(q, speeds)
    size_means = np.array([residual[sizes == s].mean() for s in u_sizes])
    r = np.polyfit(u_sizes, size_means, 4)
    final = residual - np.polyval(r, sizes)

    surface = CompensationSurface(
        speed_coeffs=tuple(float(v) for v in q),
        size_coeffs=tuple(float(v) for v in r),
        speed_domain=(float(u_speeds.min()), float(u_speeds.max())),
        size_domain=(float(u_sizes.min()), float(u_sizes.max())),
    )
    report = CompensationFitReport(
        residual_rms=float(np.sqrt(np.mean(final ** 2))),
        speed_marginal_rms=float(np.sqrt(np.mean((speed_means - np.polyval(q, u_speeds)) ** 2))),
        size_marginal_rms=float(np.sqrt(np.mean((size_means - np.polyval(r, u_sizes)) ** 2))),
        n_samples=len(samples),
    )
    return surface, report


def compensate(
    surface: CompensationSurface, speed: float, size: float, theta1_raw: float
) -> tuple[float, bool]:
    """Corrected switch angle: raw minus the fitted systematic deviation."""
    v, extrapolated = surface.value(speed, size)
    return theta1_raw - v, extrapolated


# ---------------------------------------------------------------------------
# Switch detection
# ---------------------------------------------------------------------------

@dataclass
class ModeModel:
    """Everything needed to run detection: weights, normalization, surface."""

    params: LstmParams
    feat_mean: np.ndarray
    feat_std: np.ndarray
    surface: CompensationSurface
    threshold: float = 0.5
    debounce: int = 10

    def probabilities(self, features: np.ndarray) -> np.ndarray:
        return lstm_forward(self.params, (features - self.feat_mean) / self.feat_std)


def detect_switch(
    ft: FilteredTrace,
    model: ModeModel,
    g: FingerGeometry,
    threshold: float | None = None,
) -> tuple[int | None, float | None, np.ndarray]:
    """First sustained threshold crossing and the raw switch angle.

    Returns (switch_index, theta1_raw, probabilities).  The switch index
    is the first sample whose probability reaches the threshold and
    stays there for the debounce horizon; theta1_raw is reconstructed
    from the delay-aligned position at that sample through the
    parallel-mode closure.  No crossing (or threshold >= 1) gives
    (None, None, probs).
    """
    thr = model.threshold if threshold is None else threshold
    probs = model.probabilities(trace_features(ft))
    if thr >= 1.0:
        return None, None, probs
    above = probs >= thr
    d = max(1, model.debounce)
    idx = None
    run = 0
    for k, flag in enumerate(above):
        run = run + 1 if flag else 0
        if run >= d:
            idx = k - d + 1
            break
    if idx is None:
        return None, None, probs
    theta_a0 = float(ft.trace.meta.get("theta_a0", 0.0))
    theta_a = theta_a0 + float(ft.position_aligned[idx]) / g.screw_gain
    theta1, _, _ = decouple_joints(g, GraspCase.NO_CONTACT, theta_a, enforce_limits=False)
    return idx, theta1, probs


# ---------------------------------------------------------------------------
# Model document I/O (versioned, checksummed)
# ---------------------------------------------------------------------------

def _payload_dict(model: ModeModel) -> dict:
    return {
        "input_dim": model.params.input_dim,
        "hidden_dim": model.params.hidden_dim,
        "wx": model.params.wx.tolist(),
        "wh": model.params.wh.tolist(),
        "b": model.params.b.tolist(),
        "w_out": model.params.w_out.tolist(),
        "b_out": model.params.b_out,
        "feat_mean": model.feat_mean.tolist(),
        "feat_std": model.feat_std.tolist(),
        "surface": dataclasses.asdict(model.surface),
        "threshold": model.threshold,
        "debounce": model.debounce,
    }


def _payload_checksum(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def save_model(model: ModeModel, path: str | Path) -> None:
    """Versioned, checksummed model document (bit-exact float round trip)."""
    payload = _payload_dict(model)
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "sha256": _payload_checksum(payload),
        "payload": payload,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path: str | Path) -> ModeModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"corrupt model document {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path} is not a {MODEL_FORMAT} document")
    version = doc.get("version")
    if version != MODEL_VERSION:
        raise ModelVersionError(
            f"document version {version!r}, reader supports version {MODEL_VERSION}"
        )
    payload = doc.get("payload")
    if payload is None or doc.get("sha256") != _payload_checksum(payload):
        raise ModelFormatError(f"checksum mismatch in {path}")
    params = LstmParams(
        wx=np.asarray(payload["wx"], dtype=float),
        wh=np.asarray(payload["wh"], dtype=float),
        b=np.asarray(payload["b"], dtype=float),
        w_out=np.asarray(payload["w_out"], dtype=float),
        b_out=float(payload["b_out"]),
    )
    params.check()
    sdict = dict(payload["surface"])
    surface = CompensationSurface(
        speed_coeffs=tuple(sdict["speed_coeffs"]),
        size_coeffs=tuple(sdict["size_coeffs"]),
        rule=sdict["rule"],
        speed_domain=tuple(sdict["speed_domain"]),
        size_domain=tuple(sdict["size_domain"]),
    )
    return ModeModel(
        params=params,
        feat_mean=np.asarray(payload["feat_mean"], dtype=float),
        feat_std=np.asarray(payload["feat_std"], dtype=float),
        surface=surface,
        threshold=float(payload["threshold"]),
        debounce=int(payload["debounce"]),
    )
