"""Learning pipeline: correlated-beam selection, datasets, MLP training.

A per-beam binary classifier predicts whether beam l will be blocked at
step t from the SNR history of the beam itself plus its L most correlated
beams, observed up to t - eta.  Classes are heavily imbalanced (blocked is
rare), so the cross-entropy terms are weighted by the inverse frequency of
the class they score; the resulting models trade precision for recall.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

FILLER_SNR_DB = 60.0


@dataclass
class BeamTraceMatrix:
    """Aggregated per-beam SNR/state series of one drop.

    snr/gt have shape (n_beams, n_steps); beams with no UEs carry the
    constant filler value and an all-zero state row.
    """

    snr: np.ndarray
    gt: np.ndarray
    occupancy: np.ndarray
    drop_id: int = 0
    filler_db: float = FILLER_SNR_DB

    @property
    def n_beams(self) -> int:
        return self.snr.shape[0]

    @property
    def n_steps(self) -> int:
        return self.snr.shape[1]


@dataclass(frozen=True)
class CorrelatedSet:
    """The L beams whose SNR series lead or lag beam `target` the least."""

    target: int
    members: tuple[int, ...]
    delays: tuple[int, ...]  # steps; positive means the member leads

    def __post_init__(self):
        if self.target in self.members:
            raise ValueError("target beam cannot be its own member")


def _as_trace_list(traces) -> list[BeamTraceMatrix]:
    if isinstance(traces, BeamTraceMatrix):
        return [traces]
    return list(traces)


def cross_correlation_lags(a: np.ndarray, b: np.ndarray):
    """R(tau) = sum_t a[t] * b[t - tau] with zero padding, all |tau| < T.

    Returns (lags, values); lags run from -(T-1) to T-1.
    """
    n = len(a)
    r = np.correlate(a, b, mode="full")
    lags = np.arange(-(n - 1), n)
    return lags, r


def _fft_correlate_rows(target: np.ndarray, cands: np.ndarray) -> np.ndarray:
    """Full cross-correlation of one row against many, FFT-based.

    Output column j corresponds to lag j - (T-1), matching
    cross_correlation_lags.
    """
    n = target.shape[0]
    n_fft = 1 << int(math.ceil(math.log2(2 * n - 1)))
    ft = np.fft.rfft(target, n_fft)
    fc = np.fft.rfft(cands[:, ::-1], n_fft, axis=1)
    full = np.fft.irfft(ft[None, :] * fc, n_fft, axis=1)
    return full[:, :2 * n - 1]


def select_correlated_beams(traces, target: int, n_members: int,
                            use_fft: bool = True) -> CorrelatedSet:
    """Pick the n_members beams with the smallest absolute SNR lag.

    The lag of a candidate is the argmax over two-sided lags of the
    cross-correlation, summed over drops, with each beam's series centered
    on its per-drop mean first (the dc level of a dB trace otherwise
    swamps the lag peak and every delay collapses to zero).  Argmax ties
    prefer the smallest |lag| then the smallest lag; member ties prefer
    the larger correlation peak, then the lower beam id.  Beams whose
    series never moves (unoccupied, all filler) are excluded.
    """
    tr = _as_trace_list(traces)
    n_beams = tr[0].n_beams
    n = tr[0].n_steps
    if not 0 <= target < n_beams:
        raise ValueError("target beam out of range")
    if n_members >= n_beams:
        raise ValueError("need n_members < number of beams")

    stacked = np.stack([t.snr for t in tr])            # (drops, B, T)
    flat = stacked.transpose(1, 0, 2).reshape(n_beams, -1)
    candidates = [b for b in range(n_beams)
                  if b != target and np.ptp(flat[b]) > 0.0]
    skipped = n_beams - 1 - len(candidates)
    if skipped:
        log.info("beam %d: excluded %d constant-valued candidates", target, skipped)
    if len(candidates) < n_members:
        raise ValueError(
            f"only {len(candidates)} usable candidates for beam {target}")

    cand_idx = np.asarray(candidates)
    total = np.zeros((len(candidates), 2 * n - 1))
    for t in tr:
        s = t.snr - t.snr.mean(axis=1, keepdims=True)
        if use_fft:
            total += _fft_correlate_rows(s[target], s[cand_idx])
        else:
            for i, c in enumerate(candidates):
                _, r = cross_correlation_lags(s[target], s[c])
                total[i] += r

    lags = np.arange(-(n - 1), n)
    order = np.lexsort((lags, np.abs(lags)))  # smallest |lag|, then lag
    best_pos = order[np.argmax(total[:, order], axis=1)]
    delays = lags[best_pos]
    peaks = total[np.arange(len(candidates)), best_pos]

    # smallest |delay| first; larger peak then lower beam id break ties
    rank = np.lexsort((cand_idx, -peaks, np.abs(delays)))[:n_members]
    return CorrelatedSet(target=target,
                         members=tuple(int(cand_idx[i]) for i in rank),
                         delays=tuple(int(delays[i]) for i in rank))


@dataclass
class BeamDataset:
    """Windowed samples for one target beam across drops."""

    x: np.ndarray        # (n, eps_steps * (L+1)) dB, time-major rows
    y: np.ndarray        # (n,) int8
    drop_ids: np.ndarray
    t_steps: np.ndarray
    target: int
    members: tuple[int, ...]
    eta_steps: int
    eps_steps: int

    def __len__(self):
        return len(self.y)


def build_dataset(traces, corr: CorrelatedSet, eta_steps: int,
                  eps_steps: int) -> BeamDataset:
    """One sample per step with full history: input rows are the SNR of
    (target, members) over the eps window ending at t - eta, label is the
    target's state at t."""
    tr = _as_trace_list(traces)
    beams = [corr.target, *corr.members]
    xs, ys, drops, steps = [], [], [], []
    for t in tr:
        snr = t.snr[beams]                       # (L+1, T)
        first = eta_steps + eps_steps - 1
        for step in range(first, t.n_steps):
            w0 = step - eta_steps - (eps_steps - 1)
            win = snr[:, w0:w0 + eps_steps]      # (L+1, eps)
            xs.append(win.T.ravel())             # time-major rows
            ys.append(t.gt[corr.target, step])
            drops.append(t.drop_id)
            steps.append(step)
    return BeamDataset(x=np.asarray(xs, dtype=float),
                       y=np.asarray(ys, dtype=np.int8),
                       drop_ids=np.asarray(drops, dtype=np.int64),
                       t_steps=np.asarray(steps, dtype=np.int64),
                       target=corr.target, members=corr.members,
                       eta_steps=eta_steps, eps_steps=eps_steps)


def split_chronological(ds: BeamDataset, train_frac: float = 0.8):
    """80/20 split at drop granularity (oldest drops train).

    Falls back to an in-drop time split when only one drop is present, so
    adjacent near-duplicate windows never straddle the boundary.
    """
    drops = list(dict.fromkeys(ds.drop_ids.tolist()))
    if len(drops) >= 2:
        n_train = int(round(train_frac * len(drops)))
        n_train = min(max(n_train, 1), len(drops) - 1)
        train_set = set(drops[:n_train])
        mask = np.isin(ds.drop_ids, list(train_set))
    else:
        cut = int(round(train_frac * len(ds)))
        cut = min(max(cut, 1), len(ds) - 1)
        mask = np.zeros(len(ds), dtype=bool)
        mask[:cut] = True
    return mask, ~mask


class ClassAbsentError(ValueError):
    """Raised when a dataset lacks one of the two classes entirely."""


def class_weights(labels) -> tuple[float, float]:
    """(mu1, mu2) = (N / #non-blocked, N / #blocked).

    In the loss, each class term is scaled by the inverse frequency of its
    own class, so mu2 (the large weight on sparse data) multiplies the
    blocked term and mu1 the non-blocked one.
    """
    y = np.asarray(labels)
    n = len(y)
    c0 = int(np.sum(y == 0))
    c1 = int(np.sum(y == 1))
    if c0 == 0 or c1 == 0:
        raise ClassAbsentError(
            f"both classes required, got {c0} non-blocked / {c1} blocked")
    return n / c0, n / c1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 1000
    epochs: int = 50
    l2_grid: tuple[float, ...] = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
    restarts: int = 5
    hidden: int = 20
    threshold: float = 0.5


@dataclass
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if (p + r) > 0 else 0.0

    def as_dict(self):
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
                "precision": self.precision, "recall": self.recall,
                "f1": self.f1}


def evaluate(preds, labels) -> Metrics:
    p = np.asarray(preds).astype(int)
    y = np.asarray(labels).astype(int)
    return Metrics(tp=int(np.sum((p == 1) & (y == 1))),
                   fp=int(np.sum((p == 1) & (y == 0))),
                   tn=int(np.sum((p == 0) & (y == 0))),
                   fn=int(np.sum((p == 0) & (y == 1))))


@dataclass
class DnnModel:
    """Two-hidden-layer ReLU MLP with a softmax head.

    Inputs are zero-centered with the mean of the training split; the two
    softmax outputs are (non-blocked, blocked) likelihoods.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    input_mean: np.ndarray
    mu1: float = 1.0
    mu2: float = 1.0
    l2: float = 0.0
    threshold: float = 0.5
    meta: dict = field(default_factory=dict)

    @property
    def params(self):
        return [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float)) - self.input_mean
        h1 = np.maximum(x @ self.w1 + self.b1, 0.0)
        h2 = np.maximum(h1 @ self.w2 + self.b2, 0.0)
        return softmax(h2 @ self.w3 + self.b3)


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def he_init(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    return rng.normal(0.0, math.sqrt(2.0 / fan_in), (fan_in, fan_out))


def predict(model: DnnModel, x: np.ndarray):
    """(hard state, blocked probability); state is 1 at p >= threshold."""
    p = model.forward(x)
    p_blocked = p[:, 1]
    s = (p_blocked >= model.threshold).astype(np.int8)
    if np.ndim(x) == 1:
        return int(s[0]), float(p_blocked[0])
    return s, p_blocked


def weighted_loss_and_grads(params, x_centered, y, mu1, mu2, l2,
                            sample_weights=None):
    """Weighted cross-entropy plus L2 penalty, with exact gradients.

    loss = -(1/n) sum[ w_y * log p_y ] + l2 * sum ||W||^2, where w = mu2
    on blocked samples and mu1 on non-blocked ones (biases unpenalized).
    sample_weights lets callers pass the precomputed per-sample weights.
    """
    w1, b1, w2, b2, w3, b3 = params
    y = np.asarray(y).astype(np.intp)
    n = len(y)
    rows = np.arange(n)
    z1 = x_centered @ w1 + b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ w2 + b2
    h2 = np.maximum(z2, 0.0)
    z3 = h2 @ w3 + b3
    p = softmax(z3)

    sw = sample_weights
    if sw is None:
        sw = np.where(y == 1, mu2, mu1)
    eps = 1e-300
    data = -np.mean(sw * np.log(p[rows, y] + eps))
    reg = l2 * (np.sum(w1 * w1) + np.sum(w2 * w2) + np.sum(w3 * w3))
    loss = data + reg

    dz3 = p
    dz3[rows, y] -= 1.0
    dz3 *= (sw / n)[:, None]
    dw3 = h2.T @ dz3
    dw3 += (2.0 * l2) * w3
    db3 = dz3.sum(axis=0)
    dz2 = dz3 @ w3.T
    dz2 *= z2 > 0.0
    dw2 = h1.T @ dz2
    dw2 += (2.0 * l2) * w2
    db2 = dz2.sum(axis=0)
    dz1 = dz2 @ w2.T
    dz1 *= z1 > 0.0
    dw1 = x_centered.T @ dz1
    dw1 += (2.0 * l2) * w1
    db1 = dz1.sum(axis=0)
    return loss, [dw1, db1, dw2, db2, dw3, db3]


class TrainingDivergedError(RuntimeError):
    pass


def _train_one(x_tr, y_tr, mu1, mu2, l2, cfg: TrainConfig,
               rng: np.random.Generator):
    n_in = x_tr.shape[1]
    h = cfg.hidden
    params = [he_init(rng, n_in, h), np.zeros(h),
              he_init(rng, h, h), np.zeros(h),
              he_init(rng, h, 2), np.zeros(2)]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    step = 0
    n = len(y_tr)
    weights = np.where(y_tr == 1, mu2, mu1)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for s in range(0, n, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            loss, grads = weighted_loss_and_grads(
                params, x_tr[idx], y_tr[idx], mu1, mu2, l2,
                sample_weights=weights[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss {loss}")
            step += 1
            bc1 = 1.0 - cfg.beta1 ** step
            bc2 = 1.0 - cfg.beta2 ** step
            lr = cfg.learning_rate
            for k, g in enumerate(grads):
                mk, vk = m[k], v[k]
                mk *= cfg.beta1
                mk += (1.0 - cfg.beta1) * g
                vk *= cfg.beta2
                g *= g
                vk += (1.0 - cfg.beta2) * g
                params[k] -= lr * (mk / bc1) / (np.sqrt(vk / bc2)
                                                + cfg.adam_eps)
    return params


def train(ds: BeamDataset, cfg: TrainConfig, rng: np.random.Generator):
    """Hyperparameter search over the L2 grid with several restarts each.

    Chronological 80/20 split; the normalizer and the class weights are
    fitted on the training split only.  Returns (best model, its
    validation metrics); the winner maximizes validation F1.
    """
    tr_mask, va_mask = split_chronological(ds)
    x_tr, y_tr = ds.x[tr_mask], ds.y[tr_mask]
    x_va, y_va = ds.x[va_mask], ds.y[va_mask]
    mu1, mu2 = class_weights(y_tr)
    mean = x_tr.mean(axis=0)
    x_trc = x_tr - mean

    best = None
    for l2 in cfg.l2_grid:
        for restart in range(cfg.restarts):
            params = _train_one(x_trc, y_tr, mu1, mu2, l2, cfg, rng)
            model = DnnModel(*params, input_mean=mean, mu1=mu1, mu2=mu2,
                             l2=l2, threshold=cfg.threshold,
                             meta={"target": ds.target,
                                   "members": list(ds.members),
                                   "l2": l2, "restart": restart,
                                   "train_rows": int(tr_mask.sum()),
                                   "val_rows": int(va_mask.sum())})
            s_hat, _ = predict(model, x_va)
            met = evaluate(s_hat, y_va)
            if best is None or met.f1 > best[1].f1:
                best = (model, met)
    model, met = best
    model.meta["val_metrics"] = met.as_dict()
    return model, met


MODEL_FORMAT = "beamsim-dnn-v1"


def save_model(model: DnnModel, path):
    doc = {
        "format": MODEL_FORMAT,
        "shapes": [list(model.w1.shape), list(model.w2.shape),
                   list(model.w3.shape)],
        "weights": {k: getattr(model, k).tolist()
                    for k in ("w1", "b1", "w2", "b2", "w3", "b3")},
        "input_mean": model.input_mean.tolist(),
        "class_weights": [model.mu1, model.mu2],
        "l2": model.l2,
        "threshold": model.threshold,
        "meta": model.meta,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path) -> DnnModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format {doc.get('format')!r}")
    w = {k: np.asarray(v, dtype=float) for k, v in doc["weights"].items()}
    return DnnModel(w1=w["w1"], b1=w["b1"], w2=w["w2"], b2=w["b2"],
                    w3=w["w3"], b3=w["b3"],
                    input_mean=np.asarray(doc["input_mean"], dtype=float),
                    mu1=doc["class_weights"][0], mu2=doc["class_weights"][1],
                    l2=doc["l2"], threshold=doc["threshold"],
                    meta=doc.get("meta", {}))


def save_dataset_csv(ds: BeamDataset, path):
    """CSV per beam: drop_id, t_step, y, then x_<row>_<col> in dB."""
    n_cols = len(ds.members) + 1
    header = ["drop_id", "t_step", "y"]
    header += [f"x_{r}_{c}" for r in range(ds.eps_steps) for c in range(n_cols)]
    with open(path, "w", newline="") as fh:
        wtr = csv.writer(fh)
        wtr.writerow(header)
        for i in range(len(ds)):
            row = [int(ds.drop_ids[i]), int(ds.t_steps[i]), int(ds.y[i])]
            row += [f"{v:.9g}" for v in ds.x[i]]
            wtr.writerow(row)


def load_dataset_csv(path, target: int, members, eta_steps: int,
                     eps_steps: int) -> BeamDataset:
    with open(path, newline="") as fh:
        rdr = csv.reader(fh)
        header = next(rdr)
        rows = [r for r in rdr]
    n_x = len(header) - 3
    x = np.array([[float(v) for v in r[3:]] for r in rows]) if rows else \
        np.zeros((0, n_x))
    return BeamDataset(
        x=x,
        y=np.array([int(r[2]) for r in rows], dtype=np.int8),
        drop_ids=np.array([int(r[0]) for r in rows], dtype=np.int64),
        t_steps=np.array([int(r[1]) for r in rows], dtype=np.int64),
        target=target, members=tuple(members),
        eta_steps=eta_steps, eps_steps=eps_steps)
