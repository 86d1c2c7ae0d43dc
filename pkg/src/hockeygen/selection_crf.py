"""Linear-chain CRF for binary event selection (skip = 0, select = 1).

The model has one weight per (feature, label) and a 2x2 transition table.
Label weighting follows the chain rule decomposition of the likelihood,

    -log p(y | x) = -sum_t log p(y_t | y_<t, x),

and scales each position's term by ``positive_label_weight`` when the gold
label is select. With weight 1 this is the ordinary negative log-likelihood.
Regularization is ``c1 * |w|_1 + c2 * |w|_2^2`` on the dataset sum, as in
CRFsuite.
"""

from __future__ import annotations

import io
import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch
from scipy.optimize import minimize
from scipy.special import logsumexp

from .game_model import EVENT_TYPES, EndResult, GameRecord, Goal, Penalty, Save, event_time

log = logging.getLogger(__name__)

SKIP, SELECT = 0, 1
LABELS = ("skip", "select")
MAGIC = "CRF1"

EventFeatures = dict  # feature name -> value


class NonConvergence(UserWarning):
    pass


@dataclass(frozen=True)
class CrfTrainConfig:
    c1: float = 35.0
    c2: float = 0.5
    positive_label_weight: float = 0.85
    max_iterations: int = 500
    tolerance: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("regularization coefficients must be non-negative")
        if self.positive_label_weight <= 0:
            raise ValueError("positive_label_weight must be positive")


# -- features -------------------------------------------------------------


def _type_of(ev) -> str:
    return ev.type_name


def _saves_bucket(n: int) -> str:
    if n < 20:
        return "lt20"
    if n >= 40:
        return "ge40"
    lo = n // 5 * 5
    return f"{lo}-{lo + 4}"


def featurize_sequence(game: GameRecord) -> list[EventFeatures]:
    """One feature dict per event; all values are 1.0 indicators."""
    events = game.events
    n = len(events)
    er = game.end_result
    out = []
    home = guest = 0
    for i, ev in enumerate(events):
        kind = _type_of(ev)
        f = {"bias": 1.0, f"type={kind}": 1.0}
        if i == 0:
            f["is_first"] = 1.0
        if i == n - 1:
            f["is_last"] = 1.0
        f[f"prev_type={_type_of(events[i - 1]) if i else 'BOS'}"] = 1.0
        f[f"next_type={_type_of(events[i + 1]) if i + 1 < n else 'EOS'}"] = 1.0
        f[f"position={min(4, 5 * i // max(n, 1))}"] = 1.0
        t = event_time(ev)
        if t is not None:
            f[f"{kind}:period={t.period}"] = 1.0
        if isinstance(ev, EndResult):
            f[f"resolution={ev.resolution.value}"] = 1.0
            margin = ev.final_score.home - ev.final_score.guest
        elif isinstance(ev, Goal):
            home, guest = ev.resulting_score.home, ev.resulting_score.guest
            f[f"strength={ev.strength.value}"] = 1.0
            for flag in sorted(ev.derived):
                f[f"flag={flag}"] = 1.0
            margin = home - guest
        elif isinstance(ev, Penalty):
            f[f"penalty_minutes={ev.penalty_minutes}"] = 1.0
            margin = home - guest
        elif isinstance(ev, Save):
            f[f"saves={_saves_bucket(ev.count)}"] = 1.0
            margin = er.final_score.home - er.final_score.guest
        f[f"{kind}:margin={max(-3, min(3, margin))}"] = 1.0
        out.append(f)
    return out


# -- model ----------------------------------------------------------------


@dataclass
class CrfModel:
    feature_registry: dict[str, int]
    emission_weights: np.ndarray  # (n_features, 2)
    transition_weights: np.ndarray  # (2, 2) from-label x to-label
    final_objective: float | None = None
    history: list[float] = field(default_factory=list, repr=False)

    @classmethod
    def zeros(cls, registry: dict[str, int]) -> "CrfModel":
        return cls(dict(registry), np.zeros((len(registry), 2)), np.zeros((2, 2)))

    @property
    def n_params(self) -> int:
        return self.emission_weights.size + 4

    def flat(self) -> np.ndarray:
        return np.concatenate([self.emission_weights.ravel(), self.transition_weights.ravel()])

    def with_flat(self, w: np.ndarray) -> "CrfModel":
        k = self.emission_weights.size
        return CrfModel(
            self.feature_registry,
            np.asarray(w[:k], dtype=float).reshape(-1, 2).copy(),
            np.asarray(w[k:], dtype=float).reshape(2, 2).copy(),
        )

    def design_matrix(self, sequence: Sequence[EventFeatures]) -> np.ndarray:
        x = np.zeros((len(sequence), len(self.feature_registry)))
        for t, feats in enumerate(sequence):
            for name, value in feats.items():
                j = self.feature_registry.get(name)
                if j is not None:
                    x[t, j] = value
        return x

    def emissions(self, sequence) -> np.ndarray:
        return self.design_matrix(sequence) @ self.emission_weights

    # serialization: magic line, registry, weight table; floats via repr round-trip
    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write(f"{MAGIC}\n")
        buf.write(f"features\t{len(self.feature_registry)}\n")
        for name, j in sorted(self.feature_registry.items(), key=lambda kv: kv[1]):
            w = self.emission_weights[j]
            buf.write(f"{name}\t{float(w[0])!r}\t{float(w[1])!r}\n")
        buf.write("transitions\n")
        for row in self.transition_weights:
            buf.write(f"{float(row[0])!r}\t{float(row[1])!r}\n")
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> "CrfModel":
        lines = text.splitlines()
        if not lines or lines[0] != MAGIC:
            raise ValueError("not a CRF1 model file")
        n = int(lines[1].split("\t")[1])
        registry = {}
        w = np.zeros((n, 2))
        for j, line in enumerate(lines[2 : 2 + n]):
            name, a, b = line.split("\t")
            registry[name] = j
            w[j] = float(a), float(b)
        if lines[2 + n] != "transitions":
            raise ValueError("malformed CRF1 model file")
        tr = np.array([[float(v) for v in lines[3 + n + r].split("\t")] for r in range(2)])
        return cls(registry, w, tr)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "CrfModel":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def build_registry(sequences: Sequence[Sequence[EventFeatures]]) -> dict[str, int]:
    names = sorted({name for seq in sequences for feats in seq for name in feats})
    return {name: j for j, name in enumerate(names)}


# -- inference --------------------------------------------------------------


def forward_backward(emissions: np.ndarray, transitions: np.ndarray):
    """Log-space alpha/beta tables, log-partition from both ends, node marginals."""
    n = len(emissions)
    alpha = np.zeros((n, 2))
    beta = np.zeros((n, 2))
    alpha[0] = emissions[0]
    for t in range(1, n):
        alpha[t] = emissions[t] + logsumexp(alpha[t - 1][:, None] + transitions, axis=0)
    for t in range(n - 2, -1, -1):
        beta[t] = logsumexp(transitions + emissions[t + 1] + beta[t + 1], axis=1)
    log_z_fwd = logsumexp(alpha[-1])
    log_z_bwd = logsumexp(emissions[0] + beta[0])
    marginals = np.exp(alpha + beta - log_z_fwd)
    return alpha, beta, log_z_fwd, log_z_bwd, marginals


def log_partition(emissions: np.ndarray, transitions: np.ndarray) -> float:
    return forward_backward(emissions, transitions)[2]


def path_score(emissions: np.ndarray, transitions: np.ndarray, labels: Sequence[int]) -> float:
    s = emissions[0, labels[0]]
    for t in range(1, len(labels)):
        s += transitions[labels[t - 1], labels[t]] + emissions[t, labels[t]]
    return float(s)


def viterbi(emissions: np.ndarray, transitions: np.ndarray) -> list[int]:
    """MAP labels; equal scores resolve toward skip (label 0)."""
    n = len(emissions)
    if n == 0:
        return []
    score = emissions[0].copy()
    back = np.zeros((n, 2), dtype=int)
    for t in range(1, n):
        cand = score[:, None] + transitions  # from x to
        back[t] = np.argmax(cand, axis=0)
        score = cand[back[t], [0, 1]] + emissions[t]
    labels = [int(np.argmax(score))]
    for t in range(n - 1, 0, -1):
        labels.append(int(back[t, labels[-1]]))
    return labels[::-1]


def crf_predict(model: CrfModel, sequence: Sequence[EventFeatures]) -> list[int]:
    if not sequence:
        return []
    return viterbi(model.emissions(sequence), model.transition_weights)


# -- objective --------------------------------------------------------------


def _pack(model: CrfModel, sequences, labels):
    lengths = [len(s) for s in sequences]
    b, t_max, f = len(sequences), max(lengths), len(model.feature_registry)
    x = np.zeros((b, t_max, f))
    y = np.zeros((b, t_max), dtype=np.int64)
    mask = np.zeros((b, t_max), dtype=bool)
    for i, (seq, lab) in enumerate(zip(sequences, labels)):
        if len(seq) != len(lab):
            raise ValueError("sequence and label lengths differ")
        x[i, : len(seq)] = model.design_matrix(seq)
        y[i, : len(seq)] = lab
        mask[i, : len(seq)] = True
    return torch.from_numpy(x), torch.from_numpy(y), torch.from_numpy(mask)


class _Batch:
    """Padded dataset tensors, built once per training run."""

    def __init__(self, model: CrfModel, sequences, labels, positive_label_weight: float):
        self.x, self.y, self.mask = _pack(model, sequences, labels)
        self.n_features = len(model.feature_registry)
        self.pos_weight = positive_label_weight

    def nll(self, w: np.ndarray) -> tuple[float, np.ndarray]:
        wt = torch.tensor(w, dtype=torch.float64, requires_grad=True)
        k = self.n_features * 2
        emit_w = wt[:k].reshape(-1, 2)
        trans = wt[k:].reshape(2, 2)
        x, y, mask = self.x, self.y, self.mask
        b, n = y.shape
        em = x @ emit_w  # (b, n, 2)
        # backward messages: beta[t](i) = log-sum over continuations after t given y_t = i
        betas = [None] * n
        betas[n - 1] = torch.zeros(b, 2, dtype=torch.float64)
        for t in range(n - 2, -1, -1):
            nxt = torch.logsumexp(trans[None] + (em[:, t + 1] + betas[t + 1])[:, None, :], dim=2)
            betas[t] = torch.where(mask[:, t + 1, None], nxt, torch.zeros_like(nxt))
        beta = torch.stack(betas, dim=1)  # (b, n, 2)
        log_z = torch.logsumexp(em[:, 0] + beta[:, 0], dim=1)

        gold_em = em.gather(2, y[..., None])[..., 0]
        gold_beta = beta.gather(2, y[..., None])[..., 0]
        step = gold_em + gold_beta
        step_trans = trans[y[:, :-1], y[:, 1:]]
        prev_beta = gold_beta[:, :-1]
        cond = torch.cat(
            [(step[:, 0] - log_z)[:, None], step[:, 1:] + step_trans - prev_beta],
            dim=1,
        )  # log p(y_t | y_<t, x)
        one = torch.ones((), dtype=torch.float64)
        weights = torch.where(y == SELECT, one * self.pos_weight, one) * mask
        value = -(weights * cond).sum()
        value.backward()
        return float(value.detach()), wt.grad.numpy().copy()


def regularizer(w: np.ndarray, config: CrfTrainConfig) -> tuple[float, np.ndarray]:
    value = config.c1 * np.abs(w).sum() + config.c2 * (w @ w)
    grad = config.c1 * np.sign(w) + 2 * config.c2 * w
    return float(value), grad


def crf_objective(
    model: CrfModel,
    sequence: Sequence[EventFeatures],
    labels: Sequence[int],
    config: CrfTrainConfig,
) -> tuple[float, np.ndarray]:
    """Weighted NLL of one sequence plus the regularizer, with its gradient.

    The gradient is flat in the layout of ``CrfModel.flat``; the L1 term uses
    sign(w), i.e. 0 at 0.
    """
    if len(sequence) != len(labels):
        raise ValueError("sequence and label lengths differ")
    w = model.flat()
    value, grad = _Batch(model, [sequence], [labels], config.positive_label_weight).nll(w)
    r_value, r_grad = regularizer(w, config)
    value += r_value
    if not np.isfinite(value):
        raise FloatingPointError("non-finite CRF objective")
    return value, grad + r_grad


def expected_minus_empirical(model: CrfModel, sequence, labels) -> np.ndarray:
    """Unweighted NLL gradient from forward-backward marginals, flat layout."""
    x = model.design_matrix(sequence)
    em = x @ model.emission_weights
    tr = model.transition_weights
    alpha, beta, log_z, _, node = forward_backward(em, tr)
    emp_node = np.zeros_like(node)
    emp_node[np.arange(len(labels)), labels] = 1.0
    g_emit = x.T @ (node - emp_node)
    g_tr = np.zeros((2, 2))
    for t in range(1, len(labels)):
        pair = np.exp(alpha[t - 1][:, None] + tr + em[t] + beta[t] - log_z)
        g_tr += pair
        g_tr[labels[t - 1], labels[t]] -= 1.0
    return np.concatenate([g_emit.ravel(), g_tr.ravel()])


# -- training ---------------------------------------------------------------


def crf_train(
    dataset: Sequence[tuple[Sequence[EventFeatures], Sequence[int]]],
    config: CrfTrainConfig = CrfTrainConfig(),
    registry: dict[str, int] | None = None,
) -> CrfModel:
    """Minimize the regularized objective with L-BFGS-B on split weights.

    L1 is handled exactly by writing w = u - v with u, v >= 0, which turns
    c1*|w|_1 into the linear term c1*sum(u + v).
    """
    if not dataset:
        raise ValueError("empty training set")
    sequences = [s for s, _ in dataset]
    labels = [list(lab) for _, lab in dataset]
    registry = registry or build_registry(sequences)
    model = CrfModel.zeros(registry)
    batch = _Batch(model, sequences, labels, config.positive_label_weight)
    d = model.n_params
    history: list[float] = []

    def fun(z: np.ndarray):
        u, v = z[:d], z[d:]
        w = u - v
        value, g = batch.nll(w)
        value += config.c1 * z.sum() + config.c2 * (w @ w)
        g = g + 2 * config.c2 * w
        history.append(value)
        return value, np.concatenate([g + config.c1, -g + config.c1])

    z0 = np.zeros(2 * d)
    res = minimize(
        fun,
        z0,
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, None)] * (2 * d),
        options={"maxiter": config.max_iterations, "ftol": config.tolerance, "gtol": 1e-6},
    )
    if not res.success and res.nit >= config.max_iterations:
        warnings.warn(f"CRF training stopped after {res.nit} iterations", NonConvergence)
    out = model.with_flat(res.x[:d] - res.x[d:])
    out.final_objective = float(res.fun)
    out.history = history
    log.info("crf trained: %d iterations, objective %.4f", res.nit, res.fun)
    return out


def dataset_objective(model: CrfModel, dataset, config: CrfTrainConfig) -> float:
    batch = _Batch(model, [s for s, _ in dataset], [list(l) for _, l in dataset], config.positive_label_weight)
    w = model.flat()
    return batch.nll(w)[0] + regularizer(w, config)[0]


# -- evaluation -------------------------------------------------------------


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    undefined: bool = False  # some denominator was zero

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "PRF":
        undefined = tp + fp == 0 or tp + fn == 0
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f, tp, fp, fn, undefined or p + r == 0)


@dataclass(frozen=True)
class SelectionScores:
    overall: PRF
    by_type: dict[str, PRF]


def evaluate_selection(pred, gold, event_types=None) -> SelectionScores:
    """Select-class precision/recall/F1, overall and per event type.

    ``event_types`` gives the type name for each event of each game; without it
    only the overall score is filled in.
    """
    counts = {"all": [0, 0, 0]}
    for g_idx, (p_seq, g_seq) in enumerate(zip(pred, gold, strict=True)):
        if len(p_seq) != len(g_seq):
            raise ValueError(f"label count mismatch in game {g_idx}")
        types = event_types[g_idx] if event_types is not None else [None] * len(p_seq)
        for p, g, kind in zip(p_seq, g_seq, types):
            keys = ["all"] if kind is None else ["all", kind]
            for k in keys:
                c = counts.setdefault(k, [0, 0, 0])
                c[0] += p == SELECT and g == SELECT
                c[1] += p == SELECT and g != SELECT
                c[2] += p != SELECT and g == SELECT
    overall = PRF.from_counts(*counts.pop("all"))
    by_type = {k: PRF.from_counts(*counts[k]) for k in EVENT_TYPES if k in counts}
    return SelectionScores(overall, by_type)

