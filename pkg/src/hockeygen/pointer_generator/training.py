"""Training loop with validation selection, divergence guard and resumable checkpoints."""

from __future__ import annotations

import copy
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from ..linearization import LengthBuckets
from ..metrics import bleu
from .checkpoint import optimizer_state_dict, optimizer_tensors, read_container, write_container
from .data import EncodedPair, encode_pair, make_batch
from .decode import Generation, generate, greedy_decode_batch
from .model import PgConfig, PointerGenerator
from .vocab import Vocabulary

Pair = tuple[Sequence[str], Sequence[str]]


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, loss: float, initial: float):
        self.step, self.loss, self.initial = step, loss, initial
        super().__init__(f"training diverged at step {step}: loss {loss:.6g} vs initial {initial:.6g}")


class NonFiniteLoss(RuntimeError):
    pass


@dataclass
class TrainResult:
    model: PointerGenerator
    vocab: Vocabulary
    best_step: int
    best_score: float
    last_step: int
    history: list[dict] = field(default_factory=list)
    last_state: dict | None = None  # parameters after the final step

    @property
    def best_is_last(self) -> bool:
        return self.best_step == self.last_step


def build_model(vocab: Vocabulary, config: PgConfig, dtype=torch.float32) -> PointerGenerator:
    torch.manual_seed(config.seed)
    return PointerGenerator(len(vocab), config).to(dtype)


def compute_loss(model: PointerGenerator, pairs: Sequence[EncodedPair], p_gen_override=None):
    loss, nll, cov = model(make_batch(pairs), p_gen_override)
    if not torch.isfinite(loss):
        raise NonFiniteLoss(f"non-finite loss {float(loss)}")
    return loss, nll, cov


@torch.no_grad()
def evaluate_loss(model: PointerGenerator, pairs: Sequence[EncodedPair], batch_size: int = 64) -> float:
    """Token-weighted mean loss over a dataset, dropout off."""
    was_training = model.training
    model.eval()
    try:
        total, tokens = 0.0, 0
        for i in range(0, len(pairs), batch_size):
            chunk = pairs[i : i + batch_size]
            loss, _, _ = compute_loss(model, chunk)
            n = sum(len(p.tgt_ext) for p in chunk)
            total += float(loss) * n
            tokens += n
        return total / max(tokens, 1)
    finally:
        model.train(was_training)


def evaluate_bleu(model, vocab, pairs: Sequence[EncodedPair], batch_size: int = 64) -> float:
    corpus = []
    for i in range(0, len(pairs), batch_size):
        chunk = pairs[i : i + batch_size]
        for p, d in zip(chunk, greedy_decode_batch(model, vocab, [p.source for p in chunk])):
            corpus.append((d.tokens, [p.target]))
    return bleu(corpus)


def batch_indices(n: int, batch_size: int, seed: int, step: int) -> list[int]:
    """Example indices for a 0-based step: seeded shuffle per epoch, last batch may be short."""
    per_epoch = math.ceil(n / batch_size)
    epoch, k = divmod(step, per_epoch)
    order = np.random.default_rng([seed, epoch]).permutation(n)
    return order[k * batch_size : (k + 1) * batch_size].tolist()


def save_model(path, model: PointerGenerator, vocab: Vocabulary, meta: dict | None = None, extra=None) -> None:
    header = {
        "kind": "model",
        "config": model.config.to_dict(),
        "vocab": vocab.itos,
        "dtype": str(next(model.parameters()).dtype).removeprefix("torch."),
        "meta": meta or {},
    }
    tensors = {f"param.{k}": v for k, v in model.state_dict().items()}
    if extra:
        header_extra, tensors_extra = extra
        header.update(header_extra)
        tensors.update(tensors_extra)
    write_container(path, header, tensors)


def load_model(path) -> tuple[PointerGenerator, Vocabulary, dict]:
    header, tensors = read_container(path)
    config = PgConfig.from_dict(header["config"])
    vocab = Vocabulary(header["vocab"][4:])
    model = PointerGenerator(len(vocab), config).to(getattr(torch, header.get("dtype", "float32")))
    model.load_state_dict({k[len("param.") :]: v for k, v in tensors.items() if k.startswith("param.")})
    model.eval()
    return model, vocab, header


def _training_extra(optimizer, step: int, best: dict, history: list[dict]) -> tuple[dict, dict]:
    opt_meta, opt_tensors = optimizer_tensors(optimizer)
    tensors = dict(opt_tensors)
    tensors["rng.torch"] = torch.get_rng_state()
    for k, v in best["state"].items():
        tensors[f"best.{k}"] = v
    header = {
        "kind": "training",
        "step": step,
        "optimizer": opt_meta,
        "best_step": best["step"],
        "best_score": best["score"],
        "initial_loss": best["initial_loss"],
        "history": history,
    }
    return header, tensors


def _log(log_path, record: dict) -> None:
    if log_path is not None:
        with open(log_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")


def train(
    train_pairs: Sequence[Pair],
    val_pairs: Sequence[Pair],
    config: PgConfig,
    vocab: Vocabulary | None = None,
    checkpoint_dir=None,
    log_path=None,
    resume_from=None,
    max_steps: int | None = None,
    dtype=torch.float32,
    progress: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Adam training; returns the model at the best validation checkpoint.

    Checkpoints happen every ``config.checkpoint_every`` steps and at the last
    step. With ``checkpoint_dir`` each one is written as ``step_<n>.pgen``
    (resumable) and the best so far as ``best.pgen``. Validation selects on
    loss or, with ``config.selection == "bleu"``, on greedy BLEU.
    """
    torch.set_num_threads(1)
    if not train_pairs:
        raise ValueError("empty training set")
    max_steps = config.max_steps if max_steps is None else max_steps
    if vocab is None:
        vocab = Vocabulary.build(
            [s for s, _ in train_pairs] + [t for _, t in train_pairs], min_freq=config.min_freq
        )
    train_enc = [encode_pair(vocab, s, t) for s, t in train_pairs]
    val_enc = [encode_pair(vocab, s, t) for s, t in val_pairs] or train_enc

    model = build_model(vocab, config, dtype)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    history: list[dict] = []
    best = {"step": 0, "score": math.inf, "state": copy.deepcopy(model.state_dict()), "initial_loss": None}
    step = 0
    if resume_from is not None:
        header, tensors = read_container(resume_from)
        if header.get("kind") != "training":
            raise ValueError(f"{resume_from} is not a resumable training checkpoint")
        if header["vocab"] != vocab.itos:
            raise ValueError("checkpoint vocabulary differs from the training data vocabulary")
        model.load_state_dict({k[6:]: v for k, v in tensors.items() if k.startswith("param.")})
        optimizer.load_state_dict(optimizer_state_dict(header["optimizer"], tensors))
        torch.set_rng_state(tensors["rng.torch"])
        best = {
            "step": header["best_step"],
            "score": header["best_score"],
            "state": {k[5:]: v for k, v in tensors.items() if k.startswith("best.")},
            "initial_loss": header["initial_loss"],
        }
        history = list(header["history"])
        step = header["step"]

    if checkpoint_dir is not None:
        Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
    model.train()
    t0 = time.perf_counter()
    running, running_n = 0.0, 0
    while step < max_steps:
        idx = batch_indices(len(train_enc), config.batch_size, config.seed, step)
        optimizer.zero_grad()
        loss, _, _ = compute_loss(model, [train_enc[i] for i in idx])
        value = float(loss.detach())
        if best["initial_loss"] is None:
            best["initial_loss"] = value
        if value > 10 * best["initial_loss"]:
            raise TrainingDiverged(step, value, best["initial_loss"])
        loss.backward()
        if config.max_grad_norm > 0:
            torch.nn.utils.clip_grad_norm_(model.parameters(), config.max_grad_norm)
        optimizer.step()
        step += 1
        running += value
        running_n += 1

        if step % config.checkpoint_every == 0 or step == max_steps:
            val_loss = evaluate_loss(model, val_enc)
            if config.selection == "bleu":
                val_bleu = evaluate_bleu(model, vocab, val_enc)
                score = -val_bleu
            else:
                val_bleu, score = None, val_loss
            if score < best["score"]:
                best.update(step=step, score=score, state=copy.deepcopy(model.state_dict()))
            record = {
                "step": step,
                "train_loss": running / running_n,
                "val_loss": val_loss,
                "val_bleu": val_bleu,
                "best_step": best["step"],
                "elapsed": round(time.perf_counter() - t0, 3),
                "checkpoint": None,
            }
            running, running_n = 0.0, 0
            history.append(record)
            if checkpoint_dir is not None:
                ckpt = Path(checkpoint_dir) / f"step_{step}.pgen"
                record["checkpoint"] = str(ckpt)
                save_model(ckpt, model, vocab, extra=_training_extra(optimizer, step, best, history))
                if best["step"] == step:
                    save_model(Path(checkpoint_dir) / "best.pgen", model, vocab, meta={"step": step})
            _log(log_path, record)
            if progress is not None:
                progress(record)

    last_state = copy.deepcopy(model.state_dict())
    model.load_state_dict(best["state"])
    model.eval()
    return TrainResult(model, vocab, best["step"], best["score"], step, history, last_state)


@dataclass
class TrainedGenerator:
    """A trained model with its vocabulary and the length thresholds it was trained with."""

    model: PointerGenerator
    vocab: Vocabulary
    buckets: LengthBuckets | None = None

    def save(self, path, meta: dict | None = None) -> None:
        m = dict(meta or {})
        if self.buckets is not None:
            m["buckets"] = self.buckets.to_dict()
        save_model(path, self.model, self.vocab, meta=m)

    @classmethod
    def load(cls, path) -> "TrainedGenerator":
        model, vocab, header = load_model(path)
        b = header.get("meta", {}).get("buckets")
        return cls(model, vocab, LengthBuckets.from_dict(b) if b else None)

    def generate(self, event, context=None, beam_size: int | None = None) -> Generation:
        return generate(self.model, self.vocab, event, context, self.buckets, beam_size)
