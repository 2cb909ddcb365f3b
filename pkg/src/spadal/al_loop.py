"""Active-learning orchestration: train, select, query the oracle, update
pools, evaluate. Round 0 trains on a uniformly drawn initial labeled set;
each later round adds one selected batch.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import classifier, sampling
from .classifier import Model, ModelConfig, TrainConfig
from .dataset import Pools, SampleGroup, move_to_labeled


@dataclass
class ALConfig:
    strategy: str = "duis"
    rounds: int = 6
    n_batch: int = 10
    n_cand: int = 30
    initial_labeled: int = 10
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    oracle_mode: str = "simulated"

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.strategy not in sampling.STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.oracle_mode not in ("simulated", "human"):
            raise ValueError(f"unknown oracle mode {self.oracle_mode!r}")

    @property
    def total_budget(self) -> int:
        return self.initial_labeled + self.rounds * self.n_batch

    def to_dict(self) -> dict:
        return asdict(self)


class Oracle:
    """Labeling authority: answers class labels for queried group ids."""

    def label(self, ids: list[str]) -> list[int]:
        raise NotImplementedError


class SimulatedOracle(Oracle):
    """Answers instantly from the ground truth withheld in the pools."""

    def __init__(self, pools: Pools):
        self._pools = pools

    def label(self, ids: list[str]) -> list[int]:
        return [self._pools.hidden_label(i) for i in ids]


@dataclass
class RoundEntry:
    round: int
    labeled_count: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    wall_time: float
    selected: list[str] = field(default_factory=list)


@dataclass
class RunRecord:
    strategy: str
    seed: int
    config: dict
    entries: list[RoundEntry] = field(default_factory=list)

    @property
    def selection_rounds(self) -> list[RoundEntry]:
        """Entries for rounds 1..T (round 0 is the initial seed-set round)."""
        return [e for e in self.entries if e.round > 0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("round,labeled_count,accuracy,precision,recall,f1,strategy,seed\n")
        for e in self.entries:
            buf.write(f"{e.round},{e.labeled_count},{e.accuracy:.6f},{e.precision:.6f},"
                      f"{e.recall:.6f},{e.f1:.6f},{self.strategy},{self.seed}\n")
        return buf.getvalue()


def confusion_matrix(true_labels, pred_labels, class_count: int) -> np.ndarray:
    cm = np.zeros((class_count, class_count), dtype=np.int64)
    for t, p in zip(true_labels, pred_labels):
        cm[t, p] += 1
    return cm


def metrics_from_confusion(cm: np.ndarray) -> dict:
    """Accuracy plus macro-averaged precision/recall and their harmonic F1.

    Per-class one-vs-rest ratios use the 0/0 := 0 convention. All values are
    percentages in [0, 100].
    """
    total = cm.sum()
    if total == 0:
        raise ValueError("empty test set")
    acc = np.trace(cm) / total
    c = cm.shape[0]
    precisions, recalls = [], []
    for k in range(c):
        tp = cm[k, k]
        fp = cm[:, k].sum() - tp
        fn = cm[k, :].sum() - tp
        precisions.append(tp / (tp + fp) if tp + fp else 0.0)
        recalls.append(tp / (tp + fn) if tp + fn else 0.0)
    precision = float(np.mean(precisions)) * 100.0
    recall = float(np.mean(recalls)) * 100.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"accuracy": float(acc) * 100.0, "precision": precision,
            "recall": recall, "f1": f1}


def evaluate(model: Model, test_groups: list[SampleGroup]) -> dict:
    """Classification metrics on the observed test images."""
    if not test_groups:
        raise ValueError("empty test set")
    preds = classifier.predict_proba_batch(model, [g.observed for g in test_groups])
    pred_labels = preds.argmax(axis=1)
    true_labels = [g.label for g in test_groups]
    cm = confusion_matrix(true_labels, pred_labels, model.config.class_count)
    return metrics_from_confusion(cm)


class ALSession:
    """Stepwise active-learning state shared by the simulated runner and the
    labeling service: the caller supplies labels, the session does the rest."""

    def __init__(self, cfg: ALConfig, pools: Pools, test_groups: list[SampleGroup]):
        if cfg.total_budget > len(pools.unlabeled) + len(pools.labeled):
            raise ValueError("labeling budget exceeds the train pool")
        test_ids = {g.id for g in test_groups}
        if test_ids & (set(pools.unlabeled) | set(pools.labeled)):
            raise ValueError("test set leaks into the pools")
        self.cfg = cfg
        self.pools = pools
        self.test_groups = test_groups
        self.model: Model | None = None
        h, w = next(iter(pools.unlabeled.values())).observed.depth_m.shape
        self._model_config = ModelConfig(width=w, height=h,
                                         class_count=pools.class_count,
                                         norm_range=pools.norm_range)
        self.record = RunRecord(strategy=cfg.strategy, seed=cfg.seed,
                                config=cfg.to_dict())
        self.round = 0
        self._test_ids = test_ids

    def initial_batch(self) -> list[str]:
        """Uniform seed set, identical across strategies for a given seed."""
        ids = sorted(self.pools.unlabeled)
        rng = np.random.default_rng(np.random.SeedSequence(self.cfg.seed, spawn_key=(23,)))
        pick = rng.choice(len(ids), size=self.cfg.initial_labeled, replace=False)
        return [ids[i] for i in pick]

    def next_batch(self) -> list[str]:
        """Selection query for the upcoming round (round 0 = seed set)."""
        if self.round == 0:
            return self.initial_batch()
        req = sampling.SelectionRequest(
            model=self.model, unlabeled=self.pools.unlabeled,
            n_batch=self.cfg.n_batch, n_cand=min(self.cfg.n_cand, len(self.pools.unlabeled)),
            strategy=self.cfg.strategy,
            seed=int(np.random.SeedSequence(self.cfg.seed, spawn_key=(29, self.round))
                     .generate_state(1)[0]),
            labeled=self.pools.labeled)
        return sampling.select(req)

    def apply_labels(self, ids: list[str], labels: list[int]) -> None:
        move_to_labeled(self.pools, ids, labels)

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.cfg.train.learning_rate,
            momentum=self.cfg.train.momentum,
            batch_size=self.cfg.train.batch_size,
            epochs=self.cfg.train.epochs,
            seed=self.cfg.train.seed + self.cfg.seed)

    def ensure_model(self) -> None:
        """Retrain from the current labeled pool (used after a restore)."""
        if self.model is None and self.pools.labeled:
            self.model = classifier.train(self.pools.labeled, self._train_config(),
                                          self._model_config)

    def train_and_evaluate(self, selected: list[str]) -> RoundEntry:
        start = time.perf_counter()
        self.model = classifier.train(self.pools.labeled, self._train_config(),
                                      self._model_config)
        metrics = evaluate(self.model, self.test_groups)
        entry = RoundEntry(round=self.round, labeled_count=len(self.pools.labeled),
                           wall_time=time.perf_counter() - start,
                           selected=list(selected), **metrics)
        self.record.entries.append(entry)
        assert not self._test_ids & (set(self.pools.unlabeled) | set(self.pools.labeled))
        return entry

    @property
    def finished(self) -> bool:
        """True once selection rounds 1..cfg.rounds have all completed."""
        return self.round > self.cfg.rounds

    def step(self, oracle: Oracle) -> RoundEntry:
        """One full round against a non-blocking oracle."""
        batch = self.next_batch()
        self.apply_labels(batch, oracle.label(batch))
        entry = self.train_and_evaluate(batch)
        self.round += 1
        return entry


def aggregate_records(records: list[RunRecord]) -> str:
    """Per-round mean and standard deviation across seeds, as CSV."""
    if not records:
        raise ValueError("no records to aggregate")
    n_rounds = len(records[0].entries)
    if any(len(r.entries) != n_rounds for r in records):
        raise ValueError("records have mismatched round counts")
    cols = ["accuracy", "precision", "recall", "f1"]
    header = "round,labeled_count," + ",".join(
        f"{c}_mean,{c}_std" for c in cols)
    lines = [header]
    for k in range(n_rounds):
        entries = [r.entries[k] for r in records]
        row = [str(entries[0].round), str(entries[0].labeled_count)]
        for c in cols:
            vals = np.array([getattr(e, c) for e in entries])
            row.append(f"{vals.mean():.6f}")
            row.append(f"{vals.std(ddof=0):.6f}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def run(cfg: ALConfig, pools: Pools, test_groups: list[SampleGroup],
        oracle: Oracle) -> RunRecord:
    """Full loop: seed set (round 0), then cfg.rounds selection rounds."""
    session = ALSession(cfg, pools, test_groups)
    session.step(oracle)  # round 0: initial seed set
    while not session.finished:
        session.step(oracle)
    return session.record
