import numpy as np
import pytest

from spadal.al_loop import (ALConfig, ALSession, RoundEntry, RunRecord,
                            SimulatedOracle, aggregate_records,
                            confusion_matrix, evaluate, metrics_from_confusion,
                            run)
from spadal.classifier import TrainConfig, train, ModelConfig
from spadal.dataset import Pools

from conftest import make_group


def toy_pools(per_class=4, classes=2, m=2, base_gap=30.0):
    pools = Pools(class_names=[f"class{c}" for c in range(classes)],
                  norm_range=(0.0, 10.0 + base_gap * classes))
    rng = np.random.default_rng(8)
    for c in range(classes):
        for k in range(per_class):
            gid = f"c{c}_g{k:02d}"
            pools.add_unlabeled(make_group(gid, 10.0 + base_gap * c, m=m,
                                           jitter=1.0, rng=rng),
                                hidden_label=c)
    test = [make_group(f"t{c}_{k}", 10.0 + base_gap * c, label=c, m=m,
                       jitter=1.0, rng=rng)
            for c in range(classes) for k in range(2)]
    return pools, test


def fast_cfg(**kw):
    base = dict(strategy="random", rounds=2, n_batch=1, initial_labeled=2,
                seed=0, train=TrainConfig(epochs=4, seed=0))
    base.update(kw)
    return ALConfig(**base)


class TestMetrics:
    def test_perfect(self):
        cm = np.diag([5, 5, 5])
        m = metrics_from_confusion(cm)
        assert m == {"accuracy": 100.0, "precision": 100.0,
                     "recall": 100.0, "f1": 100.0}

    def test_binary_hand_case(self):
        # positive class: TP=3 FP=1 FN=1; negative class: TN=5
        cm = np.array([[3, 1], [1, 5]])
        m = metrics_from_confusion(cm)
        assert m["accuracy"] == pytest.approx(80.0)
        # macro over both classes: (3/4 + 5/6)/2
        assert m["precision"] == pytest.approx(100 * (0.75 + 5 / 6) / 2)
        assert m["recall"] == pytest.approx(100 * (0.75 + 5 / 6) / 2)
        assert m["f1"] == pytest.approx(m["precision"])

    def test_constant_class_balanced(self):
        cm = np.zeros((4, 4), dtype=int)
        cm[:, 0] = 10  # every sample predicted as class 0
        m = metrics_from_confusion(cm)
        assert m["accuracy"] == pytest.approx(25.0)

    def test_zero_division_convention(self):
        cm = np.array([[0, 2], [0, 3]])  # class 0 never predicted correctly
        m = metrics_from_confusion(cm)
        assert m["precision"] == pytest.approx(100 * (0.0 + 3 / 5) / 2)
        assert m["recall"] == pytest.approx(100 * (0.0 + 1.0) / 2)

    def test_bounds_and_f1_property(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            cm = rng.integers(0, 10, size=(3, 3))
            if cm.sum() == 0:
                continue
            m = metrics_from_confusion(cm)
            for v in m.values():
                assert 0.0 <= v <= 100.0
            assert m["f1"] <= max(m["precision"], m["recall"]) + 1e-9

    def test_empty(self):
        with pytest.raises(ValueError, match="empty test set"):
            metrics_from_confusion(np.zeros((2, 2), dtype=int))

    def test_confusion_matrix(self):
        cm = confusion_matrix([0, 1, 1, 2], [0, 1, 2, 2], 3)
        assert cm[0, 0] == 1 and cm[1, 1] == 1 and cm[1, 2] == 1 and cm[2, 2] == 1
        assert cm.sum() == 4


class TestEvaluate:
    def test_perfect_on_separable(self):
        pools, test = toy_pools()
        labeled = {g.id: g for g in
                   [make_group(f"l{c}", 10.0 + 30.0 * c, label=c, m=2)
                    for c in range(2)]}
        cfg = ModelConfig(width=16, height=16, class_count=2,
                          norm_range=pools.norm_range)
        model = train(labeled, TrainConfig(epochs=15, seed=0), cfg)
        m = evaluate(model, test)
        assert m["accuracy"] == 100.0 and m["f1"] == 100.0

    def test_empty_test_set(self):
        pools, _ = toy_pools()
        with pytest.raises(ValueError, match="empty test set"):
            evaluate(None, [])


class TestALConfig:
    def test_budget(self):
        cfg = fast_cfg(rounds=3, n_batch=5, initial_labeled=10)
        assert cfg.total_budget == 25

    def test_validation(self):
        with pytest.raises(ValueError):
            fast_cfg(rounds=0)
        with pytest.raises(ValueError):
            fast_cfg(strategy="nope")
        with pytest.raises(ValueError):
            fast_cfg(oracle_mode="telepathy")


class TestRun:
    def test_single_round_toy(self):
        pools, test = toy_pools(per_class=2)  # 4 groups
        cfg = fast_cfg(rounds=1, n_batch=1, initial_labeled=1)
        record = run(cfg, pools, test, SimulatedOracle(pools))
        assert len(record.selection_rounds) == 1
        assert len(record.entries) == 2  # round 0 + 1 selection round
        assert record.entries[-1].labeled_count == 1 + 1

    def test_labeled_count_progression(self):
        pools, test = toy_pools(per_class=4)
        cfg = fast_cfg(rounds=3, n_batch=2, initial_labeled=2)
        record = run(cfg, pools, test, SimulatedOracle(pools))
        counts = [e.labeled_count for e in record.entries]
        assert counts == [2, 4, 6, 8]
        assert [e.round for e in record.entries] == [0, 1, 2, 3]

    def test_determinism_csv(self):
        csvs = []
        for _ in range(2):
            pools, test = toy_pools(per_class=3)
            cfg = fast_cfg(rounds=2, n_batch=1, initial_labeled=2, seed=5)
            record = run(cfg, pools, test, SimulatedOracle(pools))
            csvs.append(record.to_csv())
        assert csvs[0] == csvs[1]
        assert csvs[0].splitlines()[0] == (
            "round,labeled_count,accuracy,precision,recall,f1,strategy,seed")

    def test_budget_infeasible(self):
        pools, test = toy_pools(per_class=2)  # 4 groups
        cfg = fast_cfg(rounds=5, n_batch=2, initial_labeled=2)  # budget 12 > 4
        with pytest.raises(ValueError, match="budget"):
            ALSession(cfg, pools, test)

    def test_test_leakage_rejected(self):
        pools, test = toy_pools(per_class=2)
        leaky = test + [pools.unlabeled[sorted(pools.unlabeled)[0]]]
        with pytest.raises(ValueError, match="leak"):
            ALSession(fast_cfg(rounds=1, n_batch=1, initial_labeled=1),
                      pools, leaky)

    def test_initial_batch_strategy_independent(self):
        picks = []
        for strategy in ("duis", "random", "entropy"):
            pools, test = toy_pools(per_class=3)
            cfg = fast_cfg(strategy=strategy, rounds=1, n_batch=1,
                           initial_labeled=2, seed=3)
            picks.append(sorted(ALSession(cfg, pools, test).initial_batch()))
        assert picks[0] == picks[1] == picks[2]

    def test_selected_ids_recorded(self):
        pools, test = toy_pools(per_class=3)
        cfg = fast_cfg(rounds=2, n_batch=1, initial_labeled=1, seed=1)
        record = run(cfg, pools, test, SimulatedOracle(pools))
        seen = set()
        for e in record.entries:
            assert len(e.selected) == (1 if e.round else cfg.initial_labeled)
            assert not seen & set(e.selected)
            seen.update(e.selected)


class TestAggregate:
    def fake_record(self, seed, offset=0.0):
        rec = RunRecord(strategy="duis", seed=seed, config={})
        for r in range(3):
            v = 50.0 + 10 * r + offset
            rec.entries.append(RoundEntry(round=r, labeled_count=10 + 5 * r,
                                          accuracy=v, precision=v, recall=v,
                                          f1=v, wall_time=0.0))
        return rec

    def test_mean_and_std(self):
        agg = aggregate_records([self.fake_record(0, 0.0),
                                 self.fake_record(1, 2.0)])
        lines = agg.splitlines()
        assert lines[0].startswith("round,labeled_count,accuracy_mean,accuracy_std")
        first = lines[1].split(",")
        assert first[0] == "0" and first[1] == "10"
        assert float(first[2]) == pytest.approx(51.0)
        assert float(first[3]) == pytest.approx(1.0)

    def test_mismatched_rounds(self):
        a, b = self.fake_record(0), self.fake_record(1)
        b.entries.pop()
        with pytest.raises(ValueError, match="mismatched"):
            aggregate_records([a, b])

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate_records([])
