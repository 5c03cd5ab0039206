import numpy as np
import pytest

from drcurate import classifier as cl


def separable_1d(n=50):
    x = np.array([[0.0]] * n + [[1.0]] * n)
    y = np.array([0] * n + [1] * n)
    return x, y


class TestSplit:
    def test_stratified_counts(self):
        ids = [f"g{i}" for i in range(10)] + [f"b{i}" for i in range(10)]
        labels = ["good"] * 10 + ["bad"] * 10
        train, test = cl.split_dataset(ids, labels, ratio=0.7, seed=0)
        assert len(train) == 14 and len(test) == 6
        assert sum(i.startswith("g") for i in train) == 7
        assert sum(i.startswith("b") for i in test) == 3
        assert set(train) | set(test) == set(ids)
        assert set(train) & set(test) == set()

    def test_ratio_one_rejected(self):
        with pytest.raises(cl.ClassifierError):
            cl.split_dataset(["a", "b", "c", "d"], ["good", "good", "bad", "bad"], ratio=1.0)

    def test_deterministic(self):
        ids = [f"i{k}" for k in range(30)]
        labels = (["good", "bad"] * 15)[:30]
        assert cl.split_dataset(ids, labels, seed=5) == cl.split_dataset(ids, labels, seed=5)

    def test_tiny_class_rejected(self):
        with pytest.raises(cl.ClassifierError, match="fewer than 2"):
            cl.split_dataset(["a", "b", "c"], ["good", "good", "bad"])

    def test_unlabeled_rejected(self):
        with pytest.raises(cl.ClassifierError, match="no quality label"):
            cl.split_dataset(["a", "b"], ["good", None])


class TestLogistic:
    def test_separable_perfect(self):
        x, y = separable_1d()
        model = cl.train_logistic(x, y, ["f0"])
        rep = cl.evaluate(model, x, y)
        assert rep.accuracy == 1.0

    def test_all_same_label(self):
        x = np.linspace(0, 1, 20).reshape(-1, 1)
        y = np.ones(20, dtype=int)
        model = cl.train_logistic(x, y, ["f0"])
        assert (model.predict_proba(x) >= 0.5).all()

    def test_conflicting_point_is_half(self):
        x = np.array([[0.5], [0.5]] * 25)
        y = np.array([0, 1] * 25)
        model = cl.train_logistic(x, y, ["f0"])
        p, _ = cl.predict(model, np.array([0.5]))
        assert p == pytest.approx(0.5, abs=1e-6)

    def test_nonfinite_rejected(self):
        x = np.array([[np.nan], [1.0]])
        with pytest.raises(cl.ClassifierError):
            cl.train_logistic(x, np.array([0, 1]), ["f0"])

    def test_loss_nonincreasing(self):
        rng = np.random.RandomState(27)
        x = rng.randn(80, 3)
        y = (x[:, 0] + 0.3 * rng.randn(80) > 0).astype(int)
        mean, std = x.mean(0), x.std(0)
        z = (x - mean) / std
        w = np.zeros(3)
        b = 0.0
        sw = np.ones(80)
        losses = [cl._logloss(z @ w + b, y, sw, w, 1e-3)]
        model = cl.train_logistic(x, y, list("abc"), epochs=50)
        zw = (x - model.mean) / model.std
        final = cl._logloss(zw @ model.weights + model.bias, y, sw, model.weights, 1e-3)
        assert final <= losses[0]

    def test_monotone_in_positive_weight_feature(self):
        x, y = separable_1d()
        model = cl.train_logistic(x, y, ["brightness"])
        grid = np.linspace(-1, 2, 40).reshape(-1, 1)
        probs = model.predict_proba(grid)
        assert (np.diff(probs) >= -1e-12).all()

    def test_labels_invariant_under_monotone_rescaling(self):
        # thresholding at g(0.5) after any strictly monotone g gives the
        # same labels as thresholding the raw probability at 0.5
        rng = np.random.RandomState(44)
        x = rng.randn(60, 2)
        y = (x[:, 0] > 0).astype(int)
        model = cl.train_logistic(x, y, ["a", "b"], epochs=50)
        probs = model.predict_proba(x)
        labels = probs >= 0.5
        for g in (np.sqrt, lambda p: p**3, lambda p: np.log1p(9 * p)):
            assert ((g(probs) >= g(0.5)) == labels).all()


class TestPredict:
    def test_zero_logistic_is_half(self):
        model = cl.ClassifierModel(
            kind="logistic", schema=("a", "b"),
            weights=np.zeros(2), bias=0.0, mean=np.zeros(2), std=np.ones(2),
        )
        p, label = cl.predict(model, np.array([3.0, -4.0]))
        assert p == 0.5 and label == "good"

    def test_single_leaf_forest(self):
        tree = {
            "feature": np.array([-1], dtype=np.int32),
            "threshold": np.array([0.0]),
            "left": np.array([-1], dtype=np.int32),
            "right": np.array([-1], dtype=np.int32),
            "prob": np.array([1.0]),
        }
        model = cl.ClassifierModel(kind="forest", schema=("a",), trees=[tree])
        p, label = cl.predict(model, np.array([123.0]))
        assert p == 1.0 and label == "good"

    def test_schema_mismatch(self):
        model = cl.ClassifierModel(
            kind="logistic", schema=("a", "b"),
            weights=np.zeros(2), bias=0.0, mean=np.zeros(2), std=np.ones(2),
        )
        with pytest.raises(cl.SchemaMismatchError):
            cl.predict(model, np.array([1.0]))
        with pytest.raises(cl.SchemaMismatchError):
            model.check_schema(("a", "c"))


class TestEvaluate:
    def test_perfect(self):
        x, y = separable_1d(10)
        model = cl.train_logistic(x, y, ["f0"])
        rep = cl.evaluate(model, x, y)
        assert rep.precision == rep.recall == rep.f2 == rep.accuracy == 1.0

    def test_f2_formula(self):
        # P=0.5, R=1.0 -> F2 = 5*0.5/(4*0.5+1) = 2.5/3
        p, r = 0.5, 1.0
        assert 5 * p * r / (4 * p + r) == pytest.approx(2.5 / 3)
        model = cl.ClassifierModel(
            kind="logistic", schema=("f0",),
            weights=np.zeros(1), bias=10.0, mean=np.zeros(1), std=np.ones(1),
        )  # always predicts good
        x = np.zeros((4, 1))
        y = np.array([1, 1, 0, 0])
        rep = cl.evaluate(model, x, y)
        assert rep.precision == 0.5 and rep.recall == 1.0
        assert rep.f2 == pytest.approx(2.5 / 3)

    def test_all_negative_zero_f2(self):
        model = cl.ClassifierModel(
            kind="logistic", schema=("f0",),
            weights=np.zeros(1), bias=-10.0, mean=np.zeros(1), std=np.ones(1),
        )
        rep = cl.evaluate(model, np.zeros((4, 1)), np.array([1, 1, 0, 0]))
        assert rep.recall == 0.0 and rep.f2 == 0.0

    def test_counts_sum(self):
        rng = np.random.RandomState(28)
        x = rng.randn(40, 2)
        y = (rng.rand(40) > 0.5).astype(int)
        model = cl.train_logistic(x, y, ["a", "b"], epochs=20)
        rep = cl.evaluate(model, x, y)
        assert rep.tp + rep.fp + rep.fn + rep.tn == 40
        assert rep.accuracy == pytest.approx((rep.tp + rep.tn) / 40)


class TestGridSearch:
    def test_single_cell(self):
        x, y = separable_1d(20)
        best, table = cl.grid_search([{"kind": "logistic", "l2": 0.01}], x, y, folds=4, seed=0)
        assert best == {"kind": "logistic", "l2": 0.01}
        assert len(table) == 1

    def test_dominant_cell_wins(self):
        # XOR-like data: depth 1 cannot separate, depth 8 can
        rng = np.random.RandomState(29)
        n = 80
        a = rng.rand(n, 2) * 0.5
        b = rng.rand(n, 2) * 0.5 + 0.5
        c = np.column_stack([rng.rand(n) * 0.5, rng.rand(n) * 0.5 + 0.5])
        d = np.column_stack([rng.rand(n) * 0.5 + 0.5, rng.rand(n) * 0.5])
        x = np.vstack([a, b, c, d])
        y = np.array([1] * (2 * n) + [0] * (2 * n))
        grid = [
            {"kind": "forest", "n_trees": 30, "max_depth": 1},
            {"kind": "forest", "n_trees": 30, "max_depth": 8},
        ]
        best, table = cl.grid_search(grid, x, y, folds=4, seed=0)
        assert best["max_depth"] == 8
        assert table[1]["mean_f2"] > table[0]["mean_f2"]

    def test_deterministic(self):
        x, y = separable_1d(20)
        grid = [{"kind": "forest", "n_trees": 10, "max_depth": 2}]
        r1 = cl.grid_search(grid, x, y, folds=4, seed=3)
        r2 = cl.grid_search(grid, x, y, folds=4, seed=3)
        assert r1 == r2

    def test_empty_grid_rejected(self):
        with pytest.raises(cl.ClassifierError):
            cl.grid_search([], np.zeros((4, 1)), np.array([0, 1, 0, 1]))

    def test_tiebreak_prefers_smaller_model(self):
        x, y = separable_1d(30)
        grid = [
            {"kind": "forest", "n_trees": 50, "max_depth": 2},
            {"kind": "forest", "n_trees": 10, "max_depth": 2},
        ]
        best, table = cl.grid_search(grid, x, y, folds=3, seed=0)
        # trivially separable: both cells perfect, smaller forest wins
        assert table[0]["mean_f2"] == table[1]["mean_f2"] == 1.0
        assert best["n_trees"] == 10


class TestModelIO:
    def test_logistic_roundtrip(self, tmp_path):
        x, y = separable_1d(15)
        model = cl.train_logistic(x, y, ["f0"])
        cl.save_model(model, tmp_path / "m.json")
        back = cl.load_model(tmp_path / "m.json")
        assert back.kind == "logistic" and back.schema == ("f0",)
        assert np.allclose(back.predict_proba(x), model.predict_proba(x))

    def test_forest_roundtrip(self, tmp_path):
        rng = np.random.RandomState(30)
        x = rng.randn(60, 3)
        y = (x[:, 0] > 0).astype(int)
        model = cl.train_forest(x, y, list("abc"), n_trees=12, seed=1)
        model.background = x[:10]
        cl.save_model(model, tmp_path / "m.json")
        back = cl.load_model(tmp_path / "m.json")
        assert back.tree_seeds == model.tree_seeds
        assert np.allclose(back.predict_proba(x), model.predict_proba(x))
        assert np.allclose(back.background, model.background)

    def test_version_checked(self, tmp_path):
        (tmp_path / "m.json").write_text('{"version": 99}')
        with pytest.raises(cl.ClassifierError, match="version"):
            cl.load_model(tmp_path / "m.json")
