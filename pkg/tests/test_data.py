import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import bart
from bart.data import (
    build_cutpoints,
    generate_friedman,
    inverse_scale,
    load_csv,
    load_prediction_matrix,
    make_dataset,
    scale_response,
)
from bart.errors import (
    DataError,
    DegenerateResponseError,
    ModelParseError,
    ModelVersionError,
    SchemaError,
)


class TestBuildCutpoints:
    def test_indicator_column(self):
        np.testing.assert_allclose(build_cutpoints(np.array([0.0, 1.0, 0.0, 1.0])), [0.5])

    def test_one_to_ten(self):
        grid = build_cutpoints(np.arange(1.0, 11.0))
        np.testing.assert_allclose(grid, np.arange(1.5, 10.0))

    def test_constant_column_empty(self):
        assert len(build_cutpoints(np.full(5, 3.3))) == 0

    def test_capped_grid_has_nonempty_sides(self):
        rng = np.random.default_rng(0)
        values = rng.normal(size=10_000)
        grid = build_cutpoints(values, max_cutpoints=100)
        assert 0 < len(grid) <= 100
        assert (np.diff(grid) > 0).all()
        for cut in grid:
            left = int((values <= cut).sum())
            assert 0 < left < len(values)

    def test_small_grids_are_midpoints(self):
        values = np.array([3.0, 1.0, 2.0, 1.0])
        np.testing.assert_allclose(build_cutpoints(values), [1.5, 2.5])


class TestScaleResponse:
    def test_endpoints(self):
        y, scaling = scale_response(np.array([2.0, 7.0, 4.5]))
        assert y.min() == -0.5 and y.max() == 0.5
        assert scaling == (2.0, 7.0)

    def test_midpoint(self):
        y, _ = scale_response(np.array([0.0, 5.0, 10.0]))
        np.testing.assert_allclose(y, [-0.5, 0.0, 0.5])

    def test_constant_rejected(self):
        with pytest.raises(DegenerateResponseError):
            scale_response(np.full(4, 1.0))

    @settings(max_examples=100)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=30))
    def test_round_trip(self, values):
        values = np.asarray(values)
        if values.max() - values.min() < 1e-9:
            return
        y, scaling = scale_response(values)
        np.testing.assert_allclose(inverse_scale(y, scaling), values, atol=1e-12 * max(1, abs(values).max()))


class TestLoadCsv:
    def write(self, tmp_path, text):
        path = tmp_path / "data.csv"
        path.write_text(text)
        return path

    def test_numeric_fixture(self, tmp_path):
        path = self.write(tmp_path, "a,b,y\n1,2,3\n4,5,6\n7,8,9\n")
        data = load_csv(path, "y")
        assert data.n == 3 and data.p == 2
        assert data.column_names == ("a", "b")
        np.testing.assert_allclose(data.y_raw, [3, 6, 9])

    def test_categorical_one_hot(self, tmp_path):
        path = self.write(tmp_path, "color,y\nred,1\ngreen,2\nblue,3\nred,4\n")
        data = load_csv(path, "y")
        assert data.p == 3
        assert data.column_names == ("color=blue", "color=green", "color=red")
        np.testing.assert_allclose(data.x.sum(axis=1), 1.0)

    def test_mixed_column_is_an_error(self, tmp_path):
        path = self.write(tmp_path, "a,y\n1,1\noops,2\n3,3\n")
        with pytest.raises(DataError, match=r"row 2.*'a'"):
            load_csv(path, "y")

    def test_missing_cell_names_row_and_column(self, tmp_path):
        path = self.write(tmp_path, "a,y\n1,1\n,2\n")
        with pytest.raises(DataError, match=r"row 2.*'a'.*missing"):
            load_csv(path, "y")

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_csv(tmp_path / "nope.csv", "y")

    def test_missing_response(self, tmp_path):
        path = self.write(tmp_path, "a,b\n1,2\n")
        with pytest.raises(DataError, match="response"):
            load_csv(path, "y")

    def test_empty_data(self, tmp_path):
        path = self.write(tmp_path, "a,y\n")
        with pytest.raises(DataError, match="no data rows"):
            load_csv(path, "y")

    def test_constant_response(self, tmp_path):
        path = self.write(tmp_path, "a,y\n1,5\n2,5\n")
        with pytest.raises(DegenerateResponseError):
            load_csv(path, "y")

    def test_probit_requires_binary(self, tmp_path):
        path = self.write(tmp_path, "a,y\n1,0\n2,2\n")
        with pytest.raises(DataError, match="0/1"):
            load_csv(path, "y", mode="probit")

    def test_log_transform(self, tmp_path):
        path = self.write(tmp_path, "a,y\n1,1\n2,10\n3,100\n")
        data = load_csv(path, "y", response_transform="log")
        np.testing.assert_allclose(data.y_raw, np.log([1, 10, 100]))

    def test_log_transform_rejects_nonpositive(self, tmp_path):
        path = self.write(tmp_path, "a,y\n1,0\n2,10\n")
        with pytest.raises(DataError, match="positive"):
            load_csv(path, "y", response_transform="log")

    def test_quoted_fields(self, tmp_path):
        path = self.write(tmp_path, 'name,y\n"big, red",1\nsmall,2\n')
        data = load_csv(path, "y")
        assert data.column_names == ("name=big, red", "name=small")


class TestPredictionMatrix:
    def train(self, tmp_path):
        path = tmp_path / "train.csv"
        path.write_text("a,color,y\n1,red,1\n2,green,2\n3,red,3\n4,blue,4\n")
        return load_csv(path, "y")

    def test_round_trip_encoding(self, tmp_path):
        data = self.train(tmp_path)
        x = load_prediction_matrix(tmp_path / "train.csv", data.columns, "y")
        np.testing.assert_allclose(x, data.x)

    def test_response_optional(self, tmp_path):
        data = self.train(tmp_path)
        path = tmp_path / "new.csv"
        path.write_text("a,color\n9,red\n")
        x = load_prediction_matrix(path, data.columns, "y")
        assert x.shape == (1, data.p)

    def test_missing_column(self, tmp_path):
        data = self.train(tmp_path)
        path = tmp_path / "new.csv"
        path.write_text("a,y\n9,0\n")
        with pytest.raises(SchemaError, match="missing columns: color"):
            load_prediction_matrix(path, data.columns, "y")

    def test_unseen_level(self, tmp_path):
        data = self.train(tmp_path)
        path = tmp_path / "new.csv"
        path.write_text("a,color\n9,purple\n")
        with pytest.raises(SchemaError, match="purple"):
            load_prediction_matrix(path, data.columns, "y")

    def test_column_order_checked(self, tmp_path):
        data = self.train(tmp_path)
        path = tmp_path / "new.csv"
        path.write_text("color,a\nred,9\n")
        with pytest.raises(SchemaError, match="order"):
            load_prediction_matrix(path, data.columns, "y")


class TestGenerateFriedman:
    def test_plug_in_values(self):
        x = np.zeros((2, 10))
        x[0, :5] = [0.5, 1.0, 0.5, 0.0, 0.0]
        x[1, :5] = [0.0, 0.3, 0.5, 0.0, 0.0]
        f = bart.friedman_function(x)
        assert f[0] == pytest.approx(10.0, rel=1e-12)  # 10 sin(pi/2)
        assert f[1] == pytest.approx(0.0, abs=1e-12)

    def test_noiseless_equals_truth(self):
        data, f = generate_friedman(np.random.default_rng(0), 50, 6, 0.0)
        np.testing.assert_array_equal(data.y_raw, f)

    def test_needs_five_predictors(self):
        with pytest.raises(DataError):
            generate_friedman(np.random.default_rng(0), 10, 4, 1.0)

    def test_monte_carlo_mean(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(size=(1_000_000, 5))
        mean = float(
            np.mean(
                10 * np.sin(np.pi * x[:, 0] * x[:, 1])
                + 20 * (x[:, 2] - 0.5) ** 2
                + 10 * x[:, 3]
                + 5 * x[:, 4]
            )
        )
        assert mean == pytest.approx(14.41, abs=0.03)
        data, f = generate_friedman(np.random.default_rng(2), 200_000, 5, 0.0)
        assert float(np.mean(f)) == pytest.approx(mean, abs=0.05)


class TestDatasetValidation:
    def test_rejects_nan_predictors(self):
        x = np.array([[0.0], [np.nan]])
        with pytest.raises(DataError, match="finite"):
            make_dataset(x, np.array([0.0, 1.0]))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(DataError):
            make_dataset(np.zeros((3, 2)), np.zeros(4))

    def test_available_splits_interval(self):
        data = make_dataset(np.array([[0.0], [1.0], [2.0], [3.0]]), np.arange(4.0))
        lo, hi = data.available_splits(np.arange(4))
        assert lo[0] == 0 and hi[0] == 2
        lo, hi = data.available_splits(np.array([2, 3]))
        assert lo[0] == 2 and hi[0] == 2
        lo, hi = data.available_splits(np.array([1]))
        assert lo[0] > hi[0]

    def test_available_splits_min_leaf(self):
        data = make_dataset(np.array([[0.0], [1.0], [2.0], [3.0]]), np.arange(4.0))
        lo, hi = data.available_splits(np.arange(4), min_leaf=2)
        assert lo[0] == 1 and hi[0] == 1  # only the middle cut keeps 2 rows per side


class TestModelRoundTrip:
    def small_draws(self, probit=False):
        rng = np.random.default_rng(3)
        if probit:
            x = rng.uniform(size=(40, 3))
            y = (rng.uniform(size=40) < 0.4).astype(float)
            data = bart.make_dataset(x, y, mode="probit")
            spec = bart.calibrate_prior(data, num_trees=4)
            return data, bart.run_probit_chain(data, spec, bart.ChainConfig(burn_in=4, keep=3, seed=7))
        data, _ = generate_friedman(rng, 30, 5, 1.0)
        spec = bart.calibrate_prior(data, num_trees=4)
        return data, bart.run_chain(data, spec, bart.ChainConfig(burn_in=4, keep=3, seed=7))

    def test_structural_round_trip(self, tmp_path):
        _, draws = self.small_draws()
        path = tmp_path / "model.txt"
        bart.save_model(draws, path)
        loaded = bart.load_model(path)
        assert loaded.num_draws == draws.num_draws
        assert loaded.mode == draws.mode
        assert loaded.scaling == draws.scaling
        assert loaded.response_name == draws.response_name
        assert loaded.columns == draws.columns
        assert loaded.spec == draws.spec
        assert loaded.config == draws.config
        for ga, gb in zip(loaded.grids, draws.grids):
            np.testing.assert_array_equal(ga, gb)
        for ea, eb in zip(loaded.ensembles, draws.ensembles):
            assert ea.sigma == eb.sigma
            for ta, tb in zip(ea.trees, eb.trees):
                assert ta.nodes == tb.nodes

    def test_prediction_replay_exact(self, tmp_path):
        data, draws = self.small_draws()
        path = tmp_path / "model.txt"
        bart.save_model(draws, path)
        loaded = bart.load_model(path)
        before = bart.predict(draws, data.x)
        after = bart.predict(loaded, data.x)
        np.testing.assert_allclose(after, before, atol=1e-12)

    def test_probit_round_trip(self, tmp_path):
        data, draws = self.small_draws(probit=True)
        path = tmp_path / "model.txt"
        bart.save_model(draws, path)
        loaded = bart.load_model(path)
        assert loaded.mode == "probit"
        assert loaded.scaling is None
        assert loaded.offset == draws.offset
        before = bart.predict_prob(draws, data.x)[0]
        after = bart.predict_prob(loaded, data.x)[0]
        np.testing.assert_allclose(after, before, atol=1e-15)

    def test_truncated_file_rejected(self, tmp_path):
        _, draws = self.small_draws()
        path = tmp_path / "model.txt"
        bart.save_model(draws, path)
        text = path.read_text()
        clipped = tmp_path / "clipped.txt"
        clipped.write_text(text[: int(len(text) * 0.7)])
        with pytest.raises(ModelParseError):
            bart.load_model(clipped)

    def test_version_mismatch(self, tmp_path):
        _, draws = self.small_draws()
        path = tmp_path / "model.txt"
        bart.save_model(draws, path)
        text = path.read_text().replace("bart-model\t1", "bart-model\t99", 1)
        other = tmp_path / "future.txt"
        other.write_text(text)
        with pytest.raises(ModelVersionError):
            bart.load_model(other)

    def test_not_a_model_file(self, tmp_path):
        path = tmp_path / "junk.txt"
        path.write_text("hello\nworld\n")
        with pytest.raises(ModelParseError):
            bart.load_model(path)

    def test_identical_draws_identical_bytes(self, tmp_path):
        _, draws = self.small_draws()
        p1, p2 = tmp_path / "m1.txt", tmp_path / "m2.txt"
        bart.save_model(draws, p1)
        bart.save_model(draws, p2)
        assert p1.read_bytes() == p2.read_bytes()
