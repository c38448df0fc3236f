import numpy as np
import pytest

from hsics.dictlearn import (
    Dictionary,
    TrainConfig,
    default_lambda,
    dictionary_objective,
    learn_dictionary,
    sparse_code,
    update_dictionary,
)
from hsics.errors import DegenerateInputError, DimensionError, ValidationError
from hsics.hsi import synth_scene
from hsics.solvers import LassoProblem, kkt_residual, lasso_cd


@pytest.fixture(scope="module")
def scene():
    return synth_scene(16, 24, 3, 240, 0.01, seed=2)


def _surrogate(D, A, B):
    return 0.5 * np.trace(D.T @ D @ A) - np.trace(D.T @ B)


class TestDictionary:
    def test_rejects_long_atoms(self):
        with pytest.raises(ValidationError):
            Dictionary(np.array([[2.0, 0.0], [0.0, 1.0]]))

    def test_train_pixel_ids(self):
        d = Dictionary(np.eye(2), {"train_pixel_ids": [[1, 2], [3, 4]]})
        assert d.train_pixel_ids == {(1, 2), (3, 4)}

    def test_default_lambda(self):
        assert default_lambda(64) == pytest.approx(0.15)


class TestTrainConfig:
    @pytest.mark.parametrize(
        "kwargs", [{"atom_count": 0}, {"atom_count": 4, "lam": -1.0}, {"atom_count": 4, "epochs": 0}, {"atom_count": 4, "batch": 0}]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            TrainConfig(**kwargs)


class TestSparseCode:
    def test_each_column_solves_its_lasso(self, scene):
        D = scene.true_dictionary.matrix
        X = scene.spectra.columns[:, :20]
        res = sparse_code(D, X, 0.05, tol=1e-9)
        assert res.converged.all()
        for i in range(20):
            assert kkt_residual(D, X[:, i], res.codes[:, i], 0.05) <= 1e-9
            ref = lasso_cd(LassoProblem(D, X[:, i], 0.05), tol=1e-9).solution
            np.testing.assert_allclose(res.codes[:, i], ref, atol=1e-7)

    def test_shape_mismatch(self, scene):
        with pytest.raises(DimensionError):
            sparse_code(scene.true_dictionary, np.ones((5, 2)), 0.1)


class TestUpdateDictionary:
    def test_surrogate_decreases_and_atoms_bounded(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((10, 80))
        S = rng.standard_normal((15, 80)) * (rng.random((15, 80)) < 0.2)
        A, B = S @ S.T, X @ S.T
        D0 = rng.standard_normal((10, 15))
        D0 /= np.linalg.norm(D0, axis=0)
        D1, cycles = update_dictionary(D0, A, B)
        assert cycles >= 1
        assert _surrogate(D1, A, B) <= _surrogate(D0, A, B) + 1e-12
        assert np.all(np.linalg.norm(D1, axis=0) <= 1 + 1e-12)

    def test_unused_atom_untouched(self):
        rng = np.random.default_rng(1)
        D0 = rng.standard_normal((4, 3))
        D0 /= np.linalg.norm(D0, axis=0)
        S = np.vstack([rng.standard_normal((2, 30)), np.zeros((1, 30))])
        X = rng.standard_normal((4, 30))
        D1, _ = update_dictionary(D0, S @ S.T, X @ S.T)
        np.testing.assert_array_equal(D1[:, 2], D0[:, 2])


class TestLearnDictionary:
    def test_objective_never_increases(self, scene):
        seen = []
        dic = learn_dictionary(
            scene.spectra, TrainConfig(24, epochs=8, seed=0), callback=lambda e, D, S, f: seen.append(e)
        )
        hist = np.array(dic.provenance["objective_history"])
        assert hist.size == 9
        assert np.all(np.diff(hist) <= 1e-10 * hist[0])
        assert seen == list(range(1, 9))

    def test_provenance_and_determinism(self, scene):
        cfg = TrainConfig(24, epochs=3, seed=5)
        a = learn_dictionary(scene.spectra, cfg)
        b = learn_dictionary(scene.spectra, cfg)
        np.testing.assert_array_equal(a.matrix, b.matrix)
        prov = a.provenance
        assert prov["dataset"] == scene.spectra.dataset_id
        assert prov["lambda"] == pytest.approx(default_lambda(16))
        assert prov["seed"] == 5
        assert a.train_pixel_ids == scene.spectra.id_set()

    def test_objective_matches_recomputation(self, scene):
        cfg = TrainConfig(24, epochs=2, seed=0, code_tol=1e-10)
        dic = learn_dictionary(scene.spectra, cfg)
        lam = dic.provenance["lambda"]
        S = sparse_code(dic, scene.spectra, lam, tol=1e-10).codes
        fresh = dictionary_objective(dic.matrix, scene.spectra.columns, S, lam)
        # recoding under the final D can only lower F
        assert fresh <= dic.provenance["objective_history"][-1] + 1e-8

    def test_minibatch_mode(self, scene):
        dic = learn_dictionary(scene.spectra, TrainConfig(24, epochs=2, seed=0, batch=64))
        assert dic.atom_count == 24
        assert np.all(np.linalg.norm(dic.matrix, axis=0) <= 1 + 1e-12)
        assert dic.provenance["batch"] == 64

    def test_dead_atoms_are_reseeded(self):
        # a huge lambda leaves every code zero in the first epoch
        sc = synth_scene(8, 10, 2, 40, 0.01, seed=3)
        dic = learn_dictionary(sc.spectra, TrainConfig(10, lam=10.0, epochs=1, seed=0))
        assert dic.provenance["reseeded_atoms"] == 10

    def test_too_few_columns(self):
        sc = synth_scene(8, 10, 2, 5, 0.0, seed=0)
        with pytest.raises(DegenerateInputError):
            learn_dictionary(sc.spectra, TrainConfig(10))
