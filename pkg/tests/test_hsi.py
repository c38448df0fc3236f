import numpy as np
import pytest

from hsics.errors import (
    DegenerateInputError,
    MissingKeyError,
    SizeMismatchError,
    UnsupportedDataTypeError,
    UnsupportedInterleaveError,
    ValidationError,
)
from hsics.hsi import (
    HsiCube,
    SpectraSet,
    read_envi,
    read_spectra_csv,
    split_train_test,
    synth_scene,
    to_spectra,
    write_envi,
    write_spectra_csv,
)


def _cube(dtype_code=4, byte_order=0, seed=0):
    rng = np.random.default_rng(seed)
    data = rng.uniform(0.0, 1.0, (3, 4, 5))
    if dtype_code == 4:
        data = data.astype(np.float32).astype(np.float64)
    return HsiCube(data, np.array([450.0, 550.0, 650.0]), dtype_code, byte_order, "scene")


def _write_raw(tmp_path, header_lines, payload, name="cube"):
    hdr = tmp_path / f"{name}.hdr"
    hdr.write_text("ENVI\n" + "\n".join(header_lines) + "\n")
    (tmp_path / f"{name}.img").write_bytes(payload)
    return hdr


class TestEnvi:
    @pytest.mark.parametrize("dtype_code", [4, 5])
    @pytest.mark.parametrize("byte_order", [0, 1])
    def test_round_trip(self, tmp_path, dtype_code, byte_order):
        cube = _cube(dtype_code, byte_order)
        write_envi(cube, tmp_path / "c.hdr")
        back = read_envi(tmp_path / "c.hdr")
        np.testing.assert_array_equal(back.data, cube.data)
        np.testing.assert_array_equal(back.wavelengths_nm, cube.wavelengths_nm)
        assert (back.bands, back.lines, back.samples) == (3, 4, 5)

    def test_bsq_layout_is_band_major(self, tmp_path):
        # 2 bands, 1 line, 3 samples: file order is band 0 then band 1
        payload = np.arange(6, dtype="<f4").tobytes()
        hdr = _write_raw(tmp_path, ["samples = 3", "lines = 1", "bands = 2", "data type = 4", "interleave = bsq"], payload)
        cube = read_envi(hdr)
        np.testing.assert_array_equal(cube.data[0, 0], [0, 1, 2])
        np.testing.assert_array_equal(cube.data[1, 0], [3, 4, 5])

    def test_header_offset_and_data_file_key(self, tmp_path):
        payload = b"\x00" * 16 + np.array([1.5, 2.5], dtype=">f8").tobytes()
        (tmp_path / "raw.bin").write_bytes(payload)
        hdr = tmp_path / "x.hdr"
        hdr.write_text(
            "ENVI\nsamples = 2\nlines = 1\nbands = 1\ndata type = 5\ninterleave = BSQ\n"
            "byte order = 1\nheader offset = 16\ndata file = raw.bin\n"
        )
        np.testing.assert_array_equal(read_envi(hdr).data.ravel(), [1.5, 2.5])

    def test_micrometers_converted(self, tmp_path):
        payload = np.zeros(2, dtype="<f4").tobytes()
        hdr = _write_raw(
            tmp_path,
            ["samples = 1", "lines = 1", "bands = 2", "data type = 4", "interleave = bsq",
             "wavelength units = Micrometers", "wavelength = {0.45,\n 0.55}"],
            payload,
        )
        np.testing.assert_allclose(read_envi(hdr).wavelengths_nm, [450.0, 550.0])

    def test_missing_key(self, tmp_path):
        hdr = _write_raw(tmp_path, ["samples = 1", "lines = 1", "data type = 4", "interleave = bsq"], b"")
        with pytest.raises(MissingKeyError, match="bands"):
            read_envi(hdr)

    def test_bil_rejected(self, tmp_path):
        hdr = _write_raw(tmp_path, ["samples = 1", "lines = 1", "bands = 1", "data type = 4", "interleave = bil"], b"\0" * 4)
        with pytest.raises(UnsupportedInterleaveError):
            read_envi(hdr)

    def test_integer_type_rejected(self, tmp_path):
        hdr = _write_raw(tmp_path, ["samples = 1", "lines = 1", "bands = 1", "data type = 2", "interleave = bsq"], b"\0" * 2)
        with pytest.raises(UnsupportedDataTypeError):
            read_envi(hdr)

    def test_size_mismatch(self, tmp_path):
        hdr = _write_raw(tmp_path, ["samples = 2", "lines = 2", "bands = 1", "data type = 4", "interleave = bsq"], b"\0" * 12)
        with pytest.raises(SizeMismatchError):
            read_envi(hdr)


class TestSpectra:
    def test_pixel_order_and_ids(self):
        data = np.arange(2 * 2 * 3, dtype=float).reshape(2, 2, 3) + 1.0
        s = to_spectra(HsiCube(data, None, 5, 0, "c"), normalize=False)
        # x varies fastest within a line
        np.testing.assert_array_equal(s.pixel_ids[:4], [[0, 0], [1, 0], [2, 0], [0, 1]])
        np.testing.assert_array_equal(s.columns[:, 1], data[:, 0, 1])

    def test_normalize_drops_zero_pixels(self):
        data = np.ones((2, 1, 3))
        data[:, 0, 1] = 0.0
        s = to_spectra(HsiCube(data, None, 5, 0, "c"))
        assert s.p == 2
        np.testing.assert_allclose(np.linalg.norm(s.columns, axis=0), 1.0)
        np.testing.assert_array_equal(s.dropped_ids, [[1, 0]])

    def test_columns_are_c_contiguous(self):
        s = SpectraSet(np.asfortranarray(np.ones((3, 4))), np.zeros((4, 2)))
        assert s.columns.flags["C_CONTIGUOUS"]

    def test_content_hash_default_dataset_id(self):
        s = SpectraSet(np.ones((2, 3)), np.arange(6).reshape(3, 2))
        assert s.dataset_id == "sha256:" + s.content_hash()

    def test_select_bands_renormalizes(self):
        cols = np.array([[0.6, 0.0], [0.8, 1.0]])
        s = SpectraSet(cols, [[0, 0], [1, 0]], normalized=True)
        sub = s.select_bands([0])
        np.testing.assert_allclose(sub.columns, [[1.0]])
        np.testing.assert_array_equal(sub.dropped_ids, [[1, 0]])


class TestSplit:
    def _set(self, p):
        return SpectraSet(np.random.default_rng(0).random((4, p)), np.stack([np.arange(p), np.zeros(p)], 1))

    def test_disjoint_cover_and_deterministic(self):
        s = self._set(101)
        tr, te = split_train_test(s, 0.5, seed=3)
        tr2, te2 = split_train_test(s, 0.5, seed=3)
        assert tr.id_set().isdisjoint(te.id_set())
        assert tr.id_set() | te.id_set() == s.id_set()
        np.testing.assert_array_equal(tr.pixel_ids, tr2.pixel_ids)
        # 50.5 rounds up
        assert tr.p == 51

    def test_different_seeds_differ(self):
        s = self._set(50)
        a, _ = split_train_test(s, 0.5, 1)
        b, _ = split_train_test(s, 0.5, 2)
        assert a.id_set() != b.id_set()

    def test_degenerate(self):
        with pytest.raises(DegenerateInputError):
            split_train_test(self._set(1), 0.5, 0)

    @pytest.mark.parametrize("f", [0.0, 1.0, -0.1])
    def test_bad_fraction(self, f):
        with pytest.raises(ValidationError):
            split_train_test(self._set(10), f, 0)


class TestCsv:
    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(4)
        s = SpectraSet(rng.standard_normal((5, 7)), np.stack([np.arange(7), np.arange(7) * 2], 1))
        write_spectra_csv(s, tmp_path / "s.csv")
        back = read_spectra_csv(tmp_path / "s.csv")
        np.testing.assert_array_equal(back.columns, s.columns)
        np.testing.assert_array_equal(back.pixel_ids, s.pixel_ids)
        assert (tmp_path / "s.csv").read_text().splitlines()[0].startswith("band,0:0,1:2")

    def test_bad_header(self, tmp_path):
        (tmp_path / "s.csv").write_text("wavelength,0:0\n0,1.0\n")
        with pytest.raises(ValidationError):
            read_spectra_csv(tmp_path / "s.csv")

    def test_nan_rejected(self, tmp_path):
        (tmp_path / "s.csv").write_text("band,0:0\n0,nan\n")
        with pytest.raises(ValidationError):
            read_spectra_csv(tmp_path / "s.csv")


class TestSynthScene:
    def test_planted_structure(self):
        sc = synth_scene(16, 24, 3, 50, 0.0, seed=1)
        assert sc.spectra.p == 50
        assert np.all((sc.true_codes != 0).sum(axis=0) == 3)
        np.testing.assert_allclose(np.linalg.norm(sc.true_dictionary.matrix, axis=0), 1.0)
        # noise-free: spectra are exactly the planted model
        np.testing.assert_allclose(sc.spectra.columns, sc.true_dictionary.matrix @ sc.true_codes, atol=1e-12)

    def test_deterministic(self):
        a = synth_scene(8, 12, 2, 20, 0.01, seed=5)
        b = synth_scene(8, 12, 2, 20, 0.01, seed=5)
        np.testing.assert_array_equal(a.spectra.columns, b.spectra.columns)
        assert a.spectra.dataset_id == b.spectra.dataset_id

    def test_shared_dictionary_seed(self):
        a = synth_scene(8, 12, 2, 20, 0.01, seed=1, dictionary_seed=9)
        b = synth_scene(8, 12, 2, 20, 0.01, seed=2, dictionary_seed=9)
        np.testing.assert_array_equal(a.true_dictionary.matrix, b.true_dictionary.matrix)
        assert not np.array_equal(a.spectra.columns, b.spectra.columns)
        assert a.spectra.dataset_id != b.spectra.dataset_id

    def test_true_dictionary_fits_within_noise(self):
        # with all d measurements the planted model is feasible for eps = 0.03
        from hsics.solvers import solve_bpdn_batch

        sc = synth_scene(64, 96, 4, 200, 0.01, seed=0)
        rep = solve_bpdn_batch(sc.true_dictionary.matrix, sc.spectra.columns, 0.03)
        assert rep.converged.mean() >= 0.99
        assert np.mean(rep.residual_norms <= 0.03 * (1 + 1e-3)) >= 0.99

    def test_bad_k(self):
        with pytest.raises(ValidationError):
            synth_scene(8, 4, 5, 10, 0.0, 0)
