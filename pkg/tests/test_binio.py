import struct

import numpy as np
import pytest

from hsics.binio import (
    DICT_MAGIC,
    read_balance,
    read_dictionary,
    read_measurement,
    write_balance,
    write_dictionary,
    write_measurement,
)
from hsics.dictlearn import Dictionary
from hsics.errors import ValidationError
from hsics.sensing import balance, gaussian_measurement, subsample_measurement, svd_measurement


@pytest.fixture
def dictionary():
    rng = np.random.default_rng(0)
    d = rng.standard_normal((6, 9))
    d /= np.linalg.norm(d, axis=0)
    return Dictionary(d, {"dataset": "x", "lambda": 0.1, "objective_history": [3.0, 2.5], "train_pixel_ids": [[0, 1]]})


class TestDictionaryFile:
    def test_round_trip_bit_exact(self, tmp_path, dictionary):
        write_dictionary(dictionary, tmp_path / "d.hsd")
        back = read_dictionary(tmp_path / "d.hsd")
        np.testing.assert_array_equal(back.matrix, dictionary.matrix)
        assert back.provenance == dictionary.provenance

    def test_layout(self, tmp_path):
        d = Dictionary(np.array([[0.5, 0.0], [0.0, 0.25]]), {"k": 1})
        write_dictionary(d, tmp_path / "d.hsd")
        raw = (tmp_path / "d.hsd").read_bytes()
        assert raw[:8] == DICT_MAGIC
        assert struct.unpack_from("<II", raw, 8) == (2, 2)
        # column-major float64
        np.testing.assert_array_equal(np.frombuffer(raw, "<f8", 4, 16), [0.5, 0.0, 0.0, 0.25])
        (n,) = struct.unpack_from("<I", raw, 48)
        assert raw[52:] == b'{"k":1}' and n == 7

    def test_bad_magic(self, tmp_path):
        (tmp_path / "d.hsd").write_bytes(b"NOTADICT" + b"\0" * 20)
        with pytest.raises(ValidationError, match="magic"):
            read_dictionary(tmp_path / "d.hsd")

    def test_truncated(self, tmp_path, dictionary):
        write_dictionary(dictionary, tmp_path / "d.hsd")
        raw = (tmp_path / "d.hsd").read_bytes()
        (tmp_path / "t.hsd").write_bytes(raw[:40])
        with pytest.raises(ValidationError):
            read_dictionary(tmp_path / "t.hsd")


class TestMeasurementFile:
    @pytest.mark.parametrize(
        "make",
        [
            lambda: gaussian_measurement(3, 6, 4),
            lambda: subsample_measurement(3, 6, 4),
            lambda: svd_measurement(np.random.default_rng(1).standard_normal((6, 9)), 3),
        ],
    )
    def test_round_trip(self, tmp_path, make):
        phi = make()
        write_measurement(phi, tmp_path / "p.hsm")
        back = read_measurement(tmp_path / "p.hsm")
        np.testing.assert_array_equal(back.phi, phi.phi)
        assert back.provenance() == phi.provenance()

    def test_dictionary_file_is_not_a_measurement(self, tmp_path, dictionary):
        write_dictionary(dictionary, tmp_path / "d.hsd")
        with pytest.raises(ValidationError):
            read_measurement(tmp_path / "d.hsd")


class TestBalanceFile:
    def test_round_trip(self, tmp_path):
        a = np.random.default_rng(2).standard_normal((4, 10))
        dec = balance(a)
        write_balance(dec, tmp_path / "b.hsb")
        back = read_balance(tmp_path / "b.hsb")
        for name in ("p", "b", "q"):
            np.testing.assert_array_equal(getattr(back, name), getattr(dec, name))
        assert back.history == dec.history
        assert back.iterations_run == dec.iterations_run
        np.testing.assert_allclose(back.reconstruct(), a, atol=1e-12)
