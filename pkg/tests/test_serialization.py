import numpy as np
import pytest

from utils.errors import InvalidSpecError, ProsodyIOError
from utils.optim import ParamStore
from utils.serialization import load_params, save_params


def _store():
    rng = np.random.default_rng(3)
    store = ParamStore()
    store.add("conv.w", rng.normal(size=(3, 2, 4)))
    store.add("conv.b", rng.normal(size=(4,)))
    store.add("scalar", [0.125])
    return store


def test_round_trip_is_bit_exact(tmp_path):
    path = str(tmp_path / "m.prsm")
    store = _store()
    save_params(path, store, "salience", {"epochs": 3})
    loaded, name, meta = load_params(path)
    assert name == "salience"
    assert meta == {"epochs": 3}
    assert loaded.names() == store.names()
    for key, value in store.items():
        assert loaded[key].dtype == np.float32
        assert loaded[key].tobytes() == value.tobytes()


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.prsm"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(InvalidSpecError):
        load_params(str(path))


def test_truncated_file(tmp_path):
    path = str(tmp_path / "m.prsm")
    save_params(path, _store(), "agent")
    with open(path, "rb") as f:
        raw = f.read()
    with open(path, "wb") as f:
        f.write(raw[:-8])
    with pytest.raises(InvalidSpecError):
        load_params(path)


def test_missing_file(tmp_path):
    with pytest.raises(ProsodyIOError):
        load_params(str(tmp_path / "absent.prsm"))
