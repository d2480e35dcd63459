import json

import numpy as np

from obsmech.cache import EigenCache, cached_diagonalize, spec_key
from obsmech.model import ChainSpec


def test_round_trip_bit_exact(tmp_path):
    spec = ChainSpec(4)
    a = cached_diagonalize(spec, tmp_path)
    b = EigenCache(tmp_path).load(spec)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)
    assert a.diag_residual == b.diag_residual
    assert np.array_equal(cached_diagonalize(spec).eigenvalues, a.eigenvalues)


def test_keys_distinguish_specs():
    assert spec_key(ChainSpec(4)) != spec_key(ChainSpec(4, defect_strength=0.0))
    assert spec_key(ChainSpec(4)) == spec_key(ChainSpec(4))


def test_corruption_recomputes(tmp_path, caplog):
    spec = ChainSpec(4)
    ref = cached_diagonalize(spec, tmp_path)
    binp = next(tmp_path.glob("*.bin"))
    raw = bytearray(binp.read_bytes())
    raw[10] ^= 0xFF
    binp.write_bytes(bytes(raw))
    cache = EigenCache(tmp_path)
    assert cache.load(spec) is None
    assert "unusable" in caplog.text
    again = cache.get(spec)
    assert np.array_equal(again.eigenvalues, ref.eigenvalues)
    assert cache.load(spec) is not None


def test_version_mismatch(tmp_path):
    spec = ChainSpec(4)
    cached_diagonalize(spec, tmp_path)
    meta = next(tmp_path.glob("*.json"))
    info = json.loads(meta.read_text())
    info["version"] = 999
    meta.write_text(json.dumps(info))
    assert EigenCache(tmp_path).load(spec) is None
