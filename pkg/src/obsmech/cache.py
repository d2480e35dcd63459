"""On-disk cache of eigendecompositions.

Each entry is a raw little-endian float64 file (eigenvalues, then the real and,
for complex matrices, imaginary parts of the eigenvectors) next to a JSON
sidecar holding the format version, shapes and a SHA-256 of the binary.
"""
from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from .model import ChainSpec, build_hamiltonian
from .model import _frozen
from .spectral import SpectralDecomposition, diagonalize

log = logging.getLogger(__name__)

CACHE_VERSION = 1


def spec_key(spec: ChainSpec) -> str:
    blob = json.dumps({"version": CACHE_VERSION, "spec": spec.to_dict()}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


class EigenCache:
    def __init__(self, directory):
        self.directory = Path(directory)

    def _paths(self, key: str):
        return self.directory / f"{key}.bin", self.directory / f"{key}.json"

    def load(self, spec: ChainSpec) -> SpectralDecomposition | None:
        key = spec_key(spec)
        binp, meta = self._paths(key)
        if not (binp.exists() and meta.exists()):
            return None
        try:
            info = json.loads(meta.read_text())
            raw = binp.read_bytes()
            if info.get("version") != CACHE_VERSION or hashlib.sha256(raw).hexdigest() != info["sha256"]:
                raise ValueError("version or checksum mismatch")
            D = int(info["dim"])
            a = np.frombuffer(raw, dtype="<f8")
            w = a[:D].copy()
            U = a[D:D + D * D].reshape(D, D).copy()
            if info["complex"]:
                U = U + 1j * a[D + D * D:].reshape(D, D)
            return SpectralDecomposition(_frozen(w), _frozen(U), float(info["diag_residual"]))
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            log.warning("eigendecomposition cache entry %s unusable (%s); recomputing", key, exc)
            return None

    def store(self, spec: ChainSpec, sd: SpectralDecomposition) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        key = spec_key(spec)
        binp, meta = self._paths(key)
        U = sd.eigenvectors
        cplx = bool(np.iscomplexobj(U))
        parts = [np.asarray(sd.eigenvalues, dtype="<f8"), np.asarray(U.real, dtype="<f8").ravel()]
        if cplx:
            parts.append(np.asarray(U.imag, dtype="<f8").ravel())
        raw = b"".join(p.tobytes() for p in parts)
        binp.write_bytes(raw)
        meta.write_text(json.dumps({
            "version": CACHE_VERSION, "dim": sd.dim, "complex": cplx, "diag_residual": sd.diag_residual,
            "sha256": hashlib.sha256(raw).hexdigest(), "spec": spec.to_dict(),
        }, indent=1, sort_keys=True))

    def get(self, spec: ChainSpec) -> SpectralDecomposition:
        sd = self.load(spec)
        if sd is None:
            sd = diagonalize(build_hamiltonian(spec))
            self.store(spec, sd)
        return sd


def cached_diagonalize(spec: ChainSpec, cache_dir=None) -> SpectralDecomposition:
    if cache_dir is None:
        return diagonalize(build_hamiltonian(spec))
    return EigenCache(cache_dir).get(spec)
