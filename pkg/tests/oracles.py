"""Brute-force reference implementations used only by the tests.

Everything here is written directly from the definitions with dense
matrices and Kronecker products, sharing no code with the package.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy.linalg import expm
from scipy.optimize import linprog

I2 = np.eye(2)
PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_all(ops):
    out = np.array([[1.0 + 0j]])
    for o in ops:
        out = np.kron(out, o)
    return out


def site_op(n, site, op):
    ops = [I2] * n
    ops[site - 1] = op
    return kron_all(ops)


def heisenberg(n, J=1.0, K=None, eps=0.0, defect=3):
    """Open XXX chain with nearest and next-nearest bonds, built from Kronecker products."""
    K = J if K is None else K
    H = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(1, n):
        Ji = J + (eps if i == defect else 0.0)
        for s in PAULI.values():
            H += Ji * site_op(n, i, s) @ site_op(n, i + 1, s)
    for i in range(1, n - 1):
        Ki = K + (eps if i == defect else 0.0)
        for s in PAULI.values():
            H += Ki * site_op(n, i, s) @ site_op(n, i + 2, s)
    return H


def charge(n, a, per_site=True):
    Q = sum(site_op(n, i, PAULI[a]) for i in range(1, n + 1))
    return Q / n if per_site else Q


def ry(t):
    return expm(-1j * t * PAULI["y"] / 2)


def rx(t):
    return expm(-1j * t * PAULI["x"] / 2)


def neel(n):
    v = np.zeros(2**n, dtype=complex)
    v[int("01" * (n // 2), 2)] = 1
    return v


def theta_state(n, theta):
    rots = [ry(theta) if i % 2 == 0 else ry(-theta) for i in range(n)]
    return kron_all(rots) @ neel(n)


def projector_1(n, a, site, j):
    return site_op(n, site, (I2 + (-1) ** j * PAULI[a]) / 2)


def projector_2(n, a, site, j, k):
    return projector_1(n, a, site, j) @ projector_1(n, a, site + 1, k)


def dephase_dense(rho, H, tol=1e-8):
    """Block-diagonal part of ``rho`` in the eigenbasis of ``H`` (levels closer than ``tol`` merged)."""
    w, U = np.linalg.eigh(H)
    lab = np.concatenate([[0], np.cumsum(np.diff(w) > tol)])
    M = U.conj().T @ rho @ U
    M = np.where(lab[:, None] == lab[None, :], M, 0)
    return U @ M @ U.conj().T


def weak_value(rho, O, A):
    return np.trace(rho @ O @ A) / np.trace(rho @ A).real


def nats_dense_two_site(beta, mu_vec, J=1.0):
    """Reduced probabilities of ``exp(-beta H_S - mu . Q_S)/Z`` for two sites."""
    H = J * sum(np.kron(s, s) for s in PAULI.values())
    Q = {a: np.kron(s, I2) + np.kron(I2, s) for a, s in PAULI.items()}
    G = expm(-beta * H - sum(m * Q[a] for m, a in zip(mu_vec, "xyz")))
    rho = G / np.trace(G)
    out = {}
    for a, s in PAULI.items():
        P = [(I2 + s) / 2, (I2 - s) / 2]
        out[a] = np.array([np.trace(rho @ np.kron(P[j], P[k])).real for j in (0, 1) for k in (0, 1)])
    return out


def nats_dense_one_site(mu_vec):
    G = expm(-sum(m * PAULI[a] for m, a in zip(mu_vec, "xyz")))
    rho = G / np.trace(G)
    return {a: np.array([np.trace(rho @ (I2 + (-1) ** j * s) / 2).real for j in (0, 1)])
            for a, s in PAULI.items()}


# ----------------------------------------------------------------------------- max-entropy oracles

def logit_grid_beta(eps, E, lo=-20.0, hi=20.0, steps=2001, rounds=12):
    """1-D refined grid search for beta with sum eps p(beta) = E (two outcomes, d = 1)."""
    eps = np.asarray(eps, dtype=float)
    for _ in range(rounds):
        b = np.linspace(lo, hi, steps)
        logits = -np.outer(b, eps)
        p = np.exp(logits - logits.max(axis=1, keepdims=True))
        p /= p.sum(axis=1, keepdims=True)
        err = np.abs(p @ eps - E)
        k = int(np.argmin(err))
        h = b[1] - b[0]
        lo, hi = b[k] - 2 * h, b[k] + 2 * h
    return b[k]


def _null_space(A, rtol=1e-12):
    u, s, vt = np.linalg.svd(A)
    rank = int(np.sum(s > rtol * max(1.0, s.max(initial=0.0))))
    return vt[rank:].T


def maxent_grid(F, d, T, points=21, rounds=60):
    """Primal refined grid search for ``argmax -sum p log(p/d)`` over the moment polytope.

    The feasible set is parametrized as ``p0 + N z`` with ``N`` a null-space
    basis of the constraint matrix; a box in ``z`` (from linear programs) is
    gridded and repeatedly shrunk around the best feasible point. The entropy
    is strictly concave, so the zoom converges to the unique maximizer.
    """
    F = np.asarray(F, dtype=float)
    n = F.shape[0]
    A = np.vstack([np.ones(n), F.T])
    b = np.concatenate([[1.0], T])
    res = linprog(np.zeros(n), A_eq=A, b_eq=b, bounds=[(0, None)] * n, method="highs")
    assert res.status == 0, "infeasible oracle instance"
    p0 = res.x
    N = _null_space(A)
    k = N.shape[1]
    if k == 0:
        return p0

    def entropy(P):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(P > 0, -P * np.log(P / d), 0.0)
        S = t.sum(axis=-1)
        return np.where(np.all(P >= -1e-15, axis=-1), S, -np.inf)

    lo, hi = np.zeros(k), np.zeros(k)
    for i in range(k):
        for sgn in (1, -1):
            c = np.zeros(k)
            c[i] = sgn
            # z free, p0 + N z >= 0
            r = linprog(c, A_ub=-N, b_ub=p0, bounds=[(None, None)] * k, method="highs")
            if sgn == 1:
                lo[i] = r.x[i]
            else:
                hi[i] = r.x[i]
    center = (lo + hi) / 2
    half = (hi - lo) / 2
    best = center
    for _ in range(rounds):
        axes = [np.linspace(c - h, c + h, points) for c, h in zip(center, half)]
        Z = np.array(list(itertools.product(*axes)))
        P = p0 + Z @ N.T
        S = entropy(P)
        best = Z[int(np.argmax(S))]
        center = best
        half = half * 0.35
        if half.max() < 1e-13:
            break
    p = np.clip(p0 + N @ best, 0, None)
    return p / p.sum()


def random_instance(rng):
    """Feasible max-entropy problem: 2-4 outcomes, 0-3 charges, targets from an interior point."""
    n = int(rng.integers(2, 5))
    m = int(rng.integers(0, 4))
    eps = rng.normal(size=n) * rng.uniform(0.1, 3.0)
    q = [rng.normal(size=n) for _ in range(m)]
    d = rng.integers(1, 5, size=n).astype(float)
    p = rng.dirichlet(np.ones(n))
    p = 0.9 * p + 0.1 / n
    T = np.concatenate([[p @ eps], [p @ c for c in q]])
    return eps, q, d, T
