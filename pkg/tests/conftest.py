"""Shared brute-force oracles, kept independent of the library internals.

Everything here builds dense matrices with np.kron and explicit loops so
that the optimized sparse/bit-twiddling code paths are checked against a
second, structurally different construction.
"""

import numpy as np

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SP = np.array([[0, 0], [1, 0]], dtype=complex)   # |1><0|, ground-first ordering
SM = SP.conj().T
NUM = np.array([[0, 0], [0, 1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def kron_site(op, site, n):
    """Dense I x ... x op x ... x I with cell n living in bit n of the index.

    np.kron(A, B) makes A the high-order factor, so cell `site` must be
    placed counting from the right.
    """
    out = np.array([[1.0 + 0j]])
    for k in reversed(range(n)):
        out = np.kron(out, op if k == site else I2)
    return out


def dense_h0(n, omega=1.0):
    omega = np.broadcast_to(np.atleast_1d(omega), (n,))
    return sum(omega[k] * kron_site(NUM, k, n) for k in range(n))


def dense_vcl(n, drive=1.0):
    return drive * sum(kron_site(SX, k, n) for k in range(n))


def dense_vqu(n, g=1.0):
    g = np.broadcast_to(np.atleast_1d(g), (n - 1,))
    out = np.zeros((2**n, 2**n), dtype=complex)
    for k in range(n - 1):
        pp = kron_site(SP, k, n) @ kron_site(SP, k + 1, n)
        out += g[k] * (pp + pp.conj().T)
    return out


def random_state(n, rng):
    psi = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return psi / np.linalg.norm(psi)


def random_density(n, rng, rank=None):
    dim = 2**n
    rank = rank or dim
    A = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = A @ A.conj().T
    return rho / np.trace(rho).real


def random_unitary(dim, rng):
    A = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(A)
    return Q * (np.diagonal(R) / np.abs(np.diagonal(R)))


def liouvillian_dense(H, relax, dephase):
    """Vectorized Liouvillian built entry-by-entry with np.kron (oracle).

    vec(rho) is row-stacked as rho.ravel(); d vec/dt = L vec. The dephasing
    channel uses the number operator with rate 2*dephase, matching the
    documented convention.
    """
    n = len(relax)
    dim = 2**n
    I = np.eye(dim, dtype=complex)
    L = -1j * (np.kron(H, I) - np.kron(I, H.T))

    def dissipator(op, rate):
        opd = op.conj().T
        return rate * (
            np.kron(op, opd.T)
            - 0.5 * np.kron(opd @ op, I)
            - 0.5 * np.kron(I, (opd @ op).T)
        )

    for k in range(n):
        if relax[k] > 0:
            L += dissipator(kron_site(SM, k, n), relax[k])
        if dephase[k] > 0:
            L += dissipator(kron_site(NUM, k, n), 2.0 * dephase[k])
    return L
