"""Sparse many-body operators on a chain of two-level cells.

Basis convention: the computational index b in [0, 2^N) stores cell n in
bit n (bit 0 is the least significant bit). Bit value 0 is the cell ground
state, 1 the excited state, so index 0 is the fully empty register and
index 2^N - 1 the fully excited one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh

from .errors import CapacityError, ContractViolationError, InvariantViolationError

HERMITICITY_ATOL = 1e-12

# Dense eigensolves are allowed up to this dimension; above it only
# matrix-free actions and Lanczos extremal eigenvalues are supported.
DENSE_EIG_CAP = 1 << 14

# Below this dimension a dense eigvalsh is faster than Lanczos.
_DENSE_EIG_FAST = 1 << 11

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
# Raising operator |excited><ground| in the (ground, excited) ordering.
SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.conj().T.copy()
NUMBER_OP = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)


@dataclass(frozen=True)
class BasisConvention:
    """Bit-order bookkeeping for an N-cell register."""

    n_cells: int

    def __post_init__(self):
        if self.n_cells < 1:
            raise ValueError(f"need at least one cell, got {self.n_cells}")

    @property
    def dim(self) -> int:
        return 1 << self.n_cells

    @property
    def all_ground_index(self) -> int:
        return 0

    @property
    def all_excited_index(self) -> int:
        return self.dim - 1

    def bit(self, index, cell: int):
        """Occupation (0/1) of `cell` in basis state `index` (scalar or array)."""
        return (np.asarray(index) >> cell) & 1

    def excitation_count(self, index):
        """Number of excited cells in basis state `index` (scalar or array)."""
        return np.bitwise_count(np.asarray(index, dtype=np.uint64)).astype(np.int64)

    def occupation_table(self) -> np.ndarray:
        """(dim, n_cells) array of bits; column n is the occupation of cell n."""
        b = np.arange(self.dim, dtype=np.int64)
        return np.stack([(b >> n) & 1 for n in range(self.n_cells)], axis=1)


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


class ManyBodyOperator:
    """Sparse operator on the 2^N-dimensional chain Hilbert space.

    Wraps a CSR matrix together with a hermiticity flag. Instances are
    treated as immutable after construction and are safe to share across
    threads.
    """

    __slots__ = ("matrix", "dim", "hermitian")

    def __init__(self, matrix, hermitian: bool = False, validate: bool = True):
        csr = sparse.csr_matrix(matrix, dtype=complex)
        if csr.shape[0] != csr.shape[1]:
            raise ValueError(f"operator must be square, got shape {csr.shape}")
        if not _is_power_of_two(csr.shape[0]):
            raise ValueError(f"dimension {csr.shape[0]} is not a power of two")
        if hermitian and validate:
            dev = _max_abs(csr - csr.getH())
            if dev > HERMITICITY_ATOL:
                raise ContractViolationError(
                    f"operator flagged hermitian deviates by {dev:.3e}"
                )
        self.matrix = csr
        self.dim = csr.shape[0]
        self.hermitian = hermitian

    @property
    def n_cells(self) -> int:
        return self.dim.bit_length() - 1

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ vec

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def is_diagonal(self) -> bool:
        coo = self.matrix.tocoo()
        return bool(np.all(coo.row == coo.col))

    def one_norm(self) -> float:
        return float(abs(self.matrix).sum(axis=0).max())

    def hermiticity_deviation(self) -> float:
        return _max_abs(self.matrix - self.matrix.getH())

    def __add__(self, other: "ManyBodyOperator") -> "ManyBodyOperator":
        self._check_dim(other)
        return ManyBodyOperator(
            self.matrix + other.matrix,
            hermitian=self.hermitian and other.hermitian,
            validate=False,
        )

    def __sub__(self, other: "ManyBodyOperator") -> "ManyBodyOperator":
        self._check_dim(other)
        return ManyBodyOperator(
            self.matrix - other.matrix,
            hermitian=self.hermitian and other.hermitian,
            validate=False,
        )

    def __rmul__(self, scalar) -> "ManyBodyOperator":
        herm = self.hermitian and abs(complex(scalar).imag) == 0.0
        return ManyBodyOperator(scalar * self.matrix, hermitian=herm, validate=False)

    def __matmul__(self, other: "ManyBodyOperator") -> "ManyBodyOperator":
        self._check_dim(other)
        return ManyBodyOperator(self.matrix @ other.matrix, hermitian=False)

    def _check_dim(self, other: "ManyBodyOperator"):
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __repr__(self):
        return (
            f"ManyBodyOperator(dim={self.dim}, nnz={self.nnz}, "
            f"hermitian={self.hermitian})"
        )


def _max_abs(mat) -> float:
    return float(np.abs(mat.data).max()) if mat.nnz else 0.0


def embed_local(local_op: np.ndarray, site: int, n_cells: int) -> ManyBodyOperator:
    """Embed a 2x2 operator acting on `site` into the N-cell register."""
    local_op = np.asarray(local_op, dtype=complex)
    if local_op.shape != (2, 2):
        raise ValueError(f"local operator must be 2x2, got {local_op.shape}")
    if not 0 <= site < n_cells:
        raise ValueError(f"site {site} out of range for {n_cells} cells")
    low = np.arange(1 << site, dtype=np.int64)
    high = np.arange(1 << (n_cells - site - 1), dtype=np.int64) << (site + 1)
    base = (high[:, None] | low[None, :]).ravel()
    rows, cols, vals = [], [], []
    for r in range(2):
        for c in range(2):
            amp = local_op[r, c]
            if amp == 0.0:
                continue
            rows.append(base | (r << site))
            cols.append(base | (c << site))
            vals.append(np.full(base.size, amp))
    if rows:
        mat = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(1 << n_cells, 1 << n_cells),
        )
    else:
        mat = sparse.csr_matrix((1 << n_cells, 1 << n_cells), dtype=complex)
    herm = np.abs(local_op - local_op.conj().T).max() <= HERMITICITY_ATOL
    return ManyBodyOperator(mat, hermitian=herm, validate=False)


def spectral_range(A: ManyBodyOperator, dense_cap: int = DENSE_EIG_CAP):
    """Extremal eigenvalues (lambda_min, lambda_max) of a hermitian operator."""
    if not A.hermitian:
        raise ContractViolationError("spectral_range requires a hermitian operator")
    dev = A.hermiticity_deviation()
    if dev > HERMITICITY_ATOL:
        raise ContractViolationError(f"hermiticity deviation {dev:.3e} too large")
    if A.dim > dense_cap:
        raise CapacityError(
            f"dim {A.dim} exceeds the eigensolve cap {dense_cap}; "
            "only matrix-free actions are supported at this size"
        )
    if A.dim <= _DENSE_EIG_FAST or A.nnz == 0:
        w = np.linalg.eigvalsh(A.dense())
        return float(w[0]), float(w[-1])
    # Lanczos on the sparse matrix; extremal eigenvalues converge to machine
    # precision with tol=0, well inside the 1e-9 relative contract.
    lo = eigsh(A.matrix, k=1, which="SA", return_eigenvectors=False, tol=0)
    hi = eigsh(A.matrix, k=1, which="LA", return_eigenvectors=False, tol=0)
    return float(lo[0]), float(hi[0])


def commutator(A: ManyBodyOperator, B: ManyBodyOperator) -> ManyBodyOperator:
    """AB - BA. Anti-hermitian (checked) when both inputs are hermitian."""
    if A.dim != B.dim:
        raise ValueError(f"dimension mismatch: {A.dim} vs {B.dim}")
    mat = A.matrix @ B.matrix - B.matrix @ A.matrix
    result = ManyBodyOperator(mat, hermitian=False)
    if A.hermitian and B.hermitian:
        dev = _max_abs(mat + mat.getH())
        if dev > HERMITICITY_ATOL * max(1.0, A.one_norm() * B.one_norm()):
            raise InvariantViolationError(
                f"commutator of hermitian operators deviates from "
                f"anti-hermiticity by {dev:.3e}"
            )
    return result
