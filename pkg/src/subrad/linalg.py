"""Dense complex linear algebra kernels for small Hilbert spaces.

All values are plain ``numpy.ndarray`` with ``complex128`` entries, stored
row-major.  Functions never mutate their inputs; outputs should be treated
as immutable.  Dimensions in scope are small (a few hundred at most), so
everything is dense and the Hermitian eigensolver is a self-contained
cyclic Jacobi iteration rather than an external routine.

Ordering convention, used everywhere in the package: subsystem 0 is the
leftmost (slowest-varying) tensor factor, i.e. ``kron(a, b)`` acts with
``a`` on subsystem 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConvergenceFailure, DimensionMismatch, NotHermitian

DEFAULT_HERMITICITY_TOL = 1e-9
DEFAULT_KERNEL_TOL = 1e-9

_MAX_JACOBI_SWEEPS = 60


def as_complex_matrix(a, *, square: bool = False, name: str = "matrix") -> np.ndarray:
    """Validate and convert ``a`` to a 2-D complex128 array.

    Rejects empty, non-2-D and non-finite input.  Returns a view when the
    input already has the right dtype, so callers must not mutate it.
    """
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not (np.all(np.isfinite(m.real)) and np.all(np.isfinite(m.imag))):
        raise DimensionMismatch(f"{name} contains non-finite entries")
    if square and m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return a.conj().T


def max_abs(a: np.ndarray) -> float:
    """Max-norm (largest entry magnitude); 0.0 for empty input."""
    return float(np.max(np.abs(a))) if a.size else 0.0


@dataclass(frozen=True)
class DimsLayout:
    """Tensor factorization bookkeeping: ordered local dimensions.

    ``subsystem_dims[0]`` is the leftmost (slowest-varying) factor.
    """

    subsystem_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.subsystem_dims)
        object.__setattr__(self, "subsystem_dims", dims)
        if len(dims) < 1 or any(d < 2 for d in dims):
            raise DimensionMismatch(f"subsystem dims must all be >= 2, got {dims}")

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.subsystem_dims))

    @property
    def n_subsystems(self) -> int:
        return len(self.subsystem_dims)

    def check_matrix(self, rho: np.ndarray, name: str = "rho") -> np.ndarray:
        rho = as_complex_matrix(rho, square=True, name=name)
        if rho.shape[0] != self.total_dim:
            raise DimensionMismatch(
                f"{name} has dim {rho.shape[0]}, layout expects {self.total_dim}"
            )
        return rho


def kron(a, b) -> np.ndarray:
    """Kronecker product; ``a`` is the slower-varying (left) factor."""
    return np.kron(
        as_complex_matrix(a, name="kron left factor"),
        as_complex_matrix(b, name="kron right factor"),
    )


def hermitian_eigen(
    m, hermiticity_tol: float = DEFAULT_HERMITICITY_TOL
) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Returns ``(w, v)`` with real eigenvalues ``w`` sorted ascending and
    orthonormal eigenvector columns ``v`` such that ``m = v @ diag(w) @ v†``.

    Raises
    ------
    NotHermitian
        if ``max|m - m†| > hermiticity_tol``.
    ConvergenceFailure
        if the sweep limit is exhausted (does not happen for finite input).
    """
    a = as_complex_matrix(m, square=True, name="matrix")
    herm_err = max_abs(a - dagger(a))
    if herm_err > hermiticity_tol:
        raise NotHermitian(
            f"matrix deviates from Hermitian by {herm_err:.3e} > {hermiticity_tol:.3e}"
        )
    n = a.shape[0]
    a = (a + dagger(a)) / 2.0
    v = np.eye(n, dtype=np.complex128)
    if n == 1:
        return np.array([a[0, 0].real]), v

    scale = max(max_abs(a), np.finfo(float).tiny)
    converged = False
    for _ in range(_MAX_JACOBI_SWEEPS):
        off = a - np.diag(np.diag(a))
        if max_abs(off) <= 1e-15 * scale:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                b = abs(apq)
                if b <= 1e-18 * scale:
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                e = apq / b
                alpha = a[p, p].real
                gamma = a[q, q].real
                tau = (alpha - gamma) / (2.0 * b)
                if tau == 0.0:
                    t = 1.0
                else:
                    t = -np.sign(tau) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                se = s * e
                sec = s * np.conj(e)
                # a <- J† a J with J acting on the (p, q) plane
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - sec * aq
                a[:, q] = se * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - se * rq
                a[q, :] = sec * rp + c * rq
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - sec * vq
                v[:, q] = se * vp + c * vq
    if not converged:
        off = a - np.diag(np.diag(a))
        if max_abs(off) > 1e-12 * scale:
            raise ConvergenceFailure("Jacobi sweeps exhausted without convergence")

    w = np.diag(a).real.copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def kernel_basis(m, tol: float = DEFAULT_KERNEL_TOL) -> np.ndarray:
    """Orthonormal columns spanning the (numerical) null space of ``m``.

    ``m`` may be rectangular.  The kernel is resolved through the Hermitian
    eigendecomposition of ``m† m`` (target threshold ``tol**2 ||m† m||``),
    and every candidate column ``v`` is then verified directly against
    ``||m v|| <= tol ||m||`` on the unsquared matrix: squaring costs half
    the digits, so tiny Gram eigenvalues sit in eigensolver noise while the
    direct residual stays accurate to machine precision.  Returns an
    ``(n, k)`` array; ``k`` may be zero.
    """
    if tol <= 0:
        raise ValueError("kernel tolerance must be positive")
    a = as_complex_matrix(m, name="matrix")
    g = dagger(a) @ a
    g = (g + dagger(g)) / 2.0
    w, v = hermitian_eigen(g, hermiticity_tol=1e-8 * max(1.0, max_abs(g)))
    lam_max = max(float(w[-1]), 0.0)
    if lam_max == 0.0:
        return v  # zero matrix: everything is kernel
    noise_floor = 16.0 * g.shape[0] * np.finfo(float).eps
    candidates = v[:, w <= max(tol * tol, noise_floor) * lam_max]
    if candidates.shape[1] == 0:
        return candidates
    residuals = np.linalg.norm(a @ candidates, axis=0)
    keep = residuals <= tol * np.sqrt(lam_max)
    return candidates[:, keep]


def partial_transpose(rho, layout: DimsLayout, subsystem_index: int) -> np.ndarray:
    """Transpose the bra/ket index pair of one subsystem, leaving the rest.

    An exact involution: applying it twice returns the input bit-for-bit.
    """
    rho = layout.check_matrix(rho)
    n = layout.n_subsystems
    if not 0 <= subsystem_index < n:
        raise DimensionMismatch(f"subsystem index {subsystem_index} out of range for {n} factors")
    dims = layout.subsystem_dims
    t = rho.reshape(dims + dims)
    t = np.swapaxes(t, subsystem_index, n + subsystem_index)
    return t.reshape(layout.total_dim, layout.total_dim).copy()


def partial_trace(rho, layout: DimsLayout, keep_indices: Iterable[int] | int) -> np.ndarray:
    """Trace out every subsystem not in ``keep_indices``.

    The result is ordered by ascending original subsystem index and has
    dimension equal to the product of the kept local dimensions.  The trace
    is preserved exactly up to roundoff.
    """
    rho = layout.check_matrix(rho)
    if isinstance(keep_indices, (int, np.integer)):
        keep = (int(keep_indices),)
    else:
        keep = tuple(sorted({int(i) for i in keep_indices}))
    n = layout.n_subsystems
    if not keep or any(i < 0 or i >= n for i in keep):
        raise DimensionMismatch(f"keep indices {keep} invalid for {n} subsystems")
    dims = layout.subsystem_dims
    t = rho.reshape(dims + dims)
    # einsum: traced subsystems share a bra/ket label, kept ones stay free.
    bra = list(range(n))
    ket = [i if i not in keep else n + i for i in range(n)]
    out = [i for i in keep] + [n + i for i in keep]
    result = np.einsum(t, bra + ket, out)
    d_keep = int(np.prod([dims[i] for i in keep]))
    return result.reshape(d_keep, d_keep)


def trace_norm_hermitian(m, hermiticity_tol: float = DEFAULT_HERMITICITY_TOL) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    w, _ = hermitian_eigen(m, hermiticity_tol=hermiticity_tol)
    return float(np.sum(np.abs(w)))


def reduced_layout(layout: DimsLayout, keep_indices: Sequence[int]) -> DimsLayout:
    """Layout of the state left over after `partial_trace` on the same keys."""
    keep = tuple(sorted({int(i) for i in keep_indices}))
    return DimsLayout(tuple(layout.subsystem_dims[i] for i in keep))
