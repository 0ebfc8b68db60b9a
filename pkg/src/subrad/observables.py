"""Readout quantities: energy, overlaps, entanglement, dark-space structure.

The quantity reported as "fidelity" throughout the package is the plain
overlap ``<target|rho|target>``; the square-root variant is available
separately as `dark_overlap_sqrt` / the ``fidelity_sqrt`` column.  Both are
emitted so either convention can be read off.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NonNormalizable
from .linalg import (
    DimsLayout,
    dagger,
    hermitian_eigen,
    kernel_basis,
    max_abs,
    partial_trace,
    partial_transpose,
    reduced_layout,
    trace_norm_hermitian,
)
from .model import ModelOperators, basis_excitations, sector_indices


@dataclass(frozen=True, eq=False)
class DarkSubspace:
    """Orthonormal basis of the collective-jump kernel within one sector.

    ``basis`` holds the vectors as columns of a ``(dim, dimension)`` array
    in full-space coordinates.
    """

    sector: int
    basis: np.ndarray
    dimension: int


@dataclass(frozen=True)
class NesReport:
    """Non-equilibrium diagnostic of a state.

    ``per_emitter_excitation[j]`` is the probability that emitter ``j`` is
    not in its ground level; ``dark_weight`` is the total population on the
    dark subspaces of all excited sectors (the vacuum is not counted).
    """

    per_emitter_excitation: tuple[float, ...]
    dark_weight: float
    is_nonequilibrium: bool


def energy(rho, model: ModelOperators) -> float:
    """Mean energy tr(rho H_free) against the lab-frame free Hamiltonian.

    Level populations are frame-invariant, so this is valid for states
    evolved in either frame.
    """
    rho = model.layout.check_matrix(rho)
    value = complex(np.trace(model.free_hamiltonian @ rho))
    return float(value.real)


def dark_overlap(rho, target: np.ndarray) -> float:
    """Population overlap <target|rho|target> of a normalized pure target."""
    target = np.asarray(target, dtype=np.complex128).reshape(-1)
    norm = float(np.linalg.norm(target))
    if abs(norm - 1.0) > 1e-9:
        raise NonNormalizable(f"target vector norm {norm} != 1")
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (target.size, target.size):
        raise DimensionMismatch(f"state dim {rho.shape} vs target dim {target.size}")
    return float(np.real(np.vdot(target, rho @ target)))


def dark_overlap_sqrt(rho, target: np.ndarray) -> float:
    """Square root of `dark_overlap` (the literal-formula fidelity variant)."""
    return float(np.sqrt(max(dark_overlap(rho, target), 0.0)))


def log_negativity(
    rho,
    layout: DimsLayout,
    bipartition: tuple[Sequence[int], Sequence[int]] = ((0,), (1,)),
) -> float:
    """log2 of the trace norm of the partial transpose across a bipartition.

    ``bipartition`` names two disjoint non-empty emitter groups.  If they do
    not cover all emitters, the remaining ones are traced out first, so for
    larger networks a named pair yields the pairwise entanglement of the
    reduced two-emitter state.
    """
    group_a = tuple(sorted({int(i) for i in bipartition[0]}))
    group_b = tuple(sorted({int(i) for i in bipartition[1]}))
    if not group_a or not group_b or set(group_a) & set(group_b):
        raise DimensionMismatch(f"bipartition {bipartition} must be two disjoint non-empty groups")
    n = layout.n_subsystems
    if any(i < 0 or i >= n for i in group_a + group_b):
        raise DimensionMismatch(f"bipartition {bipartition} out of range for {n} emitters")

    rho = layout.check_matrix(rho)
    kept = tuple(sorted(group_a + group_b))
    if len(kept) < n:
        rho = partial_trace(rho, layout, kept)
        layout = reduced_layout(layout, kept)
        group_b = tuple(kept.index(i) for i in group_b)

    pt = rho
    for idx in group_b:
        pt = partial_transpose(pt, layout, idx)
    return float(np.log2(trace_norm_hermitian(pt)))


def dark_subspace(model: ModelOperators, sector: int, tol: float = 1e-9) -> DarkSubspace:
    """Joint kernel of all collective jump operators within one sector."""
    exc = basis_excitations(model.layout)
    if sector < 0 or sector > int(exc.max()):
        return DarkSubspace(sector=sector, basis=np.zeros((model.dim, 0), np.complex128), dimension=0)
    idx = sector_indices(model.layout, sector)
    ops = model.collective_ops
    if not ops:
        restricted = np.zeros((1, idx.size), dtype=np.complex128)
    else:
        restricted = np.vstack([op[:, idx] for op in ops])
    local = kernel_basis(restricted, tol=tol)
    basis = np.zeros((model.dim, local.shape[1]), dtype=np.complex128)
    basis[idx, :] = local
    return DarkSubspace(sector=sector, basis=basis, dimension=local.shape[1])


def dark_projector(model: ModelOperators, sectors: Sequence[int] | None = None) -> np.ndarray:
    """Projector onto the dark subspaces of the given sectors (default: all k >= 1)."""
    if sectors is None:
        kmax = int(basis_excitations(model.layout).max())
        sectors = range(1, kmax + 1)
    proj = np.zeros((model.dim, model.dim), dtype=np.complex128)
    for k in sectors:
        basis = dark_subspace(model, k).basis
        if basis.shape[1]:
            proj += basis @ dagger(basis)
    return proj


def nes_report(rho, model: ModelOperators, equal_tol: float = 1e-9) -> NesReport:
    rho = model.layout.check_matrix(rho)
    excitations = []
    for j in range(model.layout.n_subsystems):
        reduced = partial_trace(rho, model.layout, (j,))
        excitations.append(float(1.0 - reduced[0, 0].real))
    kmax = int(basis_excitations(model.layout).max())
    weight = 0.0
    for k in range(1, kmax + 1):
        basis = dark_subspace(model, k).basis
        for col in range(basis.shape[1]):
            weight += dark_overlap(rho, basis[:, col])
    spread = max(excitations) - min(excitations)
    return NesReport(
        per_emitter_excitation=tuple(excitations),
        dark_weight=float(weight),
        is_nonequilibrium=bool(spread > equal_tol),
    )


def purity_and_checks(rho) -> dict[str, float]:
    """Per-state sanity record: purity, trace error, min eigenvalue, Hermiticity."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {rho.shape}")
    herm_err = max_abs(rho - dagger(rho))
    sym = (rho + dagger(rho)) / 2.0
    w, _ = hermitian_eigen(sym, hermiticity_tol=1.0)
    return {
        "purity": float(np.real(np.trace(rho @ rho))),
        "trace_error": float(abs(complex(np.trace(rho)) - 1.0)),
        "min_eigenvalue": float(w[0]),
        "hermiticity_error": float(herm_err),
    }


def trace_distance(a, b) -> float:
    """(1/2) trace norm of the difference of two Hermitian matrices."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shape mismatch {a.shape} vs {b.shape}")
    return 0.5 * trace_norm_hermitian(a - b)
