"""Time evolution under the Lindblad generator and its spectral views.

The integrator is an embedded Dormand-Prince 5(4) pair with PI step-size
control, stepping the density matrix directly as a complex array.  Between
requested grid points the step size adapts freely; every grid point is hit
exactly (steps are clipped, never interpolated).  A fixed-step mode exists
for byte-reproducible output.

The master equation convention is
``drho/dt = -i[H, rho] + sum_k rate_k (2 L_k rho L_k† - L_k†L_k rho - rho L_k†L_k)``.
Trace is preserved by the generator identically, so trace drift measures
pure roundoff; it is recorded, never silently corrected.  Hermiticity is
restored each accepted step (``rho <- (rho + rho†)/2``, on by default,
drift logged); positivity is checked at grid points and never enforced.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    ConvergenceFailure,
    DimensionCapExceeded,
    DimensionMismatch,
    InvariantViolation,
    NonIdealModel,
    NonNormalizable,
    StepSizeUnderflow,
    UnsupportedSector,
)
from .linalg import dagger, hermitian_eigen, kernel_basis, max_abs
from .model import ModelOperators, basis_excitations, basis_vector

Observer = Callable[[float, np.ndarray], Mapping[str, float]]

_RESERVED_RECORDS = ("trace_error", "herm_error", "min_eigenvalue")


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and switches for `evolve`.

    ``fixed_step`` replaces adaptive control with a constant step (clipped
    at grid points) for deterministic output.  ``min_eigenvalue_floor`` is
    the positivity threshold below which `evolve` raises.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    initial_step: float | None = None
    max_step: float | None = None
    hermitize_each_step: bool = True
    fixed_step: float | None = None
    check_positivity: bool = True
    min_eigenvalue_floor: float = -1e-6

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.initial_step is not None and self.initial_step <= 0:
            raise ValueError("initial_step must be positive")
        if self.max_step is not None and self.max_step <= 0:
            raise ValueError("max_step must be positive")
        if self.fixed_step is not None and self.fixed_step <= 0:
            raise ValueError("fixed_step must be positive")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time grid, per-time observable records and the final density matrix.

    ``records`` maps column name to an array aligned with ``times``; the
    built-in columns ``trace_error``, ``herm_error`` and ``min_eigenvalue``
    are always present (the latter is NaN when positivity checking is off).
    """

    times: np.ndarray
    records: dict[str, np.ndarray]
    final_state: np.ndarray
    meta: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    """Non-Hermitian generator H - i sum_k rate_k L_k†L_k and its spectrum."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    right_eigenvectors: np.ndarray


@dataclass(frozen=True, eq=False)
class SteadyStateResult:
    state: np.ndarray
    time: float
    converged: bool
    rhs_norm: float
    tracker_value: float | None


def lindblad_rhs(model: ModelOperators, rho) -> np.ndarray:
    """Right-hand side of the master equation at ``rho``."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (model.dim, model.dim):
        raise DimensionMismatch(f"state shape {rho.shape} vs model dim {model.dim}")
    h = model.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for rate, op in model.jumps:
        if rate == 0.0:
            continue
        op_dag = dagger(op)
        anticomm_half = op_dag @ op
        out += rate * (
            2.0 * (op @ rho @ op_dag) - anticomm_half @ rho - rho @ anticomm_half
        )
    return out


def _compiled_rhs(model: ModelOperators) -> Callable[[np.ndarray], np.ndarray]:
    """Algebraically identical to `lindblad_rhs` with operators prefolded.

    Uses H_nh = H - i K with K = sum rate L†L:
    rhs = -i (H_nh rho - rho H_nh†) + sum 2 rate L rho L†.
    """
    dim = model.dim
    k_op = np.zeros((dim, dim), dtype=np.complex128)
    jump_pairs: list[tuple[np.ndarray, np.ndarray]] = []
    for rate, op in model.jumps:
        if rate == 0.0:
            continue
        op_dag = dagger(op)
        k_op += rate * (op_dag @ op)
        jump_pairs.append((np.sqrt(2.0 * rate) * op, np.sqrt(2.0 * rate) * op_dag))
    h_nh = model.hamiltonian - 1j * k_op
    h_nh_dag = dagger(h_nh)

    def rhs(rho: np.ndarray) -> np.ndarray:
        out = -1j * (h_nh @ rho - rho @ h_nh_dag)
        for l_scaled, l_dag_scaled in jump_pairs:
            out += l_scaled @ rho @ l_dag_scaled
        return out

    return rhs


# Dormand-Prince 5(4) tableau.
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_ERR = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


def _dp_step(rhs, y, h):
    """One Dormand-Prince step: returns (y5, error_estimate)."""
    k = [rhs(y)]
    for stage in range(1, 7):
        acc = np.zeros_like(y)
        for coeff, ki in zip(_DP_A[stage], k):
            if coeff != 0.0:
                acc += coeff * ki
        k.append(rhs(y + h * acc))
    y5 = y.copy()
    for coeff, ki in zip(_DP_B5, k):
        if coeff != 0.0:
            y5 += (h * coeff) * ki
    err = np.zeros_like(y)
    for coeff, ki in zip(_DP_ERR, k):
        if coeff != 0.0:
            err += (h * coeff) * ki
    return y5, err


def _check_density(rho: np.ndarray, dim: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (dim, dim):
        raise DimensionMismatch(f"state shape {rho.shape} vs model dim {dim}")
    trace_err = abs(complex(np.trace(rho)) - 1.0)
    if trace_err > 1e-9:
        raise InvariantViolation(f"initial state trace error {trace_err:.2e}")
    herm_err = max_abs(rho - dagger(rho))
    if herm_err > 1e-9:
        raise InvariantViolation(f"initial state Hermiticity error {herm_err:.2e}")
    w, _ = hermitian_eigen((rho + dagger(rho)) / 2.0, hermiticity_tol=1.0)
    if w[0] < -1e-8:
        raise InvariantViolation(f"initial state min eigenvalue {w[0]:.2e}")
    return rho.copy()


def evolve(
    model: ModelOperators,
    rho0,
    time_grid,
    config: IntegratorConfig | None = None,
    observer: Observer | None = None,
) -> Trajectory:
    """Integrate the master equation, recording observables on a grid.

    ``time_grid`` must be strictly increasing; ``rho0`` is the state at
    ``time_grid[0]``.  The observer (if given) is called at every grid
    point and its returned mapping merged into the records; the keys
    ``trace_error``, ``herm_error`` and ``min_eigenvalue`` are reserved.
    """
    cfg = config or IntegratorConfig()
    times = np.asarray(time_grid, dtype=float)
    if times.ndim != 1 or times.size < 1:
        raise DimensionMismatch("time grid must be a 1-D array with >= 1 points")
    if np.any(np.diff(times) <= 0):
        raise DimensionMismatch("time grid must be strictly increasing")

    rho = _check_density(rho0, model.dim)
    rhs = _compiled_rhs(model)

    records: list[dict[str, float]] = []
    meta = {"steps": 0.0, "rejected": 0.0, "max_herm_drift": 0.0}

    def record_point(t: float, state: np.ndarray) -> None:
        rec: dict[str, float] = {
            "trace_error": float(abs(complex(np.trace(state)) - 1.0)),
            "herm_error": float(max_abs(state - dagger(state))),
        }
        if cfg.check_positivity:
            sym = (state + dagger(state)) / 2.0
            w, _ = hermitian_eigen(sym, hermiticity_tol=1.0)
            rec["min_eigenvalue"] = float(w[0])
            if w[0] < cfg.min_eigenvalue_floor:
                raise InvariantViolation(
                    f"state min eigenvalue {w[0]:.3e} below floor "
                    f"{cfg.min_eigenvalue_floor:.3e} at t={t:g}"
                )
        else:
            rec["min_eigenvalue"] = float("nan")
        if observer is not None:
            extra = observer(t, state)
            for key in extra:
                if key in _RESERVED_RECORDS:
                    raise ValueError(f"observer key {key!r} is reserved")
            rec.update({str(k): float(v) for k, v in extra.items()})
        records.append(rec)

    record_point(float(times[0]), rho)

    span = float(times[-1] - times[0]) if times.size > 1 else 0.0
    max_step = cfg.max_step if cfg.max_step is not None else np.inf

    if cfg.initial_step is not None:
        h = float(cfg.initial_step)
    elif cfg.fixed_step is not None:
        h = float(cfg.fixed_step)
    elif span > 0:
        f0 = rhs(rho)
        h = 0.01 * (max_abs(rho) + cfg.abs_tol) / (max_abs(f0) + 1e-30)
        h = float(np.clip(h, 1e-8 * span, span / 10.0 + 1e-30))
    else:
        h = 1.0
    h = min(h, max_step)

    safety = 0.9
    err_prev = 1e-2
    t = float(times[0])

    for target in times[1:]:
        target = float(target)
        while t < target * (1.0 - 1e-15) or target - t > 1e-14 * max(1.0, abs(target)):
            h_try = min(h, target - t, max_step)
            if cfg.fixed_step is not None:
                h_try = min(cfg.fixed_step, target - t)
            if h_try < 1e-14 * max(1.0, abs(t)):
                raise StepSizeUnderflow(f"step size underflow at t={t:g}")
            y_new, err = _dp_step(rhs, rho, h_try)

            if cfg.fixed_step is None:
                finite = bool(np.all(np.isfinite(y_new.real)) and np.all(np.isfinite(y_new.imag)))
                if finite:
                    scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(rho), np.abs(y_new))
                    err_norm = float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))
                else:
                    err_norm = np.inf
                if err_norm > 1.0:
                    meta["rejected"] += 1
                    shrink = safety * err_norm ** (-0.2) if np.isfinite(err_norm) else 0.5
                    h = h_try * float(np.clip(shrink, 0.1, 1.0))
                    continue
                err_clipped = max(err_norm, 1e-10)
                grow = safety * err_clipped ** (-0.14) * err_prev ** 0.08
                h = h_try * float(np.clip(grow, 0.2, 10.0))
                err_prev = err_clipped

            t += h_try
            rho = y_new
            if cfg.hermitize_each_step:
                drift = max_abs(rho - dagger(rho))
                if drift > meta["max_herm_drift"]:
                    meta["max_herm_drift"] = drift
                rho = (rho + dagger(rho)) / 2.0
            meta["steps"] += 1
        t = target
        record_point(target, rho)

    columns = {key: np.array([r[key] for r in records]) for key in records[0]}
    return Trajectory(times=times.copy(), records=columns, final_state=rho.copy(), meta=meta)


def effective_hamiltonian(model: ModelOperators) -> EffectiveHamiltonian:
    """Non-Hermitian effective generator and its complex spectrum.

    Eigenvalues are sorted by (real, imag); the imaginary parts are decay
    rates of the no-jump amplitudes and can never be positive.
    """
    dim = model.dim
    k_op = np.zeros((dim, dim), dtype=np.complex128)
    for rate, op in model.jumps:
        if rate:
            k_op += rate * (dagger(op) @ op)
    matrix = model.hamiltonian - 1j * k_op
    vals, vecs = np.linalg.eig(matrix)
    order = np.lexsort((vals.imag, vals.real))
    vals = vals[order]
    vecs = vecs[:, order]
    if np.any(vals.imag > 1e-10):
        raise ConvergenceFailure(
            f"effective Hamiltonian produced a growing mode: max imag {vals.imag.max():.2e}"
        )
    return EffectiveHamiltonian(matrix=matrix, eigenvalues=vals, right_eigenvectors=vecs)


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization (Fortran order)."""
    return np.asarray(rho, dtype=np.complex128).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of `vec`."""
    return np.asarray(v, dtype=np.complex128).reshape((dim, dim), order="F")


def liouvillian_matrix(model: ModelOperators) -> np.ndarray:
    """Dense superoperator L with L @ vec(rho) = vec(lindblad_rhs(rho)).

    Column-stacking convention: vec(A rho B) = (B^T kron A) vec(rho).
    """
    dim = model.dim
    if dim * dim > model.system.dimension_cap:
        raise DimensionCapExceeded(
            f"superoperator dim {dim * dim} exceeds cap {model.system.dimension_cap}"
        )
    eye = np.eye(dim, dtype=np.complex128)
    h = model.hamiltonian
    liou = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for rate, op in model.jumps:
        if rate == 0.0:
            continue
        op_dag = dagger(op)
        anticomm_half = op_dag @ op
        liou += rate * (
            2.0 * np.kron(op.conj(), op)
            - np.kron(eye, anticomm_half)
            - np.kron(anticomm_half.T, eye)
        )
    return liou


def predict_final_state(model: ModelOperators, pure_initial) -> np.ndarray:
    """Closed-form asymptotic state for ideal collective-only decay.

    Valid only when the frame Hamiltonian vanishes (all emitters resonant
    with the rotating frame), there are no local channels or drives, and
    the initial vector lives entirely in the single-excitation sector.
    The surviving part is the dark projection of the initial vector; all
    removed weight lands on the vacuum.
    """
    psi = np.asarray(pure_initial, dtype=np.complex128).reshape(-1)
    if psi.size != model.dim:
        raise DimensionMismatch(f"state dim {psi.size} vs model dim {model.dim}")
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1.0) > 1e-9:
        raise NonNormalizable(f"initial vector norm {norm} != 1")

    if model.system.local_channels and any(ch.rate > 0 for ch in model.system.local_channels):
        raise NonIdealModel("local channels present; no closed-form final state")
    if model.system.drives:
        raise NonIdealModel("drives present; no closed-form final state")
    if not model.collective_ops:
        raise NonIdealModel("no active collective channel")
    if max_abs(model.hamiltonian) > 1e-12:
        raise NonIdealModel("emitters are not resonant with the frame (H != 0)")

    exc = basis_excitations(model.layout)
    outside = np.abs(psi[exc != 1])
    if outside.size and float(outside.max()) > 1e-12:
        raise UnsupportedSector(
            "initial state has support outside the single-excitation sector"
        )

    idx = np.nonzero(exc == 1)[0]
    restricted = np.vstack([op[:, idx] for op in model.collective_ops])
    local_basis = kernel_basis(restricted, tol=1e-9)
    dark = np.zeros((model.dim, local_basis.shape[1]), dtype=np.complex128)
    dark[idx, :] = local_basis

    projected = dark @ (dagger(dark) @ psi)
    dark_weight = float(np.real(np.vdot(projected, projected)))
    vac = basis_vector(model.layout, (0,) * model.layout.n_subsystems)
    rho = np.outer(projected, projected.conj())
    rho += (1.0 - dark_weight) * np.outer(vac, vac.conj())
    return rho


def find_steady_state(
    model: ModelOperators,
    rho0,
    config: IntegratorConfig | None = None,
    *,
    interval: float,
    max_time: float,
    rhs_tol: float = 1e-9,
    tracker: Callable[[np.ndarray], float] | None = None,
    tracker_tol: float = 1e-6,
) -> SteadyStateResult:
    """Evolve in ``interval`` chunks until a steady-state stopping rule fires.

    Steady is declared when ``max|rhs(rho)| < rhs_tol`` or, if a tracker is
    given, when the tracked scalar changes by less than ``tracker_tol``
    over one interval - whichever happens first.
    """
    if interval <= 0 or max_time <= 0:
        raise ValueError("interval and max_time must be positive")
    rho = _check_density(rho0, model.dim)
    t = 0.0
    tracked = tracker(rho) if tracker is not None else None
    rhs_norm = max_abs(lindblad_rhs(model, rho))
    while t < max_time:
        traj = evolve(model, rho, np.array([t, t + interval]), config)
        rho = traj.final_state
        t += interval
        rhs_norm = max_abs(lindblad_rhs(model, rho))
        if rhs_norm < rhs_tol:
            return SteadyStateResult(rho, t, True, rhs_norm, tracked)
        if tracker is not None:
            new_tracked = tracker(rho)
            drift = abs(new_tracked - tracked) if tracked is not None else np.inf
            tracked = new_tracked
            if drift < tracker_tol:
                return SteadyStateResult(rho, t, True, rhs_norm, tracked)
    return SteadyStateResult(rho, t, False, rhs_norm, tracked)
