"""Declarative emitter-network descriptions compiled to concrete operators.

Conventions (fixed once, used by the whole package):

* Units: hbar = 1 and the reference excitation frequency is 1, so every
  rate, detuning and amplitude is dimensionless and times are in units of
  the inverse reference frequency (scenario files may relabel the time
  axis in units of a collective rate instead).
* Emitter 0 is the leftmost tensor factor and the leftmost character of a
  basis-string label ("10" means emitter 0 in level 1, emitter 1 in level
  0).  All indices in the API are 0-based.
* Dissipator convention: each jump channel contributes
  ``rate * (2 L rho L† - L†L rho - rho L†L)`` to the master equation.
  Consequently a single driven-free qubit with a local channel of rate
  ``a`` loses excited population at ``2a``, and the symmetric two-qubit
  superposition under a collective channel of rate ``k`` decays at ``4k``.
* Rotating frame: level energies are replaced by their detuning from
  ``level_index * frame_frequency``; drives are only representable in the
  rotating frame, where they are time-independent by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DimensionCapExceeded,
    DimensionMismatch,
    InvalidTransition,
    NonNormalizable,
    UnknownLabel,
    ValidationError,
)
from .linalg import DimsLayout, as_complex_matrix, dagger, kron, max_abs

DEFAULT_DIMENSION_CAP = 256


# ---------------------------------------------------------------------------
# System description
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmitterSpec:
    """One emitter: a ladder of ``levels`` states with fixed lab frequencies.

    ``level_frequencies[0]`` must be 0 and the list strictly increasing.
    The level index doubles as the excitation count of that level.
    """

    levels: int
    level_frequencies: tuple[float, ...]

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.level_frequencies)
        object.__setattr__(self, "level_frequencies", freqs)
        object.__setattr__(self, "levels", int(self.levels))
        if self.levels < 2:
            raise ValidationError(f"emitter needs >= 2 levels, got {self.levels}")
        if len(freqs) != self.levels:
            raise ValidationError(
                f"expected {self.levels} level frequencies, got {len(freqs)}"
            )
        if freqs[0] != 0.0:
            raise ValidationError("level 0 frequency must be 0")
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValidationError(f"level frequencies must be strictly increasing: {freqs}")

    @staticmethod
    def qubit(frequency: float = 1.0) -> "EmitterSpec":
        return EmitterSpec(2, (0.0, float(frequency)))


def _as_transition(value) -> tuple[int, int]:
    u, l = int(value[0]), int(value[1])
    return (u, l)


@dataclass(frozen=True)
class CollectiveChannelSpec:
    """A shared decay channel: one jump operator summing weighted lowerings.

    ``weights[j]`` multiplies the lowering operator of emitter ``j`` on
    ``transitions[j]``; complex weights carry the relative dissipation
    phases.  Emitters with weight 0 do not participate.
    """

    rate: float
    weights: tuple[complex, ...]
    transitions: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "weights", tuple(complex(w) for w in self.weights))
        object.__setattr__(
            self, "transitions", tuple(_as_transition(t) for t in self.transitions)
        )
        if self.rate < 0:
            raise ValidationError(f"collective rate must be >= 0, got {self.rate}")
        if len(self.weights) != len(self.transitions):
            raise ValidationError("weights and transitions must have equal length")


@dataclass(frozen=True)
class LocalChannelSpec:
    """An independent decay channel on a single emitter transition."""

    rate: float
    emitter_index: int
    transition: tuple[int, int] = (1, 0)

    def __post_init__(self):
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "emitter_index", int(self.emitter_index))
        object.__setattr__(self, "transition", _as_transition(self.transition))
        if self.rate < 0:
            raise ValidationError(f"local rate must be >= 0, got {self.rate}")


@dataclass(frozen=True)
class DriveSpec:
    """A coherent pump on one transition, static in the rotating frame.

    Enters the Hamiltonian as ``amplitude * (|u><l| + |l><u|)`` plus
    ``drive_detuning * |u><u|`` (a positive detuning shifts the upper
    level up relative to exact resonance with the pump).
    """

    amplitude: float
    emitter_index: int
    transition: tuple[int, int]
    drive_detuning: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "emitter_index", int(self.emitter_index))
        object.__setattr__(self, "transition", _as_transition(self.transition))
        object.__setattr__(self, "drive_detuning", float(self.drive_detuning))


@dataclass(frozen=True)
class SystemSpec:
    """Complete declarative description of an emitter network."""

    emitters: tuple[EmitterSpec, ...]
    collective_channels: tuple[CollectiveChannelSpec, ...] = ()
    local_channels: tuple[LocalChannelSpec, ...] = ()
    drives: tuple[DriveSpec, ...] = ()
    frame: str = "rotating"
    frame_frequency: float = 1.0
    dimension_cap: int = DEFAULT_DIMENSION_CAP

    def __post_init__(self):
        object.__setattr__(self, "emitters", tuple(self.emitters))
        object.__setattr__(self, "collective_channels", tuple(self.collective_channels))
        object.__setattr__(self, "local_channels", tuple(self.local_channels))
        object.__setattr__(self, "drives", tuple(self.drives))
        object.__setattr__(self, "frame_frequency", float(self.frame_frequency))
        object.__setattr__(self, "dimension_cap", int(self.dimension_cap))

    def layout(self) -> DimsLayout:
        return DimsLayout(tuple(e.levels for e in self.emitters))

    def validate(self) -> None:
        if not self.emitters:
            raise ValidationError("at least one emitter is required")
        if self.frame not in ("lab", "rotating"):
            raise ValidationError(f"frame must be 'lab' or 'rotating', got {self.frame!r}")
        dim = 1
        for e in self.emitters:
            dim *= e.levels
        if dim > self.dimension_cap:
            raise DimensionCapExceeded(
                f"Hilbert dimension {dim} exceeds cap {self.dimension_cap}"
            )
        for ch in self.collective_channels:
            if len(ch.weights) != len(self.emitters):
                raise ValidationError(
                    "collective channel needs one weight per emitter "
                    f"({len(self.emitters)}), got {len(ch.weights)}"
                )
            active = 0
            for j, (w, (u, l)) in enumerate(zip(ch.weights, ch.transitions)):
                if w == 0:
                    continue
                active += 1
                self._check_transition(j, (u, l))
            if active < 2:
                raise ValidationError(
                    "collective channel needs >= 2 emitters with nonzero weight "
                    "(use a local channel for a single emitter)"
                )
        for ch in self.local_channels:
            self._check_emitter(ch.emitter_index)
            self._check_transition(ch.emitter_index, ch.transition)
        for dr in self.drives:
            self._check_emitter(dr.emitter_index)
            self._check_transition(dr.emitter_index, dr.transition)
        if self.drives and self.frame != "rotating":
            raise ValidationError("drives are only representable in the rotating frame")

    def _check_emitter(self, j: int) -> None:
        if not 0 <= j < len(self.emitters):
            raise ValidationError(f"emitter index {j} out of range")

    def _check_transition(self, j: int, transition: tuple[int, int]) -> None:
        self._check_emitter(j)
        u, l = transition
        levels = self.emitters[j].levels
        if not (0 <= l < u < levels):
            raise InvalidTransition(
                f"transition {u}->{l} invalid for emitter {j} with {levels} levels"
            )


@dataclass(frozen=True, eq=False)
class ModelOperators:
    """Compiled operators on the full tensor-product space.

    ``jumps`` lists ``(rate, operator)`` pairs, collective channels first
    (the first ``n_collective`` entries), then local channels.
    ``hamiltonian`` is the evolution generator in the chosen frame;
    ``free_hamiltonian`` is always the drive-free lab-frame energy operator
    used for energy readout.
    """

    dim: int
    hamiltonian: np.ndarray
    free_hamiltonian: np.ndarray
    jumps: tuple[tuple[float, np.ndarray], ...]
    n_collective: int
    layout: DimsLayout
    system: SystemSpec

    @property
    def collective_ops(self) -> tuple[np.ndarray, ...]:
        """Jump operators of the collective channels with nonzero rate."""
        return tuple(op for rate, op in self.jumps[: self.n_collective] if rate > 0)


# ---------------------------------------------------------------------------
# Basis bookkeeping
# ---------------------------------------------------------------------------


def basis_excitations(layout: DimsLayout) -> np.ndarray:
    """Total excitation (sum of level indices) of each flat basis index."""
    total = layout.total_dim
    exc = np.zeros(total, dtype=int)
    stride = total
    for d in layout.subsystem_dims:
        stride //= d
        exc += (np.arange(total) // stride) % d
    return exc


def sector_indices(layout: DimsLayout, sector: int) -> np.ndarray:
    """Flat indices of the basis states with total excitation ``sector``."""
    return np.nonzero(basis_excitations(layout) == sector)[0]


def basis_index(layout: DimsLayout, levels: Sequence[int]) -> int:
    if len(levels) != layout.n_subsystems:
        raise DimensionMismatch(
            f"expected {layout.n_subsystems} levels, got {len(levels)}"
        )
    idx = 0
    for level, d in zip(levels, layout.subsystem_dims):
        level = int(level)
        if not 0 <= level < d:
            raise DimensionMismatch(f"level {level} out of range for local dim {d}")
        idx = idx * d + level
    return idx


def basis_vector(layout: DimsLayout, levels: Sequence[int]) -> np.ndarray:
    vec = np.zeros(layout.total_dim, dtype=np.complex128)
    vec[basis_index(layout, levels)] = 1.0
    return vec


# ---------------------------------------------------------------------------
# Operator assembly
# ---------------------------------------------------------------------------


def lowering_op(levels: int, transition: tuple[int, int]) -> np.ndarray:
    """Local lowering operator |l><u| on a ``levels``-dimensional ladder."""
    u, l = _as_transition(transition)
    if not (0 <= l < u < levels):
        raise InvalidTransition(f"transition {u}->{l} invalid for {levels} levels")
    op = np.zeros((levels, levels), dtype=np.complex128)
    op[l, u] = 1.0
    return op


def level_projector(levels: int, level: int) -> np.ndarray:
    op = np.zeros((levels, levels), dtype=np.complex128)
    op[level, level] = 1.0
    return op


def lift_site_operator(local_op, site_index: int, layout: DimsLayout) -> np.ndarray:
    """Embed a local operator at ``site_index``: I ⊗ ... ⊗ op ⊗ ... ⊗ I."""
    op = as_complex_matrix(local_op, square=True, name="local operator")
    n = layout.n_subsystems
    if not 0 <= site_index < n:
        raise DimensionMismatch(f"site index {site_index} out of range for {n} sites")
    if op.shape[0] != layout.subsystem_dims[site_index]:
        raise DimensionMismatch(
            f"local operator dim {op.shape[0]} != subsystem dim "
            f"{layout.subsystem_dims[site_index]}"
        )
    d_left = int(np.prod(layout.subsystem_dims[:site_index], initial=1))
    d_right = int(np.prod(layout.subsystem_dims[site_index + 1 :], initial=1))
    full = op
    if d_left > 1:
        full = kron(np.eye(d_left), full)
    if d_right > 1:
        full = kron(full, np.eye(d_right))
    return full


def collective_lowering(spec: CollectiveChannelSpec, layout: DimsLayout) -> np.ndarray:
    """Weighted sum of lifted lowering operators, one per nonzero weight.

    Degenerate single-weight input is accepted here (it reduces to a plain
    local lowering); `SystemSpec.validate` is where the >= 2 participant
    rule for declared collective channels lives.
    """
    if len(spec.weights) != layout.n_subsystems:
        raise DimensionMismatch(
            f"channel has {len(spec.weights)} weights, layout has "
            f"{layout.n_subsystems} subsystems"
        )
    op = np.zeros((layout.total_dim, layout.total_dim), dtype=np.complex128)
    for j, (w, transition) in enumerate(zip(spec.weights, spec.transitions)):
        if w == 0:
            continue
        local = lowering_op(layout.subsystem_dims[j], transition)
        op += w * lift_site_operator(local, j, layout)
    return op


def build_model(spec: SystemSpec) -> ModelOperators:
    """Compile a `SystemSpec` into Hamiltonian and jump operators."""
    spec.validate()
    layout = spec.layout()
    dim = layout.total_dim

    free_h = np.zeros((dim, dim), dtype=np.complex128)
    frame_h = np.zeros((dim, dim), dtype=np.complex128)
    for j, emitter in enumerate(spec.emitters):
        for level in range(1, emitter.levels):
            proj = lift_site_operator(level_projector(emitter.levels, level), j, layout)
            freq = emitter.level_frequencies[level]
            free_h += freq * proj
            if spec.frame == "rotating":
                frame_h += (freq - level * spec.frame_frequency) * proj
            else:
                frame_h += freq * proj

    for dr in spec.drives:
        levels = spec.emitters[dr.emitter_index].levels
        low = lift_site_operator(lowering_op(levels, dr.transition), dr.emitter_index, layout)
        frame_h += dr.amplitude * (low + dagger(low))
        if dr.drive_detuning != 0.0:
            proj = lift_site_operator(
                level_projector(levels, dr.transition[0]), dr.emitter_index, layout
            )
            frame_h += dr.drive_detuning * proj

    herm_err = max_abs(frame_h - dagger(frame_h))
    if herm_err > 1e-12:
        raise ValidationError(f"built Hamiltonian deviates from Hermitian by {herm_err:.2e}")

    jumps: list[tuple[float, np.ndarray]] = []
    for ch in spec.collective_channels:
        jumps.append((ch.rate, collective_lowering(ch, layout)))
    n_collective = len(jumps)
    for ch in spec.local_channels:
        levels = spec.emitters[ch.emitter_index].levels
        op = lift_site_operator(lowering_op(levels, ch.transition), ch.emitter_index, layout)
        jumps.append((ch.rate, op))

    return ModelOperators(
        dim=dim,
        hamiltonian=frame_h,
        free_hamiltonian=free_h,
        jumps=tuple(jumps),
        n_collective=n_collective,
        layout=layout,
        system=spec,
    )


# ---------------------------------------------------------------------------
# Initial states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StateSpec:
    """A named state, an amplitude table, or a convex mixture of states.

    Exactly one of ``label``, ``amplitudes``, ``mixture`` is set.
    """

    label: str | None = None
    amplitudes: tuple[tuple[str, complex], ...] | None = None
    mixture: tuple[tuple[float, "StateSpec"], ...] | None = None

    def __post_init__(self):
        set_fields = sum(x is not None for x in (self.label, self.amplitudes, self.mixture))
        if set_fields != 1:
            raise ValidationError("StateSpec needs exactly one of label/amplitudes/mixture")

    @staticmethod
    def named(label: str) -> "StateSpec":
        return StateSpec(label=str(label))

    @staticmethod
    def from_amplitudes(amps: Mapping[str, complex]) -> "StateSpec":
        items = tuple((str(k), complex(v)) for k, v in amps.items())
        if not items:
            raise NonNormalizable("empty amplitude table")
        return StateSpec(amplitudes=items)

    @staticmethod
    def mix(parts: Sequence[tuple[float, "StateSpec"]]) -> "StateSpec":
        items = tuple((float(w), s) for w, s in parts)
        if not items:
            raise NonNormalizable("empty mixture")
        return StateSpec(mixture=items)


def parse_basis_label(label: str, layout: DimsLayout) -> tuple[int, ...]:
    """Digit-string label -> per-site levels, leftmost digit = emitter 0."""
    if len(label) != layout.n_subsystems or not label.isdigit():
        raise UnknownLabel(
            f"label {label!r} is not a {layout.n_subsystems}-digit basis string"
        )
    levels = tuple(int(ch) for ch in label)
    for level, d in zip(levels, layout.subsystem_dims):
        if level >= d:
            raise UnknownLabel(f"label {label!r}: level {level} out of range (dim {d})")
    return levels


_SQRT2 = np.sqrt(2.0)
_SQRT3 = np.sqrt(3.0)
_SQRT6 = np.sqrt(6.0)


def named_state_vector(label: str, layout: DimsLayout) -> np.ndarray:
    """Resolve a named pure state to a normalized vector.

    Supported: digit basis strings, "vacuum", the two-emitter
    superpositions "psi_plus"/"psi_minus", and the three-emitter
    single-excitation family "W" (= "psi1"), "psi2", "psi3".
    """
    n = layout.n_subsystems

    def basis(s: str) -> np.ndarray:
        return basis_vector(layout, parse_basis_label(s, layout))

    if label == "vacuum":
        return basis_vector(layout, (0,) * n)
    if label in ("psi_plus", "psi_minus"):
        if n != 2:
            raise UnknownLabel(f"{label!r} requires exactly 2 emitters, layout has {n}")
        sign = 1.0 if label == "psi_plus" else -1.0
        return (basis("10") + sign * basis("01")) / _SQRT2
    if label in ("W", "psi1", "psi2", "psi3"):
        if n != 3:
            raise UnknownLabel(f"{label!r} requires exactly 3 emitters, layout has {n}")
        if label in ("W", "psi1"):
            return (basis("100") + basis("010") + basis("001")) / _SQRT3
        if label == "psi2":
            return (2.0 * basis("100") - basis("010") - basis("001")) / _SQRT6
        return (basis("010") - basis("001")) / _SQRT2
    if label.isdigit():
        return basis(label)
    raise UnknownLabel(f"unknown state label {label!r}")


def state_vector(spec: StateSpec, layout: DimsLayout) -> np.ndarray:
    """Resolve a pure `StateSpec` (label or amplitudes) to a unit vector."""
    if spec.label is not None:
        return named_state_vector(spec.label, layout)
    if spec.amplitudes is not None:
        vec = np.zeros(layout.total_dim, dtype=np.complex128)
        for label, amp in spec.amplitudes:
            vec[basis_index(layout, parse_basis_label(label, layout))] += amp
        norm = float(np.linalg.norm(vec))
        if norm < 1e-12:
            raise NonNormalizable("amplitude table sums to the zero vector")
        return vec / norm
    raise NonNormalizable("a mixture has no single state vector")


def build_initial_state(spec: StateSpec, layout: DimsLayout) -> np.ndarray:
    """Resolve a `StateSpec` to a density matrix (pure states as rank-1)."""
    if spec.mixture is not None:
        weights = np.array([w for w, _ in spec.mixture], dtype=float)
        if np.any(weights < 0) or weights.sum() <= 0:
            raise NonNormalizable("mixture weights must be >= 0 with positive sum")
        weights = weights / weights.sum()
        rho = np.zeros((layout.total_dim, layout.total_dim), dtype=np.complex128)
        for w, part in zip(weights, (s for _, s in spec.mixture)):
            rho += w * build_initial_state(part, layout)
        return rho
    vec = state_vector(spec, layout)
    return np.outer(vec, vec.conj())
