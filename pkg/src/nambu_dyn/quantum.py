"""Grid-based quantum reference: Gaussian packets, split-operator
propagation, and expectation values.

Propagation uses symmetric Strang splitting,
``exp(-iV dt/2h) exp(-iT dt/h) exp(-iV dt/2h)`` per step, with the kinetic
factor applied in momentum space through the FFT.  An optional absorbing
mask damps amplitude near the grid edges for open (tunneling) problems.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .closure import PotentialSpec
from .poly import Poly, q

__all__ = [
    "Grid",
    "WaveFunction",
    "NonFiniteAmplitudeError",
    "BoundarySupportWarning",
    "init_gaussian",
    "SplitOperatorPropagator",
    "propagate_split_operator",
    "absorbing_mask",
    "potential_mesh",
    "expect",
    "position_moment",
    "mode_energies",
    "save_wavefunction",
    "load_wavefunction",
]

BOUNDARY_AMPLITUDE_TOL = 1e-8


class NonFiniteAmplitudeError(RuntimeError):
    """Propagation produced NaN/Inf amplitudes."""


class BoundarySupportWarning(UserWarning):
    """The packet has non-negligible amplitude at the grid boundary."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid; each axis is (min, max, n_points)."""

    axes: tuple[tuple[float, float, int], ...]

    def __post_init__(self) -> None:
        for lo, hi, n in self.axes:
            if hi <= lo:
                raise ValueError(f"axis needs max > min, got [{lo}, {hi}]")
            if n < 64 or n & (n - 1):
                raise ValueError(f"n_points must be a power of two >= 64, got {n}")

    @classmethod
    def make_1d(cls, lo: float, hi: float, n: int) -> "Grid":
        return cls(((float(lo), float(hi), int(n)),))

    @classmethod
    def make_2d(cls, axis0, axis1) -> "Grid":
        return cls((tuple(axis0), tuple(axis1)))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(n for _, _, n in self.axes)

    def dx(self, axis: int = 0) -> float:
        lo, hi, n = self.axes[axis]
        return (hi - lo) / n

    @property
    def dvol(self) -> float:
        out = 1.0
        for axis in range(self.ndim):
            out *= self.dx(axis)
        return out

    def coords(self, axis: int = 0) -> np.ndarray:
        lo, _, n = self.axes[axis]
        return lo + self.dx(axis) * np.arange(n)

    def wavenumbers(self, axis: int = 0) -> np.ndarray:
        _, _, n = self.axes[axis]
        return 2.0 * np.pi * np.fft.fftfreq(n, d=self.dx(axis))

    def mesh(self, axis: int) -> np.ndarray:
        """Coordinate of one axis broadcast over the full grid."""
        x = self.coords(axis)
        shape = [1] * self.ndim
        shape[axis] = len(x)
        return x.reshape(shape) * np.ones(self.shape)

    def axis_view(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Reshape a per-axis 1D array for broadcasting over the grid."""
        shape = [1] * self.ndim
        shape[axis] = len(values)
        return values.reshape(shape)


@dataclass
class WaveFunction:
    """Complex amplitudes on a grid; norm is kept at 1 by the propagator
    unless an absorber drains it."""

    grid: Grid
    amps: np.ndarray
    hbar: float = 1.0

    def __post_init__(self) -> None:
        self.amps = np.asarray(self.amps, dtype=np.complex128)
        if self.amps.shape != self.grid.shape:
            raise ValueError(
                f"amplitude shape {self.amps.shape} != grid shape {self.grid.shape}"
            )
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")

    def norm(self) -> float:
        """Total probability, sum |psi|^2 dV."""
        return float(np.sum(np.abs(self.amps) ** 2) * self.grid.dvol)

    def normalize(self) -> "WaveFunction":
        self.amps = self.amps / np.sqrt(self.norm())
        return self

    def density(self) -> np.ndarray:
        return np.abs(self.amps) ** 2


def _per_axis(value, ndim: int, name: str) -> list[float]:
    if np.isscalar(value):
        return [float(value)] * ndim
    out = [float(v) for v in value]
    if len(out) != ndim:
        raise ValueError(f"{name} needs one entry per axis ({ndim}), got {len(out)}")
    return out


def init_gaussian(
    grid: Grid,
    centers,
    momenta,
    widths,
    hbar: float = 1.0,
) -> WaveFunction:
    """Normalized Gaussian packet, product form over axes:
    (2 pi s^2)^(-1/4) exp(-(x-qc)^2 / 4 s^2 + i pc (x-qc) / hbar)."""
    qc = _per_axis(centers, grid.ndim, "centers")
    pc = _per_axis(momenta, grid.ndim, "momenta")
    sig = _per_axis(widths, grid.ndim, "widths")
    for s in sig:
        if s <= 0:
            raise ValueError("packet width sigma must be positive")
    amps = np.ones(grid.shape, dtype=np.complex128)
    for axis in range(grid.ndim):
        x = grid.coords(axis) - qc[axis]
        s2 = sig[axis] ** 2
        line = (2.0 * np.pi * s2) ** -0.25 * np.exp(
            -(x**2) / (4.0 * s2) + 1j * pc[axis] * x / hbar
        )
        amps = amps * grid.axis_view(line, axis)
    wf = WaveFunction(grid, amps, hbar).normalize()
    edge = _boundary_peak(wf)
    if edge > BOUNDARY_AMPLITUDE_TOL:
        warnings.warn(
            f"packet amplitude {edge:.2e} at the grid boundary exceeds "
            f"{BOUNDARY_AMPLITUDE_TOL:.0e}; enlarge the grid",
            BoundarySupportWarning,
            stacklevel=2,
        )
    return wf


def _boundary_peak(wf: WaveFunction) -> float:
    worst = 0.0
    mags = np.abs(wf.amps)
    for axis in range(wf.grid.ndim):
        for edge_index in (0, -1):
            worst = max(worst, float(np.max(np.take(mags, edge_index, axis=axis))))
    return worst


def absorbing_mask(grid: Grid, fraction: float = 0.15) -> np.ndarray:
    """cos^2 amplitude ramp from 1 down to 0 over the outer ``fraction`` of
    each axis."""
    mask = np.ones(grid.shape)
    for axis in range(grid.ndim):
        lo, hi, _ = grid.axes[axis]
        width = fraction * (hi - lo)
        x = grid.coords(axis)
        d = np.minimum(x - lo, hi - x)
        line = np.where(d >= width, 1.0, np.sin(0.5 * np.pi * np.clip(d, 0, width) / width) ** 2)
        mask = mask * grid.axis_view(line, axis)
    return mask


def potential_mesh(grid: Grid, V, masses: Sequence[float] | None = None) -> np.ndarray:
    """Evaluate a potential (ndarray, callable, Poly over q0.., or
    PotentialSpec) on the grid."""
    if isinstance(V, np.ndarray):
        if V.shape != grid.shape:
            raise ValueError("potential mesh shape mismatch")
        return V
    if isinstance(V, PotentialSpec):
        V = V.to_poly(0)
    if isinstance(V, Poly):
        meshes = {q(axis): grid.mesh(axis) for axis in range(grid.ndim)}
        extra = V.variables() - set(meshes)
        if extra:
            names = ", ".join(sorted(v.name for v in extra))
            raise ValueError(f"potential Poly uses non-position variables: {names}")
        total = np.zeros(grid.shape)
        for mono, coeff in V.terms.items():
            term = np.full(grid.shape, coeff)
            for var, k in mono:
                term = term * meshes[var] ** k
            total += term
        return total
    if callable(V):
        coords = [grid.mesh(axis) for axis in range(grid.ndim)]
        return np.asarray(V(*coords), dtype=np.float64)
    raise TypeError(f"unsupported potential type {type(V)!r}")


class SplitOperatorPropagator:
    """Strang split-operator stepper with precomputed phase factors."""

    def __init__(
        self,
        grid: Grid,
        V,
        dt: float,
        hbar: float = 1.0,
        masses: Sequence[float] | None = None,
        absorber: np.ndarray | None = None,
    ):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.grid = grid
        self.dt = float(dt)
        self.hbar = float(hbar)
        self.masses = _per_axis(masses if masses is not None else 1.0, grid.ndim, "masses")
        vmesh = potential_mesh(grid, V, self.masses)
        self.exp_v_half = np.exp(-0.5j * vmesh * dt / hbar)
        kin = np.zeros(grid.shape)
        for axis in range(grid.ndim):
            k = grid.wavenumbers(axis)
            kin = kin + grid.axis_view(k**2, axis) / (2.0 * self.masses[axis])
        self.exp_t = np.exp(-1j * hbar * kin * dt)
        self.absorber = absorber

    def step(self, wf: WaveFunction, n: int = 1) -> WaveFunction:
        amps = wf.amps
        for _ in range(n):
            amps = self.exp_v_half * amps
            amps = np.fft.ifftn(self.exp_t * np.fft.fftn(amps))
            amps = self.exp_v_half * amps
            if self.absorber is not None:
                amps = self.absorber * amps
        if not np.all(np.isfinite(amps)):
            raise NonFiniteAmplitudeError("wavefunction amplitudes became non-finite")
        wf.amps = amps
        return wf


def propagate_split_operator(
    wf: WaveFunction,
    V,
    dt: float,
    steps: int,
    masses: Sequence[float] | None = None,
    absorber: np.ndarray | None = None,
) -> WaveFunction:
    """Advance a wavefunction by ``steps`` Strang steps under potential V."""
    prop = SplitOperatorPropagator(wf.grid, V, dt, wf.hbar, masses, absorber)
    return prop.step(wf, steps)


# --------------------------------------------------------------------------
# Expectation values
# --------------------------------------------------------------------------


def position_moment(wf: WaveFunction, exponents: Sequence[int]) -> float:
    """<q0^e0 q1^e1 ...> over the position density, normalized so that a
    partially absorbed state still reports a proper expectation value."""
    if len(exponents) != wf.grid.ndim:
        raise ValueError("one exponent per axis required")
    density = wf.density()
    weight = density
    for axis, e in enumerate(exponents):
        if e:
            weight = weight * wf.grid.mesh(axis) ** e
    return float(np.sum(weight) / np.sum(density))


def _momentum_moment(wf: WaveFunction, axis: int, power: int) -> float:
    spectrum = np.abs(np.fft.fftn(wf.amps)) ** 2
    k = wf.grid.wavenumbers(axis)
    weight = wf.grid.axis_view((wf.hbar * k) ** power, axis)
    return float(np.sum(weight * spectrum) / np.sum(spectrum))


def expect(
    wf: WaveFunction,
    kind: str,
    axis: int = 0,
    potential=None,
    masses: Sequence[float] | None = None,
) -> float:
    """Expectation value of q, p, q2, p2, qp_sym, or H along one axis.

    Momentum kinds use spectral differentiation; qp_sym is
    Re <psi| q (-i hbar d/dq) |psi>, the symmetrized product.  Kind 'H'
    needs the potential (any form potential_mesh accepts).
    """
    if kind == "q":
        return position_moment(wf, _unit(wf, axis, 1))
    if kind == "q2":
        return position_moment(wf, _unit(wf, axis, 2))
    if kind == "p":
        return _momentum_moment(wf, axis, 1)
    if kind == "p2":
        return _momentum_moment(wf, axis, 2)
    if kind == "qp_sym":
        spectrum = np.fft.fftn(wf.amps)
        k = wf.grid.wavenumbers(axis)
        p_psi = np.fft.ifftn(wf.grid.axis_view(wf.hbar * k, axis) * spectrum)
        value = np.sum(np.conj(wf.amps) * wf.grid.mesh(axis) * p_psi)
        return float(value.real / np.sum(wf.density()))
    if kind == "H":
        if potential is None:
            raise ValueError("expect(kind='H') needs the potential")
        m = _per_axis(masses if masses is not None else 1.0, wf.grid.ndim, "masses")
        kinetic = sum(
            _momentum_moment(wf, a, 2) / (2.0 * m[a]) for a in range(wf.grid.ndim)
        )
        vmesh = potential_mesh(wf.grid, potential, m)
        density = wf.density()
        return float(kinetic + np.sum(vmesh * density) / np.sum(density))
    raise ValueError(f"unknown expectation kind {kind!r}")


def _unit(wf: WaveFunction, axis: int, power: int) -> list[int]:
    exps = [0] * wf.grid.ndim
    exps[axis] = power
    return exps


# --------------------------------------------------------------------------
# Snapshot files: little-endian, uint32 axis count, per axis
# (float64 min, float64 max, uint32 n_points), then interleaved re/im float64
# in C order.
# --------------------------------------------------------------------------


def save_wavefunction(wf: WaveFunction, path) -> None:
    with open(path, "wb") as fh:
        fh.write(np.uint32(wf.grid.ndim).astype("<u4").tobytes())
        for lo, hi, n in wf.grid.axes:
            fh.write(np.float64(lo).astype("<f8").tobytes())
            fh.write(np.float64(hi).astype("<f8").tobytes())
            fh.write(np.uint32(n).astype("<u4").tobytes())
        flat = wf.amps.ravel(order="C")
        interleaved = np.empty(2 * flat.size, dtype="<f8")
        interleaved[0::2] = flat.real
        interleaved[1::2] = flat.imag
        fh.write(interleaved.tobytes())


def load_wavefunction(path, hbar: float = 1.0) -> WaveFunction:
    with open(path, "rb") as fh:
        raw = fh.read()
    n_axes = int(np.frombuffer(raw, dtype="<u4", count=1)[0])
    offset = 4
    axes = []
    for _ in range(n_axes):
        lo, hi = np.frombuffer(raw, dtype="<f8", count=2, offset=offset)
        offset += 16
        n = int(np.frombuffer(raw, dtype="<u4", count=1, offset=offset)[0])
        offset += 4
        axes.append((float(lo), float(hi), n))
    grid = Grid(tuple(axes))
    count = 2 * int(np.prod(grid.shape))
    data = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
    amps = (data[0::2] + 1j * data[1::2]).reshape(grid.shape)
    return WaveFunction(grid, amps, hbar)


def mode_energies(
    wf: WaveFunction, params: Sequence[float]
) -> tuple[float, float]:
    """Marginal harmonic energies <p_a^2>/2m_a + m_a w_a^2 <q_a^2>/2 of a
    2D wavefunction; params = (m1, w1, m2, w2)."""
    if wf.grid.ndim != 2:
        raise ValueError("mode energies are defined for 2D wavefunctions")
    m1, w1, m2, w2 = (float(v) for v in params)
    e1 = expect(wf, "p2", 0) / (2 * m1) + 0.5 * m1 * w1**2 * expect(wf, "q2", 0)
    e2 = expect(wf, "p2", 1) / (2 * m2) + 0.5 * m2 * w2**2 * expect(wf, "q2", 1)
    return (e1, e2)
