"""Moment closure: reduce high-order expectation values to multiplet
variables and assemble the extended Hamiltonian F from a potential.

Position moments <q^n> are written in terms of x1 = <q> and x3 = <q^2>
either by dropping all cumulants beyond the second (zero-cumulant, the
Gaussian closure) or by dropping central moments of order three and up
(fluctuation-ignoring).  Both coincide through n = 3.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from math import comb
from typing import Sequence, Union

from .multiplets import MultipletDef, QUARTET_QP_Q2P2
from .poly import Poly, parse_poly, p, q, xvar

__all__ = [
    "ClosureMode",
    "PotentialSpec",
    "UnsupportedMultipletError",
    "UnsupportedMomentError",
    "UnsupportedPotentialError",
    "reduce_moment",
    "build_F",
    "effective_potential",
    "parse_potential",
]


class UnsupportedMultipletError(ValueError):
    """The multiplet lacks the moment slots the closure needs."""


class UnsupportedMomentError(ValueError):
    """A moment outside the closure's scope (momentum or mixed) was requested."""


class UnsupportedPotentialError(ValueError):
    """The potential's degree is outside the supported family."""


class ClosureMode(enum.Enum):
    ZERO_CUMULANT = "zero_cumulant"
    IGNORE_FLUCTUATION = "ignore_fluctuation"

    @classmethod
    def from_string(cls, text: str) -> "ClosureMode":
        key = text.strip().lower().replace("-", "_")
        for mode in cls:
            if mode.value == key:
                return mode
        raise ValueError(f"unknown closure mode {text!r}")


@dataclass
class PotentialSpec:
    """Polynomial potential V(q) = sum_k c_k q^k for one degree of freedom."""

    coefficients: dict[int, float]
    mass: float = 1.0

    def __post_init__(self) -> None:
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        cleaned = {}
        for k, c in self.coefficients.items():
            if int(k) != k or k < 0:
                raise ValueError(f"invalid potential degree {k!r}")
            if c != 0.0:
                cleaned[int(k)] = float(c)
        self.coefficients = cleaned

    @property
    def degree(self) -> int:
        return max(self.coefficients, default=0)

    def to_poly(self, dof: int = 0) -> Poly:
        out = Poly.zero()
        qv = Poly.var(q(dof))
        for k, c in sorted(self.coefficients.items()):
            out = out + c * qv**k
        return out


def parse_potential(text: str, mass: float = 1.0) -> PotentialSpec:
    """Parse e.g. ``0.5*q^2 + 0.1*q^3`` into a PotentialSpec."""
    poly = parse_poly(text)
    coeffs: dict[int, float] = {}
    for mono, c in poly.terms.items():
        powers = dict(mono)
        extra = set(powers) - {q(0)}
        if extra:
            raise ValueError("potential text may only use the variable q")
        coeffs[powers.get(q(0), 0)] = coeffs.get(powers.get(q(0), 0), 0.0) + c
    return PotentialSpec(coeffs, mass)


# --------------------------------------------------------------------------
# Moment reduction
# --------------------------------------------------------------------------


def _moments_from_cumulants(kappas: Sequence[Poly], n: int) -> list[Poly]:
    """Moments m_0..m_n from cumulants via the standard recursion
    m_k = sum_j C(k-1, j) kappa_{j+1} m_{k-1-j}; absent cumulants are zero."""
    moments = [Poly.const(1.0)]
    for k in range(1, n + 1):
        mk = Poly.zero()
        for j in range(k):
            if j < len(kappas):
                mk = mk + comb(k - 1, j) * kappas[j] * moments[k - 1 - j]
        moments.append(mk)
    return moments


def reduce_moment(n: int, mode: ClosureMode, dof: int = 0) -> Poly:
    """<q^n> as a polynomial in x1 = <q> and x3 = <q^2> for one dof."""
    if int(n) != n or n < 0:
        raise ValueError("moment order must be a non-negative integer")
    n = int(n)
    x1 = Poly.var(xvar(1, dof))
    x3 = Poly.var(xvar(3, dof))
    if n == 0:
        return Poly.const(1.0)
    if n == 1:
        return x1
    if n == 2:
        return x3
    variance = x3 - x1 * x1
    if mode is ClosureMode.ZERO_CUMULANT:
        return _moments_from_cumulants([x1, variance], n)[n]
    if mode is ClosureMode.IGNORE_FLUCTUATION:
        return x1**n + comb(n, 2) * x1 ** (n - 2) * variance
    raise ValueError(f"unknown closure mode {mode!r}")


# --------------------------------------------------------------------------
# Hamiltonian assembly
# --------------------------------------------------------------------------


def _multiplet_kind(m: MultipletDef) -> str:
    for dof in range(m.n_dof):
        qv, pv = Poly.var(q(dof)), Poly.var(p(dof))
        defs = m.defs[dof]
        if m.N == 4 and defs == (qv, pv, qv * qv, pv * pv):
            continue
        if m.N == 3 and defs == (qv * qv, pv * pv, qv * pv):
            continue
        raise UnsupportedMultipletError(
            f"multiplet {m.name!r} has no moment slots the closure understands"
        )
    return "quartet" if m.N == 4 else "triplet"


def _potential_poly(V: Union[PotentialSpec, Poly], n_dof: int) -> Poly:
    if isinstance(V, PotentialSpec):
        if n_dof != 1:
            raise UnsupportedMultipletError(
                "a single-dof PotentialSpec cannot drive a multi-dof multiplet; "
                "pass a Poly over q0, q1, ..."
            )
        return V.to_poly(0)
    return V


def build_F(
    V: Union[PotentialSpec, Poly],
    m: MultipletDef,
    mode: ClosureMode,
    masses: Sequence[float] | None = None,
) -> Poly:
    """Kinetic term plus the closed potential, as a Poly over x variables.

    Cross-dof monomials factorize across dofs before the per-dof closure is
    applied (product trial states).
    """
    kind = _multiplet_kind(m)
    if masses is None:
        masses = [V.mass] * m.n_dof if isinstance(V, PotentialSpec) else [1.0] * m.n_dof
    if len(masses) != m.n_dof:
        raise ValueError(f"need {m.n_dof} masses, got {len(masses)}")
    vpoly = _potential_poly(V, m.n_dof)
    allowed = {q(dof) for dof in range(m.n_dof)}
    extra = vpoly.variables() - allowed
    if extra:
        names = ", ".join(sorted(v.name for v in extra))
        raise UnsupportedMomentError(
            f"potential may only involve position variables; got {names}"
        )

    kinetic_slot = 4 if kind == "quartet" else 2
    F = Poly.zero()
    for dof in range(m.n_dof):
        F = F + (1.0 / (2.0 * masses[dof])) * Poly.var(xvar(kinetic_slot, dof))

    for mono, coeff in vpoly.terms.items():
        powers = dict(mono)
        term = Poly.const(coeff)
        for dof in range(m.n_dof):
            k = powers.get(q(dof), 0)
            if k == 0:
                continue
            if kind == "quartet":
                term = term * reduce_moment(k, mode, dof)
            else:
                if k != 2:
                    raise UnsupportedMultipletError(
                        "the quadratic triplet hosts only q^2 potential terms"
                    )
                term = term * Poly.var(xvar(1, dof))
        F = F + term
    return F


def effective_potential(V: PotentialSpec, sigma: float, hbar: float = 1.0) -> Poly:
    """Potential governing the packet center after solving the constraints
    x3 = qc^2 + sigma^2 and x4 = pc^2 + hbar^2/(4 sigma^2); the pc^2 kinetic
    part is excluded, the hbar-dependent corrections are kept."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if V.degree > 3:
        raise UnsupportedPotentialError(
            f"effective potential supports degree <= 3, got {V.degree}"
        )
    F = build_F(V, QUARTET_QP_Q2P2, ClosureMode.ZERO_CUMULANT)
    qc = Poly.var(q(0))
    s2 = sigma * sigma
    substitution = {
        xvar(1, 0): qc,
        xvar(3, 0): qc * qc + Poly.const(s2),
        xvar(4, 0): Poly.const(hbar * hbar / (4.0 * s2)),
    }
    return F.subs(substitution)
