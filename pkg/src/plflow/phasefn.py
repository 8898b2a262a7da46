"""Phase functions for highly oscillatory strong-field integrals.

Problem
-------
Ionisation amplitudes and recollision dipoles are integrals of the form
``prefactor * exp(f)`` over one or two time variables, where the exponent
``f = -i S`` is built from a semiclassical action S. On the real axis
``|exp(f)| = 1`` and the integrand oscillates violently; everything
downstream (contour flow, saddle search, relevance tests) only needs the
exponent and its first two derivatives, evaluated for complex times.

This module supplies those exponents in closed form:

* periodic laser fields written as harmonic components of the vector
  potential A(t), with exact antiderivatives of A and A**2 so actions cost
  a handful of trig calls for any complex time;
* the ionisation action S(p, t) and the recollision action S(ti, tr) with
  analytic gradients and Hessians;
* polynomial toy phases used to validate the machinery against known
  integrals.

Units
-----
Atomic units throughout (hbar = 1). Energies in hartree, times in inverse
hartree, field amplitudes in a.u. Conversion helpers are provided for eV
and nm inputs.

Conventions
-----------
``exponent`` returns the full analytic exponent f of the integrand e^f;
the magnitude exponent is h = Re f and the oscillation phase is H = Im f.
For the ionisation amplitude f = +i S(p, t); for the recollision dipole
f = -i S(ti, tr). The signs differ because dS/dt >= Ip > 0 along real time
for the first action while dS/dti <= -Ip < 0 for the second: these choices
are the ones for which the tunnelling saddles in the upper half of the
ionisation-time plane are exponentially suppressed (h < 0) and hence
reachable by descent from the real domain, matching the quantum-orbit
picture. Each adapter also exposes ``action`` returning the physical S
(the plain polynomial phi for the toys) regardless of the exponent sign.
Complex derivatives are with respect to the holomorphic time variables.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

HARTREE_EV = 27.211386245988
#: omega[a.u.] = NM_AU / lambda[nm]
NM_AU = 45.563352529


def ev_to_au(energy_ev):
    """Convert an energy in electronvolt to hartree."""
    return energy_ev / HARTREE_EV


def omega_from_nm(lambda_nm):
    """Angular frequency in a.u. for a vacuum wavelength in nanometres."""
    return NM_AU / lambda_nm


class CoincidentTimes(ValueError):
    """Raised when ionisation and return times are too close to separate."""


@dataclass(frozen=True)
class LaserField:
    """Periodic field stored as harmonic components of the vector potential.

    A(t) = sum_j amp_j * cos(n_j * omega * t + phase_j)

    which is zero-mean by construction, and E(t) = -dA/dt. Closed-form
    antiderivatives of A and A**2 (``integral_a``, ``integral_a2``) are what
    make action evaluations cheap at complex times.

    Parameters
    ----------
    omega : float
        Fundamental angular frequency in a.u.
    components : tuple of (int, float, float)
        Triples (harmonic order n, amplitude of A, phase offset).
    """

    omega: float
    components: tuple = ()

    # -- constructors for the supported families ------------------------------

    @classmethod
    def monochromatic(cls, e0, omega):
        """E(t) = E0 sin(w t); A(t) = (E0/w) cos(w t)."""
        return cls(omega, ((1, e0 / omega, 0.0),))

    @classmethod
    def two_colour_cos(cls, e1, e2, phi2, omega):
        """E(t) = E1 cos(w t) + E2 cos(2 w t + phi2).

        A(t) = -(E1/w) sin(w t) - (E2/2w) sin(2 w t + phi2), written in the
        cosine form with a pi/2 phase offset.
        """
        return cls(omega, ((1, e1 / omega, 0.5 * math.pi),
                           (2, e2 / (2.0 * omega), phi2 + 0.5 * math.pi)))

    @classmethod
    def switchover_sin(cls, e0, theta, omega):
        """E(t) = E0 cos(theta) sin(w t) + 2 E0 sin(theta) sin(2 w t).

        A(t) = A1 cos(w t) + A2 cos(2 w t) with A1 = E0 cos(theta)/w and
        A2 = E0 sin(theta)/w, so Up = (A1**2 + A2**2)/4 does not depend on
        the mixing angle. A complex angle is allowed (the amplitudes just
        become complex), which is what lets coalescence searches leave the
        real parameter slice.
        """
        trig = cmath if isinstance(theta, complex) else math
        a1 = e0 * trig.cos(theta) / omega
        a2 = e0 * trig.sin(theta) / omega
        return cls(omega, ((1, a1, 0.0), (2, a2, 0.0)))

    # -- closed-form evaluations ----------------------------------------------

    @property
    def period(self):
        return 2.0 * math.pi / self.omega

    def vector_potential(self, t):
        t = np.asarray(t)
        out = np.zeros(t.shape, dtype=complex)
        for n, a, x in self.components:
            out = out + a * np.cos(n * self.omega * t + x)
        return out

    def electric(self, t):
        """E(t) = -dA/dt."""
        t = np.asarray(t)
        out = np.zeros(t.shape, dtype=complex)
        for n, a, x in self.components:
            out = out + a * n * self.omega * np.sin(n * self.omega * t + x)
        return out

    def electric_dot(self, t):
        """dE/dt, needed for third derivatives of actions."""
        t = np.asarray(t)
        out = np.zeros(t.shape, dtype=complex)
        for n, a, x in self.components:
            out = out + a * (n * self.omega) ** 2 * np.cos(n * self.omega * t + x)
        return out

    def integral_a(self, t):
        """alpha(t) = Integral_0^t A(t') dt', exact."""
        t = np.asarray(t)
        out = np.zeros(t.shape, dtype=complex)
        w = self.omega
        for n, a, x in self.components:
            out = out + (a / (n * w)) * (np.sin(n * w * t + x) - math.sin(x))
        return out

    def integral_a2(self, t):
        """beta(t) = Integral_0^t A(t')**2 dt', exact.

        Products of the harmonic components are reduced with
        cos u cos v = (cos(u - v) + cos(u + v)) / 2; equal-order difference
        terms integrate to a secular (linear in t) piece.
        """
        t = np.asarray(t)
        out = np.zeros(t.shape, dtype=complex)
        w = self.omega
        comps = self.components
        for nj, aj, xj in comps:
            for nk, ak, xk in comps:
                c = 0.5 * aj * ak
                # difference-frequency term
                if nj == nk:
                    out = out + c * math.cos(xj - xk) * t
                else:
                    m = (nj - nk) * w
                    p = xj - xk
                    out = out + c * (np.sin(m * t + p) - math.sin(p)) / m
                # sum-frequency term
                m = (nj + nk) * w
                p = xj + xk
                out = out + c * (np.sin(m * t + p) - math.sin(p)) / m
        return out

    def up(self):
        """Cycle-averaged quiver energy <A**2>/2 = sum amp**2 / 4."""
        return sum(a * a for _, a, _ in self.components) / 4.0


def eval_field(field, t):
    """Electric field E(t) for real or complex t."""
    return field.electric(t)


def ponderomotive_and_cutoff(field, ip):
    """Return (Up, classical cutoff order (Ip + 3.17 Up)/omega)."""
    up = field.up()
    return up, (ip + 3.17 * up) / field.omega


@dataclass(frozen=True)
class SwitchoverConfig:
    """Mixing-angle parametrisation of the one-to-two-colour switchover.

    theta = 0 is the pure fundamental, theta = pi/2 the pure second
    harmonic; the quiver energy is the same at every angle.
    """

    theta: float
    e0: float
    omega: float
    e1: float = dc_field(init=False)
    e2: float = dc_field(init=False)
    a1: float = dc_field(init=False)
    a2: float = dc_field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "e1", self.e0 * math.cos(self.theta))
        object.__setattr__(self, "e2", 2.0 * self.e0 * math.sin(self.theta))
        object.__setattr__(self, "a1", self.e1 / self.omega)
        object.__setattr__(self, "a2", self.e2 / (2.0 * self.omega))

    def field(self):
        return LaserField.switchover_sin(self.e0, self.theta, self.omega)


def switchover_field(theta, e0, omega):
    """Field and derived amplitudes for a mixing angle theta (radians)."""
    cfg = SwitchoverConfig(theta, e0, omega)
    return cfg.field(), cfg


# ---------------------------------------------------------------------------
# Actions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AtiAction:
    """Ionisation action S(p, t) = Integral_0^t [Ip + (p + A)**2 / 2] dt'.

    The lower limit is fixed at t' = 0; a different choice shifts S by a
    constant and cancels in every observable.
    """

    field: LaserField
    ip: float
    p: float

    def value(self, t):
        f = self.field
        return ((self.ip + 0.5 * self.p ** 2) * np.asarray(t)
                + self.p * f.integral_a(t) + 0.5 * f.integral_a2(t))

    def grad(self, t):
        v = self.p + self.field.vector_potential(t)
        return self.ip + 0.5 * v * v

    def hess(self, t):
        v = self.p + self.field.vector_potential(t)
        return -v * self.field.electric(t)


def ati_action(field, ip, p, t):
    """Ionisation action value at (possibly complex) time t."""
    return AtiAction(field, ip, p).value(t)


def stationary_momentum(field, ti, tr, min_travel=1e-12):
    """Drift momentum p_s = -(alpha(tr) - alpha(ti)) / (tr - ti).

    This is the momentum for which the excursion between the two times
    closes exactly. Raises CoincidentTimes when |tr - ti| < min_travel.
    """
    tau = np.asarray(tr) - np.asarray(ti)
    if np.any(np.abs(tau) < min_travel):
        raise CoincidentTimes(
            f"|tr - ti| below {min_travel}; stationary momentum undefined")
    return -(field.integral_a(tr) - field.integral_a(ti)) / tau


@dataclass(frozen=True)
class HhgAction:
    """Recollision action for emission of harmonic order q.

    S(ti, tr) = -ps**2 (tr - ti)/2 + (beta(tr) - beta(ti))/2
                + (tr - ti) Ip - q w tr

    with ps the stationary drift momentum between ti and tr. Because ps is
    itself stationary, the total first derivatives reduce to the tunnelling
    and recollision conditions, and the Hessian is closed-form as well.
    """

    field: LaserField
    ip: float
    q: float

    def momentum(self, ti, tr):
        tau = np.asarray(tr) - np.asarray(ti)
        return -(self.field.integral_a(tr) - self.field.integral_a(ti)) / tau

    def value(self, ti, tr):
        f = self.field
        tau = np.asarray(tr) - np.asarray(ti)
        ps = self.momentum(ti, tr)
        return (-0.5 * ps * ps * tau
                + 0.5 * (f.integral_a2(tr) - f.integral_a2(ti))
                + tau * self.ip - self.q * f.omega * np.asarray(tr))

    def grad(self, ti, tr):
        """(dS/dti, dS/dtr)."""
        f = self.field
        ps = self.momentum(ti, tr)
        ki = ps + f.vector_potential(ti)
        kr = ps + f.vector_potential(tr)
        return (-0.5 * ki * ki - self.ip,
                0.5 * kr * kr + self.ip - self.q * f.omega)

    def hess(self, ti, tr):
        """(S_titi, S_titr, S_trtr)."""
        f = self.field
        tau = np.asarray(tr) - np.asarray(ti)
        ps = self.momentum(ti, tr)
        ki = ps + f.vector_potential(ti)
        kr = ps + f.vector_potential(tr)
        ei = f.electric(ti)
        er = f.electric(tr)
        return (ki * ei - ki * ki / tau,
                ki * kr / tau,
                -kr * er - kr * kr / tau)


def hhg_action(field, ip, q, ti, tr):
    """Recollision action and its gradient at (ti, tr)."""
    act = HhgAction(field, ip, q)
    return act.value(ti, tr), act.grad(ti, tr)


# ---------------------------------------------------------------------------
# Exponent adapters: everything downstream sees f = -i S
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AtiPhase:
    """One-dimensional exponent f(t) = +i S(p, t)."""

    source: AtiAction
    ndim: int = 1

    def exponent(self, z):
        return 1j * self.source.value(z)

    def grad(self, z):
        return 1j * self.source.grad(z)

    def hess(self, z):
        return 1j * self.source.hess(z)

    def action(self, z):
        return self.source.value(z)


@dataclass(frozen=True)
class HhgPhase:
    """Two-dimensional exponent f(ti, tr) = -i S(ti, tr)."""

    source: HhgAction
    ndim: int = 2

    def exponent(self, ti, tr):
        return -1j * self.source.value(ti, tr)

    def grad(self, ti, tr):
        gi, gr = self.source.grad(ti, tr)
        return -1j * gi, -1j * gr

    def hess(self, ti, tr):
        a, b, c = self.source.hess(ti, tr)
        return -1j * a, -1j * b, -1j * c

    def action(self, ti, tr):
        return self.source.value(ti, tr)


@dataclass(frozen=True)
class PolynomialPhase:
    """Toy exponent f(z) = i * phi(z) with phi a polynomial in z.

    coeffs are (c0, c1, c2, ...) for phi(z) = sum c_k z**k.
    """

    coeffs: tuple
    ndim: int = 1

    def _poly(self, z, order):
        c = np.polynomial.polynomial.polyder(self.coeffs, order) if order else self.coeffs
        return np.polynomial.polynomial.polyval(np.asarray(z), c, tensor=False)

    def exponent(self, z):
        return 1j * self._poly(z, 0)

    def grad(self, z):
        return 1j * self._poly(z, 1)

    def hess(self, z):
        return 1j * self._poly(z, 2)

    def action(self, z):
        return self._poly(z, 0)


@dataclass(frozen=True)
class SeparablePhase:
    """Two-dimensional exponent f(z1, z2) = f1(z1) + f2(z2)."""

    first: object
    second: object
    ndim: int = 2

    def exponent(self, z1, z2):
        return self.first.exponent(z1) + self.second.exponent(z2)

    def grad(self, z1, z2):
        return self.first.grad(z1), self.second.grad(z2)

    def hess(self, z1, z2):
        z1 = np.asarray(z1)
        return (self.first.hess(z1), np.zeros(z1.shape, dtype=complex),
                self.second.hess(z2))

    def action(self, z1, z2):
        return self.first.action(z1) + self.second.action(z2)


def action_of(phase, coords):
    """Physical action (toy phase) at a point, independent of exponent sign."""
    fn = getattr(phase, "action", None)
    if fn is not None:
        return fn(*coords)
    return -1j * phase.exponent(*coords)


# ---------------------------------------------------------------------------
# Integration domain bookkeeping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DomainWindow:
    """Real integration window: one (or more) cycles of ionisation time,
    and for two-time integrals a travel-time cap in cycles.

    slack_cycles loosens the ionisation-time check only; thimbles of a
    saddle sitting near the window edge may legitimately poke just outside
    the periodic fundamental domain.
    """

    omega: float
    ti_start: float = 0.0
    cycles: float = 1.0
    max_travel_cycles: float = 1.0
    slack_cycles: float = 0.05

    @property
    def period(self):
        return 2.0 * math.pi / self.omega

    @property
    def ti_stop(self):
        return self.ti_start + self.cycles * self.period

    def contains_time(self, t):
        """Is a real arrival time inside the ionisation window (with slack)?"""
        s = self.slack_cycles * self.period
        return (self.ti_start - s <= t) and (t < self.ti_stop + s)

    def contains_pair(self, ti, tr):
        """Is a real (ti, tr) point inside the two-time domain?

        The ionisation time is compared modulo the period (the integrand is
        periodic up to a constant phase); travel must be positive and at
        most the travel cap, with slack on the upper end only.
        """
        travel = tr - ti
        cap = (self.max_travel_cycles + self.slack_cycles) * self.period
        return 0.0 < travel <= cap
