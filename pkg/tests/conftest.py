"""Shared fixtures: the reference laser/atom parameter set used throughout."""

import math

import pytest

from plflow.phasefn import LaserField, ev_to_au

OMEGA = 0.044          # a.u., near-1030 nm fundamental
E0 = 0.05              # a.u. field amplitude
IP = ev_to_au(15.8)    # argon-like binding energy


@pytest.fixture(scope="session")
def omega():
    return OMEGA


@pytest.fixture(scope="session")
def ip():
    return IP


@pytest.fixture(scope="session")
def mono_field():
    return LaserField.monochromatic(E0, OMEGA)


@pytest.fixture(scope="session")
def two_colour_field():
    return LaserField.two_colour_cos(0.05, 0.015, 0.65, OMEGA)


@pytest.fixture(scope="session")
def switchover_45():
    return LaserField.switchover_sin(E0, math.pi / 4.0, OMEGA)


def label_quartet(saddles):
    """Canonical A-D labels for the four upper-half two-colour saddles.

    A is the leftmost saddle (smallest real part); the remaining three are
    labelled B, C, D by descending imaginary part.  Under this convention
    A and D are the two low-lying saddles that the deformed contour passes
    through, while B and C sit higher up and never contribute.
    """
    by_re = sorted(saddles, key=lambda s: s.coords[0].real)
    rest = sorted(by_re[1:], key=lambda s: -s.coords[0].imag)
    return {"A": by_re[0], "B": rest[0], "C": rest[1], "D": rest[2]}
