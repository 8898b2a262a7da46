"""Exact evaluation of oscillatory strong-field integrals by contour flow."""

from .phasefn import (
    HARTREE_EV,
    NM_AU,
    AtiAction,
    AtiPhase,
    CoincidentTimes,
    DomainWindow,
    HhgAction,
    HhgPhase,
    LaserField,
    PolynomialPhase,
    SeparablePhase,
    SwitchoverConfig,
    ati_action,
    ev_to_au,
    eval_field,
    hhg_action,
    omega_from_nm,
    ponderomotive_and_cutoff,
    stationary_momentum,
    switchover_field,
)

__version__ = "0.1.0"
