"""Flux laws and the two-stage tendency equations.

dH/dt = P - Q_g/L - H/(h_g L) (Q - Q_g)
dL/dt = (Q - Q_g) / h_g

with h_g = -lambda b(L), Q = gamma H^(2n+1) / L^n and Q_g = omega h_g^beta.
"""

from __future__ import annotations

import dataclasses
from typing import NamedTuple

import numpy as np

from glacier_da.core.errors import ValidationError
from glacier_da.core.forcing import smb_forcing
from glacier_da.core.geometry import grounding_thickness
from glacier_da.core.models import Derivative, FluxDiagnostics, GlacierState, ModelParams


class Rates(NamedTuple):
    """Tendencies and fluxes for one state or a batch of states."""

    dH_dt: np.ndarray
    dL_dt: np.ndarray
    h_g: np.ndarray
    Q: np.ndarray
    Q_g: np.ndarray


def _require_calibrated(p: ModelParams) -> tuple[float, float]:
    if p.gamma is None or p.omega is None:
        raise ValidationError("gamma and omega are unset; run calibrate_constants first")
    return p.gamma, p.omega


def interior_flux(s: GlacierState, p: ModelParams) -> float:
    """Interior flux Q = gamma H^(2n+1) / L^n, m^2/yr."""
    gamma, _ = _require_calibrated(p)
    return float(gamma * s.H ** (2 * p.n + 1) / s.L**p.n)


def grounding_flux(h_g: float, p: ModelParams) -> float:
    """Grounding-line flux Q_g = omega h_g^beta, m^2/yr."""
    _, omega = _require_calibrated(p)
    if h_g <= 0:
        raise ValidationError(f"grounding thickness must be > 0, got {h_g}")
    return float(omega * h_g**p.beta)


def rates(t: float, H: np.ndarray, L: np.ndarray, p: ModelParams) -> Rates:
    """Vectorized tendency for arrays of thickness and length (m).

    Raises
    ------
    NonMarineBedError
        If any grounding line sits on non-marine bed.
    """
    gamma, omega = _require_calibrated(p)
    P = smb_forcing(t, p)
    h_g = grounding_thickness(L, p)
    Q = gamma * H ** (2 * p.n + 1) / L**p.n
    Q_g = omega * h_g**p.beta
    imbalance = Q - Q_g
    dL_dt = imbalance / h_g
    dH_dt = P - Q_g / L - H / (h_g * L) * imbalance
    return Rates(dH_dt, dL_dt, h_g, Q, Q_g)


def tendency(t: float, s: GlacierState, p: ModelParams) -> tuple[Derivative, FluxDiagnostics]:
    """Right-hand side of the two-stage equations at year ``t``.

    Parameters
    ----------
    t : float
        Model year.
    s : GlacierState
        Current state.
    p : ModelParams
        Calibrated parameters.

    Returns
    -------
    tuple of (Derivative, FluxDiagnostics)
        The state derivative and the fluxes it was built from.
    """
    r = rates(t, np.float64(s.H), np.float64(s.L), p)
    return (
        Derivative(dH_dt=float(r.dH_dt), dL_dt=float(r.dL_dt)),
        FluxDiagnostics(h_g=float(r.h_g), Q=float(r.Q), Q_g=float(r.Q_g)),
    )


def calibrate_constants(p: ModelParams) -> ModelParams:
    """Set gamma and omega so the initial state is an exact equilibrium.

    With P0 = smb_o:

    - ``gamma = P0 L0^(n+1) / H0^(2n+1)`` makes Q(H0, L0) = P0 L0
    - ``omega = P0 L0 / h_g(L0)^beta`` makes Q_g(L0) = P0 L0

    so both tendencies vanish at t = 0.

    Raises
    ------
    NonMarineBedError
        If the initial grounding line is on non-marine bed.
    ValidationError
        If ``smb_o`` is zero (no positive calibration exists).
    """
    if p.smb_o <= 0:
        raise ValidationError(f"smb_o must be > 0 to calibrate, got {p.smb_o}")
    H0, L0 = p.H0, p.L0
    P0 = p.smb_o
    h_g0 = grounding_thickness(L0, p)
    gamma = P0 * L0 ** (p.n + 1) / H0 ** (2 * p.n + 1)
    omega = P0 * L0 / h_g0**p.beta
    return dataclasses.replace(p, gamma=float(gamma), omega=float(omega))


def with_constants(p: ModelParams, source: ModelParams) -> ModelParams:
    """Copy gamma and omega from ``source`` into ``p``."""
    gamma, omega = _require_calibrated(source)
    return dataclasses.replace(p, gamma=gamma, omega=omega)
