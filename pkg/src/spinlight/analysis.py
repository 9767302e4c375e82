"""Order-of-magnitude analysis and mechanism decomposition.

All functions here work in SI unless a :class:`PhysicalConstants` set
says otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import SI, PhysicalConstants
from .errors import ConfigurationError
from .terms import COH, MECHANISMS, TABLE_CELLS, TABLE_COLUMNS, TABLE_ROWS, TermId

__all__ = ["EtaInputs", "fluence_to_field", "eta", "magnitude_estimates",
           "REFERENCE_POINTS", "reference_table", "mechanism_report", "DIRECT_SPIN_TERMS",
           "SPIN_FREE_TERMS"]

# energy density per fluence in J/m^2 of one mJ/cm^2
MJ_PER_CM2 = 10.0

DIRECT_SPIN_TERMS = (TermId.ZEEMAN_EXT, TermId.SOC_EXT)
SPIN_FREE_TERMS = (TermId.PA_FIELD, TermId.AA_ORB, TermId.AA_FIELD)


def fluence_to_field(fluence_mj_cm2: float, duration_s: float,
                     const: PhysicalConstants = SI) -> float:
    """Peak field (V/m) from a fluence in mJ/cm^2 spread over ``duration_s``.

    Solves ``c eps0 E^2 / 2 = 10 F / dt`` for ``E``.
    """
    if fluence_mj_cm2 < 0 or duration_s <= 0:
        raise ConfigurationError("fluence must be >= 0 and duration > 0")
    return math.sqrt(2.0 * MJ_PER_CM2 * fluence_mj_cm2 / (duration_s * const.c * const.eps0))


@dataclass(frozen=True)
class EtaInputs:
    """Inputs of the yield parameter (SI)."""

    r_ij: float
    e_ext: float
    wavelength: float
    const: PhysicalConstants = SI

    def __post_init__(self):
        if not (self.r_ij > 0 and self.wavelength > 0 and self.e_ext >= 0):
            raise ConfigurationError("r_ij and wavelength must be > 0, E_ext >= 0")


def eta(r_ij, e_ext=None, wavelength=None, const: PhysicalConstants = SI) -> float:
    """Yield parameter ``(r_ij/lambda_C) (e E lambda / m c^2)``.

    Accepts either an :class:`EtaInputs` or the three values.
    """
    if isinstance(r_ij, EtaInputs):
        inp = r_ij
    else:
        inp = EtaInputs(r_ij, e_ext, wavelength, const)
    c = inp.const
    return inp.r_ij / c.lambda_C * c.e * inp.e_ext * inp.wavelength / c.rest_energy


def magnitude_estimates(r_ij: float, n_electrons: int, e_ext: float, wavelength: float,
                        const: PhysicalConstants = SI) -> dict:
    """Dimensional estimates of the three Hamiltonian sectors (energies).

    The external scalar potential is taken as ``E_ext * wavelength``.

    Returns
    -------
    dict
        ``U_ext``: ``e Phi (1, lC/lambda, (lC/lambda)^2)``;
        ``U_int``: ``(N e2/r) (1, (lC/r)^2)``;
        ``U_int_ext``: ``(N e2/r)(lC/r)(e Phi/m c^2)``; and the ratios
        ``lambda_C_over_lambda`` and ``eta``.
    """
    if r_ij <= 0 or wavelength <= 0 or n_electrons < 0 or e_ext < 0:
        raise ConfigurationError("invalid magnitude inputs")
    lc = const.lambda_C
    phi = e_ext * wavelength
    x = lc / wavelength
    u_ext = const.e * phi
    coul = n_electrons * const.e2bar / r_ij
    u_int = (coul, coul * (lc / r_ij) ** 2)
    u_ie = coul * (lc / r_ij) * (const.e * phi / const.rest_energy)
    return {
        "U_ext": (u_ext, u_ext * x, u_ext * x * x),
        "U_int": u_int,
        "U_int_ext": u_ie,
        "lambda_C_over_lambda": x,
        "eta": u_ie / u_int[1] if u_int[1] else float("nan"),
    }


# (r_ij [m], E_ext [V/m], lambda [m], rounded value quoted in the literature)
REFERENCE_POINTS = (
    (1e-10, 4e8, 800e-9, 0.03),
    (3e-10, 4e8, 800e-9, 0.09),
    (1e-10, 1e10, 800e-9, 0.65),
)


def reference_table(const: PhysicalConstants = SI) -> list:
    """Exact yields at the reference points next to the rounded quotes."""
    rows = []
    for r, e, lam, quoted in REFERENCE_POINTS:
        rows.append({"r_ij_m": r, "E_ext_V_per_m": e, "lambda_m": lam,
                     "eta_exact": eta(r, e, lam, const),
                     "eta_quoted_rounded": quoted, "quoted_is_rounded": True})
    return rows


def _lookup(energies, term):
    for key in (term, term.value):
        if key in energies:
            return float(energies[key])
    raise ConfigurationError(f"missing energy for term {term.value!r}")


def _one_report(energies) -> dict:
    cells = []
    for row in TABLE_ROWS:
        line = []
        for col in TABLE_COLUMNS:
            term = TABLE_CELLS.get((row, col))
            if term is None:
                line.append(None)
                continue
            label = next((k for k, v in MECHANISMS.items() if v is term), None)
            line.append({"term": term.value, "energy": _lookup(energies, term),
                         "mechanism": label})
        cells.append(line)
    return {
        "direct": {t.value: _lookup(energies, t) for t in DIRECT_SPIN_TERMS},
        "mechanisms": {k: {"term": t.value, "energy": _lookup(energies, t)}
                       for k, t in MECHANISMS.items()},
        "spin_free": {t.value: _lookup(energies, t) for t in SPIN_FREE_TERMS},
        "table": {"rows": list(TABLE_ROWS), "columns": list(TABLE_COLUMNS), "cells": cells},
        "coherent_total": sum(_lookup(energies, t) for t in COH),
    }


def mechanism_report(energies, times=None) -> dict:
    """Arrange coherent-sector energies in the source-versus-operator table.

    Parameters
    ----------
    energies : mapping or sequence of mappings
        Term energies keyed by :class:`TermId` or its config key.  A
        sequence gives one report per entry.
    times : sequence of float, optional
        Time stamps matching a sequence of ``energies``.

    Returns
    -------
    dict
        ``direct`` (spin terms acting with the laser alone), ``mechanisms``
        (A1, A2, B1, B2), ``spin_free``, ``table`` with ``rows``,
        ``columns`` and ``cells`` (``None`` for empty cells) and
        ``coherent_total``; for a sequence, ``{"times": ..., "reports": [...]}``.
    """
    if isinstance(energies, dict):
        return _one_report(energies)
    reports = [_one_report(e) for e in energies]
    times = list(times) if times is not None else list(range(len(reports)))
    if len(times) != len(reports):
        raise ConfigurationError("times and energies differ in length")
    return {"times": times, "reports": reports}
