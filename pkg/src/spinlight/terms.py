"""Identifiers for every addressable Hamiltonian term."""
from __future__ import annotations

from enum import Enum

from .errors import ConfigurationError

__all__ = ["TermId", "EXT", "INT", "COH", "parse_toggles", "leading_order_toggles",
           "TABLE_ROWS", "TABLE_COLUMNS", "TABLE_CELLS", "MECHANISMS"]


class TermId(str, Enum):
    """Hamiltonian terms; the value is the scenario config key.

    ``group`` is one of ``"ext"`` (single-electron terms in the external
    field), ``"int"`` (mean internal interactions) and ``"coh"`` (terms
    that exist only while the external field is on).  ``order`` is the
    power of ``1/c`` carried by the operator.
    """

    SCALAR = "scalar"
    DIPOLE_PA = "dipole-pA"
    DIAMAGNETIC_AA = "diamagnetic-AA"
    ZEEMAN_EXT = "zeeman-ext"
    DARWIN_EXT = "darwin-ext"
    SOC_EXT = "soc-ext"

    HARTREE = "hartree"
    CONTACT_ORB = "contact-orb"
    CONTACT_DARWIN = "contact-darwin"
    DIPOLAR_ORB = "dipolar-orb"
    SOO_ZEEMAN_ORB = "soo-zeeman-orb"
    SOO_PA_SPIN = "soo-pA-spin"
    SPIN_SPIN = "spin-spin"
    SOC_INT = "soc-int"
    SOC_PHI2_SPIN = "soc-phi2-spin"

    PHI2_FIELD = "phi2-field"
    PA_FIELD = "pA-field"
    AA_ORB = "AA-orb"
    AA_FIELD = "AA-field"
    AA_SPIN = "AA-spin"
    ZEEMAN_FIELD = "zeeman-field"
    SOC_EXT_INT = "soc-ext-int"

    @property
    def group(self) -> str:
        return _GROUP[self]

    @property
    def order(self) -> int:
        return 0 if self in _LEADING else 2

    @property
    def a_power(self) -> int:
        """Power of ``A_ext`` carried by a coherent term (0 otherwise)."""
        if self.group != "coh":
            return 0
        return 2 if self is TermId.AA_FIELD else 1


EXT = (TermId.SCALAR, TermId.DIPOLE_PA, TermId.DIAMAGNETIC_AA,
       TermId.ZEEMAN_EXT, TermId.DARWIN_EXT, TermId.SOC_EXT)
INT = (TermId.HARTREE, TermId.CONTACT_ORB, TermId.CONTACT_DARWIN, TermId.DIPOLAR_ORB,
       TermId.SOO_ZEEMAN_ORB, TermId.SOO_PA_SPIN, TermId.SPIN_SPIN, TermId.SOC_INT,
       TermId.SOC_PHI2_SPIN)
COH = (TermId.PHI2_FIELD, TermId.PA_FIELD, TermId.AA_ORB, TermId.AA_FIELD,
       TermId.AA_SPIN, TermId.ZEEMAN_FIELD, TermId.SOC_EXT_INT)

_GROUP = {**{t: "ext" for t in EXT}, **{t: "int" for t in INT}, **{t: "coh" for t in COH}}
_LEADING = {TermId.SCALAR, TermId.DIPOLE_PA, TermId.DIAMAGNETIC_AA, TermId.ZEEMAN_EXT,
            TermId.HARTREE}


def parse_toggles(spec=None) -> dict:
    """Full ``{TermId: bool}`` map from a partial mapping of config keys.

    Unspecified terms default to on.  Unknown keys raise
    :class:`ConfigurationError`.
    """
    toggles = {t: True for t in TermId}
    if not spec:
        return toggles
    for key, val in dict(spec).items():
        try:
            term = key if isinstance(key, TermId) else TermId(key)
        except ValueError:
            raise ConfigurationError(f"unknown term toggle {key!r}") from None
        toggles[term] = bool(val)
    return toggles


def leading_order_toggles() -> dict:
    """Toggles with every order-1/c^2 term disabled."""
    return {t: t.order == 0 for t in TermId}


# source-vs-operator layout of the coherent sector
TABLE_ROWS = ("rho0", "j_orb", "j_spin", "j_field", "rho2_field")
TABLE_COLUMNS = ("coulomb", "paramagnetic-I", "paramagnetic-II", "zeeman", "spin-orbit")
TABLE_CELLS = {
    ("rho0", "spin-orbit"): TermId.SOC_EXT_INT,
    ("j_orb", "paramagnetic-II"): TermId.AA_ORB,
    ("j_spin", "paramagnetic-II"): TermId.AA_SPIN,
    ("j_field", "paramagnetic-I"): TermId.PA_FIELD,
    ("j_field", "paramagnetic-II"): TermId.AA_FIELD,
    ("j_field", "zeeman"): TermId.ZEEMAN_FIELD,
    ("rho2_field", "coulomb"): TermId.PHI2_FIELD,
}
MECHANISMS = {"A1": TermId.ZEEMAN_FIELD, "A2": TermId.SOC_EXT_INT,
              "B1": TermId.AA_SPIN, "B2": TermId.PHI2_FIELD}
