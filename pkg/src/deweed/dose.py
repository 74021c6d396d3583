"""Dual-band radiant dose and lethality model.

Lethality is linear in the per-band radiant exposure (irradiance integrated
over time, J/m^2) and clamped to [0, 1]::

    L = min(1, k_near_ir * H_near_ir + k_uva * H_uva)

For constant irradiance H = E * T, so this is the fitted crabgrass relation
evaluated on exposure time; integrating lets sources switch on and off.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import UnreachableTargetError, ValidationError

K_NEAR_IR = 5.5e-6  # per (W/m^2 * s)
K_UVA = 6.5e-5  # per (W/m^2 * s)

# Phase I bulb: 11 mW/cm^2 of UV-A.  The near-IR share of the 5.73 W/cm^2 total
# is not published; 5000 W/m^2 gives a ~29 s full-lethality dwell.
PHASE1_E_UVA = 110.0
PHASE1_E_NEAR_IR = 5000.0

# DAR4 end effector: 0.06 W/cm^2 MWIR and 0.85 W/cm^2 of 450 nm light.
PHASE2_E_MWIR = 600.0
PHASE2_E_IRID = 8500.0

W_PER_CM2 = 1.0e4  # W/m^2


@dataclass(frozen=True)
class DoseRecipe:
    e_near_ir: float = PHASE1_E_NEAR_IR
    e_uva: float = PHASE1_E_UVA
    k_near_ir: float = K_NEAR_IR
    k_uva: float = K_UVA
    label: str = "phase1"

    def __post_init__(self):
        for name in ("e_near_ir", "e_uva", "k_near_ir", "k_uva"):
            value = getattr(self, name)
            if not value >= 0:  # also rejects NaN
                raise ValidationError(f"recipe {name} must be >= 0, got {value}")

    @property
    def dose_rate(self) -> float:
        """Lethality gained per second with both bands on."""
        return self.k_near_ir * self.e_near_ir + self.k_uva * self.e_uva

    @property
    def usable(self) -> bool:
        return self.dose_rate > 0


@dataclass(frozen=True)
class ExposureLedger:
    t_near_ir: float = 0.0
    t_uva: float = 0.0
    dose_integral_near_ir: float = 0.0
    dose_integral_uva: float = 0.0

    def __post_init__(self):
        for name in ("t_near_ir", "t_uva", "dose_integral_near_ir", "dose_integral_uva"):
            value = getattr(self, name)
            if not value >= 0:
                raise ValidationError(f"ledger {name} must be >= 0, got {value}")

    @property
    def empty(self) -> bool:
        return self.dose_integral_near_ir == 0 and self.dose_integral_uva == 0


def phase1_recipe(**overrides) -> DoseRecipe:
    return replace(DoseRecipe(), **overrides)


def phase2_recipe(**overrides) -> DoseRecipe:
    """DAR4 end-effector recipe.

    MWIR occupies the near-IR slot and the 450 nm band the short-wavelength
    slot. Coefficients default to the Phase I fit and may be overridden.
    """
    base = DoseRecipe(e_near_ir=PHASE2_E_MWIR, e_uva=PHASE2_E_IRID, label="phase2")
    return replace(base, **overrides)


RECIPE_PRESETS = {"phase1": phase1_recipe, "phase2": phase2_recipe}


def lethality(ledger: ExposureLedger, recipe: DoseRecipe) -> float:
    raw = recipe.k_near_ir * ledger.dose_integral_near_ir + recipe.k_uva * ledger.dose_integral_uva
    return min(1.0, max(0.0, raw))


def accumulate(ledger: ExposureLedger, recipe: DoseRecipe, dt: float) -> ExposureLedger:
    """Expose for ``dt`` seconds at the recipe's constant irradiance."""
    if not dt >= 0:
        raise ValidationError(f"dt must be >= 0, got {dt}")
    return ExposureLedger(
        t_near_ir=ledger.t_near_ir + (dt if recipe.e_near_ir > 0 else 0.0),
        t_uva=ledger.t_uva + (dt if recipe.e_uva > 0 else 0.0),
        dose_integral_near_ir=ledger.dose_integral_near_ir + recipe.e_near_ir * dt,
        dose_integral_uva=ledger.dose_integral_uva + recipe.e_uva * dt,
    )


def dwell_time_for_target(recipe: DoseRecipe, target: float) -> float:
    if not 0.0 < target <= 1.0:
        raise ValidationError(f"target lethality must lie in (0, 1], got {target}")
    rate = recipe.dose_rate
    if not rate > 0:
        raise UnreachableTargetError(
            f"unreachable target: recipe {recipe.label!r} has zero dose rate"
        )
    return target / rate
