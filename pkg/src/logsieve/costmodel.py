"""Parametric inference-cost and carbon-proportionality arithmetic.

Cost = t_in/1000 * p_in + t_out/1000 * p_out. Energy scales with input
tokens, and emissions with energy times grid intensity. No default prices
or intensities ship with the package: stale numbers would masquerade as
ground truth, so every run supplies its own parameter file.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError


@dataclass(frozen=True)
class PriceSheet:
    p_in: float  # currency per 1,000 input tokens
    p_out: float  # currency per 1,000 output tokens

    def __post_init__(self):
        if self.p_in < 0 or self.p_out < 0:
            raise ValidationError("prices must be non-negative")


@dataclass(frozen=True)
class TokenLedger:
    t_in_full: int
    t_in_reduced: int
    t_out: int = 0

    def __post_init__(self):
        if min(self.t_in_full, self.t_in_reduced, self.t_out) < 0:
            raise ValidationError("token counts must be non-negative")
        if self.t_in_reduced > self.t_in_full:
            raise ValidationError("reduced input tokens cannot exceed full input tokens")

    @property
    def t_removed(self) -> int:
        return self.t_in_full - self.t_in_reduced


@dataclass(frozen=True)
class CarbonParams:
    energy_per_kilotoken: float  # energy units per 1,000 input tokens
    grid_intensity: float  # mass CO2 per energy unit

    def __post_init__(self):
        if self.energy_per_kilotoken < 0 or self.grid_intensity < 0:
            raise ValidationError("carbon parameters must be non-negative")


def inference_cost(t_in: int, t_out: int, prices: PriceSheet) -> float:
    if t_in < 0 or t_out < 0:
        raise ValidationError("token counts must be non-negative")
    return (t_in / 1000.0) * prices.p_in + (t_out / 1000.0) * prices.p_out


def cost_delta(ledger: TokenLedger, prices: PriceSheet, delta_t_out: int = 0) -> float:
    """Per-run cost saved by reduction.

    Reduction mostly shrinks input tokens; delta_t_out defaults to 0 since
    response length stays similar for categorical tasks.
    """
    return (ledger.t_removed / 1000.0) * prices.p_in + (delta_t_out / 1000.0) * prices.p_out


def carbon_delta(t_removed: int, params: CarbonParams) -> float:
    if t_removed < 0:
        raise ValidationError("t_removed must be non-negative")
    return (t_removed / 1000.0) * params.energy_per_kilotoken * params.grid_intensity


@dataclass(frozen=True)
class CostParams:
    prices: PriceSheet
    carbon: CarbonParams
    currency_label: str = "USD"
    energy_label: str = "kWh"


def load_params(path) -> CostParams:
    """Parse a flat key = value parameter file.

    Required keys: p_in, p_out, energy_per_kilotoken, grid_intensity,
    currency_label, energy_label. ``#`` starts a comment; string values may
    be quoted.
    """
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip().strip("\"'")
    required = (
        "p_in",
        "p_out",
        "energy_per_kilotoken",
        "grid_intensity",
        "currency_label",
        "energy_label",
    )
    missing = [k for k in required if k not in values]
    if missing:
        raise ValidationError(f"{path}: missing parameters {missing}")

    def number(key):
        try:
            return float(values[key])
        except ValueError:
            raise ValidationError(f"{path}: {key} must be a number") from None

    return CostParams(
        prices=PriceSheet(p_in=number("p_in"), p_out=number("p_out")),
        carbon=CarbonParams(
            energy_per_kilotoken=number("energy_per_kilotoken"),
            grid_intensity=number("grid_intensity"),
        ),
        currency_label=values["currency_label"],
        energy_label=values["energy_label"],
    )
