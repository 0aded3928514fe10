"""Parameter sets for the four implied-volatility surface regimes."""

from __future__ import annotations

from dataclasses import dataclass

from .spectral import GroupParams
from .timechange import CIRClock, Clock, CompositeClock, IdentityClock, LevyExpCP


@dataclass(frozen=True)
class Preset:
    name: str
    params: GroupParams
    clock: Clock
    r: float = 0.0
    spot: float = 1.0


_BASE = GroupParams(sigma=0.34, v2_eps=0.03, v3_eps=-0.03)

PRESETS = {
    "fig1": Preset("fig1", _BASE, IdentityClock()),
    "fig2": Preset("fig2", _BASE, LevyExpCP(drift=0.25, intensity=0.75, jump_rate=0.10)),
    "fig3": Preset("fig3", _BASE, CIRClock(kappa=1.0, theta=1.0, vol2=2.0, z0=2.0)),
    "fig4": Preset("fig4", _BASE, CompositeClock(
        outer=LevyExpCP(drift=0.05, intensity=0.5, jump_rate=0.5),
        inner=CIRClock(kappa=2.0, theta=1.0, vol2=4.0, z0=4.0))),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
