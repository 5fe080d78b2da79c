"""Keyword-emission trajectories: how many lexicon terms a record accrues per year.

Controls emit at a flat baseline rate for their whole history. Cases emit
at the baseline until a fixed number of years before their diagnosis index
date, then ramp linearly up to a peak rate reached at the index date and
hold the peak afterwards. The ramp shape is piecewise linear, so the mean
of the rate over any window whose endpoints avoid straddling a kink is the
rate at the window midpoint (the generator leans on this).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError

GROUP_CASE = "case"
GROUP_CONTROL = "control"


@dataclass(frozen=True)
class TrajectoryProfile:
    baseline_rate: float = 10.0  # keywords / year
    peak_rate: float = 45.0
    ramp_start_years_before_index: float = 14.0
    noise_dispersion: float = 1.0  # variance / mean of yearly counts (1 = Poisson)
    notes_per_year: float = 6.0

    def validate(self) -> None:
        if not self.baseline_rate > 0:
            raise ConfigError("baseline_rate must be positive")
        if self.ramp_start_years_before_index < 0:
            raise ConfigError("ramp_start_years_before_index must be nonnegative")
        if self.peak_rate < self.baseline_rate:
            raise ConfigError("peak_rate must be >= baseline_rate")
        if self.noise_dispersion < 0:
            raise ConfigError("noise_dispersion must be nonnegative")
        if not self.notes_per_year > 0:
            raise ConfigError("notes_per_year must be positive")


def keyword_rate(years_to_index: float, group: str, profile: TrajectoryProfile) -> float:
    """Expected keywords/year at a signed offset from the index date.

    Negative offsets are before the index. Controls have no index; the
    offset argument is ignored for them. Total function: never raises for
    any finite offset.
    """
    profile.validate()
    if group == GROUP_CONTROL:
        return profile.baseline_rate
    if group != GROUP_CASE:
        raise ConfigError(f"unknown trajectory group {group!r}")
    ramp = profile.ramp_start_years_before_index
    if years_to_index >= 0:
        return profile.peak_rate
    if years_to_index <= -ramp or ramp == 0:
        return profile.baseline_rate
    frac = 1.0 + years_to_index / ramp  # 0 at ramp start, 1 at index
    return profile.baseline_rate + (profile.peak_rate - profile.baseline_rate) * frac
