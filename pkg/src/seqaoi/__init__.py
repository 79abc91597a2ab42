"""Age of Information under CRT schedule sequences: construction, exact
analysis, brute-force oracles, Monte Carlo baselines and parameter selection."""
from .analytics import (
    Scenario,
    analyze,
    avg_aoi_coprime,
    avg_aoi_event_enum,
    avg_aoi_one_per_frame,
    event_probability,
)
from .sequences import ScheduleSequence, SequenceFamily, crt_construct, superframe_view, verify_mhui

__all__ = [
    "Scenario",
    "ScheduleSequence",
    "SequenceFamily",
    "analyze",
    "avg_aoi_coprime",
    "avg_aoi_event_enum",
    "avg_aoi_one_per_frame",
    "crt_construct",
    "event_probability",
    "superframe_view",
    "verify_mhui",
]
