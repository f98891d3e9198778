"""Time-domain metrics over annotated events and binary detections."""

from .affiliation import affiliation_fbeta, zone_precision, zone_recall
from .core import (
    EvaluationContext,
    EventMatching,
    GlobalView,
    adtqc_score,
    adtqc_value,
    alarming_precision,
    channel_aware_fbeta,
    corrected_event_fbeta,
    evaluate,
    fbeta_score,
    global_view,
    match_events,
    subsystem_aware_fbeta,
)

__all__ = [
    "EvaluationContext",
    "EventMatching",
    "GlobalView",
    "adtqc_score",
    "adtqc_value",
    "affiliation_fbeta",
    "alarming_precision",
    "channel_aware_fbeta",
    "corrected_event_fbeta",
    "evaluate",
    "fbeta_score",
    "global_view",
    "match_events",
    "subsystem_aware_fbeta",
    "zone_precision",
    "zone_recall",
]
