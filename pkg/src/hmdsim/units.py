"""Time units. Simulated time is kept in integer picoseconds."""

PS_PER_NS = 1_000
PS_PER_S = 1_000_000_000_000


def seconds_to_ps(seconds: float) -> int:
    return int(round(seconds * PS_PER_S))


def ns_to_ps(ns: float) -> int:
    return int(round(ns * PS_PER_NS))


def ps_to_seconds(ps: int) -> float:
    return ps / PS_PER_S
