import statistics
from typing import Sequence

from models.watch import Bounds


def compute_bounds(values: Sequence[float], sigma: float = 3.0) -> Bounds:
    """Automatic bounds for a numeric data area.

    Three or more values: mean +/- sigma sample standard deviations.
    Fewer: widen min and max by half their magnitude plus a half.
    """
    if not values:
        raise ValueError("automatic bounds need at least one value")
    if len(values) >= 3:
        mean = statistics.fmean(values)
        spread = sigma * statistics.stdev(values)
        return Bounds(lower=mean - spread, upper=mean + spread)
    low, high = min(values), max(values)
    return Bounds(lower=low - 0.5 * (abs(low) + 1), upper=high + 0.5 * (abs(high) + 1))
