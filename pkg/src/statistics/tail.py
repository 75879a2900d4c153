"""Tail tests deciding whether an indexed sequence vanishes or levels off."""

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy import stats  # type: ignore

# Slope threshold, in decades of value per decade of index
DECAY_SLOPE = -0.5


class TailStatistics:
    """Decide whether an indexed sequence of non-negative values tends to zero."""

    @staticmethod
    def last_quartile(values: npt.ArrayLike) -> np.ndarray:
        """
        Return the last 25% of a sequence (at least one element).

        Args:
            values: Sequence indexed n = 1..len(values)

        Returns:
            Tail slice as a float array
        """
        arr = np.asarray(values, dtype=np.float64)
        start = min(len(arr) - 1, (3 * len(arr)) // 4)
        return arr[max(start, 0) :]

    @staticmethod
    def loglog_slope(values: npt.ArrayLike) -> float:
        """
        Slope of log10(value) against log10(n) over the last quartile.

        Zero values are floored at 1e-300. Returns nan when fewer than two
        tail points are available.

        Args:
            values: Sequence indexed n = 1..len(values)

        Returns:
            Fitted slope from scipy.stats.linregress
        """
        arr = np.asarray(values, dtype=np.float64)
        n = np.arange(1, len(arr) + 1, dtype=np.float64)
        start = min(len(arr) - 1, (3 * len(arr)) // 4)
        tail_n, tail_v = n[start:], arr[start:]
        if len(tail_n) < 2:
            return float("nan")
        fit = stats.linregress(np.log10(tail_n), np.log10(np.maximum(tail_v, 1e-300)))
        return float(fit.slope)

    @classmethod
    def vanishes(cls, values: npt.ArrayLike, eps: float = 1e-6) -> bool:
        """
        Tail test for "tends to 0".

        True when every value in the last quartile is at most eps, or when
        the log-log slope of the tail is below DECAY_SLOPE.
        """
        arr = np.asarray(values, dtype=np.float64)
        if arr.size == 0:
            return True
        if bool(np.all(cls.last_quartile(arr) <= eps)):
            return True
        slope = cls.loglog_slope(arr)
        return bool(np.isfinite(slope) and slope < DECAY_SLOPE)

    @staticmethod
    def bounded(values: npt.ArrayLike, growth: float = 0.05) -> bool:
        """
        Whether a non-decreasing sequence has levelled off.

        The relative increase across the last quartile must stay below
        `growth`.
        """
        arr = np.asarray(values, dtype=np.float64)
        if arr.size == 0:
            return True
        if not np.all(np.isfinite(arr)):
            return False
        tail = TailStatistics.last_quartile(arr)
        rise = float(tail[-1] - tail[0])
        return rise <= growth * (1.0 + abs(float(tail[0])))

    @classmethod
    def summarize(cls, values: npt.ArrayLike, eps: float = 1e-6) -> dict[str, float | bool]:
        """
        Summary used in reports.

        Returns:
            Dictionary with last value, tail maximum, slope and the
            vanishes / bounded flags
        """
        arr = np.asarray(values, dtype=np.float64)
        if arr.size == 0:
            return {"last": 0.0, "tail_max": 0.0, "slope": float("nan"), "vanishes": True, "bounded": True}
        return {
            "last": float(arr[-1]),
            "tail_max": float(cls.last_quartile(arr).max()),
            "slope": cls.loglog_slope(arr),
            "vanishes": cls.vanishes(arr, eps),
            "bounded": cls.bounded(np.maximum.accumulate(arr)),
        }

    @staticmethod
    def to_frame(columns: dict[str, npt.ArrayLike]) -> pd.DataFrame:
        """Per-n table with a 1-based index column n."""
        frame = pd.DataFrame(columns)
        frame.insert(0, "n", np.arange(1, len(frame) + 1))
        return frame
