"""Success probability, ST99 and percentile summaries."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

TARGET = 0.99
DEFAULT_LEVELS = (5, 25, 50, 75, 95)
_TOL = 1e-9


@dataclass(frozen=True)
class SuccessCriterion:
    """What counts as a successful read.

    ``exact_ground`` requires the reference energy itself (``band == 0``);
    ``within_band`` accepts anything up to ``reference_energy + band``.
    """

    mode: str
    reference_energy: float
    band: float = 0.0

    def __post_init__(self):
        if self.mode not in ("exact_ground", "within_band"):
            raise ConfigError(f"unknown success mode {self.mode!r}")
        if self.band < 0:
            raise ConfigError("band must be non-negative")
        if (self.band == 0) != (self.mode == "exact_ground"):
            raise ConfigError("band must be zero exactly for the exact_ground mode")

    @classmethod
    def exact(cls, reference_energy: float) -> "SuccessCriterion":
        return cls("exact_ground", float(reference_energy), 0.0)

    @classmethod
    def within(cls, reference_energy: float, band: float) -> "SuccessCriterion":
        return cls("within_band", float(reference_energy), float(band))

    def threshold(self) -> float:
        ref = self.reference_energy
        return ref + self.band + _TOL * (1.0 + abs(ref))

    def hits(self, energies) -> np.ndarray:
        return np.asarray(energies, dtype=np.float64) <= self.threshold()


def success_prob(energies, crit: SuccessCriterion) -> float:
    """Fraction of records whose energy meets ``crit``.

    Accepts an energy array or anything with an ``energies`` attribute.
    """
    e = getattr(energies, "energies", energies)
    e = np.asarray(e, dtype=np.float64)
    if e.size == 0:
        raise ValueError("success probability of an empty sample set is undefined")
    return float(np.count_nonzero(crit.hits(e))) / e.size


def st99(pi: float) -> float:
    """Expected reads for 99% cumulative success: ``log(0.01) / log(1 - pi)``.

    ``pi == 0`` gives ``inf``; ``pi == 1`` gives 1.
    """
    if not 0.0 <= pi <= 1.0:
        raise ValueError(f"success probability must lie in [0, 1], got {pi}")
    if pi == 0.0:
        return math.inf
    if pi == 1.0:
        return 1.0
    return max(1.0, math.log(1.0 - TARGET) / math.log1p(-pi))


def st99_time(pi: float, k_per_gauge: int, config) -> float:
    """Wall time for ``ceil(k99)`` reads charged whole programming cycles of ``k_per_gauge``."""
    if k_per_gauge < 1:
        raise ValueError("k_per_gauge must be >= 1")
    k99 = st99(pi)
    if math.isinf(k99):
        return math.inf
    reads = math.ceil(k99 - 1e-12)
    return reads * (config.t_f + config.t_s) + math.ceil(reads / k_per_gauge) * config.t_p


def percentiles(values, levels=DEFAULT_LEVELS) -> dict[int, float]:
    """Nearest-rank percentiles; ``inf`` sorts above every finite value."""
    v = np.sort(np.asarray(list(values), dtype=np.float64))
    if v.size == 0:
        raise ValueError("percentiles of an empty collection are undefined")
    if np.isnan(v).any():
        raise ValueError("values must not contain NaN")
    out = {}
    for level in levels:
        if not 0 < level <= 100:
            raise ValueError(f"percentile level must be in (0, 100], got {level}")
        rank = max(1, math.ceil(level / 100.0 * v.size - 1e-12))
        out[level] = float(v[rank - 1])
    return out


CSV_COLUMNS = (
    "instance_id", "class", "n", "N", "M", "setting", "reads", "gauges", "t_f", "kappa",
    "postprocess", "criterion", "reference_energy", "band", "pi", "k99", "st99_time_s",
)


def format_float(x) -> str:
    """Stable text form for CSV cells (``inf`` for infinity)."""
    if x is None:
        return ""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def rows_to_csv(rows, columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_float(row[c]) if isinstance(row.get(c), float) else row.get(c, "") for c in columns])
    return buf.getvalue()


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summarize(rows, column: str = "st99_time_s", by: str = "setting", levels=DEFAULT_LEVELS):
    """Percentiles of ``column`` grouped by ``by`` and criterion."""
    groups: dict[tuple[str, str], list[float]] = {}
    for row in rows:
        groups.setdefault((row[by], row["criterion"]), []).append(float(row[column]))
    return {key: percentiles(vals, levels) for key, vals in sorted(groups.items())}
