"""Fixed and rareness-weighted scoring over assessment outcomes.

Two views of the same corpus: the fixed score treats all four criteria as
equal quarters; the relative score weights each criterion by how rarely it
is met, so satisfying a rare criterion is worth more. Both are plain double
arithmetic; rounding happens only when reports render.

All aggregates are linear in per-record indicator values, so every score is
also reachable from met-counts alone. The count-based entry points exist for
corpora that arrive as tallies rather than as record streams.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

CRITERIA: tuple[str, str, str, str] = ("chrono", "geo", "lic", "ret")
N_CRITERIA = len(CRITERIA)


class ScoringError(ValueError):
    pass


class EmptyCorpusError(ScoringError):
    """Rareness is undefined when the corpus has no items."""


class EmptyRepositoryError(ScoringError):
    """A repository mean is undefined over zero items."""


@dataclass(frozen=True)
class CriterionStats:
    name: str
    q_size: int  # |Q_i|, number of corpus items meeting the criterion
    rareness: float  # 1 - |Q_i| / |D|
    weight: float  # rareness share, sums to 1 across criteria


@dataclass(frozen=True)
class CorpusTotals:
    d_size: int
    total_rareness: float
    n_criteria: int = N_CRITERIA


@dataclass(frozen=True)
class RepositoryScore:
    repository: str
    items: int
    met_counts: dict[str, int]
    avfixed: float
    avrelative: float


def _met_flags(assessment) -> dict[str, bool]:
    """The four flags off an assessment-like object or a mapping."""
    if isinstance(assessment, Mapping):
        return {name: bool(assessment.get(name)) for name in CRITERIA}
    return {name: bool(getattr(assessment, name)) for name in CRITERIA}


def score_fixed(assessment) -> float:
    """Fixed score of one record: met criteria over four.

    Accepts an assessment (object or mapping with the four flags), a raw
    met count, or a sequence of booleans.
    """
    if isinstance(assessment, int) and not isinstance(assessment, bool):
        k = assessment
    elif isinstance(assessment, (list, tuple)):
        k = sum(bool(m) for m in assessment)
    else:
        k = sum(_met_flags(assessment).values())
    if not 0 <= k <= N_CRITERIA:
        raise ScoringError(f"met count {k} outside 0..{N_CRITERIA}")
    return k / N_CRITERIA


def stats_from_counts(q_sizes: Mapping[str, int], d_size: int) -> list[CriterionStats]:
    """Per-criterion rareness and weight from corpus tallies.

    When every criterion is met by every item, all rareness values are zero
    and the weights fall back to equal quarters.
    """
    if d_size <= 0:
        raise EmptyCorpusError("corpus has no items")
    missing = [name for name in CRITERIA if name not in q_sizes]
    if missing:
        raise ScoringError(f"missing criterion counts: {missing}")
    rareness = {}
    for name in CRITERIA:
        q = q_sizes[name]
        if not 0 <= q <= d_size:
            raise ScoringError(f"|Q_{name}| = {q} outside 0..{d_size}")
        rareness[name] = 1.0 - q / d_size
    total = sum(rareness.values())
    return [
        CriterionStats(
            name=name,
            q_size=q_sizes[name],
            rareness=rareness[name],
            weight=(rareness[name] / total) if total > 0.0 else 1.0 / N_CRITERIA,
        )
        for name in CRITERIA
    ]


def compute_stats(
    assessments: Iterable,
) -> tuple[list[CriterionStats], CorpusTotals]:
    """Stats and totals over a stream of assessment results."""
    q_sizes = {name: 0 for name in CRITERIA}
    d_size = 0
    for item in assessments:
        d_size += 1
        flags = _met_flags(item)
        for name in CRITERIA:
            if flags[name]:
                q_sizes[name] += 1
    stats = stats_from_counts(q_sizes, d_size)
    return stats, corpus_totals(stats, d_size)


def corpus_totals(stats: Sequence[CriterionStats], d_size: int) -> CorpusTotals:
    return CorpusTotals(
        d_size=d_size,
        total_rareness=total_rareness(stats),
        n_criteria=len(stats),
    )


def total_rareness(stats: Sequence[CriterionStats]) -> float:
    return sum(s.rareness for s in stats)


def score_relative(assessment, stats: Sequence[CriterionStats]) -> float:
    """Relative score of one record: rareness-weighted sum of met criteria."""
    weights = {s.name: s.weight for s in stats}
    flags = _met_flags(assessment)
    return sum(weights[name] for name in CRITERIA if flags[name])


def repository_score_from_counts(
    repository: str,
    items: int,
    met_counts: Mapping[str, int],
    stats: Sequence[CriterionStats],
) -> RepositoryScore:
    """Repository means from per-criterion tallies.

    avfixed is the mean fixed score, avrelative the mean weighted score;
    both reduce to count arithmetic because the means are linear.
    """
    if items <= 0:
        raise EmptyRepositoryError(f"repository {repository!r} has no items")
    for name in CRITERIA:
        if name not in met_counts:
            raise ScoringError(f"missing met count for {name!r}")
        if not 0 <= met_counts[name] <= items:
            raise ScoringError(
                f"met count {met_counts[name]} for {name!r} outside 0..{items}"
            )
    weights = {s.name: s.weight for s in stats}
    avfixed = sum(met_counts[name] for name in CRITERIA) / (N_CRITERIA * items)
    avrelative = (
        sum(met_counts[name] * weights[name] for name in CRITERIA) / items
    )
    return RepositoryScore(
        repository=repository,
        items=items,
        met_counts={name: met_counts[name] for name in CRITERIA},
        avfixed=avfixed,
        avrelative=avrelative,
    )


def score_repository(
    repository: str,
    assessments: Iterable,
    stats: Sequence[CriterionStats],
) -> RepositoryScore:
    """Repository means from a stream of that repository's assessments."""
    items = 0
    met_counts = {name: 0 for name in CRITERIA}
    for item in assessments:
        items += 1
        flags = _met_flags(item)
        for name in CRITERIA:
            if flags[name]:
                met_counts[name] += 1
    return repository_score_from_counts(repository, items, met_counts, stats)
