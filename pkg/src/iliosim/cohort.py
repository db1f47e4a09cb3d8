"""Trainee cohort pipeline: questionnaire scoring, N/D classification,
balanced group assignment and the G1-vs-G2 aggregate report.

Operator characteristics follow the evaluation protocol: theoretical (T)
and procedural (P) knowledge flags are positive only for a strictly
greater than 80% questionnaire score; experience buckets map to the
novice/skilled class; groups are built by equally distributing the three
binary characteristics.
"""

from __future__ import annotations

import enum
import random
import statistics
from dataclasses import dataclass, replace

from .errors import (
    DegenerateTable,
    EmptyCategory,
    MissingMetrics,
    ValidationError,
)
from .stats import ChiSquareResult, chi_square

DEFAULT_ALPHA = 0.05


class ItemCategory(enum.Enum):
    THEORETICAL = "theoretical"
    PROCEDURAL = "procedural"


class ExperienceBucket(enum.Enum):
    ZERO = "zero"
    ONE = "one"
    ONE_TO_FIVE = "one_to_five"
    MORE_THAN_FIVE = "more_than_five"


_BUCKET_ORDER = {
    ExperienceBucket.ZERO: 0,
    ExperienceBucket.ONE: 1,
    ExperienceBucket.ONE_TO_FIVE: 2,
    ExperienceBucket.MORE_THAN_FIVE: 3,
}


class Skill(enum.Enum):
    NOVICE = "novice"
    SKILLED = "skilled"


class TFlag(enum.Enum):
    T_MINUS = "t_minus"
    T_PLUS = "t_plus"


class PFlag(enum.Enum):
    P_MINUS = "p_minus"
    P_PLUS = "p_plus"


class Group(enum.Enum):
    G1 = "g1"
    G2 = "g2"


@dataclass(frozen=True)
class QuestionnaireItem:
    item_id: str
    category: ItemCategory
    correct: bool


@dataclass(frozen=True)
class QuestionnaireResponse:
    operator_id: str
    items: tuple[QuestionnaireItem, ...]
    experience_bucket: ExperienceBucket


@dataclass(frozen=True)
class OperatorProfile:
    operator_id: str
    skill: Skill
    t_flag: TFlag
    p_flag: PFlag
    group: Group | None = None


def score_questionnaire(resp: QuestionnaireResponse) -> tuple[TFlag, PFlag]:
    """Score both categories; a flag is positive iff strictly > 80% correct.

    Integer arithmetic keeps the 80% boundary exact: 8/10 is negative,
    9/10 positive.
    """
    ids = [item.item_id for item in resp.items]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"duplicate item ids for operator {resp.operator_id}")
    counts = {cat: [0, 0] for cat in ItemCategory}  # [correct, total]
    for item in resp.items:
        counts[item.category][1] += 1
        if item.correct:
            counts[item.category][0] += 1
    for cat, (_, total) in counts.items():
        if total == 0:
            raise EmptyCategory(f"no {cat.value} items for operator {resp.operator_id}")
    t_correct, t_total = counts[ItemCategory.THEORETICAL]
    p_correct, p_total = counts[ItemCategory.PROCEDURAL]
    t_flag = TFlag.T_PLUS if 5 * t_correct > 4 * t_total else TFlag.T_MINUS
    p_flag = PFlag.P_PLUS if 5 * p_correct > 4 * p_total else PFlag.P_MINUS
    return t_flag, p_flag


def skill_from_experience(
    bucket: ExperienceBucket,
    skilled_min: ExperienceBucket = ExperienceBucket.ONE_TO_FIVE,
) -> Skill:
    """Experience bucket to novice/skilled; the threshold is configurable
    (the default counts 1-to-5 placements as skilled)."""
    return (
        Skill.SKILLED
        if _BUCKET_ORDER[bucket] >= _BUCKET_ORDER[skilled_min]
        else Skill.NOVICE
    )


def profile_from_response(
    resp: QuestionnaireResponse,
    skilled_min: ExperienceBucket = ExperienceBucket.ONE_TO_FIVE,
) -> OperatorProfile:
    t_flag, p_flag = score_questionnaire(resp)
    return OperatorProfile(
        operator_id=resp.operator_id,
        skill=skill_from_experience(resp.experience_bucket, skilled_min),
        t_flag=t_flag,
        p_flag=p_flag,
    )


def assign_groups(profiles, seed: int) -> list[OperatorProfile]:
    """Distribute operators over G1/G2, balanced within each of the eight
    (skill, T, P) strata; deterministic for a fixed seed."""
    profiles = list(profiles)
    if len(profiles) < 2:
        raise ValidationError("group assignment needs at least 2 operators")
    rng = random.Random(seed)
    strata: dict[tuple, list[int]] = {}
    for i, p in enumerate(profiles):
        strata.setdefault((p.skill.value, p.t_flag.value, p.p_flag.value), []).append(i)
    out = list(profiles)
    totals = {Group.G1: 0, Group.G2: 0}
    for key in sorted(strata):
        members = strata[key]
        rng.shuffle(members)
        # start with the overall-smaller group to balance across strata
        first = Group.G1 if totals[Group.G1] <= totals[Group.G2] else Group.G2
        second = Group.G2 if first is Group.G1 else Group.G1
        for rank, i in enumerate(members):
            group = first if rank % 2 == 0 else second
            out[i] = replace(profiles[i], group=group)
            totals[group] += 1
    return out


# --- aggregation --------------------------------------------------------------------

SUBPOPULATIONS = ("all", "novice", "skilled", "t_minus", "t_plus", "p_minus", "p_plus")

_SUBPOP_PREDICATES = {
    "all": lambda p: True,
    "novice": lambda p: p.skill is Skill.NOVICE,
    "skilled": lambda p: p.skill is Skill.SKILLED,
    "t_minus": lambda p: p.t_flag is TFlag.T_MINUS,
    "t_plus": lambda p: p.t_flag is TFlag.T_PLUS,
    "p_minus": lambda p: p.p_flag is PFlag.P_MINUS,
    "p_plus": lambda p: p.p_flag is PFlag.P_PLUS,
}


@dataclass(frozen=True)
class SubpopStats:
    n: int
    xray_total: int
    xray_mean: float | None  # exact total/n, rounded only at render time
    iatrogenic_total: int
    iatrogenic_mean: float | None
    iatrogenic_range: tuple[int, int] | None


@dataclass(frozen=True)
class SubpopComparison:
    xray_test: ChiSquareResult | None
    xray_significant: bool | None
    iatrogenic_test: ChiSquareResult | None
    iatrogenic_significant: bool | None


@dataclass(frozen=True)
class GroupReport:
    alpha: float
    stats: dict[Group, dict[str, SubpopStats]]
    comparisons: dict[str, SubpopComparison]


def _subpop_stats(members) -> SubpopStats:
    n = len(members)
    xrays = [m.xray_count for m in members]
    levels = [m.iatrogenic_level for m in members]
    return SubpopStats(
        n=n,
        xray_total=sum(xrays),
        xray_mean=sum(xrays) / n if n else None,
        iatrogenic_total=sum(levels),
        iatrogenic_mean=sum(levels) / n if n else None,
        iatrogenic_range=(min(levels), max(levels)) if n else None,
    )


def _quantile_bins(values, bins: int = 3):
    """Bin counts into `bins` quantile classes computed on the pooled
    sample (methodology reconstruction: the protocol names the test but
    not the contingency construction)."""
    if len(set(values)) == 1:
        return lambda x: 0
    cuts = statistics.quantiles(values, n=bins, method="inclusive")

    def bin_of(x):
        for i, cut in enumerate(cuts):
            if x <= cut:
                return i
        return len(cuts)

    return bin_of


def _drop_empty_columns(table):
    keep = [j for j in range(len(table[0])) if any(row[j] for row in table)]
    return [[row[j] for j in keep] for row in table]


def _safe_chi_square(table) -> ChiSquareResult | None:
    table = _drop_empty_columns(table)
    if not table or len(table[0]) < 2:
        return None
    try:
        return chi_square(table)
    except DegenerateTable:
        return None


def _xray_comparison(g1_metrics, g2_metrics) -> ChiSquareResult | None:
    if not g1_metrics or not g2_metrics:
        return None
    pooled = [m.xray_count for m in g1_metrics + g2_metrics]
    bin_of = _quantile_bins(pooled)
    nbins = max(bin_of(x) for x in pooled) + 1
    if nbins < 2:
        return None
    table = [[0] * nbins for _ in range(2)]
    for row, metrics in ((0, g1_metrics), (1, g2_metrics)):
        for m in metrics:
            table[row][bin_of(m.xray_count)] += 1
    return _safe_chi_square(table)


def _iatrogenic_comparison(g1_metrics, g2_metrics) -> ChiSquareResult | None:
    if not g1_metrics or not g2_metrics:
        return None
    table = [[0] * 5 for _ in range(2)]
    for row, metrics in ((0, g1_metrics), (1, g2_metrics)):
        for m in metrics:
            table[row][m.iatrogenic_level - 1] += 1
    return _safe_chi_square(table)


def cohort_report(profiles, metrics_by_operator, alpha: float = DEFAULT_ALPHA) -> GroupReport:
    """Aggregate per-group and per-sub-population statistics and compare
    the groups with chi-square tests on X-ray count bins and iatrogenic
    level distributions."""
    profiles = list(profiles)
    for p in profiles:
        if p.group is None:
            raise ValidationError(f"operator {p.operator_id} has no group")
        if p.operator_id not in metrics_by_operator:
            raise MissingMetrics(f"no session metrics for operator {p.operator_id}")

    stats: dict[Group, dict[str, SubpopStats]] = {Group.G1: {}, Group.G2: {}}
    comparisons: dict[str, SubpopComparison] = {}
    for name in SUBPOPULATIONS:
        pred = _SUBPOP_PREDICATES[name]
        by_group = {
            g: [metrics_by_operator[p.operator_id] for p in profiles if p.group is g and pred(p)]
            for g in (Group.G1, Group.G2)
        }
        for g in (Group.G1, Group.G2):
            stats[g][name] = _subpop_stats(by_group[g])
        xray_test = _xray_comparison(by_group[Group.G1], by_group[Group.G2])
        iat_test = _iatrogenic_comparison(by_group[Group.G1], by_group[Group.G2])
        comparisons[name] = SubpopComparison(
            xray_test=xray_test,
            xray_significant=None if xray_test is None else xray_test.p < alpha,
            iatrogenic_test=iat_test,
            iatrogenic_significant=None if iat_test is None else iat_test.p < alpha,
        )
    return GroupReport(alpha=alpha, stats=stats, comparisons=comparisons)


# --- rendering -----------------------------------------------------------------------

_SUBPOP_LABELS = {
    "all": "All",
    "novice": "N",
    "skilled": "D",
    "t_minus": "T-",
    "t_plus": "T+",
    "p_minus": "P-",
    "p_plus": "P+",
}


def _fmt_mean(mean) -> str:
    return "-" if mean is None else f"{mean:.2f}"


def _fmt_range(rng) -> str:
    return "-" if rng is None else f"(range {rng[0]} to {rng[1]})"


def _fmt_test(test, significant) -> str:
    if test is None:
        return "not testable"
    mark = "significant" if significant else "ns"
    return f"chi2={test.statistic:.4f} df={test.df} p={test.p:.4f} ({mark})"


def render_report_table(report: GroupReport) -> str:
    """Aligned plain-text tables mirroring the published report layout."""
    lines = []
    header = (
        f"{'Sub-pop':<8}{'G1 n':>5}{'G1 X-rays':>10}{'G1 mean':>9}"
        f"{'G2 n':>5}{'G2 X-rays':>10}{'G2 mean':>9}  X-ray comparison"
    )
    lines.append("Radiographic controls per operator")
    lines.append(header)
    for name in SUBPOPULATIONS:
        s1 = report.stats[Group.G1][name]
        s2 = report.stats[Group.G2][name]
        cmp_ = report.comparisons[name]
        lines.append(
            f"{_SUBPOP_LABELS[name]:<8}{s1.n:>5}{s1.xray_total:>10}{_fmt_mean(s1.xray_mean):>9}"
            f"{s2.n:>5}{s2.xray_total:>10}{_fmt_mean(s2.xray_mean):>9}"
            f"  {_fmt_test(cmp_.xray_test, cmp_.xray_significant)}"
        )
    lines.append("")
    lines.append("Iatrogenic index per operator")
    lines.append(
        f"{'Sub-pop':<8}{'G1 tot':>7}{'G1 mean':>9}{'G1 range':>16}"
        f"{'G2 tot':>7}{'G2 mean':>9}{'G2 range':>16}  Index comparison"
    )
    for name in SUBPOPULATIONS:
        s1 = report.stats[Group.G1][name]
        s2 = report.stats[Group.G2][name]
        cmp_ = report.comparisons[name]
        lines.append(
            f"{_SUBPOP_LABELS[name]:<8}{s1.iatrogenic_total:>7}{_fmt_mean(s1.iatrogenic_mean):>9}"
            f"{_fmt_range(s1.iatrogenic_range):>16}"
            f"{s2.iatrogenic_total:>7}{_fmt_mean(s2.iatrogenic_mean):>9}"
            f"{_fmt_range(s2.iatrogenic_range):>16}"
            f"  {_fmt_test(cmp_.iatrogenic_test, cmp_.iatrogenic_significant)}"
        )
    return "\n".join(lines) + "\n"


def report_to_doc(report: GroupReport) -> dict:
    """JSON-ready structure of the report (means exact, unrounded)."""

    def stats_doc(s: SubpopStats) -> dict:
        return {
            "n": s.n,
            "xray_total": s.xray_total,
            "xray_mean": s.xray_mean,
            "iatrogenic_total": s.iatrogenic_total,
            "iatrogenic_mean": s.iatrogenic_mean,
            "iatrogenic_range": list(s.iatrogenic_range) if s.iatrogenic_range else None,
        }

    def test_doc(test: ChiSquareResult | None, significant) -> dict | None:
        if test is None:
            return None
        return {
            "statistic": test.statistic,
            "df": test.df,
            "p": test.p,
            "significant": significant,
        }

    return {
        "alpha": report.alpha,
        "groups": {
            g.value: {name: stats_doc(report.stats[g][name]) for name in SUBPOPULATIONS}
            for g in (Group.G1, Group.G2)
        },
        "comparisons": {
            name: {
                "xray": test_doc(c.xray_test, c.xray_significant),
                "iatrogenic": test_doc(c.iatrogenic_test, c.iatrogenic_significant),
            }
            for name, c in report.comparisons.items()
        },
    }


# --- roster documents ---------------------------------------------------------------

ROSTER_FORMAT_VERSION = 1


def roster_from_doc(doc: dict) -> list[OperatorProfile]:
    """Parse a roster document into grouped operator profiles.

    Operators carry questionnaire items and an experience bucket; explicit
    groups are honored when every operator has one, otherwise groups are
    assigned from the roster seed (default 0).
    """
    if not isinstance(doc, dict):
        raise ValidationError("roster must be a JSON object")
    if doc.get("format_version") != ROSTER_FORMAT_VERSION:
        raise ValidationError("roster requires format_version 1")
    operators = doc.get("operators")
    if not isinstance(operators, list) or not operators:
        raise ValidationError("roster needs a non-empty operators list")

    skilled_min = ExperienceBucket(doc.get("skilled_min", "one_to_five"))
    profiles = []
    explicit_groups = []
    seen_ids = set()
    for op in operators:
        try:
            operator_id = op["operator_id"]
            bucket = ExperienceBucket(op["experience"])
            items = tuple(
                QuestionnaireItem(
                    item_id=item["item_id"],
                    category=ItemCategory(item["category"]),
                    correct=bool(item["correct"]),
                )
                for item in op["items"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed roster operator: {exc}") from exc
        if operator_id in seen_ids:
            raise ValidationError(f"duplicate operator_id {operator_id!r}")
        seen_ids.add(operator_id)
        resp = QuestionnaireResponse(operator_id, items, bucket)
        profile = profile_from_response(resp, skilled_min)
        if "group" in op:
            profile = replace(profile, group=Group(op["group"]))
        explicit_groups.append("group" in op)
        profiles.append(profile)

    if all(explicit_groups):
        return profiles
    if any(explicit_groups):
        raise ValidationError("either all operators carry a group or none do")
    return assign_groups(profiles, seed=int(doc.get("seed", 0)))
