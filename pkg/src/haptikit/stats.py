"""Analysis pipeline for study sessions.

Paired two-tailed t-test with Cohen's d, 2x2x2 repeated-measures ANOVA,
raw NASA-TLX and SUS scoring, and the report builder that turns
per-participant summaries into the study tables.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .distributions import f_sf, t_sf_two_sided

ANOVA_FACTORS = ("Device", "Frequency", "Amplitude")
TASKS = ("targeting", "tracking")
CONDITIONS = ("handheld", "knob")

# (frequency level, amplitude level) rows in the tracking report, low first
SEGMENT_CELLS = (("low", "low"), ("low", "high"), ("high", "low"), ("high", "high"))


@dataclass
class PairedTestResult:
    t: float
    df: int
    p: float
    mean_x: float
    mean_y: float
    sd_x: float
    sd_y: float
    cohens_d: float
    n: int


def paired_t(x: Sequence[float], y: Sequence[float]) -> PairedTestResult:
    """Paired two-tailed t-test on index-matched samples.

    Cohen's d uses the pooled SD of the two condition distributions,
    sqrt((sd_x^2 + sd_y^2) / 2), not the SD of the differences.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("paired_t needs two equal-length 1-D samples")
    n = x.size
    if n < 2:
        raise ValueError("paired_t needs n >= 2 pairs")
    d = x - y
    sd_d = float(np.std(d, ddof=1))
    if sd_d == 0.0:
        raise ValueError("zero variance of paired differences; t is undefined")
    t = float(np.mean(d) / (sd_d / math.sqrt(n)))
    sd_x = float(np.std(x, ddof=1))
    sd_y = float(np.std(y, ddof=1))
    pooled = math.sqrt((sd_x ** 2 + sd_y ** 2) / 2.0)
    cohens_d = abs(float(np.mean(x) - np.mean(y))) / pooled if pooled > 0 else math.inf
    return PairedTestResult(t=t, df=n - 1, p=t_sf_two_sided(t, n - 1),
                            mean_x=float(np.mean(x)), mean_y=float(np.mean(y)),
                            sd_x=sd_x, sd_y=sd_y, cohens_d=cohens_d, n=n)


# ---------------------------------------------------------------------------
# repeated-measures ANOVA (2x2x2, all within subjects)

@dataclass
class AnovaRow:
    effect: str
    F: float
    df_num: int
    df_den: int
    p: float
    ss_effect: float
    ss_error: float
    degenerate: bool = False


@dataclass
class AnovaTable:
    rows: list[AnovaRow]
    n_subjects: int
    ss_subjects: float
    ss_total: float

    def row(self, effect: str) -> AnovaRow:
        for r in self.rows:
            if r.effect == effect:
                return r
        raise KeyError(effect)

    def ss_closure_error(self) -> float:
        """Relative gap between total SS and the sum of all components."""
        parts = self.ss_subjects + sum(r.ss_effect + r.ss_error for r in self.rows)
        scale = max(abs(self.ss_total), 1e-30)
        return abs(self.ss_total - parts) / scale


def _subset_ss(y: np.ndarray, axes: tuple[int, ...]) -> float:
    """Sum of squares of the interaction term for one subset of axes.

    Inclusion-exclusion over keepdims-means; summing the broadcast term
    over the full grid applies the standard replication multiplier.
    """
    all_axes = tuple(range(y.ndim))
    term = np.zeros_like(y)
    for r in range(len(axes) + 1):
        for sub in itertools.combinations(axes, r):
            reduce_over = tuple(a for a in all_axes if a not in sub)
            m = y.mean(axis=reduce_over, keepdims=True)
            sign = (-1.0) ** (len(axes) - len(sub))
            term = term + sign * m
    return float(np.sum(term ** 2))


def rm_anova_2x2x2(data: np.ndarray,
                   factors: Sequence[str] = ANOVA_FACTORS) -> AnovaTable:
    """Three-way fully within-subjects ANOVA on a (n, 2, 2, 2) array.

    Axis 0 is the participant; each effect is tested against its own
    effect-by-subject interaction, so every F has (1, n - 1) degrees of
    freedom. Requires a complete balanced design (no imputation).
    """
    y = np.asarray(data, dtype=float)
    if y.ndim != 4 or y.shape[1:] != (2, 2, 2):
        raise ValueError("expected data shaped (participants, 2, 2, 2)")
    if y.shape[0] < 2:
        raise ValueError("need at least 2 participants")
    if not np.all(np.isfinite(y)):
        raise ValueError("missing or non-finite cells; the design must be complete")
    n = y.shape[0]

    ss_total = float(np.sum((y - y.mean()) ** 2))
    ss_subjects = _subset_ss(y, (0,))
    scale = max(ss_total, 1e-30)

    rows: list[AnovaRow] = []
    effect_axes = []
    for r in (1, 2, 3):
        effect_axes += list(itertools.combinations((1, 2, 3), r))
    for axes in effect_axes:
        name = " x ".join(factors[a - 1] for a in axes)
        ss_e = _subset_ss(y, axes)
        ss_err = _subset_ss(y, (0,) + axes)
        df_den = n - 1
        degenerate = ss_err <= 1e-14 * scale
        if degenerate:
            f_val = 0.0 if ss_e <= 1e-14 * scale else math.inf
            p = 1.0 if f_val == 0.0 else 0.0
        else:
            f_val = (ss_e / 1.0) / (ss_err / df_den)
            p = f_sf(f_val, 1, df_den)
        rows.append(AnovaRow(effect=name, F=f_val, df_num=1, df_den=df_den,
                             p=p, ss_effect=ss_e, ss_error=ss_err,
                             degenerate=degenerate))
    return AnovaTable(rows=rows, n_subjects=n, ss_subjects=ss_subjects,
                      ss_total=ss_total)


# ---------------------------------------------------------------------------
# questionnaires

@dataclass
class QuestionnaireScore:
    kind: str                  # 'TLX_raw' or 'SUS'
    value: float               # 0..100
    item_responses: list[float]


def sus_score(items: Sequence[float]) -> QuestionnaireScore:
    """System Usability Scale: ten 1-5 items onto a 0-100 scale.

    Odd items (1-indexed) contribute response - 1, even items 5 - response;
    the sum is scaled by 2.5, so single-response scores land on a 2.5 grid.
    """
    items = [float(v) for v in items]
    if len(items) != 10:
        raise ValueError("SUS needs exactly 10 item responses")
    if any(not 1.0 <= v <= 5.0 for v in items):
        raise ValueError("SUS responses must lie in [1, 5]")
    total = 0.0
    for i, v in enumerate(items):
        total += (v - 1.0) if i % 2 == 0 else (5.0 - v)
    return QuestionnaireScore(kind="SUS", value=total * 2.5, item_responses=items)


def tlx_raw(subscales: Sequence[float]) -> QuestionnaireScore:
    """Raw (unweighted) NASA-TLX: mean of six 0-100 subscales."""
    vals = [float(v) for v in subscales]
    if len(vals) != 6:
        raise ValueError("raw TLX needs exactly 6 subscale values")
    if any(not 0.0 <= v <= 100.0 for v in vals):
        raise ValueError("TLX subscales must lie in [0, 100]")
    return QuestionnaireScore(kind="TLX_raw", value=float(np.mean(vals)),
                              item_responses=vals)


# ---------------------------------------------------------------------------
# report

@dataclass
class ParticipantSummary:
    """Everything the report needs from one participant's session log."""

    participant_id: int
    throughput: dict = field(default_factory=dict)       # condition -> bits/s
    tracking_errors: dict = field(default_factory=dict)  # (cond, freq, amp) -> px
    tlx: dict = field(default_factory=dict)              # (task, cond) -> score
    sus: dict = field(default_factory=dict)              # (task, cond) -> score

    def missing(self) -> list[str]:
        gaps = []
        for c in CONDITIONS:
            if c not in self.throughput:
                gaps.append(f"throughput[{c}]")
        for c in CONDITIONS:
            for fl, al in SEGMENT_CELLS:
                if (c, fl, al) not in self.tracking_errors:
                    gaps.append(f"tracking[{c},{fl},{al}]")
        for task in TASKS:
            for c in CONDITIONS:
                if (task, c) not in self.tlx:
                    gaps.append(f"tlx[{task},{c}]")
                if (task, c) not in self.sus:
                    gaps.append(f"sus[{task},{c}]")
        return gaps


@dataclass
class StatsReport:
    n_participants: int
    excluded: list
    throughput_stats: dict
    throughput_test: Optional[PairedTestResult]
    tracking_table: list           # rows: segment x device mean/sd
    tracking_anova: Optional[AnovaTable]
    tlx_stats: dict
    tlx_tests: dict
    sus_stats: dict
    sus_tests: dict
    warnings: list


def _mean_sd(values: Sequence[float]) -> dict:
    arr = np.asarray(values, dtype=float)
    return {"mean": float(arr.mean()),
            "sd": float(arr.std(ddof=1)) if arr.size > 1 else 0.0}


def _try_paired(x, y, label, warnings):
    try:
        return paired_t(x, y)
    except ValueError as exc:
        warnings.append(f"{label}: paired t-test rejected ({exc})")
        return None


def build_report(participants: Sequence[ParticipantSummary]) -> StatsReport:
    """Assemble the study report from complete participants.

    Incomplete participants are listed and excluded with a warning; at
    least two complete participants are required.
    """
    warnings: list[str] = []
    excluded: list = []
    complete: list[ParticipantSummary] = []
    for p in participants:
        gaps = p.missing()
        if gaps:
            excluded.append(p.participant_id)
            warnings.append(
                f"participant {p.participant_id} excluded; missing {gaps[:3]}"
                + ("..." if len(gaps) > 3 else ""))
        else:
            complete.append(p)
    if len(complete) < 2:
        raise ValueError("need at least 2 complete participants to build a report")

    tp = {c: [p.throughput[c] for p in complete] for c in CONDITIONS}
    throughput_stats = {c: _mean_sd(tp[c]) for c in CONDITIONS}
    throughput_test = _try_paired(tp["handheld"], tp["knob"], "throughput", warnings)

    tracking_table = []
    for fl, al in SEGMENT_CELLS:
        for c in CONDITIONS:
            vals = [p.tracking_errors[(c, fl, al)] for p in complete]
            tracking_table.append({
                "segment": f"{fl} frequency / {al} amplitude",
                "frequency": fl, "amplitude": al, "device": c,
                **_mean_sd(vals)})

    # (n, device, frequency, amplitude) with low level first on each axis
    cube = np.empty((len(complete), 2, 2, 2))
    for i, p in enumerate(complete):
        for di, c in enumerate(CONDITIONS):
            for fi, fl in enumerate(("low", "high")):
                for ai, al in enumerate(("low", "high")):
                    cube[i, di, fi, ai] = p.tracking_errors[(c, fl, al)]
    try:
        tracking_anova = rm_anova_2x2x2(cube)
    except ValueError as exc:
        tracking_anova = None
        warnings.append(f"tracking ANOVA rejected ({exc})")

    tlx_stats, tlx_tests = {}, {}
    sus_stats, sus_tests = {}, {}
    for task in TASKS:
        for c in CONDITIONS:
            tlx_stats[(task, c)] = _mean_sd([p.tlx[(task, c)] for p in complete])
            sus_stats[(task, c)] = _mean_sd([p.sus[(task, c)] for p in complete])
        tlx_tests[task] = _try_paired(
            [p.tlx[(task, "handheld")] for p in complete],
            [p.tlx[(task, "knob")] for p in complete],
            f"TLX[{task}]", warnings)
        sus_tests[task] = _try_paired(
            [p.sus[(task, "handheld")] for p in complete],
            [p.sus[(task, "knob")] for p in complete],
            f"SUS[{task}]", warnings)

    return StatsReport(n_participants=len(complete), excluded=excluded,
                       throughput_stats=throughput_stats,
                       throughput_test=throughput_test,
                       tracking_table=tracking_table,
                       tracking_anova=tracking_anova,
                       tlx_stats=tlx_stats, tlx_tests=tlx_tests,
                       sus_stats=sus_stats, sus_tests=sus_tests,
                       warnings=warnings)


def _test_dict(res: Optional[PairedTestResult]) -> Optional[dict]:
    if res is None:
        return None
    return {"t": res.t, "df": res.df, "p": res.p, "cohens_d": res.cohens_d,
            "mean_x": res.mean_x, "mean_y": res.mean_y,
            "sd_x": res.sd_x, "sd_y": res.sd_y, "n": res.n}


def report_to_json_dict(report: StatsReport) -> dict:
    anova = None
    if report.tracking_anova is not None:
        anova = {
            "n_subjects": report.tracking_anova.n_subjects,
            "rows": [{"effect": r.effect, "F": r.F, "df_num": r.df_num,
                      "df_den": r.df_den, "p": r.p, "degenerate": r.degenerate}
                     for r in report.tracking_anova.rows],
        }
    return {
        "n_participants": report.n_participants,
        "excluded": report.excluded,
        "throughput": {c: report.throughput_stats[c] for c in CONDITIONS},
        "throughput_test": _test_dict(report.throughput_test),
        "tracking_table": report.tracking_table,
        "tracking_anova": anova,
        "tlx": {f"{t}/{c}": report.tlx_stats[(t, c)]
                for t in TASKS for c in CONDITIONS},
        "tlx_tests": {t: _test_dict(report.tlx_tests[t]) for t in TASKS},
        "sus": {f"{t}/{c}": report.sus_stats[(t, c)]
                for t in TASKS for c in CONDITIONS},
        "sus_tests": {t: _test_dict(report.sus_tests[t]) for t in TASKS},
        "warnings": report.warnings,
    }


def report_to_text(report: StatsReport) -> str:
    """Aligned plain-text tables mirroring the study write-up layout."""
    lines: list[str] = []
    lines.append(f"Participants analyzed: {report.n_participants}"
                 + (f" (excluded: {report.excluded})" if report.excluded else ""))
    lines.append("")
    lines.append("Throughput (bits/s)")
    for c in CONDITIONS:
        s = report.throughput_stats[c]
        lines.append(f"  {c:<9} M = {s['mean']:6.3f}  SD = {s['sd']:6.3f}")
    t = report.throughput_test
    if t is not None:
        lines.append(f"  paired t({t.df}) = {t.t:.3f}, p = {t.p:.4g}, d = {t.cohens_d:.3f}")
    lines.append("")
    lines.append("Tracking: average error per segment (px)")
    lines.append(f"  {'Segment':<32}{'Device':<11}{'Mean':>9}{'SD':>9}")
    for row in report.tracking_table:
        lines.append(f"  {row['segment']:<32}{row['device']:<11}"
                     f"{row['mean']:9.2f}{row['sd']:9.2f}")
    if report.tracking_anova is not None:
        a = report.tracking_anova
        lines.append("")
        lines.append(f"Three-way RM-ANOVA (n = {a.n_subjects})")
        lines.append(f"  {'Effect':<38}{'F':>9}{'df':>8}{'p':>10}")
        for r in a.rows:
            df = f"{r.df_num},{r.df_den}"
            note = " (degenerate)" if r.degenerate else ""
            lines.append(f"  {r.effect:<38}{r.F:9.3f}{df:>8}{r.p:10.4g}{note}")
    for label, stats_map, tests in (("Raw NASA-TLX", report.tlx_stats, report.tlx_tests),
                                    ("SUS", report.sus_stats, report.sus_tests)):
        lines.append("")
        lines.append(label)
        for task in TASKS:
            for c in CONDITIONS:
                s = stats_map[(task, c)]
                lines.append(f"  {task:<10} {c:<9} M = {s['mean']:6.2f}  SD = {s['sd']:6.2f}")
            t = tests[task]
            if t is not None:
                lines.append(f"  {task:<10} paired t({t.df}) = {t.t:.3f}, p = {t.p:.4g}")
    if report.warnings:
        lines.append("")
        lines.append("Warnings:")
        for w in report.warnings:
            lines.append(f"  - {w}")
    return "\n".join(lines) + "\n"
