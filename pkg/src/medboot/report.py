"""Text-table, CSV and JSON emission of result tables."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .bootstrap import BootstrapReport
from .dataset import missing_patterns
from .estimator import REPORT_ORDER

LABELS = {
    "a": "a", "b": "b", "c_prime": "c'", "ab": "ab",
    "iY": "iY", "iM": "iM", "var_eY": "var_eY", "var_eM": "var_eM",
}


@dataclass
class Table:
    title: str
    columns: list          # numeric column keys
    rows: list             # list of {"param": label, key: value, ...}
    meta: dict = field(default_factory=dict)
    key: str = "param"
    headers: dict = field(default_factory=dict)  # display names for the text table

    def to_dict(self) -> dict:
        return {"params": self.rows, "meta": self.meta}


def _num(v):
    return None if v is None or (isinstance(v, float) and np.isnan(v)) else float(v)


def analysis_table(rep: BootstrapReport, meta: dict = None) -> Table:
    rows = []
    for name in REPORT_ORDER:
        p = rep.param(name)
        rows.append({"param": LABELS[name], "estimate": p["estimate"], "se": p["se"],
                     "ci_lo": p["ci_lo"], "ci_hi": p["ci_hi"]})
    m = {
        "level": rep.level,
        "nimpute": rep.n_imputations,
        "nboot": rep.b_requested,
        "b_effective": rep.b_effective,
        "dropped": rep.dropped,
        "retries": rep.retries,
    }
    m.update(meta or {})
    return Table("MEDIATION ANALYSIS RESULTS", ["estimate", "se", "ci_lo", "ci_hi"], rows, m,
                 headers={"estimate": "Estimate", "se": "S.E.", "ci_lo": "CI-lo", "ci_hi": "CI-hi"})


def dataset_meta(ds) -> dict:
    return {
        "n_rows": ds.n_rows,
        "variables": ds.model_names,
        "patterns": [{"pattern": p.label(), "count": p.count} for p in missing_patterns(ds)],
    }


def study_table(report, include_timing: bool = False) -> Table:
    from .estimator import PARAMS
    rows = []
    for name in REPORT_ORDER:
        j = PARAMS.index(name)
        rows.append({"param": LABELS[name], "truth": float(report.truth[j]),
                     "bias": _num(report.bias[j]), "coverage": _num(report.coverage[j]),
                     "power_or_type1": _num(report.power[j]), "kind": report.kind(j)})
    meta = {
        "replications_ok": int(report.estimates.shape[0]),
        "replications_failed": report.n_failed,
        "dropped_replicates": report.dropped_replicates,
        "config": report.config,
    }
    if include_timing:
        meta["wall_time"] = report.wall_time
    return Table("SIMULATION STUDY", ["truth", "bias", "coverage", "power_or_type1"], rows, meta,
                 headers={"truth": "Truth", "bias": "Bias", "coverage": "Coverage",
                          "power_or_type1": "Power/TypeI"})


def sensitivity_table(rows, meta: dict = None) -> Table:
    out = [{"K": r.K, "estimate": r.estimate, "se": r.se, "dev_estimate": r.dev_estimate,
            "dev_se": r.dev_se} for r in rows]
    return Table("IMPUTATION SENSITIVITY (ab)", ["estimate", "se", "dev_estimate", "dev_se"], out,
                 meta or {}, key="K",
                 headers={"estimate": "Estimate", "se": "S.E.", "dev_estimate": "RelDev-Est",
                          "dev_se": "RelDev-SE"})


def to_text(t: Table) -> str:
    heads = [t.headers.get(c, c) for c in t.columns]
    labels = [str(r[t.key]) for r in t.rows]
    w0 = max([len(t.key)] + [len(s) for s in labels])
    cells = [["." if r[c] is None else f"{r[c]:.5f}" for c in t.columns] for r in t.rows]
    widths = [max(10, len(h), *(len(row[i]) for row in cells)) for i, h in enumerate(heads)]
    lines = [t.title, "  ".join([t.key.ljust(w0)] + [h.rjust(w) for h, w in zip(heads, widths)])]
    for lab, row in zip(labels, cells):
        lines.append("  ".join([lab.ljust(w0)] + [v.rjust(w) for v, w in zip(row, widths)]))
    return "\n".join(lines) + "\n"


def to_csv(t: Table) -> str:
    buf = io.StringIO()
    extra = [k for k in t.rows[0] if k not in t.columns and k != t.key] if t.rows else []
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([t.key] + t.columns + extra)
    for r in t.rows:
        w.writerow([r[t.key]] + ["" if r[c] is None else repr(float(r[c])) for c in t.columns]
                   + [r[k] for k in extra])
    return buf.getvalue()


def to_json(t: Table) -> str:
    return json.dumps(t.to_dict(), indent=2, sort_keys=True) + "\n"


def emit(t: Table, fmt: str) -> str:
    return {"table": to_text, "csv": to_csv, "json": to_json}[fmt](t)
