"""CSV ingestion and machine-readable reports.

JSON reports carry a top-level ``schema_version``; the schemas below are the
documented contract for ``fit`` and ``select`` output.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import SurvivalDataset
from .errors import InputNotFound, ParseError

SCHEMA_VERSION = "1.0"

_NUM = {"type": ["number", "null"]}

COEFFICIENT_SCHEMA = {
    "type": "object",
    "required": ["component", "name", "estimate", "std_error", "estimate_original",
                 "std_error_original", "selected", "significant"],
    "properties": {
        "component": {"enum": ["scale", "shape"]},
        "name": {"type": "string"},
        "estimate": {"type": "number"},
        "std_error": _NUM,
        "estimate_original": {"type": "number"},
        "std_error_original": _NUM,
        "selected": {"type": "boolean"},
        "significant": {"type": "boolean"},
    },
}

FIT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "command", "n", "n_events", "penalty", "tuning_mode",
                 "lambda", "standardized", "converged", "n_iter", "loglik",
                 "penalized_loglik", "effective_df", "df_scale", "df_shape", "coefficients"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"enum": ["fit", "select"]},
        "n": {"type": "integer", "minimum": 1},
        "n_events": {"type": "integer", "minimum": 1},
        "penalty": {"enum": ["none", "lasso", "scad", "alasso"]},
        "tuning_mode": {"enum": ["single", "single-adaptive", "separate", "separate-adaptive"]},
        "lambda": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "standardized": {"type": "boolean"},
        "converged": {"type": "boolean"},
        "n_iter": {"type": "integer", "minimum": 0},
        "loglik": {"type": "number"},
        "penalized_loglik": {"type": "number"},
        "effective_df": _NUM,
        "df_scale": _NUM,
        "df_shape": _NUM,
        "coefficients": {"type": "array", "items": COEFFICIENT_SCHEMA},
    },
}

SELECT_SCHEMA = {
    **FIT_SCHEMA,
    "required": FIT_SCHEMA["required"] + ["bic", "bic_trace", "n_inner_fits",
                                          "selected_covariates"],
    "properties": {
        **FIT_SCHEMA["properties"],
        "command": {"const": "select"},
        "bic": _NUM,
        "bic_trace": {"type": "array", "items": _NUM},
        "n_inner_fits": {"type": "integer", "minimum": 0},
        "selected_covariates": {
            "type": "object",
            "required": ["scale", "shape"],
            "properties": {
                "scale": {"type": "array", "items": {"type": "string"}},
                "shape": {"type": "array", "items": {"type": "string"}},
            },
        },
    },
}

COEFFICIENT_COLUMNS = ("component", "name", "estimate", "std_error", "estimate_original",
                       "std_error_original", "selected", "significant")
SIMULATION_COLUMNS = ("table", "component", "coefficient", "metric", "value")
KM_COLUMNS = ("log_t", "log_H", "ci_lo", "ci_hi")


def read_survival_csv(path, time_col: str, status_col: str,
                      scale_covs: Sequence[str], shape_covs: Sequence[str]) -> SurvivalDataset:
    """Read a comma-separated file with a header row into a dataset.

    Only the referenced columns are parsed; any empty or non-numeric value
    in them raises ``ParseError`` naming the row (1-based, header = row 1)
    and column.
    """
    path = Path(path)
    if not path.is_file():
        raise InputNotFound(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file (header row required)") from None
        header = [h.strip() for h in header]
        wanted = [time_col, status_col, *scale_covs, *shape_covs]
        for col in wanted:
            if col not in header:
                raise ParseError(f"column {col!r} not found in header")
        index = {name: header.index(name) for name in dict.fromkeys(wanted)}
        values = {name: [] for name in index}
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            for name, j in index.items():
                raw = row[j].strip() if j < len(row) else ""
                try:
                    v = float(raw)
                except ValueError:
                    raise ParseError(
                        f"row {rownum}, column {name!r}: cannot parse {raw!r} as a number"
                    ) from None
                if not math.isfinite(v):
                    raise ParseError(f"row {rownum}, column {name!r}: non-finite value {raw!r}")
                values[name].append(v)
    if not values[time_col]:
        raise ParseError(f"{path}: no data rows")
    cols = {k: np.array(v) for k, v in values.items()}
    x = np.column_stack([cols[c] for c in scale_covs]) if scale_covs else None
    z = np.column_stack([cols[c] for c in shape_covs]) if shape_covs else None
    return SurvivalDataset.from_covariates(cols[time_col], cols[status_col], x, z)


def _clean(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), indent=2) + "\n"


def coefficient_table(fit, theta_orig, se_orig, scale_names, shape_names) -> list:
    """One record per coefficient, scale block first."""
    est = fit.theta_hat.flat
    se = fit.std_errors
    est_o = theta_orig.flat
    labels = ([("scale", n) for n in ["(Intercept)", *scale_names]]
              + [("shape", n) for n in ["(Intercept)", *shape_names]])
    out = []
    for j, (component, name) in enumerate(labels):
        s = None if se is None else float(se[j])
        s_o = None if se_orig is None else float(se_orig[j])
        selected = bool(fit.selected_mask[j])
        significant = bool(selected and s is not None and s > 0 and abs(est[j]) / s > 1.959964)
        out.append({
            "component": component,
            "name": name,
            "estimate": float(est[j]),
            "std_error": s,
            "estimate_original": float(est_o[j]),
            "std_error_original": s_o,
            "selected": selected,
            "significant": significant,
        })
    return out


def write_rows_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_value(row[c]) for c in columns])
    return buf.getvalue()


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ""
    return str(v)


def simulation_rows(report_dict: dict) -> list:
    rows = []
    for component in ("scale", "shape"):
        m = report_dict[component]
        for metric in ("C", "IC", "PT", "MSE"):
            rows.append({"table": "selection", "component": component, "coefficient": "",
                         "metric": metric, "value": m[metric]})
    for c in report_dict["coefficients"]:
        label = ("beta_" if c["component"] == "scale" else "alpha_") + str(c["index"])
        for metric, key in (("theta", "true_value"), ("theta_hat", "mean_estimate"),
                            ("SE", "SE"), ("SEE", "SEE"), ("CP", "CP")):
            rows.append({"table": "estimates", "component": c["component"],
                         "coefficient": label, "metric": metric, "value": c[key]})
    return rows


def write_text(path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def output_stem(path: Optional[str]) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".json", ".csv") else p
