"""CSV / JSON / SVG serialization of verification outcomes."""

from __future__ import annotations

import csv
import io as _stdio
import json

from .engine import Heuristic, RegionRecord, VerificationOutcome
from .geometry import Hyperrectangle
from .network import parse_property_json, property_to_dict
from .tolerance import ToleranceParams

SCHEMA_VERSION = 1
FILL = {"safe": "#2ca02c", "unsafe": "#d62728", "unknown": "#9e9e9e"}


def _g9(v: float) -> str:
    return f"{v:.9g}"


def _sort_key(rec: RegionRecord):
    flat = tuple(v for pair in zip(rec.box.lower, rec.box.upper) for v in pair)
    return (rec.kind, flat)


def sorted_records(outcome: VerificationOutcome) -> list[RegionRecord]:
    return sorted(outcome.records, key=_sort_key)


def write_regions_csv(outcome: VerificationOutcome) -> str:
    """One row per region: ``kind,depth,lb_0,ub_0,...,seed`` with 9 significant digits."""
    d = outcome.domain.dim
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["kind", "depth"]
    for i in range(d):
        header += [f"lb_{i}", f"ub_{i}"]
    w.writerow(header + ["seed"])
    for rec in sorted_records(outcome):
        row = [rec.kind, str(rec.depth)]
        for a, b in zip(rec.box.lower, rec.box.upper):
            row += [_g9(a), _g9(b)]
        w.writerow(row + [str(rec.seed)])
    return buf.getvalue()


def read_regions_csv(text: str) -> list[tuple[str, int, Hyperrectangle, int]]:
    """Parse CSV rows back into ``(kind, depth, box, seed)`` tuples."""
    rows = list(csv.reader(_stdio.StringIO(text)))
    if not rows or rows[0][:2] != ["kind", "depth"] or rows[0][-1] != "seed":
        raise ValueError("not a region CSV")
    d = (len(rows[0]) - 3) // 2
    out = []
    for row in rows[1:]:
        vals = [float(v) for v in row[2:2 + 2 * d]]
        out.append((row[0], int(row[1]), Hyperrectangle(vals[0::2], vals[1::2]), int(row[-1])))
    return out


def _record_dict(rec: RegionRecord) -> dict:
    return {
        "lower": list(rec.box.lower),
        "upper": list(rec.box.upper),
        "depth": rec.depth,
        "seed": rec.seed,
        "node": rec.node,
        "lo": rec.lo,
        "hi": rec.hi,
    }


def outcome_to_dict(outcome: VerificationOutcome) -> dict:
    p = outcome.params
    recs = sorted_records(outcome)
    return {
        "schema_version": SCHEMA_VERSION,
        "domain": {"lower": list(outcome.domain.lower), "upper": list(outcome.domain.upper)},
        "property": property_to_dict(outcome.prop) if outcome.prop is not None else None,
        "params": {
            "alpha": p.alpha,
            "rate": p.rate,
            "n": p.n,
            "m": p.m,
            "per_region_confidence": p.per_region_confidence,
            "joint_confidence": p.joint_confidence,
        },
        "heuristic": outcome.heuristic.value,
        "max_splits": outcome.max_splits,
        "master_seed": outcome.master_seed,
        "safe_rate": outcome.safe_rate,
        "unsafe_rate": outcome.unsafe_rate,
        "unknown_rate": outcome.unknown_rate,
        "region_count": outcome.region_count,
        "guarantee_holds": outcome.guarantee_holds,
        "wall_time": outcome.wall_time,
        "evaluated_regions": outcome.evaluated_regions,
        "regions": {
            kind: [_record_dict(r) for r in recs if r.kind == kind]
            for kind in ("safe", "unsafe", "unknown")
        },
    }


def write_outcome_json(outcome: VerificationOutcome) -> str:
    return json.dumps(outcome_to_dict(outcome), indent=1)


def read_outcome_json(text: str) -> VerificationOutcome:
    doc = json.loads(text)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported outcome schema {doc.get('schema_version')!r}")
    p = doc["params"]
    records = []
    for kind, items in doc["regions"].items():
        for r in items:
            records.append(
                RegionRecord(kind, Hyperrectangle(r["lower"], r["upper"]), r["depth"], r["seed"], r["node"], r["lo"], r["hi"])
            )
    records.sort(key=lambda r: r.node)
    prop = doc.get("property")
    return VerificationOutcome(
        domain=Hyperrectangle(doc["domain"]["lower"], doc["domain"]["upper"]),
        records=records,
        params=ToleranceParams(p["alpha"], p["rate"], p["n"], p["m"]),
        heuristic=Heuristic.parse(doc["heuristic"]),
        max_splits=doc["max_splits"],
        master_seed=doc["master_seed"],
        wall_time=doc["wall_time"],
        prop=parse_property_json(json.dumps(prop)) if prop is not None else None,
        evaluated_regions=doc.get("evaluated_regions", 0),
    )


def _px(v: float) -> str:
    s = f"{v:.4f}".rstrip("0").rstrip(".")
    return s if s not in ("", "-0") else "0"


def render_svg_2d(outcome: VerificationOutcome, width_px: int = 400, height_px: int = 400) -> str:
    """Draw the partition as filled rectangles, y axis pointing up."""
    dom = outcome.domain
    if dom.dim != 2:
        raise ValueError(f"can only plot 2-D domains, this one has {dom.dim} dimensions")
    (x0, y0), (x1, y1) = dom.lower, dom.upper
    sx = width_px / (x1 - x0)
    sy = height_px / (y1 - y0)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width_px}" height="{height_px}" '
        f'viewBox="0 0 {width_px} {height_px}">',
    ]
    for rec in sorted_records(outcome):
        (a0, a1), (b0, b1) = rec.box.lower, rec.box.upper
        lines.append(
            f'<rect x="{_px((a0 - x0) * sx)}" y="{_px((y1 - b1) * sy)}" '
            f'width="{_px((b0 - a0) * sx)}" height="{_px((b1 - a1) * sy)}" fill="{FILL[rec.kind]}"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
