"""CSV matrices, model documents and SVG charts.

CSV dialect: comma separated, first row is a header, ``.`` as decimal point.
A leading column of row identifiers is detected when any of its data cells is
not a number.  Empty cells and ``NA``/``NaN`` are read as missing (``nan``).
Numbers are written with 17 significant digits, which round-trips doubles.
"""

from __future__ import annotations

import csv
import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, fields
from html import escape

import numpy as np

from .cca import CcaModel
from .errors import ValidationError, WccaError

MISSING = {"", "na", "nan", "null"}
MODEL_FORMAT = "wcca-model"
MODEL_VERSION = 1


class CsvParseError(ValidationError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = "" if line is None else f"line {line}: "
        prefix = "" if path is None else f"{path}: "
        super().__init__(f"{prefix}{where}{message}")


class ModelFormatError(WccaError):
    """A model file cannot be read or is inconsistent."""


@dataclass(frozen=True)
class TabularMatrix:
    column_names: list
    values: np.ndarray
    row_ids: list | None = None

    @property
    def shape(self):
        return self.values.shape


def _parse_number(cell):
    s = cell.strip()
    if s.lower() in MISSING:
        return math.nan
    return float(s)


def _is_number(cell):
    try:
        _parse_number(cell)
    except ValueError:
        return False
    return True


def read_matrix(path, row_ids="auto"):
    """Read a numeric CSV file into a :class:`TabularMatrix`.

    ``row_ids`` is ``"auto"``, ``True`` (first column holds identifiers) or
    ``False``.  Raises :class:`CsvParseError` with the 1-based line number of
    the offending row.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = []
        for rec in reader:
            if not rec or all(not c.strip() for c in rec):
                continue
            rows.append((reader.line_num, rec))
    if not rows:
        raise CsvParseError("file is empty", path=path)
    (_, header), body = rows[0], rows[1:]
    if not body:
        raise CsvParseError("no data rows", line=rows[0][0], path=path)
    width = len(header)
    for line, rec in body:
        if len(rec) != width:
            raise CsvParseError(
                f"expected {width} fields, found {len(rec)}", line=line, path=path
            )
    if row_ids == "auto":
        row_ids = any(not _is_number(rec[0]) for _, rec in body)
    start = 1 if row_ids else 0
    values = np.empty((len(body), width - start))
    for i, (line, rec) in enumerate(body):
        for j, cell in enumerate(rec[start:]):
            try:
                values[i, j] = _parse_number(cell)
            except ValueError:
                raise CsvParseError(
                    f"non-numeric value {cell!r} in column {header[j + start]!r}",
                    line=line, path=path,
                ) from None
    return TabularMatrix(
        column_names=[h.strip() for h in header[start:]],
        values=values,
        row_ids=[rec[0] for _, rec in body] if row_ids else None,
    )


def format_number(v):
    return "NA" if math.isnan(v) else format(float(v), ".17g")


def write_matrix(fh, matrix, id_header=""):
    """Write a :class:`TabularMatrix` to an open text file."""
    w = csv.writer(fh, lineterminator="\n")
    ids = matrix.row_ids
    w.writerow(([id_header] if ids is not None else []) + list(matrix.column_names))
    for i, row in enumerate(matrix.values):
        cells = [format_number(v) for v in row]
        w.writerow(([ids[i]] if ids is not None else []) + cells)


# -- model documents ------------------------------------------------------

_ARRAY_FIELDS = [
    f.name for f in fields(CcaModel)
    if f.name not in ("scaled", "shrink_lambda", "n_samples")
]


def model_to_dict(model):
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "p": model.p,
        "q": model.q,
        "m": model.m,
        "n_samples": int(model.n_samples),
        "scaled": bool(model.scaled),
        "shrink_lambda": None if model.shrink_lambda is None else float(model.shrink_lambda),
    }
    for name in _ARRAY_FIELDS:
        doc[name] = np.asarray(getattr(model, name), dtype=float).tolist()
    return doc


def model_from_dict(doc):
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a wcca model document")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {doc.get('version')!r}")
    try:
        p, q, m = int(doc["p"]), int(doc["q"]), int(doc["m"])
        arrays = {name: np.asarray(doc[name], dtype=float) for name in _ARRAY_FIELDS}
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from None
    expected = {
        "lambdas": (m,),
        "rotation_x": (m, p), "rotation_y": (m, q),
        "directions_x": (m, p), "directions_y": (m, q),
        "loadings_x": (m, p), "loadings_y": (m, q),
        "cor_loadings_x": (m, p), "cor_loadings_y": (m, q),
        "mean_x": (p,), "mean_y": (q,), "sd_x": (p,), "sd_y": (q,),
    }
    for name, shape in expected.items():
        a = arrays[name]
        if m == 0 and a.size == 0:
            arrays[name] = a.reshape(shape)
        elif a.shape != shape:
            raise ModelFormatError(f"{name} has shape {a.shape}, expected {shape}")
    lam = doc.get("shrink_lambda")
    return CcaModel(
        **arrays,
        scaled=bool(doc.get("scaled", True)),
        shrink_lambda=None if lam is None else float(lam),
        n_samples=int(doc.get("n_samples", 0)),
    )


def dumps_model(model):
    return json.dumps(model_to_dict(model), indent=1) + "\n"


def save_model(model, path):
    with open(path, "w") as fh:
        fh.write(dumps_model(model))


def load_model(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path} is not valid JSON: {exc}") from None
    return model_from_dict(doc)


# -- SVG charts -----------------------------------------------------------

def _svg(width, height, body, title):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n<title>{escape(title)}</title>\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )


def lambdas_svg(lambdas, title="Canonical correlations"):
    """Signed bar chart of canonical correlations.

    Each bar is a ``<rect class="bar">`` carrying ``data-index`` and the exact
    value in ``data-value``; the zero axis is ``<line class="zero-axis">``.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    width, height, pad, bar = 60 + 24 * max(len(lambdas), 1), 300, 30, 18
    mid = height / 2
    scale = (height / 2 - pad)
    body = [
        f'<line class="zero-axis" x1="{pad}" y1="{mid}" x2="{width - pad / 2}" '
        f'y2="{mid}" stroke="black"/>',
        f'<text x="4" y="{pad}" font-size="10">1</text>',
        f'<text x="4" y="{height - pad}" font-size="10">-1</text>',
    ]
    for i, v in enumerate(lambdas):
        h = abs(v) * scale
        y = mid - h if v >= 0 else mid
        fill = "steelblue" if v >= 0 else "firebrick"
        body.append(
            f'<rect class="bar" data-index="{i + 1}" data-value="{format_number(v)}" '
            f'x="{pad + 6 + 24 * i}" y="{y:.3f}" width="{bar}" height="{h:.3f}" '
            f'fill="{fill}"/>'
        )
    return _svg(width, height, body, title)


def read_svg_values(svg_text, cls="bar"):
    """Recover ``data-value`` annotations of elements with the given class."""
    root = ET.fromstring(svg_text)
    out = []
    for el in root.iter():
        if el.get("class") == cls and el.get("data-value") is not None:
            out.append(float(el.get("data-value")))
    return out


def simulation_svg(report, title="Correctly identified signs"):
    """Line chart of proportion correct against n, one line per lambda.

    Points are ``<circle class="point">`` with ``data-n``, ``data-lambda`` and
    ``data-value`` annotations.
    """
    cfg = report.config
    ns = list(cfg.n_grid)
    width, height, pad = 520, 340, 45
    xs = np.log(ns) if len(ns) > 1 else np.zeros(1)
    span = (xs.max() - xs.min()) or 1.0

    def px(i):
        return pad + (xs[i] - xs.min()) / span * (width - 2 * pad)

    def py(v):
        return height - pad - v * (height - 2 * pad)

    body = [
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 8}" font-size="11">sample size n</text>',
        f'<text x="4" y="{pad - 10}" font-size="11">proportion correct</text>',
    ]
    for i, n in enumerate(ns):
        body.append(f'<text x="{px(i):.1f}" y="{height - pad + 14}" font-size="10">{n}</text>')
    for v in (0.0, 0.5, 1.0):
        body.append(f'<text x="{pad - 28}" y="{py(v):.1f}" font-size="10">{v}</text>')
    for k, lam in enumerate(cfg.lambda_grid):
        shade = int(40 + 180 * k / max(len(cfg.lambda_grid) - 1, 1))
        colour = f"rgb({255 - shade},{60},{shade})"
        vals = [report.cell(n, lam).proportion_correct for n in ns]
        pts = " ".join(f"{px(i):.2f},{py(v):.2f}" for i, v in enumerate(vals) if not math.isnan(v))
        body.append(
            f'<polyline class="series" data-lambda="{lam!r}" points="{pts}" '
            f'fill="none" stroke="{colour}"/>'
        )
        for i, v in enumerate(vals):
            if math.isnan(v):
                continue
            body.append(
                f'<circle class="point" data-n="{ns[i]}" data-lambda="{lam!r}" '
                f'data-value="{format_number(v)}" cx="{px(i):.2f}" cy="{py(v):.2f}" '
                f'r="2.5" fill="{colour}"/>'
            )
    return _svg(width, height, body, title)
