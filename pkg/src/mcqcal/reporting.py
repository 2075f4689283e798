"""Report emission: JSON/CSV serializers, a reliability-diagram SVG, atomic writes.

All output is deterministic: fixed decimal formatting, no timestamps, and
temp-file-plus-rename writes so a crashed run never leaves a torn file.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Sequence

from .errors import EmptyBins
from .metrics import CalibrationBin, HistogramBin

# Human-facing CSV keeps 6 significant digits; machine JSON keeps full
# precision through repr (up to 17 significant digits).
CSV_SIG_DIGITS = 6


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write UTF-8 text via a temp file in the target directory plus rename."""
    atomic_write_lines(path, [text])


def atomic_write_lines(path: str | Path, chunks) -> None:
    """Stream chunks to a temp file, then rename; never leaves a torn file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            for chunk in chunks:
                fh.write(chunk)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_num(value: float | None) -> str:
    if value is None:
        return ""
    return f"{value:.{CSV_SIG_DIGITS}g}"


def bins_to_csv(bins: Sequence[CalibrationBin]) -> str:
    out = io.StringIO()
    out.write("bin_lo,bin_hi,count,accuracy,mean_confidence\n")
    for b in bins:
        out.write(
            f"{_csv_num(b.lo)},{_csv_num(b.hi)},{b.count},"
            f"{_csv_num(b.accuracy)},{_csv_num(b.mean_confidence)}\n"
        )
    return out.getvalue()


def decomposition_rows_to_csv(rows: Sequence[dict]) -> str:
    out = io.StringIO()
    out.write("item_id,p_format,source,answer_confidence,answer_pred_index,label_index\n")
    for r in rows:
        label = "" if r["label_index"] is None else r["label_index"]
        out.write(
            f"{r['item_id']},{_csv_num(r['p_format'])},{r['source']},"
            f"{_csv_num(r['answer_confidence'])},{r['answer_pred_index']},{label}\n"
        )
    return out.getvalue()


def report_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# Reliability-diagram SVG

_W, _H = 420, 520
_PLOT = {"x": 60, "y": 20, "w": 320, "h": 320}
_HIST = {"x": 60, "y": 380, "w": 320, "h": 100}


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".") if v == round(v, 2) else f"{v:.4f}"


def reliability_svg(
    bins: Sequence[CalibrationBin],
    histogram: Sequence[HistogramBin] | None = None,
    title: str = "Reliability diagram",
) -> str:
    """Self-contained SVG: diagonal reference, accuracy-vs-confidence bars,
    and an optional confidence-histogram strip underneath. Byte-deterministic."""
    if not bins:
        raise EmptyBins("no bins to draw")

    p = _PLOT
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{p["x"]}" y="14" font-family="monospace" font-size="12">{title}</text>',
        f'<rect x="{p["x"]}" y="{p["y"]}" width="{p["w"]}" height="{p["h"]}" '
        f'fill="none" stroke="black"/>',
        # Diagonal: perfect calibration.
        f'<line x1="{p["x"]}" y1="{p["y"] + p["h"]}" x2="{p["x"] + p["w"]}" '
        f'y2="{p["y"]}" stroke="gray" stroke-dasharray="4 3"/>',
    ]

    def sx(v: float) -> float:
        return p["x"] + v * p["w"]

    def sy(v: float) -> float:
        return p["y"] + (1.0 - v) * p["h"]

    for b in bins:
        if b.count == 0 or b.accuracy is None:
            continue
        x0, x1 = sx(b.lo), sx(b.hi)
        width = max(x1 - x0, 1.5)
        y_acc = sy(b.accuracy)
        parts.append(
            f'<rect x="{x0:.2f}" y="{y_acc:.2f}" width="{width:.2f}" '
            f'height="{(p["y"] + p["h"] - y_acc):.2f}" fill="steelblue" '
            f'fill-opacity="0.7" stroke="black" stroke-width="0.5"/>'
        )
        # Mean-confidence tick inside the bar.
        cx = sx(b.mean_confidence)
        parts.append(
            f'<line x1="{cx:.2f}" y1="{p["y"] + p["h"]}" x2="{cx:.2f}" '
            f'y2="{y_acc:.2f}" stroke="firebrick" stroke-width="1"/>'
        )

    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(
            f'<text x="{sx(tick):.2f}" y="{p["y"] + p["h"] + 14}" font-family="monospace" '
            f'font-size="10" text-anchor="middle">{_fmt(tick)}</text>'
        )
        parts.append(
            f'<text x="{p["x"] - 6}" y="{sy(tick) + 3:.2f}" font-family="monospace" '
            f'font-size="10" text-anchor="end">{_fmt(tick)}</text>'
        )
    parts.append(
        f'<text x="{p["x"] + p["w"] / 2}" y="{p["y"] + p["h"] + 30}" '
        f'font-family="monospace" font-size="11" text-anchor="middle">confidence</text>'
    )
    parts.append(
        f'<text x="14" y="{p["y"] + p["h"] / 2}" font-family="monospace" font-size="11" '
        f'text-anchor="middle" transform="rotate(-90 14 {p["y"] + p["h"] / 2})">accuracy</text>'
    )

    if histogram:
        h = _HIST
        peak = max(hb.count for hb in histogram) or 1
        parts.append(
            f'<rect x="{h["x"]}" y="{h["y"]}" width="{h["w"]}" height="{h["h"]}" '
            f'fill="none" stroke="black"/>'
        )
        for hb in histogram:
            if hb.count == 0:
                continue
            x0 = h["x"] + hb.lo * h["w"]
            width = (hb.hi - hb.lo) * h["w"]
            bar_h = h["h"] * hb.count / peak
            parts.append(
                f'<rect x="{x0:.2f}" y="{(h["y"] + h["h"] - bar_h):.2f}" '
                f'width="{width:.2f}" height="{bar_h:.2f}" fill="darkgray" '
                f'stroke="black" stroke-width="0.5"/>'
            )
        parts.append(
            f'<text x="{h["x"] + h["w"] / 2}" y="{h["y"] + h["h"] + 16}" '
            f'font-family="monospace" font-size="11" text-anchor="middle">count</text>'
        )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
