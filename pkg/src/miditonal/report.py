"""Analysis pipeline and its JSON / CSV / SVG outputs."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from xml.sax.saxutils import escape

import numpy as np

from . import __version__
from .midi_io import Diagnostics, MidiFile, TimeSigMap, build_note_list
from .spiral import DEFAULT_PARAMS, SpiralParams
from .tension import (
    DEFAULT_WINDOW_BEATS,
    TensionSeries,
    compute_tension,
    detect_key_changes,
    rekeyed_series,
)
from .tonal import KeyEstimate, analyse_key

SCHEMA_VERSION = 1


@dataclass
class AnalysisReport:
    input_path: str
    key: KeyEstimate
    tension: TensionSeries
    timesig: TimeSigMap
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    tool_version: str = __version__

    @property
    def key_changes(self):
        return self.tension.key_changes

    def as_dict(self) -> dict:
        t = self.tension
        out = {
            "schema_version": SCHEMA_VERSION,
            "tool_version": self.tool_version,
            "input": self.input_path,
            "key": self.key.as_dict(),
            "window_beats": t.window_beats,
            "n_bars": int(t.bars.size),
            "bars": t.bars.tolist(),
            "per_bar": {
                "diameter": t.bar_diameter.tolist(),
                "momentum": t.bar_momentum.tolist(),
                "strain": t.bar_strain.tolist(),
            },
            "key_changes": [{"bar": int(b), "beat": float(beat)} for b, beat in t.key_changes],
            "diagnostics": self.diagnostics.as_dict(),
        }
        if t.segment_keys:
            out["segment_keys"] = [
                {"start_beat": float(s), "tonic_name": k.tonic_name, "mode": k.mode.value} for s, k in t.segment_keys
            ]
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=False) + "\n"


def analyse_midi(
    midi: MidiFile,
    input_path: str = "",
    window_beats: float = DEFAULT_WINDOW_BEATS,
    params: SpiralParams = DEFAULT_PARAMS,
    rekey: bool = False,
    direction: str = "backward",
) -> AnalysisReport:
    """parse -> spell -> key -> tension -> key changes (-> optional re-keying)."""
    diag = Diagnostics()
    notes, timesig = build_note_list(midi, diag)
    diag.drum_notes = sum(1 for n in notes if n.is_drum)
    spelled, _, key = analyse_key(notes, params)
    series = compute_tension(spelled, key, window_beats, timesig, params)
    changes = detect_key_changes(series, timesig, direction=direction)
    series = replace(series, key_changes=tuple(changes))
    if rekey and changes:
        series = rekeyed_series(spelled, changes, series, timesig, params)
    return AnalysisReport(input_path, key, series, timesig, diag)


def tension_csv(series: TensionSeries, timesig: TimeSigMap) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["window_start_beat", "bar", "diameter", "momentum", "strain"])
    for start, d, m, s in series.windows:
        writer.writerow([repr(float(start)), timesig.bar_of(start), repr(d), repr(m), repr(s)])
    return buf.getvalue()


def strain_svg(series: TensionSeries, width: int = 800, height: int = 300, title: str = "Tensile strain per bar") -> str:
    """Self-contained SVG line plot of per-bar strain with key-change markers."""
    margin_l, margin_r, margin_t, margin_b = 56, 16, 28, 44
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b
    bars = series.bars
    values = series.bar_strain
    n = bars.size
    vmax = float(values.max()) if n and values.max() > 0 else 1.0
    first = int(bars[0]) if n else 1
    last = int(bars[-1]) if n else 1
    span = max(last - first, 1)

    def x(bar):
        return margin_l + (bar - first) / span * plot_w

    def y(v):
        return margin_t + plot_h - v / vmax * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-family="sans-serif" font-size="13">{escape(title)}</text>',
        f'<line x1="{margin_l}" y1="{margin_t + plot_h}" x2="{margin_l + plot_w}" y2="{margin_t + plot_h}" stroke="black"/>',
        f'<line x1="{margin_l}" y1="{margin_t}" x2="{margin_l}" y2="{margin_t + plot_h}" stroke="black"/>',
    ]
    step = max(1, int(np.ceil(span / 10)))
    for bar in range(first, last + 1, step):
        parts.append(
            f'<text x="{x(bar):.1f}" y="{margin_t + plot_h + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{bar}</text>'
        )
    for frac in (0.0, 0.5, 1.0):
        v = vmax * frac
        parts.append(
            f'<text x="{margin_l - 6}" y="{y(v) + 3:.1f}" text-anchor="end" font-family="sans-serif" font-size="10">{v:.2f}</text>'
        )
    parts.append(
        f'<text x="{margin_l + plot_w / 2:.1f}" y="{height - 8}" text-anchor="middle" font-family="sans-serif" font-size="11">bar</text>'
    )
    parts.append(
        f'<text x="14" y="{margin_t + plot_h / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="11" '
        f'transform="rotate(-90 14 {margin_t + plot_h / 2:.1f})">tensile strain</text>'
    )
    if n:
        pts = " ".join(f"{x(int(b)):.2f},{y(float(v)):.2f}" for b, v in zip(bars, values))
        parts.append(f'<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{pts}"/>')
    for bar, beat in series.key_changes:
        parts.append(
            f'<line class="key-change" data-bar="{bar}" x1="{x(bar):.2f}" y1="{margin_t}" x2="{x(bar):.2f}" '
            f'y2="{margin_t + plot_h}" stroke="firebrick" stroke-dasharray="4 3"/>'
        )
        parts.append(
            f'<text x="{x(bar) + 3:.2f}" y="{margin_t + 10}" font-family="sans-serif" font-size="10" fill="firebrick">key change (bar {bar})</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
