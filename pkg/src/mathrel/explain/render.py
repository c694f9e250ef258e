"""Text and bar plots of attributions, as self-contained HTML or 24-bit terminal output."""

from __future__ import annotations

import html
from typing import Mapping, Sequence

import numpy as np

from ..data import RelationLabel
from .aggregate import ClassBarSummary
from .shapley import Attribution

RED = (230, 38, 38)
BLUE = (30, 110, 230)
WHITE = (255, 255, 255)
BAR_WIDTH = 40  # characters in the terminal, x10 px in HTML


def _tint(value: float, scale: float) -> tuple[int, int, int] | None:
    if value == 0 or scale == 0:
        return None
    a = min(abs(value) / scale, 1.0)
    base = RED if value > 0 else BLUE
    return tuple(int(round(w + (c - w) * a)) for w, c in zip(WHITE, base))


def _header(att: Attribution) -> str:
    name = att.target_class.name if att.target_class is not None else "x"
    return f"base={att.base_value:.4f} f_{name}={att.f_full:.4f}"


def _pieces(att: Attribution):
    """Yield ``(surface, index)`` pairs; ``index`` is None for text between tokens."""
    if att.text and len(att.spans) == len(att.tokens):
        pos = 0
        for i, (start, end) in enumerate(att.spans):
            if start > pos:
                yield att.text[pos:start], None
            yield att.text[start:end], i
            pos = end
        if pos < len(att.text):
            yield att.text[pos:], None
    else:
        for i, tok in enumerate(att.tokens):
            if i:
                yield " ", None
            yield tok, i


def _scale(att: Attribution) -> float:
    return float(np.max(np.abs(att.values))) if len(att.values) else 0.0


def _bar_rows(summary: ClassBarSummary):
    return [*summary.pairs, ("sum of other features", summary.residual)]


def _section_items(attributions, summaries):
    for label in RelationLabel:
        atts = [a for a in attributions if a.target_class is label]
        bar = (summaries or {}).get(label)
        if atts or bar is not None:
            yield label, atts, bar


# -- HTML -------------------------------------------------------------------

_STYLE = """
body { font-family: sans-serif; margin: 2em; color: #222; }
h2 { border-bottom: 1px solid #ccc; padding-bottom: 0.2em; }
.row { margin: 0.6em 0; }
.head { font-family: monospace; color: #555; font-size: 0.9em; }
.tok { padding: 1px 2px; border-radius: 3px; }
.bars { font-family: monospace; font-size: 0.9em; }
.bar-row { display: flex; align-items: center; margin: 2px 0; }
.bar-label { width: 14em; text-align: right; padding-right: 0.6em; }
.bar { display: inline-block; height: 0.9em; background: rgb(230,38,38); }
.bar.other { background: #999; }
.bar-value { padding-left: 0.5em; }
""".strip()


def _html_row(att: Attribution) -> str:
    scale = _scale(att)
    parts = []
    for surface, i in _pieces(att):
        if i is None:
            parts.append(html.escape(surface))
            continue
        v = float(att.values[i])
        rgb = _tint(v, scale)
        title = f"{att.tokens[i]}: {v:+.4f}"
        if rgb is None:
            parts.append(f'<span class="tok zero" title="{html.escape(title)}">{html.escape(surface)}</span>')
        else:
            kind = "pos" if v > 0 else "neg"
            parts.append(f'<span class="tok {kind}" style="background:rgb{rgb}" '
                         f'title="{html.escape(title)}">{html.escape(surface)}</span>')
    return f'<div class="row"><div class="head">{_header(att)}</div><div class="text">{"".join(parts)}</div></div>'


def _html_bars(summary: ClassBarSummary) -> str:
    rows = _bar_rows(summary)
    top = max((v for _, v in rows), default=0.0) or 1.0
    out = [f'<div class="bars"><div class="head">mean |SHAP value| over {summary.n_attributions} texts</div>']
    for j, (tok, v) in enumerate(rows):
        other = " other" if j == len(rows) - 1 else ""
        out.append(
            f'<div class="bar-row"><span class="bar-label">{html.escape(tok)}</span>'
            f'<span class="bar{other}" style="width:{v / top * BAR_WIDTH * 10:.1f}px"></span>'
            f'<span class="bar-value">{v:.4f}</span></div>'
        )
    out.append("</div>")
    return "\n".join(out)


def _render_html(attributions, summaries, title) -> str:
    body = []
    for label, atts, bar in _section_items(attributions, summaries):
        body.append(f'<section id="{label.name}"><h2>{html.escape(label.display)}</h2>')
        if atts:
            body.append("<h3>Text plot</h3>")
            body.extend(_html_row(a) for a in atts)
        if bar is not None:
            body.append("<h3>Mean feature importance</h3>")
            body.append(_html_bars(bar))
        body.append("</section>")
    return (
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
        f"<title>{html.escape(title)}</title>\n<style>\n{_STYLE}\n</style>\n</head>\n<body>\n"
        f"<h1>{html.escape(title)}</h1>\n" + "\n".join(body) + "\n</body>\n</html>\n"
    )


# -- terminal ---------------------------------------------------------------

def _ansi_row(att: Attribution, color: bool) -> str:
    scale = _scale(att)
    parts = []
    for surface, i in _pieces(att):
        if i is None:
            parts.append(surface)
            continue
        v = float(att.values[i])
        rgb = _tint(v, scale)
        if color:
            parts.append(surface if rgb is None else f"\x1b[48;2;{rgb[0]};{rgb[1]};{rgb[2]}m\x1b[38;2;0;0;0m{surface}\x1b[0m")
        else:
            parts.append(surface if rgb is None else f"{surface}[{v:+.3f}]")
    return f"  {_header(att)}\n    {''.join(parts)}"


def _ansi_bars(summary: ClassBarSummary, color: bool) -> str:
    rows = _bar_rows(summary)
    top = max((v for _, v in rows), default=0.0) or 1.0
    width = max(len(t) for t, _ in rows)
    lines = [f"  mean |SHAP value| over {summary.n_attributions} texts"]
    for tok, v in rows:
        bar = "#" * int(round(v / top * BAR_WIDTH))
        if color and bar:
            bar = f"\x1b[38;2;{RED[0]};{RED[1]};{RED[2]}m{bar}\x1b[0m"
        lines.append(f"  {tok:>{width}} {bar} {v:.4f}")
    return "\n".join(lines)


def _render_terminal(attributions, summaries, title, color: bool) -> str:
    out = [title, "=" * len(title)]
    for label, atts, bar in _section_items(attributions, summaries):
        out.append("")
        out.append(f"[{label.display}]")
        out.extend(_ansi_row(a, color) for a in atts)
        if bar is not None:
            out.append(_ansi_bars(bar, color))
    return "\n".join(out) + "\n"


def render_reports(
    attributions: Sequence[Attribution] = (),
    summaries: Mapping[RelationLabel, ClassBarSummary] | None = None,
    format: str = "html",
    color: bool = True,
    title: str = "Token attributions",
) -> str:
    """One section per class: a text plot per attribution, then the bar summary.

    Tokens are tinted red (positive) or blue (negative) with intensity
    proportional to |value| over the largest |value| of their row.
    """
    if format == "html":
        return _render_html(attributions, summaries, title)
    if format == "terminal":
        return _render_terminal(attributions, summaries, title, color)
    raise ValueError(f"unknown format {format!r}")
