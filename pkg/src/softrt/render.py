"""Schedule timeline rendering from event traces.

Execution segments are reconstructed from job_start events paired with the
nearest following stop (preemption, completion, abort or budget
exhaustion); a segment still open when the log ends is clamped to the
horizon.  A tick executed at or past the running job's deadline is late.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from .simcore import STOP_KINDS, Trace

# (task, start, end, deadline of the job that ran)
Segment = Tuple[int, int, int, Optional[int]]


def execution_segments(trace: Trace) -> List[Segment]:
    deadlines: Dict[Tuple[int, int], int] = {}
    open_seg: Dict[int, list] = {}
    done: List[Segment] = []
    for e in trace.events:
        if e.kind == "arrival":
            deadlines[(e.task, e.payload["job"])] = e.payload["deadline"]
        elif e.kind == "job_start":
            open_seg[e.task] = [e.tick, e.payload["job"]]
        elif e.kind in STOP_KINDS and e.task in open_seg:
            start, job = open_seg.pop(e.task)
            if e.tick > start:
                done.append((e.task, start, e.tick, deadlines.get((e.task, job))))
    for task, (start, job) in sorted(open_seg.items()):
        if trace.horizon > start:
            done.append((task, start, trace.horizon, deadlines.get((task, job))))
    done.sort(key=lambda s: (s[0], s[1]))
    return done


def render_ascii(trace: Trace) -> str:
    """One row per task, one column per tick.

    '#' on-time execution, '!' execution at or past the job's deadline,
    '|' a deadline boundary on an otherwise idle tick, '.' idle.
    """
    width = trace.horizon
    rows = {t: ["."] * width for t in trace.task_ids}
    for e in trace.events:
        if e.kind == "arrival":
            d = e.payload["deadline"]
            if 0 <= d < width:
                rows[e.task][d] = "|"
    for task, start, end, deadline in execution_segments(trace):
        for tick in range(start, min(end, width)):
            late = deadline is not None and tick >= deadline
            rows[task][tick] = "!" if late else "#"
    header = "tick  " + "".join(str(t % 10) for t in range(width))
    lines = [header]
    for t in trace.task_ids:
        lines.append("t%-4d %s" % (t, "".join(rows[t])))
    return "\n".join(lines) + "\n"


def render_svg(trace: Trace, cell: int = 12, row_h: int = 26) -> str:
    """Minimal SVG 1.1 timeline: grey blocks, late ticks red, deadline arrows."""
    width = trace.horizon
    tasks = trace.task_ids
    top, left = 18, 46
    W = left + width * cell + 10
    H = top + len(tasks) * row_h + 16
    idx = {t: i for i, t in enumerate(tasks)}
    out = ['<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
           'width="%d" height="%d">' % (W, H)]
    out.append('<style>text{font:10px sans-serif}</style>')
    for t in tasks:
        y = top + idx[t] * row_h
        out.append('<text x="4" y="%d">t%d</text>' % (y + row_h // 2 + 3, t))
        out.append('<line x1="%d" y1="%d" x2="%d" y2="%d" stroke="#999"/>'
                   % (left, y + row_h - 6, left + width * cell, y + row_h - 6))
    for task, start, end, deadline in execution_segments(trace):
        y = top + idx[task] * row_h
        for tick in range(start, min(end, width)):
            late = deadline is not None and tick >= deadline
            out.append('<rect x="%d" y="%d" width="%d" height="%d" fill="%s"/>'
                       % (left + tick * cell, y + 6, cell - 1, row_h - 14,
                          "#c62828" if late else "#9e9e9e"))
    for e in trace.events:
        y = top + idx[e.task] * row_h
        if e.kind == "arrival":
            x = left + e.tick * cell
            out.append('<line x1="%d" y1="%d" x2="%d" y2="%d" stroke="#1565c0"/>'
                       % (x, y + row_h - 6, x, y + 2))
            out.append('<path d="M %d %d l -3 5 l 6 0 z" fill="#1565c0"/>'
                       % (x, y + 2))
            d = e.payload["deadline"]
            if d <= width:
                xd = left + d * cell
                out.append('<line x1="%d" y1="%d" x2="%d" y2="%d" stroke="#2e7d32"/>'
                           % (xd, y + 2, xd, y + row_h - 6))
                out.append('<path d="M %d %d l -3 -5 l 6 0 z" fill="#2e7d32"/>'
                           % (xd, y + row_h - 6))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_trace(trace: Trace, format: str = "ascii") -> str:
    if format == "ascii":
        return render_ascii(trace)
    if format == "svg":
        return render_svg(trace)
    from .errors import ConfigError

    raise ConfigError("format: must be ascii or svg")
