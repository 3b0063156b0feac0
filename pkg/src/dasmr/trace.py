"""Trajectory traces (CSV) and their SVG rendering."""
from __future__ import annotations

import csv

from .environment import WorldConfig

TRACE_HEADER = ("step", "time", "x_c", "y_c", "theta_c", "v", "omega_c", "phi_l", "phi_r",
                "reward", "closest_distance", "x_d", "y_d")


class TraceError(ValueError):
    pass


def write_trace(path, rows, goal) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for row in rows:
            w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]] + [repr(float(goal[0])), repr(float(goal[1]))])


def read_trace(path) -> list[dict]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise TraceError(f"{path}: empty trace")
        if tuple(header) != TRACE_HEADER:
            raise TraceError(f"{path}: row 1: unexpected header {header}")
        records, last_step = [], None
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(TRACE_HEADER):
                raise TraceError(f"{path}: row {lineno}: expected {len(TRACE_HEADER)} fields, got {len(row)}")
            try:
                rec = {"step": int(row[0])}
                rec.update({k: float(v) for k, v in zip(TRACE_HEADER[1:], row[1:])})
            except ValueError as exc:
                raise TraceError(f"{path}: row {lineno}: {exc}") from exc
            if last_step is not None and rec["step"] <= last_step:
                raise TraceError(f"{path}: row {lineno}: step {rec['step']} not increasing")
            last_step = rec["step"]
            records.append(rec)
    if not records:
        raise TraceError(f"{path}: trace has no records")
    return records


def render_svg(records, world: WorldConfig = WorldConfig(), size: int = 480) -> str:
    """Workspace square, obstacle disc, goal dot and the center trajectory as one polyline."""
    h = world.workspace_half
    scale = size / (2 * h)

    def px(x, y):
        return f"{(x + h) * scale:.3f}", f"{(h - y) * scale:.3f}"

    ox, oy = px(*world.obstacle_center)
    gx, gy = px(records[-1]["x_d"], records[-1]["y_d"])
    pts = " ".join(",".join(px(r["x_c"], r["y_c"])) for r in records)
    d_th = world.d_th * scale
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white" stroke="black" stroke-width="2"/>',
        f'<circle cx="{ox}" cy="{oy}" r="{world.obstacle_radius * scale:.3f}" fill="#3b6fd8"/>',
        f'<circle cx="{gx}" cy="{gy}" r="{d_th:.3f}" fill="none" stroke="#d62728" stroke-dasharray="3,2"/>',
        f'<circle cx="{gx}" cy="{gy}" r="4" fill="#d62728"/>',
        f'<polyline points="{pts}" fill="none" stroke="#ff7f0e" stroke-width="2"/>',
        "</svg>",
        "",
    ])


def plot_trace(trace_path, out_path, world: WorldConfig = WorldConfig()) -> None:
    svg = render_svg(read_trace(trace_path), world)
    with open(out_path, "w", newline="\n") as f:
        f.write(svg)
