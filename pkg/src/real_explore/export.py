"""Run artifacts on disk: map, graph, poses, scores, loop-closing events, manifest, overview plot."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from .config import MissionConfig
from .mission import MissionLogs, MissionReport
from .world_sim import read_pose_log, rmse_from_log, write_pose_log

MANIFEST_SCHEMA = "real_explore.manifest/1"
SCHEMAS = {
    "map.csv": "map_csv/1",
    "graph.json": "graph_json/1",
    "pose.csv": "pose_csv/1",
    "scores.json": "scores_json/1",
    "lc_events.csv": "lc_events_csv/1",
    "transitions.csv": "transitions_csv/1",
    "report.json": "report_json/1",
    "summary.csv": "summary_csv/1",
    "config.cfg": "config_kv/1",
    "overview.svg": "overview_svg/1",
}
LC_COLUMNS = ("t", "node", "target", "likelihood", "gap", "dyaw", "path_len")


def report_to_dict(report: MissionReport) -> dict:
    d = dataclasses.asdict(report)
    d["outcome"] = report.outcome.value
    for k in ("t_exp", "t_end"):
        if math.isinf(d[k]):
            d[k] = "inf"
    return d


def _write_csv(path: Path, header: tuple[str, ...], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def export_viz(
    report: MissionReport, logs: MissionLogs, out_dir: str | Path, config: MissionConfig | None = None
) -> dict:
    """Write every artifact of a run and a manifest naming each file with its schema version."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: list[str] = []

    logs.vmap.export_csv(out / "map.csv")
    files.append("map.csv")
    logs.graph.export_json(out / "graph.json")
    files.append("graph.json")
    write_pose_log(logs.poses, out / "pose.csv")
    files.append("pose.csv")
    if logs.scores:
        (out / "scores.json").write_text("[\n" + ",\n".join(logs.scores) + "\n]\n")
        files.append("scores.json")
    _write_csv(out / "lc_events.csv", LC_COLUMNS, [[repr(float(v)) if isinstance(v, float) else v for v in e] for e in logs.lc_events])
    files.append("lc_events.csv")
    _write_csv(
        out / "transitions.csv",
        ("t", "from", "to", "reason"),
        [(f"{tr.t:.4f}", tr.src.value, tr.dst.value, tr.reason) for tr in logs.transitions],
    )
    files.append("transitions.csv")
    (out / "report.json").write_text(json.dumps(report_to_dict(report), indent=1, sort_keys=True))
    files.append("report.json")
    row = report.summary_row()
    _write_csv(out / "summary.csv", tuple(row), [tuple(row.values())])
    files.append("summary.csv")
    if config is not None:
        (out / "config.cfg").write_text(config.to_text())
        files.append("config.cfg")

    manifest = {
        "schema": MANIFEST_SCHEMA,
        "world": report.world,
        "seed": report.seed,
        "dt": logs.dt,
        "bounds": [logs.world.bounds.lo.tolist(), logs.world.bounds.hi.tolist()],
        "obstacles": [[b.lo.tolist(), b.hi.tolist()] for b in logs.world.obstacles],
        "files": [{"name": f, "schema": SCHEMAS[f]} for f in files],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return manifest


def load_manifest(run_dir: str | Path) -> dict:
    run = Path(run_dir)
    manifest = json.loads((run / "manifest.json").read_text())
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise ValueError(f"unsupported manifest schema {manifest.get('schema')!r}")
    for f in manifest["files"]:
        if not (run / f["name"]).is_file():
            raise FileNotFoundError(f"manifest lists missing file {f['name']}")
    return manifest


def replay_rmse(run_dir: str | Path) -> float:
    return rmse_from_log(read_pose_log(Path(run_dir) / "pose.csv"))


def render_overview(run_dir: str | Path, scale: float = 20.0) -> Path:
    """Top-down SVG: obstacles, occupied cells, graph, true and estimated paths."""
    run = Path(run_dir)
    manifest = load_manifest(run)
    lo, hi = (np.array(v) for v in manifest["bounds"])
    w, h = (hi[:2] - lo[:2]) * scale

    def xy(x: float, y: float) -> str:
        return f"{(x - lo[0]) * scale:.1f},{(hi[1] - y) * scale:.1f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" height="{h:.0f}" viewBox="0 0 {w:.0f} {h:.0f}">',
        f'<rect width="{w:.0f}" height="{h:.0f}" fill="white" stroke="black"/>',
    ]
    for blo, bhi in manifest["obstacles"]:
        x0, y0 = xy(blo[0], bhi[1]).split(",")
        parts.append(
            f'<rect x="{x0}" y="{y0}" width="{(bhi[0] - blo[0]) * scale:.1f}" '
            f'height="{(bhi[1] - blo[1]) * scale:.1f}" fill="#bbbbbb"/>'
        )
    with open(run / "map.csv") as fh:
        occ = {(r["x"], r["y"]) for r in csv.DictReader(fh) if r["state"] == "occupied"}
    for x, y in sorted(occ):
        parts.append(f'<circle cx="{xy(float(x), float(y)).split(",")[0]}" cy="{xy(float(x), float(y)).split(",")[1]}" r="1.5" fill="#444"/>')
    graph = json.loads((run / "graph.json").read_text())
    pos = {n["id"]: (n["x"], n["y"]) for n in graph["nodes"]}
    for e in graph["edges"]:
        parts.append(f'<polyline points="{xy(*pos[e["a"]])} {xy(*pos[e["b"]])}" stroke="#9cf" stroke-width="0.5"/>')
    rows = read_pose_log(run / "pose.csv")
    step = max(1, len(rows) // 4000)
    true_pts = " ".join(xy(r[1], r[2]) for r in rows[::step])
    est_pts = " ".join(xy(r[5], r[6]) for r in rows[::step])
    parts.append(f'<polyline points="{est_pts}" fill="none" stroke="#e55" stroke-width="1"/>')
    parts.append(f'<polyline points="{true_pts}" fill="none" stroke="#252" stroke-width="1.2"/>')
    parts.append("</svg>")
    path = run / "overview.svg"
    path.write_text("\n".join(parts) + "\n")
    if not any(f["name"] == "overview.svg" for f in manifest["files"]):
        manifest["files"].append({"name": "overview.svg", "schema": SCHEMAS["overview.svg"]})
        (run / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return path
