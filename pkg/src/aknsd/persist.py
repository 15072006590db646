"""Persistence: versioned state documents, tabular export.

State round-trips are bit-exact in rational mode: every scalar serialises to
a "p/q" string in lowest terms and floats to their shortest round-tripping
decimal form.
"""

from __future__ import annotations

import csv
import json

from . import scalars
from .errors import SchemaError
from .hierarchy import AknsData, Dressing, HierarchyState
from .lattice import Window, lattice_from_json, lattice_to_json

STATE_VERSION = 1
_STATE_KEYS = {"version", "mode", "a", "window", "depth", "u", "dressing",
               "conventions", "times"}


def state_to_json(state: HierarchyState) -> dict:
    return {
        "version": STATE_VERSION,
        "mode": state.mode,
        "a": [scalars.format_scalar(x) for x in state.data.a],
        "window": {"n_min": state.window.n_min, "n_max": state.window.n_max,
                   "halo": state.window.halo},
        "depth": state.depth,
        "u": lattice_to_json(state.U),
        "dressing": [lattice_to_json(w) for w in state.dressing.ws],
        "conventions": state.dressing.conventions,
        "times": {f"{k},{a}": scalars.format_scalar(v)
                  for (k, a), v in state.times.items()},
    }


def state_from_json(doc: dict) -> HierarchyState:
    if not isinstance(doc, dict):
        raise SchemaError("state document must be a JSON object")
    version = doc.get("version")
    if version != STATE_VERSION:
        raise SchemaError(f"unsupported state version {version!r}")
    missing = _STATE_KEYS - set(doc)
    if missing:
        raise SchemaError(f"state document missing keys: {sorted(missing)}")
    mode = doc["mode"]
    a = tuple(scalars.parse_scalar(x, mode) for x in doc["a"])
    data = AknsData(len(a), a, mode)
    window = Window(**doc["window"])
    u = lattice_from_json(doc["u"])
    ws = tuple(lattice_from_json(w) for w in doc["dressing"])
    dressing = Dressing(doc["depth"], ws, doc["conventions"])
    times = {}
    for key, v in doc["times"].items():
        k, alpha = key.split(",")
        times[(int(k), int(alpha))] = scalars.parse_scalar(v, mode)
    return HierarchyState(data, u, window, doc["depth"], dressing, times)


def save_state(state: HierarchyState, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(state_to_json(state), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_state(path: str) -> HierarchyState:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"state file is not valid JSON: {exc}") from None
    return state_from_json(doc)


# -- tabular export -------------------------------------------------------------------

TRAJECTORY_COLUMNS = ("step", "time", "n", "i", "j", "value")


def trajectory_rows(trajectory):
    """Deterministic row order: by step, then site, then entry indices."""
    for step, (t, u) in enumerate(trajectory.snapshots):
        for n in u.sites():
            v = u.at(n)
            for i in range(1, v.m + 1):
                for j in range(1, v.m + 1):
                    yield (step, scalars.format_scalar(t), n, i, j,
                           scalars.format_scalar(v.get(i, j)))


def export_trajectory_csv(trajectory, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        writer.writerows(trajectory_rows(trajectory))


def export_trajectory_json(trajectory, path: str) -> None:
    doc = {
        "flow": list(trajectory.flow),
        "h": trajectory.h,
        "steps": trajectory.steps,
        "integrator": trajectory.integrator,
        "snapshots": [
            {"time": scalars.format_scalar(t), "u": lattice_to_json(u)}
            for t, u in trajectory.snapshots
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_trajectory_csv(path: str):
    """Rows back as tuples of strings (header checked)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRAJECTORY_COLUMNS:
            raise SchemaError(f"unexpected trajectory header {header!r}")
        return [tuple(row) for row in reader]


def export_json(doc: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def export_table(obj, fmt: str, path: str) -> None:
    """Dispatch export for trajectories, verification reports and series."""
    from .dynamics import Trajectory
    from .series import MatSeries, series_to_json

    if isinstance(obj, Trajectory):
        if fmt == "csv":
            export_trajectory_csv(obj, path)
        else:
            export_trajectory_json(obj, path)
        return
    if isinstance(obj, MatSeries):
        if fmt == "csv":
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(("degree", "i", "j", "value"))
                for d in obj.valid_degrees():
                    c = obj.get(d)
                    for i in range(1, c.m + 1):
                        for j in range(1, c.m + 1):
                            writer.writerow((d, i, j, scalars.format_scalar(c.get(i, j))))
        else:
            export_json(series_to_json(obj), path)
        return
    doc = obj.to_json() if hasattr(obj, "to_json") else obj
    export_json(doc, path)
