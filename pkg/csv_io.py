# csv_io.py
"""CSV in- en uitvoer: paden voor hsig, run-traces en kostcurves."""

from pathlib import Path

import numpy as np
import pandas as pd

# Flexibele kolommapping: intern veld -> mogelijke CSV-kolomnamen
PATH_COLUMNS = {
    "x": ["x", "pos_x", "px", "x_m", "X [m]"],
    "y": ["y", "pos_y", "py", "y_m", "Y [m]"],
}

STATE_NAMES = {2: ["x", "y"], 3: ["x", "y", "theta"], 1: ["x"]}


def _resolve_columns(header: list[str]) -> dict[str, str | None]:
    """Match CSV-kolomnamen naar interne veldnamen."""
    mapping = {}
    for field, candidates in PATH_COLUMNS.items():
        mapping[field] = None
        for candidate in candidates:
            for h in header:
                if str(h).strip().lower() == candidate.lower():
                    mapping[field] = h
                    break
            if mapping[field]:
                break
    return mapping


def read_path_csv(csv_path: str | Path) -> np.ndarray:
    """Lees (x, y)-rijen; zonder herkenbare kop worden de eerste twee kolommen gebruikt."""
    df = pd.read_csv(csv_path, encoding="utf-8-sig")
    col_map = _resolve_columns(list(df.columns))
    if col_map["x"] and col_map["y"]:
        pts = df[[col_map["x"], col_map["y"]]]
    else:
        df = pd.read_csv(csv_path, encoding="utf-8-sig", header=None)
        pts = df.iloc[:, :2]
    pts = pts.apply(pd.to_numeric, errors="coerce").dropna()
    if pts.empty:
        raise ValueError(f"{csv_path}: geen (x, y)-rijen gevonden")
    return pts.to_numpy(dtype=float)


def _state_columns(n: int) -> list[str]:
    return STATE_NAMES.get(n, [f"x{i}" for i in range(n)])


def _control_columns(m: int) -> list[str]:
    return ["u"] if m == 1 else [f"u{i + 1}" for i in range(m)]


def run_frame(result) -> pd.DataFrame:
    """Eén rij per tijdstip: t, toestand, toegepaste u, psi (ook als log) en dominante klasse."""
    states = result.trace.states
    controls = result.trace.controls
    n, m = states.shape[1], controls.shape[1] if controls.size else 1
    df = pd.DataFrame(states, columns=_state_columns(n))
    df.insert(0, "t", result.trace.times)
    U = np.full((len(states), m), np.nan)
    U[:len(controls)] = controls
    for j, name in enumerate(_control_columns(m)):
        df[name] = U[:, j]
    pad = len(states) - len(result.records)
    psi = [r.psi_hat for r in result.records] + [np.nan] * pad
    log_psi = [r.log_psi_hat for r in result.records] + [np.nan] * pad
    cls = [r.dominant for r in result.records] + [""] * pad
    df["psi_hat"] = psi
    df["log_psi_hat"] = log_psi
    df["class"] = cls
    return df


def write_run_csv(csv_path: str | Path, result) -> None:
    run_frame(result).to_csv(csv_path, index=False)


def write_curve_csv(csv_path: str | Path, rows: list[dict]) -> None:
    """Kostcurve: iteratie, klasselabel, beste kost."""
    df = pd.DataFrame(rows, columns=["iteration", "class", "cost"])
    df.sort_values(["iteration", "class"], kind="stable").to_csv(csv_path, index=False)


def write_references_csv(csv_path: str | Path, references) -> None:
    """Deterministische referentietrajecten, gestapeld per klasse."""
    frames = []
    for rank, ref in enumerate(references):
        df = pd.DataFrame(ref.states, columns=_state_columns(ref.states.shape[1]))
        df.insert(0, "class", ref.label)
        df.insert(0, "rank", rank)
        frames.append(df)
    if frames:
        pd.concat(frames, ignore_index=True).to_csv(csv_path, index=False)
    else:
        pd.DataFrame(columns=["rank", "class", "x", "y"]).to_csv(csv_path, index=False)
