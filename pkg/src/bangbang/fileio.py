"""
Plain-text file formats.

Spin-system and GA-config files are JSON. Sequence files look like::

    # bang-bang sequence
    dt 5e-06
    segments 3
    species H F
    D D
    P:90 D
    D P:270.5
    twirls 1 3

with one row per segment, one token per species: ``D`` for a delay or
``P:<phase in degrees>`` for a pulse. The ``twirls`` line is always last and
may be empty. Matrices are written row-major, one row per line, entries as
``re,im`` pairs separated by spaces.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .gaopt import GAConfig
from .propagator import BBSequence
from .spinsys import Species, SpinSystem


class FormatError(ValueError):
    def __init__(self, path, line: int | None, message: str):
        where = f"{path}:{line}" if line is not None else f"{path}"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


def _load_json(path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(path, exc.lineno, exc.msg) from None
    if not isinstance(data, dict):
        raise FormatError(path, 1, "expected a JSON object at top level")
    return data


# --- spin systems -------------------------------------------------------------------------

def system_from_dict(data: dict) -> SpinSystem:
    required = ("spins", "species", "offsets_hz", "J_hz")
    missing = [k for k in required if k not in data]
    if missing:
        raise ValueError(f"missing keys: {', '.join(missing)}")
    n = int(data["spins"])
    species = []
    for entry in data["species"]:
        species.append(Species(
            str(entry["label"]),
            2 * np.pi * float(entry["max_amplitude_hz"]),
            tuple(int(m) for m in entry["members"]),
        ))
    d_hz = data.get("D_hz")
    return SpinSystem(
        n_spins=n,
        species=tuple(species),
        offsets=2 * np.pi * np.asarray(data["offsets_hz"], dtype=float),
        j_couplings=np.asarray(data["J_hz"], dtype=float),
        d_couplings=None if d_hz is None else np.asarray(d_hz, dtype=float),
        weak_coupling=bool(data.get("weak_coupling", True)),
    )


def _hz(values) -> list:
    # 12 significant digits hides the rad/s -> Hz round-off (250 rather than 249.99999999999997)
    return np.vectorize(lambda v: float(f"{v:.12g}"))(np.asarray(values) / (2 * np.pi)).tolist()


def system_to_dict(system: SpinSystem) -> dict:
    return {
        "spins": system.n_spins,
        "species": [
            {"label": sp.label, "max_amplitude_hz": _hz(sp.max_amplitude),
             "members": list(sp.members)}
            for sp in system.species
        ],
        "offsets_hz": _hz(system.offsets),
        "J_hz": system.j_couplings.tolist(),
        "D_hz": system.d_couplings.tolist(),
        "weak_coupling": system.weak_coupling,
    }


def load_system(path) -> SpinSystem:
    data = _load_json(path)
    try:
        return system_from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(path, None, f"invalid spin system: {exc}") from None


def save_system(system: SpinSystem, path) -> None:
    write_atomic(path, json.dumps(system_to_dict(system), indent=2) + "\n")


# --- GA config ----------------------------------------------------------------------------

def load_ga_config(path) -> GAConfig:
    data = _load_json(path)
    try:
        return GAConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise FormatError(path, None, f"invalid GA config: {exc}") from None


# --- sequences ----------------------------------------------------------------------------

def _fmt_deg(phi: float) -> str:
    return format(float(np.degrees(phi)), ".12g")


def emit_sequence(seq: BBSequence, labels=None) -> str:
    if labels is None:
        labels = [f"S{j}" for j in range(seq.n_species)]
    if len(labels) != seq.n_species:
        raise ValueError("one label per species required")
    lines = [
        "# bang-bang sequence",
        f"dt {seq.dt!r}",
        f"segments {seq.n_segments}",
        "species " + " ".join(labels),
    ]
    for k in range(seq.n_segments):
        lines.append(" ".join(
            f"P:{_fmt_deg(seq.phases[k, j])}" if seq.pulsed[k, j] else "D"
            for j in range(seq.n_species)
        ))
    lines.append(" ".join(["twirls"] + [str(b) for b in seq.twirls]))
    return "\n".join(lines) + "\n"


def parse_sequence(text: str, path="<string>") -> tuple[BBSequence, list[str]]:
    """Parse sequence text; returns the sequence and its species labels."""
    rows = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    rows = [(i, ln) for i, ln in rows if ln and not ln.startswith("#")]
    header = {}
    for key in ("dt", "segments", "species"):
        if not rows:
            raise FormatError(path, None, f"missing '{key}' header line")
        lineno, ln = rows.pop(0)
        parts = ln.split()
        if parts[0] != key:
            raise FormatError(path, lineno, f"expected '{key}' header, found {parts[0]!r}")
        header[key] = (lineno, parts[1:])
    try:
        dt = float(header["dt"][1][0])
        n_seg = int(header["segments"][1][0])
    except (IndexError, ValueError):
        raise FormatError(path, header["dt"][0], "malformed dt or segments header") from None
    labels = header["species"][1]
    if not labels:
        raise FormatError(path, header["species"][0], "no species labels")
    if not rows or rows[-1][1].split()[0] != "twirls":
        last = rows[-1][0] if rows else None
        raise FormatError(path, last, "missing trailing 'twirls' line")
    tw_line, tw_text = rows.pop()
    try:
        twirls = tuple(int(b) for b in tw_text.split()[1:])
    except ValueError:
        raise FormatError(path, tw_line, "twirl boundaries must be integers") from None
    if len(rows) != n_seg:
        where = rows[-1][0] if rows else tw_line
        raise FormatError(path, where, f"header declares {n_seg} segments, found {len(rows)}")

    pulsed = np.zeros((n_seg, len(labels)), dtype=bool)
    phases = np.zeros((n_seg, len(labels)))
    for k, (lineno, ln) in enumerate(rows):
        tokens = ln.split()
        if len(tokens) != len(labels):
            raise FormatError(path, lineno, f"expected {len(labels)} tokens, found {len(tokens)}")
        for j, tok in enumerate(tokens):
            if tok == "D":
                continue
            if not tok.startswith("P:"):
                raise FormatError(path, lineno, f"bad event token {tok!r}")
            try:
                deg = float(tok[2:])
            except ValueError:
                raise FormatError(path, lineno, f"bad phase in {tok!r}") from None
            if not np.isfinite(deg):
                raise FormatError(path, lineno, f"non-finite phase in {tok!r}")
            pulsed[k, j] = True
            phases[k, j] = np.radians(deg)
    try:
        seq = BBSequence(dt, pulsed, phases, twirls)
    except ValueError as exc:
        raise FormatError(path, tw_line, str(exc)) from None
    return seq, labels


def load_sequence(path) -> tuple[BBSequence, list[str]]:
    return parse_sequence(Path(path).read_text(), path)


def save_sequence(seq: BBSequence, path, labels=None) -> None:
    write_atomic(path, emit_sequence(seq, labels))


# --- matrices -----------------------------------------------------------------------------

def emit_matrix(mat: np.ndarray) -> str:
    mat = np.asarray(mat, dtype=complex)
    lines = [" ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row) for row in mat]
    return "\n".join(lines) + "\n"


def parse_matrix(text: str, path="<string>") -> np.ndarray:
    rows = []
    for lineno, ln in enumerate(text.splitlines(), start=1):
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        row = []
        for tok in ln.split():
            try:
                re_s, im_s = tok.split(",")
                row.append(complex(float(re_s), float(im_s)))
            except ValueError:
                raise FormatError(path, lineno, f"bad matrix entry {tok!r}") from None
        if rows and len(row) != len(rows[0]):
            raise FormatError(path, lineno, "ragged matrix row")
        rows.append(row)
    if not rows:
        raise FormatError(path, None, "empty matrix")
    mat = np.array(rows, dtype=complex)
    if mat.shape[0] != mat.shape[1]:
        raise FormatError(path, None, f"matrix is {mat.shape[0]}x{mat.shape[1]}, expected square")
    return mat


def load_matrix(path) -> np.ndarray:
    return parse_matrix(Path(path).read_text(), path)


def save_matrix(mat: np.ndarray, path) -> None:
    write_atomic(path, emit_matrix(mat))


# --- generic outputs ----------------------------------------------------------------------

def write_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    write_atomic(path, buf.getvalue())


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_columns(path, columns, comment: str | None = None) -> None:
    """Whitespace-separated plot-data file, one row per point."""
    lines = [f"# {comment}"] if comment else []
    for values in zip(*columns):
        lines.append(" ".join(repr(float(v)) for v in values))
    write_atomic(path, "\n".join(lines) + "\n")


def write_json(path, data: dict) -> None:
    write_atomic(path, json.dumps(data, indent=2, sort_keys=True) + "\n")
