"""Plain-text readers and writers for array descriptions and switching sequences."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Union

import numpy as np

from .array_model import EADF, eadf_from_sampled_pattern
from .errors import FormatError
from .signal_model import SwitchingSequence

PathLike = Union[str, os.PathLike]


def _lines(path: PathLike):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None
    return [ln.split("#", 1)[0].strip() for ln in text.splitlines() if ln.split("#", 1)[0].strip()]


def _complex_rows(rows, n, what):
    if len(rows) != n:
        raise FormatError(f"{what}: expected {n} coefficient lines, found {len(rows)}")
    try:
        vals = np.array([[float(x) for x in r.split()] for r in rows])
    except ValueError as exc:
        raise FormatError(f"{what}: {exc}") from None
    if vals.ndim != 2 or vals.shape[1] != 2:
        raise FormatError(f"{what}: every line must hold 're im'")
    return vals[:, 0] + 1j * vals[:, 1]


def read_eadf(path: PathLike) -> EADF:
    """Header ``M A_phi A_theta polarization`` then ``re im`` per coefficient,
    ordered (element, alpha_phi, alpha_theta) row-major."""
    rows = _lines(path)
    if not rows:
        raise FormatError(f"{path}: empty EADF file")
    head = rows[0].split()
    if len(head) != 4:
        raise FormatError(f"{path}: header must be 'M A_phi A_theta polarization'")
    try:
        M, a_phi, a_theta = (int(x) for x in head[:3])
    except ValueError:
        raise FormatError(f"{path}: header sizes must be integers") from None
    c = _complex_rows(rows[1:], M * a_phi * a_theta, str(path))
    return EADF.from_coefficients(c.reshape(M, a_phi, a_theta), head[3])


def write_eadf(path: PathLike, eadf: EADF) -> None:
    c = eadf.coefficient_cube().ravel()
    lines = [f"{eadf.M} {eadf.A_phi} {eadf.A_theta} {eadf.polarization}"]
    lines += [f"{float(z.real)!r} {float(z.imag)!r}" for z in c]
    Path(path).write_text("\n".join(lines) + "\n")


def read_sampled_pattern(path: PathLike, polarization: str = "V") -> EADF:
    """Header ``M N_phi N_theta`` then ``re im`` samples, (element, phi, theta)
    row-major, on the grids ``2 pi k / N``."""
    rows = _lines(path)
    if not rows:
        raise FormatError(f"{path}: empty pattern file")
    head = rows[0].split()
    if len(head) != 3:
        raise FormatError(f"{path}: header must be 'M N_phi N_theta'")
    try:
        M, n_phi, n_theta = (int(x) for x in head)
    except ValueError:
        raise FormatError(f"{path}: header sizes must be integers") from None
    s = _complex_rows(rows[1:], M * n_phi * n_theta, str(path))
    return eadf_from_sampled_pattern(s.reshape(M, n_phi, n_theta), polarization=polarization)


def write_sequence(path: PathLike, seq: SwitchingSequence) -> None:
    Path(path).write_text(f"{seq.M} {seq.dt!r}\n" + " ".join(map(str, seq.perm)) + "\n")


def read_sequence(path: PathLike) -> SwitchingSequence:
    """Line 1 ``M_TR dt``; line 2 the permutation."""
    rows = _lines(path)
    if len(rows) != 2:
        raise FormatError(f"{path}: sequence file needs exactly two lines")
    head = rows[0].split()
    try:
        M, dt = int(head[0]), float(head[1])
        perm = tuple(int(x) for x in rows[1].split())
    except (ValueError, IndexError):
        raise FormatError(f"{path}: malformed sequence file") from None
    if len(head) != 2 or len(perm) != M:
        raise FormatError(f"{path}: header says {head[0]} entries, found {len(perm)}")
    return SwitchingSequence(perm, dt)
