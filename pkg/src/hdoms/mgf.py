"""
Reading and writing Mascot Generic Format (MGF) peak lists.

Only the subset needed for library searching is understood: ``TITLE``,
``PEPMASS``, ``CHARGE``, ``SEQ`` (plus ``SCANS`` as an id fallback) and
whitespace separated ``mz intensity`` peak lines.  Other keys are ignored.
"""

from __future__ import annotations

import io
import os
import re
from typing import IO, Iterable, Iterator, List, Optional, Union

import numpy as np

from hdoms.spectrum import RawSpectrum

PathOrStream = Union[str, os.PathLike, IO]

_CHARGE_RE = re.compile(r"^\s*([+-]?)(\d+)([+-]?)\s*$")


class MgfParseError(ValueError):
    """Raised for malformed MGF input; carries the offending line number."""

    def __init__(self, lineno: int, message: str, source: Optional[str] = None):
        self.lineno = lineno
        self.source = source
        where = f"{source}:{lineno}" if source else f"line {lineno}"
        super().__init__(f"{where}: {message}")


def _open_text(source: PathOrStream):
    """Return ``(text handle, cleanup, name)`` for a path or stream."""
    if isinstance(source, (str, os.PathLike)):
        handle = open(source, "r", encoding="utf-8")
        return handle, handle.close, os.fspath(source)
    name = getattr(source, "name", None)
    if isinstance(source, io.TextIOBase):
        return source, lambda: None, name
    # Binary stream: detach afterwards so the caller's stream stays open.
    wrapper = io.TextIOWrapper(source, encoding="utf-8")
    return wrapper, wrapper.detach, name


def parse_charge(value: str) -> Optional[int]:
    """
    Parse an MGF charge field such as ``2+``, ``+3`` or ``2``.

    Multiple charges (``2+ and 3+``) or a zero charge are reported as unknown
    (``None``) rather than guessed.
    """
    match = _CHARGE_RE.match(value)
    if match is None:
        return None
    charge = int(match.group(2))
    return charge if charge > 0 else None


def _merge_peaks(mz: List[float], intensity: List[float]):
    mz_arr = np.asarray(mz, dtype=np.float64)
    int_arr = np.asarray(intensity, dtype=np.float64)
    order = np.argsort(mz_arr, kind="stable")
    mz_arr, int_arr = mz_arr[order], int_arr[order]
    if mz_arr.size > 1 and np.any(mz_arr[1:] == mz_arr[:-1]):
        uniq, start = np.unique(mz_arr, return_index=True)
        int_arr = np.add.reduceat(int_arr, start)
        mz_arr = uniq
    return mz_arr, int_arr


def iter_mgf(source: PathOrStream, decoy_prefix: str = "DECOY_") -> Iterator[RawSpectrum]:
    """Lazily yield spectra from an MGF file; see :func:`parse_mgf`."""
    handle, cleanup, name = _open_text(source)
    try:
        yield from _iter_blocks(handle, decoy_prefix, name)
    finally:
        cleanup()


def _iter_blocks(handle, decoy_prefix, name):
    in_block = False
    block_start = 0
    n_blocks = 0
    params: dict = {}
    mz: List[float] = []
    intensity: List[float] = []
    lineno = 0
    for lineno, line in enumerate(handle, start=1):
        line = line.strip()
        if not line or line[0] in "#;!/":
            continue
        if line == "BEGIN IONS":
            if in_block:
                raise MgfParseError(lineno, "BEGIN IONS inside an open block", name)
            in_block, block_start = True, lineno
            params, mz, intensity = {}, [], []
            continue
        if not in_block:
            # Global parameters before the first block are not used.
            continue
        if line == "END IONS":
            in_block = False
            yield _build_spectrum(params, mz, intensity, decoy_prefix,
                                  block_start, lineno, n_blocks, name)
            n_blocks += 1
            continue
        if "=" in line and not line[0].isdigit():
            key, _, value = line.partition("=")
            params[key.strip().upper()] = (value.strip(), lineno)
            continue
        fields = line.split()
        if len(fields) < 2:
            raise MgfParseError(lineno, f"peak line needs m/z and intensity: {line!r}", name)
        try:
            peak_mz, peak_int = float(fields[0]), float(fields[1])
        except ValueError:
            raise MgfParseError(lineno, f"non-numeric peak line: {line!r}", name) from None
        if not np.isfinite(peak_mz) or peak_mz <= 0:
            raise MgfParseError(lineno, f"peak m/z must be positive: {line!r}", name)
        if not np.isfinite(peak_int) or peak_int < 0:
            raise MgfParseError(lineno, f"peak intensity must be non-negative: {line!r}", name)
        mz.append(peak_mz)
        intensity.append(peak_int)
    if in_block:
        raise MgfParseError(lineno, f"block opened at line {block_start} has no END IONS", name)


def _build_spectrum(params, mz, intensity, decoy_prefix, block_start, lineno,
                    n_blocks, name) -> RawSpectrum:
    if "PEPMASS" not in params:
        raise MgfParseError(block_start, "block is missing PEPMASS", name)
    pepmass, pep_line = params["PEPMASS"]
    try:
        precursor_mz = float(pepmass.split()[0])
    except (ValueError, IndexError):
        raise MgfParseError(pep_line, f"invalid PEPMASS {pepmass!r}", name) from None
    if not precursor_mz > 0:
        raise MgfParseError(pep_line, f"PEPMASS must be positive, got {pepmass!r}", name)

    charge = None
    if "CHARGE" in params:
        charge = parse_charge(params["CHARGE"][0])

    title = params.get("TITLE", ("", 0))[0]
    seq = params.get("SEQ", ("", 0))[0] or None
    spectrum_id = title or params.get("SCANS", ("", 0))[0] or f"spectrum_{n_blocks}"
    is_decoy = bool(decoy_prefix) and (
        title.startswith(decoy_prefix) or (seq or "").startswith(decoy_prefix))

    peak_mz, peak_int = _merge_peaks(mz, intensity)
    return RawSpectrum(spectrum_id, precursor_mz, charge, peak_mz, peak_int,
                       is_decoy=is_decoy, peptide=seq)


def parse_mgf(source: PathOrStream, decoy_prefix: str = "DECOY_") -> List[RawSpectrum]:
    """
    Read every spectrum from an MGF file.

    Parameters
    ----------
    source : path or file object
        File name, or a text / binary stream positioned at the start of the
        MGF content.
    decoy_prefix : str
        A spectrum is flagged as decoy when its ``TITLE`` or ``SEQ`` starts
        with this prefix.  An empty prefix disables decoy detection.

    Returns
    -------
    List[RawSpectrum]
        One spectrum per ``BEGIN IONS`` / ``END IONS`` block, in file order.
        Peaks with identical m/z inside a block are merged by summing their
        intensities.

    Raises
    ------
    MgfParseError
        On a block without ``PEPMASS``, a non-numeric peak line, or an
        unterminated block.  The exception names the line number.
    """
    return list(iter_mgf(source, decoy_prefix))


def _format_float(value: float) -> str:
    return repr(float(value))


def write_mgf(spectra: Iterable[RawSpectrum], dest: PathOrStream) -> None:
    """Write spectra as MGF; floats use ``repr`` so values round-trip exactly."""
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="\n") as handle:
            _write_mgf(spectra, handle)
    else:
        _write_mgf(spectra, dest)


def _write_mgf(spectra, handle):
    for spec in spectra:
        lines = ["BEGIN IONS", f"TITLE={spec.id}",
                 f"PEPMASS={_format_float(spec.precursor_mz)}"]
        if spec.charge is not None:
            lines.append(f"CHARGE={spec.charge}+")
        if spec.peptide:
            lines.append(f"SEQ={spec.peptide}")
        lines.extend(f"{_format_float(m)} {_format_float(i)}"
                     for m, i in zip(spec.mz, spec.intensity))
        lines.append("END IONS")
        handle.write("\n".join(lines) + "\n\n")
