"""
Command line entry points: ``encode``, ``search`` and ``synth``.

``encode`` turns an MGF library into a binary cache of hypervectors,
``search`` runs a narrow/wide cascade search of an MGF query file against
such a cache and writes accepted matches as TSV, and ``synth`` writes a
synthetic benchmark (library, queries, ground truth).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from hdoms import cache, search, synth
from hdoms.encoder import WORD_DTYPE, Codebook, EncoderConfig, encode_batch, kernel_speedup
from hdoms.mgf import parse_mgf
from hdoms.preprocess import PreprocessConfig, dimension, preprocess
from hdoms.search import Tolerance
from hdoms.spectrum import RawSpectrum, SpectrumMeta

logger = logging.getLogger("hdoms")

TSV_COLUMNS = ("query_id", "library_id", "peptide", "charge", "query_precursor_mz",
               "library_precursor_mz", "mass_diff", "score", "stage", "q_value")


@dataclass
class RunConfig:
    """Everything a run needs besides the input/output paths."""

    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    narrow: Tolerance = field(default_factory=lambda: Tolerance(20, "ppm"))
    wide: Tolerance = field(default_factory=lambda: Tolerance(500, "da"))
    fdr_q: float = 0.01
    batch_size: Optional[int] = None
    decoy_prefix: str = "DECOY_"
    threads: int = 1

    def __post_init__(self):
        if not 0 < self.fdr_q <= 1:
            raise ValueError("fdr_q must lie in (0, 1]")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    @property
    def effective_batch_size(self) -> int:
        if self.batch_size is None:
            return search.default_batch_size(self.encoder.dim)
        return self.batch_size


def encode_spectra(spectra: Sequence[RawSpectrum], config: RunConfig
                   ) -> Tuple[List[SpectrumMeta], np.ndarray, int]:
    """
    Preprocess and encode spectra in batches.

    Returns the metadata of the encodable spectra, their hypervectors and
    the number of spectra dropped as unprocessable.
    """
    codebook = Codebook.generate(dimension(config.preprocess), config.encoder)
    batch = config.effective_batch_size

    def run(start: int):
        svs = [preprocess(s, config.preprocess) for s in spectra[start:start + batch]]
        svs = [sv for sv in svs if sv is not None]
        return [sv.meta for sv in svs], encode_batch(svs, codebook)

    starts = range(0, len(spectra), batch)
    if config.threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    metas = [m for part_metas, _ in parts for m in part_metas]
    hvs = (np.concatenate([h for _, h in parts]) if parts
           else np.empty((0, config.encoder.words), dtype=WORD_DTYPE))
    return metas, hvs, len(spectra) - len(metas)


def cmd_encode(library_path, cache_path, config: RunConfig) -> dict:
    """Parse, preprocess and encode a library, then write the cache."""
    t0 = time.perf_counter()
    spectra = parse_mgf(library_path, config.decoy_prefix)
    metas, hvs, excluded = encode_spectra(spectra, config)
    cache.write_cache(cache_path, metas, hvs, config.preprocess, config.encoder)
    summary = {"parsed": len(spectra), "unprocessable": excluded, "encoded": len(metas),
               "decoys": sum(m.is_decoy for m in metas),
               "seconds": time.perf_counter() - t0}
    logger.info("encoded %(encoded)d of %(parsed)d spectra "
                "(%(unprocessable)d unprocessable) in %(seconds).2f s", summary)
    return summary


def format_tsv(ssms: Sequence[search.Ssm]) -> str:
    lines = ["\t".join(TSV_COLUMNS)]
    for s in ssms:
        lines.append("\t".join((
            s.query_id, s.library_id, s.peptide or "", str(s.charge),
            f"{s.query_precursor_mz:.6f}", f"{s.library_precursor_mz:.6f}",
            f"{s.mass_diff:.6f}", f"{s.score:.6f}", s.stage,
            f"{s.q_value:.6g}")))
    return "\n".join(lines) + "\n"


def cmd_search(query_path, cache_path, output_path, config: RunConfig,
               benchmark_kernel: bool = False) -> dict:
    """
    Cascade-search a query MGF against an encoded library cache.

    Writes accepted matches to ``output_path`` as TSV (header always present)
    and returns run statistics.  Raises :class:`hdoms.cache.StaleCacheError`
    when the cache was built with other settings.
    """
    t0 = time.perf_counter()
    lib_metas, lib_hvs = cache.read_cache(cache_path, config.preprocess, config.encoder)
    queries = parse_mgf(query_path, config.decoy_prefix)
    known = [q for q in queries if q.charge is not None]
    skipped_charge = len(queries) - len(known)

    t_search = time.perf_counter()
    q_metas, q_hvs, unprocessable = encode_spectra(known, config)
    if q_metas and lib_metas:
        index = search.build_index(lib_metas, lib_hvs)
        accepted = search.cascade_search(q_metas, q_hvs, index, config.narrow, config.wide,
                                         config.fdr_q, config.effective_batch_size,
                                         config.threads)
    else:
        accepted = []
    elapsed = time.perf_counter() - t_search

    with open(output_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(format_tsv(accepted))

    narrow = sum(s.stage == search.NARROW for s in accepted)
    stats = {
        "total_queries": len(queries),
        "skipped_unknown_charge": skipped_charge,
        "skipped_unprocessable": unprocessable,
        "accepted_narrow": narrow,
        "accepted_wide": len(accepted) - narrow,
        "unidentified": len(q_metas) - len(accepted),
        "library_size": len(lib_metas),
        "search_seconds": elapsed,
        "queries_per_second": len(q_metas) / elapsed if elapsed > 0 else 0.0,
        "total_seconds": time.perf_counter() - t0,
    }
    if benchmark_kernel:
        stats["kernel"] = kernel_speedup(dim=config.encoder.dim)
    logger.info("accepted %d narrow + %d wide of %d queries (%d unidentified, "
                "%d skipped) at %.1f queries/s", stats["accepted_narrow"],
                stats["accepted_wide"], stats["total_queries"], stats["unidentified"],
                skipped_charge + unprocessable, stats["queries_per_second"])
    return stats


def cmd_synth(params: synth.SynthParams, seed: int, out_dir) -> Tuple[str, str, str]:
    """Write a synthetic library, query file and ground truth to ``out_dir``."""
    data = synth.generate(params, seed)
    return synth.write_synth(data, out_dir)


def _add_run_options(parser: argparse.ArgumentParser):
    pre = PreprocessConfig()
    enc = EncoderConfig()
    group = parser.add_argument_group("preprocessing")
    group.add_argument("--min-mz", type=float, default=pre.min_mz)
    group.add_argument("--max-mz", type=float, default=pre.max_mz)
    group.add_argument("--bin-size", type=float, default=pre.bin_size)
    group.add_argument("--max-peaks", type=int, default=pre.max_peaks)
    group.add_argument("--min-peaks", type=int, default=pre.min_peaks)
    group.add_argument("--intensity-floor", type=float, default=pre.intensity_floor,
                       help="fraction of the base peak below which peaks are dropped")
    group.add_argument("--scaling", choices=("none", "sqrt"), default=pre.scaling)
    group = parser.add_argument_group("encoding")
    group.add_argument("--dim", type=int, default=enc.dim, help="hypervector bits")
    group.add_argument("--alpha", type=int, default=None,
                       help="bit flips between adjacent position vectors (default dim/2)")
    group.add_argument("--levels", type=int, default=enc.levels,
                       help="intensity quantization levels")
    group.add_argument("--seed", type=int, default=enc.seed, help="codebook seed")
    group = parser.add_argument_group("run")
    group.add_argument("--batch-size", type=int, default=None,
                       help="spectra per batch (default: sized from free memory)")
    group.add_argument("--threads", type=int, default=1)
    group.add_argument("--decoy-prefix", default="DECOY_")


def _run_config(args) -> RunConfig:
    return RunConfig(
        preprocess=PreprocessConfig(args.min_mz, args.max_mz, args.bin_size, args.max_peaks,
                                    args.min_peaks, args.intensity_floor, args.scaling),
        encoder=EncoderConfig(args.dim, args.alpha, args.levels, args.seed),
        narrow=Tolerance.parse(getattr(args, "narrow", "20ppm")),
        wide=Tolerance.parse(getattr(args, "wide", "500da")),
        fdr_q=getattr(args, "fdr", 0.01),
        batch_size=args.batch_size,
        decoy_prefix=args.decoy_prefix,
        threads=args.threads)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdoms", description="Open modification spectral library search "
                                  "with binary hypervectors.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode an MGF library into a cache file")
    p.add_argument("--library", required=True, help="library MGF")
    p.add_argument("--cache", required=True, help="output cache file")
    _add_run_options(p)

    p = sub.add_parser("search", help="cascade search queries against a library cache")
    p.add_argument("--query", required=True, help="query MGF")
    p.add_argument("--cache", required=True, help="library cache from `encode`")
    p.add_argument("--output", required=True, help="output TSV of accepted matches")
    p.add_argument("--stats", help="write run statistics as JSON to this path")
    p.add_argument("--narrow", default="20ppm", help="narrow precursor tolerance")
    p.add_argument("--wide", default="500da", help="wide precursor tolerance")
    p.add_argument("--fdr", type=float, default=0.01, help="q-value threshold per stage")
    p.add_argument("--benchmark-kernel", action="store_true",
                   help="add packed vs unpacked Hamming timings to the stats")
    _add_run_options(p)

    p = sub.add_parser("synth", help="write a synthetic benchmark")
    defaults = synth.SynthParams()
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    for name, value in asdict(defaults).items():
        flag = "--" + name.replace("_", "-")
        if isinstance(value, tuple):
            p.add_argument(flag, type=int, nargs="+", default=list(value))
        else:
            p.add_argument(flag, type=type(value), default=value)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "synth":
            fields = {k: getattr(args, k) for k in asdict(synth.SynthParams())}
            fields["charges"] = tuple(fields["charges"])
            paths = cmd_synth(synth.SynthParams(**fields), args.seed, args.out_dir)
            print("\n".join(paths))
            return 0
        config = _run_config(args)
        if args.command == "encode":
            summary = cmd_encode(args.library, args.cache, config)
            print(json.dumps(summary, indent=2))
        else:
            stats = cmd_search(args.query, args.cache, args.output, config,
                               benchmark_kernel=args.benchmark_kernel)
            text = json.dumps(stats, indent=2)
            if args.stats:
                with open(args.stats, "w", encoding="utf-8") as handle:
                    handle.write(text + "\n")
            print(text)
    except (OSError, ValueError, cache.CacheError) as exc:
        print(f"hdoms {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
