"""Command-line interface.

Subcommands: score, select, detect-eval, sweep, simulate, sisnr, upit.
Corpora are given either as a directory of per-recording RTTM files or as
a single multi-recording RTTM file.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .der import CorpusScore, format_table, pool, score_der
from .parallel import default_jobs, parallel_map
from .rttm_io import RttmParseError, read_rttm, read_uem, write_rttm
from .selector import (
    TABLE_MODES,
    CombinationMode,
    SelectionError,
    check_same_recordings,
    combine_flags,
    detection_metrics,
    format_detection_table,
    is_poor_separation,
    oracle_from_scores,
    select_from_verdicts,
)
from .sep_metrics import SeparationMetricError, read_wav, si_snr, upit_loss
from .simulator import SimConfig, SimulationError, load_config, run_benchmark
from .strategies import Thresholds, all_verdicts, rethreshold
from .timeline import Annotation, TimelineError, merge_intervals, to_ticks

logger = logging.getLogger("sgsd")


class CliError(Exception):
    pass


def load_corpus(path: str | Path, round_: bool = False) -> dict[str, Annotation]:
    """Read a directory of ``*.rttm`` files or one multi-recording RTTM file.

    In directory mode an empty file yields an empty annotation named after
    the file stem.
    """
    path = Path(path)
    if path.is_dir():
        corpus: dict[str, Annotation] = {}
        for f in sorted(path.glob("*.rttm")):
            parsed = read_rttm(f, round_) or {f.stem: Annotation(f.stem)}
            for rid, ann in parsed.items():
                if rid in corpus:
                    raise CliError(f"recording {rid!r} appears in more than one file under {path}")
                corpus[rid] = ann
        return corpus
    if path.is_file():
        return read_rttm(path, round_)
    raise CliError(f"no such file or directory: {path}")


def _thresholds(args) -> Thresholds:
    return Thresholds(args.th1, args.th2, args.th3)


def _emit(args, text: str, data: dict) -> None:
    if args.format == "json":
        print(json.dumps(data, indent=2, sort_keys=True, allow_nan=False))
    else:
        print(text)


def _write_json(path: str | Path, data: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


class _ScoreJob:
    def __init__(self, collar: int):
        self.collar = collar

    def __call__(self, item):
        ref, hyp, regions = item
        return score_der(ref, hyp, regions, self.collar)


def cmd_score(args) -> int:
    refs = load_corpus(args.ref, args.round)
    hyps = load_corpus(args.hyp, args.round)
    uem = None
    if args.uem:
        uem = {
            rid: merge_intervals((r.onset, r.offset) for r in regions)
            for rid, regions in read_uem(args.uem, args.round).items()
        }
    items = []
    rids = sorted(set(refs) | set(hyps))
    for rid in rids:
        if rid not in hyps:
            logger.warning("no hypothesis for recording %r; scoring as empty", rid)
        if rid not in refs:
            logger.warning("no reference for recording %r; scoring as empty", rid)
        items.append(
            (
                refs.get(rid, Annotation(rid)),
                hyps.get(rid, Annotation(rid)),
                uem.get(rid) if uem is not None else None,
            )
        )
    collar = to_ticks(args.collar, round_=True)
    per = dict(zip(rids, parallel_map(_ScoreJob(collar), items, args.jobs)))
    result = CorpusScore(per, pool(per.values()))
    data = result.to_dict()
    text = format_table([*per.items(), ("Corpus", result.total)])
    _emit(args, text, data)
    if args.out:
        _write_json(args.out, data)
    return 0


class _VerdictJob:
    def __init__(self, thresholds: Thresholds):
        self.thresholds = thresholds

    def __call__(self, pair):
        ssd, csd = pair
        return all_verdicts(ssd, csd, self.thresholds)


class _OracleJob:
    def __call__(self, triple):
        ref, ssd, csd = triple
        return score_der(ref, ssd), score_der(ref, csd)


def _measure(ssd, csd, thresholds, jobs):
    rids = sorted(ssd)
    verdicts = parallel_map(_VerdictJob(thresholds), [(ssd[r], csd[r]) for r in rids], jobs)
    return dict(zip(rids, verdicts))


def _score_systems(ref, ssd, csd, jobs):
    rids = sorted(ref)
    scores = parallel_map(_OracleJob(), [(ref[r], ssd[r], csd[r]) for r in rids], jobs)
    return {r: s[0] for r, s in zip(rids, scores)}, {r: s[1] for r, s in zip(rids, scores)}


def _selection_table(report) -> str:
    header = ("Recording", "S1", "S2", "S3", "Flag", "Chosen")
    rows = []
    for rid in sorted(report.recordings):
        rec = report.recordings[rid]
        stats = []
        for k in (1, 2, 3):
            v = rec.verdicts[k]
            stats.append("degenerate" if v.degenerate else f"{v.statistic:.4f}")
        rows.append((rid, *stats, "poor" if rec.flagged else "ok", rec.chosen_system))
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(6)]
    lines = ["  ".join(r[i].ljust(widths[i]) for i in range(6)) for r in [header, *rows]]
    lines.insert(1, "-" * len(lines[0]))
    lines.append(
        f"\nmode {report.mode.value}: {len(report.recordings)} recordings, "
        f"{report.n_csd} CSD, {report.n_ssd} SSD"
    )
    return "\n".join(lines)


def cmd_select(args) -> int:
    csd = load_corpus(args.csd, args.round)
    ssd = load_corpus(args.ssd, args.round)
    check_same_recordings(ssd, csd)
    mode = CombinationMode.parse(args.mode)
    th = _thresholds(args)
    verdicts = _measure(ssd, csd, th, args.jobs)
    if mode is CombinationMode.ORACLE:
        if not args.ref:
            raise CliError("--mode ORACLE requires --ref")
        ref = load_corpus(args.ref, args.round)
        check_same_recordings(ssd, csd, ref)
        der_ssd, der_csd = _score_systems(ref, ssd, csd, args.jobs)
        report = oracle_from_scores(verdicts, ssd, csd, der_ssd, der_csd, th)
    else:
        report = select_from_verdicts(verdicts, ssd, csd, th, mode)
    data = report.to_dict()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for rid, ann in report.selected.items():
            write_rttm(out / f"{rid}.rttm", [ann])
        _write_json(out / "selection_report.json", data)
    _emit(args, _selection_table(report), data)
    return 0


def _modes(values) -> list[CombinationMode]:
    return [CombinationMode.parse(v) for v in (values or [m.value for m in TABLE_MODES])]


def cmd_detect_eval(args) -> int:
    csd = load_corpus(args.csd, args.round)
    ssd = load_corpus(args.ssd, args.round)
    ref = load_corpus(args.ref, args.round)
    check_same_recordings(ssd, csd, ref)
    th = _thresholds(args)
    verdicts = _measure(ssd, csd, th, args.jobs)
    der_ssd, der_csd = _score_systems(ref, ssd, csd, args.jobs)
    positives = {r: is_poor_separation(der_ssd[r], der_csd[r]) for r in ref}
    rows = []
    for mode in _modes(args.modes):
        if mode is CombinationMode.ORACLE:
            flags = oracle_from_scores(verdicts, ssd, csd, der_ssd, der_csd, th).flags
        else:
            flags = {r: combine_flags(v, mode) for r, v in verdicts.items()}
        rows.append((mode.value, detection_metrics(flags, positives)))
    data = {
        "thresholds": asdict(th),
        "positives": sum(positives.values()),
        "recordings": len(positives),
        "methods": [{"mode": name, **m.to_dict()} for name, m in rows],
    }
    _emit(args, format_detection_table(rows), data)
    if args.out:
        _write_json(args.out, data)
    return 0


def _grid(text: str | None, default: float) -> list[float]:
    if text is None:
        return [default]
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"bad threshold grid {text!r}") from None
    if not values:
        raise CliError("threshold grids must be non-empty")
    return values


def _check_monotone(rows, mode: str) -> list[str]:
    """Flag counts must not grow as th1 falls or th2/th3 rise."""
    counts = {(r["th1"], r["th2"], r["th3"]): r["flagged"] for r in rows if r["mode"] == mode}
    problems = []
    for (t1, t2, t3), n in counts.items():
        for (u1, u2, u3), m in counts.items():
            if u1 <= t1 and u2 >= t2 and u3 >= t3 and m > n:
                problems.append(f"{mode}: ({u1},{u2},{u3}) flags {m} > {n} at ({t1},{t2},{t3})")
    return problems


def cmd_sweep(args) -> int:
    csd = load_corpus(args.csd, args.round)
    ssd = load_corpus(args.ssd, args.round)
    ref = load_corpus(args.ref, args.round)
    check_same_recordings(ssd, csd, ref)
    base = _thresholds(args)
    g1 = _grid(args.th1_grid, base.th1)
    g2 = _grid(args.th2_grid, base.th2)
    g3 = _grid(args.th3_grid, base.th3)
    modes = [m for m in _modes(args.modes) if m is not CombinationMode.ORACLE]
    measured = _measure(ssd, csd, base, args.jobs)
    der_ssd, der_csd = _score_systems(ref, ssd, csd, args.jobs)
    positives = {r: is_poor_separation(der_ssd[r], der_csd[r]) for r in ref}

    rows = []
    for t1, t2, t3 in itertools.product(g1, g2, g3):
        th = Thresholds(t1, t2, t3)
        rethresholded = {
            r: {k: rethreshold(v, th) for k, v in vs.items()} for r, vs in measured.items()
        }
        for mode in modes:
            flags = {r: combine_flags(v, mode) for r, v in rethresholded.items()}
            m = detection_metrics(flags, positives)
            rows.append({"th1": t1, "th2": t2, "th3": t3, "mode": mode.value, "flagged": sum(flags.values()), **m.to_dict()})
    problems = [p for mode in modes for p in _check_monotone(rows, mode.value)]
    data = {"rows": rows, "monotone": not problems, "monotonicity_violations": problems}
    header = ("th1", "th2", "th3", "Mode", "Flagged", "Recall", "Precision", "Acc")
    body = [
        (f"{r['th1']:.2f}", f"{r['th2']:.2f}", f"{r['th3']:.2f}", r["mode"], str(r["flagged"]),
         f"{r['recall']:.2f}", f"{r['precision']:.2f}", f"{r['accuracy']:.2f}")
        for r in rows
    ]
    widths = [max(len(x[i]) for x in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(x[i].rjust(widths[i]) for i in range(len(header))) for x in [header, *body]]
    lines.insert(1, "-" * len(lines[0]))
    lines.append("\nflag-count monotonicity: " + ("ok" if not problems else f"{len(problems)} violations"))
    _emit(args, "\n".join(lines), data)
    if args.out:
        _write_json(args.out, data)
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config) if args.config else SimConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.num_recordings is not None:
        overrides["num_recordings"] = args.num_recordings
    if overrides:
        cfg = cfg.replace(**overrides)
    if not args.out:
        raise CliError("simulate requires --out DIR")
    result = run_benchmark(cfg, args.out, jobs=args.jobs, thresholds=_thresholds(args))
    der_rows = list(result.corpus_der.items())
    text = (
        format_table(der_rows, label="System")
        + "\n\n"
        + format_detection_table([(m.value, d) for m, d in result.detection.items()])
    )
    data = {
        "corpus_der": {k: v.to_dict() for k, v in der_rows},
        "detection": {m.value: d.to_dict() for m, d in result.detection.items()},
    }
    _emit(args, text, data)
    return 0


def _db(x: float) -> str:
    if math.isinf(x):
        return "+inf (perfect reconstruction)" if x > 0 else "-inf"
    return f"{x:.2f} dB"


def cmd_sisnr(args) -> int:
    est, tgt = read_wav(args.estimate), read_wav(args.target)
    value = si_snr(est, tgt, zero_mean=args.zero_mean)
    data = {"si_snr_db": None if math.isinf(value) else value, "perfect": math.isinf(value) and value > 0}
    _emit(args, f"Si-SNR: {_db(value)}", data)
    return 0


def cmd_upit(args) -> int:
    ests = [read_wav(p) for p in args.estimates]
    refs = [read_wav(p) for p in args.references]
    res = upit_loss(ests, refs, zero_mean=args.zero_mean)
    lines = [f"uPIT loss: {res.loss:.4f}" if math.isfinite(res.loss) else f"uPIT loss: {res.loss}"]
    for i, (j, v) in enumerate(zip(res.permutation, res.pair_sisnr)):
        lines.append(f"  estimate {args.estimates[i]} -> reference {args.references[j]}: {_db(v)}")
    data = {
        "loss": res.loss if math.isfinite(res.loss) else str(res.loss),
        "permutation": list(res.permutation),
        "pair_si_snr_db": [v if math.isfinite(v) else str(v) for v in res.pair_sisnr],
    }
    _emit(args, "\n".join(lines), data)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("table", "json"), default="table")
    common.add_argument("--jobs", type=int, default=default_jobs(), help="worker processes")
    common.add_argument("--round", action="store_true", help="round sub-centisecond times instead of failing")
    common.add_argument("-v", "--verbose", action="store_true")

    th = argparse.ArgumentParser(add_help=False)
    th.add_argument("--th1", type=float, default=0.40, help="speaker-balance threshold")
    th.add_argument("--th2", type=float, default=0.20, help="overlap-ratio threshold")
    th.add_argument("--th3", type=float, default=0.26, help="deviation threshold")

    parser = argparse.ArgumentParser(prog="sgsd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", parents=[common], help="DER of a hypothesis against a reference")
    p.add_argument("ref")
    p.add_argument("hyp")
    p.add_argument("--uem")
    p.add_argument("--collar", type=float, default=0.0, help="seconds (default 0)")
    p.add_argument("--out", help="write structured report here")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("select", parents=[common, th], help="choose CSD or SSD per recording")
    p.add_argument("csd")
    p.add_argument("ssd")
    p.add_argument("--mode", default="S3")
    p.add_argument("--ref", help="reference corpus (ORACLE mode only)")
    p.add_argument("--out", help="directory for selected RTTMs and the report")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("detect-eval", parents=[common, th], help="recall/precision/accuracy of detection")
    p.add_argument("csd")
    p.add_argument("ssd")
    p.add_argument("ref")
    p.add_argument("--mode", dest="modes", action="append", help="repeatable; default all")
    p.add_argument("--out")
    p.set_defaults(func=cmd_detect_eval)

    p = sub.add_parser("sweep", parents=[common, th], help="detection metrics over threshold grids")
    p.add_argument("csd")
    p.add_argument("ssd")
    p.add_argument("ref")
    p.add_argument("--th1-grid")
    p.add_argument("--th2-grid")
    p.add_argument("--th3-grid")
    p.add_argument("--mode", dest="modes", action="append")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", parents=[common, th], help="generate and evaluate a synthetic corpus")
    p.add_argument("config", nargs="?", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--num-recordings", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sisnr", parents=[common], help="Si-SNR of an estimate against a target")
    p.add_argument("estimate")
    p.add_argument("target")
    p.add_argument("--zero-mean", action="store_true")
    p.set_defaults(func=cmd_sisnr)

    p = sub.add_parser("upit", parents=[common], help="permutation-invariant Si-SNR loss")
    p.add_argument("--est", dest="estimates", nargs="+", required=True)
    p.add_argument("--ref", dest="references", nargs="+", required=True)
    p.add_argument("--zero-mean", action="store_true")
    p.set_defaults(func=cmd_upit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        Thresholds(*(getattr(args, k, 0.0) for k in ("th1", "th2", "th3")))
        return args.func(args)
    except (
        CliError,
        RttmParseError,
        TimelineError,
        SelectionError,
        SimulationError,
        SeparationMetricError,
        OSError,
        ValueError,
    ) as exc:
        print(f"sgsd {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
