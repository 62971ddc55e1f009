"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 1 internal error.  All results
are computed before the first file is written, and every file is written
through a temporary name and renamed into place.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bla, experiments as ex
from .ingest import (SteppedSineFrf, _atomic_write, oversampled_mask, read_record, read_stepped_sine_frf,
                     record_to_csv)
from .sequences import (SignalClass, _class_rule, ds_order_for_length, ds_ternary, irmlbs, mlbs, normalize, rcs,
                        signal_metadata, signal_to_csv, wgn)
from .wiener import simulate_capture

FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6-sim", "table2")


class UsageError(ValueError):
    pass


def _fmt(v) -> str:
    return repr(float(v))


def _parse_taps(text):
    if text is None:
        return None
    try:
        return tuple(int(t) for t in text.replace(" ", "").split(",") if t)
    except ValueError:
        raise UsageError(f"--taps must be a comma-separated list of integers, got {text!r}") from None


def _build_signal(args):
    kind = SignalClass(args.signal_class)
    taps = _parse_taps(args.taps)
    if kind in (SignalClass.MLBS, SignalClass.IRMLBS):
        order = args.order
        if order is None and args.n is not None:
            m = args.n if kind is SignalClass.MLBS else args.n // 2
            order = (m + 1).bit_length() - 1
            if 2**order - 1 != m or (kind is SignalClass.IRMLBS and args.n % 2):
                raise UsageError(f"no {kind.value} sequence has length {args.n}")
        if order is None:
            raise UsageError(f"{kind.value} needs --order or --n")
        sig = (mlbs if kind is SignalClass.MLBS else irmlbs)(order, taps)
    elif kind is SignalClass.DS:
        order = args.order if args.order is not None else (
            ds_order_for_length(args.n) if args.n is not None else None)
        if order is None:
            raise UsageError("ds needs --order (of the base MLBS) or --n")
        sig = ds_ternary(mlbs(order, taps))
    elif kind is SignalClass.RCS:
        if args.n is None:
            raise UsageError("rcs needs --n")
        sig = rcs(args.n, args.seed, args.flatten_candidates, refine_sweeps=args.refine_sweeps)
    else:
        if args.n is None:
            raise UsageError("wgn needs --n")
        sig = wgn(args.n, args.seed)
    if args.rms is not None:
        sig = normalize(sig, args.rms)
    return sig


def cmd_generate(args) -> int:
    sig = _build_signal(args)
    meta = signal_metadata(sig)
    meta["seed"] = args.seed if sig.kind in (SignalClass.RCS, SignalClass.WGN) else None
    out = Path(args.out)
    _atomic_write(out, signal_to_csv(sig))
    _atomic_write(out.with_suffix(".json"), json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return 0


# --------------------------------------------------------------------------
# reproduce
# --------------------------------------------------------------------------


def _summary_csv(rows) -> str:
    lines = ["system,class,realizations,groups,scale,mean_abs_ratio_db,mean_abs_phase_deg"]
    for system, res in rows:
        lines.append(",".join([str(system), res.kind.value, str(res.realizations), str(res.estimate.groups),
                               _fmt(res.scale), _fmt(res.mean_abs_ratio_db), _fmt(res.mean_abs_phase_deg)]))
    return "\n".join(lines) + "\n"


def _rms_tag(rms: float) -> str:
    return f"{rms:g}".replace(".", "p")


def _reproduce_files(args) -> dict[str, str]:
    fig = args.figure
    files: dict[str, str] = {}
    if fig in ("fig2", "fig3"):
        results = ex.fig2(args.seed)
        for (system, kind), res in results.items():
            files[f"{fig}_system{system}_{kind.value}.csv"] = res.csv()
        files[f"{fig}_summary.csv"] = _summary_csv((s, r) for (s, _), r in results.items())
    elif fig == "fig4":
        rows, mc = ex.fig4(args.seed, args.instances or 1000)
        lines = ["lag,closed_form_eq3,closed_form_eq4,monte_carlo"]
        lines += [f"{r},{_fmt(a)},{_fmt(b)},{_fmt(c)}" for r, a, b, c in rows]
        files["fig4.csv"] = "\n".join(lines) + "\n"
    elif fig == "fig5":
        rows = []
        for rms in args.rms or (1.0, 2.0):
            results = ex.fig5(args.seed, rms)
            for kind, res in results.items():
                files[f"fig5_rms{_rms_tag(rms)}_{kind.value}.csv"] = res.csv()
                rows.append((f"rms{rms:g}", res))
        files["fig5_summary.csv"] = _summary_csv(rows)
    elif fig == "table2":
        kl = ex.table2(args.seed)
        lines = ["class,kl_divergence"] + [f"{k.value},{_fmt(v)}" for k, v in kl.items()]
        files["table2.csv"] = "\n".join(lines) + "\n"
    elif fig == "fig6-sim":
        files.update(_fig6_sim_files(args))
    return files


def _fig6_sim_files(args) -> dict[str, str]:
    """Simulated acquisition bundle: raw records with transient, a stepped-sine
    reference table, and the estimates `estimate` reproduces from them."""
    files: dict[str, str] = {}
    model = ex.clipper_model()
    grid = np.linspace(0.0, ex.CLIPPER_FS_HZ / ex.CLIPPER_OVERSAMPLE / 2, 401)
    counts = dict(ex.CLIPPER_COUNTS)
    counts[SignalClass.RCS] = counts[SignalClass.WGN] = args.random_count
    classes = [SignalClass(c) for c in args.classes] if args.classes else list(ex.CLASS_ORDER)
    frf = model.iir.frf(grid)
    # repr() round-trips floats exactly, so this table is what `estimate` reads back
    ref = SteppedSineFrf(grid, 20 * np.log10(np.abs(frf)), np.rad2deg(np.unwrap(np.angle(frf))))
    files["reference_frf.csv"] = "freq_hz,mag_db,phase_deg\n" + "".join(
        f"{_fmt(f)},{_fmt(m)},{_fmt(p)}\n" for f, m, p in zip(ref.freq_hz, ref.mag_db, ref.phase_deg))
    for rms in args.rms or (1.0, 2.0):
        tag = _rms_tag(rms)
        for kind in classes:
            sigs = ex.class_signals(kind, counts[kind], args.seed)
            recs = []
            for i, s in enumerate(sigs):
                rec = simulate_capture(model, normalize(s, rms), ex.CLIPPER_OVERSAMPLE, n_periods=1,
                                       discard_periods=2)
                rec.meta.update({"class": kind.value})
                text = record_to_csv(rec, with_time=False)
                files[f"records_rms{tag}/{kind.value}/rec_{i:04d}.csv"] = text
                recs.append(rec)
            est = _estimate_records(recs, kind, ex.CLIPPER_OVERSAMPLE, args.group_size)
            est, _ = bla.scale_to_reference(est, ref(est.freq))
            files[f"fig6sim_rms{tag}_{kind.value}.csv"] = bla.to_csv(est, ref(est.freq))
    return files


def _estimate_records(records, kind: SignalClass, oversample: int, group_size: int) -> bla.BlaEstimate:
    n_gen, rem = divmod(records[0].period_len, oversample)
    if rem:
        raise UsageError(f"period length {records[0].period_len} is not a multiple of oversample {oversample}")
    mask = oversampled_mask(_class_rule(kind, n_gen), oversample)
    return bla.estimate(records, group_size, mask)


def cmd_reproduce(args) -> int:
    if args.figure not in FIGURES:
        raise UsageError(f"unknown figure {args.figure!r}; choose from {', '.join(FIGURES)}")
    if args.group_size < 1:
        raise UsageError("--group-size must be >= 1")
    out_dir = Path(args.out_dir)
    files = _reproduce_files(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        path = out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write(path, text)
    return 0


# --------------------------------------------------------------------------
# estimate
# --------------------------------------------------------------------------


def cmd_estimate(args) -> int:
    records = [read_record(p) for p in args.records]
    if len({r.period_len for r in records}) > 1:
        raise UsageError("records have mismatched period lengths: "
                         + ", ".join(sorted({str(r.period_len) for r in records})))
    if len(records) < args.group_size:
        raise UsageError(f"{len(records)} records cannot fill a group of {args.group_size}")
    kind = args.signal_class or records[0].meta.get("class")
    if kind is None:
        raise UsageError("excitation class unknown: pass --class or add '# class=' to the records")
    oversample = args.oversample or int(records[0].meta.get("oversample", 1))
    ref = read_stepped_sine_frf(args.reference) if args.reference else None
    est = _estimate_records(records, SignalClass(kind), oversample, args.group_size)
    if ref is not None:
        g_ref = ref(est.freq)
        est, _ = bla.scale_to_reference(est, g_ref)
        text = bla.to_csv(est, g_ref)
    else:
        text = bla.to_csv(est)
    _atomic_write(args.out, text)
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wienerbla", description="BLA of Wiener systems with multilevel excitations")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write one period of an excitation as CSV + JSON sidecar")
    g.add_argument("--class", dest="signal_class", required=True, choices=[c.value for c in SignalClass])
    g.add_argument("--n", type=int)
    g.add_argument("--order", type=int)
    g.add_argument("--taps")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--rms", type=float)
    g.add_argument("--flatten-candidates", type=int, default=1)
    g.add_argument("--refine-sweeps", type=int, default=2)
    g.add_argument("--out", default="signal.csv")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("reproduce", help="regenerate figure/table data as CSV")
    r.add_argument("figure")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out-dir", default=".")
    r.add_argument("--rms", type=float, action="append", help="input RMS level(s) in V for fig5 / fig6-sim")
    r.add_argument("--instances", type=int)
    r.add_argument("--group-size", type=int, default=4)
    r.add_argument("--random-count", type=int, default=16, help="RCS/WGN records per level for fig6-sim")
    r.add_argument("--classes", nargs="+", choices=[c.value for c in SignalClass])
    r.add_argument("--config", help="JSON file with defaults for these options")
    r.set_defaults(func=cmd_reproduce)

    e = sub.add_parser("estimate", help="BLA from waveform record CSVs")
    e.add_argument("records", nargs="+")
    e.add_argument("--reference")
    e.add_argument("--group-size", type=int, default=4)
    e.add_argument("--class", dest="signal_class", choices=[c.value for c in SignalClass])
    e.add_argument("--oversample", type=int)
    e.add_argument("--out", default="bla.csv")
    e.set_defaults(func=cmd_estimate)
    return p


_CONFIG_KEYS = {"seed", "out_dir", "rms", "instances", "group_size", "random_count", "classes"}


def _apply_config(args) -> None:
    path = getattr(args, "config", None)
    if not path:
        return
    data = json.loads(Path(path).read_text())
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for key, value in data.items():
        if key == "rms" and not isinstance(value, list):
            value = [value]
        setattr(args, key, value)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        if args.command == "reproduce" and args.instances is not None and args.instances < 1:
            raise UsageError("--instances must be >= 1")
        return args.func(args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
