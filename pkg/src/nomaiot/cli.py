"""Batch command line: ``nomaiot {bounds,outage,link,system,pool,profiles}``.

Curves go out as CSV with a commented manifest header; reports as JSON with a
top-level ``manifest`` field.  Data rows depend only on the parameters and the
seed, never on ``--threads``.

Exit codes: 0 success, 1 self-check failed, 2 usage error,
3 complexity guard or infeasible configuration, 4 numerical non-convergence.
"""
import argparse
import csv
import io
import json
import math
import sys
import time

import numpy as np

from . import __version__, bounds, macsim, phy, sysmodel
from ._backend import NAME as BACKEND
from .errors import ComplexityGuardError, ConvergenceError, InfeasibleError
from .link import RECEIVERS, LinkScenario, link_level_run

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_GUARD, EXIT_NUMERIC = 0, 1, 2, 3, 4


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(float(x), ".9g")
    return str(x)


# -- argument types ---------------------------------------------------------

def float_list(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def int_list(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")


def grid(text):
    """``start:stop:step`` (inclusive stop) or a comma list."""
    text = str(text)
    if ":" in text:
        try:
            a, b, step = (float(v) for v in text.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"grid must be start:stop:step, got {text!r}")
        if step <= 0 or b < a:
            raise argparse.ArgumentTypeError("grid needs step > 0 and stop >= start")
        n = int(math.floor((b - a) / step + 1e-9)) + 1
        return [round(a + i * step, 12) for i in range(n)]
    return float_list(text)


def probability(text):
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError(f"probability must lie in [0, 1], got {p}")
    return p


def open_probability(text):
    p = probability(text)
    if p in (0.0, 1.0):
        raise argparse.ArgumentTypeError("probability must lie strictly inside (0, 1)")
    return p


def positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


# -- output -----------------------------------------------------------------

def manifest(args, started) -> dict:
    params = {k: v for k, v in sorted(vars(args).items())
              if k not in ("func", "out", "config", "command")}
    return {
        "subcommand": args.command,
        "parameters": params,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "backend": BACKEND,
        "duration_s": round(time.perf_counter() - started, 3),
    }


def write_csv(args, started, header, rows, extra=None):
    man = manifest(args, started)
    if extra:
        man.update(extra)
    buf = io.StringIO()
    for key, value in man.items():
        buf.write(f"# {key}: {json.dumps(value, sort_keys=True, default=str)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    emit(args, buf.getvalue())


def write_json(args, started, payload):
    doc = {"manifest": manifest(args, started)}
    doc.update(payload)
    emit(args, json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def emit(args, text):
    if getattr(args, "out", None):
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- subcommands ------------------------------------------------------------

def cmd_bounds(args):
    started = time.perf_counter()
    spec = bounds.LoadCurveSpec(args.k, args.eps, args.mu_grid, args.finite_n)
    rows = []
    for mu in spec.mu_grid:
        asym = bounds.oma_required_total_ebn0(spec, mu, "asymptotic")
        disp = bounds.oma_required_total_ebn0(spec, mu, "dispersion_corrected")
        noma = bounds.noma_required_total_ebn0(spec, mu, args.trials, args.seed, args.threads)
        flags = ";".join(f"{name}={p.flag}" for name, p in
                         (("oma_asym", asym), ("oma_disp", disp), ("noma", noma)) if p.flag)
        rows.append([mu, asym.ebn0_db, disp.ebn0_db, noma.ebn0_db, flags])
    write_csv(args, started,
              ["mu", "oma_ebn0_dB_asymptotic", "oma_ebn0_dB_dispersion", "noma_ebn0_dB", "flags"],
              rows)
    return EXIT_OK


def cmd_outage(args):
    started = time.perf_counter()
    K_list = sorted(set([1] + list(args.K_list)))
    for K in K_list:
        if K > macsim.MAX_SUBSET_USERS:
            raise ComplexityGuardError(
                f"K={K} exceeds the K<={macsim.MAX_SUBSET_USERS} subset-enumeration guard")
    curves = macsim.op_curve(K_list, args.rsum, args.snr_grid, args.trials, args.seed,
                             args.threads)
    rows = [[K, args.rsum, pt.x, pt.p_hat, pt.half_width_95]
            for K in K_list for pt in curves[K]]
    write_csv(args, started, ["K", "R_sum", "snr_dB", "p_hat", "ci_half_width"], rows)
    if args.self_check:
        ok = True
        for pt in curves[1]:
            p = macsim.analytic_op_single_user(args.rsum, 10 ** (pt.x / 10))
            se = math.sqrt(max(p * (1 - p), 1e-300) / args.trials)
            good = abs(pt.p_hat - p) <= 3 * se
            ok &= good
            print(f"self-check K=1 snr={pt.x:g} dB: mc={pt.p_hat:.6g} analytic={p:.6g} "
                  f"{'PASS' if good else 'FAIL'}", file=sys.stderr)
        return EXIT_OK if ok else EXIT_CHECK
    return EXIT_OK


def _scenario(args, receiver, snr):
    sc = LinkScenario(
        users=args.users, spread_len=args.spread_len, pool_kind=args.pool,
        pool_size=args.pool_size, pool_seed=args.pool_seed, snr_db=snr,
        payload_bits=args.payload, receiver=receiver, csi=args.csi,
        pilot_kind=args.pilot_kind, pilot_len=args.pilot_len, trials=args.trials,
        seed=args.seed, scma=args.scma, signature_pick=args.signature_pick,
        sic_rounds=args.sic_rounds, noiseless=args.noiseless)
    if args.pool_file:
        with open(args.pool_file) as fh:
            pool = phy.SequencePool.from_json(fh.read())
        sc.signatures = pool.sequences[:, :args.users]
    return sc


def cmd_link(args):
    started = time.perf_counter()
    receivers = args.receiver
    for r in receivers:
        if r not in RECEIVERS:
            raise argparse.ArgumentTypeError(f"unknown receiver {r!r}")
    for r in receivers:
        _scenario(args, r, args.snr_grid[0]).validate()
    rows, results, digest = [], {}, None
    for r in receivers:
        for snr in args.snr_grid:
            res = link_level_run(_scenario(args, r, snr), args.threads)
            digest = res.pool_digest
            results[(r, snr)] = res
            for u in range(args.users):
                rows.append([r, snr, u, float(res.ber[u]), float(res.bler[u])])
    write_csv(args, started, ["receiver", "snr_dB", "user", "ber", "bler"], rows,
              {"signature_pool_sha256": digest})
    if args.self_check:
        return _link_self_check(args, results)
    return EXIT_OK


def _link_self_check(args, results):
    ok = True
    for snr in args.snr_grid:
        ber = {}
        for r in ("ml", "sic", "mmse"):
            res = results.get((r, snr)) or link_level_run(_scenario(args, r, snr), args.threads)
            ber[r] = float(np.mean(res.ber))
        n = args.trials * args.payload * args.users
        for a, b in (("ml", "sic"), ("sic", "mmse")):
            se = math.sqrt((ber[a] * (1 - ber[a]) + ber[b] * (1 - ber[b])) / n)
            good = ber[a] <= ber[b] + 3 * se
            ok &= good
            print(f"self-check snr={snr:g} dB: BER({a})={ber[a]:.6g} <= BER({b})={ber[b]:.6g} "
                  f"{'PASS' if good else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_system(args):
    started = time.perf_counter()
    traffic = sysmodel.TrafficModel(args.devices, args.pa, args.payload)
    reports = sysmodel.run_aloha_frame(traffic, args.pool, args.slots, args.seed, args.threads)
    if args.profiles:
        profs = sysmodel.load_profiles(args.profiles)
        gb, gf = profs["grant-based"], profs["grant-free"]
    else:
        gb, gf = sysmodel.default_profiles()
    write_json(args, started, {
        "aloha": sysmodel.aloha_summary(reports, traffic, args.pool),
        "overhead": sysmodel.overhead_compare(gb, gf, args.payload),
        "profiles": [gb.to_dict(), gf.to_dict()],
    })
    return EXIT_OK


def cmd_pool(args):
    pool = phy.generate_sequence_pool(args.L, args.M, args.kind, args.seed)
    emit(args, pool.to_json() + "\n")
    return EXIT_OK


def cmd_profiles(args):
    gb, gf = sysmodel.default_profiles()
    emit(args, json.dumps({"profiles": [gb.to_dict(), gf.to_dict()]}, indent=2) + "\n")
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=positive_int, default=1)
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--config", help="JSON file of parameter values; explicit flags win")

    p = argparse.ArgumentParser(prog="nomaiot", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", parents=[common], help="load vs total Eb/N0 curves")
    b.add_argument("--k", type=float, default=100.0, help="information bits per packet")
    b.add_argument("--eps", type=open_probability, default=0.01)
    b.add_argument("--mu-grid", type=float_list,
                   default=[0.01, 0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14, 0.16, 0.18])
    b.add_argument("--finite-n", type=positive_int, default=100)
    b.add_argument("--trials", type=positive_int, default=200_000)
    b.set_defaults(func=cmd_bounds)

    o = sub.add_parser("outage", parents=[common], help="individual outage vs total SNR")
    o.add_argument("--K-list", type=int_list, default=[1, 2, 4, 8, 16])
    o.add_argument("--rsum", type=float, default=3.0)
    o.add_argument("--snr-grid", type=grid, default=grid("0:60:2"))
    o.add_argument("--trials", type=positive_int, default=200_000)
    o.add_argument("--self-check", action="store_true")
    o.set_defaults(func=cmd_outage)

    lk = sub.add_parser("link", parents=[common], help="uncoded link-level BER/BLER")
    lk.add_argument("--users", type=positive_int, default=4)
    lk.add_argument("--spread-len", type=positive_int, default=4)
    lk.add_argument("--pool", choices=phy.POOL_KINDS, default="random_qpsk")
    lk.add_argument("--pool-size", type=positive_int)
    lk.add_argument("--pool-seed", type=int, default=4)
    lk.add_argument("--pool-file", help="signature pool JSON (from `nomaiot pool`)")
    lk.add_argument("--receiver", type=lambda s: s.split(","), default=["mmse"],
                    help="comma list of mmse, sic, ml")
    lk.add_argument("--snr-grid", type=grid, default=[10.0])
    lk.add_argument("--trials", type=positive_int, default=1000)
    lk.add_argument("--payload", type=positive_int, default=100)
    lk.add_argument("--scma", action="store_true")
    lk.add_argument("--csi", choices=["perfect", "ls"], default="perfect")
    lk.add_argument("--pilot-kind", choices=["orthogonal", "nonorthogonal"], default="orthogonal")
    lk.add_argument("--pilot-len", type=positive_int, default=8)
    lk.add_argument("--signature-pick", choices=["fixed", "random"], default="fixed")
    lk.add_argument("--sic-rounds", type=positive_int, default=1)
    lk.add_argument("--noiseless", action="store_true")
    lk.add_argument("--self-check", action="store_true")
    lk.set_defaults(func=cmd_link)

    s = sub.add_parser("system", parents=[common], help="Aloha contention and overhead report")
    s.add_argument("--devices", type=int, default=1000)
    s.add_argument("--pa", type=probability, default=0.005)
    s.add_argument("--pool", type=positive_int, default=64)
    s.add_argument("--slots", type=positive_int, default=10_000)
    s.add_argument("--payload", type=positive_int, default=100)
    s.add_argument("--profiles", help="overhead profile JSON (see `nomaiot profiles`)")
    s.set_defaults(func=cmd_system)

    pl = sub.add_parser("pool", parents=[common], help="export a signature pool as JSON")
    pl.add_argument("--L", type=positive_int, default=4)
    pl.add_argument("--M", type=positive_int, default=64)
    pl.add_argument("--kind", choices=phy.POOL_KINDS, default="random_qpsk")
    pl.set_defaults(func=cmd_pool)

    pr = sub.add_parser("profiles", parents=[common], help="dump default overhead profiles")
    pr.set_defaults(func=cmd_profiles)
    return p


def parse_args(parser, argv):
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config) as fh:
            cfg = {k.replace("-", "_"): v for k, v in json.load(fh).items()}
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        typed = {}
        for action in subparser._actions:
            if action.dest in cfg:
                v = cfg[action.dest]
                if action.type is not None and isinstance(v, str):
                    v = action.type(v)
                elif action.type in (float_list, int_list, grid) and isinstance(v, (int, float)):
                    v = [v]
                typed[action.dest] = v
        unknown = set(cfg) - {a.dest for a in subparser._actions}
        if unknown:
            parser.error(f"unknown config keys: {sorted(unknown)}")
        subparser.set_defaults(**typed)
        args = parser.parse_args(argv)
    return args


def main(argv=None):
    parser = build_parser()
    try:
        args = parse_args(parser, argv)
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    try:
        return args.func(args)
    except argparse.ArgumentTypeError as exc:
        print(f"nomaiot: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ComplexityGuardError, InfeasibleError) as exc:
        print(f"nomaiot: guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except ConvergenceError as exc:
        print(f"nomaiot: non-convergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"nomaiot: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
