"""Command-line entry point: ``distaudit <command> ...``.

Exit status: 0 on success, 2 on invalid arguments or configuration,
1 on runtime errors.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__, analysis, gf, setrecon, sobol, strrecon
from .errors import ConfigError, DistAuditError, InvalidParameterError


class _ArgError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def cmd_gen_sobol(args) -> int:
    poly = sobol.primitive_polynomial(args.degree, args.poly_index)
    key = sobol.SobolKey(poly, tuple(args.init), args.constant, args.len, args.skip, args.leap)
    seq = sobol.generate(key).tolist()
    if args.format == "json":
        print(json.dumps(seq))
    else:
        print("\n".join(str(x) for x in seq))
    return 0


def cmd_gf_roots(args) -> int:
    if not gf.is_prime(args.q):
        raise InvalidParameterError(f"q={args.q} is not prime")
    f = gf.Poly(args.poly, args.q)
    if f.is_zero():
        raise InvalidParameterError("zero polynomial")
    f = f.monic()
    sf = gf.is_square_free(f)
    sp = gf.splits_into_linear(f)
    print(f"f(Z) = {f} over GF({args.q})")
    print(f"square-free: {str(sf).lower()}")
    print(f"splits into linear factors: {str(sp).lower()}")
    if not (sf and sp):
        print("roots: not recoverable (repeated or non-linear factors)")
        return 1
    roots = sorted(gf.find_roots(f, np.random.default_rng(args.seed)))
    print("roots: " + " ".join(str(r) for r in roots))
    return 0


def _print_cycles(name: str, g, decorated: str) -> int:
    cycles = strrecon.enumerate_cycles(g)
    raw, distinct = strrecon.count_cycles_best(g)
    par = 1
    for m in g.multiplicities():
        par *= math.factorial(m)
    print(f"host {name}: {len(cycles)} Eulerian cycles enumerated; BEST raw={raw} distinct={distinct} "
          f"(distinct x prod a_ij! = {distinct * par})")
    for i, c in enumerate(cycles, start=1):
        mark = "  <- own string" if c == decorated else ""
        print(f"  cycle {i:>3}: {c}{mark}")
    idx = strrecon.cycle_index(g, decorated)
    print(f"  index n_{name} = {idx}")
    return idx


def cmd_recon_demo(args) -> int:
    a, b, l_m = args.a, args.b, args.lm
    codec = strrecon.PieceCodec.compact(l_m) if args.hash == "compact" else strrecon.PieceCodec(l_m)
    print(f"host A: {a}\nhost B: {b}\nmask length l_m = {l_m}\n")
    hosts = {}
    for name, s in (("A", a), ("B", b)):
        ms = strrecon.shred(s, l_m)
        print(f"MS_{name} = {{{', '.join(ms.pieces)}}}")
        hosts[name] = ms
    print()
    idx = {}
    for name, s in (("A", a), ("B", b)):
        idx[name] = _print_cycles(name, strrecon.build_graph(hosts[name]), f"${s}$")
    print()
    tables = {n: codec.table(ms) for n, ms in hosts.items()}
    for n, t in tables.items():
        entries = ", ".join(f"{p}x{c}->{v}" for v, (p, c) in sorted(t.items(), key=lambda kv: kv[1]))
        print(f"S_{n} = {sorted(t)}   [{entries}]")
    if args.hash == "compact":
        config = setrecon.ReconConfig(args.m_bar, args.q)
    else:
        config = codec.recon_config(args.m_bar)
    print(f"\nreconciling over GF({config.q}) with m_bar = {config.m_bar}, points {list(config.eval_points)}")
    ev = {n: setrecon.char_poly_eval(t, config) for n, t in tables.items()}
    for n, e in ev.items():
        print(f"chi_{n}: |S_{n}| = {e.cardinality}, pairs {[tuple(p) for p in e.pairs]}")
    q = config.q
    ratios = [va * pow(vb, -1, q) % q for (_, va), (_, vb) in zip(ev["A"].pairs, ev["B"].pairs)]
    print(f"f(z) = chi_A(z)/chi_B(z) at the points: {ratios}")
    d = ev["A"].cardinality - ev["B"].cardinality
    rf = gf.interpolate_rational(list(zip([z % q for z in config.eval_points], ratios)), config.m_bar, d, q)
    print(f"interpolated f(Z) = {rf}")
    rng = np.random.default_rng(args.seed)
    only_a, only_b = setrecon.reconcile(tables["B"], ev["A"], config, rng)
    print(f"S_A \\ S_B = {sorted(only_a)}   S_B \\ S_A = {sorted(only_b)}")
    send_a = {tables["A"][v][0]: tables["A"][v][1] for v in only_a}
    send_b = {tables["B"][v][0]: tables["B"][v][1] for v in only_b}
    print(f"A sends {send_a} and n_A = {idx['A']}; B sends {send_b} and n_B = {idx['B']}")
    ms_a_at_b = hosts["B"].replace_entries(send_b, send_a)
    ms_b_at_a = hosts["A"].replace_entries(send_a, send_b)
    print(f"B rebuilds MS_A = {{{', '.join(ms_a_at_b.pieces)}}}")
    print(f"A rebuilds MS_B = {{{', '.join(ms_b_at_a.pieces)}}}")
    b_learns = strrecon.cycle_at(strrecon.build_graph(ms_a_at_b), idx["A"])[1:-1]
    a_learns = strrecon.cycle_at(strrecon.build_graph(ms_b_at_a), idx["B"])[1:-1]
    print(f"\nA learns sigma_B = {a_learns}\nB learns sigma_A = {b_learns}")
    ok = a_learns == b and b_learns == a
    print("result: " + ("both hosts hold each other's string" if ok else "MISMATCH"))
    return 0 if ok else 1


def _write(path: str, text: str) -> None:
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _report_text(outcomes) -> str:
    buf = io.StringIO()
    analysis.write_report_csv((r for o in outcomes for r in o.report_rows()), buf)
    return buf.getvalue()


def _analysis_texts(matrix: analysis.TrialMatrix) -> tuple[str, str]:
    rows = analysis.summarize(matrix)
    if len(rows) < 2:
        fit = json.dumps({"A": None, "B": None, "residual": None}) + "\n"
    else:
        fit = analysis.fit_json(analysis.fit_matrix(matrix))
    return analysis.summary_csv(rows), fit


def cmd_audit(args) -> int:
    from .experiment import ProtocolConfig, load_scenario, run_trials
    if args.trials < 1:
        raise _ArgError("--trials must be >= 1")
    scn = load_scenario(args.scenario)
    try:
        pc = ProtocolConfig(args.protocol, args.subtpas, args.threshold, args.stop_policy, args.sample_pct,
                            args.tdk_ones, args.overlap, args.overlap_mode, args.near_range, args.mode,
                            args.degree, args.sequence)
        pc.threshold_config()
    except InvalidParameterError as exc:
        raise _ArgError(str(exc)) from exc
    outcomes = run_trials(scn, pc, args.trials, args.seed)
    _write(args.out, _report_text(outcomes))
    for o in outcomes:
        print(f"trial {o.trial}: {len(o.detected_set)} of {len(o.corrupted)} corrupted blocks found "
              f"({o.total_detected} mismatches reported), {len(o.signals)} signals, {o.stop_reason}")
    return 0


def cmd_analyze(args) -> int:
    with open(args.report, encoding="utf-8") as fh:
        rows = analysis.read_report_csv(fh)
    matrix = analysis.TrialMatrix.from_report_rows(rows)
    summary, fit = _analysis_texts(matrix)
    _write(args.summary, summary)
    _write(args.fit, fit)
    print(summary, end="")
    print(fit, end="")
    return 0


def cmd_run(args) -> int:
    from .experiment import load_experiment, run_trials
    cfg = load_experiment(args.config)
    outcomes = run_trials(cfg.scenario, cfg.protocol, cfg.trials, cfg.seed)
    report = _report_text(outcomes)
    matrix = analysis.TrialMatrix.from_outcomes(outcomes)
    summary, fit = _analysis_texts(matrix)
    for name, text in ((cfg.report, report), (cfg.summary, summary), (cfg.fit, fit)):
        _write(cfg.resolve(name, args.out_dir), text)
    totals = " ".join(str(int(t)) for t in matrix.column_totals)
    print(f"{cfg.trials} trials, per-trial detected totals: {totals}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="distaudit", description="Distributed storage audit simulator")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-sobol", help="emit a Sobol block sequence")
    g.add_argument("--degree", type=int, required=True)
    g.add_argument("--poly-index", type=int, default=0, help="0-based index into the ordered primitive polynomials")
    g.add_argument("--init", type=_int_list, required=True, help="m_1,...,m_d")
    g.add_argument("--constant", type=int, required=True)
    g.add_argument("--len", type=int, required=True)
    g.add_argument("--skip", type=int, default=0)
    g.add_argument("--leap", type=int, default=0)
    g.add_argument("--format", choices=("lines", "json"), default="lines")
    g.set_defaults(func=cmd_gen_sobol)

    r = sub.add_parser("gf-roots", help="roots of a polynomial over GF(q)")
    r.add_argument("--q", type=int, required=True)
    r.add_argument("--poly", type=_int_list, required=True, help="coefficients, lowest degree first")
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(func=cmd_gf_roots)

    d = sub.add_parser("recon-demo", help="string reconciliation walk-through")
    d.add_argument("--a", default="10010101")
    d.add_argument("--b", default="101101001")
    d.add_argument("--lm", type=int, default=3)
    d.add_argument("--m-bar", type=int, default=5)
    d.add_argument("--q", type=int, default=83)
    d.add_argument("--hash", choices=("compact", "injective"), default="compact")
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_recon_demo)

    a = sub.add_parser("audit", help="run audit trials and write a report CSV")
    a.add_argument("--protocol", type=int, choices=(1, 2, 3, 4), required=True)
    a.add_argument("--scenario", required=True)
    a.add_argument("--subtpas", type=int, required=True)
    a.add_argument("--threshold", type=int)
    a.add_argument("--stop-policy", choices=("run-to-completion", "stop-on-m"), default="run-to-completion")
    a.add_argument("--sample-pct", type=float, default=20.0)
    a.add_argument("--tdk-ones", type=int, default=3)
    a.add_argument("--overlap", type=float, default=0.0)
    a.add_argument("--overlap-mode", choices=("distributed", "shared", "per-key"), default="distributed")
    a.add_argument("--near-range", type=int, default=0)
    a.add_argument("--trials", type=int, default=1)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--degree", type=int, default=10)
    a.add_argument("--sequence", choices=("sobol", "random"), default="sobol")
    a.add_argument("--mode", choices=("sequential", "concurrent"), default="sequential")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_audit)

    z = sub.add_parser("analyze", help="summarise a report CSV")
    z.add_argument("--report", required=True)
    z.add_argument("--summary", required=True)
    z.add_argument("--fit", required=True)
    z.set_defaults(func=cmd_analyze)

    x = sub.add_parser("run", help="run an experiment described by a YAML config")
    x.add_argument("config")
    x.add_argument("--out-dir", help="write outputs here instead of next to the config")
    x.set_defaults(func=cmd_run)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, _ArgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvalidParameterError as exc:
        if args.command in ("gen-sobol", "gf-roots", "recon-demo"):
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DistAuditError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
