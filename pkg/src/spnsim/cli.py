"""Command-line surface: validate, example, simulate, certify, drift, analyze.

Every command writes deterministic artifacts for a given (config, seed) pair.
Exit codes: 0 ok; 2 certificate violated, or verdict diverging under
--expect-stable; 3 input/configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import config_io, diagnostics, engine, examples, lyapunov, network, scheduling
from .config_io import ConfigError

EXIT_OK = 0
EXIT_VIOLATED = 2
EXIT_CONFIG = 3


def _common_flags(p: argparse.ArgumentParser, seed_required: bool = False) -> None:
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", choices=("csv", "tsv"), default="csv")
    p.add_argument("--seed", type=int, required=seed_required,
                   default=None if seed_required else 0)


def _spec_source(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--spec", help="network spec file (TOML)")
    group.add_argument("--example", dest="example_name",
                       choices=examples.example_names(), help="builtin example")


def _load_net(args) -> network.ValidatedNetwork:
    if args.spec:
        spec = config_io.load_network(args.spec)
    else:
        spec, _ = examples.build_example(args.example_name)
    return network.validate(spec)


def _delimiter(args) -> str:
    return "\t" if args.format == "tsv" else ","


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _policy(args, epsilon: float) -> scheduling.Policy:
    order = ()
    if args.priority_order:
        order = tuple(int(x) - 1 for x in args.priority_order.split(","))
    return scheduling.parse_policy(args.policy, epsilon=epsilon, order=order)


def _parse_backlog(text: str) -> tuple[tuple[int, int, int], ...]:
    """buffer:count[@counter] items, comma separated, 1-based buffers."""
    if not text:
        return ()
    out = []
    for item in text.split(","):
        head, _, count = item.partition(":")
        buffer, _, counter = head.partition("@")
        out.append((int(buffer) - 1, int(counter) if counter else 1, int(count)))
    return tuple(out)


def _default_coupling(net, args):
    """Coupling from --z, else the matching closed-form constructor."""
    if args.z:
        return config_io.load_coupling(args.z), None
    try:
        return lyapunov.construct_psn(net)
    except (lyapunov.AssumptionA1Violated, lyapunov.AssumptionA2Violated):
        pass
    try:
        return lyapunov.construct_comm(net)
    except (lyapunov.NotSynchronized, lyapunov.AssumptionB1Violated):
        raise ConfigError(
            "no closed-form certificate applies to this network; pass --z FILE")


# ---------------------------------------------------------------------------
# subcommands


def cmd_example(args) -> int:
    spec, desc = examples.build_example(args.name, unstable=args.unstable)
    out = _outdir(args)
    suffix = "-unstable" if args.unstable else ""
    path = out / f"{args.name}{suffix}.toml"
    config_io.dump_network(spec, path, header=desc)
    print(path)
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.spec:
        spec = config_io.load_network(args.spec)
    else:
        spec, _ = examples.build_example(args.example_name)
    problems = network.check_spec(spec)
    if problems:
        for msg in problems:
            print(f"violation: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    net = network.validate(spec)
    bound = network.routes_bounded(net)
    report = {
        "buffers": net.num_buffers,
        "activities": net.num_activities,
        "processors": net.num_processors,
        "components": net.num_components,
        "synchronized": net.synchronized,
        "routes_bounded": bound if bound is not None else -1,
    }
    for i in range(net.num_buffers):
        report[f"throughput_{i + 1}"] = float(net.throughput[i])
        report[f"load_{i + 1}"] = float(net.load[i])
    sys.stdout.write(diagnostics.format_report(report))
    return EXIT_OK


def cmd_simulate(args) -> int:
    net = _load_net(args)
    policy = _policy(args, args.epsilon)
    opts = engine.SimOptions(
        horizon=args.horizon,
        sample_interval=args.sample_interval,
        seed=args.seed,
        predraw_depth=args.predraw_depth,
        counter_cap=args.counter_cap,
        replications=args.replications,
        audit=args.audit,
        random_ties=args.random_ties,
        initial_backlog=_parse_backlog(args.backlog),
    )
    trajectories = engine.run_replications(net, policy, opts)
    out = _outdir(args)
    ext = "tsv" if args.format == "tsv" else "csv"
    verdicts = []
    for traj in trajectories:
        engine.write_trajectory_csv(traj, out / f"trajectory_seed{traj.seed}.{ext}",
                                    delimiter=_delimiter(args))
        diagnostics.write_summary(traj, out / f"summary_seed{traj.seed}.toml")
        verdicts.append(diagnostics.stability_estimate(traj).verdict)
    mean_report = diagnostics.stability_estimate(trajectories)
    pairs = {
        "policy": policy.name,
        "replications": len(trajectories),
        "verdict": mean_report.verdict,
        "time_avg_norm": mean_report.time_avg_norm,
        "tail_slope": mean_report.tail_slope,
        "tail_middle_ratio": mean_report.tail_middle_ratio,
    }
    for traj, verdict in zip(trajectories, verdicts):
        pairs[f"verdict_seed{traj.seed}"] = verdict
    if args.audit:
        violations = sum(t.audit.total_violations() for t in trajectories)
        pairs["audit_violations"] = violations
    text = diagnostics.format_report(pairs)
    (out / "stability_report.toml").write_text(text, encoding="ascii")
    sys.stdout.write(text)
    if args.expect_stable and mean_report.verdict == "diverging":
        return EXIT_VIOLATED
    return EXIT_OK


def cmd_certify(args) -> int:
    net = _load_net(args)
    coupling, bound = _default_coupling(net, args)
    slack = args.epsilon
    result = lyapunov.check_local(coupling, net, slack)
    pairs = {"holds": result.holds, "epsilon": slack}
    if bound is not None:
        pairs["slack_bound"] = bound
    if result.holds:
        pairs["eta"] = result.eta
        pairs["constant"] = result.constant
    else:
        w = result.witness
        pairs["witness_buffer"] = w.buffer + 1
        pairs["witness_margin"] = w.margin
        pairs["witness_schedule"] = "".join(str(x) for x in w.schedule)
        pairs["witness_pattern"] = "".join(str(x) for x in w.pattern)
    if args.max_slack:
        sup = lyapunov.max_slack(coupling, net)
        pairs["max_slack"] = -1.0 if sup is None else sup
    if args.condition:
        cond = args.condition.replace("'", "p")
        pairs[f"condition_{cond}"] = lyapunov.check_structural(coupling, net, cond)
    violations = 0
    if args.samples > 0 and result.holds:
        rng = engine.substream(args.seed, "sample-check")
        violations = lyapunov.sample_check(
            coupling, net, slack, result.eta, result.constant, args.samples, rng)
        pairs["sample_violations"] = violations
    text = diagnostics.format_report(pairs)
    out = _outdir(args)
    (out / "certificate_report.toml").write_text(text, encoding="ascii")
    sys.stdout.write(text)
    return EXIT_OK if result.holds and violations == 0 else EXIT_VIOLATED


def cmd_drift(args) -> int:
    net = _load_net(args)
    coupling, bound = _default_coupling(net, args)
    slack = args.epsilon if args.epsilon is not None else (
        bound / 2.0 if bound else 0.1)
    cert = lyapunov.make_certificate(coupling, net, slack)
    constants = diagnostics.global_constants(net, cert)
    evaluator = diagnostics.GlobalEvaluator(net, cert, constants)
    policy = _policy(args, args.policy_epsilon)
    opts = engine.SimOptions(
        horizon=args.horizon,
        sample_interval=float(constants.window),
        seed=args.seed,
        predraw_depth=constants.depth,
        audit=args.audit,
        initial_backlog=_parse_backlog(args.backlog),
    )
    traj = engine.simulate(net, policy, opts, evaluator=evaluator)
    report = diagnostics.drift_estimate(traj)
    out = _outdir(args)
    ext = "tsv" if args.format == "tsv" else "csv"
    engine.write_trajectory_csv(traj, out / f"trajectory_seed{traj.seed}.{ext}",
                                delimiter=_delimiter(args))
    diagnostics.write_drift_csv(report, out / f"drift_bins_seed{traj.seed}.{ext}",
                                delimiter=_delimiter(args))
    pairs = {
        "verdict": report.verdict,
        "decay_rate": report.decay_rate,
        "top_bins_negative": report.top_bins_negative,
        "top_bins_significant": report.top_bins_significant,
        "increments": report.increments,
        "window": constants.window,
        "depth": constants.depth,
        "shared_constant": constants.shared_constant,
        "counted_drift": constants.counted_drift,
    }
    if args.audit:
        pairs["audit_violations"] = traj.audit.total_violations()
    text = diagnostics.format_report(pairs)
    (out / "drift_report.toml").write_text(text, encoding="ascii")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_analyze(args) -> int:
    trajectories = [engine.read_trajectory_csv(p) for p in args.trajectories]
    report = diagnostics.stability_estimate(trajectories)
    pairs = {
        "verdict": report.verdict,
        "time_avg_norm": report.time_avg_norm,
        "tail_slope": report.tail_slope,
        "tail_middle_ratio": report.tail_middle_ratio,
        "samples": report.samples,
    }
    text = diagnostics.format_report(pairs)
    out = _outdir(args)
    (out / "stability_report.toml").write_text(text, encoding="ascii")
    sys.stdout.write(text)
    if args.expect_stable and report.verdict == "diverging":
        return EXIT_VIOLATED
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spnsim",
        description="simulate stochastic processing networks and check "
                    "quadratic drift certificates")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("example", help="write a builtin example spec file")
    p.add_argument("name", choices=examples.example_names())
    p.add_argument("--unstable", action="store_true")
    _common_flags(p)
    p.set_defaults(fn=cmd_example)

    p = sub.add_parser("validate", help="check a spec and print derived loads")
    _spec_source(p)
    _common_flags(p)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("simulate", help="run replications and report stability")
    _spec_source(p)
    p.add_argument("--policy", required=True,
                   choices=("lrfs", "eps-lrfs", "static-priority"))
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--priority-order", default="",
                   help="comma-separated 1-based buffer ids, highest first")
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--sample-interval", type=float, default=0.0)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--predraw-depth", type=int, default=0)
    p.add_argument("--counter-cap", type=int, default=0)
    p.add_argument("--audit", action="store_true")
    p.add_argument("--random-ties", action="store_true")
    p.add_argument("--backlog", default="",
                   help="initial jobs, e.g. 1:200 or 1@2:50,3:10 (buffer[@counter]:count)")
    p.add_argument("--expect-stable", action="store_true")
    _common_flags(p, seed_required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("certify", help="check a quadratic certificate")
    _spec_source(p)
    p.add_argument("--z", help="coupling matrix file (TOML)")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--max-slack", action="store_true")
    p.add_argument("--condition", choices=("C1", "C2", "C2p", "C3", "C3p"))
    p.add_argument("--samples", type=int, default=0)
    _common_flags(p)
    p.set_defaults(fn=cmd_certify)

    p = sub.add_parser("drift", help="run in route-pre-draw mode and bin the "
                                     "global Lyapunov increments")
    _spec_source(p)
    p.add_argument("--policy", required=True,
                   choices=("lrfs", "eps-lrfs", "static-priority"))
    p.add_argument("--epsilon", type=float, default=None,
                   help="certificate slack (default: half the closed-form bound)")
    p.add_argument("--policy-epsilon", type=float, default=0.0)
    p.add_argument("--priority-order", default="")
    p.add_argument("--z", help="coupling matrix file (TOML)")
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--backlog", default="")
    p.add_argument("--audit", action="store_true")
    _common_flags(p, seed_required=True)
    p.set_defaults(fn=cmd_drift)

    p = sub.add_parser("analyze", help="stability report from trajectory files")
    p.add_argument("trajectories", nargs="+")
    p.add_argument("--expect-stable", action="store_true")
    _common_flags(p)
    p.set_defaults(fn=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad input; map to the documented config code
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except (ConfigError, network.InvalidNetwork, examples.UnknownExample,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
