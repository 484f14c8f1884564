"""Command-line entry point: ``lhsim linkchar | run | sweep``.

``linkchar`` builds (or reuses) the 1%-BLER threshold cache, ``run``
simulates one scheme and writes a metrics table, ``sweep`` produces the
trend tables (HCG fraction, distance profile, drop radius). All outputs
are plain text with `#`-prefixed metadata headers so any result file can
be regenerated from its embedded config hash and seed.
"""
import argparse
import os
import sys

from lhsim import engine
from lhsim.config import ConfigError, parse_config
from lhsim.linkchar import CacheError, build_threshold_set

SWEEP_KINDS = ("hcg", "distance", "drop_radius")


def _add_common(parser):
    parser.add_argument("--config", default=None,
                        help="key=value configuration file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override run.seed")
    parser.add_argument("--out", default=None, help="override run.out")
    parser.add_argument("--set", action="append", default=[], dest="sets",
                        metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lhsim",
        description="system-level simulator for local and hyper-local "
                    "multicast services")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("linkchar", help="build the link-threshold cache")
    _add_common(p)
    p.add_argument("--force", action="store_true",
                   help="recompute even on a cache hit")

    p = sub.add_parser("run", help="simulate one scheme, write metrics")
    _add_common(p)
    p.add_argument("--scheme", choices=("lhs", "scptm"), default=None)
    p.add_argument("--iterations", type=int, default=None)

    p = sub.add_parser("sweep", help="produce a trend table")
    _add_common(p)
    p.add_argument("kind", choices=SWEEP_KINDS)
    p.add_argument("--iterations", type=int, default=None)
    return parser


def _resolve(args):
    overrides = {}
    for item in args.sets:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, raw = item.partition("=")
        overrides[key.strip()] = raw.strip()
    if args.seed is not None:
        overrides["run.seed"] = args.seed
    if args.out is not None:
        overrides["run.out"] = args.out
    if getattr(args, "scheme", None) is not None:
        overrides["run.scheme"] = args.scheme
    if getattr(args, "iterations", None) is not None:
        overrides["run.iterations"] = args.iterations
    return parse_config(args.config, overrides)


def _write(config, filename, lines):
    out_dir = config["run.out"]
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, filename)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def cmd_linkchar(args):
    config = _resolve(args)
    thresholds = build_threshold_set(config.linkchar_config(),
                                     cache_path=config["run.cache"],
                                     force=args.force)
    print(f"cache: {config['run.cache']}")
    print(f"cqi_subgroup_threshold_db {thresholds.cqi_subgroup_threshold:.4f}")
    print("# alpha layer channel snr_at_target_db")
    for (alpha, layer, kind), snr in sorted(thresholds.snr_at_target.items()):
        print(f"{alpha} {layer} {kind} {snr:.4f}")
    return 0


def cmd_run(args):
    config = _resolve(args)
    report = engine.run_simulation(config)
    name = f"metrics_{report.scheme}_seed{report.seed}.txt"
    text = report.to_text(config.metadata_lines(command="run"))
    path = _write(config, name, [text.rstrip("\n")])
    print(f"wrote {path}")
    return 0


def _sweep_lines(config, kind):
    header = config.metadata_lines(command=f"sweep {kind}")
    if kind == "hcg":
        rows = engine.metric_sweep_hcg(config)
        header.append("# hcg_fraction bl_fraction el_fraction bl_ci el_ci")
        body = [" ".join(f"{x:.6f}" for x in row) for row in rows]
    elif kind == "distance":
        profiles = {mode: engine.metric_distance_profile(config, mode)
                    for mode in ("adaptive", "same_alpha")}
        header.append("# bin_lo_m bin_hi_m n_adaptive hd_adaptive sd_adaptive "
                      "outage_adaptive n_same hd_same sd_same outage_same")
        a, s = profiles["adaptive"], profiles["same_alpha"]
        body = []
        for b in range(len(a.n)):
            body.append(" ".join([
                f"{a.bin_edges[b]:.1f}", f"{a.bin_edges[b + 1]:.1f}",
                f"{a.n[b]}", f"{a.p_hd[b]:.6f}", f"{a.p_sd[b]:.6f}",
                f"{a.p_outage[b]:.6f}",
                f"{s.n[b]}", f"{s.p_hd[b]:.6f}", f"{s.p_sd[b]:.6f}",
                f"{s.p_outage[b]:.6f}"]))
    else:  # drop_radius
        rows = engine.metric_sweep_drop_radius(config)
        header.append("# radius_fraction lhs_served scptm_served "
                      "lhs_ci scptm_ci")
        body = [" ".join(f"{x:.6f}" for x in row) for row in rows]
    return header + body


def cmd_sweep(args):
    config = _resolve(args)
    lines = _sweep_lines(config, args.kind)
    path = _write(config, f"sweep_{args.kind}.txt", lines)
    print(f"wrote {path}")
    return 0


COMMANDS = {"linkchar": cmd_linkchar, "run": cmd_run, "sweep": cmd_sweep}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, CacheError, engine.EngineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
