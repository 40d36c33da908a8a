"""Command-line front end: train, eval, certify, compare.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error. All
artifacts are written atomically (temp file + rename) and JSON artifacts
are checked against the schemas shipped with the package before they hit
disk, so a malformed artifact is a crash here and not a surprise later.
"""

import argparse
import csv
import importlib.resources
import io
import json
import os
import sys
import tempfile

import jsonschema
import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_run_config
from .critic import LyapunovCritic
from .envs.base import ActionScaledEnv
from .lqr import lqr_quadratic_candidate
from .nn import GaussianPolicy, MlpNetwork
from .training import METRIC_FIELDS, polyc_train, run_episode
from .validator import (ClosedLoopSystem, certify_band, certify_slice,
                        landscape_map, monte_carlo_validate)

# which state entries measure tracking error for the eval summary
_TRACK_DIMS = {"path_tracking": (0,), "quadrotor": (0, 1, 2)}

_MODE_ALIASES = {"grid": "full-grid", "full-grid": "full-grid",
                 "slice": "slice", "mc": "monte-carlo",
                 "monte-carlo": "monte-carlo"}


class CliError(Exception):
    """Raised for usage/config problems; maps to exit code 2."""


def _schema(name):
    ref = importlib.resources.files("polyc") / "schemas" / f"{name}.schema.json"
    return json.loads(ref.read_text())


def validate_artifact(kind, doc):
    jsonschema.validate(doc, _schema(kind))


def atomic_write_text(path, text):
    path = os.path.abspath(path)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, doc, schema=None):
    if schema is not None:
        validate_artifact(schema, doc)
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_csv(path, fieldnames, rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


# ------------------------------------------------------------- checkpoints

def checkpoint_dict(config, iteration, result):
    return {
        "format": "polyc-checkpoint",
        "version": __version__,
        "config": config.to_dict(),
        "iter": int(iteration),
        "seed": int(config.seed),
        "beta": float(result.beta_final),
        "policy": result.policy.to_dict(),
        "value_net": result.value_net.to_dict(),
        "critic": {"net": result.critic.net.to_dict(),
                   "origin": result.critic.origin.tolist()},
    }


class Bundle:
    """A loaded checkpoint: config, rebuilt env, and the three networks."""

    def __init__(self, config, env, policy, value_net, critic, meta):
        self.config = config
        self.env = env
        self.policy = policy
        self.value_net = value_net
        self.critic = critic
        self.meta = meta

    def system(self):
        return ClosedLoopSystem.from_policy(self.env, self.policy, self.critic)

    def lqr_system(self):
        """The same policy judged by an LQR-quadratic candidate V built
        from a finite-difference linearization at the equilibrium."""
        candidate, _ = lqr_quadratic_candidate(self.env.base)

        def stepper(states):
            return self.env.dynamics_step_batch(
                states, self.policy.mean(states), None)

        return ClosedLoopSystem(candidate.value_batch, stepper, self.env.dt,
                                self.env.equilibrium)


def load_checkpoint(path, env_overrides=None):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as err:
        raise CliError(f"cannot read checkpoint {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise CliError(f"checkpoint {path} is not valid JSON: {err}") from err
    try:
        validate_artifact("checkpoint", doc)
    except jsonschema.ValidationError as err:
        raise CliError(f"checkpoint {path} fails schema: {err.message}") from err

    config = RunConfig.from_dict(doc["config"])
    if env_overrides:
        config.env_params.update(env_overrides)
    try:
        env = ActionScaledEnv(config.build_env())
    except (ConfigError, TypeError, ValueError) as err:
        raise CliError(f"cannot rebuild environment: {err}") from err
    policy = GaussianPolicy.from_dict(doc["policy"])
    value_net = MlpNetwork.from_dict(doc["value_net"])
    critic = LyapunovCritic(MlpNetwork.from_dict(doc["critic"]["net"]),
                            np.asarray(doc["critic"]["origin"]))
    n, m = env.state_dim, env.action_dim
    if (policy.mean_net.layer_widths[0] != n or policy.action_dim != m
            or critic.net.layer_widths[0] != n or len(critic.origin) != n):
        raise CliError(
            f"checkpoint {path} is incompatible with environment "
            f"{config.env_name!r} (state_dim {n}, action_dim {m})")
    meta = {"iter": doc["iter"], "seed": doc["seed"], "beta": doc["beta"],
            "path": str(path)}
    return Bundle(config, env, policy, value_net, critic, meta)


# ------------------------------------------------------------------- train

def _format_row(row):
    return (f"iter {row['iter'] + 1:4d}  return {row['mean_return']:9.2f}  "
            f"risk {row['lyapunov_risk']:.5f}  lie {row['mean_lie']:+.5f}  "
            f"clip {row['clip_frac']:.3f}  beta {row['beta']:.3f}")


def cmd_train(args):
    config = load_run_config(args.config)
    out = config.output_dir
    env = config.build_env()

    def checkpoint_fn(it, result):
        doc = checkpoint_dict(config, it + 1, result)
        write_json(os.path.join(out, f"checkpoint_{it + 1:06d}.json"), doc,
                   schema="checkpoint")

    def log_fn(row):
        print(_format_row(row))

    try:
        result = polyc_train(env, config.algo, config.seed,
                             checkpoint_fn=checkpoint_fn, log_fn=log_fn)
    except (RuntimeError, FloatingPointError) as err:
        print(f"training aborted: {err}", file=sys.stderr)
        return 1

    rows = [{k: row[k] for k in METRIC_FIELDS} for row in result.metrics]
    write_csv(os.path.join(out, "metrics.csv"), METRIC_FIELDS, rows)
    write_json(os.path.join(out, "final.json"),
               checkpoint_dict(config, config.algo.total_iters, result),
               schema="checkpoint")
    print(f"wrote {out}/metrics.csv and {out}/final.json")
    return 0


# -------------------------------------------------------------------- eval

def _count_wraps(thetas):
    return int(np.sum(np.abs(np.diff(thetas)) > np.pi))


def cmd_eval(args):
    bundle = load_checkpoint(args.checkpoint,
                             env_overrides=_parse_env_overrides(args))
    env = bundle.env
    out = args.output_dir or os.path.join(
        os.path.dirname(os.path.abspath(args.checkpoint)), "eval")
    seed = bundle.config.seed if args.seed is None else args.seed
    rng = np.random.default_rng(seed)
    init_region = None
    if args.init_region is not None:
        init_region = np.asarray(json.loads(args.init_region), dtype=np.float64)
        if init_region.shape != (env.state_dim, 2):
            raise CliError(f"init region must have shape ({env.state_dim}, 2)")

    eq = env.equilibrium
    track = _TRACK_DIMS.get(bundle.config.env_name)
    returns, stabilized, wraps = [], [], []
    no_wrap_stab = []
    track_sq = []
    for ep in range(args.episodes):
        traj = run_episode(env, bundle.policy, rng, init_region=init_region,
                           deterministic=True)
        states, actions, rewards = traj["states"], traj["actions"], traj["rewards"]
        returns.append(float(np.sum(rewards)))
        dist = np.linalg.norm(states - eq, axis=1)
        reached = bool(np.any(dist < args.threshold))
        stabilized.append(reached)
        if bundle.config.env_name == "pendulum":
            w = _count_wraps(states[:, 0])
            wraps.append(w)
            no_wrap_stab.append(reached and w == 0)
        if track is not None:
            track_sq.extend(np.sum(states[:, track] ** 2, axis=1).tolist())
        _write_trajectory(os.path.join(out, f"episode_{ep:03d}.csv"),
                          env, states, actions, rewards)

    summary = {
        "env": bundle.config.env_name,
        "n_episodes": args.episodes,
        "seed": int(seed),
        "threshold": args.threshold,
        "stabilized_fraction": float(np.mean(stabilized)),
        "mean_return": float(np.mean(returns)),
        "episode_returns": returns,
        "tool_version": __version__,
    }
    if init_region is not None:
        summary["init_region"] = init_region.tolist()
    if wraps:
        summary["wrap_events_total"] = int(np.sum(wraps))
        summary["episodes_with_wrap"] = int(np.sum(np.asarray(wraps) > 0))
        summary["no_wrap_stabilized_fraction"] = float(np.mean(no_wrap_stab))
    if track_sq:
        summary["tracking_rms"] = float(np.sqrt(np.mean(track_sq)))
    write_json(os.path.join(out, "eval_summary.json"), summary, schema="eval")
    print(f"stabilized {summary['stabilized_fraction']:.2f} "
          f"mean_return {summary['mean_return']:.2f}"
          + (f" wraps {summary['wrap_events_total']}" if wraps else "")
          + (f" tracking_rms {summary['tracking_rms']:.4f}" if track_sq else ""))
    print(f"wrote {out}/eval_summary.json")
    return 0


def _write_trajectory(path, env, states, actions, rewards):
    n, m = env.state_dim, env.action_dim
    fields = (["t"] + [f"s_{i}" for i in range(n)]
              + [f"a_{j}" for j in range(m)] + ["r"])
    physical = env.map_action(actions)
    rows = []
    for t in range(len(actions)):
        row = {"t": t, "r": float(rewards[t])}
        for i in range(n):
            row[f"s_{i}"] = repr(float(states[t, i]))
        for j in range(m):
            row[f"a_{j}"] = repr(float(physical[t, j]))
        rows.append(row)
    write_csv(path, fields, rows)


def _parse_env_overrides(args):
    if getattr(args, "env_override", None) is None:
        return None
    try:
        overrides = json.loads(args.env_override)
    except json.JSONDecodeError as err:
        raise CliError(f"--env-override is not valid JSON: {err}") from err
    if not isinstance(overrides, dict):
        raise CliError("--env-override must be a JSON object")
    return overrides


# ----------------------------------------------------------------- certify

def _scaled_box(env, scale):
    eq = env.equilibrium[:, None]
    return eq + scale * (env.domain - eq)


def _parse_plane(text):
    try:
        a, b = (int(p) for p in text.split(","))
    except ValueError as err:
        raise CliError(f"plane must be 'i,j', got {text!r}") from err
    return a, b


def _certify_system(system, env, vcfg, seed, mode, plane, mc_samples,
                    box_scale):
    box = _scaled_box(env, box_scale)
    common = dict(a_const=vcfg["a_const"], epsilon_volume=vcfg["epsilon_volume"],
                  margin=vcfg["margin"], max_cells=vcfg["max_cells"],
                  levels=vcfg["levels"], seed=seed)
    if mode == "monte-carlo":
        try:
            report = monte_carlo_validate(system, box, vcfg["a_const"],
                                          mc_samples,
                                          np.random.default_rng(seed))
        except ValueError as err:
            raise CliError(str(err)) from err
        return report, box
    try:
        if mode == "slice":
            report = certify_slice(system, box, plane, env.equilibrium, **common)
        else:
            report = certify_band(system, box, mode="full-grid", **common)
    except ValueError as err:
        raise CliError(str(err)) from err
    return report.to_dict(), box


def cmd_certify(args):
    bundle = load_checkpoint(args.checkpoint)
    env = bundle.env
    vcfg = dict(bundle.config.validator)
    if args.a_const is not None:
        vcfg["a_const"] = args.a_const
    if args.eps_vol is not None:
        vcfg["epsilon_volume"] = args.eps_vol
    if args.margin is not None:
        vcfg["margin"] = args.margin
    if args.max_cells is not None:
        vcfg["max_cells"] = args.max_cells
    mode = _MODE_ALIASES[args.mode] if args.mode else vcfg["mode"]
    plane = _parse_plane(args.plane) if args.plane else tuple(vcfg["slice_axes"])
    mc_samples = args.mc_samples or vcfg["mc_samples"]
    box_scale = vcfg["box_scale"] if args.box_scale is None else args.box_scale

    system = bundle.lqr_system() if args.candidate == "lqr" else bundle.system()
    out = args.output_dir or os.path.join(
        os.path.dirname(os.path.abspath(args.checkpoint)), "certify")

    report, box = _certify_system(system, env, vcfg, bundle.config.seed, mode,
                                  plane, mc_samples, box_scale)
    report["tool_version"] = __version__
    report["env"] = bundle.config.env_name
    report["candidate"] = args.candidate
    report["box"] = np.asarray(box).tolist()
    if args.candidate == "learned" and bundle.critic.net.activation == "relu":
        # Prop-1-style arguments assume V is C1; a relu critic is only
        # piecewise linear, so the verdict carries that caveat with it.
        prior = report.get("note") or ""
        report["note"] = ((prior + "; ") if prior else "") + \
            "relu critic: V is piecewise linear, not C1"
    write_json(os.path.join(out, "report.json"), report, schema="report")

    if mode != "monte-carlo":
        band = tuple(report["band"]) if report["certified"] else None
        doc, svg = landscape_map(system, box, vcfg["a_const"], axes=plane,
                                 fixed_point=env.equilibrium, band=band)
        write_json(os.path.join(out, "landscape.json"), doc, schema="landscape")
        atomic_write_text(os.path.join(out, "landscape.svg"), svg)
        print(f"certified={str(report['certified']).lower()} "
              f"band=[{report['band'][0]:.6g}, {report['band'][1]:.6g}] "
              f"violation_fraction={report['violation_fraction']:.4f} "
              f"mode={report['mode']}")
    else:
        print(f"violation_fraction={report['violation_fraction']:.6f} "
              f"wilson=[{report['wilson_low']:.6f}, {report['wilson_high']:.6f}] "
              f"mode=monte-carlo (not a certificate)")
    print(f"wrote {out}/report.json")
    return 0


# ----------------------------------------------------------------- compare

def _strip_svg(svg):
    body = svg[svg.index(">") + 1:]
    return body.rsplit("</svg>", 1)[0]


def compose_panels(svgs, labels, size=640, pad=30):
    width = len(svgs) * (size + pad) + pad
    height = size + 2 * pad + 20
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">']
    for i, (svg, label) in enumerate(zip(svgs, labels)):
        x = pad + i * (size + pad)
        parts.append(f'<text x="{x}" y="{pad - 8}" font-size="14" '
                     f'font-family="sans-serif">{label}</text>')
        parts.append(f'<g transform="translate({x},{pad})">')
        parts.append(_strip_svg(svg))
        parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts)


def cmd_compare(args):
    bundles = [load_checkpoint(p) for p in args.checkpoints]
    names = {b.config.env_name for b in bundles}
    if len(names) != 1:
        raise CliError(f"checkpoints span different environments: {sorted(names)}")
    env_name = names.pop()
    base = bundles[0]
    plane = _parse_plane(args.plane) if args.plane else tuple(
        base.config.validator["slice_axes"])
    vcfg = dict(base.config.validator)
    mode = "full-grid" if _active_dims(base.env) <= 4 else "slice"
    box_scale = (vcfg["box_scale"] if args.box_scale is None
                 else args.box_scale)

    panels, svgs, labels = [], [], []
    systems = [(os.path.splitext(os.path.basename(b.meta["path"]))[0],
                "learned", b.system(), b) for b in bundles]
    systems.append(("lqr-candidate", "lqr", base.lqr_system(), base))
    for label, kind, system, bundle in systems:
        report, box = _certify_system(system, bundle.env, vcfg,
                                      base.config.seed, mode, plane,
                                      vcfg["mc_samples"], box_scale)
        band = tuple(report["band"]) if report["certified"] else None
        doc, svg = landscape_map(system, box, vcfg["a_const"], axes=plane,
                                 fixed_point=bundle.env.equilibrium, band=band)
        panels.append({"label": label, "candidate": kind,
                       "certified": report["certified"],
                       "band": list(report["band"]),
                       "violation_fraction": report["violation_fraction"],
                       "landscape": doc})
        svgs.append(svg)
        labels.append(f"{label} ({'certified' if report['certified'] else 'not certified'})")
        print(f"{label}: certified={str(report['certified']).lower()} "
              f"violation_fraction={report['violation_fraction']:.4f}")

    out = args.output_dir or os.path.join(
        os.path.dirname(os.path.abspath(args.checkpoints[0])), "compare")
    write_json(os.path.join(out, "compare.json"),
               {"env": env_name, "plane": list(plane), "panels": panels,
                "tool_version": __version__}, schema="compare")
    atomic_write_text(os.path.join(out, "compare.svg"),
                      compose_panels(svgs, labels))
    print(f"wrote {out}/compare.json and {out}/compare.svg")
    return 0


def _active_dims(env):
    return int(np.sum(env.domain[:, 1] - env.domain[:, 0] > 0))


# -------------------------------------------------------------------- main

def build_parser():
    parser = argparse.ArgumentParser(
        prog="polyc",
        description="Train, evaluate, and certify Lyapunov-guided policies.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the training loop from a config")
    p_train.add_argument("-c", "--config", required=True)
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("eval", help="deterministic evaluation rollouts")
    p_eval.add_argument("-k", "--checkpoint", required=True)
    p_eval.add_argument("-n", "--episodes", type=int, default=20)
    p_eval.add_argument("--threshold", type=float, default=0.2)
    p_eval.add_argument("--init-region", default=None,
                        help="JSON [[lo,hi],...] overriding the env default")
    p_eval.add_argument("--env-override", default=None,
                        help="JSON object of env parameter overrides")
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("-o", "--output-dir", default=None)
    p_eval.set_defaults(fn=cmd_eval)

    p_cert = sub.add_parser("certify", help="run the sampled certification")
    p_cert.add_argument("-k", "--checkpoint", required=True)
    p_cert.add_argument("--a", dest="a_const", type=float, default=None)
    p_cert.add_argument("--eps-vol", type=float, default=None)
    p_cert.add_argument("--margin", type=float, default=None)
    p_cert.add_argument("--max-cells", type=int, default=None)
    p_cert.add_argument("--mode", choices=sorted(_MODE_ALIASES), default=None)
    p_cert.add_argument("--plane", default=None, help="'i,j' state dims")
    p_cert.add_argument("--mc-samples", type=int, default=None)
    p_cert.add_argument("--box-scale", type=float, default=None)
    p_cert.add_argument("--candidate", choices=("learned", "lqr"),
                        default="learned")
    p_cert.add_argument("-o", "--output-dir", default=None)
    p_cert.set_defaults(fn=cmd_certify)

    p_cmp = sub.add_parser("compare",
                           help="aligned landscape panels plus an LQR candidate")
    p_cmp.add_argument("-k", "--checkpoint", dest="checkpoints",
                       action="append", required=True)
    p_cmp.add_argument("--plane", default=None)
    p_cmp.add_argument("--box-scale", type=float, default=None)
    p_cmp.add_argument("-o", "--output-dir", default=None)
    p_cmp.set_defaults(fn=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, ConfigError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # runtime failure, not usage
        print(f"runtime failure: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
