"""Command-line entry point. Machine output is JSON on stdout; diagnostics go
to stderr. Exit codes: 0 success, 1 usage error, 2 data error."""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import io
from .errors import DataError, TopologyError
from .geometry import SHAPE_KINDS, Pose, ShapeSpec, synth
from .metrics import SYMMETRIES, evaluate_set
from .serialization import METHODS, serialize_keypoints
from .tensor import weights as wfile


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _u64(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _bits(text):
    v = int(text)
    if not 1 <= v <= 32:
        raise argparse.ArgumentTypeError("bits must be in 1..32")
    return v


def _category(text):
    v = int(text)
    if not 0 <= v <= 5:
        raise argparse.ArgumentTypeError("category must be in 0..5")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=_u64, default=0)
    common.add_argument("--pretty", action="store_true", help="human-readable output")
    common.add_argument("--threads", type=_positive, default=1)
    common.add_argument("--config", type=Path)
    common.add_argument("--weights", type=Path)

    p = _Parser(prog="topopose", description=__doc__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("topo", parents=[common], help="persistence diagrams and topology vector")
    s.add_argument("inputs", nargs="+", type=Path)

    s = sub.add_parser("serialize", parents=[common], help="curve order of keypoints")
    s.add_argument("input", type=Path)
    s.add_argument("--method", choices=METHODS, default="hilbert")
    s.add_argument("--bits", type=_bits, default=10)

    s = sub.add_parser("synth", parents=[common], help="sample a synthetic shape")
    s.add_argument("kind", choices=SHAPE_KINDS)
    s.add_argument("--n-points", type=_positive, default=256)
    s.add_argument("--radius", type=float, default=1.0)
    s.add_argument("--jitter", type=float, default=0.01)
    s.add_argument("--out", type=Path, help="write the cloud here (.xyz or .ply)")

    s = sub.add_parser("forward", parents=[common], help="run the network on one cloud")
    s.add_argument("input", type=Path)
    s.add_argument("--category", type=_category, default=0)

    s = sub.add_parser("train-micro", parents=[common], help="overfit the micro model")
    s.add_argument("--manifest", type=Path, help="dataset manifest JSON (default: synthetic set)")
    s.add_argument("--instances", type=_positive, default=8)
    s.add_argument("--steps", type=int)
    s.add_argument("--save", type=Path, help="write trained weights here")

    s = sub.add_parser("eval", parents=[common], help="pose metrics for prediction/ground-truth files")
    s.add_argument("--pred", type=Path, required=True)
    s.add_argument("--gt", type=Path, required=True)

    sub.add_parser("selftest", parents=[common], help="run the oracle suites")
    return p


def _emit(obj, pretty=False, table=None):
    if pretty and table is not None:
        sys.stdout.write(table)
    else:
        sys.stdout.write(json.dumps(obj, indent=2 if pretty else None) + "\n")


def _map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))  # map keeps input order


def _model_configs(args):
    from .pipeline import ModelConfig, TrainConfig, load_config

    if args.config is not None:
        return load_config(args.config)
    return ModelConfig.micro(), TrainConfig(seed=args.seed % 2 ** 32)


# --------------------------------------------------------------------------
# commands


def cmd_topo(args):
    from .topology import topo_feature

    def one(path):
        cloud = io.read_cloud(path)
        if len(cloud) < 4:
            raise DataError(f"{path}: need at least 4 points, got {len(cloud)}")
        try:
            return topo_feature(cloud.points, seed=args.seed).to_json()
        except TopologyError as exc:
            raise DataError(f"{path}: {exc}") from None

    results = _map(one, args.inputs, args.threads)
    _emit(results[0] if len(results) == 1 else results, args.pretty)


def cmd_serialize(args):
    pts = io.read_cloud(args.input).points
    order = serialize_keypoints(pts, args.method, args.bits)
    _emit({"order": order.tolist()}, args.pretty)


def cmd_synth(args):
    if args.radius <= 0 or args.jitter < 0:
        raise UsageError("radius must be positive and jitter non-negative")
    spec = ShapeSpec(args.kind, radius=args.radius, minor_radius=0.3 * args.radius,
                     height=args.radius, jitter=args.jitter, n_points=args.n_points,
                     seed=args.seed)
    cloud, pose, betti = synth(spec)
    out = {"kind": args.kind, "pose": pose.to_json(), "betti": list(betti)}
    if args.out is not None:
        io.write_cloud(args.out, cloud)
        out["cloud"] = str(args.out)
    else:
        out["points"] = cloud.points.tolist()
    _emit(out, args.pretty)


def cmd_forward(args):
    from .pipeline import Model, prepare

    config, _ = _model_configs(args)
    cloud = io.read_cloud(args.input)
    model = Model(config)
    params = model.init_params(args.seed)
    if args.weights is not None:
        params = _load_weights(args.weights, params)
    inst = prepare(cloud, args.category, config, seed=args.seed)
    pred, kp = model.predict(inst, params)
    _emit({
        "pose": pred.pose.to_json(),
        "keypoints": kp.coords.tolist(),
        "nocs": pred.nocs.tolist(),
        "recon": pred.recon_cloud.tolist(),
    }, args.pretty)


def _load_weights(path, template):
    loaded = wfile.load(path)
    missing = sorted(set(template) - set(loaded))
    if missing:
        raise DataError(f"{path}: missing parameters {missing[:3]}{'...' if len(missing) > 3 else ''}")
    for k, v in template.items():
        if loaded[k].shape != v.shape:
            raise DataError(f"{path}: parameter {k} has shape {loaded[k].shape}, expected {v.shape}")
    return {k: loaded[k] for k in template}


def _manifest_dataset(path, config, seed):
    from .pipeline import prepare

    entries = io.read_json(path)
    if not isinstance(entries, list) or not entries:
        raise DataError(f"{path}: manifest must be a non-empty list")
    base = Path(path).parent
    out = []
    for k, e in enumerate(entries):
        try:
            cloud = io.read_cloud(base / e["cloud"])
            cat = int(e["category"])
            pose = Pose.from_json(e["pose"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: entry {k} malformed ({exc})") from None
        sym = e.get("symmetry", "none")
        if sym not in SYMMETRIES:
            raise DataError(f"{path}: entry {k} has unknown symmetry {sym!r}")
        out.append(prepare(cloud, cat, config, pose=pose, seed=seed, symmetry=sym))
    return out


def cmd_train(args):
    from .pipeline import Model, evaluate_instances, micro_dataset, train_micro

    config, train = _model_configs(args)
    if args.steps is not None:
        if args.steps < 0:
            raise UsageError("--steps must be >= 0")
        train.steps = args.steps
    train.seed = args.seed % 2 ** 32 if args.config is None else train.seed
    if args.manifest is not None:
        data = _manifest_dataset(args.manifest, config, args.seed)
    else:
        data = micro_dataset(args.instances, config, seed=args.seed % 2 ** 32)

    def log(step, loss, lr):
        if args.pretty and (step % 50 == 0 or step == train.steps - 1):
            print(f"step {step:5d}  loss {loss:.6f}  lr {lr:.2e}", file=sys.stderr)

    res = train_micro(data, train, config, log=log)
    report = evaluate_instances(Model(config), res.params, data)
    if args.save is not None:
        wfile.save(args.save, res.params)
    _emit({
        "steps": train.steps,
        "losses": res.losses,
        "initial": res.losses[0] if res.losses else None,
        "final": res.losses[-1] if res.losses else None,
        "metrics": report.to_json(),
    }, args.pretty)


def _read_poses(path):
    raw = io.read_json(path)
    if isinstance(raw, dict):
        raw = raw.get("poses", raw.get("instances"))
    if not isinstance(raw, list):
        raise DataError(f"{path}: expected a list of poses")
    out = []
    for k, obj in enumerate(raw):
        if not isinstance(obj, dict):
            raise DataError(f"{path}: entry {k} is not an object")
        pose = Pose.from_json(obj.get("pose", obj))
        sym = obj.get("symmetry", "none")
        if sym not in SYMMETRIES:
            raise DataError(f"{path}: entry {k} has unknown symmetry {sym!r}")
        try:
            pose.check(1e-6)
        except DataError as exc:
            raise DataError(f"{path}: entry {k}: {exc}") from None
        out.append((pose, sym))
    return out


def cmd_eval(args):
    preds = [p for p, _ in _read_poses(args.pred)]
    gts = _read_poses(args.gt)
    if len(preds) != len(gts):
        raise DataError(f"{args.pred} has {len(preds)} poses but {args.gt} has {len(gts)}")
    report = evaluate_set(preds, gts)
    out = report.to_json()
    table = "".join(f"{k:>10s}  {v}\n" for k, v in out.items())
    _emit(out, args.pretty, table)


def cmd_selftest(args):
    from .selftest import run_all

    results = run_all(seed=args.seed % 2 ** 32)
    ok = all(r["ok"] for r in results.values())
    table = "".join(f"{name:28s} {'PASS' if r['ok'] else 'FAIL'}  {r['detail']}\n" for name, r in results.items())
    _emit({"ok": ok, "suites": results}, args.pretty, table)
    return 0 if ok else 1


COMMANDS = {
    "topo": cmd_topo,
    "serialize": cmd_serialize,
    "synth": cmd_synth,
    "forward": cmd_forward,
    "train-micro": cmd_train,
    "eval": cmd_eval,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args) or 0
    except UsageError as exc:
        sys.stderr.write(str(exc).rstrip() + "\n")
        return 1
    except (DataError, TopologyError) as exc:
        sys.stderr.write(f"topopose: {exc}\n")
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
