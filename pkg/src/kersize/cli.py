"""Command-line front end.

Subcommands chain the library into complete bound-computation pipelines::

    kersize sample    --config run.json [--out DIR] [--seed N] [--n-max N]
    kersize kersize   COLLECTION [--p P] [--q Q] [--mask i,j,...] [--out DIR]
    kersize loss      COLLECTION PREDICTIONS [--name NAME] [norm flags]
    kersize validate  COLLECTION [PREDICTIONS ...] [--strict] [norm flags]
    kersize skersize  COLLECTION (--matrix A.csv | --model model.json)
                      [--mode signal|joint] [--eps-additive E] [norm flags]
    kersize demo      {microscopy,superres} [--out DIR] [--seed N] ...

Exit codes: 0 success, 1 usage error, 2 data/schema error, 3 bound violation
under --strict.

The sample config is a JSON document::

    {
      "model":   {... forward-model document, see forward.model_from_dict ...},
      "sampler": {"kind": "rejection", "n_max": 100, "seed": 0, ...},
      "norm":    {"p": 2, "q": 2, "mask": null},
      "paths":   {"input": null, "output": "out_dir"},
      "options": {"generate": 4}
    }

Unknown keys anywhere in the document are rejected. ``paths.input`` may name a
directory of ``y_<id>.csv`` measurement files instead of ``options.generate``.
A linear model's "matrix" may be a CSV path relative to the config file.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .bounds import kersize as compute_kersize
from .bounds import verify_bounds
from .core import (
    DataError,
    NormSpec,
    UsageError,
    collection_from_dataset,
    dataset_from_collection,
    loss,
)
from .demo import microscopy_demo, superres_demo
from .forward import DownsampleModel, LinearModel, NoiseSpec, model_from_dict
from .predictors import median_map, zero_map
from .sampling import SamplerSpec, build_feasible_sets
from .symmetric import skersize as compute_skersize

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VIOLATION = 3


class _UsageExit(Exception):
    def __init__(self, code, message=None):
        self.code = code
        self.message = message
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    """argparse with the exit-code contract (usage errors exit 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageExit(EXIT_USAGE, f"{self.prog}: error: {message}")


def _check_keys(obj: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise DataError(f"{where}: unknown keys {unknown}")


_MODEL_KEYS = {
    "linear_additive": {"variant", "matrix", "noise", "signal_bounds"},
    "downsample_additive": {"variant", "bands", "height", "width", "factor", "r_max", "noise"},
    "microscopy": {
        "variant", "pixels", "pixel_size", "psf_sigma0", "psf_z0",
        "c_max", "h_max", "exposure", "volume", "noise",
    },
}


def _load_model(doc: dict, base: Path):
    if not isinstance(doc, dict) or "variant" not in doc:
        raise DataError("model document must be an object with a 'variant'")
    variant = doc["variant"]
    if variant not in _MODEL_KEYS:
        raise DataError(f"unknown model variant {variant!r}")
    _check_keys(doc, _MODEL_KEYS[variant], "model")
    if "noise" in doc:
        _check_keys(doc["noise"], {"kind", "eps_additive", "eps_multiplicative", "ball"}, "model.noise")
    if variant == "linear_additive" and isinstance(doc.get("matrix"), str):
        doc = dict(doc)
        doc["matrix"] = io.read_vectors_csv(base / doc["matrix"]).tolist()
    return model_from_dict(doc)


def _norm_from_flags(args, default: NormSpec, d1: int) -> NormSpec:
    p = default.p if args.p is None else args.p
    q = default.q if args.q is None else (np.inf if args.q == "inf" else float(args.q))
    mask = default.mask
    if args.mask is not None:
        idx = [int(tok) for tok in args.mask.split(",") if tok != ""]
        m = np.zeros(d1, dtype=int)
        for i in idx:
            if not 0 <= i < d1:
                raise UsageError(f"--mask index {i} out of range for d1={d1}")
            m[i] = 1
        mask = m
    return NormSpec(p=p, q=q, mask=None if mask is None else np.asarray(mask))


def _add_norm_flags(sub) -> None:
    sub.add_argument("--p", type=float, default=None, help="loss exponent")
    sub.add_argument("--q", default=None, help="inner norm exponent (1, 2 or inf)")
    sub.add_argument("--mask", default=None, help="comma-separated coordinate indices to keep")
    sub.add_argument("--seed", type=int, default=None,
                     help="accepted on every command; this one is deterministic")


def _cmd_sample(args) -> int:
    config_path = Path(args.config)
    doc = io.read_json(config_path)
    _check_keys(doc, {"model", "sampler", "norm", "paths", "options"}, "config")
    if "model" not in doc or "sampler" not in doc:
        raise DataError("config needs 'model' and 'sampler'")
    base = config_path.parent
    model = _load_model(doc["model"], base)
    _check_keys(
        doc["sampler"],
        {"kind", "n_max", "seed", "budget", "step_scale", "grid_resolution", "burn_in", "thinning"},
        "sampler",
    )
    sampler = SamplerSpec.from_dict(doc["sampler"])
    if args.seed is not None or args.n_max is not None:
        d = sampler.to_dict()
        if args.seed is not None:
            d["seed"] = args.seed
        if args.n_max is not None:
            d["n_max"] = args.n_max
        sampler = SamplerSpec.from_dict(d)
    norm_doc = doc.get("norm", {})
    _check_keys(norm_doc, {"p", "q", "mask"}, "norm")
    norm = NormSpec.from_dict(norm_doc)
    paths = doc.get("paths", {})
    _check_keys(paths, {"input", "output"}, "paths")
    options = doc.get("options", {})
    _check_keys(options, {"generate"}, "options")

    out = Path(args.out) if args.out else Path(paths.get("output") or "")
    if str(out) in ("", "."):
        raise UsageError("no output directory (set paths.output or --out)")

    if options.get("generate") is not None:
        collection, _ = build_feasible_sets(
            model, generate=int(options["generate"]), sampler=sampler
        )
    elif paths.get("input"):
        in_dir = base / paths["input"]
        files = sorted(in_dir.glob("y_*.csv"))
        if not files:
            raise DataError(f"no y_*.csv measurement files in {in_dir}")
        ys = [io.read_vectors_csv(f)[0] for f in files]
        collection, _ = build_feasible_sets(model, measurements=ys, sampler=sampler)
    else:
        raise DataError("config needs options.generate or paths.input")

    io.write_collection(out, collection, norm)
    counts = collection.counts
    print(f"K={collection.k} N={list(counts)} uniform={collection.uniform}")
    if max(counts) <= 1:
        print("warning: all feasible sets are singletons; kernel-size bounds will be zero")
    return EXIT_OK


def _cmd_kersize(args) -> int:
    collection, norm0 = io.read_collection(args.collection)
    norm = _norm_from_flags(args, norm0, collection.d1)
    value, v = compute_kersize(collection, norm)
    half = value / 2.0
    out = Path(args.out) if args.out else Path(args.collection)
    out.mkdir(parents=True, exist_ok=True)
    payload = io.read_json(out / "bounds.json") if (out / "bounds.json").exists() else {}
    payload.update(
        {
            "kersize": value,
            "half_kersize": half,
            "p": norm.p,
            "q": "inf" if norm.q == np.inf else norm.q,
            "uniform": collection.uniform,
        }
    )
    io.write_json(out / "bounds.json", payload)
    rows = [
        [e.id, e.count, 0.5 * v[k] ** (1.0 / norm.p)]
        for k, e in enumerate(collection.entries)
    ]
    io.write_table_csv(out / "per_measurement.csv", ["id", "n_k", "half_kersize_single"], rows)
    print(f"kersize={value:.8f} half_kersize={half:.8f}")
    return EXIT_OK


def _cmd_loss(args) -> int:
    collection, norm0 = io.read_collection(args.collection)
    norm = _norm_from_flags(args, norm0, collection.d1)
    dataset = dataset_from_collection(collection)
    needed = [collection.ids[k] for k in sorted(set(int(g) for g in dataset.group))]
    preds = io.read_predictions_dir(args.predictions, needed)
    value = loss(dataset, preds, norm)
    name = args.name or Path(args.predictions).name
    out = Path(args.out) if args.out else Path(args.collection)
    out.mkdir(parents=True, exist_ok=True)
    payload = io.read_json(out / "bounds.json") if (out / "bounds.json").exists() else {}
    payload.setdefault("losses", {})[name] = value
    io.write_json(out / "bounds.json", payload)
    print(f"loss[{name}]={value:.8f}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    collection, norm0 = io.read_collection(args.collection)
    norm = _norm_from_flags(args, norm0, collection.d1)
    maps = {"median": median_map(collection), "zero": zero_map(collection)}
    present = [e.id for e in collection.entries if e.count > 0]
    for pred_dir in args.predictions:
        name = Path(pred_dir).name
        if name in maps:
            name = f"{name}_ext"
        maps[name] = io.read_predictions_dir(pred_dir, present)
    report = verify_bounds(collection, maps, norm)
    out = Path(args.out) if args.out else Path(args.collection)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "bounds.json", report.to_dict())
    names = list(report.per_measurement[0].losses) if report.per_measurement else []
    rows = [
        [m.id, m.half_kersize_single] + [m.losses[n] for n in names]
        for m in report.per_measurement
    ]
    io.write_table_csv(
        out / "scatter.csv", ["id", "half_kersize_single"] + [f"{n}_loss" for n in names], rows
    )
    print(
        f"kersize={report.kersize:.8f} half_kersize={report.half_kersize:.8f} "
        f"theta_loss={report.theta_loss:.8f} lower_ok={report.lower_ok} "
        f"theta_upper_ok={report.theta_upper_ok}"
    )
    if args.strict and not report.lower_ok:
        print("bound violation under --strict", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def _cmd_skersize(args) -> int:
    collection, norm0 = io.read_collection(args.collection)
    norm = _norm_from_flags(args, norm0, collection.d1)
    pairs = dataset_from_collection(collection)
    if args.model:
        model = _load_model(io.read_json(args.model), Path(args.model).parent)
        if isinstance(model, (DownsampleModel, LinearModel)):
            operator = model
        else:
            raise UsageError("skersize needs a linear or downsampling model")
        noise = model.noise
    else:
        operator = io.read_vectors_csv(args.matrix)
        noise = NoiseSpec(kind="additive", eps_additive=args.eps_additive)
    mode = "signal_only" if args.mode == "signal" else "joint"
    result = compute_skersize(pairs, operator, noise, norm, mode=mode)
    out = Path(args.out) if args.out else Path(args.collection)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "skersize.json", result.to_dict())
    io.write_table_csv(
        out / "v_norms.csv",
        ["id", "v_norm"],
        [[i, float(v)] for i, v in enumerate(result.v_norms)],
    )
    io.write_collection(out / "symmetrized", collection_from_dataset(result.symmetrized), norm)
    print(f"skersize={result.skersize:.8f} half_skersize={0.5 * result.skersize:.8f}")
    if result.noise_violations:
        print(
            f"warning: {len(result.noise_violations)} reflected pairs left the noise set",
            file=sys.stderr,
        )
    return EXIT_OK


def _cmd_demo(args) -> int:
    out = Path(args.out) if args.out else Path(f"demo_{args.name}")
    if args.name == "microscopy":
        result = microscopy_demo(out_dir=out, k=args.k, n_max=args.n_max, seed=args.seed or 1)
        for s in result["setups"]:
            r = s["report"]
            print(
                f"{s['name']}: half_kersize={r.half_kersize:.4f} "
                f"mean={r.losses['mean']:.4f} median={r.losses['median']:.4f} "
                f"lower_ok={r.lower_ok}"
            )
    elif args.name == "superres":
        result = superres_demo(out_dir=out, seed=args.seed or 1)
        sk = result["result"].skersize
        print(f"skersize={sk:.6f} half_skersize={0.5 * sk:.6f}")
        for name, value in result["losses_symmetrized"].items():
            print(f"loss[{name}]={value:.6f}")
        print(
            f"lower_ok={result['checks']['lower_ok']} "
            f"upscalers_within_2x={result['checks']['upscalers_within_upper']}"
        )
    else:
        raise UsageError(f"unknown demo {args.name!r}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="kersize", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", help="approximate feasible sets for measurements")
    s.add_argument("--config", required=True, help="JSON run configuration")
    s.add_argument("--out", default=None, help="output collection directory")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--n-max", type=int, default=None, dest="n_max")
    s.set_defaults(func=_cmd_sample)

    s = sub.add_parser("kersize", help="average kernel size of a collection")
    s.add_argument("collection")
    _add_norm_flags(s)
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_kersize)

    s = sub.add_parser("loss", help="empirical loss of a prediction directory")
    s.add_argument("collection")
    s.add_argument("predictions")
    s.add_argument("--name", default=None, help="label for the prediction set")
    _add_norm_flags(s)
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_loss)

    s = sub.add_parser("validate", help="verify the bound inequalities")
    s.add_argument("collection")
    s.add_argument("predictions", nargs="*", help="external prediction directories")
    s.add_argument("--strict", action="store_true", help="exit 3 on a bound violation")
    _add_norm_flags(s)
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_validate)

    s = sub.add_parser("skersize", help="average symmetric kernel size (linear models)")
    s.add_argument("collection", help="collection/dataset directory")
    group = s.add_mutually_exclusive_group(required=True)
    group.add_argument("--matrix", default=None, help="operator as CSV")
    group.add_argument("--model", default=None, help="forward-model JSON")
    s.add_argument("--mode", choices=("signal", "joint"), default="signal")
    s.add_argument("--eps-additive", type=float, default=0.0, dest="eps_additive")
    _add_norm_flags(s)
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_skersize)

    s = sub.add_parser("demo", help="run a full pipeline demo")
    s.add_argument("name", help="microscopy or superres")
    s.add_argument("--out", default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--n-max", type=int, default=200, dest="n_max")
    s.set_defaults(func=_cmd_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageExit as exc:
        if exc.message:
            print(exc.message, file=sys.stderr)
        return exc.code
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
