"""loadforge command line front-end.

Subcommands: ``learn`` (factorize a current file), ``analyze`` (metric
report), ``infer-activations`` (generative parameters from power data),
``generate`` (SHED-style dataset emission) and ``version``.

Exit codes: 0 success, 2 usage error, 3 parse/validation error,
4 numerical failure. Every artifact write is accompanied by a manifest
recording the tool version, a hash of the resolved configuration, the
seed, and per-file checksums; re-running with identical config and seed
reproduces identical bytes.
"""

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, dataio, presets
from .errors import (
    ConvergenceError,
    DegenerateActivationsError,
    InvalidInputError,
    LoadforgeError,
    NormalizationError,
    ParseError,
    SpecificationError,
)
from .factorize import SolverOptions, normalize_model, select_k, snmf
from .genmodel import (
    HALFMINUTE,
    HOURLY,
    SignatureTemplate,
    TimePartition,
    ArmaParams,
    default_arma_params,
    infer_transitions,
    learn_template,
    threshold_onoff,
)
from .simulate import BuildingSpec, CategorySpec, DeviceSpec, Mains, emit_shed, voltage_waveform
from .stats import metric_report, power_from_current, thd

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_NUMERIC = 4


@dataclass
class RunConfig:
    """Resolved settings of one CLI invocation."""

    subcommand: str
    options: dict
    seed: int = 0
    seed_defaulted: bool = False
    building_document: dict | None = None

    def config_hash(self):
        payload = {
            "subcommand": self.subcommand,
            "options": self.options,
            "seed": self.seed,
            "building_document": self.building_document,
        }
        blob = json.dumps(payload, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class Manifest:
    tool_version: str
    command: str
    config_hash: str
    seed: int
    files: dict = field(default_factory=dict)

    def write(self, path):
        payload = {
            "tool_version": self.tool_version,
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "files": self.files,
        }
        with open(path, "w", newline="\n") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def ingest(path, kind):
    """Validated dataset load: ``current`` or ``power`` file."""
    if kind == "current":
        return dataio.read_current_matrix(path)
    if kind == "power":
        return dataio.read_power_series(path)
    raise InvalidInputError(f"unknown dataset kind {kind!r}")


def _parse_interval(text):
    units = {"s": 1.0, "m": 60.0, "h": 3600.0, "d": 86400.0}
    text = text.strip().lower()
    if not text:
        raise InvalidInputError("empty interval")
    if text[-1] in units:
        return float(text[:-1]) * units[text[-1]]
    return float(text)


def _parse_intervals(text):
    return tuple(_parse_interval(item) for item in text.split(",") if item.strip())


def _write_with_manifest(config, outputs):
    """outputs: {path: writer(path)}; writes files then one manifest per run."""
    manifest = Manifest(
        tool_version=__version__,
        command=config.subcommand,
        config_hash=config.config_hash(),
        seed=config.seed,
    )
    for path, writer in outputs.items():
        writer(path)
        manifest.files[os.path.basename(path)] = dataio.sha256_file(path)
    first = next(iter(outputs))
    manifest.write(first + ".manifest.json")
    return manifest


# ---------------------------------------------------------------------------
# learn
# ---------------------------------------------------------------------------

def _cmd_learn(args):
    # output paths stay out of the hash so reruns into other directories
    # reproduce identical manifests
    config = RunConfig(
        subcommand="learn",
        options={
            "input": args.input, "k": args.k, "snr_target": args.snr_target,
            "k_max": args.k_max, "mains_rms": args.mains_rms,
            "rel_tol": args.rel_tol, "max_iters": args.max_iters,
        },
        seed=args.seed if args.seed is not None else 0,
        seed_defaulted=args.seed is None,
    )
    if config.seed_defaulted:
        print("seed: 0 (default)")
    current = ingest(args.input, "current")
    opts = SolverOptions(rel_tol=args.rel_tol, max_iters=args.max_iters, seed=config.seed)
    if args.k == "auto":
        selection = select_k(current, args.snr_target, args.k_max, opts)
        result = selection.result
        if selection.below_target:
            print(f"warning: k_max={args.k_max} stays below the {args.snr_target} dB target")
        print(f"selected k={selection.k} (snr {selection.snr_db:.2f} dB)")
    else:
        result = snmf(current, int(args.k), opts)
        print(f"k={int(args.k)}: snr {result.snr_db:.2f} dB in {result.iterations} iterations")
    if result.pruned:
        print(f"pruned zero-activation components: {result.pruned}")
    v0 = voltage_waveform(args.mains_rms, current.samples_per_period)
    model = normalize_model(result.model, v0)
    _write_with_manifest(config, {args.out: lambda p: dataio.write_factor_model(p, model)})
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _cmd_analyze(args):
    config = RunConfig(
        subcommand="analyze",
        options={
            "input": args.input, "kind": args.kind, "resample": args.resample,
            "mains_rms": args.mains_rms, "cadence": args.cadence,
        },
    )
    intervals = _parse_intervals(args.resample)
    if args.kind == "current":
        current = ingest(args.input, "current")
        v0 = voltage_waveform(args.mains_rms, current.samples_per_period)
        series = power_from_current(current, v0, sample_interval=args.cadence)
        thd_percent = thd(current)
    else:
        series = ingest(args.input, "power")
        thd_percent = None
    report = metric_report(
        series,
        resample_intervals=intervals,
        distribution_interval=intervals[0] if intervals else series.sample_interval,
        thd_percent=thd_percent,
    )

    def _write_report(path):
        lines = ["metric,value"]
        lines.extend(f"{name},{dataio.fmt(value)}" for name, value in report.rows())
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")

    _write_with_manifest(config, {args.report: _write_report})
    for name, value in report.rows():
        print(f"{name}: {value:.6g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# infer-activations
# ---------------------------------------------------------------------------

def _cmd_infer_activations(args):
    config = RunConfig(
        subcommand="infer-activations",
        options={
            "power": args.power, "partition": args.partition,
            "threshold": args.threshold,
        },
    )
    series = ingest(args.power, "power")
    if args.partition == "hourly":
        partition = TimePartition(HOURLY)
        states = threshold_onoff(series, args.threshold)
        table = infer_transitions(states, series.timestamps, partition)
        smoothed = int(table.smoothed.sum()) if table.smoothed is not None else 0
        if smoothed:
            print(f"warning: {smoothed} (period, state) pairs unobserved, Laplace-smoothed")
        writer = lambda p: dataio.write_transition_table(p, table)
    else:
        partition = TimePartition(HALFMINUTE)
        template = learn_template(series, partition)
        empty = int(template.empty_subsets.sum()) if template.empty_subsets is not None else 0
        if empty:
            print(f"warning: {empty} periods of the day never observed")
        writer = lambda p: dataio.write_activation_template(p, template)
    _write_with_manifest(config, {args.out: writer})
    return EXIT_OK


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def _signature_from_config(entry, mains, k, sigma_rel):
    if isinstance(entry, str):
        return presets.signature_template(entry, mains, k=k, sigma_rel=sigma_rel)
    if isinstance(entry, dict) and "file" in entry:
        model = dataio.read_factor_model(entry["file"])
        template = model.signatures[:, :k] if k else model.signatures
        if template.shape[1] != k:
            raise SpecificationError(
                f"signature file {entry['file']!r} has {model.signatures.shape[1]} "
                f"components, need {k}"
            )
        sigma = sigma_rel * float(np.sqrt(np.mean(template ** 2)))
        return SignatureTemplate(template=template, sigma=sigma)
    raise SpecificationError(f"bad signature source {entry!r}")


def _template_from_config(entry, scale_watts):
    if isinstance(entry, str):
        return presets.activation_template(entry, scale_watts)
    if isinstance(entry, dict) and "file" in entry:
        return dataio.read_activation_template(entry["file"])
    raise SpecificationError(f"bad activation template source {entry!r}")


def _transitions_from_config(entry, device_class, k):
    if entry is None and device_class == "B":
        return presets.cycling_states_table(k)
    if isinstance(entry, dict) and "file" in entry:
        return dataio.read_transition_table(entry["file"])
    if isinstance(entry, str):
        if entry == "office":
            return presets.office_hours_onoff()
        if entry == "sparse":
            return presets.sparse_onoff()
        if entry == "cycling":
            return presets.cycling_states_table(k)
        raise SpecificationError(f"unknown transition archetype {entry!r}")
    raise SpecificationError(f"bad transition source {entry!r}")


def _arma_from_config(entry):
    if entry is None:
        return default_arma_params()
    if "log_noise_std" in entry:
        return default_arma_params(float(entry["log_noise_std"]))
    return ArmaParams(
        phi=tuple(entry.get("phi", ())),
        theta=tuple(entry.get("theta", ())),
        sigma_w=float(entry.get("sigma_w", 0.0)),
    )


def _device_from_config(doc, mains):
    cls = doc.get("class")
    if cls not in ("A", "B", "C", "D"):
        raise SpecificationError(f"device {doc.get('name')!r}: unknown class {cls!r}")
    k = int(doc.get("k", 1 if cls in ("A", "C") else 2))
    sigma_rel = float(doc.get("sigma_rel", 0.01))
    signature = _signature_from_config(doc.get("signature", "resistive"), mains, k, sigma_rel)
    kwargs = {}
    if cls in ("A", "B"):
        kwargs["transitions"] = _transitions_from_config(doc.get("transitions"), cls, k) \
            if cls == "B" else _transitions_from_config(doc.get("transitions", "office"), cls, k)
        if cls == "A":
            kwargs["on_power_watts"] = float(doc.get("on_power_watts", 1000.0))
        else:
            if "state_powers" not in doc:
                raise SpecificationError(f"device {doc.get('name')!r}: class B needs state_powers")
            kwargs["state_powers"] = np.asarray(doc["state_powers"], dtype=float)
    else:
        scale = float(doc.get("scale_watts", 1000.0))
        kwargs["template"] = _template_from_config(doc.get("template", "office"), scale)
        kwargs["arma"] = _arma_from_config(doc.get("arma"))
        if cls == "D":
            kwargs["alpha"] = np.asarray(doc.get("alpha", [5.0] * k), dtype=float)
            kwargs["redraw_daily"] = bool(doc.get("dirichlet_redraw_daily", False))
    return DeviceSpec(
        name=str(doc.get("name", "device")),
        device_class=cls,
        signature=signature,
        initial_state=int(doc.get("initial_state", 0)),
        **kwargs,
    )


def _building_from_config(doc, defaults):
    mains_doc = doc.get("mains", {})
    if mains_doc.get("phases", 1) != 1:
        raise SpecificationError("three-phase networks are unsupported")
    mains = Mains(
        rms_volts=float(mains_doc.get("rms_volts", doc.get("mains_rms_volts", 230.0))),
        frequency_hz=float(mains_doc.get("frequency_hz", doc.get("mains_hz", 50.0))),
    )
    categories = []
    for cat_doc in doc.get("category", []):
        devices = [_device_from_config(d, mains) for d in cat_doc.get("device", [])]
        categories.append(CategorySpec(category_id=str(cat_doc.get("id")), devices=devices))
    span_days = float(doc.get("span_days", defaults.get("span_days", 7.0)))
    return BuildingSpec(
        name=str(doc.get("name", "building")),
        categories=categories,
        span_seconds=span_days * 86400.0,
        cadence_seconds=float(doc.get("cadence_seconds", 30.0)),
        samples_per_period=int(doc.get("samples_per_period", 200)),
        mains=mains,
        noise_std_amps=doc.get("noise_std_amps"),
        hf_ground_truth=bool(doc.get("hf_ground_truth", False)),
        start_time=float(doc.get("start_time", 0.0)),
    )


def _specs_from_config(document, overrides):
    defaults = {k: document[k] for k in ("span_days",) if k in document}
    defaults.update({k: v for k, v in overrides.items() if v is not None})
    preset = document.get("preset")
    buildings = document.get("building", [])
    if preset == "shed" or (not buildings and preset is None):
        return presets.shed_building_specs(span_days=defaults.get("span_days", 7.0))
    if preset not in (None, "shed"):
        raise SpecificationError(f"unknown preset {preset!r}")
    return [_building_from_config(doc, defaults) for doc in buildings]


def _cmd_generate(args):
    document = {}
    if args.config:
        with open(args.config, "rb") as fh:
            try:
                document = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ParseError(f"{args.config}: {exc}", path=args.config) from exc
    seed_defaulted = args.seed is None and "seed" not in document
    seed = args.seed if args.seed is not None else int(document.get("seed", 0))
    config = RunConfig(
        subcommand="generate",
        options={"span_days": args.span_days},
        seed=seed,
        seed_defaulted=seed_defaulted,
        building_document=document,
    )
    if seed_defaulted:
        print("seed: 0 (default)")
    specs = _specs_from_config(document, {"span_days": args.span_days})
    manifest = emit_shed(specs, args.out, seed=seed)
    manifest["command"] = "generate"
    manifest["config_hash"] = config.config_hash()
    path = os.path.join(args.out, "manifest.json")
    with open(path, "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    total_files = sum(len(b["files"]) for b in manifest["buildings"].values())
    print(f"wrote {len(specs)} buildings ({total_files} files) to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="loadforge",
        description="Learn factorized device models, analyze power statistics, "
                    "and generate synthetic current datasets.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    learn = sub.add_parser("learn", help="factorize a current matrix file")
    learn.add_argument("--input", required=True)
    learn.add_argument("--k", default="auto", help="component count or 'auto'")
    learn.add_argument("--snr-target", type=float, default=50.0)
    learn.add_argument("--k-max", type=int, default=8)
    learn.add_argument("--seed", type=int, default=None)
    learn.add_argument("--out", required=True)
    learn.add_argument("--mains-rms", type=float, default=230.0)
    learn.add_argument("--rel-tol", type=float, default=1e-8)
    learn.add_argument("--max-iters", type=int, default=500)

    analyze = sub.add_parser("analyze", help="compute the metric report of a dataset")
    analyze.add_argument("--input", required=True)
    analyze.add_argument("--kind", choices=("power", "current"), required=True)
    analyze.add_argument("--resample", default="30s,1h")
    analyze.add_argument("--report", required=True)
    analyze.add_argument("--mains-rms", type=float, default=230.0)
    analyze.add_argument("--cadence", type=float, default=30.0)

    infer = sub.add_parser("infer-activations",
                           help="infer generative activation parameters from power data")
    infer.add_argument("--power", required=True)
    infer.add_argument("--partition", choices=("hourly", "halfminute"), required=True)
    infer.add_argument("--threshold", type=float, default=20.0)
    infer.add_argument("--out", required=True)

    generate = sub.add_parser("generate", help="emit a SHED-style synthetic dataset")
    generate.add_argument("--config", default=None, help="TOML building spec (default: SHED recipe)")
    generate.add_argument("--out", required=True)
    generate.add_argument("--seed", type=int, default=None)
    generate.add_argument("--span-days", type=float, default=None)

    sub.add_parser("version", help="print the tool version")
    return parser


_COMMANDS = {
    "learn": _cmd_learn,
    "analyze": _cmd_analyze,
    "infer-activations": _cmd_infer_activations,
    "generate": _cmd_generate,
}


def run(config_args):
    """Dispatch parsed arguments; returns the process exit code."""
    if config_args.subcommand == "version":
        print(f"loadforge {__version__}")
        return EXIT_OK
    return _COMMANDS[config_args.subcommand](config_args)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return run(args)
    except (ParseError, SpecificationError, InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConvergenceError, DegenerateActivationsError, NormalizationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except LoadforgeError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
