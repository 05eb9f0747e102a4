"""Compose sampled devices into categories and buildings.

A building is a parallel connection of device categories: the total
current is the sum of the category currents plus zero-mean Gaussian
measurement noise. Devices are classified A (on/off), B (multi-state),
C (varying load) or D (varying signature) and draw their signatures and
activations from the generative models in :mod:`loadforge.genmodel`.

Determinism: every dataset is a pure function of (spec, seed). Seeds are
derived hierarchically (building -> category index -> device index), so
devices can be synthesized in any order or concurrently with identical
results.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import SpecificationError
from .factorize import CurrentMatrix
from .genmodel import (
    ActivationTemplate,
    ArmaParams,
    SignatureTemplate,
    TransitionTable,
    sample_complex_activation,
    sample_multisig_activation,
    sample_multistate_activation,
    sample_onoff,
    sample_signature,
)
from .stats import PowerSeries

CLASS_ON_OFF = "A"
CLASS_MULTI_STATE = "B"
CLASS_VARYING_LOAD = "C"
CLASS_VARYING_SIGNATURE = "D"

DATASET_FORMAT_VERSION = "1"


def voltage_waveform(rms_volts, n_samples):
    """Reference mains voltage period: v0(n) = rms * sqrt(2) * sin(2 pi n / N)."""
    if n_samples < 2:
        raise SpecificationError("voltage waveform needs at least 2 samples")
    n = np.arange(n_samples)
    return rms_volts * np.sqrt(2.0) * np.sin(2.0 * np.pi * n / n_samples)


@dataclass(frozen=True)
class Mains:
    rms_volts: float = 230.0
    frequency_hz: float = 50.0
    phases: int = 1

    def __post_init__(self):
        if self.phases != 1:
            raise SpecificationError("only single-phase networks are supported")


@dataclass
class DeviceSpec:
    """One device: a signature source plus a class-specific activation generator.

    Class invariants (K is the signature count):
      A: K = 1, on/off transition table + rated on-power
      B: K > 1, (K+1)-state transition table + per-state powers
      C: K = 1, activation template + ARMA noise
      D: K > 1, activation template + ARMA noise + Dirichlet alpha
    """

    name: str
    device_class: str
    signature: SignatureTemplate
    transitions: TransitionTable | None = None
    on_power_watts: float | None = None
    state_powers: np.ndarray | None = None
    template: ActivationTemplate | None = None
    arma: ArmaParams | None = None
    alpha: np.ndarray | None = None
    redraw_daily: bool = False
    initial_state: int = 0

    def __post_init__(self):
        k = self.signature.k
        cls = self.device_class
        if cls == CLASS_ON_OFF:
            if k != 1:
                raise SpecificationError(f"{self.name}: class A needs exactly 1 signature")
            if self.transitions is None or self.transitions.n_states != 2:
                raise SpecificationError(f"{self.name}: class A needs a 2-state transition table")
            if not self.on_power_watts or self.on_power_watts <= 0:
                raise SpecificationError(f"{self.name}: class A needs a positive on-power")
        elif cls == CLASS_MULTI_STATE:
            if k < 2:
                raise SpecificationError(f"{self.name}: class B needs K > 1 signatures")
            if self.transitions is None or self.transitions.n_states != k + 1:
                raise SpecificationError(
                    f"{self.name}: class B needs a {k + 1}-state transition table"
                )
            self.state_powers = np.asarray(self.state_powers, dtype=float)
            if self.state_powers.shape != (k,):
                raise SpecificationError(f"{self.name}: class B needs {k} state powers")
        elif cls == CLASS_VARYING_LOAD:
            if k != 1:
                raise SpecificationError(f"{self.name}: class C needs exactly 1 signature")
            if self.template is None or self.arma is None:
                raise SpecificationError(f"{self.name}: class C needs a template and ARMA noise")
        elif cls == CLASS_VARYING_SIGNATURE:
            if k < 2:
                raise SpecificationError(f"{self.name}: class D needs K > 1 signatures")
            if self.template is None or self.arma is None:
                raise SpecificationError(f"{self.name}: class D needs a template and ARMA noise")
            self.alpha = np.asarray(self.alpha, dtype=float)
            if self.alpha.shape != (k,):
                raise SpecificationError(f"{self.name}: class D needs a length-{k} alpha")
        else:
            raise SpecificationError(f"{self.name}: unknown device class {cls!r}")

    @property
    def k(self):
        return self.signature.k

    def peak_power_watts(self):
        """Rough per-device peak used to scale default measurement noise."""
        if self.device_class == CLASS_ON_OFF:
            return float(self.on_power_watts)
        if self.device_class == CLASS_MULTI_STATE:
            return float(np.max(self.state_powers))
        return float(np.max(self.template.values))


@dataclass
class CategorySpec:
    category_id: str
    devices: list

    def __post_init__(self):
        if not self.devices:
            raise SpecificationError(f"category {self.category_id!r} has no devices")


@dataclass
class BuildingSpec:
    """Declarative building composition plus waveform/sampling parameters."""

    name: str
    categories: list
    span_seconds: float
    cadence_seconds: float = 30.0
    samples_per_period: int = 200
    mains: Mains = field(default_factory=Mains)
    noise_std_amps: float | None = None
    hf_ground_truth: bool = False
    start_time: float = 0.0

    def __post_init__(self):
        if not self.categories:
            raise SpecificationError(f"building {self.name!r} has no categories")
        if self.samples_per_period < 2:
            raise SpecificationError("samples_per_period must be >= 2")
        if self.cadence_seconds <= 0:
            raise SpecificationError("cadence must be positive")
        if self.span_seconds < self.cadence_seconds:
            raise SpecificationError("span shorter than one waveform cadence")
        if self.noise_std_amps is not None and self.noise_std_amps < 0:
            raise SpecificationError("noise std must be nonnegative")

    def timestamps(self):
        count = int(round(self.span_seconds / self.cadence_seconds))
        return self.start_time + self.cadence_seconds * np.arange(count)

    def resolved_noise_std(self):
        """Default noise: 0.1% of the expected peak total current amplitude."""
        if self.noise_std_amps is not None:
            return float(self.noise_std_amps)
        peak_watts = sum(
            dev.peak_power_watts() for cat in self.categories for dev in cat.devices
        )
        peak_amps = np.sqrt(2.0) * peak_watts / self.mains.rms_volts
        return 1e-3 * peak_amps


@dataclass
class SimulatedDataset:
    """Synthesized building: total current plus per-category ground truth."""

    name: str
    timestamps: np.ndarray
    total_current: CurrentMatrix
    noise: np.ndarray
    category_ids: list
    category_power: list
    category_current: list | None
    activations: dict
    hf_ground_truth: bool
    spec: BuildingSpec


def _device_seed(root, cat_index, dev_index):
    return np.random.SeedSequence(entropy=root.entropy,
                                  spawn_key=root.spawn_key + (1, cat_index, dev_index))


def _noise_seed(root):
    return np.random.SeedSequence(entropy=root.entropy, spawn_key=root.spawn_key + (0,))


def synthesize_device(dev, mains, timestamps, n_samples, seed):
    """Draw one device: returns (current N x T, activations K x T in watts).

    The signature draw is normalized against the mains voltage waveform, so
    the per-period power of the current equals the activation column sum.
    """
    rng = np.random.default_rng(seed)
    v0 = voltage_waveform(mains.rms_volts, n_samples)
    signatures = sample_signature(dev.signature, v0, rng)
    cls = dev.device_class
    if cls == CLASS_ON_OFF:
        states = sample_onoff(dev.transitions, timestamps, rng, dev.initial_state)
        activations = (dev.on_power_watts * states.astype(float))[None, :]
    elif cls == CLASS_MULTI_STATE:
        activations = sample_multistate_activation(
            dev.transitions, dev.state_powers, timestamps, rng, dev.initial_state
        )
    elif cls == CLASS_VARYING_LOAD:
        activations = sample_complex_activation(dev.template, dev.arma, timestamps, rng)[None, :]
    else:
        activations = sample_multisig_activation(
            dev.template, dev.arma, dev.alpha, timestamps, rng, dev.redraw_daily
        )
    return signatures @ activations, activations


def synthesize_building(spec, seed):
    """Synthesize a full building dataset; pure function of (spec, seed)."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    timestamps = spec.timestamps()
    n = spec.samples_per_period
    t = timestamps.size
    total = np.zeros((n, t))
    category_ids = []
    category_power = []
    category_current = [] if spec.hf_ground_truth else None
    activations = {}
    for ci, cat in enumerate(spec.categories):
        cat_current = np.zeros((n, t))
        cat_watts = np.zeros(t)
        for di, dev in enumerate(cat.devices):
            current, acts = synthesize_device(
                dev, spec.mains, timestamps, n, _device_seed(root, ci, di)
            )
            cat_current += current
            cat_watts += acts.sum(axis=0)
            activations[(cat.category_id, dev.name)] = acts
        total += cat_current
        category_ids.append(cat.category_id)
        category_power.append(PowerSeries(timestamps, cat_watts, spec.cadence_seconds))
        if category_current is not None:
            category_current.append(CurrentMatrix(cat_current))
    noise_rng = np.random.default_rng(_noise_seed(root))
    noise = noise_rng.normal(0.0, spec.resolved_noise_std(), size=(n, t)) \
        if spec.resolved_noise_std() > 0 else np.zeros((n, t))
    total += noise
    return SimulatedDataset(
        name=spec.name,
        timestamps=timestamps,
        total_current=CurrentMatrix(total),
        noise=noise,
        category_ids=category_ids,
        category_power=category_power,
        category_current=category_current,
        activations=activations,
        hf_ground_truth=spec.hf_ground_truth,
        spec=spec,
    )


def _spec_summary(spec):
    return {
        "name": spec.name,
        "span_seconds": spec.span_seconds,
        "cadence_seconds": spec.cadence_seconds,
        "samples_per_period": spec.samples_per_period,
        "mains_rms_volts": spec.mains.rms_volts,
        "mains_frequency_hz": spec.mains.frequency_hz,
        "noise_std_amps": spec.resolved_noise_std(),
        "hf_ground_truth": spec.hf_ground_truth,
        "categories": [
            {
                "id": cat.category_id,
                "devices": [
                    {"name": dev.name, "class": dev.device_class, "k": dev.k}
                    for dev in cat.devices
                ],
            }
            for cat in spec.categories
        ],
    }


def emit_shed(specs, out_dir, seed=0):
    """Write a SHED-style dataset tree and return the manifest dict.

    Layout: ``<out>/<building>/total_current.csv`` plus per-category ground
    truth (``cat_<id>_power.csv`` at the waveform cadence, or
    ``cat_<id>_current.csv`` when the building is flagged high-frequency)
    and a root ``manifest.json`` recording seeds, specs and checksums.
    """
    from . import dataio

    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "format_version": DATASET_FORMAT_VERSION,
        "tool_version": __version__,
        "seed": int(seed),
        "buildings": {},
    }
    for b, spec in enumerate(specs):
        building_seed = np.random.SeedSequence(entropy=int(seed), spawn_key=(b,))
        dataset = synthesize_building(spec, building_seed)
        building_dir = os.path.join(out_dir, spec.name)
        os.makedirs(building_dir, exist_ok=True)
        files = {}

        def _write(rel_name, writer, payload):
            target = os.path.join(building_dir, rel_name)
            writer(target, payload)
            files[rel_name] = dataio.sha256_file(target)

        _write("total_current.csv", dataio.write_current_matrix, dataset.total_current)
        for idx, cat_id in enumerate(dataset.category_ids):
            if dataset.hf_ground_truth:
                _write(f"cat_{cat_id}_current.csv", dataio.write_current_matrix,
                       dataset.category_current[idx])
            else:
                _write(f"cat_{cat_id}_power.csv", dataio.write_power_series,
                       dataset.category_power[idx])
        manifest["buildings"][spec.name] = {
            "seed_spawn_key": [b],
            "spec": _spec_summary(spec),
            "files": files,
        }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
