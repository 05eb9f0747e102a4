"""Bundled signature/activation archetypes and the default SHED recipe.

The signature library is procedurally generated from harmonic recipes
(resistive, motor-like, rectifier-like, phase-cut) so dataset generation
works out of the box; any of them can be replaced by a user-supplied
factor model file. Activation archetypes cover typical commercial day
shapes plus low-rate residential on/off switching.
"""

import numpy as np

from .errors import SpecificationError
from .genmodel import (
    HALFMINUTE,
    HOURLY,
    ActivationTemplate,
    SignatureTemplate,
    TimePartition,
    TransitionTable,
    default_arma_params,
)
from .simulate import BuildingSpec, CategorySpec, DeviceSpec, Mains, voltage_waveform

SIGNATURE_KINDS = ("resistive", "motor", "rectifier", "triac")
TEMPLATE_KINDS = ("office", "retail", "server", "hvac")


# ---------------------------------------------------------------------------
# Signature archetypes
# ---------------------------------------------------------------------------

def _raw_signature(kind, n, variant=0):
    phase = 2.0 * np.pi * np.arange(n) / n
    if kind == "resistive":
        return np.sin(phase)
    if kind == "motor":
        # lagging current with a touch of 5th harmonic
        lag = 0.45 + 0.1 * variant
        h5 = 0.06 + 0.02 * variant
        return np.sin(phase - lag) + h5 * np.sin(5.0 * phase - 2.0 * lag)
    if kind == "rectifier":
        # conduction bursts around the voltage peaks (IT power supplies)
        sharp = 5 + 2 * variant
        return np.sign(np.sin(phase)) * np.abs(np.sin(phase)) ** sharp
    if kind == "triac":
        # phase-cut dimmer: blocked until the firing angle each half cycle
        firing = 0.25 + 0.1 * variant
        half = np.mod(phase, np.pi)
        return np.where(half >= firing * np.pi, np.sin(phase), 0.0)
    raise SpecificationError(
        f"unknown signature kind {kind!r} (expected one of {SIGNATURE_KINDS})"
    )


def signature_template(kind, mains=Mains(), n_samples=200, k=1, sigma_rel=0.01):
    """Normalized signature template of ``k`` components for one archetype.

    Components beyond the first are progressively distorted variants so
    multi-signature devices have distinguishable component waveforms.
    ``sigma_rel`` sets the Gaussian perturbation std as a fraction of the
    template RMS (the sampler hyperparameter).
    """
    v0 = voltage_waveform(mains.rms_volts, n_samples)
    cols = []
    for comp in range(k):
        raw = _raw_signature(kind, n_samples, variant=comp)
        proj = float(raw @ v0) / n_samples
        if proj <= 0:
            raise SpecificationError(f"archetype {kind!r} has nonpositive power projection")
        cols.append(raw / proj)
    template = np.column_stack(cols)
    sigma = sigma_rel * float(np.sqrt(np.mean(template ** 2)))
    return SignatureTemplate(template=template, sigma=sigma)


# ---------------------------------------------------------------------------
# Activation templates (halfminute-daytype)
# ---------------------------------------------------------------------------

def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _day_curve(hours, start, stop, ramp):
    return _sigmoid((hours - start) / ramp) * _sigmoid((stop - hours) / ramp)


def activation_template(kind, scale_watts, partition=None, name=None):
    """Week-day / day-off mean power profile for one archetype, in watts."""
    partition = partition or TimePartition(HALFMINUTE)
    slots = partition.n_subsets // 2
    hours = np.arange(slots) / (slots / 24.0)
    if kind == "office":
        week = 0.22 + 0.78 * _day_curve(hours, 7.5, 18.5, 0.8)
        off = 0.22 + 0.10 * _day_curve(hours, 9.0, 17.0, 1.2)
    elif kind == "retail":
        week = 0.25 + 0.75 * _day_curve(hours, 8.5, 20.5, 0.7)
        off = 0.25 + 0.65 * _day_curve(hours, 9.5, 19.5, 0.7)
    elif kind == "server":
        week = 0.92 + 0.08 * np.sin(2.0 * np.pi * (hours - 15.0) / 24.0)
        off = week
    elif kind == "hvac":
        midday = np.exp(-0.5 * ((hours - 14.0) / 3.5) ** 2)
        week = 0.15 + 0.55 * _day_curve(hours, 6.0, 20.0, 1.0) + 0.30 * midday
        off = 0.15 + 0.18 * midday
    else:
        raise SpecificationError(
            f"unknown template kind {kind!r} (expected one of {TEMPLATE_KINDS})"
        )
    values = scale_watts * np.concatenate([week, off])
    return ActivationTemplate(partition=partition, values=values, name=name or kind)


# ---------------------------------------------------------------------------
# Transition tables
# ---------------------------------------------------------------------------

def onoff_table(on_given_off, on_given_on, partition=None):
    """Hourly 2-state table from per-hour switch-on and stay-on probabilities."""
    partition = partition or TimePartition(HOURLY)
    q = np.broadcast_to(np.asarray(on_given_off, dtype=float), (partition.n_subsets,))
    p = np.broadcast_to(np.asarray(on_given_on, dtype=float), (partition.n_subsets,))
    gamma = np.empty((partition.n_subsets, 2, 2))
    gamma[:, 1, 0] = q
    gamma[:, 0, 0] = 1.0 - q
    gamma[:, 1, 1] = p
    gamma[:, 0, 1] = 1.0 - p
    return TransitionTable(partition=partition, gamma=gamma)


def office_hours_onoff(day_rate=0.04, night_rate=0.004, stay=0.95):
    """Commercial on/off switching: active during working hours."""
    hours = np.arange(24)
    working = (hours >= 7) & (hours <= 19)
    q = np.where(working, day_rate, night_rate)
    return onoff_table(q, stay)


def sparse_onoff(switch_on=0.003, stay_on=0.994, evening_boost=4.0):
    """Residential-style rare switching with an evening usage bump."""
    hours = np.arange(24)
    q = np.full(24, switch_on)
    q[(hours >= 18) & (hours <= 22)] *= evening_boost
    q[(hours >= 1) & (hours <= 5)] *= 0.25
    return onoff_table(q, stay_on)


def cycling_states_table(k, start_prob=0.05, advance_prob=0.08, stop_prob=0.03,
                         partition=None):
    """(K+1)-state chain for multi-state devices: off -> 1 -> ... -> K -> off.

    From off the device starts with ``start_prob``; from state s it stops,
    stays, or advances to the next state (the last state can only stop or
    stay). Probabilities are uniform across the day.
    """
    if k < 1:
        raise SpecificationError("cycling table needs k >= 1")
    partition = partition or TimePartition(HOURLY)
    s = k + 1
    gamma = np.zeros((partition.n_subsets, s, s))
    gamma[:, 0, 0] = 1.0 - start_prob
    gamma[:, 1, 0] = start_prob
    for state in range(1, s):
        nxt = state + 1
        adv = advance_prob if nxt < s else 0.0
        gamma[:, 0, state] = stop_prob
        gamma[:, state, state] = 1.0 - stop_prob - adv
        if nxt < s:
            gamma[:, nxt, state] = adv
    return TransitionTable(partition=partition, gamma=gamma)


# ---------------------------------------------------------------------------
# Device and building recipes
# ---------------------------------------------------------------------------

def _commercial_device(cls, index, mains):
    """Deterministic device parameters for class/index slots of a building."""
    if cls == "A":
        kinds = ("resistive", "motor", "resistive", "motor")
        powers = (2400.0, 1500.0, 3200.0, 1100.0)
        rates = (0.05, 0.03, 0.04, 0.06)
        stays = (0.94, 0.96, 0.93, 0.92)
        i = index % 4
        return DeviceSpec(
            name=f"onoff_{index}",
            device_class="A",
            signature=signature_template(kinds[i], mains),
            transitions=office_hours_onoff(rates[i], rates[i] / 8.0, stays[i]),
            on_power_watts=powers[i],
        )
    if cls == "B":
        k = 2 + index % 2
        base = 1800.0 + 700.0 * (index % 3)
        return DeviceSpec(
            name=f"multistate_{index}",
            device_class="B",
            signature=signature_template(("motor", "triac")[index % 2], mains, k=k),
            transitions=cycling_states_table(k, 0.05, 0.10, 0.04),
            state_powers=base * (1.0 + 0.5 * np.arange(k)),
        )
    if cls == "C":
        kinds = ("motor", "resistive", "rectifier", "motor")
        templates = ("hvac", "office", "server", "retail")
        scales = (22000.0, 9000.0, 6000.0, 12000.0)
        i = index % 4
        return DeviceSpec(
            name=f"varying_load_{index}",
            device_class="C",
            signature=signature_template(kinds[i], mains),
            template=activation_template(templates[i], scales[i]),
            arma=default_arma_params(0.05),
        )
    if cls == "D":
        kinds = ("rectifier", "motor", "triac", "rectifier")
        templates = ("office", "hvac", "retail", "server")
        scales = (11000.0, 16000.0, 7000.0, 9000.0)
        i = index % 4
        k = 2 + index % 2
        return DeviceSpec(
            name=f"varying_signature_{index}",
            device_class="D",
            signature=signature_template(kinds[i], mains, k=k),
            template=activation_template(templates[i], scales[i]),
            arma=default_arma_params(0.05),
            alpha=np.full(k, 5.0),
        )
    raise SpecificationError(f"unknown device class {cls!r}")


# class mix (A, B, C, D) of each released building
SHED_BUILDING_MIX = {
    1: (4, 0, 2, 3),
    2: (1, 4, 2, 3),
    3: (0, 2, 2, 3),
    4: (2, 0, 4, 3),
    5: (0, 3, 4, 1),
    6: (3, 0, 3, 4),
    7: (0, 0, 3, 2),
    8: (0, 0, 4, 4),
}
HF_BUILDINGS = (7, 8)


def shed_building_spec(index, span_days=7.0, mains=None, start_time=0.0):
    """BuildingSpec for one SHED building (1-8) with its published class mix."""
    if index not in SHED_BUILDING_MIX:
        raise SpecificationError(f"SHED defines buildings 1..8, got {index}")
    mains = mains or Mains()
    counts = SHED_BUILDING_MIX[index]
    categories = []
    slot = index  # offsets parameter choices so buildings differ
    for cls, count in zip("ABCD", counts):
        for _ in range(count):
            device = _commercial_device(cls, slot, mains)
            categories.append(
                CategorySpec(category_id=f"{device.name}", devices=[device])
            )
            slot += 1
    return BuildingSpec(
        name=f"building_{index}",
        categories=categories,
        span_seconds=span_days * 86400.0,
        mains=mains,
        hf_ground_truth=index in HF_BUILDINGS,
        start_time=start_time,
    )


def shed_building_specs(span_days=7.0, mains=None):
    return [shed_building_spec(i, span_days=span_days, mains=mains) for i in sorted(SHED_BUILDING_MIX)]


def commercial_building_spec(span_days=14.0, mains=None):
    """SHED-like commercial reference building (building 1 class mix)."""
    spec = shed_building_spec(1, span_days=span_days, mains=mains)
    spec.name = "commercial"
    return spec


def residential_building_spec(span_days=14.0, mains=None, n_devices=5):
    """Few-device on/off building used as the residential statistical anchor."""
    mains = mains or Mains()
    powers = (1900.0, 2600.0, 350.0, 1200.0, 750.0, 2100.0, 500.0)
    categories = []
    for i in range(n_devices):
        device = DeviceSpec(
            name=f"appliance_{i}",
            device_class="A",
            signature=signature_template(("resistive", "motor", "rectifier")[i % 3], mains),
            transitions=sparse_onoff(0.002 + 0.001 * (i % 3), 0.994),
            on_power_watts=powers[i % len(powers)],
        )
        categories.append(CategorySpec(category_id=device.name, devices=[device]))
    return BuildingSpec(
        name="residential",
        categories=categories,
        span_seconds=span_days * 86400.0,
        mains=mains,
        start_time=0.0,
    )
