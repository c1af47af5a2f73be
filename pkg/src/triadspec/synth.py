"""Deterministic synthetic triads with injectable anomaly components.

A scenario is a quiet baseline (optionally with a static bias field on
the injection axis) plus a list of injectors, each contributing
additively to the x component of its target sensors:

* ``single_tone`` / ``pairwise_tone``: a sinusoid on one / two sensors,
* ``common_broadband``: one shared Gaussian noise waveform on all targets,
* ``white_floor``: independent Gaussian noise per target sensor,
* ``impulse_step``: a step, optionally with an exponential tail,
* ``gain_ramp``: a slow gain drift of the target sensor, modelled as the
  drift acting on the static bias field.

The bias field sits on the same axis as the injections, so the scalar
magnitude reduces to bias + x(t) exactly whenever bias dominates: every
injected frequency appears at its own bin with its own amplitude, with
no intermodulation products.

Noise comes from numpy's PCG64 stream, one spawned child per injector,
so output is bit-identical for a given (seed, scenario) on any platform
and removing one injector never shifts another injector's noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dsp import StftParams, frame_count
from .errors import AliasingError, FormatError, ParameterError
from .pipeline import VectorSeries
from .taxonomy import PRIMARY_BY_SENSOR, SECONDARY_BY_PAIR, PixelClass

#: Identifier of the noise generator algorithm, recorded in output metadata.
RNG_ALGORITHM = "numpy-pcg64"

KINDS = (
    "common_broadband",
    "single_tone",
    "pairwise_tone",
    "gain_ramp",
    "impulse_step",
    "white_floor",
)
_ALL_SENSORS = (1, 2, 3)
_DEFAULT_ALL = ("common_broadband", "white_floor")
_NOISE_KINDS = ("common_broadband", "white_floor")
_TONE_KINDS = ("single_tone", "pairwise_tone")


@dataclass(frozen=True)
class Injector:
    """One additive scenario component.

    ``targets`` is the affected sensor subset; tones require ``freq``;
    ``time_range`` defaults to the full scenario duration;
    ``ramp_rate`` (per second) applies to gain ramps only and
    ``decay_s`` puts an exponential tail on an impulse step.
    """

    kind: str
    targets: tuple[int, ...] = ()
    freq: float | None = None
    amplitude: float = 1.0
    time_range: tuple[float, float] | None = None
    ramp_rate: float | None = None
    decay_s: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown injector kind {self.kind!r}; expected one of {KINDS}")
        targets = tuple(sorted(set(self.targets)))
        if not targets and self.kind in _DEFAULT_ALL:
            targets = _ALL_SENSORS
        object.__setattr__(self, "targets", targets)
        if not targets:
            raise ParameterError(f"{self.kind} requires explicit targets")
        if any(t not in _ALL_SENSORS for t in targets):
            raise ParameterError(f"targets must be a subset of {{1, 2, 3}}, got {targets}")
        if self.kind == "single_tone" and len(targets) != 1:
            raise ParameterError(f"single_tone targets exactly one sensor, got {targets}")
        if self.kind == "pairwise_tone" and len(targets) != 2:
            raise ParameterError(f"pairwise_tone targets exactly two sensors, got {targets}")
        if self.kind in _TONE_KINDS:
            if self.freq is None:
                raise ParameterError(f"{self.kind} requires a tone frequency")
            if not self.freq > 0:
                raise ParameterError(f"tone frequency must be positive, got {self.freq}")
        elif self.freq is not None:
            raise ParameterError(f"{self.kind} does not take a frequency")
        if self.kind == "gain_ramp":
            if self.ramp_rate is None:
                raise ParameterError("gain_ramp requires ramp_rate")
        elif self.ramp_rate is not None:
            raise ParameterError(f"{self.kind} does not take ramp_rate")
        if self.decay_s is not None:
            if self.kind != "impulse_step":
                raise ParameterError(f"{self.kind} does not take decay_s")
            if not self.decay_s > 0:
                raise ParameterError(f"decay_s must be positive, got {self.decay_s}")
        if self.kind in _NOISE_KINDS and self.amplitude < 0:
            raise ParameterError(f"{self.kind} amplitude is a noise level and must be >= 0")
        if self.time_range is not None:
            t0, t1 = self.time_range
            if not t0 < t1:
                raise ParameterError(f"time_range start must precede end, got {self.time_range}")


@dataclass(frozen=True)
class ScenarioSpec:
    """A fully determined synthetic scenario: duration, rate, seed,
    static bias level and the injector list."""

    duration: float
    sample_rate: float
    seed: int = 0
    components: tuple[Injector, ...] = ()
    bias_nt: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ParameterError(f"duration must be positive, got {self.duration}")
        if not self.sample_rate > 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        if not 0 <= self.seed < 2**64:
            raise ParameterError(f"seed must fit in 64 bits, got {self.seed}")
        object.__setattr__(self, "components", tuple(self.components))
        nyquist = self.sample_rate / 2.0
        for inj in self.components:
            if inj.freq is not None and inj.freq >= nyquist:
                raise AliasingError(
                    f"tone at {inj.freq} Hz is at or above the Nyquist frequency {nyquist} Hz"
                )

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))


def _sample_span(spec: ScenarioSpec, inj: Injector) -> tuple[int, int, float]:
    """Clamped (start, stop) sample indices and the start time in seconds."""
    if inj.time_range is None:
        t0, t1 = 0.0, spec.duration
    else:
        t0 = max(0.0, inj.time_range[0])
        t1 = min(spec.duration, inj.time_range[1])
    i0 = int(round(t0 * spec.sample_rate))
    i1 = int(round(t1 * spec.sample_rate))
    return min(i0, spec.n_samples), min(i1, spec.n_samples), t0


def generate(spec: ScenarioSpec) -> tuple[VectorSeries, VectorSeries, VectorSeries]:
    """Render a scenario to three vector series.

    Pure function of the spec including the seed: identical specs give
    bit-identical samples.
    """
    n = spec.n_samples
    rate = spec.sample_rate
    t = np.arange(n) / rate
    x = np.zeros((3, n))  # injection axis, one row per sensor
    x += spec.bias_nt
    children = np.random.SeedSequence(spec.seed).spawn(max(len(spec.components), 1))
    for child, inj in zip(children, spec.components):
        i0, i1, t0 = _sample_span(spec, inj)
        if i1 <= i0:
            continue
        tt = t[i0:i1]
        if inj.kind in _TONE_KINDS:
            wave = inj.amplitude * np.sin(2.0 * np.pi * inj.freq * tt)
            for s in inj.targets:
                x[s - 1, i0:i1] += wave
        elif inj.kind == "common_broadband":
            rng = np.random.Generator(np.random.PCG64(child))
            wave = inj.amplitude * rng.standard_normal(i1 - i0)
            for s in inj.targets:
                x[s - 1, i0:i1] += wave
        elif inj.kind == "white_floor":
            rng = np.random.Generator(np.random.PCG64(child))
            for s in inj.targets:
                x[s - 1, i0:i1] += inj.amplitude * rng.standard_normal(i1 - i0)
        elif inj.kind == "impulse_step":
            wave = np.full(i1 - i0, inj.amplitude)
            if inj.decay_s is not None:
                wave = inj.amplitude * np.exp(-(tt - t0) / inj.decay_s)
            for s in inj.targets:
                x[s - 1, i0:i1] += wave
        elif inj.kind == "gain_ramp":
            # Drift of the sensor gain acting on the static bias field;
            # additive so that scenarios superpose component-wise.
            wave = inj.ramp_rate * (tt - t0) * spec.bias_nt * inj.amplitude
            for s in inj.targets:
                x[s - 1, i0:i1] += wave
    zeros = np.zeros(n)
    return tuple(
        VectorSeries(x[k], zeros.copy(), zeros.copy(), rate, k + 1, 0.0) for k in range(3)
    )


def expected_class(inj: Injector) -> PixelClass:
    """Taxonomy class an injector should produce, from its target set."""
    if len(inj.targets) == 3:
        return PixelClass.ACHROMATIC
    if len(inj.targets) == 2:
        return SECONDARY_BY_PAIR[inj.targets]
    return PRIMARY_BY_SENSOR[inj.targets[0]]


@dataclass(frozen=True)
class ScheduleRecord:
    """Ground truth for one injector under a given analysis framing.

    ``frame_range`` bounds the frames whose windows lie fully inside the
    injection interval (None when no frame is fully covered);
    ``bin_range`` bounds the bins expected to carry the energy.
    """

    kind: str
    expected_class: PixelClass
    sensors: tuple[int, ...]
    freq: float | None
    time_range: tuple[float, float]
    frame_range: tuple[int, int] | None
    bin_range: tuple[int, int]

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "expected_class": self.expected_class.label,
            "sensors": list(self.sensors),
            "freq": self.freq,
            "time_range": list(self.time_range),
            "frame_range": None if self.frame_range is None else list(self.frame_range),
            "bin_range": list(self.bin_range),
        }


def schedule(spec: ScenarioSpec, params: StftParams) -> list[ScheduleRecord]:
    """Ground-truth records for every injector under ``params``."""
    n = spec.n_samples
    hop = params.hop
    n_frames = frame_count(n, params.window_len, hop)
    n_bins = params.n_bins
    freq_step = spec.sample_rate / params.window_len
    records = []
    for inj in spec.components:
        i0, i1, t0 = _sample_span(spec, inj)
        first = -(-i0 // hop)  # ceil
        last = (i1 - params.window_len) // hop
        last = min(last, n_frames - 1)
        frame_range = (first, last) if 0 <= first <= last else None
        if inj.freq is not None:
            tone_bin = int(round(inj.freq / freq_step))
            tone_bin = min(max(tone_bin, 0), n_bins - 1)
            bin_range = (tone_bin, tone_bin)
        else:
            bin_range = (0, n_bins - 1)
        records.append(
            ScheduleRecord(
                kind=inj.kind,
                expected_class=expected_class(inj),
                sensors=inj.targets,
                freq=inj.freq,
                time_range=(i0 / spec.sample_rate, i1 / spec.sample_rate),
                frame_range=frame_range,
                bin_range=bin_range,
            )
        )
    return records


# ---------------------------------------------------------------------------
# Scenario file grammar
#
# One statement per line; blank lines and lines starting with '#' are
# ignored. The first statement must be the scenario header:
#
#   scenario duration=120 rate=32 [bias=1000] [seed=7] [window=256] [overlap=0.5]
#
# followed by one injector per line, e.g.:
#
#   single_tone targets=2 freq=4.0 amplitude=10 time=20:100
#   pairwise_tone targets=1,3 freq=8.0 amplitude=10
#   common_broadband amplitude=0.5
#   white_floor amplitude=0.02 targets=1,2,3
#   gain_ramp targets=2 ramp_rate=0.005
#   impulse_step targets=1 amplitude=50 time=60:120 decay=4
#
# window/overlap carry the analysis framing used when emitting the
# ground-truth schedule; the CLI can override them.
# ---------------------------------------------------------------------------

_SCENARIO_KEYS = ("duration", "rate", "bias", "seed", "window", "overlap")
_INJECTOR_KEYS = ("targets", "freq", "amplitude", "time", "ramp_rate", "decay")


@dataclass(frozen=True)
class ScenarioFile:
    """A parsed scenario plus its suggested analysis framing."""

    spec: ScenarioSpec
    window_len: int = 1024
    overlap: float = 0.5

    def stft_params(self, **overrides) -> StftParams:
        return StftParams(
            window_len=overrides.get("window_len", self.window_len),
            overlap=overrides.get("overlap", self.overlap),
            scale=overrides.get("scale", "linear"),
            db_floor=overrides.get("db_floor", 1e-30),
        )


def _parse_fields(tokens, allowed, lineno):
    fields = {}
    for token in tokens:
        if "=" not in token:
            raise FormatError(f"expected key=value, got {token!r}", line=lineno)
        key, _, value = token.partition("=")
        if key not in allowed:
            raise FormatError(f"unknown key {key!r} (allowed: {', '.join(allowed)})", line=lineno)
        if key in fields:
            raise FormatError(f"duplicate key {key!r}", line=lineno)
        fields[key] = value
    return fields


def _parse_float(fields, key, lineno):
    try:
        return float(fields[key])
    except ValueError:
        raise FormatError(f"{key} must be a number, got {fields[key]!r}", line=lineno) from None


def _parse_injector(kind, fields, lineno) -> Injector:
    kwargs = {"kind": kind}
    if "targets" in fields:
        try:
            kwargs["targets"] = tuple(int(tok) for tok in fields["targets"].split(","))
        except ValueError:
            raise FormatError(
                f"targets must be comma-separated sensor ids, got {fields['targets']!r}",
                line=lineno,
            ) from None
    if "freq" in fields:
        kwargs["freq"] = _parse_float(fields, "freq", lineno)
    if "amplitude" in fields:
        kwargs["amplitude"] = _parse_float(fields, "amplitude", lineno)
    if "ramp_rate" in fields:
        kwargs["ramp_rate"] = _parse_float(fields, "ramp_rate", lineno)
    if "decay" in fields:
        kwargs["decay_s"] = _parse_float(fields, "decay", lineno)
    if "time" in fields:
        lo, sep, hi = fields["time"].partition(":")
        if not sep:
            raise FormatError(f"time must be start:end seconds, got {fields['time']!r}", line=lineno)
        try:
            kwargs["time_range"] = (float(lo), float(hi))
        except ValueError:
            raise FormatError(f"time must be start:end seconds, got {fields['time']!r}", line=lineno) from None
    try:
        return Injector(**kwargs)
    except ParameterError as err:
        raise FormatError(str(err), line=lineno) from err


def parse_scenario(text: str) -> ScenarioFile:
    """Parse the scenario grammar; errors carry the offending line number."""
    header = None
    header_line = None
    injectors = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        keyword, args = tokens[0], tokens[1:]
        if keyword == "scenario":
            if header is not None:
                raise FormatError("duplicate scenario header", line=lineno)
            header = _parse_fields(args, _SCENARIO_KEYS, lineno)
            header_line = lineno
            for required in ("duration", "rate"):
                if required not in header:
                    raise FormatError(f"scenario header requires {required}=", line=lineno)
        elif keyword in KINDS:
            if header is None:
                raise FormatError("injector line before the scenario header", line=lineno)
            fields = _parse_fields(args, _INJECTOR_KEYS, lineno)
            injectors.append((lineno, _parse_injector(keyword, fields, lineno)))
        else:
            raise FormatError(
                f"unknown statement {keyword!r} (expected 'scenario' or an injector kind)",
                line=lineno,
            )
    if header is None:
        raise FormatError("missing scenario header line", line=1)

    duration = _parse_float(header, "duration", header_line)
    rate = _parse_float(header, "rate", header_line)
    bias = _parse_float(header, "bias", header_line) if "bias" in header else 0.0
    try:
        seed = int(header["seed"]) if "seed" in header else 0
    except ValueError:
        raise FormatError(f"seed must be an integer, got {header['seed']!r}", line=header_line) from None
    try:
        window_len = int(header["window"]) if "window" in header else 1024
    except ValueError:
        raise FormatError(f"window must be an integer, got {header['window']!r}", line=header_line) from None
    overlap = _parse_float(header, "overlap", header_line) if "overlap" in header else 0.5

    nyquist = rate / 2.0
    for lineno, inj in injectors:
        if inj.freq is not None and inj.freq >= nyquist:
            raise FormatError(
                f"tone at {inj.freq} Hz is at or above the Nyquist frequency {nyquist} Hz",
                line=lineno,
            )
    try:
        spec = ScenarioSpec(
            duration=duration,
            sample_rate=rate,
            seed=seed,
            components=tuple(inj for _, inj in injectors),
            bias_nt=bias,
        )
        return ScenarioFile(spec=spec, window_len=window_len, overlap=overlap)
    except (ParameterError, AliasingError) as err:
        raise FormatError(str(err), line=header_line) from err


def load_scenario(path) -> ScenarioFile:
    """Read and parse a scenario file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def with_seed(scenario: ScenarioFile, seed: int | None) -> ScenarioFile:
    """Return a copy with the seed overridden (None keeps the file's seed)."""
    if seed is None:
        return scenario
    return replace(scenario, spec=replace(scenario.spec, seed=seed))
