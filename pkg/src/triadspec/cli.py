"""Command-line surface: synth, render, classify, coherence."""

from __future__ import annotations

import functools
import sys

import click

from . import io as tio
from .coherence import ALL_PAIRS, cross_spectral_rank, msc
from .dsp import DECIBEL, LINEAR, StftParams
from .errors import TriadspecError
from .pipeline import (
    JOINT,
    PER_CHANNEL,
    LowFreqParams,
    PipelineConfig,
    align_triad,
    repair_gaps,
    run_pipeline,
    scalar_magnitude,
    trim_residual_gaps,
)
from .synth import RNG_ALGORITHM, generate, load_scenario, schedule, with_seed
from .taxonomy import (
    ClassifierThresholds,
    classify_image,
    detect_drift,
    segment_regions,
)

_SCALES = {"linear": LINEAR, "db": DECIBEL}
_NORMS = {"per-channel": PER_CHANNEL, "joint": JOINT}
_ORIENTATIONS = {"low-at-bottom": tio.LOW_AT_BOTTOM, "low-at-top": tio.LOW_AT_TOP}


def _trap_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except TriadspecError as err:
            raise click.ClickException(str(err)) from err

    return wrapper


def _prepare_triad(input_path, max_gap):
    """Load, gap-repair, trim and align a triad CSV."""
    triad, masks = tio.load_triad_csv(input_path)
    repaired = []
    for v, mask in zip(triad, masks):
        fixed, residual = repair_gaps(v, mask, max_gap)
        repaired.append(trim_residual_gaps(fixed, residual))
    return align_triad(*repaired)


def _summary(path, tensor):
    hop = tensor.frame_times[1] - tensor.frame_times[0] if tensor.n_frames >= 2 else float("nan")
    return (
        f"wrote {path}: {tensor.n_bins}x{tensor.n_frames} (bins x frames), "
        f"df={tensor.freq_step!r} Hz, hop={hop!r} s"
    )


def _stft_options(fn):
    fn = click.option("--window", type=int, default=1024, show_default=True,
                      help="Analysis window length N in samples.")(fn)
    fn = click.option("--overlap", type=float, default=0.5, show_default=True,
                      help="Fractional window overlap in [0, 1).")(fn)
    fn = click.option("--scale", type=click.Choice(sorted(_SCALES)), default="linear",
                      show_default=True, help="Linear power or decibel compression.")(fn)
    fn = click.option("--norm", type=click.Choice(sorted(_NORMS)), default="per-channel",
                      show_default=True, help="Per-channel or joint min-max normalisation.")(fn)
    fn = click.option("--db-floor", type=float, default=1e-30, show_default=True,
                      help="Clamp floor for dB compression, linear power units.")(fn)
    fn = click.option("--max-gap", type=int, default=5, show_default=True,
                      help="Longest dropout (samples) repaired by interpolation.")(fn)
    return fn


@click.group()
def main():
    """Cross-sensor RGB spectrograms for magnetometer triads."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Triad CSV (time,b1x..b3z with a '# rate=' header).")
@_stft_options
@click.option("--lowfreq-window", type=int, default=None,
              help="Long-window variant: window length (enables the variant).")
@click.option("--lowfreq-overlap", type=float, default=None,
              help="Long-window variant: fractional overlap.")
@click.option("--lowfreq-fmax", type=float, default=None,
              help="Long-window variant: keep frequencies up to this many Hz.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Output PNG path for the broadband tensor.")
@click.option("--out-lowfreq", "out_lowfreq", type=click.Path(dir_okay=False), default=None,
              help="Output PNG path for the low-frequency tensor.")
@click.option("--orientation", type=click.Choice(sorted(_ORIENTATIONS)), default="low-at-bottom",
              show_default=True, help="Row order of the PNG frequency axis.")
@click.option("--annotate-pc-bands", is_flag=True,
              help="Embed Pc band bin ranges in the PNG metadata.")
@_trap_errors
def render(input_path, window, overlap, scale, norm, db_floor, max_gap,
           lowfreq_window, lowfreq_overlap, lowfreq_fmax, out_path, out_lowfreq,
           orientation, annotate_pc_bands):
    """Fuse a triad CSV into a cross-sensor RGB spectrogram PNG.

    Real features persist when the analysis window changes: re-run with
    --window values spanning roughly a decade and keep only the features
    that survive the sweep.
    """
    lowfreq_flags = (lowfreq_window, lowfreq_overlap, lowfreq_fmax)
    given = sum(flag is not None for flag in lowfreq_flags)
    if given not in (0, 3):
        raise click.UsageError(
            "--lowfreq-window, --lowfreq-overlap and --lowfreq-fmax must be given together"
        )
    lowfreq = None
    if given == 3:
        if out_lowfreq is None:
            raise click.UsageError("--out-lowfreq is required when the lowfreq group is given")
        lowfreq = LowFreqParams(lowfreq_window, lowfreq_overlap, lowfreq_fmax)

    triad, masks = tio.load_triad_csv(input_path)
    nyquist = triad[0].sample_rate / 2.0
    if lowfreq is not None and lowfreq.f_max > nyquist:
        raise click.UsageError(
            f"--lowfreq-fmax {lowfreq.f_max} Hz exceeds the Nyquist frequency {nyquist} Hz"
        )
    params = StftParams(window, overlap, _SCALES[scale], db_floor)
    cfg = PipelineConfig(stft=params, norm_mode=_NORMS[norm], lowfreq=lowfreq, max_gap=max_gap)
    result = run_pipeline(*triad, cfg, gap_masks=masks)

    opts = tio.RenderOptions(out_path, _ORIENTATIONS[orientation], annotate_pc_bands)
    tio.write_png(result.broadband, opts, params, extra_text={"variant": "broadband"})
    click.echo(_summary(out_path, result.broadband))
    if result.lowfreq is not None:
        lf_params = StftParams(lowfreq.window_len, lowfreq.overlap, _SCALES[scale], db_floor)
        lf_opts = tio.RenderOptions(out_lowfreq, _ORIENTATIONS[orientation], annotate_pc_bands)
        tio.write_png(result.lowfreq, lf_opts, lf_params, extra_text={"variant": "lowfreq"})
        click.echo(_summary(out_lowfreq, result.lowfreq))


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@_stft_options
@click.option("--luminance-floor", type=float, default=0.1, show_default=True,
              help="Below this max-channel value a pixel is dark.")
@click.option("--saturation", type=float, default=0.3, show_default=True,
              help="Chroma at or below this is achromatic.")
@click.option("--presence", type=float, default=0.5, show_default=True,
              help="Channel counts as bright at this fraction of the pixel maximum.")
@click.option("--min-region", type=int, default=8, show_default=True,
              help="Smallest reported region, in pixels.")
@click.option("--report", "report_path", required=True, type=click.Path(dir_okay=False),
              help="Where to write the region report.")
@click.option("--format", "report_format", type=click.Choice(["json", "csv"]), default="json",
              show_default=True, help="Region report format.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Also write the fused tensor PNG here.")
@click.option("--figure", "figure_path", type=click.Path(dir_okay=False), default=None,
              help="Also render an annotated matplotlib figure here.")
@_trap_errors
def classify(input_path, window, overlap, scale, norm, db_floor, max_gap,
             luminance_floor, saturation, presence, min_region, report_path,
             report_format, out_path, figure_path):
    """Classify tensor pixels against the colour-anomaly taxonomy and
    report connected regions plus per-sensor drift."""
    triad, masks = tio.load_triad_csv(input_path)
    params = StftParams(window, overlap, _SCALES[scale], db_floor)
    cfg = PipelineConfig(stft=params, norm_mode=_NORMS[norm], max_gap=max_gap)
    tensor = run_pipeline(*triad, cfg, gap_masks=masks).broadband

    thresholds = ClassifierThresholds(luminance_floor, saturation, presence)
    classes = classify_image(tensor, thresholds)
    regions = segment_regions(classes, tensor, min_region)
    if report_format == "json":
        tio.write_region_report_json(report_path, regions)
    else:
        tio.write_region_report_csv(report_path, regions)
    click.echo(f"wrote {report_path}: {len(regions)} region(s)")

    if tensor.n_frames >= 8:
        for drift in detect_drift(tensor):
            click.echo(tio.format_drift_line(drift))
    else:
        click.echo(f"drift: skipped ({tensor.n_frames} frames, needs >= 8)")

    if out_path is not None:
        tio.write_png(tensor, tio.RenderOptions(out_path), params)
        click.echo(_summary(out_path, tensor))
    if figure_path is not None:
        from .figures import save_tensor_figure

        save_tensor_figure(tensor, figure_path, regions=regions)
        click.echo(f"wrote {figure_path}")


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--window", type=int, default=1024, show_default=True)
@click.option("--overlap", type=float, default=0.5, show_default=True)
@click.option("--pairs", type=click.Choice(["all", "1-2", "1-3", "2-3"]), default="all",
              show_default=True, help="Which sensor pairs to estimate.")
@click.option("--rank", is_flag=True, help="Append cross-spectral eigenvalue ratio columns.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Output columnar text file.")
@click.option("--max-gap", type=int, default=5, show_default=True)
@click.option("--db-floor", type=float, default=1e-30, show_default=True,
              help="Bins with G_xx*G_yy below the square of this print as nan.")
@click.option("--figure", "figure_path", type=click.Path(dir_okay=False), default=None,
              help="Also render a matplotlib figure of the columns here.")
@_trap_errors
def coherence(input_path, window, overlap, pairs, rank, out_path, max_gap, db_floor, figure_path):
    """Magnitude-squared coherence per sensor pair, optionally with the
    3x3 cross-spectral matrix eigenvalue ratios."""
    triad = _prepare_triad(input_path, max_gap)
    mags = {v.sensor_id: scalar_magnitude(v) for v in triad}
    params = StftParams(window, overlap, LINEAR, db_floor)

    wanted = ALL_PAIRS if pairs == "all" else (tuple(int(t) for t in pairs.split("-")),)
    columns = []
    freqs = None
    for i, j in wanted:
        spectrum = msc(mags[i], mags[j], params)
        freqs = spectrum.frequencies()
        columns.append((f"msc_{i}-{j}", spectrum.values))
    if rank:
        rank_spec = cross_spectral_rank(mags[1], mags[2], mags[3], params)
        freqs = rank_spec.frequencies()
        columns.append(("l2_over_l1", rank_spec.ratios[0]))
        columns.append(("l3_over_l1", rank_spec.ratios[1]))

    tio.write_coherence_table(out_path, freqs, columns)
    click.echo(f"wrote {out_path}: {len(columns)} column(s) x {len(freqs)} bins")
    if figure_path is not None:
        from .figures import save_coherence_figure

        save_coherence_figure(freqs, columns, figure_path)
        click.echo(f"wrote {figure_path}")


@main.command()
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Scenario file (see the scenario grammar in the README).")
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Output triad CSV path.")
@click.option("--schedule", "schedule_path", type=click.Path(dir_okay=False), default=None,
              help="Write the ground-truth schedule JSON here.")
@click.option("--window", type=int, default=None,
              help="Override the scenario's analysis window for the schedule.")
@click.option("--overlap", type=float, default=None,
              help="Override the scenario's analysis overlap for the schedule.")
@_trap_errors
def synth(scenario_path, seed, out_path, schedule_path, window, overlap):
    """Generate a deterministic synthetic triad CSV and its ground-truth
    schedule."""
    scenario = with_seed(load_scenario(scenario_path), seed)
    spec = scenario.spec
    v1, v2, v3 = generate(spec)
    tio.write_triad_csv(
        out_path,
        v1,
        v2,
        v3,
        comments={
            "rng": RNG_ALGORITHM,
            "seed": str(spec.seed),
            "bias_nt": tio.fmt(spec.bias_nt),
        },
    )
    click.echo(f"wrote {out_path}: {len(v1)} samples x 3 sensors at {spec.sample_rate!r} Hz")
    if schedule_path is not None:
        params = StftParams(
            window if window is not None else scenario.window_len,
            overlap if overlap is not None else scenario.overlap,
        )
        records = schedule(spec, params)
        tio.write_schedule_json(schedule_path, spec, params, records)
        click.echo(f"wrote {schedule_path}: {len(records)} record(s)")


if __name__ == "__main__":
    sys.exit(main())
