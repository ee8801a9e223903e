"""
Command-line entry point.

Every command resolves a RunConfig (preset, then ``--config`` file, then
``--set`` overrides), logs the snapshot, and writes its outputs under the
directory it is given. Exit codes: 0 success, 1 usage or configuration
error, 2 data error, 3 numerical failure.
"""
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import click
from rich.console import Console

from . import __version__
from .audio.griffin_lim import griffin_lim
from .audio.images import write_spectrogram_pgm
from .audio.wav import write_wav
from .autodiff.tensor import set_precision
from .config import LOG_FORMAT, LOG_LEVEL, RunConfig, format_config
from .data.featurize import featurize, filterbank_for
from .data.toy import ToyCorpusSpec, generate_toy_corpus
from .diffusion.schedule import NoiseSchedule, make_schedule, make_strided_schedule
from .errors import ConfigError, DataError, EmodiffError
from .evaluation.metrics import mad_table, uar
from .evaluation.protocols import ProtocolSettings, adaptation_sweep, run_cross_corpus, run_loso
from .evaluation.reports import format_mad_table, format_reports_table, write_mad_csv, write_reports
from .evaluation.splits import development_split
from .models.condition import ConditionSpec
from .models.spectrogram import LOG_FLOOR, MelSpectrogram, NormalizationSpec
from .storage.files import FileSpectrogramStore, load_segments, save_segments
from .training.classifier_trainer import evaluate_utterances, save_classifier, train_classifier
from .training.diffusion_trainer import load_denoiser, train_diffusion
from .training.synthesis import balanced_requests, synthesize
from .utils.files import validate_and_create_path
from .utils.hashing import sub_rng
from .utils.jobs import JobProgress
from .utils.system_detection import get_system_info, resolve_jobs

logger = logging.getLogger(__name__)
console = Console()


def setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )


def log_progress(progress: JobProgress) -> None:
    logger.info(
        f"{progress.completed_jobs}/{progress.total_jobs} jobs done "
        f"({progress.progress_percentage:.0f}%, {progress.failed_jobs} failed, "
        f"~{progress.estimated_remaining:.0f}s left)"
    )


class Context:
    """Resolved configuration shared by all subcommands."""

    def __init__(self, config: RunConfig, jobs: int):
        self.config = config
        self.jobs = jobs

    def schedule(self) -> NoiseSchedule:
        d = self.config.diffusion
        return make_schedule(d.schedule, d.steps, d.beta_start, d.beta_end)

    def protocol_settings(self, history_dir: Optional[Path] = None) -> ProtocolSettings:
        e = self.config.experiment
        return ProtocolSettings(
            classifier=self.config.classifier,
            seeds=e.seeds,
            conditions=e.conditions,
            augment_ratio=e.augment_ratio,
            mixup_alpha=e.mixup_alpha,
            train_dev_fraction=e.train_dev_fraction,
            dev_fraction=e.dev_fraction,
            adaptation_fraction=e.adaptation_fraction,
            jobs=self.jobs,
            config_snapshot=self.config.to_flat_dict(),
            history_dir=history_dir,
            progress_callback=log_progress,
        )


pass_context = click.make_pass_decorator(Context)


@click.group()
@click.version_option(__version__, prog_name="emodiff")
@click.option("--preset", type=click.Choice(["full", "toy"]), default="full", show_default=True, help="Base configuration.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="key=value configuration file.")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override one configuration key.")
@click.option("--jobs", type=int, default=None, help="Parallel jobs (default: EMODIFF_JOBS or host-dependent).")
@click.option("--log-level", default=None, help="Logging level (default: LOG_LEVEL or WARNING).")
@click.pass_context
def cli(ctx, preset: str, config_path: Optional[str], overrides: Sequence[str], jobs: Optional[int], log_level: Optional[str]):
    """Diffusion-based emotional spectrogram augmentation toolkit."""
    setup_logging(log_level or LOG_LEVEL)
    config = RunConfig.resolve(preset, config_path, overrides)
    set_precision(config.runtime.precision)
    workers = resolve_jobs(jobs if jobs is not None else (config.runtime.jobs or None))
    logger.info(f"Host: {get_system_info()}")
    logger.info("Resolved configuration:\n" + format_config(config))
    ctx.obj = Context(config, workers)


# -- corpora ---------------------------------------------------------------


@cli.command("gen-toy")
@click.argument("outdir", type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=None, help="Corpus seed (default: toy.seed).")
@click.option("--shift", type=float, default=None, help="Distribution shift in [0, 1] (default: toy.distribution_shift).")
@click.option("--corpus-id", default=None, help="Prefix of segment ids (default: toy.corpus_id).")
@click.option("--speaker-prefix", default=None, help="Prefix of speaker names (default: toy.speaker_prefix).")
@pass_context
def gen_toy(obj: Context, outdir: str, seed: Optional[int], shift: Optional[float], corpus_id: Optional[str], speaker_prefix: Optional[str]):
    """Generate a procedural toy corpus."""
    toy = obj.config.toy
    spec = ToyCorpusSpec(
        n_speakers=toy.n_speakers,
        utterances_per_pair=toy.utterances_per_pair,
        n_mels=toy.n_mels,
        frames=toy.frames,
        seed=toy.seed if seed is None else seed,
        distribution_shift=toy.distribution_shift if shift is None else shift,
        noise=toy.noise,
        corpus_id=corpus_id or toy.corpus_id,
        speaker_prefix=speaker_prefix or toy.speaker_prefix,
    )
    corpus = generate_toy_corpus(spec, jobs=obj.jobs)
    save_segments(validate_and_create_path(outdir), corpus.segments, corpus.stats())
    console.print(f"Wrote {len(corpus.segments)} toy segments to {outdir} (hash {corpus.content_hash[:12]})")


@cli.command("featurize")
@click.argument("manifest", type=click.Path(dir_okay=False))
@click.argument("outdir", type=click.Path(file_okay=False))
@pass_context
def featurize_cmd(obj: Context, manifest: str, outdir: str):
    """Compute normalized log-mel segments from a WAV manifest."""
    result = featurize(manifest, validate_and_create_path(outdir), obj.config.audio, jobs=obj.jobs, progress_callback=log_progress)
    console.print(f"{result.n_files - result.n_failed}/{result.n_files} files -> {result.n_segments} segments in {outdir}")
    for path, message in sorted(result.failures.items()):
        console.print(f"  failed: {path}: {message}", style="yellow", markup=False)


# -- generator ---------------------------------------------------------------


@cli.command("train-diffusion")
@click.option("--data", "data_dir", required=True, type=click.Path(file_okay=False), help="Segment store to train on.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="Run directory.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--steps", type=int, default=None, help="Training steps (default: train.steps).")
@pass_context
def train_diffusion_cmd(obj: Context, data_dir: str, out_dir: str, seed: int, steps: Optional[int]):
    """Train the conditional denoiser."""
    cfg = obj.config
    segments = load_segments(data_dir)
    norm = FileSpectrogramStore.open(data_dir).normalization()
    extra = {"run_config": cfg.to_flat_dict(), "normalization": norm.to_dict() if norm else None}
    run = train_diffusion(
        segments,
        cfg.denoiser,
        obj.schedule(),
        cfg.train.steps if steps is None else steps,
        batch=cfg.train.batch,
        seed=seed,
        lr=cfg.train.lr,
        betas=(cfg.train.beta1, cfg.train.beta2),
        eps=cfg.train.eps,
        vlb_weight=cfg.diffusion.vlb_weight,
        loss_mode=cfg.diffusion.loss,
        variance_mode=cfg.diffusion.variance_mode,
        output_dir=validate_and_create_path(out_dir),
        checkpoint_interval=cfg.train.checkpoint_interval,
        log_interval=cfg.train.log_interval,
        manifest_extra=extra,
    )
    tail = f", last-100 L_simple {run.mean_simple_loss():.4f}" if run.history else ""
    console.print(f"Trained {run.steps} steps{tail}; checkpoint in {Path(out_dir) / 'checkpoint'}")


def _sampling_schedule(schedule: NoiseSchedule, sample_steps: Optional[int], default: int) -> NoiseSchedule:
    """Strided view of the training schedule; the configured default is capped at T."""
    if sample_steps is None:
        sample_steps = min(default, schedule.num_steps)
    if sample_steps == schedule.num_steps:
        return schedule
    try:
        return make_strided_schedule(schedule, sample_steps)
    except ValueError as e:
        raise ConfigError(str(e)) from e


@cli.command("sample")
@click.option("--model", "model_dir", required=True, type=click.Path(file_okay=False), help="Run directory of train-diffusion.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--emotion", default="neutral", show_default=True)
@click.option("--speaker", default="spk0", show_default=True)
@click.option("--text", default="", help="Text conditioning, used verbatim.")
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--sample-steps", type=int, default=None, help="Strided sampling steps (default: diffusion.sample_steps).")
@click.option("--wav/--no-wav", default=False, help="Also render Griffin-Lim WAV files.")
@pass_context
def sample_cmd(obj: Context, model_dir: str, out_dir: str, emotion: str, speaker: str, text: str, count: int, seed: int, sample_steps: Optional[int], wav: bool):
    """Sample synthetic segments for one condition."""
    if count < 0:
        raise click.BadParameter("must be >= 0", param_hint="--count")
    try:
        spec = ConditionSpec.from_text(emotion, speaker, text)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--emotion") from e
    out = validate_and_create_path(out_dir)
    if count == 0:
        save_segments(out, [], {"n_segments": 0})
        console.print("Nothing to sample (--count 0)")
        return

    model, schedule, manifest = load_denoiser(Path(model_dir) / "checkpoint")
    segments = synthesize(
        model,
        _sampling_schedule(schedule, sample_steps, obj.config.diffusion.sample_steps),
        [spec] * count,
        seed=seed,
        frames=obj.config.audio.segment_frames,
        variance_mode=manifest.get("variance_mode", obj.config.diffusion.variance_mode),
        sample_batch=obj.config.experiment.sample_batch,
        jobs=obj.jobs,
        progress_callback=log_progress,
    )
    save_segments(out, segments, {"n_segments": len(segments), "condition": spec.to_dict(), "seed": seed})
    for segment in segments:
        write_spectrogram_pgm(out / "pgm" / f"{segment.source_id}.pgm", segment.values)
    if wav:
        _render_wavs(obj, segments, manifest, out / "wav", seed)
    console.print(f"Sampled {len(segments)} {spec.emotion} segments for {spec.speaker} into {out}")


def _render_wavs(obj: Context, segments: List[MelSpectrogram], manifest: dict, directory: Path, seed: int) -> None:
    stats = manifest.get("normalization")
    if stats:
        norm = NormalizationSpec.from_dict(stats)
    else:
        logger.warning("Checkpoint has no normalization statistics; assuming log-mel range [log 1e-5, 0]")
        norm = NormalizationSpec(log_min=math.log(LOG_FLOOR), log_max=0.0)
    audio = obj.config.audio
    if audio.n_mels != segments[0].n_mels:
        raise ConfigError(f"audio.n_mels={audio.n_mels} but samples have {segments[0].n_mels} mel bins")
    fb = filterbank_for(audio)
    for segment in segments:
        waveform = griffin_lim(segment, fb, norm, iterations=audio.griffin_lim_iters, seed=seed)
        write_wav(directory / f"{segment.source_id}.wav", waveform)


# -- evaluation ---------------------------------------------------------------


@cli.command("eval-mad")
@click.option("--real", "real_dir", required=True, type=click.Path(file_okay=False))
@click.option("--syn", "syn_dir", required=True, type=click.Path(file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@pass_context
def eval_mad_cmd(obj: Context, real_dir: str, syn_dir: str, out_dir: str):
    """Per-emotion mean absolute difference between real and synthetic class means."""
    table = mad_table(load_segments(real_dir), load_segments(syn_dir))
    out = validate_and_create_path(out_dir)
    write_mad_csv(out / "mad.csv", table)
    console.print(format_mad_table(table), markup=False, highlight=False)


@cli.command("train-ser")
@click.option("--data", "data_dir", required=True, type=click.Path(file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--synthetic", "syn_dir", type=click.Path(file_okay=False), help="Synthetic segments added to training.")
@click.option("--mixup/--no-mixup", default=False, help="Apply mixup with experiment.mixup_alpha.")
@click.option("--seed", type=int, default=0, show_default=True)
@pass_context
def train_ser_cmd(obj: Context, data_dir: str, out_dir: str, syn_dir: Optional[str], mixup: bool, seed: int):
    """Train one emotion classifier on a development split of a corpus."""
    cfg = obj.config
    train, dev = development_split(load_segments(data_dir), cfg.experiment.train_dev_fraction, seed)
    if syn_dir:
        train = train + load_segments(syn_dir)
    out = validate_and_create_path(out_dir)
    run = train_classifier(
        train,
        dev,
        cfg.classifier,
        seed=seed,
        mixup_alpha=cfg.experiment.mixup_alpha if mixup else None,
        history_path=out / "history.csv",
    )
    save_classifier(out / "checkpoint", run, {"run_config": cfg.to_flat_dict()})
    dev_uar = uar(evaluate_utterances(run.model, dev), ignore_empty=True)
    console.print(f"Best epoch {run.best_epoch}: dev UAR {100 * dev_uar:.2f}%")


def _synthetic_pool(obj: Context, templates: List[MelSpectrogram], model_dir: Optional[str], syn_dir: Optional[str], seed: int) -> List[MelSpectrogram]:
    """Synthetic segments from a store, or freshly sampled for the templates' conditions."""
    if syn_dir:
        return load_segments(syn_dir)
    conditions = obj.config.experiment.conditions
    if all(c == "real" for c in conditions):
        return []
    if not model_dir:
        raise DataError("conditions with synthetic data need --model or --synthetic")
    model, schedule, manifest = load_denoiser(Path(model_dir) / "checkpoint")
    count = int(round(obj.config.experiment.augment_ratio * len(templates)))
    requests = balanced_requests(templates, count, sub_rng(seed, "requests"))
    return synthesize(
        model,
        _sampling_schedule(schedule, None, obj.config.diffusion.sample_steps),
        requests,
        seed=seed,
        frames=templates[0].n_frames,
        variance_mode=manifest.get("variance_mode", obj.config.diffusion.variance_mode),
        sample_batch=obj.config.experiment.sample_batch,
        jobs=obj.jobs,
        progress_callback=log_progress,
    )


@cli.command("augment-exp")
@click.option("--data", "data_dir", required=True, type=click.Path(file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--model", "model_dir", type=click.Path(file_okay=False), help="Run directory of train-diffusion.")
@click.option("--synthetic", "syn_dir", type=click.Path(file_okay=False), help="Pre-sampled synthetic segments.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed of the synthetic pool.")
@pass_context
def augment_exp_cmd(obj: Context, data_dir: str, out_dir: str, model_dir: Optional[str], syn_dir: Optional[str], seed: int):
    """Leave-one-speaker-out comparison of real, synthetic and augmented training."""
    corpus = load_segments(data_dir)
    out = validate_and_create_path(out_dir)
    pool = _synthetic_pool(obj, corpus, model_dir, syn_dir, seed)
    reports = run_loso(corpus, pool, obj.protocol_settings(out / "histories"))
    write_reports(out, "augment", reports)
    console.print(format_reports_table(reports), markup=False, highlight=False)


@cli.command("cross-corpus")
@click.option("--source", "source_dir", required=True, type=click.Path(file_okay=False))
@click.option("--target", "target_dir", required=True, type=click.Path(file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--model", "model_dir", type=click.Path(file_okay=False), help="Run directory of train-diffusion (source-trained).")
@click.option("--synthetic", "syn_dir", type=click.Path(file_okay=False), help="Pre-sampled synthetic segments.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed of the synthetic pool.")
@click.option("--sweep/--no-sweep", default=True, help="Also run the adaptation-percentage sweep.")
@pass_context
def cross_corpus_cmd(obj: Context, source_dir: str, target_dir: str, out_dir: str, model_dir: Optional[str], syn_dir: Optional[str], seed: int, sweep: bool):
    """Cross-corpus transfer and the target-data adaptation sweep."""
    source = load_segments(source_dir)
    target = load_segments(target_dir)
    out = validate_and_create_path(out_dir)
    pool = _synthetic_pool(obj, source, model_dir, syn_dir, seed)
    settings = obj.protocol_settings(out / "histories")
    reports = run_cross_corpus(source, target, pool, settings)
    write_reports(out, "cross_corpus", reports)
    console.print(format_reports_table(reports), markup=False, highlight=False)
    if sweep:
        e = obj.config.experiment
        sweep_reports = adaptation_sweep(source, target, e.percentages, e.sweep_conditions, e.seeds, settings, pool)
        write_reports(out, "adaptation", sweep_reports)
        console.print(format_reports_table(sweep_reports), markup=False, highlight=False)


@cli.command("show-config")
@pass_context
def show_config(obj: Context):
    """Print the resolved configuration as key=value lines."""
    click.echo(format_config(obj.config), nl=False)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cli.main(args=list(argv) if argv is not None else None, prog_name="emodiff", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except EmodiffError as e:
        logger.error(f"{type(e).__name__}: {e}")
        click.echo(f"Error: {e}", err=True)
        return e.exit_code
    except (ValueError, PermissionError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        click.echo(f"Error: {e}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
