"""Command-line tools: transcribe, toy, sweep, bench, eval.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(unreadable audio, malformed tables), 3 numeric failure (infeasible or
unbounded programs, guard violations, NaN propagation).

Every command accepts ``--config FILE`` with ``key=value`` lines (keys are
the long flag names with underscores); explicit flags override file entries.
All outputs are TSV files written atomically, so failures never leave
partial artifacts behind.
"""

import argparse
import itertools
import logging
import os
import sys
import time
from dataclasses import dataclass, replace

import numpy as np

from .baselines import OT_LP_MAX_BINS, ot_unmix_lp, plca_unmix
from .costs import append_noise_column, harmonic_cost
from .dictionary import (HarmonicTemplateParams, make_harmonic_dictionary,
                         midi_to_freq)
from .errors import (DataError, DecodeError, LpGuardError, LpInfeasibleError,
                     LpUnboundedError, NumericError, OstError,
                     UnsupportedEncodingError)
from .evaluation import (SCENARIO_ALIASES, FrameClock, events_to_roll,
                         f_measure, l1_activation_error, load_ground_truth,
                         make_toy_scenario, parse_ground_truth,
                         threshold_activations)
from .frontend import (DEFAULT_HOP, DEFAULT_WINDOW_LEN, NormalizedFrames,
                       decode_wav, normalize_frames, stft_magnitude)
from .solvers import Activations, SolverConfig, unmix
from . import tsvio

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

METHODS = ("plca", "ot_h", "ost", "ost_e", "ost_g", "ost_eg")
OST_VARIANTS = {"ost": "ost", "ost_e": "ost_e", "ost_g": "ost_g",
                "ost_eg": "ost_eg"}

# Which methods each tunable belongs to. Passing a flag whose method set
# does not cover the requested method is a configuration error.
METHOD_FLAGS = {
    "epsilon0": {"ot_h", "ost", "ost_e", "ost_g", "ost_eg"},
    "lambda_e": {"ost_e", "ost_eg"},
    "lambda_g": {"ost_g", "ost_eg"},
    "mm_iterations": {"ost_g", "ost_eg"},
    "noise_amplitude": {"ost", "ost_e", "ost_g", "ost_eg"},
}
TEMPLATE_METHODS = {"plca", "ot_h"}
TEMPLATE_FLAGS = ("kernel_width_bins", "damping", "n_partials")

DEFAULT_EPSILON0 = 1.0
DEFAULT_LAMBDA_E = 300.0
DEFAULT_LAMBDA_G = 300.0
DEFAULT_MM_ITERATIONS = 10
DEFAULT_MIDI_LOW = 21
DEFAULT_MIDI_HIGH = 108
DEFAULT_KERNEL_WIDTH_BINS = 2.0
DEFAULT_DAMPING = 0.3
DEFAULT_N_PARTIALS = 8
DEFAULT_TOY_BINS = 8192
DEFAULT_TOY_F_MAX = 2800.0
DEFAULT_TOY_METHODS = "plca,ost,ost_e,ost_g,ost_eg"

SWEEP_EPSILON0 = (1e0, 1e1, 1e2, 1e3, 1e4)
SWEEP_LAMBDA_E = (1e1, 1e2, 1e3, 1e4)
SWEEP_NOISE = (1e1, 1e2, 1e3)
SWEEP_KERNEL = (1.0, 2.0, 3.0, 4.0)
SWEEP_DAMPING = (0.1, 0.3, 0.5)

BENCH_SAMPLE_RATE = 44100.0
BENCH_MIDI_LOW = 36


class UsageError(Exception):
    """Bad flags or an inconsistent configuration."""


@dataclass
class RunConfig:
    """Everything one decomposition run depends on."""

    method: str
    epsilon0: float = DEFAULT_EPSILON0
    lambda_e: float = None
    lambda_g: float = None
    mm_iterations: int = DEFAULT_MM_ITERATIONS
    noise_amplitude: float = None
    midi_low: int = DEFAULT_MIDI_LOW
    midi_high: int = DEFAULT_MIDI_HIGH
    window_len: int = DEFAULT_WINDOW_LEN
    hop: int = DEFAULT_HOP
    kernel_width_bins: float = DEFAULT_KERNEL_WIDTH_BINS
    damping: float = DEFAULT_DAMPING
    n_partials: int = DEFAULT_N_PARTIALS
    seed: int = 0
    threads: int = 1

    def solver_config(self) -> SolverConfig:
        return SolverConfig(lambda_e=self.lambda_e or 0.0,
                            lambda_g=self.lambda_g or 0.0,
                            mm_iterations=self.mm_iterations)

    def template_params(self, bin_hz: float) -> HarmonicTemplateParams:
        return HarmonicTemplateParams(
            kernel_width=self.kernel_width_bins * bin_hz,
            damping=self.damping, n_partials=self.n_partials)


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_run_config(args, methods=None) -> RunConfig:
    """Turn parsed flags into a validated RunConfig.

    `methods` widens the applicability check to a set of methods (the toy
    command runs several at once); otherwise args.method governs.
    """
    active = set(methods) if methods is not None else {args.method}
    for name in METHOD_FLAGS:
        value = getattr(args, name, None)
        if value is not None and not (active & METHOD_FLAGS[name]):
            raise UsageError(f"{_flag(name)} does not apply to "
                             f"method {'/'.join(sorted(active))}")
    if methods is None:
        for name in TEMPLATE_FLAGS:
            value = getattr(args, name, None)
            if value is not None and args.method not in TEMPLATE_METHODS:
                raise UsageError(f"{_flag(name)} only applies to methods "
                                 "that synthesize templates (plca, ot_h)")
    config = RunConfig(
        method=args.method if methods is None else sorted(active)[0],
        epsilon0=_or_default(args, "epsilon0", DEFAULT_EPSILON0),
        lambda_e=_or_default(args, "lambda_e", DEFAULT_LAMBDA_E),
        lambda_g=_or_default(args, "lambda_g", DEFAULT_LAMBDA_G),
        mm_iterations=_or_default(args, "mm_iterations", DEFAULT_MM_ITERATIONS),
        noise_amplitude=getattr(args, "noise_amplitude", None),
        midi_low=_or_default(args, "midi_low", DEFAULT_MIDI_LOW),
        midi_high=_or_default(args, "midi_high", DEFAULT_MIDI_HIGH),
        window_len=_or_default(args, "window_len", DEFAULT_WINDOW_LEN),
        hop=_or_default(args, "hop", DEFAULT_HOP),
        kernel_width_bins=_or_default(args, "kernel_width_bins",
                                      DEFAULT_KERNEL_WIDTH_BINS),
        damping=_or_default(args, "damping", DEFAULT_DAMPING),
        n_partials=_or_default(args, "n_partials", DEFAULT_N_PARTIALS),
        seed=_or_default(args, "seed", 0),
        threads=_or_default(args, "threads", 1))
    _check_ranges(config)
    return config


def _or_default(args, name, default):
    value = getattr(args, name, None)
    return default if value is None else value


def _check_ranges(config: RunConfig):
    checks = [
        (config.epsilon0 >= 0, "--epsilon0 must be non-negative"),
        (config.lambda_e > 0, "--lambda-e must be positive"),
        (config.lambda_g > 0, "--lambda-g must be positive"),
        (config.mm_iterations >= 1, "--mm-iterations must be at least 1"),
        (config.noise_amplitude is None or config.noise_amplitude >= 0,
         "--noise-amplitude must be non-negative"),
        (0 <= config.midi_low <= config.midi_high <= 127,
         "--midi-low/--midi-high must satisfy 0 <= low <= high <= 127"),
        (config.window_len >= 2 and config.window_len % 2 == 0,
         "--window-len must be a positive even integer"),
        (0 < config.hop, "--hop must be positive"),
        (config.kernel_width_bins > 0, "--kernel-width-bins must be positive"),
        (config.damping >= 0, "--damping must be non-negative"),
        (config.n_partials >= 1, "--n-partials must be at least 1"),
        (config.threads >= 1, "--threads must be at least 1"),
    ]
    for ok, message in checks:
        if not ok:
            raise UsageError(message)


# ---------------------------------------------------------------------------
# decomposition shared by transcribe and sweep


def decompose(frames: NormalizedFrames, config: RunConfig):
    """Run one method over normalized frames.

    Returns (activations restricted to pitch rows, row labels including a
    possible trailing noise row, full activations).
    """
    midi = list(range(config.midi_low, config.midi_high + 1))
    fundamentals = np.array([midi_to_freq(m) for m in midi])
    labels = [str(m) for m in midi]
    if config.method == "plca":
        bin_hz = float(frames.freqs[1] - frames.freqs[0]) if len(frames.freqs) > 1 \
            else float(frames.freqs[0])
        dictionary = make_harmonic_dictionary(
            frames.freqs, fundamentals, config.template_params(bin_hz))
        acts, _ = plca_unmix(frames, dictionary, threads=config.threads)
        return acts, labels, acts
    if config.method == "ot_h":
        bin_hz = float(frames.freqs[1] - frames.freqs[0]) if len(frames.freqs) > 1 \
            else float(frames.freqs[0])
        dictionary = make_harmonic_dictionary(
            frames.freqs, fundamentals, config.template_params(bin_hz))
        cost = harmonic_cost(frames.freqs, frames.freqs, config.epsilon0)
        acts = ot_unmix_lp(frames, dictionary, cost)
        return acts, labels, acts
    cost = harmonic_cost(frames.freqs, fundamentals, config.epsilon0)
    if config.noise_amplitude is not None:
        cost = append_noise_column(cost, config.noise_amplitude)
        labels = labels + ["noise"]
    acts = unmix(frames, cost, config.solver_config(),
                 variant=OST_VARIANTS[config.method], threads=config.threads)
    pitch_acts = Activations(values=acts.values[:len(midi)],
                             frame_hop_seconds=acts.frame_hop_seconds)
    return pitch_acts, labels, acts


def transcription_clock(frames: NormalizedFrames, config: RunConfig,
                        sample_rate: int) -> FrameClock:
    t0 = config.window_len / (2.0 * sample_rate)
    return FrameClock(n_frames=frames.n_frames,
                      hop_seconds=config.hop / sample_rate, t0=t0)


# ---------------------------------------------------------------------------
# transcribe


def cmd_transcribe(args) -> int:
    config = build_run_config(args)
    # Read every input before writing anything, so a missing or malformed
    # file can never leave partial outputs behind.
    events = None
    if args.ground_truth is not None:
        events = parse_ground_truth(args.ground_truth)
    timings = {}
    start = time.perf_counter()
    audio = decode_wav(args.wav)
    timings["decode"] = time.perf_counter() - start

    start = time.perf_counter()
    spec = stft_magnitude(audio, config.window_len, config.hop)
    frames = normalize_frames(spec)
    timings["stft"] = time.perf_counter() - start

    start = time.perf_counter()
    pitch_acts, labels, acts = decompose(frames, config)
    timings["decompose"] = time.perf_counter() - start

    clock = transcription_clock(frames, config, audio.sample_rate)
    base = os.path.splitext(os.path.basename(args.wav))[0] + "." + config.method
    outdir = args.output_dir
    os.makedirs(outdir, exist_ok=True)
    act_path = os.path.join(outdir, base + ".activations.tsv")
    tsvio.write_activations(act_path, acts, labels, t0=clock.t0)
    written = [act_path]

    report = None
    if events is not None:
        truth = events_to_roll(events, (config.midi_low, config.midi_high),
                               clock)
        estimate = threshold_activations(pitch_acts, truth)
        report = f_measure(estimate, truth)
        roll_path = os.path.join(outdir, base + ".pianoroll.tsv")
        tsvio.write_pianoroll(roll_path, estimate, t0=clock.t0)
        written.append(roll_path)
    timings["total"] = sum(timings.values())

    report_path = os.path.join(outdir, base + ".report.tsv")
    extra = {f"wall_time_seconds.{k}": v for k, v in sorted(timings.items())}
    extra["method"] = config.method
    extra["frames"] = frames.n_frames
    if report is not None:
        report.wall_time_seconds = {}
        tsvio.write_report(report_path, report, extra=extra)
    else:
        tsvio.write_report(report_path, extra=extra)
    written.append(report_path)

    print(f"method={config.method} frames={frames.n_frames} "
          f"decompose_s={timings['decompose']:.3f}")
    if report is not None:
        print(f"precision={report.precision:.4f} recall={report.recall:.4f} "
              f"f_measure={report.f_measure:.4f}")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# toy


def _parse_methods(spec: str):
    if spec.strip() == "all":
        return list(METHODS)
    methods = [m.strip() for m in spec.split(",") if m.strip()]
    if not methods:
        raise UsageError("--methods must name at least one method")
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}; choose from "
                             f"{', '.join(METHODS)}")
    return methods


def cmd_toy(args) -> int:
    methods = _parse_methods(args.methods)
    config = build_run_config(args, methods=methods)
    if args.scenario not in SCENARIO_ALIASES:
        raise UsageError("scenario must be one of: "
                         + ", ".join(sorted(SCENARIO_ALIASES)))
    if "ot_h" in methods and args.bins > OT_LP_MAX_BINS:
        raise UsageError(f"ot_h solves a dense LP and needs --bins <= "
                         f"{OT_LP_MAX_BINS}; drop ot_h or lower --bins")
    toy = make_toy_scenario(args.scenario, seed=config.seed, bins=args.bins,
                            f_max=args.f_max,
                            kernel_width_bins=config.kernel_width_bins,
                            damping=config.damping,
                            n_partials=config.n_partials)
    frames = NormalizedFrames(columns=toy.frame[:, None],
                              active_mask=np.array([True]),
                              freqs=toy.freqs)
    fundamentals = toy.dictionary.fundamentals
    reduced = harmonic_cost(toy.freqs, fundamentals, config.epsilon0)
    rows = []
    for method in methods:
        start = time.perf_counter()
        if method == "plca":
            acts, _ = plca_unmix(frames, toy.dictionary)
            h = acts.values[:, 0]
        elif method == "ot_h":
            full_cost = harmonic_cost(toy.freqs, toy.freqs, config.epsilon0)
            acts = ot_unmix_lp(frames, toy.dictionary, full_cost)
            h = acts.values[:, 0]
        else:
            acts = unmix(frames, reduced, config.solver_config(),
                         variant=OST_VARIANTS[method])
            h = acts.values[:, 0]
        seconds = time.perf_counter() - start
        rows.append((method, l1_activation_error(h, toy.h_true), seconds))
    table = tsvio.format_table(("method", "l1_error", "seconds"), rows)
    print(f"scenario={toy.which} seed={config.seed} bins={args.bins}")
    print(table)
    if args.output is not None:
        text = "method\tl1_error\tseconds\n" + "".join(
            f"{m}\t{e:.12g}\t{s:.12g}\n" for m, e, s in rows)
        tsvio.atomic_write_text(args.output, text)
        print(f"wrote {args.output}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def _parse_grid(entries, method):
    """--grid name=v1,v2,... entries to an axis dict, or defaults."""
    sweepable = {"epsilon0", "lambda_e", "lambda_g", "noise_amplitude",
                 "kernel_width_bins", "damping"}
    if entries:
        axes = {}
        for entry in entries:
            if "=" not in entry:
                raise UsageError(f"--grid needs name=v1,v2,... (got {entry!r})")
            name, _, values = entry.partition("=")
            name = name.strip().replace("-", "_")
            if name not in sweepable:
                raise UsageError(f"cannot sweep {name!r}; choose from "
                                 + ", ".join(sorted(sweepable)))
            if name in METHOD_FLAGS and method not in METHOD_FLAGS[name]:
                raise UsageError(f"{name} does not apply to method {method}")
            if name in ("kernel_width_bins", "damping") \
                    and method not in TEMPLATE_METHODS:
                raise UsageError(f"{name} does not apply to method {method}")
            try:
                points = [float(x) for x in values.split(",") if x.strip()]
            except ValueError as exc:
                raise UsageError(f"bad grid values in {entry!r}") from exc
            if not points:
                raise UsageError(f"empty grid for {name!r}")
            axes[name] = points
        return axes
    if method == "plca":
        return {"kernel_width_bins": list(SWEEP_KERNEL),
                "damping": list(SWEEP_DAMPING)}
    axes = {"epsilon0": list(SWEEP_EPSILON0)}
    if method in ("ost_e", "ost_eg"):
        axes["lambda_e"] = list(SWEEP_LAMBDA_E)
    return axes


def cmd_sweep(args) -> int:
    config = build_run_config(args)
    axes = _parse_grid(args.grid, config.method)
    if args.sweep_noise:
        if config.method not in METHOD_FLAGS["noise_amplitude"]:
            raise UsageError("--sweep-noise does not apply to method "
                             + config.method)
        axes.setdefault("noise_amplitude", list(SWEEP_NOISE))
    names = sorted(axes)
    points = list(itertools.product(*(axes[n] for n in names)))
    if not points:
        raise UsageError("empty sweep grid")

    audio = decode_wav(args.wav)
    spec = stft_magnitude(audio, config.window_len, config.hop)
    frames = normalize_frames(spec)
    clock = transcription_clock(frames, config, audio.sample_rate)
    truth = load_ground_truth(args.ground_truth,
                              (config.midi_low, config.midi_high), clock)
    half = frames.n_frames // 2
    val_slice, test_slice = slice(0, half), slice(half, frames.n_frames)

    def score(report_slice, cfg):
        pitch_acts, _, _ = decompose(frames, cfg)
        sliced = Activations(values=pitch_acts.values[:, report_slice],
                             frame_hop_seconds=pitch_acts.frame_hop_seconds)
        ref = _slice_roll(truth, report_slice)
        return f_measure(threshold_activations(sliced, ref), ref), pitch_acts

    rows, best = [], None
    for values in points:
        cfg = replace(config, **{n: v for n, v in zip(names, values)})
        if "mm_iterations" in names:
            cfg = replace(cfg, mm_iterations=int(cfg.mm_iterations))
        report, _ = score(val_slice, cfg)
        rows.append(tuple(values) + (report.f_measure,))
        if best is None or report.f_measure > best[1]:
            best = (cfg, report.f_measure, tuple(values))
    best_cfg, best_val_f, best_values = best
    test_report, _ = score(test_slice, best_cfg)

    print(tsvio.format_table(tuple(names) + ("val_f_measure",), rows))
    summary = " ".join(f"{n}={v:g}" for n, v in zip(names, best_values))
    print(f"best: {summary} val_f_measure={best_val_f:.4f} "
          f"test_f_measure={test_report.f_measure:.4f}")
    if args.output is not None:
        lines = ["\t".join(tuple(names) + ("val_f_measure",))]
        for row in rows:
            lines.append("\t".join(format(x, ".12g") for x in row))
        lines.append("")
        lines.append(f"best\t{summary}")
        lines.append(f"test_f_measure\t{test_report.f_measure:.12g}")
        tsvio.atomic_write_text(args.output, "\n".join(lines) + "\n")
        print(f"wrote {args.output}")
    return EXIT_OK


def _slice_roll(roll, frame_slice):
    from .evaluation import PianoRoll
    return PianoRoll(active=roll.active[:, frame_slice],
                     midi_low=roll.midi_low, midi_high=roll.midi_high,
                     frame_hop_seconds=roll.frame_hop_seconds)


# ---------------------------------------------------------------------------
# bench


def cmd_bench(args) -> int:
    if args.bins < 1 or args.notes < 1 or args.frames < 0:
        raise UsageError("--bins and --notes must be positive, --frames >= 0")
    if BENCH_MIDI_LOW + args.notes - 1 > 127:
        raise UsageError(f"--notes must be at most {127 - BENCH_MIDI_LOW + 1}")
    config = build_run_config(args, methods={"plca", "ost", "ost_e"})
    headers = ("method", "total_s", "per_frame_s", "speedup_vs_plca")
    if args.frames == 0:
        print(tsvio.format_table(headers, []))
        return EXIT_OK

    m, k, n = args.bins, args.notes, args.frames
    rng = np.random.default_rng(config.seed)
    columns = rng.dirichlet(np.ones(m), size=n).T
    freqs = (np.arange(m) + 1) * (BENCH_SAMPLE_RATE / 2.0 / m)
    frames = NormalizedFrames(columns=columns, active_mask=np.ones(n, bool),
                              freqs=freqs)
    midi = np.arange(BENCH_MIDI_LOW, BENCH_MIDI_LOW + k)
    fundamentals = np.array([midi_to_freq(int(p)) for p in midi])
    bin_hz = freqs[1] - freqs[0] if m > 1 else freqs[0]
    dictionary = make_harmonic_dictionary(freqs, fundamentals,
                                          config.template_params(bin_hz))
    cost = harmonic_cost(freqs, fundamentals, config.epsilon0)
    solver = config.solver_config()

    start = time.perf_counter()
    plca_unmix(frames, dictionary, rel_tol=0.0)
    t_plca = time.perf_counter() - start
    start = time.perf_counter()
    unmix(frames, cost, solver, variant="ost")
    t_ost = time.perf_counter() - start
    start = time.perf_counter()
    unmix(frames, cost, solver, variant="ost_e")
    t_ost_e = time.perf_counter() - start

    rows = [("plca", t_plca, t_plca / n, 1.0),
            ("ost", t_ost, t_ost / n, t_plca / t_ost),
            ("ost_e", t_ost_e, t_ost_e / n, t_plca / t_ost_e)]
    print(f"bins={m} notes={k} frames={n} seed={config.seed}")
    print(tsvio.format_table(headers, rows))
    if args.output is not None:
        lines = ["\t".join(headers)]
        for name, total, per, speed in rows:
            lines.append(f"{name}\t{total:.12g}\t{per:.12g}\t{speed:.12g}")
        tsvio.atomic_write_text(args.output, "\n".join(lines) + "\n")
        print(f"wrote {args.output}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def cmd_eval(args) -> int:
    values, labels, times = tsvio.read_activations(args.activations)
    pitch_rows = [i for i, lab in enumerate(labels) if lab != "noise"]
    try:
        midi = [int(labels[i]) for i in pitch_rows]
    except ValueError as exc:
        raise DataError(f"activation rows must be MIDI numbers or 'noise', "
                        f"got {labels!r}") from exc
    if midi != list(range(min(midi), max(midi) + 1)):
        raise DataError("activation rows must cover a contiguous MIDI range")
    hop = float(times[1] - times[0]) if len(times) > 1 else 1.0
    t0 = float(times[0]) if len(times) else 0.0
    clock = FrameClock(n_frames=values.shape[1], hop_seconds=hop, t0=t0)
    truth = load_ground_truth(args.ground_truth, (min(midi), max(midi)), clock)
    acts = Activations(values=values[pitch_rows], frame_hop_seconds=hop)
    report = f_measure(threshold_activations(acts, truth), truth)
    print(f"precision={report.precision:.4f} recall={report.recall:.4f} "
          f"f_measure={report.f_measure:.4f} tp={report.tp} fp={report.fp} "
          f"fn={report.fn}")
    if args.output is not None:
        tsvio.write_report(args.output, report)
        print(f"wrote {args.output}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser plumbing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_solver_flags(p):
    p.add_argument("--epsilon0", type=float, default=None,
                   help="harmonic-cost octave penalty scale, Hz^2")
    p.add_argument("--lambda-e", type=float, default=None, dest="lambda_e",
                   help="entropic regularization weight (ost_e, ost_eg)")
    p.add_argument("--lambda-g", type=float, default=None, dest="lambda_g",
                   help="group-sparsity weight (ost_g, ost_eg)")
    p.add_argument("--mm-iterations", type=int, default=None,
                   dest="mm_iterations",
                   help="majorize-minimize iterations (ost_g, ost_eg)")
    p.add_argument("--noise-amplitude", type=float, default=None,
                   dest="noise_amplitude",
                   help="append a flat-cost noise column at this cost")


def _add_template_flags(p):
    p.add_argument("--kernel-width-bins", type=float, default=None,
                   dest="kernel_width_bins",
                   help="Gaussian partial width in frequency bins")
    p.add_argument("--damping", type=float, default=None,
                   help="exponential partial-amplitude damping rate")
    p.add_argument("--n-partials", type=int, default=None, dest="n_partials",
                   help="partials per synthesized template")


def _add_common_flags(p):
    p.add_argument("--config", default=None, metavar="FILE",
                   help="key=value defaults; explicit flags override")
    p.add_argument("--threads", type=int, default=None,
                   help="frame-parallel worker threads")
    p.add_argument("--seed", type=int, default=None,
                   help="RNG seed for synthetic inputs")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ost", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("transcribe", help="decompose a WAV into activations",
                       add_help=True)
    p.add_argument("wav", help="input WAV file (PCM16 or float32)")
    p.add_argument("--method", choices=METHODS, default="ost_e")
    p.add_argument("--ground-truth", default=None, dest="ground_truth",
                   help="MAPS-style TSV of note events; enables scoring")
    p.add_argument("--output-dir", default=".", dest="output_dir")
    p.add_argument("--midi-low", type=int, default=None, dest="midi_low")
    p.add_argument("--midi-high", type=int, default=None, dest="midi_high")
    p.add_argument("--window-len", type=int, default=None, dest="window_len")
    p.add_argument("--hop", type=int, default=None)
    _add_solver_flags(p)
    _add_template_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_transcribe)

    p = sub.add_parser("toy", help="misspecified-unmixing comparison table")
    p.add_argument("scenario", help="a (shifted fundamentals) or "
                                    "b (wrong amplitudes)")
    p.add_argument("--methods", default=DEFAULT_TOY_METHODS,
                   help="comma list out of " + ",".join(METHODS) + " or "
                        "'all'; ot_h needs --bins <= %d" % OT_LP_MAX_BINS)
    p.add_argument("--bins", type=int, default=DEFAULT_TOY_BINS)
    p.add_argument("--f-max", type=float, default=DEFAULT_TOY_F_MAX,
                   dest="f_max")
    p.add_argument("--output", default=None, help="also write the table here")
    _add_solver_flags(p)
    _add_template_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_toy, method=None)

    p = sub.add_parser("sweep", help="grid-search hyper-parameters")
    p.add_argument("wav")
    p.add_argument("--ground-truth", required=True, dest="ground_truth")
    p.add_argument("--method", choices=METHODS, default="ost_e")
    p.add_argument("--grid", action="append", default=[],
                   metavar="NAME=V1,V2,...",
                   help="sweep axis; repeatable; default mirrors the "
                        "published decades")
    p.add_argument("--sweep-noise", action="store_true", dest="sweep_noise",
                   help="add the default noise-amplitude axis")
    p.add_argument("--output", default=None)
    p.add_argument("--midi-low", type=int, default=None, dest="midi_low")
    p.add_argument("--midi-high", type=int, default=None, dest="midi_high")
    p.add_argument("--window-len", type=int, default=None, dest="window_len")
    p.add_argument("--hop", type=int, default=None)
    _add_solver_flags(p)
    _add_template_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="time PLCA vs OST on random frames")
    p.add_argument("--bins", type=int, default=2048)
    p.add_argument("--notes", type=int, default=60)
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--output", default=None)
    _add_solver_flags(p)
    _add_template_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_bench, method="ost")

    p = sub.add_parser("eval", help="score an activations TSV against truth")
    p.add_argument("activations")
    p.add_argument("--ground-truth", required=True, dest="ground_truth")
    p.add_argument("--output", default=None)
    _add_common_flags(p)
    p.set_defaults(func=cmd_eval)
    return parser


def _expand_config_file(argv):
    """Splice --config FILE entries in as flags before the explicit ones."""
    path = None
    rest = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok == "--config":
            if i + 1 >= len(argv):
                raise UsageError("--config needs a file argument")
            path = argv[i + 1]
            i += 2
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
            i += 1
        else:
            rest.append(tok)
            i += 1
    if path is None:
        return argv
    if not rest or rest[0].startswith("-"):
        raise UsageError("--config requires a subcommand")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path!r}: {exc}") from None
    tokens = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno} is not key=value: {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "false"):
            if value.lower() == "true":
                tokens.append(flag)
        else:
            tokens.extend((flag, value))
    return [rest[0]] + tokens + rest[1:]


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    logging.basicConfig(level=logging.WARNING, format="%(message)s")
    parser = make_parser()
    try:
        expanded = _expand_config_file(list(argv))
        args = parser.parse_args(expanded)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DecodeError, UnsupportedEncodingError, DataError,
            FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (LpInfeasibleError, LpUnboundedError, LpGuardError, NumericError,
            FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OstError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as exc:
        if exc.code is None:
            return EXIT_OK
        if isinstance(exc.code, int):
            return exc.code
        print(exc.code, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
