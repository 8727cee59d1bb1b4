"""Ground-truth ingestion, piano rolls, scoring, and toy unmixing scenarios."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .dictionary import (Dictionary, HarmonicTemplateParams, harmonic_column,
                         make_harmonic_dictionary, midi_to_freq)
from .errors import DataError
from .solvers import Activations

logger = logging.getLogger(__name__)

GROUND_TRUTH_COLUMNS = ("OnsetTime", "OffsetTime", "MidiPitch")

# Toy grid and synthesis defaults. The eight pitches keep the listed order:
# the 8th (MIDI 60) is the upper octave of the 1st (MIDI 48), acting as the
# decoy column that unregularized transport leaks even partials into.
# The grid is fine enough that the 2-bin kernel stays narrow against the
# closest equal-temperament partial collisions (a few Hz), so bumps do not
# straddle assignment boundaries between two active notes.
TOY_PITCHES = (48, 52, 55, 57, 59, 62, 64, 60)
TOY_PAIR_A = (0, 3)
TOY_PAIR_B = (0, 5)
TOY_BINS = 8192
TOY_F_MAX = 2800.0
TOY_KERNEL_WIDTH_BINS = 2.0
TOY_DAMPING = 0.3
TOY_N_PARTIALS = 8
TOY_SHIFT_PCT = 1.5
TOY_AMP_RANGE = (0.25, 4.0)
TOY_RESIDUAL_DECAY = 0.1
TOY_WEIGHTS = (0.5, 0.5)

SCENARIO_ALIASES = {
    "a": "shifted_fundamentals",
    "b": "wrong_amplitudes",
    "shifted_fundamentals": "shifted_fundamentals",
    "wrong_amplitudes": "wrong_amplitudes",
}


@dataclass(frozen=True)
class FrameClock:
    """Positions frame centers on the time axis: center(n) = t0 + n * hop."""

    n_frames: int
    hop_seconds: float
    t0: float = 0.0

    def __post_init__(self):
        if self.n_frames < 0:
            raise ValueError("n_frames must be non-negative")
        if self.hop_seconds <= 0:
            raise ValueError("hop_seconds must be positive")

    def centers(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_frames) * self.hop_seconds


@dataclass(frozen=True)
class NoteEvent:
    onset_seconds: float
    offset_seconds: float
    midi_pitch: int

    def __post_init__(self):
        if not self.onset_seconds < self.offset_seconds:
            raise ValueError("onset must precede offset")
        if self.onset_seconds < 0:
            raise ValueError("onset must be non-negative")
        if not 0 <= self.midi_pitch <= 127:
            raise ValueError("midi_pitch out of range [0, 127]")


@dataclass(eq=False)
class PianoRoll:
    """Binary pitch x frame activity matrix over a MIDI range."""

    active: np.ndarray
    midi_low: int
    midi_high: int
    frame_hop_seconds: float

    def __post_init__(self):
        self.active = np.asarray(self.active, dtype=bool)
        if self.active.ndim != 2:
            raise ValueError("active must be a K x N matrix")
        if self.active.shape[0] != self.midi_high - self.midi_low + 1:
            raise ValueError("row count must equal midi_high - midi_low + 1")
        if self.frame_hop_seconds <= 0:
            raise ValueError("frame_hop_seconds must be positive")

    @property
    def midi_range(self):
        return (self.midi_low, self.midi_high)


@dataclass(eq=False)
class EvalReport:
    """Pooled frame-level scores plus per-frame counts."""

    precision: float
    recall: float
    f_measure: float
    tp: int
    fp: int
    fn: int
    tp_frames: np.ndarray = None
    fp_frames: np.ndarray = None
    fn_frames: np.ndarray = None
    wall_time_seconds: dict = field(default_factory=dict)


def events_to_roll(events, midi_range, clock: FrameClock) -> PianoRoll:
    """Rasterize events: note active in frame n iff its [onset, offset)
    interval contains the frame's center time. Pitches outside midi_range
    are dropped (logged with a count)."""
    low, high = midi_range
    centers = clock.centers()
    active = np.zeros((high - low + 1, clock.n_frames), dtype=bool)
    dropped = 0
    for ev in events:
        if not low <= ev.midi_pitch <= high:
            dropped += 1
            continue
        hit = (centers >= ev.onset_seconds) & (centers < ev.offset_seconds)
        active[ev.midi_pitch - low, hit] = True
    if dropped:
        logger.warning("dropped %d ground-truth events outside MIDI range [%d, %d]",
                       dropped, low, high)
    return PianoRoll(active=active, midi_low=low, midi_high=high,
                     frame_hop_seconds=clock.hop_seconds)


def parse_ground_truth(path) -> list:
    """Read a MAPS-style annotation file: TSV with a header line naming
    OnsetTime, OffsetTime and MidiPitch columns."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines:
        raise DataError(f"empty ground-truth file {path!r}")
    header = lines[0].split("\t")
    try:
        cols = [header.index(name) for name in GROUND_TRUTH_COLUMNS]
    except ValueError as exc:
        raise DataError(f"missing ground-truth columns in {path!r}: "
                        f"expected {GROUND_TRUTH_COLUMNS}") from exc
    events = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) <= max(cols):
            raise DataError(f"malformed row {lineno} in {path!r}")
        try:
            onset = float(parts[cols[0]])
            offset = float(parts[cols[1]])
            pitch = int(round(float(parts[cols[2]])))
            events.append(NoteEvent(onset, offset, pitch))
        except ValueError as exc:
            raise DataError(f"malformed row {lineno} in {path!r}: {exc}") from exc
    return events


def load_ground_truth(path, midi_range, clock: FrameClock) -> PianoRoll:
    """Parse a MAPS-style TSV and rasterize it onto the frame clock."""
    return events_to_roll(parse_ground_truth(path), midi_range, clock)


def threshold_activations(acts: Activations, truth: PianoRoll) -> PianoRoll:
    """Keep, per frame, the support of the P_n largest activation entries,
    where P_n is the ground-truth polyphony of frame n (ties resolve to the
    lowest index; P_n = 0 leaves the frame empty)."""
    values = acts.values
    if values.shape != truth.active.shape:
        raise ValueError("activations shape must match the truth roll")
    active = np.zeros_like(truth.active)
    polyphony = truth.active.sum(axis=0)
    order = np.argsort(-values, axis=0, kind="stable")
    for n in np.flatnonzero(polyphony):
        active[order[:polyphony[n], n], n] = True
    return PianoRoll(active=active, midi_low=truth.midi_low,
                     midi_high=truth.midi_high,
                     frame_hop_seconds=truth.frame_hop_seconds)


def f_measure(estimate: PianoRoll, truth: PianoRoll) -> EvalReport:
    """Frame-level precision/recall/F with counts pooled over the roll."""
    if estimate.active.shape != truth.active.shape:
        raise ValueError("piano-roll shapes must match")
    est, ref = estimate.active, truth.active
    tp_frames = (est & ref).sum(axis=0)
    fp_frames = (est & ~ref).sum(axis=0)
    fn_frames = (~est & ref).sum(axis=0)
    tp, fp, fn = int(tp_frames.sum()), int(fp_frames.sum()), int(fn_frames.sum())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport(precision=precision, recall=recall, f_measure=f,
                      tp=tp, fp=fp, fn=fn, tp_frames=tp_frames,
                      fp_frames=fp_frames, fn_frames=fn_frames)


def l1_activation_error(h_est, h_true) -> float:
    h_est = np.asarray(h_est, dtype=np.float64)
    h_true = np.asarray(h_true, dtype=np.float64)
    if h_est.shape != h_true.shape:
        raise ValueError("length mismatch")
    return float(np.abs(h_est - h_true).sum())


@dataclass(eq=False)
class ToyScenario:
    """One synthesized unmixing problem: a frame, its true activations, the
    clean dictionary, and the bin grid everything lives on."""

    freqs: np.ndarray
    frame: np.ndarray
    h_true: np.ndarray
    dictionary: Dictionary
    which: str
    seed: int


def toy_fundamentals() -> np.ndarray:
    return np.array([midi_to_freq(m) for m in TOY_PITCHES])


def make_toy_scenario(which: str, seed: int, bins: int = TOY_BINS,
                      f_max: float = TOY_F_MAX,
                      kernel_width_bins: float = TOY_KERNEL_WIDTH_BINS,
                      damping: float = TOY_DAMPING,
                      n_partials: int = TOY_N_PARTIALS,
                      shift_pct: float = TOY_SHIFT_PCT,
                      amp_range=TOY_AMP_RANGE,
                      residual_decay: float = TOY_RESIDUAL_DECAY,
                      weights=TOY_WEIGHTS) -> ToyScenario:
    """Build one misspecified-unmixing draw.

    shifted_fundamentals ("a"): mix templates 1 and 4 with each note's
    fundamental moved by a seeded random sign times shift_pct percent, the
    shift propagated to all partials.

    wrong_amplitudes ("b"): mix templates 1 and 6 at the exact frequencies
    but with the partial amplitudes redrawn log-uniformly in amp_range
    around a residual_decay envelope much flatter than the dictionary's,
    so the observed timbre no longer follows the modeled exponential
    envelope (each column renormalizes before mixing).

    The returned dictionary is always the clean, unshifted one.
    """
    try:
        which = SCENARIO_ALIASES[which]
    except KeyError:
        raise ValueError(f"unknown scenario {which!r}") from None
    delta = f_max / bins
    freqs = delta * np.arange(1, bins + 1)
    sigma = kernel_width_bins * delta
    fundamentals = toy_fundamentals()
    params = HarmonicTemplateParams(kernel_width=sigma, damping=damping,
                                    n_partials=n_partials)
    dictionary = make_harmonic_dictionary(freqs, fundamentals, params)

    rng = np.random.default_rng(seed)
    clean_weights = np.exp(-damping * np.arange(1, n_partials + 1))
    pair = TOY_PAIR_A if which == "shifted_fundamentals" else TOY_PAIR_B
    v = np.zeros_like(freqs)
    for note, weight in zip(pair, weights):
        nu = fundamentals[note]
        if which == "shifted_fundamentals":
            sign = rng.choice((-1.0, 1.0))
            nu = nu * (1.0 + sign * shift_pct / 100.0)
            partial_weights = clean_weights
        else:
            lo, hi = np.log(amp_range[0]), np.log(amp_range[1])
            decay = np.exp(-residual_decay * np.arange(1, n_partials + 1))
            partial_weights = decay * np.exp(rng.uniform(lo, hi, n_partials))
        col = harmonic_column(freqs, nu, sigma, partial_weights)
        v += weight * (col / col.sum())
    h_true = np.zeros(len(fundamentals))
    h_true[list(pair)] = weights
    return ToyScenario(freqs=freqs, frame=v, h_true=h_true,
                       dictionary=dictionary, which=which, seed=seed)
