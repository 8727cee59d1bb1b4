"""Note dictionaries: harmonic Gaussian templates and Dirac dictionaries."""

from dataclasses import dataclass

import numpy as np

DEFAULT_DAMPING = 0.3
DEFAULT_N_PARTIALS = 8


@dataclass(frozen=True, eq=False)
class HarmonicTemplateParams:
    """Shape of a synthesized harmonic template.

    kernel_width : Gaussian std in Hz
    damping      : exponential decay rate per partial index
    n_partials   : number of harmonics placed at p * fundamental
    """

    kernel_width: float
    damping: float = DEFAULT_DAMPING
    n_partials: int = DEFAULT_N_PARTIALS

    def __post_init__(self):
        if self.kernel_width <= 0:
            raise ValueError("kernel_width must be positive")
        if self.damping < 0:
            raise ValueError("damping must be non-negative")
        if self.n_partials < 1:
            raise ValueError("n_partials must be >= 1")


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Column-stochastic template matrix plus fundamental frequencies.

    For kind="dirac" the templates are virtual (None): the reduced cost
    matrix built against the fundamentals replaces them, so no M x K
    storage is needed.
    """

    fundamentals: np.ndarray
    kind: str
    templates: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "fundamentals",
                           np.asarray(self.fundamentals, dtype=np.float64))
        if self.kind not in ("harmonic", "dirac"):
            raise ValueError(f"unknown dictionary kind {self.kind!r}")
        if self.fundamentals.ndim != 1 or self.fundamentals.size == 0:
            raise ValueError("fundamentals must be a non-empty vector")
        if np.any(self.fundamentals <= 0):
            raise ValueError("fundamentals must be positive")
        if len(np.unique(self.fundamentals)) != self.fundamentals.size:
            raise ValueError("fundamentals must be distinct")
        if self.kind == "dirac":
            if self.templates is not None:
                raise ValueError("dirac dictionaries have no stored templates")
            if np.any(np.diff(self.fundamentals) <= 0):
                raise ValueError("fundamentals must be strictly increasing")
        else:
            if self.templates is None:
                raise ValueError("harmonic dictionaries require stored templates")
            object.__setattr__(self, "templates",
                               np.asarray(self.templates, dtype=np.float64))
            if self.templates.shape[1] != self.fundamentals.size:
                raise ValueError("template count must match fundamentals")
            if np.any(self.templates < 0):
                raise ValueError("templates must be non-negative")
            sums = self.templates.sum(axis=0)
            if np.any(np.abs(sums - 1.0) > 1e-12):
                raise ValueError("template columns must sum to 1")

    @property
    def n_templates(self) -> int:
        return self.fundamentals.size


def midi_to_freq(midi: int) -> float:
    """Fundamental frequency in Hz of a MIDI pitch (A4 = 69 = 440 Hz)."""
    if not 0 <= midi <= 127:
        raise ValueError(f"midi pitch {midi} out of range [0, 127]")
    return 440.0 * 2.0 ** ((midi - 69) / 12.0)


def midi_range_fundamentals(midi_low: int, midi_high: int) -> np.ndarray:
    """Chromatic fundamentals midi_low..midi_high inclusive."""
    if midi_high < midi_low:
        raise ValueError("midi_high must be >= midi_low")
    return np.array([midi_to_freq(m) for m in range(midi_low, midi_high + 1)])


def harmonic_column(freqs: np.ndarray, fundamental: float, kernel_width: float,
                    weights: np.ndarray) -> np.ndarray:
    """One unnormalized harmonic comb: sum of Gaussian bumps at p*fundamental
    (p = 1..len(weights)) with the given per-partial weights, partials above
    the grid's top frequency dropped."""
    freqs = np.asarray(freqs, dtype=np.float64)
    col = np.zeros_like(freqs)
    two_var = 2.0 * kernel_width ** 2
    for p, w in enumerate(weights, start=1):
        center = p * fundamental
        if center > freqs[-1]:
            break
        col += w * np.exp(-((freqs - center) ** 2) / two_var)
    return col


def make_harmonic_dictionary(freqs: np.ndarray, fundamentals,
                             params: HarmonicTemplateParams) -> Dictionary:
    """Build Gaussian harmonic-comb templates on a bin grid.

    Column k places n_partials Gaussian bumps at p * nu_k with amplitudes
    exp(-p * damping), evaluated on the discrete grid, partials beyond the
    top bin dropped, then l1-normalized.
    """
    freqs = np.asarray(freqs, dtype=np.float64)
    fundamentals = np.atleast_1d(np.asarray(fundamentals, dtype=np.float64))
    if fundamentals.size == 0:
        raise ValueError("fundamentals must be non-empty")
    if np.any(fundamentals <= 0) or np.any(fundamentals > freqs[-1]):
        raise ValueError("fundamentals must lie within (0, max(freqs)]")

    weights = np.exp(-params.damping * np.arange(1, params.n_partials + 1))
    templates = np.empty((freqs.size, fundamentals.size))
    for k, nu in enumerate(fundamentals):
        col = harmonic_column(freqs, nu, params.kernel_width, weights)
        total = col.sum()
        if total <= 0:
            raise ValueError(f"template at {nu} Hz has no mass on the grid")
        templates[:, k] = col / total
    return Dictionary(fundamentals=fundamentals, kind="harmonic", templates=templates)


def make_dirac_dictionary(fundamentals) -> Dictionary:
    """Dirac dictionary: one virtual spike per fundamental; used with the
    reduced cost matrix targeting the fundamentals directly."""
    fundamentals = np.atleast_1d(np.asarray(fundamentals, dtype=np.float64))
    if fundamentals.size == 0:
        raise ValueError("fundamentals must be non-empty")
    return Dictionary(fundamentals=fundamentals, kind="dirac")
