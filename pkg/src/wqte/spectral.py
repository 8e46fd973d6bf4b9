"""DFT amplitudes, the 4-sigma noise floor, peak picking, signs and oracle scoring.

For a mirrored signal ``q(n) = q(N-n)`` the DFT ``R(k)`` is real and the signal
is a cosine series. Bin ``k`` corresponds to frequency ``x_k = k / (N delta)``
and to energy magnitude ``|E| = 2 pi x_k``, a multiple of the resolution
``2 pi / (N delta)``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .acquisition import QSignal, SamplingPlan
from .oracle import DEGENERACY_TOL, EigenDecomposition

SYMMETRY_TOL = 1e-12
IMAG_TOL = 1e-9
# accept level for exact-probability signals, where there is no shot noise
EXACT_THRESHOLD = 1e-4
SIGNS = ("+", "-", "?")


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Half-band amplitudes ``a_k`` for ``k = 0 .. N//2``."""

    amplitudes: np.ndarray
    plan: SamplingPlan

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.amplitudes.size) / (self.plan.n_samples * self.plan.delta)

    @property
    def energies(self) -> np.ndarray:
        return 2 * np.pi * self.frequencies


@dataclass(frozen=True)
class NoiseFloor:
    """Shot-noise scale of ``|2R(k)/N|`` and the 4-sigma acceptance level."""

    sigma: float
    threshold: float


@dataclass(frozen=True)
class Peak:
    k: int
    x: float
    amplitude: float
    energy_abs: float
    sign: str = "?"
    above_threshold: bool = True

    @property
    def energy(self) -> float | None:
        """Signed energy, or None while the sign is unknown."""
        if self.sign == "+":
            return self.energy_abs
        if self.sign == "-":
            return -self.energy_abs
        return None


@dataclass(frozen=True)
class PeakSet:
    """Accepted peaks for ``k >= 1`` plus the separately reported zero bin."""

    peaks: tuple[Peak, ...]
    zero: Peak | None
    resolution: float
    threshold: float

    def __len__(self):
        return len(self.peaks)

    def __iter__(self):
        return iter(self.peaks)

    def all_peaks(self) -> tuple[Peak, ...]:
        return ((self.zero,) if self.zero is not None else ()) + self.peaks

    def energies_abs(self) -> np.ndarray:
        return np.array([p.energy_abs for p in self.all_peaks()])


def dft_amplitudes(signal: QSignal) -> Spectrum:
    """Amplitudes ``a_0 = |R(0)|/N``, ``a_k = |2R(k)/N|``, even-N ``a_{N/2} = |R(N/2)|/N``.

    Raises
    ------
    ValueError
        If the signal is not mirror symmetric to ``1e-12``, or if the DFT has
        an imaginary residue above ``1e-9`` relative to ``sum |q|``.
    """
    v = np.asarray(signal.values, dtype=float)
    N = v.size
    asym = np.max(np.abs(v[1:] - v[:0:-1])) if N > 1 else 0.0
    if asym > SYMMETRY_TOL:
        raise ValueError(f"signal is not mirror symmetric (max deviation {asym:.3e})")
    R = np.fft.rfft(v)
    scale = max(1.0, float(np.sum(np.abs(v))))
    resid = np.max(np.abs(R.imag)) / scale
    if resid > IMAG_TOL:
        raise ValueError(f"DFT imaginary residue {resid:.3e} for a symmetric signal")
    a = 2.0 * np.abs(R.real) / N
    a[0] /= 2.0
    if N % 2 == 0:
        a[-1] /= 2.0
    return Spectrum(a, signal.plan)


def noise_threshold(N: int, M: int) -> NoiseFloor:
    """``sigma = sqrt(4 / (N M))`` and ``threshold = 4 sigma``."""
    if N < 2 or M < 1:
        raise ValueError("need N >= 2 and M >= 1")
    sigma = math.sqrt(4.0 / (N * M))
    return NoiseFloor(sigma, 4.0 * sigma)


def default_threshold(plan: SamplingPlan) -> float:
    if plan.shots is None:
        return EXACT_THRESHOLD
    return noise_threshold(plan.n_samples, plan.shots).threshold


def _make_peak(spec: Spectrum, k: int, threshold: float) -> Peak:
    x = k / (spec.plan.n_samples * spec.plan.delta)
    a = float(spec.amplitudes[k])
    return Peak(k, x, a, 2 * math.pi * x, "?", a >= threshold)


def detect_peaks(spectrum: Spectrum, floor: NoiseFloor | float | None = None,
                 method: str = "runs") -> PeakSet:
    """Pick peaks among bins ``k >= 1`` whose amplitude reaches the threshold.

    Parameters
    ----------
    floor
        A :class:`NoiseFloor`, an explicit threshold, or None for the plan's
        default (4-sigma for shot-sampled plans, ``EXACT_THRESHOLD`` otherwise).
    method
        ``"runs"`` merges each maximal run of consecutive eligible bins into
        one peak at the run maximum (ties go to the lower bin). ``"local"``
        keeps every eligible bin that is a strict local maximum on its left
        and a non-strict one on its right; this separates close eigenvalues
        whose leakage tails overlap, which matters for noiseless signals
        where the threshold sits far below the tails.
    """
    if floor is None:
        threshold = default_threshold(spectrum.plan)
    elif isinstance(floor, NoiseFloor):
        threshold = floor.threshold
    else:
        threshold = float(floor)
    a = spectrum.amplitudes
    K = a.size - 1
    eligible = a >= threshold
    picks: list[int] = []
    if method == "runs":
        k = 1
        while k <= K:
            if not eligible[k]:
                k += 1
                continue
            end = k
            while end + 1 <= K and eligible[end + 1]:
                end += 1
            picks.append(k + int(np.argmax(a[k:end + 1])))
            k = end + 1
    elif method == "local":
        left = np.concatenate(([-np.inf, -np.inf], a[1:K]))
        right = np.concatenate((a[1:], [-np.inf]))
        mask = eligible & (a > left) & (a >= right)
        mask[0] = False
        picks = [int(k) for k in np.flatnonzero(mask)]
    else:
        raise ValueError(f"unknown peak method {method!r}")
    zero = _make_peak(spectrum, 0, threshold) if eligible[0] else None
    peaks = tuple(_make_peak(spectrum, k, threshold) for k in picks)
    return PeakSet(peaks, zero, spectrum.plan.resolution, threshold)


def determine_signs(base: PeakSet, shifted: PeakSet, s0: float, delta: float) -> PeakSet:
    """Assign signs by following each peak to the run on ``H + s0``.

    An eigenvalue ``E`` moves to ``|E + s0|``: a positive one to ``|E| + s0``
    and a negative one to ``||E| - s0|``. For each base peak in ascending
    ``|E|`` both hypotheses are tested against the nearest still-unused
    shifted peak; a hypothesis is admissible when the miss is at most
    ``2 delta``. The admissible hypothesis with the smaller miss wins and
    consumes its shifted peak; equal misses, or none admissible, leave ``?``.

    Raises
    ------
    ValueError
        If ``s0 <= delta`` (shift below resolution) or the two runs used
        different resolutions.
    """
    if not s0 > delta:
        raise ValueError(f"offset s0={s0} must exceed the resolution {delta}")
    if not math.isclose(base.resolution, shifted.resolution, rel_tol=1e-12):
        raise ValueError("base and shifted runs use different sampling plans")
    targets = shifted.energies_abs()
    used = np.zeros(targets.size, dtype=bool)
    tol = 2 * delta + 1e-12

    def nearest(e):
        if targets.size == 0 or used.all():
            return None, math.inf
        miss = np.where(used, np.inf, np.abs(targets - e))
        j = int(np.argmin(miss))
        return j, float(miss[j])

    signed = {}
    for peak in sorted(base.all_peaks(), key=lambda p: (p.energy_abs, p.k)):
        e = peak.energy_abs
        jp, dp = nearest(e + s0)
        jm, dm = nearest(abs(e - s0))
        sign = "?"
        if min(dp, dm) <= tol and not math.isclose(dp, dm, abs_tol=1e-12):
            sign, j = ("+", jp) if dp < dm else ("-", jm)
            used[j] = True
        signed[peak.k] = replace(peak, sign=sign)
    peaks = tuple(signed[p.k] for p in base.peaks)
    zero = signed[base.zero.k] if base.zero is not None else None
    return PeakSet(peaks, zero, base.resolution, base.threshold)


@dataclass(frozen=True)
class StateError:
    energy: float
    overlap: float
    peak_energy: float | None
    abs_error: float
    rel_error: float
    matched: bool


@dataclass(frozen=True)
class OracleReport:
    states: tuple[StateError, ...]
    resolution: float

    @property
    def matched(self) -> tuple[StateError, ...]:
        return tuple(s for s in self.states if s.matched)

    @property
    def missed(self) -> tuple[StateError, ...]:
        return tuple(s for s in self.states if not s.matched)

    @property
    def all_matched(self) -> bool:
        return all(s.matched for s in self.states)

    @property
    def max_abs_error(self) -> float:
        return max((s.abs_error for s in self.states), default=0.0)

    @property
    def mean_abs_error(self) -> float:
        return float(np.mean([s.abs_error for s in self.states])) if self.states else 0.0

    def mean_rel_error(self, min_abs_energy: float = 0.0) -> float:
        errs = [s.rel_error for s in self.states if abs(s.energy) >= min_abs_energy]
        return float(np.mean(errs)) if errs else 0.0

    def as_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "n_states": len(self.states),
            "n_matched": len(self.matched),
            "max_abs_error": self.max_abs_error,
            "mean_abs_error": self.mean_abs_error,
            "states": [s.__dict__ for s in self.states],
        }


def evaluate_against_oracle(peaks: PeakSet, decomp: EigenDecomposition,
                            overlap_floor: float = 5e-4, signed: bool = False) -> OracleReport:
    """Score peaks against every distinct oracle eigenvalue with weight >= ``overlap_floor``.

    Each such eigenvalue is paired with the nearest peak (by ``|E|`` unless
    ``signed``); it counts as matched when the error is at most the
    resolution. Relative error is ``inf`` for a zero eigenvalue.
    """
    energies, weights = decomp.distinct(DEGENERACY_TOL)
    cand = peaks.all_peaks()
    if signed:
        pos = np.array([np.nan if p.energy is None else p.energy for p in cand])
    else:
        pos = np.array([p.energy_abs for p in cand])
    states = []
    for E, w in zip(energies, weights):
        if w < overlap_floor:
            continue
        target = E if signed else abs(E)
        if pos.size and np.any(np.isfinite(pos)):
            j = int(np.nanargmin(np.abs(pos - target)))
            err = float(abs(pos[j] - target))
            found = float(pos[j])
        else:
            err, found = math.inf, None
        rel = err / abs(float(E)) if E != 0 else math.inf
        states.append(StateError(float(E), float(w), found, err, rel,
                                 err <= peaks.resolution * (1 + 1e-12)))
    return OracleReport(tuple(states), peaks.resolution)


@dataclass(frozen=True)
class FitResult:
    coefficient: float
    r_squared: float


def _r_squared(y: np.ndarray, model: np.ndarray) -> float:
    ss_res = float(np.sum((y - model) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)


def _fit_through_origin(basis: np.ndarray, y: np.ndarray) -> FitResult:
    c = float(basis @ y / (basis @ basis))
    return FitResult(c, _r_squared(y, c * basis))


def fit_inverse(x, y) -> FitResult:
    """Least-squares ``y = A / x``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    return _fit_through_origin(1.0 / x, y)


def fit_quadratic(x, y) -> FitResult:
    """Least-squares ``y = a x^2``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    return _fit_through_origin(x ** 2, y)


def track_peak(peaksets, start: Peak, min_ratio: float = 0.5) -> list[Peak | None]:
    """Follow one peak through a sequence of runs with a slowly varying parameter.

    At each step the nearest peak to the previous position is taken among
    peaks with at least ``min_ratio`` of the previous amplitude, so a drifting
    peak is not swapped for a weak neighbour. Returns None once lost.
    """
    out: list[Peak | None] = []
    prev = start
    for ps in peaksets:
        if prev is None:
            out.append(None)
            continue
        cand = [p for p in ps.all_peaks() if p.amplitude >= min_ratio * prev.amplitude]
        prev = min(cand, key=lambda p: (abs(p.energy_abs - prev.energy_abs), p.k), default=None)
        out.append(prev)
    return out


def format_spectrum_csv(spectrum: Spectrum) -> str:
    buf = io.StringIO()
    buf.write("k,x,amplitude\n")
    for k, (x, a) in enumerate(zip(spectrum.frequencies, spectrum.amplitudes)):
        buf.write(f"{k},{float(x)!r},{float(a)!r}\n")
    return buf.getvalue()


def write_spectrum_csv(spectrum: Spectrum, path) -> None:
    Path(path).write_text(format_spectrum_csv(spectrum))
