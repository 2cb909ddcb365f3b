"""Single-photon LiDAR forward model and synthetic imaging variants generator.

Simulates TCSPC photon-count measurements: per pixel, signal photon counts
are Poisson in the expected flux, arrival times are Gaussian-jittered around
the round-trip time bin, and background photons arrive uniformly over the
histogram. Events are kept sparse; photon-starved regimes dominate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s


class DetectionRangeError(ValueError):
    """A scene depth maps past the last histogram bin."""


@dataclass(frozen=True)
class SimulationCondition:
    """Detector and flux parameters for one synthetic imaging variant."""

    delta_t: float              # seconds per time bin
    pulse_rms: float            # RMS pulse width, seconds
    t_bin_max: int              # last valid time bin index
    n_pulses: float = 1.0       # pulses per pixel dwell
    msppp: float = 1.0          # mean signal photons per pixel
    sbr: float = math.inf       # signal-to-background ratio; inf = no background
    gain: float = 1.0           # detector gain scaling
    speed_of_light: float = SPEED_OF_LIGHT

    def __post_init__(self):
        if self.delta_t <= 0:
            raise ValueError("delta_t must be positive")
        if self.pulse_rms < 0:
            raise ValueError("pulse_rms must be non-negative")
        if self.t_bin_max < 1:
            raise ValueError("t_bin_max must be >= 1")
        if self.n_pulses <= 0:
            raise ValueError("n_pulses must be positive")
        if self.msppp < 0:
            raise ValueError("msppp must be non-negative")
        if not self.sbr > 0:
            raise ValueError("sbr must be positive (or inf)")
        if self.gain < 0:
            raise ValueError("gain must be non-negative")

    @property
    def n_bins(self) -> int:
        return self.t_bin_max + 1

    @property
    def sigma_bins(self) -> float:
        """Gaussian jitter std in bin units: (pulse_rms / 2) / delta_t."""
        return (self.pulse_rms / 2.0) / self.delta_t

    def with_msppp(self, msppp: float) -> "SimulationCondition":
        return replace(self, msppp=msppp)

    def to_dict(self) -> dict:
        return {
            "delta_t_s": self.delta_t,
            "pulse_rms_s": self.pulse_rms,
            "t_bin_max": self.t_bin_max,
            "n_pulses": self.n_pulses,
            "msppp": self.msppp,
            "sbr": "inf" if math.isinf(self.sbr) else self.sbr,
            "gain": self.gain,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationCondition":
        sbr = d.get("sbr", "inf")
        if isinstance(sbr, str):
            if sbr.lower() != "inf":
                raise ValueError(f"bad sbr value {sbr!r}")
            sbr = math.inf
        return cls(
            delta_t=float(d["delta_t_s"]),
            pulse_rms=float(d["pulse_rms_s"]),
            t_bin_max=int(d["t_bin_max"]),
            n_pulses=float(d.get("n_pulses", 1.0)),
            msppp=float(d.get("msppp", 1.0)),
            sbr=float(sbr),
            gain=float(d.get("gain", 1.0)),
        )


@dataclass(frozen=True)
class SceneTruth:
    """Ground-truth depth and normalized reflectance rasters with a label."""

    depth_m: np.ndarray       # (height, width) meters
    reflectance: np.ndarray   # (height, width) in [0, 1]
    background_level: float = 0.0
    label: int | None = None

    def __post_init__(self):
        d = np.asarray(self.depth_m, dtype=np.float64)
        r = np.asarray(self.reflectance, dtype=np.float64)
        if d.ndim != 2 or d.shape != r.shape:
            raise ValueError("depth and reflectance rasters must share a 2-D shape")
        if np.any(d < 0):
            raise ValueError("depths must be non-negative")
        if np.any((r < 0) | (r > 1)):
            raise ValueError("reflectance values must lie in [0, 1]")
        object.__setattr__(self, "depth_m", d)
        object.__setattr__(self, "reflectance", r)

    @property
    def height(self) -> int:
        return self.depth_m.shape[0]

    @property
    def width(self) -> int:
        return self.depth_m.shape[1]


@dataclass(frozen=True)
class PhotonEvents:
    """Sparse per-pixel photon timestamps, equivalent to the dense histogram tensor."""

    width: int
    height: int
    x: np.ndarray     # uint16 pixel column per event
    y: np.ndarray     # uint16 pixel row per event
    bin: np.ndarray   # uint32 time bin per event
    condition: SimulationCondition

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.uint16)
        y = np.asarray(self.y, dtype=np.uint16)
        b = np.asarray(self.bin, dtype=np.uint32)
        if not (len(x) == len(y) == len(b)):
            raise ValueError("event field arrays must have equal length")
        if len(x) and (x.max() >= self.width or y.max() >= self.height):
            raise ValueError("event pixel out of range")
        if len(b) and b.max() > self.condition.t_bin_max:
            raise ValueError("event bin out of range")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "bin", b)

    def __len__(self) -> int:
        return len(self.x)

    def to_dense(self) -> np.ndarray:
        """Materialize the (height, width, n_bins) count tensor."""
        n = np.zeros((self.height, self.width, self.condition.n_bins), dtype=np.int64)
        np.add.at(n, (self.y.astype(np.intp), self.x.astype(np.intp), self.bin.astype(np.intp)), 1)
        return n

    @classmethod
    def from_dense(cls, counts: np.ndarray, condition: SimulationCondition) -> "PhotonEvents":
        h, w, t = counts.shape
        ys, xs, bins = np.nonzero(counts)
        reps = counts[ys, xs, bins]
        ys = np.repeat(ys, reps)
        xs = np.repeat(xs, reps)
        bins = np.repeat(bins, reps)
        order = np.lexsort((bins, xs, ys))
        return cls(width=w, height=h, x=xs[order], y=ys[order], bin=bins[order],
                   condition=condition)

    def equals(self, other: "PhotonEvents") -> bool:
        return (self.width == other.width and self.height == other.height
                and np.array_equal(self.x, other.x)
                and np.array_equal(self.y, other.y)
                and np.array_equal(self.bin, other.bin))


def gaussian_irf(sigma_bins: float, center: float = 0.0,
                 support: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Discretized unit-sum Gaussian impulse response.

    Returns (offsets, weights) where offsets are integer bins relative to 0
    and the response is centered at `center` (may be fractional).
    sigma_bins = 0 degenerates to a single bin at round(center).
    """
    if sigma_bins == 0:
        return np.array([int(round(center))]), np.array([1.0])
    if support is None:
        half = max(1, int(math.ceil(6.0 * sigma_bins)))
        support = np.arange(int(math.floor(center)) - half,
                            int(math.ceil(center)) + half + 1)
    w = np.exp(-0.5 * ((support - center) / sigma_bins) ** 2)
    w /= w.sum()
    return support, w


@dataclass(frozen=True)
class RateModel:
    """Per-pixel Poisson rate under the pulse-plus-background physical model."""

    scene: SceneTruth
    condition: SimulationCondition
    amplitude: np.ndarray = field(init=False)   # expected signal photons per pixel
    t_signal: np.ndarray = field(init=False)    # real-valued signal bin per pixel

    def __post_init__(self):
        cond = self.condition
        amp = cond.n_pulses * cond.msppp * self.scene.reflectance
        t_sig = depth_to_bin(self.scene.depth_m, cond)
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "t_signal", t_sig)

    def background_rate(self) -> float:
        """Per-bin uniform background rate implied by the SBR."""
        if self.scene.background_level:
            return float(self.scene.background_level)
        if math.isinf(self.condition.sbr):
            return 0.0
        cond = self.condition
        mean_sig = cond.n_pulses * cond.msppp * float(np.mean(self.scene.reflectance))
        return (mean_sig / cond.sbr) / cond.n_bins

    def rate(self, i: int, j: int, t: int) -> float:
        """lambda(i, j, t) = gain * (a * h(t - t_sig) + b)."""
        cond = self.condition
        if not (0 <= i < self.scene.height and 0 <= j < self.scene.width):
            raise IndexError("pixel out of range")
        if not (0 <= t <= cond.t_bin_max):
            raise IndexError("bin out of range")
        center = self.t_signal[i, j]
        offsets, weights = gaussian_irf(cond.sigma_bins, center)
        idx = np.searchsorted(offsets, t)
        h_val = 0.0
        if idx < len(offsets) and offsets[idx] == t:
            h_val = float(weights[idx])
        return cond.gain * (float(self.amplitude[i, j]) * h_val + self.background_rate())


def expected_rate(model: RateModel, pixel: tuple[int, int], t: int) -> float:
    """Expected photon count in one (pixel, bin) cell."""
    return model.rate(pixel[0], pixel[1], t)


def depth_to_bin(depth_m, cond: SimulationCondition):
    """Round-trip time bin for a depth: t = 2 d / (c * delta_t). Real-valued."""
    t = 2.0 * np.asarray(depth_m, dtype=np.float64) / (cond.speed_of_light * cond.delta_t)
    if np.any(t > cond.t_bin_max):
        raise DetectionRangeError(
            f"depth maps to bin {float(np.max(t)):.1f} beyond t_bin_max={cond.t_bin_max}")
    return t if t.ndim else float(t)


def bin_to_depth(t_bin, cond: SimulationCondition):
    """Inverse of depth_to_bin: d = t * c * delta_t / 2."""
    return np.asarray(t_bin, dtype=np.float64) * cond.speed_of_light * cond.delta_t / 2.0


def sample_signal_count(cond: SimulationCondition, reflectance, rng: np.random.Generator):
    """Poisson signal count(s) with mean n_pulses * msppp * reflectance.

    Accepts a scalar or array reflectance; array input gives one independent
    draw per element.
    """
    refl = np.asarray(reflectance, dtype=np.float64)
    if np.any((refl < 0) | (refl > 1)):
        raise ValueError("reflectance must lie in [0, 1]")
    mean = cond.n_pulses * cond.msppp * refl
    out = rng.poisson(mean)
    return out if np.ndim(reflectance) else int(out)


def sample_signal_times(t_obs: float, cond: SimulationCondition, count: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Gaussian-jittered arrival bins around t_obs, rounded and clamped."""
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return np.empty(0, dtype=np.int64)
    times = t_obs + cond.sigma_bins * rng.standard_normal(count)
    bins = np.rint(times).astype(np.int64)
    return np.clip(bins, 0, cond.t_bin_max)


def sample_background(cond: SimulationCondition, mean_signal: float,
                      rng: np.random.Generator) -> np.ndarray:
    """Background arrival bins: Poisson count at mean_signal/SBR, uniform times."""
    if mean_signal < 0:
        raise ValueError("mean_signal must be non-negative")
    if math.isinf(cond.sbr):
        return np.empty(0, dtype=np.int64)
    n_bg = rng.poisson(mean_signal / cond.sbr)
    if n_bg == 0:
        return np.empty(0, dtype=np.int64)
    return rng.integers(0, cond.t_bin_max + 1, size=n_bg, dtype=np.int64)


def pixel_stream(seed: int, stream: int, pixel_index: int) -> np.random.Generator:
    """Counter-based per-pixel substream.

    Philox keyed by (seed, stream << 32 | pixel_index): any pixel's stream can
    be derived independently of processing order, so parallel and sequential
    simulation agree bit-for-bit.
    """
    key = np.array([np.uint64(seed), np.uint64((stream << 32) | pixel_index)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def simulate(scene: SceneTruth, cond: SimulationCondition, seed: int,
             stream: int = 0) -> PhotonEvents:
    """Generate sparse photon events for one scene under one condition.

    Per pixel: round-trip bin, Poisson signal count, Gaussian-jittered signal
    times, then uniform background at mean flux / SBR. Deterministic given
    (scene, cond, seed, stream).
    """
    t_obs = depth_to_bin(scene.depth_m, cond)  # validates range
    mean_signal = cond.n_pulses * cond.msppp * float(np.mean(scene.reflectance))
    h, w = scene.height, scene.width
    xs: list[np.ndarray] = []
    ys: list[np.ndarray] = []
    bins: list[np.ndarray] = []
    refl = scene.reflectance
    for p in range(h * w):
        i, j = divmod(p, w)
        rng = pixel_stream(seed, stream, p)
        n_sig = sample_signal_count(cond, refl[i, j], rng)
        t_sig = sample_signal_times(float(t_obs[i, j]), cond, n_sig, rng)
        t_bg = sample_background(cond, mean_signal, rng)
        n_ev = len(t_sig) + len(t_bg)
        if n_ev:
            xs.append(np.full(n_ev, j, dtype=np.uint16))
            ys.append(np.full(n_ev, i, dtype=np.uint16))
            bins.append(np.concatenate([t_sig, t_bg]))
    if xs:
        x = np.concatenate(xs)
        y = np.concatenate(ys)
        b = np.concatenate(bins).astype(np.uint32)
    else:
        x = np.empty(0, dtype=np.uint16)
        y = np.empty(0, dtype=np.uint16)
        b = np.empty(0, dtype=np.uint32)
    return PhotonEvents(width=w, height=h, x=x, y=y, bin=b, condition=cond)


def generate_variants(scene: SceneTruth, conditions: list[SimulationCondition],
                      seed: int) -> list[PhotonEvents]:
    """One simulate() per condition, each on an independent substream.

    Stream indices start at 1; stream 0 is reserved for the reference
    (observed) acquisition of the same scene.
    """
    if not conditions:
        raise ValueError("empty condition list")
    return [simulate(scene, c, seed, stream=v + 1) for v, c in enumerate(conditions)]


def poisson_nll_term(lam: float, n: int) -> float:
    """-log P(n | lambda) for one cell, constant log(n!) included."""
    if lam <= 0:
        if n > 0:
            raise ValueError("observed count with zero rate")
        return 0.0
    return lam - n * math.log(lam) + math.lgamma(n + 1)


def neg_log_likelihood(events: PhotonEvents, hypothesis, cond: SimulationCondition) -> float:
    """Poisson negative log-likelihood of the events under a hypothesis.

    hypothesis = (depth raster, reflectance raster, background raster or
    scalar per-bin rate). Sums lambda - n*log(lambda) + log(n!) over every
    pixel and bin; the lambda sum is evaluated analytically from the
    unit-area impulse response.
    """
    depth, refl, bg = hypothesis
    depth = np.asarray(depth, dtype=np.float64)
    refl = np.asarray(refl, dtype=np.float64)
    bg = np.broadcast_to(np.asarray(bg, dtype=np.float64), depth.shape)
    if depth.shape != (events.height, events.width):
        raise ValueError("hypothesis rasters must match event dimensions")

    amp = cond.gain * cond.n_pulses * cond.msppp * refl
    bg_rate = cond.gain * bg
    t_sig = depth_to_bin(depth, cond)
    sigma = cond.sigma_bins

    # Sum of lambda over all bins: amplitude mass inside [0, t_bin_max] plus
    # background over all bins. IRF truncation at the histogram edges is
    # accounted for by summing the discretized response inside range.
    total = 0.0
    irf_mass = np.empty(depth.shape)
    for i in range(events.height):
        for j in range(events.width):
            offsets, weights = gaussian_irf(sigma, t_sig[i, j])
            inside = (offsets >= 0) & (offsets <= cond.t_bin_max)
            irf_mass[i, j] = weights[inside].sum()
    total += float(np.sum(amp * irf_mass) + np.sum(bg_rate) * cond.n_bins)

    # Observed-count terms, sparse over events.
    counts: dict[tuple[int, int, int], int] = {}
    for x, y, b in zip(events.x, events.y, events.bin):
        counts[(int(y), int(x), int(b))] = counts.get((int(y), int(x), int(b)), 0) + 1
    for (i, j, t), n in counts.items():
        offsets, weights = gaussian_irf(sigma, t_sig[i, j])
        idx = np.searchsorted(offsets, t)
        h_val = float(weights[idx]) if idx < len(offsets) and offsets[idx] == t else 0.0
        lam = amp[i, j] * h_val + bg_rate[i, j]
        if lam <= 0:
            raise ValueError(f"observed count at pixel ({i},{j}) bin {t} has zero rate")
        total += -n * math.log(lam) + math.lgamma(n + 1)
    return total
