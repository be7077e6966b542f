"""Two-stage current filtering and position delay alignment.

Stage one is a centered sliding median (odd window, clamped endpoint
replication) that strips single-sample outliers; stage two is a causal
trailing mean that smooths the remaining band.  The trailing mean
introduces a group delay of about (window - 1) / 2 samples, which the
position delay array cancels so a filtered-current sample pairs with
the position that produced it.

Both filters exist in batch and incremental (sample-at-a-time) form;
the incremental form buffers exactly enough input to reproduce the
batch output bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .plant_sim import CurrentTrace


@dataclass(frozen=True)
class FilterConfig:
    median_window: int = 5
    mean_window: int = 15
    delay_units: int = 7    # (mean_window - 1) // 2 cancels the mean delay

    def __post_init__(self):
        if self.median_window < 3 or self.median_window % 2 == 0:
            raise ValueError(f"median window must be odd and >= 3, got {self.median_window}")
        if self.mean_window < 1:
            raise ValueError(f"mean window must be >= 1, got {self.mean_window}")
        if self.delay_units < 0:
            raise ValueError(f"delay units must be >= 0, got {self.delay_units}")


def median_filter(series: np.ndarray, window: int) -> np.ndarray:
    """Centered sliding median with clamped (edge-replicated) windows."""
    if window % 2 == 0:
        raise ValueError(f"median window must be odd, got {window}")
    x = np.asarray(series, dtype=float)
    if window > len(x):
        raise ValueError(f"window {window} larger than series length {len(x)}")
    half = window // 2
    padded = np.pad(x, half, mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(padded, window)
    # odd window: the median is an order statistic (exact selection)
    return np.median(win, axis=1)


def mean_filter(series: np.ndarray, window: int) -> np.ndarray:
    """Causal trailing moving average; partial windows at the head."""
    x = np.asarray(series, dtype=float)
    if window > len(x):
        raise ValueError(f"window {window} larger than series length {len(x)}")
    out = np.empty_like(x)
    for i in range(len(x)):
        out[i] = float(np.mean(x[max(0, i - window + 1):i + 1]))
    return out


def derivative(series: np.ndarray, sample_rate: float) -> np.ndarray:
    """First difference scaled to units per second; first sample zero."""
    x = np.asarray(series, dtype=float)
    d = np.empty_like(x)
    d[0] = 0.0
    d[1:] = (x[1:] - x[:-1]) * sample_rate
    return d


@dataclass
class FilteredTrace:
    """A trace with the filtered-current columns attached."""

    trace: CurrentTrace
    current_filt: np.ndarray
    current_deriv: np.ndarray
    position_aligned: np.ndarray
    config: FilterConfig


def two_stage_filter(trace: CurrentTrace, cfg: FilterConfig | None = None) -> FilteredTrace:
    """Median then mean filter of the current, plus its first derivative."""
    cfg = cfg or FilterConfig()
    med = median_filter(trace.current, cfg.median_window)
    filt = mean_filter(med, cfg.mean_window)
    deriv = derivative(filt, trace.sample_rate)
    aligned = delay_align(trace.position, cfg)
    return FilteredTrace(
        trace=trace, current_filt=filt, current_deriv=deriv,
        position_aligned=aligned, config=cfg,
    )


def delay_align(position: np.ndarray, cfg: FilterConfig, inverse: bool = False) -> np.ndarray:
    """Pair filtered-current sample k with the position that produced it.

    Shifts the position series back by ``delay_units`` samples (clamped
    at the boundary); ``inverse=True`` undoes the shift on the interior.
    """
    x = np.asarray(position, dtype=float)
    d = cfg.delay_units
    if d >= len(x):
        raise ValueError(f"delay {d} not smaller than series length {len(x)}")
    if d == 0:
        return x.copy()
    idx = np.arange(len(x)) + d if inverse else np.arange(len(x)) - d
    return x[np.clip(idx, 0, len(x) - 1)]


class IncrementalTwoStage:
    """Sample-at-a-time two-stage filter, bit-identical to the batch path.

    The centered median needs half a window of lookahead, so outputs
    lag pushes by median_window // 2 samples; ``finish()`` flushes the
    tail using the same clamped-edge windows as the batch filter.
    """

    def __init__(self, cfg: FilterConfig, sample_rate: float):
        self.cfg = cfg
        self.sample_rate = sample_rate
        self._raw: list[float] = []
        self._med: list[float] = []
        self._filt: list[float] = []
        self._emitted = 0
        self._finished = False

    def _emit_ready(self, flush: bool) -> list[tuple[float, float]]:
        half = self.cfg.median_window // 2
        out = []
        n = len(self._raw)
        limit = n if flush else n - half
        while self._emitted < limit:
            i = self._emitted
            window = [self._raw[min(max(j, 0), n - 1)] for j in range(i - half, i + half + 1)]
            self._med.append(float(np.median(np.array(window))))
            start = max(0, i - self.cfg.mean_window + 1)
            filt = float(np.mean(np.array(self._med[start:i + 1])))
            self._filt.append(filt)
            deriv = 0.0 if i == 0 else (filt - self._filt[i - 1]) * self.sample_rate
            out.append((filt, deriv))
            self._emitted += 1
        return out

    def push(self, sample: float) -> list[tuple[float, float]]:
        """Feed one raw sample; return zero or more (filtered, derivative)."""
        if self._finished:
            raise RuntimeError("filter already finished")
        self._raw.append(float(sample))
        return self._emit_ready(flush=False)

    def finish(self) -> list[tuple[float, float]]:
        """Flush the lookahead tail; after this the stream is closed."""
        self._finished = True
        return self._emit_ready(flush=True)


def write_filtered_trace(ft: FilteredTrace, path) -> None:
    """Trace table plus the two filtered-current columns."""
    tr = ft.trace
    labels = tr.labels if tr.labels is not None else np.zeros(tr.n_samples, dtype=int)
    with open(path, "w") as fh:
        fh.write("t_s,current_A,position_rad,velocity_rpm,label,"
                 "current_filt_A,current_deriv_A_per_s\n")
        for i in range(tr.n_samples):
            fh.write("%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g\n" % (
                tr.t[i], tr.current[i], tr.position[i], tr.velocity[i],
                labels[i], ft.current_filt[i], ft.current_deriv[i],
            ))
