"""Discrete-event scheduling of a blocking perception pipeline under random latency."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .core import Rng

# admission and grid comparisons; far below any latency or frame period in use
TIME_EPS = 1e-12


class ScheduleError(ValueError):
    pass


class LatencyModel:
    """Base class; subclasses implement :meth:`sample` and :meth:`describe`."""

    kind = "abstract"

    def sample(self, rng: Rng) -> float:
        raise NotImplementedError

    def fresh(self) -> "LatencyModel":
        """Copy with any internal cursor rewound (used at the start of a run)."""
        return self

    def mean(self) -> float:
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError


@dataclass
class ConstantLatency(LatencyModel):
    tau: float
    kind = "constant"

    def __post_init__(self):
        if not self.tau > 0:
            raise ScheduleError("constant latency must be positive")

    def sample(self, rng):
        return float(self.tau)

    def mean(self):
        return float(self.tau)

    def describe(self):
        return f"constant:{self.tau:g}"


@dataclass
class UniformLatency(LatencyModel):
    lo: float
    hi: float
    kind = "uniform"

    def __post_init__(self):
        if not 0 < self.lo <= self.hi:
            raise ScheduleError("uniform latency needs 0 < lo <= hi")

    def sample(self, rng):
        return float(rng.uniform(self.lo, self.hi))

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def describe(self):
        return f"uniform:{self.lo:g},{self.hi:g}"


@dataclass
class LognormalLatency(LatencyModel):
    mu: float
    sigma: float
    clamp_max: float = math.inf
    kind = "lognormal"

    def sample(self, rng):
        return float(min(rng.lognormal(self.mu, self.sigma), self.clamp_max))

    def mean(self):
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def describe(self):
        return f"lognormal:{self.mu:g},{self.sigma:g},{self.clamp_max:g}"


@dataclass
class TraceLatency(LatencyModel):
    values: list
    source: str = ""
    _cursor: int = field(default=0, repr=False, compare=False)
    kind = "trace"

    def __post_init__(self):
        self.values = [float(v) for v in self.values]
        if not self.values:
            raise ScheduleError("latency trace is empty")
        if any(not (v > 0 and math.isfinite(v)) for v in self.values):
            raise ScheduleError("latency trace values must be positive and finite")

    def sample(self, rng):
        v = self.values[self._cursor % len(self.values)]
        self._cursor += 1
        return v

    def fresh(self):
        return TraceLatency(list(self.values), self.source)

    def mean(self):
        return float(np.mean(self.values))

    def describe(self):
        return f"trace:{self.source or len(self.values)}"


def sample_latency(model: LatencyModel, rng: Rng) -> float:
    return model.sample(rng)


def load_trace(path) -> list[float]:
    """Plain text, one latency in seconds per line; ``#`` starts a comment."""
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(float(line))
    return out


def parse_latency(spec: str) -> LatencyModel:
    """Parse ``constant:0.5``, ``uniform:0.3,0.6``, ``lognormal:mu,sigma[,clamp]``, ``trace:file``."""
    kind, _, arg = spec.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "constant":
            return ConstantLatency(float(arg))
        if kind == "uniform":
            lo, hi = (float(v) for v in arg.split(","))
            return UniformLatency(lo, hi)
        if kind == "lognormal":
            parts = [float(v) for v in arg.split(",")]
            return LognormalLatency(*parts)
        if kind == "trace":
            return TraceLatency(load_trace(arg), source=Path(arg).name)
    except (TypeError, ValueError) as exc:
        raise ScheduleError(f"bad latency spec {spec!r}: {exc}") from exc
    raise ScheduleError(f"unknown latency model {kind!r}")


@dataclass(frozen=True)
class FrameEvent:
    frame_index: int
    capture_time: float
    observation: Any = None


@dataclass
class ProcessedFrame:
    frame_index: int
    capture_time: float
    t0: float  # ingest (processing start)
    t1: float  # finish; outputs available from here
    t2: float  # t1 + next latency; end of this output's query window
    skipped: list
    query_times: list
    latency: float = math.nan  # the sampled value; t1 - t0 up to rounding


@dataclass
class RunSchedule:
    frames: list
    eval_rate: float
    latency_desc: str = ""

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def processed_indices(self) -> list[int]:
        return [f.frame_index for f in self.frames]

    @property
    def skipped_indices(self) -> list[int]:
        return [i for f in self.frames for i in f.skipped]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frame_index", "t0", "t1", "t2", "n_skipped", "n_queries"])
        for f in self.frames:
            w.writerow([f.frame_index, repr(f.t0), repr(f.t1), repr(f.t2), len(f.skipped), len(f.query_times)])
        return buf.getvalue()


def grid_points(lo: float, hi: float, rate: float) -> list[float]:
    """Absolute grid points ``j / rate`` with ``lo <= j/rate < hi``."""
    if hi <= lo:
        return []
    j0 = int(math.floor(lo * rate)) - 1
    j1 = int(math.ceil(hi * rate)) + 1
    out = []
    for j in range(max(j0, 0), j1 + 1):
        t = j / rate
        if t >= lo - TIME_EPS and t < hi - TIME_EPS:
            out.append(t)
    return out


def schedule_run(
    frames: Sequence[FrameEvent],
    model: LatencyModel,
    eval_rate: float,
    rng: Rng,
    end_time: float | None = None,
) -> RunSchedule:
    """Simulate a blocking pipeline over a capture stream.

    When the pipeline frees up it ingests the newest captured frame it has not
    processed; older pending frames are skipped. If nothing new has been
    captured yet it idles until the next capture. Each processed frame's
    output window is ``[t1, t1 + next latency)``; in a saturated pipeline this
    ends exactly at the next frame's ``t1``. ``end_time`` clips query times.
    """
    if not frames:
        raise ScheduleError("schedule_run needs at least one frame")
    if eval_rate <= 0:
        raise ScheduleError("eval_rate must be positive")
    caps = [f.capture_time for f in frames]
    if any(b <= a for a, b in zip(caps, caps[1:])):
        raise ScheduleError("capture times must be strictly increasing")

    model = model.fresh()
    n = len(frames)
    runs = []  # (pos, t0, t1, skipped)
    pos = 0
    t0 = caps[0]
    skipped: list[int] = []
    while True:
        lat = model.sample(rng)
        t1 = t0 + lat
        runs.append((pos, t0, t1, skipped, lat))
        # newest frame captured by t1 and newer than the one just processed
        nxt = pos
        while nxt + 1 < n and caps[nxt + 1] <= t1 + TIME_EPS:
            nxt += 1
        if nxt > pos:
            skipped = [frames[i].frame_index for i in range(pos + 1, nxt)]
            pos, t0 = nxt, t1
        elif pos + 1 < n:
            skipped = []
            pos, t0 = pos + 1, caps[pos + 1]
        else:
            break
    # next-latency draws: the one used by the following run, plus one extra at the end
    lat_next = [r[4] for r in runs[1:]] + [model.sample(rng)]

    out = []
    for (p, a, b, sk, lat), nl in zip(runs, lat_next):
        t2 = b + nl
        q = grid_points(b, t2, eval_rate)
        if end_time is not None:
            q = [t for t in q if t <= end_time]
        out.append(ProcessedFrame(frames[p].frame_index, caps[p], a, b, t2, sk, q, lat))
    return RunSchedule(out, eval_rate, model.describe())


def max_staleness(sched: RunSchedule) -> float:
    """Largest ``t_j - t0`` over all scored query times (0 if none)."""
    if not len(sched):
        raise ScheduleError("empty schedule")
    vals = [t - f.t0 for f in sched.frames for t in f.query_times]
    return max(vals) if vals else 0.0


def staleness_supremum(sched: RunSchedule) -> float:
    """Supremum of ``t - t0`` over the continuous windows, i.e. ``max(t2 - t0)``."""
    return max(f.t2 - f.t0 for f in sched.frames)


def frames_from_times(times) -> list[FrameEvent]:
    return [FrameEvent(i, float(t)) for i, t in enumerate(times)]
