"""Process resource profiling for training runs.

A background thread samples this process while the profiled closure
runs: resident memory and CPU time at a nominal 20 Hz (well above the
10 Hz floor the reports assume), with disk I/O taken as before/after
counter deltas.  Averaged CPU percent is cpu-time/wall-time and can
exceed 100 on multi-core hosts; that single-number convention is kept
as-is.  MB means mebibytes throughout.

Metrics the host cannot supply (no io_counters on some platforms,
permission denials) are reported in ``unavailable`` with a reason and
``None`` in the field, never as a misleading zero.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import psutil

_MB = 1024.0 * 1024.0
DEFAULT_SAMPLE_HZ = 20.0


@dataclass
class ResourceReport:
    wall_seconds: float
    cpu_percent_avg: float
    cpu_percent_peak: float
    peak_ram_mb: float
    disk_read_mb: float | None
    disk_write_mb: float | None
    sample_rate_hz: float
    n_samples: int
    unavailable: dict[str, str] = field(default_factory=dict)
    failed: bool = False

    def to_dict(self) -> dict:
        return {
            "wall_seconds": self.wall_seconds,
            "cpu_percent_avg": self.cpu_percent_avg,
            "cpu_percent_peak": self.cpu_percent_peak,
            "peak_ram_mb": self.peak_ram_mb,
            "disk_read_mb": self.disk_read_mb,
            "disk_write_mb": self.disk_write_mb,
            "sample_rate_hz": self.sample_rate_hz,
            "n_samples": self.n_samples,
            "unavailable": dict(self.unavailable),
            "failed": self.failed,
        }


@dataclass
class ProfiledRun:
    """A closure's return value alongside its resource report."""

    result: Any
    report: ResourceReport
    error: BaseException | None = None

    def unwrap(self) -> Any:
        if self.error is not None:
            raise self.error
        return self.result


def _cpu_seconds(proc: psutil.Process) -> float:
    t = proc.cpu_times()
    return t.user + t.system


def _io_snapshot(proc: psutil.Process) -> tuple[tuple[int, int] | None, str | None]:
    try:
        io = proc.io_counters()
    except (AttributeError, NotImplementedError) as err:
        return None, f"io_counters not supported here: {err or type(err).__name__}"
    except psutil.AccessDenied as err:
        return None, f"io_counters denied: {err}"
    return (io.read_bytes, io.write_bytes), None


class _Sampler(threading.Thread):
    """Polls RSS and CPU time; keeps peaks, never raises into the run."""

    def __init__(self, proc: psutil.Process, interval: float):
        super().__init__(daemon=True)
        self.proc = proc
        self.interval = interval
        self.stop_event = threading.Event()
        self.peak_rss = 0
        self.peak_cpu_percent = 0.0
        self.n_samples = 0

    def run(self) -> None:
        last_t = time.perf_counter()
        try:
            last_cpu = _cpu_seconds(self.proc)
        except psutil.Error:
            return
        while not self.stop_event.wait(self.interval):
            try:
                rss = self.proc.memory_info().rss
                cpu = _cpu_seconds(self.proc)
            except psutil.Error:
                break
            now = time.perf_counter()
            self.peak_rss = max(self.peak_rss, rss)
            if now > last_t:
                rate = (cpu - last_cpu) / (now - last_t) * 100.0
                self.peak_cpu_percent = max(self.peak_cpu_percent, rate)
            last_t, last_cpu = now, cpu
            self.n_samples += 1


def profile(run: Callable[[], Any], sample_hz: float = DEFAULT_SAMPLE_HZ) -> ProfiledRun:
    """Execute ``run()`` under the sampler and report resource usage.

    An exception inside the closure is captured, not raised: the report
    comes back with ``failed=True`` and :meth:`ProfiledRun.unwrap`
    re-raises for callers that want the failure.
    """
    proc = psutil.Process()
    unavailable: dict[str, str] = {}

    io_before, io_reason = _io_snapshot(proc)
    rss_start = proc.memory_info().rss
    cpu_before = _cpu_seconds(proc)
    sampler = _Sampler(proc, 1.0 / sample_hz)
    t0 = time.perf_counter()
    sampler.start()

    result: Any = None
    error: BaseException | None = None
    try:
        result = run()
    except BaseException as err:  # report partial metrics on any failure
        error = err
    finally:
        t1 = time.perf_counter()
        sampler.stop_event.set()
        sampler.join()

    wall = max(t1 - t0, 1e-9)
    cpu_after = _cpu_seconds(proc)
    rss_end = proc.memory_info().rss
    io_after, _ = _io_snapshot(proc)

    disk_read = disk_write = None
    if io_before is None or io_after is None:
        reason = io_reason or "io_counters vanished mid-run"
        unavailable["disk_read_mb"] = reason
        unavailable["disk_write_mb"] = reason
    else:
        disk_read = (io_after[0] - io_before[0]) / _MB
        disk_write = (io_after[1] - io_before[1]) / _MB

    rate = (cpu_after - cpu_before) / wall * 100.0
    report = ResourceReport(
        wall_seconds=wall,
        cpu_percent_avg=max(rate, 0.0),
        cpu_percent_peak=max(sampler.peak_cpu_percent, rate, 0.0),
        peak_ram_mb=max(rss_start, sampler.peak_rss, rss_end) / _MB,
        disk_read_mb=disk_read,
        disk_write_mb=disk_write,
        sample_rate_hz=sampler.n_samples / wall,
        n_samples=sampler.n_samples,
        unavailable=unavailable,
        failed=error is not None,
    )
    return ProfiledRun(result=result, report=report, error=error)
