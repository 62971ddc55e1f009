"""Waveform records on disk and their conditioning.

Record CSV layout::

    # fs=200000
    # period_len=7620
    # n_periods=2
    # discard_periods=1
    t,input,output
    0.0,0.5,0.31
    ...

The ``t`` column is optional.  Extra ``# key=value`` lines are kept in
``WaveformRecord.meta``.  Stepped-sine reference files use the columns
``freq_hz,mag_db,phase_deg``.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_INT_KEYS = ("period_len", "n_periods", "discard_periods")


@dataclass(frozen=True)
class WaveformRecord:
    input: np.ndarray
    output: np.ndarray
    sample_rate_hz: float
    period_len: int
    n_periods: int
    discard_periods: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        inp = np.asarray(self.input, dtype=float)
        out = np.asarray(self.output, dtype=float)
        object.__setattr__(self, "input", inp)
        object.__setattr__(self, "output", out)
        if inp.shape != out.shape or inp.ndim != 1:
            raise ValueError(f"input/output length mismatch: {inp.shape} vs {out.shape}")
        if self.period_len < 1 or self.n_periods < 1 or self.discard_periods < 0:
            raise ValueError("period_len and n_periods must be >= 1, discard_periods >= 0")
        need = (self.n_periods + self.discard_periods) * self.period_len
        if inp.size < need:
            raise ValueError(f"record has {inp.size} samples, {need} needed for "
                             f"{self.discard_periods}+{self.n_periods} periods of {self.period_len}")


def segment(record: WaveformRecord) -> tuple[np.ndarray, np.ndarray]:
    """Drop the transient periods and reshape the rest to ``(P, N)`` matrices."""
    n, p, d = record.period_len, record.n_periods, record.discard_periods
    start, stop = d * n, (d + p) * n
    if record.input.size < stop:
        raise ValueError("record too short for its declared periods")
    return (record.input[start:stop].reshape(p, n), record.output[start:stop].reshape(p, n))


def _factor(factor) -> int:
    if isinstance(factor, bool) or int(factor) != factor or factor < 1:
        raise ValueError(f"factor must be a positive integer, got {factor!r}")
    return int(factor)


def hold_upsample(u, factor) -> np.ndarray:
    """Zero-order hold: repeat every sample `factor` times."""
    return np.repeat(np.asarray(u, dtype=float), _factor(factor), axis=-1)


def decimate(x, factor) -> np.ndarray:
    """Keep every `factor`-th sample, starting with the first (no anti-alias filter)."""
    return np.asarray(x)[..., :: _factor(factor)]


def oversampled_mask(mask, factor: int) -> np.ndarray:
    """Excited bins of a held sequence over the generator's band.

    Bin ``k`` of the ``factor * N`` point DFT is kept when ``k mod N`` is
    excited in `mask` and ``k <= N/2``.
    """
    mask = np.asarray(mask, dtype=bool)
    n = mask.size
    k = np.arange(n * _factor(factor))
    return mask[k % n] & (k <= n // 2)


# --------------------------------------------------------------------------
# CSV I/O
# --------------------------------------------------------------------------


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def record_to_csv(record: WaveformRecord, with_time: bool = True) -> str:
    buf = io.StringIO()
    buf.write(f"# fs={record.sample_rate_hz!r}\n")
    buf.write(f"# period_len={record.period_len}\n")
    buf.write(f"# n_periods={record.n_periods}\n")
    buf.write(f"# discard_periods={record.discard_periods}\n")
    for key in sorted(record.meta):
        buf.write(f"# {key}={record.meta[key]}\n")
    if with_time:
        buf.write("t,input,output\n")
        t = np.arange(record.input.size) / record.sample_rate_hz
        for ti, a, b in zip(t.tolist(), record.input.tolist(), record.output.tolist()):
            buf.write(f"{ti!r},{a!r},{b!r}\n")
    else:
        buf.write("input,output\n")
        for a, b in zip(record.input.tolist(), record.output.tolist()):
            buf.write(f"{a!r},{b!r}\n")
    return buf.getvalue()


def write_record(record: WaveformRecord, path, with_time: bool = True) -> Path:
    _atomic_write(path, record_to_csv(record, with_time))
    return Path(path)


def _parse_meta_value(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def read_record(path, sample_rate_hz: float | None = None, period_len: int | None = None,
                n_periods: int | None = None, discard_periods: int | None = None,
                format: str = "csv") -> WaveformRecord:
    """Parse a record CSV; keyword arguments override its ``#`` metadata."""
    if format != "csv":
        raise ValueError(f"unsupported record format {format!r}")
    meta: dict = {}
    header = None
    inputs, outputs = [], []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                body = text[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    meta[key.strip()] = _parse_meta_value(value.strip())
                continue
            if header is None:
                header = [c.strip() for c in text.split(",")]
                if header not in (["t", "input", "output"], ["input", "output"]):
                    raise ValueError(f"{path}:{lineno}: expected columns 't,input,output' "
                                     f"or 'input,output', got {text!r}")
                continue
            cells = text.split(",")
            if len(cells) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(cells)}")
            try:
                vals = [float(c) for c in cells]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric field in {text!r}") from None
            inputs.append(vals[-2])
            outputs.append(vals[-1])
    if header is None:
        raise ValueError(f"{path}: no column header found")
    fs = sample_rate_hz if sample_rate_hz is not None else meta.pop("fs", None)
    meta.pop("fs", None)
    if fs is None:
        raise ValueError(f"{path}: sample rate missing (no '# fs=' line and no override)")
    ints = {}
    given = {"period_len": period_len, "n_periods": n_periods, "discard_periods": discard_periods}
    for key in _INT_KEYS:
        v = given[key] if given[key] is not None else meta.pop(key, None)
        meta.pop(key, None)
        ints[key] = v
    if ints["period_len"] is None:
        ints["period_len"] = len(inputs)
    if ints["discard_periods"] is None:
        ints["discard_periods"] = 0
    if ints["n_periods"] is None:
        ints["n_periods"] = len(inputs) // ints["period_len"] - ints["discard_periods"]
    return WaveformRecord(np.array(inputs), np.array(outputs), float(fs), int(ints["period_len"]),
                          int(ints["n_periods"]), int(ints["discard_periods"]), meta)


def write_stepped_sine(path, freq_hz, frf) -> Path:
    frf = np.asarray(frf, dtype=complex)
    mag = 20 * np.log10(np.abs(frf))
    phase = np.rad2deg(np.unwrap(np.angle(frf)))
    lines = ["freq_hz,mag_db,phase_deg"]
    lines += [f"{f!r},{m!r},{p!r}" for f, m, p in zip(np.asarray(freq_hz, float).tolist(),
                                                         mag.tolist(), phase.tolist())]
    _atomic_write(path, "\n".join(lines) + "\n")
    return Path(path)


@dataclass(frozen=True)
class SteppedSineFrf:
    freq_hz: np.ndarray
    mag_db: np.ndarray
    phase_deg: np.ndarray

    def __call__(self, freq_hz) -> np.ndarray:
        """Interpolate onto `freq_hz`, linear in dB and in unwrapped phase."""
        f = np.asarray(freq_hz, dtype=float)
        lo, hi = self.freq_hz[0], self.freq_hz[-1]
        if np.any(f < lo) or np.any(f > hi):
            raise ValueError(f"frequencies outside the measured range [{lo}, {hi}] Hz")
        mag = np.interp(f, self.freq_hz, self.mag_db)
        ph = np.interp(f, self.freq_hz, np.rad2deg(np.unwrap(np.deg2rad(self.phase_deg))))
        return 10 ** (mag / 20) * np.exp(1j * np.deg2rad(ph))


def read_stepped_sine_frf(path) -> SteppedSineFrf:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    if not rows or [c.strip() for c in rows[0]] != ["freq_hz", "mag_db", "phase_deg"]:
        raise ValueError(f"{path}: expected header 'freq_hz,mag_db,phase_deg'")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != 3 or data.shape[0] < 2:
        raise ValueError(f"{path}: need at least two rows of three columns")
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ValueError(f"{path}: frequency column is not strictly increasing")
    return SteppedSineFrf(data[:, 0], data[:, 1], data[:, 2])
