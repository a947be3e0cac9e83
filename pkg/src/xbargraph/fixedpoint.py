"""16-bit fixed point arithmetic shared by the whole simulator.

Two interpretations share the same 16-bit storage:

* ``FRAC``: Q0.16, value = raw / 2**16, representable range [0, 1 - 2**-16].
  Used by rank/SpMV style programs whose vertex values live in [0, 1).
* ``INT``: plain unsigned integer. 0xFFFF is reserved as ``M``, the marker
  for "no edge" / unreachable, and absorbs saturating addition.

Saturating addition clips at 0xFFFF, so saturation and the absorbing law of
``M`` are the same operation.  All rounding is round-half-to-even.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

Q16_ONE = 1 << 16
RAW_MAX = 0xFFFF
#: "no edge" / unreachable marker for the INT interpretation.
M = RAW_MAX


class FxFormat(Enum):
    FRAC = "frac"
    INT = "int"


class FxRangeError(ValueError):
    """A value cannot be encoded in the requested format."""


def encode_frac(x: float) -> int:
    """Encode ``x`` in [0, 1) to the nearest representable Q0.16 raw value.

    Values within half an ulp of 1.0 round to 2**16, which does not exist in
    the format; they saturate to the largest representable raw, 0xFFFF.
    """
    if not (0.0 <= x < 1.0):
        raise FxRangeError(f"FRAC encode requires 0 <= x < 1, got {x!r}")
    raw = int(np.round(x * Q16_ONE))
    return min(raw, RAW_MAX)


def encode_frac_clamped(values) -> tuple[np.ndarray, int]:
    """Vectorised FRAC encode that clamps instead of raising.

    Returns ``(raw, clamped)`` where ``raw`` is a uint16 array and ``clamped``
    counts entries that fell outside [0, 1 - 2**-16] and were clipped.  This
    is the encode used when programming crossbar cells, where an occasional
    out-of-range product must not abort a run.
    """
    raw = np.round(np.asarray(values, dtype=np.float64) * Q16_ONE)
    clamped = int(np.count_nonzero(raw > RAW_MAX)) + int(np.count_nonzero(raw < 0))
    return np.clip(raw, 0, RAW_MAX).astype(np.uint16), clamped


def decode_frac(raw):
    """Q0.16 raw (scalar or array) back to float."""
    return raw / Q16_ONE


def encode_int(x: int) -> int:
    if not isinstance(x, (int, np.integer)) or isinstance(x, bool):
        raise FxRangeError(f"INT encode requires an integer, got {x!r}")
    if not (0 <= x <= RAW_MAX):
        raise FxRangeError(f"INT encode requires 0 <= x <= {RAW_MAX}, got {x}")
    return int(x)


def sat_add_raw(a, b):
    """Saturating 16-bit add on raw values; works on scalars and arrays."""
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        # upcast first: uint16 + uint16 would wrap before the clip
        s = np.asarray(a, dtype=np.int64) + np.asarray(b, dtype=np.int64)
        return np.minimum(s, RAW_MAX)
    return min(int(a) + int(b), RAW_MAX)


def round_q16(wide: int) -> int:
    """Rescale a Q0.32-style product sum to Q0.16, round half to even."""
    q = wide >> 16
    rem = wide & 0xFFFF
    if rem > 0x8000 or (rem == 0x8000 and (q & 1) == 1):
        q += 1
    return q


def round_q16_array(wide: np.ndarray) -> np.ndarray:
    wide = np.asarray(wide, dtype=np.int64)
    q = wide >> 16
    rem = wide & 0xFFFF
    bump = (rem > 0x8000) | ((rem == 0x8000) & ((q & 1) == 1))
    return q + bump


@dataclass(frozen=True)
class Fx16:
    """A single 16-bit fixed point value tagged with its interpretation."""

    raw: int
    fmt: FxFormat

    def __post_init__(self):
        if not (0 <= self.raw <= RAW_MAX):
            raise FxRangeError(f"raw value out of range: {self.raw}")

    @property
    def value(self):
        if self.fmt is FxFormat.FRAC:
            return decode_frac(self.raw)
        return self.raw

    @property
    def is_m(self) -> bool:
        return self.fmt is FxFormat.INT and self.raw == M


def fx_encode(x, fmt: FxFormat) -> Fx16:
    if fmt is FxFormat.FRAC:
        return Fx16(encode_frac(x), fmt)
    return Fx16(encode_int(x), fmt)


def fx_decode(f: Fx16):
    return f.value


def fx_sat_add(a: Fx16, b: Fx16) -> Fx16:
    if a.fmt is not b.fmt:
        raise FxRangeError("saturating add requires matching formats")
    return Fx16(sat_add_raw(a.raw, b.raw), a.fmt)
