"""Crossbar cluster model: 4-bit cell slices, analog MAC, row-select add.

A 16-bit cell value is stored as four 4-bit slices across four physical
grids; slice k holds bits [4k, 4k+4).  A matrix-vector pass accumulates each
slice separately and recombines them with a shift-add, so the whole analog
pipeline reduces to exact integer arithmetic:

    wide[j] = sum_i cell[i][j] * input[i] + bias[j] * bias_input
    out[j]  = round_half_even(wide[j] / 2**16), saturated at 0xFFFF

One logical crossbar is (C+1) x C: C data rows plus one dedicated bias row.
A graph-engine cluster exposes N*G logical crossbars side by side, wide
enough for one subgraph tile of C x (C*N*G) cells.
"""

from dataclasses import dataclass

import numpy as np

from .fixedpoint import M, RAW_MAX, round_q16_array, sat_add_raw
from .tiling import TilingParams

N_SLICES = 4
SLICE_BITS = 4


def slice_values(values: np.ndarray) -> np.ndarray:
    """Split uint16 values (any shape) into 4-bit digits.

    Returns shape (4,) + values.shape with slice index 0 holding the least
    significant digit.
    """
    values = np.asarray(values, dtype=np.uint16)
    shifts = np.arange(N_SLICES, dtype=np.uint16).reshape(
        (N_SLICES,) + (1,) * values.ndim) * SLICE_BITS
    return ((values[None, ...] >> shifts) & 0xF).astype(np.uint8)


def recompose(digits: np.ndarray) -> np.ndarray:
    """Inverse of slice_values."""
    digits = np.asarray(digits, dtype=np.uint16)
    out = np.zeros(digits.shape[1:], dtype=np.uint16)
    for k in range(N_SLICES):
        out |= digits[k] << (SLICE_BITS * k)
    return out


def shift_add(d3, d2, d1, d0):
    """Recombine per-slice accumulator sums into the wide integer result."""
    d3 = np.asarray(d3, dtype=np.int64)
    return (d3 << 12) + (np.asarray(d2, np.int64) << 8) \
        + (np.asarray(d1, np.int64) << 4) + np.asarray(d0, np.int64)


@dataclass
class CellSlice:
    """One 4-bit slice grid of a single logical crossbar."""

    digits: np.ndarray          # (C+1, C) uint8, bias row last
    slice_index: int


def slice_matrix(values: np.ndarray, bias_row: np.ndarray | None = None):
    """Slice a tile matrix (rows x cols) into per-crossbar 4-bit grids.

    Columns are split into logical crossbars of width equal to the row
    count ``C``; a zero bias row is appended when none is given.  Returns a
    list over crossbars, each a list of 4 CellSlice objects (least
    significant first).
    """
    values = np.asarray(values, dtype=np.uint16)
    c = values.shape[0]
    cols = values.shape[1]
    if cols % c != 0:
        raise ValueError("column count must be a multiple of the row count")
    if bias_row is None:
        bias_row = np.zeros(cols, dtype=np.uint16)
    full = np.vstack([values, np.asarray(bias_row, dtype=np.uint16)[None, :]])
    digits = slice_values(full)                      # (4, C+1, cols)
    out = []
    for cb in range(cols // c):
        chunk = digits[:, :, cb * c:(cb + 1) * c]
        out.append([CellSlice(chunk[k].copy(), k) for k in range(N_SLICES)])
    return out


@dataclass
class AdcModel:
    """Bitline converter.  ``resolution=None`` is the exact (lossless) mode;
    an integer resolution quantises each slice accumulator to that many bits
    across its full-scale range, for fidelity studies."""

    resolution: int | None = None
    rate: float = 1.0e9

    def convert(self, acc: np.ndarray, full_scale: int) -> np.ndarray:
        acc = np.asarray(acc, dtype=np.int64)
        if self.resolution is None or full_scale <= 0:
            return acc
        levels = (1 << self.resolution) - 1
        step = full_scale / levels
        q = np.round(acc.astype(np.float64) / step)
        return np.round(q * step).astype(np.int64)


class GECluster:
    """The graph-engine cluster: N*G logical crossbars of (C+1) x C cells.

    ``mode`` is "mac" (multiply-accumulate over fractional cells) or "add"
    (row-select saturating add over integer cells, empty cells = M).
    Counters are monotone across reprogramming.
    """

    def __init__(self, params: TilingParams, mode: str,
                 adc: AdcModel | None = None):
        if mode not in ("mac", "add"):
            raise ValueError(f"unknown mode {mode!r}")
        self.params = params
        self.mode = mode
        self.adc = adc or AdcModel()
        self.n_crossbars = params.n * params.g
        # slabs[cb, slice, row, col]; row params.c is the bias row
        self.slabs = np.zeros(
            (self.n_crossbars, N_SLICES, params.c + 1, params.c),
            dtype=np.uint8)
        self.programmed = None
        self.cell_writes = 0
        self.activations = 0

    @property
    def cells_per_program(self) -> int:
        c = self.params.c
        return self.n_crossbars * N_SLICES * (c + 1) * c

    def program(self, values: np.ndarray, bias_row: np.ndarray | None = None,
                coords=None) -> None:
        """Program one tile: values (C, C*N*G) plus an optional bias row.

        In add mode zero-valued cells are raised to M so that absent edges
        stay absorbing under the row-select add.
        """
        p = self.params
        values = np.asarray(values, dtype=np.uint16)
        if values.shape != (p.c, p.tile_cols):
            raise ValueError(f"tile shape {values.shape} does not match params")
        if self.mode == "add":
            values = np.where(values == 0, np.uint16(M), values)
        if bias_row is None:
            bias_row = np.zeros(p.tile_cols, dtype=np.uint16)
        full = np.vstack([values, np.asarray(bias_row, np.uint16)[None, :]])
        digits = slice_values(full)                   # (4, C+1, tile_cols)
        # regroup columns into crossbars: (cb, slice, row, col)
        self.slabs = digits.reshape(
            N_SLICES, p.c + 1, self.n_crossbars, p.c).transpose(2, 0, 1, 3).copy()
        self.programmed = coords
        self.cell_writes += self.cells_per_program

    def mvm_mac(self, inputs: np.ndarray, bias_input: int = 0) -> np.ndarray:
        """One parallel MAC pass: C raw inputs in, C*N*G raw outputs out."""
        if self.mode != "mac":
            raise ValueError("mvm_mac requires mac mode")
        p = self.params
        inputs = np.asarray(inputs, dtype=np.int64)
        if inputs.shape != (p.c,):
            raise ValueError("input length must equal C")
        drive = np.concatenate([inputs, np.int64([bias_input])])
        # per-slice bitline sums: acc[cb, slice, col]
        acc = np.einsum("ksrc,r->ksc",
                        self.slabs.transpose(1, 0, 2, 3).astype(np.int64),
                        drive)
        full_scale = int(0xF * drive.max()) * (p.c + 1) if drive.size else 0
        acc = self.adc.convert(acc, full_scale)
        wide = shift_add(acc[3], acc[2], acc[1], acc[0])   # (cb, C)
        out = np.minimum(round_q16_array(wide), RAW_MAX)
        self.activations += 1
        return out.reshape(-1).astype(np.uint16)

    def row_add(self, row: int, dist_u: int,
                active_cols: np.ndarray | None = None) -> np.ndarray:
        """Row-select pass: saturating add of one source's distance onto its
        stored edge weights.  Inactive columns report M (no candidate)."""
        if self.mode != "add":
            raise ValueError("row_add requires add mode")
        p = self.params
        if not (0 <= row < p.c):
            raise ValueError(f"row {row} outside [0, {p.c})")
        if not (0 <= dist_u <= RAW_MAX):
            raise ValueError("dist_u outside 16-bit range")
        weights = recompose(self.slabs[:, :, row, :].transpose(1, 0, 2))
        out = sat_add_raw(weights.astype(np.int64).reshape(-1), dist_u)
        if active_cols is not None:
            out = np.where(np.asarray(active_cols, dtype=bool), out, np.int64(M))
        self.activations += 1
        return out.astype(np.uint16)
