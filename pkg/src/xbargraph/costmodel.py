"""Latency and energy estimates derived from engine event counters.

Device constants default to published ReRAM figures: 29.31 ns / 50.88 ns
cell read/write, 1.08 pJ / 3.91 nJ per-cell read/write energy, a 64 ns
engine cycle, and a 1.0 GS/s converter.  Per-conversion and per-register
energies have no published value here; their defaults are explicit knobs and
are echoed into every report.

Time charges one row-parallel write latency per programmed tile row plus one
engine cycle per compute step, divided by the G-way column parallelism.
Programming and compute serialize unless ``overlap_program_compute`` is set.
When empty-tile skipping is configured off, the events those tiles would
have generated (tracked separately by the engine) are charged as well; the
functional result never changes either way.
"""

from dataclasses import dataclass, fields

from .engine import RunCounters
from .tiling import TilingParams


@dataclass(frozen=True)
class CostParams:
    """Device and accounting constants.  Times in seconds, energies in
    joules, rates in samples per second."""

    t_read: float = 29.31e-9
    t_write: float = 50.88e-9
    t_ge_cycle: float = 64e-9
    adc_rate: float = 1.0e9
    e_read: float = 1.08e-12
    e_write: float = 3.91e-9
    e_adc: float = 2.0e-12        # per conversion; no published figure
    e_reg: float = 0.1e-12        # per register access; no published figure
    t_reg: float = 0.0            # register access latency, usually hidden
    crossbars_per_adc: int = 8
    serialize_slices: bool = False
    overlap_program_compute: bool = False

    def __post_init__(self):
        for name in ("t_read", "t_write", "t_ge_cycle", "adc_rate",
                     "e_read", "e_write", "e_adc"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.e_reg < 0 or self.t_reg < 0:
            raise ValueError("register costs must be non-negative")
        if self.crossbars_per_adc < 1:
            raise ValueError("crossbars_per_adc must be >= 1")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def load_cost_params(source) -> CostParams:
    """Parse flat ``key=value`` lines (path or iterable) into CostParams.

    '#' starts a comment; unknown keys are an error so typos cannot
    silently keep a default.
    """
    if isinstance(source, (str, bytes)):
        with open(source) as fh:
            lines = fh.readlines()
    else:
        lines = list(source)
    types = {f.name: (f.type if isinstance(f.type, str) else f.type.__name__)
             for f in fields(CostParams)}
    overrides = {}
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ValueError(f"line {lineno}: expected key=value, got {text!r}")
        key, _, value = text.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in types:
            raise ValueError(f"line {lineno}: unknown cost parameter {key!r}")
        if types[key] == "bool":
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"line {lineno}: bad boolean {value!r}")
            overrides[key] = value.lower() in ("true", "1", "yes")
        elif types[key] == "int":
            overrides[key] = int(value)
        else:
            overrides[key] = float(value)
    return CostParams(**overrides)


@dataclass(frozen=True)
class CostReport:
    """Per-run cost figures; energy categories sum exactly to the total."""

    time_seconds: float
    time_programming: float
    time_compute: float
    time_registers: float
    energy_joules: float
    energy_programming: float
    energy_compute: float
    energy_adc: float
    energy_registers: float
    skip_empty: bool
    events: dict

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _validate_counters(counters: RunCounters) -> None:
    for f in fields(counters):
        v = getattr(counters, f.name)
        if f.name == "empty_stream":
            for g in fields(v):
                if getattr(v, g.name) < 0:
                    raise ValueError(f"negative counter empty_stream.{g.name}")
        elif v < 0:
            raise ValueError(f"negative counter {f.name}")


def tally_costs(counters: RunCounters, tiling: TilingParams,
                params: CostParams | None = None, *,
                skip_empty: bool = True) -> CostReport:
    """Convert counters into a cost report under the given constants."""
    params = params or CostParams()
    _validate_counters(counters)
    es = counters.empty_stream
    extra = 0 if skip_empty else 1
    tiles = counters.tiles_processed + extra * es.tiles
    cycles = counters.ge_cycles + extra * es.ge_cycles
    cell_writes = counters.cell_writes + extra * es.cell_writes
    cell_reads = counters.cell_reads + extra * es.cell_reads
    conversions = counters.adc_conversions + extra * es.adc_conversions
    reg_traffic = (counters.regi_loads + counters.rego_reads
                   + counters.rego_writes + counters.dst_writes
                   + extra * (es.regi_loads + es.rego_reads
                              + es.rego_writes + es.dst_writes))

    time_prog = tiles * (tiling.c + 1) * params.t_write / tiling.g
    time_compute = cycles * params.t_ge_cycle / tiling.g
    time_reg = reg_traffic * params.t_reg
    if params.overlap_program_compute:
        core = max(time_prog, time_compute)
    else:
        core = time_prog + time_compute
    energy_prog = cell_writes * params.e_write
    energy_compute = cell_reads * params.e_read
    energy_adc = conversions * params.e_adc
    energy_reg = reg_traffic * params.e_reg
    return CostReport(
        time_seconds=core + time_reg,
        time_programming=time_prog,
        time_compute=time_compute,
        time_registers=time_reg,
        energy_joules=energy_prog + energy_compute + energy_adc + energy_reg,
        energy_programming=energy_prog,
        energy_compute=energy_compute,
        energy_adc=energy_adc,
        energy_registers=energy_reg,
        skip_empty=skip_empty,
        events={"tiles_charged": tiles, "ge_cycles": cycles,
                "cell_writes": cell_writes, "cell_reads": cell_reads,
                "adc_conversions": conversions, "reg_traffic": reg_traffic},
    )


def ge_cycle_budget(params: CostParams, c: int, n: int) -> dict:
    """Can one converter keep up with a graph engine's bitline outputs?

    One engine cycle produces c*n bitline values (times 4 when per-slice
    conversion is serialized rather than recombined before sampling).  A
    single converter samples ``adc_rate * t_ge_cycle`` values per cycle.
    """
    if c < 1 or n < 1:
        raise ValueError("c and n must be >= 1")
    slices = 4 if params.serialize_slices else 1
    conversions = c * n * slices
    capacity = int(round(params.adc_rate * params.t_ge_cycle))
    adcs_needed = -(-conversions // capacity) if capacity else 0
    adcs_per_ge = -(-n // params.crossbars_per_adc)
    return {
        "conversions_per_cycle": conversions,
        "capacity_per_adc": capacity,
        "feasible": conversions <= capacity,
        "margin": capacity - conversions,
        "adcs_needed": adcs_needed,
        "crossbars_per_adc": params.crossbars_per_adc,
        "adcs_per_ge": adcs_per_ge,
        "feasible_with_cluster": conversions <= capacity * adcs_per_ge,
    }
