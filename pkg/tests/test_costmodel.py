import numpy as np
import pytest

from conftest import rand_graph
from xbargraph.costmodel import (CostParams, ge_cycle_budget,
                                 load_cost_params, tally_costs)
from xbargraph.engine import EmptyStreamCounters, RunCounters
from xbargraph.programs import prepare_program, run_program
from xbargraph.tiling import TilingParams, pad_params, preprocess_edges


def _random_counters(rng):
    es = EmptyStreamCounters(*(int(rng.integers(0, 1000)) for _ in range(9)))
    return RunCounters(
        iterations=int(rng.integers(1, 10)),
        tiles_processed=int(rng.integers(0, 5000)),
        tiles_skipped_empty=int(rng.integers(0, 5000)),
        tiles_skipped_inactive=int(rng.integers(0, 5000)),
        ge_cycles=int(rng.integers(0, 50000)),
        cell_writes=int(rng.integers(0, 10 ** 6)),
        cell_reads=int(rng.integers(0, 10 ** 6)),
        adc_conversions=int(rng.integers(0, 10 ** 5)),
        regi_loads=int(rng.integers(0, 10 ** 5)),
        rego_reads=int(rng.integers(0, 10 ** 5)),
        rego_writes=int(rng.integers(0, 10 ** 5)),
        dst_writes=int(rng.integers(0, 10 ** 5)),
        empty_stream=es,
    )


def test_energy_and_time_categories_sum_to_totals():
    rng = np.random.default_rng(30)
    tiling = pad_params(100, 4, 2, 2, None)
    params = CostParams(t_reg=1e-12)
    for _ in range(50):
        counters = _random_counters(rng)
        for skip in (True, False):
            rep = tally_costs(counters, tiling, params, skip_empty=skip)
            assert rep.energy_joules == rep.energy_programming + \
                rep.energy_compute + rep.energy_adc + rep.energy_registers
            assert rep.time_seconds == pytest.approx(
                rep.time_programming + rep.time_compute + rep.time_registers,
                rel=1e-12)
            assert rep.skip_empty is skip


def test_zero_counters_cost_nothing():
    rep = tally_costs(RunCounters(), pad_params(10, 2, 1, 1, None))
    assert rep.time_seconds == 0.0 and rep.energy_joules == 0.0


def test_skip_off_charges_exactly_the_shadow_events():
    graph = rand_graph(np.random.default_rng(31), 60, 150)
    ordered = preprocess_edges(graph, pad_params(60, 4, 2, 2, None))
    prog = prepare_program("pagerank", ordered)
    res = run_program(prog, epsilon=None, max_iter=3)
    c = res.counters
    p = ordered.params
    assert c.empty_stream.tiles > 0
    on = tally_costs(c, p, skip_empty=True)
    off = tally_costs(c, p, skip_empty=False)
    assert off.time_seconds > on.time_seconds
    assert off.energy_joules > on.energy_joules
    es = c.empty_stream
    expect_dt = (es.tiles * (p.c + 1) * CostParams().t_write
                 + es.ge_cycles * CostParams().t_ge_cycle) / p.g
    assert off.time_seconds - on.time_seconds == pytest.approx(expect_dt)
    expect_de = (es.cell_writes * CostParams().e_write
                 + es.cell_reads * CostParams().e_read
                 + es.adc_conversions * CostParams().e_adc
                 + (es.regi_loads + es.rego_reads + es.rego_writes
                    + es.dst_writes) * CostParams().e_reg)
    assert off.energy_joules - on.energy_joules == pytest.approx(expect_de)


def test_overlapped_programming_hides_behind_compute():
    tiling = TilingParams(c=4, n=2, g=2, b=16, v=32)
    counters = RunCounters(tiles_processed=100, ge_cycles=100000,
                           cell_writes=10, cell_reads=10, adc_conversions=10)
    serial = tally_costs(counters, tiling)
    overlap = tally_costs(counters, tiling,
                          CostParams(overlap_program_compute=True))
    assert serial.time_seconds == pytest.approx(
        serial.time_programming + serial.time_compute)
    assert overlap.time_seconds == pytest.approx(
        max(overlap.time_programming, overlap.time_compute))
    assert overlap.time_seconds < serial.time_seconds


def test_negative_counters_rejected():
    tiling = pad_params(10, 2, 1, 1, None)
    with pytest.raises(ValueError, match="negative counter ge_cycles"):
        tally_costs(RunCounters(ge_cycles=-1), tiling)
    bad = RunCounters(empty_stream=EmptyStreamCounters(tiles=-5))
    with pytest.raises(ValueError, match="empty_stream.tiles"):
        tally_costs(bad, tiling)


def test_cost_params_validation():
    with pytest.raises(ValueError, match="t_write"):
        CostParams(t_write=0.0)
    with pytest.raises(ValueError, match="adc_rate"):
        CostParams(adc_rate=-1.0)
    with pytest.raises(ValueError, match="non-negative"):
        CostParams(e_reg=-1e-15)
    with pytest.raises(ValueError, match="crossbars_per_adc"):
        CostParams(crossbars_per_adc=0)


def test_write_read_energy_asymmetry():
    # programming a cell costs three and a half orders of magnitude more
    # than reading it; the model must preserve that imbalance
    p = CostParams()
    assert 3000 < p.e_write / p.e_read < 4000


def test_load_cost_params_parsing(tmp_path):
    text = [
        "# device overrides\n",
        "e_adc = 5e-12   # per conversion\n",
        "crossbars_per_adc=4\n",
        "serialize_slices = yes\n",
        "\n",
        "overlap_program_compute = FALSE\n",
    ]
    got = load_cost_params(text)
    assert got.e_adc == 5e-12
    assert got.crossbars_per_adc == 4 and isinstance(got.crossbars_per_adc, int)
    assert got.serialize_slices is True
    assert got.overlap_program_compute is False
    assert got.t_write == CostParams().t_write

    path = tmp_path / "cost.cfg"
    path.write_text("t_reg=2e-11\n")
    assert load_cost_params(str(path)).t_reg == 2e-11

    with pytest.raises(ValueError, match="unknown cost parameter"):
        load_cost_params(["t_wriet=1e-9\n"])
    with pytest.raises(ValueError, match="expected key=value"):
        load_cost_params(["just some words\n"])
    with pytest.raises(ValueError, match="bad boolean"):
        load_cost_params(["serialize_slices=maybe\n"])


def test_converter_budget_at_defaults():
    p = CostParams()
    b = ge_cycle_budget(p, 8, 8)
    assert b["conversions_per_cycle"] == 64
    assert b["capacity_per_adc"] == 64
    assert b["feasible"] and b["margin"] == 0
    assert b["adcs_needed"] == 1


def test_converter_budget_oversubscribed():
    p = CostParams()
    b = ge_cycle_budget(p, 8, 16)
    assert not b["feasible"] and b["margin"] == -64
    assert b["adcs_needed"] == 2 and b["feasible_with_cluster"]

    wide = ge_cycle_budget(p, 8, 32)
    assert wide["adcs_needed"] == 4
    assert wide["adcs_per_ge"] == 4
    assert wide["feasible_with_cluster"]


def test_converter_budget_rate_scaling():
    fast = ge_cycle_budget(CostParams(adc_rate=2.0e9), 8, 8)
    assert fast["capacity_per_adc"] == 128 and fast["margin"] == 64

    quad = ge_cycle_budget(CostParams(serialize_slices=True), 8, 8)
    assert quad["conversions_per_cycle"] == 256 and not quad["feasible"]

    with pytest.raises(ValueError):
        ge_cycle_budget(CostParams(), 0, 8)


def test_g_way_parallelism_divides_time():
    counters = RunCounters(tiles_processed=64, ge_cycles=64)
    narrow = tally_costs(counters, TilingParams(c=4, n=2, g=1, b=8, v=8))
    wide = tally_costs(counters, TilingParams(c=4, n=2, g=8, b=64, v=64))
    assert narrow.time_seconds == pytest.approx(8 * wide.time_seconds)
    assert narrow.energy_joules == wide.energy_joules
