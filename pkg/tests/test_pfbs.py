import pytest
from hypothesis import given
from hypothesis import strategies as st

from hanet_cd.pfbs import (
    EpochPlan,
    SamplingSchedule,
    epoch_plan,
    full_plan,
    parse_schedule,
    plan_csv,
    select_samples,
)

N_FG, N_BG = 1200, 3336


def test_linear_increment_222():
    assert epoch_plan(SamplingSchedule.linear(15), 2, N_FG, N_BG) == EpochPlan(2, 1200, 222)
    assert epoch_plan(SamplingSchedule.linear(15), 1, N_FG, N_BG).bg_count == 0


def test_fixed_linear_increment_333():
    assert epoch_plan(SamplingSchedule.fixed_linear(10, 10), 11, N_FG, N_BG) == EpochPlan(11, 1200, 333)


def test_fixed_boundary():
    s = SamplingSchedule.fixed(15)
    assert epoch_plan(s, 15, N_FG, N_BG) == EpochPlan(15, 1200, 0)
    assert epoch_plan(s, 16, N_FG, N_BG) == EpochPlan(16, 1200, 3336)


def test_normal_is_full():
    for e in (1, 7, 100):
        assert epoch_plan(SamplingSchedule.normal(), e, N_FG, N_BG) == EpochPlan(e, 1200, 3336)


def test_last_ramp_epoch_and_clamp():
    s = SamplingSchedule.linear(15)
    assert epoch_plan(s, 15, N_FG, N_BG).bg_count == 14 * 222
    assert epoch_plan(s, 16, N_FG, N_BG).bg_count == N_BG


def test_empty_background_pool_collapses_to_normal():
    for s in (SamplingSchedule.fixed(3), SamplingSchedule.linear(4), SamplingSchedule.fixed_linear(2, 2)):
        assert epoch_plan(s, 1, 10, 0) == EpochPlan(1, 10, 0)


def test_bad_params():
    with pytest.raises(ValueError):
        SamplingSchedule.fixed(0)
    with pytest.raises(ValueError):
        SamplingSchedule("linear_y")
    with pytest.raises(ValueError):
        epoch_plan(SamplingSchedule.normal(), 0, 1, 1)


schedules = st.one_of(
    st.just(SamplingSchedule.normal()),
    st.builds(SamplingSchedule.fixed, st.integers(1, 40)),
    st.builds(SamplingSchedule.linear, st.integers(1, 40)),
    st.builds(SamplingSchedule.fixed_linear, st.integers(1, 30), st.integers(1, 30)),
)


@given(schedules, st.integers(0, 500), st.integers(0, 5000))
def test_monotone_and_converges(s, n_fg, n_bg):
    plans = full_plan(s, n_fg, n_bg, 100)
    bgs = [p.bg_count for p in plans]
    assert all(a <= b for a, b in zip(bgs, bgs[1:]))
    assert all(0 <= b <= n_bg and p.fg_count == n_fg for b, p in zip(bgs, plans))
    assert all(b == n_bg for b in bgs[s.full_epoch - 1:])


def test_select_length_and_uniqueness():
    fg = [f"f{i}" for i in range(1200)]
    bg = [f"b{i}" for i in range(3336)]
    ids = select_samples(EpochPlan(2, 1200, 222), fg, bg, seed=5)
    assert len(ids) == 1422 and len(set(ids)) == 1422
    assert set(fg) <= set(ids)


def test_select_deterministic():
    fg, bg = list(range(20)), list(range(100, 160))
    p = EpochPlan(3, 20, 17)
    assert select_samples(p, fg, bg, 9) == select_samples(p, fg, bg, 9)


def test_backgrounds_accumulate_over_100_epochs():
    fg = [f"f{i}" for i in range(120)]
    bg = [f"b{i}" for i in range(333)]
    s = SamplingSchedule.linear(60, seed=4)
    prev = set()
    for e in range(1, 101):
        ids = select_samples(epoch_plan(s, e, len(fg), len(bg)), fg, bg, s.seed)
        cur = {i for i in ids if i.startswith("b")}
        assert prev <= cur
        prev = cur
    assert prev == set(bg)


def test_select_bounds():
    with pytest.raises(ValueError):
        select_samples(EpochPlan(1, 3, 0), [1, 2], [], 0)


def test_plan_csv():
    text = plan_csv(full_plan(SamplingSchedule.fixed(15), N_FG, N_BG))
    lines = text.strip().split("\n")
    assert lines[0] == "epoch,fg_count,bg_count,total"
    assert len(lines) == 101
    assert lines[15] == "15,1200,0,1200"
    assert lines[16] == "16,1200,3336,4536"


def test_parse_schedule():
    assert parse_schedule("fixed-linear:10,10") == SamplingSchedule.fixed_linear(10, 10)
    assert parse_schedule("Linear:15").y == 15
    with pytest.raises(ValueError):
        parse_schedule("cosine:3")
