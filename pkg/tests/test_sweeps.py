import pytest

from qithermo.sweeps import CHECKS, run_trial, sweep


@pytest.mark.parametrize("check", sorted(CHECKS))
def test_small_sweeps_pass(check):
    rep = sweep(check, trials=4, seed=7)
    assert len(rep.trials) == 4
    assert not rep.violations, rep.to_dict(per_trial=False)


def test_sweep_is_reproducible_and_thread_independent():
    a = sweep("lemma1", trials=6, seed=3, threads=1).to_dict()
    b = sweep("lemma1", trials=6, seed=3, threads=3).to_dict()
    assert a == b


def test_trial_replay_matches_sweep():
    rep = sweep("appendix", trials=5, seed=11)
    again = run_trial("appendix", 11, 3)
    assert again.metrics == rep.trials[3].metrics


def test_unknown_check():
    with pytest.raises(KeyError):
        sweep("nope", trials=1)


def test_aggregate_reports_extremes():
    rep = sweep("identities", trials=3, seed=0)
    agg = rep.aggregate()
    assert agg
    for stats in agg.values():
        assert stats["min"] <= stats["max"]
