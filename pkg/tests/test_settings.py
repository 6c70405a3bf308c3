from config.settings import Settings


def test_defaults():
    s = Settings(_env_file=None)
    assert s.seed == 0
    assert s.bch_max_order == 6
    assert s.chart_radius == 0.5
    assert s.cc_starts == 8
    assert s.loop_tolerance == 1e-6
    assert len(s.eps_ladder) >= 4
    assert s.eps_ladder == sorted(s.eps_ladder, reverse=True)


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("CARNOT_KIT_THREADS", "4")
    monkeypatch.setenv("CARNOT_KIT_SEED", "17")
    s = Settings(_env_file=None)
    assert s.threads == 4
    assert s.seed == 17

