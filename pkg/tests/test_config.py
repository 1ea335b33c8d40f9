import pytest

from gordonse.config import ConfigError, RunConfig, dump_config, parse_config

BASIC = """
# phase retrieval run
model.kind = phase_retrieval
model.sigma = 0.1
model.d = 150
model.n = 3000
algorithm.kind = gd_pr
algorithm.eta = 0.25
init.alpha0 = 0.8
run.T = 10
run.trials = 5
oracle.sigmas = 0, 0.3
"""


def test_parse_basic():
    cfg = parse_config(BASIC)
    assert cfg.model.d == 150 and cfg.model.sigma == 0.1
    assert cfg.algorithm.eta == 0.25
    assert cfg.kappa == 20
    assert cfg.oracle.sigmas == (0.0, 0.3)


def test_dump_round_trips():
    cfg = parse_config(BASIC)
    assert parse_config(dump_config(cfg)) == cfg


@pytest.mark.parametrize("text, needle", [
    ("model.kind = nope", "nope"),
    ("modl.d = 3", "section"),
    ("model.dims = 3", "unknown key"),
    ("model.d 3", "key = value"),
    ("model.d = three", "model.d"),
    ("algorithm.kind = am_mlr", "does not belong"),
    ("model.n = 50", "n > model.d"),
    ("init.alpha0 = 1.5", "alpha0"),
    ("run.trials = 0", "trials"),
    ("init.scheme = magic", "scheme"),
    ("predict.population = maybe", "boolean"),
    ("d = 3", "section prefix"),
])
def test_invalid_configs_are_rejected(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(text)


def test_defaults_validate():
    RunConfig().validate()
