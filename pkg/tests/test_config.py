import pytest

from efkl.config import RunConfig, W_EPS_MARGIN, load_config, parse_config_text
from efkl.errors import InvalidParameterError


def test_defaults():
    cfg = RunConfig()
    assert cfg.half_length() == 20.0 and cfg.nodes() == 2001
    w = RunConfig(potential="w_eps")
    assert w.half_length() == pytest.approx(1 / 0.4 + W_EPS_MARGIN)
    assert w.nodes() == 4001
    assert w.x_half_length() == w.half_length()


def test_parse_text_with_comments():
    text = """
    # run
    potential = w_eps
    eps = 0.3   # small
    n-trials = 12
    emit_csv = false
    """
    vals = parse_config_text(text)
    assert vals == {"potential": "w_eps", "eps": 0.3, "n_trials": 12, "emit_csv": False}


def test_load_config_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("beta = 2\nn = 1001\n")
    cfg = load_config(path, {"n": "501", "seed": "3"})
    assert (cfg.beta, cfg.n, cfg.seed) == (2.0, 501, 3)


@pytest.mark.parametrize("text", ["bogus = 1", "n = 50", "n = 1000", "eps = 1.5", "beta = -1",
                                  "variant = cubic", "emit_csv = maybe", "n = abc", "novalue"])
def test_rejections(text):
    with pytest.raises(InvalidParameterError):
        RunConfig(**parse_config_text(text))


def test_hash_is_stable_and_sensitive():
    a, b = RunConfig(beta=1.0), RunConfig(beta=1.0)
    assert a.hash() == b.hash()
    assert a.hash() != a.with_(seed=1).hash()
    assert len(a.hash()) == 16
