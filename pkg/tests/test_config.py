import pytest

from ocular import config


def test_defaults_valid():
    c = config.RunConfig()
    assert c.sf == 5.0 and c.iris().subpixel
    assert c.track(420.0).fps == 420.0


def test_file_and_override_precedence(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nsf = 2\nalpha = 0.3  # inline\nkf_q = 1,1,2,2\nsubpixel = false\n")
    c = config.load(p)
    assert (c.sf, c.alpha, c.kf_q, c.subpixel) == (2.0, 0.3, (1.0, 1.0, 2.0, 2.0), False)
    c = config.load(p, {"sf": "4", "seed": 7})
    assert (c.sf, c.seed, c.alpha) == (4.0, 7, 0.3)


def test_round_trip(tmp_path):
    c = config.RunConfig(seed=3, features="lbp", kf_r=(1.0, 1.0, 2.0, 2.0))
    p = tmp_path / "c.cfg"
    p.write_text(c.dumps())
    assert config.load(p) == c


@pytest.mark.parametrize("text", ["colour = red", "sf = 0.5", "alpha = 2", "canny_low = 120",
                                  "features = hog", "sf = fast", "kf_r = 1,1,1", "no equals sign",
                                  "subpixel = maybe"])
def test_rejected(text):
    with pytest.raises(config.ConfigError):
        config.load(overrides=config.parse(text))


def test_unknown_override():
    with pytest.raises(config.ConfigError):
        config.load(overrides={"speed": "1"})
