import numpy as np
import pytest

from aoi_pomdp import build_belief_grid, solve_finite_horizon
from aoi_pomdp.config import ConfigError, bundled_config_path, load_config, parse_config
from aoi_pomdp.errors import NumericalError
from aoi_pomdp.storage import FormatError, load_policy, load_values, model_hash, read_header, save_policy, save_values


@pytest.fixture
def solved(channel, cost):
    return solve_finite_horizon(channel, cost, build_belief_grid(2, 12), 6)


def test_round_trip(tmp_path, channel, cost, solved):
    table, policy = solved
    mhash = model_hash(channel, cost)
    save_policy(tmp_path / "p.txt", policy, mhash, {"config_hash": "x"})
    save_values(tmp_path / "v.txt", table, mhash)
    p2, header = load_policy(tmp_path / "p.txt")
    t2, _ = load_values(tmp_path / "v.txt")
    np.testing.assert_array_equal(p2.actions, policy.actions)
    np.testing.assert_array_equal(t2.values, table.values)
    assert header == read_header(tmp_path / "p.txt")
    assert (header["n_c"], header["n_r"], header["N"], header["resolution"]) == (2, 3, 6, 12)
    assert header["model_hash"] == mhash


def test_model_hash_sensitivity(channel, cost):
    h = model_hash(channel, cost)
    assert h == model_hash(channel.with_lambda(0.5), cost)
    assert h != model_hash(channel.with_lambda(0.5000001), cost)
    assert h != model_hash(channel.with_matrix([[0.5, 0.5], [0.5, 0.5]]), cost)


def test_format_errors(tmp_path, channel, cost, solved):
    table, policy = solved
    path = tmp_path / "p.txt"
    save_policy(path, policy, model_hash(channel, cost))
    text = path.read_text()
    (tmp_path / "bad_version.txt").write_text(text.replace("version = 1", "version = 9"))
    with pytest.raises(FormatError):
        load_policy(tmp_path / "bad_version.txt")
    (tmp_path / "short.txt").write_text("\n".join(text.splitlines()[:-3]) + "\n")
    with pytest.raises(FormatError):
        load_policy(tmp_path / "short.txt")
    with pytest.raises(FormatError):
        load_values(path)


CONFIG = """
[system]
A = [[0.9974, 0.0539], [-0.1078, 0.1591]]
C = [[1.0, 0.0]]
R_w = [[0.25, 0.0], [0.0, 0.25]]
R_v = [[0.05]]
Sigma0 = [[1.0, 0.0], [0.0, 1.0]]

[channel]
Tc = "T1"
q = [0.2, 0.8]
lambda = 0.5
n_r = 3

[channel.matrices]
T1 = [[0.95, 0.05], [0.1, 0.9]]
T2 = [[0.5, 0.5], [0.5, 0.5]]

[solver]
horizon = 80
"""


def test_parse_defaults():
    cfg = parse_config(CONFIG)
    assert cfg.resolution == 100 and cfg.runs == 100 and cfg.seed == 0 and cfg.burn_in == 50
    assert cfg.formats == ("csv", "svg") and cfg.out_dir == "out"
    assert cfg.channel_name == "T1" and set(cfg.matrices) == {"T1", "T2"}
    np.testing.assert_array_equal(cfg.cost.energy, [[1.5, 1.0], [1.5, 1.0]])
    assert cfg.config_hash == parse_config(CONFIG + "\n# comment\n").config_hash


@pytest.mark.parametrize(
    "old, new, key",
    [
        ("C = [[1.0, 0.0]]", "C = [[1.0, 0.0, 2.0]]", "system"),
        ("A = [[0.9974, 0.0539], [-0.1078, 0.1591]]", "A = [[0.9974, 0.0539], [-0.1078]]", "system.A"),
        ("q = [0.2, 0.8]", "q = [0.2, 1.8]", "channel"),
        ("q = [0.2, 0.8]", "q = [0.2]", "channel.q"),
        ("lambda = 0.5", "lambda = 0.0", "channel"),
        ('Tc = "T1"', 'Tc = "T3"', "channel.Tc"),
        ("T2 = [[0.5, 0.5], [0.5, 0.5]]", "T2 = [[0.5, 0.6], [0.5, 0.5]]", "channel.matrices.T2"),
        ("n_r = 3", "n_r = 3\nretries = 2", "channel.retries"),
        ("horizon = 80", "horizon = 80\nresolution = 0", "solver.resolution"),
        ("horizon = 80", "", "solver.horizon"),
        ("R_v = [[0.05]]", "R_v = [[-0.05]]", "system"),
    ],
)
def test_config_errors_name_the_key(old, new, key):
    with pytest.raises(ConfigError) as info:
        parse_config(CONFIG.replace(old, new))
    assert info.value.key == key
    assert str(info.value).startswith(key)


def test_unknown_section_and_syntax():
    with pytest.raises(ConfigError):
        parse_config(CONFIG + "\n[extras]\nfoo = 1\n")
    with pytest.raises(ConfigError):
        parse_config(CONFIG + "\n[solver\n")


def test_energy_and_terminal():
    cfg = parse_config(CONFIG + "\n[cost]\nenergy_fresh = [0.0, 0.0]\nenergy_retransmit = [0.5, 0.0]\nterminal = [0.0, 0.0, 0.0, 0.0]\n")
    np.testing.assert_array_equal(cfg.cost.energy, [[0.5, 0.0], [0.0, 0.0]])
    np.testing.assert_array_equal(cfg.cost.terminal_trace_table, 0.0)
    with pytest.raises(ConfigError):
        parse_config(CONFIG + "\n[cost]\nenergy_fresh = [2.0, 2.0]\n")


def test_unstable_plant_is_numerical():
    text = CONFIG.replace("C = [[1.0, 0.0]]", "C = [[0.0, 1.0]]").replace("[-0.1078, 0.1591]", "[0.0, 0.1591]").replace("0.9974, 0.0539", "1.5, 0.0")
    with pytest.raises(NumericalError):
        parse_config(text)


def test_bundled_config():
    cfg = load_config("paper-section-5")
    assert bundled_config_path("paper-section-5").exists()
    assert cfg.horizon == 1000 and cfg.runs == 100 and cfg.channel.n_r == 3
    np.testing.assert_array_equal(cfg.channel.q, [0.2, 0.8])
    np.testing.assert_array_equal(cfg.matrices["T2"], [[0.5, 0.5], [0.5, 0.5]])


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.toml")
