import pytest

from wrsn_sched.config import THREADS_ENV, SchedConfig, load_config, read_config_file
from wrsn_sched.errors import ConfigError
from wrsn_sched.instances import Variant


def test_defaults():
    config = load_config(environ={})
    assert config.variant_enum is Variant.P2_FULLY_CHARGING
    assert config.solvers == ("greedy", "random")
    assert config.threads == 1


def test_file_environment_and_overrides(tmp_path):
    path = tmp_path / "sched.conf"
    path.write_text("# sweep setup\nvariant = p3\nn = 12  # nodes\nsolvers = dp, acs\nvalues = 1,2\nrequire-feasible = yes\n")
    config = load_config(path, environ={THREADS_ENV: "4"}, overrides={"n": 20, "seed": None})
    assert config.variant == "p3"
    assert config.n == 20
    assert config.seed == 0
    assert config.solvers == ("dp", "acs")
    assert config.values == (1.0, 2.0)
    assert config.require_feasible is True
    assert config.threads == 4


@pytest.mark.parametrize(
    "text",
    ["colour = blue\n", "n = many\n", "just words\n", "require_feasible = maybe\n", "k = 1.5\n"],
)
def test_bad_config_file(tmp_path, text):
    path = tmp_path / "bad.conf"
    path.write_text(text)
    with pytest.raises(ConfigError):
        read_config_file(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.conf", environ={})


@pytest.mark.parametrize(
    "overrides",
    [dict(variant="p9"), dict(n=0), dict(dt=0.0), dict(repetitions=0), dict(p2_reward="distance")],
)
def test_validation(overrides):
    with pytest.raises(ConfigError):
        load_config(environ={}, overrides=overrides)
    with pytest.raises(ConfigError):
        load_config(environ={THREADS_ENV: "0"})


def test_gen_params():
    params = SchedConfig(variant="p3", k=3, radius=100.0, side=300.0).gen_params()
    assert params.coverage_k == 3
    assert params.sensing_radius == 100.0
    assert params.side == 300.0
    assert params.transfer_rate == 20.0
    assert SchedConfig(variant="p2", ie=5e4).gen_params().energy_capacity == 5e4
    assert SchedConfig(variant="p1", timespan=600.0).gen_params().timespan == 600.0


def test_binary_config_file(tmp_path):
    path = tmp_path / "sched.conf"
    path.write_bytes(b"variant = p3\n\xff\xfe\n")
    with pytest.raises(ConfigError):
        read_config_file(path)
