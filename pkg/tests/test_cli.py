import json
from fractions import Fraction

import pytest

from scatter_density.cli import build_commands, main
from scatter_density.command import Command
from scatter_density.config import load_config, parse_config
from scatter_density.errors import ConfigError, ExhaustionError
from scatter_density.polybasis import KernelFamily
from scatter_density.sequences import ProviderKind

MULTIQUADRIC = {"family": "binomial-power", "q": 2, "r": "1/2"}
INTEGERS = {"kind": "integers"}


def read_json(path):
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


# Configuration

def test_parse_config_reads_exact_rationals():
    config = parse_config(
        '{"kernel": {"family": "binomial-power", "q": 2, "r": "3/2", "c": 0.5},'
        ' "provider": {"kind": "jittered-integers", "jitter": 0.25, "seed": 4},'
        ' "target": {"builtin": "runge"}, "epsilon": 0.001, "interval": [-1, "1/2"]}'
    )
    assert config.kernel.r == Fraction(3, 2)
    assert config.kernel.c == Fraction(1, 2)
    assert config.provider.kind is ProviderKind.JITTERED
    assert config.provider.jitter == Fraction(1, 4)
    assert config.epsilon == Fraction(1, 1000)
    assert config.interval == (-1, Fraction(1, 2))
    assert config.target.name == "runge"
    assert config.grid == 1001
    assert config.p == (1.0, 2.0)


@pytest.mark.parametrize("document", [
    "{",
    '{"provider": {"kind": "integers"}}',
    '{"kernel": {"family": "binomial-power", "q": 0}}',
    '{"kernel": {"family": "binomial-power", "shape": 1}}',
    '{"kernel": {"family": "gaussian"}}',
    '{"kernel": {"family": "inv-x-log"}, "grid": true}',
    '{"kernel": {"family": "inv-x-log"}, "interval": [1, 0]}',
    '{"kernel": {"family": "inv-x-log"}, "epsilon": 0}',
    '{"kernel": {"family": "inv-x-log"}, "p": [0.5]}',
    '{"kernel": {"family": "inv-x-log"}, "provider": {"kind": "jittered-integers", "jitter": 0.4}}',
    '{"kernel": {"family": "inv-x-log"}, "provider": {"kind": "explicit-list"}}',
    '{"kernel": {"family": "inv-x-log"}, "target": {"builtin": "sin", "polynomial": [1]}}',
    '{"kernel": {"family": "inv-x-log"}, "target": {"samples": {"x": [0], "y": [1]}}}',
])
def test_invalid_configs_are_rejected(document):
    with pytest.raises(ConfigError) as info:
        parse_config(document)
    assert info.value.exit_code == 2
    assert info.value.stage == "config"


def test_json_errors_report_position():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config('{"kernel":\n  nope}')


def test_precision_from_environment(monkeypatch):
    monkeypatch.setenv("SCATTER_PRECISION_BITS", "512")
    assert parse_config({"kernel": {"family": "inv-x-log"}}).precision_bits == 512
    monkeypatch.setenv("SCATTER_PRECISION_BITS", "lots")
    with pytest.raises(ConfigError):
        parse_config({"kernel": {"family": "inv-x-log"}})


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")


def test_config_requires_sections(write_config):
    config = load_config(write_config({"kernel": MULTIQUADRIC}))
    assert config.kernel.family is KernelFamily.BINOMIAL_POWER
    with pytest.raises(ConfigError, match="provider"):
        config.require("provider")


# Commands

def test_command_validation_reports_usage_errors():
    command = Command("demo", "demo", "Demo command", lambda config, N: {"N": N})
    command.required_parameters = ["N"]
    command.parameter_types = {"N": int}
    command.parameter_ranges = {"N": (1, 10)}

    success, result = command.execute(None, {})
    assert not success
    assert (result["exit_code"], result["stage"]) == (2, "usage")
    assert not command.execute(None, {"N": 0})[0]
    assert not command.execute(None, {"N": "3"})[0]

    success, result = command.execute(None, {"N": 3})
    assert success
    assert result["N"] == 3 and result["exit_code"] == 0
    assert result["command_id"] == "demo"


def test_command_maps_failures_to_exit_codes():
    def exhausted(config):
        raise ExhaustionError("list ran out")

    def broken(config):
        raise ValueError("bad value")

    assert Command("a", "a", "", exhausted).execute(None)[1]["exit_code"] == 3
    result = Command("b", "b", "", broken).execute(None)[1]
    assert result["exit_code"] == 1
    assert result["type"] == "ValueError"


def test_command_observers_see_outcomes():
    seen = []

    class Observer:
        def on_command_executed(self, command, status, result):
            seen.append((command.command_id, status))

    commands = build_commands(Observer())
    assert set(commands) == {"expand", "doubling", "solve", "approx", "certify"}
    commands["solve"].execute(None, {"mode": "cholesky", "N": 2})
    assert seen == [("solve", "validation_error")]
    assert commands["expand"].get_parameter_info()["required"] == ["k_max"]


def test_command_observer_can_be_removed():
    seen = []

    class Observer:
        def on_command_executed(self, command, status, result):
            seen.append(status)

    observer = Observer()
    command = Command("demo", "demo", "Demo command", lambda config: {})
    command.add_observer(observer)
    command.execute(None)
    command.remove_observer(observer)
    command.execute(None)
    assert seen == ["success"]


# Command line

def test_expand_binomial_prints_array(write_config, capsys):
    path = write_config({"kernel": MULTIQUADRIC})
    assert main(["expand", "--config", path, "--k-max", "1"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload == [
        {"k": 0, "coefficients": ["1"], "degree": 0, "leading": "1"},
        {"k": 1, "coefficients": ["0", "-1"], "degree": 1, "leading": "-1"},
    ]


def test_expand_log_kernel_to_file(write_config, tmp_path, capsys):
    path = write_config({"kernel": {"family": "inv-x-log"}})
    output = tmp_path / "expansion.json"
    assert main(["expand", "--config", path, "--k-max", "2", "--output", str(output)]) == 0
    assert capsys.readouterr().out == ""
    payload = read_json(output)
    assert payload["A"][1]["coefficients"] == ["-2"]
    assert payload["B"][2]["coefficients"] == ["0", "2"]
    assert payload["model"]["K"] == 1


def test_bad_kernel_exits_with_config_error(write_config):
    path = write_config({"kernel": {"family": "binomial-power", "q": 0, "r": "1/2"}})
    assert main(["expand", "--config", path, "--k-max", "3"]) == 2


def test_malformed_config_exits_with_config_error(write_config, tmp_path):
    assert main(["expand", "--config", write_config("{not json"), "--k-max", "3"]) == 2
    assert main(["expand", "--config", str(tmp_path / "missing.json"), "--k-max", "3"]) == 2


def test_doubling_command(write_config, capsys):
    path = write_config({"kernel": MULTIQUADRIC, "provider": INTEGERS})
    assert main(["doubling", "--config", path, "-M", "3", "-N", "3"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["nodes"] == ["4", "9", "19"]
    assert payload["sign"] == "positive"
    assert payload["separation"] == {"window": [-64, 64], "min_gap": "1"}


def test_doubling_exhaustion_exit_code(write_config):
    path = write_config({"kernel": MULTIQUADRIC, "provider": {"kind": "explicit-list", "list": [1, 2, 5]}})
    assert main(["doubling", "--config", path, "-M", "3", "-N", "2"]) == 3


def test_solve_vandermonde_command(write_config, capsys):
    path = write_config({"kernel": MULTIQUADRIC, "provider": INTEGERS})
    assert main(["solve", "--config", path, "--mode", "vandermonde", "-N", "3", "-M", "0"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["nodes"] == ["1", "3", "7"]
    assert payload["c"] == ["7/4", "-63/8", "49/8"]
    assert payload["a_tilde"] == ["7/4", "-21/8", "7/8"]
    assert payload["residual"] == "0"
    assert payload["exact"] is True


def test_solve_rejects_empty_block(write_config):
    path = write_config({"kernel": MULTIQUADRIC, "provider": INTEGERS})
    assert main(["solve", "--config", path, "-N", "0"]) == 2


def test_solve_log_alternant_command(write_config, capsys):
    path = write_config({"kernel": {"family": "inv-x-log"}, "provider": INTEGERS})
    assert main(["solve", "--config", path, "--mode", "log-alternant", "-N", "2", "-M", "15"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["nodes"] == ["16", "33", "67"]
    assert payload["gap_products"][0] == "737/289"
    assert all(Fraction(p) <= 4 for p in payload["gap_products"])
    assert float(payload["residual"]) < 2.0 ** -128
    assert len(payload["a_tilde"]) == 3


def approx_config(write_config, target, epsilon="1/1000", grid=201):
    return write_config({
        "kernel": MULTIQUADRIC,
        "provider": INTEGERS,
        "target": target,
        "epsilon": epsilon,
        "grid": grid,
    })


def test_approx_and_certify_round_trip(write_config, tmp_path):
    path = approx_config(write_config, {"polynomial": [0, "1/2"]})
    certificate = tmp_path / "certificate.json"
    samples = tmp_path / "samples.csv"
    assert main(["approx", "--config", path, "--certificate", str(certificate), "--samples", str(samples)]) == 0

    recorded = read_json(certificate)
    assert recorded["success"] is True
    assert recorded["sup_error"] < 1e-3
    assert recorded["grid_size"] == 201
    assert len(recorded["combination"]["terms"]) == 4
    assert samples.read_text(encoding="utf-8").splitlines()[0] == "x,f,s,abs_err"
    assert main(["certify", str(certificate)]) == 0

    recorded["sup_error"] = recorded["sup_error"] * 2
    certificate.write_text(json.dumps(recorded), encoding="utf-8")
    assert main(["certify", str(certificate)]) == 1


def test_approx_zero_target(write_config, tmp_path):
    path = approx_config(write_config, {"polynomial": []})
    certificate = tmp_path / "zero.json"
    samples = tmp_path / "zero.csv"
    assert main(["approx", "--config", path, "--certificate", str(certificate), "--samples", str(samples)]) == 0
    recorded = read_json(certificate)
    assert recorded["sup_error"] == 0.0
    assert recorded["combination"]["terms"] == []
    assert main(["certify", str(certificate), "--samples", str(samples)]) == 0


def test_approx_budget_exit_code(write_config, tmp_path):
    path = approx_config(write_config, {"builtin": "abs"}, epsilon="1e-9")
    certificate = tmp_path / "budget.json"
    assert main(["approx", "--config", path, "--certificate", str(certificate),
                 "--samples", str(tmp_path / "budget.csv")]) == 5
    assert not certificate.exists()


def test_approx_requires_target(write_config):
    path = write_config({"kernel": MULTIQUADRIC, "provider": INTEGERS, "epsilon": 0.01})
    assert main(["approx", "--config", path]) == 2


def test_certify_missing_certificate(tmp_path):
    assert main(["certify", str(tmp_path / "absent.json")]) == 2
