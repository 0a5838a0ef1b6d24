import json

import pytest

from levyheat import cli
from levyheat.config import DEFAULTS, load_scenario, parse_scenario, validate
from levyheat.errors import ConfigurationError

PERTURBATION = """
profile.family = "fractional"
profile.alpha = 1.0
potential.form = "constant"
potential.value = 1.0
time.t = 0.5
suites = ["perturbation"]
"""


def write(tmp_path, text, name="scenario.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_defaults_validate():
    sc = validate({})
    assert sc.suites == ()
    assert sc.profile().name == "fractional-1"
    assert sc.potential().form == "constant"
    assert set(sc.to_dict()) == set(DEFAULTS)


def test_nested_tables_flatten():
    sc = parse_scenario("[profile]\nfamily = 'tempered'\nalpha = 1.5\n[potential]\nform = 'indicator_well'\nvalue = 2.0\n")
    assert sc.profile().family == "tempered"
    assert sc.potential().radius == 1.0


def test_every_violation_is_listed():
    with pytest.raises(ConfigurationError) as exc:
        validate({"profile.alpha": -1.0, "grid.n": 1.5, "bogus.key": 1, "potential.form": "ring", "time.t": "soon"})
    msg = str(exc.value)
    for key in ("profile.alpha", "grid.n", "bogus.key", "potential.form", "time.t"):
        assert key in msg


@pytest.mark.parametrize(
    "raw, key",
    [
        ({"suites": ["oracle"]}, "requires 'perturbation'"),
        ({"suites": ["nonsense"]}, "unknown suite"),
        ({"time.horizons": [0.5, 2.0]}, "time.horizons"),
        ({"time.t": 2.0}, "time.t"),
        ({"time.fractions": [0.0, 1.0]}, "time.fractions"),
        ({"profile.alpha": 2.5}, "profile"),
        ({"profile.dim": 2, "potential.form": "constant", "grid.n": 64}, None),
    ],
)
def test_validation_cases(raw, key):
    if key is None:
        assert validate(raw).profile().dim == 2
        return
    with pytest.raises(ConfigurationError, match=key):
        validate(raw)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigurationError):
        load_scenario(tmp_path / "absent.toml")
    with pytest.raises(ConfigurationError):
        load_scenario(write(tmp_path, "profile.alpha = = 1"))


def test_usage_errors_exit_2(tmp_path, capsys):
    assert cli.main(["run", str(write(tmp_path, "profile.alpha = -1.0\nsuites = ['oracle']\n"))]) == 2
    err = capsys.readouterr().err
    assert "profile.alpha" in err and "requires 'perturbation'" in err


def test_empty_suites(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", str(write(tmp_path, "")), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert set(report) == {"timestamp"}


def test_conditions_scenario(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", str(write(tmp_path, 'suites = ["conditions"]\n')), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] and report["suites"]["conditions"]["passed"]


@pytest.fixture(scope="module")
def perturbation_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("runs")
    path = write(base, PERTURBATION)
    results = []
    for tag in ("a", "b"):
        status, report = cli.run_scenario(load_scenario(path), base / tag)
        results.append((status, report, base / tag))
    return results


def test_perturbation_scenario(perturbation_runs):
    status, report, out = perturbation_runs[0]
    assert status == 0
    thm = report["theorem1"]
    assert thm["ratio_bounds_ok"]
    assert thm["relative_kato"]["beta"] == pytest.approx(1.0, rel=0.05)
    for name in ("relative_kato.csv", "comparability.csv", "perturbed.bin"):
        assert (out / name).exists()
    schema = json.loads((out / "relative_kato.schema.json").read_text())
    assert schema


def test_runs_are_deterministic(perturbation_runs):
    (_, a, out_a), (_, b, out_b) = perturbation_runs
    a.pop("timestamp"), b.pop("timestamp")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    assert (out_a / "relative_kato.csv").read_text() == (out_b / "relative_kato.csv").read_text()


def test_diff_command(perturbation_runs, capsys):
    (_, _, out_a), (_, _, out_b) = perturbation_runs
    assert cli.main(["diff", str(out_a / "perturbed.bin"), str(out_b / "perturbed.bin"), "--tol", "0"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["max_relative_difference"] == 0.0


def test_dump_tables(tmp_path, capsys):
    path = write(tmp_path, "")
    assert cli.main(["dump-tables", str(path)]) == 0
    text = capsys.readouterr().out
    assert text.count("\n") > 100
    target = tmp_path / "table.csv"
    assert cli.main(["dump-tables", str(path), "--out", str(target)]) == 0
    same = target.read_bytes().decode() == text
    assert same


@pytest.mark.parametrize("env, arg, expected", [(None, None, 1), (None, 3, 3), ("2", 5, 2)])
def test_thread_override(monkeypatch, env, arg, expected):
    if env is None:
        monkeypatch.delenv("LEVYHEAT_THREADS", raising=False)
    else:
        monkeypatch.setenv("LEVYHEAT_THREADS", env)
    assert cli._threads(arg) == expected


def test_bad_thread_env(monkeypatch):
    monkeypatch.setenv("LEVYHEAT_THREADS", "many")
    with pytest.raises(ConfigurationError):
        cli._threads(None)
