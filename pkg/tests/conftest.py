"""Shared fixtures and the acceptance summary printed after the run."""
import pytest

from rieszlab.params import validate_params

_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title = mark.args
    ok = rep.passed if rep.when == "call" else not rep.failed
    prev = _RESULTS.get(number, (title, True))
    _RESULTS[number] = (title, prev[1] and ok)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}")


@pytest.fixture
def benchmark():
    """Benchmark set ``beta=2, d=2, p=1, sigma=1``."""
    return validate_params(2.0, 2, 1, 1.0)


# Small budgets so that every subcommand runs in about a second.
TINY = {
    "simulate": {"budget": {"n_steps": 64}, "simulate": {"horizon": 1.0, "coarse_step": 0.25}},
    "moment": {"budget": {"n_samples": 50, "n_steps": 64},
               "moment": {"orders": [1, 2], "fourier_samples": 5000}},
    "variational": {"budget": {"K": 256}, "variational": {"n_basis": 20, "n_freq": 200}},
    "tail": {"budget": {"n_samples": 8000, "n_steps": 32},
             "tail": {"rho": 1.0, "moment_orders": 2, "moment_samples": 2000}},
    "scaling-test": {"budget": {"n_samples": 200, "n_steps": 32}, "scaling": {"t_factor": 4.0}},
    "sobolev-check": {"sobolev": {"trials": 3, "n": 16}},
}


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(e) for e in v) + "]"
    return repr(v)


def write_config(path, kind, params=None, seed=1, tables=None):
    """Write a TOML config for ``kind`` and return its path."""
    params = params or {"beta": 2.0, "d": 2, "p": 2 if kind == "sobolev-check" else 1, "sigma": 1.0}
    lines = [f'kind = "{kind}"', f"seed = {seed}", "[params]"]
    lines += [f"{k} = {_toml_value(v)}" for k, v in params.items()]
    for name, body in (TINY[kind] if tables is None else tables).items():
        lines.append(f"[{name}]")
        lines += [f"{k} = {_toml_value(v)}" for k, v in body.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def tiny_configs(tmp_path):
    """Mapping kind -> path of a small config file."""
    return {k: write_config(tmp_path / f"{k}.toml", k) for k in TINY}
