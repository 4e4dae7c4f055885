import runpy
from pathlib import Path

import pytest

DEMOS = Path(__file__).resolve().parents[1] / "demos"


@pytest.mark.parametrize("name", [
    "closed_form_se.py",
    "monte_carlo_check.py",
    "optimize_surface.py",
    pytest.param("trends.py", marks=pytest.mark.slow),
])
def test_demo_runs(name, capsys):
    runpy.run_path(str(DEMOS / name), run_name="__main__")
    assert capsys.readouterr().out
