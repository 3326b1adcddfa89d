import pytest

from distaudit.config import load_text
from distaudit.errors import ConfigError
from distaudit.experiment import experiment_from_document

GOOD = """\
scenario:
  blocks: 4096
  error:
    fraction: 0.02
protocol:
  id: 3
  subtpas: 4
  near_range: 16
trials: 2
seed: 5
"""


def parse(text):
    return experiment_from_document(load_text(text, "exp.yaml"))


def test_good_config():
    cfg = parse(GOOD)
    assert cfg.scenario.blocks == 4096 and cfg.scenario.error_fraction == 0.02
    assert cfg.protocol.protocol == 3 and cfg.protocol.near_range == 16
    assert cfg.trials == 2 and cfg.report == "report.csv"


@pytest.mark.parametrize("old, new, line, fragment", [
    ("trials: 2", "trials: 0", 9, "trials"),
    ("  blocks: 4096", "  blocks: 4000", 2, "power of two"),
    ("  id: 3", "  id: 7", 6, "protocol.id"),
    ("  near_range: 16", "  near_range: -1", 8, "near_range"),
    ("  subtpas: 4", "  subtpas: four", 7, "expected int"),
    ("seed: 5", "seed: 5\nextra: 1", 11, "unknown key"),
    ("    fraction: 0.02", "    fraction: 0.02\n    count: 3", 5, "either"),
])
def test_errors_carry_lines(old, new, line, fragment):
    with pytest.raises(ConfigError) as exc:
        parse(GOOD.replace(old, new))
    assert exc.value.line == line
    assert fragment in str(exc.value)
    assert str(exc.value).startswith(f"exp.yaml:{line}:")


def test_missing_scenario():
    with pytest.raises(ConfigError):
        parse("trials: 1\n")


def test_syntax_error_line():
    with pytest.raises(ConfigError) as exc:
        load_text("a: 1\nb: [1, 2\n")
    assert exc.value.line is not None


def test_duplicate_key():
    with pytest.raises(ConfigError) as exc:
        load_text("a: 1\na: 2\n")
    assert exc.value.line == 2
