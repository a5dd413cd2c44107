import logging

import pytest

from src.utils.helpers import catch_exceptions, write_atomically


def test_write_atomically_creates_and_replaces(tmp_path):
    target = tmp_path / "nested" / "table.csv"
    write_atomically(target, "a,b\n")
    write_atomically(target, "c,d\n")
    assert target.read_text() == "c,d\n"
    assert [p.name for p in target.parent.iterdir()] == ["table.csv"]


def test_catch_exceptions_passes_results_through():
    @catch_exceptions
    def add(a, b):
        return a + b

    assert add(2, b=3) == 5
    assert add.__name__ == "add"


def test_catch_exceptions_logs_and_reraises(caplog):
    @catch_exceptions
    def broken():
        raise ValueError("bad input")

    with caplog.at_level(logging.ERROR, logger="ball_potentials"):
        with pytest.raises(ValueError, match="bad input"):
            broken()
    assert "broken" in caplog.text
    assert "ValueError - bad input" in caplog.text
