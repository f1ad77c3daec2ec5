import os
import pathlib

import pytest

import dplcpp

ROOT = pathlib.Path(os.environ.get("DPL_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))
PROGRAMS = ROOT / "programs"

pytestmark = pytest.mark.skipif(dplcpp.Engine is None, reason="extension module not built")


def engine(name, models=""):
    return dplcpp.Engine((PROGRAMS / name).read_text(), models)


def test_alarm_network():
    e = engine("burglary.dpl")
    assert e.probability("calls(mary)") == pytest.approx(0.14, abs=1e-12)
    assert e.exact_probability("calls(mary)") == pytest.approx(0.14, abs=1e-12)


def test_alarm_gradient():
    p, grad = engine("burglary_learn.dpl").gradient("calls(mary)")
    assert p == pytest.approx(0.14, abs=1e-12)
    assert dict(grad) == pytest.approx({"earthquake": 0.45, "burglary": 0.4}, abs=1e-12)


def test_coin_game_with_table_models():
    e = engine("coin.dpl", (PROGRAMS / "coin.models").read_text())
    assert e.probability("win") == pytest.approx(0.96, abs=1e-12)


def test_open_query_answers():
    e = dplcpp.Engine("0.3::a(1). 0.6::a(2).\n")
    assert dict(e.answers("a(X)")) == pytest.approx({"a(1)": 0.3, "a(2)": 0.6})


def test_parameters_round_trip():
    e = engine("burglary_learn.dpl")
    text = e.parameters().replace("0.20000000000000001", "0.5")
    e.set_parameters(text)
    assert e.gradient("calls(mary)")[0] != pytest.approx(0.14)


def test_logic_learning():
    e = dplcpp.Engine("t(0.5)::a.\nb :- a.\n")
    csv = e.learn("b 0.9\n" * 8, "epochs = 20\naccumulation = 1\nlogic_lr = 0.1\nseed = 1\n")
    assert csv.splitlines()[0].startswith("epoch")
    assert e.probability("b") > 0.8


def test_parse_errors_raise():
    with pytest.raises(Exception):
        dplcpp.Engine("a :- .")


def test_pretty_print():
    assert dplcpp.pretty_print("a:-b,c.") == "a :- b, c.\n"
