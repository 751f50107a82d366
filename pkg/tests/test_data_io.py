import csv
import datetime as dt
import json
import math

import numpy as np
import pytest

from conftest import BS_REF, MATURITY, NIG_REF, RATE, SPOT
from lrlevy.calibration import CalibrationResult, TraceEntry
from lrlevy.data_io import (
    SHADOW_COLUMNS,
    calibration_from_dict,
    calibration_to_dict,
    emit_report,
    load_benchmark,
    load_option_chain,
    load_pair_history,
    parse_date,
    parse_number,
    read_json,
)
from lrlevy.errors import EmptyChain, IoError, ParseError
from lrlevy.fourier_pricing import FftConfig, carr_madan_prices
from lrlevy.levy_models import MarketLeg, RiskNeutralSetup
from lrlevy.shadow_rate import rolling_shadow_series


def write(path, text):
    path.write_text(text)
    return path


@pytest.mark.parametrize("text, want", [("1", 1.0), ("-2.5", -2.5), (".5", 0.5), ("1e-3", 1e-3), (" 7 ", 7.0)])
def test_parse_number(text, want):
    assert parse_number(text) == want


@pytest.mark.parametrize("text", ["1,000", "abc", "", "1.2.3", "nan", "0x10"])
def test_parse_number_rejects(text):
    with pytest.raises(ParseError):
        parse_number(text, 4, "mid")


def test_parse_error_carries_location():
    with pytest.raises(ParseError) as info:
        parse_number("1,5", 9, "strike")
    assert info.value.row == 9 and info.value.column == "strike"


def test_parse_date():
    assert parse_date("2024-03-01") == dt.date(2024, 3, 1)
    with pytest.raises(ParseError):
        parse_date("03/01/2024")


def test_well_formed_chain(tmp_path):
    f = write(tmp_path / "c.csv", "strike,maturity_years,kind,mid\n90,0.5,call,12.1\n100,0.5,call,5.6\n110,0.5,call,2.0\n")
    chain, report = load_option_chain(f, SPOT)
    assert report.rows_read == 3 and report.rows_accepted == 3
    assert report.violations == []
    assert [q.strike for q in chain.quotes] == [90.0, 100.0, 110.0]


def test_upper_bound_flag(tmp_path):
    f = write(tmp_path / "c.csv", "strike,maturity_years,kind,mid\n90,0.5,call,120\n100,0.5,call,5.6\n")
    chain, report = load_option_chain(f, SPOT)
    assert report.rules_for(2) == ["upper bound"]
    assert chain.quotes[0].weight == 0.0 and chain.quotes[1].weight == 1.0


def test_lower_bound_flag(tmp_path):
    f = write(tmp_path / "c.csv", "strike,maturity_years,kind,mid\n80,0.5,call,1.0\n")
    _, report = load_option_chain(f, SPOT)
    assert report.rules_for(2) == ["lower bound"]


def test_butterfly_flag_on_middle_row(tmp_path):
    f = write(tmp_path / "c.csv", "strike,maturity_years,kind,mid\n90,0.5,call,12\n100,0.5,call,9\n110,0.5,call,2\n")
    chain, report = load_option_chain(f, SPOT)
    assert report.rules_for(3) == ["butterfly"]
    assert report.rules_for(2) == [] and report.rules_for(4) == []
    assert chain.quotes[1].weight == 0.0


def test_parse_failures_rejected(tmp_path):
    f = write(tmp_path / "c.csv", "strike,maturity_years,kind,mid\n90,0.5,call,abc\n100,0.5,call,5.6\n")
    chain, report = load_option_chain(f, SPOT)
    assert len(chain.quotes) == 1
    assert report.rules_for(2) == ["parse"]


def test_empty_chain(tmp_path):
    f = write(tmp_path / "c.csv", "strike,maturity_years,kind,mid\n")
    with pytest.raises(EmptyChain):
        load_option_chain(f, SPOT)


def test_missing_file_and_column(tmp_path):
    with pytest.raises(IoError):
        load_option_chain(tmp_path / "nope.csv", SPOT)
    f = write(tmp_path / "c.csv", "strike,kind,mid\n90,call,1\n")
    with pytest.raises(ParseError):
        load_option_chain(f, SPOT)


def test_pair_alignment(tmp_path):
    f = write(
        tmp_path / "p.csv",
        "date,price_s,price_z\n2024-01-02,100,50\n2024-01-03,101,\n2024-01-04,102,51\n",
    )
    hist, report = load_pair_history(f)
    assert hist.dates == (dt.date(2024, 1, 2), dt.date(2024, 1, 4))
    assert report.rules_for(0) == ["unmatched date"]
    assert report.violations[0].detail == "2024-01-03"


def test_pair_unsorted_input_is_sorted(tmp_path):
    rows = [("2024-01-05", 3, 30), ("2024-01-02", 1, 10), ("2024-01-04", 2, 20)]
    f = write(tmp_path / "p.csv", "date,price_s,price_z\n" + "".join(f"{d},{s},{z}\n" for d, s, z in rows))
    hist, _ = load_pair_history(f)
    ordered = sorted(rows)
    assert [d.isoformat() for d in hist.dates] == [r[0] for r in ordered]
    np.testing.assert_array_equal(hist.price_s, [r[1] for r in ordered])


def test_pair_rejects_bad_prices(tmp_path):
    f = write(tmp_path / "p.csv", "date,price_s,price_z\n2024-01-02,-1,50\n2024-01-03,1,2\n2024-01-03,1,2\n")
    hist, report = load_pair_history(f)
    assert len(hist) == 1
    assert "nonpositive price" in report.rules_for(2)
    assert report.rules_for(4) == ["duplicate date"]


def test_benchmark(tmp_path):
    f = write(tmp_path / "b.csv", "date,yield\n2024-01-03,0.05\n2024-01-02,0.04\n")
    bench, report = load_benchmark(f)
    assert list(bench) == [dt.date(2024, 1, 2), dt.date(2024, 1, 3)]
    assert report.rows_accepted == 2


def sample_result():
    trace = [TraceEntry(0.02, 0.1, NIG_REF, 0.021), TraceEntry(0.021, float("nan"), NIG_REF, 0.021)]
    return CalibrationResult(NIG_REF, 0.021, float("nan"), 0.01, 2, trace, True, 0.15, 0.04)


def test_calibration_json_round_trip(tmp_path):
    res = sample_result()
    path = emit_report(res, tmp_path / "r.json")
    text = path.read_text()
    json.loads(text)  # strict JSON, no bare NaN
    assert "NaN" not in text.replace('"NaN"', "")
    back = calibration_from_dict(read_json(path))
    assert back.theta_star == res.theta_star
    assert back.trace[0] == res.trace[0]
    assert math.isnan(back.rmse) and back.iterations == 2 and back.converged
    assert json.dumps(calibration_to_dict(back), sort_keys=True) == json.dumps(calibration_to_dict(res), sort_keys=True)


def test_shadow_series_csv_schema(tmp_path):
    from conftest import common_shock_history

    series = rolling_shadow_series(common_shock_history(n=80), window=60)
    path = emit_report(series, tmp_path / "s.csv")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == SHADOW_COLUMNS == ("date", "r_bar", "diffusion", "jump_wedge", "flag")
    assert len(rows) == 1 + len(series)
    assert float(rows[1][1]) == series[0].r_bar


def test_price_grid_csv(tmp_path):
    cf = RiskNeutralSetup(BS_REF, MarketLeg(SPOT), RATE, MATURITY).cf
    grid = carr_madan_prices(cf, math.exp(-RATE * MATURITY), FftConfig(), (80.0, 120.0))
    path = emit_report(grid, tmp_path / "g.csv")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["log_strike", "strike", "price"]
    strikes = [float(r[1]) for r in rows[1:]]
    assert all(b > a for a, b in zip(strikes, strikes[1:]))
