import math
import os
from pathlib import Path

import pytest

import chainbt

ROOT = Path(os.environ.get("CHAINBT_SOURCE_DIR", Path(__file__).resolve().parents[2]))
DATA = str(ROOT / "data")
FIXTURES = ROOT / "tests" / "fixtures"


def test_indicators_match_hand_values():
    prices = [1.0, 2.0, 3.0, 4.0]
    assert chainbt.sma(prices, 2) == [None, 1.5, 2.5, 3.5]
    ema = chainbt.ema(prices, 3)
    assert ema[0] == 1.0
    assert ema[1] == pytest.approx(1.5)
    bands = chainbt.bollinger([5.0] * 3, 3)
    assert bands[:2] == [None, None]
    assert bands[2] == (5.0, 5.0, 5.0)
    assert len(chainbt.macd(prices)) == 4


def test_metrics_and_execution():
    assert chainbt.daily_returns([100.0, 110.0]) == [pytest.approx(0.1)]
    value, degenerate = chainbt.sharpe([0.01, 0.01, 0.01])
    assert value == 0 and degenerate
    assert chainbt.total_return(100.0, 125.0) == pytest.approx(25.0)
    cash, holdings, fee = chainbt.execute_action(1_000_000.0, 0.0, 100.0, 1.0, 0.001)
    assert cash == 0.0
    assert holdings == pytest.approx(9990.0)
    assert fee == pytest.approx(1000.0)


def test_parse_action():
    assert chainbt.parse_action("Reasoning...\nAction: -0.25") == pytest.approx(-0.25)
    assert chainbt.parse_action("no decision here") is None


def test_errors_map_to_python_types():
    with pytest.raises(chainbt.ConfigError):
        chainbt.sma([1.0, 2.0], 0)
    with pytest.raises(chainbt.Error):
        chainbt.backtest("ETH", "bullish", "sma", data_dir="/no/such/dir")
    assert issubclass(chainbt.DataError, chainbt.Error)


def test_buy_and_hold_tracks_the_trend():
    art = chainbt.backtest("ETH", "bullish", "buy_and_hold", data_dir=DATA, fee_rate=0.0)
    assert art["summary"]["total_return_pct"] == pytest.approx(22.59, abs=0.5)
    assert art["config"]["strategy"]["kind"] == "buy_and_hold"


def test_python_callable_strategy_matches_builtin():
    hold = chainbt.run_strategy(f"{DATA}/market/ETH.csv", "2023-10-01", "2023-12-01",
                                lambda day: 1.0 if day["day_index"] == 0 else 0.0,
                                fee_rate=0.0)
    art = chainbt.backtest("ETH", "bullish", "buy_and_hold", data_dir=DATA, fee_rate=0.0)
    assert hold["final_net_worth"] == pytest.approx(art["final_net_worth"], rel=1e-12)
    seen = []
    chainbt.run_strategy(f"{DATA}/market/ETH.csv", "2023-10-01", "2023-10-04",
                         lambda day: seen.append(day["today_open"] == day["opens"][-1]) or 0.0)
    assert seen == [True, True, True]


def test_tune_and_compare(tmp_path):
    report = chainbt.tune("SOL", "slma", data_dir=DATA, out_dir=str(tmp_path))
    assert len(report["grid"]) == 10
    assert Path(report["_path"]).exists()
    table = chainbt.compare("ETH", ["buy_and_hold", "sma"], data_dir=DATA)
    lines = table.strip().splitlines()
    assert len(lines) == 4
    assert lines[2].startswith("| Buy and hold")


def test_agent_run_with_mock():
    art = chainbt.agent_run("ETH", "bullish", mock=str(FIXTURES / "mock_eth_bullish.jsonl"), data_dir=DATA)
    assert math.isfinite(art["summary"]["sharpe"])
    with pytest.raises(chainbt.BackendError):
        chainbt.agent_run("ETH", "bullish", mock=str(FIXTURES / "mock_outage.jsonl"), data_dir=DATA)
