"""Daily crypto strategy backtesting on top of the chainbt C++ core."""

import json
from typing import Any, Callable, Optional, Sequence

from . import _chainbt
from ._chainbt import (
    BackendError,
    ConfigError,
    DataError,
    Error,
    StrategyError,
    bollinger,
    daily_returns,
    ema,
    execute_action,
    macd,
    parse_action,
    sharpe,
    sma,
    total_return,
)

__all__ = [
    "BackendError",
    "ConfigError",
    "DataError",
    "Error",
    "StrategyError",
    "agent_run",
    "backtest",
    "bollinger",
    "compare",
    "daily_returns",
    "ema",
    "execute_action",
    "macd",
    "parse_action",
    "run_strategy",
    "sharpe",
    "sma",
    "total_return",
    "tune",
]


def _config(asset: str, split: Optional[str], strategy: Optional[str], params: Optional[dict],
            overrides: dict) -> str:
    cfg: dict[str, Any] = {"asset": asset, **overrides}
    if split is not None:
        cfg["split"] = split
    if strategy is not None:
        cfg["strategy"] = {"kind": strategy, "params": dict(params or {})}
    return json.dumps(cfg)


def backtest(asset: str, split: str, strategy: str, params: Optional[dict] = None, *,
             data_dir: str = "data", out_dir: str = "", **config: Any) -> dict:
    """Runs one strategy on one split and returns the run artifact.

    Extra keyword arguments override config keys such as fee_rate or capital.
    """
    return json.loads(_chainbt.backtest(_config(asset, split, strategy, params, config), data_dir, out_dir))


def tune(asset: str, strategy: str, *, data_dir: str = "data", out_dir: str = "", **config: Any) -> dict:
    """Grid-searches the strategy on the asset's validation split."""
    cfg = _config(asset, "validation", strategy, None, config)
    return json.loads(_chainbt.tune(cfg, data_dir, out_dir))


def compare(asset: str, strategies: Sequence[str], conditions: Sequence[str] = ("bearish", "sideways", "bullish"),
            *, fmt: str = "markdown", data_dir: str = "data", out_dir: str = "", **config: Any) -> str:
    """Renders the strategy by market-condition table for one asset."""
    cfg = _config(asset, None, None, None, config)
    return _chainbt.compare(cfg, data_dir, out_dir, list(strategies), list(conditions), fmt)


def agent_run(asset: str, split: str, *, mock: str = "", backend: str = "", ablation: str = "full",
              data_dir: str = "data", out_dir: str = "", **config: Any) -> dict:
    """Runs the agent pipeline against a mock script or a backend config file."""
    paths = {"mock": mock, "backend": backend}
    cfg = _config(asset, split, None, None, {"ablation": ablation, "paths": paths, **config})
    return json.loads(_chainbt.agent_run(cfg, data_dir, out_dir))


def run_strategy(market_csv: str, start: str, end: str, strategy: Callable[[dict], float], *,
                 fee_rate: float = 0.002, capital: float = 1_000_000.0, info_lag_days: int = 1) -> dict:
    """Backtests a Python callable.

    The callable receives day_index, date, today_open, opens (history plus
    today), cash and holdings, and returns a fraction in [-1, 1].
    """
    return json.loads(_chainbt.run_callable(market_csv, start, end, strategy, fee_rate, capital, info_lag_days))
