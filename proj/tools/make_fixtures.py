#!/usr/bin/env python3
"""Generate the synthetic sample dataset under data/.

Prices follow a seeded log-space Brownian bridge pinned to fixed opens on
split boundary days, so the split endpoints match published period stats
while everything in between is synthetic. Re-running rewrites identical
files.
"""

import argparse
import csv
import datetime as dt
import json
import math
import random
from pathlib import Path

FIRST_DAY = dt.date(2022, 11, 1)
LAST_DAY = dt.date(2023, 12, 1)

# (date, open) pins per asset: every split's first-day open and, on its end
# day, the period close (used as that day's open and close).
ANCHORS = {
    "BTC": [
        ("2023-01-19", 20977.48), ("2023-03-13", 20628.03),
        ("2023-04-12", 30462.48), ("2023-06-16", 25575.28),
        ("2023-06-17", 26328.68), ("2023-08-25", 26163.68),
        ("2023-10-01", 26967.40), ("2023-12-01", 37718.01),
    ],
    "ETH": [
        ("2023-01-13", 1417.13), ("2023-03-12", 1429.60),
        ("2023-04-12", 1892.94), ("2023-06-16", 1664.98),
        ("2023-06-20", 1734.79), ("2023-08-31", 1705.11),
        ("2023-10-01", 1671.00), ("2023-12-01", 2051.76),
    ],
    "SOL": [
        ("2023-01-14", 18.29), ("2023-03-12", 18.24),
        ("2023-04-12", 23.02), ("2023-06-16", 14.76),
        ("2023-07-08", 21.49), ("2023-08-31", 20.83),
        ("2023-10-01", 21.39), ("2023-12-01", 59.25),
    ],
}

DAILY_VOL = {"BTC": 0.025, "ETH": 0.03, "SOL": 0.045}
SUPPLY = {"BTC": 19.3e6, "ETH": 120.2e6, "SOL": 405e6}
TXN_UNIT = {
    "BTC": "total_value_transferred in BTC; avg_gas_price in sat/vB; total_gas_consumed in vbytes",
    "ETH": "total_value_transferred in ETH; avg_gas_price in Gwei; total_gas_consumed in gas",
    "SOL": "total_value_transferred in SOL; avg_gas_price in lamports/signature; total_gas_consumed in compute units",
}
TXN_BASE = {
    "BTC": (350_000, 800_000, 600_000, 25.0, 2.0e8),
    "ETH": (1_050_000, 450_000, 2_800_000, 25.0, 1.08e11),
    "SOL": (22_000_000, 1_200_000, 95_000_000, 5000.0, 4.0e10),
}
HEADLINES = [
    ("{asset} trades {dir} as traders weigh macro data", "Markets"),
    ("Exchange flows for {asset} turn {flow}", "Chain Desk"),
    ("Analysts split on {asset} outlook after {dir} session", "Daily Ledger"),
    ("{asset} developers publish network upgrade notes", "Protocol Wire"),
    ("Derivatives funding for {asset} turns {flow}", "Markets"),
]


def days():
    d = FIRST_DAY
    while d <= LAST_DAY:
        yield d
        d += dt.timedelta(days=1)


def bridge(rng, start_log, end_log, steps, vol):
    """Log prices strictly between two pins (steps - 1 interior points)."""
    walk = [0.0]
    for _ in range(steps):
        walk.append(walk[-1] + rng.gauss(0.0, vol))
    drift = end_log - start_log
    return [start_log + walk[i] - (walk[-1] - drift) * i / steps for i in range(1, steps)]


def open_path(asset, rng):
    all_days = list(days())
    index = {d: i for i, d in enumerate(all_days)}
    pins = sorted((index[dt.date.fromisoformat(d)], math.log(p)) for d, p in ANCHORS[asset])
    logs = [None] * len(all_days)
    vol = DAILY_VOL[asset]
    for i, lp in pins:
        logs[i] = lp
    first_i, first_lp = pins[0]
    for i in range(first_i - 1, -1, -1):
        logs[i] = logs[i + 1] - rng.gauss(0.0, vol)
    for (a, la), (b, lb) in zip(pins, pins[1:]):
        logs[a + 1:b] = bridge(rng, la, lb, b - a, vol)
    last_i, _ = pins[-1]
    for i in range(last_i + 1, len(all_days)):
        logs[i] = logs[i - 1] + rng.gauss(0.0, vol)
    return all_days, [math.exp(x) for x in logs]


def fmt(x, places):
    return f"{x:.{places}f}"


def write_market(asset, out_dir, rng):
    all_days, opens = open_path(asset, rng)
    places = 2 if opens[0] >= 100 else 4
    rows = []
    for i, d in enumerate(all_days):
        o = round(opens[i], places)
        c = round(opens[i + 1], places) if i + 1 < len(opens) else o
        hi = max(o, c) * (1 + abs(rng.gauss(0, DAILY_VOL[asset] / 2)))
        lo = min(o, c) * (1 - abs(rng.gauss(0, DAILY_VOL[asset] / 2)))
        vol = SUPPLY[asset] * o * 0.01 * math.exp(rng.gauss(0, 0.3))
        cap = SUPPLY[asset] * c
        rows.append([d.isoformat(), fmt(o, places), fmt(max(hi, o, c), places),
                     fmt(min(lo, o, c), places), fmt(c, places), fmt(vol, 0), fmt(cap, 0)])
    with open(out_dir / "market" / f"{asset}.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["date", "open", "high", "low", "close", "volume", "market_cap"])
        w.writerows(rows)
    return all_days, opens


def write_txn(asset, out_dir, rng, all_days):
    base = TXN_BASE[asset]
    with open(out_dir / "txn" / f"{asset}.csv", "w", newline="") as f:
        f.write(f"# unit: {TXN_UNIT[asset]}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["date", "num_transactions", "active_wallets", "total_value_transferred",
                    "avg_gas_price", "total_gas_consumed"])
        for d in all_days:
            vals = [b * math.exp(rng.gauss(0, 0.12)) for b in base]
            w.writerow([d.isoformat(), fmt(vals[0], 0), fmt(vals[1], 0), fmt(vals[2], 2),
                        fmt(vals[3], 4), fmt(vals[4], 0)])


def write_news(asset, out_dir, rng, all_days, opens):
    with open(out_dir / "news" / f"{asset}.jsonl", "w") as f:
        for i, d in enumerate(all_days):
            if rng.random() < 0.35:
                continue
            prev = opens[i - 1] if i else opens[i]
            up = opens[i] >= prev
            for _ in range(rng.randint(1, 3)):
                title, source = rng.choice(HEADLINES)
                words = {"asset": asset, "dir": "higher" if up else "lower",
                         "flow": "positive" if rng.random() < 0.5 else "negative"}
                text = (f"{title.format(**words)}. Synthetic sample article for {d.isoformat()}. "
                        f"{asset} opened near {opens[i]:.2f} USD. "
                        + "Market participants discussed liquidity, volatility and positioning. "
                        * rng.randint(1, 6))
                item = {"date": d.isoformat(), "source": source,
                        "title": title.format(**words), "text": text.strip()}
                f.write(json.dumps(item, sort_keys=True) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data")
    ap.add_argument("--seed", type=int, default=20231201)
    args = ap.parse_args()
    for sub in ("market", "txn", "news"):
        (args.out / sub).mkdir(parents=True, exist_ok=True)
    for k, asset in enumerate(sorted(ANCHORS)):
        rng = random.Random(args.seed + k)
        all_days, opens = write_market(asset, args.out, rng)
        write_txn(asset, args.out, rng, all_days)
        write_news(asset, args.out, rng, all_days, opens)


if __name__ == "__main__":
    main()
