"""Writes data/jhu_confirmed_synthetic.csv, a JHU-format cumulative file.

Daily counts for the main country follow the Poisson renewal model with a
piecewise-linear reproduction number, a weekly reporting pattern and a few
holiday reporting gaps that are caught up the next working day.
"""

import datetime as dt
import sys

import numpy as np
from scipy.stats import gamma

SEED = 20211206
START = dt.date(2021, 7, 1)
END = dt.date(2022, 2, 28)
TAU = 26


def serial_interval(mean=6.6, sd=3.5, tau=TAU):
    shape, scale = (mean / sd) ** 2, sd * sd / mean
    u = np.arange(1, tau + 1)
    w = gamma.cdf(u, shape, scale=scale) - gamma.cdf(u - 1, shape, scale=scale)
    return w / w.sum()


def reproduction_number(dates):
    knots = [
        (dt.date(2021, 7, 1), 0.95),
        (dt.date(2021, 8, 15), 1.02),
        (dt.date(2021, 10, 10), 1.05),
        (dt.date(2021, 11, 10), 0.97),
        (dt.date(2021, 12, 1), 1.12),
        (dt.date(2021, 12, 15), 1.45),
        (dt.date(2021, 12, 28), 1.10),
        (dt.date(2022, 1, 10), 0.82),
        (dt.date(2022, 2, 28), 0.95),
    ]
    x = np.array([(d - START).days for d, _ in knots], dtype=float)
    y = np.array([r for _, r in knots])
    t = np.array([(d - START).days for d in dates], dtype=float)
    return np.interp(t, x, y)


def simulate(rng, dates, level, weekly, gaps):
    phi = serial_interval()
    r = reproduction_number(dates)
    true = np.zeros(len(dates) + TAU)
    true[:TAU] = level
    for t in range(len(dates)):
        k = t + TAU
        lam = r[t] * phi @ true[k - TAU:k][::-1]
        true[k] = rng.poisson(lam)
    true = true[TAU:]
    reported = np.array(
        [rng.binomial(int(c), weekly[d.weekday()]) for c, d in zip(true, dates)], dtype=float
    )
    backlog = 0.0
    for t, d in enumerate(dates):
        if d in gaps:
            backlog += reported[t]
            reported[t] = 0.0
        elif backlog:
            reported[t] += backlog
            backlog = 0.0
    return reported.astype(np.int64)


def main(path):
    rng = np.random.default_rng(SEED)
    dates = [START + dt.timedelta(days=k) for k in range((END - START).days + 1)]
    weekly = [0.97, 1.0, 0.98, 0.97, 0.93, 0.78, 0.74]
    gaps = {dt.date(2021, 12, 25), dt.date(2021, 12, 26), dt.date(2022, 1, 1), dt.date(2022, 1, 2)}
    uk = simulate(rng, dates, 26000.0, weekly, gaps)

    rows = []
    # A small share of the counts is reported under overseas territories.
    shares = {"": 0.996, "Gibraltar": 0.002, "Isle of Man": 0.0015, "Bermuda": 0.0005}
    split = np.array([rng.multinomial(c, list(shares.values())) for c in uk])
    for k, (prov, _) in enumerate(shares.items()):
        rows.append((prov, "United Kingdom", 55.3781, -3.436, np.cumsum(split[:, k]) + 1000 * (k == 0)))
    for name, level, lat, lon in [("France", 8000.0, 46.2276, 2.2137), ("Germany", 9000.0, 51.1657, 10.4515)]:
        daily = simulate(rng, dates, level, [1.0, 1.0, 1.0, 1.0, 1.0, 0.6, 0.5], set())
        rows.append(("", name, lat, lon, np.cumsum(daily)))
    ireland = simulate(rng, dates, 1500.0, weekly, gaps)
    rows.append(("", "Ireland", 53.1424, -7.6921, np.cumsum(ireland)))

    header = ["Province/State", "Country/Region", "Lat", "Long"] + [
        f"{d.month}/{d.day}/{d.strftime('%y')}" for d in dates
    ]
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for prov, country, lat, lon, cum in rows:
            fields = [prov, country, f"{lat}", f"{lon}"] + [str(int(v)) for v in cum]
            f.write(",".join(fields) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/jhu_confirmed_synthetic.csv")
