"""Regenerates german.csv: a synthetic stand-in for the German credit data.

Column names, category labels and group sizes follow the public dataset;
the values are drawn from simple hand-set distributions. Group sizes and
positive counts per (sex, age <= 25) cell are exact.
"""
import csv
from pathlib import Path

import numpy as np

CELLS = {  # (sex, young): (rows, positives)
    ("female", True): (105, 58),
    ("female", False): (205, 143),
    ("male", True): (85, 52),
    ("male", False): (605, 447),
}

CHECKING = ["<0 DM", "0-200 DM", ">=200 DM", "no account"]
HISTORY = ["no credits", "all paid", "existing paid", "delayed", "critical"]
PURPOSE = ["new car", "used car", "furniture", "radio/tv", "appliances", "repairs", "education", "business", "other"]
SAVINGS = ["<100 DM", "100-500 DM", "500-1000 DM", ">=1000 DM", "no savings account"]
EMPLOYMENT = ["unemployed", "<1 year", "1-4 years", "4-7 years", ">=7 years"]
DEBTORS = ["none", "co-applicant", "guarantor"]
PROPERTY = ["real estate", "savings agreement", "car", "unknown"]
PLANS = ["bank", "stores", "none"]
HOUSING = ["rent", "own", "for free"]
JOB = ["unskilled non-resident", "unskilled resident", "skilled", "highly skilled"]


def main():
    rng = np.random.default_rng(20240611)
    rows = []
    for (sex, young), (n, positives) in CELLS.items():
        age = rng.integers(19, 26, n) if young else np.clip(rng.gamma(6.0, 6.5, n).round() + 12, 26, 75).astype(int)
        checking = rng.choice(4, n, p=[0.27, 0.27, 0.06, 0.40])
        history = rng.choice(5, n, p=[0.04, 0.05, 0.53, 0.09, 0.29])
        savings = rng.choice(5, n, p=[0.60, 0.10, 0.06, 0.05, 0.19])
        employment = rng.choice(5, n, p=[0.06, 0.17, 0.34, 0.17, 0.26]) if not young else rng.choice(5, n, p=[0.10, 0.35, 0.45, 0.08, 0.02])
        duration = np.clip(rng.gamma(3.0, 7.0, n).round(), 4, 72).astype(int)
        amount = np.clip(rng.lognormal(7.6 + 0.025 * duration / 4, 0.6, n).round(), 250, 18500).astype(int)
        score = (
            1.1 * (checking == 3) + 0.6 * (checking == 2) - 0.5 * (checking == 0)
            + 0.5 * (history == 4) - 0.7 * (history <= 1)
            + 0.4 * (savings >= 3) + 0.3 * (savings == 4)
            + 0.3 * (employment >= 3) - 0.3 * (employment <= 1)
            - 0.035 * duration - 0.00008 * amount
            + rng.normal(0, 0.8, n)
        )
        good = np.zeros(n, dtype=bool)
        good[np.argsort(-score)[:positives]] = True
        for i in range(n):
            rows.append({
                "checking-account": CHECKING[checking[i]],
                "duration": int(duration[i]),
                "credit-history": HISTORY[history[i]],
                "purpose": PURPOSE[rng.integers(len(PURPOSE))],
                "credit-amount": int(amount[i]),
                "savings-account": SAVINGS[savings[i]],
                "employment-since": EMPLOYMENT[employment[i]],
                "installment-rate": int(rng.integers(1, 5)),
                "sex": sex,
                "other-debtors": DEBTORS[rng.choice(3, p=[0.9, 0.04, 0.06])],
                "residence-since": int(rng.integers(1, 5)),
                "property": PROPERTY[rng.choice(4, p=[0.28, 0.23, 0.33, 0.16])],
                "age": int(age[i]),
                "other-installment-plans": PLANS[rng.choice(3, p=[0.14, 0.05, 0.81])],
                "housing": HOUSING[rng.choice(3, p=[0.18, 0.71, 0.11])],
                "existing-credits": int(rng.choice([1, 2, 3, 4], p=[0.63, 0.33, 0.03, 0.01])),
                "job": JOB[rng.choice(4, p=[0.02, 0.2, 0.63, 0.15])],
                "people-liable": int(rng.choice([1, 2], p=[0.85, 0.15])),
                "telephone": ["none", "yes"][rng.choice(2, p=[0.6, 0.4])],
                "foreign-worker": ["yes", "no"][rng.choice(2, p=[0.96, 0.04])],
                "credit": "good" if good[i] else "bad",
            })
    order = rng.permutation(len(rows))
    out = Path(__file__).with_name("german.csv")
    with out.open("w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows[i] for i in order)


if __name__ == "__main__":
    main()
