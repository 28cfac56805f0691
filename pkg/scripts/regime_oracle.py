"""Forecast floor for the driven station of the synthetic network.

For every test window, forecasts station 0 over the decoder horizon from the
drivers' known AR(1) + sinusoid dynamics:

* ``oracle`` knows the true regime sequence, including future switches;
* ``causal`` knows only the regime active at the last encoder step and, after
  the next possible switch, averages over the other drivers (the draw is
  uniform), i.e. the best forecast from information inside the window.

Compared against persistence and the historical mean (zero), in normalised
MSE percent.

    python3 scripts/regime_oracle.py [--seeds 1 2 3]
"""

import argparse

import numpy as np

from medrnn.data import SynthParams, fit_normalize, split, synth_generate_with_regimes, window_count


def driver_mean(x_now, t_now, phase, steps, p: SynthParams):
    """E[x_{t_now + m}] for m = 0..steps-1 given x_{t_now}, noise-free recursion."""
    out, v = [], x_now
    for m in range(steps):
        if m:
            v = p.ar * v + p.amplitude * np.sin(2 * np.pi * (t_now + m + phase) / p.period)
        out.append(v)
    return np.array(out)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--stations", type=int, default=6)
    ap.add_argument("--steps", type=int, default=6000)
    ap.add_argument("--T-enc", type=int, default=48)
    ap.add_argument("--T-dec", type=int, default=24)
    args = ap.parse_args()
    p = SynthParams()
    E, Te, Td = args.stations, args.T_enc, args.T_dec

    print(f"{'seed':>4} {'oracle':>8} {'causal':>8} {'persist':>8} {'zero':>8}   (station 0, test windows)")
    for seed in args.seeds:
        series, regime = synth_generate_with_regimes(E, args.steps, seed)
        tr, _, te = split(series)
        stats = fit_normalize(tr)
        mu, sd = stats.mean[0, 0], stats.std[0, 0]
        x = series.values[:, :, 0]
        off = series.T - te.T
        err = {"oracle": [], "causal": [], "persist": [], "zero": []}
        for n in range(window_count(te.T, Te, Td, Td)):
            t0 = off + n * Td + Te - 1  # last encoder step
            t = np.arange(t0 + 1, t0 + 1 + Td)
            target = (x[0, t] - mu) / sd
            # x0_t = gain * x_{r_t, t-1}; lag index m = t - 1 - t0
            means = {r: driver_mean(x[r, t0], t0, p.period * r / E, Td, p) for r in range(1, E)}
            oracle = np.array([p.driven_gain * means[regime[tt]][tt - 1 - t0] for tt in t])
            cur = regime[t0]
            next_switch = (t0 // p.regime_len + 1) * p.regime_len
            others = np.mean([means[r] for r in range(1, E) if r != cur], axis=0)
            causal = np.array([p.driven_gain * (means[cur] if tt < next_switch else others)[tt - 1 - t0]
                               for tt in t])
            err["oracle"].append(np.mean(((oracle - mu) / sd - target) ** 2))
            err["causal"].append(np.mean(((causal - mu) / sd - target) ** 2))
            err["persist"].append(np.mean(((x[0, t0] - mu) / sd - target) ** 2))
            err["zero"].append(np.mean(target ** 2))
        print(f"{seed:>4} " + " ".join(f"{100 * np.mean(v):>8.2f}" for v in err.values()))


if __name__ == "__main__":
    main()
