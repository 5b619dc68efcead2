# Four anchors in d=1 with mean 0.5; stationary point theta* = -lambda * mean = -1.
PRESET = {
    "dataset": {"kind": "fixed", "d": 1, "points": (0.2, 0.4, 0.6, 0.8)},
    "loss": {"kind": "linear"},
    "hyper": {"lam": 2.0, "epsilon": 0.1, "lsi_alpha": 10.0},
    "solver": {
        "name": "sdro_double",
        "eta": 0.01,
        "T_out": 20000,
        "delta": 0.05,
        "inner_tau": 0.1,
        "inner_steps": 60,
        "tau": 0.05,
        "eta_upper": 0.4,
        "beta0": 0.1,
        "batch": 2,
        "M": 64,
        "T": 50000,
    },
}
