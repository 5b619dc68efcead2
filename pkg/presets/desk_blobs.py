PRESET = {
    "dataset": {"kind": "gauss_blobs", "d": 2, "n_per_class": 100, "separation": 4.0, "noise": 0.5},
    "loss": {"kind": "logistic"},
    "hyper": {"lam": 20.0, "epsilon": 0.1},
    "solver": {"name": "sdro_single", "steps": 2000, "eta": 0.1, "tau": 0.05, "eta_upper": 2.0,
               "beta0": 0.1, "batch": 20, "M": 16, "T": 2000},
    "attack": {"radius_fractions": (0.0, 0.1, 0.2, 0.3, 0.4), "steps": 20, "step_fraction": 0.25},
}
