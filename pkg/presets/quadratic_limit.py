# theta-free quadratic loss: worst-case mean lambda x / (lambda - c) = 4/3 for x = 1.
PRESET = {
    "dataset": {"kind": "fixed", "d": 1, "points": (1.0,)},
    "loss": {"kind": "quadratic", "c": 0.5},
    "hyper": {"lam": 2.0, "epsilon": 0.1},
    "solver": {"name": "sdro_double", "T_out": 1, "eta": 0.0, "delta": 0.05,
               "wdro_inner_steps": 500, "wdro_ascent_rate": 0.1},
}
