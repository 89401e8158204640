COMMANDS = ["construct", "diagnose", "density", "divergence", "sweep", "llt"]


def _config(command, kind):
    """
    Global registry of experiment defaults. Every key a config may set must
    appear here; strict parsing rejects anything else.
    """
    config = {}

    config["command"] = command
    config["name"] = command
    config["spec"] = None
    config["method"] = "auto"  # density route: auto, spectral, cf, gridconv
    config["threads"] = None  # None: SUBGAUSS_LAB_THREADS, else 1
    config["out_dir"] = "lab_output"
    config["formats"] = ["csv", "json"]
    config["tensorboard"] = False
    config["debug"] = False

    config["grid"] = {"L": 12.0, "points": 2**14 + 1}
    config["t_max"] = 20.0  # profile range for laws that are not periodic
    config["t_step"] = 1e-2
    config["J"] = 8  # cumulant order
    config["tolerances"] = {
        "profile": 1e-8,  # midpoint interpolation error of profiles
        "integral": 1e-8,  # density integral check
    }

    config["n"] = 1
    config["n_list"] = [16, 32, 64, 128, 256, 512, 1024]
    config["alphas"] = [0.5, 1.001, 2.0, 4.0, 8.0, 16.0, 32.0]
    config["a"] = 1.0
    config["tau0"] = 0.25
    config["c_window"] = 1.0
    config["t0_list"] = [0.5, 1.0, 2.0]
    config["x_samples"] = None  # tilted LLT samples; None: inside the critical zone
    config["tilt_n"] = [64, 256]

    if command == "llt":
        config["n_list"] = [16, 32, 64, 128, 256]
    if command == "density" and kind == "trig":
        config["method"] = "spectral"
    if command == "sweep" and kind in ("uniform", "wsum", "grid"):
        config["method"] = "cf"

    return config


def default_config(command, kind=None):
    assert command in COMMANDS, f"unknown command {command!r}; choose from {COMMANDS}"
    return _config(command, kind)


def known_keys():
    """Union of keys over all commands (nested keys as 'a.b')."""
    keys = set()
    for command in COMMANDS:
        for k, v in _config(command, None).items():
            keys.add(k)
            if isinstance(v, dict):
                keys.update(f"{k}.{kk}" for kk in v)
    return sorted(keys)
