import importlib

from errors import ConfigError


def load_preset(name):
    """Load an experiment preset by name from presets/<name>.py and return its PRESET dict."""
    try:
        module = importlib.import_module(f"presets.{name}")
    except ModuleNotFoundError as exc:
        raise ConfigError(f"experiment preset '{name}' not found. Expected file: presets/{name}.py") from exc
    return {section: dict(values) for section, values in module.PRESET.items()}
