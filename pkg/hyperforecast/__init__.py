"""hyperforecast runtime factory."""

import os
import logging

from .config import config_by_name

log = logging.getLogger("hf")

_LOGGER_NAMES = ("hf", "hf.core", "hf.data", "hf.structure", "hf.train", "hf.cli", "hf.tasks")


class Runtime:
    """Resolved runtime settings for one process (one CLI invocation or test session)."""

    def __init__(self, name, settings):
        self.name = name
        self.settings = settings

    def __getitem__(self, key):
        return self.settings[key]

    def get(self, key, default=None):
        return self.settings.get(key, default)

    @property
    def debug(self):
        return bool(self.settings.get("DEBUG"))


def _configure_logging(runtime):
    """Set package logger levels and attach the shared handler."""
    if runtime.debug:
        level = logging.DEBUG
    else:
        level = getattr(logging, str(runtime.get("LOG_LEVEL", "INFO")).upper(), logging.INFO)
    fmt = "[%(asctime)s] %(levelname)s %(name)s: %(message)s"
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(fmt, datefmt="%Y-%m-%d %H:%M:%S"))

    for logger_name in _LOGGER_NAMES:
        logging.getLogger(logger_name).setLevel(level)

    # children propagate to "hf"; one handler there avoids duplicate lines
    root = logging.getLogger("hf")
    if not root.handlers:
        root.addHandler(handler)


def _configure_numerics(runtime):
    from .core import tensor
    tensor.set_debug_checks(bool(runtime.get("DEBUG_CHECKS")))


def create_runtime(config_name=None):
    """Create and configure the process runtime."""
    if config_name is None:
        config_name = os.environ.get("HF_ENV", "dev") or "dev"

    if config_name not in config_by_name:
        logging.getLogger("hf").warning("Unknown HF_ENV=%r, falling back to 'prod'", config_name)
        config_name = "prod"

    cls = config_by_name[config_name]
    settings = {k: getattr(cls, k) for k in dir(cls) if k.isupper()}
    runtime = Runtime(config_name, settings)

    _configure_logging(runtime)
    _configure_numerics(runtime)
    log.debug("Runtime %s created (debug_checks=%s)", config_name, settings.get("DEBUG_CHECKS"))
    return runtime
