"""Runtime configuration classes loaded from environment variables."""

import os


def _env_bool(name, default):
    raw = os.environ.get(name)
    if raw is None:
        return default
    return raw.strip().lower() in ("1", "true", "yes", "on")


class Config:
    """Base configuration."""
    DEBUG = False
    LOG_LEVEL = os.environ.get("HF_LOG_LEVEL", "INFO")
    OUTPUT_DIR = os.environ.get("HF_OUTPUT_DIR", "runs")
    DEFAULT_SEED = int(os.environ.get("HF_SEED", 0))

    # Re-check every tensor op for NaN/Inf (slow, catches divergence at the source)
    DEBUG_CHECKS = _env_bool("HF_DEBUG_CHECKS", False)

    # Depth of the background batch queue (0 disables the loader thread)
    PREFETCH_BATCHES = int(os.environ.get("HF_PREFETCH_BATCHES", 4))


class DevConfig(Config):
    """Local development."""
    DEBUG = True
    DEBUG_CHECKS = _env_bool("HF_DEBUG_CHECKS", True)


class ProdConfig(Config):
    """Long unattended training runs."""
    DEBUG = False


class TestConfig(Config):
    """Automated tests."""
    TESTING = True
    DEBUG_CHECKS = True
    OUTPUT_DIR = "runs-test"
    PREFETCH_BATCHES = 0


config_by_name = {
    "dev": DevConfig,
    "prod": ProdConfig,
    "test": TestConfig,
}
