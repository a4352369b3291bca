"""
Settings Module
Loads config/settings.yaml and turns it into run configuration
"""

import copy
import logging
from pathlib import Path
from typing import Any

import yaml

from .density_proxy import ProxySettings
from .tree_partitioner import PartitionConfig

logger = logging.getLogger(__name__)

DEFAULT_SETTINGS_PATH = Path(__file__).parent.parent / "config" / "settings.yaml"

DEFAULTS: dict[str, Any] = {
    "partition": {
        "p_star": 3,
        "min_L": 0.1,
        "min_slice_size_frac": 0.1,
        "epsilon": 0.001,
        "min_mse_decrease_frac": 0.01,
        "trim_fraction": 0.01,
        "gap_gating": "union",
        "seed": 0,
        "proxy": {"method": "gower-knn", "knn_m": None, "n_trees": 100, "subsample": 256, "block_rows": 512},
    },
    "positivity": {"sparsity_quantile": 0.25, "imbalance_ratio": 5.0},
    "render": {"point_size": 12.0, "hash_salt": "negative-space"},
    "logging": {"level": "INFO", "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s"},
}


def _merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class Settings:
    """YAML settings with built-in defaults and dotted-key lookup."""

    def __init__(self, path: Path | None = None):
        self.path = Path(path) if path is not None else DEFAULT_SETTINGS_PATH
        self.config = self._load_config()

    def _load_config(self) -> dict[str, Any]:
        if not self.path.exists():
            logger.debug(f"No settings file at {self.path}, using defaults")
            return copy.deepcopy(DEFAULTS)
        with open(self.path, encoding="utf-8") as f:
            loaded = yaml.safe_load(f) or {}
        return _merge(DEFAULTS, loaded)

    def get(self, key_path: str, default: Any | None = None) -> Any:
        """Nested value by dot notation, e.g. 'partition.proxy.method'."""
        value: Any = self.config
        for key in key_path.split("."):
            if not isinstance(value, dict) or key not in value:
                return default
            value = value[key]
        return value

    def partition_config(self, **overrides: Any) -> PartitionConfig:
        """
        PartitionConfig from the partition section; overrides win.

        Override keys are PartitionConfig or ProxySettings field names; None
        values are ignored.
        """
        section = copy.deepcopy(self.get("partition", {}))
        proxy = section.pop("proxy", {}) or {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ProxySettings.model_fields:
                proxy[key] = value
            else:
                section[key] = value
        return PartitionConfig(**section, proxy=ProxySettings(**proxy))

    def configure_logging(self, verbose: bool = False) -> None:
        level = "DEBUG" if verbose else str(self.get("logging.level", "INFO")).upper()
        logging.basicConfig(
            level=getattr(logging, level, logging.INFO),
            format=self.get("logging.format", DEFAULTS["logging"]["format"]),
        )
