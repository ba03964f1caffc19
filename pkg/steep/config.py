"""
Configuration management for the steepness certifier.
"""
import os
import logging
import yaml
from typing import Dict, Any, Optional


logger = logging.getLogger(__name__)


class Config:
    """Central configuration management."""

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize configuration from YAML file.

        Args:
            config_path: Path to config.yaml file. Defaults to ../config.yaml
        """
        if config_path is None:
            # Default to config.yaml in project root
            base_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
            config_path = os.path.join(base_dir, 'config.yaml')

        self.config_path = config_path
        self._config = self._load_config()
        self._apply_env_overrides()

    def _load_config(self) -> Dict[str, Any]:
        """Load configuration from YAML file, layered over the defaults."""
        config = self._get_default_config()
        if not os.path.exists(self.config_path):
            return config

        try:
            with open(self.config_path, 'r') as f:
                loaded = yaml.safe_load(f)
        except Exception as e:
            logger.warning(f"Failed to load config from {self.config_path}: {e}")
            logger.warning("Using default configuration")
            return config

        for section, values in (loaded or {}).items():
            if isinstance(values, dict):
                config.setdefault(section, {}).update(values)
        return config

    def _get_default_config(self) -> Dict[str, Any]:
        """Return default configuration."""
        return {
            'search': {
                'starts': 128,
                'max_iters': 300,
                'polish_iters': 60,
                'step': 0.5,
                'grad_tol': 1e-14,
                'mode': 'certify',
                'seed': 42,
                'threads': 4
            },
            'certify': {
                'grid_resolution': 1,
                'max_cells': 10_000_000,
                'max_dimension': 8,
                'min_radius': 1e-6,
                'chunk_size': 16384
            },
            'tolerances': {
                'gradient': 1e-10,
                'witness': 1e-9,
                'margin': 1e-6,
                'rank': 1e-6,
                'eigen': 1e-9,
                'cluster_angle': 1e-3
            },
            'examples': {
                'elimination_samples': 1000
            },
            'logging': {
                'level': 'WARNING',
                'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
                'file': None
            }
        }

    def _apply_env_overrides(self):
        """Override config values from environment variables."""
        env_mappings = {
            'STEEP_THREADS': ('search', 'threads', int),
            'STEEP_SEED': ('search', 'seed', int),
            'STEEP_STARTS': ('search', 'starts', int),
            'STEEP_MODE': ('search', 'mode', str),
            'STEEP_MAX_CELLS': ('certify', 'max_cells', int),
            'STEEP_SAMPLES': ('examples', 'elimination_samples', int),
            'STEEP_LOG_LEVEL': ('logging', 'level', lambda x: x.upper())
        }

        for env_var, (section, key, converter) in env_mappings.items():
            value = os.environ.get(env_var)
            if value is not None:
                try:
                    self._config[section][key] = converter(value)
                except (ValueError, KeyError) as e:
                    logger.warning(f"Failed to apply env override {env_var}: {e}")

    def get(self, section: str, key: str, default=None):
        """
        Get configuration value.

        Args:
            section: Config section name
            key: Config key name
            default: Default value if not found

        Returns:
            Configuration value or default
        """
        try:
            return self._config[section][key]
        except KeyError:
            return default

    def section(self, name: str) -> Dict[str, Any]:
        """Get a copy of a whole config section."""
        return dict(self._config.get(name, {}))

    @property
    def starts(self) -> int:
        """Get number of random starts per witness search."""
        return self.get('search', 'starts', 128)

    @property
    def max_iters(self) -> int:
        """Get projected-gradient iterations per start."""
        return self.get('search', 'max_iters', 300)

    @property
    def polish_iters(self) -> int:
        """Get Gauss-Newton polishing iterations per start."""
        return self.get('search', 'polish_iters', 60)

    @property
    def step(self) -> float:
        """Get initial descent step length."""
        return float(self.get('search', 'step', 0.5))

    @property
    def grad_tol(self) -> float:
        """Get tangent-gradient convergence tolerance."""
        return float(self.get('search', 'grad_tol', 1e-14))

    @property
    def mode(self) -> str:
        """Get search mode (heuristic or certify)."""
        return self.get('search', 'mode', 'certify')

    @property
    def seed(self) -> int:
        """Get RNG seed."""
        return self.get('search', 'seed', 42)

    @property
    def threads(self) -> int:
        """Get worker threads for condition checks."""
        return max(1, int(self.get('search', 'threads', 4)))

    @property
    def grid_resolution(self) -> int:
        """Get initial subdivisions per cube-face coordinate."""
        return self.get('certify', 'grid_resolution', 1)

    @property
    def max_cells(self) -> int:
        """Get certification evaluation budget."""
        return self.get('certify', 'max_cells', 10_000_000)

    @property
    def max_dimension(self) -> int:
        """Get largest manifold dimension attempted by certification."""
        return self.get('certify', 'max_dimension', 8)

    @property
    def min_radius(self) -> float:
        """Get smallest cell radius before certification gives up."""
        return float(self.get('certify', 'min_radius', 1e-6))

    @property
    def chunk_size(self) -> int:
        """Get cells evaluated per vectorized batch."""
        return self.get('certify', 'chunk_size', 16384)

    @property
    def gradient_tol(self) -> float:
        """Get gradient gate tolerance."""
        return float(self.get('tolerances', 'gradient', 1e-10))

    @property
    def witness_tol(self) -> float:
        """Get witness residual tolerance."""
        return float(self.get('tolerances', 'witness', 1e-9))

    @property
    def margin_tol(self) -> float:
        """Get certification margin."""
        return float(self.get('tolerances', 'margin', 1e-6))

    @property
    def rank_tol(self) -> float:
        """Get rank test threshold."""
        return float(self.get('tolerances', 'rank', 1e-6))

    @property
    def eig_tol(self) -> float:
        """Get eigenvalue threshold of the two-jet oracle."""
        return float(self.get('tolerances', 'eigen', 1e-9))

    @property
    def cluster_angle(self) -> float:
        """Get angular tolerance for witness clustering."""
        return float(self.get('tolerances', 'cluster_angle', 1e-3))

    @property
    def elimination_samples(self) -> int:
        """Get samples per elimination check of the reference cases."""
        return int(self.get('examples', 'elimination_samples', 1000))

    @property
    def log_level(self) -> str:
        """Get logging level."""
        return str(self.get('logging', 'level', 'WARNING')).upper()

    @property
    def log_format(self) -> str:
        """Get logging format."""
        return self.get('logging', 'format',
                        '%(asctime)s - %(name)s - %(levelname)s - %(message)s')

    @property
    def log_file(self) -> Optional[str]:
        """Get optional log file path."""
        return self.get('logging', 'file', None)


# Global config instance
config = Config()
