import os
from dataclasses import dataclass, field

import numpy as np
import ujson
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from . import constants as C
from ..ldp.common import decode_real, ensure_path
from ..ldp.exceptions import ConfigError
from ..ldp.model import PairLaw, make_law
from ..ldp.parameters import RateParameters, SimulationParameters
from ..ldp.sets import SetDescriptor

SECTIONS = ("law", "seed", "workers", "rate", "simulate", "verify", "tails", "output")
SIMULATION_KEYS = ("n_runs", "chunk_runs", "confidence", "max_renewals", "slack")

@dataclass
class RunConfig:
    """One run record: the law, the seed and a block of settings per command.

    Loaded from a JSON file; ``--seed``, ``--workers`` and ``--out`` override the file, and the
    ``LDP_RENEWAL_WORKERS`` environment variable is the fallback for the number of workers."""
    law: Dict
    seed: int
    workers: int = 1
    rate: Dict = field(default_factory=dict)
    simulate: Dict = field(default_factory=dict)
    verify: Dict = field(default_factory=dict)
    tails: Dict = field(default_factory=dict)
    output_dir: Path = Path("data")
    timestamp: Optional[str] = None
    base_dir: Path = Path(".")

    def __post_init__(self):
        if not isinstance(self.law, dict) or "family" not in self.law:
            raise ConfigError("The 'law' section needs a 'family'")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"The seed must be an unsigned 64 bit integer, got {self.seed!r}")
        if isinstance(self.workers, bool) or not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError(f"The number of workers must be a positive integer, got {self.workers!r}")
        for name in ("rate", "simulate", "verify", "tails"):
            if not isinstance(getattr(self, name), dict):
                raise ConfigError(f"The '{name}' section must be an object")

    @classmethod
    def from_dict(cls, d: Dict, base_dir: Union[Path, str] = ".", seed: int = None, workers: int = None,
                  out: Union[Path, str] = None):
        unknown = set(d) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"Unknown configuration sections: {sorted(unknown)}")
        base_dir = ensure_path(base_dir)
        seed = seed if seed is not None else d.get("seed")
        if seed is None:
            raise ConfigError("No seed given: set 'seed' in the configuration or pass --seed")
        if workers is None:
            workers = d.get("workers")
        if workers is None and os.environ.get(C.WORKERS_ENV):
            try:
                workers = int(os.environ[C.WORKERS_ENV])
            except ValueError:
                raise ConfigError(f"{C.WORKERS_ENV} must be an integer, got '{os.environ[C.WORKERS_ENV]}'")
        output = d.get("output", {})
        if not isinstance(output, dict):
            raise ConfigError("The 'output' section must be an object")
        out = ensure_path(out) if out is not None else base_dir / output.get("dir", "data")
        return cls(
            law=d.get("law"),
            seed=seed,
            workers=workers if workers is not None else 1,
            rate=d.get("rate", {}),
            simulate=d.get("simulate", {}),
            verify=d.get("verify", {}),
            tails=d.get("tails", {}),
            output_dir=out,
            timestamp=output.get("timestamp"),
            base_dir=base_dir,
        )

    @classmethod
    def load(cls, file: Union[Path, str], seed: int = None, workers: int = None, out: Union[Path, str] = None):
        file = ensure_path(file)
        if file.suffix != '.json':
            raise ConfigError(f'Wrong extension ({file.suffix}). Only .json files are valid.')
        try:
            with file.open('r', encoding='utf-8') as f:
                d = ujson.load(f)
        except OSError as e:
            raise ConfigError(f"Could not read {file}: {e}")
        except ValueError as e:
            raise ConfigError(f"{file} is not valid JSON: {e}")
        if not isinstance(d, dict):
            raise ConfigError(f"{file} must contain a JSON object")
        return cls.from_dict(d, file.parent, seed, workers, out)

    def make_law(self) -> PairLaw:
        params = dict(self.law.get("params", {}))
        if "path" in params:
            path = Path(params["path"])
            params["path"] = path if path.is_absolute() else self.base_dir / path
        return make_law(self.law["family"], params)

    def rate_parameters(self) -> RateParameters:
        return RateParameters(self.rate.get("tolerances", {}))

    def simulation_parameters(self, section: str) -> SimulationParameters:
        block = self._section(section)
        return SimulationParameters({k: block[k] for k in SIMULATION_KEYS if k in block}, workers=self.workers)

    def set_descriptor(self, section: str) -> SetDescriptor:
        block = self._section(section)
        if "set" not in block:
            raise ConfigError(f"The '{section}' section needs a 'set'")
        try:
            return SetDescriptor.decode(block["set"])
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Invalid set in '{section}': {e}")

    def t_grid(self, section: str) -> List[float]:
        block = self._section(section)
        if "t_grid" not in block:
            raise ConfigError(f"The '{section}' section needs a 't_grid'")
        return [float(t) for t in block["t_grid"]]

    def n_runs(self, section: str) -> int:
        return self.simulation_parameters(section).n_runs

    def grid_points(self) -> List[np.ndarray]:
        """Reward points of the rate grid: an explicit ``points`` list, or ``start``/``stop``/``step``
        for one dimensional laws."""
        grid = self.rate.get("grid")
        if grid is None:
            return []
        if "points" in grid:
            return [np.atleast_1d(np.asarray(p, dtype=float)) for p in grid["points"]]
        try:
            start, stop, step = (float(grid[k]) for k in ("start", "stop", "step"))
        except KeyError as e:
            raise ConfigError(f"Rate grid needs 'points' or 'start', 'stop' and 'step': missing {e}")
        if not step > 0 or stop < start:
            raise ConfigError(f"Invalid rate grid start={start}, stop={stop}, step={step}")
        n = int(round((stop - start) / step)) + 1
        return [np.array([start + k * step]) for k in range(n)]

    def upsilon_points(self) -> List[Tuple[float, np.ndarray]]:
        return [(decode_real(beta), np.atleast_1d(np.asarray(w, dtype=float)))
                for beta, w in self.rate.get("upsilon_points", [])]

    def _section(self, section: str) -> Dict:
        block = getattr(self, section, None)
        if block is None:
            raise ConfigError(f"Unknown section '{section}'")
        return block

    def get(self, section: str, key: str, default=None):
        return self._section(section).get(key, default)
