import datetime
import os
from dataclasses import dataclass, field
from enum import auto

import ujson
from packaging.version import Version
from pathlib import Path
from typing import Any, ClassVar, Dict, List, Optional, TypedDict, Union

from .common import SerializableEnum, decode_real, encode_real, ensure_path, to_json
from .mc import RateCurveEntry, rate_trend
from .sets import SetDescriptor
from ..version import version as tool_version

class Verdict(SerializableEnum):
    consistent = auto()
    violated = auto()
    inconclusive = auto()

class TheoremPart(SerializableEnum):
    b = auto()
    "Lower bound on open sets"
    c = auto()
    "Upper bound on compact sets"
    d = auto()
    "Upper bound on convex sets"
    counterexample_open = auto()
    counterexample_closed = auto()
    supermult = auto()
    prop2 = auto()
    tails = auto()

def report_timestamp(pinned: Optional[str] = None) -> str:
    """``pinned`` if given, else SOURCE_DATE_EPOCH, else the current UTC time."""
    if pinned:
        return pinned
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        moment = datetime.datetime.fromtimestamp(int(epoch), tz=datetime.timezone.utc)
    else:
        moment = datetime.datetime.now(tz=datetime.timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")

class _JsonRecord:
    file_extension: ClassVar[str] = '.json'

    def encode(self) -> Dict: ...

    @classmethod
    def decode(cls, serial: Dict): ...

    def serialize(self) -> str:
        return to_json(self.encode())

    @classmethod
    def deserialize(cls, *, filename=None, jsonstring=None):
        if filename is not None:
            with open(filename, 'r', encoding='utf-8') as file:
                d = ujson.load(file)
        elif jsonstring is not None:
            d = ujson.loads(jsonstring)
        else:
            raise TypeError("Provide either JSON string or filename.")
        return cls.decode(d)

    @classmethod
    def _is_extension_valid(cls, file: Path):
        return file.suffix == cls.file_extension

    def save(self, file: Union[Path, str]):
        file = ensure_path(file)
        if not self._is_extension_valid(file):
            raise ValueError(f'Wrong extension ({file.suffix}). Only {self.file_extension} files are valid.')
        with file.open('w', encoding='utf-8', newline='\n') as f:
            f.write(self.serialize())
            f.write('\n')

    @classmethod
    def load(cls, file: Union[Path, str]):
        file = ensure_path(file)
        if not cls._is_extension_valid(file):
            raise ValueError(f'Wrong extension ({file.suffix}). Only {cls.file_extension} files are valid.')
        return cls.deserialize(filename=file)

@dataclass
class BoundReport(_JsonRecord):
    theorem_part: TheoremPart
    set: Optional[SetDescriptor]
    theoretical_inf: Optional[float]
    empirical_curve: List[RateCurveEntry]
    verdict: Verdict
    slack: float
    law: Dict[str, Any]
    seed: Optional[int] = None
    timestamp: str = field(default_factory=report_timestamp)
    tool_version: Version = tool_version
    hypothesis: Optional[str] = None
    """Which hypothesis of the tested statement held, or ``hypothesis-free zone``."""
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def trend(self) -> str:
        return rate_trend(self.empirical_curve)

    class Serial(TypedDict):
        theorem_part: str
        set: Optional[SetDescriptor.Serial]
        theoretical_inf: Union[float, str]
        empirical_curve: List[Dict]
        verdict: str
        slack: float
        law: Dict[str, Any]
        seed: Optional[int]
        timestamp: str
        tool_version: str
        hypothesis: Optional[str]
        trend: str
        details: Dict[str, Any]

    def encode(self) -> 'BoundReport.Serial':
        return {
            "theorem_part":    self.theorem_part.value,
            "set":             None if self.set is None else self.set.encode(),
            "theoretical_inf": encode_real(self.theoretical_inf),
            "empirical_curve": [e.encode() for e in self.empirical_curve],
            "verdict":         self.verdict.value,
            "slack":           encode_real(self.slack),
            "law":             self.law,
            "seed":            self.seed,
            "timestamp":       self.timestamp,
            "tool_version":    str(self.tool_version),
            "hypothesis":      self.hypothesis,
            "trend":           self.trend,
            "details":         self.details,
        }

    @classmethod
    def decode(cls, serial: 'BoundReport.Serial'):
        return cls(
            theorem_part=TheoremPart(serial["theorem_part"]),
            set=None if serial.get("set") is None else SetDescriptor.decode(serial["set"]),
            theoretical_inf=decode_real(serial["theoretical_inf"]),
            empirical_curve=[RateCurveEntry.decode(e) for e in serial["empirical_curve"]],
            verdict=Verdict(serial["verdict"]),
            slack=decode_real(serial["slack"]),
            law=serial["law"],
            seed=serial.get("seed"),
            timestamp=serial["timestamp"],
            tool_version=Version(serial.get("tool_version", "0.0.0")),
            hypothesis=serial.get("hypothesis"),
            details=serial.get("details", {}),
        )

@dataclass
class RateCurve(_JsonRecord):
    law: Dict[str, Any]
    set: SetDescriptor
    entries: List[RateCurveEntry]
    seed: int
    timestamp: str = field(default_factory=report_timestamp)
    tool_version: Version = tool_version

    class Serial(TypedDict):
        law: Dict[str, Any]
        set: SetDescriptor.Serial
        entries: List[Dict]
        trend: str
        seed: int
        timestamp: str
        tool_version: str

    def encode(self) -> 'RateCurve.Serial':
        return {
            "law":          self.law,
            "set":          self.set.encode(),
            "entries":      [e.encode() for e in self.entries],
            "trend":        rate_trend(self.entries),
            "seed":         self.seed,
            "timestamp":    self.timestamp,
            "tool_version": str(self.tool_version),
        }

    @classmethod
    def decode(cls, serial: 'RateCurve.Serial'):
        return cls(serial["law"], SetDescriptor.decode(serial["set"]),
                   [RateCurveEntry.decode(e) for e in serial["entries"]], serial["seed"], serial["timestamp"],
                   Version(serial.get("tool_version", "0.0.0")))
