from __future__ import annotations

from dataclasses import asdict, dataclass, field

HEURISTICS = ("none", "dialect", "reduction", "both")


@dataclass(frozen=True)
class SynthConfig:
    n_small: int = 1
    n_large: int = 20
    input_range: tuple[float, float] = (-10.0, 10.0)
    delta: float = 1e-5
    timeout_seconds: float = 300.0
    seed: int = 0
    heuristics: str = "both"
    max_ops: int = 6
    naive: bool = False
    max_restarts: int = 10
    # Deterministic work limits. Hitting one ends the search with status
    # "timeout" at the same point on every machine.
    max_evaluated: int = 6_000_000
    max_candidates: int = 2_000_000
    chunk_elems: int = 1 << 18

    def __post_init__(self):
        if not 1 <= self.n_small < 10:
            raise ValueError(f"n_small must be in [1, 9], got {self.n_small}")
        if self.n_large < 10:
            raise ValueError(f"n_large must be >= 10, got {self.n_large}")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        lo, hi = self.input_range
        if not lo < hi:
            raise ValueError(f"empty input range {self.input_range}")
        if self.heuristics not in HEURISTICS:
            raise ValueError(f"heuristics must be one of {HEURISTICS}")
        if self.max_ops < 0:
            raise ValueError("max_ops must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SynthStats:
    enumerated: int = 0
    static_filtered: int = 0
    evaluated: int = 0
    equiv_filtered: int = 0
    eval_failed: int = 0
    candidates: int = 0
    restarts: int = 0
    rounds: int = 0
    ops: int = 0
    time_s: float = 0.0
    extra: dict = field(default_factory=dict)

    def check(self) -> None:
        assert self.enumerated == self.static_filtered + self.evaluated, self
        assert self.equiv_filtered + self.eval_failed <= self.evaluated, self

    def add(self, other: "SynthStats") -> None:
        for k in ("enumerated", "static_filtered", "evaluated", "equiv_filtered", "eval_failed", "candidates", "restarts", "rounds"):
            setattr(self, k, getattr(self, k) + getattr(other, k))
        self.time_s += other.time_s

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        return d
