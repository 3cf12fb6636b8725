from .config import HEURISTICS, SynthConfig, SynthStats
from .engine import CandidateSet, Entry, Enumerator, SynthResult, compositions, spec_check, synthesize, within_tolerance
from .space import (
    filter_types,
    gen_attrs,
    gen_regions,
    known_shapes,
    max_rank,
    pick_operations,
    source_ops,
    static_check,
    static_check_candidate,
)
