from .candidate import ArgRef, Candidate, Const, DagBuilder, Node, RegionBody, compact
from .eval import EvalFailure, Signature, canonical_bytes, eval_candidate, evaluate_batched, signature_of, stack_inputs
from .semantics import SEMANTICS, OpCall
from .text import CandidateSyntaxError, parse_candidate, print_candidate
