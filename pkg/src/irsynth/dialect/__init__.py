from .grammar import generate_grammar
from .model import SCALAR_OPS, AttributeSpec, AttrKind, DialectDef, Grammar, OpDef, Production, RegionSpec
from .parser import DialectSyntaxError, dump_dialect, find_dialect, load_dialect, load_dialect_by_name, load_dialect_file
from .shapes import (
    InvalidAttribute,
    ShapeMismatch,
    TypeInferenceError,
    attr_values,
    gen_attr_bindings,
    infer_result_type,
)
