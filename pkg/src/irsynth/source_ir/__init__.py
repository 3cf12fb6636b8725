from .ast import Affine, Assign, BinOp, ForLoop, Function, Load, Neg, Num, Return, Var, expr_loads, expr_ops, walk_stmts
from .interp import (
    IntDivisionByZero,
    InterpError,
    OutOfBounds,
    gen_random_batch,
    gen_random_inputs,
    int_divide,
    interpret,
    run_batched,
)
from .parser import SirSyntaxError, parse_file, parse_function
from .printer import print_function
