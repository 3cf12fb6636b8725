from __future__ import annotations

from .model import DialectDef, Grammar, Production


def generate_grammar(d: DialectDef) -> Grammar:
    """One nonterminal per type class, one production per op.

    Nonterminals are listed in order of first appearance over the op list so that
    identical definitions always yield identical grammars.
    """
    nonterminals: list[str] = []
    productions = []
    for op in d.ops:
        for cls in (*op.operand_types, op.result_type):
            if cls not in nonterminals:
                nonterminals.append(cls)
        productions.append(Production(op.name, op.operand_types, op.result_type))
    return Grammar(d.name, tuple(nonterminals), tuple(productions))
