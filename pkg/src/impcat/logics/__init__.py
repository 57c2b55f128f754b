"""Triple validity, couplings, and the rule-soundness harness."""

from .triples import (REL_TRIPLE_SHAPES, TRIPLE_SHAPES, RelTriple, Triple,
                      TripleShapeError, Verdict, check_triple, rel_validity)
from .couplings import (CouplingWitness, SideConditionViolated,
                        canonical_coupling, check_side_condition,
                        couple_ifelse4, couple_ifelse_det, couple_product,
                        couple_seq, couple_swap, couple_while_det,
                        couple_while_gen, extract_components, guards_agree,
                        is_coupling, joint_if, marginal, project, rel_search,
                        require_side_condition)

__all__ = [
    "REL_TRIPLE_SHAPES", "TRIPLE_SHAPES", "RelTriple", "Triple",
    "TripleShapeError", "Verdict", "check_triple", "rel_validity",
    "CouplingWitness", "SideConditionViolated", "canonical_coupling",
    "check_side_condition", "couple_ifelse4", "couple_ifelse_det",
    "couple_product", "couple_seq", "couple_swap", "couple_while_det",
    "couple_while_gen", "extract_components", "guards_agree", "is_coupling",
    "joint_if", "marginal", "project", "rel_search", "require_side_condition",
]
