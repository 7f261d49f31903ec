"""MAP inference for Markov logic networks: relational grounding plus
component-aware WalkSAT."""

from .frontend import parse_evidence, parse_program, to_clausal
from .grounder import active_closure, ground_all
from .mrf import MRF, Cost, components, cost
from .partition import pack_batches, partition
from .search import SearchParams, component_aware_walksat, gauss_seidel, walksat
from .store import bulk_load

__version__ = "0.1.0"

__all__ = [
    "MRF", "Cost", "SearchParams", "active_closure", "bulk_load", "component_aware_walksat",
    "components", "cost", "gauss_seidel", "ground_all", "pack_batches", "parse_evidence",
    "parse_program", "partition", "to_clausal", "walksat",
]
