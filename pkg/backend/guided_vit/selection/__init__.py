"""Token selection: attention-guided pruning followed by merging."""

from .merging import (
    MERGERS,
    BaseMerger,
    BipartiteMerger,
    MergeResult,
    PoguiseMerger,
    bipartite_merge,
    cosine_similarity,
    get_merger,
    poguise_merge,
)
from .scoring import keep_count, prune_scores, round_count, topk_prune
from .stage import (
    CSV_HEADER,
    SelectionOutcome,
    apply_selection,
    selection_rows,
    stage_counts,
    stage_output_count,
    write_selection_csv,
)

__all__ = [
    "CSV_HEADER",
    "MERGERS",
    "BaseMerger",
    "BipartiteMerger",
    "MergeResult",
    "PoguiseMerger",
    "SelectionOutcome",
    "apply_selection",
    "bipartite_merge",
    "cosine_similarity",
    "get_merger",
    "keep_count",
    "poguise_merge",
    "prune_scores",
    "round_count",
    "selection_rows",
    "stage_counts",
    "stage_output_count",
    "topk_prune",
    "write_selection_csv",
]
