from .lists import (LIST_NAMES, InteractionLists, adequately_separated, build_lists,
                    separated_box_vs_tcr, separated_tcr_vs_box, target_boxes)
from .octree import TcrOctree, TreeDepthError, build_tree

__all__ = [
    "LIST_NAMES", "InteractionLists", "adequately_separated", "build_lists",
    "separated_box_vs_tcr", "separated_tcr_vs_box", "target_boxes",
    "TcrOctree", "TreeDepthError", "build_tree",
]
