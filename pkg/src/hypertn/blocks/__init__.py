"""Perfect tensor, frame, node and reduced path node."""

from .evenbly import CodeVerdict, check_evenbly_code, edge_tensor, node_code_split
from .frame import Frame, FrameError, PlanarVerdict, build_frame, check_planar_2uniform, is_frame_cyclic
from .node import (
    LEADING,
    IntegrityError,
    Node,
    NodeError,
    NodeRecipe,
    ReducedPathNode,
    block_tensor,
    build_node,
    check_node_reduction,
    dense_transfer_matrix,
    family_recipe,
    node_from_recipe,
    phi_vector,
    random_recipe,
    reduced_path_node,
    reduced_path_node_from_recipe,
    structured_transfer_matrix,
)
from .perfect import (
    CubeError,
    LatinCubeTriple,
    NotSymmetrizableError,
    PerfectTensor,
    build_perfect,
    default_perfect_tensor,
    generate_latin_cubes,
    is_cyclic_symmetric,
    is_perfect,
    symmetrize_perfect,
    symmetrizing_quadruples,
)

__all__ = [name for name in dir() if not name.startswith("_")]
