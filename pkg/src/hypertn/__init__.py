"""Hyperinvariant tensor network on the {5,4} tiling: construction, checks and boundary correlators."""

from . import blocks, correlations, gates, network, tensor_core
from .blocks import NodeRecipe, family_recipe, node_from_recipe, random_recipe, reduced_path_node, reduced_path_node_from_recipe
from .correlations import central_charge_bound, scaling_dimension, three_point_C, two_point_transfer
from .network import build_network

__version__ = "0.1.0"
