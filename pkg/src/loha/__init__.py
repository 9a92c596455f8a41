"""Learned local heuristics for bounded-suboptimal grid and car planning."""

from .domains import CarDomain, CarState, GridDomain, GridState, make_domain
from .gridmap import GridMap, generate_random_map, load_map, parse_map, save_map, serialize_map
from .localheur import ExactLocalHeuristic, LocalHValue, LocalRegionSpec, combined_h, local_h_exact
from .search import SearchResult, focal_search, weighted_astar

__version__ = "0.1.0"
