"""Exhaustive tile search.

Enumerates tiles whose edges divide the layer dimensions, keeps the ones
that fit the fabric, and ranks them by predicted utilization; a second
pass can re-rank the best candidates by simulated cycle count.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .config import HardwareConfig, LayerConfig, TileConfig, derive_output_dims
from .errors import MappingError, NoFeasibleTile
from .mapper import build_mapping, theoretical_utilization

ENUMERATION_CAP = 4096


@dataclass
class TileCandidate:
    tile: TileConfig
    predicted: dict  # theoretical_utilization, folds, estimated_cycles

    def sort_key(self):
        return (
            -self.predicted["theoretical_utilization"],
            self.predicted["folds"],
            _tile_tuple(self.tile),
        )


def _tile_tuple(tile: TileConfig):
    return (tile.t_r, tile.t_s, tile.t_c, tile.t_g, tile.t_k, tile.t_n,
            tile.t_x, tile.t_y)


def _divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


def enumerate_tiles(hw: HardwareConfig, layer: LayerConfig,
                    limit: int = ENUMERATION_CAP) -> list[TileCandidate]:
    """Feasible divisor tiles ranked by (utilization desc, folds asc).

    Enumeration stops at ``ENUMERATION_CAP`` raw combinations; the
    returned list is truncated to ``limit``.
    """
    ox, oy = derive_output_dims(layer)
    axes = [
        _divisors(layer.r), _divisors(layer.s), _divisors(layer.c),
        _divisors(layer.g), _divisors(layer.k), _divisors(layer.n),
        _divisors(ox), _divisors(oy),
    ]
    candidates = []
    for combo in product(*axes):
        tile = TileConfig(*combo)
        try:
            plan = build_mapping(hw, layer, tile)
        except MappingError:
            continue
        util = theoretical_utilization(hw, plan)
        candidates.append(TileCandidate(
            tile=tile,
            predicted={
                "theoretical_utilization": util.fraction,
                "folds": plan.folds,
            },
        ))
        if len(candidates) >= ENUMERATION_CAP:
            break
    if not candidates:
        raise NoFeasibleTile(
            f"no divisor tile of the layer fits {hw.num_ms} multipliers"
        )
    candidates.sort(key=TileCandidate.sort_key)
    return candidates[:limit]


def rank_by_simulation(candidates: list[TileCandidate], hw: HardwareConfig,
                       layer: LayerConfig, top_k: int,
                       seed: int = 0) -> list[TileCandidate]:
    """Re-rank the candidates by simulated cycles; returns the best top_k.

    Ties break by utilization (desc) then lexicographic tile order, so
    the result is a total deterministic order.
    """
    from .engine import simulate_layer  # deferred, engine imports mapper

    if top_k <= 0:
        return []
    rng = np.random.default_rng(seed)
    inputs = rng.integers(
        -8, 9, size=(layer.n, layer.g, layer.c, layer.x, layer.y),
        dtype=np.int32,
    )
    weights = rng.integers(
        -8, 9, size=(layer.g, layer.k, layer.c, layer.r, layer.s),
        dtype=np.int32,
    )
    ranked = []
    for cand in candidates:
        result = simulate_layer(hw, layer, cand.tile, inputs, weights)
        predicted = dict(cand.predicted)
        predicted["estimated_cycles"] = result.stats.total_cycles
        ranked.append(TileCandidate(tile=cand.tile, predicted=predicted))
    ranked.sort(key=lambda c: (
        c.predicted["estimated_cycles"],
        -c.predicted["theoretical_utilization"],
        _tile_tuple(c.tile),
    ))
    return ranked[:top_k]
