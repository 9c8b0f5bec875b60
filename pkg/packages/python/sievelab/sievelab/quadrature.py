import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_legendre

from sievelab import logging_config as logging_config

logger = logging.getLogger(__name__)

PANEL_ORDER = 16


@dataclass(frozen=True)
class QuadratureResult:
    """A quadrature estimate and how it was obtained."""

    value: float
    converged: bool
    nodes: int
    refinements: int
    warnings: tuple[str, ...] = field(default_factory=tuple)

    def __float__(self) -> float:
        return self.value


@lru_cache(maxsize=32)
def legendre_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_legendre(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def composite_rule(
    lower: float, upper: float, panels: int, order: int = PANEL_ORDER
) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on [lower, upper].

    Nodes come out in increasing order so that weighted sums are reproducible.
    """
    ref_nodes, ref_weights = legendre_rule(order)
    edges = np.linspace(lower, upper, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * ref_nodes[None, :]).ravel()
    weights = (half[:, None] * ref_weights[None, :]).ravel()
    return nodes, weights


def refine(
    estimate: Callable[[int], float],
    panels: int,
    rel_tol: float,
    max_refinements: int,
    label: str,
    abs_floor: float = 0.0,
    order: int = PANEL_ORDER,
) -> QuadratureResult:
    """Double the panel count until two successive estimates agree.

    `estimate(panels)` must return the quadrature value for that panel count.
    Agreement means |new - old| <= rel_tol * max(|new|, abs_floor).
    """
    previous = estimate(panels)
    for step in range(1, max_refinements + 1):
        panels *= 2
        current = estimate(panels)
        if abs(current - previous) <= rel_tol * max(abs(current), abs_floor):
            return QuadratureResult(current, True, panels * order, step)
        previous = current

    message = (
        f"{label}: no convergence to rel_tol={rel_tol:.1e} after "
        f"{max_refinements} refinements ({panels * order} nodes)"
    )
    logger.warning(message)
    return QuadratureResult(previous, False, panels * order, max_refinements, (message,))


def panels_for(span: float, period: float, nodes_per_period: int, order: int = PANEL_ORDER) -> int:
    """Smallest panel count giving at least `nodes_per_period` nodes per period."""
    if span <= 0:
        return 1
    return max(1, math.ceil(span / period * nodes_per_period / order))
