"""Local force-directed layout around newly created or changed nodes.

After a command edits the diagram, only the neighborhood of the new
nodes is adjusted: every node within two edges (in either direction) of
a seed node takes part in a small force simulation.  Connected nodes
pull toward an ideal edge length, all region nodes push each other
apart in proportion to their sizes, and the simulation stops once the
largest movement in an iteration falls below half a pixel.  Nodes the
user has positioned (pinned) and nodes outside the region never move.

Forces alone can leave big boxes touching, so a deterministic
separation pass follows: any movable node still overlapping a region
neighbor is pushed along the axis needing the smallest correction until
all bounding boxes are disjoint.
"""

from __future__ import annotations

import math
from collections import deque

from .diagram import Diagram, Node
from .focus import node_center

IDEAL_EDGE_LENGTH = 150.0
MAX_ITERATIONS = 300
EPSILON = 0.5

SPRING = 0.08  # pull per pixel of deviation from the ideal edge length
MAX_STEP = 24.0  # largest movement a node may make in one iteration
MARGIN = 8.0  # clearance enforced between separated boxes
GOLDEN_ANGLE = 2.399963229728653  # radians; spreads coincident nodes apart


def neighborhood(diagram: Diagram, seeds, hops: int = 2) -> set[int]:
    """Node ids within *hops* edges of any seed, ignoring edge direction."""
    frontier = deque((s, 0) for s in seeds if s in diagram.nodes)
    found = {s for s, _ in frontier}
    while frontier:
        node_id, depth = frontier.popleft()
        if depth == hops:
            continue
        for edge in diagram.in_edges(node_id) + diagram.out_edges(node_id):
            for neighbor in (edge.src, edge.dst):
                if neighbor not in found:
                    found.add(neighbor)
                    frontier.append((neighbor, depth + 1))
    return found


def adjust(diagram: Diagram, seeds, hops: int = 2) -> set[int]:
    """Settle the neighborhood of *seeds*; returns the ids that moved."""
    region = sorted(neighborhood(diagram, seeds, hops))
    movable = [n for n in region if not diagram.nodes[n].pinned]
    if not movable:
        return set()
    start = {n: diagram.nodes[n].position for n in movable}
    _simulate(diagram, region, set(movable))
    _separate_overlaps(diagram, region, movable)
    return {n for n in movable if diagram.nodes[n].position != start[n]}


def effective_radius(node: Node) -> float:
    return math.hypot(node.size[0], node.size[1]) / 2


def _simulate(diagram: Diagram, region: list[int], movable: set[int]) -> None:
    centers = {n: list(node_center(diagram.nodes[n])) for n in region}
    initial = {n: tuple(c) for n, c in centers.items()}
    radii = {n: effective_radius(diagram.nodes[n]) for n in region}
    links = {
        (edge.src, edge.dst)
        for n in region
        for edge in diagram.out_edges(n)
        if edge.dst in centers
    }

    for _ in range(MAX_ITERATIONS):
        push = {n: [0.0, 0.0] for n in region}
        for i, a in enumerate(region):
            for b in region[i + 1 :]:
                ux, uy, distance = _direction(centers[a], centers[b], a)
                force = radii[a] * radii[b] / (distance * distance)
                push[a][0] -= force * ux
                push[a][1] -= force * uy
                push[b][0] += force * ux
                push[b][1] += force * uy
        for a, b in links:
            ux, uy, distance = _direction(centers[a], centers[b], a)
            force = SPRING * (distance - IDEAL_EDGE_LENGTH)
            push[a][0] += force * ux
            push[a][1] += force * uy
            push[b][0] -= force * ux
            push[b][1] -= force * uy

        largest = 0.0
        for n in movable:
            dx, dy = push[n]
            step = math.hypot(dx, dy)
            if step > MAX_STEP:
                dx, dy = dx * MAX_STEP / step, dy * MAX_STEP / step
                step = MAX_STEP
            centers[n][0] += dx
            centers[n][1] += dy
            largest = max(largest, step)
        if largest < EPSILON:
            break

    for n in movable:
        if tuple(centers[n]) == initial[n]:
            continue  # avoid float round-trip drift on untouched nodes
        node = diagram.nodes[n]
        node.position = (
            centers[n][0] - node.size[0] / 2,
            centers[n][1] - node.size[1] / 2,
        )


def _direction(origin, toward, spread_id: int) -> tuple[float, float, float]:
    """Unit vector origin->toward and the distance, never degenerate."""
    dx = toward[0] - origin[0]
    dy = toward[1] - origin[1]
    distance = math.hypot(dx, dy)
    if distance < 1e-9:
        angle = spread_id * GOLDEN_ANGLE
        return math.cos(angle), math.sin(angle), 1.0
    return dx / distance, dy / distance, distance


def _separate_overlaps(diagram: Diagram, region: list[int], movable: list[int]) -> None:
    for _ in range(60):
        clean = True
        for a_id in movable:
            a = diagram.nodes[a_id]
            for b_id in region:
                if b_id == a_id:
                    continue
                shift = _overlap_push(a, diagram.nodes[b_id])
                if shift is not None:
                    a.position = (a.position[0] + shift[0], a.position[1] + shift[1])
                    clean = False
        if clean:
            return


def _overlap_push(a: Node, b: Node) -> tuple[float, float] | None:
    """Smallest move taking *a* clear of *b*, or None if already clear."""
    ax, ay = node_center(a)
    bx, by = node_center(b)
    need_x = (a.size[0] + b.size[0]) / 2 + MARGIN
    need_y = (a.size[1] + b.size[1]) / 2 + MARGIN
    dx, dy = ax - bx, ay - by
    if abs(dx) >= need_x or abs(dy) >= need_y:
        return None
    if dx == 0 and dy == 0:
        angle = a.id * GOLDEN_ANGLE
        return need_x * math.cos(angle), need_y * math.sin(angle)
    push_x = need_x - abs(dx)
    push_y = need_y - abs(dy)
    if push_x <= push_y:
        return (push_x if dx >= 0 else -push_x), 0.0
    return 0.0, (push_y if dy >= 0 else -push_y)
