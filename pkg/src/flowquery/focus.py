"""Interaction focus: which node a vague query most likely refers to.

Every click halves all nodes' activeness and credits the clicked node, so
attention decays exponentially once the user moves on.  A node's focus
score tops its activeness up with a bonus for being near the mouse; the
bonus follows a shifted sigmoid that saturates close by and vanishes far
away.  Completion resolves unspecified node references by taking nodes in
decreasing focus-score order.
"""

import math

from .diagram import Diagram, Node
from .errors import RangeError

ALPHA = 2.0  # weight of the distance-to-mouse bonus
BETA = 5.0  # sigmoid shift: the bonus is ALPHA/2 at distance BETA * GAMMA
GAMMA = 500.0  # distance scale in canvas pixels

BACKGROUND = None


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def node_center(node: Node) -> tuple[float, float]:
    x, y = node.position
    w, h = node.size
    return (x + w / 2.0, y + h / 2.0)


class FocusTracker:
    """Per-session record of clicks and the last mouse position."""

    def __init__(self):
        self.activeness: dict[int, float] = {}
        self.mouse_position: tuple[float, float] = (0.0, 0.0)
        self.last_clicked: int | None = None

    def record_click(
        self,
        diagram: Diagram,
        target: int | None = BACKGROUND,
        position: tuple[float, float] | None = None,
    ) -> None:
        """Halve all activeness, credit the clicked node, move the mouse.

        ``target`` is a node id, or None for a background click.  When no
        position is given, the clicked node's center (or the previous mouse
        position) is used.
        """
        if target is not None and target not in diagram.nodes:
            raise RangeError(f"cannot click unknown node {target}")
        self._prune(diagram)
        for node_id in self.activeness:
            self.activeness[node_id] /= 2.0
        if target is not None:
            self.activeness[target] = self.activeness.get(target, 0.0) + 1.0
            if position is None:
                position = node_center(diagram.nodes[target])
        self.mouse_position = position if position is not None else self.mouse_position
        self.last_clicked = target

    def activeness_of(self, node_id: int) -> float:
        return self.activeness.get(node_id, 0.0)

    def focus_score(self, node: Node) -> float:
        """Activeness plus the distance bonus.

        The just-clicked node scores as if at distance zero: the mouse was
        on the node, wherever inside it the click landed.  That makes
        "clicking a node ranks it first" hold exactly, not almost surely.
        """
        if node.id == self.last_clicked:
            distance = 0.0
        else:
            cx, cy = node_center(node)
            mx, my = self.mouse_position
            distance = math.hypot(cx - mx, cy - my)
        bonus = ALPHA * (1.0 - _sigmoid(distance / GAMMA - BETA))
        return self.activeness_of(node.id) + bonus

    def rank(self, diagram: Diagram, predicate=None) -> list[int]:
        """Node ids by decreasing focus score.

        Ties go to the just-clicked node, then to the most recently
        created node.
        """
        nodes = [n for n in diagram.nodes.values() if predicate is None or predicate(n)]
        nodes.sort(
            key=lambda n: (-self.focus_score(n), n.id != self.last_clicked, -n.id)
        )
        return [n.id for n in nodes]

    def _prune(self, diagram: Diagram) -> None:
        for node_id in list(self.activeness):
            if node_id not in diagram.nodes:
                del self.activeness[node_id]
