"""Layout: local force adjustment separates and settles affected nodes."""

import math

from flowquery.diagram import (
    ATTRIBUTE_FILTER,
    DATA_SOURCE,
    VISUALIZATION,
    Diagram,
)
from flowquery.focus import node_center
from flowquery.layout import (
    IDEAL_EDGE_LENGTH,
    adjust,
    effective_radius,
    neighborhood,
)
from flowquery.tables import Column, Table

AUTOS = Table("autos", [Column("mpg", "numeric")], [["15"], ["22"]])


def make_diagram():
    diagram = Diagram()
    diagram.register_table(Table("autos", [Column("mpg", "numeric")], [["15"], ["22"]]))
    return diagram


def add_source(diagram, position=(0.0, 0.0)):
    return diagram.add_node(DATA_SOURCE, options={"table": "autos"}, position=position)


def add_filter(diagram, position=(0.0, 0.0)):
    return diagram.add_node(ATTRIBUTE_FILTER, position=position)


def disjoint(diagram, a, b):
    na, nb = diagram.node(a), diagram.node(b)
    ca, cb = node_center(na), node_center(nb)
    return (
        abs(ca[0] - cb[0]) >= (na.size[0] + nb.size[0]) / 2
        or abs(ca[1] - cb[1]) >= (na.size[1] + nb.size[1]) / 2
    )


def chain(diagram, count):
    nodes = [add_source(diagram, position=(0.0, 0.0))]
    for i in range(1, count):
        nodes.append(add_filter(diagram, position=(200.0 * i, 0.0)))
        diagram.add_edge(nodes[-2], "data-out", nodes[-1], "data-in")
    return nodes


# --- neighborhood -------------------------------------------------------------


def test_neighborhood_spans_two_hops_by_default():
    diagram = make_diagram()
    a, b, c, d, e = chain(diagram, 5)
    assert neighborhood(diagram, [a]) == {a, b, c}
    assert neighborhood(diagram, [c]) == {a, b, c, d, e}


def test_neighborhood_ignores_edge_direction():
    diagram = make_diagram()
    a, b, _, _, _ = chain(diagram, 5)
    assert a in neighborhood(diagram, [b], hops=1)


def test_neighborhood_skips_unknown_seeds():
    diagram = make_diagram()
    (a,) = chain(diagram, 1)
    assert neighborhood(diagram, [a, 999]) == {a}


# --- who moves ----------------------------------------------------------------


def test_pinned_nodes_keep_exact_positions():
    diagram = make_diagram()
    source = add_source(diagram)
    chart = diagram.add_node(VISUALIZATION, position=(0.0, 0.0))
    diagram.add_edge(source, "data-out", chart, "data-in")
    diagram.move_node(source, 12.25, 7.75)  # pins it
    adjust(diagram, [chart])
    assert diagram.node(source).position == (12.25, 7.75)


def test_nodes_outside_region_never_move():
    diagram = make_diagram()
    a, b, c, d, e = chain(diagram, 5)
    far = add_filter(diagram, position=(0.0, 900.0))
    before_e = diagram.node(e).position
    before_far = diagram.node(far).position
    adjust(diagram, [a])  # region is {a, b, c}; e and far stay out
    assert diagram.node(e).position == before_e
    assert diagram.node(far).position == before_far


def test_single_node_region_stays_put():
    diagram = make_diagram()
    source = add_source(diagram, position=(30.0, 40.0))
    assert adjust(diagram, [source]) == set()
    assert diagram.node(source).position == (30.0, 40.0)


def test_all_pinned_region_is_untouched():
    diagram = make_diagram()
    source = add_source(diagram)
    chart = diagram.add_node(VISUALIZATION, position=(10.0, 10.0))
    diagram.add_edge(source, "data-out", chart, "data-in")
    diagram.move_node(source, 0.0, 0.0)
    diagram.move_node(chart, 10.0, 10.0)
    assert adjust(diagram, [chart]) == set()


# --- separation ------------------------------------------------------------------


def test_new_chart_on_top_of_its_source_ends_up_disjoint():
    diagram = make_diagram()
    source = add_source(diagram, position=(100.0, 100.0))
    chart = diagram.add_node(VISUALIZATION, position=(100.0, 100.0))
    diagram.add_edge(source, "data-out", chart, "data-in")
    moved = adjust(diagram, [chart])
    assert moved
    assert disjoint(diagram, source, chart)


def test_two_big_charts_from_one_source_separate():
    diagram = make_diagram()
    source = add_source(diagram, position=(0.0, 0.0))
    first = diagram.add_node(VISUALIZATION, position=(200.0, 0.0))
    second = diagram.add_node(VISUALIZATION, position=(200.0, 0.0))
    diagram.add_edge(source, "data-out", first, "data-in")
    diagram.add_edge(source, "data-out", second, "data-in")
    adjust(diagram, [first, second])
    assert disjoint(diagram, first, second)
    assert disjoint(diagram, source, first)
    assert disjoint(diagram, source, second)


def test_coincident_small_nodes_spread_out():
    diagram = make_diagram()
    source = add_source(diagram, position=(50.0, 50.0))
    stack = [add_filter(diagram, position=(50.0, 50.0)) for _ in range(3)]
    for node in stack:
        diagram.add_edge(source, "data-out", node, "data-in")
    adjust(diagram, stack)
    everyone = [source] + stack
    for i, a in enumerate(everyone):
        for b in everyone[i + 1 :]:
            assert disjoint(diagram, a, b)


# --- settling --------------------------------------------------------------------


def test_connected_nodes_approach_ideal_edge_length():
    diagram = make_diagram()
    a = add_source(diagram, position=(0.0, 0.0))
    b = add_filter(diagram, position=(600.0, 0.0))
    diagram.add_edge(a, "data-out", b, "data-in")
    adjust(diagram, [b])
    distance = math.dist(node_center(diagram.node(a)), node_center(diagram.node(b)))
    assert 600 > distance
    assert IDEAL_EDGE_LENGTH * 0.9 < distance < IDEAL_EDGE_LENGTH * 1.6


def test_already_settled_region_barely_moves():
    diagram = make_diagram()
    a = add_source(diagram, position=(0.0, 0.0))
    b = add_filter(diagram, position=(160.0, 2.0))
    diagram.add_edge(a, "data-out", b, "data-in")
    before = node_center(diagram.node(b))
    adjust(diagram, [b])
    assert math.dist(before, node_center(diagram.node(b))) < 40.0


def test_adjustment_is_deterministic():
    def build():
        diagram = make_diagram()
        source = add_source(diagram, position=(0.0, 0.0))
        chart = diagram.add_node(VISUALIZATION, position=(80.0, 20.0))
        extra = add_filter(diagram, position=(80.0, 20.0))
        diagram.add_edge(source, "data-out", chart, "data-in")
        diagram.add_edge(source, "data-out", extra, "data-in")
        adjust(diagram, [chart, extra])
        return [diagram.node(n).position for n in sorted(diagram.nodes)]

    assert build() == build()


def test_effective_radius_is_half_the_diagonal():
    diagram = make_diagram()
    chart = diagram.add_node(VISUALIZATION, position=(0.0, 0.0))
    node = diagram.node(chart)
    assert effective_radius(node) == math.hypot(240.0, 180.0) / 2
