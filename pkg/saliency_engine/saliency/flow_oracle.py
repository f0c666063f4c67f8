"""
Flow-graph oracle for contribution formulas on small convolutional networks.

Inference in a stride-1, unpadded conv+ReLU network is modelled as flow on a
multipartite graph: part A_0 holds the input values, part A_i the neurons of
the i-th convolution. Each node v carries its total weighted input gamma(v),
its activation a(v) and a flow loss b(v); a(v) = max(gamma(v) - b(v), 0).
The network adds its bias, so b(v) is the negated conv bias; for live nodes
it is taken as gamma(v) - a(v) of the float32 forward pass, which agrees to
float32 precision and keeps a(v) + b(v) == gamma(v). An edge from v' to v
carries the conv weight w_e and an amplification c_e that is 1 until
``to_bias_free`` rescales it. Edges touching a zero-activation node are dead
and never part of a path.

Per-pixel contributions ("phi") are path sums from an input node to the last
part, evaluated by dynamic programming over the DAG (one suffix sum per node),
and cross-checked against explicit path enumeration on small inputs:

    no_bias:  gamma(X) * sum_P prod c_e * w_e
    general:  gamma(X) * sum_P prod a_e / (a_e + b_e) * w_e
    vbp:      sum_P prod a_e, times gamma(X) when include_source is set

where a_e, b_e belong to the edge's target node.
"""

import logging
import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .exceptions import (
    DegenerateFlowError,
    GeometryError,
    PathCapExceededError,
    SaliencyError,
    UnsupportedLayerError,
)
from .inference import forward, im2col
from .layers import Conv2d, Model, ReLU
from .tensor import ACCUMULATOR, as_tensor
from .visualbackprop import visualbackprop

logger = logging.getLogger(__name__)

DEFAULT_PATH_CAP = 10_000_000
DEFAULT_TOLERANCE = 1e-5
VARIANTS = ("no_bias", "general", "vbp")
NAIVE_MAX_EXTENT = 4


@dataclass(frozen=True)
class FlowNode:
    part_index: int
    position: tuple
    gamma: float
    activation: float
    bias: float

    @property
    def dead(self):
        return self.activation == 0


@dataclass(frozen=True)
class FlowEdge:
    source: tuple
    target: tuple
    weight: float
    amplification: float
    dead: bool


class FlowGraph:
    """
    Multipartite flow graph over a networkx DiGraph.

    Node keys are ``(part, channel, row, col)`` tuples. Node attributes are
    ``gamma``, ``activation`` and ``bias``; edge attributes are ``weight``,
    ``amplification`` and ``dead``.

    Attributes:
        digraph (networkx.DiGraph): Underlying graph
        part_shapes (tuple): (C, H, W) of every part, A_0 first
        kernels (tuple): (m, r) of the convolution feeding part i at index i - 1
        bias_free (bool): True for graphs produced by ``to_bias_free``
    """

    def __init__(self, digraph, part_shapes, kernels, bias_free=False):
        self.digraph = digraph
        self.part_shapes = tuple(part_shapes)
        self.kernels = tuple(kernels)
        self.bias_free = bias_free

    @property
    def depth(self):
        """Index L of the last part."""
        return len(self.part_shapes) - 1

    def part(self, index):
        channels, height, width = self.part_shapes[index]
        return [
            (index, c, row, col)
            for c in range(channels)
            for row in range(height)
            for col in range(width)
        ]

    def node(self, key):
        attrs = self.digraph.nodes[key]
        return FlowNode(
            part_index=key[0],
            position=key[1:],
            gamma=attrs["gamma"],
            activation=attrs["activation"],
            bias=attrs["bias"],
        )

    def edges_from(self, key):
        return [
            FlowEdge(source=key, target=target, weight=attrs["weight"],
                     amplification=attrs["amplification"], dead=attrs["dead"])
            for target, attrs in self.digraph.succ[key].items()
        ]

    def out_degree(self, key):
        return self.digraph.out_degree(key)

    def is_borderline(self, key):
        """
        True when not every kernel placement of the next layer covers the node.

        Nodes in the last part have no next layer and count as borderline.
        """
        part, _, row, col = key
        if part >= self.depth:
            return True
        m, r = self.kernels[part]
        _, height, width = self.part_shapes[part]
        return not (m - 1 <= row <= height - m and r - 1 <= col <= width - r)

    def live_subgraph(self):
        live = [(u, v) for u, v, dead in self.digraph.edges(data="dead") if not dead]
        return self.digraph.edge_subgraph(live)

    def path_count(self):
        """Number of input-to-last-part paths in the full (live and dead) graph."""
        counts = {key: 1 for key in self.part(self.depth)}
        for index in range(self.depth - 1, -1, -1):
            for key in self.part(index):
                counts[key] = sum(counts[target] for target in self.digraph.successors(key))
        return sum(counts[key] for key in self.part(0))

    def copy(self):
        return FlowGraph(self.digraph.copy(), self.part_shapes, self.kernels, self.bias_free)


def _oracle_stages(model):
    """Validate an oracle-compatible model and return its conv layers."""
    convs = []
    for index, layer in enumerate(model.layers):
        if isinstance(layer, Conv2d):
            if layer.stride != (1, 1):
                raise GeometryError(f"flow oracle needs stride 1, layer {index} has stride {layer.stride}")
            convs.append(layer)
        elif not isinstance(layer, ReLU):
            raise UnsupportedLayerError(f"flow oracle supports conv2d and relu only, layer {index} is {layer.kind}")
    if not convs:
        raise UnsupportedLayerError("flow oracle needs at least one conv2d layer")
    return convs


def build_flow_graph(model, x, path_cap=DEFAULT_PATH_CAP):
    """
    Build the flow graph of ``model`` evaluated on input ``x``.

    Activations are taken from the inference module's forward pass; gamma is
    the bias-free weighted input recomputed in float64.

    Args:
        model (Model): Conv+ReLU model with stride-1 convolutions only
        x (numpy.ndarray): Input of shape ``model.input_shape``
        path_cap (int): Maximum number of input-to-output paths

    Returns:
        FlowGraph: Graph with per-node gamma, activation, bias

    Raises:
        UnsupportedLayerError: For any layer other than Conv2d or ReLU
        GeometryError: For a convolution with stride other than 1
        PathCapExceededError: If the graph has more paths than ``path_cap``
    """
    convs = _oracle_stages(model)
    result = forward(model, x)
    activations = [np.asarray(as_tensor(x), dtype=ACCUMULATOR)]
    activations += [np.asarray(stage.post_relu, dtype=ACCUMULATOR) for stage in result.trace.stages]

    digraph = nx.DiGraph()
    part_shapes = [model.input_shape]
    for c, row, col in np.ndindex(*model.input_shape):
        value = float(activations[0][c, row, col])
        digraph.add_node((0, c, row, col), gamma=value, activation=value, bias=0.0)

    for part, conv in enumerate(convs, start=1):
        previous = activations[part - 1]
        current = activations[part]
        cols, (out_h, out_w) = im2col(previous, conv.kernel, conv.stride)
        kernels = conv.weights.reshape(conv.out_channels, -1).astype(ACCUMULATOR)
        gamma = (cols @ kernels.T).T.reshape(conv.out_channels, out_h, out_w)
        part_shapes.append((conv.out_channels, out_h, out_w))
        m, r = conv.kernel
        for o, row, col in np.ndindex(conv.out_channels, out_h, out_w):
            target = (part, o, row, col)
            activation = float(current[o, row, col])
            node_gamma = float(gamma[o, row, col])
            # live nodes lose exactly what the float32 forward did not pass on
            loss = node_gamma - activation if activation > 0 else -float(conv.bias[o])
            digraph.add_node(target, gamma=node_gamma, activation=activation, bias=loss)
            for c, u, v in np.ndindex(conv.in_channels, m, r):
                source = (part - 1, c, row + u, col + v)
                dead = activation == 0 or digraph.nodes[source]["activation"] == 0
                digraph.add_edge(source, target, weight=float(conv.weights[o, c, u, v]),
                                 amplification=1.0, dead=dead)

    graph = FlowGraph(digraph, part_shapes, [conv.kernel for conv in convs])
    paths = graph.path_count()
    if paths > path_cap:
        raise PathCapExceededError(f"flow graph has {paths} paths, cap is {path_cap}")
    logger.debug("built flow graph: %d nodes, %d edges, %d paths",
                 digraph.number_of_nodes(), digraph.number_of_edges(), paths)
    return graph


def to_bias_free(graph):
    """
    Rescale every live edge so the graph reproduces all activations without biases.

    Each live edge into v gets amplification a(v) / gamma(v), the share of
    v's input flow that survives the loss at v. Node biases become 0.

    Raises:
        DegenerateFlowError: If a live node has zero gamma, including nodes kept
            alive by their bias alone
    """
    transformed = graph.copy()
    digraph = transformed.digraph
    for index in range(1, graph.depth + 1):
        for key in graph.part(index):
            attrs = digraph.nodes[key]
            incoming = [source for source in digraph.predecessors(key) if not digraph.edges[source, key]["dead"]]
            if attrs["activation"] > 0 and attrs["gamma"] == 0:
                raise DegenerateFlowError(f"live node {key} has zero input flow")
            for source in incoming:
                digraph.edges[source, key]["amplification"] = attrs["activation"] / attrs["gamma"]
            attrs["bias"] = 0.0
            attrs["gamma"] = attrs["activation"]
    transformed.bias_free = True
    return transformed


def replay_activations(graph):
    """
    Push the input flow through the graph using edge weight times amplification.

    Returns:
        dict: node key -> replayed activation (ReLU applied, no biases)
    """
    digraph = graph.digraph
    replayed = {key: digraph.nodes[key]["activation"] for key in graph.part(0)}
    for index in range(1, graph.depth + 1):
        for key in graph.part(index):
            total = 0.0
            for source, _, attrs in digraph.in_edges(key, data=True):
                if not attrs["dead"]:
                    total += attrs["amplification"] * attrs["weight"] * replayed[source]
            replayed[key] = max(total, 0.0)
    return replayed


def _edge_factor(digraph, target, attrs, variant):
    if variant == "no_bias":
        return attrs["amplification"] * attrs["weight"]
    node = digraph.nodes[target]
    if variant == "general":
        denominator = node["activation"] + node["bias"]
        if denominator == 0:
            return 0.0
        return node["activation"] / denominator * attrs["weight"]
    return node["activation"]


def _check_variant(variant):
    if variant not in VARIANTS:
        raise SaliencyError(f"unknown phi variant {variant!r}; choose from {', '.join(VARIANTS)}")


def _suffix_sums(graph, variant):
    """Sum over live paths from every node to the last part of the product of edge factors."""
    digraph = graph.digraph
    sums = {key: 1.0 for key in graph.part(graph.depth)}
    for index in range(graph.depth - 1, -1, -1):
        for key in graph.part(index):
            total = 0.0
            for target, attrs in digraph.succ[key].items():
                if not attrs["dead"]:
                    total += _edge_factor(digraph, target, attrs, variant) * sums[target]
            sums[key] = total
    return sums


def _source_factor(graph, key, variant, include_source):
    if variant == "vbp" and not include_source:
        return 1.0
    return graph.digraph.nodes[key]["gamma"]


def phi_all(graph, variant, include_source=False):
    """
    Contribution of every input node, computed in O(edges).

    Returns:
        dict: part-0 node key -> phi value
    """
    _check_variant(variant)
    sums = _suffix_sums(graph, variant)
    return {
        key: _source_factor(graph, key, variant, include_source) * sums[key]
        for key in graph.part(0)
    }


def _require_input_node(graph, key):
    key = tuple(key)
    if len(key) != 4 or key[0] != 0 or key not in graph.digraph:
        raise SaliencyError(f"{key} is not an input node of the flow graph")
    return key


def phi(graph, x_node, variant, include_source=False):
    """
    Contribution of one input node X to the last part of the graph.

    Args:
        graph (FlowGraph): Flow graph (original or bias-free)
        x_node (tuple): ``(0, channel, row, col)`` key of the input node
        variant (str): ``no_bias``, ``general`` or ``vbp``
        include_source (bool): Multiply the vbp variant by gamma(X)

    Returns:
        float: Path-sum contribution

    Raises:
        SaliencyError: If ``x_node`` is not in part 0 or the variant is unknown
    """
    _check_variant(variant)
    key = _require_input_node(graph, x_node)
    return phi_all(graph, variant, include_source)[key]


def phi_by_enumeration(graph, x_node, variant, include_source=False):
    """Same value as ``phi``, summed over explicitly enumerated live paths."""
    _check_variant(variant)
    key = _require_input_node(graph, x_node)
    live = graph.live_subgraph()
    if key not in live:
        return 0.0
    sinks = [node for node in graph.part(graph.depth) if node in live]
    total = 0.0
    for path in nx.all_simple_paths(live, key, sinks):
        product = 1.0
        for source, target in nx.utils.pairwise(path):
            product *= _edge_factor(graph.digraph, target, graph.digraph.edges[source, target], variant)
        total += product
    return _source_factor(graph, key, variant, include_source) * total


def with_dead_node(graph, key):
    """Copy of ``graph`` where ``key`` has zero activation and all its edges are dead."""
    killed = graph.copy()
    digraph = killed.digraph
    digraph.nodes[key]["activation"] = 0.0
    for source, target in list(digraph.in_edges(key)) + list(digraph.out_edges(key)):
        digraph.edges[source, target]["dead"] = True
    return killed


def degree_violations(graph):
    """
    Non-borderline nodes whose out-degree differs from m_i * r_i * f_i.

    Returns:
        list[tuple]: ``(node key, actual degree, expected degree)`` triples
    """
    violations = []
    for index in range(graph.depth):
        m, r = graph.kernels[index]
        expected = m * r * graph.part_shapes[index + 1][0]
        for key in graph.part(index):
            if graph.is_borderline(key):
                continue
            degree = graph.out_degree(key)
            if degree != expected:
                violations.append((key, degree, expected))
    return violations


def degenerate_nodes(graph):
    """Live nodes whose a(v) + b(v) is zero; their general-variant factor is taken as 0."""
    return [
        key
        for index in range(1, graph.depth + 1)
        for key in graph.part(index)
        if graph.digraph.nodes[key]["activation"] > 0
        and graph.digraph.nodes[key]["activation"] + graph.digraph.nodes[key]["bias"] == 0
    ]


@dataclass
class VariantStats:
    ratio_mean: float = None
    ratio_spread: float = None
    pixels_evaluated: int = 0

    def as_dict(self):
        return {
            "ratio_mean": _json_number(self.ratio_mean),
            "ratio_spread": _json_number(self.ratio_spread),
            "pixels_evaluated": self.pixels_evaluated,
        }


@dataclass
class ProportionalityReport:
    """
    Comparison of the pre-normalization VisualBackProp mask with the vbp path sums.

    Attributes:
        matched_variant (str): ``with_source``, ``without_source`` or ``inconclusive``
        variants (dict): flag name -> VariantStats
        degenerate_nodes (int): Live nodes with a(v) + b(v) == 0
    """

    matched_variant: str
    variants: dict = field(default_factory=dict)
    degenerate_nodes: int = 0

    @property
    def conclusive(self):
        return self.matched_variant != "inconclusive"

    @property
    def matched(self):
        return self.variants.get(self.matched_variant, VariantStats())

    @property
    def ratio_mean(self):
        return self.matched.ratio_mean

    @property
    def ratio_spread(self):
        return self.matched.ratio_spread

    @property
    def pixels_evaluated(self):
        return self.matched.pixels_evaluated

    def as_dict(self):
        return {
            "matched_variant": self.matched_variant,
            "ratio_mean": _json_number(self.ratio_mean),
            "ratio_spread": _json_number(self.ratio_spread),
            "pixels_evaluated": self.pixels_evaluated,
            "variants": {name: stats.as_dict() for name, stats in self.variants.items()},
            "degenerate_nodes": self.degenerate_nodes,
        }


def _json_number(value):
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def _ratio_stats(mask_raw, oracle):
    ratios = []
    for (_, _, row, col), value in oracle.items():
        if value != 0:
            ratios.append(float(mask_raw[row, col]) / value)
    if not ratios:
        return VariantStats()
    ratios = np.asarray(ratios)
    low, high = ratios.min(), ratios.max()
    spread = high / low - 1.0 if low > 0 else math.inf
    return VariantStats(ratio_mean=float(ratios.mean()), ratio_spread=float(spread), pixels_evaluated=len(ratios))


def vbp_proportionality_report(model, x, path_cap=DEFAULT_PATH_CAP, graph=None):
    """
    Check that the VisualBackProp mask is a pixel-independent multiple of the vbp path sum.

    Ratios mask/phi are computed over input nodes with a non-zero oracle value,
    once with and once without the gamma(X) source factor. The flag with the
    smaller ratio spread (max/min - 1) is reported as the matched variant.

    Args:
        model (Model): Oracle-compatible conv+ReLU model
        x (numpy.ndarray): Input tensor
        path_cap (int): Enumeration cap for ``build_flow_graph``
        graph (FlowGraph | None): Prebuilt graph for ``model`` and ``x``

    Returns:
        ProportionalityReport: ``inconclusive`` when every oracle value is zero
    """
    graph = graph or build_flow_graph(model, x, path_cap=path_cap)
    mask = visualbackprop(model, x)
    variants = {
        "without_source": _ratio_stats(mask.raw, phi_all(graph, "vbp", include_source=False)),
        "with_source": _ratio_stats(mask.raw, phi_all(graph, "vbp", include_source=True)),
    }
    degenerate = len(degenerate_nodes(graph))
    candidates = [name for name, stats in variants.items() if stats.pixels_evaluated]
    if not candidates:
        logger.warning("all oracle values are zero; proportionality is inconclusive")
        return ProportionalityReport("inconclusive", variants, degenerate)
    matched = min(candidates, key=lambda name: variants[name].ratio_spread)
    return ProportionalityReport(matched, variants, degenerate)


def random_oracle_model(rng, max_size=(6, 6)):
    """
    Draw a random 1-2 stage conv+ReLU stride-1 model and a positive input.

    Channels are 1..3, kernel sides 1..3, weights U(-1, 1), biases
    U(-0.2, 0.2), input values U(0.05, 1).

    Args:
        rng (numpy.random.Generator): Source of randomness
        max_size (tuple[int, int]): Largest input height and width

    Returns:
        tuple[Model, numpy.ndarray]: The model and its input
    """
    max_h, max_w = max_size
    stages = int(rng.integers(1, 3))
    kernels = [[int(rng.integers(1, 4)), int(rng.integers(1, 4))] for _ in range(stages)]
    for axis, limit in ((0, max_h), (1, max_w)):
        while sum(k[axis] - 1 for k in kernels) + 1 > limit:
            largest = max(kernels, key=lambda k: k[axis])
            largest[axis] -= 1
    need_h = sum(k[0] - 1 for k in kernels) + 1
    need_w = sum(k[1] - 1 for k in kernels) + 1
    height = int(rng.integers(min(max(need_h, 3), max_h), max_h + 1))
    width = int(rng.integers(min(max(need_w, 3), max_w), max_w + 1))

    channels = int(rng.integers(1, 4))
    input_shape = (channels, height, width)
    layers = []
    for m, r in kernels:
        out_channels = int(rng.integers(1, 4))
        layers.append(Conv2d(
            in_channels=channels,
            out_channels=out_channels,
            kernel=(m, r),
            stride=(1, 1),
            weights=rng.uniform(-1.0, 1.0, size=(out_channels, channels, m, r)),
            bias=rng.uniform(-0.2, 0.2, size=out_channels),
        ))
        layers.append(ReLU())
        channels = out_channels
    x = rng.uniform(0.05, 1.0, size=input_shape).astype(np.float32)
    return Model(layers=layers, input_shape=input_shape), x


def _scaled_deviation(left, right):
    """Largest difference between two per-node dicts, relative to the largest magnitude."""
    scale = max(max((abs(value) for value in left.values()), default=0.0), 1e-12)
    return max((abs(left[key] - right[key]) for key in left), default=0.0) / scale


def check_trial(model, x, tolerance=DEFAULT_TOLERANCE, path_cap=DEFAULT_PATH_CAP):
    """
    Run every oracle check on one model/input pair.

    Checks the degree property, VisualBackProp proportionality, bias-free
    activation replay, the phi identity between the general variant and
    the no_bias variant on the bias-free graph, and (for inputs up to 4x4)
    DP against explicit path enumeration.

    Returns:
        dict: ``status`` (passed, failed, inconclusive), ``reasons`` and ``report``
    """
    graph = build_flow_graph(model, x, path_cap=path_cap)
    report = vbp_proportionality_report(model, x, graph=graph)
    reasons = []

    violations = degree_violations(graph)
    if violations:
        reasons.append(f"{len(violations)} degree violations")

    try:
        bias_free = to_bias_free(graph)
    except DegenerateFlowError as exc:
        logger.warning("skipping bias-free checks: %s", exc)
        bias_free = None
    if bias_free is not None:
        replayed = replay_activations(bias_free)
        worst = max(abs(replayed[key] - graph.digraph.nodes[key]["activation"]) for key in replayed)
        if worst > 1e-6:
            reasons.append(f"bias-free replay off by {worst:.3g}")
        general = phi_all(graph, "general")
        transformed = phi_all(bias_free, "no_bias")
        if _scaled_deviation(general, transformed) > 1e-6:
            reasons.append("general phi differs from no_bias phi on the bias-free graph")

    _, height, width = model.input_shape
    if height <= NAIVE_MAX_EXTENT and width <= NAIVE_MAX_EXTENT:
        for variant in VARIANTS:
            dp = phi_all(graph, variant)
            enumerated = {key: phi_by_enumeration(graph, key, variant) for key in dp}
            if _scaled_deviation(dp, enumerated) > 1e-9:
                reasons.append(f"{variant} DP differs from path enumeration")

    if report.conclusive and not report.ratio_spread <= tolerance:
        reasons.append(f"ratio spread {report.ratio_spread:.3g} above {tolerance:g}")

    if reasons:
        status = "failed"
    elif not report.conclusive:
        status = "inconclusive"
    else:
        status = "passed"
    return {"status": status, "reasons": reasons, "report": report}


def run_oracle_trials(seed, trials, max_size=(6, 6), tolerance=DEFAULT_TOLERANCE, path_cap=DEFAULT_PATH_CAP):
    """
    Run ``check_trial`` on ``trials`` random models drawn from one seeded generator.

    Returns:
        dict: JSON-ready summary with pass/fail/inconclusive counts, the worst
        conclusive spread, matched-variant counts and per-failure reasons
    """
    rng = np.random.default_rng(seed)
    summary = {
        "seed": seed,
        "trials": trials,
        "max_size": list(max_size),
        "tolerance": tolerance,
        "passed": 0,
        "failed": 0,
        "inconclusive": 0,
        "max_ratio_spread": None,
        "matched_variants": {},
        "failures": [],
    }
    spreads = []
    for trial in range(trials):
        model, x = random_oracle_model(rng, max_size)
        outcome = check_trial(model, x, tolerance=tolerance, path_cap=path_cap)
        report = outcome["report"]
        summary[outcome["status"]] += 1
        variant = report.matched_variant
        summary["matched_variants"][variant] = summary["matched_variants"].get(variant, 0) + 1
        if report.conclusive and report.ratio_spread is not None:
            spreads.append(report.ratio_spread)
        if outcome["reasons"]:
            summary["failures"].append({"trial": trial, "reasons": outcome["reasons"]})
        logger.debug("trial %d: %s %s", trial, outcome["status"], report.as_dict())
    if spreads:
        summary["max_ratio_spread"] = _json_number(max(spreads))
    return summary
