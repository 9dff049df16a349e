"""Network-level matrix assembly: per-edge channel weights, per-node
coupling penalties, the global coupling operator, and graph Laplacians.

Both estimation layers exchange relative data over the same directed graph
but see different channel noise:

* the observer layer receives ``c_ij = W_ij x_hat_j + H_ij v_ij`` and is
  weighted with ``U_ij = H_ij H_ij' + Zbar_ij``;
* the defence (detector) layer works with the difference of the two link
  signals, so both channel noises enter and the weight is
  ``U_ij = H_ij H_ij' + Hc_ij Hc_ij' + Z_ij``.

Every weight must be invertible; a singular ``U_ij`` is reported as a
scenario error naming the offending edge.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ScenarioError
from .model import Edge, NetworkGraph

__all__ = [
    "EdgeCoupling",
    "NodeCoupling",
    "CouplingMatrices",
    "edge_channel_weight",
    "layer_coupling",
    "coupling_matrices",
    "coupling_operator",
    "in_degree_laplacian",
]

_LAYERS = ("detector", "observer")

#: condition-number threshold above which a channel weight is flagged as
#: numerically fragile (the computation still proceeds).
COND_WARN_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class EdgeCoupling:
    """Precomputed quantities for one directed link j -> i on one layer.

    ``penalty`` is the quadratic in-edge cost that enters the per-node
    Riccati equation; ``delta`` is the edge-weight-sandwiched variant that
    forms the diagonal of the global coupling operator.
    """

    j: int
    i: int
    W: np.ndarray  # (p, n)
    Z: np.ndarray  # (p, p) edge weight of this layer
    U: np.ndarray  # (p, p) channel weight
    U_inv: np.ndarray  # (p, p)
    gain_factor: np.ndarray  # (n, p)  W' U^{-1}; right factor of injection gains
    penalty: np.ndarray  # (n, n)  W' U^{-1} W
    delta: np.ndarray  # (n, n)  W' U^{-1} Z U^{-1} W

    @property
    def key(self) -> tuple[int, int]:
        return (self.j, self.i)


@dataclass(frozen=True, eq=False)
class NodeCoupling:
    """All in-edges of one node on one layer, and their summed blocks."""

    i: int
    edges: tuple[EdgeCoupling, ...]
    penalty: np.ndarray  # (n, n)  sum_j W' U^{-1} W
    delta: np.ndarray  # (n, n)  sum_j W' U^{-1} Z U^{-1} W


def edge_channel_weight(edge: Edge, Z_edge: np.ndarray, layer: str) -> np.ndarray:
    """Channel weight U_ij for ``edge`` on the given layer."""
    if layer not in _LAYERS:
        raise ValueError(f"layer must be one of {_LAYERS}, got {layer!r}")
    U = edge.H @ edge.H.T + Z_edge
    if layer == "detector":
        U = U + edge.Hc @ edge.Hc.T
    return 0.5 * (U + U.T)


def _couple_edge(edge: Edge, Z_edge: np.ndarray, layer: str) -> EdgeCoupling:
    U = edge_channel_weight(edge, Z_edge, layer)
    eigs = np.linalg.eigvalsh(U)
    if eigs[0] <= 1e-12 * max(1.0, float(eigs[-1])):
        raise ScenarioError(
            f"channel weight U for edge {edge.j}->{edge.i} ({layer} layer) is "
            f"singular (min eigenvalue {eigs[0]:.3g}); add link noise or a "
            f"positive-definite edge weight"
        )
    cond = float(eigs[-1] / eigs[0])
    if cond > COND_WARN_LIMIT:
        warnings.warn(
            f"channel weight U for edge {edge.j}->{edge.i} ({layer} layer) has "
            f"condition number {cond:.3g}; gains may be inaccurate",
            RuntimeWarning,
            stacklevel=3,
        )
    U_inv = np.linalg.inv(U)
    U_inv = 0.5 * (U_inv + U_inv.T)
    gain_factor = edge.W.T @ U_inv
    penalty = gain_factor @ edge.W
    Z_sym = 0.5 * (Z_edge + Z_edge.T)
    delta = gain_factor @ Z_sym @ gain_factor.T
    return EdgeCoupling(
        j=edge.j,
        i=edge.i,
        W=edge.W,
        Z=Z_sym,
        U=U,
        U_inv=U_inv,
        gain_factor=gain_factor,
        penalty=0.5 * (penalty + penalty.T),
        delta=0.5 * (delta + delta.T),
    )


def layer_coupling(
    graph: NetworkGraph, Z: dict[tuple[int, int], np.ndarray], layer: str
) -> tuple[NodeCoupling, ...]:
    """Per-node coupling data (in-edge gain factors and summed penalties).

    ``Z`` maps edge keys ``(j, i)`` to the positive-definite edge weight of
    the requested layer. Nodes are returned in id order 1..N; a node with no
    in-neighbours has an empty edge tuple and a zero penalty.
    """
    n = graph.edges[0].W.shape[1] if graph.edges else 0
    nodes = []
    for i in range(1, graph.n_nodes + 1):
        edges = tuple(_couple_edge(e, Z[e.key], layer) for e in graph.in_edges(i))
        if edges:
            n = edges[0].W.shape[1]
            penalty = np.sum([e.penalty for e in edges], axis=0)
            delta = np.sum([e.delta for e in edges], axis=0)
        else:
            penalty = np.zeros((n, n))
            delta = np.zeros((n, n))
        nodes.append(NodeCoupling(i=i, edges=edges, penalty=penalty, delta=delta))
    return tuple(nodes)


@dataclass(frozen=True, eq=False)
class CouplingMatrices:
    """Global coupling matrices of one layer, all of size (N n) x (N n).

    ``Phi`` has the edge-weight-sandwiched in-edge sums Delta_i on the
    diagonal and ``-W_ij' U_ij^{-1} W_ij`` at block (i, j) for every link
    j -> i.  ``Delta`` is the block diagonal of ``Phi``.  The quantity that
    enters the weight-selection inequalities is ``penalty = Phi + Phi' -
    Delta``, symmetric by construction (exactly, not up to roundoff).
    """

    layer: str
    nodes: tuple[NodeCoupling, ...]
    Phi: np.ndarray
    Delta: np.ndarray
    penalty: np.ndarray


def coupling_matrices(
    graph: NetworkGraph, Z: dict[tuple[int, int], np.ndarray], layer: str
) -> CouplingMatrices:
    """Assemble the global coupling matrices of one layer.

    With identity relative maps, noise-free links, and identity edge
    weights ``Phi`` reduces to ``kron(L, I_n)`` with ``L`` the in-degree
    Laplacian, and ``penalty`` to ``kron(L + L' - D_in, I_n)``.
    """
    nodes = layer_coupling(graph, Z, layer)
    n = max((nc.penalty.shape[0] for nc in nodes), default=0)
    N = graph.n_nodes
    Phi = np.zeros((N * n, N * n))
    Delta = np.zeros((N * n, N * n))
    for nc in nodes:
        bi = (nc.i - 1) * n
        Phi[bi : bi + n, bi : bi + n] = nc.delta
        Delta[bi : bi + n, bi : bi + n] = nc.delta
        for ec in nc.edges:
            bj = (ec.j - 1) * n
            Phi[bi : bi + n, bj : bj + n] -= ec.penalty
    return CouplingMatrices(
        layer=layer,
        nodes=nodes,
        Phi=Phi,
        Delta=Delta,
        penalty=Phi + Phi.T - Delta,
    )


def coupling_operator(
    graph: NetworkGraph, Z: dict[tuple[int, int], np.ndarray], layer: str
) -> np.ndarray:
    """Global coupling operator Phi of one layer (see CouplingMatrices)."""
    return coupling_matrices(graph, Z, layer).Phi


def in_degree_laplacian(graph: NetworkGraph) -> tuple[np.ndarray, tuple[int, ...]]:
    """In-degree Laplacian L = D_in - Adj with nodes ordered 1..N.

    ``Adj[i-1, j-1] = 1`` when the graph has a link j -> i. Row sums are
    zero. The node ordering is returned alongside for explicitness.
    """
    N = graph.n_nodes
    adj = np.zeros((N, N))
    for e in graph.edges:
        adj[e.i - 1, e.j - 1] = 1.0
    L = np.diag(adj.sum(axis=1)) - adj
    return L, tuple(range(1, N + 1))
