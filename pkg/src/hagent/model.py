"""In-memory process model: standard BPMN subset plus agentic extensions.

Models are immutable after construction and normalized to a canonical
element order (sorted by id), which makes equality and serialization
deterministic.  Structural invariants (unique ids, resolvable references,
flows staying inside / crossing pools) are enforced at construction;
agentic well-formedness beyond that is the job of :mod:`hagent.validate`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Optional, Tuple, Union


class ModelError(Exception):
    """Base class for model construction and query failures."""


class OutOfRange(ModelError):
    """A trust score outside the 0-100 percent range."""

    def __init__(self, value: int):
        super().__init__(f"trust score {value} outside 0..100")
        self.value = value


class DuplicateId(ModelError):
    """Two model elements share an identifier."""


class DanglingReference(ModelError):
    """A flow, lane, or artifact references a missing element."""


class InvariantViolation(ModelError):
    """A structural invariant of the model does not hold."""


class NoMatchingMerge(ModelError):
    """No agentic merging gateway post-dominates the diverging gateway."""


class MalformedRegion(ModelError):
    """Collaboration branches overlap, re-enter, or escape the region."""


MANAGER = "manager"
WORKER = "worker"
HUMAN = "human"  # distinguished marker for non-agentic lanes in role maps


@dataclass(frozen=True)
class TrustScore:
    """Trustworthiness as an integer percent.

    The range is deliberately not enforced here so that out-of-range
    values in programmatically built models surface as E-TRUST-RANGE
    diagnostics; use :func:`mk_trust_score` for checked construction.
    """

    value: int


def mk_trust_score(value: int) -> TrustScore:
    """Checked TrustScore constructor; raises :class:`OutOfRange`."""
    if not 0 <= value <= 100:
        raise OutOfRange(value)
    return TrustScore(value)


@dataclass(frozen=True)
class AgentProfile:
    """Profile of an agentic lane: role plus optional trust score.

    ``role`` is ``"manager"``, ``"worker"``, or a free-text custom role.
    Custom roles count as worker-equivalent for manager-presence checks.
    """

    role: str
    trust: Optional[TrustScore] = None


class ReflectionKind(str, enum.Enum):
    SELF = "self"
    CROSS = "cross"
    HUMAN = "human"


@dataclass(frozen=True)
class ReflectionMode:
    """Answer-refinement loop attached to an agentic task."""

    kind: ReflectionKind
    max_rounds: int = 3
    reviewer_lane_ids: Tuple[str, ...] = ()  # cross-reflection only
    human_lane_id: Optional[str] = None  # human-reflection only


@dataclass(frozen=True)
class AgenticTaskInfo:
    reflection: Optional[ReflectionMode] = None
    trust: Optional[TrustScore] = None


class CollaborationMode(str, enum.Enum):
    COMPETITION = "competition"
    DEBATE = "debate"
    ROLE = "role"
    VOTING = "voting"


class MergeStrategy(str, enum.Enum):
    VOTING_MAJORITY = "voting.majority"
    VOTING_ABSOLUTE = "voting.absolute"
    VOTING_MINORITY = "voting.minority"
    ROLE_LEADER_DRIVEN = "role.leaderDriven"
    ROLE_COMPOSED = "role.composed"
    COMPETITION_FASTEST = "competition.fastest"
    COMPETITION_MOST_COMPLETE = "competition.mostComplete"


VOTING_STRATEGIES = frozenset(
    {
        MergeStrategy.VOTING_MAJORITY,
        MergeStrategy.VOTING_ABSOLUTE,
        MergeStrategy.VOTING_MINORITY,
    }
)


class GatewayDirection(str, enum.Enum):
    DIVERGING = "diverging"
    MERGING = "merging"


@dataclass(frozen=True)
class AgenticGatewayInfo:
    """Collaboration (diverging) or merge (merging) marker on a gateway.

    Exactly one of ``collaboration`` / ``merge`` must be set, agreeing
    with ``direction``.
    """

    direction: GatewayDirection
    collaboration: Optional[CollaborationMode] = None
    merge: Optional[MergeStrategy] = None
    trust: Optional[TrustScore] = None

    def __post_init__(self):
        if self.direction is GatewayDirection.DIVERGING:
            if self.collaboration is None or self.merge is not None:
                raise InvariantViolation(
                    "diverging agentic gateway requires collaboration and no merge"
                )
        else:
            if self.merge is None or self.collaboration is not None:
                raise InvariantViolation(
                    "merging agentic gateway requires merge and no collaboration"
                )


class GatewayKind(str, enum.Enum):
    EXCLUSIVE = "exclusive"
    INCLUSIVE = "inclusive"
    PARALLEL = "parallel"
    COMPLEX = "complex"


@dataclass(frozen=True)
class FlowNode:
    id: str
    lane_id: str
    name: str = ""
    foreign_ext: Tuple[str, ...] = ()  # opaque foreign extension fragments


@dataclass(frozen=True)
class StartEvent(FlowNode):
    pass


@dataclass(frozen=True)
class EndEvent(FlowNode):
    pass


@dataclass(frozen=True)
class Task(FlowNode):
    agentic: Optional[AgenticTaskInfo] = None


@dataclass(frozen=True)
class SubProcess(FlowNode):
    """Modeled but opaque: no nested execution semantics."""


@dataclass(frozen=True)
class Gateway(FlowNode):
    kind: GatewayKind = GatewayKind.EXCLUSIVE
    agentic: Optional[AgenticGatewayInfo] = None


@dataclass(frozen=True)
class SequenceFlow:
    id: str
    source_id: str
    target_id: str
    condition: Optional[str] = None


class MessageFlowDirection(str, enum.Enum):
    OUTGOING = "outgoing"
    INCOMING = "incoming"


@dataclass(frozen=True)
class AgenticMessageFlowInfo:
    direction: MessageFlowDirection
    collaboration: Optional[CollaborationMode] = None
    merge: Optional[MergeStrategy] = None
    trust: Optional[TrustScore] = None

    def __post_init__(self):
        if self.direction is MessageFlowDirection.OUTGOING:
            if self.collaboration is None or self.merge is not None:
                raise InvariantViolation(
                    "outgoing agentic message flow requires collaboration"
                )
        else:
            if self.merge is None or self.collaboration is not None:
                raise InvariantViolation(
                    "incoming agentic message flow requires merge"
                )


@dataclass(frozen=True)
class MessageFlow:
    id: str
    source_id: str
    target_id: str
    agentic: Optional[AgenticMessageFlowInfo] = None
    foreign_ext: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Annotation:
    id: str
    text: str = ""


@dataclass(frozen=True)
class Association:
    id: str
    source_id: str
    target_id: str


@dataclass(frozen=True)
class Group:
    id: str
    name: str = ""


@dataclass(frozen=True)
class DataObject:
    id: str
    name: str = ""


Artifact = Union[Annotation, Association, Group, DataObject]


@dataclass(frozen=True)
class Lane:
    id: str
    name: str = ""
    node_ids: Tuple[str, ...] = ()
    agentic: Optional[AgentProfile] = None
    foreign_ext: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Pool:
    id: str
    name: str = ""
    lanes: Tuple[Lane, ...] = ()
    nodes: Tuple[FlowNode, ...] = ()
    flows: Tuple[SequenceFlow, ...] = ()
    artifacts: Tuple[Artifact, ...] = ()
    multi_instance: bool = False
    opaque_elements: Tuple[str, ...] = ()  # unsupported BPMN, preserved verbatim


@dataclass(frozen=True)
class CollaborationRegion:
    """Matched (diverging, merging) gateway pair plus branch paths.

    Each branch is the full node-id path including both gateways;
    branches are node-disjoint except at the endpoints.
    """

    diverging_gateway_id: str
    merging_gateway_id: str
    branches: Tuple[Tuple[str, ...], ...]
    participant_lane_ids: frozenset


@dataclass(frozen=True)
class ProcessModel:
    id: str
    pools: Tuple[Pool, ...] = ()
    message_flows: Tuple[MessageFlow, ...] = ()
    opaque_elements: Tuple[str, ...] = ()  # e.g. diagram-interchange blobs
    index: Mapping[str, object] = field(
        default_factory=dict, compare=False, repr=False
    )

    def __post_init__(self):
        object.__setattr__(self, "pools", _normalize_pools(self.pools))
        object.__setattr__(
            self,
            "message_flows",
            tuple(sorted(self.message_flows, key=lambda f: f.id)),
        )
        object.__setattr__(self, "index", _build_index(self))
        _check_invariants(self)

    # -- structural queries -------------------------------------------------

    def pool_of(self, node_id: str) -> Pool:
        for pool in self.pools:
            for node in pool.nodes:
                if node.id == node_id:
                    return pool
        raise DanglingReference(f"no pool contains node {node_id!r}")

    def lane_of(self, node_id: str) -> Lane:
        node = self.index[node_id]
        return self.index[node.lane_id]

    def outgoing(self, node_id: str) -> Tuple[SequenceFlow, ...]:
        pool = self.pool_of(node_id)
        return tuple(f for f in pool.flows if f.source_id == node_id)

    def incoming(self, node_id: str) -> Tuple[SequenceFlow, ...]:
        pool = self.pool_of(node_id)
        return tuple(f for f in pool.flows if f.target_id == node_id)

    def iter_nodes(self) -> Iterator[FlowNode]:
        for pool in self.pools:
            yield from pool.nodes


def _normalize_pools(pools) -> Tuple[Pool, ...]:
    out = []
    for pool in pools:
        out.append(
            replace(
                pool,
                lanes=tuple(
                    sorted(
                        (replace(l, node_ids=tuple(sorted(l.node_ids))) for l in pool.lanes),
                        key=lambda l: l.id,
                    )
                ),
                nodes=tuple(sorted(pool.nodes, key=lambda n: n.id)),
                flows=tuple(sorted(pool.flows, key=lambda f: f.id)),
                artifacts=tuple(sorted(pool.artifacts, key=lambda a: a.id)),
            )
        )
    return tuple(sorted(out, key=lambda p: p.id))


def _build_index(model: ProcessModel) -> dict:
    index: dict = {}

    def add(elem_id: str, obj: object):
        if elem_id in index:
            raise DuplicateId(f"duplicate element id {elem_id!r}")
        index[elem_id] = obj

    add(model.id, model)
    for pool in model.pools:
        add(pool.id, pool)
        for lane in pool.lanes:
            add(lane.id, lane)
        for node in pool.nodes:
            add(node.id, node)
        for flow in pool.flows:
            add(flow.id, flow)
        for artifact in pool.artifacts:
            add(artifact.id, artifact)
    for flow in model.message_flows:
        add(flow.id, flow)
    return index


def _check_invariants(model: ProcessModel):
    node_to_pool = {}
    node_to_lane: dict = {}
    for pool in model.pools:
        if not pool.lanes:
            raise InvariantViolation(f"pool {pool.id!r} has no lanes")
        for node in pool.nodes:
            node_to_pool[node.id] = pool.id
        for lane in pool.lanes:
            for node_id in lane.node_ids:
                if node_id not in node_to_pool or node_to_pool[node_id] != pool.id:
                    raise DanglingReference(
                        f"lane {lane.id!r} references unknown node {node_id!r}"
                    )
                if node_id in node_to_lane:
                    raise InvariantViolation(
                        f"node {node_id!r} belongs to more than one lane"
                    )
                node_to_lane[node_id] = lane.id
        for node in pool.nodes:
            if node.id not in node_to_lane:
                raise InvariantViolation(f"node {node.id!r} belongs to no lane")
            if node.lane_id != node_to_lane[node.id]:
                raise InvariantViolation(
                    f"node {node.id!r} lane_id disagrees with laneSet"
                )
        for flow in pool.flows:
            for end in (flow.source_id, flow.target_id):
                if node_to_pool.get(end) != pool.id:
                    raise DanglingReference(
                        f"sequence flow {flow.id!r} endpoint {end!r} "
                        f"not a node of pool {pool.id!r}"
                    )
            src = model_get(model, flow.source_id)
            tgt = model_get(model, flow.target_id)
            if isinstance(src, EndEvent):
                raise InvariantViolation(
                    f"end event {src.id!r} has outgoing sequence flow {flow.id!r}"
                )
            if isinstance(tgt, StartEvent):
                raise InvariantViolation(
                    f"start event {tgt.id!r} has incoming sequence flow {flow.id!r}"
                )
        for artifact in pool.artifacts:
            if isinstance(artifact, Association):
                for end in (artifact.source_id, artifact.target_id):
                    if end not in model.index:
                        raise DanglingReference(
                            f"association {artifact.id!r} references {end!r}"
                        )
    for flow in model.message_flows:
        for end in (flow.source_id, flow.target_id):
            if end not in node_to_pool:
                raise DanglingReference(
                    f"message flow {flow.id!r} endpoint {end!r} unknown"
                )
        if node_to_pool[flow.source_id] == node_to_pool[flow.target_id]:
            raise InvariantViolation(
                f"message flow {flow.id!r} does not cross pool boundaries"
            )


def model_get(model: ProcessModel, elem_id: str):
    try:
        return model.index[elem_id]
    except KeyError:
        raise DanglingReference(f"unknown element id {elem_id!r}") from None


# -- region matching --------------------------------------------------------

_EXIT = object()  # virtual exit for post-dominator analysis


def _post_dominators(pool: Pool) -> dict:
    """Post-dominator sets over the pool's sequence-flow graph.

    Computed as dominators of the reversed graph rooted at a virtual
    exit that collects every node without outgoing flows.
    """
    nodes = [n.id for n in pool.nodes]
    succ = {n: [] for n in nodes}
    for flow in pool.flows:
        succ[flow.source_id].append(flow.target_id)
    # reverse graph rooted at virtual exit
    rsucc = {n: [] for n in nodes}
    rsucc[_EXIT] = [n for n in nodes if not succ[n]]
    for flow in pool.flows:
        rsucc[flow.target_id].append(flow.source_id)

    order = []
    seen = set()

    def visit(n):
        stack = [(n, iter(rsucc[n]))]
        seen.add(n)
        while stack:
            top, it = stack[-1]
            advanced = False
            for s in it:
                if s not in seen:
                    seen.add(s)
                    stack.append((s, iter(rsucc[s])))
                    advanced = True
                    break
            if not advanced:
                order.append(top)
                stack.pop()

    visit(_EXIT)
    rpo = list(reversed(order))
    rpred = {n: [] for n in rsucc}
    for n, ss in rsucc.items():
        for s in ss:
            rpred[s].append(n)

    universe = set(rsucc)
    dom = {n: universe if n is not _EXIT else {_EXIT} for n in rsucc}
    changed = True
    while changed:
        changed = False
        for n in rpo:
            if n is _EXIT:
                continue
            preds = [dom[p] for p in rpred[n] if p in dom]
            new = set.intersection(*preds) if preds else set()
            new = new | {n}
            if new != dom[n]:
                dom[n] = new
                changed = True
    return dom


def _is_agentic_merging(node) -> bool:
    return (
        isinstance(node, Gateway)
        and node.agentic is not None
        and node.agentic.direction is GatewayDirection.MERGING
    )


def find_merge_for(model: ProcessModel, diverging_id: str) -> CollaborationRegion:
    """Match a diverging agentic gateway to its collaboration region.

    The merging gateway is defined as the nearest agentic merging
    gateway that post-dominates the diverging gateway within its pool's
    sequence-flow graph.
    """
    node = model_get(model, diverging_id)
    if not (
        isinstance(node, Gateway)
        and node.agentic is not None
        and node.agentic.direction is GatewayDirection.DIVERGING
    ):
        raise NoMatchingMerge(f"{diverging_id!r} is not an agentic diverging gateway")
    pool = model.pool_of(diverging_id)
    postdom = _post_dominators(pool)

    candidates = [
        n
        for n in postdom.get(diverging_id, set())
        if n is not _EXIT
        and n != diverging_id
        and _is_agentic_merging(model.index[n])
    ]
    if not candidates:
        raise NoMatchingMerge(
            f"no agentic merging gateway post-dominates {diverging_id!r}"
        )
    # post-dominators of a node form a chain; the nearest candidate is the
    # one that every other candidate post-dominates
    nearest = None
    for m in candidates:
        if all(other == m or other in postdom[m] for other in candidates):
            nearest = m
            break
    if nearest is None:  # should not happen on a chain
        raise MalformedRegion("post-dominator candidates do not form a chain")

    # enumerate all simple paths from the diverging gateway to the merge,
    # one DFS per outgoing edge so parallel edges give separate branches
    succ_edges: dict = {n.id: [] for n in pool.nodes}
    for flow in pool.flows:
        succ_edges[flow.source_id].append(flow)

    branches = []
    out_flows = sorted(
        (f for f in pool.flows if f.source_id == diverging_id), key=lambda f: f.id
    )
    for entry in out_flows:
        paths = []
        _simple_paths(succ_edges, entry.target_id, nearest, [diverging_id], paths)
        if len(paths) != 1:
            raise MalformedRegion(
                f"branch through flow {entry.id!r} yields {len(paths)} paths; "
                "branches must be single node-disjoint chains"
            )
        branches.append(tuple(paths[0]))

    interiors = [set(b[1:-1]) for b in branches]
    combined: set = set()
    for interior in interiors:
        if combined & interior:
            raise MalformedRegion("branch interiors overlap")
        combined |= interior

    region_nodes = combined | {diverging_id, nearest}
    pred_edges: dict = {n.id: [] for n in pool.nodes}
    for flow in pool.flows:
        pred_edges[flow.target_id].append(flow)
    for n in combined:
        for flow in pred_edges[n]:
            if flow.source_id not in region_nodes:
                raise MalformedRegion(
                    f"branch node {n!r} is entered from outside the region"
                )
        for flow in succ_edges[n]:
            if flow.target_id not in region_nodes:
                raise MalformedRegion(
                    f"branch node {n!r} exits the region via {flow.id!r}"
                )

    lanes = frozenset(
        model.index[node_id].lane_id for b in branches for node_id in b
    )
    return CollaborationRegion(
        diverging_gateway_id=diverging_id,
        merging_gateway_id=nearest,
        branches=tuple(branches),
        participant_lane_ids=lanes,
    )


def _simple_paths(succ_edges, start, goal, prefix, out):
    path = prefix + [start]
    if start == goal:
        out.append(path)
        return
    for flow in sorted(succ_edges[start], key=lambda f: f.id):
        if flow.target_id in path:
            continue
        _simple_paths(succ_edges, flow.target_id, goal, path, out)


def region_roles(model: ProcessModel, region: CollaborationRegion) -> dict:
    """Role of every participant lane; non-agentic lanes map to ``"human"``."""
    roles = {}
    for lane_id in sorted(region.participant_lane_ids):
        lane = model_get(model, lane_id)
        roles[lane_id] = lane.agentic.role if lane.agentic else HUMAN
    return roles
