"""Agentic well-formedness rules over a parsed model.

Each rule has a stable code; ``validate_model`` is a total function whose
output order is fixed by (code, element id), so identical models yield
identical diagnostic lists.
"""

from __future__ import annotations

import re
from typing import Callable, List, NamedTuple

from hagent import model as m
from hagent.xmlio import Diagnostic, Severity


class Rule(NamedTuple):
    code: str
    severity: Severity
    description: str
    check: Callable[[m.ProcessModel], List[Diagnostic]]


def _diag(rule_code, severity, element_id, message) -> Diagnostic:
    return Diagnostic(severity, rule_code, element_id, message)


def _agentic_diverging_gateways(model):
    for node in model.iter_nodes():
        if (
            isinstance(node, m.Gateway)
            and node.agentic is not None
            and node.agentic.direction is m.GatewayDirection.DIVERGING
        ):
            yield node


def _regions(model):
    """Successfully matched regions; pairing failures are E-PAIR's business."""
    for gw in _agentic_diverging_gateways(model):
        try:
            yield gw, m.find_merge_for(model, gw.id)
        except m.ModelError:
            continue


def _check_pair(model):
    out = []
    for gw in _agentic_diverging_gateways(model):
        try:
            m.find_merge_for(model, gw.id)
        except m.ModelError as exc:
            out.append(
                _diag(
                    "E-PAIR",
                    Severity.ERROR,
                    gw.id,
                    f"no matching agentic merging gateway: {exc}",
                )
            )
    return out


def _is_manager(lane) -> bool:
    # custom roles are worker-equivalent; only the literal manager counts
    return lane.agentic is not None and lane.agentic.role == m.MANAGER


def _check_manager(model):
    out = []
    for gw, region in _regions(model):
        merge_gw = model.index[region.merging_gateway_id]
        needs_manager = (
            merge_gw.agentic.merge is m.MergeStrategy.ROLE_LEADER_DRIVEN
            or gw.agentic.collaboration is m.CollaborationMode.DEBATE
        )
        if not needs_manager:
            continue
        decider = model.index[merge_gw.lane_id]
        if _is_manager(decider):
            continue
        if any(
            _is_manager(model.index[lane_id])
            for lane_id in region.participant_lane_ids
        ):
            continue
        out.append(
            _diag(
                "E-MGR",
                Severity.ERROR,
                merge_gw.id,
                "leader-driven or debate region has no manager-role lane as decider",
            )
        )
    return out


def _check_xor_agentic(model):
    out = []
    for node in model.iter_nodes():
        if (
            isinstance(node, m.Gateway)
            and node.agentic is not None
            and node.kind in (m.GatewayKind.EXCLUSIVE, m.GatewayKind.COMPLEX)
        ):
            out.append(
                _diag(
                    "E-XOR-AGENTIC",
                    Severity.ERROR,
                    node.id,
                    f"agentic info not allowed on {node.kind.value} gateway",
                )
            )
    return out


def _iter_trust_scores(model):
    for pool in model.pools:
        for lane in pool.lanes:
            if lane.agentic and lane.agentic.trust:
                yield lane.id, lane.agentic.trust
        for node in pool.nodes:
            agentic = getattr(node, "agentic", None)
            if agentic is not None and agentic.trust is not None:
                yield node.id, agentic.trust
    for flow in model.message_flows:
        if flow.agentic is not None and flow.agentic.trust is not None:
            yield flow.id, flow.agentic.trust


def _check_trust_range(model):
    out = []
    for elem_id, trust in _iter_trust_scores(model):
        if not 0 <= trust.value <= 100:
            out.append(
                _diag(
                    "E-TRUST-RANGE",
                    Severity.ERROR,
                    elem_id,
                    f"trust score {trust.value} outside 0..100",
                )
            )
    return out


def _check_reflection_refs(model):
    out = []
    for node in model.iter_nodes():
        if not isinstance(node, m.Task) or node.agentic is None:
            continue
        refl = node.agentic.reflection
        if refl is None:
            continue
        if refl.kind is m.ReflectionKind.CROSS:
            for lane_id in refl.reviewer_lane_ids:
                lane = model.index.get(lane_id)
                if not isinstance(lane, m.Lane) or lane.agentic is None:
                    out.append(
                        _diag(
                            "E-REFL-REF",
                            Severity.ERROR,
                            node.id,
                            f"cross-reflection reviewer {lane_id!r} is not an agentic lane",
                        )
                    )
                elif lane_id == node.lane_id:
                    out.append(
                        _diag(
                            "E-REFL-REF",
                            Severity.ERROR,
                            node.id,
                            "cross-reflection reviewer must differ from the task's lane",
                        )
                    )
        elif refl.kind is m.ReflectionKind.HUMAN:
            lane = model.index.get(refl.human_lane_id)
            if not isinstance(lane, m.Lane) or lane.agentic is not None:
                out.append(
                    _diag(
                        "E-REFL-REF",
                        Severity.ERROR,
                        node.id,
                        f"human-reflection lane {refl.human_lane_id!r} "
                        "must be an existing non-agentic lane",
                    )
                )
    return out


def _pool_is_agentic(pool) -> bool:
    return any(lane.agentic is not None for lane in pool.lanes)


def _check_message_direction(model):
    out = []
    pool_of = {}
    for pool in model.pools:
        for node in pool.nodes:
            pool_of[node.id] = pool
    for flow in model.message_flows:
        if flow.agentic is None:
            continue
        if flow.agentic.direction is m.MessageFlowDirection.OUTGOING:
            target_pool = pool_of[flow.target_id]
            if not _pool_is_agentic(target_pool):
                out.append(
                    _diag(
                        "E-MSG-DIR",
                        Severity.ERROR,
                        flow.id,
                        "collaboration message flow must target an agentic pool",
                    )
                )
        else:
            source_pool = pool_of[flow.source_id]
            if not _pool_is_agentic(source_pool):
                out.append(
                    _diag(
                        "E-MSG-DIR",
                        Severity.ERROR,
                        flow.id,
                        "merge message flow must come from an agentic pool",
                    )
                )
    return out


def _check_vote_arity(model):
    out = []
    for _gw, region in _regions(model):
        merge_gw = model.index[region.merging_gateway_id]
        if (
            merge_gw.agentic.merge in m.VOTING_STRATEGIES
            and len(region.branches) < 2
        ):
            out.append(
                _diag(
                    "E-VOTE-ARITY",
                    Severity.ERROR,
                    merge_gw.id,
                    "voting merge needs at least 2 branches",
                )
            )
    return out


_STRATEGY_WORDS = re.compile(
    r"\b(voting?|vote|majority|minority|leader|composed|competition|"
    r"fastest|complete|debate|merge|consensus)\b",
    re.IGNORECASE,
)


def _check_annotation_workaround(model):
    out = []
    for pool in model.pools:
        annotations = {
            a.id: a for a in pool.artifacts if isinstance(a, m.Annotation)
        }
        complex_gateways = {
            n.id
            for n in pool.nodes
            if isinstance(n, m.Gateway) and n.kind is m.GatewayKind.COMPLEX
        }
        for assoc in pool.artifacts:
            if not isinstance(assoc, m.Association):
                continue
            for ann_id, gw_id in (
                (assoc.source_id, assoc.target_id),
                (assoc.target_id, assoc.source_id),
            ):
                ann = annotations.get(ann_id)
                if (
                    ann is not None
                    and gw_id in complex_gateways
                    and _STRATEGY_WORDS.search(ann.text)
                ):
                    out.append(
                        _diag(
                            "W-ANNOT-STRATEGY",
                            Severity.WARNING,
                            gw_id,
                            "complex gateway with strategy-like annotation; "
                            "consider an agentic merging gateway",
                        )
                    )
    return out


def _check_missing_trust(model):
    out = []
    for pool in model.pools:
        for lane in pool.lanes:
            if lane.agentic is not None and lane.agentic.trust is None:
                out.append(
                    _diag(
                        "W-NO-TRUST",
                        Severity.WARNING,
                        lane.id,
                        "agentic lane has no trust score",
                    )
                )
    return out


CATALOG: List[Rule] = [
    Rule("E-PAIR", Severity.ERROR, "diverging agentic gateway has a matching merge", _check_pair),
    Rule("E-MGR", Severity.ERROR, "leader-driven/debate region has a manager decider", _check_manager),
    Rule("E-XOR-AGENTIC", Severity.ERROR, "no agentic info on exclusive/complex gateways", _check_xor_agentic),
    Rule("E-TRUST-RANGE", Severity.ERROR, "trust scores within 0..100", _check_trust_range),
    Rule("E-REFL-REF", Severity.ERROR, "reflection reviewer/human lanes resolve correctly", _check_reflection_refs),
    Rule("E-MSG-DIR", Severity.ERROR, "agentic message flows point at agentic pools", _check_message_direction),
    Rule("E-VOTE-ARITY", Severity.ERROR, "voting merges span at least 2 branches", _check_vote_arity),
    Rule("W-ANNOT-STRATEGY", Severity.WARNING, "complex-gateway strategy annotations flagged", _check_annotation_workaround),
    Rule("W-NO-TRUST", Severity.WARNING, "agentic lanes carry a trust score", _check_missing_trust),
]


def validate_model(model: m.ProcessModel) -> List[Diagnostic]:
    """All rule violations, ordered by (rule code, element id)."""
    out: List[Diagnostic] = []
    for rule in CATALOG:
        out.extend(rule.check(model))
    out.sort(key=lambda d: (d.code, d.element_id or ""))
    return out


def render_diagnostics(diagnostics) -> str:
    """Stable text rendering: ``CODE elementId: message``, one per line."""
    lines = []
    for d in diagnostics:
        elem = d.element_id or "-"
        lines.append(f"{d.code} {elem}: {d.message}")
    return "\n".join(lines)
