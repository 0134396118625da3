"""Deterministic token-based execution of agentic workflows.

Agents and humans are scripted stand-ins: a :class:`ScenarioPolicy` maps
tasks to canned outputs, reflection verdicts, votes and latencies, so a
trace is a pure function of (model, scenario, seed).  Randomness exists
only for scripts that opt into latency jitter.
"""

from __future__ import annotations

import random
from collections import Counter, deque
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import yaml

from hagent import model as m

STEP_BUDGET = 10_000

ACCEPT = "accept"
REVISE = "revise"


class SimulationError(Exception):
    pass


class MissingBehavior(SimulationError):
    def __init__(self, ref: str, detail: str = ""):
        super().__init__(f"no scripted behavior for {ref!r}" + (f": {detail}" if detail else ""))
        self.ref = ref


class StepBudgetExceeded(SimulationError):
    pass


class ConditionUnmatched(SimulationError):
    pass


class NoActiveBranch(SimulationError):
    pass


class VotesMissing(SimulationError):
    pass


class ManagerPickMissing(SimulationError):
    pass


@dataclass(frozen=True)
class CandidateOutput:
    label: str
    payload: str = ""
    confidence: Optional[m.TrustScore] = None
    producer_lane_id: Optional[str] = None
    latency_ms: Optional[int] = None
    completeness: Optional[int] = None


@dataclass
class ScriptedBehavior:
    """Canned behavior for one task, consumed output-by-output."""

    outputs: List[CandidateOutput] = field(default_factory=list)
    reflection_verdicts: List[str] = field(default_factory=list)
    vote: Optional[str] = None
    latency_ms: Optional[int] = None
    completeness: Optional[int] = None
    latency_jitter_ms: Optional[int] = None


@dataclass
class LaneScript:
    """Canned behavior for a lane when consulted as reviewer/voter/leader."""

    reflection_verdicts: List[str] = field(default_factory=list)
    vote: Optional[str] = None
    manager_pick: Optional[str] = None


@dataclass
class ScenarioPolicy:
    per_task: Dict[str, ScriptedBehavior] = field(default_factory=dict)
    per_lane: Dict[str, LaneScript] = field(default_factory=dict)
    seed: int = 0


# -- trace events -----------------------------------------------------------


@dataclass(frozen=True)
class TraceEvent:
    kind: str
    element_id: str

    def details(self) -> str:
        return ""


@dataclass(frozen=True)
class TokenEnter(TraceEvent):
    kind: str = field(default="TokenEnter", init=False)


@dataclass(frozen=True)
class TokenEnd(TraceEvent):
    kind: str = field(default="TokenEnd", init=False)


def _fmt_output(output: CandidateOutput) -> str:
    parts = [f"label={output.label}"]
    if output.producer_lane_id:
        parts.append(f"lane={output.producer_lane_id}")
    if output.confidence is not None:
        parts.append(f"confidence={output.confidence.value}")
    if output.latency_ms is not None:
        parts.append(f"latencyMs={output.latency_ms}")
    if output.completeness is not None:
        parts.append(f"completeness={output.completeness}")
    return " ".join(parts)


@dataclass(frozen=True)
class TaskDone(TraceEvent):
    output: CandidateOutput = None
    effective_trust: m.TrustScore = None
    kind: str = field(default="TaskDone", init=False)

    def details(self) -> str:
        return f"{_fmt_output(self.output)} trust={self.effective_trust.value}"


@dataclass(frozen=True)
class ReflectionRound(TraceEvent):
    round: int = 0
    verdict: str = ""
    kind: str = field(default="ReflectionRound", init=False)

    def details(self) -> str:
        return f"round={self.round} verdict={self.verdict}"


@dataclass(frozen=True)
class RegionOpen(TraceEvent):
    mode: m.CollaborationMode = None
    kind: str = field(default="RegionOpen", init=False)

    def details(self) -> str:
        return f"mode={self.mode.value}"


@dataclass(frozen=True)
class CandidateSet(TraceEvent):
    candidates: Tuple[CandidateOutput, ...] = ()
    kind: str = field(default="CandidateSet", init=False)

    def details(self) -> str:
        labels = ",".join(c.label for c in self.candidates)
        return f"size={len(self.candidates)} labels={labels}"


@dataclass(frozen=True)
class MergeDecision(TraceEvent):
    strategy: m.MergeStrategy = None
    chosen_label: str = ""
    rationale: str = ""
    kind: str = field(default="MergeDecision", init=False)

    def details(self) -> str:
        return (
            f"strategy={self.strategy.value} chosen={self.chosen_label} "
            f"rationale={self.rationale}"
        )


@dataclass
class Trace:
    events: List[TraceEvent] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


def format_trace(trace: Trace) -> str:
    """One event per line: ``seq<TAB>kind<TAB>elementId<TAB>details``."""
    lines = []
    for seq, event in enumerate(trace.events):
        details = event.details()
        line = f"{seq}\t{event.kind}\t{event.element_id}"
        if details:
            line += f"\t{details}"
        lines.append(line)
    for warning in trace.warnings:
        lines.append(f"#\twarning\t{warning}")
    return "\n".join(lines) + "\n"


# -- trust propagation ------------------------------------------------------


def propagate_trust(
    lane_trust: Optional[m.TrustScore],
    task_trust: Optional[m.TrustScore],
    output_confidence: Optional[m.TrustScore],
) -> m.TrustScore:
    """Minimal pessimistic rule: min over present values, default 100."""
    present = [
        t.value
        for t in (lane_trust, task_trust, output_confidence)
        if t is not None
    ]
    return m.TrustScore(min(present) if present else 100)


# -- merge strategies -------------------------------------------------------


def _tie_break_key(candidate: CandidateOutput):
    # higher confidence first, then lexicographically smallest label;
    # absent confidence counts as 100, consistent with propagate_trust
    conf = candidate.confidence.value if candidate.confidence else 100
    return (-conf, candidate.label)


def _tie_break(candidates) -> CandidateOutput:
    return min(candidates, key=_tie_break_key)


def apply_merge_strategy(
    strategy: m.MergeStrategy,
    candidates: List[CandidateOutput],
    votes: Optional[Dict[str, str]] = None,
    manager_pick: Optional[str] = None,
) -> Tuple[CandidateOutput, str]:
    """Pick one winner from a nonempty candidate list; returns (winner, rationale).

    All ties break deterministically: higher confidence, then
    lexicographic label.
    """
    if not candidates:
        raise ValueError("candidates must be nonempty")
    by_label: Dict[str, CandidateOutput] = {}
    for cand in candidates:
        by_label.setdefault(cand.label, cand)

    if strategy in m.VOTING_STRATEGIES:
        if votes is None:
            raise VotesMissing(f"{strategy.value} requires votes")
        counts = Counter(votes.values())
        voted = {label: n for label, n in counts.items() if label in by_label}
        total = sum(counts.values())
        if strategy is m.MergeStrategy.VOTING_MAJORITY:
            if not voted:
                winner = _tie_break(candidates)
                return winner, "no votes for any candidate; tie-break applied"
            top = max(voted.values())
            leaders = [by_label[l] for l in voted if voted[l] == top]
            winner = _tie_break(leaders)
            note = "" if len(leaders) == 1 else "; tie broken"
            return winner, f"{top}/{total} votes for {winner.label!r}{note}"
        if strategy is m.MergeStrategy.VOTING_ABSOLUTE:
            if voted:
                top = max(voted.values())
                if 2 * top > total:
                    label = min(l for l in voted if voted[l] == top)
                    winner = by_label[label]
                    return winner, f"absolute majority {top}/{total} for {label!r}"
                leaders = [by_label[l] for l in voted if voted[l] == top]
            else:
                leaders = list(candidates)
            winner = _tie_break(leaders)
            return (
                winner,
                "absolute majority not reached; fell back to tie-break "
                f"(confidence then label) -> {winner.label!r}",
            )
        # voting.minority: least-voted label with at least one vote
        if not voted:
            winner = _tie_break(candidates)
            return winner, "no votes for any candidate; tie-break applied"
        low = min(voted.values())
        trailers = [by_label[l] for l in voted if voted[l] == low]
        winner = _tie_break(trailers)
        note = "" if len(trailers) == 1 else "; tie broken"
        return winner, f"minority pick {winner.label!r} with {low}/{total} votes{note}"

    if strategy is m.MergeStrategy.ROLE_LEADER_DRIVEN:
        if manager_pick is None:
            raise ManagerPickMissing("role.leaderDriven requires a manager pick")
        if manager_pick not in by_label:
            raise ManagerPickMissing(
                f"manager pick {manager_pick!r} is not a candidate label"
            )
        return by_label[manager_pick], f"leader pick {manager_pick!r}"

    if strategy is m.MergeStrategy.ROLE_COMPOSED:
        payload = "".join(c.payload for c in candidates)
        confidences = [c.confidence.value for c in candidates if c.confidence]
        composed = CandidateOutput(
            label="composed",
            payload=payload,
            confidence=m.TrustScore(min(confidences)) if confidences else None,
        )
        return composed, f"composed from {len(candidates)} parts in branch order"

    if strategy is m.MergeStrategy.COMPETITION_FASTEST:
        best = min(
            candidates,
            key=lambda c: (
                c.latency_ms if c.latency_ms is not None else float("inf"),
            )
            + _tie_break_key(c),
        )
        lat = best.latency_ms if best.latency_ms is not None else "unscripted"
        return best, f"fastest at {lat}ms"

    if strategy is m.MergeStrategy.COMPETITION_MOST_COMPLETE:
        best = min(
            candidates,
            key=lambda c: (
                -(c.completeness if c.completeness is not None else -1),
            )
            + _tie_break_key(c),
        )
        comp = best.completeness if best.completeness is not None else "unscripted"
        return best, f"most complete at {comp}"

    raise ValueError(f"unknown strategy {strategy!r}")  # pragma: no cover


# -- scripted execution core ------------------------------------------------


class _Cursors:
    """Per-run consumption state for scripted outputs and verdicts."""

    def __init__(self):
        self.outputs: Dict[str, int] = {}
        self.verdicts: Dict[str, int] = {}

    def next_output(self, key: str, behavior: ScriptedBehavior) -> CandidateOutput:
        if not behavior.outputs:
            raise MissingBehavior(key, "script has no outputs")
        i = self.outputs.get(key, 0)
        out = behavior.outputs[min(i, len(behavior.outputs) - 1)]
        self.outputs[key] = i + 1
        return out

    def has_more_outputs(self, key: str, behavior: ScriptedBehavior) -> bool:
        return self.outputs.get(key, 0) < len(behavior.outputs)

    def next_verdict(self, key: str, verdicts: List[str]) -> Optional[str]:
        i = self.verdicts.get(key, 0)
        self.verdicts[key] = i + 1
        return verdicts[i] if i < len(verdicts) else None


def run_reflection(
    task: m.Task,
    behavior: ScriptedBehavior,
    lane_trust: Optional[m.TrustScore],
    lane_scripts: Optional[Dict[str, LaneScript]] = None,
    _cursors: Optional[_Cursors] = None,
) -> Tuple[CandidateOutput, int, List[TraceEvent]]:
    """Run the task's reflection loop; returns (output, rounds used, events).

    Produces one output per round; the verdict comes from the task's own
    script (self), the reviewer lanes' scripts (cross, any revise forces
    another round), or the human lane's script.  Stops on accept or at
    the round cap; the last produced output is always the one returned.
    """
    refl = task.agentic.reflection
    cursors = _cursors if _cursors is not None else _Cursors()
    lane_scripts = lane_scripts or {}
    events: List[TraceEvent] = []
    output = None
    rounds = 0
    for rounds in range(1, refl.max_rounds + 1):
        output = cursors.next_output(task.id, behavior)
        if refl.kind is m.ReflectionKind.SELF:
            verdict = cursors.next_verdict(task.id, behavior.reflection_verdicts)
        elif refl.kind is m.ReflectionKind.CROSS:
            verdict = ACCEPT
            for lane_id in refl.reviewer_lane_ids:
                script = lane_scripts.get(lane_id)
                if script is None:
                    raise MissingBehavior(lane_id, "consulted as cross reviewer")
                v = cursors.next_verdict(
                    f"{task.id}:{lane_id}", script.reflection_verdicts
                )
                if v != ACCEPT:
                    verdict = REVISE
        else:
            script = lane_scripts.get(refl.human_lane_id)
            if script is None:
                raise MissingBehavior(
                    refl.human_lane_id, "consulted for human reflection"
                )
            verdict = cursors.next_verdict(
                f"{task.id}:{refl.human_lane_id}", script.reflection_verdicts
            )
        verdict = verdict if verdict == ACCEPT else REVISE
        events.append(ReflectionRound(task.id, round=rounds, verdict=verdict))
        if verdict == ACCEPT:
            break
    return output, rounds, events


# -- simulation -------------------------------------------------------------


@dataclass
class _Token:
    node_id: str
    last_output: Optional[CandidateOutput] = None


def _condition_holds(condition: Optional[str], last_output) -> bool:
    if condition is None:
        return False  # empty condition means "default", never a positive match
    label = last_output.label if last_output is not None else ""
    text = condition.strip()
    if text.startswith("label =="):
        expected = text[len("label =="):].strip().strip('"').strip("'")
        return label == expected
    return label == text


class _Simulation:
    def __init__(self, model: m.ProcessModel, scenario: ScenarioPolicy):
        self.model = model
        self.scenario = scenario
        self.rng = random.Random(scenario.seed)
        self.cursors = _Cursors()
        self.trace = Trace()
        self.steps = 0
        self.joins: Dict[str, int] = {}  # gateway id -> arrivals so far
        self.join_outputs: Dict[str, CandidateOutput] = {}

    # -- helpers ------------------------------------------------------------

    def emit(self, event: TraceEvent):
        self.trace.events.append(event)

    def lane_trust(self, lane_id) -> Optional[m.TrustScore]:
        lane = self.model.index[lane_id]
        return lane.agentic.trust if lane.agentic else None

    def behavior_for(self, task: m.Task, required: bool) -> Optional[ScriptedBehavior]:
        behavior = self.scenario.per_task.get(task.id)
        if behavior is None and (required or task.agentic is not None):
            raise MissingBehavior(task.id)
        return behavior

    def effective_latency(self, behavior: ScriptedBehavior) -> Optional[int]:
        latency = behavior.latency_ms
        if behavior.latency_jitter_ms:
            latency = (latency or 0) + self.rng.randint(
                0, behavior.latency_jitter_ms
            )
        return latency

    def finish_output(
        self, task: m.Task, behavior: Optional[ScriptedBehavior], output
    ) -> CandidateOutput:
        updates = {}
        if output.producer_lane_id is None:
            updates["producer_lane_id"] = task.lane_id
        if behavior is not None:
            if output.latency_ms is None:
                lat = self.effective_latency(behavior)
                if lat is not None:
                    updates["latency_ms"] = lat
            if output.completeness is None and behavior.completeness is not None:
                updates["completeness"] = behavior.completeness
        return replace(output, **updates) if updates else output

    def execute_task(self, task: m.Task, required: bool = False) -> CandidateOutput:
        behavior = self.behavior_for(task, required)
        if behavior is None:
            output = CandidateOutput(
                label=task.name or task.id, producer_lane_id=task.lane_id
            )
        elif task.agentic is not None and task.agentic.reflection is not None:
            output, _rounds, events = run_reflection(
                task,
                behavior,
                self.lane_trust(task.lane_id),
                self.scenario.per_lane,
                _cursors=self.cursors,
            )
            self.trace.events.extend(events)
            output = self.finish_output(task, behavior, output)
        else:
            output = self.cursors.next_output(task.id, behavior)
            output = self.finish_output(task, behavior, output)
        task_trust = task.agentic.trust if task.agentic else None
        effective = propagate_trust(
            self.lane_trust(task.lane_id), task_trust, output.confidence
        )
        self.emit(TaskDone(task.id, output=output, effective_trust=effective))
        return output

    # -- collaboration regions ----------------------------------------------

    def execute_region(
        self,
        region: m.CollaborationRegion,
        context_label: Optional[CandidateOutput],
    ) -> CandidateOutput:
        model = self.model
        div = model.index[region.diverging_gateway_id]
        merge_gw = model.index[region.merging_gateway_id]
        mode = div.agentic.collaboration
        strategy = merge_gw.agentic.merge
        self.emit(RegionOpen(div.id, mode=mode))

        entry_flows = sorted(
            (f for f in model.pool_of(div.id).flows if f.source_id == div.id),
            key=lambda f: f.id,
        )
        active: List[Tuple[Tuple[str, ...], m.SequenceFlow]] = []
        for branch, flow in zip(region.branches, entry_flows):
            if div.kind is m.GatewayKind.INCLUSIVE:
                if flow.condition is not None and not _condition_holds(
                    flow.condition, context_label
                ):
                    continue
            active.append((branch, flow))
        if not active:
            raise NoActiveBranch(
                f"no branch of {div.id!r} has a true entry condition"
            )

        candidates: List[CandidateOutput] = []
        terminal_tasks: List[Optional[m.Task]] = []
        for branch, _flow in active:
            branch_output = None
            last_task = None
            for node_id in branch[1:-1]:
                node = model.index[node_id]
                self.step()
                self.emit(TokenEnter(node_id))
                if isinstance(node, m.Task):
                    branch_output = self.execute_task(node, required=True)
                    last_task = node
            if branch_output is None:
                raise MissingBehavior(
                    div.id, f"branch {branch!r} contains no task"
                )
            candidates.append(branch_output)
            terminal_tasks.append(last_task)

        if mode is m.CollaborationMode.DEBATE:
            # one exchange round: each branch may supply a revised output
            for i, task in enumerate(terminal_tasks):
                behavior = self.scenario.per_task.get(task.id)
                if behavior and self.cursors.has_more_outputs(task.id, behavior):
                    revised = self.cursors.next_output(task.id, behavior)
                    revised = self.finish_output(task, behavior, revised)
                    task_trust = task.agentic.trust if task.agentic else None
                    effective = propagate_trust(
                        self.lane_trust(task.lane_id),
                        task_trust,
                        revised.confidence,
                    )
                    self.emit(
                        TaskDone(task.id, output=revised, effective_trust=effective)
                    )
                    candidates[i] = revised

        self.emit(CandidateSet(merge_gw.id, candidates=tuple(candidates)))

        votes: Dict[str, str] = {}
        for lane_id in sorted(region.participant_lane_ids):
            script = self.scenario.per_lane.get(lane_id)
            if script and script.vote is not None:
                votes[lane_id] = script.vote
        for task in terminal_tasks:
            behavior = self.scenario.per_task.get(task.id)
            if behavior and behavior.vote is not None:
                votes[task.lane_id] = behavior.vote

        manager_pick = None
        merge_lane_script = self.scenario.per_lane.get(merge_gw.lane_id)
        if merge_lane_script and merge_lane_script.manager_pick is not None:
            manager_pick = merge_lane_script.manager_pick
        else:
            for lane_id in sorted(region.participant_lane_ids):
                lane = model.index[lane_id]
                script = self.scenario.per_lane.get(lane_id)
                if (
                    lane.agentic is not None
                    and lane.agentic.role == m.MANAGER
                    and script is not None
                    and script.manager_pick is not None
                ):
                    manager_pick = script.manager_pick
                    break

        winner, rationale = apply_merge_strategy(
            strategy, candidates, votes if votes else None, manager_pick
        )
        if merge_gw.agentic.trust is not None:
            rationale += f" [gateway trust={merge_gw.agentic.trust.value}]"
        self.emit(
            MergeDecision(
                merge_gw.id,
                strategy=strategy,
                chosen_label=winner.label,
                rationale=rationale,
            )
        )
        return winner

    # -- message-flow regions -----------------------------------------------

    def message_region_after(self, node_id: str):
        """Matched (outgoing collaboration, incoming merge) message-flow
        pair anchored at this node, if any."""
        for out_flow in self.model.message_flows:
            if (
                out_flow.source_id == node_id
                and out_flow.agentic is not None
                and out_flow.agentic.direction is m.MessageFlowDirection.OUTGOING
            ):
                here = self.model.pool_of(node_id)
                remote = self.model.pool_of(out_flow.target_id)
                for back in self.model.message_flows:
                    if (
                        back.agentic is not None
                        and back.agentic.direction is m.MessageFlowDirection.INCOMING
                        and self.model.pool_of(back.source_id).id == remote.id
                        and self.model.pool_of(back.target_id).id == here.id
                    ):
                        return out_flow, back, here, remote
                self.trace.warnings.append(
                    f"W-MULTIPOOL {out_flow.id}: no matching incoming merge flow"
                )
        return None

    def execute_message_region(self, out_flow, back_flow, here, remote):
        """Linear singleton-pool message-flow collaboration.

        Walks the remote pool from the outgoing flow's target to the
        incoming flow's source, executing tasks; the last output is the
        single candidate the merge strategy sees.
        """
        if here.multi_instance or remote.multi_instance:
            self.trace.warnings.append(
                f"W-MULTIPOOL {out_flow.id}: multi-instance pool endpoints "
                "are not executed"
            )
            return None
        mode = out_flow.agentic.collaboration
        strategy = back_flow.agentic.merge
        self.emit(RegionOpen(out_flow.id, mode=mode))
        current = out_flow.target_id
        last_output = None
        visited = set()
        while True:
            if current in visited:
                self.trace.warnings.append(
                    f"W-MULTIPOOL {out_flow.id}: remote pool walk cycles"
                )
                return None
            visited.add(current)
            node = self.model.index[current]
            self.step()
            self.emit(TokenEnter(current))
            if isinstance(node, m.Task):
                last_output = self.execute_task(node, required=True)
            if current == back_flow.source_id:
                break
            nexts = self.model.outgoing(current)
            if len(nexts) != 1:
                self.trace.warnings.append(
                    f"W-MULTIPOOL {out_flow.id}: remote pool is not a linear chain"
                )
                return None
            current = nexts[0].target_id
        if last_output is None:
            raise MissingBehavior(out_flow.id, "remote chain contains no task")
        candidates = [last_output]
        self.emit(CandidateSet(back_flow.id, candidates=tuple(candidates)))
        votes = {}
        for pool in (remote,):
            for lane in pool.lanes:
                script = self.scenario.per_lane.get(lane.id)
                if script and script.vote is not None:
                    votes[lane.id] = script.vote
        manager_pick = None
        for lane in here.lanes + remote.lanes:
            script = self.scenario.per_lane.get(lane.id)
            if script and script.manager_pick is not None:
                manager_pick = script.manager_pick
                break
        winner, rationale = apply_merge_strategy(
            strategy, candidates, votes if votes else None, manager_pick
        )
        if back_flow.agentic.trust is not None:
            rationale += f" [message trust={back_flow.agentic.trust.value}]"
        self.emit(
            MergeDecision(
                back_flow.id,
                strategy=strategy,
                chosen_label=winner.label,
                rationale=rationale,
            )
        )
        return winner

    # -- token game ---------------------------------------------------------

    def step(self):
        self.steps += 1
        if self.steps > STEP_BUDGET:
            raise StepBudgetExceeded(f"step budget of {STEP_BUDGET} exceeded")

    def route_exclusive(self, node, token) -> List[m.SequenceFlow]:
        flows = sorted(self.model.outgoing(node.id), key=lambda f: f.id)
        default = None
        for flow in flows:
            if flow.condition is None:
                if default is None:
                    default = flow
            elif _condition_holds(flow.condition, token.last_output):
                return [flow]
        if default is not None:
            return [default]
        raise ConditionUnmatched(
            f"no sequence flow out of {node.id!r} matches "
            f"label {token.last_output.label if token.last_output else None!r}"
        )

    def route_inclusive(self, node, token) -> List[m.SequenceFlow]:
        flows = sorted(self.model.outgoing(node.id), key=lambda f: f.id)
        chosen = [
            f
            for f in flows
            if f.condition is None or _condition_holds(f.condition, token.last_output)
        ]
        if not chosen:
            raise ConditionUnmatched(
                f"no inclusive branch out of {node.id!r} is active"
            )
        return chosen

    def run(self) -> Trace:
        queue = deque()
        starts = sorted(
            (n for n in self.model.iter_nodes() if isinstance(n, m.StartEvent)),
            key=lambda n: n.id,
        )
        for start in starts:
            self.emit(TokenEnter(start.id))
            queue.append(_Token(start.id))

        while queue:
            self.step()
            token = queue.popleft()
            node = self.model.index[token.node_id]

            if isinstance(node, m.EndEvent):  # pragma: no cover - ends earlier
                self.emit(TokenEnd(node.id))
                continue

            if isinstance(node, m.Task):
                token.last_output = self.execute_task(node)
            elif isinstance(node, m.Gateway) and node.agentic is not None:
                if node.agentic.direction is m.GatewayDirection.DIVERGING:
                    region = m.find_merge_for(self.model, node.id)
                    winner = self.execute_region(region, token.last_output)
                    merge_gw = self.model.index[region.merging_gateway_id]
                    self.emit(TokenEnter(merge_gw.id))
                    token = _Token(merge_gw.id, winner)
                    node = merge_gw
                # merging agentic gateways reached directly pass through
            elif isinstance(node, m.Gateway):
                if node.kind is m.GatewayKind.EXCLUSIVE:
                    flows = self.route_exclusive(node, token)
                    self.advance(token, flows, queue)
                    continue
                if node.kind is m.GatewayKind.INCLUSIVE and len(
                    self.model.outgoing(node.id)
                ) > 1:
                    flows = self.route_inclusive(node, token)
                    self.advance(token, flows, queue)
                    continue
                incoming = self.model.incoming(node.id)
                if len(incoming) > 1:  # join: wait for all incoming edges
                    arrived = self.joins.get(node.id, 0) + 1
                    self.joins[node.id] = arrived
                    if token.last_output is not None:
                        self.join_outputs[node.id] = token.last_output
                    if arrived < len(incoming):
                        continue
                    self.joins[node.id] = 0
                    token.last_output = self.join_outputs.get(node.id)

            message_region = self.message_region_after(token.node_id)
            if message_region is not None:
                winner = self.execute_message_region(*message_region)
                if winner is not None:
                    out_flow, back_flow = message_region[0], message_region[1]
                    target = self.model.index[back_flow.target_id]
                    if isinstance(target, m.EndEvent):
                        self.emit(TokenEnd(target.id))
                    else:
                        self.emit(TokenEnter(target.id))
                        queue.append(_Token(target.id, winner))
                    if not self.model.outgoing(token.node_id):
                        continue

            self.advance(token, self.model.outgoing(token.node_id), queue)
        return self.trace

    def advance(self, token, flows, queue):
        for flow in sorted(flows, key=lambda f: f.id):
            target = self.model.index[flow.target_id]
            if isinstance(target, m.EndEvent):
                self.emit(TokenEnd(target.id))
            else:
                self.emit(TokenEnter(target.id))
                queue.append(_Token(target.id, token.last_output))


def run_simulation(model: m.ProcessModel, scenario: ScenarioPolicy) -> Trace:
    """Execute the model under the scenario; the trace is deterministic."""
    from hagent.validate import validate_model
    from hagent.xmlio import Severity

    errors = [d for d in validate_model(model) if d.severity is Severity.ERROR]
    if errors:
        codes = ", ".join(sorted({d.code for d in errors}))
        raise SimulationError(f"model has validation errors: {codes}")
    return _Simulation(model, scenario).run()


def execute_region(
    model: m.ProcessModel,
    region: m.CollaborationRegion,
    scenario: ScenarioPolicy,
    context_label: Optional[CandidateOutput] = None,
) -> Tuple[CandidateOutput, List[TraceEvent]]:
    """Execute one collaboration region in isolation."""
    sim = _Simulation(model, scenario)
    winner = sim.execute_region(region, context_label)
    return winner, sim.trace.events


# -- scenario files ---------------------------------------------------------


def _load_output(raw: dict) -> CandidateOutput:
    confidence = raw.get("confidence")
    return CandidateOutput(
        label=str(raw["label"]),
        payload=str(raw.get("payload", "")),
        confidence=m.TrustScore(int(confidence)) if confidence is not None else None,
        latency_ms=raw.get("latencyMs"),
        completeness=raw.get("completeness"),
    )


def load_scenario(text) -> ScenarioPolicy:
    """Load a scenario from YAML text or bytes."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    raw = yaml.safe_load(text) or {}
    per_task = {}
    for task_id, spec in (raw.get("tasks") or {}).items():
        spec = spec or {}
        per_task[str(task_id)] = ScriptedBehavior(
            outputs=[_load_output(o) for o in spec.get("outputs", [])],
            reflection_verdicts=[str(v) for v in spec.get("reflectionVerdicts", [])],
            vote=spec.get("vote"),
            latency_ms=spec.get("latencyMs"),
            completeness=spec.get("completeness"),
            latency_jitter_ms=spec.get("latencyJitterMs"),
        )
    per_lane = {}
    for lane_id, spec in (raw.get("lanes") or {}).items():
        spec = spec or {}
        per_lane[str(lane_id)] = LaneScript(
            reflection_verdicts=[str(v) for v in spec.get("reflectionVerdicts", [])],
            vote=spec.get("vote"),
            manager_pick=spec.get("managerPick"),
        )
    return ScenarioPolicy(
        per_task=per_task, per_lane=per_lane, seed=int(raw.get("seed", 0))
    )
