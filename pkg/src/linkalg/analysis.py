"""Analyses on an explored pLTS: deadlock freedom, eventualities and minimal probabilities.

Minimal reachability is computed exactly.  States from which some scheduler
avoids the postcondition with probability one are found by a graph fixpoint;
on the remaining states policy iteration is run, and every policy is evaluated
by solving its Markov chain exactly (strongly connected components in reverse
topological order, sparse elimination inside each component).  Memoryless
deterministic schedulers suffice for minimal reachability on finite MDPs, so
the fixpoint of policy iteration is the infimum over all schedulers.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .data import DEFAULT_DURATIONS, Cts, DurationConfig, NodeId, is_new
from .network import Network, cntd
from .node import ANY, Action, label_matches
from .plts import Edge, Plts

ZERO = Fraction(0)
ONE = Fraction(1)

StateCondition = Callable[[Network], bool]


@dataclass(frozen=True)
class EventualityQuery:
    """``G(pre => F post)``: after every matching pre-transition, some post label eventually occurs.

    ``pre_label`` (a label pattern) and ``pre_state`` (a condition on the
    source state) select the pre-transitions; either may be ``None`` (any).
    With ``count_initial`` the pre-transition itself may discharge the
    postcondition.
    """

    post: tuple[Action, ...]
    pre_label: Action | None = None
    pre_state: StateCondition | None = None
    count_initial: bool = False
    name: str = "eventuality"

    def is_post(self, label: Action) -> bool:
        return any(label_matches(p, label) for p in self.post)


TOPOLOGY_CHANGES = (Action("connect", (ANY, ANY)), Action("disconnect", (ANY, ANY)))


def packet_delivery(src: NodeId, data, dest: NodeId, *, weak: bool = False) -> EventualityQuery:
    """Once ``src`` accepts ``data`` for a connected ``dest``, ``dest`` delivers it
    (or the topology changes; with ``weak`` also any further injection)."""
    post = (Action("deliver", (dest, data)),) + TOPOLOGY_CHANGES
    if weak:
        post += (Action("newpkt", ()),)
    return EventualityQuery(
        post=post,
        pre_label=Action("newpkt", (src, data, dest)),
        pre_state=lambda net: cntd(net, src, dest),
        name=("weak " if weak else "") + f"packet delivery {src}->{dest} ({data})",
    )


def after_cts(receiver: NodeId, sender: NodeId, data, *, count_initial: bool = False,
              durations: DurationConfig = DEFAULT_DURATIONS) -> EventualityQuery:
    """Packet delivery from every state in which all nodes in range of
    ``receiver`` have just completed receiving its CTS to ``sender``."""

    def pre(net: Network) -> bool:
        rx = net.node(receiver)
        if not rx.range:
            return False
        for nid in rx.range:
            rfr = net.node(nid).state.xi["rfr"]
            m = getattr(rfr, "m", None)
            if not (isinstance(m, Cts) and m.src == receiver and m.dest == sender):
                return False
            if not is_new(rfr, m, durations):
                return False
        return True

    return EventualityQuery(
        post=(Action("deliver", (receiver, data)),) + TOPOLOGY_CHANGES,
        pre_state=pre,
        count_initial=count_initial,
        name=f"packet delivery {sender}->{receiver} ({data}) after CTS",
    )


def pre_edges(p: Plts, q: EventualityQuery) -> list[tuple[int, int]]:
    out = []
    cache: dict[int, bool] = {}
    for s, k, e in p.transitions():
        if q.pre_label is not None and not label_matches(q.pre_label, e.label):
            continue
        if q.pre_state is not None:
            ok = cache.get(s)
            if ok is None:
                ok = cache[s] = bool(q.pre_state(p.states[s]))
            if not ok:
                continue
        out.append((s, k))
    return out


# ------------------------------------------------------------ deadlock check

@dataclass
class DeadlockReport:
    ok: bool
    checked: int
    skipped_truncated: int
    offending: list[int] = field(default_factory=list)


PROGRESS = frozenset({"tick", "tau", "deliver"})


def check_deadlock_freedom(p: Plts) -> DeadlockReport:
    """Every expanded state can tick, deliver or do an internal step without help
    from the environment (injections suppressed)."""
    bad = []
    checked = 0
    for s, net in enumerate(p.states):
        if s in p.truncated:
            continue
        checked += 1
        trs = p.model.transitions(net, env_enabled=False)
        if not any(t.label.kind in PROGRESS for t in trs):
            bad.append(s)
    return DeadlockReport(not bad, checked, len(p.truncated), bad)


# ---------------------------------------------------------------- holds outright

@dataclass
class Path:
    """Steps ``(state, edge index, successor)`` from the root; if ``loop_from`` is
    set the suffix starting at that step repeats forever."""

    steps: list[tuple[int, int, int]]
    loop_from: int | None = None
    pre_step: int | None = None

    def labels(self, p: Plts) -> list[Action]:
        return [p.edges[s][k].label for s, k, _t in self.steps]


@dataclass
class OutrightResult:
    verdict: str                  # "holds" | "fails" | "unknown"
    pre_transitions: int
    counterexample: Path | None = None
    unknown_at: tuple[int, int] | None = None

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"


def _avoid_sets(p: Plts, q: EventualityQuery) -> tuple[set[int], set[int], list[set[int]]]:
    """States with a complete post-avoiding path, and states that can reach the
    truncated frontier without a post label."""
    n = len(p.states)
    succ: list[set[int]] = [set() for _ in range(n)]
    pred: list[set[int]] = [set() for _ in range(n)]
    for s, _k, e in p.transitions():
        if q.is_post(e.label):
            continue
        for t, _w in e.dist:
            succ[s].add(t)
            pred[t].add(s)
    alive = [True] * n
    count = [len(succ[s]) for s in range(n)]
    work = deque(s for s in range(n) if count[s] == 0 and not p.is_deadlock(s))
    for s in work:
        alive[s] = False
    while work:
        t = work.popleft()
        for s in pred[t]:
            if alive[s]:
                count[s] -= 1
                if count[s] == 0 and not p.is_deadlock(s):
                    alive[s] = False
                    work.append(s)
    bad = {s for s in range(n) if alive[s]}
    frontier_reach = set(p.truncated)
    work = deque(p.truncated)
    while work:
        t = work.popleft()
        for s in pred[t]:
            if s not in frontier_reach:
                frontier_reach.add(s)
                work.append(s)
    return bad, frontier_reach, succ


def holds_outright(p: Plts, q: EventualityQuery) -> OutrightResult:
    bad, frontier_reach, succ = _avoid_sets(p, q)
    pres = pre_edges(p, q)
    unknown = None
    for s, k in pres:
        e = p.edges[s][k]
        if q.count_initial and q.is_post(e.label):
            continue
        for t, _w in e.dist:
            if t in bad:
                return OutrightResult("fails", len(pres), _lasso(p, q, bad, s, k, t))
        if unknown is None and any(t in frontier_reach for t, _w in e.dist):
            unknown = (s, k)
    if unknown is not None:
        return OutrightResult("unknown", len(pres), unknown_at=unknown)
    return OutrightResult("holds", len(pres))


def _lasso(p: Plts, q: EventualityQuery, bad: set[int], s: int, k: int, t: int) -> Path:
    prefix = p.path_to(s)
    targets = [x for x, _k in prefix[1:]] + [s]
    steps = [(ps, pk, nxt) for (ps, pk), nxt in zip(prefix, targets)]
    pre_step = len(steps)
    steps.append((s, k, t))
    seen = {t: len(steps)}
    cur = t
    while True:
        if p.is_deadlock(cur):
            return Path(steps, None, pre_step)
        move = None
        for ek, e in enumerate(p.edges[cur]):
            if q.is_post(e.label):
                continue
            for nxt, _w in e.dist:
                if nxt in bad:
                    move = (ek, nxt)
                    break
            if move:
                break
        assert move is not None, "avoid set is not closed"
        ek, nxt = move
        steps.append((cur, ek, nxt))
        if nxt in seen:
            return Path(steps, seen[nxt], pre_step)
        seen[nxt] = len(steps)
        cur = nxt


# ---------------------------------------------------------- minimal probability

@dataclass
class ReachValues:
    values: list[Fraction]
    post_edge: Callable[[Edge], bool]
    count_initial: bool = False

    def of_edge(self, e: Edge) -> Fraction:
        if self.post_edge(e):
            return ONE
        return sum((w * self.values[t] for t, w in e.dist), ZERO)

    def of_transition(self, e: Edge) -> Fraction:
        """Value of a pre-transition taken as the initial transition."""
        if self.count_initial and self.post_edge(e):
            return ONE
        return sum((w * self.values[t] for t, w in e.dist), ZERO)


def min_reach_values(p: Plts, post: Sequence[Action], *, frontier_value: Fraction = ZERO,
                     count_initial: bool = False) -> ReachValues:
    """Minimal probability, over all schedulers, of eventually taking a post-labelled transition.

    Truncated states count as ``frontier_value`` (0 gives a sound lower bound).
    """
    def is_post(e: Edge) -> bool:
        return any(label_matches(x, e.label) for x in post)

    n = len(p.states)
    fixed: dict[int, Fraction] = {}
    zero = _prob0e(p, is_post, frontier_value)
    for s in zero:
        fixed[s] = ZERO
    if frontier_value != ZERO:
        for s in p.truncated:
            fixed[s] = frontier_value
    maybe = [s for s in range(n) if s not in fixed]

    def q(s: int, e: Edge, v: list) -> Fraction:
        if is_post(e):
            return ONE
        return sum((w * v[t] for t, w in e.dist), ZERO)

    # start from the greedy choice under the all-ones optimistic guess
    policy = {}
    for s in maybe:
        best = None
        for k, e in enumerate(p.edges[s]):
            if is_post(e):
                continue
            best = k if best is None else best
            if all(t in fixed for t, _w in e.dist):
                best = k
                break
        policy[s] = 0 if best is None else best

    values: list = [ZERO] * n
    for s, v in fixed.items():
        values[s] = v
    while True:
        sol = _evaluate_policy(p, maybe, policy, fixed, is_post)
        for s in maybe:
            values[s] = sol[s]
        changed = False
        for s in maybe:
            cur = q(s, p.edges[s][policy[s]], values)
            for k, e in enumerate(p.edges[s]):
                if k == policy[s]:
                    continue
                val = q(s, e, values)
                if val < cur:
                    cur = val
                    policy[s] = k
                    changed = True
        if not changed:
            break
    return ReachValues(values, is_post, count_initial)


def _prob0e(p: Plts, is_post, frontier_value: Fraction) -> set[int]:
    """States from which some scheduler avoids every post transition almost surely."""
    n = len(p.states)
    in_z = [True] * n
    good: list[int] = [0] * n         # non-post edges whose support lies inside Z
    outside: dict[tuple[int, int], int] = {}
    users: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    work = deque()
    for s in range(n):
        if s in p.truncated:
            if frontier_value != ZERO:
                in_z[s] = False
                work.append(s)
            continue
        if not p.edges[s]:
            continue
        for k, e in enumerate(p.edges[s]):
            if is_post(e):
                continue
            good[s] += 1
            outside[(s, k)] = 0
            for t, _w in e.dist:
                users[t].append((s, k))
        if good[s] == 0:
            in_z[s] = False
            work.append(s)
    while work:
        t = work.popleft()
        for s, k in users[t]:
            if not in_z[s]:
                continue
            outside[(s, k)] += 1
            if outside[(s, k)] == 1:
                good[s] -= 1
                if good[s] == 0:
                    in_z[s] = False
                    work.append(s)
    return {s for s in range(n) if in_z[s]}


def _evaluate_policy(p: Plts, maybe: list[int], policy: dict, fixed: dict,
                     is_post) -> dict[int, Fraction]:
    """Exact reachability values of the Markov chain induced by ``policy``."""
    rows: dict[int, dict[int, Fraction]] = {}
    const: dict[int, Fraction] = {}
    for s in maybe:
        e = p.edges[s][policy[s]]
        if is_post(e):
            rows[s], const[s] = {}, ONE
            continue
        c = ZERO
        r: dict[int, Fraction] = {}
        for t, w in e.dist:
            if t in fixed:
                c += w * fixed[t]
            else:
                r[t] = r.get(t, ZERO) + w
        rows[s], const[s] = r, c
    out: dict[int, Fraction] = {}
    for comp in _sccs(maybe, rows):
        members = set(comp)
        local_rows = {}
        for s in comp:
            c = const[s]
            r = {}
            for t, w in rows[s].items():
                if t in members:
                    r[t] = w
                else:
                    c += w * out[t]
            local_rows[s] = (c, r)
        out.update(_solve_component(comp, local_rows))
    return out


def _sccs(nodes: list[int], rows: dict[int, dict]) -> list[list[int]]:
    """Tarjan's algorithm (iterative); components come out sinks first."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(rows[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(rows[w])))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def _solve_component(comp: list[int], local: dict[int, tuple]) -> dict[int, Fraction]:
    """Solve ``x_s = c_s + sum a_st x_t`` inside one component by elimination."""
    if len(comp) == 1:
        s = comp[0]
        c, r = local[s]
        a = r.get(s, ZERO)
        return {s: c / (1 - a) if a else c}
    const = {s: local[s][0] for s in comp}
    rows = {s: dict(local[s][1]) for s in comp}
    refs: dict[int, set[int]] = {s: set() for s in comp}
    for s in comp:
        for t in rows[s]:
            refs[t].add(s)
    order = sorted(comp, key=lambda s: (len(rows[s]) * len(refs[s]), s))
    for s in order:
        row = rows[s]
        a = row.pop(s, None)
        refs[s].discard(s)
        if a:
            f = 1 / (1 - a)
            const[s] *= f
            for t in row:
                row[t] *= f
        cs = const[s]
        for r in list(refs[s]):
            rr = rows[r]
            coef = rr.pop(s)
            const[r] += coef * cs
            for t, w in row.items():
                nw = rr.get(t, ZERO) + coef * w
                rr[t] = nw
                refs[t].add(r)
        refs[s] = set()
        for t in row:
            refs[t].discard(s)
            refs[t].add(s)
    # every row is now expressed through rows eliminated later; back-substitute
    values: dict[int, Fraction] = {}
    for s in reversed(order):
        values[s] = const[s] + sum((w * values[t] for t, w in rows[s].items()), ZERO)
    return values


@dataclass
class MinProbResult:
    value: Fraction                 # sound lower bound (frontier counted as failure)
    upper: Fraction                 # frontier counted as success
    pre_transitions: int
    worst: tuple[int, int] | None = None

    @property
    def exact(self) -> bool:
        return self.value == self.upper

    @property
    def truncated(self) -> bool:
        return not self.exact


def min_prob(p: Plts, edge: tuple[int, int], post: Sequence[Action], *,
             count_initial: bool = True) -> MinProbResult:
    """Minimal probability of a post label once ``edge`` (state, index) is taken."""
    lo = min_reach_values(p, post, count_initial=count_initial)
    hi = min_reach_values(p, post, frontier_value=ONE, count_initial=count_initial)
    e = p.edges[edge[0]][edge[1]]
    return MinProbResult(lo.of_transition(e), hi.of_transition(e), 1, edge)


def min_prob_from_root(p: Plts, post: Sequence[Action]) -> MinProbResult:
    lo = min_reach_values(p, post)
    hi = min_reach_values(p, post, frontier_value=ONE)
    return MinProbResult(lo.values[p.initial], hi.values[p.initial], 0, None)


@dataclass
class ProbVerdict:
    verdict: str            # "holds" | "fails" | "unknown"
    threshold: Fraction
    result: MinProbResult


def prob_at_least(p: Plts, q: EventualityQuery, threshold: Fraction | float | int = 1) -> ProbVerdict:
    """Does every pre-transition reach the postcondition with probability >= threshold?"""
    threshold = Fraction(threshold)
    pres = pre_edges(p, q)
    lo = min_reach_values(p, q.post, count_initial=q.count_initial)
    hi = min_reach_values(p, q.post, frontier_value=ONE, count_initial=q.count_initial)
    best_lo, best_hi, worst = ONE, ONE, None
    for s, k in pres:
        e = p.edges[s][k]
        v = lo.of_transition(e)
        if worst is None or v < best_lo:
            best_lo, worst = v, (s, k)
        best_hi = min(best_hi, hi.of_transition(e))
    res = MinProbResult(best_lo, best_hi, len(pres), worst)
    if best_lo >= threshold:
        verdict = "holds"
    elif best_hi < threshold:
        verdict = "fails"
    else:
        verdict = "unknown"
    return ProbVerdict(verdict, threshold, res)


# ------------------------------------------------------------ uniform scheduler

def uniform_bounded_prob(p: Plts, post: Sequence[Action], ticks: int,
                         start: int | None = None) -> Fraction:
    """Probability of a post label within ``ticks`` ticks when every choice between
    transitions is resolved uniformly at random (exact)."""
    def is_post(e: Edge) -> bool:
        return any(label_matches(x, e.label) for x in post)

    memo: dict[tuple[int, int], Fraction] = {}
    start = p.initial if start is None else start
    root = (start, ticks)
    stack = [root]
    on_path: set = set()
    while stack:
        key = stack[-1]
        if key in memo:
            stack.pop()
            continue
        s, k = key
        if s in p.truncated:
            raise ValueError("uniform bounded probability reached the truncated frontier; "
                             "explore with a larger horizon")
        edges = p.edges[s]
        pending = []
        for e in edges:
            if is_post(e):
                continue
            nk = k - 1 if e.label.kind == "tick" else k
            if nk < 0:
                continue
            for t, _w in e.dist:
                if (t, nk) not in memo:
                    pending.append((t, nk))
        if pending:
            if key in on_path:
                raise ValueError("cycle of instantaneous transitions")
            on_path.add(key)
            stack.extend(pending)
            continue
        on_path.discard(key)
        stack.pop()
        if not edges:
            memo[key] = ZERO
            continue
        total = ZERO
        for e in edges:
            if is_post(e):
                total += ONE
                continue
            nk = k - 1 if e.label.kind == "tick" else k
            if nk < 0:
                continue
            total += sum((w * memo[(t, nk)] for t, w in e.dist), ZERO)
        memo[key] = total / len(edges)
    return memo[root]
