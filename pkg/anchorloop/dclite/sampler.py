"""
Forward sampling of clause programs.

`sample_world` grounds every clause over the full horizon. `query` and `sample_values`
ground on demand: only the variables an event touches (and their ancestors) are drawn,
which gives the same distribution at a fraction of the cost.
"""

from __future__ import annotations

import logging
import math
import operator
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import regex

from ..errors import ProgramError
from .distributions import Value, make_distribution
from .program import (
    PARTITIONS,
    BetweenCondition,
    BindCondition,
    Clause,
    CompareCondition,
    Program,
    dependency_order,
    evaluate,
    evaluate_params,
    is_variable,
)

logger = logging.getLogger(__name__)

Key = Tuple[str, Tuple[Any, ...], Optional[int]]
Env = Dict[str, Any]

COMPARATORS: Dict[str, Callable[[Any, Any], bool]] = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "==": operator.eq,
    "=": operator.eq,
    "!=": operator.ne,
}


def _streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """Static and time-0 draws use the first stream, transitions the second."""
    base, transition = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(base), np.random.default_rng(transition)


def _same(a: Any, b: Any) -> bool:
    try:
        return bool(a == b)
    except ValueError:
        return bool(np.array_equal(a, b))


class _ClauseIndex:
    def __init__(self, program: Program) -> None:
        self.program = program
        self.by_head: Dict[Tuple[str, str], List[Clause]] = {}
        for partition in PARTITIONS:
            for clause in dependency_order(program, partition):
                self.by_head.setdefault((partition, clause.head), []).append(clause)


class Grounder:
    """Memoized grounding of one sampled world."""

    def __init__(
        self,
        index: _ClauseIndex,
        horizon: int,
        base_rng: np.random.Generator,
        transition_rng: np.random.Generator,
    ) -> None:
        self.index = index
        self.horizon = horizon
        self.base_rng = base_rng
        self.transition_rng = transition_rng
        self.values: Dict[Key, Value] = {}
        self._undefined: set[Key] = set()
        self._complete: set[Tuple[str, Optional[int]]] = set()
        self._active: set[Any] = set()

    def _partition(self, time: Optional[int]) -> Optional[str]:
        if time is None:
            return "static"
        if time == 0:
            return "initial"
        if 1 <= time <= self.horizon:
            return "transition"
        return None

    def _slice(self, partition: str, time: Optional[int]) -> int:
        # the "t" of a clause body: 0 for initial clauses, time-1 for a transition into `time`
        if partition == "transition":
            assert time is not None
            return time - 1
        return 0

    def _resolve_time(self, cond: BindCondition, partition: str, slice_t: int, clause: Clause) -> Optional[int]:
        if cond.time is None:
            return None
        if cond.time == "t":
            return slice_t
        if partition != "transition":
            raise ProgramError("t+1 is only available in transition clauses", clause.label)
        return slice_t + 1

    def get(self, name: str, args: Sequence[Any] = (), time: Optional[int] = None) -> Optional[Value]:
        """Value of a grounded variable, or None when no clause defines it."""
        key: Key = (name, tuple(args), time)
        if key in self.values:
            return self.values[key]
        if key in self._undefined or (name, time) in self._complete:
            return None
        partition = self._partition(time)
        if partition is None:
            return None
        if key in self._active:
            raise ProgramError(f"cyclic dependency while grounding {name}{tuple(args)}@{time}")
        self._active.add(key)
        try:
            slice_t = self._slice(partition, time)
            found: Optional[Tuple[Clause, Env]] = None
            for clause in self.index.by_head.get((partition, name), []):
                env = self._unify_head(clause, key[1])
                if env is None:
                    continue
                for solution in self._solve(clause, env, partition, slice_t):
                    if found is not None:
                        raise ProgramError(
                            f"grounded variable {name}{tuple(args)} is defined more than once", clause.label
                        )
                    found = (clause, solution)
            if found is None:
                self._undefined.add(key)
                return None
            self.values[key] = self._draw(found[0], found[1], partition)
            return self.values[key]
        finally:
            self._active.discard(key)

    def ground_all(self, name: str, time: Optional[int]) -> List[Key]:
        """Every defined grounding of `name` at `time`, in sampling order."""
        marker = (name, time)
        if marker not in self._complete:
            partition = self._partition(time)
            if partition is not None:
                if marker in self._active:
                    raise ProgramError(f"cyclic dependency while grounding {name}@{time}")
                self._active.add(marker)
                try:
                    self._ground_forward(name, time, partition)
                finally:
                    self._active.discard(marker)
            self._complete.add(marker)
        return [k for k in self.values if k[0] == name and k[2] == time]

    def _ground_forward(self, name: str, time: Optional[int], partition: str) -> None:
        slice_t = self._slice(partition, time)
        produced: set[Key] = set()
        for clause in self.index.by_head.get((partition, name), []):
            for env in self._solve(clause, {}, partition, slice_t):
                args = []
                for arg in clause.args:
                    if is_variable(arg):
                        if arg not in env:
                            raise ProgramError(f"head argument '{arg}' is never bound", clause.label)
                        args.append(env[arg])
                    else:
                        args.append(arg)
                key: Key = (name, tuple(args), time)
                if key in produced:
                    raise ProgramError(f"grounded variable {name}{tuple(args)} is defined more than once", clause.label)
                produced.add(key)
                if key not in self.values:
                    self._undefined.discard(key)
                    self.values[key] = self._draw(clause, env, partition)

    def _unify_head(self, clause: Clause, args: Tuple[Any, ...]) -> Optional[Env]:
        if len(clause.args) != len(args):
            return None
        env: Env = {}
        for pattern, value in zip(clause.args, args):
            if is_variable(pattern):
                if pattern in env and not _same(env[pattern], value):
                    return None
                env[pattern] = value
            elif not _same(pattern, value):
                return None
        return env

    def _solve(self, clause: Clause, env: Env, partition: str, slice_t: int) -> Iterator[Env]:
        envs: List[Env] = [dict(env)]
        for cond in clause.body:
            nxt: List[Env] = []
            for current in envs:
                nxt.extend(self._apply(cond, current, clause, partition, slice_t))
            envs = nxt
            if not envs:
                break
        return iter(envs)

    def _apply(self, cond: Any, env: Env, clause: Clause, partition: str, slice_t: int) -> List[Env]:
        if isinstance(cond, BindCondition):
            return self._apply_bind(cond, env, clause, partition, slice_t)
        if isinstance(cond, BetweenCondition):
            low = evaluate(cond.low, env, clause)
            high = evaluate(cond.high, env, clause)
            lo, hi = int(math.ceil(float(low))), int(math.floor(float(high)))
            if cond.var in env:
                value = env[cond.var]
                ok = float(value) == int(value) and lo <= int(value) <= hi
                return [env] if ok else []
            return [{**env, cond.var: p} for p in range(lo, hi + 1)]
        if isinstance(cond, CompareCondition):
            lhs = evaluate(cond.lhs, env, clause)
            rhs = evaluate(cond.rhs, env, clause)
            try:
                return [env] if COMPARATORS[cond.cmp](lhs, rhs) else []
            except TypeError as exc:
                raise ProgramError(f"cannot compare {lhs!r} {cond.cmp} {rhs!r}", clause.label) from exc
        raise ProgramError(f"unsupported condition {cond!r}", clause.label)

    def _apply_bind(
        self, cond: BindCondition, env: Env, clause: Clause, partition: str, slice_t: int
    ) -> List[Env]:
        time = self._resolve_time(cond, partition, slice_t, clause)
        pattern = [env.get(a, a) if is_variable(a) else a for a in cond.args]
        wildcards = [i for i, a in enumerate(cond.args) if is_variable(a) and a not in env]
        if not wildcards:
            value = self.get(cond.rv, pattern, time)
            return self._bind_value(cond.var, value, env)
        results: List[Env] = []
        for key in self.ground_all(cond.rv, time):
            args = key[1]
            if len(args) != len(pattern):
                continue
            extended = dict(env)
            ok = True
            for i, arg in enumerate(args):
                if i in wildcards:
                    var = cond.args[i]
                    if var in extended and not _same(extended[var], arg):
                        ok = False
                        break
                    extended[var] = arg
                elif not _same(pattern[i], arg):
                    ok = False
                    break
            if ok:
                results.extend(self._bind_value(cond.var, self.values[key], extended))
        return results

    @staticmethod
    def _bind_value(var: str, value: Optional[Value], env: Env) -> List[Env]:
        if value is None:
            return []
        if var in env:
            return [env] if _same(env[var], value) else []
        return [{**env, var: value}]

    def _draw(self, clause: Clause, env: Env, partition: str) -> Value:
        params = evaluate_params(clause.dist.params, env, clause)
        try:
            distribution = make_distribution(clause.dist.tag, params)
        except ProgramError as exc:
            raise ProgramError(str(exc), clause.label) from exc
        rng = self.transition_rng if partition == "transition" else self.base_rng
        return distribution.sample(rng)


def _format_key(key: Key) -> str:
    name, args, time = key
    text = name
    if args:
        text += "(" + ",".join(str(a) for a in args) + ")"
    if time is not None:
        text += f"@{time}"
    return text


@dataclass(frozen=True)
class World:
    """Assignment of every grounded variable of one sample."""

    values: Dict[Key, Value]

    def get(self, name: str, args: Sequence[Any] = (), time: Optional[int] = None) -> Optional[Value]:
        return self.values.get((name, tuple(args), time))

    def __len__(self) -> int:
        return len(self.values)

    def to_dict(self) -> Dict[str, Any]:
        return {_format_key(k): (list(v) if isinstance(v, tuple) else v) for k, v in self.values.items()}


def sample_world(program: Program, horizon: int, rng_seed: int) -> World:
    if horizon < 0:
        raise ProgramError(f"horizon must be >= 0, got {horizon}")
    index = _ClauseIndex(program)
    base_rng, transition_rng = _streams(rng_seed)
    grounder = Grounder(index, horizon, base_rng, transition_rng)
    for clause in dependency_order(program, "static"):
        grounder.ground_all(clause.head, None)
    for clause in dependency_order(program, "initial"):
        grounder.ground_all(clause.head, 0)
    transitions = dependency_order(program, "transition")
    for t in range(1, horizon + 1):
        for clause in transitions:
            grounder.ground_all(clause.head, t)
    return World(dict(grounder.values))


EVENT_PATTERN = regex.compile(
    r"""^\s*(?P<name>[a-z_][\w\-]*)\s*
        (?:\(\s*(?P<args>[^()]*?)\s*\))?\s*
        (?:@\s*(?P<time>\d+))?\s*
        (?P<op>==|!=|<=|>=|=|<|>)\s*
        (?P<value>\S+)\s*$""",
    regex.VERBOSE,
)


def parse_atom(text: str) -> Any:
    text = text.strip()
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


@dataclass(frozen=True)
class Event:
    """`name(args)[@time] OP value`, or the always-true event when `name` is None."""

    name: Optional[str] = None
    args: Tuple[Any, ...] = ()
    time: Optional[int] = None
    op: str = "=="
    value: Any = None

    @classmethod
    def parse(cls, text: str) -> "Event":
        if text.strip().lower() == "true":
            return cls()
        match = EVENT_PATTERN.match(text)
        if match is None:
            raise ProgramError(f"cannot parse event '{text}'")
        raw_args = match.group("args")
        args = tuple(parse_atom(a) for a in raw_args.split(",")) if raw_args else ()
        time = int(match.group("time")) if match.group("time") is not None else None
        return cls(match.group("name"), args, time, match.group("op"), parse_atom(match.group("value")))

    def holds(self, view: Any) -> bool:
        if self.name is None:
            return True
        actual = view.get(self.name, self.args, self.time)
        if actual is None:
            return False
        try:
            return bool(COMPARATORS[self.op](actual, self.value))
        except TypeError as exc:
            raise ProgramError(f"cannot compare {actual!r} {self.op} {self.value!r}") from exc


EventLike = Union[str, Event, Callable[[Any], bool]]


def _as_predicate(event: EventLike) -> Callable[[Any], bool]:
    if isinstance(event, str):
        event = Event.parse(event)
    if isinstance(event, Event):
        return event.holds
    return event


@dataclass(frozen=True)
class QueryResult:
    probability: float
    stderr: float
    n_samples: int

    def to_dict(self) -> Dict[str, Any]:
        return {"probability": self.probability, "stderr": self.stderr, "n_samples": self.n_samples}


def query(program: Program, horizon: int, event: EventLike, n_samples: int, seed: int) -> QueryResult:
    """Fraction of independently sampled worlds in which `event` holds."""
    if n_samples < 1:
        raise ProgramError("n_samples must be >= 1")
    predicate = _as_predicate(event)
    index = _ClauseIndex(program)
    base_rng, transition_rng = _streams(seed)
    hits = 0
    for _ in range(n_samples):
        grounder = Grounder(index, horizon, base_rng, transition_rng)
        if predicate(grounder):
            hits += 1
    p = hits / n_samples
    logger.debug("query over %d worlds: p=%.6f", n_samples, p)
    return QueryResult(probability=p, stderr=math.sqrt(p * (1.0 - p) / n_samples), n_samples=n_samples)


def sample_values(
    program: Program,
    horizon: int,
    name: str,
    args: Sequence[Any] = (),
    time: Optional[int] = None,
    n_samples: int = 1,
    seed: int = 0,
) -> List[Optional[Value]]:
    """Draw one grounded variable from `n_samples` worlds; None where it is undefined."""
    index = _ClauseIndex(program)
    base_rng, transition_rng = _streams(seed)
    return [
        Grounder(index, horizon, base_rng, transition_rng).get(name, args, time)
        for _ in range(n_samples)
    ]
