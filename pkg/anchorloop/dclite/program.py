"""
Program schema for the clause engine.

A program is JSON: {"static": [...], "initial": [...], "transition": [...]}. A clause is
{"head", "args", "time", "dist": {"tag", "params"}, "body": [condition, ...]}. Strings that
start with an uppercase letter or "_" are logic variables; every other string is an atom.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Mapping, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ProgramError

Arg = Union[int, str]
TimeRef = Optional[Literal["t", "t+1"]]

BINARY_OPS = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
}


def is_variable(term: Any) -> bool:
    return isinstance(term, str) and bool(term) and (term[0].isupper() or term[0] == "_")


class DistSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tag: Literal["poisson", "uniform", "gaussian", "finite"]
    params: Dict[str, Any]


class BindCondition(BaseModel):
    """`Var ~= rv(args)[time]`: binds Var to the sampled value; unbound args range over groundings."""

    model_config = ConfigDict(extra="forbid")

    op: Literal["bind"]
    var: str
    rv: str
    args: List[Arg] = Field(default_factory=list)
    time: TimeRef = None


class BetweenCondition(BaseModel):
    model_config = ConfigDict(extra="forbid")

    op: Literal["between"]
    low: Any
    high: Any
    var: str


class CompareCondition(BaseModel):
    model_config = ConfigDict(extra="forbid")

    op: Literal["compare"]
    lhs: Any
    cmp: Literal["<", "<=", ">", ">=", "==", "!="]
    rhs: Any


Condition = Annotated[
    Union[BindCondition, BetweenCondition, CompareCondition], Field(discriminator="op")
]


class Clause(BaseModel):
    model_config = ConfigDict(extra="forbid")

    head: str
    args: List[Arg] = Field(default_factory=list)
    time: Optional[Union[Literal["t+1"], Literal[0]]] = None
    dist: DistSpec
    body: List[Condition] = Field(default_factory=list)

    @property
    def label(self) -> str:
        text = self.head
        if self.args:
            text += "(" + ",".join(str(a) for a in self.args) + ")"
        if self.time is not None:
            text += f"@{self.time}"
        return text


class Program(BaseModel):
    model_config = ConfigDict(extra="forbid")

    static: List[Clause] = Field(default_factory=list)
    initial: List[Clause] = Field(default_factory=list)
    transition: List[Clause] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_time_indices(self) -> "Program":
        for clause in self.static:
            if clause.time is not None:
                raise ValueError(f"static clause '{clause.label}' must not carry a time index")
            if any(isinstance(c, BindCondition) and c.time is not None for c in clause.body):
                raise ValueError(f"static clause '{clause.label}' references a time-indexed variable")
        for clause in self.initial:
            if clause.time not in (None, 0):
                raise ValueError(f"initial clause '{clause.label}' must be indexed at time 0")
            if any(isinstance(c, BindCondition) and c.time == "t+1" for c in clause.body):
                raise ValueError(f"initial clause '{clause.label}' references t+1")
        for clause in self.transition:
            if clause.time != "t+1":
                raise ValueError(f"transition clause '{clause.label}' must define time t+1")
        return self

    def partition(self, name: str) -> List[Clause]:
        return list(getattr(self, name))


PARTITIONS: Tuple[str, ...] = ("static", "initial", "transition")


def _same_slice_edges(clause: Clause, partition: str) -> List[str]:
    deps = []
    for cond in clause.body:
        if not isinstance(cond, BindCondition):
            continue
        if partition == "static" and cond.time is None:
            deps.append(cond.rv)
        elif partition == "initial" and cond.time == "t":
            deps.append(cond.rv)
        elif partition == "transition" and cond.time == "t+1":
            deps.append(cond.rv)
    return deps


def dependency_order(program: Program, partition: str) -> List[Clause]:
    """Clauses of one partition in a stable topological order; cycles are rejected."""
    clauses = program.partition(partition)
    heads = {c.head for c in clauses}
    providers: Dict[str, List[int]] = {}
    for index, clause in enumerate(clauses):
        providers.setdefault(clause.head, []).append(index)
    deps = [
        {p for rv in _same_slice_edges(clause, partition) if rv in heads for p in providers[rv]}
        for clause in clauses
    ]
    ordered: List[int] = []
    done: set[int] = set()
    while len(ordered) < len(clauses):
        ready = [i for i in range(len(clauses)) if i not in done and deps[i] <= done]
        if not ready:
            stuck = [clauses[i].label for i in range(len(clauses)) if i not in done]
            raise ProgramError(f"cyclic dependency within one time slice among {stuck}", stuck[0])
        ordered.append(ready[0])
        done.add(ready[0])
    return [clauses[i] for i in ordered]


def evaluate(expr: Any, env: Mapping[str, Any], clause: Clause) -> Any:
    """Evaluate a parameter expression against bound variables."""
    if isinstance(expr, bool):
        return expr
    if isinstance(expr, (int, float)):
        return expr
    if isinstance(expr, str):
        if is_variable(expr):
            if expr not in env:
                raise ProgramError(f"unbound variable '{expr}'", clause.label)
            return env[expr]
        return expr
    if isinstance(expr, list):
        return np.asarray([evaluate(item, env, clause) for item in expr], dtype=float)
    if isinstance(expr, dict):
        op = expr.get("op")
        args = [evaluate(item, env, clause) for item in expr.get("args", [])]
        if op == "neg" and len(args) == 1:
            return np.negative(args[0])
        if op in BINARY_OPS and len(args) == 2:
            result = BINARY_OPS[op](np.asarray(args[0], dtype=float), np.asarray(args[1], dtype=float))
            return float(result) if np.ndim(result) == 0 else result
        raise ProgramError(f"malformed expression {expr!r}", clause.label)
    raise ProgramError(f"cannot evaluate {expr!r}", clause.label)


def evaluate_params(params: Mapping[str, Any], env: Mapping[str, Any], clause: Clause) -> Dict[str, Any]:
    evaluated: Dict[str, Any] = {}
    for key, value in params.items():
        if key == "weights":
            # [[p, v], ...]: probabilities are expressions, outcomes are atoms or numbers
            evaluated[key] = [
                (evaluate(p, env, clause), evaluate(v, env, clause) if is_variable(v) else v)
                for p, v in value
            ]
        else:
            evaluated[key] = evaluate(value, env, clause)
    return evaluated


def load_program(source: Union[str, Path, Mapping[str, Any]]) -> Program:
    """Parse a program from a path, a JSON string, or an already-decoded mapping."""
    if isinstance(source, Mapping):
        payload: Any = source
    else:
        text = Path(source).read_text(encoding="utf-8") if isinstance(source, Path) else str(source)
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProgramError(f"program is not valid JSON: {exc}") from exc
    try:
        program = Program.model_validate(payload)
    except ValidationError as exc:
        raise ProgramError(f"invalid program: {exc}") from exc
    for partition in PARTITIONS:
        dependency_order(program, partition)
    return program
