"""Explicit-state probabilistic models over integer feature vectors.

States are tuples of integers laid out by a :class:`FeatureSchema`.
Models store one outgoing distribution per state (DTMC) or per
state/action pair (MDP) as sparse `(successor, probability)` rows.
Both kinds serialize to a line-oriented text format that round-trips
floats exactly.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from typing import Iterable, Optional, TextIO, Union

StateVector = tuple[int, ...]
TransitionRow = tuple[tuple[int, float], ...]

# Tolerance for accepting an outgoing distribution as stochastic.
PROB_SUM_TOL = 1e-9


class ModelFormatError(ValueError):
    """Raised when explicit-format text is malformed or inconsistent."""


class StateCapError(RuntimeError):
    """Raised when a state-space construction exceeds its state cap."""


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered integer features with inclusive bounds."""

    names: tuple[str, ...]
    bounds: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if len(self.names) == 0:
            raise ValueError("schema needs at least one feature")
        if len(self.names) != len(self.bounds):
            raise ValueError(
                f"{len(self.names)} names but {len(self.bounds)} bounds"
            )
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate feature names")
        for name, (lo, hi) in zip(self.names, self.bounds):
            if not name or any(ch.isspace() or ch == ":" for ch in name):
                raise ValueError(f"invalid feature name {name!r}")
            if lo > hi:
                raise ValueError(f"feature {name}: min {lo} exceeds max {hi}")

    @property
    def dim(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown feature {name!r}") from None

    def check_state(self, values: StateVector) -> None:
        if len(values) != self.dim:
            raise ValueError(
                f"state has {len(values)} features, schema has {self.dim}"
            )
        for name, (lo, hi), v in zip(self.names, self.bounds, values):
            if not (lo <= v <= hi):
                raise ValueError(f"feature {name}={v} outside [{lo}, {hi}]")

    def normal_divisors(self) -> tuple[float, ...]:
        """Per-feature normalization divisors max(|min|, |max|, 1)."""
        return tuple(float(max(abs(lo), abs(hi), 1)) for lo, hi in self.bounds)


@dataclass(eq=True)
class ExplicitMdp:
    """Explicit MDP; `transitions[s][a]` is a row of (successor, prob) or None.

    A None row marks an unavailable action.  Fully built models offer
    every action in every state; induced MDPs of permissive policies
    restrict rows to the permitted actions.
    """

    schema: FeatureSchema
    states: tuple[StateVector, ...]
    actions: tuple[str, ...]
    transitions: tuple[tuple[Optional[TransitionRow], ...], ...]
    initial: int = 0
    rewards: Optional[dict[tuple[int, int], float]] = None

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_transitions(self) -> int:
        return sum(
            len(row) for per_state in self.transitions for row in per_state if row
        )

    def state_index(self) -> dict[StateVector, int]:
        cached = getattr(self, "_state_index", None)
        if cached is None:
            cached = {fv: i for i, fv in enumerate(self.states)}
            object.__setattr__(self, "_state_index", cached)
        return cached


@dataclass(eq=True)
class ExplicitDtmc:
    """Explicit DTMC; `transitions[s]` is the single outgoing row of state s."""

    schema: FeatureSchema
    states: tuple[StateVector, ...]
    transitions: tuple[TransitionRow, ...]
    initial: int = 0

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_transitions(self) -> int:
        return sum(len(row) for row in self.transitions)


Model = Union[ExplicitMdp, ExplicitDtmc]


@dataclass(frozen=True)
class Violation:
    """One structural defect found by a validator."""

    kind: str
    state: int
    action: Optional[int]
    message: str


def _check_row(
    row: TransitionRow, n_states: int, state: int, action: Optional[int]
) -> list[Violation]:
    out = []
    total = 0.0
    for dst, prob in row:
        if not (0 <= dst < n_states):
            out.append(
                Violation(
                    "bad-successor", state, action, f"successor {dst} out of range"
                )
            )
        if not (0.0 < prob <= 1.0):
            out.append(
                Violation(
                    "probability-range",
                    state,
                    action,
                    f"probability {prob!r} outside (0, 1]",
                )
            )
        total += prob
    if abs(total - 1.0) > PROB_SUM_TOL:
        out.append(
            Violation(
                "distribution-sum", state, action, f"probabilities sum to {total!r}"
            )
        )
    return out


def validate_mdp(m: ExplicitMdp) -> list[Violation]:
    """Collect structural violations; an empty list means the MDP is sound.

    Missing action rows are reported as kind "missing-action" so callers
    that intentionally restrict actions (induced MDPs of permissive
    policies) can filter them out.
    """
    out: list[Violation] = []
    if m.n_states == 0:
        return [Violation("empty", 0, None, "model has no states")]
    if not (0 <= m.initial < m.n_states):
        out.append(Violation("bad-initial", m.initial, None, "initial out of range"))
    if len(m.transitions) != m.n_states:
        out.append(
            Violation(
                "shape",
                0,
                None,
                f"{len(m.transitions)} transition groups for {m.n_states} states",
            )
        )
        return out
    seen: dict[StateVector, int] = {}
    for i, fv in enumerate(m.states):
        try:
            m.schema.check_state(fv)
        except ValueError as e:
            out.append(Violation("state-bounds", i, None, str(e)))
        if fv in seen:
            out.append(
                Violation(
                    "duplicate-state", i, None, f"same features as state {seen[fv]}"
                )
            )
        else:
            seen[fv] = i
    for i, per_state in enumerate(m.transitions):
        if len(per_state) != len(m.actions):
            out.append(
                Violation(
                    "shape", i, None, f"{len(per_state)} rows for {len(m.actions)} actions"
                )
            )
            continue
        empty = True
        for a, row in enumerate(per_state):
            if row is None:
                out.append(
                    Violation("missing-action", i, a, "no distribution for action")
                )
                continue
            empty = False
            out.extend(_check_row(row, m.n_states, i, a))
        if empty:
            out.append(Violation("dead-state", i, None, "state offers no action"))
    return out


def validate_dtmc(d: ExplicitDtmc) -> list[Violation]:
    """Collect structural violations; an empty list means the DTMC is sound."""
    out: list[Violation] = []
    if d.n_states == 0:
        return [Violation("empty", 0, None, "model has no states")]
    if not (0 <= d.initial < d.n_states):
        out.append(Violation("bad-initial", d.initial, None, "initial out of range"))
    if len(d.transitions) != d.n_states:
        out.append(
            Violation(
                "shape",
                0,
                None,
                f"{len(d.transitions)} rows for {d.n_states} states",
            )
        )
        return out
    seen: dict[StateVector, int] = {}
    for i, fv in enumerate(d.states):
        try:
            d.schema.check_state(fv)
        except ValueError as e:
            out.append(Violation("state-bounds", i, None, str(e)))
        if fv in seen:
            out.append(
                Violation(
                    "duplicate-state", i, None, f"same features as state {seen[fv]}"
                )
            )
        else:
            seen[fv] = i
    for i, row in enumerate(d.transitions):
        if not row:
            out.append(Violation("dead-state", i, None, "state has no outgoing row"))
            continue
        out.extend(_check_row(row, d.n_states, i, None))
    return out


def _format_lines(model: Model) -> Iterable[str]:
    is_mdp = isinstance(model, ExplicitMdp)
    yield "MODEL mdp" if is_mdp else "MODEL dtmc"
    yield "SCHEMA " + " ".join(
        f"{name}:{lo}:{hi}" for name, (lo, hi) in zip(model.schema.names, model.schema.bounds)
    )
    if is_mdp:
        yield "ACTIONS " + " ".join(model.actions)
    yield f"INITIAL {model.initial}"
    for i, fv in enumerate(model.states):
        yield f"STATE {i} " + " ".join(str(v) for v in fv)
    if is_mdp:
        for i, per_state in enumerate(model.transitions):
            for a, row in enumerate(per_state):
                if row is None:
                    continue
                for dst, prob in row:
                    yield f"TRANS {i} {a} {dst} {prob:.17g}"
    else:
        for i, row in enumerate(model.transitions):
            for dst, prob in row:
                yield f"TRANS {i} {dst} {prob:.17g}"


def write_explicit(
    model: Model, destination: Union[str, os.PathLike, TextIO, None] = None
) -> str:
    """Serialize to the explicit text format; optionally write it out.

    `destination` may be a path or a text file object.  Returns the
    serialized text either way.  Probabilities use 17 significant digits,
    which round-trips IEEE doubles exactly.
    """
    text = "\n".join(_format_lines(model)) + "\n"
    if destination is not None:
        if hasattr(destination, "write"):
            destination.write(text)
        else:
            with open(destination, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
    return text


def model_fingerprint(model: Model) -> str:
    """SHA-256 hex digest of the serialized model text."""
    cached = getattr(model, "_fingerprint", None)
    if cached is None:
        cached = hashlib.sha256(write_explicit(model).encode("utf-8")).hexdigest()
        object.__setattr__(model, "_fingerprint", cached)
    return cached


def _parse_error(lineno: int, message: str) -> ModelFormatError:
    return ModelFormatError(f"line {lineno}: {message}")


def read_explicit(source: Union[str, os.PathLike, TextIO]) -> Model:
    """Parse the explicit text format into a model.

    `source` may be a path or a text file object.  Structural errors
    (bad indices, non-stochastic rows, out-of-range probabilities,
    duplicate rows) raise :class:`ModelFormatError` with a line number.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()

    kind: Optional[str] = None
    schema: Optional[FeatureSchema] = None
    actions: Optional[tuple[str, ...]] = None
    initial = 0
    saw_initial = False
    states: list[StateVector] = []
    trans_lines: list[tuple[int, int, int, int, float]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "MODEL":
            if kind is not None:
                raise _parse_error(lineno, "duplicate MODEL header")
            if len(parts) != 2 or parts[1] not in ("mdp", "dtmc"):
                raise _parse_error(lineno, "expected 'MODEL mdp' or 'MODEL dtmc'")
            kind = parts[1]
        elif tag == "SCHEMA":
            if kind is None:
                raise _parse_error(lineno, "SCHEMA before MODEL header")
            if schema is not None:
                raise _parse_error(lineno, "duplicate SCHEMA line")
            names = []
            bounds = []
            for spec_item in parts[1:]:
                pieces = spec_item.split(":")
                if len(pieces) != 3:
                    raise _parse_error(lineno, f"bad feature spec {spec_item!r}")
                try:
                    lo, hi = int(pieces[1]), int(pieces[2])
                except ValueError:
                    raise _parse_error(lineno, f"bad feature bounds in {spec_item!r}")
                names.append(pieces[0])
                bounds.append((lo, hi))
            try:
                schema = FeatureSchema(tuple(names), tuple(bounds))
            except ValueError as e:
                raise _parse_error(lineno, str(e))
        elif tag == "ACTIONS":
            if kind != "mdp":
                raise _parse_error(lineno, "ACTIONS line outside an mdp model")
            if actions is not None:
                raise _parse_error(lineno, "duplicate ACTIONS line")
            if len(parts) < 2:
                raise _parse_error(lineno, "empty action list")
            actions = tuple(parts[1:])
        elif tag == "INITIAL":
            if len(parts) != 2:
                raise _parse_error(lineno, "expected 'INITIAL <state>'")
            try:
                initial = int(parts[1])
            except ValueError:
                raise _parse_error(lineno, f"bad initial state {parts[1]!r}")
            saw_initial = True
        elif tag == "STATE":
            if schema is None:
                raise _parse_error(lineno, "STATE before SCHEMA")
            if len(parts) < 2:
                raise _parse_error(lineno, "expected 'STATE <index> <features>'")
            try:
                idx = int(parts[1])
                fv = tuple(int(v) for v in parts[2:])
            except ValueError:
                raise _parse_error(lineno, "non-integer state fields")
            if idx != len(states):
                raise _parse_error(
                    lineno, f"state index {idx} out of order (expected {len(states)})"
                )
            if len(fv) != schema.dim:
                raise _parse_error(
                    lineno, f"state has {len(fv)} features, schema has {schema.dim}"
                )
            states.append(fv)
        elif tag == "TRANS":
            if kind is None:
                raise _parse_error(lineno, "TRANS before MODEL header")
            want = 5 if kind == "mdp" else 4
            if len(parts) != want:
                raise _parse_error(
                    lineno, f"expected {want - 1} fields after TRANS for a {kind}"
                )
            try:
                src = int(parts[1])
                act = int(parts[2]) if kind == "mdp" else 0
                dst = int(parts[-2])
                prob = float(parts[-1])
            except ValueError:
                raise _parse_error(lineno, "non-numeric transition fields")
            trans_lines.append((lineno, src, act, dst, prob))
        else:
            raise _parse_error(lineno, f"unknown line tag {tag!r}")

    if kind is None:
        raise ModelFormatError("missing MODEL header")
    if schema is None:
        raise ModelFormatError("missing SCHEMA line")
    if kind == "mdp" and actions is None:
        raise ModelFormatError("missing ACTIONS line")
    if not states:
        raise ModelFormatError("model has no states")
    if not saw_initial:
        raise ModelFormatError("missing INITIAL line")
    if not (0 <= initial < len(states)):
        raise ModelFormatError(f"initial state {initial} out of range")

    n = len(states)
    n_actions = len(actions) if actions else 1
    if kind == "mdp":
        rows: list[list[Optional[list[tuple[int, float]]]]] = [
            [None] * n_actions for _ in range(n)
        ]
    else:
        rows = [[None] for _ in range(n)]
    for lineno, src, act, dst, prob in trans_lines:
        if not (0 <= src < n):
            raise _parse_error(lineno, f"source state {src} out of range")
        if not (0 <= act < n_actions):
            raise _parse_error(
                lineno, f"action index {act} out of range for {n_actions} actions"
            )
        if not (0 <= dst < n):
            raise _parse_error(lineno, f"successor state {dst} out of range")
        if not (0.0 < prob <= 1.0):
            raise _parse_error(lineno, f"probability {prob!r} outside (0, 1]")
        row = rows[src][act]
        if row is None:
            row = []
            rows[src][act] = row
        if any(dst == existing for existing, _ in row):
            raise _parse_error(lineno, f"duplicate transition {src} -> {dst}")
        row.append((dst, prob))

    for src in range(n):
        for act in range(n_actions):
            row = rows[src][act]
            if row is None:
                continue
            total = sum(p for _, p in row)
            if abs(total - 1.0) > PROB_SUM_TOL:
                label = f"state {src}" if kind == "dtmc" else f"state {src} action {act}"
                raise ModelFormatError(
                    f"distribution of {label} sums to {total!r}"
                )

    if kind == "mdp":
        transitions = tuple(
            tuple(tuple(row) if row is not None else None for row in per_state)
            for per_state in rows
        )
        return ExplicitMdp(
            schema=schema,
            states=tuple(states),
            actions=actions,
            transitions=transitions,
            initial=initial,
        )
    dt_rows = []
    for src in range(n):
        row = rows[src][0]
        if row is None:
            raise ModelFormatError(f"state {src} has no outgoing transitions")
        dt_rows.append(tuple(row))
    return ExplicitDtmc(
        schema=schema, states=tuple(states), transitions=tuple(dt_rows), initial=initial
    )
