"""JSON game documents: parsing, validation and canonical writing."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, ValidationError

from .game_core import (
    NO_MOVE,
    DiscountSpec,
    GameStructure,
    MarkovChain,
    ParityObjective,
    Structure,
    StructureKind,
    as_chain,
    as_game,
    classify,
    validate_structure,
)


class DocumentError(ValueError):
    """Malformed document; ``location`` points at the offending field."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


class DeltaRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")
    state: str
    a1: Optional[str] = None
    a2: Optional[str] = None
    dist: dict[str, float]


class GameDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["concurrent", "turn-based", "mdp-player1", "mdp-player2", "markov-chain"]
    states: list[str]
    moves: Optional[list[str]] = None
    gamma1: Optional[dict[str, list[str]]] = None
    gamma2: Optional[dict[str, list[str]]] = None
    delta: list[DeltaRecord]
    priority: Optional[dict[str, int]] = None
    discount: Optional[dict[str, float]] = None
    reward: Optional[dict[str, float]] = None


@dataclass
class LoadedGame:
    structure: Structure
    kind: StructureKind
    priority: Optional[ParityObjective] = None
    discount: Optional[DiscountSpec] = None

    def objective(self, name: str):
        if name == "parity":
            if self.priority is None:
                raise DocumentError("document has no priority map", "priority")
            return self.priority
        if name == "multidiscounted":
            if self.discount is None:
                raise DocumentError("document needs both discount and reward maps", "discount")
            return self.discount
        raise ValueError(f"unknown objective {name!r}")


def _structure(doc: GameDocument) -> Structure:
    if doc.kind == "markov-chain":
        for field in ("moves", "gamma1", "gamma2"):
            if getattr(doc, field) is not None:
                raise DocumentError("not allowed for markov-chain documents", field)
        idx = {s: i for i, s in enumerate(doc.states)}
        rows: dict[str, dict[str, float]] = {}
        for i, rec in enumerate(doc.delta):
            loc = f"delta[{i}]"
            if rec.a1 is not None or rec.a2 is not None:
                raise DocumentError("markov-chain records take no moves", loc)
            if rec.state not in idx:
                raise DocumentError(f"unknown state {rec.state!r}", loc + ".state")
            if rec.state in rows:
                raise DocumentError(f"duplicate record for state {rec.state!r}", loc)
            for t in rec.dist:
                if t not in idx:
                    raise DocumentError(f"unknown target {t!r}", loc + ".dist")
            rows[rec.state] = rec.dist
        # validate through the game form so missing rows are reported too
        G = GameStructure(
            tuple(doc.states),
            (NO_MOVE,),
            {s: (NO_MOVE,) for s in doc.states},
            {s: (NO_MOVE,) for s in doc.states},
            {(s, NO_MOVE, NO_MOVE): d for s, d in rows.items()},
        )
        _raise_diagnostics(G)
        return MarkovChain.from_rows(doc.states, rows)
    for field in ("moves", "gamma1", "gamma2"):
        if getattr(doc, field) is None:
            raise DocumentError("required for game documents", field)
    delta = {}
    for i, rec in enumerate(doc.delta):
        if rec.a1 is None or rec.a2 is None:
            raise DocumentError("game records need a1 and a2", f"delta[{i}]")
        key = (rec.state, rec.a1, rec.a2)
        if key in delta:
            raise DocumentError(f"duplicate record for {key}", f"delta[{i}]")
        delta[key] = rec.dist
    G = GameStructure(tuple(doc.states), tuple(doc.moves), doc.gamma1, doc.gamma2, delta)
    _raise_diagnostics(G)
    if classify(G).value != doc.kind:
        raise DocumentError(f"declared {doc.kind!r} but the structure is {classify(G).value!r}", "kind")
    return G


def _raise_diagnostics(G: GameStructure) -> None:
    diags = validate_structure(G)
    if diags:
        d = diags[0]
        raise DocumentError(d.message, f"delta[{d.state}]" if d.state else "states")


def parse_document(text: str, source: str = "<document>") -> tuple[GameDocument, LoadedGame]:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(exc.msg, f"{source}:{exc.lineno}:{exc.colno}") from None
    try:
        doc = GameDocument.model_validate(raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = ".".join(str(x) for x in err["loc"])
        raise DocumentError(err["msg"], f"{source}:{loc}") from None
    try:
        G = _structure(doc)
        prio = ParityObjective(doc.priority) if doc.priority is not None else None
        disc = None
        if doc.discount is not None or doc.reward is not None:
            if doc.discount is None or doc.reward is None:
                raise DocumentError("discount and reward must be given together", "discount")
            disc = DiscountSpec(doc.discount, doc.reward)
        for name, obj in (("priority", prio), ("discount", disc)):
            if obj is not None:
                keys = set(obj.priority) if name == "priority" else set(obj.lam) | set(obj.reward)
                if keys != set(doc.states):
                    raise DocumentError("must cover exactly the declared states", name)
    except DocumentError as exc:
        raise DocumentError(str(exc), source) from None
    except ValueError as exc:
        raise DocumentError(str(exc), source) from None
    return doc, LoadedGame(G, classify(G), prio, disc)


def load_game(path: str | Path) -> LoadedGame:
    return parse_document(Path(path).read_text(encoding="utf-8"), str(path))[1]


def load_unchecked(path: str | Path) -> GameDocument:
    """Schema-level parse only, for the ``validate`` command."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        return GameDocument.model_validate(json.loads(text))
    except json.JSONDecodeError as exc:
        raise DocumentError(exc.msg, f"{path}:{exc.lineno}:{exc.colno}") from None
    except ValidationError as exc:
        err = exc.errors()[0]
        raise DocumentError(err["msg"], f"{path}:" + ".".join(str(x) for x in err["loc"])) from None


def raw_structure(doc: GameDocument) -> GameStructure:
    """Game form of a schema-valid document without semantic checks."""
    if doc.kind == "markov-chain":
        fixed = {s: (NO_MOVE,) for s in doc.states}
        delta = {(r.state, NO_MOVE, NO_MOVE): r.dist for r in doc.delta}
        return GameStructure(tuple(doc.states), (NO_MOVE,), fixed, fixed, delta)
    delta = {(r.state, r.a1, r.a2): r.dist for r in doc.delta}
    return GameStructure(tuple(doc.states), tuple(doc.moves or ()), doc.gamma1 or {}, doc.gamma2 or {}, delta)


def to_document(
    G: Structure,
    priority: ParityObjective | None = None,
    discount: DiscountSpec | None = None,
) -> dict:
    """Canonical document dict: records in state and move declaration order."""
    kind = classify(G)
    out: dict = {"kind": kind.value}
    if kind is StructureKind.MARKOV_CHAIN:
        M = as_chain(G)
        out["states"] = list(M.states)
        out["delta"] = [
            {"state": s, "dist": {t: float(M.P[i, j]) for j, t in enumerate(M.states) if M.P[i, j] > 0}}
            for i, s in enumerate(M.states)
        ]
    else:
        G = as_game(G)
        out["states"] = list(G.states)
        out["moves"] = list(G.moves)
        out["gamma1"] = {s: list(G.gamma1[s]) for s in G.states}
        out["gamma2"] = {s: list(G.gamma2[s]) for s in G.states}
        recs = []
        for s in G.states:
            for a in G.gamma1[s]:
                for b in G.gamma2[s]:
                    d = G.delta[(s, a, b)]
                    recs.append({"state": s, "a1": a, "a2": b, "dist": {t: d[t] for t in G.states if t in d}})
        out["delta"] = recs
    states = out["states"]
    if priority is not None:
        out["priority"] = {s: priority.priority[s] for s in states}
    if discount is not None:
        out["discount"] = {s: discount.lam[s] for s in states}
        out["reward"] = {s: discount.reward[s] for s in states}
    return out


def canonical(doc: GameDocument) -> dict:
    """Canonical dict of an already-parsed document (drops unset optional fields)."""
    return doc.model_dump(exclude_none=True)


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, shortest round-trip floats, trailing newline."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_document(path: str | Path, doc: dict) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8", newline="\n")


def digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
