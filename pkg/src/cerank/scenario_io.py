"""Scenario files, report files and seeded random instances.

Scenarios and structured reports are JSON documents carrying
``"format_version": 1``. The full schema is documented in the README.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from cerank.diversity import (
    DEFAULT_GRAPH_PARAMS,
    RESIDUAL_RULES,
    ZERO_IF_DUPLICATE_ABOVE,
    DiversityInstance,
    instance_from_graph,
)
from cerank.mechanism import Advertiser, BidVector
from cerank.model import Entity, InvalidParameterError

FORMAT_VERSION = 1
KINDS = ("ranking", "auction", "equilibrium", "diversity")
TABULAR_COLUMNS = ("position", "id", "score", "price", "click_prob", "contribution")


class ScenarioError(ValueError):
    """A scenario or report document is malformed; the message names the field."""


@dataclass(frozen=True)
class SimulationBlock:
    trials: int
    seed: int


@dataclass(frozen=True)
class Scenario:
    kind: str
    entities: tuple[Entity, ...] = ()
    advertisers: tuple[Advertiser, ...] = ()
    bids: BidVector | None = None
    k: float | None = None
    adjacency: tuple[tuple[int, ...], ...] | None = None
    params: tuple[float, float, float] | None = None
    similarity: tuple[tuple[float, ...], ...] | None = None
    residual_rule: str = ZERO_IF_DUPLICATE_ABOVE
    simulation: SimulationBlock | None = None

    @property
    def size(self) -> int:
        if self.kind in ("auction", "equilibrium"):
            return len(self.advertisers)
        if self.adjacency is not None:
            return len(self.adjacency)
        return len(self.entities)

    def diversity_instance(self) -> DiversityInstance:
        if self.adjacency is not None:
            return instance_from_graph(self.adjacency, self.params or DEFAULT_GRAPH_PARAMS)
        binary = self.residual_rule == ZERO_IF_DUPLICATE_ABOVE and all(
            v in (0.0, 1.0) for row in self.similarity for v in row
        )
        return DiversityInstance(self.entities, np.array(self.similarity), self.residual_rule, binary)


# -- parsing -----------------------------------------------------------------

def _req(doc: dict, key: str, path: str) -> Any:
    if key not in doc:
        raise ScenarioError(f"{path}{key}: required field missing")
    return doc[key]


def _num(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{path}: expected an integer, got {value!r}")
    return value


def _list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise ScenarioError(f"{path}: expected a list")
    return value


def _matrix(value: Any, path: str, n: int | None = None) -> list[list[float]]:
    rows = _list(value, path)
    out = [[_num(v, f"{path}[{r}][{c}]") for c, v in enumerate(_list(row, f"{path}[{r}]"))]
           for r, row in enumerate(rows)]
    size = len(out) if n is None else n
    if len(out) != size or any(len(row) != size for row in out):
        raise ScenarioError(f"{path}: expected a {size}x{size} matrix")
    return out


def _nonempty(doc: dict, key: str) -> list:
    items = _list(_req(doc, key, ""), key)
    if not items:
        raise ScenarioError(f"{key}: must not be empty")
    return items


def _entities(doc: dict) -> tuple[Entity, ...]:
    out = []
    for i, e in enumerate(_nonempty(doc, "entities")):
        p = f"entities[{i}]"
        if not isinstance(e, dict):
            raise ScenarioError(f"{p}: expected an object")
        try:
            out.append(Entity(
                e.get("id", str(i)),
                _num(_req(e, "utility", p + "."), p + ".utility"),
                _num(_req(e, "click_prob", p + "."), p + ".click_prob"),
                _num(e.get("abandon_prob", 0.0), p + ".abandon_prob"),
            ))
        except InvalidParameterError as exc:
            raise ScenarioError(f"{p}: {exc}") from None
    return tuple(out)


def _advertisers(doc: dict) -> tuple[Advertiser, ...]:
    out = []
    for i, a in enumerate(_nonempty(doc, "advertisers")):
        p = f"advertisers[{i}]"
        if not isinstance(a, dict):
            raise ScenarioError(f"{p}: expected an object")
        try:
            out.append(Advertiser(
                a.get("id", str(i)),
                _num(_req(a, "value", p + "."), p + ".value"),
                _num(_req(a, "ctr", p + "."), p + ".ctr"),
                _num(a.get("abandon_prob", 0.0), p + ".abandon_prob"),
            ))
        except InvalidParameterError as exc:
            raise ScenarioError(f"{p}: {exc}") from None
    return tuple(out)


def scenario_from_dict(doc: Any) -> Scenario:
    """Validate a parsed scenario document."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    version = _req(doc, "format_version", "")
    if version != FORMAT_VERSION:
        raise ScenarioError(f"format_version: unsupported version {version!r}")
    kind = _req(doc, "kind", "")
    if kind not in KINDS:
        raise ScenarioError(f"kind: expected one of {KINDS}, got {kind!r}")

    fields: dict[str, Any] = {"kind": kind}
    if "k" in doc:
        k = _num(doc["k"], "k")
        if not (0.0 < k <= 1.0):
            raise ScenarioError(f"k: must lie in (0, 1], got {k!r}")
        fields["k"] = k
    if "simulation" in doc:
        sim = doc["simulation"]
        if not isinstance(sim, dict):
            raise ScenarioError("simulation: expected an object")
        trials = _int(_req(sim, "trials", "simulation."), "simulation.trials")
        seed = _int(_req(sim, "seed", "simulation."), "simulation.seed")
        if trials < 1:
            raise ScenarioError("simulation.trials: must be >= 1")
        if seed < 0:
            raise ScenarioError("simulation.seed: must be >= 0")
        fields["simulation"] = SimulationBlock(trials, seed)

    if kind == "ranking":
        fields["entities"] = _entities(doc)
    elif kind in ("auction", "equilibrium"):
        ads = _advertisers(doc)
        fields["advertisers"] = ads
        if kind == "auction" or "bids" in doc:
            raw = _list(_req(doc, "bids", ""), "bids")
            bids = [_num(b, f"bids[{i}]") for i, b in enumerate(raw)]
            if len(bids) != len(ads):
                raise ScenarioError(f"bids: {len(bids)} bids for {len(ads)} advertisers")
            for i, b in enumerate(bids):
                if b < 0:
                    raise ScenarioError(f"bids[{i}]: must be >= 0, got {b!r}")
            fields["bids"] = BidVector(bids)
    else:
        rule = doc.get("residual_rule", ZERO_IF_DUPLICATE_ABOVE)
        if rule not in RESIDUAL_RULES:
            raise ScenarioError(f"residual_rule: expected one of {RESIDUAL_RULES}, got {rule!r}")
        fields["residual_rule"] = rule
        if "adjacency" in doc:
            adj = _matrix(doc["adjacency"], "adjacency")
            if not adj:
                raise ScenarioError("adjacency: must not be empty")
            for r, row in enumerate(adj):
                for c, v in enumerate(row):
                    if v not in (0.0, 1.0):
                        raise ScenarioError(f"adjacency[{r}][{c}]: must be 0 or 1")
                    if v != adj[c][r]:
                        raise ScenarioError(f"adjacency[{r}][{c}]: matrix must be symmetric")
                if row[r] != 0.0:
                    raise ScenarioError(f"adjacency[{r}][{r}]: diagonal must be 0")
            fields["adjacency"] = tuple(tuple(int(v) for v in row) for row in adj)
            params = doc.get("params", {})
            if not isinstance(params, dict):
                raise ScenarioError("params: expected an object")
            d = DEFAULT_GRAPH_PARAMS
            triple = (
                _num(params.get("utility", d[0]), "params.utility"),
                _num(params.get("click_prob", d[1]), "params.click_prob"),
                _num(params.get("abandon_prob", d[2]), "params.abandon_prob"),
            )
            try:
                Entity("params", *triple)
            except InvalidParameterError as exc:
                raise ScenarioError(f"params: {exc}") from None
            fields["params"] = triple
        else:
            ents = _entities(doc)
            fields["entities"] = ents
            if "similarity" in doc:
                sim = _matrix(doc["similarity"], "similarity", len(ents))
            else:
                sim = np.eye(len(ents)).tolist()
            fields["similarity"] = tuple(tuple(row) for row in sim)
            try:
                Scenario(**fields).diversity_instance()
            except ValueError as exc:
                raise ScenarioError(f"similarity: {exc}") from None
    return Scenario(**fields)


def scenario_to_dict(s: Scenario) -> dict:
    doc: dict[str, Any] = {"format_version": FORMAT_VERSION, "kind": s.kind}
    if s.kind == "ranking" or (s.kind == "diversity" and s.adjacency is None):
        doc["entities"] = [
            {"id": e.id, "utility": e.utility, "click_prob": e.click_prob, "abandon_prob": e.abandon_prob}
            for e in s.entities
        ]
    if s.kind in ("auction", "equilibrium"):
        doc["advertisers"] = [
            {"id": a.id, "value": a.value, "ctr": a.ctr, "abandon_prob": a.abandon_prob}
            for a in s.advertisers
        ]
    if s.bids is not None:
        doc["bids"] = list(s.bids)
    if s.k is not None:
        doc["k"] = s.k
    if s.kind == "diversity":
        doc["residual_rule"] = s.residual_rule
        if s.adjacency is not None:
            doc["adjacency"] = [list(r) for r in s.adjacency]
            if s.params is not None:
                doc["params"] = dict(zip(("utility", "click_prob", "abandon_prob"), s.params))
        if s.similarity is not None:
            doc["similarity"] = [list(r) for r in s.similarity]
    if s.simulation is not None:
        doc["simulation"] = {"trials": s.simulation.trials, "seed": s.simulation.seed}
    return doc


def load_scenario(path: str | Path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: parse error at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(doc)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


# -- random instances ----------------------------------------------------------

@dataclass(frozen=True)
class RandomInstanceSpec:
    """Recipe for a reproducible batch of random scenarios.

    ``abandon_mode`` selects how ``gamma`` is drawn: ``"free"`` takes a
    uniform fraction of the mass ``1 - C`` left by the click probability,
    ``"zero"`` sets it to 0, and ``"k_minus_c"`` sets it to ``k - C`` (click
    probabilities are then drawn below ``k``).
    """

    count: int
    seed: int
    kind: str = "ranking"
    n_range: tuple[int, int] = (2, 8)
    utility_range: tuple[float, float] = (0.0, 1.0)
    click_range: tuple[float, float] = (0.05, 0.95)
    abandon_range: tuple[float, float] = (0.0, 1.0)
    abandon_mode: str = "free"
    k: float | None = None
    bid_range: tuple[float, float] | None = None
    edge_prob: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        lo, hi = self.n_range
        if not (1 <= lo <= hi):
            raise ValueError(f"bad n_range {self.n_range}")
        if self.abandon_mode not in ("free", "zero", "k_minus_c"):
            raise ValueError(f"unknown abandon_mode {self.abandon_mode!r}")
        if self.abandon_mode == "k_minus_c":
            if self.k is None or not (0.0 < self.k <= 1.0):
                raise ValueError("abandon_mode 'k_minus_c' needs k in (0, 1]")
        if not (0.0 <= self.click_range[0] <= self.click_range[1] <= 1.0):
            raise ValueError(f"bad click_range {self.click_range}")


def _draw_params(spec: RandomInstanceSpec, rng: np.random.Generator, n: int):
    u = rng.uniform(*spec.utility_range, size=n)
    c_lo, c_hi = spec.click_range
    if spec.abandon_mode == "k_minus_c":
        c_hi = min(c_hi, spec.k)
        c_lo = min(c_lo, c_hi)
    c = rng.uniform(c_lo, c_hi, size=n)
    if spec.abandon_mode == "free":
        g = rng.uniform(*spec.abandon_range, size=n) * (1.0 - c)
    elif spec.abandon_mode == "zero":
        g = np.zeros(n)
    else:
        g = spec.k - c
    return [float(x) for x in u], [float(x) for x in c], [float(max(x, 0.0)) for x in g]


def generate_instances(spec: RandomInstanceSpec) -> list[Scenario]:
    rng = np.random.default_rng(spec.seed)
    out = []
    for t in range(spec.count):
        n = int(rng.integers(spec.n_range[0], spec.n_range[1] + 1))
        u, c, g = _draw_params(spec, rng, n)
        k = spec.k if spec.abandon_mode == "k_minus_c" else None
        if spec.kind == "ranking":
            ents = tuple(Entity(f"e{i}", u[i], c[i], g[i]) for i in range(n))
            out.append(Scenario("ranking", entities=ents, k=k))
        elif spec.kind in ("auction", "equilibrium"):
            ads = tuple(Advertiser(f"a{i}", u[i], c[i], g[i]) for i in range(n))
            bids = None
            if spec.kind == "auction":
                lo, hi = spec.bid_range or spec.utility_range
                bids = BidVector(rng.uniform(lo, hi, size=n).tolist())
            out.append(Scenario(spec.kind, advertisers=ads, bids=bids, k=k))
        else:
            upper = np.triu(rng.random((n, n)) < spec.edge_prob, k=1)
            adj = (upper | upper.T).astype(int)
            out.append(Scenario("diversity", adjacency=tuple(tuple(int(v) for v in r) for r in adj),
                                params=DEFAULT_GRAPH_PARAMS))
    return out


# -- reports -----------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    position: int
    id: Any
    score: float
    price: float
    click_prob: float
    contribution: float


@dataclass(frozen=True)
class Report:
    """What a command produced: one row per ranked position plus summary values."""

    kind: str
    rows: tuple[ReportRow, ...] = ()
    summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "rows": [dict(zip(TABULAR_COLUMNS, (r.position, r.id, r.score, r.price,
                                                r.click_prob, r.contribution))) for r in self.rows],
            "summary": self.summary,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Report":
        if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
            raise ScenarioError("format_version: unsupported or missing")
        rows = tuple(ReportRow(**{k: r[k] for k in TABULAR_COLUMNS}) for r in doc.get("rows", []))
        return cls(doc["kind"], rows, doc.get("summary", {}))


def _g17(x: Any) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def render_report(report: Report, fmt: str = "structured") -> str:
    if fmt == "structured":
        return json.dumps(report.to_dict(), indent=2, allow_nan=False) + "\n"
    if fmt == "tabular":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABULAR_COLUMNS)
        for r in report.rows:
            w.writerow([_g17(v) for v in (r.position, r.id, r.score, r.price, r.click_prob, r.contribution)])
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")


def write_report(report: Report, path: str | Path, fmt: str = "structured") -> None:
    text = render_report(report, fmt)
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"{path}: cannot write report ({exc.strerror})") from exc


def load_report(path: str | Path) -> Report:
    return Report.from_dict(json.loads(Path(path).read_text()))


def read_tabular(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))

