"""In-memory CRM simulator with CRUDA + association semantics.

Executes concrete ApiCalls (or raw method/path/body triples from the HTTP
façade) against a deterministic object store, so generated plans can be run
and judged without any external service. Behavior is HubSpot-flavored where
the benchmark exercises it: search filterGroups OR together with filters
ANDed inside a group, at most 3 filters per group, archival instead of hard
deletes, and association traversal through a dedicated endpoint rather than
``associations.*`` pseudo-properties in search filters.
"""

from __future__ import annotations

import copy
import hashlib
import json
import threading
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from .errors import DatasetParseError
from .registry import ApiCall, SchemaRegistry, default_registry
from .timestamps import CURRENT_TIME

MAX_FILTERS_PER_GROUP = 3
MAX_FILTERS_MESSAGE = "max filters per filterGroup allowed is 3"
SUPPORTED_OPERATORS = ("EQ", "NEQ", "GT", "LT", "CONTAINS", "IN")
DEFAULT_PAGE_LIMIT = 10

# Path segments (plural or singular) -> canonical object type.
TYPE_ALIASES = {
    "contact": "contact",
    "contacts": "contact",
    "company": "company",
    "companies": "company",
    "deal": "deal",
    "deals": "deal",
    "note": "note",
    "notes": "note",
    "task": "task",
    "tasks": "task",
    "owner": "owner",
    "owners": "owner",
}
PLURALS = {
    "contact": "contacts",
    "company": "companies",
    "deal": "deals",
    "note": "notes",
    "task": "tasks",
    "owner": "owners",
}


@dataclass
class SimResponse:
    status: int
    document: dict

    @property
    def ok(self) -> bool:
        return 200 <= self.status < 300


def _error(status: int, message: str, violations: Optional[list] = None) -> SimResponse:
    doc = {"status": "error", "message": message}
    if violations:
        doc["violations"] = list(violations)
    return SimResponse(status, doc)


@dataclass
class CrmObject:
    id: int
    object_type: str
    properties: dict
    created_at: str = CURRENT_TIME
    updated_at: str = CURRENT_TIME
    archived: bool = False

    def to_doc(self, keep: Optional[list] = None) -> dict:
        props = dict(self.properties)
        if keep is not None:
            props = {k: props[k] for k in keep if k in props}
        return {
            "id": str(self.id),
            "properties": props,
            "createdAt": self.created_at,
            "updatedAt": self.updated_at,
            "archived": self.archived,
        }


class CrmStore:
    """The simulated CRM: objects per type plus undirected associations.

    Concurrent readers are safe; writes serialize behind a lock. Benchmark
    cells each get their own store, so the lock only matters for the HTTP
    façade.
    """

    def __init__(self, registry: Optional[SchemaRegistry] = None):
        self.registry = registry or default_registry()
        self._objects: dict[str, dict[int, CrmObject]] = {t: {} for t in PLURALS}
        self._associations: set[frozenset] = set()
        self._next_id = 1
        self._seed_doc: Optional[dict] = None
        self._lock = threading.Lock()

    # -- fixture loading ---------------------------------------------------

    def load_fixture(self, doc: dict) -> "CrmStore":
        """Populate from a fixture document and remember it for reset()."""
        self._seed_doc = copy.deepcopy(doc)
        self._apply_fixture(doc)
        return self

    def _apply_fixture(self, doc: dict):
        self._objects = {t: {} for t in PLURALS}
        self._associations = set()
        top = 0
        for entry in doc.get("objects", []):
            otype = entry["type"]
            if otype not in PLURALS:
                raise DatasetParseError(f"fixture has unknown object type {otype!r}")
            oid = int(entry["id"])
            self._objects[otype][oid] = CrmObject(
                id=oid, object_type=otype, properties=dict(entry.get("properties", {}))
            )
            top = max(top, oid)
        for entry in doc.get("associations", []):
            ft, fid = entry["from"][0], int(entry["from"][1])
            tt, tid = entry["to"][0], int(entry["to"][1])
            for t, i in ((ft, fid), (tt, tid)):
                if i not in self._objects.get(t, {}):
                    raise DatasetParseError(f"fixture association references missing {t} {i}")
            self._associations.add(frozenset(((ft, fid), (tt, tid))))
        self._next_id = top + 1

    def reset(self):
        """Restore exactly the seed fixture state."""
        with self._lock:
            self._apply_fixture(self._seed_doc or {})

    # -- snapshot / restore ------------------------------------------------

    def snapshot(self) -> dict:
        objects = []
        for otype in sorted(self._objects):
            for oid in sorted(self._objects[otype]):
                obj = self._objects[otype][oid]
                objects.append(
                    {
                        "type": otype,
                        "id": oid,
                        "properties": dict(obj.properties),
                        "createdAt": obj.created_at,
                        "updatedAt": obj.updated_at,
                        "archived": obj.archived,
                    }
                )
        associations = sorted(
            sorted([list(end) for end in pair]) for pair in self._associations
        )
        return {"objects": objects, "associations": associations, "nextId": self._next_id}

    def restore(self, snap: dict):
        with self._lock:
            self._objects = {t: {} for t in PLURALS}
            self._associations = set()
            for entry in snap.get("objects", []):
                obj = CrmObject(
                    id=int(entry["id"]),
                    object_type=entry["type"],
                    properties=dict(entry.get("properties", {})),
                    created_at=entry.get("createdAt", CURRENT_TIME),
                    updated_at=entry.get("updatedAt", CURRENT_TIME),
                    archived=bool(entry.get("archived", False)),
                )
                self._objects[obj.object_type][obj.id] = obj
            for pair in snap.get("associations", []):
                (ft, fid), (tt, tid) = pair
                self._associations.add(frozenset(((ft, int(fid)), (tt, int(tid)))))
            self._next_id = int(snap.get("nextId", 1))

    def state_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.snapshot(), sort_keys=True).encode("utf-8")
        ).hexdigest()

    # -- lookups -----------------------------------------------------------

    def _live(self, otype: str, oid: int) -> Optional[CrmObject]:
        obj = self._objects.get(otype, {}).get(oid)
        if obj is None or obj.archived:
            return None
        return obj

    def object_count(self, otype: Optional[str] = None) -> int:
        if otype is not None:
            return sum(1 for o in self._objects.get(otype, {}).values() if not o.archived)
        return sum(self.object_count(t) for t in self._objects)

    # -- dispatch ----------------------------------------------------------

    def execute(self, call: ApiCall) -> SimResponse:
        if not call.resolved or call.has_unresolved_tokens():
            raise ValueError(f"call to {call.function_name} still has unresolved tokens")
        return self.dispatch(call.method, call.path, call.body)

    def dispatch(self, method: str, path: str, body: Optional[dict] = None) -> SimResponse:
        """Route a raw request; accepts bare and /crm/v3-prefixed paths."""
        body = body or {}
        canonical = self._canonical_path(path)
        if canonical is None:
            return _error(404, f"no route for {method} {path}")
        route = self.registry.resolve_route(method, canonical)
        if route is None:
            return _error(404, f"no route for {method} {path}")
        schema, path_params = route

        call = ApiCall(function_name=schema.name, method=method, path=canonical, body=body)
        result = self.registry.validate_call(call)
        if not result.ok:
            return _error(400, "; ".join(result.violations), list(result.violations))

        with self._lock:
            role = schema.role
            otype = schema.object_type
            if role == "create":
                return self._create(otype, body["properties"])
            if role == "search":
                return self._search(otype, body)
            if role == "read":
                return self._read(otype, path_params[f"{otype}Id"])
            if role == "update":
                return self._update(otype, path_params[f"{otype}Id"], body["properties"])
            if role == "delete":
                return self._delete(otype, path_params[f"{otype}Id"])
            if role == "associate":
                return self._associate(otype, path_params)
            return self._list_associations(otype, path_params)

    def _canonical_path(self, path: str) -> Optional[str]:
        if path.startswith("/crm/v3/"):
            path = path[len("/crm/v3") :]
        segments = [s for s in path.split("/") if s]
        if not segments:
            return None
        head, rest = segments[0], segments[1:]
        if head == "objects" and rest:
            otype = TYPE_ALIASES.get(rest[0])
            if otype is None:
                return None
            rest[0] = PLURALS[otype]
        elif head == "associations" and rest:
            otype = TYPE_ALIASES.get(rest[0])
            if otype is None:
                return None
            rest[0] = otype
            if len(rest) >= 3 and rest[2] in TYPE_ALIASES:
                rest[2] = TYPE_ALIASES[rest[2]]
        else:
            return None
        return "/crm/v3/" + "/".join([head] + rest)

    # -- CRUDA handlers ----------------------------------------------------

    def _create(self, otype: str, properties: dict) -> SimResponse:
        oid = self._next_id
        self._next_id += 1
        obj = CrmObject(id=oid, object_type=otype, properties=dict(properties))
        self._objects[otype][oid] = obj
        return SimResponse(201, obj.to_doc())

    def _read(self, otype: str, oid: str) -> SimResponse:
        obj = self._live(otype, int(oid))
        if obj is None:
            return _error(404, f"{otype} {oid} not found")
        return SimResponse(200, obj.to_doc())

    def _update(self, otype: str, oid: str, properties: dict) -> SimResponse:
        obj = self._live(otype, int(oid))
        if obj is None:
            return _error(404, f"{otype} {oid} not found")
        obj.properties.update(properties)
        obj.updated_at = CURRENT_TIME
        return SimResponse(200, obj.to_doc())

    def _delete(self, otype: str, oid: str) -> SimResponse:
        obj = self._objects.get(otype, {}).get(int(oid))
        if obj is None:
            return _error(404, f"{otype} {oid} not found")
        obj.archived = True
        return SimResponse(204, {})

    def _associate(self, otype: str, params: dict) -> SimResponse:
        from_id, to_type_raw, to_id = params["fromId"], params["toType"], params["toId"]
        to_type = TYPE_ALIASES.get(to_type_raw)
        if to_type is None:
            return _error(400, f"unknown object type {to_type_raw!r}")
        if self._live(otype, int(from_id)) is None:
            return _error(404, f"{otype} {from_id} not found")
        if self._live(to_type, int(to_id)) is None:
            return _error(404, f"{to_type} {to_id} not found")
        pair = frozenset(((otype, int(from_id)), (to_type, int(to_id))))
        if len(pair) == 1:
            return _error(400, "cannot associate a record with itself")
        if pair in self._associations:
            return _error(409, f"association {otype} {from_id} -> {to_type} {to_id} already exists")
        self._associations.add(pair)
        return SimResponse(
            201,
            {
                "from": {"type": otype, "id": str(from_id)},
                "to": {"type": to_type, "id": str(to_id)},
            },
        )

    def _list_associations(self, otype: str, params: dict) -> SimResponse:
        from_id, to_type_raw = params["fromId"], params["toType"]
        to_type = TYPE_ALIASES.get(to_type_raw)
        if to_type is None:
            return _error(400, f"unknown object type {to_type_raw!r}")
        if self._live(otype, int(from_id)) is None:
            return _error(404, f"{otype} {from_id} not found")
        me = (otype, int(from_id))
        ids = []
        for pair in self._associations:
            ends = tuple(pair)
            if me not in ends:
                continue
            other = ends[0] if ends[1] == me else ends[1]
            if other[0] == to_type and self._live(other[0], other[1]) is not None:
                ids.append(other[1])
        ids.sort()
        return SimResponse(
            200,
            {"results": [{"id": str(i)} for i in ids], "total": len(ids)},
        )

    # -- search ------------------------------------------------------------

    def _search(self, otype: str, body: dict) -> SimResponse:
        groups = body.get("filterGroups", [])
        for group in groups:
            filters = group.get("filters", []) if isinstance(group, dict) else []
            if len(filters) > MAX_FILTERS_PER_GROUP:
                return _error(400, MAX_FILTERS_MESSAGE)
        for group in groups:
            for f in group.get("filters", []) if isinstance(group, dict) else []:
                prop = f.get("propertyName", "")
                if prop.startswith("associations."):
                    return _error(
                        400,
                        f"unsupported filter property {prop!r}: associations are not "
                        f"searchable properties, use the associations endpoint",
                    )
                op = f.get("operator", "")
                if op not in SUPPORTED_OPERATORS:
                    return _error(400, f"unknown operator {op!r}")
                if op == "IN" and not f.get("values"):
                    return _error(400, "operator IN requires a values array")

        limit = body.get("limit", DEFAULT_PAGE_LIMIT)
        if limit < 1:
            return _error(400, "limit must be at least 1")
        limit = int(limit)

        matches = [
            obj
            for oid, obj in sorted(self._objects[otype].items())
            if not obj.archived and _matches(obj, groups)
        ]

        sorts = body.get("sorts", [])
        for sort in reversed(sorts):
            prop = sort.get("propertyName", "")
            descending = str(sort.get("direction", "ASCENDING")).upper() == "DESCENDING"
            matches.sort(key=lambda o: _sort_key(o, prop), reverse=descending)

        offset = 0
        after = body.get("after")
        if after is not None:
            if not str(after).isdigit():
                return _error(400, f"bad paging cursor {after!r}")
            offset = int(after)

        page = matches[offset : offset + limit]
        keep = body.get("properties")
        doc = {
            "total": len(matches),
            "results": [obj.to_doc(keep=keep) for obj in page],
        }
        if offset + limit < len(matches):
            doc["paging"] = {"next": {"after": str(offset + limit)}}
        return SimResponse(200, doc)


def _lookup(obj: CrmObject, prop: str):
    if prop in ("id", "hs_object_id"):
        return obj.id
    return obj.properties.get(prop)


def _sort_key(obj: CrmObject, prop: str):
    value = _lookup(obj, prop)
    try:
        return (0, float(value), "")
    except (TypeError, ValueError):
        return (1, 0.0, str(value) if value is not None else "")


def _matches(obj: CrmObject, groups: list) -> bool:
    if not groups:
        return True
    for group in groups:
        filters = group.get("filters", []) if isinstance(group, dict) else []
        if all(_filter_matches(obj, f) for f in filters):
            return True
    return False


def _filter_matches(obj: CrmObject, f: dict) -> bool:
    stored = _lookup(obj, f.get("propertyName", ""))
    if stored is None:
        return False
    op = f.get("operator")
    value = f.get("value")
    if op == "EQ":
        return str(stored) == str(value)
    if op == "NEQ":
        return str(stored) != str(value)
    if op == "CONTAINS":
        return str(value).lower() in str(stored).lower()
    if op == "IN":
        return str(stored) in [str(v) for v in f.get("values", [])]
    # GT / LT: numeric when both sides cast, else lexicographic (covers
    # canonical timestamps, which order correctly as strings).
    try:
        left, right = float(stored), float(value)
    except (TypeError, ValueError):
        left, right = str(stored), str(value)
    return left > right if op == "GT" else left < right


def load_seed_fixture() -> dict:
    ref = resources.files("crmbench").joinpath("assets/seed_fixture.json")
    return json.loads(ref.read_text(encoding="utf-8"))


def seeded_store(registry: Optional[SchemaRegistry] = None) -> CrmStore:
    """A fresh store preloaded with the shipped seed fixture."""
    return CrmStore(registry=registry).load_fixture(load_seed_fixture())
