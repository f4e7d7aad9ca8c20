"""Function schema registry for the simulated CRM domain.

Holds every callable API operation (name, method, path template, parameter
tree, required set, CRUDA category) and validates concrete calls against
them. The registry is immutable once built; readers may share it freely
across threads.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional

from .errors import DuplicateNameError, InvalidSchemaError, UnknownFunctionError
from .timestamps import CURRENT_TIME, is_canonical_timestamp

HTTP_METHODS = frozenset({"GET", "POST", "PATCH", "DELETE", "PUT"})
CATEGORIES = frozenset({"CREATE", "READ", "UPDATE", "DELETE", "ASSOCIATE"})
OBJECT_TYPES = frozenset(
    {"contact", "company", "deal", "note", "task", "owner", "lineItem", "quote", "product"}
)
PARAM_KINDS = frozenset(
    {"string", "number", "boolean", "timestamp", "identifier", "array", "object"}
)

_PATH_PARAM_RE = re.compile(r"\{(\w+)\}")

# Tokens standing in for values not known until earlier plan steps execute.
# "$<step>.<path>" marks an injected value, "$calc(...)" a computed argument.
_PLACEHOLDER_RE = re.compile(r"^\$\d+(\.[\w]+)+$")
_CALC_PREFIX = "$calc("


def is_unresolved_token(value) -> bool:
    """True when a value is a placeholder sentinel, not a concrete literal."""
    if not isinstance(value, str):
        return False
    return bool(_PLACEHOLDER_RE.match(value)) or (
        value.startswith(_CALC_PREFIX) and value.endswith(")")
    )


def _tree_has_unresolved(value) -> bool:
    if isinstance(value, dict):
        return any(_tree_has_unresolved(v) for v in value.values())
    if isinstance(value, list):
        return any(_tree_has_unresolved(v) for v in value)
    return is_unresolved_token(value)


@dataclass(frozen=True)
class ParamSpec:
    """One node of a schema's parameter tree.

    Arrays carry a single child describing their items; objects carry one
    child per declared field. Object fields not declared here are accepted
    as-is (properties maps are open), but declared fields are kind-checked.
    """

    name: str
    kind: str
    children: tuple["ParamSpec", ...] = ()

    def __post_init__(self):
        if self.kind not in PARAM_KINDS:
            raise InvalidSchemaError(f"unknown parameter kind {self.kind!r} for {self.name!r}")
        if self.children and self.kind not in ("array", "object"):
            raise InvalidSchemaError(f"parameter {self.name!r} of kind {self.kind} cannot have children")

    @classmethod
    def from_doc(cls, doc: dict) -> "ParamSpec":
        children = tuple(cls.from_doc(c) for c in doc.get("children", []))
        return cls(name=doc["name"], kind=doc["kind"], children=children)

    def to_doc(self) -> dict:
        doc = {"name": self.name, "kind": self.kind}
        if self.children:
            doc["children"] = [c.to_doc() for c in self.children]
        return doc


@dataclass(frozen=True)
class FunctionSchema:
    """A callable API operation of the simulated CRM."""

    name: str
    description: str
    http_method: str
    path_template: str
    parameters: tuple[ParamSpec, ...]
    required: frozenset[str]
    object_type: str
    category: str

    def __post_init__(self):
        if self.http_method not in HTTP_METHODS:
            raise InvalidSchemaError(f"{self.name}: unknown HTTP method {self.http_method!r}")
        if self.category not in CATEGORIES:
            raise InvalidSchemaError(f"{self.name}: unknown category {self.category!r}")
        if self.object_type not in OBJECT_TYPES:
            raise InvalidSchemaError(f"{self.name}: unknown object type {self.object_type!r}")
        top = {p.name for p in self.parameters}
        missing = self.required - top
        if missing:
            raise InvalidSchemaError(
                f"{self.name}: required set names absent parameters {sorted(missing)}"
            )
        for param in self.path_params():
            if param not in top:
                raise InvalidSchemaError(
                    f"{self.name}: path parameter {{{param}}} not declared in parameters"
                )

    def path_params(self) -> list[str]:
        return _PATH_PARAM_RE.findall(self.path_template)

    def param(self, name: str) -> Optional[ParamSpec]:
        for p in self.parameters:
            if p.name == name:
                return p
        return None

    @property
    def role(self) -> str:
        """Operational role derived from method and path shape.

        One of: create, search, read, update, delete, associate, assoc_list.
        """
        if "/associations/" in self.path_template:
            return "associate" if self.http_method == "PUT" else "assoc_list"
        if self.http_method == "POST":
            return "search" if self.path_template.endswith("/search") else "create"
        if self.http_method == "PATCH":
            return "update"
        if self.http_method == "DELETE":
            return "delete"
        return "read"

    def path_regex(self) -> re.Pattern:
        pattern = _PATH_PARAM_RE.sub(lambda m: f"(?P<{m.group(1)}>[^/]+)", self.path_template)
        return re.compile(f"^{pattern}$")

    @classmethod
    def from_doc(cls, doc: dict) -> "FunctionSchema":
        return cls(
            name=doc["name"],
            description=doc.get("description", ""),
            http_method=doc["method"],
            path_template=doc["path"],
            parameters=tuple(ParamSpec.from_doc(p) for p in doc.get("parameters", [])),
            required=frozenset(doc.get("required", [])),
            object_type=doc["objectType"],
            category=doc["category"],
        )

    def to_doc(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "method": self.http_method,
            "path": self.path_template,
            "parameters": [p.to_doc() for p in self.parameters],
            "required": sorted(self.required),
            "objectType": self.object_type,
            "category": self.category,
        }


@dataclass
class ApiCall:
    """A concrete API call: resolved path plus a document-tree body.

    ``resolved`` is False while the body or path still carries placeholder
    sentinels waiting for injection from earlier steps.
    """

    function_name: str
    method: str
    path: str
    body: dict = field(default_factory=dict)
    resolved: bool = True

    def has_unresolved_tokens(self) -> bool:
        return _tree_has_unresolved(self.body) or any(
            is_unresolved_token(seg) for seg in self.path.split("/")
        )

    def to_doc(self) -> dict:
        return {
            "function": self.function_name,
            "method": self.method,
            "path": self.path,
            "body": self.body,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ApiCall":
        call = cls(
            function_name=doc["function"],
            method=doc["method"],
            path=doc["path"],
            body=doc.get("body", {}),
        )
        call.resolved = not call.has_unresolved_tokens()
        return call


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violations: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def _kind_ok(value, kind: str) -> bool:
    if kind == "string":
        return isinstance(value, str)
    if kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "boolean":
        return isinstance(value, bool)
    if kind == "timestamp":
        return is_canonical_timestamp(value)
    if kind == "identifier":
        if isinstance(value, bool):
            return False
        if isinstance(value, int):
            return value > 0
        return isinstance(value, str) and value.isdigit() and int(value) > 0
    if kind == "array":
        return isinstance(value, list)
    if kind == "object":
        return isinstance(value, dict)
    return False


class SchemaRegistry:
    """Name-keyed store of FunctionSchemas with call validation.

    Mutation happens only through register() during construction; afterwards
    the registry should be treated as read-only shared state.
    """

    def __init__(self, schemas: Iterable[FunctionSchema] = ()):
        self._schemas: dict[str, FunctionSchema] = {}
        for schema in schemas:
            self.register(schema)

    def register(self, schema: FunctionSchema) -> "SchemaRegistry":
        if schema.name in self._schemas:
            raise DuplicateNameError(f"schema {schema.name!r} already registered")
        self._schemas[schema.name] = schema
        return self

    def get(self, name: str) -> FunctionSchema:
        try:
            return self._schemas[name]
        except KeyError:
            raise UnknownFunctionError(f"unknown function {name!r}") from None

    def has(self, name: str) -> bool:
        return name in self._schemas

    def names(self) -> list[str]:
        return sorted(self._schemas)

    def all(self) -> list[FunctionSchema]:
        return [self._schemas[n] for n in self.names()]

    def __len__(self) -> int:
        return len(self._schemas)

    def select_by_category(
        self, category: str, object_type: Optional[str] = None
    ) -> list[FunctionSchema]:
        """Schemas matching the filters, in lexicographic name order."""
        out = [
            s
            for s in self.all()
            if s.category == category and (object_type is None or s.object_type == object_type)
        ]
        return out

    def find(self, role: str, object_type: str) -> list[FunctionSchema]:
        """Schemas with the given operational role for one object type."""
        return [s for s in self.all() if s.role == role and s.object_type == object_type]

    def resolve_route(self, method: str, path: str):
        """Match a resolved path to its schema; returns (schema, path params) or None."""
        for schema in self.all():
            if schema.http_method != method:
                continue
            m = schema.path_regex().match(path)
            if m:
                return schema, m.groupdict()
        return None

    # -- call validation ---------------------------------------------------

    def validate_call(self, call: ApiCall, *, template: bool = False) -> ValidationResult:
        """Check a call against its schema.

        Content problems come back as violations; only an unknown function
        raises. With template=True, placeholder sentinels are accepted where
        concrete values are kind-checked.
        """
        schema = self.get(call.function_name)
        violations: list[str] = []

        match = schema.path_regex().match(call.path)
        path_values: dict[str, str] = {}
        if match is None:
            violations.append(f"path does not match template: {call.path}")
        else:
            path_values = match.groupdict()

        if not isinstance(call.body, dict):
            violations.append("body must be an object")
            return ValidationResult(False, tuple(violations))

        provided = dict(path_values)
        provided.update(call.body)

        declared = {p.name for p in schema.parameters}
        for name in call.body:
            if name not in declared:
                violations.append(f"unknown parameter: {name}")

        for name in sorted(schema.required):
            if name not in provided:
                violations.append(f"missing required: {name}")

        for spec in schema.parameters:
            if spec.name in provided:
                self._check_value(provided[spec.name], spec, spec.name, violations, template)

        return ValidationResult(not violations, tuple(violations))

    def _check_value(self, value, spec: ParamSpec, path: str, violations: list, template: bool):
        if template and is_unresolved_token(value):
            return
        if not _kind_ok(value, spec.kind):
            if spec.kind == "timestamp" and isinstance(value, str):
                violations.append(f"bad timestamp format: {path}")
            else:
                violations.append(f"wrong kind for {path}: expected {spec.kind}")
            return
        if spec.kind == "array" and spec.children:
            item_spec = spec.children[0]
            for i, item in enumerate(value):
                self._check_value(item, item_spec, f"{path}[{i}]", violations, template)
        elif spec.kind == "object" and spec.children:
            by_name = {c.name: c for c in spec.children}
            for key, sub in value.items():
                if key in by_name:
                    self._check_value(sub, by_name[key], f"{path}.{key}", violations, template)

    # -- example generation ------------------------------------------------

    def minimal_call(self, name: str) -> ApiCall:
        """Smallest valid call for a schema: required params, canonical values."""
        schema = self.get(name)
        path = schema.path_template
        body: dict = {}
        for spec in schema.parameters:
            if spec.name not in schema.required:
                continue
            value = _canonical_value(spec)
            if f"{{{spec.name}}}" in path:
                path = path.replace(f"{{{spec.name}}}", str(value))
            else:
                body[spec.name] = value
        return ApiCall(function_name=name, method=schema.http_method, path=path, body=body)

    # -- serialization -----------------------------------------------------

    @classmethod
    def from_file(cls, path) -> "SchemaRegistry":
        with open(path, "r", encoding="utf-8") as fh:
            docs = json.load(fh)
        return cls(FunctionSchema.from_doc(d) for d in docs)

    def to_docs(self) -> list[dict]:
        return [s.to_doc() for s in self.all()]


def _canonical_value(spec: ParamSpec):
    if spec.kind == "string":
        return "example"
    if spec.kind == "number":
        return 1
    if spec.kind == "boolean":
        return True
    if spec.kind == "timestamp":
        return CURRENT_TIME
    if spec.kind == "identifier":
        return "1"
    if spec.kind == "array":
        return []
    return {}


_default_registry: Optional[SchemaRegistry] = None


def default_registry() -> SchemaRegistry:
    """The shipped CRM schema corpus (cached; treat as read-only)."""
    global _default_registry
    if _default_registry is None:
        ref = resources.files("crmbench").joinpath("assets/schemas.json")
        with resources.as_file(ref) as path:
            _default_registry = SchemaRegistry.from_file(path)
    return _default_registry
