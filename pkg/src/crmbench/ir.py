"""Compact intermediate language for CRM API calls.

One call per line: ``VERB object_type [positional-id] key=value ...
[-> to_type to_id] [include=[a,b]]``. Values are strings at the surface;
the compiler applies schema-driven typing when building the JSON body, and
the decompiler stringifies back, so parse/compile/decompile round-trips are
lossless over grammar-valid calls.

Placeholders ``$<step>.<dotted.path>`` stand for values produced by earlier
plan steps; ``calc("...")`` marks a value a helper must compute. Both
survive compilation in template mode as sentinel strings, and
bind_placeholders resolves refs against recorded step responses.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from .errors import (
    AmbiguousSchemaError,
    DuplicateKeyError,
    IrSyntaxError,
    MappingError,
    MissingPathError,
    NoMatchingSchemaError,
    UnboundStepError,
    UnknownVerbError,
)
from .registry import ApiCall, FunctionSchema, SchemaRegistry

VERBS = ("CREATE", "SEARCH", "UPDATE", "DELETE", "ASSOCIATE")

# Operator suffixes on filter keys; bare keys mean EQ.
OP_SUFFIXES = {"gt": "GT", "lt": "LT", "neq": "NEQ", "contains": "CONTAINS", "in": "IN"}
SUFFIX_FOR_OP = {v: k for k, v in OP_SUFFIXES.items()}

# SEARCH keys that configure the request rather than filter properties.
RESERVED_SEARCH_KEYS = ("limit", "after", "sort")

_PLACEHOLDER_RE = re.compile(r"^\$(\d+)((?:\.\w+)+)$")
_WORD_RE = re.compile(r"^\w+$")
_NEEDS_QUOTE_RE = re.compile(r'[\s"\[\],=]|->|^$')


@dataclass(frozen=True)
class PlaceholderRef:
    """A value coming from an earlier step's response document."""

    step_index: int
    path: str

    def __post_init__(self):
        if self.step_index < 1:
            raise ValueError("step_index must be >= 1")

    def render(self) -> str:
        return f"${self.step_index}.{self.path}"


@dataclass(frozen=True)
class CalcExpr:
    """A value a helper computes from a natural-language instruction."""

    instruction: str

    def render(self) -> str:
        return f'calc("{_escape(self.instruction)}")'

    def sentinel(self) -> str:
        return f"$calc({self.instruction})"


Value = Union[str, tuple, PlaceholderRef, CalcExpr]


@dataclass
class IntermediateCall:
    verb: str
    object_type: str
    args: tuple = ()  # ordered (key, Value) pairs
    include: tuple = ()

    def arg(self, key: str) -> Optional[Value]:
        for k, v in self.args:
            if k == key:
                return v
        return None

    def has_refs(self) -> bool:
        def check(v):
            if isinstance(v, PlaceholderRef):
                return True
            if isinstance(v, tuple):
                return any(check(x) for x in v)
            return False

        return any(check(v) for _, v in self.args)


# ---------------------------------------------------------------------------
# parsing


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str) -> IrSyntaxError:
        return IrSyntaxError(message, line=1, column=self.pos + 1)

    def eof(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def skip_space(self):
        while not self.eof() and self.text[self.pos] in " \t":
            self.pos += 1

    def scan_bare(self) -> str:
        start = self.pos
        while not self.eof() and self.text[self.pos] not in ' \t"[],=':
            self.pos += 1
        return self.text[start : self.pos]

    def scan_quoted(self) -> str:
        assert self.peek() == '"'
        self.pos += 1
        out = []
        while True:
            if self.eof():
                raise self.error("unterminated string literal")
            ch = self.text[self.pos]
            self.pos += 1
            if ch == '"':
                return "".join(out)
            if ch == "\\":
                if self.eof():
                    raise self.error("dangling escape")
                out.append(self.text[self.pos])
                self.pos += 1
            else:
                out.append(ch)

    def scan_value(self) -> Value:
        if self.peek() == '"':
            text = self.scan_quoted()
            if _PLACEHOLDER_RE.match(text):
                raise self.error(
                    f"quoted literal {text!r} collides with placeholder syntax"
                )
            return text
        if self.peek() == "[":
            return self.scan_list()
        bare = self.scan_bare()
        if not bare:
            raise self.error("expected a value")
        if bare.startswith("calc("):
            # calc("...") — the quoted part stops scan_bare at the quote.
            if bare != "calc(" or self.peek() != '"':
                raise self.error('calc expects the form calc("instruction")')
            instruction = self.scan_quoted()
            if self.peek() != ")":
                raise self.error("calc missing closing parenthesis")
            self.pos += 1
            return CalcExpr(instruction)
        if bare.startswith("$"):
            m = _PLACEHOLDER_RE.match(bare)
            if not m:
                raise self.error(f"bad placeholder {bare!r}")
            return PlaceholderRef(int(m.group(1)), m.group(2)[1:])
        return bare

    def scan_list(self) -> tuple:
        assert self.peek() == "["
        self.pos += 1
        items = []
        self.skip_space()
        if self.peek() == "]":
            self.pos += 1
            return tuple(items)
        while True:
            self.skip_space()
            items.append(self.scan_value())
            self.skip_space()
            ch = self.peek()
            if ch == ",":
                self.pos += 1
                continue
            if ch == "]":
                self.pos += 1
                return tuple(items)
            raise self.error("expected ',' or ']' in list")


def parse(text: str) -> IntermediateCall:
    """Parse one line of IR into a normalized IntermediateCall.

    Normalization: UPDATE/DELETE positional ids become id= args; SEARCH args
    keep filter order but move limit/after/sort to the tail; include always
    renders last.
    """
    sc = _Scanner(text.strip())
    sc.skip_space()
    verb = sc.scan_bare()
    if not verb:
        raise sc.error("empty call")
    if verb.upper() in VERBS and verb != verb.upper():
        verb = verb.upper()
    if verb not in VERBS:
        raise UnknownVerbError(f"unknown verb {verb!r}", line=1, column=1)
    sc.skip_space()
    object_type = sc.scan_bare()
    if not _WORD_RE.match(object_type or ""):
        raise sc.error("expected an object type after the verb")

    positional: Optional[Value] = None
    args: list = []
    include: tuple = ()
    arrow: Optional[tuple] = None
    seen = set()

    while True:
        sc.skip_space()
        if sc.eof():
            break
        if sc.text.startswith("->", sc.pos):
            sc.pos += 2
            sc.skip_space()
            to_type = sc.scan_bare()
            if not _WORD_RE.match(to_type or ""):
                raise sc.error("expected an object type after '->'")
            sc.skip_space()
            to_id = sc.scan_value()
            arrow = (to_type, to_id)
            continue
        start = sc.pos
        token = sc.scan_bare()
        if token and not sc.eof() and sc.peek() == "=":
            # looked like a key — rewind not needed; just consume '='
            key = token
            sc.pos += 1
            value = sc.scan_value()
            if key == "include":
                if not isinstance(value, tuple):
                    raise sc.error("include expects a [..] list")
                if include:
                    raise DuplicateKeyError("duplicate include", line=1, column=start + 1)
                include = tuple(str(v) for v in value)
                continue
            if key in seen:
                raise DuplicateKeyError(f"duplicate key {key!r}", line=1, column=start + 1)
            seen.add(key)
            args.append((key, value))
            continue
        # not a key=value: positional value (ids may be placeholders)
        sc.pos = start
        value = sc.scan_value()
        if positional is not None:
            raise sc.error("unexpected extra positional value")
        positional = value

    return _normalize(verb, object_type, positional, args, arrow, include, sc)


def _normalize(verb, object_type, positional, args, arrow, include, sc) -> IntermediateCall:
    if arrow is not None and verb != "ASSOCIATE":
        raise sc.error("'->' clause is only valid for ASSOCIATE")
    if verb == "ASSOCIATE":
        if positional is None or arrow is None:
            raise sc.error("ASSOCIATE needs: ASSOCIATE <type> <id> -> <to_type> <to_id>")
        if args:
            raise sc.error("ASSOCIATE takes no key=value arguments")
        to_type, to_id = arrow
        out = [("id", positional), ("to_type", to_type), ("to_id", to_id)]
        return IntermediateCall(verb, object_type, tuple(out), include)
    if positional is not None:
        if verb not in ("UPDATE", "DELETE"):
            raise sc.error(f"{verb} does not take a positional id")
        if any(k == "id" for k, _ in args):
            raise DuplicateKeyError("duplicate key 'id'", line=1, column=1)
        args = [("id", positional)] + args
    if verb in ("UPDATE", "DELETE"):
        # id always leads
        ids = [(k, v) for k, v in args if k == "id"]
        rest = [(k, v) for k, v in args if k != "id"]
        args = ids + rest
    if verb == "SEARCH":
        filters = [(k, v) for k, v in args if k not in RESERVED_SEARCH_KEYS]
        tail = [
            (k, v)
            for key in RESERVED_SEARCH_KEYS
            for k, v in args
            if k == key
        ]
        args = filters + tail
    return IntermediateCall(verb, object_type, tuple(args), include)


# ---------------------------------------------------------------------------
# rendering


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _render_value(value: Value) -> str:
    if isinstance(value, PlaceholderRef):
        return value.render()
    if isinstance(value, CalcExpr):
        return value.render()
    if isinstance(value, tuple):
        return "[" + ",".join(_render_value(v) for v in value) + "]"
    text = str(value)
    if _PLACEHOLDER_RE.match(text):
        raise ValueError(f"literal {text!r} collides with placeholder syntax")
    # Literals that could scan as placeholder or calc syntax must be quoted.
    if _NEEDS_QUOTE_RE.search(text) or text.startswith("$") or text.startswith("calc("):
        return f'"{_escape(text)}"'
    return text


def render(call: IntermediateCall) -> str:
    parts = [call.verb, call.object_type]
    if call.verb == "ASSOCIATE":
        by_key = dict(call.args)
        parts.append(_render_value(by_key["id"]))
        parts.append("->")
        parts.append(str(by_key["to_type"]))
        parts.append(_render_value(by_key["to_id"]))
    else:
        for key, value in call.args:
            parts.append(f"{key}={_render_value(value)}")
    if call.include:
        parts.append("include=[" + ",".join(call.include) + "]")
    return " ".join(parts)


# ---------------------------------------------------------------------------
# placeholder binding


def bind_placeholders(call: IntermediateCall, bindings: dict) -> IntermediateCall:
    """Replace every PlaceholderRef with the value recorded for its step.

    Scalars become strings (the IR value domain); list values stay lists so
    they can feed IN filters. Refs inside calc instructions are substituted
    textually. Idempotent on ref-free calls.
    """

    def resolve_ref(ref: PlaceholderRef):
        if ref.step_index not in bindings:
            raise UnboundStepError(f"step {ref.step_index} has no recorded response")
        doc = bindings[ref.step_index]
        node = doc
        for segment in ref.path.split("."):
            if isinstance(node, list):
                if not segment.isdigit() or int(segment) >= len(node):
                    raise MissingPathError(ref.step_index, ref.path)
                node = node[int(segment)]
            elif isinstance(node, dict) and segment in node:
                node = node[segment]
            else:
                raise MissingPathError(ref.step_index, ref.path)
        return node

    def to_value(node, ref):
        if isinstance(node, dict):
            raise MissingPathError(ref.step_index, ref.path)
        if isinstance(node, list):
            return tuple(to_value(item, ref) for item in node)
        if isinstance(node, bool):
            return "true" if node else "false"
        return str(node)

    def bind(value: Value) -> Value:
        if isinstance(value, PlaceholderRef):
            return to_value(resolve_ref(value), value)
        if isinstance(value, tuple):
            return tuple(bind(v) for v in value)
        if isinstance(value, CalcExpr):
            def swap(m):
                ref = PlaceholderRef(int(m.group(1)), m.group(2)[1:])
                return str(resolve_ref(ref))

            text = re.sub(r"\$(\d+)((?:\.\w+)+)", swap, value.instruction)
            return CalcExpr(text)
        return value

    args = tuple((k, bind(v)) for k, v in call.args)
    return IntermediateCall(call.verb, call.object_type, args, call.include)


# ---------------------------------------------------------------------------
# compiling


def _unique_schema(registry: SchemaRegistry, role: str, object_type: str) -> FunctionSchema:
    matches = registry.find(role, object_type)
    if not matches:
        raise NoMatchingSchemaError(f"no {role} schema for object type {object_type!r}")
    if len(matches) > 1:
        names = ", ".join(s.name for s in matches)
        raise AmbiguousSchemaError(f"multiple {role} schemas for {object_type!r}: {names}")
    return matches[0]


def _property_kinds(schema: FunctionSchema) -> dict:
    spec = schema.param("properties")
    if spec is None:
        return {}
    return {child.name: child.kind for child in spec.children}


def _convert(value: Value, kind: str, key: str, template: bool):
    if isinstance(value, PlaceholderRef):
        if not template:
            raise MappingError(f"unresolved placeholder in {key!r} outside template mode")
        return value.render()
    if isinstance(value, CalcExpr):
        if not template:
            raise MappingError(f"uncomputed calc() value in {key!r} outside template mode")
        return value.sentinel()
    if isinstance(value, tuple):
        raise MappingError(f"list value cannot fill scalar argument {key!r}")
    text = str(value)
    if kind == "number":
        try:
            return int(text)
        except ValueError:
            try:
                return float(text)
            except ValueError:
                raise MappingError(f"argument {key!r} expects a number, got {text!r}") from None
    if kind == "boolean":
        if text.lower() in ("true", "false"):
            return text.lower() == "true"
        raise MappingError(f"argument {key!r} expects true/false, got {text!r}")
    # string / identifier / timestamp stay strings
    return text


def _scalar_sentinel(value: Value, key: str, template: bool) -> str:
    """Render a path-position value: literal string or placeholder sentinel."""
    if isinstance(value, PlaceholderRef):
        if not template:
            raise MappingError(f"unresolved placeholder in {key!r} outside template mode")
        return value.render()
    if isinstance(value, CalcExpr):
        raise MappingError(f"calc() cannot supply the {key!r} path parameter")
    if isinstance(value, tuple):
        raise MappingError(f"list value cannot fill the {key!r} path parameter")
    return str(value)


def _split_filter_key(key: str):
    parts = key.split(".")
    if len(parts) > 1 and parts[-1] in OP_SUFFIXES:
        return ".".join(parts[:-1]), OP_SUFFIXES[parts[-1]]
    return key, "EQ"


def compile_call(
    call: IntermediateCall, registry: SchemaRegistry, *, template: bool = False
) -> ApiCall:
    """Expand an IntermediateCall into the concrete ApiCall it denotes."""
    verb = call.verb
    if verb == "SEARCH":
        of_keys = [k for k, _ in call.args if k.startswith("of.")]
        if of_keys:
            return _compile_assoc_list(call, registry, of_keys, template)
        return _compile_search(call, registry, template)
    if verb == "CREATE":
        return _compile_properties_call(call, registry, "create", template)
    if verb == "UPDATE":
        return _compile_properties_call(call, registry, "update", template)
    if verb == "DELETE":
        return _compile_delete(call, registry, template)
    return _compile_associate(call, registry, template)


def _substitute_path(schema: FunctionSchema, values: dict) -> str:
    path = schema.path_template
    for name, value in values.items():
        path = path.replace(f"{{{name}}}", value)
    return path


def _compile_properties_call(call, registry, role, template) -> ApiCall:
    schema = _unique_schema(registry, role, call.object_type)
    kinds = _property_kinds(schema)
    properties = {}
    path_values = {}
    for key, value in call.args:
        if key == "id":
            if role == "create":
                raise MappingError("CREATE does not take an id argument")
            path_values[f"{call.object_type}Id"] = _scalar_sentinel(value, key, template)
            continue
        properties[key] = _convert(value, kinds.get(key, "string"), key, template)
    if role == "update" and f"{call.object_type}Id" not in path_values:
        raise MappingError("UPDATE requires an id argument")
    if call.include:
        raise MappingError(f"{call.verb} does not support include")
    body = {"properties": properties}
    return ApiCall(
        function_name=schema.name,
        method=schema.http_method,
        path=_substitute_path(schema, path_values),
        body=body,
        resolved=not _has_sentinels(path_values, body),
    )


def _compile_delete(call, registry, template) -> ApiCall:
    schema = _unique_schema(registry, "delete", call.object_type)
    by_key = dict(call.args)
    if "id" not in by_key:
        raise MappingError("DELETE requires an id argument")
    extra = [k for k, _ in call.args if k != "id"]
    if extra or call.include:
        raise MappingError(f"DELETE takes only id, got {extra}")
    path_values = {f"{call.object_type}Id": _scalar_sentinel(by_key["id"], "id", template)}
    return ApiCall(
        function_name=schema.name,
        method=schema.http_method,
        path=_substitute_path(schema, path_values),
        body={},
        resolved=not _has_sentinels(path_values, {}),
    )


def _compile_associate(call, registry, template) -> ApiCall:
    schema = _unique_schema(registry, "associate", call.object_type)
    by_key = dict(call.args)
    for needed in ("id", "to_type", "to_id"):
        if needed not in by_key:
            raise MappingError("ASSOCIATE requires '<id> -> <to_type> <to_id>'")
    if call.include:
        raise MappingError("ASSOCIATE does not support include")
    path_values = {
        "fromId": _scalar_sentinel(by_key["id"], "id", template),
        "toType": str(by_key["to_type"]),
        "toId": _scalar_sentinel(by_key["to_id"], "to_id", template),
    }
    return ApiCall(
        function_name=schema.name,
        method=schema.http_method,
        path=_substitute_path(schema, path_values),
        body={},
        resolved=not _has_sentinels(path_values, {}),
    )


def _compile_assoc_list(call, registry, of_keys, template) -> ApiCall:
    if len(of_keys) > 1:
        raise MappingError(f"multiple of.* arguments: {of_keys}")
    others = [k for k, _ in call.args if not k.startswith("of.")]
    if others or call.include:
        raise MappingError("of.<type> must be the only argument of an association SEARCH")
    key = of_keys[0]
    from_type = key[len("of.") :]
    schema = _unique_schema(registry, "assoc_list", from_type)
    value = call.arg(key)
    path_values = {
        "fromId": _scalar_sentinel(value, key, template),
        "toType": call.object_type,
    }
    return ApiCall(
        function_name=schema.name,
        method=schema.http_method,
        path=_substitute_path(schema, path_values),
        body={},
        resolved=not _has_sentinels(path_values, {}),
    )


def _compile_search(call, registry, template) -> ApiCall:
    schema = _unique_schema(registry, "search", call.object_type)
    filters = []
    body: dict = {}
    for key, value in call.args:
        if key == "limit":
            body["limit"] = _convert(value, "number", key, template)
            continue
        if key == "after":
            body["after"] = _convert(value, "string", key, template)
            continue
        if key == "sort":
            body["sorts"] = [_sort_doc(value, template)]
            continue
        prop, op = _split_filter_key(key)
        if prop.startswith("assoc."):
            if op != "EQ":
                raise MappingError(f"assoc.* filters accept only equality, got {key!r}")
            prop = "associations." + prop[len("assoc.") :]
        if op == "IN":
            if isinstance(value, tuple):
                values = [_convert(v, "string", key, template) for v in value]
            elif isinstance(value, PlaceholderRef):
                if not template:
                    raise MappingError(f"unresolved placeholder in {key!r} outside template mode")
                values = value.render()
            else:
                raise MappingError(f"{key!r} expects a list value")
            filters.append({"propertyName": prop, "operator": op, "values": values})
        else:
            filters.append(
                {
                    "propertyName": prop,
                    "operator": op,
                    "value": _convert(value, "string", key, template),
                }
            )
    body = {"filterGroups": [{"filters": filters}] if filters else [], **body}
    if call.include:
        body["properties"] = list(call.include)
    return ApiCall(
        function_name=schema.name,
        method=schema.http_method,
        path=schema.path_template,
        body=body,
        resolved=not _has_sentinels({}, body),
    )


def _sort_doc(value: Value, template: bool) -> dict:
    if not isinstance(value, str):
        raise MappingError("sort expects <property> or <property>.desc")
    direction = "ASCENDING"
    prop = value
    if value.endswith(".desc"):
        prop, direction = value[: -len(".desc")], "DESCENDING"
    elif value.endswith(".asc"):
        prop = value[: -len(".asc")]
    return {"propertyName": prop, "direction": direction}


def _has_sentinels(path_values: dict, body) -> bool:
    from .registry import is_unresolved_token

    def walk(node):
        if isinstance(node, dict):
            return any(walk(v) for v in node.values())
        if isinstance(node, list):
            return any(walk(v) for v in node)
        return is_unresolved_token(node)

    return any(walk(v) for v in path_values.values()) or walk(body)


# ---------------------------------------------------------------------------
# decompiling


def _value_from_sentinel(text: str) -> Value:
    m = _PLACEHOLDER_RE.match(text)
    if m:
        return PlaceholderRef(int(m.group(1)), m.group(2)[1:])
    if text.startswith("$calc(") and text.endswith(")"):
        return CalcExpr(text[len("$calc(") : -1])
    return text


def _stringify(value) -> Value:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return _value_from_sentinel(value)
    return str(value)


def decompile(call: ApiCall, registry: SchemaRegistry) -> IntermediateCall:
    """Recover the IntermediateCall a compiled ApiCall denotes."""
    schema = registry.get(call.function_name)
    role = schema.role
    match = schema.path_regex().match(call.path)
    if match is None:
        raise MappingError(f"path {call.path!r} does not match {schema.name}")
    params = match.groupdict()
    otype = schema.object_type

    if role == "create":
        args = tuple((k, _stringify(v)) for k, v in call.body.get("properties", {}).items())
        return IntermediateCall("CREATE", otype, args)
    if role == "update":
        args = [("id", _stringify(params[f"{otype}Id"]))]
        args += [(k, _stringify(v)) for k, v in call.body.get("properties", {}).items()]
        return IntermediateCall("UPDATE", otype, tuple(args))
    if role == "delete":
        return IntermediateCall("DELETE", otype, (("id", _stringify(params[f"{otype}Id"])),))
    if role == "read":
        return IntermediateCall("SEARCH", otype, (("id", _stringify(params[f"{otype}Id"])),))
    if role == "associate":
        args = (
            ("id", _stringify(params["fromId"])),
            ("to_type", params["toType"]),
            ("to_id", _stringify(params["toId"])),
        )
        return IntermediateCall("ASSOCIATE", otype, args)
    if role == "assoc_list":
        to_type = params["toType"]
        args = ((f"of.{otype}", _stringify(params["fromId"])),)
        return IntermediateCall("SEARCH", to_type, args)
    return _decompile_search(call, otype)


def _decompile_search(call: ApiCall, otype: str) -> IntermediateCall:
    body = call.body
    groups = body.get("filterGroups", [])
    if len(groups) > 1:
        raise MappingError("cannot decompile multi-group searches")
    args: list = []
    filters = groups[0].get("filters", []) if groups else []
    for f in filters:
        prop = f["propertyName"]
        if prop.startswith("associations."):
            prop = "assoc." + prop[len("associations.") :]
        op = f.get("operator", "EQ")
        key = prop if op == "EQ" else f"{prop}.{SUFFIX_FOR_OP[op]}"
        if op == "IN":
            raw = f.get("values", [])
            if isinstance(raw, str):
                value = _value_from_sentinel(raw)
            else:
                value = tuple(_stringify(v) for v in raw)
        else:
            value = _stringify(f.get("value"))
        args.append((key, value))
    if "limit" in body:
        args.append(("limit", _stringify(body["limit"])))
    if "after" in body:
        args.append(("after", _stringify(body["after"])))
    for sort in body.get("sorts", []):
        prop = sort["propertyName"]
        suffix = ".desc" if str(sort.get("direction", "")).upper() == "DESCENDING" else ""
        args.append(("sort", f"{prop}{suffix}"))
    include = tuple(body.get("properties", []))
    return IntermediateCall("SEARCH", otype, tuple(args), include)


# ---------------------------------------------------------------------------
# token economy + tool-use form


def to_tool_use(call: ApiCall, registry: SchemaRegistry) -> dict:
    """The verbose JSON form a function-calling model would emit."""
    schema = registry.get(call.function_name)
    match = schema.path_regex().match(call.path)
    params = match.groupdict() if match else {}
    return {"name": call.function_name, "input": {**params, **call.body}}
