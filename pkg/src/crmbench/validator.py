"""Static plan validators with corrective feedback.

Every rule is pure code inspecting a parsed plan against the schema
registry and the simulator's documented semantics — no model in the loop.
Failing verdicts render to feedback text the planning agent receives on its
next attempt; identical failing plans always get byte-identical feedback.

The rule inventory is an open reconstruction of the recurring error
classes; rules can be toggled individually and the set is config-extensible.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import EmptyVerdictError, MappingError, NoMatchingSchemaError
from .ir import CalcExpr, IntermediateCall, PlaceholderRef, RESERVED_SEARCH_KEYS, compile_call
from .registry import SchemaRegistry
from .sim import MAX_FILTERS_PER_GROUP, TYPE_ALIASES

# Feedback emitted when a plan filters a search by an association as if it
# were a property. Kept word-for-word stable: the repair loop depends on
# repeated identical feedback for repeated identical mistakes.
R1_FEEDBACK = (
    "Hubspot needs you to search for associated resource first and use its deal id "
    "as the associated resource id in your second query. Break into two steps and "
    "do variable injection"
)

RULE_DESCRIPTIONS = {
    "R1": "association treated as a searchable property",
    "R2": "unknown operation for the object type",
    "R3": "missing required arguments",
    "R4": "malformed timestamp value",
    "R5": "more than 3 filters in a filterGroup",
    "R6": "placeholder referencing a later or absent step",
    "R7": "UPDATE/DELETE/ASSOCIATE without an id",
    "R8": "operation not implied by the query category",
    "R9": "argument cannot be placed or would be rejected",
}
ALL_RULES = frozenset(RULE_DESCRIPTIONS)

# Verbs a query category licenses; SEARCH is always legitimate as a lookup.
CATEGORY_VERBS = {
    "CREATE": {"CREATE"},
    "READ": set(),
    "UPDATE": {"UPDATE"},
    "DELETE": {"DELETE"},
    "ASSOCIATE": {"ASSOCIATE"},
}

VERB_ROLES = {
    "CREATE": "create",
    "SEARCH": "search",
    "UPDATE": "update",
    "DELETE": "delete",
    "ASSOCIATE": "associate",
}

_CALC_REF_RE = re.compile(r"\$(\d+)(?:\.\w+)+")


@dataclass(frozen=True)
class Violation:
    rule_id: str
    step_index: Optional[int]
    feedback: str

    def to_doc(self) -> dict:
        return {"rule": self.rule_id, "step": self.step_index, "feedback": self.feedback}


@dataclass(frozen=True)
class ValidatorVerdict:
    passed: bool
    violations: tuple = ()

    def __post_init__(self):
        if self.passed != (len(self.violations) == 0):
            raise ValueError("passed must mirror an empty violation list")

    def to_doc(self) -> dict:
        return {"passed": self.passed, "violations": [v.to_doc() for v in self.violations]}

    @classmethod
    def failing(cls, violations: Iterable[Violation]) -> "ValidatorVerdict":
        vs = tuple(violations)
        return cls(passed=not vs, violations=vs)


def render_feedback(verdict: ValidatorVerdict) -> str:
    """One feedback line per violation, in (step, rule) order."""
    if verdict.passed:
        raise EmptyVerdictError("cannot render feedback for a passing verdict")
    return "\n".join(v.feedback for v in verdict.violations)


def _iter_refs(value):
    if isinstance(value, PlaceholderRef):
        yield value
    elif isinstance(value, tuple):
        for item in value:
            yield from _iter_refs(item)
    elif isinstance(value, CalcExpr):
        for m in _CALC_REF_RE.finditer(value.instruction):
            yield PlaceholderRef(int(m.group(1)), "_")


def _step_violations(
    step: IntermediateCall, index: int, registry: SchemaRegistry, query_category
) -> list[Violation]:
    found: list[Violation] = []

    def add(rule: str, feedback: str):
        found.append(Violation(rule, index, feedback))

    keys = [k for k, _ in step.args]
    filter_keys = [
        k for k in keys if k not in RESERVED_SEARCH_KEYS and not k.startswith("of.")
    ]

    # R1: association-as-property filters
    if step.verb == "SEARCH" and any(k.split(".")[0] == "assoc" for k in keys):
        add("R1", R1_FEEDBACK)

    # R2: no operation for this (verb, object type)
    schema_missing = False
    role = VERB_ROLES[step.verb]
    of_keys = [k for k in keys if k.startswith("of.")]
    if of_keys:
        from_type = of_keys[0][len("of.") :]
        if not registry.find("assoc_list", from_type):
            schema_missing = True
            add(
                "R2",
                f"There is no association listing for object type '{from_type}'. "
                f"Use one of the documented object types.",
            )
    if not registry.find(role, step.object_type):
        schema_missing = True
        add(
            "R2",
            f"There is no {step.verb} operation for object type "
            f"'{step.object_type}'. Use one of the documented object types.",
        )

    # R5: overfull filter group
    if step.verb == "SEARCH" and len(filter_keys) > MAX_FILTERS_PER_GROUP:
        add(
            "R5",
            f"max filters per filterGroup allowed is {MAX_FILTERS_PER_GROUP}; this "
            f"search uses {len(filter_keys)}. Drop filters or split the search "
            f"into separate steps.",
        )

    # R6: forward or self references
    for _, value in step.args:
        for ref in _iter_refs(value):
            if ref.step_index >= index:
                add(
                    "R6",
                    f"Step {index} references step {ref.step_index}, but "
                    f"placeholders may only use the results of earlier steps. "
                    f"Reorder the plan so every value is produced before it is used.",
                )

    # R7: mutating operations without an id
    id_missing = False
    if step.verb in ("UPDATE", "DELETE"):
        if step.arg("id") is None:
            id_missing = True
            add(
                "R7",
                f"{step.verb.capitalize()} can only be done with the object ID. "
                f"Search for the object first (include id) and inject it as "
                f"id=$<step>.id.",
            )
    elif step.verb == "ASSOCIATE":
        if step.arg("id") is None or step.arg("to_id") is None:
            id_missing = True
            add(
                "R7",
                "Associate needs the object ID on both sides. Search for the "
                "missing record first (include id) and inject its id.",
            )

    # R3: required argument containers empty at the surface level
    if step.verb == "CREATE" and not keys:
        add("R3", "Create needs the new object's properties; provide at least one.")
    if step.verb == "UPDATE" and not [k for k in keys if k != "id"] and not id_missing:
        add("R3", "Update changes nothing without properties; provide at least one.")

    # R8: operation outside the query's category
    if query_category is not None and step.verb != "SEARCH":
        allowed = CATEGORY_VERBS.get(query_category, set())
        if step.verb not in allowed:
            add(
                "R8",
                f"The query does not call for any {step.verb} operation; remove "
                f"the extraneous step.",
            )

    # Compile-level checks only make sense on steps that resolve to a schema
    # and have their ids in place.
    if not schema_missing and not id_missing:
        found.extend(_compiled_violations(step, index, registry))
    return found


def _compiled_violations(step, index, registry) -> list[Violation]:
    found: list[Violation] = []

    def add(rule: str, feedback: str):
        found.append(Violation(rule, index, feedback))

    try:
        call = compile_call(step, registry, template=True)
    except NoMatchingSchemaError:
        return found  # already surfaced as R2
    except MappingError as exc:
        add("R9", f"{exc} Rewrite the step so every argument fits the operation.")
        return found

    result = registry.validate_call(call, template=True)
    for violation in result.violations:
        if violation.startswith("missing required: "):
            add(
                "R3",
                f"Missing required arguments: {violation[len('missing required: '):]}. "
                f"Every required argument must be provided.",
            )
        elif violation.startswith("bad timestamp format"):
            add(
                "R4",
                'any timestamp should always be in the format '
                '"yyyy-MM-dd\'T\'HH:mm:ss.SSS\'Z\'" '
                f"({violation.split(': ', 1)[1]} is not).",
            )
        else:
            add("R9", f"{violation}. Rewrite the step to match the operation's schema.")

    # Semantic rejections the simulator would answer with a 400.
    body = call.body
    if "limit" in body and isinstance(body["limit"], (int, float)) and body["limit"] < 1:
        add("R9", "limit must be at least 1.")
    if "after" in body and isinstance(body["after"], str) and not body["after"].isdigit():
        if not _is_sentinel(body["after"]):
            add("R9", "after must be a numeric paging cursor.")
    for group in body.get("filterGroups", []):
        for f in group.get("filters", []):
            if f.get("operator") == "IN" and isinstance(f.get("values"), list) and not f["values"]:
                add("R9", f"IN filter on {f.get('propertyName')} has an empty value list.")
    if call.function_name.startswith("crm_v3_associations"):
        params = _path_params(call, registry)
        to_type = params.get("toType", "")
        if to_type not in TYPE_ALIASES:
            add("R9", f"'{to_type}' is not an object type records can associate with.")
        if (
            step.verb == "ASSOCIATE"
            and to_type == step.object_type
            and str(step.arg("id")) == str(step.arg("to_id"))
            and not isinstance(step.arg("id"), PlaceholderRef)
        ):
            add("R9", "A record cannot be associated with itself.")
    return found


def _is_sentinel(text: str) -> bool:
    from .registry import is_unresolved_token

    return is_unresolved_token(text)


def _path_params(call, registry) -> dict:
    schema = registry.get(call.function_name)
    match = schema.path_regex().match(call.path)
    return match.groupdict() if match else {}


class PlanValidator:
    """The configured rule inventory; stateless and thread-safe."""

    def __init__(self, enabled: Optional[Iterable[str]] = None):
        self.enabled = frozenset(enabled) if enabled is not None else ALL_RULES
        unknown = self.enabled - ALL_RULES
        if unknown:
            raise ValueError(f"unknown rules: {sorted(unknown)}")

    def validate_plan(
        self,
        steps: Sequence[IntermediateCall],
        registry: SchemaRegistry,
        query_category: Optional[str] = None,
    ) -> ValidatorVerdict:
        violations: list[Violation] = []
        for index, step in enumerate(steps, start=1):
            violations.extend(_step_violations(step, index, registry, query_category))
        violations = [v for v in violations if v.rule_id in self.enabled]
        violations.sort(key=lambda v: (v.step_index or 0, v.rule_id, v.feedback))
        return ValidatorVerdict.failing(violations)


def validate_plan(
    steps: Sequence[IntermediateCall],
    registry: SchemaRegistry,
    query_category: Optional[str] = None,
) -> ValidatorVerdict:
    """Validate with the full rule inventory."""
    return PlanValidator().validate_plan(steps, registry, query_category)
