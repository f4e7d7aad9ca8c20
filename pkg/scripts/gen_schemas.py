"""Regenerate src/crmbench/assets/schemas.json (the CRM function corpus).

Deterministic: running it twice produces byte-identical output. Edit the
catalogs below and rerun rather than hand-editing the JSON.
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from crmbench.registry import FunctionSchema  # noqa: E402

PLURALS = {
    "contact": "contacts",
    "company": "companies",
    "deal": "deals",
    "note": "notes",
    "task": "tasks",
    "owner": "owners",
}

# Writable property catalog per object type: name -> kind.
PROPERTIES = {
    "contact": {
        "firstname": "string",
        "lastname": "string",
        "email": "string",
        "phone": "string",
        "company": "string",
        "lifecyclestage": "string",
        "hubspot_owner_id": "identifier",
    },
    "company": {
        "name": "string",
        "domain": "string",
        "city": "string",
        "industry": "string",
        "hubspot_owner_id": "identifier",
    },
    "deal": {
        "dealname": "string",
        "amount": "number",
        "dealstage": "string",
        "closedate": "timestamp",
        "hubspot_owner_id": "identifier",
    },
    "note": {
        "hs_note_body": "string",
        "hs_timestamp": "timestamp",
        "hs_createdate": "timestamp",
    },
    "task": {
        "hs_task_subject": "string",
        "hs_task_body": "string",
        "hs_task_status": "string",
        "hs_timestamp": "timestamp",
        "hubspot_owner_id": "identifier",
    },
    "owner": {
        "email": "string",
        "firstname": "string",
        "lastname": "string",
    },
}


def properties_param(otype):
    children = [{"name": n, "kind": k} for n, k in PROPERTIES[otype].items()]
    return {"name": "properties", "kind": "object", "children": children}


def string_param(name):
    return {"name": name, "kind": "string"}


def filter_object():
    return {
        "name": "filters",
        "kind": "array",
        "children": [
            {
                "name": "filter",
                "kind": "object",
                "children": [
                    {"name": "propertyName", "kind": "string"},
                    {"name": "operator", "kind": "string"},
                    {"name": "value", "kind": "string"},
                    {
                        "name": "values",
                        "kind": "array",
                        "children": [{"name": "item", "kind": "string"}],
                    },
                ],
            }
        ],
    }


def search_params():
    return [
        {
            "name": "filterGroups",
            "kind": "array",
            "children": [
                {"name": "group", "kind": "object", "children": [filter_object()]}
            ],
        },
        {
            "name": "properties",
            "kind": "array",
            "children": [{"name": "item", "kind": "string"}],
        },
        {"name": "limit", "kind": "number"},
        {"name": "after", "kind": "string"},
        {
            "name": "sorts",
            "kind": "array",
            "children": [
                {
                    "name": "sort",
                    "kind": "object",
                    "children": [
                        {"name": "propertyName", "kind": "string"},
                        {"name": "direction", "kind": "string"},
                    ],
                }
            ],
        },
    ]


def name_for(method, path):
    segments = []
    for seg in path.strip("/").split("/"):
        if seg.startswith("{") and seg.endswith("}"):
            segments.append(seg[1:-1])
        else:
            segments.append(seg)
    return "_".join(segments + [method.lower()])


def build():
    docs = []
    for otype in sorted(PLURALS):
        plural = PLURALS[otype]
        id_param = f"{otype}Id"
        prop_names = ", ".join(sorted(PROPERTIES[otype]))

        base = f"/crm/v3/objects/{plural}"
        item = f"{base}/{{{id_param}}}"
        assoc_base = f"/crm/v3/associations/{otype}"

        entries = [
            {
                "method": "POST",
                "path": base,
                "category": "CREATE",
                "description": (
                    f"Create a new {otype} record. The properties object holds its "
                    f"fields; known {otype} properties include {prop_names}."
                ),
                "parameters": [properties_param(otype)],
                "required": ["properties"],
            },
            {
                "method": "POST",
                "path": f"{base}/search",
                "category": "READ",
                "description": (
                    f"Search {plural} by property filters. Each filterGroup ANDs its "
                    f"filters and groups are ORed together; at most 3 filters per "
                    f"filterGroup. Supports limit, after paging and sorts. "
                    f"Filterable {otype} properties: {prop_names}."
                ),
                "parameters": search_params(),
                "required": ["filterGroups"],
            },
            {
                "method": "GET",
                "path": item,
                "category": "READ",
                "description": f"Read a single {otype} record by its {id_param}.",
                "parameters": [{"name": id_param, "kind": "identifier"}],
                "required": [id_param],
            },
            {
                "method": "PATCH",
                "path": item,
                "category": "UPDATE",
                "description": (
                    f"Update properties of an existing {otype} identified by "
                    f"{id_param}. Only the provided {otype} properties change."
                ),
                "parameters": [
                    {"name": id_param, "kind": "identifier"},
                    properties_param(otype),
                ],
                "required": [id_param, "properties"],
            },
            {
                "method": "DELETE",
                "path": item,
                "category": "DELETE",
                "description": f"Archive (delete) the {otype} with the given {id_param}.",
                "parameters": [{"name": id_param, "kind": "identifier"}],
                "required": [id_param],
            },
            {
                "method": "PUT",
                "path": assoc_base + "/{fromId}/{toType}/{toId}",
                "category": "ASSOCIATE",
                "description": (
                    f"Associate the {otype} fromId with another record: toType names "
                    f"the target object type (e.g. contact, company, deal) and toId "
                    f"is the target record id."
                ),
                "parameters": [
                    {"name": "fromId", "kind": "identifier"},
                    {"name": "toType", "kind": "string"},
                    {"name": "toId", "kind": "identifier"},
                ],
                "required": ["fromId", "toType", "toId"],
            },
            {
                "method": "GET",
                "path": assoc_base + "/{fromId}/{toType}",
                "category": "READ",
                "description": (
                    f"List ids of records of type toType associated with the {otype} "
                    f"fromId."
                ),
                "parameters": [
                    {"name": "fromId", "kind": "identifier"},
                    {"name": "toType", "kind": "string"},
                ],
                "required": ["fromId", "toType"],
            },
        ]
        for entry in entries:
            doc = {
                "name": name_for(entry["method"], entry["path"]),
                "description": entry["description"],
                "method": entry["method"],
                "path": entry["path"],
                "parameters": entry["parameters"],
                "required": entry["required"],
                "objectType": otype,
                "category": entry["category"],
            }
            FunctionSchema.from_doc(doc)  # validate before shipping
            docs.append(doc)
    docs.sort(key=lambda d: d["name"])
    return docs


def main():
    docs = build()
    out = ROOT / "src" / "crmbench" / "assets" / "schemas.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(docs, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(docs)} schemas to {out}")


if __name__ == "__main__":
    main()
