#!/usr/bin/env python3
"""Regenerate the demo benchmark datasets and scripted model behaviors.

Outputs (under src/crmbench/assets/bench/):

    demo_single.jsonl     12 one-call queries covering every CRUDA category
    demo_multi.jsonl      6 two-call queries with placeholder injection
    demo_full.jsonl       the two files concatenated (the golden corpus)
    scripts/thor_demo.jsonl     planner answers: gold plan on attempt 1
    scripts/thor_flaky.jsonl    same, but q5 fails on repeats 1, 4 and 9
    scripts/thor_allfail.jsonl  every attempt emits an invalid plan
    scripts/thor_repair.jsonl   q13: invalid on attempt 1, gold on attempt 2
    scripts/single_demo.jsonl   one-call baseline answers (gold tool use)
    scripts/multi_demo.jsonl    split / gen1 / rewrite / gen2 answers

Every gold plan is executed against a freshly seeded simulator while
generating, so a plan that does not produce all-2xx responses fails loudly
here rather than in a test.  All model completions carry 1.0 s of injected
latency; execution latency is configured at run time.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from crmbench.ir import bind_placeholders, compile_call, parse, render, to_tool_use
from crmbench.pipelines.base import binding_doc
from crmbench.registry import default_registry
from crmbench.sim import seeded_store

BENCH_DIR = ROOT / "src" / "crmbench" / "assets" / "bench"
SCRIPT_DIR = BENCH_DIR / "scripts"

COMPLETION_LATENCY = 1.0
FIXTURE = "seed"

# An association-as-property search: rule R1 rejects it on every attempt.
BAIT_PLAN = "SEARCH note assoc.deal=15860461964 include=[hs_note_body,hs_createdate]"

# (id, category, text, gold plan lines)
SINGLE = [
    ("q1", "CREATE",
     "Create a new contact named Dana Whitfield with email dana.whitfield@northwind.example",
     ["CREATE contact firstname=Dana lastname=Whitfield email=dana.whitfield@northwind.example"]),
    ("q2", "CREATE",
     'Add a note that says "Renewal call scheduled for Friday"',
     ['CREATE note hs_note_body="Renewal call scheduled for Friday"']),
    ("q3", "READ",
     "Find the contact whose email is gary.shaw@lakkatech.com and show the first and last name",
     ["SEARCH contact email=gary.shaw@lakkatech.com include=[firstname,lastname]"]),
    ("q4", "READ",
     "Show deal 15810400147",
     ["SEARCH deal id=15810400147"]),
    ("q5", "READ",
     "List all companies in the software industry",
     ["SEARCH company industry=software"]),
    ("q6", "UPDATE",
     "Set the amount of deal 15810400147 to 52000",
     ["UPDATE deal id=15810400147 amount=52000"]),
    ("q7", "UPDATE",
     "Move contact 52 to the customer lifecycle stage",
     ["UPDATE contact id=52 lifecyclestage=customer"]),
    ("q8", "UPDATE",
     'Rename company 78 to "Northwind Trading Co"',
     ['UPDATE company id=78 name="Northwind Trading Co"']),
    ("q9", "DELETE",
     "Delete note 9003",
     ["DELETE note id=9003"]),
    ("q10", "DELETE",
     "Archive task 8101",
     ["DELETE task id=8101"]),
    ("q11", "ASSOCIATE",
     "Attach note 9003 to deal 15810400147",
     ["ASSOCIATE note 9003 -> deal 15810400147"]),
    ("q12", "ASSOCIATE",
     "Link contact 53 to company 78",
     ["ASSOCIATE contact 53 -> company 78"]),
]

# (id, category, text, gold plan lines, task 1, task 2, rewritten task 2)
MULTI = [
    ("q13", "READ",
     "Search all notes with associated deal 15860461964",
     ["SEARCH note of.deal=15860461964",
      "SEARCH note id.in=$1.ids include=[hs_note_body,hs_createdate]"],
     "Find the ids of the notes associated with deal 15860461964",
     "Fetch the note body and created date for those note ids",
     "Search notes with ids 9001 and 9002, including hs_note_body and hs_createdate"),
    ("q14", "ASSOCIATE",
     "Assign deal 15810400147 to contact Gary",
     ["SEARCH contact firstname=Gary include=[id]",
      "ASSOCIATE deal 15810400147 -> contact $1.id"],
     "Search for the contact named Gary and include the id",
     "Associate deal 15810400147 with the contact id found by the first query",
     "Associate deal 15810400147 with contact 51"),
    ("q15", "DELETE",
     'Delete the company "Lakka Tech Solutions"',
     ['SEARCH company name="Lakka Tech Solutions" include=[id]',
      "DELETE company id=$1.id"],
     "Find the id of the company named Lakka Tech Solutions",
     "Delete the company with the id found by the first query",
     "Delete company 77"),
    ("q16", "UPDATE",
     'Set the amount of the deal named "New Deal" to 1100',
     ['SEARCH deal dealname="New Deal" include=[id,amount]',
      "UPDATE deal id=$1.id amount=1100"],
     "Find the id of the deal named New Deal",
     "Update that deal, setting the amount to 1100",
     "Update deal 15860461964 setting the amount to 1100"),
    ("q17", "CREATE",
     'Create a task "Call Gary Shaw" assigned to the owner of contact 51',
     ["SEARCH contact id=51 include=[hubspot_owner_id]",
      'CREATE task hs_task_subject="Call Gary Shaw" hubspot_owner_id=$1.hubspot_owner_id'],
     "Look up contact 51 and include the owner id",
     "Create a task titled Call Gary Shaw owned by that owner id",
     "Create a task titled Call Gary Shaw with owner 325420860"),
    ("q18", "READ",
     "List the companies associated with deal 15810400147",
     ["SEARCH company of.deal=15810400147",
      "SEARCH company id.in=$1.ids include=[name,domain]"],
     "Find the ids of the companies associated with deal 15810400147",
     "Fetch the name and domain for those company ids",
     "Fetch name and domain for company 77"),
]

FLAKY_QUERY = "q5"
FLAKY_REPEATS = (1, 4, 9)
REPAIR_QUERY = "q13"
MAX_ATTEMPTS = 3


def execute_gold(plan_lines, registry):
    """Run a gold plan on a fresh seeded store; returns the resolved calls."""
    store = seeded_store()
    bindings: dict[int, dict] = {}
    resolved = []
    for index, line in enumerate(plan_lines, start=1):
        ir_call = parse(line)
        if render(ir_call) != line:
            raise SystemExit(
                f"gold line is not in normal form:\n  {line}\n  {render(ir_call)}"
            )
        bound = bind_placeholders(ir_call, bindings)
        api = compile_call(bound, registry)
        response = store.execute(api)
        if not response.ok:
            raise SystemExit(
                f"gold plan step {index} returned {response.status}: {line}"
            )
        bindings[index] = binding_doc(response.document)
        resolved.append(api)
    return resolved


def dataset_record(qid, category, text, plan_lines, registry):
    resolved = execute_gold(plan_lines, registry)
    return {
        "id": qid,
        "text": text,
        "category": category,
        "n_calls": len(plan_lines),
        "gold_functions": [call.function_name for call in resolved],
        "gold_calls": plan_lines,
        "fixture": FIXTURE,
    }, resolved


def write_jsonl(path: Path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
    print(f"wrote {path.relative_to(ROOT)} ({len(rows)} rows)")


def script_row(qid, stage, attempt, response, repeat=None):
    row = {
        "query_id": qid,
        "stage": stage,
        "attempt": attempt,
        "response": response,
        "latency_s": COMPLETION_LATENCY,
    }
    if repeat is not None:
        row["repeat"] = repeat
    return row


def main():
    registry = default_registry()

    single_records = []
    multi_records = []
    resolved_calls: dict[str, list] = {}
    for qid, category, text, plan in SINGLE:
        record, resolved = dataset_record(qid, category, text, plan, registry)
        single_records.append(record)
        resolved_calls[qid] = resolved
    for qid, category, text, plan, *_ in MULTI:
        record, resolved = dataset_record(qid, category, text, plan, registry)
        multi_records.append(record)
        resolved_calls[qid] = resolved

    write_jsonl(BENCH_DIR / "demo_single.jsonl", single_records)
    write_jsonl(BENCH_DIR / "demo_multi.jsonl", multi_records)
    write_jsonl(BENCH_DIR / "demo_full.jsonl", single_records + multi_records)

    all_records = single_records + multi_records

    # Planner behaviors: the gold plan, correct on the first attempt.
    thor_demo = [
        script_row(rec["id"], "plan", 1, "\n".join(rec["gold_calls"]))
        for rec in all_records
    ]
    write_jsonl(SCRIPT_DIR / "thor_demo.jsonl", thor_demo)

    # Same, except one query emits an invalid plan on selected repeats,
    # exhausting every attempt there — a deliberately fluctuating query.
    thor_flaky = list(thor_demo)
    for repeat in FLAKY_REPEATS:
        for attempt in range(1, MAX_ATTEMPTS + 1):
            thor_flaky.append(
                script_row(FLAKY_QUERY, "plan", attempt, BAIT_PLAN, repeat=repeat)
            )
    write_jsonl(SCRIPT_DIR / "thor_flaky.jsonl", thor_flaky)

    # Every attempt invalid: a suite that always fails, consistently.
    thor_allfail = [
        script_row(rec["id"], "plan", attempt, BAIT_PLAN)
        for rec in all_records
        for attempt in range(1, MAX_ATTEMPTS + 1)
    ]
    write_jsonl(SCRIPT_DIR / "thor_allfail.jsonl", thor_allfail)

    # The repair scenario: an association-as-property search on attempt 1,
    # the corrected two-step plan after feedback on attempt 2.
    repair_record = next(r for r in all_records if r["id"] == REPAIR_QUERY)
    thor_repair = [
        script_row(REPAIR_QUERY, "plan", 1, BAIT_PLAN),
        script_row(REPAIR_QUERY, "plan", 2, "\n".join(repair_record["gold_calls"])),
    ]
    write_jsonl(SCRIPT_DIR / "thor_repair.jsonl", thor_repair)

    # One-call baseline: the gold call as a tool-use block.
    single_script = [
        script_row(
            rec["id"],
            "single",
            1,
            json.dumps(to_tool_use(resolved_calls[rec["id"]][0], registry)),
        )
        for rec in single_records
    ]
    write_jsonl(SCRIPT_DIR / "single_demo.jsonl", single_script)

    # Two-call baseline: split, generate, rewrite, generate.
    multi_script = []
    for qid, _category, _text, _plan, task_1, task_2, rewritten in MULTI:
        first, second = resolved_calls[qid]
        multi_script += [
            script_row(qid, "split", 1, f"{task_1}\n{task_2}"),
            script_row(qid, "gen1", 1, json.dumps(to_tool_use(first, registry))),
            script_row(qid, "rewrite", 1, rewritten),
            script_row(qid, "gen2", 1, json.dumps(to_tool_use(second, registry))),
        ]
    write_jsonl(SCRIPT_DIR / "multi_demo.jsonl", multi_script)


if __name__ == "__main__":
    main()
