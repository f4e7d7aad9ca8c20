"""Write two small run directories for the review-UI integration tests.

Usage: python3 make_runs.py DIR_A DIR_B

Each directory holds 10 single-call queries x 2 repeats, all passing,
from a different pipeline, so a queue over both yields 20 items.
"""

import sys

from crmbench.bench.runner import RunCell, RunMatrix

QUERIES = {
    "q1": "Create a contact named Dana Reed",
    "q2": "Find all deals above 5000",
    "q3": "Update deal 9001 to stage closedwon",
    "q4": "Delete the note titled obsolete",
    "q5": "Associate contact 51 with deal 9001",
    "q6": "List contacts at Lakka Tech",
    "q7": "Create a task for tomorrow",
    "q8": "Read contact 51",
    "q9": "Search notes mentioning renewal",
    "q10": "Update contact 51 phone number",
}


def make_matrix(pipeline: str) -> RunMatrix:
    step = {
        "call_text": "CREATE contact firstname=Dana",
        "function": "crm_v3_objects_contacts_post",
        "method": "POST",
        "path": "/crm/v3/objects/contacts",
        "body": {"properties": {"firstname": "Dana"}},
        "status": 201,
        "response": {"id": "7138", "properties": {"firstname": "Dana"}},
    }
    cells = {
        (qid, repeat): RunCell(
            query_id=qid,
            repeat=repeat,
            passed=True,
            latency_s=1.1,
            attempts_used=1,
            completions=1,
            input_tokens=120,
            output_tokens=18,
            failure=None,
            steps=(dict(step),),
        )
        for qid in QUERIES
        for repeat in (1, 2)
    }
    return RunMatrix(
        pipeline=pipeline,
        repeats=2,
        query_ids=tuple(QUERIES),
        query_meta={
            qid: {"category": "CREATE", "n_calls": 1, "text": text}
            for qid, text in QUERIES.items()
        },
        cells=cells,
        meta={},
    )


def main() -> None:
    dir_a, dir_b = sys.argv[1], sys.argv[2]
    make_matrix("composite").write(dir_a)
    make_matrix("single_api").write(dir_b)
    print("ok")


if __name__ == "__main__":
    main()
