"""Writes tests/fixtures/fixture_corpus: ten LangFuse-style exports over the
planner / executor / reporter nodes. Run once; the output is committed."""
import json
import pathlib

OUT = pathlib.Path(__file__).parent / "fixture_corpus"
TASK_A = "T1"
TASK_B = "Find the invoice, then refund the customer"

# (trace_id, task, ground truth, ground truth via, [(node, output)])
TRACES = [
    ("t01", TASK_A, True, "metadata", [
        ("planner", "Plan ready."),
        ("executor", "locate the target record: id 42"),
        ("executor", "apply the requested change: status updated"),
        ("reporter", "report the final result: done. TASK COMPLETE")]),
    ("t02", TASK_A, False, "metadata", [
        ("planner", "Plan ready."),
        ("executor", "ERROR: lookup timed out"),
        ("executor", "ERROR: lookup timed out"),
        ("reporter", "Gave up.")]),
    ("t03", TASK_A, True, "metadata", [
        ("planner", "Plan ready."),
        ("executor", "locate the target record: id 7"),
        ("executor", "REPEAT locate the target record: id 7"),
        ("executor", "apply the requested change: ok"),
        ("reporter", "report the final result. TASK COMPLETE")]),
    ("t04", TASK_A, False, "metadata", [
        ("planner", "MALFORMED plan {"),
        ("executor", "locate the target record: id 9"),
        ("reporter", "Summary pending")]),
    ("t05", TASK_A, 0.9, "score", [
        ("planner", "Plan ready."),
        ("executor", "locate the target record"),
        ("executor", "apply the requested change"),
        ("reporter", "MALFORMED report the final result TASK COMPLETE")]),
    ("t06", TASK_B, False, "metadata", [
        ("planner", "Plan ready."),
        ("executor", "ERROR: invoice API down"),
        ("executor", "REPEAT ERROR: invoice API down"),
        ("reporter", "No result.")]),
    ("t07", TASK_B, True, "metadata", [
        ("planner", "Plan ready."),
        ("executor", "Find the invoice: INV-3"),
        ("executor", "refund the customer: done"),
        ("reporter", "TASK COMPLETE")]),
    ("t08", TASK_B, 0.2, "score", [
        ("planner", "Plan ready."),
        ("executor", "Find the invoice: INV-8"),
        ("executor", "REPEAT Find the invoice: INV-8"),
        ("reporter", "Stopped.")]),
    ("t09", TASK_B, True, "metadata", [
        ("planner", "MALFORMED plan"),
        ("executor", "Find the invoice"),
        ("executor", "refund the customer"),
        ("reporter", "TASK COMPLETE")]),
    ("t10", TASK_B, False, "metadata", [
        ("planner", "Plan ready."),
        ("executor", "ERROR: refund rejected"),
        ("reporter", "Could not refund.")]),
]


def ts(trace_no, second):
    return f"2025-03-0{1 + trace_no % 9}T10:{trace_no:02d}:{second:02d}.000Z"


def export(no, trace_id, task, gt, via, steps):
    # Traces t07..t10 name their node in generation metadata; the rest nest
    # generations under a span named after the node.
    by_metadata = no >= 7
    trace = {
        "id": trace_id,
        "name": "support-agent",
        "timestamp": ts(no, 0),
        "input": {"task": task},
        "metadata": {"env": "fixture"},
        "tags": ["fixture"],
    }
    if via == "metadata":
        trace["metadata"]["success"] = gt
    else:
        trace["scores"] = [{"name": "success", "value": gt}]
    obs = [{"id": f"{trace_id}-root", "type": "SPAN", "name": "agent-run",
            "startTime": ts(no, 0), "endTime": ts(no, 59)}]
    for i, (node, output) in enumerate(steps):
        start = 2 + 5 * i
        gen = {
            "id": f"{trace_id}-g{i}",
            "type": "GENERATION",
            "name": f"{node}-llm",
            "model": "fixture-model",
            "startTime": ts(no, start + 1),
            "endTime": ts(no, start + 3),
            "input": [{"role": "system", "content": f"You are the {node}."},
                      {"role": "user", "content": task}],
            "output": {"role": "assistant", "content": output},
            "usage": {"input": 20 + i, "output": 5 + i},
        }
        if by_metadata:
            gen["parentObservationId"] = f"{trace_id}-root"
            gen["metadata"] = {"langgraph_node": node}
            obs.append(gen)
        else:
            span_id = f"{trace_id}-s{i}"
            obs.append({"id": span_id, "type": "SPAN", "name": node, "parentObservationId": f"{trace_id}-root",
                        "startTime": ts(no, start), "endTime": ts(no, start + 4)})
            gen["parentObservationId"] = span_id
            obs.append(gen)
    if no == 3:
        obs.reverse()  # document order differs from time order
    return {"trace": trace, "observations": obs}


def main():
    OUT.mkdir(exist_ok=True)
    for no, (trace_id, task, gt, via, steps) in enumerate(TRACES, start=1):
        doc = export(no, trace_id, task, gt, via, steps)
        (OUT / f"{trace_id}.json").write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main()
