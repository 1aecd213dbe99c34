"""Writes reimburse_stats.json: a tree with the published REIMBURSE shape
(123 nodes: 79 information, 23 dialog, 10 variable, 10 logic; widest node 14
answers; depth 32)."""
import json
import sys

UNITS = {"seconds": 1, "minutes": 60, "hours": 3600, "days": 86400, "weeks": 604800}

nodes = []
edge_no = 0


def edge(target, text="", condition=None):
    global edge_no
    edge_no += 1
    e = {"id": f"e{edge_no}", "text": text, "target": target}
    if condition is not None:
        e["condition"] = condition
    return e


def info(node_id, text, answers=()):
    nodes.append({"id": node_id, "kind": "information", "text": text,
                  "answers": list(answers), "faq": [f"question about {text.lower()}"]})


start = {"id": "start", "kind": "start", "text": "How can I help with your travel?", "answers": []}
nodes.append(start)
start["answers"].append(edge("d1", "reimbursement of a trip"))

# Spine: Dialog -> Variable -> Logic, ten times, then two information nodes.
for k in range(1, 11):
    nxt = f"d{k + 1}" if k < 10 else "tail_a"
    nodes.append({"id": f"d{k}", "kind": "dialog", "text": f"Step {k}: which part of the claim is it?",
                  "answers": [edge(f"v{k}", f"claim part {k}")]})
    var = f"var{k}"
    if k % 2:
        spec = {"name": var, "type": "number", "units": UNITS}
        cond, example = f"{var} < 4 weeks", "2916 seconds"
    else:
        spec = {"name": var, "type": "boolean"}
        cond, example = f"{var} == true", "yes"
    nodes.append({"id": f"v{k}", "kind": "variable", "text": f"Please state value {k}.",
                  "answers": [edge(f"l{k}", example)], "variable": spec})
    nodes.append({"id": f"l{k}", "kind": "logic", "text": "",
                  "answers": [edge(nxt, "", cond), edge(f"fallback{k}", "", "default")]})
    info(f"fallback{k}", f"Fallback rule {k}")
info("tail_a", "Final rule", [edge("tail_b")])
info("tail_b", "Final detail")

# Start fans out to 13 more topics; their leaves bring the totals up.
leaves = [5] * 12 + [7]
for t, count in enumerate(leaves, start=1):
    did = f"topic{t}"
    start["answers"].append(edge(did, f"topic number {t}"))
    answers = []
    for j in range(1, count + 1):
        answers.append(edge(f"topic{t}_info{j}", f"detail {j} of topic {t}"))
    nodes.append({"id": did, "kind": "dialog", "text": f"What about topic {t}?", "answers": answers})
    for j in range(1, count + 1):
        info(f"topic{t}_info{j}", f"Detail {j} of topic {t}")

doc = {"start": "start", "nodes": nodes}
out = sys.argv[1] if len(sys.argv) > 1 else "reimburse_stats.json"
with open(out, "w") as f:
    json.dump(doc, f, indent=1)
    f.write("\n")
