"""Exhaustive reference computations shared by the tests."""
import itertools

import numpy as np

from bowsp.epsfront import evaluate_all_plans
from bowsp.pbb import PatternBranchAndBound


def _pairs(k):
    return list(itertools.combinations(range(k), 2))


def all_plans(schema):
    """(plans, omega_C, omega_A, pair codes) over every complete plan."""
    chunks = list(evaluate_all_plans(schema))
    plans = np.concatenate([c[1] for c in chunks])
    wc = np.concatenate([c[2] for c in chunks])
    wa = np.concatenate([c[3] for c in chunks])
    code = np.zeros(len(plans), dtype=np.int64)
    for b, (s, t) in enumerate(_pairs(schema.k)):
        code |= (plans[:, s] == plans[:, t]).astype(np.int64) << b
    return plans, wc, wa, code


def node_requirement(k, pattern):
    """(relevant pair bits, required values) fixing the node's partial pattern."""
    label = pattern.restricted_growth(k)
    rel = want = 0
    for b, (s, t) in enumerate(_pairs(k)):
        if label[s] is not None and label[t] is not None:
            rel |= 1 << b
            if label[s] == label[t]:
                want |= 1 << b
    return rel, want


def bound_violations(schema, prune=True, table=None):
    """Visited nodes whose lower bounds exceed the best completion."""
    nodes = []
    PatternBranchAndBound(schema, prune=prune, on_node=nodes.append).solve()
    _, wc, wa, code = table if table is not None else all_plans(schema)
    bad = []
    for node in nodes:
        rel, want = node_requirement(schema.k, node.pattern)
        hit = (code & rel) == want
        if not hit.any():
            continue
        if node.lb_auth > wa[hit].min() or node.lb_cons > wc[hit].min():
            bad.append((node, int(wa[hit].min()), int(wc[hit].min())))
    return bad, len(nodes)
