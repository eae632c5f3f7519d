"""Seeded generator of small Datalog-like programs for property tests."""

import random

CONSTS = ["a", "b", "c"]
VARS = ["X", "Y", "Z", "W"]


def _arg(rng, pool):
    if rng.random() < 0.55:
        return rng.choice(pool)
    return rng.choice(CONSTS)


def random_program(rng: random.Random, max_preds: int = 3, max_clauses: int = 3,
                   max_body: int = 2):
    """Return ``(text, query)``.

    Predicates are stratified (``p0`` may call ``p1``/``p2``, never itself),
    so every program terminates under plain SLD resolution.
    """
    n = rng.randint(1, max_preds)
    arity = [rng.randint(1, 2) for _ in range(n)]
    lines = []
    for i in range(n):
        for _ in range(rng.randint(1, max_clauses)):
            head = [_arg(rng, VARS[:3]) for _ in range(arity[i])]
            body = []
            if i + 1 < n:
                for _ in range(rng.randint(0, max_body)):
                    j = rng.randint(i + 1, n - 1)
                    body.append(f"p{j}(" + ",".join(_arg(rng, VARS) for _ in range(arity[j])) + ")")
            h = f"p{i}(" + ",".join(head) + ")"
            lines.append(h + (" :- " + ", ".join(body) if body else "") + ".")
    qargs = [rng.choice(["Q", "R", rng.choice(CONSTS)]) for _ in range(arity[0])]
    query = "p0(" + ",".join(qargs) + ")"
    return "\n".join(lines) + "\n", query
