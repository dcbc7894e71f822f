"""DIMACS CNF and JSON serialization for problems and ensemble specs."""

from __future__ import annotations

import json

from .errors import UsageError
from .sat import Assignment, Clause, EnsembleSpec, SatProblem


def to_dimacs(problem: SatProblem, comments: list[str] | None = None) -> str:
    """Standard DIMACS CNF: "p cnf n m" header, signed 1-indexed literals."""
    lines = [f"c {c}" for c in (comments or [])]
    lines.append(f"p cnf {problem.n} {problem.m}")
    for clause in problem.clauses:
        lits = [-(v + 1) if neg else (v + 1) for v, neg in zip(clause.vars, clause.negated)]
        lines.append(" ".join(map(str, lits)) + " 0")
    return "\n".join(lines) + "\n"


def from_dimacs(text: str) -> SatProblem:
    n = None
    m_declared = None
    clauses = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise UsageError(f"bad DIMACS header: {line!r}")
            n, m_declared = int(parts[2]), int(parts[3])
            continue
        lits = [int(tok) for tok in line.split()]
        if lits and lits[-1] == 0:
            lits = lits[:-1]
        if not lits:
            continue
        pairs = sorted((abs(l) - 1, l < 0) for l in lits)
        clauses.append(Clause(tuple(v for v, _ in pairs), tuple(neg for _, neg in pairs)))
    if n is None:
        raise UsageError("missing DIMACS header")
    if m_declared is not None and m_declared != len(clauses):
        raise UsageError(f"header declares {m_declared} clauses, found {len(clauses)}")
    widths = {c.k for c in clauses}
    if len(widths) > 1:
        raise UsageError(f"mixed clause widths {sorted(widths)}; only uniform k supported")
    k = widths.pop() if widths else 0
    return SatProblem(n, k, tuple(clauses))


def spec_to_json(spec: EnsembleSpec) -> str:
    d = {"kind": spec.kind, "n": spec.n, "k": spec.k, "m": spec.m, "seed": spec.seed}
    if spec.solution is not None:
        d["solution"] = spec.solution.bits
    return json.dumps(d, sort_keys=True)


def spec_from_json(text: str) -> EnsembleSpec:
    d = json.loads(text)
    sol = None
    if "solution" in d and d["solution"] is not None:
        sol = Assignment(int(d["solution"]), int(d["n"]))
    return EnsembleSpec(
        kind=d["kind"], n=int(d["n"]), k=int(d["k"]), m=int(d["m"]),
        seed=int(d.get("seed", 0)), solution=sol,
    )
