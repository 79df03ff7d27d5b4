"""Random feasible SDPs with reference optima, for the solver regression test.

Each problem is  min <C, X>  s.t. <A_i, X> = b_i, X >= 0  (optionally also
tr X <= t), written in the crate's conic JSON format and solved with
Clarabel through cvxpy, cross-checked against CVXOPT. Feasibility and boundedness come from a strictly
feasible primal point X0 and a strictly feasible dual slack S0.

    python python/make_sdp_fixtures.py crates/core/tests/fixtures/random_sdps.json
"""

import json
import sys

import cvxpy as cp
import numpy as np

COUNT = 20
SEED = 20240611


def svec(m):
    p = m.shape[0]
    out = []
    for j in range(p):
        for i in range(j, p):
            out.append(m[i, j] if i == j else np.sqrt(2.0) * m[i, j])
    return np.array(out)


def random_sym(rng, p):
    g = rng.standard_normal((p, p))
    return (g + g.T) / 2


def random_pd(rng, p):
    g = rng.standard_normal((p, p))
    return g @ g.T / p + 0.1 * np.eye(p)


def make(rng, index):
    p = int(rng.integers(2, 9))
    n = p * (p + 1) // 2
    m = int(rng.integers(1, n))
    with_trace = index % 2 == 1
    a = [random_sym(rng, p) for _ in range(m)]
    x0 = random_pd(rng, p)
    b = [float(np.sum(ai * x0)) for ai in a]
    y0 = rng.standard_normal(m)
    c = sum(yi * ai for yi, ai in zip(y0, a)) + random_pd(rng, p)
    trace_cap = float(np.trace(x0)) * 1.5

    rows = [svec(ai) for ai in a]
    rhs = list(b)
    cones = {"zero": m, "nonneg": 0, "soc": [], "psd": [p]}
    if with_trace:
        rows.append(svec(np.eye(p)))
        rhs.append(trace_cap)
        cones["nonneg"] = 1
    for k in range(n):
        e = np.zeros(n)
        e[k] = -1.0
        rows.append(e)
        rhs.append(0.0)
    dense = np.array(rows)
    r, col = np.nonzero(dense)
    problem = {
        "format": "cmsdr-conic-v1",
        "n": n,
        "m": len(rhs),
        "c": svec(c).tolist(),
        "b": rhs,
        "A": {"rows": r.tolist(), "cols": col.tolist(), "values": dense[r, col].tolist()},
        "cones": cones,
    }

    x = cp.Variable((p, p), symmetric=True)
    cons = [x >> 0] + [cp.trace(ai @ x) == bi for ai, bi in zip(a, b)]
    if with_trace:
        cons.append(cp.trace(x) <= trace_cap)
    prob = cp.Problem(cp.Minimize(cp.trace(c @ x)), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-9, tol_gap_rel=1e-9, tol_feas=1e-9)
    assert prob.status == cp.OPTIMAL, prob.status
    value = prob.value
    prob.solve(solver=cp.CVXOPT)
    assert abs(prob.value - value) <= 1e-6 * max(1.0, abs(value)), (value, prob.value)
    return {"name": f"sdp_{index:02}", "side": p, "reference_objective": value, "problem": problem}


def main():
    rng = np.random.default_rng(SEED)
    cases = [make(rng, i) for i in range(COUNT)]
    with open(sys.argv[1], "w") as fh:
        json.dump({"reference_solver": "clarabel", "cases": cases}, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()
