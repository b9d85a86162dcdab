"""Bundled clause programs, stored as the decoded JSON payloads."""

# n ~ poisson(6).
# pos(P) ~ uniform(0, N) <- N ~= n, between(1, N, P).
# left(A, B) ~ finite([0.99:t, 0.01:f]) <- P1 ~= pos(A), P2 ~= pos(B), P1 < P2.
OBJECTS_LEFT_OF = {
    "static": [
        {"head": "n", "dist": {"tag": "poisson", "params": {"lam": 6}}},
        {
            "head": "pos",
            "args": ["P"],
            "dist": {"tag": "uniform", "params": {"low": 0, "high": "N"}},
            "body": [
                {"op": "bind", "var": "N", "rv": "n"},
                {"op": "between", "low": 1, "high": "N", "var": "P"},
            ],
        },
        {
            "head": "left",
            "args": ["A", "B"],
            "dist": {"tag": "finite", "params": {"weights": [[0.99, "t"], [0.01, "f"]]}},
            "body": [
                {"op": "bind", "var": "P1", "rv": "pos", "args": ["A"]},
                {"op": "bind", "var": "P2", "rv": "pos", "args": ["B"]},
                {"op": "compare", "lhs": "P1", "cmp": "<", "rhs": "P2"},
            ],
        },
    ],
}

# n ~ poisson(6).
# pos(P)@0 ~ uniform(0, N) <- N ~= n, between(1, N, P).
# pos(P)@t+1 ~ gaussian(X + 3, cov) <- X ~= pos(P)@t.
OBJECTS_DRIFTING = {
    "static": [
        {"head": "n", "dist": {"tag": "poisson", "params": {"lam": 6}}},
    ],
    "initial": [
        {
            "head": "pos",
            "args": ["P"],
            "time": 0,
            "dist": {"tag": "uniform", "params": {"low": 0, "high": "N"}},
            "body": [
                {"op": "bind", "var": "N", "rv": "n"},
                {"op": "between", "low": 1, "high": "N", "var": "P"},
            ],
        },
    ],
    "transition": [
        {
            "head": "pos",
            "args": ["P"],
            "time": "t+1",
            "dist": {
                "tag": "gaussian",
                "params": {"mean": {"op": "+", "args": ["X", 3]}, "cov": 0.01},
            },
            "body": [{"op": "bind", "var": "X", "rv": "pos", "args": ["P"], "time": "t"}],
        },
    ],
}

# pos(o)@0 ~ gaussian(R, Sigma) <- R ~= observed(o).
# pos(o)@t+1 ~ gaussian(X + V*dt, Q) <- X ~= pos(o)@t, V ~= vel(o).
# The one-object analogue of the tracker's initial-belief and motion clauses.
OBJECT_BELIEF = {
    "static": [
        {
            "head": "observed",
            "args": ["o"],
            "dist": {"tag": "gaussian", "params": {"mean": [0.0, 0.0, 0.0], "cov": 0.0}},
        },
        {
            "head": "vel",
            "args": ["o"],
            "dist": {"tag": "gaussian", "params": {"mean": [0.0, 0.0, 0.0], "cov": 0.0}},
        },
    ],
    "initial": [
        {
            "head": "pos",
            "args": ["o"],
            "time": 0,
            "dist": {"tag": "gaussian", "params": {"mean": "R", "cov": 0.0004}},
            "body": [{"op": "bind", "var": "R", "rv": "observed", "args": ["o"]}],
        },
    ],
    "transition": [
        {
            "head": "pos",
            "args": ["o"],
            "time": "t+1",
            "dist": {
                "tag": "gaussian",
                "params": {
                    "mean": {"op": "+", "args": ["X", {"op": "*", "args": ["V", 0.5]}]},
                    "cov": 0.00125,
                },
            },
            "body": [
                {"op": "bind", "var": "X", "rv": "pos", "args": ["o"], "time": "t"},
                {"op": "bind", "var": "V", "rv": "vel", "args": ["o"]},
            ],
        },
    ],
}
