"""Shared fixtures: random conditional spaces and brute-force oracles."""

import itertools

import numpy as np

from cash.space import Condition, ParamSpec, validate_space


def chain_space():
    """a in {x, y}; b active iff a == x; c active iff b == 1."""
    return validate_space([
        ParamSpec.categorical("a", ("x", "y")),
        ParamSpec.categorical("b", (0, 1, 2), default=1, conditions=[Condition("a", ("x",))]),
        ParamSpec.integer("c", 0, 5, default=0, conditions=[Condition("b", (1,))]),
    ], root="a")


def random_dag_space(rng, n_params, max_depth=4, max_parents=2, numeric_fraction=0.3):
    """Random valid space: layered DAG, categorical parents only, conjunctive conditions."""
    specs = [ParamSpec.categorical("p0", ("l0", "l1", "l2")[: int(rng.integers(2, 4))])]
    layer = {"p0": 0}
    for i in range(1, n_params):
        name = f"p{i}"
        cats = [s for s in specs if s.is_categorical and layer[s.name] < max_depth - 1]
        n_par = int(rng.integers(0, min(max_parents, len(cats)) + 1))
        parents = [cats[j] for j in rng.choice(len(cats), size=n_par, replace=False)] if n_par else []
        conds = []
        for par in parents:
            k = int(rng.integers(1, len(par.levels)))
            vals = tuple(par.levels[j] for j in sorted(rng.choice(len(par.levels), size=k, replace=False)))
            conds.append(Condition(par.name, vals))
        layer[name] = 1 + max((layer[p.name] for p in parents), default=-1)
        if rng.uniform() < numeric_fraction:
            if rng.uniform() < 0.5:
                specs.append(ParamSpec.real(name, 0.01, 10.0, log=bool(rng.uniform() < 0.5),
                                            conditions=conds))
            else:
                specs.append(ParamSpec.integer(name, 1, 9, conditions=conds))
        else:
            L = int(rng.integers(2, 5))
            specs.append(ParamSpec.categorical(name, tuple(f"v{j}" for j in range(L)),
                                               conditions=conds))
    return validate_space(specs, "p0")


def brute_force_active(space, assignment):
    """The unique subset S with S == {p : every condition of p is met by a parent in S}.

    Enumerates all 2^n subsets; independent of any evaluation order.
    """
    names = list(space.names)
    bit = {n: 1 << i for i, n in enumerate(names)}
    subsets = np.arange(1 << len(names), dtype=np.int64)
    image = np.zeros_like(subsets)
    for p in space.params:
        required = sum(bit[c.parent] for c in {c.parent: c for c in p.conditions}.values())
        values_ok = all(c.parent in assignment and c.holds(assignment[c.parent])
                        for c in p.conditions)
        if values_ok:
            image |= np.where((subsets & required) == required, bit[p.name], 0)
    fixed = subsets[image == subsets]
    assert len(fixed) == 1, "DAG spaces have exactly one fixed point"
    return {n for n in names if fixed[0] & bit[n]}


def all_assignments(space):
    """Every full assignment; numeric parameters (never parents) held at their default."""
    domains = [p.levels if p.is_categorical else (p.default,) for p in space.params]
    for values in itertools.product(*domains):
        yield dict(zip(space.names, values))


def integer_sequences(rng, n):
    for _ in range(n):
        length = int(rng.integers(2, 51))
        hi = int(rng.integers(1, 12))
        yield rng.integers(0, hi + 1, size=length), rng.integers(0, hi + 1, size=length)


def spearman_oracle(xs, ys):
    """Average-rank Spearman via explicit pairwise rank counting and Pearson on ranks."""
    def ranks(v):
        v = list(v)
        return [sum(1 for u in v if u < a) + (sum(1 for u in v if u == a) + 1) / 2.0 for a in v]
    rx, ry = np.array(ranks(xs)), np.array(ranks(ys))
    mx, my = rx.mean(), ry.mean()
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    den = (sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry)) ** 0.5
    return None if den == 0 else num / den
