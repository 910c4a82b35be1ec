"""Versioned, line-oriented text serialization of posterior draws.

The format is human-diffable and bit-exact: every float is written with 17
significant digits, which round-trips IEEE doubles.  Fields on a line are
tab-separated; trees are pre-order token streams (``I var cut`` for an
interior node, ``L value`` for a leaf).  A terminating ``end`` line makes
truncation detectable, and nothing is returned from a file that does not
parse completely.
"""

from __future__ import annotations

import numpy as np

from .data import Column
from .errors import ModelParseError, ModelVersionError
from .mcmc import ChainConfig
from .posterior import PosteriorDraws
from .priors import PriorSpec
from .trees import DecisionTree, Ensemble, Interior, Leaf, SplitRule

FORMAT_NAME = "bart-model"
FORMAT_VERSION = 1

_PRIOR_FIELDS = (
    ("alpha", float),
    ("beta", float),
    ("k", float),
    ("num_trees", int),
    ("nu", float),
    ("q", float),
    ("sigma_mu", float),
    ("lam", float),
    ("sigma_hat", float),
    ("sigma_hat_mode", str),
    ("mode", str),
    ("min_leaf", int),
)

_CHAIN_FIELDS = (
    ("burn_in", int),
    ("keep", int),
    ("thin", int),
    ("seed", int),
    ("chain_index", int),
    ("max_leaves", int),
    ("recompute_every", int),
)


def _fmt(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _check_name(name: str) -> str:
    if "\t" in name or "\n" in name or "\r" in name:
        raise ModelParseError(f"name {name!r} contains tab or newline; cannot serialize")
    return name


def _tree_tokens(tree: DecisionTree) -> list:
    out = []
    stack = [tree.root]
    while stack:
        nid = stack.pop()
        node = tree.nodes[nid]
        if isinstance(node, Leaf):
            out.append("L")
            out.append(_fmt(float(node.mu)))
        else:
            out.append("I")
            out.append(str(node.rule.variable))
            out.append(str(node.rule.cutpoint))
            stack.append(node.right)
            stack.append(node.left)
    return out


def _emit(draws: PosteriorDraws):
    yield f"{FORMAT_NAME}\t{FORMAT_VERSION}"
    yield f"mode\t{draws.mode}"
    yield f"offset\t{_fmt(float(draws.offset))}"
    yield f"response\t{_check_name(draws.response_name)}"
    for col in draws.columns:
        if col.kind == "indicator":
            yield (
                f"column\tindicator\t{_check_name(col.name)}"
                f"\t{_check_name(col.source or '')}\t{_check_name(col.level or '')}"
            )
        else:
            yield f"column\tnumeric\t{_check_name(col.name)}"
    spec = draws.spec
    for name, _ in _PRIOR_FIELDS:
        yield f"prior\t{name}\t{_fmt(getattr(spec, name))}"
    config = draws.config
    for name, _ in _CHAIN_FIELDS:
        yield f"chain\t{name}\t{_fmt(getattr(config, name))}"
    yield "chain\tmove_probs\t" + "\t".join(_fmt(float(p)) for p in config.move_probs)
    if draws.scaling is None:
        yield "scaling\tnone"
    else:
        yield f"scaling\t{_fmt(float(draws.scaling[0]))}\t{_fmt(float(draws.scaling[1]))}"
    yield f"grids\t{len(draws.grids)}"
    for v, grid in enumerate(draws.grids):
        vals = "\t".join(_fmt(float(g)) for g in grid)
        yield f"grid\t{v}\t{len(grid)}" + ("\t" + vals if len(grid) else "")
    yield f"draws\t{draws.num_draws}\ttrees\t{draws.num_trees}"
    for k, ens in enumerate(draws.ensembles):
        yield f"draw\t{k}\tsigma\t{_fmt(float(ens.sigma))}"
        for tree in ens.trees:
            yield "tree\t" + "\t".join(_tree_tokens(tree))
    yield "end"


def save_model(draws: PosteriorDraws, path) -> None:
    """Write draws to ``path``; byte-identical output for identical draws."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in _emit(draws):
            fh.write(line)
            fh.write("\n")


class _Reader:
    def __init__(self, path):
        self.path = path
        with open(path, encoding="utf-8") as fh:
            self.lines = fh.read().split("\n")
        self.lineno = 0

    def next(self, expect: str | None = None) -> list:
        while self.lineno < len(self.lines):
            line = self.lines[self.lineno]
            self.lineno += 1
            if line == "" and self.lineno >= len(self.lines):
                break  # trailing newline
            fields = line.split("\t")
            if expect is not None and fields[0] != expect:
                raise ModelParseError(
                    f"expected {expect!r}, found {fields[0]!r}", line=self.lineno
                )
            return fields
        raise ModelParseError("unexpected end of file (truncated model?)", line=self.lineno)

    def fail(self, message: str):
        raise ModelParseError(message, line=self.lineno)


def _parse_value(reader, raw: str, typ):
    if raw == "none":
        return None
    try:
        return typ(raw)
    except ValueError:
        reader.fail(f"cannot parse {raw!r}")


def _parse_tree(reader, tokens: list) -> DecisionTree:
    it = iter(tokens)

    def take():
        try:
            return next(it)
        except StopIteration:
            reader.fail("tree token stream ended early")

    nodes: list = []
    slots = [(-1, False)]
    while slots:
        parent, is_left = slots.pop()
        tok = take()
        nid = len(nodes)
        if parent >= 0:
            pnode = nodes[parent]
            if is_left:
                nodes[parent] = Interior(pnode.rule, nid, pnode.right)
            else:
                nodes[parent] = Interior(pnode.rule, pnode.left, nid)
        if tok == "I":
            var = _parse_value(reader, take(), int)
            cut = _parse_value(reader, take(), int)
            nodes.append(Interior(SplitRule(var, cut), -1, -1))
            slots.append((nid, False))
            slots.append((nid, True))
        elif tok == "L":
            mu = _parse_value(reader, take(), float)
            nodes.append(Leaf(mu))
        else:
            reader.fail(f"unknown tree token {tok!r}")
    if next(it, None) is not None:
        reader.fail("trailing tokens after tree")
    return DecisionTree(tuple(nodes), 0)


def load_model(path) -> PosteriorDraws:
    """Parse a model file back into PosteriorDraws; structural round trip is exact."""
    reader = _Reader(path)
    magic = reader.next()
    if magic[0] != FORMAT_NAME:
        reader.fail(f"not a model file (expected {FORMAT_NAME!r} header)")
    if len(magic) != 2 or magic[1] != str(FORMAT_VERSION):
        raise ModelVersionError(
            f"unsupported format version {magic[1] if len(magic) > 1 else '?'}"
            f" (this library reads version {FORMAT_VERSION})",
            line=reader.lineno,
        )
    mode = reader.next("mode")[1]
    offset = _parse_value(reader, reader.next("offset")[1], float)
    response = reader.next("response")[1]

    columns = []
    fields = reader.next()
    while fields[0] == "column":
        if fields[1] == "indicator":
            if len(fields) != 5:
                reader.fail("indicator column needs name, source and level")
            columns.append(Column(fields[2], kind="indicator", source=fields[3], level=fields[4]))
        elif fields[1] == "numeric":
            columns.append(Column(fields[2]))
        else:
            reader.fail(f"unknown column kind {fields[1]!r}")
        fields = reader.next()

    prior_kwargs = {}
    for name, typ in _PRIOR_FIELDS:
        if fields[0] != "prior" or fields[1] != name:
            reader.fail(f"expected prior field {name!r}")
        prior_kwargs[name] = _parse_value(reader, fields[2], typ)
        fields = reader.next()
    spec = PriorSpec(**prior_kwargs)

    chain_kwargs = {}
    for name, typ in _CHAIN_FIELDS:
        if fields[0] != "chain" or fields[1] != name:
            reader.fail(f"expected chain field {name!r}")
        chain_kwargs[name] = _parse_value(reader, fields[2], typ)
        fields = reader.next()
    if fields[0] != "chain" or fields[1] != "move_probs":
        reader.fail("expected chain move_probs")
    chain_kwargs["move_probs"] = tuple(
        _parse_value(reader, raw, float) for raw in fields[2:]
    )
    config = ChainConfig(**chain_kwargs)

    fields = reader.next("scaling")
    scaling = None
    if fields[1] != "none":
        scaling = (
            _parse_value(reader, fields[1], float),
            _parse_value(reader, fields[2], float),
        )

    p = _parse_value(reader, reader.next("grids")[1], int)
    grids = []
    for v in range(p):
        fields = reader.next("grid")
        if _parse_value(reader, fields[1], int) != v:
            reader.fail(f"grid lines out of order (expected variable {v})")
        count = _parse_value(reader, fields[2], int)
        vals = fields[3:]
        if len(vals) != count:
            reader.fail(f"grid {v} declares {count} values but has {len(vals)}")
        grids.append(np.array([_parse_value(reader, raw, float) for raw in vals]))

    fields = reader.next("draws")
    if len(fields) != 4 or fields[2] != "trees":
        reader.fail("malformed draws header")
    num_draws = _parse_value(reader, fields[1], int)
    num_trees = _parse_value(reader, fields[3], int)

    ensembles = []
    for k in range(num_draws):
        fields = reader.next("draw")
        if _parse_value(reader, fields[1], int) != k or fields[2] != "sigma":
            reader.fail(f"malformed draw header (expected draw {k})")
        sigma = _parse_value(reader, fields[3], float)
        trees = []
        for _ in range(num_trees):
            fields = reader.next("tree")
            trees.append(_parse_tree(reader, fields[1:]))
        ensembles.append(Ensemble(tuple(trees), sigma))
    reader.next("end")
    for extra in reader.lines[reader.lineno :]:
        if extra.strip():
            reader.fail(f"unexpected content after end: {extra!r}")

    return PosteriorDraws(
        ensembles=tuple(ensembles),
        grids=tuple(grids),
        scaling=scaling,
        mode=mode,
        spec=spec,
        config=config,
        columns=tuple(columns),
        response_name=response,
        offset=offset,
    )
