"""Exact search over complete trees with menu cuts.

solve_exact minimizes the summed leaf impurity over all assignments of
menu cuts to internal nodes and treatments to leaves, subject to every
leaf holding at least n_min_leaf subjects of every treatment. The
search decomposes by node: the value of a subtree on an index set is
the best over its menu of the two child values, memoized on (node,
index set). Outcomes are shifted to be non-negative, so a left child
value alone already bounds a cut's total from below, which allows
skipping right children; a warm-start incumbent tightens the root scan
the same way. Ties break toward the lexicographically first assignment
in node order (lowest cut index, then lowest treatment).
"""

import time
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from ..errors import InfeasibleError, SolveTimeout
from ..seeding import derive_seed, make_rng
from ..tree import PersonalizationTree, PtConfig, Split, TreeNode, fit_pt
from .skeleton import TreeSkeleton, build_cut_menu

MEMO_CAP = 200_000


@dataclass(frozen=True)
class TreeAssignment:
    """A complete tree: one menu cut per internal node (heap order) and
    one treatment per leaf (left to right)."""

    cuts: tuple
    treatments: tuple


class _TimeUp(Exception):
    pass


def _leaf_tables(ds, skeleton, assignment):
    leaf_ids = skeleton.route_many(ds.X, assignment.cuts)
    return [np.flatnonzero(leaf_ids == p) for p in skeleton.leaves]


def evaluate_assignment(ds, skeleton, assignment, config):
    """Objective of one assignment, or +inf when it is infeasible.

    The objective is the sum over leaves of leaf size times the mean
    shifted outcome (Y minus its dataset minimum) of the leaf's chosen
    treatment; infeasible means some leaf holds fewer than n_min_leaf
    subjects of some treatment.
    """
    ybar = ds.Y - ds.Y.min()
    total = 0.0
    for rows, t in zip(_leaf_tables(ds, skeleton, assignment), assignment.treatments):
        counts = np.bincount(ds.T[rows] - 1, minlength=ds.m)
        if counts.min() < config.n_min_leaf:
            return float("inf")
        chosen = rows[ds.T[rows] == t]
        total += rows.size * float(ybar[chosen].mean())
    return total


@dataclass(frozen=True)
class OptResult:
    """Solved assignment with its objective, proof flag, and tree form."""

    assignment: TreeAssignment
    objective: float
    proved: bool
    tree: PersonalizationTree


def assignment_to_tree(ds, skeleton, assignment):
    """Materialize an assignment as a tree policy with leaf statistics
    recomputed by routing the dataset."""
    tables = _leaf_tables(ds, skeleton, assignment)

    def build(p):
        if skeleton.is_leaf(p):
            rows = tables[p - 2**skeleton.delta]
            counts = np.bincount(ds.T[rows] - 1, minlength=ds.m)
            sums = np.bincount(ds.T[rows] - 1, weights=ds.Y[rows], minlength=ds.m)
            with np.errstate(divide="ignore", invalid="ignore"):
                means = np.where(counts > 0, sums / counts, np.nan)
            return TreeNode(
                treatment=int(assignment.treatments[p - 2**skeleton.delta]),
                counts=tuple(int(c) for c in counts),
                means=tuple(float(v) for v in means),
            )
        f, theta = assignment.cuts[p - 1]
        return TreeNode(
            split=Split(feature=int(f), threshold=float(theta), impurity=0.0),
            left=build(2 * p),
            right=build(2 * p + 1),
        )

    return PersonalizationTree(root=build(1), m=ds.m, d=ds.d)


def solve_exact(ds, skeleton, menu, config, warm=None):
    """Globally optimal assignment by memoized recursive decomposition.

    Args:
        ds: dataset.
        skeleton: TreeSkeleton of depth config.delta.
        menu: CutMenu for the skeleton.
        config: OptConfig; time_limit bounds the search.
        warm: optional feasible TreeAssignment used as the incumbent.

    Returns:
        OptResult; proved is False when the time limit cut the search
        short, in which case the best incumbent found so far (or the
        warm start) is returned.

    Raises:
        InfeasibleError: no feasible assignment exists.
        SolveTimeout: time expired with no incumbent available.
    """
    ybar = ds.Y - ds.Y.min()
    tvec = ds.T - 1
    nm = config.n_min_leaf
    top = 2**skeleton.delta
    deadline = None
    if config.time_limit is not None:
        deadline = time.monotonic() + config.time_limit
    memo = OrderedDict()

    def check_time():
        if deadline is not None and time.monotonic() > deadline:
            raise _TimeUp()

    def leaf_value(idx):
        counts = np.bincount(tvec[idx], minlength=ds.m)
        if counts.min() < nm:
            return float("inf"), None
        sums = np.bincount(tvec[idx], weights=ybar[idx], minlength=ds.m)
        means = sums / counts
        best = int(np.argmin(means))
        return idx.size * float(means[best]), best + 1

    def node_value(p, idx):
        key = (p, idx.tobytes())
        hit = memo.get(key)
        if hit is not None:
            memo.move_to_end(key)
            return hit
        if p >= top:
            val = leaf_value(idx)
        else:
            val = scan(p, idx)
        memo[key] = val
        if len(memo) > MEMO_CAP:
            memo.popitem(last=False)
        return val

    def scan(p, idx):
        best_val = float("inf")
        best_cut = None
        for ci, (f, theta) in enumerate(menu.for_node(p)):
            check_time()
            mask = ds.X[idx, f] <= theta
            left, _ = node_value(2 * p, idx[mask])
            if left > best_val:
                continue  # right child value is non-negative
            right, _ = node_value(2 * p + 1, idx[~mask])
            total = left + right
            if total < best_val:
                best_val, best_cut = total, ci
        return best_val, best_cut

    def reconstruct(p, idx, choice):
        if p >= top:
            cuts, treats = {}, {p: choice}
            return cuts, treats
        f, theta = menu.for_node(p)[choice]
        mask = ds.X[idx, f] <= theta
        cuts, treats = {p: (f, theta)}, {}
        for child, sub in ((2 * p, idx[mask]), (2 * p + 1, idx[~mask])):
            _, child_choice = node_value(child, sub)
            c_cuts, c_treats = reconstruct(child, sub, child_choice)
            cuts.update(c_cuts)
            treats.update(c_treats)
        return cuts, treats

    warm_value = float("inf")
    if warm is not None:
        warm_value = evaluate_assignment(ds, skeleton, warm, config)

    all_rows = np.arange(ds.n)
    proved = True
    best_val = float("inf")
    best_cut = None
    try:
        # root scan, kept inline so each completed cut updates the incumbent
        for ci, (f, theta) in enumerate(menu.for_node(1)):
            check_time()
            mask = ds.X[all_rows, f] <= theta
            left, _ = node_value(2, all_rows[mask])
            bound = min(best_val, warm_value)
            if left > bound:
                continue
            right, _ = node_value(3, all_rows[~mask])
            total = left + right
            if total < best_val:
                best_val, best_cut = total, ci
    except _TimeUp:
        proved = False

    deadline = None  # reconstruction must not be interrupted
    if best_cut is None:
        if not np.isfinite(warm_value):
            if proved:
                raise InfeasibleError(
                    "no assignment satisfies the per-leaf treatment minimums"
                )
            raise SolveTimeout("time limit expired before any incumbent was found")
        assignment, objective = warm, warm_value
    else:
        cuts, treats = reconstruct(1, all_rows, best_cut)
        assignment = TreeAssignment(
            cuts=tuple(cuts[p] for p in skeleton.internal_nodes),
            treatments=tuple(treats[p] for p in skeleton.leaves),
        )
        objective = best_val
    return OptResult(
        assignment=assignment,
        objective=objective,
        proved=proved,
        tree=assignment_to_tree(ds, skeleton, assignment),
    )


def warm_start_from_pt(ds, config, skeleton=None, menu=None):
    """Greedy-tree warm start snapped onto the cut menu.

    Fits a depth-bounded greedy tree, maps its cuts to the nearest
    same-feature menu thresholds, and pads shallower leaves to full
    depth with menu cuts tried in seeded random order; padded leaves
    inherit the greedy leaf's prescription. Returns None when no
    feasible completion exists along the attempted padding orders.
    Builds the skeleton and menu from config when not supplied.
    """
    if skeleton is None:
        skeleton = TreeSkeleton(config.delta)
    if menu is None:
        menu = build_cut_menu(ds, skeleton, config)
    pt = fit_pt(
        ds,
        PtConfig(
            n_min_leaf=config.n_min_leaf,
            delta_max=skeleton.delta,
            n_features=config.n_features,
            seed=config.seed,
        ),
    )
    top = 2**skeleton.delta
    cuts = {}
    treats = {}

    def candidates(p, node):
        """Cut candidates at skeleton node p, preferred first."""
        options = menu.for_node(p)
        if node is not None and not node.is_leaf:
            same = [c for c in options if c[0] == node.split.feature]
            if same:
                snapped = min(same, key=lambda c: abs(c[1] - node.split.threshold))
                rest = [c for c in options if c != snapped]
                order = make_rng(derive_seed(config.seed, "pad", p)).permutation(len(rest))
                return [snapped] + [rest[i] for i in order]
        order = make_rng(derive_seed(config.seed, "pad", p)).permutation(len(options))
        return [options[i] for i in order]

    def place(p, idx, node):
        if p >= top:
            counts = np.bincount(ds.T[idx] - 1, minlength=ds.m)
            if counts.min() < config.n_min_leaf:
                return False
            treats[p] = node.treatment if node.is_leaf else None
            if treats[p] is None:
                # greedy node still internal here cannot happen (depth
                # is bounded by delta); guard anyway
                treats[p] = 1
            return True
        for f, theta in candidates(p, node):
            mask = ds.X[idx, f] <= theta
            left_node = node.left if (node is not None and not node.is_leaf) else node
            right_node = node.right if (node is not None and not node.is_leaf) else node
            if place(2 * p, idx[mask], left_node) and place(
                2 * p + 1, idx[~mask], right_node
            ):
                cuts[p] = (f, theta)
                return True
        return False

    if not place(1, np.arange(ds.n), pt.root):
        return None
    return TreeAssignment(
        cuts=tuple(cuts[p] for p in skeleton.internal_nodes),
        treatments=tuple(treats[p] for p in skeleton.leaves),
    )
