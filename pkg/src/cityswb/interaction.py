"""Daily user-interaction graphs and per-submission comment trees."""

from __future__ import annotations

import logging
from collections import defaultdict, deque
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from ._validation import InputError
from .corpus import DELETED_AUTHORS, CorpusIndex, Record

logger = logging.getLogger(__name__)


@dataclass
class DailyGraph:
    """Undirected simple graph over author names."""

    nodes: list[str]
    edges: set[tuple[str, str]]
    missing_parents: int = 0

    def adjacency(self):
        pos = {n: i for i, n in enumerate(self.nodes)}
        if not self.edges:
            return csr_matrix((len(self.nodes), len(self.nodes)))
        a, b = zip(*((pos[u], pos[v]) for u, v in self.edges))
        rows = np.r_[a, b]
        cols = np.r_[b, a]
        return csr_matrix((np.ones(len(rows)), (rows, cols)),
                          shape=(len(self.nodes), len(self.nodes)))


@dataclass
class GraphMetrics:
    node_count: float
    edge_count: float
    mean_degree: float
    density: float
    cc_count: float
    mean_eccentricity: float
    mean_cc_size: float
    mean_shortest_path: float
    diameter: float

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class CommentTree:
    root: str
    created: dict[str, int]
    children: dict[str, list[str]]
    orphans: int = 0

    @property
    def size(self) -> int:
        return len(self.created)


@dataclass
class TreeMetrics:
    tree_size: float
    direct_reply_count: float
    leaf_node_count: float
    max_level_width: float
    min_response_time_seconds: float | None

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


def _edge(a, b):
    return (a, b) if a < b else (b, a)


def build_daily_graph(records, parent_author, deleted=DELETED_AUTHORS) -> DailyGraph:
    """Graph of one day's activity.

    Every non-deleted author active that day is a node. Each comment adds an
    edge to the author of its parent (the parent may be from any day); the
    parent author becomes a node too. Deleted authors and self-replies add
    no edge. `parent_author` maps record id -> author.
    """
    nodes = set()
    edges = set()
    missing = 0
    for rec in records:
        if rec.author not in deleted:
            nodes.add(rec.author)
        if rec.parent_id is None:
            continue
        parent = parent_author.get(rec.parent_id)
        if parent is None:
            missing += 1
            continue
        if parent in deleted or rec.author in deleted:
            continue
        nodes.add(parent)
        if parent != rec.author:
            edges.add(_edge(rec.author, parent))
    return DailyGraph(nodes=sorted(nodes), edges=edges, missing_parents=missing)


def graph_metrics(g: DailyGraph) -> GraphMetrics:
    """The nine interaction metrics for one graph.

    Distances are taken within connected components. Mean shortest path
    averages over ordered connected pairs of distinct nodes; a graph with no
    such pair reports 0 for the distance metrics.
    """
    n = len(g.nodes)
    if n == 0:
        raise InputError("graph metrics need at least one node")
    m = len(g.edges)
    adj = g.adjacency()
    n_cc, _ = connected_components(adj, directed=False)
    if m:
        dist = shortest_path(adj, directed=False, unweighted=True)
        finite = np.isfinite(dist)
        dist = np.where(finite, dist, 0.0)
        ecc = dist.max(axis=1)
        n_pairs = int(finite.sum()) - n
        msp = float(dist.sum() / n_pairs) if n_pairs else 0.0
        diameter = float(ecc.max())
        mean_ecc = float(ecc.mean())
    else:
        msp = diameter = mean_ecc = 0.0
    return GraphMetrics(
        node_count=float(n),
        edge_count=float(m),
        mean_degree=2.0 * m / n,
        density=2.0 * m / (n * (n - 1)) if n > 1 else 0.0,
        cc_count=float(n_cc),
        mean_eccentricity=mean_ecc,
        mean_cc_size=n / n_cc,
        mean_shortest_path=msp,
        diameter=diameter,
    )


def average_graph_metrics(per_day) -> GraphMetrics:
    per_day = list(per_day)
    if not per_day:
        raise InputError("no active days to average graph metrics over")
    cols = GraphMetrics.names()
    arr = np.array([[getattr(m, c) for c in cols] for m in per_day], dtype=float)
    return GraphMetrics(*arr.mean(axis=0).tolist())


def build_tree(submission: Record, comments) -> CommentTree:
    """Rooted reply tree; comments whose parent is not in the thread hang off the root."""
    root = submission.id
    created = {root: submission.created_at}
    parent_of = {}
    for c in comments:
        if c.id == root:
            continue
        created[c.id] = c.created_at
        parent_of[c.id] = c.parent_id
    children = defaultdict(list)
    orphans = 0
    for cid, pid in parent_of.items():
        if pid != root and pid not in parent_of:
            pid = root
            orphans += 1
        children[pid].append(cid)
    # anything unreachable from the root sits on a parent cycle; cut it loose
    seen = {root}
    queue = deque([root])
    while queue:
        for ch in children.get(queue.popleft(), ()):
            seen.add(ch)
            queue.append(ch)
    if len(seen) < len(created):
        cut = [cid for cid in parent_of if cid not in seen]
        for lst in children.values():
            lst[:] = [x for x in lst if x in seen]
        # attach each cycle member directly to the root; counts as orphaned
        for cid in sorted(cut):
            children.pop(cid, None)
            children[root].append(cid)
            orphans += 1
        logger.warning("thread %s: %d comments on a parent cycle attached to root",
                       root, len(cut))
    for lst in children.values():
        lst.sort(key=lambda x: (created[x], x))
    return CommentTree(root=root, created=created, children=dict(children), orphans=orphans)


def tree_metrics(t: CommentTree) -> TreeMetrics:
    """The five post-interaction metrics.

    The root is a leaf only in a tree without comments. Level width counts
    depth 1 and below. Response time is ``None`` without comments.
    """
    level = [t.root]
    widths = []
    leaves = 0
    while level:
        nxt = []
        for node in level:
            kids = t.children.get(node, ())
            if not kids:
                leaves += 1
            nxt.extend(kids)
        if nxt:
            widths.append(len(nxt))
        level = nxt
    comment_times = [ts for cid, ts in t.created.items() if cid != t.root]
    response = None
    if comment_times:
        response = float(max(0, min(comment_times) - t.created[t.root]))
    return TreeMetrics(
        tree_size=float(t.size),
        direct_reply_count=float(len(t.children.get(t.root, ()))),
        leaf_node_count=float(leaves),
        max_level_width=float(max(widths, default=0)),
        min_response_time_seconds=response,
    )


def average_tree_metrics(per_post) -> TreeMetrics:
    """Mean of each metric; response time over commented posts only."""
    per_post = list(per_post)
    if not per_post:
        raise InputError("no posts to average tree metrics over")
    out = {}
    for name in TreeMetrics.names():
        vals = [getattr(m, name) for m in per_post if getattr(m, name) is not None]
        out[name] = float(np.mean(vals)) if vals else None
    return TreeMetrics(**out)


# -- community-level drivers --

def community_graph_metrics(index: CorpusIndex, community: str, year: int | None = 2019,
                            deleted=DELETED_AUTHORS) -> GraphMetrics:
    """Average daily graph metrics over the community's active days in `year`."""
    by_id = index.by_id()
    parent_author = _AuthorLookup(by_id)
    per_day = []
    for day in index.day_list(community):
        if year is not None and day.year != year:
            continue
        g = build_daily_graph(index.records_on(community, day), parent_author, deleted)
        if g.nodes:
            per_day.append(graph_metrics(g))
    return average_graph_metrics(per_day)


class _AuthorLookup:
    def __init__(self, by_id):
        self._by_id = by_id

    def get(self, key, default=None):
        rec = self._by_id.get(key)
        return default if rec is None else rec.author


def community_trees(index: CorpusIndex, community: str, year: int | None = 2019):
    """Yield one `CommentTree` per submission of `community` made in `year`."""
    subs = []
    threads = defaultdict(list)
    for rec in index.records_of(community):
        if rec.is_submission:
            if year is None or index.day_of(rec).year == year:
                subs.append(rec)
        else:
            threads[rec.link_id].append(rec)
    subs.sort(key=lambda r: (r.created_at, r.id))
    for sub in subs:
        yield build_tree(sub, threads.get(sub.id, ()))


def community_tree_metrics(index: CorpusIndex, community: str, year: int | None = 2019) -> TreeMetrics:
    return average_tree_metrics(tree_metrics(t) for t in community_trees(index, community, year))
