"""E-graph with union-find, hash-consing and deferred congruence repair.

E-nodes are (symbol, metadata, child class ids). The lambda encoding uses
symbols var/lam/app/natlam/natapp/prim/lit; sizes and types live in node
metadata and per-class type fields, not in e-classes of their own. Other
symbols are accepted too, which keeps the structure reusable for plain
first-order terms in tests.

Congruence maintenance follows the deferred (rebuild-based) scheme: unions
only touch the union-find and set classes dirty; `rebuild` re-canonicalizes
parent nodes, merging classes whose nodes have become identical, until the
congruence invariant holds again. Analyses piggyback on the same parent
lists.
"""

from __future__ import annotations

import math
import os
from typing import Callable, Iterator, NamedTuple, Optional

from . import nat, types
from .nat import Nat
from .terms import App, Lam, Lit, NatApp, NatLam, Prim, Term, Var
from .types import Type


class ENode(NamedTuple):
    sym: str
    meta: object
    children: tuple[int, ...]


def _meta_key(meta) -> tuple:
    """Total order over the metadata kinds, for deterministic tie-breaks."""
    if meta is None:
        return (0,)
    if isinstance(meta, bool):
        return (6, int(meta))
    if isinstance(meta, int):
        return (1, meta)
    if isinstance(meta, float):
        return (2, meta)
    if isinstance(meta, str):
        return (3, meta)
    if isinstance(meta, Nat):
        return (4, meta.nid)
    if isinstance(meta, Type):
        return (5, meta.tid)
    if isinstance(meta, tuple):
        return (7,) + tuple(_meta_key(m) for m in meta)
    return (8, repr(meta))


def node_key(n: ENode) -> tuple:
    return (n.children, n.sym, _meta_key(n.meta))


def term_node(t: Term, children: tuple[int, ...]) -> ENode:
    if isinstance(t, Var):
        return ENode("var", (t.idx, t.ty), ())
    if isinstance(t, Lam):
        return ENode("lam", t.ty.arg, children)
    if isinstance(t, App):
        return ENode("app", None, children)
    if isinstance(t, NatLam):
        return ENode("natlam", None, children)
    if isinstance(t, NatApp):
        return ENode("natapp", t.nat, children)
    if isinstance(t, Prim):
        return ENode("prim", (t.name, t.ty), ())
    if isinstance(t, Lit):
        return ENode("lit", t.value, ())
    raise TypeError(f"cannot encode {t!r}")


# -- free-index analysis --------------------------------------------------

def free_make(node: ENode, child_data: list[frozenset[int]]) -> frozenset[int]:
    """May-free De Bruijn indices of terms represented by `node`.

    Always an over-approximation, so `i not in data` proves i is not free
    in any represented term.
    """
    if node.sym == "var":
        return frozenset({node.meta[0]})
    if node.sym == "lam":
        return frozenset({i - 1 for i in child_data[0] if i >= 1})
    if node.sym == "subst":
        # subst(i, body, arg): %i replaced by arg shifted up by i
        i = node.meta
        body, arg = child_data
        out = {j for j in body if j < i} | {j - 1 for j in body if j > i}
        out |= {j + i for j in arg}
        return frozenset(out)
    if node.sym == "shift":
        d, k = node.meta
        body = child_data[0]
        return frozenset({j for j in body if j < k}
                         | {j + d for j in body if j >= k and j + d >= 0})
    out: frozenset[int] = frozenset()
    for d in child_data:
        out |= d
    return out


class EGraph:
    def __init__(self, audit: Optional[bool] = None):
        self._uf: list[int] = []
        self._ty: dict[int, Type] = {}
        self._nodes: dict[int, list[ENode]] = {}
        # parent entries are shared single-element lists so repairs can
        # update the stored node form in place
        self._parents: dict[int, list[list]] = {}
        self._free: dict[int, frozenset[int]] = {}
        self.hashcons: dict[ENode, int] = {}
        self._dirty: list[int] = []
        self._free_dirty: list[int] = []
        self.version = 0
        if audit is None:
            audit = os.environ.get("SGES_AUDIT") == "1"
        self.audit_mode = audit

    # -- basics --

    def find(self, a: int) -> int:
        root = a
        while self._uf[root] != root:
            root = self._uf[root]
        while self._uf[a] != root:
            self._uf[a], a = root, self._uf[a]
        return root

    def canonicalize(self, n: ENode) -> ENode:
        return ENode(n.sym, n.meta, tuple(self.find(c) for c in n.children))

    def class_type(self, a: int) -> Type:
        return self._ty[self.find(a)]

    def free_of(self, a: int) -> frozenset[int]:
        return self._free[self.find(a)]

    def nodes_of(self, a: int) -> list[ENode]:
        return [self.canonicalize(n) for n in self._nodes[self.find(a)]]

    def classes(self) -> Iterator[int]:
        for i in range(len(self._uf)):
            if self._uf[i] == i:
                yield i

    def node_count(self) -> int:
        return len(self.hashcons)

    def class_count(self) -> int:
        return sum(1 for _ in self.classes())

    def lookup(self, n: ENode) -> Optional[int]:
        """Find the class of a canonical node without inserting anything."""
        got = self.hashcons.get(self.canonicalize(n))
        return self.find(got) if got is not None else None

    # -- growth --

    def add(self, n: ENode, ty: Type) -> int:
        n = self.canonicalize(n)
        got = self.hashcons.get(n)
        if got is not None:
            got = self.find(got)
            if self._ty[got] is not ty:
                raise TypeError(
                    f"node {n.sym} exists at type {types.show_type(self._ty[got])}, "
                    f"added at {types.show_type(ty)}")
            return got
        cid = len(self._uf)
        self._uf.append(cid)
        self._ty[cid] = ty
        self._nodes[cid] = [n]
        self._parents[cid] = []
        self.hashcons[n] = cid
        entry = [n, cid]
        for c in set(n.children):
            self._parents[c].append(entry)
        self._free[cid] = free_make(n, [self._free[c] for c in n.children])
        self.version += 1
        return cid

    def add_term(self, t: Term) -> int:
        children = tuple(self.add_term(c) for c in _term_children(t))
        return self.add(term_node(t, children), t.ty)

    def union(self, a: int, b: int) -> int:
        a, b = self.find(a), self.find(b)
        if a == b:
            return a
        if self._ty[a] is not self._ty[b]:
            raise TypeError(
                f"union across types {types.show_type(self._ty[a])} vs "
                f"{types.show_type(self._ty[b])}")
        root, other = (a, b) if a < b else (b, a)
        self._uf[other] = root
        self._nodes[root].extend(self._nodes.pop(other))
        self._parents[root].extend(self._parents.pop(other))
        other_free = self._free.pop(other)
        merged = self._free[root] | other_free
        # parents of either side may see changed data after the merge
        if merged != self._free[root] or merged != other_free:
            self._free_dirty.append(root)
        self._free[root] = merged
        self._dirty.append(root)
        self.version += 1
        return root

    # -- congruence repair --

    def rebuild(self) -> int:
        repairs = 0
        while self._dirty or self._free_dirty:
            todo = {self.find(c) for c in self._dirty}
            self._dirty.clear()
            for c in todo:
                repairs += self._repair(c)
            free_todo = {self.find(c) for c in self._free_dirty}
            self._free_dirty.clear()
            for c in free_todo:
                self._propagate_free(c)
        if self.audit_mode:
            self.audit()
        return repairs

    def _repair(self, c: int) -> int:
        repairs = 0
        # take the list: unions below may merge this class away, and the
        # dict entry must stay live for parents merged in meanwhile
        entries = self._parents[self.find(c)]
        self._parents[self.find(c)] = []
        for entry in entries:
            pnode, pcls = entry
            self.hashcons.pop(pnode, None)
            pnode = self.canonicalize(pnode)
            entry[0] = pnode
            existing = self.hashcons.get(pnode)
            if existing is not None and self.find(existing) != self.find(pcls):
                self.union(existing, pcls)
                repairs += 1
            self.hashcons[pnode] = self.find(pcls)
            entry[1] = self.find(pcls)
        seen: set[ENode] = set()
        fresh: list[list] = []
        for entry in entries:
            if entry[0] not in seen:
                seen.add(entry[0])
                fresh.append(entry)
        self._parents[self.find(c)].extend(fresh)
        return repairs

    def _propagate_free(self, c: int) -> None:
        for entry in self._parents[self.find(c)]:
            pnode, pcls = self.canonicalize(entry[0]), self.find(entry[1])
            made = free_make(pnode, [self._free[self.find(ch)]
                                     for ch in pnode.children])
            merged = self._free[pcls] | made
            if merged != self._free[pcls]:
                self._free[pcls] = merged
                self._free_dirty.append(pcls)

    # -- audit --

    def audit(self) -> None:
        """Check the congruence invariant and analysis fixpoint from scratch."""
        roots = list(self.classes())
        seen: dict[ENode, int] = {}
        for r in roots:
            for n in self._nodes[r]:
                cn = self.canonicalize(n)
                owner = seen.get(cn)
                assert owner is None or owner == r, \
                    f"congruence violated: {cn} in #{owner} and #{r}"
                seen[cn] = r
                got = self.hashcons.get(cn)
                assert got is not None and self.find(got) == r, \
                    f"hashcons stale for {cn}"
        # analysis fixpoint from bottom, by worklist propagation
        from collections import deque
        fresh: dict[int, frozenset[int]] = {r: frozenset() for r in roots}
        deps: dict[int, list[tuple[ENode, int]]] = {r: [] for r in roots}
        items: list[tuple[ENode, int]] = []
        for r in roots:
            for n in self._nodes[r]:
                cn = self.canonicalize(n)
                items.append((cn, r))
                for ch in set(cn.children):
                    deps[ch].append((cn, r))
        work = deque(items)
        while work:
            cn, r = work.popleft()
            made = free_make(cn, [fresh[c] for c in cn.children])
            if not made <= fresh[r]:
                fresh[r] |= made
                work.extend(deps[r])
        for r in roots:
            assert fresh[r] == self._free[r], \
                f"free analysis off at #{r}: {sorted(fresh[r])} vs {sorted(self._free[r])}"

    # -- extraction --

    def extract_best(self, local_cost: Callable[[ENode], float]
                     ) -> dict[int, tuple[float, ENode]]:
        """Minimal total cost and witness node per class, by fixpoint.

        Classes representing no finite term (cyclic only) are absent.
        """
        best: dict[int, tuple] = {}
        per_class: dict[int, list[ENode]] = {}
        for r in self.classes():
            per_class[r] = [self.canonicalize(n) for n in self._nodes[r]]
        changed = True
        while changed:
            changed = False
            for r, ns in per_class.items():
                for n in ns:
                    total = local_cost(n)
                    if not math.isfinite(total):
                        continue
                    key_tail = (n.children, n.sym, _meta_key(n.meta))
                    ok = True
                    for c in n.children:
                        got = best.get(self.find(c))
                        if got is None:
                            ok = False
                            break
                        total += got[0]
                    if not ok:
                        continue
                    cand = (total,) + key_tail
                    cur = best.get(r)
                    if cur is None or cand < (cur[0],) + (cur[1].children, cur[1].sym, _meta_key(cur[1].meta)):
                        best[r] = (total, n)
                        changed = True
        return best

    def build_term(self, c: int, best: dict[int, tuple[float, ENode]]) -> Term:
        c = self.find(c)
        _, n = best[c]
        ty = self._ty[c]
        if n.sym == "var":
            return Var(ty, n.meta[0])
        if n.sym == "lam":
            return Lam(ty, self.build_term(n.children[0], best))
        if n.sym == "app":
            return App(ty, self.build_term(n.children[0], best),
                       self.build_term(n.children[1], best))
        if n.sym == "natlam":
            return NatLam(ty, self.build_term(n.children[0], best))
        if n.sym == "natapp":
            return NatApp(ty, self.build_term(n.children[0], best), n.meta)
        if n.sym == "prim":
            return Prim(ty, n.meta[0])
        if n.sym == "lit":
            return Lit(ty, n.meta)
        raise ValueError(f"cannot rebuild a term from symbol {n.sym!r}")

    def smallest_term(self, cost: Callable[[ENode], float], c: int
                      ) -> Optional[tuple[float, Term]]:
        best = self.extract_best(cost)
        c = self.find(c)
        if c not in best:
            return None
        return best[c][0], self.build_term(c, best)

    # -- debugging --

    def dump(self) -> str:
        lines = []
        for r in sorted(self.classes()):
            ns = sorted((self.canonicalize(n) for n in self._nodes[r]),
                        key=node_key)
            shown = ", ".join(show_node(n) for n in ns)
            free = "{" + ",".join(str(i) for i in sorted(self._free[r])) + "}"
            lines.append(f"#{r} {types.show_type(self._ty[r])} {{{shown}}} free={free}")
        return "\n".join(lines)


def term_size_cost(n: ENode) -> float:
    # substitution and shift nodes are bookkeeping, not term structure
    if n.sym in ("subst", "shift"):
        return math.inf
    return 1.0


def show_node(n: ENode) -> str:
    if n.sym == "var":
        return f"%{n.meta[0]}"
    if n.sym == "prim":
        return n.meta[0]
    if n.sym == "lit":
        return f"{n.meta:g}"
    if n.sym == "natapp":
        inner = nat.show(n.meta)
        return f"natapp(#{n.children[0]}, {inner})"
    if n.sym == "subst":
        return f"subst{n.meta}(#{n.children[0]}, #{n.children[1]})"
    if n.sym == "shift":
        d, k = n.meta
        return f"shift[{d},{k}](#{n.children[0]})"
    args = ", ".join(f"#{c}" for c in n.children)
    return f"{n.sym}({args})"


def _term_children(t: Term):
    if isinstance(t, (Var, Prim, Lit)):
        return ()
    if isinstance(t, Lam):
        return (t.body,)
    if isinstance(t, App):
        return (t.fn, t.arg)
    if isinstance(t, NatLam):
        return (t.body,)
    if isinstance(t, NatApp):
        return (t.fn,)
    raise TypeError(f"cannot encode {t!r}")
