"""Union-find with lexicographically least representatives.

Used wherever a finite quotient is taken: coend classes, connected
components, set-level colimits.  Representatives are the least element of
each class so that quotients are reproducible.
"""


class UnionFind:
    def __init__(self, items=()):
        self.parent = {}
        for x in items:
            self.add(x)

    def add(self, x):
        if x not in self.parent:
            self.parent[x] = x

    def find(self, x):
        if x not in self.parent:
            self.parent[x] = x
            return x
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y):
        px, py = self.find(x), self.find(y)
        if px == py:
            return px
        rep = min(px, py)
        self.parent[px] = self.parent[py] = rep
        return rep

    def classes(self):
        """Partition as a sorted tuple of sorted tuples."""
        by_rep = {}
        for x in self.parent:
            by_rep.setdefault(self.find(x), []).append(x)
        return tuple(tuple(sorted(v)) for _, v in sorted(by_rep.items()))

    def class_map(self):
        """Map each item to the least element of its class."""
        return {x: self.find(x) for x in self.parent}
