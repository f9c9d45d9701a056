"""Named, possibly overlapping sets of feature indices."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Group:
    name: str
    members: tuple  # sorted, duplicate-free feature indices

    @classmethod
    def of(cls, name, indices):
        return cls(name=str(name), members=tuple(sorted(set(int(i) for i in indices))))

    def __len__(self):
        return len(self.members)


class GroupStructure:
    """Ordered list of groups. Overlap between groups is allowed.

    Group names are unique. Empty groups only arise transiently while a
    selection loop strips already-activated indices out of the remaining
    groups; fresh structures should not contain them.
    """

    def __init__(self, groups=()):
        self.groups = []
        seen = set()
        for g in groups:
            if not isinstance(g, Group):
                g = Group.of(*g)
            if g.name in seen:
                raise ValueError(f"duplicate group name {g.name!r}")
            seen.add(g.name)
            self.groups.append(g)

    def __len__(self):
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def __getitem__(self, pos):
        return self.groups[pos]

    def names(self):
        return [g.name for g in self.groups]

    def validate_indices(self, n_cols, bias_col=None):
        """Check every member index against the feature count and bias."""
        for g in self.groups:
            for j in g.members:
                if not 0 <= j < n_cols:
                    raise ValueError(
                        f"group {g.name!r}: index {j} out of range for "
                        f"{n_cols} features")
                if bias_col is not None and j == bias_col:
                    raise ValueError(
                        f"group {g.name!r}: bias column {j} cannot be grouped")
        return self

    def member_sets(self):
        return [set(g.members) for g in self.groups]
