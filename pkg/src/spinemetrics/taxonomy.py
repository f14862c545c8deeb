"""Class taxonomy shared by masks, sidecars and the CLI."""

from dataclasses import dataclass, field


REQUIRED_CLASSES = ("vertebra_lumbar", "vertebra_sacral", "cage", "screw", "instrumentation")


@dataclass(frozen=True)
class LabelTaxonomy:
    """Ordered class names; background is implicit at index 0."""

    names: tuple = REQUIRED_CLASSES
    _index: dict = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate class names in taxonomy")
        missing = [c for c in REQUIRED_CLASSES if c not in self.names]
        if missing:
            raise ValueError(f"taxonomy missing required classes: {missing}")
        object.__setattr__(self, "_index", {n: i + 1 for i, n in enumerate(self.names)})

    @property
    def n_classes(self):
        """Class count including background."""
        return len(self.names) + 1

    def index_of(self, name):
        return self._index.get(name)

    def name_of(self, index):
        if index == 0:
            return "background"
        return self.names[index - 1]

    def __contains__(self, name):
        return name in self._index


DEFAULT_TAXONOMY = LabelTaxonomy()
