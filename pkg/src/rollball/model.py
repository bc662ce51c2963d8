"""Sign bookkeeping for the additive terms of the reduced field and the energy.

Both the reduced vector field and the moving energy are assembled as sums of
individually signed terms.  :class:`TermModel` carries an optional set of
terms whose sign is flipped.  The default model flips nothing; fault-injected
models are used as test doubles by the verification suites to show that every
term is actually exercised by some check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigurationError

#: number of additive terms per component of the reduced field
FIELD_TERMS = {"X0": 6, "X1": 1, "X2": 6, "X3": 5, "X4": 6}
#: number of additive terms of the moving energy
ENERGY_TERMS = 8


@dataclass(frozen=True)
class TermModel:
    flips: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        flips = frozenset((str(k), int(i)) for k, i in self.flips)
        for key, i in flips:
            n = FIELD_TERMS.get(key, ENERGY_TERMS if key == "E" else None)
            if n is None or not 0 <= i < n:
                raise ConfigurationError(f"fault: no term {key}:{i}")
        object.__setattr__(self, "flips", flips)

    def sign(self, key: str, i: int) -> float:
        return -1.0 if (key, i) in self.flips else 1.0

    def combine(self, key: str, terms) -> object:
        """Sum ``terms`` with the model's signs for component ``key``."""
        total = 0.0
        for i, t in enumerate(terms):
            total = total + self.sign(key, i) * t
        return total

    @property
    def is_exact(self) -> bool:
        return not self.flips

    @classmethod
    def parse(cls, text: str | None) -> "TermModel":
        """Parse ``"X2:3,E:0"`` into a model flipping those terms."""
        if not text:
            return EXACT
        flips = []
        for item in text.split(","):
            try:
                key, idx = item.strip().split(":")
                flips.append((key.strip(), int(idx)))
            except ValueError:
                raise ConfigurationError(f"fault: cannot parse {item!r}, expected KEY:INDEX") from None
        return cls(frozenset(flips))


EXACT = TermModel()


def all_single_flips():
    """Every single-term fault, field terms first."""
    out = [TermModel(frozenset({(k, i)})) for k, n in FIELD_TERMS.items() for i in range(n)]
    out += [TermModel(frozenset({("E", i)})) for i in range(ENERGY_TERMS)]
    return out
