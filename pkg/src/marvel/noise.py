"""Seeded label corruption with exact per-class flip counts.

Four families:

* binary_asymmetric    flip round(rho_c * n_c) labels of each class c in
                       {-1, +1} to the other class; equal rates give
                       symmetric noise
* multiclass_symmetric flip round(rho * n) labels overall, each to a
                       uniformly drawn different class
* circular             flip round(rho * n_c) labels of class c to class
                       (c + 1) mod k
* pair_map             flip round(rho * n_c) labels of each mapped
                       source class to its target class

Counts use round-half-to-even, so the number of flips is a deterministic
function of the class sizes and rates; the seed only decides which
instances flip.  The caller keeps the clean labels for oracle metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import stream

FAMILIES = ("binary_asymmetric", "multiclass_symmetric", "circular", "pair_map")

_ALIASES = {
    "asym": "binary_asymmetric",
    "sym": "multiclass_symmetric",
    "circ": "circular",
    "pairs": "pair_map",
}


@dataclass(frozen=True)
class NoiseSpec:
    family: str
    rho_neg: float = 0.0  # binary: rate for class -1
    rho_pos: float = 0.0  # binary: rate for class +1
    rho: float = 0.0  # other families
    pairs: tuple = ()  # pair_map: (source, target) class pairs

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        if self.family == "binary_asymmetric":
            if not (0 <= self.rho_neg < 1 and 0 <= self.rho_pos < 1):
                raise ValueError("binary rates must lie in [0, 1)")
            if self.rho_neg + self.rho_pos >= 1:
                raise ValueError("binary rates must sum to less than 1")
        else:
            if not 0 <= self.rho <= 1:
                raise ValueError("rate must lie in [0, 1]")
        if self.family == "pair_map":
            object.__setattr__(
                self, "pairs", tuple((int(s), int(t)) for s, t in self.pairs)
            )
            sources = [s for s, _ in self.pairs]
            if len(set(sources)) != len(sources):
                raise ValueError("pair map sources must be distinct")
            if any(s == t for s, t in self.pairs):
                raise ValueError("pair map cannot send a class to itself")

    @staticmethod
    def parse(text: str) -> "NoiseSpec":
        """Parse the compact CLI/config form.

        asym:RHO_NEG,RHO_POS | sym:RHO | circ:RHO | pairs:RHO:9>1,2>0
        Full family names are accepted in place of the short codes.
        """
        head, _, rest = text.strip().partition(":")
        family = _ALIASES.get(head, head)
        if family == "binary_asymmetric":
            try:
                neg, pos = (float(v) for v in rest.split(","))
            except ValueError:
                raise ValueError(f"expected asym:RHO_NEG,RHO_POS, got {text!r}") from None
            return NoiseSpec(family, rho_neg=neg, rho_pos=pos)
        if family in ("multiclass_symmetric", "circular"):
            return NoiseSpec(family, rho=float(rest))
        if family == "pair_map":
            rate, _, pair_text = rest.partition(":")
            return NoiseSpec(family, rho=float(rate), pairs=parse_pairs(pair_text))
        raise ValueError(f"unknown noise family {head!r}")


def parse_pairs(text: str) -> tuple:
    """Parse "9>1,2>0,4>7" into ((9, 1), (2, 0), (4, 7))."""
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        src, sep, dst = chunk.partition(">")
        if not sep:
            raise ValueError(f"pair {chunk!r} is not of the form SOURCE>TARGET")
        pairs.append((int(src), int(dst)))
    return tuple(pairs)


def _flip_count(rate: float, group_size: int) -> int:
    return int(round(rate * group_size))  # round-half-to-even


def corrupt(labels, spec: NoiseSpec, seed: int, num_classes: int):
    """Corrupt `labels` per `spec`; returns (observed labels, noisy mask).

    The mask marks exactly the flipped instances; every flip changes the
    label.  The input array is never modified.
    """
    labels = np.asarray(labels, dtype=int)
    rng = stream(seed, "noise")
    observed = labels.copy()
    mask = np.zeros(len(labels), dtype=bool)

    if spec.family == "binary_asymmetric":
        if not np.isin(labels, (-1, 1)).all():
            raise ValueError("binary noise expects labels in {-1, +1}")
        for cls, rate, target in ((-1, spec.rho_neg, 1), (1, spec.rho_pos, -1)):
            members = np.flatnonzero(labels == cls)
            picked = rng.choice(members, size=_flip_count(rate, len(members)), replace=False)
            observed[picked] = target
            mask[picked] = True
        return observed, mask

    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"labels out of range for {num_classes} classes")

    if spec.family == "multiclass_symmetric":
        picked = rng.choice(len(labels), size=_flip_count(spec.rho, len(labels)), replace=False)
        # uniform over the k-1 classes that differ from the true label
        draw = rng.integers(0, num_classes - 1, size=len(picked))
        observed[picked] = draw + (draw >= labels[picked])
        mask[picked] = True
    elif spec.family == "circular":
        for cls in range(num_classes):
            members = np.flatnonzero(labels == cls)
            picked = rng.choice(members, size=_flip_count(spec.rho, len(members)), replace=False)
            observed[picked] = (cls + 1) % num_classes
            mask[picked] = True
    elif spec.family == "pair_map":
        for src, dst in spec.pairs:
            if not (0 <= src < num_classes and 0 <= dst < num_classes):
                raise ValueError(f"pair {src}>{dst} out of range for {num_classes} classes")
            members = np.flatnonzero(labels == src)
            picked = rng.choice(members, size=_flip_count(spec.rho, len(members)), replace=False)
            observed[picked] = dst
            mask[picked] = True
    return observed, mask
