"""Fuzzy lock-and-key matching between construction signatures and molecules.

Signatures live on the unit circle [0, 1). A node's construction signature
(the lock) is compared with each stored molecule (a key). Attachment kinds
sit at evenly spaced function points ``i / T``.
"""

from __future__ import annotations

from enum import IntEnum
from functools import lru_cache
from typing import Mapping

TIE_EPS = 1e-12


class AttachmentKind(IntEnum):
    FLAGELLUM = 0
    SPIKE = 1
    PHAGORECEPTOR = 2
    PHOTORECEPTOR = 3
    ADHESION = 4


N_KINDS = len(AttachmentKind)


def function_point(kind: int, n_kinds: int = N_KINDS) -> float:
    return kind / n_kinds


def cycle_distance(s1: float, s2: float) -> float:
    """Distance between two signatures on the unit circle, in [0, 0.5]."""
    hi, lo = (s1, s2) if s1 >= s2 else (s2, s1)
    return min(hi - lo, 1.0 - hi + lo)


def matching_coefficient(d: float, d_critical: float) -> float:
    """1 at d = 0, falling linearly to 0 at ``d_critical`` and beyond."""
    if d >= d_critical:
        return 0.0
    return (d_critical - d) / d_critical


def closest_function_point(s: float, n_kinds: int = N_KINDS) -> tuple[int, float]:
    """(kind, cyclic distance) of the nearest function point; ties go to the lower kind."""
    dists = [cycle_distance(s, i / n_kinds) for i in range(n_kinds)]
    best = min(dists)
    for i, d in enumerate(dists):
        if d <= best + TIE_EPS:
            return i, d
    raise AssertionError("unreachable")


def functional_potency(s_m: float, n_kinds: int = N_KINDS) -> tuple[float, AttachmentKind]:
    """How strongly molecule ``s_m`` promotes the kind at its closest function point.

    1 exactly on a function point, 0 halfway between two of them.
    """
    kind, d = closest_function_point(s_m, n_kinds)
    k = 1.0 - 2.0 * n_kinds * d
    if k < TIE_EPS:
        k = 0.0
    elif k > 1.0:
        k = 1.0
    return k, AttachmentKind(kind)


def molecule_signature(index: int, molecule_count: int) -> float:
    return index / molecule_count


def snap_signature(s: float, molecule_count: int) -> int:
    """Lattice index nearest to ``s`` (wrapping 1.0 back to 0)."""
    return int(round((s % 1.0) * molecule_count)) % molecule_count


@lru_cache(maxsize=None)
def lattice_potency(molecule_count: int, n_kinds: int = N_KINDS) -> tuple[tuple[int, float], ...]:
    """(kind, k_func) for every lattice molecule, computed once per lattice."""
    out = []
    for idx in range(molecule_count):
        k, kind = functional_potency(idx / molecule_count, n_kinds)
        out.append((int(kind), k))
    return tuple(out)


def select_project(signature: float, molecules: Mapping[int, float], molecule_count: int,
                   n_kinds: int = N_KINDS) -> list[float]:
    """Construction drive toward each attachment kind.

    Each stored molecule contributes ``quantity * k_func * k_matching`` to
    the kind at its closest function point. ``molecules`` maps lattice
    index to quantity.
    """
    drive = [0.0] * n_kinds
    d_crit = 0.5 / n_kinds
    table = lattice_potency(molecule_count, n_kinds)
    for idx in sorted(molecules):
        q = molecules[idx]
        if q <= 0.0:
            continue
        k_match = matching_coefficient(cycle_distance(signature, idx / molecule_count), d_crit)
        if k_match == 0.0:
            continue
        kind, k_func = table[idx]
        drive[kind] += q * k_func * k_match
    return drive
