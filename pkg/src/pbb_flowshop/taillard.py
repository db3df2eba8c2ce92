"""Taillard's benchmark generator and the packaged 20x20 instances.

Instances are rebuilt from their published time seeds with Taillard's
portable linear congruential generator, so the packaged files can be
regenerated and audited. Set ``PBB_TAILLARD_DIR`` to a directory holding
``taNNN.txt`` files or the original ``tai20_20.txt`` to override them.
"""

from __future__ import annotations

import os
from importlib import resources
from pathlib import Path
from typing import Optional

from .core import Instance, parse_taillard

# name -> (time seed, upper bound, lower bound), 20 jobs x 20 machines.
# ta022 is not shipped: its seed could not be confirmed against the
# published lower bound.
TAILLARD_20x20 = {
    "ta021": (479340445, 2297, 1911),
    "ta023": (1958948863, 2326, 1844),
    "ta024": (918272953, 2223, 1810),
    "ta025": (555010963, 2291, 1899),
    "ta026": (2010851491, 2226, 1875),
    "ta027": (1519833303, 2273, 1875),
    "ta028": (1748670931, 2200, 1880),
    "ta029": (1923497586, 2237, 1840),
    "ta030": (1829909967, 2178, 1900),
}

ENV_DIR = "PBB_TAILLARD_DIR"


def taillard_times(seed: int, n: int, m: int, low: int = 1, high: int = 99) -> list[list[int]]:
    """Machine-major processing times from Taillard's generator."""
    a, b, c, modulus = 16807, 127773, 2836, 2147483647
    state = seed
    rows = []
    for _ in range(m):
        row = []
        for _ in range(n):
            k = state // b
            state = a * (state % b) - k * c
            if state < 0:
                state += modulus
            row.append(low + int(state / modulus * (high - low + 1)))
        rows.append(row)
    return rows


def generate_taillard(name: str) -> Instance:
    seed, ub, lb = TAILLARD_20x20[name]
    return Instance.from_machine_rows(taillard_times(seed, 20, 20), name=name,
                                      seed=seed, upper_bound=ub, lower_bound=lb)


def _from_dir(directory: Path, name: str) -> Optional[Instance]:
    single = directory / f"{name}.txt"
    if single.is_file():
        return parse_taillard(single.read_text(), name_prefix=name)[0]
    bundle = directory / "tai20_20.txt"
    index = int(name[2:]) - 21
    if bundle.is_file() and 0 <= index < 10:
        found = parse_taillard(bundle.read_text())
        if index < len(found):
            inst = found[index]
            return Instance(p=inst.p, name=name, seed=inst.seed,
                            upper_bound=inst.upper_bound, lower_bound=inst.lower_bound)
    return None


def load_taillard(name: str) -> Instance:
    """Load a Taillard instance by name (``ta021`` ... ``ta030``)."""
    override = os.environ.get(ENV_DIR)
    if override:
        inst = _from_dir(Path(override), name)
        if inst is not None:
            return inst
    data = resources.files("pbb_flowshop") / "data" / f"{name}.txt"
    if not data.is_file():
        raise FileNotFoundError(f"no data for Taillard instance {name!r}; "
                                f"point {ENV_DIR} at a directory containing it")
    return parse_taillard(data.read_text(), name_prefix=name)[0]
