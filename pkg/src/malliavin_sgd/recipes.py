"""Reproduction recipes: which config or test reproduces which acceptance check.

The index lives in ``recipes/index.json`` at the repository root.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

from .errors import UsageError
from .experiment.config import load_config

ACCEPTANCE_IDS = tuple(str(i) for i in range(1, 10))


@dataclass(frozen=True)
class ReproRecipe:
    name: str
    config: Optional[str]
    outputs: Tuple[str, ...]
    acceptance: Tuple[str, ...]
    runtime: str
    methods: Tuple[str, ...] = ()
    test: Optional[str] = None


@dataclass
class RecipeReport:
    recipes: List[ReproRecipe] = field(default_factory=list)
    problems: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems


def find_root(start=None) -> Path:
    here = Path(start or Path.cwd()).resolve()
    for p in [here, *here.parents]:
        if (p / "recipes" / "index.json").is_file():
            return p
    pkg_root = Path(__file__).resolve().parents[2]
    if (pkg_root / "recipes" / "index.json").is_file():
        return pkg_root
    raise UsageError("recipes/index.json not found above the current directory")


def load_recipes(root=None) -> List[ReproRecipe]:
    root = find_root(root)
    raw = json.loads((root / "recipes" / "index.json").read_text())
    out = []
    for entry in raw["recipes"]:
        out.append(
            ReproRecipe(
                name=entry["name"],
                config=entry.get("config"),
                outputs=tuple(entry.get("outputs", ())),
                acceptance=tuple(str(a) for a in entry.get("acceptance", ())),
                runtime=entry.get("runtime", "unknown"),
                methods=tuple(entry.get("methods", ())),
                test=entry.get("test"),
            )
        )
    return out


def validate_recipes(root=None, recipes=None) -> RecipeReport:
    """Check that every recipe config parses, names only methods its config
    defines, points at an existing test when it has one, and that each
    acceptance id is claimed by exactly one recipe."""
    root = find_root(root)
    recipes = load_recipes(root) if recipes is None else list(recipes)
    rep = RecipeReport(recipes)
    claims = {a: [] for a in ACCEPTANCE_IDS}
    for r in recipes:
        if r.config is None and r.test is None:
            rep.problems.append(f"{r.name}: dangling recipe (no config and no test)")
        if r.config is not None:
            path = root / r.config
            if not path.is_file():
                rep.problems.append(f"{r.name}: config {r.config} does not exist")
            else:
                try:
                    cfg = load_config(path)
                    names = {m.name for m in cfg.methods}
                    for m in r.methods:
                        if m not in names:
                            rep.problems.append(f"{r.name}: unknown method key {m!r}")
                except UsageError as exc:
                    rep.problems.append(f"{r.name}: {exc}")
        if r.test is not None:
            fname, _, func = r.test.partition("::")
            tpath = root / fname
            if not tpath.is_file():
                rep.problems.append(f"{r.name}: test file {fname} does not exist")
            elif func and f"def {func}(" not in tpath.read_text():
                rep.problems.append(f"{r.name}: test {func} not found in {fname}")
        for a in r.acceptance:
            if a not in claims:
                rep.problems.append(f"{r.name}: unknown acceptance id {a!r}")
            else:
                claims[a].append(r.name)
    for a, names in claims.items():
        if len(names) != 1:
            rep.problems.append(f"acceptance {a} is claimed by {len(names)} recipes: {names}")
    return rep
