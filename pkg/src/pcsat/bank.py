"""Per-constraint-count classifier routing.

A bank maps the constraint count d of a canonized PC to the network trained
for d-by-(t_max+2) matrices.  ``check`` canonizes, vectorizes, and routes;
anything outside the bank's capacity comes back as Unsupported instead of
an error, and the solver is never consulted here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import dnn
from .pc import PathCondition, canonize
from .vectorize import CellOverflow, TooManyVariables, vectorize


class BankError(ValueError):
    pass


@dataclass(frozen=True)
class Classified:
    sat: bool
    score: float


@dataclass(frozen=True)
class Unsupported:
    reason: str


@dataclass
class ClassifierBank:
    t_max: int
    groups: dict[int, dnn.Network] = field(default_factory=dict)

    @property
    def supported_range(self) -> tuple[int, int] | None:
        if not self.groups:
            return None
        return min(self.groups), max(self.groups)

    def add(self, d: int, net: dnn.Network) -> None:
        expected = d * (self.t_max + 2)
        if net.dims[0] != expected:
            raise BankError(
                f"group {d} needs input dim {expected}, model has {net.dims[0]}"
            )
        if net.group is not None and net.group != (d, self.t_max + 2):
            raise BankError(f"model group {net.group} does not match ({d}, {self.t_max + 2})")
        self.groups[d] = net


def check(pc: PathCondition, bank: ClassifierBank) -> Classified | Unsupported:
    """Classify satisfiability, or report why the bank cannot.

    Pure routing: canonize, vectorize, forward pass.  Never raises and never
    calls a solver; callers branch on Unsupported.
    """
    cpc = canonize(pc)
    d = len(cpc.constraints)
    if d not in bank.groups:
        return Unsupported(f"no classifier for {d}-constraint conditions")
    try:
        m = vectorize(cpc, bank.t_max)
    except TooManyVariables as exc:
        return Unsupported(str(exc))
    except CellOverflow as exc:
        return Unsupported(str(exc))
    score, label = dnn.predict(bank.groups[d], m)
    return Classified(label, score)


def bank_stats(bank: ClassifierBank) -> dict:
    """Read-only summary of groups, dims, and training metadata."""
    return {
        "t_max": bank.t_max,
        "supported_range": list(bank.supported_range) if bank.groups else None,
        "groups": {
            str(d): {
                "dims": list(net.dims),
                "train_meta": dict(net.train_meta),
            }
            for d, net in sorted(bank.groups.items())
        },
    }


def save_bank(bank: ClassifierBank, directory) -> None:
    """Write the manifest plus one model file per group."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    models = {}
    for d, net in sorted(bank.groups.items()):
        name = f"group-{d}.json"
        dnn.save_network(net, directory / name)
        models[str(d)] = name
    manifest = {"version": "1", "t_max": bank.t_max, "models": models}
    with open(directory / "bank.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def load_bank(directory) -> ClassifierBank:
    directory = Path(directory)
    try:
        with open(directory / "bank.json", "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise BankError(f"bad bank manifest: {exc}") from exc
    if manifest.get("version") != "1":
        raise BankError(f"unsupported bank version {manifest.get('version')!r}")
    bank = ClassifierBank(int(manifest["t_max"]))
    for d_str, name in manifest["models"].items():
        net = dnn.load_network(directory / name)
        d = int(d_str)
        if net.group is not None and net.group[1] != bank.t_max + 2:
            raise BankError(
                f"model {name} was trained at {net.group[1] - 2} variables, "
                f"bank expects {bank.t_max}"
            )
        bank.add(d, net)
    return bank
