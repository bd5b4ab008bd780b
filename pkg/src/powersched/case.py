"""Power-flow case ingestion.

Two text formats are understood:

* IEEE Common Data Format (fixed columns, ``BUS DATA FOLLOWS`` /
  ``BRANCH DATA FOLLOWS`` sections terminated by ``-999``).
* A small keyword-per-line native format used for hand-written toy
  networks::

      base_mva 100
      bus    <id> <type> <p_load> <q_load> <g_shunt> <b_shunt> [vm]
      branch <from> <to> <r> <x> [b] [tap]
      gen    <bus> <p_gen>

  All electrical quantities are per unit on ``base_mva``.  Bus type uses the
  CDF codes (0/1 load, 2 generator, 3 reference).  Records must appear in the
  order bus, branch, gen.  ``#`` starts a comment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

__all__ = [
    "Bus",
    "Branch",
    "Generator",
    "CaseData",
    "CaseParseError",
    "CaseValidationError",
    "bundled_placement_path",
    "parse_case",
    "load_case",
    "bundled_case_path",
]


class CaseParseError(ValueError):
    """Malformed case text."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class CaseValidationError(ValueError):
    """Case text parsed but describes an inconsistent network."""


@dataclass(frozen=True)
class Bus:
    id: int
    type: int
    p_load: float = 0.0
    q_load: float = 0.0
    g_shunt: float = 0.0
    b_shunt: float = 0.0
    vm: float = 1.0


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0
    tap: float = 1.0


@dataclass(frozen=True)
class Generator:
    bus: int
    p_gen: float = 0.0


@dataclass(frozen=True)
class CaseData:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    base_mva: float = 100.0
    skipped_records: int = 0
    bus_index: dict[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "bus_index", {b.id: k for k, b in enumerate(self.buses)})
        self.validate()

    def validate(self) -> None:
        if len(self.bus_index) != len(self.buses):
            raise CaseValidationError("duplicate bus ids")
        for k, br in enumerate(self.branches):
            for end in (br.from_bus, br.to_bus):
                if end not in self.bus_index:
                    raise CaseValidationError(f"branch {k} references unknown bus {end}")
            if not (math.isfinite(br.r) and math.isfinite(br.x)):
                raise CaseValidationError(f"branch {k} has non-finite impedance")
        if not self.generators:
            raise CaseValidationError("case has no generators")
        seen = set()
        for g in self.generators:
            if g.bus not in self.bus_index:
                raise CaseValidationError(f"generator references unknown bus {g.bus}")
            if g.bus in seen:
                raise CaseValidationError(f"more than one generator at bus {g.bus}")
            seen.add(g.bus)

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def generator_buses(self) -> list[int]:
        return [g.bus for g in self.generators]

    @property
    def reference_generator(self) -> int:
        """Position (in ``generators``) of the reference machine.

        The generator sitting on a type-3 bus if there is one, else the first.
        """
        types = {b.id: b.type for b in self.buses}
        for k, g in enumerate(self.generators):
            if types[g.bus] == 3:
                return k
        return 0


def _field(line: str, start: int, stop: int, conv, lineno: int, name: str):
    # CDF columns are 1-based and inclusive
    raw = line[start - 1:stop].strip()
    if not raw:
        return conv(0)
    try:
        return conv(float(raw)) if conv is int else conv(raw)
    except ValueError:
        raise CaseParseError(f"bad {name} field {raw!r}", lineno) from None


def _parse_cdf(text: str) -> CaseData:
    lines = text.splitlines()
    base_mva = _field(lines[0], 32, 37, float, 1, "MVA base") or 100.0
    buses, branches, gens = [], [], []
    skipped = 0
    section = None
    saw_bus = saw_branch = False
    for lineno, line in enumerate(lines[1:], start=2):
        head = line.strip()
        if not head:
            continue
        if section is None:
            if head.startswith("BUS DATA FOLLOWS"):
                section, saw_bus = "bus", True
            elif head.startswith("BRANCH DATA FOLLOWS"):
                section, saw_branch = "branch", True
            elif head.startswith("END OF DATA"):
                break
            elif "FOLLOWS" in head:
                section = "other"
            else:
                skipped += 1
            continue
        if head.startswith("-9"):
            section = None
            continue
        if section == "other":
            skipped += 1
        elif section == "bus":
            bus_id = _field(line, 1, 4, int, lineno, "bus number")
            btype = _field(line, 25, 26, int, lineno, "bus type")
            buses.append(
                Bus(
                    id=bus_id,
                    type=btype,
                    p_load=_field(line, 41, 49, float, lineno, "load MW") / base_mva,
                    q_load=_field(line, 50, 59, float, lineno, "load MVAR") / base_mva,
                    g_shunt=_field(line, 107, 114, float, lineno, "shunt G"),
                    b_shunt=_field(line, 115, 122, float, lineno, "shunt B"),
                    vm=_field(line, 28, 33, float, lineno, "voltage") or 1.0,
                )
            )
            if btype in (2, 3):
                gens.append(Generator(bus_id, _field(line, 60, 67, float, lineno, "gen MW") / base_mva))
        else:
            tap = _field(line, 77, 82, float, lineno, "tap ratio")
            branches.append(
                Branch(
                    from_bus=_field(line, 1, 4, int, lineno, "tap bus"),
                    to_bus=_field(line, 6, 9, int, lineno, "Z bus"),
                    r=_field(line, 20, 29, float, lineno, "resistance"),
                    x=_field(line, 30, 40, float, lineno, "reactance"),
                    b=_field(line, 41, 50, float, lineno, "charging"),
                    tap=tap if tap != 0.0 else 1.0,
                )
            )
    if section in ("bus", "branch"):
        raise CaseParseError(f"unterminated {section} section", len(lines))
    if not (saw_bus and saw_branch):
        raise CaseParseError("missing BUS or BRANCH section")
    return CaseData(tuple(buses), tuple(branches), tuple(gens), base_mva, skipped)


_NATIVE_ARITY = {"bus": (6, 7), "branch": (4, 6), "gen": (2, 2), "base_mva": (1, 1)}
_NATIVE_ORDER = {"base_mva": 0, "bus": 1, "branch": 2, "gen": 3}


def _parse_native(text: str) -> CaseData:
    buses, branches, gens = [], [], []
    base_mva = 100.0
    skipped = 0
    stage = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split("#", 1)[0].split()
        if not tokens:
            continue
        kind, args = tokens[0].lower(), tokens[1:]
        if kind not in _NATIVE_ARITY:
            skipped += 1
            continue
        lo, hi = _NATIVE_ARITY[kind]
        if not lo <= len(args) <= hi:
            raise CaseParseError(f"{kind} record expects {lo}..{hi} fields, got {len(args)}", lineno)
        if _NATIVE_ORDER[kind] < stage:
            raise CaseParseError(f"{kind} record out of order", lineno)
        stage = _NATIVE_ORDER[kind]
        try:
            nums = [float(a) for a in args]
        except ValueError:
            raise CaseParseError(f"non-numeric field in {kind} record", lineno) from None
        if kind == "base_mva":
            base_mva = nums[0]
        elif kind == "bus":
            buses.append(Bus(int(nums[0]), int(nums[1]), *nums[2:]))
        elif kind == "branch":
            branches.append(Branch(int(nums[0]), int(nums[1]), *nums[2:]))
        else:
            gens.append(Generator(int(nums[0]), nums[1]))
    if not buses:
        raise CaseParseError("no bus records")
    return CaseData(tuple(buses), tuple(branches), tuple(gens), base_mva, skipped)


def parse_case(text: str, format: str = "cdf") -> CaseData:
    """Parse case text in ``"cdf"`` or ``"native"`` format.

    Records outside the bus/branch sections (CDF) or with unknown keywords
    (native) are skipped and counted in ``CaseData.skipped_records``.
    """
    if not text or not text.strip():
        raise CaseParseError("empty case text")
    if format == "cdf":
        return _parse_cdf(text)
    if format == "native":
        return _parse_native(text)
    raise ValueError(f"unknown case format {format!r}")


def load_case(path: str | Path, format: str | None = None) -> CaseData:
    """Read a case file; the format is detected from the content when not given."""
    text = Path(path).read_text()
    if format is None:
        format = "cdf" if "BUS DATA FOLLOWS" in text.upper() else "native"
    return parse_case(text, format)


def bundled_case_path() -> Path:
    """Path of the shipped IEEE 118-bus CDF file."""
    return Path(__file__).parent / "data" / "ieee118.cdf"


def bundled_placement_path() -> Path:
    """Switched-line placement shipped with the 118-bus case (random, seed 0)."""
    return Path(__file__).parent / "data" / "placement118.txt"
