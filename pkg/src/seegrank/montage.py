"""Electrode montage model.

Channel labels ("LA9"), electrodes with contact counts, zone adjacency,
and the two channel-set extensions used by the comparison workflow.
All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

from .errors import InvertedRange, MalformedLabel, SchemaError, UnknownChannel

log = logging.getLogger(__name__)

_LABEL_RE = re.compile(r"^([A-Z]+)\s*([0-9]+)$")
_RANGE_RE = re.compile(r"^([A-Z]+)([0-9]+)-([0-9]+)$")
_ELECTRODE_RE = re.compile(r"^[A-Z]+$")

# Contact counts outside this range are unusual for depth electrodes and
# trigger a warning; counts outside [1, 32] are rejected outright.
_TYPICAL_CONTACTS = (6, 16)
_MAX_CONTACTS = 32


@dataclass(frozen=True, order=True)
class ChannelLabel:
    """One contact point, e.g. electrode "LA", index 9 -> "LA9".

    Ordering is (electrode, index), which is also the rank tie-break rule.
    """

    electrode: str
    index: int

    def __str__(self) -> str:
        return f"{self.electrode}{self.index}"

    def __post_init__(self):
        if _ELECTRODE_RE.match(self.electrode) is None:
            raise MalformedLabel(f"electrode name must be uppercase letters, got {self.electrode!r}")
        if self.index < 1:
            raise MalformedLabel(f"contact index must be >= 1, got {self.index}")


def parse_channel_label(text: str) -> ChannelLabel:
    """Parse "LA9" into ChannelLabel("LA", 9).

    Case-insensitive; surrounding whitespace and a gap between the electrode
    name and the index are tolerated ("la 9" -> LA9). Whitespace inside
    either part is not ("L A", "LA9 3"). Rejects empty electrode names,
    missing digits, index 0, trailing garbage.
    """
    cleaned = text.strip().upper()
    m = _LABEL_RE.match(cleaned)
    if m is None:
        raise MalformedLabel(f"not a channel label: {text!r}")
    index = int(m.group(2))
    if index == 0:
        raise MalformedLabel(f"contact index must be >= 1: {text!r}")
    return ChannelLabel(m.group(1), index)


def expand_range(text: str) -> list[ChannelLabel]:
    """Expand clinician shorthand like "LA1-3, LB1-2" to channel labels.

    Each comma-separated token is a label ("LB2") or a range ("LA1-3", which
    yields LA1, LA2, LA3). Order is preserved; duplicates are dropped keeping
    the first occurrence, with a warning.
    """
    labels: list[ChannelLabel] = []
    seen: set[ChannelLabel] = set()
    for raw in text.split(","):
        token = re.sub(r"\s+", "", raw).upper()
        if not token:
            raise MalformedLabel(f"empty entry in channel list: {text!r}")
        m = _RANGE_RE.match(token)
        if m is not None:
            electrode, start, end = m.group(1), int(m.group(2)), int(m.group(3))
            if start == 0 or end == 0:
                raise MalformedLabel(f"contact index must be >= 1: {raw!r}")
            if end < start:
                raise InvertedRange(f"range end precedes start: {raw!r}")
            expanded = [ChannelLabel(electrode, i) for i in range(start, end + 1)]
        else:
            expanded = [parse_channel_label(token)]
        for label in expanded:
            if label in seen:
                log.warning("duplicate channel %s in %r dropped", label, text)
                continue
            seen.add(label)
            labels.append(label)
    return labels


@dataclass(frozen=True)
class Electrode:
    """One depth electrode: a name and a run of 1-based contact points."""

    name: str
    contacts: int
    zone_neighbors: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.name or not self.name.isalpha() or self.name != self.name.upper():
            raise SchemaError(f"electrode name must be uppercase letters, got {self.name!r}")
        if not 1 <= self.contacts <= _MAX_CONTACTS:
            raise SchemaError(
                f"electrode {self.name}: contacts must be in [1, {_MAX_CONTACTS}], got {self.contacts}"
            )

    def channels(self) -> list[ChannelLabel]:
        return [ChannelLabel(self.name, i) for i in range(1, self.contacts + 1)]


class Montage:
    """Ordered collection of electrodes plus symmetric zone adjacency.

    Neighbor lists are symmetrized on construction: if B lists A, A gains B.
    The channel universe is ordered by electrode (file order) then index.
    """

    def __init__(self, electrodes: list[Electrode]):
        names = [e.name for e in electrodes]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate electrode names in montage: {names}")
        by_name = {e.name: e for e in electrodes}
        for e in electrodes:
            for nb in e.zone_neighbors:
                if nb not in by_name:
                    raise SchemaError(f"electrode {e.name} lists unknown neighbor {nb!r}")
                if nb == e.name:
                    raise SchemaError(f"electrode {e.name} lists itself as a neighbor")
        # symmetrize adjacency
        adjacency = {name: set(by_name[name].zone_neighbors) for name in names}
        for name in names:
            for nb in by_name[name].zone_neighbors:
                adjacency[nb].add(name)
        self._electrodes: dict[str, Electrode] = {
            name: Electrode(name, by_name[name].contacts, frozenset(adjacency[name]))
            for name in names
        }
        for e in self._electrodes.values():
            if not _TYPICAL_CONTACTS[0] <= e.contacts <= _TYPICAL_CONTACTS[1]:
                log.warning("electrode %s has %d contacts, outside the typical %d-%d",
                            e.name, e.contacts, *_TYPICAL_CONTACTS)
        self._channels: tuple[ChannelLabel, ...] = tuple(
            ch for e in self._electrodes.values() for ch in e.channels()
        )
        self._channel_set = frozenset(self._channels)

    @property
    def electrodes(self) -> dict[str, Electrode]:
        return self._electrodes

    @property
    def channels(self) -> tuple[ChannelLabel, ...]:
        return self._channels

    @property
    def n_channels(self) -> int:
        return len(self._channels)

    def __contains__(self, label: ChannelLabel) -> bool:
        return label in self._channel_set

    def resolve(self, label: ChannelLabel) -> ChannelLabel:
        """Return the label if it exists in this montage, else UnknownChannel."""
        if label not in self._channel_set:
            raise UnknownChannel(f"channel {label} does not resolve in the montage")
        return label

    @classmethod
    def from_dict(cls, doc: dict) -> "Montage":
        if not isinstance(doc, dict):
            raise SchemaError("montage document must be a JSON object")
        unknown = set(doc) - {"electrodes"}
        if unknown:
            raise SchemaError(f"montage document has unknown keys: {sorted(unknown)}")
        entries = doc.get("electrodes")
        if not isinstance(entries, list) or not entries:
            raise SchemaError("montage 'electrodes' must be a non-empty array")
        electrodes = []
        for entry in entries:
            if not isinstance(entry, dict):
                raise SchemaError("each electrode entry must be a JSON object")
            unknown = set(entry) - {"name", "contacts", "zone_neighbors"}
            if unknown:
                raise SchemaError(f"electrode entry has unknown keys: {sorted(unknown)}")
            name = entry.get("name")
            contacts = entry.get("contacts")
            neighbors = entry.get("zone_neighbors", [])
            if not isinstance(name, str):
                raise SchemaError("electrode 'name' must be a string")
            if not isinstance(contacts, int) or isinstance(contacts, bool):
                raise SchemaError(f"electrode {name}: 'contacts' must be an integer")
            if not isinstance(neighbors, list) or not all(isinstance(n, str) for n in neighbors):
                raise SchemaError(f"electrode {name}: 'zone_neighbors' must be an array of strings")
            electrodes.append(Electrode(name.upper(), contacts, frozenset(n.upper() for n in neighbors)))
        return cls(electrodes)

    @classmethod
    def load(cls, path) -> "Montage":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"montage file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "electrodes": [
                {
                    "name": e.name,
                    "contacts": e.contacts,
                    "zone_neighbors": sorted(e.zone_neighbors),
                }
                for e in self._electrodes.values()
            ]
        }


def electrode_extension(montage: Montage, selected) -> list[ChannelLabel]:
    """All contact points of every electrode hosting a selected point.

    Result is a superset of the selection, ordered by montage electrode
    order then contact index. Empty selection yields an empty list.
    """
    hosts = set()
    for label in selected:
        montage.resolve(label)
        hosts.add(label.electrode)
    return [ch for name, e in montage.electrodes.items() if name in hosts for ch in e.channels()]


def zone_extension(montage: Montage, selected) -> list[ChannelLabel]:
    """Electrode extension plus all contacts of the hosts' zone neighbors."""
    hosts = set()
    for label in selected:
        montage.resolve(label)
        hosts.add(label.electrode)
    zone = set(hosts)
    for name in hosts:
        zone |= montage.electrodes[name].zone_neighbors
    return [ch for name, e in montage.electrodes.items() if name in zone for ch in e.channels()]
