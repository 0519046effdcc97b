"""Two-level structured overlay: a transit ring of group heads over
fully connected resource groups.

Group ``i`` holds the peers serving resource type ``i``. Its primary head sits
on the ring at position ``i``; members reach the ring only through that head.
Every peer keeps an IRT with one ``(resource_type, head)`` tuple per group.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .policy import Role


class OverlayError(Exception):
    pass


class InvalidSize(OverlayError):
    pass


class UnknownPeer(OverlayError):
    pass


class AlreadyPresent(OverlayError):
    pass


class BadResourceType(OverlayError):
    pass


class LastHeadUnderflow(OverlayError):
    """The target group has no head, so nothing can be routed to it."""


IRT = tuple  # tuple[tuple[int, Optional[str]], ...]


@dataclass
class Peer:
    id: str
    role: Role
    group: int
    irt: IRT = ()


@dataclass
class Group:
    index: int
    head: Optional[str] = None
    secondary: Optional[str] = None
    members: set = field(default_factory=set)

    @property
    def vacant(self) -> bool:
        return self.head is None


@dataclass(frozen=True)
class Route:
    hops: tuple

    @property
    def hop_count(self) -> int:
        return len(self.hops) - 1


def head_id(index: int) -> str:
    return f"h{index}"


def member_id(group: int, k: int) -> str:
    return f"p{group}-{k:03d}"


def ring_route(i: int, j: int, n: int) -> list[int]:
    """Head positions visited going from ``i`` to ``j`` on an ``n``-ring.

    Takes the shorter arc; when both arcs are equal, walks toward increasing
    index.
    """
    if not (0 <= i < n and 0 <= j < n):
        raise BadResourceType(f"ring positions {i}, {j} outside 0..{n - 1}")
    forward = (j - i) % n
    backward = (i - j) % n
    step, length = (1, forward) if forward <= backward else (-1, backward)
    return [(i + step * k) % n for k in range(length + 1)]


class NetworkState:
    def __init__(self, n: int):
        if n < 1:
            raise InvalidSize(f"need at least one resource type, got {n}")
        self.n = n
        self.groups = [Group(i) for i in range(n)]
        self.peers: dict[str, Peer] = {}

    @property
    def heads(self) -> list[Optional[str]]:
        return [g.head for g in self.groups]

    def current_irt(self) -> IRT:
        return tuple((i, g.head) for i, g in enumerate(self.groups))

    def refresh_irts(self) -> None:
        irt = self.current_irt()
        for peer in self.peers.values():
            peer.irt = irt

    def peer(self, peer_id: str) -> Peer:
        try:
            return self.peers[peer_id]
        except KeyError:
            raise UnknownPeer(peer_id) from None

    def role_of(self, peer_id: str) -> Role:
        return self.peer(peer_id).role

    def _set_role(self, peer_id: str, role: Role) -> None:
        self.peers[peer_id].role = role

    def join(self, peer_id: str, resource_type: int) -> Peer:
        """Add a peer to group ``resource_type``.

        It takes the head seat if vacant, else the secondary seat if vacant,
        else joins as a regular member.
        """
        if peer_id in self.peers:
            raise AlreadyPresent(peer_id)
        if not 0 <= resource_type < self.n:
            raise BadResourceType(f"resource type {resource_type} outside 0..{self.n - 1}")
        group = self.groups[resource_type]
        if group.head is None:
            role = Role.PRIMARY_GROUP_HEAD
            group.head = peer_id
        elif group.secondary is None:
            role = Role.SECONDARY_GROUP_HEAD
            group.secondary = peer_id
        else:
            role = Role.REGULAR_MEMBER
        group.members.add(peer_id)
        self.peers[peer_id] = Peer(peer_id, role, resource_type)
        self.refresh_irts()
        return self.peers[peer_id]

    def _next_secondary(self, group: Group) -> Optional[str]:
        regulars = sorted(p for p in group.members if p != group.head and p != group.secondary)
        return regulars[0] if regulars else None

    def leave(self, peer_id: str) -> Peer:
        """Remove a peer, promoting successors so the head seat stays filled.

        A departing head is replaced by the secondary, and the secondary seat
        passes to the lowest-id regular member. If the last peer of a group
        leaves, the group stays with a vacant head until someone joins.
        """
        peer = self.peer(peer_id)
        group = self.groups[peer.group]
        group.members.discard(peer_id)
        del self.peers[peer_id]
        if group.head == peer_id:
            group.head = group.secondary
            group.secondary = None
            if group.head is not None:
                self._set_role(group.head, Role.PRIMARY_GROUP_HEAD)
        elif group.secondary == peer_id:
            group.secondary = None
        if group.head is not None and group.secondary is None:
            group.secondary = self._next_secondary(group)
            if group.secondary is not None:
                self._set_role(group.secondary, Role.SECONDARY_GROUP_HEAD)
        self.refresh_irts()
        return peer

    def occupied_positions(self) -> list[int]:
        return [i for i, g in enumerate(self.groups) if g.head is not None]

    def ring_neighbors(self, position: int) -> tuple[int, int]:
        """Nearest occupied positions before and after ``position`` on the ring."""
        occupied = self.occupied_positions()
        k = occupied.index(position)
        return occupied[k - 1], occupied[(k + 1) % len(occupied)]

    def neighbors(self, peer_id: str) -> set:
        peer = self.peer(peer_id)
        group = self.groups[peer.group]
        adjacent = set(group.members) - {peer_id}
        if group.head == peer_id:
            for pos in self.ring_neighbors(peer.group):
                if pos != peer.group:
                    adjacent.add(self.groups[pos].head)
        return adjacent

    def route_lookup(self, src: str, resource_type: int) -> Route:
        """Path from ``src`` to the head serving ``resource_type``.

        The route climbs to the source's own head, then follows the shorter
        arc of the ring. Vacant ring positions are skipped.
        """
        peer = self.peer(src)
        if not 0 <= resource_type < self.n:
            raise BadResourceType(f"resource type {resource_type} outside 0..{self.n - 1}")
        if self.groups[resource_type].head is None:
            raise LastHeadUnderflow(f"group {resource_type} has no head")
        hops = [src]
        own_head = self.groups[peer.group].head
        if own_head != src:
            hops.append(own_head)
        occupied = self.occupied_positions()
        arc = ring_route(occupied.index(peer.group), occupied.index(resource_type), len(occupied))
        hops.extend(self.groups[occupied[k]].head for k in arc[1:])
        return Route(tuple(hops))

    def check_invariants(self) -> list[str]:
        """Return every structural violation found; an empty list means Ok."""
        problems = []
        if len(self.groups) != self.n:
            problems.append(f"expected {self.n} groups, found {len(self.groups)}")
        expected_irt = self.current_irt()
        for i, group in enumerate(self.groups):
            if group.index != i:
                problems.append(f"group at ring position {i} is labelled {group.index}")
            listed = {p for p, peer in self.peers.items() if peer.group == i}
            if listed != group.members:
                problems.append(f"group {i} membership disagrees with peer records")
            if group.head is None:
                if group.members:
                    problems.append(f"group {i} has members but no head")
                if group.secondary is not None:
                    problems.append(f"group {i} has a secondary but no head")
                continue
            if group.head not in group.members:
                problems.append(f"head {group.head} of group {i} is not a member")
            if group.secondary is not None and group.secondary not in group.members:
                problems.append(f"secondary {group.secondary} of group {i} is not a member")
            if group.secondary is None and len(group.members) > 1:
                problems.append(f"group {i} has members but no secondary head")
            secondaries = [p for p in group.members if p in self.peers and self.peers[p].role is Role.SECONDARY_GROUP_HEAD]
            if len(secondaries) > 1:
                problems.append(f"group {i} has {len(secondaries)} secondary heads")
        for pid, peer in sorted(self.peers.items()):
            group = self.groups[peer.group]
            if peer.role is Role.PRIMARY_GROUP_HEAD and group.head != pid:
                problems.append(f"{pid} claims primary head of group {peer.group}")
            if group.head == pid and peer.role is not Role.PRIMARY_GROUP_HEAD:
                problems.append(f"{pid} heads group {peer.group} with role {peer.role.value}")
            if group.secondary == pid and peer.role is not Role.SECONDARY_GROUP_HEAD:
                problems.append(f"{pid} is secondary of group {peer.group} with role {peer.role.value}")
            if len(peer.irt) != self.n:
                problems.append(f"{pid} IRT has {len(peer.irt)} tuples, expected {self.n}")
            elif peer.irt != expected_irt:
                stale = [t for t, cur in zip(peer.irt, expected_irt) if t != cur]
                problems.append(f"{pid} IRT is stale at {stale}")
        return problems

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "heads": self.heads,
            "groups": [
                {"index": g.index, "head": g.head, "secondary": g.secondary, "members": sorted(g.members)}
                for g in self.groups
            ],
            "peers": {
                pid: {"role": p.role.value, "group": p.group, "irt": [list(t) for t in p.irt]}
                for pid, p in self.peers.items()
            },
        }

    def dump(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode("utf-8")


def build_network(n: int, members_per_group: Sequence[int]) -> NetworkState:
    """Create ``n`` groups, head ``h{i}`` on the ring, then the listed number
    of members per group. The first member of a group becomes its secondary."""
    if n < 1:
        raise InvalidSize(f"need at least one resource type, got {n}")
    if len(members_per_group) != n:
        raise InvalidSize(f"members_per_group has {len(members_per_group)} entries, expected {n}")
    if any(m < 0 for m in members_per_group):
        raise InvalidSize("member counts must be non-negative")
    state = NetworkState(n)
    for i in range(n):
        state.join(head_id(i), i)
    for i, count in enumerate(members_per_group):
        for k in range(1, count + 1):
            state.join(member_id(i, k), i)
    return state


def check_invariants(state: NetworkState) -> list[str]:
    return state.check_invariants()


def route_lookup(src: str, resource_type: int, state: NetworkState) -> Route:
    return state.route_lookup(src, resource_type)


def join(peer_id: str, resource_type: int, state: NetworkState) -> NetworkState:
    state.join(peer_id, resource_type)
    return state


def leave(peer_id: str, state: NetworkState) -> NetworkState:
    state.leave(peer_id)
    return state


def initial_peers(n: int, members_per_group: Iterable[int]) -> list[tuple[str, int]]:
    """Peer ids (and groups) that :func:`build_network` creates, in join order."""
    out = [(head_id(i), i) for i in range(n)]
    for i, count in enumerate(members_per_group):
        out.extend((member_id(i, k), i) for k in range(1, count + 1))
    return out
