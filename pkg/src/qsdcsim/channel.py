"""Transmission model for the photon sequence Alice sends to Bob.

Each slot of the sequence carries either one photon of a signal pair (the
pair's other photon stays with Alice) or a standalone decoy photon. In
transit a photon can be captured by the adversary, lost, or delivered, and
delivered photons pass through the configured attack. Captured and lost
photons are indistinguishable to the receiver: both simply never arrive.

Loss is i.i.d. per photon. With `eve_lossless_forwarding` (the default) a
capturing adversary sits at the channel head and forwards the remaining
photons herself, so captured photons never face the loss coin; with the flag
off she sits behind the lossy segment and can only capture photons that
survived it. Either way the receiver's absence pattern has the same
distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .adversary import AttackModel, CaptureFraction, NoAttack, UnitaryProbe, attack_qubit, require_valid_probe
from .statevector import StateVector


class SlotKind(Enum):
    SIGNAL = "signal"
    DECOY = "decoy"


@dataclass(frozen=True, eq=False)
class PhotonSlot:
    """One transmitted photon.

    `index` is the 1-based pair order for signal slots and the decoy id for
    decoy slots. `state` is the full quantum state the photon belongs to (the
    two-qubit pair for signals, a single qubit for decoys) and
    `transit_qubit` says which subsystem of it is actually on the wire.
    Whether a slot is a decoy is the sender's secret; receiver-side code must
    not branch on `kind` before the positions are disclosed.
    """

    kind: SlotKind
    index: int
    state: StateVector
    transit_qubit: int


@dataclass(frozen=True, eq=False)
class PhotonSequence:
    """Ordered transmission frame; `None` marks a photon that never arrived."""

    slots: tuple[PhotonSlot | None, ...]

    def __len__(self) -> int:
        return len(self.slots)

    @property
    def received_count(self) -> int:
        return sum(slot is not None for slot in self.slots)


class SlotStatus(Enum):
    DELIVERED = "delivered"
    LOST = "lost"
    CAPTURED = "captured"


@dataclass(frozen=True)
class DeliveryOutcome:
    """Per-slot transit result; exactly one status per transmitted slot."""

    statuses: tuple[SlotStatus, ...]

    def delivered(self, position: int) -> bool:
        return self.statuses[position] is SlotStatus.DELIVERED


@dataclass(frozen=True, eq=False)
class ChannelModel:
    loss_prob: float = 0.0
    attack: AttackModel = field(default_factory=NoAttack)
    eve_lossless_forwarding: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError(f"loss_prob must lie in [0, 1], got {self.loss_prob!r}")


def transmit(
    sequence: PhotonSequence, model: ChannelModel, rng: np.random.Generator
) -> tuple[PhotonSequence, DeliveryOutcome]:
    """Send every slot through the channel, resolving capture, loss and
    attack per photon. Returns the receiver's view of the sequence (absent
    photons are `None`) and the ground-truth per-slot statuses."""
    if isinstance(model.attack, UnitaryProbe):
        require_valid_probe(model.attack.iso)
    capture = model.attack if isinstance(model.attack, CaptureFraction) else None
    received: list[PhotonSlot | None] = []
    statuses: list[SlotStatus] = []
    for slot in sequence.slots:
        if slot is None:
            raise ValueError("cannot transmit a sequence with absent slots")
        if capture is not None and model.eve_lossless_forwarding:
            _, captured = attack_qubit(slot.state, slot.transit_qubit, capture, rng)
            if captured:
                received.append(None)
                statuses.append(SlotStatus.CAPTURED)
                continue
        if rng.random() < model.loss_prob:
            received.append(None)
            statuses.append(SlotStatus.LOST)
            continue
        if capture is not None:
            if not model.eve_lossless_forwarding:
                _, captured = attack_qubit(slot.state, slot.transit_qubit, capture, rng)
                if captured:
                    received.append(None)
                    statuses.append(SlotStatus.CAPTURED)
                    continue
            received.append(slot)
        else:
            new_state, _ = attack_qubit(slot.state, slot.transit_qubit, model.attack, rng)
            received.append(slot if new_state is slot.state else replace(slot, state=new_state))
        statuses.append(SlotStatus.DELIVERED)
    return PhotonSequence(tuple(received)), DeliveryOutcome(tuple(statuses))


def reconcile(outcome: DeliveryOutcome, sequence_layout: PhotonSequence) -> tuple[int, ...]:
    """Pair indices whose transmitted photon actually arrived.

    `sequence_layout` is the sender's record of what occupied each slot.
    Only these pairs may ever appear in the sender's result disclosure; lost
    and captured photons look identical here, which is what keeps captured
    pairs useless to the adversary.
    """
    if len(outcome.statuses) != len(sequence_layout.slots):
        raise ValueError("delivery outcome and sequence layout differ in length")
    indices = []
    for status, slot in zip(outcome.statuses, sequence_layout.slots):
        if slot is not None and slot.kind is SlotKind.SIGNAL and status is SlotStatus.DELIVERED:
            indices.append(slot.index)
    return tuple(indices)
