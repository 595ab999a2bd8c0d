"""Alice and Bob state machines for the direct-communication protocol.

One session proceeds through a fixed choreography:

1. Alice prepares N entangled pairs a|00> + b|11>, keeps photon A of each
   and lines up the B photons in pair order.
2. She mixes decoy photons (random among |0>, |1>, |+>, |->) into the B
   sequence at secret random positions and transmits it.
3. Bob acknowledges receipt; Alice discloses decoy positions and bases; Bob
   measures those decoys and publishes the outcomes; Alice compares them
   against what she prepared. An error rate above the preset threshold
   aborts the session.
4. Bob reports which photons arrived. For each delivered pair Alice encodes
   her message bit by preparing a fresh photon in |bit>, feeding it through
   a CNOT controlled by her half of the pair, and measuring it in Z; Bob
   measures his half in Z. Alice publishes her outcomes for the delivered
   pairs only, and each message bit is recovered as the XOR of the two
   outcomes.

Every classical exchange is recorded in a transcript so tests can check
ordering and disclosure minimality. All randomness flows through a single
numpy Generator, which makes whole sessions replayable from the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .channel import (
    ChannelModel,
    PhotonSequence,
    PhotonSlot,
    SlotKind,
    reconcile,
    transmit,
)
from .statevector import (
    NORM_ATOL,
    Basis,
    DecoyState,
    NotNormalizedError,
    StateVector,
    apply_cnot,
    make_decoy,
    make_pair,
    make_qubit,
    measure,
    tensor,
)
from .adversary import AttackModel

DEFAULT_ERROR_THRESHOLD = 0.05
MIN_DEFAULT_DECOYS = 16


class EmptyCheckError(ValueError):
    """No decoys were checkable; the eavesdropping test cannot run.

    Deliberately an error rather than a silent pass: a session whose decoys
    all vanished (or that configured none) has no security evidence at all.
    """


class PositionMissingError(ValueError):
    """A disclosed decoy position does not exist in the sequence."""


@dataclass(frozen=True)
class PairParams:
    """Amplitudes of the entangled resource state; |a|^2 + |b|^2 = 1."""

    a: complex
    b: complex

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))
        norm_sq = abs(self.a) ** 2 + abs(self.b) ** 2
        if abs(norm_sq - 1.0) > NORM_ATOL:
            raise NotNormalizedError(f"|a|^2 + |b|^2 = {norm_sq!r}, not 1")


@dataclass(frozen=True)
class DecoyRecord:
    """Alice's private record of one inserted decoy."""

    position: int
    prepared_state: DecoyState

    @property
    def basis(self) -> Basis:
        return self.prepared_state.basis


# --- classical channel messages, in the order the protocol permits them ---


@dataclass(frozen=True)
class ReceiptAck:
    """Bob -> Alice: the transmission frame arrived (count = photons seen)."""

    count: int


@dataclass(frozen=True)
class DecoyDisclosure:
    """Alice -> Bob: decoy positions and measurement bases."""

    items: tuple[tuple[int, Basis], ...]


@dataclass(frozen=True)
class DecoyResults:
    """Bob -> Alice: measured outcome per delivered decoy position."""

    items: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class AbortNotice:
    """Alice -> Bob: error rate exceeded the threshold, session is dead."""

    error_rate: float


@dataclass(frozen=True)
class ReceivedIndices:
    """Bob -> Alice: pair indices whose photon he actually holds."""

    pair_indices: tuple[int, ...]


@dataclass(frozen=True)
class ResultDisclosure:
    """Alice -> Bob: her Z outcomes, for the delivered pairs only."""

    items: tuple[tuple[int, int], ...]


ClassicalMessage = Union[
    ReceiptAck, DecoyDisclosure, DecoyResults, AbortNotice, ReceivedIndices, ResultDisclosure
]


def default_decoy_count(n_pairs: int) -> int:
    return max(MIN_DEFAULT_DECOYS, n_pairs // 4)


@dataclass
class SessionConfig:
    """Parameters of one protocol session.

    `n_decoys=None` resolves to max(16, n_pairs // 4). `message_bits=None`
    means the session draws a uniformly random message from its own RNG
    stream; explicit bits must have length `n_pairs`.
    """

    n_pairs: int
    pair_params: PairParams
    n_decoys: int | None = None
    error_threshold: float = DEFAULT_ERROR_THRESHOLD
    rng_seed: int = 0
    message_bits: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.n_pairs < 1:
            raise ValueError(f"n_pairs must be >= 1, got {self.n_pairs!r}")
        if self.n_decoys is None:
            self.n_decoys = default_decoy_count(self.n_pairs)
        if self.n_decoys < 0:
            raise ValueError(f"n_decoys must be >= 0, got {self.n_decoys!r}")
        if not 0.0 <= self.error_threshold <= 1.0:
            raise ValueError(f"error_threshold must lie in [0, 1], got {self.error_threshold!r}")
        if self.message_bits is not None:
            bits = tuple(int(b) for b in self.message_bits)
            if len(bits) != self.n_pairs:
                raise ValueError(f"message_bits has length {len(bits)}, expected {self.n_pairs}")
            if any(b not in (0, 1) for b in bits):
                raise ValueError("message_bits must contain only 0s and 1s")
            self.message_bits = bits


@dataclass
class SessionReport:
    """Everything observable about one finished session."""

    aborted: bool
    decoy_error_rate: float
    decoys_checked: int
    delivered_mask: tuple[bool, ...]
    decoded_bits: dict[int, int]
    transcript: tuple[ClassicalMessage, ...]
    message_bits: tuple[int, ...]


_DECOY_CHOICES = (DecoyState.ZERO, DecoyState.ONE, DecoyState.PLUS, DecoyState.MINUS)


def alice_prepare(
    config: SessionConfig, rng: np.random.Generator
) -> tuple[list[StateVector], PhotonSequence, list[DecoyRecord]]:
    """Create the N pairs and the transmission frame with decoys mixed in.

    Signal slots keep pair order; decoy positions are a uniformly random
    subset of the frame and their states are uniform over the four decoy
    states. Returns Alice's pair states, the frame, and her private decoy
    records.
    """
    n = config.n_pairs
    n_decoys = config.n_decoys or 0
    pairs = [make_pair(config.pair_params.a, config.pair_params.b) for _ in range(n)]
    total = n + n_decoys
    if n_decoys:
        positions = sorted(int(p) for p in rng.choice(total, size=n_decoys, replace=False))
        states = [_DECOY_CHOICES[int(k)] for k in rng.integers(0, 4, size=n_decoys)]
    else:
        positions, states = [], []
    records = [DecoyRecord(pos, st) for pos, st in zip(positions, states)]
    decoy_at = {record.position: (decoy_id, record) for decoy_id, record in enumerate(records)}
    slots: list[PhotonSlot] = []
    pair_index = 0
    for position in range(total):
        hit = decoy_at.get(position)
        if hit is not None:
            decoy_id, record = hit
            slots.append(PhotonSlot(SlotKind.DECOY, decoy_id, make_decoy(record.prepared_state), 0))
        else:
            pair_index += 1
            # transit qubit 1 is photon B of the (A, B) pair
            slots.append(PhotonSlot(SlotKind.SIGNAL, pair_index, pairs[pair_index - 1], 1))
    return pairs, PhotonSequence(tuple(slots)), records


def bob_check_decoys(
    received: PhotonSequence, disclosure: DecoyDisclosure, rng: np.random.Generator
) -> DecoyResults:
    """Measure every delivered decoy in its disclosed basis.

    Decoys that never arrived are skipped (they cannot be measured); a
    disclosed position outside the frame is a protocol violation.
    """
    items = []
    for position, basis in disclosure.items:
        if not 0 <= position < len(received.slots):
            raise PositionMissingError(f"disclosed position {position} outside the received frame")
        slot = received.slots[position]
        if slot is None:
            continue
        record, _ = measure(slot.state, slot.transit_qubit, basis, rng.random())
        items.append((position, record.outcome))
    return DecoyResults(tuple(items))


def alice_error_rate(records: list[DecoyRecord], results: DecoyResults) -> float:
    """Fraction of checked decoys whose outcome contradicts the preparation.

    Comparison happens in each decoy's own basis. Zero checked decoys is an
    error, never a pass.
    """
    if not results.items:
        raise EmptyCheckError("no decoys were checked")
    by_position = {record.position: record for record in records}
    mismatches = 0
    for position, outcome in results.items:
        record = by_position.get(position)
        if record is None:
            raise PositionMissingError(f"result for position {position} matches no decoy record")
        mismatches += int(outcome != record.prepared_state.eigenvalue_bit)
    return mismatches / len(results.items)


def alice_encode_and_measure(
    pair_state: StateVector, message_bit: int, rng: np.random.Generator
) -> tuple[int, StateVector]:
    """Encode one message bit onto a pair and measure Alice's fresh photon.

    The fresh photon starts in |bit>, passes through a CNOT controlled by
    Alice's pair photon A, and is measured in Z. The input `pair_state` must
    have subsystem order (A, B, ...); the returned residual state has order
    (a, A, B, ...) with the fresh photon collapsed.
    """
    joint = tensor(make_qubit(message_bit), pair_state)
    joint = apply_cnot(joint, control=1, target=0)
    record, post = measure(joint, 0, Basis.Z, rng.random())
    return record.outcome, post


def bob_measure_signal(post_state: StateVector, rng: np.random.Generator) -> int:
    """Measure Bob's pair photon (subsystem 2 of the residual state) in Z."""
    if post_state.num_subsystems < 3:
        raise ValueError("residual state does not contain Bob's photon")
    record, _ = measure(post_state, 2, Basis.Z, rng.random())
    return record.outcome


def decode(alice_outcome: int, bob_outcome: int) -> int:
    """Recover the message bit: equal outcomes mean 0, unequal mean 1."""
    return (alice_outcome ^ bob_outcome) & 1


def run_session(
    config: SessionConfig,
    channel: ChannelModel | None = None,
    attack: AttackModel | None = None,
) -> SessionReport:
    """Execute one full session and return its report.

    `attack`, when given, replaces whatever attack the channel model carries
    (the channel then contributes only its loss behavior). Raises
    EmptyCheckError if not a single decoy could be checked.
    """
    channel = channel if channel is not None else ChannelModel()
    if attack is not None:
        channel = replace(channel, attack=attack)
    rng = np.random.default_rng(config.rng_seed)
    if config.message_bits is not None:
        message = config.message_bits
    else:
        message = tuple(int(b) for b in rng.integers(0, 2, size=config.n_pairs))

    _, b_sequence, decoy_records = alice_prepare(config, rng)
    received, delivery = transmit(b_sequence, channel, rng)

    transcript: list[ClassicalMessage] = [ReceiptAck(count=received.received_count)]
    disclosure = DecoyDisclosure(tuple((r.position, r.basis) for r in decoy_records))
    transcript.append(disclosure)
    results = bob_check_decoys(received, disclosure, rng)
    transcript.append(results)
    error_rate = alice_error_rate(decoy_records, results)

    pair_positions = {
        slot.index: pos
        for pos, slot in enumerate(b_sequence.slots)
        if slot is not None and slot.kind is SlotKind.SIGNAL
    }
    delivered_mask = tuple(
        delivery.delivered(pair_positions[i]) for i in range(1, config.n_pairs + 1)
    )

    if error_rate > config.error_threshold:
        transcript.append(AbortNotice(error_rate=error_rate))
        return SessionReport(
            aborted=True,
            decoy_error_rate=error_rate,
            decoys_checked=len(results.items),
            delivered_mask=delivered_mask,
            decoded_bits={},
            transcript=tuple(transcript),
            message_bits=message,
        )

    indices = reconcile(delivery, b_sequence)
    transcript.append(ReceivedIndices(pair_indices=indices))
    alice_outcomes: list[tuple[int, int]] = []
    decoded: dict[int, int] = {}
    for pair_index in indices:
        slot = received.slots[pair_positions[pair_index]]
        assert slot is not None
        alice_out, post = alice_encode_and_measure(slot.state, message[pair_index - 1], rng)
        alice_outcomes.append((pair_index, alice_out))
        bob_out = bob_measure_signal(post, rng)
        decoded[pair_index] = decode(alice_out, bob_out)
    transcript.append(ResultDisclosure(items=tuple(alice_outcomes)))

    return SessionReport(
        aborted=False,
        decoy_error_rate=error_rate,
        decoys_checked=len(results.items),
        delivered_mask=delivered_mask,
        decoded_bits=decoded,
        transcript=tuple(transcript),
        message_bits=message,
    )
