"""Monte Carlo driver: batches of sessions, aggregation, JSON reports.

Configs and reports are JSON documents (UTF-8, diffable, language-neutral);
both carry a `schema_version` field, currently 1. The RNG is numpy's PCG64:
session i of a batch runs on `default_rng(SeedSequence([rng_seed, i]))`
collapsed to a 64-bit seed, so any single session can be replayed in
isolation and whole batches are bit-reproducible.

Config schema (all rates are plain numbers, amplitudes are either a real
number or a two-element [re, im] list):

    {
      "schema_version": 1,
      "rng_seed": 7,
      "n_sessions": 1000,
      "report_path": "report.json",
      "session": {
        "n_pairs": 64, "n_decoys": 16,
        "pair_a": 0.7071067811865476, "pair_b": 0.7071067811865476,
        "error_threshold": 0.05, "message_bits": null
      },
      "channel": {"loss_prob": 0.0, "eve_lossless_forwarding": true},
      "attack": {"kind": "none"},
      "sweep": {"attack.beta_sq": [0.0, 0.05, 0.1]}        # sweep runs only
    }

Attack kinds: "none"; "intercept_resend" with "basis_strategy" in
{"random_zx", "always_z", "always_x"}; "unitary_probe" with either the
shorthand "beta_sq" or explicit "alpha"/"beta"/"beta_p"/"alpha_p" (plus
optional "eps00".."eps11", four amplitudes each); "capture" with
"capture_prob".
"""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .adversary import (
    AttackModel,
    BasisStrategy,
    CaptureFraction,
    ErrorRates,
    InterceptResend,
    NoAttack,
    ProbeIsometry,
    UnitaryProbe,
    attack_error_rates,
)
from .channel import ChannelModel
from .protocol import PairParams, SessionConfig, SessionReport, run_session

SCHEMA_VERSION = 1
REPORT_DIR_ENV = "QSDC_SIM_REPORT_DIR"

_SQRT2_INV = 1.0 / math.sqrt(2.0)


class ConfigError(ValueError):
    """A run configuration is invalid; `problems` lists every bad field."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


# --- JSON <-> model plumbing ---


def _parse_amplitude(value: Any, where: str) -> complex:
    if isinstance(value, bool):
        raise ConfigError([f"{where}: expected a number or [re, im], got a bool"])
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
    ):
        return complex(value[0], value[1])
    raise ConfigError([f"{where}: expected a number or [re, im], got {value!r}"])


def _amplitude_to_json(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _parse_vector(value: Any, where: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise ConfigError([f"{where}: expected a list of 4 amplitudes"])
    return np.array([_parse_amplitude(v, f"{where}[{i}]") for i, v in enumerate(value)])


def parse_attack(data: Mapping[str, Any] | None) -> AttackModel:
    """Build an attack model from its config dict (None means no attack)."""
    if data is None:
        return NoAttack()
    kind = data.get("kind", "none")
    if kind == "none":
        return NoAttack()
    if kind == "intercept_resend":
        name = data.get("basis_strategy", "random_zx")
        try:
            strategy = BasisStrategy(name)
        except ValueError:
            raise ConfigError([f"attack.basis_strategy: unknown strategy {name!r}"]) from None
        return InterceptResend(basis_strategy=strategy)
    if kind == "capture":
        prob = data.get("capture_prob")
        if not isinstance(prob, (int, float)) or isinstance(prob, bool) or not 0 <= prob <= 1:
            raise ConfigError([f"attack.capture_prob: expected a number in [0, 1], got {prob!r}"])
        return CaptureFraction(capture_prob=float(prob))
    if kind == "unitary_probe":
        has_explicit = any(k in data for k in ("alpha", "beta", "beta_p", "alpha_p"))
        if "beta_sq" in data and has_explicit:
            raise ConfigError(["attack: give either beta_sq or explicit amplitudes, not both"])
        if "beta_sq" in data:
            beta_sq = data["beta_sq"]
            if not isinstance(beta_sq, (int, float)) or isinstance(beta_sq, bool) or not 0 <= beta_sq <= 1:
                raise ConfigError([f"attack.beta_sq: expected a number in [0, 1], got {beta_sq!r}"])
            return UnitaryProbe(iso=ProbeIsometry.from_error_rate(float(beta_sq)))
        kwargs: dict[str, Any] = {}
        for name in ("alpha", "beta", "beta_p", "alpha_p"):
            if name not in data:
                raise ConfigError([f"attack.{name}: required for an explicit unitary_probe"])
            kwargs[name] = _parse_amplitude(data[name], f"attack.{name}")
        for name in ("eps00", "eps01", "eps10", "eps11"):
            if name in data:
                kwargs[name] = _parse_vector(data[name], f"attack.{name}")
        return UnitaryProbe(iso=ProbeIsometry(**kwargs))
    raise ConfigError([f"attack.kind: unknown kind {kind!r}"])


def attack_to_dict(model: AttackModel) -> dict[str, Any]:
    if isinstance(model, NoAttack):
        return {"kind": "none"}
    if isinstance(model, InterceptResend):
        return {"kind": "intercept_resend", "basis_strategy": model.basis_strategy.value}
    if isinstance(model, CaptureFraction):
        return {"kind": "capture", "capture_prob": model.capture_prob}
    if isinstance(model, UnitaryProbe):
        iso = model.iso
        out: dict[str, Any] = {"kind": "unitary_probe"}
        for name in ("alpha", "beta", "beta_p", "alpha_p"):
            out[name] = _amplitude_to_json(getattr(iso, name))
        for name in ("eps00", "eps01", "eps10", "eps11"):
            out[name] = [_amplitude_to_json(complex(z)) for z in getattr(iso, name)]
        return out
    raise TypeError(f"unknown attack model: {model!r}")


@dataclass
class RunConfig:
    """One batch: a session template, a channel, an attack, and a seed."""

    session: SessionConfig
    channel: ChannelModel
    attack: AttackModel
    n_sessions: int = 1
    rng_seed: int = 0
    report_path: str | None = None

    def __post_init__(self) -> None:
        problems = []
        if self.n_sessions < 1:
            problems.append(f"n_sessions: must be >= 1, got {self.n_sessions!r}")
        if self.rng_seed < 0:
            problems.append(f"rng_seed: must be a non-negative integer, got {self.rng_seed!r}")
        if problems:
            raise ConfigError(problems)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> RunConfig:
        problems: list[str] = []
        if not isinstance(data, Mapping):
            raise ConfigError(["config: expected a JSON object"])
        known = {"schema_version", "rng_seed", "n_sessions", "report_path", "session", "channel", "attack", "sweep"}
        for key in data:
            if key not in known:
                problems.append(f"{key}: unknown top-level field")
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            problems.append(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")

        session = None
        session_data = data.get("session")
        if not isinstance(session_data, Mapping):
            problems.append("session: required object is missing")
        else:
            try:
                session = _parse_session(session_data)
            except ConfigError as exc:
                problems.extend(exc.problems)
            except (ValueError, TypeError) as exc:
                problems.append(f"session: {exc}")

        channel = None
        channel_data = data.get("channel", {})
        if not isinstance(channel_data, Mapping):
            problems.append("channel: expected an object")
        else:
            try:
                channel = _parse_channel(channel_data)
            except ConfigError as exc:
                problems.extend(exc.problems)
            except (ValueError, TypeError) as exc:
                problems.append(f"channel: {exc}")

        attack = None
        attack_data = data.get("attack", {"kind": "none"})
        if not isinstance(attack_data, Mapping):
            problems.append("attack: expected an object")
        else:
            try:
                attack = parse_attack(attack_data)
            except ConfigError as exc:
                problems.extend(exc.problems)
            except (ValueError, TypeError) as exc:
                problems.append(f"attack: {exc}")

        n_sessions = data.get("n_sessions", 1)
        if not isinstance(n_sessions, int) or isinstance(n_sessions, bool) or n_sessions < 1:
            problems.append(f"n_sessions: must be an integer >= 1, got {n_sessions!r}")
        rng_seed = data.get("rng_seed", 0)
        if not isinstance(rng_seed, int) or isinstance(rng_seed, bool) or rng_seed < 0:
            problems.append(f"rng_seed: must be a non-negative integer, got {rng_seed!r}")
        report_path = data.get("report_path")
        if report_path is not None and not isinstance(report_path, str):
            problems.append(f"report_path: must be a string or null, got {report_path!r}")

        if problems:
            raise ConfigError(problems)
        assert session is not None and channel is not None and attack is not None
        return cls(
            session=session,
            channel=channel,
            attack=attack,
            n_sessions=n_sessions,
            rng_seed=rng_seed,
            report_path=report_path,
        )

    def to_dict(self) -> dict[str, Any]:
        """Canonical JSON form; parsing it back yields an equivalent config."""
        session = {
            "n_pairs": self.session.n_pairs,
            "n_decoys": self.session.n_decoys,
            "pair_a": _amplitude_to_json(self.session.pair_params.a),
            "pair_b": _amplitude_to_json(self.session.pair_params.b),
            "error_threshold": self.session.error_threshold,
            "message_bits": list(self.session.message_bits) if self.session.message_bits else None,
        }
        return {
            "schema_version": SCHEMA_VERSION,
            "rng_seed": self.rng_seed,
            "n_sessions": self.n_sessions,
            "report_path": self.report_path,
            "session": session,
            "channel": {
                "loss_prob": self.channel.loss_prob,
                "eve_lossless_forwarding": self.channel.eve_lossless_forwarding,
            },
            "attack": attack_to_dict(self.attack),
        }


def _parse_session(data: Mapping[str, Any]) -> SessionConfig:
    known = {"n_pairs", "n_decoys", "pair_a", "pair_b", "error_threshold", "message_bits"}
    problems = [f"session.{key}: unknown field" for key in data if key not in known]
    if "n_pairs" not in data:
        problems.append("session.n_pairs: required field is missing")
    if problems:
        raise ConfigError(problems)
    pair_a = _parse_amplitude(data.get("pair_a", _SQRT2_INV), "session.pair_a")
    pair_b = _parse_amplitude(data.get("pair_b", _SQRT2_INV), "session.pair_b")
    message_bits = data.get("message_bits")
    return SessionConfig(
        n_pairs=data["n_pairs"],
        pair_params=PairParams(a=pair_a, b=pair_b),
        n_decoys=data.get("n_decoys"),
        error_threshold=data.get("error_threshold", 0.05),
        message_bits=tuple(message_bits) if message_bits is not None else None,
    )


def _parse_channel(data: Mapping[str, Any]) -> ChannelModel:
    known = {"loss_prob", "eve_lossless_forwarding"}
    problems = [f"channel.{key}: unknown field" for key in data if key not in known]
    if problems:
        raise ConfigError(problems)
    return ChannelModel(
        loss_prob=data.get("loss_prob", 0.0),
        eve_lossless_forwarding=bool(data.get("eve_lossless_forwarding", True)),
    )


# --- seeds and analytics ---


def derive_session_seed(base_seed: int, session_index: int) -> int:
    """Collapse (seed, index) to one 64-bit seed via numpy's SeedSequence."""
    return int(np.random.SeedSequence([base_seed, session_index]).generate_state(1, np.uint64)[0])


def detection_probability(n_checked: int, per_decoy_error: float, threshold: float) -> float:
    """P(observed error rate > threshold) for n i.i.d. checked decoys.

    The abort comparison is strict, so k errors abort iff k > threshold * n.
    """
    if n_checked <= 0:
        return 0.0
    k_min = int(math.floor(threshold * n_checked + 1e-9)) + 1
    if k_min > n_checked:
        return 0.0
    return float(stats.binom.sf(k_min - 1, n_checked, per_decoy_error))


@dataclass(frozen=True)
class AnalyticPredictions:
    """Closed-form counterparts of the empirical aggregates.

    `expected_detection` is only defined on a lossless channel (with loss the
    checked-decoy count is itself random); it is None otherwise.
    """

    z_error: float
    x_error: float
    per_decoy_error: float
    expected_detection: float | None


def analytic_predictions(config: RunConfig) -> AnalyticPredictions:
    rates: ErrorRates = attack_error_rates(config.attack)
    per_decoy = (rates.z_error + rates.x_error) / 2.0
    expected = None
    if config.channel.loss_prob == 0.0 and (config.session.n_decoys or 0) > 0:
        expected = detection_probability(
            config.session.n_decoys or 0, per_decoy, config.session.error_threshold
        )
    return AnalyticPredictions(
        z_error=rates.z_error,
        x_error=rates.x_error,
        per_decoy_error=per_decoy,
        expected_detection=expected,
    )


# --- batch execution and aggregation ---


@dataclass
class AggregateReport:
    """Aggregated statistics of one batch of independent sessions."""

    schema_version: int
    generated_at: str
    config: dict[str, Any]
    rng_seed: int
    n_sessions: int
    abort_rate: float
    mean_decoy_error_rate: float
    message_bit_error_rate: float | None
    delivered_fraction: float
    analytic_predictions: AnalyticPredictions

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["analytic_predictions"] = asdict(self.analytic_predictions)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def resolve_report_path(path: str) -> str:
    """Relative report paths land in $QSDC_SIM_REPORT_DIR when it is set."""
    base = os.environ.get(REPORT_DIR_ENV)
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def write_report(payload: Mapping[str, Any], path: str) -> str:
    resolved = resolve_report_path(path)
    parent = os.path.dirname(resolved)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(resolved, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return resolved


def run_batch(config: RunConfig, write: bool = True) -> AggregateReport:
    """Run n_sessions independent sessions and aggregate their reports.

    Sessions are indexed; session i uses the seed derived from
    (rng_seed, i), so results do not depend on execution order. The report
    is written to config.report_path unless `write` is False or the path is
    None.
    """
    session_reports: list[SessionReport] = []
    for index in range(config.n_sessions):
        session_config = replace(
            config.session, rng_seed=derive_session_seed(config.rng_seed, index)
        )
        session_reports.append(run_session(session_config, config.channel, config.attack))
    report = aggregate(config, session_reports)
    if write and config.report_path:
        write_report(report.to_dict(), config.report_path)
    return report


def aggregate(config: RunConfig, session_reports: Sequence[SessionReport]) -> AggregateReport:
    n = len(session_reports)
    aborts = sum(r.aborted for r in session_reports)
    mean_rate = float(np.mean([r.decoy_error_rate for r in session_reports]))
    delivered = sum(sum(r.delivered_mask) for r in session_reports)
    total_pairs = sum(len(r.delivered_mask) for r in session_reports)
    bit_errors = 0
    bits_compared = 0
    for r in session_reports:
        if r.aborted:
            continue
        for pair_index, bit in r.decoded_bits.items():
            bits_compared += 1
            bit_errors += int(bit != r.message_bits[pair_index - 1])
    return AggregateReport(
        schema_version=SCHEMA_VERSION,
        generated_at=datetime.now(timezone.utc).isoformat(),
        config=config.to_dict(),
        rng_seed=config.rng_seed,
        n_sessions=n,
        abort_rate=aborts / n,
        mean_decoy_error_rate=mean_rate,
        message_bit_error_rate=(bit_errors / bits_compared) if bits_compared else None,
        delivered_fraction=(delivered / total_pairs) if total_pairs else 0.0,
        analytic_predictions=analytic_predictions(config),
    )


# --- parameter sweeps ---


def parse_override_value(text: str) -> Any:
    """CLI override values are JSON when they parse, raw strings otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: Mapping[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    """Deep-copy `data` and set each dotted key, creating objects as needed."""
    out = copy.deepcopy(dict(data))
    for dotted, value in overrides.items():
        node: dict[str, Any] = out
        parts = dotted.split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = value
    return out


def sweep(
    base: Mapping[str, Any] | RunConfig,
    axes: Mapping[str, Sequence[Any]],
    report_path: str | None = None,
) -> list[AggregateReport]:
    """Run one batch per point of the Cartesian grid spanned by `axes`.

    Axis keys are dotted config paths (e.g. "attack.beta_sq"); every point
    reuses the base rng_seed so points differ only in the swept parameters.
    When `report_path` is given, a sweep document with every report and a
    flat summary table is written there.
    """
    base_dict = base.to_dict() if isinstance(base, RunConfig) else dict(base)
    base_dict.pop("sweep", None)
    base_dict["report_path"] = None
    if not axes:
        raise ConfigError(["sweep: at least one axis is required"])
    for key, values in axes.items():
        if not isinstance(values, Sequence) or isinstance(values, (str, bytes)) or not values:
            raise ConfigError([f"sweep.{key}: expected a non-empty list of values"])

    keys = list(axes.keys())
    grids: list[dict[str, Any]] = [{}]
    for key in keys:
        grids = [dict(g, **{key: value}) for g in grids for value in axes[key]]

    reports: list[AggregateReport] = []
    points: list[dict[str, Any]] = []
    summary: list[dict[str, Any]] = []
    for overrides in grids:
        point_config = RunConfig.from_dict(apply_overrides(base_dict, overrides))
        report = run_batch(point_config, write=False)
        reports.append(report)
        points.append({"overrides": overrides, "report": report.to_dict()})
        summary.append(
            {
                "overrides": overrides,
                "abort_rate": report.abort_rate,
                "mean_decoy_error_rate": report.mean_decoy_error_rate,
                "message_bit_error_rate": report.message_bit_error_rate,
                "delivered_fraction": report.delivered_fraction,
                "predicted_z_error": report.analytic_predictions.z_error,
                "predicted_x_error": report.analytic_predictions.x_error,
            }
        )
    if report_path:
        document = {
            "schema_version": SCHEMA_VERSION,
            "generated_at": datetime.now(timezone.utc).isoformat(),
            "base_config": base_dict,
            "axes": {k: list(v) for k, v in axes.items()},
            "summary": summary,
            "points": points,
        }
        write_report(document, report_path)
    return reports
