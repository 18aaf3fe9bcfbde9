"""Desk-scale synthetic Netflow-like data.

Flows come from traffic profiles (a protocol/service pair). Each profile owns
a handful of flow templates, and most flows repeat a template exactly, the
way real Netflow exports are dominated by near-identical connections; a
fraction of flows jitter a few counters. Each malicious profile imitates a
benign one with several counters shifted, and some malicious flows copy a
benign template verbatim, which caps the reachable malicious accuracy.

``TTL_max`` is drawn from {62, 63, 64} independently of the class;
``TTL_min`` equals ``TTL_max`` or sits one below it, never leaving 62..64.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .table import FeatureSpec, FlowTable, Schema

NUMERIC_FEATURES = (
    "FLOW_DURATION_MS", "IN_PKTS", "OUT_PKTS", "IN_BYTES", "OUT_BYTES",
    "MIN_PKT_LEN", "MAX_PKT_LEN", "TCP_FLAGS", "CLIENT_TCP_FLAGS", "SERVER_TCP_FLAGS",
    "RETRANS_IN_PKTS", "RETRANS_OUT_PKTS", "SRC_TO_DST_THROUGHPUT", "DST_TO_SRC_THROUGHPUT",
    "PKTS_UP_TO_128", "PKTS_128_TO_256", "PKTS_256_TO_512", "PKTS_512_TO_1024",
    "TCP_WIN_MAX_IN", "TCP_WIN_MAX_OUT",
)
TTL_FEATURES = ("TTL_max", "TTL_min")
PROTOCOLS = ("icmp", "tcp", "udp")
SERVICES = ("dns", "http", "https", "ldap", "ntp", "smb", "smtp", "ssh")

# (protocol, service) per benign profile, with relative frequency
BENIGN_PROFILES = (
    ("udp", "dns", 0.22), ("tcp", "https", 0.25), ("tcp", "http", 0.12), ("udp", "ntp", 0.06),
    ("tcp", "smtp", 0.08), ("tcp", "ssh", 0.07), ("tcp", "ldap", 0.10), ("tcp", "smb", 0.10),
)
# malicious profile -> index of the benign profile it imitates
MALICIOUS_COVERS = (1, 5, 2, 0)

TTL_VALUES = (62, 63, 64)
TTL_PROBS = (0.06, 0.51, 0.43)


def default_schema() -> Schema:
    feats = [FeatureSpec(n, "numeric") for n in NUMERIC_FEATURES]
    feats += [FeatureSpec(n, "numeric", range=(62, 64)) for n in TTL_FEATURES]
    feats += [FeatureSpec("PROTOCOL", "categorical", categories=PROTOCOLS),
              FeatureSpec("SERVICE", "categorical", categories=SERVICES)]
    return Schema(tuple(feats))


@dataclass(frozen=True)
class SynthConfig:
    n_rows: int = 20_000
    malicious_fraction: float = 0.03
    templates_per_profile: int = 6
    template_skew: float = 1.5
    template_spread: float = 0.2
    counter_max: float = 50.0
    jitter_prob: float = 0.3
    jitter: float = 0.15
    n_shifted_features: int = 6
    malicious_shift: float = 2.4
    camouflage: float = 0.08
    seed: int = 0

    def __post_init__(self):
        if self.n_rows < 2:
            raise ValueError("n_rows must be >= 2")
        if not 0.0 < self.malicious_fraction < 1.0:
            raise ValueError("malicious_fraction must lie in (0, 1)")
        if self.templates_per_profile < 1:
            raise ValueError("templates_per_profile must be >= 1")
        if not 0 < self.n_shifted_features <= len(NUMERIC_FEATURES):
            raise ValueError("n_shifted_features out of range")
        for name in ("jitter_prob", "camouflage"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


def _zipf_weights(k: int, skew: float) -> np.ndarray:
    w = np.arange(1, k + 1) ** -skew
    return w / w.sum()


def synth_generate(config: SynthConfig = SynthConfig()) -> FlowTable:
    rng = np.random.default_rng(config.seed)
    n = config.n_rows
    n_mal = int(round(n * config.malicious_fraction))
    n_ben = n - n_mal
    n_feat = len(NUMERIC_FEATURES)
    k = config.templates_per_profile

    # profile centre per counter, log-uniform over 1..counter_max; templates scatter around it
    centres = np.exp(rng.uniform(0.0, np.log(config.counter_max), size=(len(BENIGN_PROFILES), n_feat)))
    templates = centres[:, None, :] * np.exp(config.template_spread * rng.standard_normal((len(BENIGN_PROFILES), k, n_feat)))

    mal_templates = []
    for cover in MALICIOUS_COVERS:
        shifted = rng.choice(n_feat, size=config.n_shifted_features, replace=False)
        direction = rng.choice((-1.0, 1.0), size=shifted.size)
        t = templates[cover].copy()
        t[:, shifted] *= np.exp(direction * config.malicious_shift)
        mal_templates.append(t)
    mal_templates = np.array(mal_templates)

    weights = np.array([p[2] for p in BENIGN_PROFILES])
    ben_profile = rng.choice(len(BENIGN_PROFILES), size=n_ben, p=weights / weights.sum())
    mal_profile = rng.choice(len(MALICIOUS_COVERS), size=n_mal)
    tw = _zipf_weights(k, config.template_skew)
    ben_tpl = rng.choice(k, size=n_ben, p=tw)
    mal_tpl = rng.choice(k, size=n_mal, p=tw)
    camo = rng.random(n_mal) < config.camouflage

    covers = np.array(MALICIOUS_COVERS)[mal_profile]
    mal_values = np.where(camo[:, None], templates[covers, mal_tpl], mal_templates[mal_profile, mal_tpl])
    values = np.vstack([templates[ben_profile, ben_tpl], mal_values])
    jittered = (rng.random(n) < config.jitter_prob)[:, None] & (rng.random(values.shape) < 0.25)
    values = np.where(jittered, values * np.exp(config.jitter * rng.standard_normal(values.shape)), values)
    values = np.rint(values)

    proto = np.array([BENIGN_PROFILES[p][0] for p in ben_profile]
                     + [BENIGN_PROFILES[c][0] for c in covers], dtype=object)
    service = np.array([BENIGN_PROFILES[p][1] for p in ben_profile]
                       + [BENIGN_PROFILES[c][1] for c in covers], dtype=object)
    labels = np.concatenate([np.zeros(n_ben, dtype=np.int64), np.ones(n_mal, dtype=np.int64)])

    ttl_max = rng.choice(TTL_VALUES, size=n, p=TTL_PROBS).astype(np.float64)
    drop = (rng.random(n) < 0.1) & (ttl_max > TTL_VALUES[0])
    ttl_min = ttl_max - drop

    order = rng.permutation(n)
    raw = {name: values[order, j] for j, name in enumerate(NUMERIC_FEATURES)}
    raw["TTL_max"] = ttl_max[order]
    raw["TTL_min"] = ttl_min[order]
    raw["PROTOCOL"] = proto[order]
    raw["SERVICE"] = service[order]
    return FlowTable(default_schema(), raw, labels[order], np.arange(n, dtype=np.int64))
