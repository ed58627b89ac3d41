"""Synthetic flow corpora with planted attack structure.

Six CICDDoS2019-style columns are drawn independently of the label and
each flow is then labelled by a fixed rule over them:

* inbound flows whose source port is a reflection service port are attacks;
* flows whose average backward segment size is extreme (tiny or large) are
  attacks; the extremes are placed symmetrically about the benign range so
  the two classes share a mean and differ only in spread;
* flows towards a low destination port whose URG flag disagrees with the
  direction bit are attacks, unless ``min_seg_size_forward`` is 20 or more.

Reflection is a threshold effect, the segment-size rule is non-monotone and
the URG rule is a parity interaction, so linear, additive and
interaction-capable learners separate cleanly. Sixteen further columns are
noisy copies of planted columns (flow features are heavily redundant in
practice) and the rest are pure Gaussian noise.
"""
from __future__ import annotations

import numpy as np

from .dataset import CICDDOS2019_ATTACKS, DEFAULT_BENIGN_TOKEN, FlowTable

PLANTED_FEATURES = ("Inbound", "URG Flag Count", "Destination Port", "Source Port", "Avg Bwd Segment Size",
                    "min_seg_size_forward")

EXTRA_FEATURES = (
    "Bwd Packet Length Max", "Flow Duration", "Fwd Header Length", "Total Fwd Packets", "Fwd PSH Flags",
    "ACK Flag Count", "Bwd Packet Length Min", "Flow IAT Mean", "Bwd Header Length",
    "Total Backward Packets", "Protocol", "Init_Win_bytes_forward", "Packet Length Mean", "Flow IAT Std",
    "Fwd Packet Length Min", "Total Length of Fwd Packets", "Fwd Packet Length Max",
    "Fwd Packet Length Mean", "Fwd Packet Length Std", "Flow Bytes/s", "Flow Packets/s", "Fwd IAT Total",
    "Bwd IAT Mean", "Packet Length Variance",
)
N_PROXIES = 16
PROXY_NOISE = 0.5
# planted column copied by each proxy, cycling
_PROXY_BASIS = (4, 3, 5, 2, 0, 1)

REFLECTION_PORTS = {53: "DrDoS_DNS", 123: "DrDoS_NTP", 389: "DrDoS_LDAP", 1900: "DrDoS_SSDP",
                    1434: "DrDoS_MSSQL", 137: "DrDoS_NetBIOS", 69: "TDTP"}
SERVICE_PORTS = np.array([80, 443, 22, 25, 8080, 3389, 445])
EPHEMERAL_LOW, EPHEMERAL_HIGH = 32768, 61000
BWD_LOW, BWD_HIGH, BWD_MAX = 40.0, 1400.0, 1440.0
SEG_EXEMPT = 20


def planted_rule(inbound, urg, dst_port, src_port, avg_bwd, min_seg) -> np.ndarray:
    """Ground-truth attack label (0/1) of the planted corpus."""
    reflect = (inbound == 1) & np.isin(src_port, list(REFLECTION_PORTS))
    extreme = (avg_bwd < BWD_LOW) | (avg_bwd > BWD_HIGH)
    flood = (urg != inbound) & (dst_port < 1024) & (min_seg < SEG_EXEMPT)
    return (reflect | extreme | flood).astype(np.int64)


def _ports(rng, n, reflect_p):
    reflect = rng.random(n) < reflect_p
    ports = rng.integers(EPHEMERAL_LOW, EPHEMERAL_HIGH, size=n)
    ports[reflect] = rng.choice(np.array(list(REFLECTION_PORTS)), size=int(reflect.sum()))
    return ports.astype(np.float64)


def planted_corpus(n_rows: int = 50_000, seed: int = 42, n_extra: int = len(EXTRA_FEATURES)) -> FlowTable:
    """Flow table of ``n_rows`` rows: the six planted columns then ``n_extra`` more."""
    rng = np.random.default_rng([seed, 0xF10])
    n = n_rows
    inbound = (rng.random(n) < 0.5).astype(np.float64)
    urg = (rng.random(n) < 0.2).astype(np.float64)
    dst = np.where(rng.random(n) < 0.5, rng.choice(SERVICE_PORTS, size=n),
                   rng.integers(EPHEMERAL_LOW, EPHEMERAL_HIGH, size=n)).astype(np.float64)
    src = _ports(rng, n, 0.45)
    part = rng.random(n)
    avg_bwd = np.where(part < 0.2, rng.uniform(0.0, BWD_LOW, n),
                       np.where(part < 0.8, rng.uniform(BWD_LOW, BWD_HIGH, n), rng.uniform(BWD_HIGH, BWD_MAX, n)))
    avg_bwd = np.round(avg_bwd, 2)
    min_seg = rng.choice(np.array([0.0, 8.0, 20.0, 32.0]), size=n, p=[0.4, 0.2, 0.25, 0.15])
    y = planted_rule(inbound, urg, dst, src, avg_bwd, min_seg)

    cols = [inbound, urg, dst, src, avg_bwd, min_seg]
    extra = []
    for j in range(n_extra):
        if j < N_PROXIES:
            c = cols[_PROXY_BASIS[j % len(_PROXY_BASIS)]]
            extra.append(c + rng.normal(0.0, c.std() * PROXY_NOISE, n))
        else:
            extra.append(rng.normal(100.0, 15.0, n))
    names = list(PLANTED_FEATURES) + list(EXTRA_FEATURES[:n_extra])
    X = np.column_stack(cols + extra)

    raw = np.full(n, DEFAULT_BENIGN_TOKEN, dtype=object)
    reflect = (inbound == 1) & np.isin(src, list(REFLECTION_PORTS))
    for port, label in REFLECTION_PORTS.items():
        raw[reflect & (src == port)] = label
    other = (y == 1) & ~reflect
    raw[other & (avg_bwd < BWD_LOW)] = "Syn"
    raw[other & (avg_bwd > BWD_HIGH)] = "UDP-lag"
    raw[other & (avg_bwd >= BWD_LOW) & (avg_bwd <= BWD_HIGH)] = "DrDoS_UDP"
    assert set(raw[y == 1]) <= set(CICDDOS2019_ATTACKS)
    return FlowTable.from_arrays(X, y, names, raw_labels=raw)


def single_feature_fixture(n_rows: int = 1000, n_features: int = 10, informative: int = 3, seed: int = 0,
                           logistic_scale: float = 2.0) -> FlowTable:
    """Gaussian features; the label depends on column ``informative`` only.

    ``P(y=1 | x) = sigmoid(logistic_scale * x[informative])``, so the
    logistic model is identifiable (no separation).
    """
    rng = np.random.default_rng([seed, 0x51])
    X = rng.standard_normal((n_rows, n_features))
    p = 1.0 / (1.0 + np.exp(-logistic_scale * X[:, informative]))
    y = (rng.random(n_rows) < p).astype(np.int64)
    return FlowTable.from_arrays(X, y, [f"f{j}" for j in range(n_features)])
