"""Flow-record DDoS detection: ingestion, rebalancing, feature selection,
classical classifiers, evaluation, interpretability and a firewall
pre-filter simulator."""

__version__ = "0.1.0"
