"""Security of the two-way LM05 protocol and BB84 against PNS attacks."""

from .adversary import BlockPlacement, EveKind, EveStrategy
from .analytics import (
    ConstantQber,
    DarkCountQber,
    GainReport,
    Protocol,
    QberTally,
    evaluate,
    max_secure_distance,
    optimize_mu,
    qber_estimate,
    secure_gain,
    security_margin,
)
from .engine import SessionConfig, SessionStats, empirical_gain, merge, run_session
from .source import LinkParams, Pulse

__version__ = "0.1.0"

__all__ = [
    "BlockPlacement",
    "ConstantQber",
    "DarkCountQber",
    "EveKind",
    "EveStrategy",
    "GainReport",
    "LinkParams",
    "Protocol",
    "Pulse",
    "QberTally",
    "SessionConfig",
    "SessionStats",
    "empirical_gain",
    "evaluate",
    "max_secure_distance",
    "merge",
    "optimize_mu",
    "qber_estimate",
    "run_session",
    "secure_gain",
    "security_margin",
]
