"""Contact-tracing exposure notification with per-user DH rerandomization."""

from .group import LARGE, TOY, CountingGroup, SchnorrGroup, get_group
from .protocol import (
    BroadcastToken,
    KeyPair,
    RerandToken,
    is_honest_form,
    keygen,
    make_token,
    risk_check,
    shuff,
    validate_token,
)

__all__ = [
    "LARGE", "TOY", "CountingGroup", "SchnorrGroup", "get_group",
    "BroadcastToken", "KeyPair", "RerandToken", "is_honest_form", "keygen",
    "make_token", "risk_check", "shuff", "validate_token",
]
