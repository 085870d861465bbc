"""Multi-chain proof-of-work ledger simulator and double-spend probability engine."""

from .analytics import AttackParams, NumericsConfig, attack_probability, attack_probability_composed
from .accounts import AccountTree, HydraState
from .ledger import ChainSet, ReorgEvent
from .types import Block, BlockHeader, Transaction

__all__ = [
    "AccountTree", "AttackParams", "Block", "BlockHeader", "ChainSet", "HydraState",
    "NumericsConfig", "ReorgEvent", "Transaction", "attack_probability", "attack_probability_composed",
]
