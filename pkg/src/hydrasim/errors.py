"""Exception hierarchy shared by the protocol and numerics modules."""


class HydraError(Exception):
    pass


class InvalidBlock(HydraError):
    """Structural problem with a block presented to the ledger."""


class UnknownParent(InvalidBlock):
    pass


class LabelMismatch(InvalidBlock):
    pass


class MerkleMismatch(InvalidBlock):
    pass


class HeightMismatch(InvalidBlock):
    pass


class InvalidTransactions(InvalidBlock):
    """Block body fails strict validity against the branch it extends."""


class ProtocolViolation(HydraError):
    pass


class NegativeBalance(ProtocolViolation):
    def __init__(self, account, balance, height):
        super().__init__(f"account {account} would drop to {balance} at height {height}")
        self.account = account
        self.balance = balance
        self.height = height


class DeepReorg(ProtocolViolation):
    def __init__(self, chain, fork_height, tree_height):
        super().__init__(
            f"reorg on chain {chain} forks at height {fork_height}, "
            f"at or below account tree height {tree_height}"
        )
        self.chain = chain
        self.fork_height = fork_height
        self.tree_height = tree_height


class Exhausted(HydraError):
    """Nonce search bound reached without meeting the target."""


class ConvergenceFailure(HydraError):
    pass


class DegenerateConditioning(HydraError):
    """P[honest >= w] underflowed; the integrand point carries no mass."""
