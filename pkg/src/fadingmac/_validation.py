"""Input validation helpers shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ContractError, DomainError
from .fading import FadingLaw


def check_laws(laws, n_users=None):
    """Return a list of laws, broadcasting a single law to ``n_users``."""
    if isinstance(laws, FadingLaw):
        if n_users is None:
            return [laws]
        return [laws] * int(n_users)
    laws = list(laws)
    if not laws or not all(isinstance(law, FadingLaw) for law in laws):
        raise ContractError("expected a FadingLaw or a nonempty sequence of them")
    if n_users is not None and len(laws) != n_users:
        if len(laws) == 1:
            return laws * int(n_users)
        raise ContractError(f"got {len(laws)} laws for {n_users} users")
    return laws


def check_budgets(budgets):
    budgets = np.asarray(budgets, dtype=float).ravel()
    if budgets.size == 0:
        raise ContractError("budgets must be nonempty")
    if np.any(~np.isfinite(budgets)) or np.any(budgets < 0):
        raise DomainError("budgets must be finite and nonnegative")
    return budgets


def check_budget(budget):
    budget = float(budget)
    if not np.isfinite(budget) or budget < 0:
        raise DomainError(f"budget must be finite and nonnegative, got {budget}")
    return budget


def check_n_users(n_users):
    if int(n_users) != n_users or n_users < 1:
        raise DomainError(f"user count must be a positive integer, got {n_users}")
    return int(n_users)


def check_gains(gains, n_users):
    """Validate a ``(n_blocks, n_users)`` gain matrix."""
    gains = check_array(gains, ensure_2d=False, dtype=float)
    gains = np.atleast_2d(gains)
    if gains.shape[1] != n_users:
        raise ContractError(f"gain matrix has {gains.shape[1]} columns, strategy has {n_users} users")
    if np.any(gains < 0):
        raise DomainError("gains must be nonnegative")
    return gains


def check_block_index(block_index, n_blocks):
    if block_index is None:
        return np.arange(n_blocks)
    block_index = np.asarray(block_index, dtype=np.int64).ravel()
    if block_index.size != n_blocks:
        raise ContractError("block_index length must match the number of blocks")
    return block_index
