"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid system or experiment configuration."""


class NumericError(ArithmeticError):
    """A numerical routine diverged, overflowed or failed to converge."""


class MultichainError(RuntimeError):
    """The policy-induced chain has more than one recurrent class."""


class DegenerateChainError(RuntimeError):
    """The only recurrent class is a single absorbing state.

    The long-run reward is still well defined and is carried on ``reward``.
    """

    def __init__(self, message: str, reward: float):
        super().__init__(message)
        self.reward = reward
