"""Exception taxonomy shared across the engine."""


class EgretError(Exception):
    """Base class for engine errors."""


class ConfigurationError(EgretError):
    """Inconsistent truncation orders, dimensions or flags."""


class OrderError(EgretError):
    """An operation was asked for more orders than an object carries."""


class UnsupportedKernelError(EgretError):
    """Kernel family or derivative order outside the shipped catalog."""


class QuadratureBudgetError(EgretError):
    """Adaptive refinement hit its budget before reaching the tolerance."""


class ExtensionError(EgretError):
    """An extension routine refused its input (wrong singular order etc.)."""


class UnresolvedRenormalizationError(EgretError):
    """A kernel with nonnegative singular order has no counterterm policy."""


class NotInvertibleError(EgretError):
    """Series inversion asked for an element without constant term 1."""


class ScenarioError(EgretError):
    """Malformed scenario file or unknown check name."""
