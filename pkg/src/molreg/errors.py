"""Exception hierarchy shared across the package."""


class MolregError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(MolregError):
    """Bad user input: unknown unit, malformed config, missing file."""


class MoleculeLoadError(ConfigurationError):
    """Molecular data file is missing a field or violates an invariant."""


class LabelingError(MolregError):
    """Adiabatic continuation hit an ambiguous (near-degenerate) matching."""


class ForbiddenTransitionError(MolregError):
    """Requested a pi-pulse on a transition with vanishing dipole."""


class UnresolvableTransitionError(MolregError):
    """Two transitions are exactly degenerate; no pulse duration resolves them."""


class UnresolvableGateError(MolregError):
    """An unwanted transition sits inside an active frequency cluster."""


class EncodingError(MolregError):
    """A logical encoding references a label absent from the coupled basis."""


class PropagationDivergedError(MolregError):
    """Norm error exceeded budget; the integration step is too coarse."""


class MonotonicityError(MolregError):
    """Optimal-control fidelity decreased beyond tolerance between iterations."""


class InconclusiveError(MolregError):
    """Deutsch-Jozsa readout landed in the indeterminate band."""
