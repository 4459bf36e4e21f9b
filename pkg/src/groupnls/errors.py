"""Exception hierarchy shared by all modules."""


class GroupNLSError(Exception):
    """Base class for every error raised by this package."""


# symmetry
class GroupError(GroupNLSError):
    pass


class DimensionMismatch(GroupError):
    pass


class NotClosed(GroupError):
    pass


class AssumptionAViolated(GroupError):
    pass


class MissingIdentity(GroupError):
    pass


class NotASubgroup(GroupError):
    pass


class GroupTooLarge(GroupError):
    pass


class NonGridCompatibleMatrix(GroupError):
    pass


# fields
class FieldError(GroupNLSError):
    pass


class OffLatticeTranslation(FieldError):
    pass


class NotDecayedAtBoundary(FieldError):
    pass


class InvalidParameters(FieldError):
    pass


class SnapshotFormatError(FieldError):
    pass


# functionals
class UnresolvedAfterScaling(FieldError):
    pass


class ZeroField(FieldError):
    pass


class ZeroPotentialTerm(FieldError):
    pass


class ZeroMass(FieldError):
    pass


class OffLatticeFrequency(FieldError):
    pass


# ground state
class WrongDimension(GroupNLSError):
    pass


class BracketNotFound(GroupNLSError):
    pass


class NoConvergence(GroupNLSError):
    pass


class CollapseToZero(GroupNLSError):
    pass


class NoDescent(GroupNLSError):
    pass


# thresholds
class MissingThreshold(GroupNLSError):
    pass


class NotGroupInvariant(GroupNLSError):
    pass


# evolution
class NonFinite(GroupNLSError):
    pass


class TooFewSamples(GroupNLSError):
    pass


# experiments
class RecipeInvalid(GroupNLSError):
    pass
