"""Exception hierarchy shared across the package.

Three families map onto CLI exit codes: ConfigError -> 2,
ProviderFailure -> 3, DataError -> 4.
"""


class SvllmError(Exception):
    pass


class ConfigError(SvllmError):
    """Invalid configuration or misuse of an API contract."""


class DataError(SvllmError):
    """Invalid, inconsistent, or insufficient data."""


class ProviderFailure(SvllmError):
    """An external provider (or its fixture/gateway stand-in) failed."""


# --- data errors -------------------------------------------------------

class EmptyInput(DataError):
    pass


class DuplicateId(DataError):
    pass


class NonFinite(DataError):
    pass


class TooFewValues(DataError):
    pass


class LengthMismatch(DataError):
    pass


class ZeroVariance(DataError):
    pass


class MissingScale(DataError):
    pass


class EmptyTraining(DataError):
    pass


class KTooLarge(DataError):
    pass


class TooFewSamples(DataError):
    pass


class DegenerateFeatures(DataError):
    pass


class SchemaError(DataError):
    pass


class UnknownSampleId(DataError):
    pass


class ParseError(DataError):
    pass


# --- config errors -----------------------------------------------------

class InvalidFractions(ConfigError):
    pass


class CotDisabled(ConfigError):
    pass


class InvalidSpec(ConfigError):
    pass


# --- provider errors ---------------------------------------------------

class ProviderError(ProviderFailure):
    pass


class FixtureMiss(ProviderFailure):
    pass


class GatewayError(ProviderFailure):
    pass
