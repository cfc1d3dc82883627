"""
Error types for SecretSieve
Exception hierarchy shared by the IR parser, detectors, learners and engine
"""

from enum import Enum
from typing import Optional


class ErrorType(Enum):
    """Classification of per-app failures recorded in scan reports"""
    PARSE_ERROR = "parse_error"
    ANALYSIS_ERROR = "analysis_error"
    IO_ERROR = "io_error"
    UNKNOWN_ERROR = "unknown_error"


class SecretSieveError(Exception):
    """Base class for every error raised by SecretSieve"""
    error_type = ErrorType.UNKNOWN_ERROR


class FileSyntaxError(SecretSieveError):
    """A class or method header in an IR file is malformed"""
    error_type = ErrorType.PARSE_ERROR

    def __init__(self, path: str, line: int, message: str = "malformed header"):
        self.path = path
        self.line = line
        self.message = message
        super().__init__(f"{path}:{line}: {message}")


class IndexOutOfRangeError(SecretSieveError, IndexError):
    """Statement index outside a method body"""
    error_type = ErrorType.ANALYSIS_ERROR


class RuleCompileError(SecretSieveError):
    """A detection rule pattern does not compile"""

    def __init__(self, provider: str, pattern: str, reason: str):
        self.provider = provider
        self.pattern = pattern
        super().__init__(f"rule for {provider!r} does not compile ({reason}): {pattern}")


class EmptyStringError(SecretSieveError, ValueError):
    """Operation needs a non-empty string"""


class ZeroVectorError(SecretSieveError, ValueError):
    """Cosine similarity of a zero vector is undefined"""


class EmptyGroupError(SecretSieveError, ValueError):
    """String group has no content after preprocessing"""


class EmptyWindowError(SecretSieveError, ValueError):
    """Context window has no statements"""


class FeatureMismatchError(SecretSieveError, ValueError):
    """Feature vectors or models with different scheme/variant were combined"""


class UnknownTermError(SecretSieveError, KeyError):
    """Term never seen in the fitted dataset"""


class DegenerateDatasetError(SecretSieveError, ValueError):
    """Dataset cannot train a binary classifier"""


class InvalidSpecError(SecretSieveError, ValueError):
    """Corpus generator spec is invalid"""


class UnknownFormatError(SecretSieveError, ValueError):
    """Report format is not one of json, csv, table"""


class ConfigError(SecretSieveError):
    """Scan configuration is invalid or references missing files"""


class CorpusUnreadableError(SecretSieveError):
    """Corpus directory is missing or cannot be listed"""
    error_type = ErrorType.IO_ERROR


def classify_error(error: Exception) -> ErrorType:
    """Map an exception to the ErrorType recorded in reports"""
    if isinstance(error, SecretSieveError):
        return error.error_type
    if isinstance(error, (OSError, UnicodeDecodeError)):
        return ErrorType.IO_ERROR
    return ErrorType.UNKNOWN_ERROR


def describe_error(error: Exception, context: Optional[str] = None) -> str:
    """Render an exception for logs and report entries"""
    text = f"{type(error).__name__}: {error}"
    return f"{context}: {text}" if context else text
