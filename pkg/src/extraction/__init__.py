# String Extraction Module for SecretSieve

from .string_extractor import (
    Origin, StringGroup, StringOccurrence, build_string_groups, dump_occurrences_csv,
    extract_occurrences, method_strings,
)

__all__ = [
    'Origin', 'StringGroup', 'StringOccurrence', 'build_string_groups',
    'dump_occurrences_csv', 'extract_occurrences', 'method_strings',
]
