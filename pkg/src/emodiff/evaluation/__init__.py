"""Metrics, corpus splits and report writers. Protocol runners live in ``emodiff.evaluation.protocols``."""
from .metrics import confusion, mad, mad_table, recalls, uar
from .reports import format_mad_table, format_reports_table, write_mad_csv, write_reports
from .splits import (
    adaptation_split,
    cross_corpus_split,
    development_split,
    loso_folds,
    loso_split,
    speakers,
    take_percentage,
)

__all__ = [
    'confusion',
    'mad',
    'mad_table',
    'recalls',
    'uar',
    'format_mad_table',
    'format_reports_table',
    'write_mad_csv',
    'write_reports',
    'adaptation_split',
    'cross_corpus_split',
    'development_split',
    'loso_folds',
    'loso_split',
    'speakers',
    'take_percentage',
]
