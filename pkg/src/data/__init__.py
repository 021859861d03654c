"""Data module for point-treatment observations and nuisance fits."""

from .models import Dataset, NuisanceFits, OutcomeScale, unscale_estimate
from .dataset_loader import CsvSchema, DatasetLoader

__all__ = [
    'Dataset', 'NuisanceFits', 'OutcomeScale', 'unscale_estimate',
    'CsvSchema', 'DatasetLoader'
]
