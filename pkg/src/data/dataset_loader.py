"""
Dataset loader for point-treatment CSV files.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..exceptions import SchemaError, ValidationError
from .models import Bounds, Dataset, NuisanceFits, OutcomeScale

logger = logging.getLogger(__name__)

NUISANCE_COLUMNS = ('qbar0', 'qbar1', 'g1')


@dataclass(frozen=True)
class CsvSchema:
    """
    Column mapping for a point-treatment CSV file.

    Attributes:
        treatment: Name of the binary treatment column
        outcome: Name of the outcome column
        covariates: Covariate columns; None means every other numeric column
        nuisance: Names of the optional Q(0,W), Q(1,W), g(1|W) columns
        outcome_range: Declared outcome range; None scales by sample min/max
    """

    treatment: str = 'A'
    outcome: str = 'Y'
    covariates: Optional[Tuple[str, ...]] = None
    nuisance: Tuple[str, str, str] = NUISANCE_COLUMNS
    outcome_range: Optional[Bounds] = None


class DatasetLoader:
    """Utility class for loading and saving point-treatment datasets."""

    @staticmethod
    def load_csv(filepath: Union[str, Path],
                 schema: Optional[CsvSchema] = None,
                 q_bounds: Bounds = (1e-5, 1 - 1e-5),
                 g_bounds: Bounds = (0.01, 0.99)) -> Tuple[Dataset, Optional[NuisanceFits]]:
        """
        Load a dataset (and optional nuisance predictions) from CSV.

        Args:
            filepath: Path to a comma-separated file with a header row
            schema: Column mapping (defaults to A, Y, all other numeric columns)
            q_bounds: Bounds applied to provided qbar0/qbar1 columns
            g_bounds: Bounds applied to a provided g1 column

        Returns:
            Tuple of (Dataset, NuisanceFits or None)
        """
        schema = schema or CsvSchema()
        path = Path(filepath)
        if not path.exists():
            raise FileNotFoundError(f"File not found: {filepath}")

        frame = pd.read_csv(path, sep=',', encoding='utf-8')

        missing = [c for c in (schema.treatment, schema.outcome) if c not in frame.columns]
        if missing:
            raise SchemaError(f"Missing required column(s): {', '.join(missing)}")

        present = [c for c in schema.nuisance if c in frame.columns]
        if present and len(present) != len(schema.nuisance):
            absent = [c for c in schema.nuisance if c not in frame.columns]
            raise SchemaError(
                f"Nuisance columns must be all present or all absent; missing: {', '.join(absent)}"
            )

        covariates = DatasetLoader._covariate_columns(frame, schema)

        used = [schema.treatment, schema.outcome, *covariates, *present]
        nulls = frame[used].isna().any(axis=1).to_numpy()
        if nulls.any():
            row = int(np.flatnonzero(nulls)[0])
            raise ValidationError(f"Missing value at row {row}; missing data is not imputed")

        numeric = {}
        for column in used:
            try:
                numeric[column] = pd.to_numeric(frame[column]).to_numpy(dtype=float)
            except (ValueError, TypeError):
                raise ValidationError(f"Column '{column}' is not numeric")

        raw_outcome = numeric[schema.outcome]
        scale = OutcomeScale.fit(raw_outcome, schema.outcome_range)

        data = Dataset(
            covariates=np.column_stack([numeric[c] for c in covariates]),
            treatment=numeric[schema.treatment],
            outcome=scale.scale(raw_outcome),
            outcome_scale=scale,
            covariate_names=tuple(covariates),
        )

        fits = None
        if present:
            q0_col, q1_col, g1_col = schema.nuisance
            fits = NuisanceFits(
                qbar0=numeric[q0_col],
                qbar1=numeric[q1_col],
                g1=numeric[g1_col],
                q_bounds=q_bounds,
                g_bounds=g_bounds,
            )
            if fits.clamped:
                logger.warning("Clamped %d provided nuisance values into bounds", fits.clamped)

        logger.info("Loaded %r from %s", data, path)
        return data, fits

    @staticmethod
    def _covariate_columns(frame: pd.DataFrame, schema: CsvSchema) -> Tuple[str, ...]:
        if schema.covariates is not None:
            missing = [c for c in schema.covariates if c not in frame.columns]
            if missing:
                raise SchemaError(f"Missing covariate column(s): {', '.join(missing)}")
            columns = tuple(schema.covariates)
        else:
            reserved = {schema.treatment, schema.outcome, *schema.nuisance}
            columns = tuple(
                c for c in frame.columns
                if c not in reserved and pd.api.types.is_numeric_dtype(frame[c])
            )
        if not columns:
            raise SchemaError("No covariate columns found")
        return columns

    @staticmethod
    def save_csv(data: Dataset, filepath: Union[str, Path],
                 fits: Optional[NuisanceFits] = None,
                 columns: Sequence[str] = ('A', 'Y')):
        """
        Save a dataset (outcome on its original scale) to CSV.

        Args:
            data: Dataset to write
            filepath: Destination path
            fits: Optional nuisance predictions written as qbar0, qbar1, g1
            columns: Names for the treatment and outcome columns
        """
        frame = pd.DataFrame(data.covariates, columns=list(data.covariate_names))
        frame[columns[0]] = data.treatment
        frame[columns[1]] = data.outcome_scale.unscale(data.outcome)
        if fits is not None:
            for name, values in zip(NUISANCE_COLUMNS, (fits.qbar0, fits.qbar1, fits.g1)):
                frame[name] = values
        frame.to_csv(filepath, index=False, float_format='%.17g')
