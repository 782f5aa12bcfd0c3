"""
Content validation for score, annotation and manifest tables.
"""

from typing import Any, Dict, Iterable, List

import numpy as np
import pandas as pd

from .exceptions import ColumnNotFoundError, ValidationError

SPEAKING_LABELS = ("SPEAKING_AUDIBLE", "NOT_SPEAKING")

SCORE_RULES: Dict[str, Dict[str, Any]] = {
    "clip_id": {"required": True},
    "frame_index": {"required": True, "numeric": {"min": 0}},
    "score": {"required": True, "finite": True, "numeric": {"min": 0.0, "max": 1.0}},
}
LABEL_RULES: Dict[str, Dict[str, Any]] = {
    "label": {"required": True, "categorical": [0, 1]},
}
ANNOTATION_RULES: Dict[str, Dict[str, Any]] = {
    "clip_id": {"required": True},
    "frame_timestamp_s": {"required": True, "numeric": {"min": 0.0}},
    "label": {"required": True, "categorical": list(SPEAKING_LABELS)},
}
MANIFEST_RULES: Dict[str, Dict[str, Any]] = {
    "clip_id": {"required": True, "unique": True},
    "condition": {"required": True, "categorical": [1, 2, 3, 4, 5]},
    "n_frames": {"required": True, "numeric": {"min": 1}},
}


def validate_numeric(value: Any, min_val=None, max_val=None) -> bool:
    """
    Validate numeric value with optional range.

    Args:
        value: Value to validate
        min_val: Minimum allowed value
        max_val: Maximum allowed value

    Returns:
        True if valid numeric value
    """
    if pd.isna(value):
        return False
    try:
        num_val = float(value)
    except (ValueError, TypeError):
        return False
    if min_val is not None and num_val < min_val:
        return False
    if max_val is not None and num_val > max_val:
        return False
    return True


def validate_finite(series: pd.Series) -> pd.Series:
    values = pd.to_numeric(series, errors="coerce").to_numpy(dtype=np.float64)
    return pd.Series(np.isfinite(values), index=series.index)


def validate_categorical(series: pd.Series, allowed_values: List[Any]) -> bool:
    return set(series.dropna().unique()).issubset(set(allowed_values))


def validate_dataframe(df: pd.DataFrame, rules: Dict[str, Dict[str, Any]]) -> Dict[str, List[ValidationError]]:
    """
    Validate a DataFrame against per-column rules.

    Supported rules: required, finite, numeric {min, max}, categorical [values],
    unique.

    Args:
        df: DataFrame to validate
        rules: Dictionary mapping column names to validation rules

    Returns:
        Dictionary mapping column names to list of validation errors
    """
    errors = {}

    for column, rule_set in rules.items():
        if column not in df.columns:
            errors[column] = [ValidationError(f"Column '{column}' not found", column=column)]
            continue

        column_errors = []
        series = df[column]

        for rule_type, rule_params in rule_set.items():
            if rule_type == 'required':
                if rule_params and series.isna().any():
                    null_indices = series[series.isna()].index.tolist()
                    column_errors.append(
                        ValidationError(f"{len(null_indices)} missing values", column=column, row=null_indices)
                    )

            elif rule_type == 'finite':
                bad = series[~validate_finite(series)]
                if rule_params and not bad.empty:
                    column_errors.append(
                        ValidationError(f"{len(bad)} non-finite values", column=column, row=bad.index.tolist())
                    )

            elif rule_type == 'numeric':
                min_val = rule_params.get('min')
                max_val = rule_params.get('max')
                invalid = series[~series.apply(lambda x: validate_numeric(x, min_val, max_val))]
                if not invalid.empty:
                    column_errors.append(
                        ValidationError(f"{len(invalid)} values outside [{min_val}, {max_val}]",
                                        column=column, row=invalid.index.tolist())
                    )

            elif rule_type == 'categorical':
                if not validate_categorical(series, rule_params):
                    invalid_values = set(series.dropna().unique()) - set(rule_params)
                    column_errors.append(
                        ValidationError(f"invalid values {sorted(map(str, invalid_values))}, expected {rule_params}",
                                        column=column)
                    )

            elif rule_type == 'unique':
                if rule_params and series.nunique() != len(series):
                    column_errors.append(ValidationError("duplicate values", column=column))

        if column_errors:
            errors[column] = column_errors

    return errors


def validate_unique_keys(df: pd.DataFrame, keys: Iterable[str]) -> List[ValidationError]:
    """Check that the combination of key columns identifies each row."""
    keys = list(keys)
    duplicated = df.duplicated(subset=keys, keep=False)
    if duplicated.any():
        rows = df.index[duplicated].tolist()
        return [ValidationError(f"{len(rows)} rows share a ({', '.join(keys)}) key", column=keys[0], row=rows)]
    return []


def raise_first(df: pd.DataFrame, validation_errors: Dict[str, List[ValidationError]]) -> None:
    """Raise the first collected error; a missing column becomes ColumnNotFoundError."""
    for column, column_errors in validation_errors.items():
        if column not in df.columns:
            raise ColumnNotFoundError(column, df.columns)
        if column_errors:
            raise column_errors[0]


def check_score_table(df: pd.DataFrame, require_labels: bool = False) -> None:
    """
    Validate a per-frame score table.

    Raises:
        ColumnNotFoundError: If a required column is missing
        ValidationError: On out-of-range or non-finite scores, non-binary labels or duplicate frames
    """
    rules = dict(SCORE_RULES)
    if require_labels or "label" in df.columns:
        rules.update(LABEL_RULES)
    errors = validate_dataframe(df, rules)
    duplicate = validate_unique_keys(df, ("clip_id", "frame_index")) if not errors else []
    if duplicate:
        errors["clip_id"] = duplicate
    raise_first(df, errors)


def check_annotation_table(df: pd.DataFrame) -> None:
    raise_first(df, validate_dataframe(df, ANNOTATION_RULES))


def check_manifest(df: pd.DataFrame) -> None:
    raise_first(df, validate_dataframe(df, MANIFEST_RULES))
