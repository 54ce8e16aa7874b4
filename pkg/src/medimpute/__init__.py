"""K-NN imputation for longitudinal mixed-type panels with time-decayed
same-individual coupling, plus a masking/benchmark harness."""

from medimpute.errors import DataError, NumericalError
from medimpute.panel import (
    FeatureSpec,
    MaskRecord,
    PanelDataset,
    Schema,
    StandardizationParams,
    SynthConfig,
    apply_mcar_mask,
    load_csv,
    load_schema,
    standardize,
    synth_panel,
    unstandardize,
    write_csv,
)
from medimpute.knn import (
    CompletedMatrix,
    DecayTable,
    Hyperparams,
    NeighborAssignment,
    assign_neighbors,
    build_decay_table,
    objective_value,
    pairwise_distance,
    update_categorical_cell,
    update_continuous_cell,
)
from medimpute.solver import (
    ImputationResult,
    SolverConfig,
    med_impute,
    mean_impute,
    opt_impute,
    warm_start,
)

__version__ = "0.1.0"

__all__ = [
    "CompletedMatrix",
    "DataError",
    "DecayTable",
    "FeatureSpec",
    "Hyperparams",
    "ImputationResult",
    "MaskRecord",
    "NeighborAssignment",
    "NumericalError",
    "PanelDataset",
    "Schema",
    "SolverConfig",
    "StandardizationParams",
    "SynthConfig",
    "apply_mcar_mask",
    "assign_neighbors",
    "build_decay_table",
    "load_csv",
    "load_schema",
    "mean_impute",
    "med_impute",
    "objective_value",
    "opt_impute",
    "pairwise_distance",
    "standardize",
    "synth_panel",
    "unstandardize",
    "update_categorical_cell",
    "update_continuous_cell",
    "warm_start",
    "write_csv",
]
