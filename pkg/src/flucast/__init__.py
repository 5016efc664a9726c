"""flucast: swarm-tuned multi-step influenza forecasting toolkit."""

from .clpso import (
    ModelConfig,
    ParticleCodec,
    SwarmConfig,
    decode,
    encode,
    learning_probability,
    run_clpso,
)
from .data import (
    IliSeries,
    SupervisedDataset,
    chronological_split,
    impute_missing,
    inverse_log_transform,
    load_series,
    log_transform,
    make_supervised,
    write_series_csv,
)
from .evaluation import (
    aggregate_metrics,
    detect_outbreak_windows,
    friedman_test,
    mape,
    nemenyi_critical_difference,
    outbreak_mae,
    pwe,
    rmse,
)
from .harness import (
    ExperimentConfig,
    emit_plot_data,
    generate_synthetic_ili,
    load_pipeline,
    run_experiment,
    save_pipeline,
)
from .strategies import (
    ForecastPipeline,
    ForecastTable,
    LagWindow,
    PersistenceModel,
    StrategyKind,
    forecast_direct,
    forecast_iterated,
    forecast_mimo,
    persistence_pipeline,
    rollout,
)
from .tuning import (
    CandidateGrid,
    ModelKind,
    TrainedPipeline,
    build_grid,
    fitness,
    tune_and_train,
)

__version__ = "0.1.0"
