from .config import (
    Algorithm,
    ExperimentConfig,
    ReportFormat,
    SuiteConfig,
    SynthSource,
    TableFamily,
    derive_seed,
)
from .experiment import (
    ClusterDiagnostics,
    EnsembleChoice,
    ExperimentResult,
    Prepared,
    choose_ensemble,
    load_splits,
    prepare,
    run_baseline,
    run_experiment,
    run_kmanb,
)
from .report import (
    METRIC_ROWS,
    ReportTable,
    build_table,
    emit_report,
    read_report_csv,
    render_markdown,
    result_schema,
)
from .suite import (
    SuiteCell,
    SuiteReport,
    emit_suite,
    family_tables,
    run_suite,
)
