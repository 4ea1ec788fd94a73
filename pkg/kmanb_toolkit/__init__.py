__version__ = "0.1.0"


from .dataset import (
    Dataset,
    DateMode,
    DeviceProfile,
    FeatureKind,
    FeatureSchema,
    Instance,
    Label,
    NormalizationParams,
    Scale,
    Target,
    device_counts,
    list_devices,
    load_csv,
    load_device,
    normalize_apply,
    normalize_fit,
    stratified_holdout,
    stratified_split,
    synthesize,
    synthesize_device,
    write_csv,
)
from .errors import (
    DataError,
    KmanbError,
    ModelError,
    ReportError,
    RowError,
    SchemaError,
)
from .evaluation import (
    AprReport,
    ConfusionMatrix,
    TimingReport,
    apr,
    collapse_binary,
    confusion,
    timed,
)
from .feature_rank import (
    FeatureRanking,
    drop_feature,
    rank_features,
    symmetric_uncertainty,
)
from .main import Settings, configure_logging, get_settings
from .models import (
    BoostConfig,
    BoostedModel,
    ClusterClassMapping,
    ClusterModel,
    KMeansInit,
    KnnModel,
    NbModel,
    RandomForestModel,
    assign,
    augment,
    boost_fit,
    boost_predict,
    class_to_cluster,
    cluster_count,
    kmeans_fit,
    knn_fit,
    knn_predict,
    nb_fit,
    nb_posterior,
    nb_predict,
    rf_fit,
    rf_predict,
    sse,
)
from .pipeline import (
    Algorithm,
    ExperimentConfig,
    ExperimentResult,
    ReportFormat,
    SuiteConfig,
    SuiteReport,
    SynthSource,
    emit_report,
    emit_suite,
    result_schema,
    run_baseline,
    run_experiment,
    run_kmanb,
    run_suite,
)
