from .adaboost import (
    BoostConfig,
    BoostedModel,
    BoostStage,
    boost_fit,
    boost_predict,
    boost_predict_many,
    staged_predict_many,
)
from .encoding import EncodedFeature, FeatureEncoder, category_codes
from .forest import (
    RandomForestModel,
    TreeNode,
    default_m_try,
    rf_fit,
    rf_predict,
    rf_predict_many,
)
from .kmeans import (
    CLUSTER_FEATURE,
    ClusterClassMapping,
    ClusterModel,
    ClusterSummary,
    KMeansInit,
    assign,
    assign_many,
    augment,
    class_to_cluster,
    cluster_count,
)
from .kmeans import fit as kmeans_fit
from .kmeans import sse
from .knn import KnnModel, knn_fit, knn_predict, knn_predict_many
from .naive_bayes import (
    GaussianParams,
    NbModel,
    NominalTable,
    nb_fit,
    nb_posterior,
    nb_posterior_many,
    nb_predict,
    nb_predict_many,
)
