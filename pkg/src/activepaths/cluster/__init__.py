from .compare import (
    ClusterDiffReport,
    UnknownFeatureError,
    cluster_value_census,
    compare_clusters,
    largest_cluster,
    mean_centre,
    square_diff,
)
from .eigen import jacobi_eigh
from .hdbscan import NOISE, ClusterAssignment, hdbscan
from .kpca import Embedding, center_kernel, cosine_kernel, fix_signs, kernel_pca

__all__ = [
    "ClusterAssignment", "ClusterDiffReport", "Embedding", "NOISE", "UnknownFeatureError",
    "center_kernel", "cluster_value_census", "compare_clusters", "cosine_kernel", "fix_signs",
    "hdbscan", "jacobi_eigh", "kernel_pca", "largest_cluster", "mean_centre", "square_diff",
]
