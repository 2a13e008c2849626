//! Density-based clustering over idea embeddings.

mod hdbscan;
mod union_find;

pub use hdbscan::{
    adjusted_rand_index, build_mst, cluster, core_distances, extract_clusters,
    mutual_reachability, promote_noise_to_singletons, ClusterLabels, ClusterParams, Metric,
    MstEdge, Selection,
};
pub use union_find::LabeledUnionFind;
