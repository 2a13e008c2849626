//! Cluster synthetic blobs with the built-in density clusterer and compare
//! the result to the ground truth with the adjusted Rand index.
//!
//! ```sh
//! cargo run --example cluster_points
//! ```

use eecs::cluster::{
    adjusted_rand_index, cluster, promote_noise_to_singletons, ClusterParams, Metric, Selection,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn main() -> eecs::Result<()> {
    // three gaussian blobs in 8 dimensions plus a couple of stray points
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let centers: [[f32; 8]; 3] = [
        [5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    ];
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for (label, center) in centers.iter().enumerate() {
        for _ in 0..30 {
            let p: Vec<f32> = center.iter().map(|c| c + rng.gen_range(-0.3..0.3)).collect();
            points.push(p);
            truth.push(label as i64);
        }
    }
    for _ in 0..2 {
        points.push((0..8).map(|_| rng.gen_range(-20.0..20.0)).collect());
        truth.push(-1);
    }

    // excess-of-mass selection recovers whole blobs; leaf selection (the
    // pipeline default) prefers the finest-grained stable groups instead
    let params = ClusterParams {
        min_cluster_size: 5,
        min_samples: 5,
        metric: Metric::Euclidean,
        selection: Selection::Eom,
    };
    let labels = cluster(&points, &params)?;
    println!(
        "{} clusters, {} noise points over {} points",
        labels.cluster_count(),
        labels.noise_count(),
        points.len()
    );
    println!("agreement with truth: ARI = {:.3}", adjusted_rand_index(&truth, &labels.labels));

    let promoted = promote_noise_to_singletons(&labels);
    println!(
        "after promoting noise: {} clusters, {} noise",
        promoted.cluster_count(),
        promoted.noise_count()
    );
    Ok(())
}
