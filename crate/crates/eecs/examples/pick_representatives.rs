//! Pick the idea that best represents each cluster: the member closest in
//! embedding space to the concatenation of all members.
//!
//! ```sh
//! cargo run --example pick_representatives
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use eecs::codebook::{order_clusters, select_representative, BuildOrder, Cluster};
use eecs::gateway::{DemoBackend, Gateway};
use eecs::vector::VectorStore;

fn main() -> eecs::Result<()> {
    let gateway = Gateway::shared(Arc::new(DemoBackend::new()))?;

    let ideas: BTreeMap<String, String> = [
        ("i1", "Office hours were helpful"),
        ("i2", "I visited office hours weekly"),
        ("i3", "Office hours made hard topics manageable"),
        ("i4", "The jokes kept the class awake"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();

    let mut store = VectorStore::new(16);
    for (id, text) in &ideas {
        store.insert(id, gateway.embed_one(text)?)?;
    }

    let mut clusters = vec![
        Cluster::new(1, vec!["i4".into()]),
        Cluster::new(0, vec!["i1".into(), "i2".into(), "i3".into()]),
    ];
    order_clusters(&mut clusters, BuildOrder::ClusterSizeDesc);

    for cluster in &clusters {
        let with_rep = select_representative(cluster, &ideas, &store, &gateway)?;
        let rep = with_rep.representative_id.expect("non-empty cluster");
        println!(
            "cluster {} ({} members) -> {} {:?}",
            with_rep.cluster_id,
            with_rep.member_ids.len(),
            rep,
            ideas[&rep]
        );
    }
    Ok(())
}
