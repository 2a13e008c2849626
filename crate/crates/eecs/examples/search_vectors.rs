//! Store embedding vectors, query them by cosine similarity, and round-trip
//! the store through its binary sidecar file.
//!
//! ```sh
//! cargo run --example search_vectors
//! ```

use eecs::vector::{cosine, VectorStore};

fn main() -> eecs::Result<()> {
    let mut store = VectorStore::new(4);
    store.insert("north", vec![0.0, 1.0, 0.0, 0.0])?;
    store.insert("north-east", vec![0.7, 0.7, 0.0, 0.0])?;
    store.insert("east", vec![1.0, 0.0, 0.0, 0.0])?;
    store.insert("up", vec![0.0, 0.0, 1.0, 0.0])?;

    let query = [0.1f32, 0.9, 0.0, 0.0];
    println!("query ~ north:");
    for n in store.top_k(&query, 3)? {
        println!("  {:<10} cosine={:.4}", n.id, n.similarity);
    }
    let best = store.argmax_similarity(&query)?.expect("store is non-empty");
    println!("argmax: {}", best.id);

    println!("cosine(north, east) = {}", cosine(store.get("north").unwrap(), store.get("east").unwrap())?);

    let dir = tempfile::tempdir()?;
    let sidecar = dir.path().join("vectors.bin");
    store.write_sidecar(&sidecar)?;
    let reloaded = VectorStore::read_sidecar(&sidecar)?;
    assert_eq!(reloaded.get("north-east"), store.get("north-east"));
    println!("sidecar round-trip ok ({} bytes)", std::fs::metadata(&sidecar)?.len());
    Ok(())
}
