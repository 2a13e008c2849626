//! Read a CSV of survey responses and screen out the junk rows.
//!
//! ```sh
//! cargo run --example ingest_and_screen
//! ```

use eecs::corpus::{default_stoplist, ingest_corpus, screen_corpus, InputFormat, DEFAULT_MIN_CHARS};

fn main() -> eecs::Result<()> {
    let dir = tempfile::tempdir()?;
    let csv = dir.path().join("responses.csv");
    std::fs::write(
        &csv,
        "comment,term\n\
         The lectures were clear and the pacing was good.,F25\n\
         n/a,F25\n\
         Office hours helped me pass the midterm.,S26\n\
         None,S26\n\
         ok,F25\n\
         More worked examples would be welcome.,F25\n",
    )?;

    let docs = ingest_corpus(&csv, InputFormat::Csv, "comment")?;
    println!("ingested {} documents", docs.len());

    let screened = screen_corpus(&docs, DEFAULT_MIN_CHARS, &default_stoplist());
    for doc in &screened {
        let mark = if doc.screened_out { "drop" } else { "keep" };
        println!("  [{mark}] {} {:?}", doc.doc_id, doc.text);
    }
    let kept = screened.iter().filter(|d| !d.screened_out).count();
    println!("{kept} of {} survive screening", screened.len());
    Ok(())
}
