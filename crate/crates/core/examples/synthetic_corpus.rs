//! Generates a small synthetic corpus, writes it to disk and reads the
//! manifest back.
//!
//! cargo run --example synthetic_corpus -- [out_dir]

use chromaline::io::load_manifest;
use chromaline::synth::{generate_synthetic, SynthSpec, TRUTH_MANIFEST};

fn main() -> chromaline::Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from);
    let mut spec = SynthSpec::default();
    for house in &mut spec.houses {
        house.records = 20;
    }
    let corpus = generate_synthetic(&spec)?;
    for r in corpus.records.iter().take(6) {
        let t = &r.truth;
        println!(
            "{}  {:<14} {} {:?}  c1={} ({})  monk={:?}",
            t.id,
            t.designer,
            t.season,
            t.year,
            t.css_c1,
            t.bk_c1,
            t.monk.map(|m| m.get())
        );
    }
    println!("{} records", corpus.records.len());

    if let Some(dir) = out {
        corpus.write(&dir)?;
        let back = load_manifest(&dir.join(TRUTH_MANIFEST))?;
        println!("wrote {} records to {}", back.len(), dir.display());
    }
    Ok(())
}
