//! Association between skin-tone level and garment color family in a
//! synthetic corpus, where the two are generated independently.
//!
//! cargo run --example monk_association

use chromaline::experiments::monk_bk_table;
use chromaline::metrics::{chi_square, cramers_v};
use chromaline::synth::{generate_synthetic, SynthSpec};

fn main() -> chromaline::Result<()> {
    let corpus = generate_synthetic(&SynthSpec::default())?;
    let truth = corpus.truth();
    let refs: Vec<_> = truth.iter().collect();
    let table = monk_bk_table(&refs).expect("corpus has Monk levels");
    let (chi2, rows, cols) = chi_square(&table)?;
    println!("{} records, {rows}x{cols} non-empty cells", table.total());
    println!("chi2 {chi2:.2}  Cramer's V {:.4}", cramers_v(&table)?);
    Ok(())
}
