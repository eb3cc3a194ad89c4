//! Lift, ranking, F1, year error and Cramer's V on small hand-made inputs.
//!
//! cargo run --example metrics_suite

use std::collections::BTreeSet;

use chromaline::metrics::{cramers_v, f1_scores, lift, precision_at_k, year_metrics, ContingencyTable};

fn main() -> Result<(), chromaline::metrics::MetricError> {
    // Per-designer accuracy against that designer's majority baseline.
    for (name, acc, maj) in [("house A", 0.7595, 0.4684), ("house B", 0.934, 0.802)] {
        println!("{name}: {:.1}% vs majority {:.1}% -> lift {:+.2}pp", acc * 100.0, maj * 100.0, lift(acc, maj)?);
    }

    let scores = vec![vec![0.9, 0.6, 0.1, 0.3], vec![0.2, 0.1, 0.8, 0.7]];
    let truth: Vec<BTreeSet<usize>> = vec![[0, 1].into(), [3].into()];
    println!("P@1 {:.3}  P@2 {:.3}", precision_at_k(&scores, &truth, 1)?, precision_at_k(&scores, &truth, 2)?);

    let vocab: Vec<String> = ["black", "navy", "white"].map(String::from).to_vec();
    let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    let f1 = f1_scores(
        &[set(&["black"]), set(&["navy", "white"])],
        &[set(&["black", "white"]), set(&["navy"])],
        &vocab,
    )?;
    println!("macro F1 {:.3}  micro F1 {:.3}", f1.macro_f1, f1.micro_f1);

    let y = year_metrics(&[2001, 1998, 2015, 2020], &[2003, 1998, 2012, 2021], 2)?;
    println!("year MAE {:.2}, within 2 years {:.0}%", y.mae, y.within_k * 100.0);

    let t = ContingencyTable::from_pairs([("1", "black"), ("1", "black"), ("2", "red"), ("2", "red"), ("1", "red")]);
    println!("Cramer's V {:.3} over {} observations", cramers_v(&t)?, t.total());
    Ok(())
}
