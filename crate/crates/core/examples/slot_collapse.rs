//! Per-slot CSS prediction from dominant-color features on a six-stripe
//! corpus whose later stripes are independent of the features.
//!
//! cargo run --release --example slot_collapse

use chromaline::classify::TrainConfig;
use chromaline::experiments::{features_of, observe_corpus, per_slot_evaluation, FeatureKind};
use chromaline::palette::AnnotateConfig;
use chromaline::pipeline::split_indices;
use chromaline::synth::{generate_synthetic, SynthSpec};
use chromaline::ColorTable;

fn main() -> chromaline::Result<()> {
    let spec = SynthSpec::six_stripe();
    let corpus = generate_synthetic(&spec)?;
    let observed = observe_corpus(&corpus, &AnnotateConfig::default(), spec.seed)?;
    let truth = corpus.truth();
    let truth: Vec<_> = truth.iter().collect();
    let features: Vec<_> =
        observed.iter().map(|o| features_of(FeatureKind::Swatch, o, None)).collect::<chromaline::Result<_>>()?;
    let (train, eval) = split_indices(truth.len(), 0.2, spec.seed);
    let rows = per_slot_evaluation(&features, &truth, &train, &eval, ColorTable::css(), &TrainConfig::default())?;
    println!("slot      n   top-1  majority  median dE00");
    for r in rows {
        println!("c{}   {:>5}  {:>5.1}%  {:>7.1}%  {:>10.2}", r.slot, r.n, r.top1 * 100.0, r.majority * 100.0, r.median_delta_e);
    }
    Ok(())
}
