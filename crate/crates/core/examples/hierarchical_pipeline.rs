//! Trains the family -> CSS -> constrained LAB pipeline on a synthetic corpus
//! and prints the four-stage comparison.
//!
//! cargo run --release --example hierarchical_pipeline -- [seed] [radius]

use chromaline::experiments::{features_of, observe_corpus, pipeline_examples, FeatureKind};
use chromaline::palette::AnnotateConfig;
use chromaline::pipeline::{compare_stages, split_indices, train_pipeline, PipelineConfig};
use chromaline::synth::{generate_synthetic, SynthSpec};
use chromaline::ColorTable;

fn main() -> chromaline::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map_or(1, |s| s.parse().expect("seed"));
    let radius = args.next().map_or(3.0, |s| s.parse().expect("radius"));

    let spec = SynthSpec { seed, ..SynthSpec::default() };
    let corpus = generate_synthetic(&spec)?;
    let observed = observe_corpus(&corpus, &AnnotateConfig::default(), seed)?;
    let truth = corpus.truth();
    let truth: Vec<_> = truth.iter().collect();
    let features: Vec<_> =
        observed.iter().map(|o| features_of(FeatureKind::Swatch, o, None)).collect::<chromaline::Result<_>>()?;
    let examples = pipeline_examples(&features, &truth);

    let (train_idx, eval_idx) = split_indices(examples.len(), 0.2, seed);
    let train: Vec<_> = train_idx.iter().map(|&i| examples[i].clone()).collect();
    let eval: Vec<_> = eval_idx.iter().map(|&i| examples[i].clone()).collect();
    let table = ColorTable::css();
    let models = train_pipeline(&train, table, &PipelineConfig { radius, ..PipelineConfig::default() })?;
    let report = compare_stages(&eval, &models, table, radius)?;

    println!("{} train / {} eval records, radius {radius}", train.len(), eval.len());
    println!("{:<20} {:>8} {:>8} {:>8}", "stage", "mean", "median", "BK acc");
    for row in &report.rows {
        let name = serde_json::to_value(row.stage).unwrap();
        println!(
            "{:<20} {:>8.2} {:>8.2} {:>7.1}%",
            name.as_str().unwrap(),
            row.mean_delta_e,
            row.median_delta_e,
            row.bk_accuracy * 100.0
        );
    }
    Ok(())
}
