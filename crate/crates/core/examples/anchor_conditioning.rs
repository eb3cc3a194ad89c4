//! Slot-2 prediction with and without the c1 label as an extra input, on a
//! corpus where c2 depends on c1 and on one where it does not.
//!
//! cargo run --release --example anchor_conditioning

use chromaline::classify::TrainConfig;
use chromaline::experiments::{anchor_data, evaluate_anchor, observe_corpus, train_anchor_models, DEFAULT_MIN_ANCHOR_COUNT};
use chromaline::palette::AnnotateConfig;
use chromaline::pipeline::split_indices;
use chromaline::synth::{generate_synthetic, SynthSpec};
use chromaline::ColorTable;

fn main() -> chromaline::Result<()> {
    for coupled in [true, false] {
        let spec = SynthSpec::two_tone(coupled);
        let corpus = generate_synthetic(&spec)?;
        let observed = observe_corpus(&corpus, &AnnotateConfig::default(), spec.seed)?;
        let truth = corpus.truth();
        let pairs: Vec<_> = truth.iter().zip(&observed).collect();
        let data = anchor_data(&pairs, ColorTable::css());
        let (train, eval) = split_indices(data.rows.len(), 0.2, spec.seed);
        let models = train_anchor_models(&data, &train, DEFAULT_MIN_ANCHOR_COUNT, &TrainConfig::default())?;
        let r = evaluate_anchor(&models, &data, &eval)?;
        println!(
            "{:<12} n={}  unanchored {:.1}%  anchored {:.1}%  lift {:+.2}pp",
            if coupled { "conditional" } else { "independent" },
            r.n,
            r.unanchored_top1 * 100.0,
            r.anchored_top1 * 100.0,
            r.lift
        );
    }
    Ok(())
}
