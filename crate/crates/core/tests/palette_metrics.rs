use std::collections::BTreeSet;

use chromaline::colorspace::{delta_e_2000, srgb_to_lab};
use chromaline::metrics::{
    chi_square, cramers_v, delta_e_stats, f1_scores, lift, precision_at_k, rank_labels, top1_accuracy, year_metrics,
    ContingencyTable,
};
use chromaline::palette::{annotate, kmeans_palette, sample_pixels, AnnotateConfig, ChromaticFlag, MaskedImage};
use chromaline::{ColorTable, SrgbColor};
use proptest::prelude::*;

fn image() -> impl Strategy<Value = MaskedImage> {
    (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
        (
            proptest::collection::vec((any::<u8>(), any::<u8>(), any::<u8>()), w * h),
            proptest::collection::vec(any::<bool>(), w * h),
        )
            .prop_filter_map("needs a garment pixel", move |(px, mut mask)| {
                mask[0] = true;
                let pixels = px.into_iter().map(|(r, g, b)| SrgbColor::new(r, g, b)).collect();
                MaskedImage::new(w, h, pixels, mask).ok()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn palette_weights_are_ordered_and_normalized(img in image(), seed in 0u64..1000) {
        let samples = sample_pixels(&img, 500, seed).unwrap();
        let p = kmeans_palette(&samples, 6, seed).unwrap();
        let w: Vec<f64> = p.slots().iter().map(|s| s.weight).collect();
        prop_assert!(w.windows(2).all(|x| x[0] >= x[1]));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn annotation_is_deterministic(img in image(), seed in 0u64..1000) {
        let table = ColorTable::css();
        let a = annotate(&img, table, &AnnotateConfig::default(), seed).unwrap();
        let b = annotate(&img, table, &AnnotateConfig::default(), seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.css.family, a.bk);
    }

    #[test]
    fn cramers_v_in_unit_interval(counts in proptest::collection::vec(proptest::collection::vec(0u64..50, 3), 2..6)) {
        let t = ContingencyTable::from_counts(counts);
        if let Ok(v) = cramers_v(&t) {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn accuracy_and_lift_ranges(xs in proptest::collection::vec(0u8..4, 1..50), ys in proptest::collection::vec(0u8..4, 1..50)) {
        let n = xs.len().min(ys.len());
        let acc = top1_accuracy(&xs[..n], &ys[..n]).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
        let l = lift(acc, 0.5).unwrap();
        prop_assert!((-50.0..=50.0).contains(&l));
    }
}

#[test]
fn uniform_swatch_gives_one_mass_slot() {
    let table = ColorTable::css();
    let a = annotate(&MaskedImage::uniform(6, 6, SrgbColor::new(0, 0, 0)), table, &AnnotateConfig::default(), 1).unwrap();
    assert_eq!(a.chromatic, ChromaticFlag::Achromatic);
    assert_eq!(a.palette.slots()[0].weight, 1.0);
    assert_eq!(a.css.name, "black");
}

#[test]
fn two_color_swatch_recovers_both_colors() {
    let table = ColorTable::css();
    let (x, y) = (SrgbColor::new(178, 34, 34), SrgbColor::new(218, 165, 32));
    let pixels: Vec<_> = (0..100).map(|i| if i < 70 { x } else { y }).collect();
    let img = MaskedImage::new(10, 10, pixels, vec![true; 100]).unwrap();
    let a = annotate(&img, table, &AnnotateConfig::default(), 3).unwrap();
    let s = a.palette.slots();
    assert!(delta_e_2000(s[0].lab, srgb_to_lab(x)).value() < 1e-6);
    assert!(delta_e_2000(s[1].lab, srgb_to_lab(y)).value() < 1e-6);
    assert!((s[0].weight - 0.7).abs() < 1e-12 && (s[1].weight - 0.3).abs() < 1e-12);
    assert_eq!(a.css.name, "firebrick");
    assert_eq!(a.chromatic, ChromaticFlag::Chromatic);
}

#[test]
fn outer_product_table_has_zero_association() {
    let rows = [1u64, 2, 3, 4];
    let cols = [5u64, 1, 2];
    let t = ContingencyTable::from_counts(rows.iter().map(|r| cols.iter().map(|c| r * c * 10).collect()).collect());
    let (chi2, _, _) = chi_square(&t).unwrap();
    assert!(chi2.abs() < 1e-9);
    assert!(cramers_v(&t).unwrap().abs() < 1e-6);
}

#[test]
fn permutation_table_has_full_association() {
    let t = ContingencyTable::from_counts((0..5).map(|i| (0..5).map(|j| if (i * 2) % 5 == j { 7 } else { 0 }).collect()).collect());
    assert!((cramers_v(&t).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn ranking_and_precision() {
    assert_eq!(rank_labels(&[0.1, 0.5, 0.5, 0.0]), vec![1, 2, 0, 3]);
    let scores = vec![vec![0.9, 0.8, 0.1], vec![0.1, 0.2, 0.3]];
    let truth: Vec<BTreeSet<usize>> = vec![[0].into(), [0, 1].into()];
    assert_eq!(precision_at_k(&scores, &truth, 1).unwrap(), 0.5);
    assert!((precision_at_k(&scores, &truth, 2).unwrap() - 0.5).abs() < 1e-12);
    assert!(precision_at_k(&scores, &truth, 4).is_err());
}

#[test]
fn f1_perfect_and_empty_predictions() {
    let vocab: Vec<String> = ["a", "b"].map(String::from).to_vec();
    let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<BTreeSet<_>>();
    let truth = vec![s(&["a"]), s(&["a", "b"])];
    let perfect = f1_scores(&truth, &truth, &vocab).unwrap();
    assert_eq!((perfect.macro_f1, perfect.micro_f1), (1.0, 1.0));
    let none = f1_scores(&[s(&[]), s(&[])], &truth, &vocab).unwrap();
    assert_eq!((none.macro_f1, none.micro_f1), (0.0, 0.0));
}

#[test]
fn delta_e_and_year_summaries() {
    let a = srgb_to_lab(SrgbColor::new(10, 20, 30));
    let st = delta_e_stats(&[a, a], &[a, a]).unwrap();
    assert_eq!((st.mean, st.median), (0.0, 0.0));
    let y = year_metrics(&[2000, 2004, 1995], &[2001, 2000, 1995], 1).unwrap();
    assert!((y.mae - 5.0 / 3.0).abs() < 1e-12);
    assert!((y.within_k - 2.0 / 3.0).abs() < 1e-12);
}
