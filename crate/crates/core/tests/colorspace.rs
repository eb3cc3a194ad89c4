use chromaline::colorspace::{chroma, delta_e_2000, hue_angle, lab_to_srgb, srgb_to_lab, Gamut, LabColor, SrgbColor};
use proptest::prelude::*;

fn pairs() -> Vec<(LabColor, LabColor, f64)> {
    include_str!("data/ciede2000_pairs.tsv")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l.split_whitespace().map(|x| x.parse().unwrap()).collect();
            (LabColor::new(v[0], v[1], v[2]), LabColor::new(v[3], v[4], v[5]), v[6])
        })
        .collect()
}

#[test]
fn reference_pairs_match_within_1e4() {
    let pairs = pairs();
    assert_eq!(pairs.len(), 34);
    for (i, (x, y, want)) in pairs.iter().enumerate() {
        let got = delta_e_2000(*x, *y).value();
        assert!((got - want).abs() <= 1e-4, "pair {}: {got} vs {want}", i + 1);
    }
}

#[test]
fn reference_pairs_are_symmetric() {
    for (x, y, _) in pairs() {
        let d1 = delta_e_2000(x, y).value();
        let d2 = delta_e_2000(y, x).value();
        assert!((d1 - d2).abs() < 1e-9);
    }
}

#[test]
fn grid_round_trip_within_one_step() {
    let levels: Vec<u8> = (0..17u32).map(|i| (i * 255 / 16) as u8).collect();
    for &r in &levels {
        for &g in &levels {
            for &b in &levels {
                let c = SrgbColor::new(r, g, b);
                let (back, gamut) = lab_to_srgb(srgb_to_lab(c));
                assert_eq!(gamut, Gamut::Inside, "{c:?}");
                assert!(c.r.abs_diff(back.r) <= 1 && c.g.abs_diff(back.g) <= 1 && c.b.abs_diff(back.b) <= 1);
            }
        }
    }
}

#[test]
fn white_and_black_anchor_the_lightness_axis() {
    let w = srgb_to_lab(SrgbColor::new(255, 255, 255));
    let k = srgb_to_lab(SrgbColor::new(0, 0, 0));
    assert!((w.l - 100.0).abs() < 1e-3 && chroma(w) < 1e-3);
    assert!(k.l.abs() < 1e-9 && chroma(k) < 1e-9);
}

fn lab() -> impl Strategy<Value = LabColor> {
    (0.0..100.0f64, -128.0..128.0f64, -128.0..128.0f64).prop_map(|(l, a, b)| LabColor::new(l, a, b))
}

proptest! {
    #[test]
    fn delta_e_is_a_symmetric_premetric(x in lab(), y in lab()) {
        let d = delta_e_2000(x, y).value();
        prop_assert!(d >= 0.0);
        prop_assert!((d - delta_e_2000(y, x).value()).abs() < 1e-9);
        prop_assert!(delta_e_2000(x, x).value().abs() < 1e-12);
    }

    #[test]
    fn hue_angle_in_range(x in lab()) {
        let h = hue_angle(x);
        prop_assert!((0.0..std::f64::consts::TAU).contains(&h));
    }

    #[test]
    fn every_srgb_round_trips(r: u8, g: u8, b: u8) {
        let c = SrgbColor::new(r, g, b);
        let (back, _) = lab_to_srgb(srgb_to_lab(c));
        prop_assert!(c.r.abs_diff(back.r) <= 1 && c.g.abs_diff(back.g) <= 1 && c.b.abs_diff(back.b) <= 1);
    }
}
