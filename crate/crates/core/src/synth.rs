//! Deterministic synthetic garment corpus.
//!
//! Each record draws a dominant CSS color from its house's regime and jitters
//! it in LAB to get the garment's true palette. The image is rendered from
//! that palette under a per-record capture shift, so a palette extracted from
//! the image is a noisy observation of the truth written to the manifest.

use std::collections::BTreeMap;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::colorspace::{lab_to_srgb, srgb_to_lab, LabColor, SrgbColor};
use crate::error::{Error, Result};
use crate::io::{self, AnnotationRecord, YEAR_BOUNDS};
use crate::naming::{monk_anchors, ColorTable, MonkLevel};
use crate::palette::{name_palette, ChromaticRule, MaskedImage, Palette, PaletteSlot, PALETTE_SLOTS};

pub const SYNTH_FORMAT_VERSION: u32 = 1;
pub const FACE_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedColor {
    pub name: String,
    pub probability: f64,
}

impl WeightedColor {
    pub fn new(name: &str, probability: f64) -> Self {
        Self { name: name.to_string(), probability }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseSpec {
    pub name: String,
    pub records: usize,
    /// Mixture over CSS names for the dominant slot.
    pub regime: Vec<WeightedColor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Texture {
    /// One color.
    Flat,
    /// Two horizontal bands, 70/30.
    TwoTone,
    /// Six bands of decreasing area.
    SixStripe,
}

impl Texture {
    pub fn slot_areas(self) -> &'static [f64] {
        match self {
            Texture::Flat => &[1.0],
            Texture::TwoTone => &[0.7, 0.3],
            Texture::SixStripe => &[0.40, 0.20, 0.14, 0.11, 0.08, 0.07],
        }
    }
}

/// With probability `probability`, slot 2 takes the partner of the sampled
/// dominant color instead of a draw from the secondary regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub probability: f64,
    pub partners: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondarySpec {
    /// Mixture shared by slots 2..6 across all houses.
    pub regime: Vec<WeightedColor>,
    #[serde(default)]
    pub coupling: Option<Coupling>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub format_version: u32,
    pub seed: u64,
    pub houses: Vec<HouseSpec>,
    /// Per-axis LAB standard deviation of the garment's true colors around
    /// the sampled CSS centroid.
    pub jitter: f64,
    /// Per-axis LAB standard deviation of the per-record capture shift.
    pub capture_noise: f64,
    pub texture: Texture,
    #[serde(default)]
    pub secondary: Option<SecondarySpec>,
    pub year_range: (i32, i32),
    pub seasons: Vec<String>,
    /// Draw an independent Monk level and face crop for every record.
    pub monk: bool,
    pub image_size: usize,
}

fn regime(pairs: &[(&str, f64)]) -> Vec<WeightedColor> {
    pairs.iter().map(|&(n, p)| WeightedColor::new(n, p)).collect()
}

impl Default for SynthSpec {
    /// Three houses, 2,000 flat garments: a mostly achromatic house, a
    /// chromatically diverse one and an earth-tone one.
    fn default() -> Self {
        Self {
            format_version: SYNTH_FORMAT_VERSION,
            seed: 7,
            houses: vec![
                HouseSpec {
                    name: "maison-noire".into(),
                    records: 667,
                    regime: regime(&[
                        ("black", 0.35),
                        ("dimgray", 0.2),
                        ("white", 0.15),
                        ("navy", 0.15),
                        ("darkslategray", 0.15),
                    ]),
                },
                HouseSpec {
                    name: "casa-viva".into(),
                    records: 667,
                    regime: regime(&[
                        ("red", 0.15),
                        ("darkorange", 0.15),
                        ("gold", 0.1),
                        ("forestgreen", 0.15),
                        ("royalblue", 0.15),
                        ("purple", 0.1),
                        ("hotpink", 0.1),
                        ("teal", 0.1),
                    ]),
                },
                HouseSpec {
                    name: "atelier-terre".into(),
                    records: 666,
                    regime: regime(&[
                        ("saddlebrown", 0.3),
                        ("sienna", 0.2),
                        ("tan", 0.15),
                        ("olive", 0.15),
                        ("maroon", 0.1),
                        ("beige", 0.1),
                    ]),
                },
            ],
            jitter: 4.0,
            capture_noise: 10.0,
            texture: Texture::Flat,
            secondary: None,
            year_range: YEAR_BOUNDS,
            seasons: ["spring", "fall", "resort", "pre-fall"].map(String::from).to_vec(),
            monk: true,
            image_size: 64,
        }
    }
}

impl SynthSpec {
    /// Six-band garments whose slots 2..6 are drawn from a flat secondary
    /// regime, independent of the dominant color.
    pub fn six_stripe() -> Self {
        Self {
            texture: Texture::SixStripe,
            secondary: Some(SecondarySpec {
                regime: regime(&[
                    ("black", 0.125),
                    ("yellow", 0.125),
                    ("red", 0.125),
                    ("blue", 0.125),
                    ("plum", 0.125),
                    ("lime", 0.125),
                    ("springgreen", 0.125),
                    ("hotpink", 0.125),
                ]),
                coupling: None,
            }),
            ..Self::default()
        }
    }

    /// Two-tone garments. With `coupled`, slot 2 is the dominant color's
    /// partner 70% of the time; otherwise it is independent of slot 1.
    pub fn two_tone(coupled: bool) -> Self {
        Self {
            texture: Texture::TwoTone,
            secondary: Some(SecondarySpec {
                regime: regime(&[("black", 0.5), ("yellow", 0.15), ("red", 0.15), ("blue", 0.1), ("plum", 0.1)]),
                coupling: coupled.then(|| Coupling { probability: 0.7, partners: default_partners() }),
            }),
            ..Self::default()
        }
    }
}

/// A slot-2 partner for every dominant color of the default houses.
pub fn default_partners() -> BTreeMap<String, String> {
    [
        ("black", "yellow"),
        ("dimgray", "hotpink"),
        ("white", "blue"),
        ("navy", "khaki"),
        ("darkslategray", "plum"),
        ("red", "blue"),
        ("darkorange", "mediumvioletred"),
        ("gold", "blue"),
        ("forestgreen", "plum"),
        ("royalblue", "yellow"),
        ("purple", "lime"),
        ("hotpink", "olive"),
        ("teal", "red"),
        ("saddlebrown", "springgreen"),
        ("sienna", "mediumseagreen"),
        ("tan", "red"),
        ("olive", "plum"),
        ("maroon", "khaki"),
        ("beige", "darkolivegreen"),
    ]
    .into_iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect()
}

fn check_regime(what: &str, regime: &[WeightedColor], table: &ColorTable) -> Result<()> {
    if regime.is_empty() {
        return Err(Error::Spec(format!("{what}: empty regime")));
    }
    for c in regime {
        if table.get(&c.name).is_none() {
            return Err(Error::Spec(format!("{what}: unknown CSS name `{}`", c.name)));
        }
        if !(c.probability.is_finite() && c.probability >= 0.0) {
            return Err(Error::Spec(format!("{what}: bad probability {}", c.probability)));
        }
    }
    let total: f64 = regime.iter().map(|c| c.probability).sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Spec(format!("{what}: probabilities sum to {total}")));
    }
    Ok(())
}

impl SynthSpec {
    pub fn total_records(&self) -> usize {
        self.houses.iter().map(|h| h.records).sum()
    }

    pub fn validate(&self, table: &ColorTable) -> Result<()> {
        if self.houses.is_empty() {
            return Err(Error::Spec("no houses".into()));
        }
        for h in &self.houses {
            if h.records == 0 {
                return Err(Error::Spec(format!("house {}: records must be at least 1", h.name)));
            }
            check_regime(&format!("house {}", h.name), &h.regime, table)?;
        }
        for (what, v) in [("jitter", self.jitter), ("capture_noise", self.capture_noise)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Spec(format!("{what} must be a non-negative number")));
            }
        }
        if self.year_range.0 > self.year_range.1 {
            return Err(Error::Spec("empty year range".into()));
        }
        if self.seasons.is_empty() {
            return Err(Error::Spec("no seasons".into()));
        }
        if self.image_size < self.texture.slot_areas().len() * 4 {
            return Err(Error::Spec(format!("image_size {} too small for the texture", self.image_size)));
        }
        match (&self.secondary, self.texture) {
            (None, Texture::Flat) => {}
            (None, _) => return Err(Error::Spec("multi-color textures need a secondary regime".into())),
            (Some(s), _) => {
                check_regime("secondary", &s.regime, table)?;
                if let Some(c) = &s.coupling {
                    if !(0.0..=1.0).contains(&c.probability) {
                        return Err(Error::Spec("coupling probability outside [0, 1]".into()));
                    }
                    for (a, b) in &c.partners {
                        if table.get(a).is_none() || table.get(b).is_none() {
                            return Err(Error::Spec(format!("coupling `{a}` -> `{b}` names an unknown color")));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Band heights (in rows) for the given areas, by largest remainder.
pub fn band_rows(areas: &[f64], rows: usize) -> Vec<usize> {
    let ideal: Vec<f64> = areas.iter().map(|a| a * rows as f64).collect();
    let mut out: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..areas.len()).collect();
    order.sort_by(|&i, &j| (ideal[j] - ideal[j].floor()).total_cmp(&(ideal[i] - ideal[i].floor())).then(i.cmp(&j)));
    let short = rows - out.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        out[i] += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthRecord {
    /// Ground truth, with paths relative to the corpus directory.
    pub truth: AnnotationRecord,
    pub image: MaskedImage,
    pub face: Option<MaskedImage>,
    /// CSS names sampled for each slot, dominant first.
    pub sampled: Vec<String>,
    pub capture_shift: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub spec: SynthSpec,
    pub records: Vec<SynthRecord>,
}

struct Sampler {
    names: Vec<String>,
    index: WeightedIndex<f64>,
}

impl Sampler {
    fn new(regime: &[WeightedColor]) -> Self {
        Self {
            names: regime.iter().map(|c| c.name.clone()).collect(),
            index: WeightedIndex::new(regime.iter().map(|c| c.probability)).expect("validated regime"),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> String {
        self.names[self.index.sample(rng)].clone()
    }
}

fn offset(c: LabColor, d: [f64; 3]) -> LabColor {
    LabColor::new(c.l + d[0], c.a + d[1], c.b + d[2])
}

/// Generates the corpus in memory. Identical specs give identical corpora.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthCorpus> {
    let table = ColorTable::css();
    spec.validate(table)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let jitter = Normal::new(0.0, spec.jitter).expect("finite std");
    let capture = Normal::new(0.0, spec.capture_noise).expect("finite std");
    let secondary = spec.secondary.as_ref().map(|s| (Sampler::new(&s.regime), s.coupling.as_ref()));
    let areas = spec.texture.slot_areas();
    let rows = band_rows(areas, spec.image_size);
    let size = spec.image_size;
    let rule = ChromaticRule::default();

    let mut records = Vec::with_capacity(spec.total_records());
    for house in &spec.houses {
        let dominant = Sampler::new(&house.regime);
        for j in 0..house.records {
            let id = format!("{}-{j:05}", house.name);
            let mut sampled = vec![dominant.draw(&mut rng)];
            if let Some((sampler, coupling)) = &secondary {
                for slot in 1..areas.len() {
                    let partner = coupling
                        .filter(|_| slot == 1)
                        .and_then(|c| c.partners.get(&sampled[0]).map(|p| (c.probability, p)));
                    let name = match partner {
                        Some((p, name)) if rng.random::<f64>() < p => name.clone(),
                        _ => sampler.draw(&mut rng),
                    };
                    sampled.push(name);
                }
            }

            let truth_srgb: Vec<SrgbColor> = sampled
                .iter()
                .map(|name| {
                    let entry = table.get(name).expect("validated name");
                    if spec.jitter == 0.0 {
                        entry.srgb
                    } else {
                        let d = [jitter.sample(&mut rng), jitter.sample(&mut rng), jitter.sample(&mut rng)];
                        lab_to_srgb(offset(entry.centroid, d)).0
                    }
                })
                .collect();
            let capture_shift = if spec.capture_noise == 0.0 {
                [0.0; 3]
            } else {
                [capture.sample(&mut rng), capture.sample(&mut rng), capture.sample(&mut rng)]
            };
            let observed_srgb: Vec<SrgbColor> = truth_srgb
                .iter()
                .map(|&c| {
                    if spec.capture_noise == 0.0 {
                        c
                    } else {
                        lab_to_srgb(offset(srgb_to_lab(c), capture_shift)).0
                    }
                })
                .collect();

            let mut pixels = Vec::with_capacity(size * size);
            for (slot, &h) in rows.iter().enumerate() {
                pixels.extend(std::iter::repeat_n(observed_srgb[slot], h * size));
            }
            let image = MaskedImage::new(size, size, pixels, vec![true; size * size])?;

            let mut slots: Vec<PaletteSlot> = truth_srgb
                .iter()
                .zip(&rows)
                .map(|(&c, &h)| PaletteSlot { lab: srgb_to_lab(c), weight: h as f64 / size as f64 })
                .collect();
            let last = slots[slots.len() - 1].lab;
            slots.resize(PALETTE_SLOTS, PaletteSlot { lab: last, weight: 0.0 });
            let palette = Palette::new(slots)?;
            let naming = name_palette(palette, table, &rule);

            let year = rng.random_range(spec.year_range.0..=spec.year_range.1);
            let season = spec.seasons[rng.random_range(0..spec.seasons.len())].clone();
            let (monk, face) = if spec.monk {
                let level: u8 = rng.random_range(1..=10);
                let skin = lab_to_srgb(monk_anchors()[usize::from(level) - 1]).0;
                (MonkLevel::new(level), Some(MaskedImage::uniform(FACE_SIZE, FACE_SIZE, skin)))
            } else {
                (None, None)
            };

            records.push(SynthRecord {
                truth: AnnotationRecord {
                    image_path: format!("images/{id}.png"),
                    mask_path: format!("masks/{id}.png"),
                    id,
                    designer: house.name.clone(),
                    season,
                    year: Some(year),
                    palette: naming.palette,
                    chromatic: naming.chromatic,
                    bk_c1: naming.bk,
                    css_c1: naming.css.name,
                    monk,
                },
                image,
                face,
                sampled,
                capture_shift,
            });
        }
    }
    Ok(SynthCorpus { spec: spec.clone(), records })
}

pub const TRUTH_MANIFEST: &str = "truth.jsonl";
pub const SPEC_FILE: &str = "synth_spec.json";

impl SynthCorpus {
    pub fn truth(&self) -> Vec<AnnotationRecord> {
        self.records.iter().map(|r| r.truth.clone()).collect()
    }

    /// Writes `truth.jsonl`, `synth_spec.json`, `images/`, `masks/` and,
    /// when Monk levels are drawn, `faces/`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for r in &self.records {
            io::save_masked_image(&r.image, &dir.join(&r.truth.image_path), &dir.join(&r.truth.mask_path))?;
            if let Some(face) = &r.face {
                let path = dir.join("faces").join(format!("{}.png", r.truth.id));
                io::save_rgb(&path, face.width(), face.height(), face.pixels())?;
            }
        }
        io::save_manifest(&self.truth(), &dir.join(TRUTH_MANIFEST))?;
        io::write_json(&dir.join(SPEC_FILE), &self.spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(name: &str, records: usize) -> SynthSpec {
        SynthSpec {
            houses: vec![HouseSpec { name: "solo".into(), records, regime: regime(&[(name, 1.0)]) }],
            jitter: 0.0,
            capture_noise: 0.0,
            monk: false,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn noiseless_single_color_reproduces_the_centroid() {
        let corpus = generate_synthetic(&single("teal", 20)).unwrap();
        let teal = ColorTable::css().get("teal").unwrap();
        for r in &corpus.records {
            assert_eq!(r.truth.palette.dominant(), teal.centroid);
            assert_eq!(r.truth.css_c1, "teal");
            assert!(r.image.pixels().iter().all(|&p| p == teal.srgb));
        }
    }

    #[test]
    fn modal_probability_sets_the_majority_rate() {
        let mut spec = single("navy", 1000);
        spec.houses[0].regime = regime(&[("navy", 0.8), ("gold", 0.2)]);
        let corpus = generate_synthetic(&spec).unwrap();
        let navy = corpus.records.iter().filter(|r| r.truth.css_c1 == "navy").count();
        let rate = navy as f64 / 1000.0;
        assert!((rate - 0.8).abs() <= 0.02, "{rate}");
    }

    #[test]
    fn same_seed_same_corpus_different_seed_differs() {
        let spec = SynthSpec { houses: SynthSpec::default().houses.into_iter().map(|h| HouseSpec { records: 5, ..h }).collect(), ..SynthSpec::default() };
        let a = generate_synthetic(&spec).unwrap();
        assert_eq!(a, generate_synthetic(&spec).unwrap());
        let b = generate_synthetic(&SynthSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.truth(), b.truth());
    }

    #[test]
    fn presets_validate() {
        let table = ColorTable::css();
        for spec in [SynthSpec::default(), SynthSpec::six_stripe(), SynthSpec::two_tone(true), SynthSpec::two_tone(false)] {
            spec.validate(table).unwrap();
        }
        let houses = SynthSpec::default().houses;
        let partners = default_partners();
        assert!(houses.iter().flat_map(|h| &h.regime).all(|c| partners.contains_key(&c.name)));
    }

    #[test]
    fn band_rows_fill_the_image() {
        assert_eq!(band_rows(&[0.7, 0.3], 64), vec![45, 19]);
        assert_eq!(band_rows(Texture::SixStripe.slot_areas(), 64), vec![26, 13, 9, 7, 5, 4]);
        assert_eq!(band_rows(&[1.0], 64), vec![64]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let table = ColorTable::css();
        let mut s = single("teal", 1);
        s.houses[0].regime = regime(&[("teal", 0.5)]);
        assert!(s.validate(table).is_err());
        let mut s = single("teal", 1);
        s.houses[0].records = 0;
        assert!(s.validate(table).is_err());
        let mut s = single("teal", 1);
        s.texture = Texture::TwoTone;
        assert!(s.validate(table).is_err());
        assert!(single("notacolor", 1).validate(table).is_err());
    }

    #[test]
    fn coupling_pairs_the_second_slot() {
        let mut spec = single("navy", 400);
        spec.texture = Texture::TwoTone;
        spec.secondary = Some(SecondarySpec {
            regime: regime(&[("white", 0.5), ("black", 0.5)]),
            coupling: Some(Coupling {
                probability: 1.0,
                partners: [("navy".to_string(), "gold".to_string())].into(),
            }),
        });
        let corpus = generate_synthetic(&spec).unwrap();
        assert!(corpus.records.iter().all(|r| r.sampled == ["navy", "gold"]));
        let w = corpus.records[0].truth.palette.slots()[0].weight;
        assert!((w - 45.0 / 64.0).abs() < 1e-12);
    }
}
