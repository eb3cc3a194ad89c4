//! Six-slot dominant palette extraction from masked images, and the chromatic filter.

use std::collections::HashSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colorspace::{chroma, srgb_to_lab, LabColor, SrgbColor};
use crate::naming::{nearest_bk, BkFamily, ColorTable, NamedColor};

pub const PALETTE_SLOTS: usize = 6;
pub const DEFAULT_MAX_SAMPLES: usize = 20_000;
const MAX_ITERATIONS: usize = 100;
const CONVERGENCE_SHIFT: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum PaletteError {
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("no samples to cluster")]
    EmptyInput,
    #[error("image is {width}x{height} but has {pixels} pixels and {mask} mask cells")]
    DimensionMismatch { width: usize, height: usize, pixels: usize, mask: usize },
    #[error("invalid palette: {0}")]
    InvalidPalette(String),
}

/// Row-major pixels plus a same-sized clothing mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedImage {
    width: usize,
    height: usize,
    pixels: Vec<SrgbColor>,
    mask: Vec<bool>,
}

impl MaskedImage {
    pub fn new(
        width: usize,
        height: usize,
        pixels: Vec<SrgbColor>,
        mask: Vec<bool>,
    ) -> Result<Self, PaletteError> {
        if width * height != pixels.len() || pixels.len() != mask.len() || width.max(height) == 0 {
            return Err(PaletteError::DimensionMismatch {
                width,
                height,
                pixels: pixels.len(),
                mask: mask.len(),
            });
        }
        Ok(Self { width, height, pixels, mask })
    }

    /// A uniformly colored image with every pixel masked.
    pub fn uniform(width: usize, height: usize, color: SrgbColor) -> Self {
        let n = width * height;
        Self::new(width, height, vec![color; n], vec![true; n]).expect("consistent dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[SrgbColor] {
        &self.pixels
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn pixel(&self, x: usize, y: usize) -> SrgbColor {
        self.pixels[y * self.width + x]
    }

    pub fn masked_pixels(&self) -> impl Iterator<Item = SrgbColor> + '_ {
        self.pixels.iter().zip(&self.mask).filter(|(_, m)| **m).map(|(p, _)| *p)
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub(crate) fn with_pixels(&self, pixels: Vec<SrgbColor>) -> Self {
        debug_assert_eq!(pixels.len(), self.pixels.len());
        Self { width: self.width, height: self.height, pixels, mask: self.mask.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaletteSlot {
    pub lab: LabColor,
    pub weight: f64,
}

/// Dominant-first color slots. Weights are non-increasing and sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PaletteSlot>", into = "Vec<PaletteSlot>")]
pub struct Palette {
    slots: Vec<PaletteSlot>,
}

impl Palette {
    pub fn new(slots: Vec<PaletteSlot>) -> Result<Self, PaletteError> {
        if slots.is_empty() {
            return Err(PaletteError::InvalidPalette("no slots".into()));
        }
        if slots.iter().any(|s| !s.lab.is_valid() || !(0.0..=1.0).contains(&s.weight)) {
            return Err(PaletteError::InvalidPalette("slot out of range".into()));
        }
        if slots.windows(2).any(|w| w[1].weight > w[0].weight) {
            return Err(PaletteError::InvalidPalette("weights must be non-increasing".into()));
        }
        let total: f64 = slots.iter().map(|s| s.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(PaletteError::InvalidPalette(format!("weights sum to {total}")));
        }
        Ok(Self { slots })
    }

    /// A single-color palette padded to six slots.
    pub fn solid(color: LabColor) -> Self {
        let mut slots = vec![PaletteSlot { lab: color, weight: 0.0 }; PALETTE_SLOTS];
        slots[0].weight = 1.0;
        Self { slots }
    }

    pub fn slots(&self) -> &[PaletteSlot] {
        &self.slots
    }

    /// The dominant slot, c1.
    pub fn dominant(&self) -> LabColor {
        self.slots[0].lab
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

impl TryFrom<Vec<PaletteSlot>> for Palette {
    type Error = PaletteError;

    fn try_from(slots: Vec<PaletteSlot>) -> Result<Self, Self::Error> {
        Palette::new(slots)
    }
}

impl From<Palette> for Vec<PaletteSlot> {
    fn from(p: Palette) -> Self {
        p.slots
    }
}

/// Masked pixels in LAB, uniformly subsampled without replacement when there
/// are more than `max_samples`. Sample order follows pixel order.
pub fn sample_pixels(
    img: &MaskedImage,
    max_samples: usize,
    seed: u64,
) -> Result<Vec<LabColor>, PaletteError> {
    let masked: Vec<SrgbColor> = img.masked_pixels().collect();
    if masked.is_empty() {
        return Err(PaletteError::EmptyMask);
    }
    let max_samples = max_samples.max(1);
    if masked.len() <= max_samples {
        return Ok(masked.into_iter().map(srgb_to_lab).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, masked.len(), max_samples).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| srgb_to_lab(masked[i])).collect())
}

fn sq_dist(p: &LabColor, q: &LabColor) -> f64 {
    let (dl, da, db) = (p.l - q.l, p.a - q.a, p.b - q.b);
    dl * dl + da * da + db * db
}

/// Outcome of a Lloyd run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<LabColor>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances after each assignment step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.centroids.len()];
        for &a in &self.assignments {
            counts[a] += 1;
        }
        counts
    }
}

fn kmeans_pp_init(samples: &[LabColor], k: usize, rng: &mut ChaCha8Rng) -> Vec<LabColor> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(samples[rng.random_range(0..samples.len())]);
    let mut d2: Vec<f64> = samples.iter().map(|s| sq_dist(s, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = samples.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if *d > 0.0 && target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // Floating-point leftovers can land on a zero-weight tail sample.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|d| *d > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..samples.len())
        };
        let c = samples[next];
        for (d, s) in d2.iter_mut().zip(samples) {
            *d = d.min(sq_dist(s, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(samples: &[LabColor], centroids: &[LabColor], out: &mut [usize]) -> f64 {
    let mut objective = 0.0;
    for (s, slot) in samples.iter().zip(out.iter_mut()) {
        let mut best = (f64::INFINITY, 0);
        for (j, c) in centroids.iter().enumerate() {
            let d = sq_dist(s, c);
            if d < best.0 {
                best = (d, j);
            }
        }
        *slot = best.1;
        objective += best.0;
    }
    objective
}

/// Lloyd's k-means in LAB (squared Euclidean) with k-means++ seeding.
///
/// Stops when no centroid moves more than 1e-4 or after 100 iterations.
/// A cluster that empties is reseeded at the sample farthest from its centroid.
pub fn kmeans(samples: &[LabColor], k: usize, seed: u64) -> Result<KMeansResult, PaletteError> {
    if samples.is_empty() {
        return Err(PaletteError::EmptyInput);
    }
    let k = k.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp_init(samples, k, &mut rng);
    let mut assignments = vec![0usize; samples.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;

    loop {
        trace.push(assign(samples, &centroids, &mut assignments));
        iterations += 1;

        let mut sums = vec![[0.0f64; 3]; k];
        let mut counts = vec![0usize; k];
        for (s, &a) in samples.iter().zip(&assignments) {
            sums[a][0] += s.l;
            sums[a][1] += s.a;
            sums[a][2] += s.b;
            counts[a] += 1;
        }
        let mut shift: f64 = 0.0;
        let mut reseeded = false;
        for j in 0..k {
            let next = if counts[j] > 0 {
                let n = counts[j] as f64;
                LabColor::new(sums[j][0] / n, sums[j][1] / n, sums[j][2] / n)
            } else {
                reseeded = true;
                let far = samples
                    .iter()
                    .zip(&assignments)
                    .enumerate()
                    .max_by(|(_, (s1, a1)), (_, (s2, a2))| {
                        sq_dist(s1, &centroids[**a1]).total_cmp(&sq_dist(s2, &centroids[**a2]))
                    })
                    .map(|(i, _)| i)
                    .expect("samples non-empty");
                samples[far]
            };
            shift = shift.max(sq_dist(&next, &centroids[j]).sqrt());
            centroids[j] = next;
        }
        if (!reseeded && shift < CONVERGENCE_SHIFT) || iterations >= MAX_ITERATIONS {
            break;
        }
    }
    Ok(KMeansResult { centroids, assignments, objective_trace: trace, iterations })
}

fn distinct_count(samples: &[LabColor], cap: usize) -> usize {
    let mut seen = HashSet::new();
    for s in samples {
        seen.insert([s.l.to_bits(), s.a.to_bits(), s.b.to_bits()]);
        if seen.len() >= cap {
            break;
        }
    }
    seen.len()
}

/// Clusters samples into `k` mass-ordered slots.
///
/// With fewer than `k` distinct samples the clustering runs on the distinct
/// count and the surplus slots repeat the last centroid with weight 0.
pub fn kmeans_palette(samples: &[LabColor], k: usize, seed: u64) -> Result<Palette, PaletteError> {
    if samples.is_empty() {
        return Err(PaletteError::EmptyInput);
    }
    let k = k.max(1);
    let effective = distinct_count(samples, k);
    let result = kmeans(samples, effective, seed)?;
    let counts = result.counts();
    let mut order: Vec<usize> = (0..effective).collect();
    // Heavier first; equal masses fall back to lightness then index for a total order.
    order.sort_by(|&i, &j| {
        counts[j]
            .cmp(&counts[i])
            .then(result.centroids[j].l.total_cmp(&result.centroids[i].l))
            .then(i.cmp(&j))
    });
    let n = samples.len() as f64;
    let mut slots: Vec<PaletteSlot> = order
        .iter()
        .filter(|&&j| counts[j] > 0)
        .map(|&j| PaletteSlot { lab: result.centroids[j], weight: counts[j] as f64 / n })
        .collect();
    let last = *slots.last().expect("at least one non-empty cluster");
    slots.resize(k, PaletteSlot { lab: last.lab, weight: 0.0 });
    // Counts sum exactly to n; renormalize to absorb division rounding.
    let total: f64 = slots.iter().map(|s| s.weight).sum();
    for s in &mut slots {
        s.weight /= total;
    }
    Ok(Palette { slots })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChromaticFlag {
    Chromatic,
    Achromatic,
}

/// Black/gray dominants are achromatic; white counts as chromatic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChromaticRule {
    pub min_chroma: f64,
    pub white_lightness: f64,
}

impl Default for ChromaticRule {
    fn default() -> Self {
        Self { min_chroma: 12.0, white_lightness: 90.0 }
    }
}

impl ChromaticRule {
    pub fn is_chromatic_color(&self, c: LabColor) -> bool {
        !(chroma(c) < self.min_chroma && c.l < self.white_lightness)
    }

    pub fn classify(&self, p: &Palette) -> ChromaticFlag {
        if self.is_chromatic_color(p.dominant()) {
            ChromaticFlag::Chromatic
        } else {
            ChromaticFlag::Achromatic
        }
    }
}

pub fn is_chromatic(p: &Palette, rule: &ChromaticRule) -> ChromaticFlag {
    rule.classify(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotateConfig {
    pub max_samples: usize,
    pub k: usize,
    pub rule: ChromaticRule,
}

impl Default for AnnotateConfig {
    fn default() -> Self {
        Self { max_samples: DEFAULT_MAX_SAMPLES, k: PALETTE_SLOTS, rule: ChromaticRule::default() }
    }
}

/// Palette, chromatic flag and names of c1 for one garment image.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub palette: Palette,
    pub chromatic: ChromaticFlag,
    pub bk: BkFamily,
    pub css: NamedColor,
}

pub fn annotate(
    img: &MaskedImage,
    table: &ColorTable,
    config: &AnnotateConfig,
    seed: u64,
) -> Result<Annotation, PaletteError> {
    let samples = sample_pixels(img, config.max_samples, seed)?;
    let palette = kmeans_palette(&samples, config.k, seed)?;
    Ok(name_palette(palette, table, &config.rule))
}

/// Names c1 of an existing palette: BK family first, then the nearest CSS
/// entry inside that family (falling back to the whole table when the table
/// has no entry of that family).
pub fn name_palette(palette: Palette, table: &ColorTable, rule: &ChromaticRule) -> Annotation {
    let chromatic = rule.classify(&palette);
    let css = name_color(palette.dominant(), table).clone();
    Annotation { palette, chromatic, bk: css.family, css }
}

/// Nearest CSS entry within the color's BK family, or in the whole table when
/// the table has no entry of that family.
pub fn name_color(c: LabColor, table: &ColorTable) -> &NamedColor {
    match table.nearest(c, Some(nearest_bk(c))) {
        Ok(css) => css,
        Err(_) => table.nearest(c, None).expect("table is non-empty"),
    }
}

/// Mean LAB over the masked pixels (used for face crops).
pub fn mean_lab(img: &MaskedImage) -> Result<LabColor, PaletteError> {
    let mut sum = [0.0; 3];
    let mut n = 0usize;
    for p in img.masked_pixels() {
        let lab = srgb_to_lab(p);
        sum[0] += lab.l;
        sum[1] += lab.a;
        sum[2] += lab.b;
        n += 1;
    }
    if n == 0 {
        return Err(PaletteError::EmptyMask);
    }
    let n = n as f64;
    Ok(LabColor::new(sum[0] / n, sum[1] / n, sum[2] / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorspace::{delta_e_2000, lab_to_srgb};

    fn two_color_samples(a: LabColor, b: LabColor, na: usize, nb: usize) -> Vec<LabColor> {
        let mut v = vec![a; na];
        v.extend(std::iter::repeat_n(b, nb));
        v
    }

    #[test]
    fn sampling_small_and_empty() {
        let img = MaskedImage::uniform(2, 2, SrgbColor::new(10, 20, 30));
        assert_eq!(sample_pixels(&img, 10, 0).unwrap().len(), 4);
        let empty = MaskedImage::new(2, 1, vec![SrgbColor::new(0, 0, 0); 2], vec![false; 2]).unwrap();
        assert_eq!(sample_pixels(&empty, 10, 0), Err(PaletteError::EmptyMask));
        assert!(MaskedImage::new(3, 3, vec![], vec![]).is_err());
    }

    #[test]
    fn subsampling_is_deterministic() {
        let pixels: Vec<SrgbColor> = (0..100).map(|i| SrgbColor::new(i as u8, 0, 255 - i as u8)).collect();
        let img = MaskedImage::new(10, 10, pixels, vec![true; 100]).unwrap();
        let a = sample_pixels(&img, 50, 7).unwrap();
        let b = sample_pixels(&img, 50, 7).unwrap();
        assert_eq!(a.len(), 50);
        assert_eq!(a, b);
        assert_ne!(a, sample_pixels(&img, 50, 8).unwrap());
    }

    #[test]
    fn identical_samples_fill_one_slot() {
        let x = LabColor::new(40.0, 20.0, -10.0);
        let p = kmeans_palette(&[x; 37], 6, 3).unwrap();
        assert_eq!(p.len(), 6);
        assert_eq!(p.dominant(), x);
        assert_eq!(p.slots()[0].weight, 1.0);
        assert!(p.slots()[1..].iter().all(|s| s.weight == 0.0));
    }

    #[test]
    fn seventy_thirty_mixture() {
        let a = LabColor::new(30.0, 40.0, 20.0);
        let b = LabColor::new(80.0, -20.0, 60.0);
        assert!(delta_e_2000(a, b).value() > 20.0);
        let p = kmeans_palette(&two_color_samples(a, b, 700, 300), 6, 11).unwrap();
        assert!(delta_e_2000(p.slots()[0].lab, a).value() < 1.0);
        assert!(delta_e_2000(p.slots()[1].lab, b).value() < 1.0);
        assert!((p.slots()[0].weight - 0.7).abs() < 0.02);
        assert!((p.slots()[1].weight - 0.3).abs() < 0.02);
    }

    #[test]
    fn objective_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<LabColor> = (0..600)
            .map(|_| {
                LabColor::new(
                    rng.random_range(0.0..100.0),
                    rng.random_range(-80.0..80.0),
                    rng.random_range(-80.0..80.0),
                )
            })
            .collect();
        let r = kmeans(&samples, 6, 9).unwrap();
        for w in r.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", r.objective_trace);
        }
    }

    #[test]
    fn chromatic_rule() {
        let rule = ChromaticRule::default();
        assert_eq!(rule.classify(&Palette::solid(LabColor::new(0.0, 0.0, 0.0))), ChromaticFlag::Achromatic);
        assert_eq!(rule.classify(&Palette::solid(LabColor::new(50.0, 2.0, -3.0))), ChromaticFlag::Achromatic);
        assert_eq!(rule.classify(&Palette::solid(LabColor::new(100.0, 0.0, 0.0))), ChromaticFlag::Chromatic);
        let red = srgb_to_lab(SrgbColor::new(255, 0, 0));
        assert_eq!(is_chromatic(&Palette::solid(red), &rule), ChromaticFlag::Chromatic);
    }

    #[test]
    fn palette_validation() {
        let c = LabColor::new(50.0, 0.0, 0.0);
        let slot = |w| PaletteSlot { lab: c, weight: w };
        assert!(Palette::new(vec![slot(0.6), slot(0.4)]).is_ok());
        assert!(Palette::new(vec![slot(0.4), slot(0.6)]).is_err());
        assert!(Palette::new(vec![slot(0.5), slot(0.4)]).is_err());
        assert!(Palette::new(vec![]).is_err());
    }

    #[test]
    fn annotate_uniform_swatches() {
        let table = ColorTable::css();
        let cfg = AnnotateConfig::default();
        let red = annotate(&MaskedImage::uniform(8, 8, SrgbColor::new(255, 0, 0)), table, &cfg, 1).unwrap();
        assert_eq!(red.bk, BkFamily::Red);
        assert_eq!(red.css.name, "red");
        assert_eq!(red.chromatic, ChromaticFlag::Chromatic);
        let black = annotate(&MaskedImage::uniform(8, 8, SrgbColor::new(0, 0, 0)), table, &cfg, 1).unwrap();
        assert_eq!(black.chromatic, ChromaticFlag::Achromatic);
    }

    #[test]
    fn annotate_firebrick_goldenrod_mixture() {
        let table = ColorTable::css();
        let fb = table.get("firebrick").unwrap().srgb;
        let gr = table.get("goldenrod").unwrap().srgb;
        let mut pixels = vec![fb; 70];
        pixels.extend(vec![gr; 30]);
        let img = MaskedImage::new(10, 10, pixels, vec![true; 100]).unwrap();
        let ann = annotate(&img, table, &AnnotateConfig::default(), 4).unwrap();
        assert_eq!(ann.css.name, "firebrick");
        // Nearest prototype under CIEDE2000 (brute force over the nine) is brown.
        assert_eq!(ann.bk, nearest_bk(table.get("firebrick").unwrap().centroid));
        assert_eq!(ann.bk, ann.css.family);
        let (srgb, _) = lab_to_srgb(ann.palette.dominant());
        assert_eq!(srgb, fb);
    }
}
