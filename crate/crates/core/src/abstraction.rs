//! The four garment-crop representations: full color, grayscale, silhouette
//! and edge map.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::colorspace::{lab_to_srgb, srgb_to_lab, LabColor, SrgbColor};
use crate::palette::MaskedImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbstractionLevel {
    FullColor,
    Grayscale,
    Silhouette,
    EdgeMap,
}

impl AbstractionLevel {
    pub const ALL: [AbstractionLevel; 4] = [
        AbstractionLevel::FullColor,
        AbstractionLevel::Grayscale,
        AbstractionLevel::Silhouette,
        AbstractionLevel::EdgeMap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AbstractionLevel::FullColor => "full_color",
            AbstractionLevel::Grayscale => "grayscale",
            AbstractionLevel::Silhouette => "silhouette",
            AbstractionLevel::EdgeMap => "edge_map",
        }
    }
}

impl fmt::Display for AbstractionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for AbstractionLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_");
        AbstractionLevel::ALL
            .into_iter()
            .find(|l| l.as_str() == norm)
            .ok_or_else(|| format!("unknown abstraction level `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbstractionConfig {
    /// Edge threshold as a fraction of the largest gradient magnitude.
    pub edge_threshold: f64,
}

impl Default for AbstractionConfig {
    fn default() -> Self {
        Self { edge_threshold: 0.2 }
    }
}

const WHITE: SrgbColor = SrgbColor::new(255, 255, 255);
const BLACK: SrgbColor = SrgbColor::new(0, 0, 0);

/// Neutral gray with the same L* as `c`.
pub fn gray_of(c: SrgbColor) -> SrgbColor {
    lab_to_srgb(LabColor::new(srgb_to_lab(c).l, 0.0, 0.0)).0
}

pub fn transform(img: &MaskedImage, level: AbstractionLevel, config: &AbstractionConfig) -> MaskedImage {
    match level {
        AbstractionLevel::FullColor => img.clone(),
        AbstractionLevel::Grayscale => grayscale(img),
        AbstractionLevel::Silhouette => silhouette(img),
        AbstractionLevel::EdgeMap => edge_map(img, config.edge_threshold),
    }
}

pub fn grayscale(img: &MaskedImage) -> MaskedImage {
    img.with_pixels(img.pixels().iter().map(|&p| gray_of(p)).collect())
}

pub fn silhouette(img: &MaskedImage) -> MaskedImage {
    img.with_pixels(img.mask().iter().map(|&m| if m { WHITE } else { BLACK }).collect())
}

/// Sobel gradient magnitude of L* over the masked garment (background
/// counts as L* = 0, so the garment contour registers), thresholded at
/// `threshold` times the maximum magnitude.
pub fn edge_map(img: &MaskedImage, threshold: f64) -> MaskedImage {
    let (w, h) = (img.width(), img.height());
    let luminance: Vec<f64> = img
        .pixels()
        .iter()
        .zip(img.mask())
        .map(|(&p, &m)| if m { srgb_to_lab(p).l } else { 0.0 })
        .collect();
    let at = |x: isize, y: isize| {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        luminance[y * w + x]
    };
    let mut magnitude = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            magnitude[y as usize * w + x as usize] = gx.hypot(gy);
        }
    }
    let max = magnitude.iter().cloned().fold(0.0, f64::max);
    let cut = threshold * max;
    let pixels = magnitude
        .iter()
        .map(|&m| if max > 0.0 && m >= cut && m > 0.0 { WHITE } else { BLACK })
        .collect();
    img.with_pixels(pixels)
}
