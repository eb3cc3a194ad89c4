//! Manifests (JSON Lines), PNG images and JSON artifacts.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::colorspace::SrgbColor;
use crate::error::{Error, Result};
use crate::naming::{BkFamily, ColorTable, MonkLevel};
use crate::palette::{ChromaticFlag, MaskedImage, Palette};

pub const YEAR_BOUNDS: (i32, i32) = (1991, 2024);

/// One garment: where its pixels live, its metadata and its color annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: String,
    pub image_path: String,
    pub mask_path: String,
    pub designer: String,
    pub season: String,
    /// `None` when no metadata was supplied.
    pub year: Option<i32>,
    pub palette: Palette,
    pub chromatic: ChromaticFlag,
    pub bk_c1: BkFamily,
    pub css_c1: String,
    #[serde(default)]
    pub monk: Option<MonkLevel>,
}

/// Checks applied to every record on load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifestCheck {
    pub year_bounds: Option<(i32, i32)>,
}

impl Default for ManifestCheck {
    fn default() -> Self {
        Self { year_bounds: Some(YEAR_BOUNDS) }
    }
}

impl AnnotationRecord {
    pub fn validate(&self, check: &ManifestCheck, table: &ColorTable) -> Result<()> {
        let violation = |detail: String| Error::InvariantViolation { id: self.id.clone(), detail };
        if let (Some(year), Some((lo, hi))) = (self.year, check.year_bounds) {
            if !(lo..=hi).contains(&year) {
                return Err(violation(format!("year {year} outside [{lo}, {hi}]")));
            }
        }
        let entry = table
            .get(&self.css_c1)
            .ok_or_else(|| violation(format!("unknown CSS name `{}`", self.css_c1)))?;
        if entry.family != self.bk_c1 {
            return Err(violation(format!(
                "css_c1 `{}` belongs to {}, not bk_c1 {}",
                self.css_c1, entry.family, self.bk_c1
            )));
        }
        Ok(())
    }
}

pub fn save_manifest(records: &[AnnotationRecord], path: &Path) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn load_manifest(path: &Path) -> Result<Vec<AnnotationRecord>> {
    load_manifest_with(path, &ManifestCheck::default())
}

pub fn load_manifest_with(path: &Path, check: &ManifestCheck) -> Result<Vec<AnnotationRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let table = ColorTable::css();
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AnnotationRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            detail: e.to_string(),
        })?;
        record.validate(check, table)?;
        records.push(record);
    }
    Ok(records)
}

/// Resolves a manifest-relative path.
pub fn resolve(manifest: &Path, relative: &str) -> PathBuf {
    let rel = Path::new(relative);
    if rel.is_absolute() {
        return rel.to_path_buf();
    }
    manifest.parent().unwrap_or(Path::new(".")).join(rel)
}

fn image_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image { path: path.to_path_buf(), detail: e.to_string() }
}

pub fn load_rgb(path: &Path) -> Result<(usize, usize, Vec<SrgbColor>)> {
    let img = image::open(path).map_err(|e| image_error(path, e))?.to_rgb8();
    let (w, h) = img.dimensions();
    let pixels = img.pixels().map(|p| SrgbColor::new(p[0], p[1], p[2])).collect();
    Ok((w as usize, h as usize, pixels))
}

/// Any nonzero mask channel marks garment.
pub fn load_masked_image(image_path: &Path, mask_path: &Path) -> Result<MaskedImage> {
    let (w, h, pixels) = load_rgb(image_path)?;
    let mask_img = image::open(mask_path).map_err(|e| image_error(mask_path, e))?.to_luma8();
    let (mw, mh) = mask_img.dimensions();
    if (mw as usize, mh as usize) != (w, h) {
        return Err(image_error(mask_path, format!("mask is {mw}x{mh}, image is {w}x{h}")));
    }
    let mask = mask_img.pixels().map(|p| p[0] > 0).collect();
    MaskedImage::new(w, h, pixels, mask).map_err(|e| image_error(image_path, e))
}

pub fn save_rgb(path: &Path, width: usize, height: usize, pixels: &[SrgbColor]) -> Result<()> {
    ensure_parent(path)?;
    let raw: Vec<u8> = pixels.iter().flat_map(|p| [p.r, p.g, p.b]).collect();
    image::save_buffer(path, &raw, width as u32, height as u32, image::ColorType::Rgb8)
        .map_err(|e| image_error(path, e))
}

pub fn save_mask(path: &Path, width: usize, height: usize, mask: &[bool]) -> Result<()> {
    ensure_parent(path)?;
    let raw: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    image::save_buffer(path, &raw, width as u32, height as u32, image::ColorType::L8)
        .map_err(|e| image_error(path, e))
}

pub fn save_masked_image(img: &MaskedImage, image_path: &Path, mask_path: &Path) -> Result<()> {
    save_rgb(image_path, img.width(), img.height(), img.pixels())?;
    save_mask(mask_path, img.width(), img.height(), img.mask())
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    ensure_parent(path)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        detail: e.to_string(),
    })
}
