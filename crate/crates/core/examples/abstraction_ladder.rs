//! The four representations of one garment crop, each summarized by its
//! dominant color. Writes PNGs when given an output directory.
//!
//! cargo run --example abstraction_ladder -- [out_dir]

use chromaline::abstraction::{transform, AbstractionConfig, AbstractionLevel};
use chromaline::colorspace::chroma;
use chromaline::io::save_masked_image;
use chromaline::palette::{annotate, AnnotateConfig};
use chromaline::{ColorTable, MaskedImage, SrgbColor};

fn main() -> chromaline::Result<()> {
    let out_dir = std::env::args().nth(1).map(std::path::PathBuf::from);
    let (w, h) = (32, 32);
    let mut pixels = Vec::with_capacity(w * h);
    let mut mask = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 - 15.5, y as f64 - 15.5);
            mask.push(dx * dx + dy * dy < 144.0);
            pixels.push(if x < 16 { SrgbColor::new(200, 30, 60) } else { SrgbColor::new(30, 120, 90) });
        }
    }
    let img = MaskedImage::new(w, h, pixels, mask)?;
    let config = AbstractionConfig::default();

    for level in AbstractionLevel::ALL {
        let t = transform(&img, level, &config);
        let ann = annotate(&t, ColorTable::css(), &AnnotateConfig::default(), 0)?;
        let dom = ann.palette.dominant();
        println!("{level:<10}  dominant {dom}  chroma {:>6.2}  css={}", chroma(dom), ann.css.name);
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir).map_err(|e| chromaline::Error::io(dir, e))?;
            save_masked_image(&t, &dir.join(format!("{level}.png")), &dir.join(format!("{level}_mask.png")))?;
        }
    }
    Ok(())
}
