//! Six-slot palette of a striped garment with a partial mask, plus the
//! chromatic flag.
//!
//! cargo run --example palette_extraction

use chromaline::palette::{annotate, AnnotateConfig};
use chromaline::{ColorTable, MaskedImage, SrgbColor};

fn main() {
    let (w, h) = (40, 60);
    let navy = SrgbColor::new(0, 0, 128);
    let gold = SrgbColor::new(255, 215, 0);
    let background = SrgbColor::new(255, 255, 255);
    let mut pixels = Vec::with_capacity(w * h);
    let mut mask = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            // Garment occupies the central columns; background is ignored.
            let inside = (5..35).contains(&x);
            mask.push(inside);
            pixels.push(if !inside { background } else if y % 4 == 0 { gold } else { navy });
        }
    }
    let img = MaskedImage::new(w, h, pixels, mask).unwrap();
    let ann = annotate(&img, ColorTable::css(), &AnnotateConfig::default(), 42).unwrap();

    for (i, slot) in ann.palette.slots().iter().enumerate() {
        println!("c{}  weight {:.3}  {}", i + 1, slot.weight, slot.lab);
    }
    println!("dominant: family={} css={} ({:?})", ann.bk, ann.css.name, ann.chromatic);
}
