//! Hierarchical garment color naming.
//!
//! The crate extracts a six-slot dominant palette from a masked garment image,
//! names the dominant color at two resolutions (nine Berlin–Kay families, then
//! CSS named colors within a family) and refines it to a CIELAB point
//! constrained around the chosen CSS centroid. Around that pipeline sit
//! desk-scale linear classifiers, image abstraction transforms, a synthetic
//! corpus generator and the evaluation metrics used to compare pipeline stages.
//!
//! ```
//! use chromaline::colorspace::{srgb_to_lab, SrgbColor};
//! use chromaline::naming::{nearest_bk, BkFamily, ColorTable};
//!
//! let lab = srgb_to_lab(SrgbColor::new(255, 0, 0));
//! assert_eq!(nearest_bk(lab), BkFamily::Red);
//! assert_eq!(ColorTable::css().nearest(lab, None).unwrap().name, "red");
//! ```

pub mod abstraction;
pub mod classify;
pub mod cli;
pub mod colorspace;
pub mod error;
pub mod experiments;
pub mod io;
pub mod metrics;
pub mod naming;
pub mod palette;
pub mod pipeline;
pub mod synth;

pub use colorspace::{delta_e_2000, lab_to_srgb, srgb_to_lab, DeltaE, LabColor, SrgbColor};
pub use error::{Error, Result};
pub use naming::{BkFamily, ColorTable, MonkLevel, NamedColor};
pub use palette::{MaskedImage, Palette};
