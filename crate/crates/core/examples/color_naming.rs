//! Two-level naming of a few sRGB colors: Berlin-Kay family, then the
//! nearest CSS name inside that family.
//!
//! cargo run --example color_naming

use chromaline::naming::{bk_prototypes, nearest_bk};
use chromaline::palette::name_color;
use chromaline::{delta_e_2000, srgb_to_lab, ColorTable, SrgbColor};

fn main() {
    let table = ColorTable::css();
    println!("{} CSS colors in the table", table.len());
    for (family, proto) in bk_prototypes() {
        println!("  {family:<7} prototype {proto}  ({} names)", table.family_entries(*family).count());
    }

    for hex in ["#b22222", "#daa520", "#d8bfd8", "#1e90ff", "#808000", "#f5f5f5"] {
        let c = SrgbColor::from_hex(hex).unwrap();
        let lab = srgb_to_lab(c);
        let css = name_color(lab, table);
        println!(
            "{hex}  {lab}  family={:<7} css={:<16} dE00={:.2}",
            nearest_bk(lab),
            css.name,
            delta_e_2000(lab, css.centroid).value()
        );
    }
}
