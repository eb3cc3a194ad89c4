//! Berlin–Kay families, the CSS named-color table and Monk skin-tone levels.
//!
//! Every CSS color belongs to exactly one of nine Berlin–Kay families. The
//! family prototype is the CSS color of the same name; a CSS color's family is
//! the nearest prototype under CIEDE2000 unless the override list says
//! otherwise. Tables are immutable once built.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colorspace::{delta_e_2000, srgb_to_lab, LabColor, SrgbColor};
use crate::palette::ChromaticRule;

const CSS_DATA: &str = include_str!("../data/css_colors.tsv");
const OVERRIDE_DATA: &str = include_str!("../data/family_overrides.tsv");
const MONK_DATA: &str = include_str!("../data/monk_anchors.tsv");

#[derive(Debug, Error, PartialEq)]
pub enum NamingError {
    #[error("no candidate colors for family {0}")]
    EmptyCandidateSet(BkFamily),
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("unknown color name `{0}`")]
    UnknownName(String),
}

/// The nine basic color terms. Declaration order is the tie-break order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum BkFamily {
    Red,
    Orange,
    Yellow,
    Green,
    Blue,
    Purple,
    Pink,
    Brown,
    White,
}

impl BkFamily {
    pub const ALL: [BkFamily; 9] = [
        BkFamily::Red,
        BkFamily::Orange,
        BkFamily::Yellow,
        BkFamily::Green,
        BkFamily::Blue,
        BkFamily::Purple,
        BkFamily::Pink,
        BkFamily::Brown,
        BkFamily::White,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BkFamily::Red => "red",
            BkFamily::Orange => "orange",
            BkFamily::Yellow => "yellow",
            BkFamily::Green => "green",
            BkFamily::Blue => "blue",
            BkFamily::Purple => "purple",
            BkFamily::Pink => "pink",
            BkFamily::Brown => "brown",
            BkFamily::White => "white",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BkFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BkFamily {
    type Err = NamingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BkFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| NamingError::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedColor {
    pub name: String,
    pub srgb: SrgbColor,
    pub centroid: LabColor,
    pub family: BkFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableSubset {
    Full,
    ChromaticOnly,
    DataDriven,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorTable {
    entries: Vec<NamedColor>,
    subset: TableSubset,
}

/// One parsed line of a color data file.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorLine {
    pub name: String,
    pub srgb: SrgbColor,
    pub family: Option<BkFamily>,
}

/// Parses `name<TAB>#RRGGBB[<TAB>family]` lines. `#` starts a comment line.
pub fn parse_color_lines(text: &str) -> Result<Vec<ColorLine>, NamingError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let parse_err = |detail: &str| NamingError::Parse { line: i + 1, detail: detail.to_string() };
        let mut fields = line.split('\t');
        let name = fields.next().map(str::trim).filter(|s| !s.is_empty());
        let name = name.ok_or_else(|| parse_err("missing name"))?;
        let hex = fields.next().ok_or_else(|| parse_err("missing #RRGGBB field"))?;
        let srgb = SrgbColor::from_hex(hex.trim()).ok_or_else(|| parse_err("bad hex color"))?;
        let family = match fields.next().map(str::trim) {
            None | Some("") => None,
            Some(f) => Some(f.parse().map_err(|_| parse_err(&format!("unknown family `{f}`")))?),
        };
        if fields.next().is_some() {
            return Err(parse_err("too many fields"));
        }
        out.push(ColorLine { name: name.to_string(), srgb, family });
    }
    Ok(out)
}

/// The nine family prototypes, in family order.
pub fn bk_prototypes() -> &'static [(BkFamily, LabColor); 9] {
    static PROTOTYPES: OnceLock<[(BkFamily, LabColor); 9]> = OnceLock::new();
    PROTOTYPES.get_or_init(|| {
        let lines = parse_color_lines(CSS_DATA).expect("built-in CSS table parses");
        BkFamily::ALL.map(|f| {
            let line = lines
                .iter()
                .find(|l| l.name == f.as_str())
                .expect("every family has a CSS color of the same name");
            (f, srgb_to_lab(line.srgb))
        })
    })
}

/// Nearest prototype under CIEDE2000; ties go to the earlier family.
pub fn nearest_prototype(p: LabColor, prototypes: &[(BkFamily, LabColor)]) -> BkFamily {
    let mut best = (f64::INFINITY, BkFamily::White);
    for &(family, proto) in prototypes {
        let d = delta_e_2000(p, proto).value();
        if d < best.0 || (d == best.0 && family < best.1) {
            best = (d, family);
        }
    }
    best.1
}

/// Family of a color given its centroid. An override for `name` wins.
pub fn assign_family(
    name: &str,
    centroid: LabColor,
    prototypes: &[(BkFamily, LabColor)],
    overrides: &BTreeMap<String, BkFamily>,
) -> BkFamily {
    overrides
        .get(name)
        .copied()
        .unwrap_or_else(|| nearest_prototype(centroid, prototypes))
}

pub fn nearest_bk(p: LabColor) -> BkFamily {
    nearest_prototype(p, bk_prototypes())
}

/// The shipped override list, keyed by color name.
pub fn builtin_overrides() -> BTreeMap<String, BkFamily> {
    parse_color_lines(OVERRIDE_DATA)
        .expect("built-in override list parses")
        .into_iter()
        .filter_map(|l| l.family.map(|f| (l.name, f)))
        .collect()
}

impl ColorTable {
    /// Builds the full table from color lines: aliases sharing an sRGB value
    /// collapse to the lexicographically smallest name.
    pub fn from_lines(
        lines: &[ColorLine],
        overrides: &BTreeMap<String, BkFamily>,
    ) -> Result<Self, NamingError> {
        let mut by_srgb: BTreeMap<(u8, u8, u8), &str> = BTreeMap::new();
        for line in lines {
            let key = (line.srgb.r, line.srgb.g, line.srgb.b);
            let slot = by_srgb.entry(key).or_insert(&line.name);
            if line.name.as_str() < *slot {
                *slot = &line.name;
            }
        }
        let canonical: BTreeSet<&str> = by_srgb.values().copied().collect();
        let prototypes = bk_prototypes();
        let mut entries: Vec<NamedColor> = lines
            .iter()
            .filter(|l| canonical.contains(l.name.as_str()))
            .map(|l| {
                let centroid = srgb_to_lab(l.srgb);
                let family = l
                    .family
                    .unwrap_or_else(|| assign_family(&l.name, centroid, prototypes, overrides));
                NamedColor { name: l.name.clone(), srgb: l.srgb, centroid, family }
            })
            .collect();
        entries.sort_by(|a, b| a.name.cmp(&b.name));
        entries.dedup_by(|a, b| a.name == b.name);
        if entries.is_empty() {
            return Err(NamingError::Parse { line: 0, detail: "empty color table".into() });
        }
        Ok(Self { entries, subset: TableSubset::Full })
    }

    /// The built-in CSS table.
    pub fn css() -> &'static ColorTable {
        static TABLE: OnceLock<ColorTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            let lines = parse_color_lines(CSS_DATA).expect("built-in CSS table parses");
            ColorTable::from_lines(&lines, &builtin_overrides()).expect("built-in CSS table is valid")
        })
    }

    /// Drops entries whose centroid the chromatic rule calls achromatic,
    /// keeping white-family entries regardless.
    pub fn chromatic_only(&self, rule: &ChromaticRule) -> ColorTable {
        let entries = self
            .entries
            .iter()
            .filter(|e| e.family == BkFamily::White || rule.is_chromatic_color(e.centroid))
            .cloned()
            .collect();
        ColorTable { entries, subset: TableSubset::ChromaticOnly }
    }

    /// Restricts the table to the names observed in some corpus.
    pub fn data_driven<'a>(
        &self,
        observed: impl IntoIterator<Item = &'a str>,
    ) -> Result<ColorTable, NamingError> {
        let names: BTreeSet<&str> = observed.into_iter().collect();
        for name in &names {
            if self.get(name).is_none() {
                return Err(NamingError::UnknownName(name.to_string()));
            }
        }
        let entries: Vec<NamedColor> =
            self.entries.iter().filter(|e| names.contains(e.name.as_str())).cloned().collect();
        if entries.is_empty() {
            return Err(NamingError::Parse { line: 0, detail: "no observed names".into() });
        }
        Ok(ColorTable { entries, subset: TableSubset::DataDriven })
    }

    pub fn subset(&self) -> TableSubset {
        self.subset
    }

    pub fn entries(&self) -> &[NamedColor] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&NamedColor> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn family_entries(&self, family: BkFamily) -> impl Iterator<Item = &NamedColor> {
        self.entries.iter().filter(move |e| e.family == family)
    }

    /// Entry minimizing CIEDE2000 to `p`, optionally within one family.
    /// Ties go to the earlier table entry.
    pub fn nearest(&self, p: LabColor, family: Option<BkFamily>) -> Result<&NamedColor, NamingError> {
        let mut best: Option<(f64, &NamedColor)> = None;
        for entry in self.entries.iter().filter(|e| family.is_none_or(|f| e.family == f)) {
            let d = delta_e_2000(p, entry.centroid).value();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, entry));
            }
        }
        best.map(|(_, e)| e)
            .ok_or(NamingError::EmptyCandidateSet(family.unwrap_or(BkFamily::White)))
    }
}

/// Free-function form of [`ColorTable::nearest`].
pub fn nearest_css(
    p: LabColor,
    table: &ColorTable,
    family: Option<BkFamily>,
) -> Result<&NamedColor, NamingError> {
    table.nearest(p, family)
}

/// A Monk Skin Tone level in 1..=10.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct MonkLevel(u8);

impl MonkLevel {
    pub fn new(level: u8) -> Option<Self> {
        (1..=10).contains(&level).then_some(Self(level))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for MonkLevel {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        MonkLevel::new(v).ok_or_else(|| format!("Monk level {v} outside 1..=10"))
    }
}

impl From<MonkLevel> for u8 {
    fn from(m: MonkLevel) -> u8 {
        m.0
    }
}

/// The ten Monk scale swatches in LAB, lightest first.
pub fn monk_anchors() -> &'static [LabColor; 10] {
    static ANCHORS: OnceLock<[LabColor; 10]> = OnceLock::new();
    ANCHORS.get_or_init(|| {
        let lines = parse_color_lines(MONK_DATA).expect("built-in Monk anchors parse");
        assert_eq!(lines.len(), 10, "Monk scale has ten swatches");
        std::array::from_fn(|i| srgb_to_lab(lines[i].srgb))
    })
}

/// Nearest Monk anchor under CIEDE2000; ties go to the lower level.
pub fn monk_level(p: LabColor) -> MonkLevel {
    let mut best = (f64::INFINITY, 1u8);
    for (i, anchor) in monk_anchors().iter().enumerate() {
        let d = delta_e_2000(p, *anchor).value();
        if d < best.0 {
            best = (d, i as u8 + 1);
        }
    }
    MonkLevel(best.1)
}
