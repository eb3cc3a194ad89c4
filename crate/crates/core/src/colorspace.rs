//! sRGB / CIELAB conversions (D65, 2° observer) and the CIEDE2000 color difference.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

/// An 8-bit sRGB color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SrgbColor {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl SrgbColor {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    /// Parses `#RRGGBB` (the leading `#` is optional).
    pub fn from_hex(s: &str) -> Option<Self> {
        let s = s.strip_prefix('#').unwrap_or(s);
        if s.len() != 6 || !s.is_ascii() {
            return None;
        }
        let channel = |i: usize| u8::from_str_radix(&s[i..i + 2], 16).ok();
        Some(Self::new(channel(0)?, channel(2)?, channel(4)?))
    }

    pub fn to_hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }
}

/// A point in CIELAB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct LabColor {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl LabColor {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Self { l, a, b }
    }

    /// `L` within [0, 100] and all coordinates finite.
    pub fn is_valid(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && (0.0..=100.0).contains(&self.l)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.l, self.a, self.b]
    }

    /// Euclidean distance in LAB (CIE76), used for geometry, not for reporting.
    pub fn euclidean(&self, other: &LabColor) -> f64 {
        let (dl, da, db) = (self.l - other.l, self.a - other.a, self.b - other.b);
        (dl * dl + da * da + db * db).sqrt()
    }
}

impl From<[f64; 3]> for LabColor {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<LabColor> for [f64; 3] {
    fn from(c: LabColor) -> Self {
        c.to_array()
    }
}

impl fmt::Display for LabColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L={:.2} a={:.2} b={:.2}", self.l, self.a, self.b)
    }
}

/// A CIEDE2000 difference. Always non-negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct DeltaE(pub f64);

impl DeltaE {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for DeltaE {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}", self.0)
    }
}

/// Whether `lab_to_srgb` had to clip any channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gamut {
    Inside,
    Clipped,
}

// Linear sRGB -> XYZ (IEC 61966-2-1, D65).
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.240_454_2, -1.537_138_5, -0.498_531_4],
    [-0.969_266_0, 1.876_010_8, 0.041_556_0],
    [0.055_643_4, -0.204_025_9, 1.057_225_2],
];

// The white point is the image of linear (1, 1, 1) so that neutral sRGB maps to a* = b* = 0.
const WHITE: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

fn decode_gamma(v: f64) -> f64 {
    if v <= 0.040_45 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

fn encode_gamma(v: f64) -> f64 {
    if v <= 0.003_130_8 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

fn lab_f_inv(f: f64) -> f64 {
    let f3 = f * f * f;
    if f3 > EPSILON {
        f3
    } else {
        (116.0 * f - 16.0) / KAPPA
    }
}

fn mul(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn srgb_to_lab(c: SrgbColor) -> LabColor {
    let lin = [c.r, c.g, c.b].map(|v| decode_gamma(f64::from(v) / 255.0));
    let xyz = mul(&RGB_TO_XYZ, lin);
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    LabColor::new(116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

/// Inverse of [`srgb_to_lab`]. Out-of-gamut channels are clipped to [0, 255].
pub fn lab_to_srgb(c: LabColor) -> (SrgbColor, Gamut) {
    let fy = (c.l + 16.0) / 116.0;
    let fx = fy + c.a / 500.0;
    let fz = fy - c.b / 200.0;
    let xyz = [
        lab_f_inv(fx) * WHITE[0],
        lab_f_inv(fy) * WHITE[1],
        lab_f_inv(fz) * WHITE[2],
    ];
    let lin = mul(&XYZ_TO_RGB, xyz);
    let mut gamut = Gamut::Inside;
    let mut channel = |v: f64| {
        let v = encode_gamma(v.max(0.0)) * 255.0;
        // Tolerate rounding noise at the gamut boundary.
        if !(-0.5..=255.5).contains(&v) || v.is_nan() {
            gamut = Gamut::Clipped;
        }
        v.round().clamp(0.0, 255.0) as u8
    };
    let out = SrgbColor::new(channel(lin[0]), channel(lin[1]), channel(lin[2]));
    if lin.iter().any(|&v| v < -1e-6) {
        gamut = Gamut::Clipped;
    }
    (out, gamut)
}

/// C* = sqrt(a² + b²).
pub fn chroma(c: LabColor) -> f64 {
    c.a.hypot(c.b)
}

/// Hue angle atan2(b, a) in [0, 2π); 0 for neutral colors.
pub fn hue_angle(c: LabColor) -> f64 {
    if c.a == 0.0 && c.b == 0.0 {
        return 0.0;
    }
    let h = c.b.atan2(c.a);
    if h < 0.0 {
        h + 2.0 * PI
    } else {
        h
    }
}

/// CIEDE2000 with kL = kC = kH = 1.
pub fn delta_e_2000(x: LabColor, y: LabColor) -> DeltaE {
    const POW25_7: f64 = 6_103_515_625.0; // 25^7

    let c1 = chroma(x);
    let c2 = chroma(y);
    let c_bar = 0.5 * (c1 + c2);
    let c_bar7 = c_bar.powi(7);
    let g = 0.5 * (1.0 - (c_bar7 / (c_bar7 + POW25_7)).sqrt());

    let a1p = (1.0 + g) * x.a;
    let a2p = (1.0 + g) * y.a;
    let c1p = a1p.hypot(x.b);
    let c2p = a2p.hypot(y.b);

    let hue = |b: f64, ap: f64| {
        if b == 0.0 && ap == 0.0 {
            0.0
        } else {
            let h = b.atan2(ap).to_degrees();
            if h < 0.0 {
                h + 360.0
            } else {
                h
            }
        }
    };
    let h1p = hue(x.b, a1p);
    let h2p = hue(y.b, a2p);

    let dl = y.l - x.l;
    let dc = c2p - c1p;
    let dh_angle = if c1p * c2p == 0.0 {
        0.0
    } else {
        let d = h2p - h1p;
        if d > 180.0 {
            d - 360.0
        } else if d < -180.0 {
            d + 360.0
        } else {
            d
        }
    };
    let dh = 2.0 * (c1p * c2p).sqrt() * (dh_angle.to_radians() / 2.0).sin();

    let l_bar = 0.5 * (x.l + y.l);
    let cp_bar = 0.5 * (c1p + c2p);
    let hp_bar = if c1p * c2p == 0.0 {
        h1p + h2p
    } else if (h1p - h2p).abs() <= 180.0 {
        0.5 * (h1p + h2p)
    } else if h1p + h2p < 360.0 {
        0.5 * (h1p + h2p + 360.0)
    } else {
        0.5 * (h1p + h2p - 360.0)
    };

    let t = 1.0 - 0.17 * (hp_bar - 30.0).to_radians().cos()
        + 0.24 * (2.0 * hp_bar).to_radians().cos()
        + 0.32 * (3.0 * hp_bar + 6.0).to_radians().cos()
        - 0.20 * (4.0 * hp_bar - 63.0).to_radians().cos();
    let d_theta = 30.0 * (-((hp_bar - 275.0) / 25.0).powi(2)).exp();
    let cp_bar7 = cp_bar.powi(7);
    let r_c = 2.0 * (cp_bar7 / (cp_bar7 + POW25_7)).sqrt();
    let l50 = (l_bar - 50.0).powi(2);
    let s_l = 1.0 + 0.015 * l50 / (20.0 + l50).sqrt();
    let s_c = 1.0 + 0.045 * cp_bar;
    let s_h = 1.0 + 0.015 * cp_bar * t;
    let r_t = -(2.0 * d_theta).to_radians().sin() * r_c;

    let tl = dl / s_l;
    let tc = dc / s_c;
    let th = dh / s_h;
    DeltaE((tl * tl + tc * tc + th * th + r_t * tc * th).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_and_black() {
        let w = srgb_to_lab(SrgbColor::new(255, 255, 255));
        assert!((w.l - 100.0).abs() < 1e-9);
        assert!(w.a.abs() < 0.01 && w.b.abs() < 0.01);
        let k = srgb_to_lab(SrgbColor::new(0, 0, 0));
        assert_eq!((k.l, k.a, k.b), (0.0, 0.0, 0.0));
        assert_eq!(lab_to_srgb(LabColor::new(100.0, 0.0, 0.0)).0, SrgbColor::new(255, 255, 255));
        assert_eq!(lab_to_srgb(LabColor::new(0.0, 0.0, 0.0)).0, SrgbColor::new(0, 0, 0));
    }

    #[test]
    fn red_matches_reference_conversion() {
        // Reference values from an independent sRGB -> LAB implementation (D65).
        let red = srgb_to_lab(SrgbColor::new(255, 0, 0));
        assert!((red.l - 53.2408).abs() < 0.05, "{red}");
        assert!((red.a - 80.0925).abs() < 0.05, "{red}");
        assert!((red.b - 67.2032).abs() < 0.05, "{red}");
    }

    #[test]
    fn out_of_gamut_is_flagged() {
        let (c, g) = lab_to_srgb(LabColor::new(50.0, 120.0, -120.0));
        assert_eq!(g, Gamut::Clipped);
        assert_eq!(c.g, 0);
        let (_, g) = lab_to_srgb(srgb_to_lab(SrgbColor::new(10, 200, 30)));
        assert_eq!(g, Gamut::Inside);
    }

    #[test]
    fn chroma_examples() {
        assert_eq!(chroma(LabColor::new(50.0, 0.0, 0.0)), 0.0);
        assert_eq!(chroma(LabColor::new(50.0, 3.0, 4.0)), 5.0);
        assert!((chroma(LabColor::new(53.0, 80.09, 67.20)) - 104.55).abs() < 0.01);
    }

    #[test]
    fn delta_e_identity_and_degenerate_hue() {
        let p = LabColor::new(40.0, 12.0, -7.0);
        assert_eq!(delta_e_2000(p, p).value(), 0.0);
        let g1 = LabColor::new(50.0, 0.0, 0.0);
        let g2 = LabColor::new(60.0, 0.0, 0.0);
        assert!(delta_e_2000(g1, g2).value() > 0.0);
    }

    #[test]
    fn hex_parsing() {
        assert_eq!(SrgbColor::from_hex("#b22222"), Some(SrgbColor::new(178, 34, 34)));
        assert_eq!(SrgbColor::from_hex("B22222"), Some(SrgbColor::new(178, 34, 34)));
        assert_eq!(SrgbColor::from_hex("#b2222"), None);
        assert_eq!(SrgbColor::new(1, 2, 255).to_hex(), "#0102ff");
    }
}
