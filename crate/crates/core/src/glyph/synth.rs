//! Procedural stroke-lattice glyphs and deterministic style transforms.
//!
//! A glyph is 3 to 12 thick line segments between points of a 5×5 lattice.
//! Styles are morphological and geometric warps of the glyph, so that a
//! paired corpus has a known, learnable mapping that is not the identity.

use std::fmt;
use std::str::FromStr;

use super::image::{binarize, GlyphImage, DEFAULT_THRESHOLD};
use crate::rng::Rng;

const LATTICE: usize = 5;
pub const MIN_STROKES: usize = 3;
pub const MAX_STROKES: usize = 12;

/// Draw the glyph for character index `char_index` under corpus `seed`.
pub fn stroke_glyph(seed: u64, char_index: u64, size: usize) -> GlyphImage {
    let mut rng = Rng::with_stream(seed, char_index.wrapping_add(1));
    let margin = size as f64 / 8.0;
    let step = (size as f64 - 1.0 - 2.0 * margin) / (LATTICE - 1) as f64;
    let radius = (size as f64 / 32.0 + 0.5).max(1.0);
    let point = |gx: usize, gy: usize| (margin + gx as f64 * step, margin + gy as f64 * step);

    const DIRS: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)];
    let strokes = rng.range_inclusive(MIN_STROKES, MAX_STROKES);
    let mut img = GlyphImage::filled(size, size, 0);
    for _ in 0..strokes {
        let (sx, sy) = (rng.below(LATTICE), rng.below(LATTICE));
        let len = rng.range_inclusive(1, 3) as isize;
        let (dx, dy) = DIRS[rng.below(DIRS.len())];
        // Clip to the lattice; a stroke that clips to nothing flips direction.
        let clip = |v: usize, d: isize| (v as isize + d * len).clamp(0, LATTICE as isize - 1) as usize;
        let (mut ex, mut ey) = (clip(sx, dx), clip(sy, dy));
        if (ex, ey) == (sx, sy) {
            ex = clip(sx, -dx);
            ey = clip(sy, -dy);
        }
        draw_segment(&mut img, point(sx, sy), point(ex, ey), radius);
    }
    img
}

fn draw_segment(img: &mut GlyphImage, a: (f64, f64), b: (f64, f64), radius: f64) {
    let (w, h) = (img.width(), img.height());
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let x_lo = (a.0.min(b.0) - radius).floor().max(0.0) as usize;
    let x_hi = ((a.0.max(b.0) + radius).ceil() as usize).min(w - 1);
    let y_lo = (a.1.min(b.1) - radius).floor().max(0.0) as usize;
    let y_hi = ((a.1.max(b.1) + radius).ceil() as usize).min(h - 1);
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let (px, py) = (x as f64 - a.0, y as f64 - a.1);
            let t = if len2 > 0.0 {
                ((px * vx + py * vy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (cx, cy) = (px - t * vx, py - t * vy);
            if cx * cx + cy * cy <= radius * radius {
                img.set(x, y, 255);
            }
        }
    }
}

/// Deterministic stand-in for a calligraphic style.
#[derive(Clone, Debug, PartialEq)]
pub enum StyleTransform {
    Identity,
    /// Square dilation with the given radius.
    Thicken { radius: usize },
    /// Square erosion with the given radius.
    Thin { radius: usize },
    /// Horizontal shear about the image center: `x' = x + factor·(y − cy)`.
    Shear { factor: f64 },
    /// Horizontal sinusoidal displacement by row.
    Wave { amplitude: f64, period: f64 },
    /// Applied left to right.
    Composite(Vec<StyleTransform>),
}

impl StyleTransform {
    pub fn apply(&self, img: &GlyphImage) -> GlyphImage {
        match self {
            StyleTransform::Identity => img.clone(),
            StyleTransform::Thicken { radius } => morph(img, *radius, true),
            StyleTransform::Thin { radius } => morph(img, *radius, false),
            StyleTransform::Shear { factor } => {
                let cy = (img.height() as f64 - 1.0) / 2.0;
                warp_rows(img, |y| factor * (y as f64 - cy))
            }
            StyleTransform::Wave { amplitude, period } => warp_rows(img, |y| {
                amplitude * (2.0 * std::f64::consts::PI * y as f64 / period).sin()
            }),
            StyleTransform::Composite(parts) => parts.iter().fold(img.clone(), |acc, s| s.apply(&acc)),
        }
    }
}

fn morph(img: &GlyphImage, radius: usize, dilate: bool) -> GlyphImage {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let r = radius as isize;
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let mut any = false;
            let mut all = true;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (sx, sy) = (x + dx, y + dy);
                    // Outside the canvas counts as background.
                    let ink = sx >= 0 && sy >= 0 && sx < w && sy < h && img.get(sx as usize, sy as usize) == 255;
                    any |= ink;
                    all &= ink;
                }
            }
            let on = if dilate { any } else { all };
            out.set(x as usize, y as usize, if on { 255 } else { 0 });
        }
    }
    out
}

/// Shift each row horizontally by `offset(y)` pixels (nearest neighbor).
fn warp_rows(img: &GlyphImage, offset: impl Fn(usize) -> f64) -> GlyphImage {
    let (w, h) = (img.width(), img.height());
    let mut out = GlyphImage::filled(w, h, 0);
    for y in 0..h {
        let shift = offset(y);
        for x in 0..w {
            let sx = (x as f64 - shift).round();
            if sx >= 0.0 && (sx as usize) < w {
                out.set(x, y, img.get(sx as usize, y));
            }
        }
    }
    binarize(&out, DEFAULT_THRESHOLD)
}

impl fmt::Display for StyleTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StyleTransform::Identity => write!(f, "identity"),
            StyleTransform::Thicken { radius } => write!(f, "thicken:{radius}"),
            StyleTransform::Thin { radius } => write!(f, "thin:{radius}"),
            StyleTransform::Shear { factor } => write!(f, "shear:{factor}"),
            StyleTransform::Wave { amplitude, period } => write!(f, "wave:{amplitude},{period}"),
            StyleTransform::Composite(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

/// Parses `name[:args]` terms joined by `+`, e.g. `thicken:1+shear:0.25`.
/// Omitted arguments take defaults (radius 1, shear 0.3, wave 1.5,12).
impl FromStr for StyleTransform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let terms: Vec<&str> = s.split('+').map(str::trim).collect();
        if terms.len() > 1 {
            return terms
                .iter()
                .map(|t| t.parse())
                .collect::<Result<Vec<_>, _>>()
                .map(StyleTransform::Composite);
        }
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let nums: Vec<f64> = match args {
            Some(a) => a
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad style argument {v:?} in {s:?}")))
                .collect::<Result<_, _>>()?,
            None => Vec::new(),
        };
        let arg = |i: usize, default: f64| nums.get(i).copied().unwrap_or(default);
        let radius = |v: f64| -> Result<usize, String> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(format!("radius must be a nonnegative integer in {s:?}"))
            }
        };
        match name {
            "identity" => Ok(StyleTransform::Identity),
            "thicken" => Ok(StyleTransform::Thicken { radius: radius(arg(0, 1.0))? }),
            "thin" => Ok(StyleTransform::Thin { radius: radius(arg(0, 1.0))? }),
            "shear" => Ok(StyleTransform::Shear { factor: arg(0, 0.3) }),
            "wave" => {
                let period = arg(1, 12.0);
                if period <= 0.0 {
                    return Err(format!("wave period must be positive in {s:?}"));
                }
                Ok(StyleTransform::Wave {
                    amplitude: arg(0, 1.5),
                    period,
                })
            }
            other => Err(format!(
                "unknown style {other:?} (expected identity, thicken, thin, shear, wave or a '+' composite)"
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glyphs_are_deterministic_and_nonblank() {
        for id in 0..30 {
            let a = stroke_glyph(5, id, 32);
            assert_eq!(a, stroke_glyph(5, id, 32));
            assert!(a.ink_count() > 0);
            assert!(a.is_binary());
        }
        assert_ne!(stroke_glyph(5, 0, 32), stroke_glyph(5, 1, 32));
        assert_ne!(stroke_glyph(5, 0, 32), stroke_glyph(6, 0, 32));
    }

    #[test]
    fn thicken_is_extensive_and_thin_is_anti_extensive() {
        for id in 0..20 {
            let g = stroke_glyph(1, id, 32);
            let thick = StyleTransform::Thicken { radius: 1 }.apply(&g);
            let thin = StyleTransform::Thin { radius: 1 }.apply(&g);
            for i in 0..g.pixels().len() {
                if g.pixels()[i] == 255 {
                    assert_eq!(thick.pixels()[i], 255);
                }
                if thin.pixels()[i] == 255 {
                    assert_eq!(g.pixels()[i], 255);
                }
            }
        }
    }

    #[test]
    fn shear_moves_rows_by_their_offset() {
        let mut img = GlyphImage::filled(9, 9, 0);
        for y in 0..9 {
            img.set(4, y, 255);
        }
        let out = StyleTransform::Shear { factor: 0.5 }.apply(&img);
        assert_eq!(out.get(4, 4), 255);
        assert_eq!(out.get(6, 8), 255);
        assert_eq!(out.get(2, 0), 255);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["identity", "thicken:1", "thin:2", "shear:0.25", "wave:1.5,12", "thicken:1+shear:0.25"] {
            let st: StyleTransform = s.parse().unwrap();
            assert_eq!(st.to_string(), s);
        }
        assert_eq!("thicken".parse::<StyleTransform>().unwrap(), StyleTransform::Thicken { radius: 1 });
        assert!("blur".parse::<StyleTransform>().is_err());
        assert!("thicken:0.5".parse::<StyleTransform>().is_err());
        assert!("wave:1,0".parse::<StyleTransform>().is_err());
    }
}
