use std::fs;
use std::path::Path;

use crate::error::{ImageError, TensorError};
use crate::tensor::{Real, Tensor};

/// Default binarization threshold: pixels `>= 127` become ink.
pub const DEFAULT_THRESHOLD: u8 = 127;

/// Grayscale image, row-major, one byte per pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlyphImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GlyphImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if pixels.len() != width * height {
            return Err(ImageError::Invalid(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(GlyphImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GlyphImage {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Number of pixels at 255.
    pub fn ink_count(&self) -> usize {
        self.pixels.iter().filter(|p| **p == 255).count()
    }

    pub fn is_binary(&self) -> bool {
        self.pixels.iter().all(|p| *p == 0 || *p == 255)
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in self.pixels.chunks(self.width.max(1)) {
            pixels.extend(row.iter().rev());
        }
        GlyphImage { pixels, ..*self }
    }
}

/// Binary PGM (`P5`, maxval 255).
pub fn encode_pgm(img: &GlyphImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GlyphImage, ImageError> {
    let mut pos = 0;
    let mut token = || -> Result<String, ImageError> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(ImageError::Header("unexpected end of header".into())),
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    match magic.as_str() {
        "P5" => {}
        "P1" | "P2" | "P3" | "P4" | "P6" => {
            return Err(ImageError::Unsupported(format!("{magic} (only binary P5 is supported)")))
        }
        _ => return Err(ImageError::Header(format!("bad magic {magic:?}"))),
    }
    let mut number = |what: &str| -> Result<usize, ImageError> {
        let t = token()?;
        t.parse::<usize>()
            .map_err(|_| ImageError::Header(format!("{what} is not a number: {t:?}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval != 255 {
        return Err(ImageError::Unsupported(format!("maxval {maxval} (expected 255)")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(ImageError::Header("missing separator after maxval".into())),
    }
    let expected = width * height;
    let data = &bytes[pos..];
    if data.len() < expected {
        return Err(ImageError::Truncated {
            expected,
            found: data.len(),
        });
    }
    GlyphImage::new(width, height, data[..expected].to_vec())
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GlyphImage, ImageError> {
    decode_pgm(&fs::read(path)?)
}

pub fn save_pgm(img: &GlyphImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}

/// Pixels `>= threshold` become 255, the rest 0.
pub fn binarize(img: &GlyphImage, threshold: u8) -> GlyphImage {
    GlyphImage {
        pixels: img
            .pixels
            .iter()
            .map(|p| if *p >= threshold { 255 } else { 0 })
            .collect(),
        ..*img
    }
}

/// Bilinear resampling to `side × side` with pixel-center alignment.
pub fn resize(img: &GlyphImage, side: usize) -> Result<GlyphImage, ImageError> {
    if side == 0 || img.width == 0 || img.height == 0 {
        return Err(ImageError::Invalid("resize needs a nonempty source and target".into()));
    }
    if img.width == side && img.height == side {
        return Ok(img.clone());
    }
    let sample = |dst: usize, src_len: usize| -> (usize, usize, f64) {
        let scale = src_len as f64 / side as f64;
        let s = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(src_len - 1);
        (i0, i1, s - i0 as f64)
    };
    let mut pixels = Vec::with_capacity(side * side);
    for oy in 0..side {
        let (y0, y1, fy) = sample(oy, img.height);
        for ox in 0..side {
            let (x0, x1, fx) = sample(ox, img.width);
            let p = |x, y| f64::from(img.get(x, y));
            let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
            let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GlyphImage::new(side, side, pixels)
}

/// Median over a `k × k` window with edge replication. `k` must be odd.
pub fn median_filter(img: &GlyphImage, k: usize) -> Result<GlyphImage, ImageError> {
    if k == 0 || k % 2 == 0 {
        return Err(ImageError::Invalid(format!("median kernel must be odd and positive, got {k}")));
    }
    if k == 1 {
        return Ok(img.clone());
    }
    let r = (k / 2) as isize;
    let (w, h) = (img.width as isize, img.height as isize);
    let mut window = Vec::with_capacity(k * k);
    let mut pixels = Vec::with_capacity(img.pixels.len());
    for y in 0..h {
        for x in 0..w {
            window.clear();
            for dy in -r..=r {
                let sy = (y + dy).clamp(0, h - 1) as usize;
                for dx in -r..=r {
                    let sx = (x + dx).clamp(0, w - 1) as usize;
                    window.push(img.get(sx, sy));
                }
            }
            let mid = window.len() / 2;
            let (_, m, _) = window.select_nth_unstable(mid);
            pixels.push(*m);
        }
    }
    GlyphImage::new(img.width, img.height, pixels)
}

/// `0 → -1`, `255 → +1`, linear in between. Shape `1×1×h×w`.
pub fn to_tensor<T: Real>(img: &GlyphImage) -> Tensor<T> {
    Tensor::new(
        [1, 1, img.height, img.width],
        img.pixels
            .iter()
            .map(|p| T::from_f64(f64::from(*p) / 127.5 - 1.0))
            .collect(),
    )
    .expect("pixel count matches shape")
}

/// Inverse of [`to_tensor`] for binary images: values `> 0` become 255.
pub fn from_tensor<T: Real>(t: &Tensor<T>) -> Result<GlyphImage, TensorError> {
    let [n, c, h, w] = t.shape();
    if n != 1 || c != 1 {
        return Err(TensorError::Shape {
            op: "from_tensor",
            detail: format!("expected 1x1xHxW, got {:?}", t.shape()),
        });
    }
    let pixels = t
        .data()
        .iter()
        .map(|v| if *v > T::zero() { 255 } else { 0 })
        .collect();
    Ok(GlyphImage {
        width: w,
        height: h,
        pixels,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::rng::Rng;

    #[test]
    fn pgm_two_by_two_round_trip() {
        let img = GlyphImage::new(2, 2, vec![0, 255, 255, 0]).unwrap();
        let bytes = encode_pgm(&img);
        assert_eq!(&bytes[..11], b"P5\n2 2\n255\n");
        assert_eq!(decode_pgm(&bytes).unwrap(), img);
    }

    #[test]
    fn pgm_errors() {
        assert!(matches!(decode_pgm(b"P2\n2 2\n255\n0 0 0 0\n"), Err(ImageError::Unsupported(_))));
        assert!(matches!(decode_pgm(b"P5\n2 2\n255\n\x00"), Err(ImageError::Truncated { expected: 4, found: 1 })));
        assert!(matches!(decode_pgm(b"P5\n2 x\n255\n"), Err(ImageError::Header(_))));
        assert!(matches!(decode_pgm(b"XX"), Err(ImageError::Header(_))));
        assert!(matches!(decode_pgm(b"P5\n1 1\n15\n\x00"), Err(ImageError::Unsupported(_))));
    }

    #[test]
    fn pgm_header_comments() {
        let img = decode_pgm(b"P5 # made by hand\n1 2\n# another\n255\n\x07\x09").unwrap();
        assert_eq!((img.width(), img.height(), img.pixels()), (1, 2, &[7u8, 9][..]));
    }

    #[test]
    fn pgm_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.pgm");
        let img = GlyphImage::new(3, 2, vec![1, 2, 3, 4, 5, 250]).unwrap();
        save_pgm(&img, &path).unwrap();
        assert_eq!(load_pgm(&path).unwrap(), img);
    }

    #[test]
    fn binarize_cases() {
        let all128 = GlyphImage::filled(3, 3, 128);
        assert!(binarize(&all128, 127).pixels().iter().all(|p| *p == 255));
        let max254 = GlyphImage::new(2, 1, vec![254, 10]).unwrap();
        assert!(binarize(&max254, 255).pixels().iter().all(|p| *p == 0));
    }

    #[test]
    fn resize_cases() {
        let img = GlyphImage::new(2, 2, vec![1, 2, 3, 4]).unwrap();
        assert_eq!(resize(&img, 2).unwrap(), img);
        let c = GlyphImage::filled(5, 3, 77);
        assert!(resize(&c, 7).unwrap().pixels().iter().all(|p| *p == 77));
        assert!(resize(&c, 0).is_err());
    }

    #[test]
    fn checkerboard_downscale_matches_hand_average() {
        let px: Vec<u8> = (0..16).map(|i| if (i / 4 + i % 4) % 2 == 0 { 255 } else { 0 }).collect();
        let board = GlyphImage::new(4, 4, px.clone()).unwrap();
        let out = resize(&board, 2).unwrap();
        // Each output sample sits at the center of a 2x2 source block.
        for oy in 0..2 {
            for ox in 0..2 {
                let sum: u32 = (0..2)
                    .flat_map(|dy| (0..2).map(move |dx| (dy, dx)))
                    .map(|(dy, dx)| u32::from(px[(2 * oy + dy) * 4 + 2 * ox + dx]))
                    .sum();
                let want = (f64::from(sum) / 4.0).round() as u8;
                assert_eq!(out.get(ox, oy), want);
            }
        }
    }

    #[test]
    fn median_cases() {
        let c = GlyphImage::filled(6, 5, 255);
        assert_eq!(median_filter(&c, 3).unwrap(), c);
        let mut dot = GlyphImage::filled(7, 7, 0);
        dot.set(3, 3, 255);
        assert_eq!(median_filter(&dot, 3).unwrap().ink_count(), 0);
        assert_eq!(median_filter(&dot, 1).unwrap(), dot);
        assert!(median_filter(&dot, 4).is_err());
    }

    /// Sort-based median with explicit edge replication.
    fn brute_median(img: &GlyphImage, k: usize) -> GlyphImage {
        let r = (k / 2) as i64;
        let (w, h) = (img.width() as i64, img.height() as i64);
        let mut out = img.clone();
        for y in 0..h {
            for x in 0..w {
                let mut vals = Vec::new();
                for dy in -r..=r {
                    for dx in -r..=r {
                        let sx = (x + dx).max(0).min(w - 1);
                        let sy = (y + dy).max(0).min(h - 1);
                        vals.push(img.get(sx as usize, sy as usize));
                    }
                }
                vals.sort();
                out.set(x as usize, y as usize, vals[vals.len() / 2]);
            }
        }
        out
    }

    #[test]
    fn median_matches_sort_oracle() {
        let mut rng = Rng::new(17);
        for k in [3, 5] {
            for _ in 0..20 {
                let px = (0..256).map(|_| if rng.bernoulli(0.4) { 255 } else { 0 }).collect();
                let img = GlyphImage::new(16, 16, px).unwrap();
                let got = median_filter(&img, k).unwrap();
                assert_eq!(got, brute_median(&img, k));
                assert!(got.is_binary());
            }
        }
    }

    #[test]
    fn tensor_conversion() {
        let img = GlyphImage::new(3, 1, vec![0, 255, 0]).unwrap();
        let t = to_tensor::<f32>(&img);
        assert_eq!(t.data(), &[-1.0, 1.0, -1.0]);
        assert_eq!(from_tensor(&t).unwrap(), img);
        let blank = to_tensor::<f32>(&GlyphImage::filled(2, 2, 0));
        assert!(blank.data().iter().all(|v| *v == -1.0));
        let t = Tensor::new([1, 1, 1, 2], vec![0.3f32, -0.3]).unwrap();
        assert_eq!(from_tensor(&t).unwrap().pixels(), &[255, 0]);
        assert!(from_tensor(&Tensor::<f32>::zeros([2, 1, 2, 2])).is_err());
    }

    proptest! {
        #[test]
        fn pgm_round_trip(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let mut rng = Rng::new(seed);
            let px = (0..w * h).map(|_| rng.below(256) as u8).collect();
            let img = GlyphImage::new(w, h, px).unwrap();
            prop_assert_eq!(decode_pgm(&encode_pgm(&img)).unwrap(), img);
        }

        #[test]
        fn binarize_is_idempotent(px in proptest::collection::vec(any::<u8>(), 16), t in any::<u8>()) {
            let img = GlyphImage::new(4, 4, px).unwrap();
            let once = binarize(&img, t);
            prop_assert!(once.is_binary());
            prop_assert_eq!(binarize(&once, t), once);
        }

        #[test]
        fn binary_tensor_round_trip(bits in proptest::collection::vec(any::<bool>(), 20)) {
            let img = GlyphImage::new(5, 4, bits.iter().map(|b| if *b { 255 } else { 0 }).collect()).unwrap();
            prop_assert_eq!(from_tensor(&to_tensor::<f32>(&img)).unwrap(), img);
        }
    }
}
