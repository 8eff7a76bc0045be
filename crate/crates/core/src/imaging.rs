//! Grayscale glyph rasters, PGM I/O, binarization and size normalization.
//!
//! Ink convention: dark pixels are ink. A gray pixel becomes ink (1) when its
//! intensity is at or below the threshold.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImagingError {
    #[error("bad magic number: expected P2 or P5, found {0:?}")]
    BadMagic(String),
    #[error("header field `{field}`: {reason}")]
    BadHeader { field: &'static str, reason: String },
    #[error("zero dimensions: header field `{0}` is 0")]
    ZeroDimension(&'static str),
    #[error("header field `maxval`: {0} exceeds 255")]
    MaxvalTooLarge(u32),
    #[error("truncated pixel data: expected {expected} values, found {found}")]
    TruncatedPixels { expected: usize, found: usize },
    #[error("pixel value {value} exceeds maxval {maxval}")]
    PixelAboveMaxval { value: u32, maxval: u32 },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("empty glyph")]
    EmptyGlyph,
    #[error("target size must be at least 1")]
    ZeroSize,
}

pub type Result<T> = std::result::Result<T, ImagingError>;

/// 8-bit grayscale raster, row-major, top row first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidImage(format!(
                "dimensions {width}x{height} must be positive"
            )));
        }
        if pixels.len() != width * height {
            return Err(ImagingError::InvalidImage(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
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

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// 256-bin intensity histogram.
    pub fn histogram(&self) -> [u64; 256] {
        let mut hist = [0u64; 256];
        for &p in &self.pixels {
            hist[p as usize] += 1;
        }
        hist
    }
}

/// Binary raster with 0 = background, 1 = ink.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidImage(format!(
                "dimensions {width}x{height} must be positive"
            )));
        }
        if pixels.len() != width * height {
            return Err(ImagingError::InvalidImage(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|&&p| p > 1) {
            return Err(ImagingError::InvalidImage(format!(
                "binary pixel value {bad} is not 0 or 1"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// All-background image.
    pub fn blank(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    /// Parses rows of text where `#`, `X`, `1` or `@` mark ink and anything
    /// else is background. All rows must have the same length.
    pub fn from_ascii(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut pixels = Vec::with_capacity(width * height);
        for (i, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(ImagingError::InvalidImage(format!(
                    "ascii row {i} has {} columns, expected {width}",
                    row.chars().count()
                )));
            }
            pixels.extend(
                row.chars()
                    .map(|ch| u8::from(matches!(ch, '#' | 'X' | '1' | '@'))),
            );
        }
        Self::new(width, height, pixels)
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

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, ink: bool) {
        self.pixels[row * self.width + col] = u8::from(ink);
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }

    pub fn ink_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == 1).count()
    }

    /// Renders ink as black (0) and background as white (255).
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .map(|&p| if p == 1 { 0 } else { 255 })
                .collect(),
        }
    }
}

/// PGM tokenizer: whitespace separated tokens, `#` starts a comment running to
/// end of line.
struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn header_number(&mut self, field: &'static str) -> Result<u32> {
        let tok = self.token().ok_or(ImagingError::BadHeader {
            field,
            reason: "missing".into(),
        })?;
        let text = std::str::from_utf8(tok).unwrap_or("<non-utf8>");
        text.parse::<u32>().map_err(|_| ImagingError::BadHeader {
            field,
            reason: format!("not a nonnegative integer: {text:?}"),
        })
    }
}

/// Reads a PGM file (ASCII `P2` or binary `P5`) with maxval at most 255.
///
/// Samples are rescaled to 0..=255 when maxval is below 255.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let magic = bytes.get(..2).unwrap_or(bytes);
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        other => {
            return Err(ImagingError::BadMagic(
                String::from_utf8_lossy(other).into(),
            ))
        }
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    if cur.pos < bytes.len() && !bytes[cur.pos].is_ascii_whitespace() && bytes[cur.pos] != b'#' {
        return Err(ImagingError::BadMagic(
            String::from_utf8_lossy(&bytes[..3.min(bytes.len())]).into(),
        ));
    }
    let width = cur.header_number("width")?;
    let height = cur.header_number("height")?;
    let maxval = cur.header_number("maxval")?;
    if width == 0 {
        return Err(ImagingError::ZeroDimension("width"));
    }
    if height == 0 {
        return Err(ImagingError::ZeroDimension("height"));
    }
    if maxval == 0 {
        return Err(ImagingError::BadHeader {
            field: "maxval",
            reason: "must be at least 1".into(),
        });
    }
    if maxval > 255 {
        return Err(ImagingError::MaxvalTooLarge(maxval));
    }
    let (width, height) = (width as usize, height as usize);
    let expected = width * height;

    let raw: Vec<u32> = if binary {
        // exactly one whitespace byte separates maxval from the raster
        let start = cur.pos + 1;
        let data = bytes.get(start..).unwrap_or(&[]);
        if data.len() < expected {
            return Err(ImagingError::TruncatedPixels {
                expected,
                found: data.len(),
            });
        }
        data[..expected].iter().map(|&b| u32::from(b)).collect()
    } else {
        let mut values = Vec::with_capacity(expected);
        while values.len() < expected {
            let Some(tok) = cur.token() else { break };
            let text = std::str::from_utf8(tok).unwrap_or("<non-utf8>");
            let v = text.parse::<u32>().map_err(|_| ImagingError::BadHeader {
                field: "pixel",
                reason: format!("not a nonnegative integer: {text:?}"),
            })?;
            values.push(v);
        }
        if values.len() < expected {
            return Err(ImagingError::TruncatedPixels {
                expected,
                found: values.len(),
            });
        }
        values
    };

    let mut pixels = Vec::with_capacity(expected);
    for v in raw {
        if v > maxval {
            return Err(ImagingError::PixelAboveMaxval { value: v, maxval });
        }
        let scaled = if maxval == 255 {
            v
        } else {
            (v * 255 + maxval / 2) / maxval
        };
        pixels.push(scaled as u8);
    }
    GrayImage::new(width, height, pixels)
}

/// Writes an ASCII `P2` file with header `P2\n<w> <h>\n255\n`, one image row
/// per line.
pub fn write_pgm_p2(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n255\n", img.width, img.height);
    for row in img.pixels.chunks(img.width) {
        for (i, p) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{p}");
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// Writes a binary `P5` file with the same header layout as [`write_pgm_p2`].
pub fn write_pgm_p5(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Between-class variance (scaled by total²) of splitting the histogram into
/// intensities `<= t` and `> t`. Zero when either class is empty.
pub fn between_class_variance(hist: &[u64; 256], t: usize) -> f64 {
    let total: u64 = hist.iter().sum();
    let w0: u64 = hist[..=t].iter().sum();
    let w1 = total - w0;
    if w0 == 0 || w1 == 0 {
        return 0.0;
    }
    let sum0: u64 = hist[..=t]
        .iter()
        .enumerate()
        .map(|(i, &h)| i as u64 * h)
        .sum();
    let sum_all: u64 = hist.iter().enumerate().map(|(i, &h)| i as u64 * h).sum();
    let sum1 = sum_all - sum0;
    // w0*w1*(mu0-mu1)^2 == (sum0*w1 - sum1*w0)^2 / (w0*w1), exact numerator
    let diff = sum0 as i128 * w1 as i128 - sum1 as i128 * w0 as i128;
    (diff as f64) * (diff as f64) / (w0 as f64 * w1 as f64)
}

/// Otsu's global threshold. Returns the ink mask and the chosen threshold.
///
/// The threshold maximizes between-class variance over 0..=255; ties go to
/// the smallest threshold. A uniform image has no separable classes and
/// yields threshold 0 with an all-background mask.
pub fn binarize_otsu(img: &GrayImage) -> (BinaryImage, u8) {
    let hist = img.histogram();
    if hist.iter().filter(|&&h| h > 0).count() < 2 {
        let blank = BinaryImage {
            width: img.width,
            height: img.height,
            pixels: vec![0; img.pixels.len()],
        };
        return (blank, 0);
    }

    let total: u64 = hist.iter().sum();
    let sum_all: i128 = hist
        .iter()
        .enumerate()
        .map(|(i, &h)| i as i128 * h as i128)
        .sum();
    let mut w0: i128 = 0;
    let mut sum0: i128 = 0;
    let mut best_t = 0usize;
    // variance is diff^2 / (w0*w1); candidates are compared exactly so that
    // ties resolve to the smallest threshold
    let mut best: Option<(u128, u128)> = None;
    for (t, &count) in hist.iter().enumerate() {
        w0 += count as i128;
        sum0 += t as i128 * count as i128;
        let w1 = total as i128 - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let diff = sum0 * w1 - (sum_all - sum0) * w0;
        let num = diff.unsigned_abs();
        let den = (w0 * w1) as u128;
        let better = match best {
            None => true,
            Some((bn, bd)) => ratio_gt(num, den, bn, bd),
        };
        if better {
            best = Some((num, den));
            best_t = t;
        }
    }
    let t = best_t as u8;
    (binarize_fixed(img, t), t)
}

/// Exact comparison of a²/b > c²/d using 256-bit intermediate products.
fn ratio_gt(a: u128, b: u128, c: u128, d: u128) -> bool {
    mul_wide(mul_wide_small(a, a), d) > mul_wide(mul_wide_small(c, c), b)
}

/// 256-bit unsigned product helpers: (hi, lo) pairs.
fn mul_wide_small(x: u128, y: u128) -> (u128, u128) {
    let mask = u64::MAX as u128;
    let (x0, x1) = (x & mask, x >> 64);
    let (y0, y1) = (y & mask, y >> 64);
    let p00 = x0 * y0;
    let p01 = x0 * y1;
    let p10 = x1 * y0;
    let p11 = x1 * y1;
    let mid = (p00 >> 64) + (p01 & mask) + (p10 & mask);
    let lo = (p00 & mask) | (mid << 64);
    let hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
    (hi, lo)
}

fn mul_wide((hi, lo): (u128, u128), y: u128) -> (u128, u128, u128) {
    let (lo_hi, lo_lo) = mul_wide_small(lo, y);
    let (hi_hi, hi_lo) = mul_wide_small(hi, y);
    let (mid, carry) = lo_hi.overflowing_add(hi_lo);
    (hi_hi + u128::from(carry), mid, lo_lo)
}

/// Ink mask of pixels with intensity `<= t`.
pub fn binarize_fixed(img: &GrayImage, t: u8) -> BinaryImage {
    BinaryImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|&p| u8::from(p <= t)).collect(),
    }
}

/// Minimal axis-aligned sub-rectangle containing every ink pixel.
pub fn crop_to_bbox(img: &BinaryImage) -> Result<BinaryImage> {
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for r in 0..img.height {
        for c in 0..img.width {
            if img.get(r, c) == 1 {
                bounds = Some(match bounds {
                    None => (r, r, c, c),
                    Some((r0, r1, c0, c1)) => (r0.min(r), r1.max(r), c0.min(c), c1.max(c)),
                });
            }
        }
    }
    let (r0, r1, c0, c1) = bounds.ok_or(ImagingError::EmptyGlyph)?;
    let (h, w) = (r1 - r0 + 1, c1 - c0 + 1);
    let mut pixels = Vec::with_capacity(h * w);
    for r in r0..=r1 {
        pixels.extend_from_slice(&img.pixels[r * img.width + c0..=r * img.width + c1]);
    }
    Ok(BinaryImage {
        width: w,
        height: h,
        pixels,
    })
}

/// Nearest-neighbour resample to `height x width`: output (r, c) samples
/// input (floor(r*H/height), floor(c*W/width)).
pub fn resize_nearest(img: &BinaryImage, height: usize, width: usize) -> Result<BinaryImage> {
    if height == 0 || width == 0 {
        return Err(ImagingError::ZeroSize);
    }
    let mut pixels = Vec::with_capacity(height * width);
    for r in 0..height {
        let sr = r * img.height / height;
        for c in 0..width {
            let sc = c * img.width / width;
            pixels.push(img.get(sr, sc));
        }
    }
    Ok(BinaryImage {
        width,
        height,
        pixels,
    })
}

/// Nearest-neighbour resample to an `n x n` square.
pub fn resize_to_square(img: &BinaryImage, n: usize) -> Result<BinaryImage> {
    if n == 0 {
        return Err(ImagingError::ZeroSize);
    }
    if img.ink_count() == 0 {
        return Err(ImagingError::EmptyGlyph);
    }
    resize_nearest(img, n, n)
}

/// Crop to the ink bounding box and resample to `n x n`.
pub fn normalize_binary(img: &BinaryImage, n: usize) -> Result<BinaryImage> {
    if n == 0 {
        return Err(ImagingError::ZeroSize);
    }
    resize_to_square(&crop_to_bbox(img)?, n)
}

/// Otsu binarization followed by [`normalize_binary`].
pub fn normalize_gray(img: &GrayImage, n: usize) -> Result<BinaryImage> {
    let (mask, _) = binarize_otsu(img);
    normalize_binary(&mask, n)
}
