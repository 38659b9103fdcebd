//! Binary greyscale PGM (`P5`) reading and writing.

use crate::error::DecodeError;
use crate::image::Image;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major samples, each `<= maxval`.
    pub samples: Vec<u16>,
}

impl Pgm {
    /// Intensities scaled to `[0, 1]` by `maxval`.
    pub fn to_image(&self) -> Image {
        let scale = 1.0 / f64::from(self.maxval);
        let data = self.samples.iter().map(|&s| f64::from(s) * scale).collect();
        Image::from_vec(self.height, self.width, data).expect("sample count checked on decode")
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&b) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn header_uint(&mut self, what: &str) -> Result<u32, DecodeError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if self.pos >= self.bytes.len() {
                DecodeError::Truncated(self.pos)
            } else {
                DecodeError::Header(format!("expected {what}"))
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| DecodeError::Header(format!("{what} out of range")))
    }
}

/// Decodes a single `P5` image. Bytes after the raster are ignored.
pub fn decode(bytes: &[u8]) -> Result<Pgm, DecodeError> {
    if bytes.len() < 2 {
        return Err(DecodeError::Truncated(bytes.len()));
    }
    if &bytes[..2] != b"P5" {
        return Err(DecodeError::BadMagic);
    }
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.header_uint("width")? as usize;
    let height = cur.header_uint("height")? as usize;
    let maxval = cur.header_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(DecodeError::Header("zero image dimension".into()));
    }
    if maxval == 0 || maxval > u32::from(u16::MAX) {
        return Err(DecodeError::Header(format!("maxval {maxval} not in 1..=65535")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        Some(_) => return Err(DecodeError::Header("missing raster separator".into())),
        None => return Err(DecodeError::Truncated(cur.pos)),
    }
    let bytes_per_sample = if maxval < 256 { 1 } else { 2 };
    let count = width
        .checked_mul(height)
        .ok_or_else(|| DecodeError::Header("image too large".into()))?;
    let raster_len = count
        .checked_mul(bytes_per_sample)
        .ok_or_else(|| DecodeError::Header("image too large".into()))?;
    let raster = bytes
        .get(cur.pos..)
        .filter(|r| r.len() >= raster_len)
        .ok_or(DecodeError::Truncated(bytes.len()))?;
    let samples: Vec<u16> = if bytes_per_sample == 1 {
        raster[..count].iter().map(|&b| u16::from(b)).collect()
    } else {
        raster[..raster_len]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    if let Some(bad) = samples.iter().find(|&&s| u32::from(s) > maxval) {
        return Err(DecodeError::Payload(format!(
            "sample {bad} exceeds maxval {maxval}"
        )));
    }
    Ok(Pgm {
        width,
        height,
        maxval: maxval as u16,
        samples,
    })
}

/// Encodes 8-bit greyscale pixels as `P5` with maxval 255.
pub fn encode(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}
