//! Netpbm ingestion: PGM (P2/P5) and PPM (P3/P6) with maxval 255.
//!
//! Color input is collapsed to Rec. 601 luma,
//! `round(0.299 R + 0.587 G + 0.114 B)`.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Row-major 8-bit grayscale image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Raster(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(GrayImage {
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

    /// Copy out the `side x side` block whose top-left corner is `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, side: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(side * side);
        for r in top..top + side {
            out.extend_from_slice(&self.pixels[r * self.width + left..r * self.width + left + side]);
        }
        out
    }

    /// Binary PGM (P5) encoding.
    pub fn write_pgm(&self, mut sink: impl Write) -> Result<()> {
        write!(sink, "P5\n{} {}\n255\n", self.width, self.height)?;
        sink.write_all(&self.pixels)?;
        Ok(())
    }
}

pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    y.round().clamp(0.0, 255.0) as u8
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
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

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Raster(match self.bytes.get(self.pos) {
                None => format!("truncated data while reading {what}"),
                Some(_) => format!("malformed {what}"),
            }));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Raster(format!("{what} out of range")))
    }
}

/// Parse a PGM or PPM stream into grayscale intensities.
pub fn ingest_raster(mut source: impl Read) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::Raster("missing netpbm magic number".into()));
    }
    let (channels, binary) = match bytes[1] {
        b'2' => (1, false),
        b'3' => (3, false),
        b'5' => (1, true),
        b'6' => (3, true),
        other => {
            return Err(Error::Raster(format!(
                "unsupported netpbm variant P{}",
                other as char
            )))
        }
    };
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 2,
    };
    if !cur.bytes.get(cur.pos).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(Error::Raster("malformed header after magic number".into()));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Raster(format!("empty image {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::Raster(format!("maxval {maxval} unsupported (need 255)")));
    }
    let samples = width * height * channels;
    let raw: Vec<u8> = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        if !cur.bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(Error::Raster("malformed header before pixel data".into()));
        }
        let start = cur.pos + 1;
        let data = bytes.get(start..start + samples).ok_or_else(|| {
            Error::Raster(format!(
                "truncated pixel data: need {samples} bytes, have {}",
                bytes.len().saturating_sub(start)
            ))
        })?;
        data.to_vec()
    } else {
        let mut v = Vec::with_capacity(samples);
        for i in 0..samples {
            let s = cur.number("pixel value").map_err(|e| match e {
                Error::Raster(m) if m.starts_with("truncated") => Error::Raster(format!(
                    "truncated pixel data: need {samples} samples, have {i}"
                )),
                other => other,
            })?;
            if s > 255 {
                return Err(Error::Raster(format!("sample {s} exceeds maxval 255")));
            }
            v.push(s as u8);
        }
        v
    };
    let pixels = if channels == 1 {
        raw
    } else {
        raw.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect()
    };
    GrayImage::new(width, height, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_ascii_pgm() {
        let mut text = String::from("P2\n# a comment\n3 2\n255\n");
        text.push_str(&["200"; 6].join(" "));
        let img = ingest_raster(text.as_bytes()).unwrap();
        assert_eq!((img.width(), img.height()), (3, 2));
        assert!(img.pixels().iter().all(|&p| p == 200));
    }

    #[test]
    fn binary_pgm_round_trip() {
        let img = GrayImage::new(4, 3, (0..12).map(|i| i * 20).collect()).unwrap();
        let mut buf = Vec::new();
        img.write_pgm(&mut buf).unwrap();
        assert_eq!(ingest_raster(buf.as_slice()).unwrap(), img);
    }

    #[test]
    fn rgb_collapses_to_luma() {
        assert_eq!(luma(255, 255, 255), 255);
        assert_eq!(luma(255, 0, 0), 76);
        assert_eq!(luma(0, 0, 0), 0);
        let mut ppm = b"P6 2 1 255\n".to_vec();
        ppm.extend_from_slice(&[255, 255, 255, 255, 0, 0]);
        assert_eq!(ingest_raster(ppm.as_slice()).unwrap().pixels(), &[255, 76]);
        let img = ingest_raster("P3 1 1 255 0 255 0".as_bytes()).unwrap();
        assert_eq!(img.pixels(), &[150]);
    }

    #[test]
    fn rejects_bad_maxval() {
        let err = ingest_raster("P2 1 1 15 3".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("maxval"));
    }

    #[test]
    fn rejects_truncated_data() {
        let mut pgm = b"P5 3 3 255\n".to_vec();
        pgm.extend_from_slice(&[1, 2, 3, 4]);
        assert!(ingest_raster(pgm.as_slice()).unwrap_err().to_string().contains("truncated"));
        assert!(ingest_raster("P2 2 2 255 1 2 3".as_bytes())
            .unwrap_err()
            .to_string()
            .contains("truncated"));
    }

    #[test]
    fn rejects_malformed_headers() {
        assert!(ingest_raster("P4 1 1\n".as_bytes()).is_err());
        assert!(ingest_raster("Q2 1 1 255 0".as_bytes()).is_err());
        assert!(ingest_raster("P2 x 1 255 0".as_bytes()).is_err());
        assert!(ingest_raster("P2 1 1 255 x".as_bytes()).is_err());
        assert!(ingest_raster("".as_bytes()).is_err());
    }
}
