//! Network input scaling and geometric augmentation.

use std::fmt;
use std::str::FromStr;

use super::record::{PatchRecord, PATCH_PIXELS, PATCH_SIDE};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Map intensities to `x / 127.5 - 1` as a `[1, 40, 40]` tensor.
pub fn normalize<T: Scalar>(record: &PatchRecord) -> Tensor<T> {
    let scale = T::from_f64(127.5);
    let data = record
        .pixels
        .iter()
        .map(|&p| T::from_f64(p as f64) / scale - T::one())
        .collect();
    Tensor::from_vec(&[1, PATCH_SIDE, PATCH_SIDE], data).expect("patch has PATCH_PIXELS values")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Augment {
    /// Quarter turn clockwise.
    Rot90,
    Rot180,
    Rot270,
    /// Mirror left-right.
    FlipH,
    /// Mirror top-bottom.
    FlipV,
}

impl Augment {
    pub const ALL: [Augment; 5] = [
        Augment::Rot90,
        Augment::Rot180,
        Augment::Rot270,
        Augment::FlipH,
        Augment::FlipV,
    ];

    /// Source position `(row, col)` for destination `(row, col)`.
    fn source(self, r: usize, c: usize) -> (usize, usize) {
        let last = PATCH_SIDE - 1;
        match self {
            Augment::Rot90 => (last - c, r),
            Augment::Rot180 => (last - r, last - c),
            Augment::Rot270 => (c, last - r),
            Augment::FlipH => (r, last - c),
            Augment::FlipV => (last - r, c),
        }
    }
}

impl fmt::Display for Augment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Augment::Rot90 => "rot90",
            Augment::Rot180 => "rot180",
            Augment::Rot270 => "rot270",
            Augment::FlipH => "flip_h",
            Augment::FlipV => "flip_v",
        })
    }
}

impl FromStr for Augment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Augment::ALL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown augmentation {s:?}")))
    }
}

pub fn augment(record: &PatchRecord, op: Augment) -> PatchRecord {
    let mut pixels = Box::new([0u8; PATCH_PIXELS]);
    for r in 0..PATCH_SIDE {
        for c in 0..PATCH_SIDE {
            let (sr, sc) = op.source(r, c);
            pixels[r * PATCH_SIDE + c] = record.pixels[sr * PATCH_SIDE + sc];
        }
    }
    PatchRecord::new(record.label, pixels)
}
