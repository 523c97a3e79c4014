//! The 1601-entry patch record: one label followed by 1600 intensities.

use std::fmt;
use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const PATCH_SIDE: usize = 40;
pub const PATCH_PIXELS: usize = PATCH_SIDE * PATCH_SIDE;
pub const RECORD_ENTRIES: usize = PATCH_PIXELS + 1;

/// Diagnostic category. The discriminant is the label code stored in records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Diagnosis {
    Benign = 0,
    Dlbcl = 1,
    Burkitt = 2,
    Sll = 3,
}

impl Diagnosis {
    pub const ALL: [Diagnosis; 4] = [
        Diagnosis::Benign,
        Diagnosis::Dlbcl,
        Diagnosis::Burkitt,
        Diagnosis::Sll,
    ];
    pub const COUNT: usize = 4;

    pub fn from_code(code: i64) -> Result<Self> {
        match code {
            0 => Ok(Diagnosis::Benign),
            1 => Ok(Diagnosis::Dlbcl),
            2 => Ok(Diagnosis::Burkitt),
            3 => Ok(Diagnosis::Sll),
            other => Err(Error::Label(other)),
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Short name used in report headers.
    pub fn short_name(self) -> &'static str {
        match self {
            Diagnosis::Benign => "Benign",
            Diagnosis::Dlbcl => "DLBCL",
            Diagnosis::Burkitt => "BL",
            Diagnosis::Sll => "SLL",
        }
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

pub type Pixels = Box<[u8; PATCH_PIXELS]>;

/// One labeled 40x40 grayscale patch, pixels row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchRecord {
    pub label: Diagnosis,
    pub pixels: Pixels,
}

impl PatchRecord {
    pub fn new(label: Diagnosis, pixels: Pixels) -> Self {
        PatchRecord { label, pixels }
    }

    pub fn from_slice(label: Diagnosis, pixels: &[u8]) -> Result<Self> {
        let pixels: Pixels = pixels.to_vec().into_boxed_slice().try_into().map_err(|b: Box<[u8]>| {
            Error::EntryCount {
                expected: RECORD_ENTRIES,
                found: b.len() + 1,
            }
        })?;
        Ok(PatchRecord { label, pixels })
    }

    pub fn pixel(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * PATCH_SIDE + col]
    }

    pub fn mean_intensity(&self) -> f64 {
        self.pixels.iter().map(|&p| p as f64).sum::<f64>() / PATCH_PIXELS as f64
    }

    /// Text form: 1601 comma-separated decimal integers and a newline.
    pub fn to_line(&self) -> String {
        let mut s = String::with_capacity(RECORD_ENTRIES * 4);
        s.push_str(&self.label.code().to_string());
        for p in self.pixels.iter() {
            s.push(',');
            s.push_str(&p.to_string());
        }
        s.push('\n');
        s
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let line = line
            .strip_suffix('\n')
            .map(|l| l.strip_suffix('\r').unwrap_or(l))
            .unwrap_or(line);
        let tokens: Vec<&str> = line.split(',').collect();
        if tokens.len() != RECORD_ENTRIES {
            return Err(Error::EntryCount {
                expected: RECORD_ENTRIES,
                found: tokens.len(),
            });
        }
        let label = parse_entry(tokens[0], 0)?;
        let label = Diagnosis::from_code(label as i64).map_err(|_| Error::Record {
            index: 0,
            reason: format!("label {label} not in 0..=3"),
        })?;
        let mut pixels = Box::new([0u8; PATCH_PIXELS]);
        for (i, tok) in tokens[1..].iter().enumerate() {
            let v = parse_entry(tok, i + 1)?;
            pixels[i] = u8::try_from(v).map_err(|_| Error::Record {
                index: i + 1,
                reason: format!("intensity {v} not in 0..=255"),
            })?;
        }
        Ok(PatchRecord { label, pixels })
    }
}

fn parse_entry(tok: &str, index: usize) -> Result<u64> {
    if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::Record {
            index,
            reason: format!("{tok:?} is not a non-negative integer"),
        });
    }
    tok.parse::<u64>().map_err(|_| Error::Record {
        index,
        reason: format!("{tok:?} is out of range"),
    })
}

/// Write the text form of `record`; returns the number of bytes written.
pub fn write_record(record: &PatchRecord, mut sink: impl Write) -> Result<usize> {
    let line = record.to_line();
    sink.write_all(line.as_bytes())?;
    Ok(line.len())
}

/// Read exactly one record from `source`.
pub fn read_record(mut source: impl Read) -> Result<PatchRecord> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    PatchRecord::parse_line(&text)
}
