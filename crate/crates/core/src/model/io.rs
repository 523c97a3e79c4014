//! Binary model file.
//!
//! Layout, all integers unsigned 32-bit little-endian:
//!
//! ```text
//! "LYMF" | version | layer count | input C, H, W
//! per layer: 1-byte tag, then
//!   1 conv : F, C, K, K, then F*C*K*K kernel values, then F bias values
//!   2 dense: out, in, then out*in weight values, then out bias values
//!   3 pool : window, stride (no values)
//! ```
//!
//! Values are IEEE-754 binary32 little-endian in row-major order. Loading
//! walks every header and checks the total length before decoding any value,
//! so a damaged file never yields partial parameters.

use std::io::{Read, Write};
use std::path::Path;

use super::arch::{ArchitectureSpec, LayerSpec};
use super::network::Network;
use super::params::{LayerParams, NetworkParams};
use crate::error::{Error, Result};
use crate::ops::{ConvLayerParams, DenseLayerParams};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"LYMF";
pub const FORMAT_VERSION: u32 = 1;

const TAG_CONV: u8 = 1;
const TAG_DENSE: u8 = 2;
const TAG_POOL: u8 = 3;

/// Upper bound on any single dimension; guards against absurd allocations
/// from corrupted headers.
const MAX_DIM: u32 = 1 << 20;

pub fn save_model(net: &Network<f32>, mut sink: impl Write) -> Result<usize> {
    let bytes = encode(net);
    sink.write_all(&bytes)?;
    Ok(bytes.len())
}

pub fn encode(net: &Network<f32>) -> Vec<u8> {
    let spec = net.spec();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let put = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    put(&mut out, FORMAT_VERSION as usize);
    put(&mut out, spec.layers.len());
    for d in spec.input {
        put(&mut out, d);
    }
    let mut blocks = net.params().blocks.iter();
    for layer in &spec.layers {
        match layer {
            LayerSpec::MaxPool { window, stride } => {
                out.push(TAG_POOL);
                put(&mut out, *window);
                put(&mut out, *stride);
            }
            _ => {
                let block = blocks.next().expect("network params match spec");
                let [w, b] = block.tensors();
                out.push(match block {
                    LayerParams::Conv(_) => TAG_CONV,
                    LayerParams::Dense(_) => TAG_DENSE,
                });
                for &d in w.shape() {
                    put(&mut out, d);
                }
                for v in w.data().iter().chain(b.data()) {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn load_model(mut source: impl Read) -> Result<Network<f32>> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn save_model_file(net: &Network<f32>, path: &Path) -> Result<()> {
    std::fs::write(path, encode(net)).map_err(|e| Error::from(e).in_file(path))
}

pub fn load_model_file(path: &Path) -> Result<Network<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
    decode(&bytes).map_err(|e| e.in_file(path))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::ModelFile(format!("truncated file while reading {what} at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn dim(&mut self, what: &str) -> Result<usize> {
        let v = self.u32(what)?;
        if v == 0 || v > MAX_DIM {
            return Err(Error::ModelFile(format!("{what} = {v} out of range")));
        }
        Ok(v as usize)
    }

    fn floats(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let len = n
            .checked_mul(4)
            .ok_or_else(|| Error::ModelFile(format!("{what}: size overflow")))?;
        Ok(self
            .take(len, what)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

enum Header {
    Conv([usize; 4]),
    Dense([usize; 2]),
    Pool(usize, usize),
}

pub fn decode(bytes: &[u8]) -> Result<Network<f32>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::ModelFile("bad magic (not a LYMF model file)".into()));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFile(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let count = r.u32("layer count")? as usize;
    if count == 0 || count > 1024 {
        return Err(Error::ModelFile(format!("implausible layer count {count}")));
    }
    let input = [r.dim("input channels")?, r.dim("input height")?, r.dim("input width")?];

    // Pass 1: headers only, skipping payloads.
    let mut headers = Vec::with_capacity(count);
    for i in 0..count {
        let what = format!("layer {i}");
        let header = match r.u8(&what)? {
            TAG_CONV => {
                let d = [r.dim(&what)?, r.dim(&what)?, r.dim(&what)?, r.dim(&what)?];
                r.take(4 * (d.iter().product::<usize>() + d[0]), &what)?;
                Header::Conv(d)
            }
            TAG_DENSE => {
                let d = [r.dim(&what)?, r.dim(&what)?];
                r.take(4 * (d[0] * d[1] + d[0]), &what)?;
                Header::Dense(d)
            }
            TAG_POOL => Header::Pool(r.dim(&what)?, r.dim(&what)?),
            tag => return Err(Error::ModelFile(format!("{what}: unknown type tag {tag}"))),
        };
        headers.push(header);
    }
    if r.pos != bytes.len() {
        return Err(Error::ModelFile(format!(
            "{} trailing bytes after {count} layers",
            bytes.len() - r.pos
        )));
    }

    let layers: Vec<LayerSpec> = headers
        .iter()
        .map(|h| match *h {
            Header::Conv([f, _, k, _]) => LayerSpec::Conv { filters: f, kernel: k },
            Header::Dense([o, _]) => LayerSpec::Dense { units: o },
            Header::Pool(window, stride) => LayerSpec::MaxPool { window, stride },
        })
        .collect();
    let spec = ArchitectureSpec { input, layers };
    spec.validate().map_err(|e| Error::ModelFile(format!("stored architecture is invalid: {e}")))?;

    // Pass 2: decode payloads.
    let mut r = Reader { bytes, pos: 4 + 4 * 5 };
    let mut blocks = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        let what = format!("layer {i}");
        r.u8(&what)?;
        match *h {
            Header::Conv(d) => {
                for _ in 0..4 {
                    r.u32(&what)?;
                }
                let kernels = Tensor::from_vec(&d, r.floats(d.iter().product(), &what)?)?;
                let bias = Tensor::from_vec(&[d[0]], r.floats(d[0], &what)?)?;
                blocks.push(LayerParams::Conv(ConvLayerParams::new(kernels, bias).map_err(|e| {
                    Error::ModelFile(format!("{what}: {e}"))
                })?));
            }
            Header::Dense(d) => {
                r.u32(&what)?;
                r.u32(&what)?;
                let weights = Tensor::from_vec(&d, r.floats(d[0] * d[1], &what)?)?;
                let bias = Tensor::from_vec(&[d[0]], r.floats(d[0], &what)?)?;
                blocks.push(LayerParams::Dense(DenseLayerParams::new(weights, bias)?));
            }
            Header::Pool(..) => {
                r.u32(&what)?;
                r.u32(&what)?;
            }
        }
    }
    Network::new(spec, NetworkParams { blocks })
        .map_err(|e| Error::ModelFile(format!("parameters disagree with stored architecture: {e}")))
}
