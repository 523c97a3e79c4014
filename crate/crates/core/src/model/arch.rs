//! Layer-by-layer description of a network and its shape chain.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ops::pooled_extent;

/// One layer. Convolutions and all dense layers except the last are followed
/// by tanh; the last dense layer produces logits for softmax.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    Conv { filters: usize, kernel: usize },
    MaxPool { window: usize, stride: usize },
    Dense { units: usize },
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Conv { filters, kernel } => write!(f, "conv{kernel}x{filters}"),
            LayerSpec::MaxPool { window, stride } => write!(f, "pool{window}s{stride}"),
            LayerSpec::Dense { units } => write!(f, "dense{units}"),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse layer {s:?}"));
        let num = |t: &str| t.parse::<usize>().map_err(|_| bad());
        if let Some(rest) = s.strip_prefix("conv") {
            let (k, f) = rest.split_once('x').ok_or_else(bad)?;
            Ok(LayerSpec::Conv { filters: num(f)?, kernel: num(k)? })
        } else if let Some(rest) = s.strip_prefix("pool") {
            let (w, st) = rest.split_once('s').ok_or_else(bad)?;
            Ok(LayerSpec::MaxPool { window: num(w)?, stride: num(st)? })
        } else if let Some(rest) = s.strip_prefix("dense") {
            Ok(LayerSpec::Dense { units: num(rest)? })
        } else {
            Err(bad())
        }
    }
}

/// Input geometry `[C, H, W]` plus ordered layers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArchitectureSpec {
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
}

impl Default for ArchitectureSpec {
    /// conv 5x5x20 → pool 3/3 → conv 5x5x50 → pool 3/3 → dense 500 → dense 4
    /// on a 1x40x40 patch.
    fn default() -> Self {
        ArchitectureSpec {
            input: [1, 40, 40],
            layers: vec![
                LayerSpec::Conv { filters: 20, kernel: 5 },
                LayerSpec::MaxPool { window: 3, stride: 3 },
                LayerSpec::Conv { filters: 50, kernel: 5 },
                LayerSpec::MaxPool { window: 3, stride: 3 },
                LayerSpec::Dense { units: 500 },
                LayerSpec::Dense { units: 4 },
            ],
        }
    }
}

impl ArchitectureSpec {
    /// Small network for finite-difference gradient checks:
    /// 1x12x12 → conv 3x3x2 → pool 2/2 → dense 8 → dense 4.
    pub fn toy() -> Self {
        ArchitectureSpec {
            input: [1, 12, 12],
            layers: vec![
                LayerSpec::Conv { filters: 2, kernel: 3 },
                LayerSpec::MaxPool { window: 2, stride: 2 },
                LayerSpec::Dense { units: 8 },
                LayerSpec::Dense { units: 4 },
            ],
        }
    }

    /// Output shape of every layer, in order. Dense outputs are rank 1; the
    /// first dense layer flattens its input.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let err = |layer: usize, detail: String| Error::Architecture { layer, detail };
        if self.input.contains(&0) {
            return Err(err(0, format!("empty input {:?}", self.input)));
        }
        let last = match self.layers.last() {
            Some(LayerSpec::Dense { .. }) => self.layers.len() - 1,
            _ => return Err(err(self.layers.len(), "network must end with a dense layer".into())),
        };
        let mut cur: Vec<usize> = self.input.to_vec();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            cur = match (*layer, cur.as_slice()) {
                (LayerSpec::Conv { filters, kernel }, &[_, h, w]) => {
                    if filters == 0 || kernel == 0 {
                        return Err(err(i, format!("{layer}: zero-sized conv")));
                    }
                    if h < kernel || w < kernel {
                        return Err(err(i, format!("{layer}: kernel larger than {h}x{w} input")));
                    }
                    vec![filters, h - kernel + 1, w - kernel + 1]
                }
                (LayerSpec::MaxPool { window, stride }, &[c, h, w]) => {
                    match (pooled_extent(h, window, stride), pooled_extent(w, window, stride)) {
                        (Some(oh), Some(ow)) => vec![c, oh, ow],
                        _ => return Err(err(i, format!("{layer}: window does not fit {h}x{w} input"))),
                    }
                }
                (LayerSpec::Dense { units }, _) => {
                    if units == 0 {
                        return Err(err(i, format!("{layer}: zero units")));
                    }
                    vec![units]
                }
                (_, shape) => {
                    return Err(err(i, format!("{layer} cannot follow rank-{} output", shape.len())))
                }
            };
            out.push(cur.clone());
        }
        debug_assert_eq!(out.len(), last + 1);
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    pub fn output_units(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::Dense { units }) => *units,
            _ => 0,
        }
    }

    pub fn is_output_layer(&self, index: usize) -> bool {
        index + 1 == self.layers.len()
    }
}

impl fmt::Display for ArchitectureSpec {
    /// `1x40x40:conv5x20,pool3s3,...`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [c, h, w] = self.input;
        write!(f, "{c}x{h}x{w}:")?;
        for (i, l) in self.layers.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for ArchitectureSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (input, layers) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("architecture {s:?} lacks an input prefix")))?;
        let dims: Vec<usize> = input
            .split('x')
            .map(|d| d.parse().map_err(|_| Error::Config(format!("bad input geometry {input:?}"))))
            .collect::<Result<_>>()?;
        let input: [usize; 3] = dims
            .try_into()
            .map_err(|_| Error::Config(format!("input geometry {input:?} must be CxHxW")))?;
        let layers = layers
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<LayerSpec>>>()?;
        let spec = ArchitectureSpec { input, layers };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_chain() {
        let shapes = ArchitectureSpec::default().shapes().unwrap();
        assert_eq!(
            shapes,
            vec![
                vec![20, 36, 36],
                vec![20, 12, 12],
                vec![50, 8, 8],
                vec![50, 2, 2],
                vec![500],
                vec![4],
            ]
        );
    }

    #[test]
    fn text_form_round_trips() {
        for spec in [ArchitectureSpec::default(), ArchitectureSpec::toy()] {
            let text = spec.to_string();
            assert_eq!(text.parse::<ArchitectureSpec>().unwrap(), spec);
        }
        assert_eq!(
            ArchitectureSpec::default().to_string(),
            "1x40x40:conv5x20,pool3s3,conv5x50,pool3s3,dense500,dense4"
        );
    }

    #[test]
    fn first_failing_layer_is_named() {
        // 16 → 5 → 1, then pool 3 fails
        let mut spec = ArchitectureSpec { input: [1, 20, 20], ..Default::default() };
        match spec.validate() {
            Err(Error::Architecture { layer, .. }) => assert_eq!(layer, 3),
            other => panic!("unexpected {other:?}"),
        }
        spec.input = [1, 4, 4];
        match spec.validate() {
            Err(Error::Architecture { layer, .. }) => assert_eq!(layer, 0),
            other => panic!("unexpected {other:?}"),
        }
        let spec = ArchitectureSpec {
            input: [1, 8, 8],
            layers: vec![LayerSpec::Dense { units: 3 }, LayerSpec::Conv { filters: 1, kernel: 1 }],
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn floor_pooling_absorbs_one_extra_pixel() {
        // 41 → 37 → 12 → 8 → 2: the remainder is dropped at the first pool.
        let mut spec = ArchitectureSpec { input: [1, 41, 41], ..Default::default() };
        assert_eq!(spec.shapes().unwrap()[3], vec![50, 2, 2]);
        spec.input = [1, 43, 43];
        assert_eq!(spec.shapes().unwrap()[3], vec![50, 3, 3]);
    }
}
