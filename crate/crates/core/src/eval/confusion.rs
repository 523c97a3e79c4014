use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};

use crate::dataset::Diagnosis;
use crate::error::{Error, Result};

const N: usize = Diagnosis::COUNT;

/// Top-left cell of the TSV grid: rows are predicted, columns observed.
pub const MATRIX_CORNER: &str = "predicted\\observed";

/// Counts indexed `[predicted][observed]`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[u64; N]; N],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Diagnosis, Diagnosis)>) -> Self {
        let mut m = Self::new();
        for (p, o) in pairs {
            m.add(p, o);
        }
        m
    }

    pub fn add(&mut self, predicted: Diagnosis, observed: Diagnosis) {
        self.counts[predicted.index()][observed.index()] += 1;
    }

    pub fn get(&self, predicted: Diagnosis, observed: Diagnosis) -> u64 {
        self.counts[predicted.index()][observed.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..N).map(|i| self.counts[i][i]).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Trace over total; NaN when there are no samples (see [`is_empty`](Self::is_empty)).
    pub fn accuracy(&self) -> f64 {
        if self.is_empty() {
            return f64::NAN;
        }
        self.correct() as f64 / self.total() as f64
    }

    /// Per observed class.
    pub fn column_sums(&self) -> [u64; N] {
        std::array::from_fn(|o| (0..N).map(|p| self.counts[p][o]).sum())
    }

    /// Per predicted class.
    pub fn row_sums(&self) -> [u64; N] {
        std::array::from_fn(|p| self.counts[p].iter().sum())
    }

    pub fn write_tsv(&self, mut sink: impl Write) -> Result<()> {
        write!(sink, "{MATRIX_CORNER}")?;
        for d in Diagnosis::ALL {
            write!(sink, "\t{}", d.short_name())?;
        }
        writeln!(sink)?;
        for p in Diagnosis::ALL {
            write!(sink, "{}", p.short_name())?;
            for c in self.counts[p.index()] {
                write!(sink, "\t{c}")?;
            }
            writeln!(sink)?;
        }
        Ok(())
    }

    pub fn parse_tsv(source: impl Read) -> Result<Self> {
        let bad = |line: usize, why: String| Error::Eval(format!("confusion matrix line {line}: {why}"));
        let lines: Vec<String> = BufReader::new(source).lines().collect::<std::io::Result<_>>()?;
        let names: Vec<&str> = Diagnosis::ALL.iter().map(|d| d.short_name()).collect();
        let header: Vec<&str> = lines.first().map(|l| l.split('\t').collect()).unwrap_or_default();
        if header.len() != N + 1 || header[0] != MATRIX_CORNER || header[1..] != names[..] {
            return Err(bad(1, "unexpected header".into()));
        }
        if lines.len() != N + 1 {
            return Err(bad(lines.len(), format!("expected {} rows", N)));
        }
        let mut m = Self::new();
        for (p, line) in lines[1..].iter().enumerate() {
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != N + 1 || cells[0] != names[p] {
                return Err(bad(p + 2, format!("expected row {}", names[p])));
            }
            for (o, cell) in cells[1..].iter().enumerate() {
                m.counts[p][o] = cell.parse().map_err(|_| bad(p + 2, format!("bad count {cell:?}")))?;
            }
        }
        Ok(m)
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>8}", "")?;
        for d in Diagnosis::ALL {
            write!(f, "{:>8}", d.short_name())?;
        }
        writeln!(f)?;
        for p in Diagnosis::ALL {
            write!(f, "{:>8}", p.short_name())?;
            for c in self.counts[p.index()] {
                write!(f, "{c:>8}")?;
            }
            writeln!(f)?;
        }
        write!(f, "accuracy {}/{}", self.correct(), self.total())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Diagnosis::*;

    /// Pairs with the given cell counts, in `(predicted, observed, n)` form.
    fn expand(cells: &[(Diagnosis, Diagnosis, usize)]) -> Vec<(Diagnosis, Diagnosis)> {
        cells
            .iter()
            .flat_map(|&(p, o, n)| std::iter::repeat_n((p, o), n))
            .collect()
    }

    #[test]
    fn reference_image_matrix() {
        let pairs = expand(&[
            (Benign, Benign, 56),
            (Dlbcl, Dlbcl, 60),
            (Burkitt, Burkitt, 60),
            (Sll, Sll, 52),
            (Benign, Sll, 4),
            (Dlbcl, Sll, 4),
            (Burkitt, Benign, 4),
        ]);
        let m = ConfusionMatrix::from_pairs(pairs);
        assert_eq!((m.correct(), m.total()), (228, 240));
        assert_eq!(m.accuracy(), 0.95);
        assert_eq!(m.column_sums(), [60; 4]);
        assert_eq!(m.get(Benign, Sll), 4);
    }

    #[test]
    fn reference_set_matrix() {
        let m = ConfusionMatrix::from_pairs(expand(&[
            (Benign, Benign, 12),
            (Dlbcl, Dlbcl, 12),
            (Burkitt, Burkitt, 12),
            (Sll, Sll, 12),
        ]));
        assert_eq!((m.correct(), m.total(), m.accuracy()), (48, 48, 1.0));
    }

    #[test]
    fn empty_matrix_has_no_accuracy() {
        let m = ConfusionMatrix::new();
        assert!(m.is_empty());
        assert!(m.accuracy().is_nan());
    }

    #[test]
    fn tsv_layout() {
        let m = ConfusionMatrix::from_pairs([(Burkitt, Benign), (Sll, Sll)]);
        let mut buf = Vec::new();
        m.write_tsv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "predicted\\observed\tBenign\tDLBCL\tBL\tSLL\n\
             Benign\t0\t0\t0\t0\n\
             DLBCL\t0\t0\t0\t0\n\
             BL\t1\t0\t0\t0\n\
             SLL\t0\t0\t0\t1\n"
        );
        assert_eq!(ConfusionMatrix::parse_tsv(buf.as_slice()).unwrap(), m);
        assert!(ConfusionMatrix::parse_tsv(&b"x\n"[..]).is_err());
    }

    proptest! {
        #[test]
        fn totals_and_accuracy_agree(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..300)) {
            let m = ConfusionMatrix::from_pairs(pairs.iter().map(|&(p, o)| (Diagnosis::ALL[p], Diagnosis::ALL[o])));
            prop_assert_eq!(m.total(), pairs.len() as u64);
            let hits = pairs.iter().filter(|(p, o)| p == o).count();
            prop_assert_eq!(m.accuracy(), hits as f64 / pairs.len() as f64);
            prop_assert_eq!(m.row_sums().iter().sum::<u64>(), m.total());
        }
    }
}
