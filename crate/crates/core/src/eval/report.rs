use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::confusion::ConfusionMatrix;
use super::predict::{predict_batch, ImagePrediction};
use super::vote::{vote_set, SetPrediction};
use crate::dataset::{GroupId, Sample, PATCHES_PER_SET};
use crate::error::{Error, Result};
use crate::model::Network;
use crate::tensor::Scalar;

pub const IMAGE_CONFUSION_FILE: &str = "image_confusion.tsv";
pub const SET_CONFUSION_FILE: &str = "set_confusion.tsv";
pub const SETS_DETAIL_FILE: &str = "sets_detail.tsv";
pub const SETS_DETAIL_HEADER: &str = "case_id\tset_index\tvotes\tdecided_by\tpredicted\tobserved";

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    /// Sorted by record id.
    pub images: Vec<ImagePrediction>,
    /// Sorted by group id.
    pub sets: Vec<SetPrediction>,
    pub image_matrix: ConfusionMatrix,
    pub set_matrix: ConfusionMatrix,
}

/// Score every test image, then vote each set of five.
pub fn evaluate<T: Scalar>(net: &Network<T>, test: &[Sample]) -> Result<EvaluationReport> {
    let mut groups: BTreeMap<GroupId, usize> = BTreeMap::new();
    for s in test {
        *groups.entry(s.id.group()).or_default() += 1;
    }
    if let Some((g, n)) = groups.iter().find(|(_, &n)| n != PATCHES_PER_SET as usize) {
        return Err(Error::Eval(format!(
            "test data holds {n} of the {PATCHES_PER_SET} images of set {g}; only whole sets can be evaluated"
        )));
    }
    let mut images = predict_batch(net, test)?;
    images.sort_by(|a, b| a.id.cmp(&b.id));
    let sets = images
        .chunks(PATCHES_PER_SET as usize)
        .map(vote_set)
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport {
        image_matrix: ConfusionMatrix::from_pairs(images.iter().map(|p| (p.predicted, p.observed))),
        set_matrix: ConfusionMatrix::from_pairs(sets.iter().map(|s| (s.predicted, s.observed))),
        images,
        sets,
    })
}

impl EvaluationReport {
    pub fn image_accuracy(&self) -> f64 {
        self.image_matrix.accuracy()
    }

    pub fn set_accuracy(&self) -> f64 {
        self.set_matrix.accuracy()
    }

    pub fn summary(&self) -> String {
        format!(
            "image_acc={:.6} set_acc={:.6} images={}/{} sets={}/{}",
            self.image_accuracy(),
            self.set_accuracy(),
            self.image_matrix.correct(),
            self.image_matrix.total(),
            self.set_matrix.correct(),
            self.set_matrix.total(),
        )
    }

    pub fn write_sets_detail(&self, mut sink: impl Write) -> Result<()> {
        writeln!(sink, "{SETS_DETAIL_HEADER}")?;
        for s in &self.sets {
            let votes: Vec<&str> = s.votes.iter().map(|d| d.short_name()).collect();
            writeln!(
                sink,
                "{}\t{}\t{}\t{}\t{}\t{}",
                s.group.case_id,
                s.group.set_index,
                votes.join(","),
                s.decided_by,
                s.predicted.short_name(),
                s.observed.short_name()
            )?;
        }
        Ok(())
    }

    /// Write the two matrices and the per-set listing into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let create = |name: &str| -> Result<BufWriter<File>> {
            let path = dir.join(name);
            File::create(&path)
                .map(BufWriter::new)
                .map_err(|e| Error::from(e).in_file(&path))
        };
        let mut f = create(IMAGE_CONFUSION_FILE)?;
        self.image_matrix.write_tsv(&mut f)?;
        f.flush()?;
        let mut f = create(SET_CONFUSION_FILE)?;
        self.set_matrix.write_tsv(&mut f)?;
        f.flush()?;
        let mut f = create(SETS_DETAIL_FILE)?;
        self.write_sets_detail(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_corpus, Diagnosis};
    use crate::model::{build_network, ArchitectureSpec, NetworkParams};

    fn zero_net() -> Network<f32> {
        let spec = ArchitectureSpec::default();
        Network::new(spec.clone(), NetworkParams::zeros(&spec).unwrap()).unwrap()
    }

    #[test]
    fn zero_network_report() {
        let samples = synth_corpus(4, 5).unwrap();
        let r = evaluate(&zero_net(), &samples).unwrap();
        assert_eq!(r.image_matrix.total(), 80);
        assert_eq!(r.set_matrix.total(), 16);
        assert_eq!(r.image_matrix.total(), 5 * r.set_matrix.total());
        // Everything is predicted benign by the tie rule.
        assert_eq!(r.image_matrix.row_sums(), [80, 0, 0, 0]);
        assert_eq!(r.image_matrix.column_sums(), [20; 4]);
        assert_eq!(r.image_accuracy(), 0.25);
        assert!(r.summary().starts_with("image_acc=0.250000 set_acc=0.250000"));

        let mut buf = Vec::new();
        r.write_sets_detail(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(SETS_DETAIL_HEADER));
        assert_eq!(
            lines.nth(4),
            Some("case001\t0\tBenign,Benign,Benign,Benign,Benign\tmajority\tBenign\tDLBCL")
        );
    }

    #[test]
    fn partial_sets_are_rejected() {
        let samples = synth_corpus(4, 5).unwrap();
        let err = evaluate(&zero_net(), &samples[..13]).unwrap_err();
        assert!(err.to_string().contains("case000/s2"), "{err}");
    }

    #[test]
    fn input_order_does_not_matter() {
        let spec = ArchitectureSpec::default();
        let net = Network::new(spec.clone(), build_network::<f32>(&spec, 3).unwrap()).unwrap();
        let samples = synth_corpus(4, 6).unwrap();
        let mut shuffled = samples.clone();
        shuffled.reverse();
        shuffled.rotate_left(7);
        let a = evaluate(&net, &samples).unwrap();
        assert_eq!(a, evaluate(&net, &shuffled).unwrap());
        assert!(a.sets.iter().all(|s| s.observed == Diagnosis::ALL[s.group.case_id[4..].parse::<usize>().unwrap() % 4]));
    }

    #[test]
    fn writes_three_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = evaluate(&zero_net(), &synth_corpus(4, 5).unwrap()).unwrap();
        r.write_dir(dir.path()).unwrap();
        let m = std::fs::read(dir.path().join(IMAGE_CONFUSION_FILE)).unwrap();
        assert_eq!(ConfusionMatrix::parse_tsv(m.as_slice()).unwrap(), r.image_matrix);
        let m = std::fs::read(dir.path().join(SET_CONFUSION_FILE)).unwrap();
        assert_eq!(ConfusionMatrix::parse_tsv(m.as_slice()).unwrap(), r.set_matrix);
        let detail = std::fs::read_to_string(dir.path().join(SETS_DETAIL_FILE)).unwrap();
        assert_eq!(detail.lines().count(), 17);
    }
}
