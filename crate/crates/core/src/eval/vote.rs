use std::fmt;

use super::predict::ImagePrediction;
use crate::dataset::{Diagnosis, GroupId, PATCHES_PER_SET};

const SET_SIZE: usize = PATCHES_PER_SET as usize;
use crate::error::{Error, Result};

/// Votes a class needs to win a set outright.
pub const MAJORITY_VOTES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Majority,
    ProbabilityFallback,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Majority => "majority",
            Decision::ProbabilityFallback => "probability_fallback",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SetPrediction {
    pub group: GroupId,
    /// Per-image votes ordered by patch index.
    pub votes: [Diagnosis; SET_SIZE],
    pub predicted: Diagnosis,
    pub decided_by: Decision,
    pub observed: Diagnosis,
}

impl SetPrediction {
    pub fn is_correct(&self) -> bool {
        self.predicted == self.observed
    }
}

/// The class with at least [`MAJORITY_VOTES`] votes, if any.
pub fn majority(votes: &[Diagnosis]) -> Option<Diagnosis> {
    let mut counts = [0usize; Diagnosis::COUNT];
    for v in votes {
        counts[v.index()] += 1;
    }
    counts
        .iter()
        .position(|&c| c >= MAJORITY_VOTES)
        .map(|i| Diagnosis::ALL[i])
}

/// Combine the five predictions of one set. Without a 3-vote majority the
/// class with the largest summed probability wins, lowest index on ties.
pub fn vote_set(predictions: &[ImagePrediction]) -> Result<SetPrediction> {
    if predictions.len() != SET_SIZE {
        return Err(Error::Vote(format!(
            "a set needs {PATCHES_PER_SET} predictions, got {}",
            predictions.len()
        )));
    }
    let group = predictions[0].id.group();
    let observed = predictions[0].observed;
    let mut ordered: Vec<&ImagePrediction> = predictions.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));
    for (p, q) in ordered.iter().zip(ordered.iter().skip(1)) {
        if p.id == q.id {
            return Err(Error::Vote(format!("duplicate prediction for {}", p.id)));
        }
    }
    for p in &ordered {
        if p.id.group() != group {
            return Err(Error::Vote(format!("{} does not belong to set {group}", p.id)));
        }
        if p.observed != observed {
            return Err(Error::Vote(format!(
                "set {group} mixes observed classes {observed} and {}",
                p.observed
            )));
        }
    }
    let votes: [Diagnosis; SET_SIZE] = std::array::from_fn(|i| ordered[i].predicted);
    let (predicted, decided_by) = match majority(&votes) {
        Some(c) => (c, Decision::Majority),
        None => {
            let mut sums = [0.0f64; Diagnosis::COUNT];
            for p in &ordered {
                for (s, v) in sums.iter_mut().zip(p.probabilities) {
                    *s += v;
                }
            }
            let mut best = 0;
            for (i, &s) in sums.iter().enumerate() {
                if s > sums[best] {
                    best = i;
                }
            }
            (Diagnosis::ALL[best], Decision::ProbabilityFallback)
        }
    };
    Ok(SetPrediction {
        group,
        votes,
        predicted,
        decided_by,
        observed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RecordId;
    use proptest::prelude::*;

    fn pred(set: u8, patch: u8, predicted: usize, probabilities: [f64; 4]) -> ImagePrediction {
        ImagePrediction {
            id: RecordId::new("c7", set, patch),
            probabilities,
            predicted: Diagnosis::ALL[predicted],
            observed: Diagnosis::Dlbcl,
        }
    }

    fn set_of(votes: [usize; 5]) -> Vec<ImagePrediction> {
        votes
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let mut p = [0.1; 4];
                p[v] = 0.7;
                pred(0, i as u8, v, p)
            })
            .collect()
    }

    #[test]
    fn three_agreeing_votes_win() {
        let s = vote_set(&set_of([1, 1, 1, 2, 3])).unwrap();
        assert_eq!((s.predicted, s.decided_by), (Diagnosis::Dlbcl, Decision::Majority));
        let s = vote_set(&set_of([0; 5])).unwrap();
        assert_eq!((s.predicted, s.decided_by), (Diagnosis::Benign, Decision::Majority));
        assert!(s.votes.iter().all(|&v| v == Diagnosis::Benign));
    }

    #[test]
    fn fallback_uses_summed_probability() {
        let mut preds = set_of([0, 0, 1, 1, 2]);
        preds[2].probabilities = [0.0, 0.9, 0.1, 0.0];
        let s = vote_set(&preds).unwrap();
        assert_eq!((s.predicted, s.decided_by), (Diagnosis::Dlbcl, Decision::ProbabilityFallback));
    }

    #[test]
    fn fallback_ties_go_to_lowest_class() {
        let preds: Vec<_> = [0, 0, 1, 1, 2]
            .iter()
            .enumerate()
            .map(|(i, &v)| pred(0, i as u8, v, [0.25; 4]))
            .collect();
        let s = vote_set(&preds).unwrap();
        assert_eq!((s.predicted, s.decided_by), (Diagnosis::Benign, Decision::ProbabilityFallback));
    }

    #[test]
    fn votes_follow_patch_order() {
        let mut preds = set_of([3, 2, 1, 0, 0]);
        preds.reverse();
        let s = vote_set(&preds).unwrap();
        assert_eq!(s.votes.map(|d| d.index()), [3, 2, 1, 0, 0]);
    }

    #[test]
    fn malformed_sets_are_rejected() {
        let full = set_of([1; 5]);
        assert!(vote_set(&full[..4]).is_err());
        let mut mixed = full.clone();
        mixed[4].id = RecordId::new("c7", 1, 4);
        assert!(vote_set(&mixed).is_err());
        let mut mixed = full.clone();
        mixed[2].observed = Diagnosis::Sll;
        assert!(vote_set(&mixed).is_err());
        let mut dup = full;
        dup[4].id = dup[3].id.clone();
        assert!(vote_set(&dup).is_err());
    }

    #[test]
    fn exhaustive_vote_vectors() {
        for code in 0..4usize.pow(5) {
            let votes: [usize; 5] = std::array::from_fn(|i| (code >> (2 * i)) & 3);
            let max_mult = (0..4).map(|c| votes.iter().filter(|&&v| v == c).count()).max().unwrap();
            let s = vote_set(&set_of(votes)).unwrap();
            assert_eq!(s.decided_by == Decision::Majority, max_mult >= 3, "{votes:?}");
            if max_mult >= 3 {
                assert_eq!(votes.iter().filter(|&&v| v == s.predicted.index()).count(), max_mult);
            }
        }
    }

    proptest! {
        #[test]
        fn three_correct_images_make_a_correct_set(
            votes in prop::array::uniform5(0usize..4),
            probs in prop::collection::vec(prop::array::uniform4(0.0f64..1.0), 5),
        ) {
            let preds: Vec<_> = votes
                .iter()
                .zip(&probs)
                .enumerate()
                .map(|(i, (&v, &p))| pred(2, i as u8, v, p))
                .collect();
            let s = vote_set(&preds).unwrap();
            let correct = preds.iter().filter(|p| p.is_correct()).count();
            if correct >= 3 {
                prop_assert!(s.is_correct());
            }
        }
    }
}
