//! Train / validation / test assignment.
//!
//! The test split receives whole set-groups, the same number per class, so
//! that set-level voting can be scored. Every other image is shuffled and
//! split image-wise into training and validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::manifest::{GroupId, Manifest, RecordId, PATCHES_PER_SET};
use super::record::Diagnosis;
use crate::error::{Error, Result};

pub const SPLIT_HEADER: &str = "case_id\tset_index\tpatch_index\tsplit";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SplitKind {
    Train,
    Val,
    Test,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Val => "val",
            SplitKind::Test => "test",
        }
    }
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitKind::Train),
            "val" => Ok(SplitKind::Val),
            "test" => Ok(SplitKind::Test),
            other => Err(Error::Split(format!("unknown split {other:?}"))),
        }
    }
}

/// Requested split sizes: images for train and validation, whole sets for test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test_sets: usize,
}

impl Default for SplitCounts {
    /// 1856 / 464 / 48 sets on the 2560-image corpus.
    fn default() -> Self {
        SplitCounts {
            train: 1856,
            val: 464,
            test_sets: 48,
        }
    }
}

impl SplitCounts {
    /// Counts with the default proportions for a corpus of `rows` images:
    /// 48/512 of the sets for test (at least one per class), then 80/20
    /// train/validation over the rest.
    pub fn proportional(rows: usize) -> Self {
        let sets = rows / PATCHES_PER_SET as usize;
        let per_class = ((sets * 48) as f64 / 512.0 / 4.0).round().max(1.0) as usize;
        let test_sets = per_class * Diagnosis::COUNT;
        let rest = rows.saturating_sub(test_sets * PATCHES_PER_SET as usize);
        let val = (rest as f64 * 0.2).round() as usize;
        SplitCounts {
            train: rest - val,
            val,
            test_sets,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SplitAssignment {
    pub assignments: BTreeMap<RecordId, SplitKind>,
}

impl SplitAssignment {
    pub fn get(&self, id: &RecordId) -> Option<SplitKind> {
        self.assignments.get(id).copied()
    }

    pub fn count(&self, kind: SplitKind) -> usize {
        self.assignments.values().filter(|&&k| k == kind).count()
    }

    pub fn ids(&self, kind: SplitKind) -> impl Iterator<Item = &RecordId> {
        self.assignments
            .iter()
            .filter(move |(_, &k)| k == kind)
            .map(|(id, _)| id)
    }

    pub fn parse(source: impl Read) -> Result<Self> {
        let mut lines = BufReader::new(source).lines();
        match lines.next().transpose()? {
            Some(h) if h.trim_end_matches('\r') == SPLIT_HEADER => {}
            _ => return Err(Error::Split("missing split header".into())),
        }
        let mut assignments = BTreeMap::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || Error::Split(format!("line {}: malformed row {line:?}", n + 2));
            if f.len() != 4 {
                return Err(bad());
            }
            let id = RecordId::new(
                f[0],
                f[1].parse().map_err(|_| bad())?,
                f[2].parse().map_err(|_| bad())?,
            );
            let kind: SplitKind = f[3].parse()?;
            if assignments.insert(id, kind).is_some() {
                return Err(Error::Split(format!("line {}: duplicate row", n + 2)));
            }
        }
        Ok(SplitAssignment { assignments })
    }

    pub fn write(&self, mut sink: impl Write) -> Result<()> {
        writeln!(sink, "{SPLIT_HEADER}")?;
        for (id, kind) in &self.assignments {
            writeln!(
                sink,
                "{}\t{}\t{}\t{}",
                id.case_id, id.set_index, id.patch_index, kind
            )?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        SplitAssignment::parse(file).map_err(|e| e.in_file(path))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        fs::write(path, buf).map_err(|e| Error::from(e).in_file(path))
    }

    /// Check that the assignment covers `manifest` exactly once and that
    /// test set-groups are whole.
    pub fn check_against(&self, manifest: &Manifest) -> Result<()> {
        if self.assignments.len() != manifest.len() {
            return Err(Error::Split(format!(
                "split has {} rows, manifest has {}",
                self.assignments.len(),
                manifest.len()
            )));
        }
        for (group, idx) in manifest.groups() {
            let kinds: BTreeSet<Option<SplitKind>> =
                idx.iter().map(|&i| self.get(&manifest.rows[i].id)).collect();
            if kinds.contains(&None) {
                return Err(Error::Split(format!(
                    "set {}/s{} missing from split",
                    group.case_id, group.set_index
                )));
            }
            if kinds.contains(&Some(SplitKind::Test)) && kinds.len() > 1 {
                return Err(Error::Split(format!(
                    "test set {}/s{} is not whole",
                    group.case_id, group.set_index
                )));
            }
        }
        Ok(())
    }
}

/// Assign every manifest row to train, validation, or test.
///
/// With `case_disjoint`, test sets are taken as all sets of whole cases so
/// that no test case contributes images to training or validation.
pub fn build_split(
    manifest: &Manifest,
    counts: SplitCounts,
    seed: u64,
    case_disjoint: bool,
) -> Result<SplitAssignment> {
    manifest.validate()?;
    if !counts.test_sets.is_multiple_of(Diagnosis::COUNT) {
        return Err(Error::Split(format!(
            "test set count {} is not divisible by {}",
            counts.test_sets,
            Diagnosis::COUNT
        )));
    }
    let set_size = PATCHES_PER_SET as usize;
    let test_images = counts.test_sets * set_size;
    let requested = counts.train + counts.val + test_images;
    if requested != manifest.len() {
        return Err(Error::Split(format!(
            "counts {}+{}+{test_images} = {requested} do not match corpus size {}",
            counts.train,
            counts.val,
            manifest.len()
        )));
    }
    let per_class = counts.test_sets / Diagnosis::COUNT;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let groups = manifest.groups();
    let mut by_class: [Vec<&GroupId>; Diagnosis::COUNT] = Default::default();
    for (g, idx) in &groups {
        by_class[manifest.rows[idx[0]].label.index()].push(g);
    }

    let mut test_groups: BTreeSet<&GroupId> = BTreeSet::new();
    for (class, class_groups) in by_class.iter().enumerate() {
        if class_groups.len() < per_class {
            return Err(Error::Split(format!(
                "class {class} has {} sets, {per_class} requested for test",
                class_groups.len()
            )));
        }
        if case_disjoint {
            let mut cases: Vec<&str> = class_groups
                .iter()
                .map(|g| g.case_id.as_str())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            cases.shuffle(&mut rng);
            let mut taken = 0;
            for case in cases {
                if taken == per_class {
                    break;
                }
                let sets: Vec<&&GroupId> =
                    class_groups.iter().filter(|g| g.case_id == case).collect();
                if taken + sets.len() > per_class {
                    continue;
                }
                taken += sets.len();
                test_groups.extend(sets.into_iter().copied());
            }
            if taken != per_class {
                return Err(Error::Split(format!(
                    "class {class}: cannot pick whole cases totalling {per_class} sets"
                )));
            }
        } else {
            let mut shuffled = class_groups.clone();
            shuffled.shuffle(&mut rng);
            test_groups.extend(shuffled.into_iter().take(per_class));
        }
    }

    let mut assignments = BTreeMap::new();
    let mut rest: Vec<&RecordId> = Vec::new();
    for (g, idx) in &groups {
        for &i in idx {
            let id = &manifest.rows[i].id;
            if test_groups.contains(g) {
                assignments.insert(id.clone(), SplitKind::Test);
            } else {
                rest.push(id);
            }
        }
    }
    rest.shuffle(&mut rng);
    for (k, id) in rest.into_iter().enumerate() {
        let kind = if k < counts.train {
            SplitKind::Train
        } else {
            SplitKind::Val
        };
        assignments.insert(id.clone(), kind);
    }
    Ok(SplitAssignment { assignments })
}
