//! Tab-separated index of patch record files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use super::record::{read_record, Diagnosis, PatchRecord};
use crate::error::{Error, Result};

pub const SETS_PER_CASE: u8 = 4;
pub const PATCHES_PER_SET: u8 = 5;
pub const MANIFEST_HEADER: &str = "path\tcase_id\tset_index\tpatch_index\tlabel";

/// Identity of one patch within the corpus.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecordId {
    pub case_id: String,
    pub set_index: u8,
    pub patch_index: u8,
}

impl RecordId {
    pub fn new(case_id: impl Into<String>, set_index: u8, patch_index: u8) -> Self {
        RecordId {
            case_id: case_id.into(),
            set_index,
            patch_index,
        }
    }

    pub fn group(&self) -> GroupId {
        GroupId {
            case_id: self.case_id.clone(),
            set_index: self.set_index,
        }
    }
}

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/s{}/p{}", self.case_id, self.set_index, self.patch_index)
    }
}

/// A case's set of five patches: the voting unit.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupId {
    pub case_id: String,
    pub set_index: u8,
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/s{}", self.case_id, self.set_index)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRow {
    pub path: String,
    pub id: RecordId,
    pub label: Diagnosis,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

/// A record together with its identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub id: RecordId,
    pub record: PatchRecord,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn parse(source: impl Read) -> Result<Self> {
        let mut lines = BufReader::new(source).lines();
        match lines.next().transpose()? {
            Some(h) if h.trim_end_matches('\r') == MANIFEST_HEADER => {}
            Some(h) => return Err(Error::Manifest(format!("line 1: unexpected header {h:?}"))),
            None => return Err(Error::Manifest("empty manifest".into())),
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            rows.push(parse_row(line).map_err(|e| Error::Manifest(format!("line {}: {e}", n + 2)))?);
        }
        Ok(Manifest { rows })
    }

    pub fn write(&self, mut sink: impl Write) -> Result<()> {
        writeln!(sink, "{MANIFEST_HEADER}")?;
        for r in &self.rows {
            writeln!(
                sink,
                "{}\t{}\t{}\t{}\t{}",
                r.path,
                r.id.case_id,
                r.id.set_index,
                r.id.patch_index,
                r.label.code()
            )?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        Manifest::parse(file).map_err(|e| e.in_file(path))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        fs::write(path, buf).map_err(|e| Error::from(e).in_file(path))
    }

    /// Row indices per set-group, in sorted group order.
    pub fn groups(&self) -> BTreeMap<GroupId, Vec<usize>> {
        let mut groups: BTreeMap<GroupId, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            groups.entry(r.id.group()).or_default().push(i);
        }
        for idx in groups.values_mut() {
            idx.sort_by_key(|&i| self.rows[i].id.patch_index);
        }
        groups
    }

    /// Check that identities are unique and every set-group holds exactly
    /// five rows with one label.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for r in &self.rows {
            if r.id.set_index >= SETS_PER_CASE || r.id.patch_index >= PATCHES_PER_SET {
                return Err(Error::Manifest(format!("{}: index out of range", r.id)));
            }
            if !seen.insert(&r.id) {
                return Err(Error::Manifest(format!("duplicate record {}", r.id)));
            }
        }
        for (g, idx) in self.groups() {
            if idx.len() != PATCHES_PER_SET as usize {
                return Err(Error::Manifest(format!(
                    "set {}/s{} has {} patches, expected {PATCHES_PER_SET}",
                    g.case_id,
                    g.set_index,
                    idx.len()
                )));
            }
            let label = self.rows[idx[0]].label;
            if idx.iter().any(|&i| self.rows[i].label != label) {
                return Err(Error::Manifest(format!(
                    "set {}/s{} mixes labels",
                    g.case_id, g.set_index
                )));
            }
        }
        Ok(())
    }

    /// Distinct cases per label.
    pub fn cases_per_label(&self) -> [usize; Diagnosis::COUNT] {
        let mut cases: [BTreeSet<&str>; Diagnosis::COUNT] = Default::default();
        for r in &self.rows {
            cases[r.label.index()].insert(&r.id.case_id);
        }
        cases.map(|s| s.len())
    }

    /// Read every record, resolving relative paths against `base`. Fails if a
    /// record's stored label disagrees with its manifest row.
    pub fn load_samples(&self, base: &Path) -> Result<Vec<Sample>> {
        self.rows
            .iter()
            .map(|row| {
                let path = resolve(base, &row.path);
                let file = fs::File::open(&path).map_err(|e| Error::from(e).in_file(&path))?;
                let record = read_record(file).map_err(|e| e.in_file(&path))?;
                if record.label != row.label {
                    return Err(Error::Manifest(format!(
                        "{}: record label {} disagrees with manifest label {}",
                        row.id,
                        record.label.code(),
                        row.label.code()
                    ))
                    .in_file(&path));
                }
                Ok(Sample {
                    id: row.id.clone(),
                    record,
                })
            })
            .collect()
    }
}

pub fn resolve(base: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn parse_row(line: &str) -> std::result::Result<ManifestRow, String> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != 5 {
        return Err(format!("expected 5 tab-separated fields, found {}", f.len()));
    }
    let num = |s: &str, what: &str| s.parse::<u8>().map_err(|_| format!("bad {what} {s:?}"));
    if f[0].is_empty() || f[1].is_empty() {
        return Err("empty path or case_id".into());
    }
    let label = Diagnosis::from_code(num(f[4], "label")? as i64).map_err(|e| e.to_string())?;
    Ok(ManifestRow {
        path: f[0].to_string(),
        id: RecordId::new(f[1], num(f[2], "set_index")?, num(f[3], "patch_index")?),
        label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(case: &str, set: u8, patch: u8, label: Diagnosis) -> ManifestRow {
        ManifestRow {
            path: format!("records/{case}_s{set}_p{patch}.txt"),
            id: RecordId::new(case, set, patch),
            label,
        }
    }

    fn one_set(case: &str, set: u8, label: Diagnosis) -> Vec<ManifestRow> {
        (0..5).map(|p| row(case, set, p, label)).collect()
    }

    #[test]
    fn text_round_trip() {
        let m = Manifest { rows: one_set("case001", 2, Diagnosis::Sll) };
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with(MANIFEST_HEADER));
        assert_eq!(Manifest::parse(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn validation_catches_bad_groups() {
        let mut m = Manifest { rows: one_set("a", 0, Diagnosis::Benign) };
        assert!(m.validate().is_ok());
        m.rows[3].label = Diagnosis::Dlbcl;
        assert!(m.validate().is_err());
        let mut m = Manifest { rows: one_set("a", 0, Diagnosis::Benign) };
        m.rows.pop();
        assert!(m.validate().is_err());
        let mut m = Manifest { rows: one_set("a", 0, Diagnosis::Benign) };
        m.rows[4].id.patch_index = 0;
        assert!(m.validate().is_err());
        let m = Manifest { rows: one_set("a", 4, Diagnosis::Benign) };
        assert!(m.validate().is_err());
    }

    #[test]
    fn parse_reports_line_numbers() {
        let text = format!("{MANIFEST_HEADER}\nx\ta\t0\t0\t0\nx\ta\t0\t1\t9\n");
        let err = Manifest::parse(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(Manifest::parse("wrong\theader\n".as_bytes()).is_err());
    }
}
