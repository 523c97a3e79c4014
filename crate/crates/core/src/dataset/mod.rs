//! Patch records, raster ingestion, synthetic corpora, manifests and splits.

mod extract;
mod manifest;
mod raster;
mod record;
mod split;
mod synth;
mod transform;

use std::fs;
use std::path::Path;

pub use extract::{extract_patches, ATTEMPTS_PER_PATCH, DEFAULT_BACKGROUND_THRESHOLD};
pub use manifest::{
    resolve, GroupId, Manifest, ManifestRow, RecordId, Sample, MANIFEST_HEADER, PATCHES_PER_SET,
    SETS_PER_CASE,
};
pub use raster::{ingest_raster, luma, GrayImage};
pub use record::{
    read_record, write_record, Diagnosis, PatchRecord, Pixels, PATCH_PIXELS, PATCH_SIDE,
    RECORD_ENTRIES,
};
pub use split::{build_split, SplitAssignment, SplitCounts, SplitKind, SPLIT_HEADER};
pub use synth::{derive_seed, synth_generate, texture_params, TextureParams, SYNTH_TABLE, SYNTH_TABLE_VERSION};
pub use transform::{augment, normalize, Augment};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const RECORDS_DIR: &str = "records";

/// Relative path under a corpus directory for the record `id`.
pub fn record_path(id: &RecordId) -> String {
    format!(
        "{RECORDS_DIR}/{}_s{}_p{}.txt",
        id.case_id, id.set_index, id.patch_index
    )
}

/// In-memory synthetic corpus of `cases` cases (labels cycle through the
/// four classes), each with 4 sets of 5 patches.
pub fn synth_corpus(cases: usize, seed: u64) -> Result<Vec<Sample>> {
    if !cases.is_multiple_of(Diagnosis::COUNT) {
        return Err(Error::Config(format!(
            "case count {cases} is not divisible by {}",
            Diagnosis::COUNT
        )));
    }
    let mut out = Vec::with_capacity(cases * 20);
    for case in 0..cases {
        let label = Diagnosis::ALL[case % Diagnosis::COUNT];
        for set in 0..SETS_PER_CASE {
            for patch in 0..PATCHES_PER_SET {
                let patch_seed = derive_seed(seed, &[case as u64, set as u64, patch as u64]);
                out.push(Sample {
                    id: RecordId::new(format!("case{case:03}"), set, patch),
                    record: synth_generate(label, patch_seed),
                });
            }
        }
    }
    Ok(out)
}

pub fn manifest_for(samples: &[Sample]) -> Manifest {
    Manifest {
        rows: samples
            .iter()
            .map(|s| ManifestRow {
                path: record_path(&s.id),
                id: s.id.clone(),
                label: s.record.label,
            })
            .collect(),
    }
}

/// Write `samples` as record files plus `manifest.tsv` under `dir`.
pub fn write_corpus(dir: &Path, samples: &[Sample]) -> Result<Manifest> {
    let records = dir.join(RECORDS_DIR);
    fs::create_dir_all(&records).map_err(|e| Error::from(e).in_file(&records))?;
    let manifest = manifest_for(samples);
    for (row, s) in manifest.rows.iter().zip(samples) {
        let path = dir.join(&row.path);
        fs::write(&path, s.record.to_line()).map_err(|e| Error::from(e).in_file(&path))?;
    }
    manifest.save(&dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Select the samples assigned to `kind`, in sorted identity order.
pub fn select(samples: &[Sample], split: &SplitAssignment, kind: SplitKind) -> Vec<Sample> {
    let mut out: Vec<Sample> = samples
        .iter()
        .filter(|s| split.get(&s.id) == Some(kind))
        .cloned()
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}
