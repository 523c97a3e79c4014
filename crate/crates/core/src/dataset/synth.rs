//! Seeded class-conditional texture generator standing in for real slide
//! patches.
//!
//! Each class draws a handful of soft-edged discs ("blobs") onto a flat
//! field and adds Gaussian noise. The per-class parameters live in
//! [`SYNTH_TABLE`]; once accuracy numbers have been recorded against a table
//! version the table must not change. Edit a copy and bump
//! [`SYNTH_TABLE_VERSION`] instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::record::{Diagnosis, PatchRecord, PATCH_PIXELS, PATCH_SIDE};

pub const SYNTH_TABLE_VERSION: u32 = 1;

/// Texture recipe for one class. Ranges are inclusive `(low, high)` and
/// sampled uniformly per patch (counts) or per blob (radius, level).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TextureParams {
    /// Intensity of the field before blobs are drawn.
    pub field: (f64, f64),
    pub blob_count: (u32, u32),
    pub radius: (f64, f64),
    /// Intensity at the centre of a blob.
    pub level: (f64, f64),
    /// Width of the logistic edge of each blob, in pixels.
    pub softness: f64,
    pub noise_sigma: f64,
}

/// Version 1 table, indexed by label code.
pub const SYNTH_TABLE: [TextureParams; 4] = [
    // benign: few large soft pale blobs
    TextureParams {
        field: (222.0, 238.0),
        blob_count: (2, 4),
        radius: (5.0, 7.0),
        level: (150.0, 180.0),
        softness: 2.0,
        noise_sigma: 6.0,
    },
    // DLBCL: moderate number of large dark blobs
    TextureParams {
        field: (222.0, 238.0),
        blob_count: (6, 10),
        radius: (3.5, 4.5),
        level: (80.0, 110.0),
        softness: 1.0,
        noise_sigma: 6.0,
    },
    // BL: dark field with scattered bright holes
    TextureParams {
        field: (90.0, 110.0),
        blob_count: (3, 6),
        radius: (2.5, 3.5),
        level: (200.0, 225.0),
        softness: 1.0,
        noise_sigma: 6.0,
    },
    // SLL: many small dark dots
    TextureParams {
        field: (222.0, 238.0),
        blob_count: (35, 50),
        radius: (1.5, 2.5),
        level: (60.0, 90.0),
        softness: 0.6,
        noise_sigma: 6.0,
    },
];

pub fn texture_params(label: Diagnosis) -> &'static TextureParams {
    &SYNTH_TABLE[label.index()]
}

/// Deterministic synthetic patch for `(label, seed)`.
pub fn synth_generate(label: Diagnosis, seed: u64) -> PatchRecord {
    let t = texture_params(label);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((label.code() as u64) << 56));
    let field = rng.random_range(t.field.0..=t.field.1);
    let mut canvas = vec![field; PATCH_PIXELS];
    let blobs = rng.random_range(t.blob_count.0..=t.blob_count.1);
    let side = PATCH_SIDE as f64;
    for _ in 0..blobs {
        let cy = rng.random_range(0.0..side);
        let cx = rng.random_range(0.0..side);
        let r = rng.random_range(t.radius.0..=t.radius.1);
        let level = rng.random_range(t.level.0..=t.level.1);
        let reach = r + 6.0 * t.softness;
        let rows = ((cy - reach).floor().max(0.0) as usize)..((cy + reach).ceil().min(side) as usize);
        for row in rows {
            let cols =
                ((cx - reach).floor().max(0.0) as usize)..((cx + reach).ceil().min(side) as usize);
            for col in cols {
                let d = ((row as f64 + 0.5 - cy).powi(2) + (col as f64 + 0.5 - cx).powi(2)).sqrt();
                let alpha = 1.0 / (1.0 + ((d - r) / t.softness).exp());
                let px = &mut canvas[row * PATCH_SIDE + col];
                *px += alpha * (level - *px);
            }
        }
    }
    let noise = Normal::new(0.0, t.noise_sigma).expect("finite sigma");
    let mut pixels = Box::new([0u8; PATCH_PIXELS]);
    for (dst, v) in pixels.iter_mut().zip(canvas) {
        *dst = (v + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8;
    }
    PatchRecord::new(label, pixels)
}

/// Mix several integers into one well-spread 64-bit seed (splitmix64 steps).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(r: &PatchRecord) -> (f64, f64) {
        let m = r.mean_intensity();
        let var = r.pixels.iter().map(|&p| (p as f64 - m).powi(2)).sum::<f64>() / PATCH_PIXELS as f64;
        (m, var)
    }

    #[test]
    fn same_label_and_seed_is_identical() {
        for label in Diagnosis::ALL {
            assert_eq!(synth_generate(label, 77), synth_generate(label, 77));
        }
        assert_ne!(synth_generate(Diagnosis::Sll, 1), synth_generate(Diagnosis::Sll, 2));
    }

    #[test]
    fn class_means_are_separated() {
        let means: Vec<f64> = Diagnosis::ALL
            .iter()
            .map(|&label| {
                (0..1000)
                    .map(|s| synth_generate(label, derive_seed(11, &[s])).mean_intensity())
                    .sum::<f64>()
                    / 1000.0
            })
            .collect();
        for i in 0..4 {
            for j in i + 1..4 {
                assert!(
                    (means[i] - means[j]).abs() >= 5.0,
                    "classes {i} and {j}: {means:?}"
                );
            }
        }
    }

    #[test]
    fn centroid_baseline_is_better_than_chance() {
        // Nearest centroid on standardized (mean, variance) features.
        let train: Vec<(usize, (f64, f64))> = (0..400)
            .map(|i| {
                let label = Diagnosis::ALL[i % 4];
                (i % 4, features(&synth_generate(label, derive_seed(1, &[i as u64]))))
            })
            .collect();
        let test: Vec<(usize, (f64, f64))> = (0..400)
            .map(|i| {
                let label = Diagnosis::ALL[i % 4];
                (i % 4, features(&synth_generate(label, derive_seed(2, &[i as u64]))))
            })
            .collect();
        let n = train.len() as f64;
        let mu = (
            train.iter().map(|t| t.1 .0).sum::<f64>() / n,
            train.iter().map(|t| t.1 .1).sum::<f64>() / n,
        );
        let sd = (
            (train.iter().map(|t| (t.1 .0 - mu.0).powi(2)).sum::<f64>() / n).sqrt(),
            (train.iter().map(|t| (t.1 .1 - mu.1).powi(2)).sum::<f64>() / n).sqrt(),
        );
        let z = |f: (f64, f64)| ((f.0 - mu.0) / sd.0, (f.1 - mu.1) / sd.1);
        let mut centroids = [(0.0, 0.0); 4];
        for (c, f) in &train {
            let f = z(*f);
            centroids[*c].0 += f.0 / 100.0;
            centroids[*c].1 += f.1 / 100.0;
        }
        let correct = test
            .iter()
            .filter(|(c, f)| {
                let f = z(*f);
                let best = (0..4)
                    .min_by(|&a, &b| {
                        let da = (f.0 - centroids[a].0).powi(2) + (f.1 - centroids[a].1).powi(2);
                        let db = (f.0 - centroids[b].0).powi(2) + (f.1 - centroids[b].1).powi(2);
                        da.total_cmp(&db)
                    })
                    .unwrap();
                best == *c
            })
            .count();
        assert!(correct as f64 / 400.0 >= 0.60, "baseline accuracy {correct}/400");
    }

    #[test]
    fn derived_seeds_differ_by_position() {
        let a = derive_seed(5, &[1, 2, 3]);
        assert_eq!(a, derive_seed(5, &[1, 2, 3]));
        assert_ne!(a, derive_seed(5, &[1, 3, 2]));
        assert_ne!(a, derive_seed(6, &[1, 2, 3]));
    }
}
