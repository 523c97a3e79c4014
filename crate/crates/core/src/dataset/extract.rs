//! Random 40x40 patch capture from a larger grayscale image.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::raster::GrayImage;
use super::record::{Pixels, PATCH_PIXELS, PATCH_SIDE};
use crate::error::{Error, Result};

/// Default mean-intensity cutoff above which a patch counts as background.
pub const DEFAULT_BACKGROUND_THRESHOLD: f64 = 240.0;

/// Draw budget per requested patch when background rejection is enabled.
pub const ATTEMPTS_PER_PATCH: usize = 100;

/// Capture `count` patches at uniformly drawn top-left corners. Patches may
/// overlap. With a threshold, patches brighter on average than the threshold
/// are redrawn.
pub fn extract_patches(
    image: &GrayImage,
    count: usize,
    seed: u64,
    background_threshold: Option<f64>,
) -> Result<Vec<Pixels>> {
    if image.width() < PATCH_SIDE || image.height() < PATCH_SIDE {
        return Err(Error::Extract(format!(
            "image {}x{} is smaller than {PATCH_SIDE}x{PATCH_SIDE}",
            image.width(),
            image.height()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_top = image.height() - PATCH_SIDE;
    let max_left = image.width() - PATCH_SIDE;
    let budget = count.saturating_mul(ATTEMPTS_PER_PATCH);
    let mut patches = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while patches.len() < count {
        if background_threshold.is_some() && attempts >= budget {
            return Err(Error::Extract(format!(
                "retry budget exhausted: accepted {} of {attempts} draws ({:.2}% acceptance)",
                patches.len(),
                100.0 * patches.len() as f64 / attempts.max(1) as f64
            )));
        }
        attempts += 1;
        let top = rng.random_range(0..=max_top);
        let left = rng.random_range(0..=max_left);
        let block = image.crop(top, left, PATCH_SIDE);
        if let Some(limit) = background_threshold {
            let mean = block.iter().map(|&p| p as f64).sum::<f64>() / PATCH_PIXELS as f64;
            if mean > limit {
                continue;
            }
        }
        let pixels: Pixels = block
            .into_boxed_slice()
            .try_into()
            .expect("crop returns PATCH_PIXELS values");
        patches.push(pixels);
    }
    Ok(patches)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: usize, h: usize) -> GrayImage {
        GrayImage::new(w, h, (0..w * h).map(|i| (i % 251) as u8).collect()).unwrap()
    }

    #[test]
    fn exact_size_image_yields_itself() {
        let img = gradient(40, 40);
        let p = extract_patches(&img, 1, 9, None).unwrap();
        assert_eq!(&p[0][..], img.pixels());
    }

    #[test]
    fn undersized_image_is_rejected() {
        assert!(extract_patches(&gradient(39, 40), 1, 0, None).is_err());
        assert!(extract_patches(&gradient(40, 39), 1, 0, None).is_err());
    }

    #[test]
    fn same_seed_same_patches() {
        let img = gradient(97, 83);
        let a = extract_patches(&img, 7, 42, None).unwrap();
        let b = extract_patches(&img, 7, 42, None).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, extract_patches(&img, 7, 43, None).unwrap());
    }

    #[test]
    fn background_patches_are_redrawn() {
        // Left half dark, right half white.
        let (w, h) = (120, 60);
        let px = (0..w * h).map(|i| if i % w < 60 { 100 } else { 255 }).collect();
        let img = GrayImage::new(w, h, px).unwrap();
        let patches = extract_patches(&img, 20, 5, Some(DEFAULT_BACKGROUND_THRESHOLD)).unwrap();
        for p in &patches {
            let mean = p.iter().map(|&v| v as f64).sum::<f64>() / PATCH_PIXELS as f64;
            assert!(mean <= DEFAULT_BACKGROUND_THRESHOLD);
        }
    }

    #[test]
    fn all_background_exhausts_budget() {
        let img = GrayImage::new(50, 50, vec![255; 2500]).unwrap();
        let err = extract_patches(&img, 3, 1, Some(240.0)).unwrap_err();
        assert!(err.to_string().contains("acceptance"));
    }
}
