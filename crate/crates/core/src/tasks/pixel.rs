use alloc::vec::Vec;

use super::TaskBatch;
use crate::error::{Error, Result};
use crate::numeric::{DenseMatrix, Rng};

pub const IMAGE_PIXELS: usize = 784;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PixelSequenceConfig {
    /// Seed of the pixel permutation shared by every image; `None` keeps
    /// row-major order.
    pub permutation_seed: Option<u64>,
    /// Total length after appending uniform noise; at least 784.
    pub pad_to: Option<usize>,
    pub noise_seed: u64,
}

impl PixelSequenceConfig {
    pub fn validate(&self) -> Result<()> {
        match self.pad_to {
            Some(t) if t < IMAGE_PIXELS => Err(Error::config(alloc::format!(
                "pad length {t} is shorter than the {IMAGE_PIXELS} pixels of an image"
            ))),
            _ => Ok(()),
        }
    }

    pub fn length(&self) -> usize {
        self.pad_to.unwrap_or(IMAGE_PIXELS)
    }
}

/// Uniform shuffle of `0..784` drawn from `seed`.
pub fn shared_permutation(seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..IMAGE_PIXELS).collect();
    Rng::new(seed).shuffle(&mut idx);
    idx
}

/// Row-major pixels, optionally permuted by `permutation`, followed by
/// uniform `[0, 1)` noise from `rng` up to the padded length.
pub fn make_pixel_sequence(
    image: &[f64],
    cfg: &PixelSequenceConfig,
    permutation: Option<&[usize]>,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if image.len() != IMAGE_PIXELS {
        return Err(Error::dim("make_pixel_sequence", "784 pixels", alloc::format!("{}", image.len())));
    }
    if image.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::config("pixel values must lie in [0, 1]"));
    }
    let mut seq: Vec<f64> = match permutation {
        Some(p) => p.iter().map(|&i| image[i]).collect(),
        None => image.to_vec(),
    };
    while seq.len() < cfg.length() {
        seq.push(rng.uniform());
    }
    Ok(seq)
}

/// Batch of pixel sequences with the label at the final timestep only.
/// Noise for example `b` comes from a stream derived from
/// `(noise_seed, b)`.
pub fn pixel_batch(images: &[&[f64]], labels: &[u8], cfg: &PixelSequenceConfig) -> Result<TaskBatch> {
    cfg.validate()?;
    if images.len() != labels.len() || images.is_empty() {
        return Err(Error::dim(
            "pixel_batch",
            "one label per image and at least one image",
            alloc::format!("{} images, {} labels", images.len(), labels.len()),
        ));
    }
    let perm = cfg.permutation_seed.map(shared_permutation);
    let len = cfg.length();
    let batch = images.len();
    let mut inputs: Vec<DenseMatrix> = (0..len).map(|_| DenseMatrix::zeros(batch, 1)).collect();
    for (b, img) in images.iter().enumerate() {
        let mut rng = Rng::derive(cfg.noise_seed, b as u64);
        let seq = make_pixel_sequence(img, cfg, perm.as_deref(), &mut rng)?;
        for (t, v) in seq.into_iter().enumerate() {
            inputs[t].set(b, 0, v);
        }
    }
    let mut targets = alloc::vec![alloc::vec![0usize; batch]; len];
    targets[len - 1] = labels.iter().map(|&l| usize::from(l)).collect();
    if targets[len - 1].iter().any(|&l| l >= 10) {
        return Err(Error::config("digit labels must be below 10"));
    }
    let mut mask = alloc::vec![false; len];
    mask[len - 1] = true;
    Ok(TaskBatch {
        inputs,
        targets,
        mask,
        num_classes: 10,
        seed: cfg.noise_seed,
    })
}
