//! Benchmark data: copy memory, pixel sequences and IDX decoding.
//!
//! Batches are time-major: `inputs[t]` is a `batch × input_dim` matrix.

mod copy;
mod idx;
mod pixel;

use alloc::vec::Vec;

pub use copy::{gen_copy_memory, CopyMemoryConfig, COPY_CLASSES, COPY_RECALL};
pub use idx::{encode_idx_images, encode_idx_labels, parse_idx_images, parse_idx_labels, IdxImages};
pub use pixel::{make_pixel_sequence, pixel_batch, shared_permutation, PixelSequenceConfig, IMAGE_PIXELS};

use crate::numeric::DenseMatrix;

/// A batch of sequences with per-timestep labels and a loss mask.
///
/// The mask is shared by every example of the batch, so it is stored once
/// per timestep. Targets at unmasked steps are 0 and never read.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskBatch {
    pub inputs: Vec<DenseMatrix>,
    /// `targets[t][b]`.
    pub targets: Vec<Vec<usize>>,
    pub mask: Vec<bool>,
    pub num_classes: usize,
    pub seed: u64,
}

impl TaskBatch {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn batch(&self) -> usize {
        self.inputs.first().map_or(0, |x| x.rows())
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, |x| x.cols())
    }

    pub fn masked_steps(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.mask.len()).filter(|&t| self.mask[t])
    }
}
