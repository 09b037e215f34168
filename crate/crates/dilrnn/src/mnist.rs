//! IDX file loading.

use std::fs;
use std::path::Path;

use dilrnn_core::tasks::{parse_idx_images, parse_idx_labels, IdxImages};

use crate::error::{AppError, AppResult};

/// Reads an image file and its label file; counts must agree.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> AppResult<(IdxImages, Vec<u8>)> {
    let read = |p: &Path| fs::read(p).map_err(|e| AppError::io(p, e));
    let images = parse_idx_images(&read(images_path)?).map_err(|e| AppError::Usage(format!("{}: {e}", images_path.display())))?;
    let labels = parse_idx_labels(&read(labels_path)?).map_err(|e| AppError::Usage(format!("{}: {e}", labels_path.display())))?;
    if images.count != labels.len() {
        return Err(AppError::Usage(format!(
            "{} images but {} labels",
            images.count,
            labels.len()
        )));
    }
    Ok((images, labels))
}
