use alloc::vec;
use alloc::vec::Vec;

use super::TaskBatch;
use crate::error::{Error, Result};
use crate::numeric::{DenseMatrix, Rng};

/// Alphabet size; also the number of input dimensions and classes.
pub const COPY_CLASSES: usize = 10;
/// Number of symbols to memorise and recall.
pub const COPY_RECALL: usize = 10;

const BLANK: usize = 8;
const DELIMITER: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CopyMemoryConfig {
    /// Delay `T`; sequences have length `T + 20`.
    pub delay: usize,
    pub batch: usize,
    pub seed: u64,
}

/// Ten random symbols from `0..8`, `T − 1` blanks (8), eleven delimiters (9);
/// the last ten steps must reproduce the first ten symbols. Inputs are
/// one-hot over ten symbols.
pub fn gen_copy_memory(cfg: &CopyMemoryConfig) -> Result<TaskBatch> {
    if cfg.delay == 0 || cfg.batch == 0 {
        return Err(Error::config("copy memory needs T >= 1 and batch >= 1"));
    }
    let len = cfg.delay + 2 * COPY_RECALL;
    let mut rng = Rng::new(cfg.seed);
    let mut symbols = vec![vec![0usize; len]; cfg.batch];
    for row in symbols.iter_mut() {
        for (t, s) in row.iter_mut().enumerate() {
            *s = if t < COPY_RECALL {
                rng.below(8) as usize
            } else if t < COPY_RECALL + cfg.delay - 1 {
                BLANK
            } else {
                DELIMITER
            };
        }
    }
    let mut inputs = Vec::with_capacity(len);
    let mut targets = Vec::with_capacity(len);
    let mut mask = Vec::with_capacity(len);
    for t in 0..len {
        let mut x = DenseMatrix::zeros(cfg.batch, COPY_CLASSES);
        for (b, row) in symbols.iter().enumerate() {
            x.set(b, row[t], 1.0);
        }
        inputs.push(x);
        let recall = t >= len - COPY_RECALL;
        mask.push(recall);
        targets.push(if recall {
            symbols.iter().map(|row| row[t - (len - COPY_RECALL)]).collect()
        } else {
            vec![0; cfg.batch]
        });
    }
    Ok(TaskBatch {
        inputs,
        targets,
        mask,
        num_classes: COPY_CLASSES,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symbol(x: &DenseMatrix, b: usize) -> usize {
        let row = x.row(b);
        assert_eq!(row.iter().sum::<f64>(), 1.0);
        row.iter().position(|&v| v == 1.0).unwrap()
    }

    #[test]
    fn layout_for_t_four() {
        let batch = gen_copy_memory(&CopyMemoryConfig { delay: 4, batch: 3, seed: 1 }).unwrap();
        assert_eq!(batch.len(), 24);
        assert_eq!(batch.input_dim(), 10);
        for b in 0..3 {
            let seq: Vec<usize> = batch.inputs.iter().map(|x| symbol(x, b)).collect();
            assert!(seq[..10].iter().all(|&s| s < 8));
            assert_eq!(&seq[10..13], &[8, 8, 8]);
            assert!(seq[13..].iter().all(|&s| s == 9));
            assert_eq!(seq[13..].len(), 11);
            for (k, t) in (14..24).enumerate() {
                assert_eq!(batch.targets[t][b], seq[k]);
            }
        }
        assert_eq!(batch.masked_steps().collect::<Vec<_>>(), (14..24).collect::<Vec<_>>());
        assert!(batch.targets[..14].iter().flatten().all(|&y| y == 0));
    }

    #[test]
    fn delay_one_has_no_blanks() {
        let batch = gen_copy_memory(&CopyMemoryConfig { delay: 1, batch: 1, seed: 0 }).unwrap();
        assert_eq!(batch.len(), 21);
        assert!((10..21).all(|t| symbol(&batch.inputs[t], 0) == 9));
    }

    #[test]
    fn deterministic_in_seed() {
        let cfg = CopyMemoryConfig { delay: 7, batch: 4, seed: 3 };
        assert_eq!(gen_copy_memory(&cfg).unwrap(), gen_copy_memory(&cfg).unwrap());
        let other = CopyMemoryConfig { seed: 4, ..cfg };
        assert_ne!(gen_copy_memory(&cfg).unwrap(), gen_copy_memory(&other).unwrap());
    }

    #[test]
    fn zero_delay_is_rejected() {
        assert!(gen_copy_memory(&CopyMemoryConfig { delay: 0, batch: 1, seed: 0 }).is_err());
    }
}
