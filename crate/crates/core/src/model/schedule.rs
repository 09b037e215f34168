use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Per-layer dilations of a recurrent stack.
///
/// Exponential schedules have `s(l) = M^(l−1+l0)` for `l = 1..L`; uniform
/// schedules (stacked and regular-skip baselines) repeat one value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DilationSchedule {
    base: usize,
    start_exponent: u32,
    dilations: Vec<usize>,
}

impl DilationSchedule {
    pub fn exponential(num_layers: usize, base: usize, start_exponent: u32) -> Result<Self> {
        if num_layers == 0 {
            return Err(Error::config("a schedule needs at least one layer"));
        }
        if base < 2 {
            return Err(Error::config(format!("dilation base must be >= 2, got {base}")));
        }
        let dilations = (0..num_layers)
            .map(|l| {
                u32::try_from(l)
                    .ok()
                    .and_then(|l| l.checked_add(start_exponent))
                    .and_then(|e| base.checked_pow(e))
                    .ok_or_else(|| Error::config("dilation overflows usize"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DilationSchedule {
            base,
            start_exponent,
            dilations,
        })
    }

    /// `num_layers` copies of `dilation`.
    pub fn uniform(num_layers: usize, dilation: usize) -> Result<Self> {
        if num_layers == 0 || dilation == 0 {
            return Err(Error::config("uniform schedule needs layers >= 1 and dilation >= 1"));
        }
        Ok(DilationSchedule {
            base: 1,
            start_exponent: 0,
            dilations: alloc::vec![dilation; num_layers],
        })
    }

    pub fn num_layers(&self) -> usize {
        self.dilations.len()
    }

    pub fn dilations(&self) -> &[usize] {
        &self.dilations
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn start_exponent(&self) -> u32 {
        self.start_exponent
    }

    pub fn is_exponential(&self) -> bool {
        self.base >= 2
    }

    /// `M^l0`, the smallest dilation of an exponential schedule.
    pub fn starting_dilation(&self) -> usize {
        self.dilations[0]
    }

    pub fn max_dilation(&self) -> usize {
        *self.dilations.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_layers_base_two() {
        let s = DilationSchedule::exponential(9, 2, 0).unwrap();
        assert_eq!(s.dilations(), &[1, 2, 4, 8, 16, 32, 64, 128, 256]);
    }

    #[test]
    fn starting_exponent_shifts_the_schedule() {
        let s = DilationSchedule::exponential(3, 2, 1).unwrap();
        assert_eq!(s.dilations(), &[2, 4, 8]);
        assert_eq!(s.starting_dilation(), 2);
        let s = DilationSchedule::exponential(2, 3, 2).unwrap();
        assert_eq!(s.dilations(), &[9, 27]);
    }

    #[test]
    fn every_dilation_divides_the_next() {
        for base in 2..5 {
            for l0 in 0..3 {
                let s = DilationSchedule::exponential(6, base, l0).unwrap();
                assert!(s.dilations().windows(2).all(|w| w[1] % w[0] == 0 && w[1] >= w[0]));
            }
        }
    }

    #[test]
    fn invalid_schedules() {
        assert!(DilationSchedule::exponential(0, 2, 0).is_err());
        assert!(DilationSchedule::exponential(3, 1, 0).is_err());
        assert!(DilationSchedule::exponential(80, 2, 0).is_err());
        assert!(DilationSchedule::uniform(2, 0).is_err());
    }
}
