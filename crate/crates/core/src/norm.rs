//! Overflow-safe accumulation of `r`-th power sums.
//!
//! A [`PowerSum`] stores `Σ x^r` as `scale^r · sum` with `scale` the largest
//! magnitude seen so far, so every stored ratio lies in `[0, 1]`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSum {
    scale: f64,
    sum: f64,
}

impl Default for PowerSum {
    fn default() -> Self {
        Self::ZERO
    }
}

impl PowerSum {
    pub const ZERO: PowerSum = PowerSum {
        scale: 0.0,
        sum: 0.0,
    };

    pub fn of(x: f64, r: f64) -> Self {
        let mut s = Self::ZERO;
        s.add(x, r);
        s
    }

    pub fn add(&mut self, x: f64, r: f64) {
        let x = x.abs();
        if x == 0.0 {
            return;
        }
        if x > self.scale {
            self.sum = if self.scale == 0.0 {
                1.0
            } else {
                self.sum * (self.scale / x).powf(r) + 1.0
            };
            self.scale = x;
        } else {
            self.sum += (x / self.scale).powf(r);
        }
    }

    pub fn merge(&mut self, other: &PowerSum, r: f64) {
        if other.scale == 0.0 {
            return;
        }
        if other.scale > self.scale {
            let own = if self.scale == 0.0 {
                0.0
            } else {
                self.sum * (self.scale / other.scale).powf(r)
            };
            self.sum = own + other.sum;
            self.scale = other.scale;
        } else {
            self.sum += other.sum * (other.scale / self.scale).powf(r);
        }
    }

    /// `(Σ x^r)^{1/r}`.
    pub fn norm(&self, r: f64) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.scale * self.sum.powf(1.0 / r)
        }
    }

    /// `Σ x^r` itself; may overflow where [`PowerSum::norm`] does not.
    pub fn value(&self, r: f64) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.scale.powf(r) * self.sum
        }
    }

    pub fn is_zero(&self) -> bool {
        self.scale == 0.0
    }
}

pub(crate) fn check_exponent(r: f64) -> Result<()> {
    if r.is_finite() && r > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(format!(
            "exponent must lie in (1, inf), got {r}"
        )))
    }
}

/// Global `l_r` norm `(Σ|f|^r)^{1/r}`.
pub fn lp_norm(f: &[f64], r: f64) -> Result<f64> {
    check_exponent(r)?;
    Ok(lp_norm_unchecked(f, r))
}

pub(crate) fn lp_norm_unchecked(f: &[f64], r: f64) -> f64 {
    let mut acc = PowerSum::ZERO;
    for &x in f {
        acc.add(x, r);
    }
    acc.norm(r)
}
