//! Look-ahead nonlocal density.
//!
//! The space-time operator evaluates
//! `rho_d[n, j] = sum_i rho[n - i nt_s, j + i] * eta[i] dx` for `i < n_d`, where
//! `nt_s = floor(gamma dx / dt)` is the per-sample time offset. With
//! `gamma = 0` it is the purely spatial convolution. The operator never
//! extrapolates: every accessed cell must already exist in the field,
//! temporal and spatial collars included.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::grid::DensityField;
use crate::kernel::DiscreteKernel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySpec {
    gamma: f64,
    nt_s: usize,
}

impl DelaySpec {
    pub fn new(gamma: f64, dx: f64, dt: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("delay gamma = {gamma} must be finite and >= 0")));
        }
        // The small offset keeps exact ratios such as 0.01 * 10 / 0.05 from
        // flooring to one step less after rounding.
        let nt_s = (gamma * dx / dt + 1e-9).floor() as usize;
        Ok(DelaySpec { gamma, nt_s })
    }

    pub fn none() -> Self {
        DelaySpec { gamma: 0.0, nt_s: 0 }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn nt_s(&self) -> usize {
        self.nt_s
    }

    /// Positive delay that the time step is too coarse to represent.
    pub fn is_under_resolved(&self) -> bool {
        self.gamma > 0.0 && self.nt_s == 0
    }

    /// Steps back in time reached by a stencil of `n_d` samples.
    pub fn reach(&self, n_d: usize) -> usize {
        n_d.saturating_sub(1) * self.nt_s
    }
}

fn check_stencil(
    field: &DensityField,
    step: isize,
    j_range: &Range<usize>,
    n_d: usize,
    nt_s: usize,
) -> Result<()> {
    if j_range.is_empty() {
        return Ok(());
    }
    let last_col = j_range.end - 1 + n_d - 1;
    if last_col >= field.grid().cols() {
        return Err(Error::OutOfCollar(format!(
            "column {last_col} needed at step {step}, field has {} columns",
            field.grid().cols()
        )));
    }
    let earliest = step - ((n_d - 1) * nt_s) as isize;
    if !field.has_row(step) || earliest < field.k_min() {
        return Err(Error::OutOfCollar(format!(
            "rows {earliest}..={step} needed, field covers {}..={}",
            field.k_min(),
            field.k_max()
        )));
    }
    Ok(())
}

#[inline]
fn finish(acc: f64) -> f64 {
    // Mass sums to one up to a few ulps; keep the result a valid density.
    acc.clamp(0.0, 1.0)
}

/// `sum_i rho[step, j + i] eta[i] dx`.
pub fn nonlocal_density_spatial(
    field: &DensityField,
    step: isize,
    j: usize,
    dk: &DiscreteKernel,
) -> Result<f64> {
    check_stencil(field, step, &(j..j + 1), dk.n_d(), 0)?;
    let row = field.row(step);
    let mut acc = 0.0;
    for (i, m) in dk.mass().iter().enumerate() {
        acc += row[j + i] * m;
    }
    Ok(finish(acc))
}

/// `sum_i rho[step - i nt_s, j + i] eta[i] dx`.
pub fn nonlocal_density_spacetime(
    field: &DensityField,
    step: isize,
    j: usize,
    dk: &DiscreteKernel,
    delay: &DelaySpec,
) -> Result<f64> {
    let nt_s = delay.nt_s();
    check_stencil(field, step, &(j..j + 1), dk.n_d(), nt_s)?;
    let mut acc = 0.0;
    for (i, m) in dk.mass().iter().enumerate() {
        acc += field.get(step - (i * nt_s) as isize, j + i) * m;
    }
    Ok(finish(acc))
}

/// The space-time operator over a range of columns of one time row.
///
/// Loops sample-outer so each pass streams one stored row; the per-cell
/// summation order is unchanged, so results equal the per-cell calls exactly.
pub fn nonlocal_density_row(
    field: &DensityField,
    step: isize,
    dk: &DiscreteKernel,
    delay: &DelaySpec,
    j_range: Range<usize>,
) -> Result<Vec<f64>> {
    let nt_s = delay.nt_s();
    check_stencil(field, step, &j_range, dk.n_d(), nt_s)?;
    let mut acc = vec![0.0; j_range.len()];
    for (i, m) in dk.mass().iter().enumerate() {
        let row = field.row(step - (i * nt_s) as isize);
        let src = &row[j_range.start + i..j_range.end + i];
        for (a, rho) in acc.iter_mut().zip(src) {
            *a += rho * m;
        }
    }
    for a in &mut acc {
        *a = finish(*a);
    }
    Ok(acc)
}
