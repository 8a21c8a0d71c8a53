//! Relative L2 reconstruction error.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DensityField, Region};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    /// `sum (recon - known)^2 / sum known^2` over `region`.
    pub er: f64,
    pub region: Region,
    pub clamp_count: u64,
}

/// Relative squared error of `recon` against `known` on a region of cells.
///
/// The fields may carry different collars; only physical cells are read.
pub fn relative_l2(recon: &DensityField, known: &DensityField, region: &Region) -> Result<ErrorReport> {
    if !recon.grid().same_discretization(known.grid()) {
        return Err(Error::Shape("reconstruction and reference use different grids".into()));
    }
    let grid = recon.grid();
    if region.is_empty() {
        return Err(Error::Degenerate("error region is empty".into()));
    }
    if region.k0 < 0 || region.k1 > grid.n_t() as isize || region.j1 > grid.n() {
        return Err(Error::Shape(format!("region {region:?} outside the physical grid")));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for k in region.rows() {
        let r = &recon.interior_row(k)[region.cols()];
        let q = &known.interior_row(k)[region.cols()];
        for (a, b) in r.iter().zip(q) {
            num += (a - b) * (a - b);
            den += b * b;
        }
    }
    if den == 0.0 {
        return Err(Error::Degenerate("reference density is zero on the error region".into()));
    }
    Ok(ErrorReport {
        er: num / den,
        region: *region,
        clamp_count: recon.clamp_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;

    fn field(values: Vec<f64>, n: usize) -> DensityField {
        let n_t = values.len() / n - 1;
        let g = make_grid(0.0, n as f64, n_t as f64, n, 1.0, 0, 0).unwrap();
        DensityField::from_values(g, values).unwrap()
    }

    #[test]
    fn identical_fields() {
        let f = field(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6], 3);
        let r = relative_l2(&f, &f, &Region::full(f.grid())).unwrap();
        assert_eq!(r.er, 0.0);
    }

    #[test]
    fn doubled_field() {
        let known = field(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.45], 3);
        let recon = field(vec![0.2, 0.4, 0.6, 0.8, 1.0, 0.9], 3);
        let r = relative_l2(&recon, &known, &Region::full(known.grid())).unwrap();
        assert!((r.er - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hand_sum() {
        let known = field(vec![0.0, 0.0, 0.0, 0.4, 0.4, 0.9], 3);
        let recon = field(vec![0.0, 0.0, 0.0, 0.2, 0.4, 0.1], 3);
        let region = Region { k0: 1, k1: 1, j0: 0, j1: 2 };
        let r = relative_l2(&recon, &known, &region).unwrap();
        assert!((r.er - 0.125).abs() < 1e-15);
    }

    #[test]
    fn zero_reference() {
        let known = field(vec![0.5, 0.5, 0.5, 0.0, 0.0, 0.0], 3);
        let recon = field(vec![0.5, 0.5, 0.5, 0.1, 0.0, 0.0], 3);
        let err = relative_l2(&recon, &known, &Region::full(known.grid())).unwrap_err();
        assert_eq!(err.class(), "DegenerateError");
    }

    #[test]
    fn restricted_region_is_recomputed() {
        let known = field(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6], 3);
        let recon = field(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.3], 3);
        let full = relative_l2(&recon, &known, &Region::full(known.grid())).unwrap();
        let part = Region { k0: 1, k1: 1, j0: 0, j1: 2 };
        let r = relative_l2(&recon, &known, &part).unwrap();
        assert!(full.er > 0.0);
        assert_eq!(r.er, 0.0);
    }

    proptest! {
        #[test]
        fn scale_property(c in 0.0f64..1.0, vals in proptest::collection::vec(0.05f64..1.0, 12)) {
            let known = field(vals.clone(), 4);
            let recon = field(vals.iter().map(|v| c * v).collect(), 4);
            let r = relative_l2(&recon, &known, &Region::full(known.grid())).unwrap();
            prop_assert!(r.er >= 0.0);
            prop_assert!((r.er - (c - 1.0).powi(2)).abs() < 1e-12);
        }
    }
}
