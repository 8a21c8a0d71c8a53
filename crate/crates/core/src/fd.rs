//! Speed-density and flux-density laws.
//!
//! Densities are normalized by the jam density, so Greenshields reads
//! `v(rho) = v_f (1 - rho)` and Underwood `v(rho) = v_f exp(-rho / rho_c)`.
//! Underwood has no finite jam density: the normalized domain is still capped
//! at 1 and `flux(1) = v_f exp(-1 / rho_c) > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FundamentalDiagram {
    Greenshields { v_f: f64 },
    Underwood { v_f: f64, rho_c: f64 },
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::Domain(format!("density {rho} outside [0, 1]")))
    }
}

impl FundamentalDiagram {
    pub fn greenshields(v_f: f64) -> Result<Self> {
        if !(v_f > 0.0 && v_f.is_finite()) {
            return Err(Error::Domain(format!("v_f = {v_f} must be positive")));
        }
        Ok(FundamentalDiagram::Greenshields { v_f })
    }

    pub fn underwood(v_f: f64, rho_c: f64) -> Result<Self> {
        if !(v_f > 0.0 && v_f.is_finite()) {
            return Err(Error::Domain(format!("v_f = {v_f} must be positive")));
        }
        if !(rho_c > 0.0 && rho_c <= 1.0) {
            return Err(Error::Domain(format!("rho_c = {rho_c} must lie in (0, 1]")));
        }
        Ok(FundamentalDiagram::Underwood { v_f, rho_c })
    }

    pub fn name(&self) -> &'static str {
        match self {
            FundamentalDiagram::Greenshields { .. } => "greenshields",
            FundamentalDiagram::Underwood { .. } => "underwood",
        }
    }

    pub fn v_f(&self) -> f64 {
        match *self {
            FundamentalDiagram::Greenshields { v_f } | FundamentalDiagram::Underwood { v_f, .. } => v_f,
        }
    }

    pub fn velocity(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(self.velocity_unchecked(rho))
    }

    pub fn flux(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(self.flux_unchecked(rho))
    }

    /// `f'(rho)`, the characteristic speed of the local law.
    pub fn char_speed(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(self.char_speed_unchecked(rho))
    }

    /// `sup |v'|` over `[0, 1]`.
    pub fn vprime_sup(&self) -> f64 {
        match *self {
            FundamentalDiagram::Greenshields { v_f } => v_f,
            FundamentalDiagram::Underwood { v_f, rho_c } => v_f / rho_c,
        }
    }

    /// `sup |f'|` over `[0, 1]`, used for the CFL number.
    pub fn max_wave_speed(&self) -> f64 {
        match *self {
            FundamentalDiagram::Greenshields { v_f } => v_f,
            FundamentalDiagram::Underwood { rho_c, .. } => {
                // f' is extremal at the endpoints or at its minimum rho = 2 rho_c.
                let mut sup = self.char_speed_unchecked(0.0).abs();
                sup = sup.max(self.char_speed_unchecked(1.0).abs());
                if 2.0 * rho_c <= 1.0 {
                    sup = sup.max(self.char_speed_unchecked(2.0 * rho_c).abs());
                }
                sup
            }
        }
    }

    #[inline]
    pub(crate) fn velocity_unchecked(&self, rho: f64) -> f64 {
        match *self {
            FundamentalDiagram::Greenshields { v_f } => v_f * (1.0 - rho),
            FundamentalDiagram::Underwood { v_f, rho_c } => v_f * (-rho / rho_c).exp(),
        }
    }

    /// Flux is always evaluated as `rho * v(rho)` so that a nonlocal flux with
    /// `rho_d = rho` reproduces it bit for bit.
    #[inline]
    pub(crate) fn flux_unchecked(&self, rho: f64) -> f64 {
        rho * self.velocity_unchecked(rho)
    }

    #[inline]
    pub(crate) fn char_speed_unchecked(&self, rho: f64) -> f64 {
        match *self {
            FundamentalDiagram::Greenshields { v_f } => v_f * (1.0 - 2.0 * rho),
            FundamentalDiagram::Underwood { v_f, rho_c } => {
                v_f * (-rho / rho_c).exp() * (1.0 - rho / rho_c)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gs() -> FundamentalDiagram {
        FundamentalDiagram::greenshields(60.0).unwrap()
    }

    fn uw() -> FundamentalDiagram {
        FundamentalDiagram::underwood(60.0, 0.5).unwrap()
    }

    #[test]
    fn velocity_values() {
        assert_eq!(gs().velocity(0.0).unwrap(), 60.0);
        assert_eq!(gs().velocity(1.0).unwrap(), 0.0);
        assert!((uw().velocity(0.5).unwrap() - 22.072_766_470_286_54).abs() < 1e-9);
        assert!(gs().velocity(1.01).is_err());
        assert!(uw().velocity(-0.1).is_err());
    }

    #[test]
    fn flux_values() {
        assert_eq!(gs().flux(0.5).unwrap(), 15.0);
        assert_eq!(gs().flux(0.0).unwrap(), 0.0);
        assert_eq!(uw().flux(0.0).unwrap(), 0.0);
        assert!((uw().flux(1.0).unwrap() - 60.0 * (-2.0f64).exp()).abs() < 1e-12);
        assert!((uw().flux(1.0).unwrap() - 8.120).abs() < 1e-3);
        assert_eq!(gs().flux(1.0).unwrap(), 0.0);
    }

    #[test]
    fn char_speed_values() {
        assert_eq!(gs().char_speed(0.5).unwrap(), 0.0);
        assert_eq!(gs().char_speed(0.0).unwrap(), 60.0);
        assert_eq!(uw().char_speed(0.5).unwrap(), 0.0);
    }

    #[test]
    fn vprime_sup_values() {
        assert_eq!(gs().vprime_sup(), 60.0);
        assert_eq!(uw().vprime_sup(), 120.0);
        assert_eq!(FundamentalDiagram::greenshields(1.0).unwrap().vprime_sup(), 1.0);
    }

    #[test]
    fn invalid_parameters() {
        assert!(FundamentalDiagram::greenshields(0.0).is_err());
        assert!(FundamentalDiagram::underwood(60.0, 0.0).is_err());
        assert!(FundamentalDiagram::underwood(60.0, 1.5).is_err());
    }

    #[test]
    fn wave_speed_bounded_by_v_f() {
        for fd in [gs(), uw(), FundamentalDiagram::underwood(30.0, 0.9).unwrap()] {
            assert_eq!(fd.max_wave_speed(), fd.v_f());
            for i in 0..=1000 {
                let rho = i as f64 / 1000.0;
                assert!(fd.char_speed(rho).unwrap().abs() <= fd.v_f() + 1e-12);
            }
        }
    }

    #[test]
    fn velocity_strictly_decreasing() {
        for fd in [gs(), uw()] {
            let v: Vec<f64> = (0..1000)
                .map(|i| fd.velocity(i as f64 / 1000.0).unwrap())
                .collect();
            assert!(v.windows(2).all(|w| w[0] > w[1]));
            assert!(v.iter().all(|&s| (0.0..=fd.v_f()).contains(&s)));
        }
    }

    #[test]
    fn char_speed_matches_flux_difference() {
        let h = 1e-6;
        for fd in [gs(), uw()] {
            for i in 0..1000 {
                let rho = h + (1.0 - 2.0 * h) * i as f64 / 999.0;
                let fdiff = (fd.flux(rho + h).unwrap() - fd.flux(rho - h).unwrap()) / (2.0 * h);
                let exact = fd.char_speed(rho).unwrap();
                assert!((fdiff - exact).abs() <= 1e-6 * fd.v_f(), "{rho}: {fdiff} vs {exact}");
            }
        }
    }
}
