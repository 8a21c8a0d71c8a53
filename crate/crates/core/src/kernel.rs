//! Look-ahead kernel families on a finite support `[0, d)`.
//!
//! | family      | `eta(s)` on `[0, d)`                                  |
//! |-------------|--------------------------------------------------------|
//! | constant    | `1 / d`                                                |
//! | linear      | `(2 / d) (1 - s / d)`                                  |
//! | exponential | `exp(-s / d) / (d (1 - e^-1))`                         |
//! | shifted     | `(exp(-s / d) - e^-1) / (d (1 - 2 e^-1))`              |
//! | smooth      | `K exp(-1 / (s - d)^2)`, `K` found by quadrature       |
//!
//! All families vanish for `s >= d`. Every family except `constant` satisfies
//! `eta'(s) <= -beta eta(s)` on `(0, d)` for the `beta` reported by
//! [`Kernel::beta_bound`].

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

const E_INV: f64 = 0.367_879_441_171_442_33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Constant,
    Linear,
    Exponential,
    #[serde(rename = "shifted")]
    ShiftedExponential,
    #[serde(rename = "smooth")]
    SmoothExponential,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 5] = [
        KernelFamily::Constant,
        KernelFamily::Linear,
        KernelFamily::Exponential,
        KernelFamily::ShiftedExponential,
        KernelFamily::SmoothExponential,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Constant => "constant",
            KernelFamily::Linear => "linear",
            KernelFamily::Exponential => "exponential",
            KernelFamily::ShiftedExponential => "shifted",
            KernelFamily::SmoothExponential => "smooth",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "constant" => Ok(KernelFamily::Constant),
            "linear" => Ok(KernelFamily::Linear),
            "exponential" | "exp" => Ok(KernelFamily::Exponential),
            "shifted" | "shifted_exponential" => Ok(KernelFamily::ShiftedExponential),
            "smooth" | "smooth_exponential" => Ok(KernelFamily::SmoothExponential),
            other => Err(Error::Config(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// A normalized kernel of one family and support length `d` (ft).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    d: f64,
    k: f64,
}

fn smooth_cache() -> &'static Mutex<HashMap<u64, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Normalization constant `K` such that the family integrates to one on `[0, d]`.
pub fn normalization_constant(family: KernelFamily, d: f64) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Domain(format!("kernel length d = {d} must be positive")));
    }
    Ok(match family {
        KernelFamily::Constant => 1.0 / d,
        KernelFamily::Linear => 2.0 / d,
        KernelFamily::Exponential => 1.0 / (d * (1.0 - E_INV)),
        KernelFamily::ShiftedExponential => 1.0 / (d * (1.0 - 2.0 * E_INV)),
        KernelFamily::SmoothExponential => {
            if let Some(&k) = smooth_cache().lock().unwrap().get(&d.to_bits()) {
                return Ok(k);
            }
            // The integrand is flat near s = d; substitute u = d - s.
            let mass = quadrature::integrate(|u: f64| (-1.0 / (u * u)).exp(), 0.0, d, 0.0, 1e-12, 2000)?;
            let k = 1.0 / mass.value;
            smooth_cache().lock().unwrap().insert(d.to_bits(), k);
            k
        }
    })
}

impl Kernel {
    pub fn new(family: KernelFamily, d: f64) -> Result<Self> {
        let k = normalization_constant(family, d)?;
        Ok(Kernel { family, d, k })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// Normalization constant `K` (1/ft). For `linear` this is the peak `2 / d`.
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!("kernel offset {s} must be non-negative")));
        }
        Ok(self.eval_unchecked(s))
    }

    pub(crate) fn eval_unchecked(&self, s: f64) -> f64 {
        if s >= self.d {
            return 0.0;
        }
        let d = self.d;
        match self.family {
            KernelFamily::Constant => self.k,
            KernelFamily::Linear => self.k * (1.0 - s / d),
            KernelFamily::Exponential => self.k * (-s / d).exp(),
            KernelFamily::ShiftedExponential => self.k * ((-s / d).exp() - E_INV),
            KernelFamily::SmoothExponential => {
                let u = s - d;
                self.k * (-1.0 / (u * u)).exp()
            }
        }
    }

    /// `eta(0)`.
    pub fn eta0(&self) -> f64 {
        self.eval_unchecked(0.0)
    }

    /// Closed-form `eta'(s)` on `[0, d)`.
    pub fn derivative(&self, s: f64) -> f64 {
        if s >= self.d || s < 0.0 {
            return 0.0;
        }
        let d = self.d;
        match self.family {
            KernelFamily::Constant => 0.0,
            KernelFamily::Linear => -self.k / d,
            KernelFamily::Exponential | KernelFamily::ShiftedExponential => {
                -self.k * (-s / d).exp() / d
            }
            KernelFamily::SmoothExponential => {
                let u = s - d;
                2.0 * self.eval_unchecked(s) / (u * u * u)
            }
        }
    }

    /// Closed-form logarithmic decay rate `-eta'(s) / eta(s)` on `(0, d)`.
    ///
    /// Written without dividing kernel values, so it stays finite where
    /// `eta` underflows near `d`.
    pub fn decay_rate(&self, s: f64) -> f64 {
        let d = self.d;
        match self.family {
            KernelFamily::Constant => 0.0,
            KernelFamily::Linear => 1.0 / (d - s),
            KernelFamily::Exponential => 1.0 / d,
            KernelFamily::ShiftedExponential => 1.0 / (d * (1.0 - (s / d - 1.0).exp())),
            KernelFamily::SmoothExponential => 2.0 / (d - s).powi(3),
        }
    }

    /// Largest `beta` with `eta' <= -beta eta` on `(0, d)`: the infimum of
    /// [`Kernel::decay_rate`], attained as `s -> 0+` for every family.
    pub fn beta_bound(&self) -> Result<f64> {
        let d = self.d;
        match self.family {
            KernelFamily::Constant => Err(Error::Unsupported(
                "the constant kernel has eta' = 0 and admits no positive decay bound".into(),
            )),
            KernelFamily::Linear | KernelFamily::Exponential => Ok(1.0 / d),
            KernelFamily::ShiftedExponential => Ok(1.0 / (d * (1.0 - E_INV))),
            KernelFamily::SmoothExponential => Ok(2.0 / (d * d * d)),
        }
    }

    /// Left-endpoint samples at spacing `dx`, renormalized to unit discrete mass.
    pub fn sample(&self, dx: f64) -> Result<DiscreteKernel> {
        sample(self, dx)
    }
}

/// Admissible propagation delay
/// `min{ 1 / (3 (v_f + |v'|)), beta / (eta(0) |v'|) }`. All inputs must be positive.
pub fn gamma_max(v_f: f64, vprime_sup: f64, beta: f64, eta0: f64) -> f64 {
    let speed_term = 1.0 / (3.0 * (v_f + vprime_sup));
    let decay_term = beta / (eta0 * vprime_sup);
    speed_term.min(decay_term)
}

/// Kernel weights on a uniform mesh.
///
/// `mass[i] = eta[i] dx` sums to one; convolution sums use the masses so that a
/// single-sample kernel has mass exactly `1.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    weights: Vec<f64>,
    mass: Vec<f64>,
    dx: f64,
}

impl DiscreteKernel {
    /// Builds a kernel from raw non-negative samples, rescaling by one scalar.
    pub fn from_samples(raw: &[f64], dx: f64) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Domain("a discrete kernel needs at least one sample".into()));
        }
        if !(dx > 0.0) {
            return Err(Error::Domain(format!("sample spacing dx = {dx} must be positive")));
        }
        if raw.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Domain("kernel samples must be finite and non-negative".into()));
        }
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Domain("kernel samples have zero mass".into()));
        }
        let mass: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let weights = mass.iter().map(|m| m / dx).collect();
        Ok(DiscreteKernel { weights, mass, dx })
    }

    /// The one-cell kernel; convolving with it returns the local density.
    pub fn local(dx: f64) -> Self {
        DiscreteKernel {
            weights: vec![1.0 / dx],
            mass: vec![1.0],
            dx,
        }
    }

    pub fn n_d(&self) -> usize {
        self.mass.len()
    }

    /// `eta[i]` (1/ft).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `eta[i] dx`, summing to one.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }
}

pub fn sample(kernel: &Kernel, dx: f64) -> Result<DiscreteKernel> {
    if !(dx > 0.0) {
        return Err(Error::Domain(format!("sample spacing dx = {dx} must be positive")));
    }
    if dx > kernel.d {
        return Err(Error::Domain(format!(
            "sample spacing dx = {dx} exceeds kernel length d = {}",
            kernel.d
        )));
    }
    let n_d = (kernel.d / dx).round().max(1.0) as usize;
    let raw: Vec<f64> = (0..n_d)
        .map(|i| kernel.eval_unchecked(i as f64 * dx))
        .collect();
    DiscreteKernel::from_samples(&raw, dx)
}
