//! Green's function of the two-layer medium with a flat interface x₂ = 0
//! (wavenumber κ₁ above, κ₂ below), and the fields of dipole sources.
//!
//! With β_j(ξ) = √(κ_j² − ξ²) (Im β_j ≥ 0) and d = x₁ − y₁, the scattered
//! part of the monopole field is
//!
//! ```text
//! x₂, y₂ > 0:  (i/4π) ∫ (β₁ − β₂)/(β₁(β₁ + β₂)) e^{iβ₁(x₂ + y₂)} e^{iξd} dξ
//! x₂ < 0 < y₂: (i/2π) ∫ 1/(β₁ + β₂) e^{i(β₁y₂ − β₂x₂)} e^{iξd} dξ
//! y₂ < 0 < x₂: (i/2π) ∫ 1/(β₁ + β₂) e^{i(β₁x₂ − β₂y₂)} e^{iξd} dξ
//! x₂, y₂ < 0:  (i/4π) ∫ (β₂ − β₁)/(β₂(β₁ + β₂)) e^{−iβ₂(x₂ + y₂)} e^{iξd} dξ
//! ```
//!
//! and the total field adds Φ_κ(x, y) of the source side when both points lie
//! on the same side. The dipole fields 𝕌^s(x, y; ℓ) are −∂/∂y_ℓ of these.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::quad::{fold_even_odd, integrate_halfline, DecayClass, Parity, TwoSidedIntegrand};
use crate::specfun;

/// Minimum distance of evaluation points from x₂ = 0.
pub const H_MIN: f64 = 1e-6;
/// Default absolute quadrature tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumParams {
    pub kappa1: f64,
    pub kappa2: f64,
}

impl MediumParams {
    pub fn new(kappa1: f64, kappa2: f64) -> Result<Self> {
        let m = MediumParams { kappa1, kappa2 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa1 > 0.0 && self.kappa2 > 0.0 && self.kappa1.is_finite() && self.kappa2.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("wavenumbers must be positive, got {} and {}", self.kappa1, self.kappa2)))
        }
    }

    /// η = κ₂² − κ₁².
    pub fn eta(&self) -> f64 {
        self.kappa2 * self.kappa2 - self.kappa1 * self.kappa1
    }

    /// κ₀(x): κ₁ above the flat line, κ₂ below.
    pub fn kappa_at(&self, x2: f64) -> f64 {
        if x2 > 0.0 {
            self.kappa1
        } else {
            self.kappa2
        }
    }
}

/// β(ξ) = √(κ² − ξ²) for |ξ| < κ, i√(ξ² − κ²) otherwise.
#[inline]
pub fn beta(xi: f64, kappa: f64) -> Complex64 {
    let a = xi.abs();
    let d = (kappa - a) * (kappa + a);
    if d >= 0.0 {
        Complex64::new(d.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-d).sqrt())
    }
}

/// Field kind: monopole Φ(·, y) or dipole ∂_{x_ℓ}Φ(·, y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    Monopole,
    #[serde(rename = "dipole-1")]
    Dipole1,
    #[serde(rename = "dipole-2")]
    Dipole2,
}

impl SourceKind {
    pub fn dipole(l: usize) -> Result<Self> {
        match l {
            1 => Ok(SourceKind::Dipole1),
            2 => Ok(SourceKind::Dipole2),
            _ => Err(Error::Domain(format!("dipole direction must be 1 or 2, got {l}"))),
        }
    }

    fn code(self) -> u8 {
        match self {
            SourceKind::Monopole => 0,
            SourceKind::Dipole1 => 1,
            SourceKind::Dipole2 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub position: Point,
}

impl SourceSpec {
    pub fn monopole(position: Point) -> Self {
        SourceSpec { kind: SourceKind::Monopole, position }
    }

    pub fn dipole(position: Point, l: usize) -> Result<Self> {
        Ok(SourceSpec { kind: SourceKind::dipole(l)?, position })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// x₂ > 0, y₂ > 0
    UpperUpper,
    /// x₂ < 0 < y₂
    LowerUpper,
    /// y₂ < 0 < x₂
    UpperLower,
    /// x₂ < 0, y₂ < 0
    LowerLower,
}

impl Case {
    pub fn of(x2: f64, y2: f64) -> Case {
        match (x2 > 0.0, y2 > 0.0) {
            (true, true) => Case::UpperUpper,
            (false, true) => Case::LowerUpper,
            (true, false) => Case::UpperLower,
            (false, false) => Case::LowerLower,
        }
    }

    pub fn same_side(self) -> bool {
        matches!(self, Case::UpperUpper | Case::LowerLower)
    }
}

type CacheKey = (u64, u64, u64, u8);

/// Memo of Fourier integrals keyed by the exact bits of their inputs.
#[derive(Debug, Default)]
pub struct GreenCache {
    map: Mutex<HashMap<CacheKey, Complex64>>,
}

impl GreenCache {
    pub fn len(&self) -> usize {
        self.map.lock().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Evaluator of the flat-interface Green's function and dipole fields.
#[derive(Debug, Clone)]
pub struct PlanarGreen {
    pub medium: MediumParams,
    pub tol: f64,
    cache: Option<Arc<GreenCache>>,
    /// Test hook: evaluate β on the wrong sheet (negative control only).
    flip_branch: bool,
}

impl PlanarGreen {
    pub fn new(medium: MediumParams, tol: f64) -> Self {
        PlanarGreen { medium, tol, cache: None, flip_branch: false }
    }

    pub fn with_cache(medium: MediumParams, tol: f64) -> Self {
        PlanarGreen { medium, tol, cache: Some(Arc::new(GreenCache::default())), flip_branch: false }
    }

    /// A copy whose square roots take the decaying branch's negative; used to
    /// demonstrate that the branch checks detect a sign error.
    pub fn with_flipped_branch(mut self) -> Self {
        self.flip_branch = true;
        self.cache = None;
        self
    }

    pub fn cache(&self) -> Option<&GreenCache> {
        self.cache.as_deref()
    }

    pub fn beta(&self, xi: f64, kappa: f64) -> Complex64 {
        let b = beta(xi, kappa);
        if self.flip_branch {
            -b
        } else {
            b
        }
    }

    fn check_heights(x2: f64, y2: f64) -> Result<()> {
        if x2.abs() < H_MIN || y2.abs() < H_MIN || !x2.is_finite() || !y2.is_finite() {
            return Err(Error::Domain(format!(
                "evaluation heights {x2}, {y2} must be at least {H_MIN:e} away from the flat interface"
            )));
        }
        Ok(())
    }

    /// Scattered part for horizontal offset `d = x₁ − y₁` and heights.
    pub fn scattered_offset(&self, d: f64, x2: f64, y2: f64, kind: SourceKind) -> Result<Complex64> {
        self.scattered_impl(d, x2, y2, None, kind, false)
    }

    /// As [`PlanarGreen::scattered_offset`] for lattice cell pairs: `sum` is
    /// the exact x₂ + y₂ and results are memoized when a cache is attached.
    pub fn scattered_cells(&self, d: f64, x2: f64, y2: f64, sum: f64, kind: SourceKind) -> Result<Complex64> {
        self.scattered_impl(d, x2, y2, Some(sum), kind, true)
    }

    fn scattered_impl(&self, d: f64, x2: f64, y2: f64, sum: Option<f64>, kind: SourceKind, use_cache: bool) -> Result<Complex64> {
        Self::check_heights(x2, y2)?;
        let case = Case::of(x2, y2);
        let (k1, k2) = (self.medium.kappa1, self.medium.kappa2);
        if case.same_side() && k1 == k2 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        // ℓ = 1 kernels are odd in ξ: the value is odd in d
        let sign = if kind == SourceKind::Dipole1 && d < 0.0 { -1.0 } else { 1.0 };
        let ad = d.abs();
        let (a, b) = match case {
            Case::UpperUpper | Case::LowerLower => (sum.unwrap_or(x2 + y2), 0.0),
            Case::LowerUpper => (y2, x2),
            Case::UpperLower => (x2, y2),
        };
        let cache = if use_cache { self.cache.as_deref() } else { None };
        let key = (ad.to_bits(), a.to_bits(), b.to_bits(), kind.code() | (case_code(case) << 4));
        if let Some(c) = cache {
            if let Some(v) = c.map.lock().ok().and_then(|m| m.get(&key).copied()) {
                return Ok(v * sign);
            }
        }
        let v = self.integral(ad, case, a, b, kind)?;
        if let Some(c) = cache {
            if let Ok(mut m) = c.map.lock() {
                m.insert(key, v);
            }
        }
        Ok(v * sign)
    }

    /// The folded Fourier integral at offset `d ≥ 0`. For same-side cases `a`
    /// is x₂ + y₂; for cross-side cases `a` is the upper and `b` the lower height.
    fn integral(&self, d: f64, case: Case, a: f64, b: f64, kind: SourceKind) -> Result<Complex64> {
        let (k1, k2) = (self.medium.kappa1, self.medium.kappa2);
        let dk = (k1 - k2) * (k1 + k2); // β₁² − β₂²
        let flip = self.flip_branch;
        let br = move |xi: f64, k: f64| {
            let v = beta(xi, k);
            if flip {
                -v
            } else {
                v
            }
        };
        let parity = if kind == SourceKind::Dipole1 { Parity::Odd } else { Parity::Even };
        let i = Complex64::new(0.0, 1.0);
        let c4 = 1.0 / (4.0 * PI);
        let c2 = 1.0 / (2.0 * PI);
        let (rate, power_mono) = match case {
            Case::UpperUpper => (a, -3.0),
            Case::LowerLower => (-a, -3.0),
            _ => (a - b, -1.0),
        };
        let power = match kind {
            SourceKind::Monopole => power_mono,
            _ => power_mono + 1.0,
        };
        let decay = DecayClass::Exponential { rate, power };
        let bps = vec![k1, k2];
        let value = match case {
            Case::UpperUpper => {
                let s = a;
                let kernel = move |xi: f64| {
                    let (b1, b2) = (br(xi, k1), br(xi, k2));
                    let sum = b1 + b2;
                    let refl = dk / (sum * sum); // (β₁ − β₂)/(β₁ + β₂)
                    let ph = (i * b1 * s).exp();
                    match kind {
                        SourceKind::Monopole => i * c4 * refl / b1 * ph,
                        SourceKind::Dipole1 => -c4 * xi * refl / b1 * ph,
                        SourceKind::Dipole2 => c4 * refl * ph,
                    }
                };
                self.run(kernel, parity, d, bps, decay, s)?
            }
            Case::LowerLower => {
                let s = a;
                let kernel = move |xi: f64| {
                    let (b1, b2) = (br(xi, k1), br(xi, k2));
                    let sum = b1 + b2;
                    let refl = -dk / (sum * sum); // (β₂ − β₁)/(β₁ + β₂)
                    let ph = (-i * b2 * s).exp();
                    match kind {
                        SourceKind::Monopole => i * c4 * refl / b2 * ph,
                        SourceKind::Dipole1 => -c4 * xi * refl / b2 * ph,
                        SourceKind::Dipole2 => -c4 * refl * ph,
                    }
                };
                self.run(kernel, parity, d, bps, decay, -s)?
            }
            Case::LowerUpper => {
                // x below (height b < 0), source above (height a > 0)
                let (ya, xb) = (a, b);
                let kernel = move |xi: f64| {
                    let (b1, b2) = (br(xi, k1), br(xi, k2));
                    let sum = b1 + b2;
                    let ph = (i * (b1 * ya - b2 * xb)).exp();
                    match kind {
                        SourceKind::Monopole => i * c2 / sum * ph,
                        SourceKind::Dipole1 => -c2 * xi / sum * ph,
                        SourceKind::Dipole2 => c2 * b1 / sum * ph,
                    }
                };
                self.run(kernel, parity, d, bps, decay, a - b)?
            }
            Case::UpperLower => {
                // x above (height a > 0), source below (height b < 0)
                let (xa, yb) = (a, b);
                let kernel = move |xi: f64| {
                    let (b1, b2) = (br(xi, k1), br(xi, k2));
                    let sum = b1 + b2;
                    let ph = (i * (b1 * xa - b2 * yb)).exp();
                    match kind {
                        SourceKind::Monopole => i * c2 / sum * ph,
                        SourceKind::Dipole1 => -c2 * xi / sum * ph,
                        SourceKind::Dipole2 => -c2 * b2 / sum * ph,
                    }
                };
                self.run(kernel, parity, d, bps, decay, a - b)?
            }
        };
        Ok(value)
    }

    fn run<K: Fn(f64) -> Complex64>(
        &self,
        kernel: K,
        parity: Parity,
        d: f64,
        bps: Vec<f64>,
        decay: DecayClass,
        vertical: f64,
    ) -> Result<Complex64> {
        if parity == Parity::Odd && d == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let spec = fold_even_odd(TwoSidedIntegrand { kernel, parity, offset: d, breakpoints: bps, decay, oscillation: vertical });
        Ok(integrate_halfline(&spec, self.tol)?.value)
    }

    /// 𝔾^s(x, y; Γ₀).
    pub fn green_planar_scattered(&self, x: Point, y: Point) -> Result<Complex64> {
        if x == y {
            return Err(Error::Singularity("scattered Green's function requested at coincident points".into()));
        }
        self.scattered_offset(x.x1 - y.x1, x.x2, y.x2, SourceKind::Monopole)
    }

    /// 𝔾(x, y; Γ₀).
    pub fn green_planar_total(&self, x: Point, y: Point) -> Result<Complex64> {
        self.total(x, &SourceSpec::monopole(y))
    }

    /// 𝕌^s(x, y; ℓ, Γ₀).
    pub fn dipole_planar_scattered(&self, x: Point, y: Point, l: usize) -> Result<Complex64> {
        if x == y {
            return Err(Error::Singularity("dipole field requested at its source".into()));
        }
        self.scattered_offset(x.x1 - y.x1, x.x2, y.x2, SourceKind::dipole(l)?)
    }

    /// 𝕌(x, y; ℓ, Γ₀).
    pub fn dipole_planar_total(&self, x: Point, y: Point, l: usize) -> Result<Complex64> {
        self.total(x, &SourceSpec::dipole(y, l)?)
    }

    /// Scattered part for any source kind.
    pub fn scattered(&self, x: Point, src: &SourceSpec) -> Result<Complex64> {
        if x == src.position {
            return Err(Error::Singularity("field requested at its source".into()));
        }
        self.scattered_offset(x.x1 - src.position.x1, x.x2, src.position.x2, src.kind)
    }

    /// Free-space part: Φ or ∂_{x_ℓ}Φ of the source side when on the same side, else 0.
    pub fn incident(&self, x: Point, src: &SourceSpec) -> Result<Complex64> {
        let y = src.position;
        if (x.x2 > 0.0) != (y.x2 > 0.0) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        free_field(self.medium.kappa_at(y.x2), x, src)
    }

    /// Total field of the source at x.
    pub fn total(&self, x: Point, src: &SourceSpec) -> Result<Complex64> {
        let s = self.scattered(x, src)?;
        Ok(s + self.incident(x, src)?)
    }
}

fn case_code(c: Case) -> u8 {
    match c {
        Case::UpperUpper => 0,
        Case::LowerUpper => 1,
        Case::UpperLower => 2,
        Case::LowerLower => 3,
    }
}

/// Φ_κ(x, y) or ∂_{x_ℓ}Φ_κ(x, y) for the source kind.
pub fn free_field(kappa: f64, x: Point, src: &SourceSpec) -> Result<Complex64> {
    match src.kind {
        SourceKind::Monopole => specfun::fundamental_solution(kappa, x, src.position),
        SourceKind::Dipole1 => specfun::fundamental_solution_grad(kappa, x, src.position, 1),
        SourceKind::Dipole2 => specfun::fundamental_solution_grad(kappa, x, src.position, 2),
    }
}
