//! Bessel functions of orders 0 and 1 for positive real arguments, Hankel
//! functions of the first kind, and the two-dimensional Helmholtz fundamental
//! solution
//!
//! ```text
//! Φ_κ(x, y) = (i/4) H₀⁽¹⁾(κ|x − y|)
//! ```
//!
//! Arguments up to 12 use the ascending series (with the logarithmic terms of
//! Y₀, Y₁); larger arguments use the Hankel asymptotic amplitude/phase
//! expansions, truncated at their smallest term.

use num_complex::Complex64;
use std::f64::consts::{FRAC_2_PI, FRAC_PI_4, PI};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Switch point between the ascending series and the asymptotic expansion.
pub const SERIES_SWITCH: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselSet {
    pub j0: f64,
    pub j1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl BesselSet {
    pub fn h0(&self) -> Complex64 {
        Complex64::new(self.j0, self.y0)
    }

    pub fn h1(&self) -> Complex64 {
        Complex64::new(self.j1, self.y1)
    }
}

/// J₀, J₁, Y₀, Y₁ at `x > 0`.
pub fn bessel_j0j1_y0y1(x: f64) -> Result<BesselSet> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Bessel argument must be positive and finite, got {x}")));
    }
    Ok(if x <= SERIES_SWITCH { ascending(x) } else { asymptotic(x) })
}

fn ascending(x: f64) -> BesselSet {
    let q = 0.25 * x * x;
    // term_k = (-q)^k / (k!)^2 for J0 and (-q)^k / (k!(k+1)!) for J1
    let mut t0 = 1.0;
    let mut t1 = 1.0;
    let mut j0 = 1.0;
    let mut j1s = 1.0;
    let mut h = 0.0; // H_k
    let mut y0s = 0.0;
    let mut y1s = 1.0; // k = 0 term: (H_0 + H_1) = 1
    let mut k = 0usize;
    loop {
        k += 1;
        let kf = k as f64;
        t0 *= -q / (kf * kf);
        t1 *= -q / (kf * (kf + 1.0));
        h += 1.0 / kf;
        j0 += t0;
        j1s += t1;
        y0s -= h * t0;
        y1s += (2.0 * h + 1.0 / (kf + 1.0)) * t1;
        if t0.abs() < 1e-18 && t1.abs() * (2.0 * h + 1.0) < 1e-18 || k > 200 {
            break;
        }
    }
    let j1 = 0.5 * x * j1s;
    let lg = (0.5 * x).ln() + EULER_GAMMA;
    let y0 = FRAC_2_PI * (lg * j0 + y0s);
    // Y1 = -2/(πx) + (2/π) ln(x/2) J1 - (x/2π) Σ (-q)^k (H_k + H_{k+1} - 2γ) / (k!(k+1)!)
    // The -2γ part combines with ln(x/2) into lg; y1s carries H_k + H_{k+1}.
    let y1 = -FRAC_2_PI / x + FRAC_2_PI * lg * j1 - 0.5 * x / PI * y1s;
    BesselSet { j0, j1, y0, y1 }
}

/// Hankel amplitude sums P(ν, x) and Q(ν, x), stopped at the smallest term.
fn hankel_pq(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..80 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        a *= (mu - odd * odd) / (kf * 8.0 * x);
        if a.abs() >= last || a.abs() < 1e-18 {
            if a.abs() < last {
                add_term(&mut p, &mut q, k, a);
            }
            break;
        }
        last = a.abs();
        add_term(&mut p, &mut q, k, a);
    }
    (p, q)
}

fn add_term(p: &mut f64, q: &mut f64, k: usize, a: f64) {
    // a_k alternates into P (even k) and Q (odd k) with sign (-1)^{⌊k/2⌋}
    let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
    if k % 2 == 0 {
        *p += sign * a;
    } else {
        *q += sign * a;
    }
}

fn asymptotic(x: f64) -> BesselSet {
    let amp = (FRAC_2_PI / x).sqrt();
    let (s, c) = (x - FRAC_PI_4).sin_cos();
    // χ1 = χ0 − π/2: cos χ1 = sin χ0, sin χ1 = −cos χ0
    let (p0, q0) = hankel_pq(0.0, x);
    let (p1, q1) = hankel_pq(1.0, x);
    BesselSet {
        j0: amp * (p0 * c - q0 * s),
        y0: amp * (p0 * s + q0 * c),
        j1: amp * (p1 * s + q1 * c),
        y1: amp * (-p1 * c + q1 * s),
    }
}

pub fn hankel0(x: f64) -> Result<Complex64> {
    Ok(bessel_j0j1_y0y1(x)?.h0())
}

pub fn hankel1(x: f64) -> Result<Complex64> {
    Ok(bessel_j0j1_y0y1(x)?.h1())
}

/// Φ_κ(x, y) = (i/4) H₀⁽¹⁾(κ|x − y|).
pub fn fundamental_solution(kappa: f64, x: Point, y: Point) -> Result<Complex64> {
    let r = x.dist(y);
    if r == 0.0 {
        return Err(Error::Singularity("fundamental solution evaluated at its source".into()));
    }
    Ok(Complex64::new(0.0, 0.25) * hankel0(kappa * r)?)
}

/// Φ_κ as a function of the distance r > 0.
pub fn fundamental_solution_r(kappa: f64, r: f64) -> Result<Complex64> {
    if !(r > 0.0) {
        return Err(Error::Singularity("fundamental solution evaluated at its source".into()));
    }
    Ok(Complex64::new(0.0, 0.25) * hankel0(kappa * r)?)
}

/// ∂Φ_κ(x, y)/∂x_ℓ = −(iκ/4) H₁⁽¹⁾(κr)(x_ℓ − y_ℓ)/r, with ℓ ∈ {1, 2}.
pub fn fundamental_solution_grad(kappa: f64, x: Point, y: Point, l: usize) -> Result<Complex64> {
    let d = x - y;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::Singularity("fundamental solution gradient evaluated at its source".into()));
    }
    let comp = match l {
        1 => d.x1,
        2 => d.x2,
        _ => return Err(Error::Domain(format!("direction index must be 1 or 2, got {l}"))),
    };
    if comp == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(Complex64::new(0.0, -0.25 * kappa) * hankel1(kappa * r)? * (comp / r))
}

/// Φ_κ and both gradient components in one Bessel evaluation.
pub fn fundamental_solution_with_grad(kappa: f64, x: Point, y: Point) -> Result<(Complex64, [Complex64; 2])> {
    let d = x - y;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::Singularity("fundamental solution evaluated at its source".into()));
    }
    let b = bessel_j0j1_y0y1(kappa * r)?;
    let phi = Complex64::new(0.0, 0.25) * b.h0();
    let g = Complex64::new(0.0, -0.25 * kappa) * b.h1() / r;
    Ok((phi, [g * d.x1, g * d.x2]))
}

/// Regular part of Φ_κ at coincidence:
/// lim_{r→0} [Φ_κ(r) + (1/2π) ln r] = i/4 − (1/2π)(ln(κ/2) + γ).
pub fn fundamental_regular_part_at_zero(kappa: f64) -> Complex64 {
    Complex64::new(-((0.5 * kappa).ln() + EULER_GAMMA) / (2.0 * PI), 0.25)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn small_argument_limit() {
        let b = bessel_j0j1_y0y1(1e-8).unwrap();
        assert_relative_eq!(b.j0, 1.0, epsilon = 1e-15);
        assert_relative_eq!(b.j1, 0.5e-8, max_relative = 1e-12);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(bessel_j0j1_y0y1(0.0).is_err());
        assert!(bessel_j0j1_y0y1(-1.0).is_err());
        assert!(bessel_j0j1_y0y1(f64::NAN).is_err());
    }

    #[test]
    fn first_zero_of_j0() {
        let b = bessel_j0j1_y0y1(2.404825557695773).unwrap();
        assert!(b.j0.abs() < 1e-9);
    }

    #[test]
    fn wronskian() {
        for &x in &[0.5, 5.0, 50.0, 1e-6, 11.999, 12.001, 1e3] {
            let b = bessel_j0j1_y0y1(x).unwrap();
            let w = b.j1 * b.y0 - b.j0 * b.y1;
            let expect = 2.0 / (PI * x);
            assert!(((w - expect) / expect).abs() < 1e-9, "x={x}: {w} vs {expect}");
        }
    }

    #[test]
    fn continuity_at_switch() {
        let lo = ascending(SERIES_SWITCH);
        let hi = asymptotic(SERIES_SWITCH);
        for (a, b) in [(lo.j0, hi.j0), (lo.j1, hi.j1), (lo.y0, hi.y0), (lo.y1, hi.y1)] {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    // Values computed with mpmath at 30 digits.
    const REFERENCE: [(f64, [f64; 4]); 9] = [
        (1e-06, [0.99999999999975, 4.999999999999375e-07, -8.869031481659444, -636619.772372175]),
        (0.1, [0.99750156206604, 0.049937526036242, -1.5342386513503667, -6.4589510947020266]),
        (1.0, [0.7651976865579666, 0.4400505857449335, 0.08825696421567696, -0.7812128213002887]),
        (3.7, [-0.39923020337119114, 0.05383398774546179, 0.1060743153203541, 0.41667437268380747]),
        (8.5, [0.041939251842934504, 0.2731219636740537, 0.27020510536578746, -0.02616867939853747]),
        (11.9, [0.025049441699589645, -0.22898324966192404, -0.22983321394337505, -0.03471149833403061]),
        (12.5, [0.1468840547004211, -0.16548380461475973, -0.1712143068446693, -0.1538382565375012]),
        (25.0, [0.09626678327595811, -0.1253502495802899, -0.12724943226800614, -0.09882996478323741]),
        (731.5, [-0.008552733244403268, 0.02822790202246334, 0.028233741448310506, 0.008572033757910335]),
    ];

    #[test]
    fn reference_values() {
        for (x, r) in REFERENCE {
            let b = bessel_j0j1_y0y1(x).unwrap();
            let tol = 1e-10;
            for (got, want) in [b.j0, b.j1, b.y0, b.y1].into_iter().zip(r) {
                let scale = want.abs();
                assert!(((got - want) / scale).abs() < tol, "x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn phi_radial_and_symmetric() {
        let o = Point::new(0.0, 0.0);
        let a = fundamental_solution(1.3, o, Point::new(3.0, 4.0)).unwrap();
        let b = fundamental_solution(1.3, o, Point::new(5.0, 0.0)).unwrap();
        assert_eq!(a, b);
        let x = Point::new(0.2, -0.7);
        let y = Point::new(1.1, 0.4);
        assert_eq!(fundamental_solution(2.0, x, y).unwrap(), fundamental_solution(2.0, y, x).unwrap());
        assert!(fundamental_solution(2.0, x, x).is_err());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let k = 2.0;
        let y = Point::new(0.1, 0.2);
        let x = y + Point::new(0.6, 0.8);
        let h = 1e-5;
        for l in 1..=2 {
            let e = if l == 1 { Point::new(h, 0.0) } else { Point::new(0.0, h) };
            let fd = (fundamental_solution(k, x + e, y).unwrap() - fundamental_solution(k, x - e, y).unwrap()) / (2.0 * h);
            let g = fundamental_solution_grad(k, x, y, l).unwrap();
            assert!((fd - g).norm() < 1e-7);
            let gy = fundamental_solution_grad(k, y, x, l).unwrap();
            assert!((g + gy).norm() < 1e-15);
        }
        let perp = fundamental_solution_grad(k, Point::new(0.0, 1.0), Point::new(0.0, 0.0), 1).unwrap();
        assert_eq!(perp, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn gradient_small_r() {
        let k = 1.0;
        let r = 1e-4;
        let g = fundamental_solution_grad(k, Point::new(r, 0.0), Point::new(0.0, 0.0), 1).unwrap();
        let ratio = g.norm() / (1.0 / (2.0 * PI * r));
        assert!((ratio - 1.0).abs() < 0.01);
    }

    #[test]
    fn regular_part_limit() {
        let k = 1.7;
        let r = 1e-7;
        let phi = fundamental_solution(k, Point::new(r, 0.0), Point::new(0.0, 0.0)).unwrap();
        let reg = phi + r.ln() / (2.0 * PI);
        assert!((reg - fundamental_regular_part_at_zero(k)).norm() < 1e-10);
    }
}
