//! Obstacles embedded below the interface.
//!
//! Impenetrable obstacles use the combined double/single-layer ansatz
//!
//! ```text
//! w(x) = ∫_{∂D} (∂𝔾(x, y)/∂ν(y) − i𝔾(x, y)) ψ(y) ds(y),   (I + K − iS)ψ = −2𝕌
//! ```
//!
//! with S, K carrying the factor 2. Neumann and impedance obstacles use a
//! single layer w = ½Sψ, which gives ψ − K′ψ − iλSψ = 2(∂_ν𝕌 + iλ𝕌).
//! The kernel 𝔾(·, ·; Γ) is split into Φ_κ₂ (both points lie below the
//! interface), integrated with the logarithmic product rule on equispaced
//! nodes, plus a smooth remainder from the nested volume solver, integrated
//! with the trapezoid rule. Penetrable obstacles solve
//! u + κ₂²∫_D 𝔾 m u = 𝕌 with m = 1 − n by the same cell Nyström as the
//! volume stages.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_region_mesh, BoundaryNodes, ObstacleCurve, Point, RegionMesh, RegionTag, SceneGeometry};
use crate::layered_green::SourceSpec;
use crate::ls_volume::{DenseOperator, FieldPart, NestedGreen, PreparedSources, StageKind};
use crate::specfun::{bessel_j0j1_y0y1, fundamental_regular_part_at_zero, fundamental_solution_r, EULER_GAMMA};

type C64 = Complex64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Relative finite-difference step (times the obstacle diameter) for normal
/// derivatives with respect to the target point.
pub const FD_STEP: f64 = 1e-4;

/// Boundary condition on ∂D (or the medium inside D).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryCondition {
    SoundSoft,
    Neumann,
    /// ∂_ν u + iλu = 0 with constant λ ≥ 0.
    Impedance { lambda: f64 },
    /// Refractive index n inside D (Re n > 0, Im n ≥ 0).
    Penetrable { n_re: f64, n_im: f64 },
}

impl BoundaryCondition {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BoundaryCondition::Impedance { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                Err(Error::Config(format!("impedance must be non-negative, got {lambda}")))
            }
            BoundaryCondition::Penetrable { n_re, n_im } if !(n_re > 0.0 && n_im >= 0.0 && n_re.is_finite() && n_im.is_finite()) => {
                Err(Error::Config(format!("refractive index needs Re n > 0 and Im n >= 0, got {n_re}+{n_im}i")))
            }
            _ => Ok(()),
        }
    }

    fn lambda(&self) -> Option<f64> {
        match *self {
            BoundaryCondition::Neumann => Some(0.0),
            BoundaryCondition::Impedance { lambda } => Some(lambda),
            _ => None,
        }
    }
}

/// Product-rule weights for ∫₀^{2π} ln(4 sin²((t − τ)/2)) f(τ) dτ ≈ Σ_j R_j(t) f(t_j).
pub fn log_weight(m: usize, t_minus_tj: f64) -> f64 {
    let mf = m as f64;
    let mut acc = 0.0;
    for k in 1..m {
        acc += (k as f64 * t_minus_tj).cos() / k as f64;
    }
    -2.0 * PI / mf * acc - PI / (mf * mf) * (mf * t_minus_tj).cos()
}

/// Nyström matrices of S (single layer), K (double layer) and, optionally,
/// K′ (normal derivative of the single layer), each with the factor 2.
#[derive(Debug, Clone)]
pub struct LayerMatrices {
    pub s: Mat<C64>,
    pub k: Mat<C64>,
    pub kp: Option<Mat<C64>>,
}

/// Geometry of one node, possibly off the grid.
#[derive(Debug, Clone, Copy)]
struct NodeGeom {
    t: f64,
    x: Point,
    d: Point,
    dd: Point,
}

impl NodeGeom {
    fn of(nodes: &BoundaryNodes, j: usize) -> Self {
        NodeGeom { t: nodes.t[j], x: nodes.pos[j], d: nodes.deriv[j], dd: nodes.second[j] }
    }

    fn at(curve: &ObstacleCurve, t: f64) -> Self {
        let [x, d, dd] = curve.eval(t);
        NodeGeom { t, x, d, dd }
    }

    fn jac(&self) -> f64 {
        self.d.norm()
    }

    /// Limit of the double-layer kernel at coincidence.
    fn curvature_term(&self) -> f64 {
        (self.d.x2 * self.dd.x1 - self.d.x1 * self.dd.x2) / (2.0 * PI * self.d.dot(self.d))
    }
}

/// Kernel entries of S, K, K′ at (target t, source τ_j); returns the
/// (log-weighted, trapezoid) pairs for each.
fn free_entries(kappa: f64, m: usize, a: &NodeGeom, b: &NodeGeom, same: bool) -> Result<[(C64, C64); 3]> {
    let step = PI / m as f64;
    let rw = log_weight(m, a.t - b.t);
    let jb = b.jac();
    if same {
        let ja = a.jac();
        let m1 = -ja / (2.0 * PI);
        let m2 = C64::new(-EULER_GAMMA / PI - (0.5 * kappa * ja).ln() / PI, 0.5) * ja;
        let l = a.curvature_term();
        let s = C64::new(rw * m1, 0.0) + step * m2;
        return Ok([(s, ZERO), (C64::new(step * l, 0.0), ZERO), (C64::new(step * l, 0.0), ZERO)]);
    }
    let dx = a.x - b.x;
    let r = dx.norm();
    if r == 0.0 {
        return Err(Error::Geometry("obstacle curve self-intersects at two distinct parameters".into()));
    }
    let bs = bessel_j0j1_y0y1(kappa * r)?;
    let lg = (4.0 * (0.5 * (a.t - b.t)).sin().powi(2)).ln();
    let h0 = bs.h0();
    let h1 = bs.h1();
    // S
    let mm = 0.5 * I * h0 * jb;
    let m1 = -bs.j0 * jb / (2.0 * PI);
    let s = C64::new(rw * m1, 0.0) + step * (mm - m1 * lg);
    // K
    let n = b.d.x2 * dx.x1 - b.d.x1 * dx.x2;
    let l = 0.5 * I * kappa * h1 * (n / r);
    let l1 = -kappa / (2.0 * PI) * n * bs.j1 / r;
    let k = C64::new(rw * l1, 0.0) + step * (l - l1 * lg);
    // K′
    let ratio = jb / a.jac();
    let nt = a.d.x2 * dx.x1 - a.d.x1 * dx.x2;
    let lp = -0.5 * I * kappa * h1 * (nt / r) * ratio;
    let lp1 = kappa / (2.0 * PI) * nt * bs.j1 / r * ratio;
    let kp = C64::new(rw * lp1, 0.0) + step * (lp - lp1 * lg);
    Ok([(s, ZERO), (k, ZERO), (kp, ZERO)])
}

/// Free-space (Φ_κ) layer matrices on the node set.
pub fn free_space_layers(nodes: &BoundaryNodes, kappa: f64, with_adjoint: bool) -> Result<LayerMatrices> {
    let n = nodes.len();
    let rows: Vec<Vec<[(C64, C64); 3]>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = NodeGeom::of(nodes, i);
            (0..n).map(|j| free_entries(kappa, nodes.m, &a, &NodeGeom::of(nodes, j), i == j)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(LayerMatrices {
        s: Mat::from_fn(n, n, |i, j| rows[i][j][0].0),
        k: Mat::from_fn(n, n, |i, j| rows[i][j][1].0),
        kp: with_adjoint.then(|| Mat::from_fn(n, n, |i, j| rows[i][j][2].0)),
    })
}

/// The sources whose superposition forms the layer potentials: monopoles at
/// every node, then ℓ = 1 and ℓ = 2 dipoles when the double layer is needed.
fn node_sources(nodes: &BoundaryNodes, dipoles: bool) -> Vec<SourceSpec> {
    let mut v: Vec<SourceSpec> = nodes.pos.iter().map(|&p| SourceSpec::monopole(p)).collect();
    if dipoles {
        for l in 1..=2 {
            v.extend(nodes.pos.iter().map(|&p| SourceSpec::dipole(p, l).expect("l is 1 or 2")));
        }
    }
    v
}

/// Combination coefficients (sources × nodes) such that column j is the
/// kernel ∂𝔾/∂ν(y_j) − i𝔾 (`double`) or 𝔾 (single) at node j, times the
/// trapezoid weight (π/M)|x′_j|.
fn potential_coefficients(nodes: &BoundaryNodes, double: bool) -> Mat<C64> {
    let n = nodes.len();
    let ns = if double { 3 * n } else { n };
    let step = nodes.step();
    Mat::from_fn(ns, n, |s, j| {
        let w = step * nodes.jac[j];
        let (block, node) = (s / n, s % n);
        if node != j {
            return ZERO;
        }
        match (double, block) {
            (true, 0) => -I * w,
            // ∂𝔾/∂ν(y) = −Σ_ℓ ν_ℓ 𝕌(·, y; ℓ)
            (true, 1) => C64::new(-nodes.normal[j].x1 * w, 0.0),
            (true, _) => C64::new(-nodes.normal[j].x2 * w, 0.0),
            (false, _) => C64::new(w, 0.0),
        }
    })
}

/// Solution of a boundary integral equation.
#[derive(Debug, Clone)]
pub struct BoundaryDensity {
    pub nodes: BoundaryNodes,
    pub psi: Vec<C64>,
    /// Relative residual of the discrete solve.
    pub residual: f64,
}

/// Assembled boundary integral operator of one scene and obstacle.
#[derive(Debug, Clone)]
pub struct BoundarySolver {
    pub curve: ObstacleCurve,
    pub condition: BoundaryCondition,
    pub nodes: BoundaryNodes,
    pub layers: LayerMatrices,
    pub op: DenseOperator,
    level: StageKind,
    /// Node sources solved through the volume stages.
    basis: PreparedSources,
    /// Maps node densities to basis combinations.
    coef: Mat<C64>,
}

/// Discretizes I + K − iS (sound-soft) or I − K′ − iλS (Neumann/impedance)
/// with the kernel 𝔾(·, ·; Γ) of `nested` at `level`.
pub fn assemble_bie(
    curve: &ObstacleCurve,
    m: usize,
    condition: BoundaryCondition,
    nested: &NestedGreen,
    level: StageKind,
) -> Result<BoundarySolver> {
    condition.validate()?;
    let nodes = curve.nodes(m)?;
    let n = nodes.len();
    let kappa = nested.medium().kappa2;
    let lambda = condition.lambda();
    let double = lambda.is_none();
    if matches!(condition, BoundaryCondition::Penetrable { .. }) {
        return Err(Error::Config("penetrable obstacles use the volume solver".into()));
    }
    let mut layers = free_space_layers(&nodes, kappa, !double)?;
    let sources = node_sources(&nodes, double);
    let basis = nested.prepare(&sources, level)?;
    // smooth remainder 𝔾 − Φ_κ₂ on the nodes
    let rem = nested.evaluate_prepared(&basis, &nodes.pos, FieldPart::Remainder)?;
    let step = nodes.step();
    for i in 0..n {
        for j in 0..n {
            let w = 2.0 * step * nodes.jac[j];
            layers.s[(i, j)] += rem[(i, j)] * w;
            if double {
                let nu = nodes.normal[j];
                layers.k[(i, j)] -= (rem[(i, n + j)] * nu.x1 + rem[(i, 2 * n + j)] * nu.x2) * w;
            }
        }
    }
    if let Some(kp) = layers.kp.as_mut() {
        let delta = FD_STEP * curve.diameter();
        let plus: Vec<Point> = nodes.pos.iter().zip(&nodes.normal).map(|(&p, &nu)| p + nu * delta).collect();
        let minus: Vec<Point> = nodes.pos.iter().zip(&nodes.normal).map(|(&p, &nu)| p - nu * delta).collect();
        let rp = nested.evaluate_prepared(&basis, &plus, FieldPart::Remainder)?;
        let rm = nested.evaluate_prepared(&basis, &minus, FieldPart::Remainder)?;
        for i in 0..n {
            for j in 0..n {
                kp[(i, j)] += (rp[(i, j)] - rm[(i, j)]) / (2.0 * delta) * (2.0 * step * nodes.jac[j]);
            }
        }
    }
    let a = match lambda {
        None => Mat::from_fn(n, n, |i, j| {
            let v = layers.k[(i, j)] - I * layers.s[(i, j)];
            if i == j {
                v + 1.0
            } else {
                v
            }
        }),
        Some(lam) => {
            let kp = layers.kp.as_ref().expect("adjoint assembled");
            Mat::from_fn(n, n, |i, j| {
                let v = -kp[(i, j)] - I * lam * layers.s[(i, j)];
                if i == j {
                    v + 1.0
                } else {
                    v
                }
            })
        }
    };
    let mut op = DenseOperator::new(a)?;
    op.factorize()?;
    let coef = potential_coefficients(&nodes, double);
    Ok(BoundarySolver { curve: *curve, condition, nodes, layers, op, level, basis, coef })
}

/// Solves (I + K − iS)ψ = −2𝕌 given 𝕌 on the nodes.
pub fn solve_density(solver: &BoundarySolver, incident: &[C64]) -> Result<BoundaryDensity> {
    if solver.condition.lambda().is_some() {
        return Err(Error::Config("solve_density is for sound-soft obstacles".into()));
    }
    let rhs: Vec<C64> = incident.iter().map(|u| -2.0 * u).collect();
    let psi = solver.op.solve(&rhs)?;
    let residual = solver.op.relative_residual(&psi, &rhs);
    Ok(BoundaryDensity { nodes: solver.nodes.clone(), psi, residual })
}

/// Solves ψ − K′ψ − iλSψ = 2(∂_ν𝕌 + iλ𝕌) given 𝕌 and ∂_ν𝕌 on the nodes.
pub fn neumann_impedance_solve(solver: &BoundarySolver, incident: &[C64], incident_dn: &[C64]) -> Result<BoundaryDensity> {
    let lam = solver
        .condition
        .lambda()
        .ok_or_else(|| Error::Config("neumann_impedance_solve needs a Neumann or impedance obstacle".into()))?;
    let rhs: Vec<C64> = incident.iter().zip(incident_dn).map(|(u, du)| 2.0 * (du + I * lam * u)).collect();
    let psi = solver.op.solve(&rhs)?;
    let residual = solver.op.relative_residual(&psi, &rhs);
    Ok(BoundaryDensity { nodes: solver.nodes.clone(), psi, residual })
}

impl BoundarySolver {
    pub fn level(&self) -> StageKind {
        self.level
    }

    /// 𝕌 (and ∂_ν𝕌 by central differences) of the prepared incident
    /// columns on the nodes, then one density per column.
    pub fn solve(&self, nested: &NestedGreen, incident: &PreparedSources) -> Result<Vec<BoundaryDensity>> {
        let u = nested.evaluate_prepared(incident, &self.nodes.pos, FieldPart::Total)?;
        let du = match self.condition.lambda() {
            None => None,
            Some(_) => Some(self.normal_derivative(nested, incident)?),
        };
        (0..u.ncols())
            .map(|j| {
                let uj = column_at(&u, j);
                match &du {
                    None => solve_density(self, &uj),
                    Some(du) => neumann_impedance_solve(self, &uj, &column_at(du, j)),
                }
            })
            .collect()
    }

    fn normal_derivative(&self, nested: &NestedGreen, field: &PreparedSources) -> Result<Mat<C64>> {
        let delta = FD_STEP * self.curve.diameter();
        let plus: Vec<Point> = self.nodes.pos.iter().zip(&self.nodes.normal).map(|(&p, &nu)| p + nu * delta).collect();
        let minus: Vec<Point> = self.nodes.pos.iter().zip(&self.nodes.normal).map(|(&p, &nu)| p - nu * delta).collect();
        let up = nested.evaluate_prepared(field, &plus, FieldPart::Total)?;
        let um = nested.evaluate_prepared(field, &minus, FieldPart::Total)?;
        Ok(Mat::from_fn(up.nrows(), up.ncols(), |i, j| (up[(i, j)] - um[(i, j)]) / (2.0 * delta)))
    }

    /// The scattered potentials of the densities, one prepared column each.
    pub fn potential(&self, densities: &[BoundaryDensity]) -> Result<PreparedSources> {
        let n = self.nodes.len();
        if densities.iter().any(|d| d.psi.len() != n) {
            return Err(Error::Config("density does not match the node set".into()));
        }
        let psi = Mat::from_fn(n, densities.len(), |i, j| densities[j].psi[i]);
        self.basis.combine(&(&self.coef * &psi))
    }

    /// Trigonometric interpolant of node values at parameter t.
    pub fn interpolate(&self, values: &[C64], t: f64) -> C64 {
        trig_interpolate(values, t)
    }

    /// Boundary values ½(ψ + Kψ − iSψ) (sound-soft) or ½Sψ (single layer) of
    /// the scattered field at parameters `ts`, with the operators applied at
    /// off-node points through the same product rule.
    pub fn boundary_trace(&self, nested: &NestedGreen, density: &BoundaryDensity, ts: &[f64]) -> Result<Vec<C64>> {
        let (s, k, _) = self.operator_rows(nested, ts, false)?;
        let n = self.nodes.len();
        let double = self.condition.lambda().is_none();
        Ok(ts
            .iter()
            .enumerate()
            .map(|(r, &t)| {
                let mut sp = ZERO;
                let mut kp = ZERO;
                for j in 0..n {
                    sp += s[(r, j)] * density.psi[j];
                    kp += k[(r, j)] * density.psi[j];
                }
                if double {
                    0.5 * (trig_interpolate(&density.psi, t) + kp - I * sp)
                } else {
                    0.5 * sp
                }
            })
            .collect())
    }

    /// Exterior normal derivative ½(K′ψ − ψ) of a single-layer field at `ts`.
    pub fn boundary_normal_trace(&self, nested: &NestedGreen, density: &BoundaryDensity, ts: &[f64]) -> Result<Vec<C64>> {
        if self.condition.lambda().is_none() {
            return Err(Error::Config("normal trace is provided for single-layer densities".into()));
        }
        let (_, _, kp) = self.operator_rows(nested, ts, true)?;
        let n = self.nodes.len();
        Ok(ts
            .iter()
            .enumerate()
            .map(|(r, &t)| {
                let mut acc = ZERO;
                for j in 0..n {
                    acc += kp[(r, j)] * density.psi[j];
                }
                0.5 * (acc - trig_interpolate(&density.psi, t))
            })
            .collect())
    }

    /// Rows of S, K and (optionally) K′ at off-node parameters.
    fn operator_rows(&self, nested: &NestedGreen, ts: &[f64], adjoint: bool) -> Result<(Mat<C64>, Mat<C64>, Mat<C64>)> {
        let n = self.nodes.len();
        let kappa = nested.medium().kappa2;
        let m = self.nodes.m;
        let geo: Vec<NodeGeom> = ts.iter().map(|&t| NodeGeom::at(&self.curve, t)).collect();
        let mut s = Mat::zeros(ts.len(), n);
        let mut k = Mat::zeros(ts.len(), n);
        let mut kp = Mat::zeros(ts.len(), n);
        for (r, a) in geo.iter().enumerate() {
            for j in 0..n {
                let b = NodeGeom::of(&self.nodes, j);
                if (a.t - b.t).rem_euclid(2.0 * PI).min((b.t - a.t).rem_euclid(2.0 * PI)) < 1e-12 {
                    return Err(Error::Domain(format!("parameter {} coincides with a node", a.t)));
                }
                let e = free_entries(kappa, m, a, &b, false)?;
                s[(r, j)] = e[0].0;
                k[(r, j)] = e[1].0;
                kp[(r, j)] = e[2].0;
            }
        }
        let xs: Vec<Point> = geo.iter().map(|g| g.x).collect();
        let rem = nested.evaluate_prepared(&self.basis, &xs, FieldPart::Remainder)?;
        let step = self.nodes.step();
        let double = self.condition.lambda().is_none();
        for r in 0..ts.len() {
            for j in 0..n {
                let w = 2.0 * step * self.nodes.jac[j];
                s[(r, j)] += rem[(r, j)] * w;
                if double {
                    let nu = self.nodes.normal[j];
                    k[(r, j)] -= (rem[(r, n + j)] * nu.x1 + rem[(r, 2 * n + j)] * nu.x2) * w;
                }
            }
        }
        if adjoint {
            let delta = FD_STEP * self.curve.diameter();
            let nus: Vec<Point> = ts.iter().map(|&t| self.curve.normal(t)).collect();
            let plus: Vec<Point> = xs.iter().zip(&nus).map(|(&p, &nu)| p + nu * delta).collect();
            let minus: Vec<Point> = xs.iter().zip(&nus).map(|(&p, &nu)| p - nu * delta).collect();
            let rp = nested.evaluate_prepared(&self.basis, &plus, FieldPart::Remainder)?;
            let rm = nested.evaluate_prepared(&self.basis, &minus, FieldPart::Remainder)?;
            for r in 0..ts.len() {
                for j in 0..n {
                    kp[(r, j)] += (rp[(r, j)] - rm[(r, j)]) / (2.0 * delta) * (2.0 * step * self.nodes.jac[j]);
                }
            }
        }
        Ok((s, k, kp))
    }
}

/// Evaluates the scattered field w of a density at exterior points.
pub fn scattered_from_density(
    solver: &BoundarySolver,
    nested: &NestedGreen,
    density: &BoundaryDensity,
    targets: &[Point],
) -> Result<Vec<C64>> {
    let spacing = solver.nodes.step() * solver.nodes.jac.iter().cloned().fold(0.0, f64::max);
    for x in targets {
        let dmin = solver.nodes.pos.iter().map(|p| p.dist(*x)).fold(f64::INFINITY, f64::min);
        if dmin < spacing {
            return Err(Error::Accuracy { achieved: dmin, tol: spacing });
        }
    }
    let pot = solver.potential(std::slice::from_ref(density))?;
    Ok(column(&nested.evaluate_prepared(&pot, targets, FieldPart::Total)?))
}

/// Trigonometric interpolation of 2M equispaced samples on [0, 2π).
pub fn trig_interpolate(values: &[C64], t: f64) -> C64 {
    let n = values.len();
    let m = n / 2;
    let mut acc = ZERO;
    for (j, v) in values.iter().enumerate() {
        let d = t - 2.0 * PI * j as f64 / n as f64;
        // Dirichlet-type cardinal function with the Nyquist term halved
        let mut l = 1.0;
        for k in 1..m {
            l += 2.0 * (k as f64 * d).cos();
        }
        l += (m as f64 * d).cos();
        acc += v * (l / n as f64);
    }
    acc
}

fn column(m: &Mat<C64>) -> Vec<C64> {
    column_at(m, 0)
}

fn column_at(m: &Mat<C64>, j: usize) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

/// Refractive index inside D on a cell mesh.
#[derive(Debug, Clone)]
pub struct PenetrableMedium {
    pub n: C64,
    pub mesh: RegionMesh,
}

impl PenetrableMedium {
    pub fn contrast(&self) -> C64 {
        1.0 - self.n
    }
}

/// Assembled penetrable-obstacle volume equation.
#[derive(Debug, Clone)]
pub struct PenetrableSolver {
    pub medium: PenetrableMedium,
    pub op: DenseOperator,
    basis: PreparedSources,
    coef_scale: Vec<C64>,
}

/// Field values u on the cells of D.
#[derive(Debug, Clone)]
pub struct PenetrableSolution {
    pub values: Vec<C64>,
    pub residual: f64,
}

/// Discretizes u + κ₂² ∫_D 𝔾(·, y; Γ) m(y) u(y) dy on a cell mesh of D.
pub fn assemble_penetrable(
    scene: &SceneGeometry,
    n: C64,
    cell_size: f64,
    subsample: usize,
    nested: &NestedGreen,
    level: StageKind,
) -> Result<PenetrableSolver> {
    BoundaryCondition::Penetrable { n_re: n.re, n_im: n.im }.validate()?;
    let mesh = build_region_mesh(RegionTag::Penetrable, scene, cell_size, subsample)?;
    let k2 = nested.medium().kappa2;
    let medium = PenetrableMedium { n, mesh };
    let cells = &medium.mesh.cells;
    let nc = cells.len();
    let h = medium.mesh.cell_size;
    let sources: Vec<SourceSpec> = cells.iter().map(|c| SourceSpec::monopole(c.center)).collect();
    let basis = nested.prepare(&sources, level)?;
    let rem = nested.evaluate_prepared(&basis, &medium.mesh.centers(), FieldPart::Remainder)?;
    let m = medium.contrast();
    let rows: Vec<Vec<C64>> = (0..nc)
        .into_par_iter()
        .map(|i| {
            (0..nc)
                .map(|j| {
                    let phi = if i == j {
                        let c = &cells[j];
                        C64::new(-c.self_log / (2.0 * PI * c.weight), 0.0) + fundamental_regular_part_at_zero(k2)
                    } else {
                        let (di, dj) = (cells[i].index.0 - cells[j].index.0, cells[i].index.1 - cells[j].index.1);
                        fundamental_solution_r(k2, (di as f64).hypot(dj as f64) * h)?
                    };
                    Ok(phi + rem[(i, j)])
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let a = Mat::from_fn(nc, nc, |i, j| {
        let v = rows[i][j] * (k2 * k2 * cells[j].weight) * m;
        if i == j {
            v + 1.0
        } else {
            v
        }
    });
    let mut op = DenseOperator::new(a)?;
    op.factorize()?;
    let coef_scale = cells.iter().map(|c| -(k2 * k2 * c.weight) * m).collect();
    Ok(PenetrableSolver { medium, op, basis, coef_scale })
}

/// Solves the penetrable equation for incident 𝕌 given on the cells.
pub fn solve_penetrable(solver: &PenetrableSolver, incident: &[C64]) -> Result<PenetrableSolution> {
    let values = solver.op.solve(incident)?;
    let residual = solver.op.relative_residual(&values, incident);
    Ok(PenetrableSolution { values, residual })
}

impl PenetrableSolver {
    pub fn solve(&self, nested: &NestedGreen, incident: &PreparedSources) -> Result<Vec<PenetrableSolution>> {
        let u = nested.evaluate_prepared(incident, &self.medium.mesh.centers(), FieldPart::Total)?;
        (0..u.ncols()).map(|j| solve_penetrable(self, &column_at(&u, j))).collect()
    }

    /// The scattered parts −κ₂² Σ_j 𝔾(·, c_j) m w_j u_j, one prepared column each.
    pub fn potential(&self, sols: &[PenetrableSolution]) -> Result<PreparedSources> {
        let n = self.coef_scale.len();
        let c = Mat::from_fn(n, sols.len(), |i, j| self.coef_scale[i] * sols[j].values[i]);
        self.basis.combine(&c)
    }
}
