//! Nested Lippmann-Schwinger volume equations.
//!
//! Stage 1 trades the flat line x₂ = 0 for the arc interface Γ_R. On the
//! half-disc B₁ between them the total field solves
//!
//! ```text
//! u_R + η ∫_{B₁} 𝔾(·, y; Γ₀) u_R(y) dy = u₀          (η = κ₂² − κ₁²)
//! ```
//!
//! Stage 2 trades Γ_R for the rough interface Γ on B₂ (between the arc and Γ):
//!
//! ```text
//! u − η ∫_{B₂} 𝔾(·, y; Γ_R) u(y) dy = u_R
//! ```
//!
//! Both are discretized by cell-midpoint Nyström on one lattice
//! ((i + ½)h, (j + ½)h) with exact logarithmic self terms. The stage-2 kernel on
//! B₂ × B₂ comes from a single multi-column stage-1 solve X₁₂ = A₁⁻¹K₁₂, so
//! 𝔾(x, c; Γ_R) = 𝔾(x, c; Γ₀) − η Σ_k 𝔾(x, b_k; Γ₀) w_k X₁₂[k, c].

use std::f64::consts::PI;

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result, Stage};
use crate::geometry::{build_region_mesh, Cell, Point, RegionMesh, RegionTag, SceneGeometry};
use crate::layered_green::{MediumParams, PlanarGreen, SourceKind, SourceSpec};
use crate::specfun::{fundamental_regular_part_at_zero, fundamental_solution_r};

type C64 = Complex64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Relative residual above which one step of iterative refinement is taken.
const REFINE_ABOVE: f64 = 1e-12;

/// Dense complex matrix with an optional row-pivoted LU factorization.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    mat: Mat<C64>,
    lu: Option<PartialPivLu<C64>>,
}

impl DenseOperator {
    pub fn new(mat: Mat<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::Solver(format!("operator must be square, got {}×{}", mat.nrows(), mat.ncols())));
        }
        Ok(DenseOperator { mat, lu: None })
    }

    pub fn identity(n: usize) -> Self {
        DenseOperator { mat: Mat::identity(n, n), lu: None }
    }

    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.mat
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    pub fn is_factorized(&self) -> bool {
        self.lu.is_some()
    }

    /// LU with partial pivoting. Fails on a numerically singular pivot.
    pub fn factorize(&mut self) -> Result<()> {
        if self.lu.is_some() {
            return Ok(());
        }
        let n = self.n();
        if self.mat.col_iter().any(|c| c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite())) {
            return Err(Error::Solver("operator has non-finite entries".into()));
        }
        let lu = self.mat.partial_piv_lu();
        let u = lu.U();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..n {
            let a = u[(i, i)].norm();
            lo = lo.min(a);
            hi = hi.max(a);
        }
        if n > 0 && (!(lo > 1e-14 * hi) || hi == 0.0) {
            return Err(Error::Solver(format!(
                "singular factorization (pivot ratio {:.3e}); the discretization may sit near an interior resonance",
                if hi > 0.0 { lo / hi } else { 0.0 }
            )));
        }
        self.lu = Some(lu);
        Ok(())
    }

    fn lu(&self) -> Result<&PartialPivLu<C64>> {
        self.lu.as_ref().ok_or_else(|| Error::Solver("operator used before factorization".into()))
    }

    /// A·x.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let n = self.n();
        let mut out = vec![ZERO; n];
        for (j, &xj) in x.iter().enumerate().take(n) {
            if xj == ZERO {
                continue;
            }
            let col = self.mat.col(j);
            for (o, a) in out.iter_mut().zip(col.iter()) {
                *o += a * xj;
            }
        }
        out
    }

    /// ‖A·x − b‖∞ / ‖b‖∞ (absolute when b = 0).
    pub fn relative_residual(&self, x: &[C64], b: &[C64]) -> f64 {
        let ax = self.apply(x);
        let r = ax.iter().zip(b).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let nb = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if nb > 0.0 {
            r / nb
        } else {
            r
        }
    }

    pub fn solve(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        let n = self.n();
        if rhs.len() != n {
            return Err(Error::Solver(format!("right-hand side has length {}, expected {n}", rhs.len())));
        }
        let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
        let x = self.solve_mat(&b)?;
        Ok(x.col_as_slice(0).to_vec())
    }

    /// Solves for every column of `rhs`, with one refinement step for columns
    /// whose residual exceeds 1e-12 relative.
    pub fn solve_mat(&self, rhs: &Mat<C64>) -> Result<Mat<C64>> {
        let lu = self.lu()?;
        if rhs.nrows() != self.n() {
            return Err(Error::Solver(format!("right-hand side has {} rows, expected {}", rhs.nrows(), self.n())));
        }
        if rhs.ncols() == 0 || self.n() == 0 {
            return Ok(rhs.clone());
        }
        let mut x = lu.solve(rhs);
        let r = rhs - &self.mat * &x;
        let needs = (0..rhs.ncols()).any(|j| {
            let nb = rhs.col(j).iter().map(|v| v.norm()).fold(0.0, f64::max);
            let nr = r.col(j).iter().map(|v| v.norm()).fold(0.0, f64::max);
            nr > REFINE_ABOVE * nb
        });
        if needs {
            x += lu.solve(&r);
        }
        if x.col_iter().any(|c| c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite())) {
            return Err(Error::Solver("solve produced non-finite values".into()));
        }
        Ok(x)
    }

    /// ‖A‖₁ (maximum column sum).
    pub fn norm1(&self) -> f64 {
        self.mat.col_iter().map(|c| c.iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Estimate of the 1-norm condition number ‖A‖₁‖A⁻¹‖₁ (Hager–Higham).
    pub fn condition_estimate(&self) -> Result<f64> {
        let lu = self.lu()?;
        let n = self.n();
        if n == 0 {
            return Ok(1.0);
        }
        let mut x = Mat::from_fn(n, 1, |_, _| C64::new(1.0 / n as f64, 0.0));
        let mut est = 0.0;
        for it in 0..5 {
            let y = lu.solve(&x);
            let ny: f64 = y.col(0).iter().map(|v| v.norm()).sum();
            if it > 0 && ny <= est {
                break;
            }
            est = ny;
            let sgn = Mat::from_fn(n, 1, |i, _| {
                let v = y[(i, 0)];
                let a = v.norm();
                if a > 0.0 {
                    v / a
                } else {
                    ONE
                }
            });
            let z = lu.solve_adjoint(&sgn);
            let (jmax, zmax) =
                (0..n).map(|i| (i, z[(i, 0)].norm())).fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
            let ztx: f64 = (0..n).map(|i| (z[(i, 0)].conj() * x[(i, 0)]).re).sum();
            if zmax <= ztx {
                break;
            }
            x = Mat::from_fn(n, 1, |i, _| if i == jmax { ONE } else { ZERO });
        }
        Ok(est * self.norm1())
    }
}

/// Lattice index of `p` when it is exactly a cell center for spacing `h`.
fn lattice_index(p: Point, h: f64) -> Option<(i64, i64)> {
    let i = (p.x1 / h - 0.5).round();
    let j = (p.x2 / h - 0.5).round();
    if (i + 0.5) * h == p.x1 && (j + 0.5) * h == p.x2 {
        Some((i as i64, j as i64))
    } else {
        None
    }
}

/// 𝔾(x, y; Γ₀) with y a cell: midpoint value off the diagonal, and on the
/// diagonal the mean over the source cell (exact log integral plus the
/// regular parts at coincidence).
#[derive(Debug, Clone)]
pub struct CellKernel {
    pub green: PlanarGreen,
    pub h: f64,
}

impl CellKernel {
    pub fn new(green: PlanarGreen, h: f64) -> Self {
        CellKernel { green, h }
    }

    fn medium(&self) -> MediumParams {
        self.green.medium
    }

    /// Kernel value for a target that sits on lattice point `ix`.
    fn lattice(&self, ix: (i64, i64), x: Point, c: &Cell) -> Result<C64> {
        if ix == c.index {
            return self.self_term(c);
        }
        let h = self.h;
        let (di, dj) = (ix.0 - c.index.0, ix.1 - c.index.1);
        let sum = (ix.1 + c.index.1 + 1) as f64 * h;
        let gs = self.green.scattered_cells(di as f64 * h, x.x2, c.center.x2, sum, SourceKind::Monopole)?;
        if (x.x2 > 0.0) == (c.center.x2 > 0.0) {
            let r = (di as f64).hypot(dj as f64) * h;
            Ok(gs + fundamental_solution_r(self.medium().kappa_at(c.center.x2), r)?)
        } else {
            Ok(gs)
        }
    }

    fn self_term(&self, c: &Cell) -> Result<C64> {
        let k = self.medium().kappa_at(c.center.x2);
        let sing = C64::new(-c.self_log / (2.0 * PI * c.weight), 0.0) + fundamental_regular_part_at_zero(k);
        let sum = (2 * c.index.1 + 1) as f64 * self.h;
        let gs = self.green.scattered_cells(0.0, c.center.x2, c.center.x2, sum, SourceKind::Monopole)?;
        Ok(sing + gs)
    }

    /// Kernel between cells.
    pub fn cells(&self, x: &Cell, y: &Cell) -> Result<C64> {
        self.lattice(x.index, x.center, y)
    }

    /// Kernel at an arbitrary target point.
    pub fn at(&self, x: Point, c: &Cell) -> Result<C64> {
        match lattice_index(x, self.h) {
            Some(ix) => self.lattice(ix, x, c),
            None => self.green.total(x, &SourceSpec::monopole(c.center)),
        }
    }

    /// Matrix of kernel values, rows `rows`, columns `cols`.
    fn block(&self, rows: &[Cell], cols: &[Cell]) -> Result<Mat<C64>> {
        let data: Vec<Vec<C64>> = rows
            .par_iter()
            .map(|r| cols.iter().map(|c| self.cells(r, c)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Ok(Mat::from_fn(rows.len(), cols.len(), |i, j| data[i][j]))
    }

    /// Symmetric block over one mesh (upper triangle evaluated, then mirrored;
    /// off-diagonal values are exactly reciprocal on the lattice).
    fn symmetric_block(&self, cells: &[Cell]) -> Result<Mat<C64>> {
        let n = cells.len();
        let rows: Vec<Vec<C64>> = (0..n)
            .into_par_iter()
            .map(|i| (i..n).map(|j| self.cells(&cells[i], &cells[j])).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let mut m = Mat::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                m[(i, i + k)] = v;
                m[(i + k, i)] = v;
            }
        }
        Ok(m)
    }
}

/// I + s·η·K·W, factorized.
fn lift(k: Mat<C64>, weights: &[f64], scale: f64) -> Result<DenseOperator> {
    let n = k.nrows();
    let a = Mat::from_fn(n, n, |i, j| {
        let v = k[(i, j)] * (scale * weights[j]);
        if i == j {
            v + ONE
        } else {
            v
        }
    });
    let mut op = DenseOperator::new(a)?;
    op.factorize()?;
    Ok(op)
}

/// Discretized I + ηT₀ on B₁, factorized. Entry (i, j) = δᵢⱼ + η wⱼ 𝔾(cᵢ, cⱼ; Γ₀).
pub fn assemble_b1_operator(mesh: &RegionMesh, kernel: &CellKernel) -> Result<DenseOperator> {
    let eta = kernel.medium().eta();
    if eta == 0.0 {
        let mut op = DenseOperator::identity(mesh.len());
        op.factorize()?;
        return Ok(op);
    }
    let k = kernel.symmetric_block(&mesh.cells)?;
    lift(k, &mesh.weights(), eta)
}

/// Which interface a grid solution or field refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StageKind {
    /// Γ₀: the flat interface, no volume correction.
    Planar,
    /// Γ_R.
    Arc,
    /// Γ.
    Rough,
}

/// Values of the total field on the cells of one stage's mesh.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub stage: StageKind,
    pub source: SourceSpec,
    pub mesh: RegionMesh,
    pub values: Vec<C64>,
    /// Relative discrete residual of the solve.
    pub residual: f64,
}

/// Stage-1 data: B₁ mesh and factorized I + ηT₀.
#[derive(Debug, Clone)]
pub struct ArcStage {
    pub mesh: RegionMesh,
    pub op: DenseOperator,
}

/// Stage-2 data: B₂ mesh, factorized I − ηT_R and the coupling blocks.
#[derive(Debug, Clone)]
pub struct RoughStage {
    pub mesh: RegionMesh,
    pub op: DenseOperator,
    /// 𝔾(B₂, B₁; Γ₀).
    k21: Mat<C64>,
    /// A₁⁻¹ 𝔾(B₁, B₂; Γ₀).
    x12: Mat<C64>,
}

/// Assembles I − ηT_R on B₂. T_R's kernel 𝔾(cᵢ, cⱼ; Γ_R) is the stage-1
/// extension of monopoles placed at the B₂ cells.
pub fn assemble_b2_operator(mesh2: &RegionMesh, arc: &ArcStage, kernel: &CellKernel) -> Result<RoughStage> {
    let eta = kernel.medium().eta();
    let (n1, n2) = (arc.mesh.len(), mesh2.len());
    if eta == 0.0 {
        let mut op = DenseOperator::identity(n2);
        op.factorize()?;
        return Ok(RoughStage { mesh: mesh2.clone(), op, k21: Mat::zeros(n2, n1), x12: Mat::zeros(n1, n2) });
    }
    let k21 = kernel.block(&mesh2.cells, &arc.mesh.cells)?;
    let k12 = kernel.block(&arc.mesh.cells, &mesh2.cells)?;
    let x12 = arc.op.solve_mat(&k12)?;
    drop(k12);
    let k22 = kernel.symmetric_block(&mesh2.cells)?;
    let w1 = arc.mesh.weights();
    let k21w = Mat::from_fn(n2, n1, |i, k| k21[(i, k)] * (eta * w1[k]));
    let gr22 = k22 - &k21w * &x12;
    drop(k21w);
    let op = lift(gr22, &mesh2.weights(), -eta)?;
    Ok(RoughStage { mesh: mesh2.clone(), op, k21, x12 })
}

/// Resolution and accuracy settings of the volume discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeSettings {
    pub cell_size: f64,
    pub subsample: usize,
    pub tol: f64,
}

/// Which part of the total field to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldPart {
    Total,
    /// Total minus the source's free field Φ_κ₀ (or its gradient) when target
    /// and source lie on the same side of x₂ = 0.
    Remainder,
}

/// Green's functions and dipole fields for Γ₀, Γ_R or Γ, evaluated through
/// the nested volume equations.
#[derive(Debug, Clone)]
pub struct NestedGreen {
    pub kernel: CellKernel,
    pub arc: Option<ArcStage>,
    pub rough: Option<RoughStage>,
}

impl NestedGreen {
    /// Flat interface only.
    pub fn planar(medium: MediumParams, tol: f64) -> Self {
        NestedGreen { kernel: CellKernel::new(PlanarGreen::new(medium, tol), 1.0), arc: None, rough: None }
    }

    /// Builds the stages up to `level`. With η = 0 no stage changes anything
    /// and the planar evaluator is used throughout.
    pub fn build(medium: MediumParams, scene: &SceneGeometry, settings: VolumeSettings, level: StageKind) -> Result<Self> {
        medium.validate()?;
        if medium.eta() == 0.0 || level == StageKind::Planar {
            return Ok(Self::planar(medium, settings.tol));
        }
        let kernel = CellKernel::new(PlanarGreen::with_cache(medium, settings.tol), settings.cell_size);
        let mesh1 = build_region_mesh(RegionTag::B1, scene, settings.cell_size, settings.subsample).map_err(|e| e.in_stage(Stage::Arc))?;
        let op1 = assemble_b1_operator(&mesh1, &kernel).map_err(|e| e.in_stage(Stage::Arc))?;
        let arc = ArcStage { mesh: mesh1, op: op1 };
        let rough = if level == StageKind::Rough {
            let mesh2 = build_region_mesh(RegionTag::B2, scene, settings.cell_size, settings.subsample)
                .map_err(|e| e.in_stage(Stage::Rough))?;
            Some(assemble_b2_operator(&mesh2, &arc, &kernel).map_err(|e| e.in_stage(Stage::Rough))?)
        } else {
            None
        };
        Ok(NestedGreen { kernel, arc: Some(arc), rough })
    }

    pub fn medium(&self) -> MediumParams {
        self.kernel.green.medium
    }

    pub fn eta(&self) -> f64 {
        self.medium().eta()
    }

    /// Highest interface level available.
    pub fn level(&self) -> StageKind {
        if self.rough.is_some() {
            StageKind::Rough
        } else if self.arc.is_some() {
            StageKind::Arc
        } else {
            StageKind::Planar
        }
    }

    fn check_level(&self, level: StageKind) -> Result<()> {
        let ok = match level {
            StageKind::Planar => true,
            StageKind::Arc => self.arc.is_some() || self.eta() == 0.0,
            StageKind::Rough => self.rough.is_some() || self.eta() == 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("field level {level:?} requested but only {:?} was built", self.level())))
        }
    }

    fn planar_column(&self, cells: &[Cell], src: &SourceSpec) -> Result<Vec<C64>> {
        cells.iter().map(|c| self.kernel.green.total(c.center, src)).collect()
    }

    /// Cell values (u_R on B₁, and u on B₂ when `level` is Rough) for each
    /// source, one column per source.
    pub fn cell_values(&self, sources: &[SourceSpec], level: StageKind) -> Result<(Mat<C64>, Option<Mat<C64>>)> {
        self.check_level(level)?;
        let (arc, eta) = match (&self.arc, level) {
            (Some(a), StageKind::Arc | StageKind::Rough) => (a, self.eta()),
            _ => return Ok((Mat::zeros(0, sources.len()), None)),
        };
        let ns = sources.len();
        let cols: Vec<Vec<C64>> =
            sources.par_iter().map(|s| self.planar_column(&arc.mesh.cells, s)).collect::<Result<_>>()?;
        let p1 = Mat::from_fn(arc.mesh.len(), ns, |i, j| cols[j][i]);
        let u1 = arc.op.solve_mat(&p1)?;
        if level != StageKind::Rough {
            return Ok((u1, None));
        }
        let rough = self.rough.as_ref().expect("checked");
        let cols2: Vec<Vec<C64>> =
            sources.par_iter().map(|s| self.planar_column(&rough.mesh.cells, s)).collect::<Result<_>>()?;
        let w1 = arc.mesh.weights();
        let wu1 = Mat::from_fn(arc.mesh.len(), ns, |k, j| u1[(k, j)] * (eta * w1[k]));
        let r2 = Mat::from_fn(rough.mesh.len(), ns, |i, j| cols2[j][i]) - &rough.k21 * &wu1;
        let u2 = rough.op.solve_mat(&r2)?;
        Ok((u1, Some(u2)))
    }

    /// Solves the volume equations for `sources` once, so that fields can
    /// then be evaluated at any number of targets.
    pub fn prepare(&self, sources: &[SourceSpec], level: StageKind) -> Result<PreparedSources> {
        self.check_level(level)?;
        let ns = sources.len();
        let mix = Mat::identity(ns, ns);
        let arc = match (&self.arc, level) {
            (Some(a), StageKind::Arc | StageKind::Rough) => a,
            _ => return Ok(PreparedSources { sources: sources.to_vec(), level, mix, c1: None, c2: None }),
        };
        let eta = self.eta();
        let (u1, u2) = self.cell_values(sources, level)?;
        // coefficients of 𝔾(x, c; Γ₀) per B₂ cell: η w_c u₂, and per B₁ cell:
        // −η w_k (u₁ + X₁₂ η W₂ u₂)
        let w1 = arc.mesh.weights();
        let mut z = u1;
        let mut c2 = None;
        if let (Some(rough), Some(u2)) = (&self.rough, &u2) {
            let w2 = rough.mesh.weights();
            let wu2 = Mat::from_fn(rough.mesh.len(), ns, |c, j| u2[(c, j)] * (eta * w2[c]));
            z += &rough.x12 * &wu2;
            c2 = Some(wu2);
        }
        let c1 = Mat::from_fn(arc.mesh.len(), ns, |k, j| z[(k, j)] * (-eta * w1[k]));
        Ok(PreparedSources { sources: sources.to_vec(), level, mix, c1: Some(c1), c2 })
    }

    /// Field values at `targets` (rows) for the prepared columns.
    pub fn evaluate_prepared(&self, p: &PreparedSources, targets: &[Point], part: FieldPart) -> Result<Mat<C64>> {
        let g = &self.kernel.green;
        let used: Vec<usize> = (0..p.sources.len()).filter(|&s| p.mix.row(s).iter().any(|v| *v != ZERO)).collect();
        let direct: Vec<Vec<C64>> = targets
            .par_iter()
            .map(|&x| {
                used.iter()
                    .map(|&k| {
                        let s = &p.sources[k];
                        let y = s.position;
                        match part {
                            FieldPart::Remainder if (x.x2 > 0.0) == (y.x2 > 0.0) => {
                                g.scattered_offset(x.x1 - y.x1, x.x2, y.x2, s.kind)
                            }
                            _ => g.total(x, s),
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let d = Mat::from_fn(targets.len(), used.len(), |t, k| direct[t][k]);
        let mix = Mat::from_fn(used.len(), p.ncols(), |k, j| p.mix[(used[k], j)]);
        let mut out = &d * &mix;
        if let (Some(c1), Some(arc)) = (&p.c1, &self.arc) {
            out += &self.target_rows(targets, &arc.mesh.cells)? * c1;
        }
        if let (Some(c2), Some(rough)) = (&p.c2, &self.rough) {
            out += &self.target_rows(targets, &rough.mesh.cells)? * c2;
        }
        Ok(out)
    }

    /// Field values at `targets` (rows) for `sources` (columns).
    pub fn evaluate(&self, sources: &[SourceSpec], targets: &[Point], part: FieldPart, level: StageKind) -> Result<Mat<C64>> {
        let p = self.prepare(sources, level)?;
        self.evaluate_prepared(&p, targets, part)
    }

    fn target_rows(&self, targets: &[Point], cells: &[Cell]) -> Result<Mat<C64>> {
        let rows: Vec<Vec<C64>> = targets
            .par_iter()
            .map(|&x| cells.iter().map(|c| self.kernel.at(x, c)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Ok(Mat::from_fn(targets.len(), cells.len(), |t, k| rows[t][k]))
    }

    /// Single value of the total field at `x` for `src`.
    pub fn field(&self, x: Point, src: &SourceSpec, level: StageKind) -> Result<C64> {
        Ok(self.evaluate(std::slice::from_ref(src), &[x], FieldPart::Total, level)?[(0, 0)])
    }
}

/// Sources whose volume equations have been solved; each column is a fixed
/// linear combination (`mix`) of the source fields.
#[derive(Debug, Clone)]
pub struct PreparedSources {
    pub sources: Vec<SourceSpec>,
    pub level: StageKind,
    mix: Mat<C64>,
    c1: Option<Mat<C64>>,
    c2: Option<Mat<C64>>,
}

impl PreparedSources {
    pub fn ncols(&self) -> usize {
        self.mix.ncols()
    }

    /// New columns as combinations of the current ones: column j of the result
    /// is Σ_k coef[k, j]·(column k).
    pub fn combine(&self, coef: &Mat<C64>) -> Result<PreparedSources> {
        if coef.nrows() != self.ncols() {
            return Err(Error::Config(format!("{} combination rows for {} columns", coef.nrows(), self.ncols())));
        }
        Ok(PreparedSources {
            sources: self.sources.clone(),
            level: self.level,
            mix: &self.mix * coef,
            c1: self.c1.as_ref().map(|c| c * coef),
            c2: self.c2.as_ref().map(|c| c * coef),
        })
    }

    /// Scales every column by `factor`.
    pub fn scaled(&self, factor: C64) -> PreparedSources {
        let n = self.ncols();
        self.combine(&Mat::from_fn(n, n, |i, j| if i == j { factor } else { ZERO })).expect("square")
    }
}

/// Solves the B₁ equation for one source.
pub fn solve_stage1(source: &SourceSpec, nested: &NestedGreen) -> Result<GridSolution> {
    let arc = nested.arc.as_ref().ok_or_else(|| Error::Config("stage 1 was not built".into()))?;
    let rhs = nested.planar_column(&arc.mesh.cells, source)?;
    let values = arc.op.solve(&rhs)?;
    let residual = arc.op.relative_residual(&values, &rhs);
    Ok(GridSolution { stage: StageKind::Arc, source: *source, mesh: arc.mesh.clone(), values, residual })
}

/// u_R(x) = u₀(x) − η Σ_k 𝔾(x, b_k; Γ₀) w_k u_R(b_k).
pub fn extend_stage1(sol: &GridSolution, x: Point, nested: &NestedGreen) -> Result<C64> {
    if sol.stage != StageKind::Arc {
        return Err(Error::Config("extend_stage1 needs a stage-1 solution".into()));
    }
    let eta = nested.eta();
    let mut v = nested.kernel.green.total(x, &sol.source)?;
    for (c, u) in sol.mesh.cells.iter().zip(&sol.values) {
        v -= nested.kernel.at(x, c)? * (eta * c.weight) * u;
    }
    Ok(v)
}

/// 𝔾(x, y; Γ_R): total field at x of a monopole at y for the arc interface.
pub fn green_arc(x: Point, y: Point, nested: &NestedGreen) -> Result<C64> {
    nested.field(x, &SourceSpec::monopole(y), StageKind::Arc)
}

/// Solves the B₂ equation for one source given its stage-1 solution.
pub fn solve_stage2(arc_sol: &GridSolution, nested: &NestedGreen) -> Result<GridSolution> {
    let rough = nested.rough.as_ref().ok_or_else(|| Error::Config("stage 2 was not built".into()))?;
    if arc_sol.stage != StageKind::Arc {
        return Err(Error::Config("solve_stage2 needs a stage-1 solution".into()));
    }
    let eta = nested.eta();
    let src = arc_sol.source;
    let mut rhs = nested.planar_column(&rough.mesh.cells, &src)?;
    for (i, r) in rhs.iter_mut().enumerate() {
        for (k, c) in arc_sol.mesh.cells.iter().enumerate() {
            *r -= rough.k21[(i, k)] * (eta * c.weight) * arc_sol.values[k];
        }
    }
    let values = rough.op.solve(&rhs)?;
    let residual = rough.op.relative_residual(&values, &rhs);
    Ok(GridSolution { stage: StageKind::Rough, source: src, mesh: rough.mesh.clone(), values, residual })
}

/// u(x) = u_R(x) + η Σ_c 𝔾(x, c; Γ_R) w_c u(c).
pub fn extend_stage2(sol: &GridSolution, arc_sol: &GridSolution, x: Point, nested: &NestedGreen) -> Result<C64> {
    let rough = nested.rough.as_ref().ok_or_else(|| Error::Config("stage 2 was not built".into()))?;
    if sol.stage != StageKind::Rough || arc_sol.stage != StageKind::Arc {
        return Err(Error::Config("extend_stage2 needs stage-2 and stage-1 solutions".into()));
    }
    let eta = nested.eta();
    let mut v = extend_stage1(arc_sol, x, nested)?;
    // 𝔾(x, c; Γ_R) = 𝔾(x, c; Γ₀) − η Σ_k 𝔾(x, b_k; Γ₀) w_k X₁₂[k, c]
    let g1: Vec<C64> = arc_sol.mesh.cells.iter().map(|b| nested.kernel.at(x, b)).collect::<Result<_>>()?;
    for (ci, c) in sol.mesh.cells.iter().enumerate() {
        let mut gr = nested.kernel.at(x, c)?;
        for (k, b) in arc_sol.mesh.cells.iter().enumerate() {
            gr -= g1[k] * (eta * b.weight) * rough.x12[(k, ci)];
        }
        v += gr * (eta * c.weight) * sol.values[ci];
    }
    Ok(v)
}
