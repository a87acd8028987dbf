//! The full forward model: both volume stages, then the obstacle, then
//! near-field data on the receiver segment. Also the near-singular source
//! sequence used in the uniqueness argument and the mixed reciprocity check.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result, Stage};
use crate::geometry::{classify_point, InterfaceProfile, Layer, ObstacleCurve, Point, SceneGeometry};
use crate::layered_green::{free_field, MediumParams, SourceSpec};
use crate::ls_volume::{FieldPart, NestedGreen, PreparedSources, StageKind, VolumeSettings};
use crate::obstacle::{assemble_bie, assemble_penetrable, BoundaryCondition, BoundaryDensity, BoundarySolver, PenetrableSolution, PenetrableSolver};
use crate::specfun::{bessel_j0j1_y0y1, fundamental_solution_grad};

type C64 = Complex64;

/// Obstacle description and its discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleConfig {
    pub curve: ObstacleCurve,
    pub condition: BoundaryCondition,
    /// M: the boundary carries 2M nodes.
    pub nodes: usize,
    /// Cell size and subsampling of the mesh of D (penetrable only).
    pub cell_size: f64,
    pub subsample: usize,
}

impl ObstacleConfig {
    pub fn new(curve: ObstacleCurve, condition: BoundaryCondition) -> Self {
        ObstacleConfig { curve, condition, nodes: 32, cell_size: 0.05, subsample: 4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub medium: MediumParams,
    pub profile: InterfaceProfile,
    /// Arc radius R; `None` picks the default from the profile.
    pub arc_radius: Option<f64>,
    pub obstacle: Option<ObstacleConfig>,
    pub volume: VolumeSettings,
    /// Interface used by the field: Γ₀, Γ_R or Γ.
    pub level: StageKind,
}

impl SceneConfig {
    pub fn new(medium: MediumParams, profile: InterfaceProfile) -> Self {
        SceneConfig {
            medium,
            profile,
            arc_radius: None,
            obstacle: None,
            volume: VolumeSettings { cell_size: 0.1, subsample: 2, tol: 1e-8 },
            level: StageKind::Rough,
        }
    }

    pub fn geometry(&self) -> Result<SceneGeometry> {
        self.medium.validate()?;
        if !(self.volume.cell_size > 0.0 && self.volume.tol > 0.0 && self.volume.subsample >= 1) {
            return Err(Error::Config(format!("invalid volume settings {:?}", self.volume)));
        }
        SceneGeometry::new(self.profile.clone(), self.arc_radius, self.obstacle.map(|o| o.curve))
    }
}

#[derive(Debug, Clone)]
pub enum ObstacleModel {
    Boundary(BoundarySolver),
    Volume(PenetrableSolver),
}

/// An assembled scene: volume stages and obstacle operator, independent of
/// the incident field.
#[derive(Debug, Clone)]
pub struct Scene {
    pub config: SceneConfig,
    pub geometry: SceneGeometry,
    pub nested: NestedGreen,
    pub obstacle: Option<ObstacleModel>,
}

impl Scene {
    pub fn build(config: &SceneConfig) -> Result<Scene> {
        let geometry = config.geometry()?;
        let nested = NestedGreen::build(config.medium, &geometry, config.volume, config.level)?;
        let obstacle = match &config.obstacle {
            None => None,
            Some(o) => Some(
                match o.condition {
                    BoundaryCondition::Penetrable { n_re, n_im } => assemble_penetrable(
                        &geometry,
                        C64::new(n_re, n_im),
                        o.cell_size,
                        o.subsample,
                        &nested,
                        config.level,
                    )
                    .map(ObstacleModel::Volume),
                    _ => assemble_bie(&o.curve, o.nodes, o.condition, &nested, config.level).map(ObstacleModel::Boundary),
                }
                .map_err(|e| e.in_stage(Stage::Obstacle))?,
            ),
        };
        Ok(Scene { config: config.clone(), geometry, nested, obstacle })
    }

    pub fn level(&self) -> StageKind {
        self.config.level
    }

    /// Bounding boxes of the volume meshes (cells included whole).
    pub fn mesh_boxes(&self) -> Vec<(Point, Point)> {
        let mut meshes = Vec::new();
        if let Some(a) = &self.nested.arc {
            meshes.push(&a.mesh);
        }
        if let Some(r) = &self.nested.rough {
            meshes.push(&r.mesh);
        }
        if let Some(ObstacleModel::Volume(v)) = &self.obstacle {
            meshes.push(&v.medium.mesh);
        }
        meshes
            .into_iter()
            .filter(|m| !m.is_empty())
            .map(|m| {
                let h = 0.5 * m.cell_size;
                m.cells.iter().fold(
                    (Point::new(f64::INFINITY, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
                    |(lo, hi), c| {
                        (
                            Point::new(lo.x1.min(c.center.x1 - h), lo.x2.min(c.center.x2 - h)),
                            Point::new(hi.x1.max(c.center.x1 + h), hi.x2.max(c.center.x2 + h)),
                        )
                    },
                )
            })
            .collect()
    }

    fn region(&self, p: Point) -> Result<(Layer, f64)> {
        let m = self.config.medium;
        let r = classify_point(p, &self.config.profile, m.kappa1, m.kappa2);
        if r.0 == Layer::OnInterface {
            return Err(Error::Domain(format!("point ({}, {}) lies on the interface", p.x1, p.x2)));
        }
        Ok(r)
    }

    /// Solves for all sources at once.
    pub fn solve(&self, sources: &[SourceSpec]) -> Result<FieldEvaluator<'_>> {
        for s in sources {
            self.region(s.position)?;
            if let Some(curve) = self.geometry.obstacle {
                if curve.contains(s.position) {
                    return Err(Error::Geometry("source inside the obstacle".into()));
                }
            }
        }
        let stage = match self.level() {
            StageKind::Planar => Stage::Planar,
            StageKind::Arc => Stage::Arc,
            StageKind::Rough => Stage::Rough,
        };
        let incident = self.nested.prepare(sources, self.level()).map_err(|e| e.in_stage(stage))?;
        let (correction, response) = match &self.obstacle {
            None => (None, ObstacleResponse::None),
            Some(ObstacleModel::Boundary(b)) => {
                let d = b.solve(&self.nested, &incident).map_err(|e| e.in_stage(Stage::Obstacle))?;
                (Some(b.potential(&d)?), ObstacleResponse::Boundary(d))
            }
            Some(ObstacleModel::Volume(v)) => {
                let d = v.solve(&self.nested, &incident).map_err(|e| e.in_stage(Stage::Obstacle))?;
                (Some(v.potential(&d)?), ObstacleResponse::Volume(d))
            }
        };
        Ok(FieldEvaluator { scene: self, sources: sources.to_vec(), incident, correction, response })
    }
}

/// Per-source obstacle unknowns.
#[derive(Debug, Clone)]
pub enum ObstacleResponse {
    None,
    Boundary(Vec<BoundaryDensity>),
    Volume(Vec<PenetrableSolution>),
}

/// Total and scattered fields of a set of sources in a solved scene.
/// Matrices are targets × sources.
#[derive(Debug, Clone)]
pub struct FieldEvaluator<'a> {
    pub scene: &'a Scene,
    pub sources: Vec<SourceSpec>,
    incident: PreparedSources,
    correction: Option<PreparedSources>,
    pub response: ObstacleResponse,
}

impl FieldEvaluator<'_> {
    fn check_targets(&self, targets: &[Point]) -> Result<()> {
        if let (Some(curve), Some(ObstacleModel::Boundary(_))) = (self.scene.geometry.obstacle, &self.scene.obstacle) {
            if let Some(p) = targets.iter().find(|p| curve.contains(**p)) {
                return Err(Error::Domain(format!("target ({}, {}) lies inside the obstacle", p.x1, p.x2)));
            }
        }
        Ok(())
    }

    fn with_correction(&self, mut m: Mat<C64>, targets: &[Point]) -> Result<Mat<C64>> {
        if let Some(c) = &self.correction {
            m += &self.scene.nested.evaluate_prepared(c, targets, FieldPart::Total).map_err(|e| e.in_stage(Stage::Forward))?;
        }
        Ok(m)
    }

    /// u = 𝕌(·, x_s; Γ) + w.
    pub fn total(&self, targets: &[Point]) -> Result<Mat<C64>> {
        self.check_targets(targets)?;
        let m = self.scene.nested.evaluate_prepared(&self.incident, targets, FieldPart::Total).map_err(|e| e.in_stage(Stage::Forward))?;
        self.with_correction(m, targets)
    }

    /// u − u^inc, where u^inc is the free field of the source's own region
    /// and is only subtracted at targets in that region.
    pub fn scattered(&self, targets: &[Point]) -> Result<Mat<C64>> {
        self.check_targets(targets)?;
        let nested = &self.scene.nested;
        let mut m = nested.evaluate_prepared(&self.incident, targets, FieldPart::Remainder).map_err(|e| e.in_stage(Stage::Forward))?;
        let medium = self.scene.config.medium;
        for (t, &x) in targets.iter().enumerate() {
            let (lx, _) = self.scene.region(x)?;
            for (j, s) in self.sources.iter().enumerate() {
                let y = s.position;
                let (ly, ky) = self.scene.region(y)?;
                // the remainder already removed Φ_κ₀(y) when x, y share a side of x₂ = 0
                let flat_same = (x.x2 > 0.0) == (y.x2 > 0.0);
                let k0 = medium.kappa_at(y.x2);
                let same = lx == ly;
                if flat_same && same && k0 == ky {
                    continue;
                }
                if flat_same {
                    m[(t, j)] += free_field(k0, x, s)?;
                }
                if same {
                    m[(t, j)] -= free_field(ky, x, s)?;
                }
            }
        }
        self.with_correction(m, targets)
    }

    /// Single total value for source `j`.
    pub fn total_at(&self, x: Point, j: usize) -> Result<C64> {
        Ok(self.total(&[x])?[(0, j)])
    }

    pub fn scattered_at(&self, x: Point, j: usize) -> Result<C64> {
        Ok(self.scattered(&[x])?[(0, j)])
    }
}

/// One row of synthesized near-field data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NearFieldRecord {
    pub source_index: usize,
    pub source: Point,
    pub receiver: Point,
    pub value: C64,
}

/// Solves for one source and samples u^s at the receivers.
pub fn forward_solve<'a>(scene: &'a Scene, source: &SourceSpec, receivers: &[Point]) -> Result<(FieldEvaluator<'a>, Vec<NearFieldRecord>)> {
    let ev = scene.solve(std::slice::from_ref(source))?;
    let us = ev.scattered(receivers)?;
    let rows = receivers
        .iter()
        .enumerate()
        .map(|(i, &x)| NearFieldRecord { source_index: 0, source: source.position, receiver: x, value: us[(i, 0)] })
        .collect();
    Ok((ev, rows))
}

/// u^s for every source and receiver, source-major.
pub fn synthesize_dataset(scene: &Scene, sources: &[SourceSpec], receivers: &[Point]) -> Result<Vec<NearFieldRecord>> {
    let ev = scene.solve(sources)?;
    let us = ev.scattered(receivers)?;
    let mut rows = Vec::with_capacity(sources.len() * receivers.len());
    for (j, s) in sources.iter().enumerate() {
        for (i, &x) in receivers.iter().enumerate() {
            rows.push(NearFieldRecord { source_index: j, source: s.position, receiver: x, value: us[(i, j)] });
        }
    }
    Ok(rows)
}

/// Source sequence z_n = z* + (δ₀/n)ν(z*) approaching the interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupSequenceConfig {
    /// Abscissa of z* on Γ.
    pub z_star_x1: f64,
    pub delta0: f64,
    pub eps0: f64,
    pub n_max: usize,
    /// Rings and sectors of the polar sample mesh of B_ε₀(z*) ∩ Ω₂.
    pub radial: usize,
    pub angular: usize,
}

impl BlowupSequenceConfig {
    pub fn new(z_star_x1: f64, delta0: f64, eps0: f64, n_max: usize) -> Self {
        BlowupSequenceConfig { z_star_x1, delta0, eps0, n_max, radial: 240, angular: 256 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.delta0 > 0.0 && self.delta0 < self.eps0) {
            return Err(Error::Config(format!("need 0 < δ₀ < ε₀, got δ₀ = {}, ε₀ = {}", self.delta0, self.eps0)));
        }
        if self.n_max < 1 || self.radial < 4 || self.angular < 8 {
            return Err(Error::Config("blow-up sequence needs n_max ≥ 1 and a non-trivial mesh".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupRow {
    pub n: usize,
    pub norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub rows: Vec<BlowupRow>,
    /// N_{n_max}/N_4 (or N_{n_max}/N_1 when n_max < 4).
    pub ratio: f64,
    /// Least-squares slope of ln N_n against ln n over n ≥ 8.
    pub exponent: f64,
    /// Smallest n₀ with N_n strictly increasing on n₀..=n_max.
    pub increasing_from: usize,
    pub warnings: Vec<String>,
}

/// N_n = ‖Σ_ℓ ν_ℓ(z*) ∂_ℓΦ_κ₁(·, z_n)‖² over B_ε₀(z*) ∩ Ω₂ by midpoint
/// quadrature on a polar mesh graded geometrically towards z*.
pub fn blowup_experiment(profile: &InterfaceProfile, kappa1: f64, cfg: &BlowupSequenceConfig) -> Result<BlowupReport> {
    cfg.validate()?;
    let zs = Point::new(cfg.z_star_x1, profile.f(cfg.z_star_x1));
    let nu = profile.upward_normal(cfg.z_star_x1);
    let rmin = 1e-7 * cfg.eps0;
    let q = (cfg.eps0 / rmin).powf(1.0 / cfg.radial as f64);
    let dth = 2.0 * PI / cfg.angular as f64;
    // (center, weight, size)
    let mut cells = Vec::new();
    for k in 0..cfg.radial {
        let (r0, r1) = (rmin * q.powi(k as i32), rmin * q.powi(k as i32 + 1));
        let rc = 0.5 * (r0 + r1);
        for j in 0..cfg.angular {
            let th = (j as f64 + 0.5) * dth;
            let c = zs + Point::new(th.cos(), th.sin()) * rc;
            if c.x2 < profile.f(c.x1) {
                cells.push((c, 0.5 * (r1 * r1 - r0 * r0) * dth, (r1 - r0).max(rc * dth)));
            }
        }
    }
    let mut warnings = Vec::new();
    let rows: Vec<BlowupRow> = (1..=cfg.n_max)
        .into_par_iter()
        .map(|n| {
            let zn = zs + nu * (cfg.delta0 / n as f64);
            let mut acc = 0.0;
            for &(c, w, _) in &cells {
                let g = nu.x1 * fundamental_solution_grad(kappa1, c, zn, 1)? + nu.x2 * fundamental_solution_grad(kappa1, c, zn, 2)?;
                acc += w * g.norm_sqr();
            }
            Ok(BlowupRow { n, norm_sq: acc })
        })
        .collect::<Result<_>>()?;
    for n in 1..=cfg.n_max {
        let zn = zs + nu * (cfg.delta0 / n as f64);
        if cells.iter().any(|&(c, _, h)| c.dist(zn) < 2.0 * h) {
            warnings.push(format!("n = {n}: sample mesh is coarse next to z_n"));
        }
    }
    let base = rows[(4.min(cfg.n_max)) - 1].norm_sq;
    let ratio = rows[cfg.n_max - 1].norm_sq / base;
    let mut increasing_from = cfg.n_max;
    while increasing_from > 1 && rows[increasing_from - 2].norm_sq < rows[increasing_from - 1].norm_sq {
        increasing_from -= 1;
    }
    let fit: Vec<(f64, f64)> = rows.iter().filter(|r| r.n >= 8).map(|r| ((r.n as f64).ln(), r.norm_sq.ln())).collect();
    let exponent = if fit.len() >= 2 {
        let nf = fit.len() as f64;
        let (sx, sy) = fit.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mx, my) = (sx / nf, sy / nf);
        let sxy: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = fit.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    Ok(BlowupReport { rows, ratio, exponent, increasing_from, warnings })
}

/// Both sides of the mixed reciprocity relation
/// ũ(x_s¹, x_s², ℓ) = lim ∫_{∂B_ε(x_s²)} [∂_ν ũ^inc(y, x_s², ℓ) u(y, x_s¹) − ∂_ν u(y, x_s¹) ũ^inc(y, x_s², ℓ)] ds(y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixedReciprocity {
    pub left: C64,
    pub right: C64,
    pub mismatch: f64,
}

/// Points on ∂B_ε for the circle integral.
pub const RECIPROCITY_POINTS: usize = 64;
/// Step of the central differences for ∂_ν u.
pub const RECIPROCITY_FD_STEP: f64 = 1e-4;

/// ∂_ν of ∂_{x_ℓ}Φ_κ(x, y) at x.
fn dipole_normal_derivative(kappa: f64, x: Point, y: Point, l: usize, nu: Point) -> Result<C64> {
    let d = x - y;
    let r = d.norm();
    let b = bessel_j0j1_y0y1(kappa * r)?;
    let (h0, h1) = (b.h0(), b.h1());
    let dh1 = h0 - h1 / (kappa * r);
    let pre = C64::new(0.0, -0.25 * kappa);
    let dl = d.comp(l);
    let dn = d.dot(nu);
    Ok(pre * (kappa * dh1 * (dn * dl / (r * r)) + h1 * (nu.comp(l) / r - dn * dl / (r * r * r))))
}

pub fn mixed_reciprocity_check(scene: &Scene, xs1: Point, xs2: Point, l: usize, eps: f64) -> Result<MixedReciprocity> {
    let dip = SourceSpec::dipole(xs2, l)?;
    let mono = SourceSpec::monopole(xs1);
    let (_, kappa) = scene.region(xs2)?;
    scene.region(xs1)?;
    if !(eps > 0.0) || xs1.dist(xs2) <= 2.0 * eps {
        return Err(Error::Geometry(format!("ε = {eps} is too large for the source pair")));
    }
    let npts = RECIPROCITY_POINTS;
    let h = RECIPROCITY_FD_STEP;
    let ring: Vec<(Point, Point)> = (0..npts)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / npts as f64;
            let e = Point::new(t.cos(), t.sin());
            // normal pointing into the ball
            (xs2 + e * eps, -e)
        })
        .collect();
    let mut probe = Vec::with_capacity(3 * npts);
    for &(y, nu) in &ring {
        probe.extend([y, y + nu * h, y - nu * h]);
    }
    for p in &probe {
        let (reg, _) = scene.region(*p)?;
        let near_obstacle = scene.geometry.obstacle.is_some_and(|c| c.contains(*p));
        if reg != scene.region(xs2)?.0 || near_obstacle {
            return Err(Error::Geometry(format!("B_ε(x_s²) with ε = {eps} meets a scatterer")));
        }
    }
    let left = scene.solve(std::slice::from_ref(&dip))?.total_at(xs1, 0)?;
    let u = scene.solve(std::slice::from_ref(&mono))?.total(&probe)?;
    let mut right = C64::new(0.0, 0.0);
    for (k, &(y, nu)) in ring.iter().enumerate() {
        let uy = u[(3 * k, 0)];
        let dnu = (u[(3 * k + 1, 0)] - u[(3 * k + 2, 0)]) / (2.0 * h);
        let vi = free_field(kappa, y, &dip)?;
        let dvi = dipole_normal_derivative(kappa, y, xs2, l, nu)?;
        right += dvi * uy - dnu * vi;
    }
    right *= 2.0 * PI * eps / npts as f64;
    Ok(MixedReciprocity { left, right, mismatch: (left - right).norm() / left.norm() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_scene(kappa: f64) -> SceneConfig {
        SceneConfig::new(MediumParams::new(kappa, kappa).unwrap(), InterfaceProfile::flat())
    }

    #[test]
    fn trivial_contrast_has_no_scattered_field() {
        let scene = Scene::build(&free_scene(1.5)).unwrap();
        let rx: Vec<Point> = (0..11).map(|k| Point::new(-1.0 + 0.2 * k as f64, 0.5)).collect();
        let rows = synthesize_dataset(&scene, &[SourceSpec::monopole(Point::new(0.3, 0.4))], &rx).unwrap();
        assert_eq!(rows.len(), 11);
        assert!(rows.iter().all(|r| r.value.norm() <= 1e-7));
    }

    #[test]
    fn flat_interface_scattered_field_is_planar() {
        let mut cfg = SceneConfig::new(MediumParams::new(1.0, 2.0).unwrap(), InterfaceProfile::flat());
        cfg.level = StageKind::Planar;
        let scene = Scene::build(&cfg).unwrap();
        let y = Point::new(0.0, 0.5);
        let src = SourceSpec::monopole(y);
        let rx = [Point::new(0.3, 0.5), Point::new(-0.2, -0.4)];
        let (ev, rows) = forward_solve(&scene, &src, &rx).unwrap();
        let g = &scene.nested.kernel.green;
        assert!((rows[0].value - g.green_planar_scattered(rx[0], y).unwrap()).norm() < 1e-14);
        // below the interface nothing is subtracted
        assert!((rows[1].value - g.green_planar_total(rx[1], y).unwrap()).norm() < 1e-14);
        assert!((ev.total_at(rx[0], 0).unwrap() - g.green_planar_total(rx[0], y).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn dataset_rows_are_source_major_and_permute_with_sources() {
        let mut cfg = SceneConfig::new(MediumParams::new(1.0, 1.5).unwrap(), InterfaceProfile::flat());
        cfg.level = StageKind::Planar;
        let scene = Scene::build(&cfg).unwrap();
        let s = [SourceSpec::monopole(Point::new(-0.3, 0.6)), SourceSpec::monopole(Point::new(0.4, 0.7))];
        let rx: Vec<Point> = (0..3).map(|k| Point::new(k as f64 * 0.3, 0.5)).collect();
        let a = synthesize_dataset(&scene, &s, &rx).unwrap();
        let b = synthesize_dataset(&scene, &[s[1], s[0]], &rx).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a.iter().map(|r| r.source_index).collect::<Vec<_>>(), vec![0, 0, 0, 1, 1, 1]);
        for i in 0..3 {
            assert_eq!(a[i].value, b[3 + i].value);
            assert_eq!(a[3 + i].value, b[i].value);
        }
    }

    #[test]
    fn superposition_of_sources_with_obstacle() {
        let mut cfg = free_scene(2.0);
        cfg.obstacle = Some(ObstacleConfig::new(
            ObstacleCurve::Circle { center: Point::new(0.0, -3.0), radius: 0.5 },
            BoundaryCondition::SoundSoft,
        ));
        let scene = Scene::build(&cfg).unwrap();
        let s = [SourceSpec::monopole(Point::new(-0.3, 0.6)), SourceSpec::monopole(Point::new(0.4, 0.7))];
        let ev = scene.solve(&s).unwrap();
        let x = [Point::new(0.1, 1.0)];
        let both = ev.scattered(&x).unwrap();
        let single: Vec<C64> = s.iter().map(|src| scene.solve(std::slice::from_ref(src)).unwrap().scattered(&x).unwrap()[(0, 0)]).collect();
        assert!((both[(0, 0)] - single[0]).norm() < 1e-15 && (both[(0, 1)] - single[1]).norm() < 1e-15);
        assert!(ev.total(&[Point::new(0.0, -3.0)]).is_err());
    }

    #[test]
    fn blowup_norm_grows_and_respects_symmetries() {
        let profile = InterfaceProfile::single(0.0, 0.2, 0.3);
        let cfg = BlowupSequenceConfig { radial: 120, angular: 128, ..BlowupSequenceConfig::new(0.05, 0.19, 0.2, 16) };
        let rep = blowup_experiment(&profile, 1.0, &cfg).unwrap();
        assert!(rep.rows[15].norm_sq > rep.rows[0].norm_sq);
        assert!(rep.increasing_from <= 8, "{rep:?}");
        let far = blowup_experiment(&profile, 1.0, &BlowupSequenceConfig { delta0: 0.38, eps0: 0.4, ..cfg }).unwrap();
        let near = blowup_experiment(&profile, 1.0, &BlowupSequenceConfig { eps0: 0.4, ..cfg }).unwrap();
        for (a, b) in far.rows.iter().zip(&near.rows) {
            assert!(a.norm_sq < b.norm_sq);
        }
        let flat = InterfaceProfile::flat();
        let a = blowup_experiment(&flat, 1.0, &BlowupSequenceConfig { z_star_x1: 0.0, ..cfg }).unwrap();
        let b = blowup_experiment(&flat, 1.0, &BlowupSequenceConfig { z_star_x1: 3.0, ..cfg }).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert!((x.norm_sq - y.norm_sq).abs() < 1e-10 * x.norm_sq);
        }
        assert!(blowup_experiment(&flat, 1.0, &BlowupSequenceConfig { delta0: 0.3, ..cfg }).is_err());
    }

    #[test]
    fn dipole_normal_derivative_matches_differences() {
        let (k, x, y, nu) = (1.7, Point::new(0.3, -0.2), Point::new(-0.1, 0.4), Point::new(0.6, 0.8));
        for l in 1..=2 {
            let h = 1e-5;
            let fd = (fundamental_solution_grad(k, x + nu * h, y, l).unwrap() - fundamental_solution_grad(k, x - nu * h, y, l).unwrap()) / (2.0 * h);
            assert!((fd - dipole_normal_derivative(k, x, y, l, nu).unwrap()).norm() < 1e-7);
        }
    }

    #[test]
    fn mixed_reciprocity_in_free_space() {
        let scene = Scene::build(&free_scene(1.0)).unwrap();
        let (a, b) = (Point::new(-0.5, 0.8), Point::new(0.6, 1.1));
        for l in 1..=2 {
            let r = mixed_reciprocity_check(&scene, a, b, l, 1e-2).unwrap();
            assert!(r.mismatch < 1e-3, "{r:?}");
        }
        assert!(mixed_reciprocity_check(&scene, a, b, 1, 1.0).is_err());
    }
}
