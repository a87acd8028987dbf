//! Scene geometry: the rough interface Γ = {x₂ = f(x₁)}, the flat line Γ₀,
//! the arc interface Γ_R, the volume regions B1/B2 and their cell meshes,
//! obstacle curves and the receiver segment.
//!
//! B1 is the half-disc between the lower arc and Γ₀, B2 the region between
//! the lower arc and Γ:
//!
//! ```text
//! B1 = {|x₁| < R, −√(R² − x₁²) < x₂ < 0}
//! B2 = {|x₁| < R, −√(R² − x₁²) < x₂ < f(x₁)}
//! ```

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x1: f64,
    pub x2: f64,
}

impl Point {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Point { x1, x2 }
    }

    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2
    }

    /// Component ℓ ∈ {1, 2}.
    pub fn comp(self, l: usize) -> f64 {
        if l == 1 {
            self.x1
        } else {
            self.x2
        }
    }

    /// Unit vector e_ℓ.
    pub fn unit(l: usize) -> Point {
        if l == 1 {
            Point::new(1.0, 0.0)
        } else {
            Point::new(0.0, 1.0)
        }
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x1 + o.x1, self.x2 + o.x2)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x1 - o.x1, self.x2 - o.x2)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x1 * s, self.x2 * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x1, -self.x2)
    }
}

/// One smooth bump `height·exp(1 − 1/(1 − t²))`, `t = (x₁ − center)/halfwidth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: f64,
    pub halfwidth: f64,
    pub height: f64,
}

impl Bump {
    /// Value and first two derivatives in x₁.
    fn eval3(&self, x1: f64) -> [f64; 3] {
        let t = (x1 - self.center) / self.halfwidth;
        if t.abs() >= 1.0 {
            return [0.0; 3];
        }
        let u = 1.0 - t * t;
        let e = (1.0 - 1.0 / u).exp();
        if e == 0.0 {
            return [0.0; 3];
        }
        let g1 = -2.0 * t / (u * u);
        let g2 = -2.0 / (u * u) - 8.0 * t * t / (u * u * u);
        let w = self.halfwidth;
        [
            self.height * e,
            self.height * e * g1 / w,
            self.height * e * (g1 * g1 + g2) / (w * w),
        ]
    }
}

/// Interface profile f as a finite sum of smooth compactly supported bumps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceProfile {
    #[serde(default)]
    pub bumps: Vec<Bump>,
}

impl InterfaceProfile {
    pub fn flat() -> Self {
        InterfaceProfile { bumps: Vec::new() }
    }

    pub fn single(center: f64, halfwidth: f64, height: f64) -> Self {
        InterfaceProfile { bumps: vec![Bump { center, halfwidth, height }] }
    }

    pub fn validate(&self) -> Result<()> {
        for b in &self.bumps {
            if !(b.halfwidth > 0.0) || !b.center.is_finite() || !b.height.is_finite() || !b.halfwidth.is_finite() {
                return Err(Error::Config(format!("invalid bump {b:?}: halfwidth must be positive and all fields finite")));
            }
        }
        Ok(())
    }

    pub fn is_flat(&self) -> bool {
        self.bumps.iter().all(|b| b.height == 0.0)
    }

    pub fn f(&self, x1: f64) -> f64 {
        self.bumps.iter().map(|b| b.eval3(x1)[0]).sum()
    }

    pub fn df(&self, x1: f64) -> f64 {
        self.bumps.iter().map(|b| b.eval3(x1)[1]).sum()
    }

    pub fn d2f(&self, x1: f64) -> f64 {
        self.bumps.iter().map(|b| b.eval3(x1)[2]).sum()
    }

    /// Smallest ρ with f ≡ 0 outside [−ρ, ρ].
    pub fn support_radius(&self) -> f64 {
        self.bumps
            .iter()
            .filter(|b| b.height != 0.0)
            .map(|b| b.center.abs() + b.halfwidth)
            .fold(0.0, f64::max)
    }

    /// (min f, max f) over the line, by dense sampling with local refinement.
    pub fn extrema(&self) -> (f64, f64) {
        if self.is_flat() {
            return (0.0, 0.0);
        }
        let rho = self.support_radius();
        let n = 4000;
        let mut lo = (0.0, 0.0);
        let mut hi = (0.0, 0.0);
        let mut samples: Vec<f64> = (0..=n).map(|i| -rho + 2.0 * rho * i as f64 / n as f64).collect();
        samples.extend(self.bumps.iter().map(|b| b.center));
        for &x in &samples {
            let v = self.f(x);
            if v < lo.1 {
                lo = (x, v);
            }
            if v > hi.1 {
                hi = (x, v);
            }
        }
        let step = 2.0 * rho / n as f64;
        let refine = |x0: f64, sign: f64| {
            let (mut a, mut b) = (x0 - step, x0 + step);
            for _ in 0..80 {
                let m1 = a + (b - a) * 0.381_966_011_250_105;
                let m2 = b - (b - a) * 0.381_966_011_250_105;
                if sign * self.f(m1) > sign * self.f(m2) {
                    b = m2;
                } else {
                    a = m1;
                }
            }
            self.f(0.5 * (a + b))
        };
        (refine(lo.0, -1.0).min(lo.1), refine(hi.0, 1.0).max(hi.1))
    }

    /// max |f|.
    pub fn max_abs(&self) -> f64 {
        let (lo, hi) = self.extrema();
        lo.abs().max(hi.abs())
    }

    /// Upward unit normal (−f′, 1)/√(1 + f′²) at (x₁, f(x₁)).
    pub fn upward_normal(&self, x1: f64) -> Point {
        let d = self.df(x1);
        let s = (1.0 + d * d).sqrt();
        Point::new(-d / s, 1.0 / s)
    }
}

/// Default arc radius 2·(support radius + max|f|); 1 for a flat profile.
pub fn default_arc_radius(profile: &InterfaceProfile) -> f64 {
    let r = 2.0 * (profile.support_radius() + profile.max_abs());
    if r > 0.0 {
        r
    } else {
        1.0
    }
}

/// Γ_R: x₂ = 0 for |x₁| ≥ R, the lower half-circle of radius R otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcInterface {
    pub radius: f64,
}

impl ArcInterface {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Config(format!("arc radius must be positive, got {radius}")));
        }
        Ok(ArcInterface { radius })
    }

    pub fn height(&self, x1: f64) -> f64 {
        let r = self.radius;
        if x1.abs() >= r {
            0.0
        } else {
            -((r - x1) * (r + x1)).sqrt()
        }
    }

    /// R must exceed the support radius and f must stay strictly above the arc.
    pub fn validate(&self, profile: &InterfaceProfile) -> Result<()> {
        let rho = profile.support_radius();
        if !(self.radius > rho) {
            return Err(Error::Geometry(format!(
                "arc radius {} must exceed the interface support radius {rho}",
                self.radius
            )));
        }
        if rho > 0.0 {
            let n = 2000;
            for i in 0..=n {
                let x = -rho + 2.0 * rho * i as f64 / n as f64;
                if profile.f(x) <= self.height(x) {
                    return Err(Error::Geometry(format!("interface dips below the arc near x1 = {x}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Upper,
    Lower,
    OnInterface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObstacleKind {
    Circle,
    Kite,
}

/// A C² closed obstacle boundary, parametrized counter-clockwise over [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleCurve {
    Circle { center: Point, radius: f64 },
    /// (cos t + 0.65 cos 2t − 0.65, 1.5 sin t)·scale + center.
    Kite { center: Point, scale: f64 },
}

/// Nyström nodes t_j = jπ/M, j = 0..2M, with geometric data.
#[derive(Debug, Clone)]
pub struct BoundaryNodes {
    pub m: usize,
    pub t: Vec<f64>,
    pub pos: Vec<Point>,
    pub deriv: Vec<Point>,
    pub second: Vec<Point>,
    pub normal: Vec<Point>,
    pub jac: Vec<f64>,
}

impl BoundaryNodes {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Trapezoid weight π/M.
    pub fn step(&self) -> f64 {
        PI / self.m as f64
    }
}

impl ObstacleCurve {
    pub fn kind(&self) -> ObstacleKind {
        match self {
            ObstacleCurve::Circle { .. } => ObstacleKind::Circle,
            ObstacleCurve::Kite { .. } => ObstacleKind::Kite,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ObstacleCurve::Circle { radius, center } => radius > 0.0 && center.x1.is_finite() && center.x2.is_finite(),
            ObstacleCurve::Kite { scale, center } => scale > 0.0 && center.x1.is_finite() && center.x2.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid obstacle curve {self:?}")))
        }
    }

    /// x(t), x′(t), x″(t).
    pub fn eval(&self, t: f64) -> [Point; 3] {
        let (s, c) = t.sin_cos();
        match *self {
            ObstacleCurve::Circle { center, radius: a } => [
                center + Point::new(a * c, a * s),
                Point::new(-a * s, a * c),
                Point::new(-a * c, -a * s),
            ],
            ObstacleCurve::Kite { center, scale: k } => {
                let (s2, c2) = (2.0 * t).sin_cos();
                [
                    center + Point::new(c + 0.65 * c2 - 0.65, 1.5 * s) * k,
                    Point::new(-s - 1.3 * s2, 1.5 * c) * k,
                    Point::new(-c - 2.6 * c2, -1.5 * s) * k,
                ]
            }
        }
    }

    pub fn point(&self, t: f64) -> Point {
        self.eval(t)[0]
    }

    /// Outward unit normal (x₂′, −x₁′)/|x′|.
    pub fn normal(&self, t: f64) -> Point {
        let d = self.eval(t)[1];
        Point::new(d.x2, -d.x1) * (1.0 / d.norm())
    }

    pub fn nodes(&self, m: usize) -> Result<BoundaryNodes> {
        obstacle_nodes(self, m)
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            ObstacleCurve::Circle { radius, .. } => 2.0 * radius,
            ObstacleCurve::Kite { .. } => {
                let pts: Vec<Point> = (0..512).map(|j| self.point(2.0 * PI * j as f64 / 512.0)).collect();
                let mut d: f64 = 0.0;
                for (i, p) in pts.iter().enumerate() {
                    for q in &pts[i + 1..] {
                        d = d.max(p.dist(*q));
                    }
                }
                d
            }
        }
    }

    /// Bounding box (lower-left, upper-right).
    pub fn bounding_box(&self) -> (Point, Point) {
        match *self {
            ObstacleCurve::Circle { center, radius } => {
                (center - Point::new(radius, radius), center + Point::new(radius, radius))
            }
            ObstacleCurve::Kite { .. } => {
                let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
                let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
                for j in 0..2048 {
                    let p = self.point(2.0 * PI * j as f64 / 2048.0);
                    lo = Point::new(lo.x1.min(p.x1), lo.x2.min(p.x2));
                    hi = Point::new(hi.x1.max(p.x1), hi.x2.max(p.x2));
                }
                let pad = 1e-3 * self.diameter();
                (lo - Point::new(pad, pad), hi + Point::new(pad, pad))
            }
        }
    }

    /// Interior test (winding number against a fine polygon for the kite).
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            ObstacleCurve::Circle { center, radius } => p.dist(center) < radius,
            ObstacleCurve::Kite { .. } => {
                let n = 2048;
                let mut wind = 0i32;
                let mut prev = self.point(0.0);
                for j in 1..=n {
                    let cur = self.point(2.0 * PI * j as f64 / n as f64);
                    if prev.x2 <= p.x2 {
                        if cur.x2 > p.x2 && cross(prev, cur, p) > 0.0 {
                            wind += 1;
                        }
                    } else if cur.x2 <= p.x2 && cross(prev, cur, p) < 0.0 {
                        wind -= 1;
                    }
                    prev = cur;
                }
                wind != 0
            }
        }
    }
}

fn cross(a: Point, b: Point, p: Point) -> f64 {
    (b.x1 - a.x1) * (p.x2 - a.x2) - (p.x1 - a.x1) * (b.x2 - a.x2)
}

/// 2M equispaced parameter nodes with positions, normals and Jacobians.
pub fn obstacle_nodes(curve: &ObstacleCurve, m: usize) -> Result<BoundaryNodes> {
    if m < 4 {
        return Err(Error::Config(format!("need M >= 4 boundary half-nodes, got {m}")));
    }
    let n = 2 * m;
    let mut nodes = BoundaryNodes {
        m,
        t: Vec::with_capacity(n),
        pos: Vec::with_capacity(n),
        deriv: Vec::with_capacity(n),
        second: Vec::with_capacity(n),
        normal: Vec::with_capacity(n),
        jac: Vec::with_capacity(n),
    };
    for j in 0..n {
        let t = PI * j as f64 / m as f64;
        let [x, d, dd] = curve.eval(t);
        let jac = d.norm();
        nodes.t.push(t);
        nodes.pos.push(x);
        nodes.deriv.push(d);
        nodes.second.push(dd);
        nodes.normal.push(Point::new(d.x2 / jac, -d.x1 / jac));
        nodes.jac.push(jac);
    }
    Ok(nodes)
}

/// Γ_{b,a}: `count` equispaced receivers on {(x₁, b) : |x₁| ≤ a}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverLine {
    pub b: f64,
    pub a: f64,
    pub count: usize,
}

impl ReceiverLine {
    pub fn points(&self) -> Vec<Point> {
        if self.count == 1 {
            return vec![Point::new(0.0, self.b)];
        }
        (0..self.count)
            .map(|k| Point::new(-self.a + 2.0 * self.a * k as f64 / (self.count - 1) as f64, self.b))
            .collect()
    }

    pub fn validate(&self, profile: &InterfaceProfile) -> Result<()> {
        if !(self.a > 0.0) || self.count == 0 || !self.b.is_finite() {
            return Err(Error::Config(format!("invalid receiver line {self:?}")));
        }
        let (_, fmax) = profile.extrema();
        if !(self.b > fmax) {
            return Err(Error::Geometry(format!("receiver height {} must exceed max f = {fmax}", self.b)));
        }
        Ok(())
    }
}

/// Interface, arc and optional obstacle curve of one scene.
#[derive(Debug, Clone)]
pub struct SceneGeometry {
    pub profile: InterfaceProfile,
    pub arc: ArcInterface,
    pub obstacle: Option<ObstacleCurve>,
}

impl SceneGeometry {
    pub fn new(profile: InterfaceProfile, radius: Option<f64>, obstacle: Option<ObstacleCurve>) -> Result<Self> {
        profile.validate()?;
        let radius = radius.unwrap_or_else(|| default_arc_radius(&profile));
        let arc = ArcInterface::new(radius)?;
        arc.validate(&profile)?;
        let g = SceneGeometry { profile, arc, obstacle };
        if let Some(c) = &g.obstacle {
            c.validate()?;
            g.check_obstacle(c)?;
        }
        Ok(g)
    }

    /// The obstacle must sit strictly below Γ and outside the volume region B2
    /// (below the arc), so the nested kernels are smooth on it.
    fn check_obstacle(&self, c: &ObstacleCurve) -> Result<()> {
        let nodes = obstacle_nodes(c, 256)?;
        let mut gap = f64::INFINITY;
        for p in &nodes.pos {
            gap = gap.min(self.profile.f(p.x1) - p.x2);
            if p.x1.abs() < self.arc.radius && p.x2 >= self.arc.height(p.x1) {
                return Err(Error::Geometry(format!(
                    "obstacle boundary point ({}, {}) lies inside the arc region; enlarge the depth or reduce R",
                    p.x1, p.x2
                )));
            }
        }
        if !(gap > 0.0) {
            return Err(Error::Geometry("obstacle must lie strictly below the interface".into()));
        }
        Ok(())
    }
}

/// Ω1 iff p₂ > f(p₁); returns the region and its wavenumber.
pub fn classify_point(p: Point, profile: &InterfaceProfile, kappa1: f64, kappa2: f64) -> (Layer, f64) {
    let f = profile.f(p.x1);
    if p.x2 > f {
        (Layer::Upper, kappa1)
    } else if p.x2 < f {
        (Layer::Lower, kappa2)
    } else {
        (Layer::OnInterface, kappa1)
    }
}

/// Analogous classifier for Γ_R.
pub fn classify_point_arc(p: Point, arc: &ArcInterface, kappa1: f64, kappa2: f64) -> (Layer, f64) {
    let h = arc.height(p.x1);
    if p.x2 > h {
        (Layer::Upper, kappa1)
    } else if p.x2 < h {
        (Layer::Lower, kappa2)
    } else {
        (Layer::OnInterface, kappa1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionTag {
    B1,
    B2,
    Penetrable,
}

/// One square cell on the lattice (i + ½, j + ½)·h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub center: Point,
    /// Area assigned to the cell.
    pub weight: f64,
    pub index: (i64, i64),
    /// ∫ ln|y − center| dy over the assigned area.
    pub self_log: f64,
}

#[derive(Debug, Clone)]
pub struct RegionMesh {
    pub tag: RegionTag,
    pub cell_size: f64,
    pub subsample: usize,
    pub origin: Point,
    pub cells: Vec<Cell>,
}

impl RegionMesh {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.cells.iter().map(|c| c.weight).sum()
    }

    pub fn centers(&self) -> Vec<Point> {
        self.cells.iter().map(|c| c.center).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.weight).collect()
    }
}

/// Signed ∫₀^x∫₀^y ln(u² + v²) du dv.
fn log_antiderivative(x: f64, y: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    x * y * ((x * x + y * y).ln() - 3.0) + x * x * (y / x).atan() + y * y * (x / y).atan()
}

/// ∫ ln|y − c| over the rectangle [a1, b1] × [a2, b2].
pub fn rect_log_integral(c: Point, a1: f64, b1: f64, a2: f64, b2: f64) -> f64 {
    let (x0, x1, y0, y1) = (a1 - c.x1, b1 - c.x1, a2 - c.x2, b2 - c.x2);
    0.5 * (log_antiderivative(x1, y1) - log_antiderivative(x0, y1) - log_antiderivative(x1, y0)
        + log_antiderivative(x0, y0))
}

/// ∫ ln|y| over the square of half-side a centred at the origin.
pub fn square_log_integral(a: f64) -> f64 {
    2.0 * a * a * ((2.0 * a * a).ln() - 3.0 + 0.5 * PI)
}

/// Uniform Cartesian cells aligned with x₁ = 0 and x₂ = 0. A cell is kept
/// iff its center is inside; its weight is the inside fraction of its area
/// (subsample × subsample sub-grid). Inside sub-areas of dropped boundary
/// cells are handed to the nearest kept neighbour so total area is preserved.
pub fn build_region_mesh(tag: RegionTag, scene: &SceneGeometry, cell_size: f64, subsample: usize) -> Result<RegionMesh> {
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(Error::Config(format!("cell size must be positive, got {cell_size}")));
    }
    if subsample == 0 {
        return Err(Error::Config("subsample must be at least 1".into()));
    }
    let r = scene.arc.radius;
    let profile = &scene.profile;
    let (lo, hi, inside): (Point, Point, Box<dyn Fn(Point) -> bool + '_>) = match tag {
        RegionTag::B1 => (
            Point::new(-r, -r),
            Point::new(r, 0.0),
            Box::new(move |p: Point| p.x1.abs() < r && p.x2 < 0.0 && p.x2 > scene.arc.height(p.x1)),
        ),
        RegionTag::B2 => {
            let (_, fmax) = profile.extrema();
            (
                Point::new(-r, -r),
                Point::new(r, fmax.max(0.0)),
                Box::new(move |p: Point| p.x1.abs() < r && p.x2 < profile.f(p.x1) && p.x2 > scene.arc.height(p.x1)),
            )
        }
        RegionTag::Penetrable => {
            let curve = scene
                .obstacle
                .ok_or_else(|| Error::Config("penetrable mesh requested without an obstacle curve".into()))?;
            let (lo, hi) = curve.bounding_box();
            (lo, hi, Box::new(move |p: Point| curve.contains(p)))
        }
    };
    let h = cell_size;
    let i0 = (lo.x1 / h).floor() as i64;
    let i1 = (hi.x1 / h).ceil() as i64;
    let j0 = (lo.x2 / h).floor() as i64;
    let j1 = (hi.x2 / h).ceil() as i64;
    let nx = (i1 - i0) as usize;
    let ny = (j1 - j0) as usize;
    if nx.saturating_mul(ny) > 50_000_000 {
        return Err(Error::Config(format!("cell size {h} yields an excessive bounding grid")));
    }
    let s = subsample;
    let hs = h / s as f64;
    // per lattice slot: center inside?, list of inside sub-rectangles
    let mut kept = vec![false; nx * ny];
    let mut subs: Vec<Vec<(f64, f64)>> = vec![Vec::new(); nx * ny];
    for jj in 0..ny {
        for ii in 0..nx {
            let i = i0 + ii as i64;
            let j = j0 + jj as i64;
            let c = Point::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            let slot = jj * nx + ii;
            kept[slot] = inside(c);
            for a in 0..s {
                for b in 0..s {
                    let sx = i as f64 * h + (a as f64 + 0.5) * hs;
                    let sy = j as f64 * h + (b as f64 + 0.5) * hs;
                    if inside(Point::new(sx, sy)) {
                        subs[slot].push((sx, sy));
                    }
                }
            }
        }
    }
    // redistribute sub-areas of dropped slots
    let mut owned: Vec<Vec<(f64, f64)>> = vec![Vec::new(); nx * ny];
    let neigh: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1)];
    for jj in 0..ny {
        for ii in 0..nx {
            let slot = jj * nx + ii;
            if subs[slot].is_empty() {
                continue;
            }
            if kept[slot] {
                owned[slot].extend_from_slice(&subs[slot]);
                continue;
            }
            let target = neigh.iter().find_map(|&(di, dj)| {
                let a = ii as i64 + di;
                let b = jj as i64 + dj;
                if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                    return None;
                }
                let t = b as usize * nx + a as usize;
                kept[t].then_some(t)
            });
            if let Some(t) = target {
                let moved = subs[slot].clone();
                owned[t].extend(moved);
            }
        }
    }
    let mut cells = Vec::new();
    let full_self = square_log_integral(0.5 * h);
    for jj in 0..ny {
        for ii in 0..nx {
            let slot = jj * nx + ii;
            if !kept[slot] {
                continue;
            }
            let i = i0 + ii as i64;
            let j = j0 + jj as i64;
            let center = Point::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            let own = &owned[slot];
            let n_own_in_cell = own
                .iter()
                .filter(|&&(x, y)| ((x / h).floor() as i64) == i && ((y / h).floor() as i64) == j)
                .count();
            let (weight, self_log) = if own.len() == s * s && n_own_in_cell == s * s {
                (h * h, full_self)
            } else {
                let mut sl = 0.0;
                for &(x, y) in own {
                    sl += rect_log_integral(center, x - 0.5 * hs, x + 0.5 * hs, y - 0.5 * hs, y + 0.5 * hs);
                }
                (own.len() as f64 * hs * hs, sl)
            };
            cells.push(Cell { center, weight, index: (i, j), self_log });
        }
    }
    if cells.is_empty() {
        return Err(Error::Config(format!("region {tag:?} mesh is empty at cell size {h}")));
    }
    Ok(RegionMesh { tag, cell_size: h, subsample: s, origin: Point::new(0.0, 0.0), cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(profile: InterfaceProfile, r: f64) -> SceneGeometry {
        SceneGeometry::new(profile, Some(r), None).unwrap()
    }

    #[test]
    fn classify_examples() {
        let flat = InterfaceProfile::flat();
        assert_eq!(classify_point(Point::new(0.0, 1.0), &flat, 1.0, 2.0), (Layer::Upper, 1.0));
        assert_eq!(classify_point(Point::new(0.0, -1.0), &flat, 1.0, 2.0), (Layer::Lower, 2.0));
        let bump = InterfaceProfile::single(0.0, 1.0, 0.5);
        assert!((bump.f(0.0) - 0.5).abs() < 1e-15);
        assert_eq!(classify_point(Point::new(0.0, 0.25), &bump, 1.0, 2.0).0, Layer::Lower);
        let arc = ArcInterface::new(1.0).unwrap();
        assert_eq!(classify_point_arc(Point::new(0.0, -0.5), &arc, 1.0, 2.0), (Layer::Upper, 1.0));
        assert_eq!(classify_point_arc(Point::new(0.0, -1.5), &arc, 1.0, 2.0), (Layer::Lower, 2.0));
        assert_eq!(classify_point_arc(Point::new(2.0, -0.1), &arc, 1.0, 2.0), (Layer::Lower, 2.0));
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let p = InterfaceProfile {
            bumps: vec![Bump { center: 0.1, halfwidth: 0.7, height: 0.3 }, Bump { center: -0.4, halfwidth: 0.5, height: -0.1 }],
        };
        let h = 1e-5;
        for &x in &[-0.6, -0.2, 0.0, 0.3, 0.55] {
            let fd1 = (p.f(x + h) - p.f(x - h)) / (2.0 * h);
            let fd2 = (p.df(x + h) - p.df(x - h)) / (2.0 * h);
            assert!((fd1 - p.df(x)).abs() < 1e-8);
            assert!((fd2 - p.d2f(x)).abs() < 1e-6);
        }
        assert!((p.support_radius() - 0.9).abs() < 1e-15);
        assert_eq!(p.f(0.95), 0.0);
    }

    #[test]
    fn arc_validation() {
        let p = InterfaceProfile::single(0.0, 0.5, 0.2);
        assert!(ArcInterface::new(1.0).unwrap().validate(&p).is_ok());
        assert!(ArcInterface::new(0.4).unwrap().validate(&p).is_err());
        let deep = InterfaceProfile::single(0.0, 0.5, -0.9);
        assert!(ArcInterface::new(0.6).unwrap().validate(&deep).is_err());
    }

    #[test]
    fn rectangle_log_integral() {
        // midpoint-rule cross-check on an off-centre rectangle that contains c
        let c = Point::new(0.013, -0.021);
        let (a1, b1, a2, b2) = (-0.05, 0.08, -0.04, 0.03);
        let exact = rect_log_integral(c, a1, b1, a2, b2);
        let n = 2000;
        let (dx, dy) = ((b1 - a1) / n as f64, (b2 - a2) / n as f64);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let p = Point::new(a1 + (i as f64 + 0.5) * dx, a2 + (j as f64 + 0.5) * dy);
                s += p.dist(c).ln();
            }
        }
        s *= dx * dy;
        assert!((s - exact).abs() < 1e-6 * exact.abs(), "{s} vs {exact}");
        let a = 0.1;
        assert!((rect_log_integral(Point::new(0.0, 0.0), -a, a, -a, a) - square_log_integral(a)).abs() < 1e-15);
    }

    #[test]
    fn half_disc_area() {
        let g = scene(InterfaceProfile::flat(), 1.0);
        let exact = 0.5 * PI;
        let coarse = build_region_mesh(RegionTag::B1, &g, 0.5, 4).unwrap();
        assert!((coarse.total_weight() - exact).abs() < 0.25 * exact);
        let mut prev = f64::INFINITY;
        for h in [0.2, 0.1, 0.05] {
            let m = build_region_mesh(RegionTag::B1, &g, h, 4).unwrap();
            let err = (m.total_weight() - exact).abs();
            assert!(err < prev, "h={h}: {err} >= {prev}");
            prev = err;
            for c in &m.cells {
                assert!(c.center.x2 < 0.0 && c.center.x2 > g.arc.height(c.center.x1));
            }
        }
    }

    #[test]
    fn flat_b2_equals_b1() {
        let g = scene(InterfaceProfile::flat(), 1.0);
        let b1 = build_region_mesh(RegionTag::B1, &g, 0.1, 4).unwrap();
        let b2 = build_region_mesh(RegionTag::B2, &g, 0.1, 4).unwrap();
        assert_eq!(b1.cells, b2.cells);
    }

    #[test]
    fn b2_cells_between_arc_and_interface() {
        let g = scene(InterfaceProfile::single(0.0, 0.4, 0.3), 1.0);
        let b2 = build_region_mesh(RegionTag::B2, &g, 0.05, 4).unwrap();
        assert!(b2.cells.iter().any(|c| c.center.x2 > 0.0));
        for c in &b2.cells {
            let p = c.center;
            assert!(g.arc.height(p.x1) < p.x2 && p.x2 < g.profile.f(p.x1));
        }
    }

    #[test]
    fn obstacle_node_examples() {
        let c = ObstacleCurve::Circle { center: Point::new(0.0, 0.0), radius: 1.0 };
        let n = obstacle_nodes(&c, 8).unwrap();
        assert_eq!(n.len(), 16);
        for (p, j) in n.pos.iter().zip(&n.jac) {
            assert!((p.norm() - 1.0).abs() < 1e-15);
            assert!((j - 1.0).abs() < 1e-15);
        }
        let perim: f64 = n.jac.iter().sum::<f64>() * n.step();
        assert!((perim - 2.0 * PI).abs() < 1e-12);
        let k = ObstacleCurve::Kite { center: Point::new(0.3, -2.0), scale: 0.4 };
        assert!(k.point(0.0).dist(k.point(2.0 * PI)) < 1e-14);
        assert!(k.contains(Point::new(0.3, -2.0)));
        assert!(!k.contains(Point::new(2.0, -2.0)));
        // normal at t = 0 points to +x₁ (outward)
        assert!(k.normal(0.0).x1 > 0.99);
        assert!(obstacle_nodes(&k, 3).is_err());
    }

    #[test]
    fn obstacle_must_lie_below_arc() {
        let c = ObstacleCurve::Circle { center: Point::new(0.0, -0.5), radius: 0.2 };
        assert!(SceneGeometry::new(InterfaceProfile::flat(), Some(1.0), Some(c)).is_err());
        let c = ObstacleCurve::Circle { center: Point::new(0.0, -1.5), radius: 0.3 };
        assert!(SceneGeometry::new(InterfaceProfile::flat(), Some(1.0), Some(c)).is_ok());
    }

    #[test]
    fn receivers() {
        let r = ReceiverLine { b: 1.0, a: 2.0, count: 5 };
        let p = r.points();
        assert_eq!(p.len(), 5);
        assert_eq!(p[0], Point::new(-2.0, 1.0));
        assert_eq!(p[4], Point::new(2.0, 1.0));
        assert!(r.validate(&InterfaceProfile::single(0.0, 0.5, 1.2)).is_err());
    }

    #[test]
    fn penetrable_circle_area() {
        let c = ObstacleCurve::Circle { center: Point::new(0.0, -2.0), radius: 0.5 };
        let g = SceneGeometry::new(InterfaceProfile::flat(), Some(1.0), Some(c)).unwrap();
        let m = build_region_mesh(RegionTag::Penetrable, &g, 0.05, 4).unwrap();
        assert!((m.total_weight() - PI * 0.25).abs() < 5e-3);
    }
}
