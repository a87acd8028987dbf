//! JSON run configuration.

use serde::Deserialize;

use layered_scatter::error::{Error, Result};
use layered_scatter::forward::{BlowupSequenceConfig, ObstacleConfig, SceneConfig};
use layered_scatter::geometry::{InterfaceProfile, ObstacleCurve, Point, ReceiverLine};
use layered_scatter::layered_green::{MediumParams, SourceKind, SourceSpec};
use layered_scatter::ls_volume::{StageKind, VolumeSettings};
use layered_scatter::obstacle::BoundaryCondition;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub medium: MediumParams,
    #[serde(default)]
    pub interface: InterfaceProfile,
    #[serde(default, rename = "arc_radius_R")]
    pub arc_radius: Option<f64>,
    #[serde(default)]
    pub obstacle: Option<ObstacleSection>,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sources: Vec<SourceEntry>,
    #[serde(default)]
    pub receivers: Option<ReceiverLine>,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKindName {
    SoundSoft,
    Neumann,
    Impedance,
    Penetrable,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSection {
    pub kind: ObstacleKindName,
    pub curve: ObstacleCurve,
    /// Impedance λ (impedance only).
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Refractive index `[re, im]` (penetrable only).
    #[serde(default)]
    pub n: Option<[f64; 2]>,
    /// M: the boundary carries 2M nodes.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// Cell size of the mesh of D; defaults to half the volume cell size.
    #[serde(default)]
    pub cell_size: Option<f64>,
}

fn default_nodes() -> usize {
    32
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
    #[serde(default = "default_subsample")]
    pub subsample: usize,
}

fn default_cell_size() -> f64 {
    0.1
}

fn default_subsample() -> usize {
    2
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection { cell_size: default_cell_size(), subsample: default_subsample() }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-8
}

impl Default for QuadratureSection {
    fn default() -> Self {
        QuadratureSection { tol: default_tol() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Planar,
    Arc,
    #[default]
    Rough,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub level: Level,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub x1: f64,
    pub x2: f64,
    #[serde(default = "default_kind")]
    pub kind: SourceKind,
}

fn default_kind() -> SourceKind {
    SourceKind::Monopole
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default)]
    pub blowup: Option<BlowupSection>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupSection {
    #[serde(default)]
    pub z_star_x1: f64,
    pub delta0: f64,
    pub eps0: f64,
    pub n_max: usize,
    #[serde(default)]
    pub radial: Option<usize>,
    #[serde(default)]
    pub angular: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        if text.trim().is_empty() {
            return Err(Error::Config("configuration file is empty".into()));
        }
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Admissibility checks that do not need any numerics.
    pub fn validate(&self) -> Result<()> {
        let scene = self.scene()?;
        scene.geometry()?;
        if let Some(o) = &scene.obstacle {
            o.condition.validate()?;
            if o.nodes < 4 {
                return Err(Error::Config(format!("obstacle needs at least 4 nodes per half, got {}", o.nodes)));
            }
        }
        if let Some(r) = &self.receivers {
            r.validate(&self.interface)?;
        }
        for s in &self.sources {
            if !(s.x1.is_finite() && s.x2.is_finite()) {
                return Err(Error::Config(format!("source position ({}, {}) is not finite", s.x1, s.x2)));
            }
        }
        if let Some(b) = self.blowup() {
            b.validate()?;
        }
        Ok(())
    }

    pub fn scene(&self) -> Result<SceneConfig> {
        let mut cfg = SceneConfig::new(self.medium, self.interface.clone());
        cfg.arc_radius = self.arc_radius;
        cfg.volume = VolumeSettings { cell_size: self.mesh.cell_size, subsample: self.mesh.subsample, tol: self.quadrature.tol };
        cfg.level = match self.solver.level {
            Level::Planar => StageKind::Planar,
            Level::Arc => StageKind::Arc,
            Level::Rough => StageKind::Rough,
        };
        cfg.obstacle = self.obstacle.as_ref().map(|o| o.to_config(&self.mesh)).transpose()?;
        Ok(cfg)
    }

    pub fn sources(&self) -> Vec<SourceSpec> {
        self.sources.iter().map(|s| SourceSpec { kind: s.kind, position: Point::new(s.x1, s.x2) }).collect()
    }

    pub fn blowup(&self) -> Option<BlowupSequenceConfig> {
        self.experiment.blowup.map(|b| {
            let mut cfg = BlowupSequenceConfig::new(b.z_star_x1, b.delta0, b.eps0, b.n_max);
            cfg.radial = b.radial.unwrap_or(cfg.radial);
            cfg.angular = b.angular.unwrap_or(cfg.angular);
            cfg
        })
    }
}

impl ObstacleSection {
    fn to_config(&self, mesh: &MeshSection) -> Result<ObstacleConfig> {
        let misplaced = |field: &str| Err(Error::Config(format!("obstacle field `{field}` does not apply to {:?}", self.kind)));
        let condition = match self.kind {
            ObstacleKindName::SoundSoft | ObstacleKindName::Neumann if self.lambda.is_some() => return misplaced("lambda"),
            ObstacleKindName::SoundSoft | ObstacleKindName::Neumann | ObstacleKindName::Impedance if self.n.is_some() => {
                return misplaced("n")
            }
            ObstacleKindName::Penetrable if self.lambda.is_some() => return misplaced("lambda"),
            ObstacleKindName::SoundSoft => BoundaryCondition::SoundSoft,
            ObstacleKindName::Neumann => BoundaryCondition::Neumann,
            ObstacleKindName::Impedance => BoundaryCondition::Impedance {
                lambda: self.lambda.ok_or_else(|| Error::Config("impedance obstacle needs `lambda`".into()))?,
            },
            ObstacleKindName::Penetrable => {
                let [n_re, n_im] = self.n.ok_or_else(|| Error::Config("penetrable obstacle needs `n`".into()))?;
                BoundaryCondition::Penetrable { n_re, n_im }
            }
        };
        let mut cfg = ObstacleConfig::new(self.curve, condition);
        cfg.nodes = self.nodes;
        cfg.cell_size = self.cell_size.unwrap_or(0.5 * mesh.cell_size);
        if !(cfg.cell_size > 0.0) {
            return Err(Error::Config(format!("obstacle cell size must be positive, got {}", cfg.cell_size)));
        }
        cfg.subsample = mesh.subsample.max(1);
        Ok(cfg)
    }
}
