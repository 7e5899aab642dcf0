use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decomposition::{BoundaryData, PhysicsParams, PicardOptions};
use crate::error::{Error, Result};
use crate::geometry::{GapGeometry, GapProfile, OuterDomain};
use crate::grid::GridRule;
use crate::stokes::SolverOptions;

/// Two equal disks inside a ball; only the gap varies across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub particle_radius: f64,
    pub outer_radius: f64,
    pub neck_radius: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            particle_radius: 1.0,
            outer_radius: 4.0,
            neck_radius: 0.5,
        }
    }
}

impl GeometryConfig {
    pub fn build(&self, eps: f64) -> Result<GapGeometry> {
        let c = GapProfile::Circle {
            radius: self.particle_radius,
        };
        GapGeometry::new(
            2,
            eps,
            c,
            c,
            self.neck_radius,
            OuterDomain::Ball {
                radius: self.outer_radius,
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhysicsMode {
    #[default]
    Stokes,
    NavierStokes,
}

/// Everything a sweep needs. Keys in the JSON file match the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub geometry: GeometryConfig,
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub grid: GridRule,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub mode: PhysicsMode,
    #[serde(default)]
    pub boundary: BoundaryData,
    /// Multiplies the boundary data; keeps the Navier-Stokes runs in the
    /// regime where Picard iteration contracts.
    #[serde(default = "default_phi_scale")]
    pub phi_scale: f64,
    #[serde(default)]
    pub picard: PicardOptions,
    /// Horizontal radius of the sampled gap region.
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_margin")]
    pub margin_cells: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Re-solve every case on a grid refined twice and flag rows whose gap
    /// gradient moves by 5% or more.
    #[serde(default)]
    pub convergence_check: bool,
}

fn default_mu() -> f64 {
    1.0
}
fn default_eta() -> f64 {
    1e-8
}
fn default_phi_scale() -> f64 {
    0.3
}
fn default_radius() -> f64 {
    0.5
}
fn default_margin() -> usize {
    2
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// The desk-scale sweep: unit disks in `B_4`, `eps` from 0.2 to 0.025.
    pub fn desk_sweep(mode: PhysicsMode) -> Self {
        Self {
            geometry: GeometryConfig::default(),
            eps_list: vec![0.2, 0.1, 0.05, 0.025],
            grid: GridRule::default(),
            solver: SolverOptions::default(),
            mu: default_mu(),
            eta: default_eta(),
            mode,
            boundary: BoundaryData::default(),
            phi_scale: default_phi_scale(),
            picard: PicardOptions::default(),
            radius: default_radius(),
            margin_cells: default_margin(),
            output_dir: default_output(),
            convergence_check: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() {
            return Err(Error::InvalidConfig("eps_list is empty".into()));
        }
        for &e in &self.eps_list {
            if !(e > 0.0 && e < 0.5) {
                return Err(Error::InvalidConfig(format!("eps {e} not in (0, 1/2)")));
            }
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidConfig(
                "eps_list must be strictly decreasing".into(),
            ));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) || !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidConfig("mu and eta must be positive".into()));
        }
        if !(self.phi_scale.is_finite() && self.phi_scale != 0.0) {
            return Err(Error::InvalidConfig(
                "phi_scale must be finite and nonzero".into(),
            ));
        }
        if !(self.radius > 0.0 && self.radius <= self.geometry.neck_radius) {
            return Err(Error::InvalidConfig(format!(
                "radius {} must lie in (0, neck_radius = {}]",
                self.radius, self.geometry.neck_radius
            )));
        }
        let p = self.picard;
        if !(p.tol > 0.0) || p.max_iter == 0 || !(p.theta > 0.0 && p.theta <= 1.0) {
            return Err(Error::InvalidConfig(
                "picard needs tol > 0, max_iter > 0, theta in (0, 1]".into(),
            ));
        }
        self.grid.validate()?;
        self.solver.validate()?;
        self.boundary.check_compatible()?;
        for &e in &self.eps_list {
            self.geometry
                .build(e)
                .map_err(|err| Error::InvalidConfig(err.to_string()))?;
        }
        Ok(())
    }

    pub fn params(&self) -> PhysicsParams {
        PhysicsParams {
            mu: self.mu,
            eta: self.eta,
            solver: self.solver,
            phi_scale: self.phi_scale,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::from_json(r#"{"eps_list": [0.2, 0.1]}"#).unwrap();
        assert_eq!(cfg.mode, PhysicsMode::Stokes);
        assert_eq!(cfg.boundary, BoundaryData::Mixed);
        assert_eq!(cfg.margin_cells, 2);
        assert_eq!(cfg.grid, GridRule::default());
    }

    #[test]
    fn full_config_round_trips() {
        let mut cfg = RunConfig::desk_sweep(PhysicsMode::NavierStokes);
        cfg.grid = GridRule::Uniform {
            cells_per_eps: 8.0,
            max_n: 512,
        };
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert!(text.contains("\"navier_stokes\""));
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_lists_and_keys() {
        for bad in [
            r#"{"eps_list": []}"#,
            r#"{"eps_list": [0.1, 0.2]}"#,
            r#"{"eps_list": [0.1, 0.1]}"#,
            r#"{"eps_list": [0.6]}"#,
            r#"{"eps_list": [0.1], "epsilon": 3}"#,
            r#"{"eps_list": [0.1], "boundary": {"kind": "shear_y"}}"#,
            r#"{"eps_list": [0.1], "radius": 0.9}"#,
        ] {
            assert!(
                matches!(RunConfig::from_json(bad), Err(Error::InvalidConfig(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn nested_options_accept_partial_objects() {
        let cfg = RunConfig::from_json(
            r#"{"eps_list": [0.2], "solver": {"tol": 1e-9}, "grid": {"kind": "gap_adapted", "refine": 2.0}}"#,
        )
        .unwrap();
        assert_eq!(cfg.solver.tol, 1e-9);
        assert_eq!(cfg.solver.max_iter, SolverOptions::default().max_iter);
        match cfg.grid {
            GridRule::GapAdapted(r) => assert_eq!(r.refine, 2.0),
            _ => panic!("wrong rule"),
        }
    }
}
