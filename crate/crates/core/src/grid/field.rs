use serde::{Deserialize, Serialize};

use super::mesh::StaggeredGrid;
use crate::error::{Error, Result};

/// Face-centred velocity: `u` on vertical faces, `v` on horizontal faces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Velocity {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Velocity {
    pub fn zeros(grid: &StaggeredGrid) -> Self {
        Self {
            u: vec![0.0; grid.n_u()],
            v: vec![0.0; grid.n_v()],
        }
    }

    /// Samples `f` at every face centre.
    pub fn from_fn(grid: &StaggeredGrid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..grid.ny() {
            for i in 0..=grid.nx() {
                out.u[grid.u_index(i, j)] = f(grid.u_position(i, j))[0];
            }
        }
        for j in 0..=grid.ny() {
            for i in 0..grid.nx() {
                out.v[grid.v_index(i, j)] = f(grid.v_position(i, j))[1];
            }
        }
        out
    }

    pub fn check_shape(&self, grid: &StaggeredGrid) -> Result<()> {
        if self.u.len() != grid.n_u() || self.v.len() != grid.n_v() {
            return Err(Error::Domain(
                "velocity arrays do not match the grid".into(),
            ));
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            u: self.u.iter().map(|x| s * x).collect(),
            v: self.v.iter().map(|x| s * x).collect(),
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Velocity) {
        self.u
            .iter_mut()
            .zip(&other.u)
            .for_each(|(a, b)| *a += s * b);
        self.v
            .iter_mut()
            .zip(&other.v)
            .for_each(|(a, b)| *a += s * b);
    }

    pub fn max_abs(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.v)
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Plain Euclidean norm of all face values.
    pub fn norm(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.v)
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// Velocity and cell-centred pressure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub velocity: Velocity,
    pub pressure: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &StaggeredGrid) -> Self {
        Self {
            velocity: Velocity::zeros(grid),
            pressure: vec![0.0; grid.n_cells()],
        }
    }

    pub fn check_shape(&self, grid: &StaggeredGrid) -> Result<()> {
        self.velocity.check_shape(grid)?;
        if self.pressure.len() != grid.n_cells() {
            return Err(Error::Domain(
                "pressure array does not match the grid".into(),
            ));
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            velocity: self.velocity.scaled(s),
            pressure: self.pressure.iter().map(|p| s * p).collect(),
        }
    }

    pub fn axpy(&mut self, s: f64, other: &Field) {
        self.velocity.axpy(s, &other.velocity);
        self.pressure
            .iter_mut()
            .zip(&other.pressure)
            .for_each(|(a, b)| *a += s * b);
    }
}
