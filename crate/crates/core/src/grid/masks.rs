use serde::{Deserialize, Serialize};

use super::mesh::StaggeredGrid;
use crate::error::{Error, Result};
use crate::geometry::{GapGeometry, OuterDomain, Region};

/// Minimum number of cell centres across the narrowest gap.
pub const MIN_CELLS_ACROSS_GAP: usize = 8;

/// Region labels of every face and cell, taken at their centres.
///
/// The label of a face also selects its target velocity: particle one,
/// particle two or the exterior data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSet {
    pub u: Vec<Region>,
    pub v: Vec<Region>,
    pub cells: Vec<Region>,
    fluid_cells: usize,
}

impl MaskSet {
    /// Labels without any resolution or margin checks.
    pub fn label(geom: &GapGeometry, grid: &StaggeredGrid) -> Result<Self> {
        if geom.dim() != 2 {
            return Err(Error::Unsupported("masks are two-dimensional".into()));
        }
        let mut u = Vec::with_capacity(grid.n_u());
        for j in 0..grid.ny() {
            for i in 0..=grid.nx() {
                u.push(geom.classify_unchecked(&grid.u_position(i, j)));
            }
        }
        let mut v = Vec::with_capacity(grid.n_v());
        for j in 0..=grid.ny() {
            for i in 0..grid.nx() {
                v.push(geom.classify_unchecked(&grid.v_position(i, j)));
            }
        }
        let mut cells = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                cells.push(geom.classify_unchecked(&grid.cell_centre(i, j)));
            }
        }
        Self::from_labels(u, v, cells)
    }

    /// Every face and cell fluid; the box walls carry the boundary data.
    pub fn all_fluid(grid: &StaggeredGrid) -> Self {
        Self {
            u: vec![Region::Fluid; grid.n_u()],
            v: vec![Region::Fluid; grid.n_v()],
            cells: vec![Region::Fluid; grid.n_cells()],
            fluid_cells: grid.n_cells(),
        }
    }

    pub fn from_labels(u: Vec<Region>, v: Vec<Region>, cells: Vec<Region>) -> Result<Self> {
        let fluid_cells = cells.iter().filter(|r| **r == Region::Fluid).count();
        if fluid_cells == 0 {
            return Err(Error::Domain("no fluid cells".into()));
        }
        Ok(Self {
            u,
            v,
            cells,
            fluid_cells,
        })
    }

    pub fn fluid_cells(&self) -> usize {
        self.fluid_cells
    }

    pub fn cell(&self, grid: &StaggeredGrid, i: usize, j: usize) -> Region {
        self.cells[grid.cell_index(i, j)]
    }

    pub fn is_fluid_cell(&self, grid: &StaggeredGrid, i: usize, j: usize) -> bool {
        self.cell(grid, i, j) == Region::Fluid
    }

    /// Number of fluid horizontal faces in the column of cells nearest `x = 0`.
    pub fn gap_column_faces(&self, grid: &StaggeredGrid) -> usize {
        let i = grid.column_of(0.0);
        (0..=grid.ny())
            .filter(|&j| self.v[grid.v_index(i, j)] == Region::Fluid)
            .count()
    }
}

/// Labels faces and cells and checks that the grid can represent the gap.
pub fn build_masks(geom: &GapGeometry, grid: &StaggeredGrid) -> Result<MaskSet> {
    let masks = MaskSet::label(geom, grid)?;
    if let OuterDomain::Ball { radius } = geom.outer() {
        let (lo, hi) = (grid.lo(), grid.hi());
        let dx = grid.dx();
        let dy = grid.dy();
        let room = [
            -radius - lo[0] - 2.0 * dx[0],
            hi[0] - radius - 2.0 * dx[dx.len() - 1],
            -radius - lo[1] - 2.0 * dy[0],
            hi[1] - radius - 2.0 * dy[dy.len() - 1],
        ];
        if room.iter().any(|r| *r < -1e-12) {
            return Err(Error::Domain(
                "grid box must enclose the outer ball with a two-cell margin".into(),
            ));
        }
    }
    let i = grid.column_of(0.0);
    let half = 0.5 * geom.eps();
    let across = grid
        .y_centres()
        .iter()
        .enumerate()
        .filter(|(j, y)| y.abs() < half && masks.cell(grid, i, *j) == Region::Fluid)
        .count();
    if across < MIN_CELLS_ACROSS_GAP {
        return Err(Error::Resolution(format!(
            "{across} cells across the gap at x1 = 0, need {MIN_CELLS_ACROSS_GAP}"
        )));
    }
    Ok(masks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_box_is_fluid() {
        let grid = StaggeredGrid::uniform([-1.0, -1.0], [1.0, 1.0], 16).unwrap();
        let m = MaskSet::all_fluid(&grid);
        assert!(m.u.iter().chain(&m.v).all(|r| *r == Region::Fluid));
        assert_eq!(m.fluid_cells(), 256);
    }

    #[test]
    fn coarse_grid_rejected() {
        let geom = GapGeometry::unit_disks(2, 0.1).unwrap();
        let grid = StaggeredGrid::uniform([-5.0, -5.0], [5.0, 5.0], 32).unwrap();
        assert!(matches!(
            build_masks(&geom, &grid),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn fine_uniform_grid_counts_gap_faces() {
        let geom = GapGeometry::unit_disks(2, 0.1).unwrap();
        let grid = StaggeredGrid::uniform([-4.25, -4.25], [4.25, 4.25], 512).unwrap();
        let m = MaskSet::label(&geom, &grid).unwrap();
        let h = 8.5 / 512.0;
        assert!(m.gap_column_faces(&grid) >= (0.1 / h) as usize);
        assert!(m.u.contains(&Region::InsideD1));
        assert!(m.v.contains(&Region::InsideD2));
        assert!(m.cells.contains(&Region::OutsideD));
    }

    #[test]
    fn box_too_small_rejected() {
        let geom = GapGeometry::unit_disks(2, 0.2).unwrap();
        let grid = StaggeredGrid::uniform([-4.0, -4.0], [4.0, 4.0], 2048).unwrap();
        assert!(matches!(build_masks(&geom, &grid), Err(Error::Domain(_))));
    }
}
