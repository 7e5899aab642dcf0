//! Fixtures shared by the benchmarks.

use gapflow::grid::{build_masks, MaskSet};
use gapflow::linalg::SparseMatrix;
use gapflow::{GapGeometry, GridRule, RunConfig, StaggeredGrid, Velocity};

/// Unit disks in the default ball at gap `eps`, on the default grid.
pub fn desk_case(eps: f64) -> (RunConfig, GapGeometry, StaggeredGrid, MaskSet) {
    let cfg = RunConfig::desk_sweep(Default::default());
    let geom = cfg.geometry.build(eps).expect("desk geometry");
    let grid = GridRule::default().build(&geom).expect("desk grid");
    let masks = build_masks(&geom, &grid).expect("masks");
    (cfg, geom, grid, masks)
}

/// Smooth divergence-free test velocity.
pub fn swirl(grid: &StaggeredGrid) -> Velocity {
    Velocity::from_fn(grid, |[x, y]| {
        [
            (0.5 * y).sin() * (0.3 * x).cos(),
            -(0.5 * x).sin() * (0.3 * y).cos(),
        ]
    })
}

/// Five-point Laplacian plus identity on an `n x n` lattice; half bandwidth `n`.
pub fn shifted_laplacian(n: usize) -> SparseMatrix {
    let idx = |i: usize, j: usize| j * n + i;
    let mut t = Vec::with_capacity(5 * n * n);
    for j in 0..n {
        for i in 0..n {
            t.push((idx(i, j), idx(i, j), 5.0));
            if i > 0 {
                t.push((idx(i, j), idx(i - 1, j), -1.0));
            }
            if i + 1 < n {
                t.push((idx(i, j), idx(i + 1, j), -1.0));
            }
            if j > 0 {
                t.push((idx(i, j), idx(i, j - 1), -1.0));
            }
            if j + 1 < n {
                t.push((idx(i, j), idx(i, j + 1), -1.0));
            }
        }
    }
    SparseMatrix::from_triplets(n * n, n * n, t)
}
