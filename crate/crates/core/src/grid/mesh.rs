use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GapGeometry;

/// Tensor-product staggered grid on a box.
///
/// Cell `(i, j)` spans `[xn[i], xn[i+1]] x [yn[j], yn[j+1]]`. Horizontal
/// velocities live on the vertical faces `(xn[i], yc[j])`, vertical velocities
/// on the horizontal faces `(xc[i], yn[j])`, pressure at cell centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaggeredGrid {
    xn: Vec<f64>,
    yn: Vec<f64>,
    xc: Vec<f64>,
    yc: Vec<f64>,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl StaggeredGrid {
    /// Grid from strictly increasing node coordinates.
    pub fn from_nodes(xn: Vec<f64>, yn: Vec<f64>) -> Result<Self> {
        for (name, nodes) in [("x", &xn), ("y", &yn)] {
            if nodes.len() < 3 {
                return Err(Error::Domain(format!(
                    "{name} axis needs at least two cells"
                )));
            }
            if nodes
                .windows(2)
                .any(|w| !(w[1] > w[0]) || !w[0].is_finite() || !w[1].is_finite())
            {
                return Err(Error::Domain(format!(
                    "{name} nodes must be finite and strictly increasing"
                )));
            }
        }
        let centres = |n: &[f64]| {
            n.windows(2)
                .map(|w| 0.5 * (w[0] + w[1]))
                .collect::<Vec<_>>()
        };
        let widths = |n: &[f64]| n.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>();
        Ok(Self {
            xc: centres(&xn),
            yc: centres(&yn),
            dx: widths(&xn),
            dy: widths(&yn),
            xn,
            yn,
        })
    }

    /// Square cells of side `(hi - lo) / n` on a square box.
    pub fn uniform(lo: [f64; 2], hi: [f64; 2], n: usize) -> Result<Self> {
        if n < 16 {
            return Err(Error::Domain(format!(
                "uniform grids need n >= 16, got {n}"
            )));
        }
        let (lx, ly) = (hi[0] - lo[0], hi[1] - lo[1]);
        if !(lx > 0.0 && ly > 0.0) || ((lx - ly).abs() > 1e-12 * lx.max(ly)) {
            return Err(Error::Domain(
                "uniform grids need a square box with positive side".into(),
            ));
        }
        let nodes = |a: f64, l: f64| {
            (0..=n)
                .map(|i| a + l * i as f64 / n as f64)
                .collect::<Vec<_>>()
        };
        Self::from_nodes(nodes(lo[0], lx), nodes(lo[1], ly))
    }

    pub fn nx(&self) -> usize {
        self.dx.len()
    }
    pub fn ny(&self) -> usize {
        self.dy.len()
    }
    pub fn x_nodes(&self) -> &[f64] {
        &self.xn
    }
    pub fn y_nodes(&self) -> &[f64] {
        &self.yn
    }
    pub fn x_centres(&self) -> &[f64] {
        &self.xc
    }
    pub fn y_centres(&self) -> &[f64] {
        &self.yc
    }
    pub fn dx(&self) -> &[f64] {
        &self.dx
    }
    pub fn dy(&self) -> &[f64] {
        &self.dy
    }

    pub fn lo(&self) -> [f64; 2] {
        [self.xn[0], self.yn[0]]
    }
    pub fn hi(&self) -> [f64; 2] {
        [self.xn[self.nx()], self.yn[self.ny()]]
    }

    /// Number of horizontal-velocity faces, boundary faces included.
    pub fn n_u(&self) -> usize {
        (self.nx() + 1) * self.ny()
    }
    pub fn n_v(&self) -> usize {
        self.nx() * (self.ny() + 1)
    }
    pub fn n_cells(&self) -> usize {
        self.nx() * self.ny()
    }

    #[inline]
    pub fn u_index(&self, i: usize, j: usize) -> usize {
        i + (self.nx() + 1) * j
    }
    #[inline]
    pub fn v_index(&self, i: usize, j: usize) -> usize {
        i + self.nx() * j
    }
    #[inline]
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i + self.nx() * j
    }

    pub fn u_position(&self, i: usize, j: usize) -> [f64; 2] {
        [self.xn[i], self.yc[j]]
    }
    pub fn v_position(&self, i: usize, j: usize) -> [f64; 2] {
        [self.xc[i], self.yn[j]]
    }
    pub fn cell_centre(&self, i: usize, j: usize) -> [f64; 2] {
        [self.xc[i], self.yc[j]]
    }

    /// Distance between the cell centres on either side of x-node `i`
    /// (half a cell at the box boundary).
    pub fn dx_face(&self, i: usize) -> f64 {
        let n = self.nx();
        if i == 0 {
            0.5 * self.dx[0]
        } else if i == n {
            0.5 * self.dx[n - 1]
        } else {
            self.xc[i] - self.xc[i - 1]
        }
    }

    pub fn dy_face(&self, j: usize) -> f64 {
        let n = self.ny();
        if j == 0 {
            0.5 * self.dy[0]
        } else if j == n {
            0.5 * self.dy[n - 1]
        } else {
            self.yc[j] - self.yc[j - 1]
        }
    }

    /// Control volume of horizontal-velocity face `(i, j)`.
    pub fn u_volume(&self, i: usize, j: usize) -> f64 {
        self.dx_face(i) * self.dy[j]
    }
    pub fn v_volume(&self, i: usize, j: usize) -> f64 {
        self.dx[i] * self.dy_face(j)
    }
    pub fn cell_area(&self, i: usize, j: usize) -> f64 {
        self.dx[i] * self.dy[j]
    }

    pub fn h_min(&self) -> f64 {
        self.dx
            .iter()
            .chain(&self.dy)
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
    pub fn h_max(&self) -> f64 {
        self.dx.iter().chain(&self.dy).cloned().fold(0.0, f64::max)
    }

    /// True when every cell is the same square.
    pub fn is_uniform(&self) -> bool {
        let h = self.dx[0];
        self.dx
            .iter()
            .chain(&self.dy)
            .all(|d| (d - h).abs() <= 1e-12 * h)
    }

    /// Index of the cell column whose span contains `x` (clamped).
    pub fn column_of(&self, x: f64) -> usize {
        locate(&self.xn, x)
    }
    pub fn row_of(&self, y: f64) -> usize {
        locate(&self.yn, y)
    }
}

fn locate(nodes: &[f64], x: f64) -> usize {
    let n = nodes.len() - 1;
    match nodes.binary_search_by(|v| v.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less)) {
        Ok(k) => k.min(n - 1),
        Err(k) => k.saturating_sub(1).min(n - 1),
    }
}

/// How grids are laid out for a given gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridRule {
    /// Square cells; `n` is the smallest power of two giving `cells_per_eps`
    /// cells across the gap, capped at `max_n`.
    Uniform { cells_per_eps: f64, max_n: usize },
    /// Tensor-product grid graded towards the gap.
    GapAdapted(GapAdaptedRule),
}

/// Spacing laws of the gap-adapted grid, all lengths in units of the particle
/// radius. Vertical spacing grows linearly away from the gap from
/// `eps / cells_per_eps`, horizontal spacing from `sqrt(eps) / cells_per_sqrt_eps`;
/// both are capped at `h_mid` around the particles and coarsen to `h_far`
/// beyond them. `refine` divides every spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapAdaptedRule {
    pub cells_per_eps: f64,
    pub cells_per_sqrt_eps: f64,
    pub growth: f64,
    pub h_mid: f64,
    pub h_far: f64,
    pub refine: f64,
    pub max_n: usize,
}

impl Default for GapAdaptedRule {
    fn default() -> Self {
        Self {
            cells_per_eps: 10.0,
            cells_per_sqrt_eps: 8.0,
            growth: 0.15,
            h_mid: 0.035,
            h_far: 0.12,
            refine: 1.0,
            max_n: 2048,
        }
    }
}

impl Default for GridRule {
    fn default() -> Self {
        GridRule::GapAdapted(GapAdaptedRule::default())
    }
}

/// Extra room between the outer domain and the box, in cells of the coarsest size.
const BOX_MARGIN_CELLS: f64 = 2.5;

/// Radius of the region around the origin kept at `h_mid` or finer.
const PARTICLE_ZONE: f64 = 1.3;

impl GridRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GridRule::Uniform {
                cells_per_eps,
                max_n,
            } => {
                if !(cells_per_eps >= 1.0) || max_n < 16 {
                    return Err(Error::InvalidConfig(
                        "uniform rule needs cells_per_eps >= 1, max_n >= 16".into(),
                    ));
                }
            }
            GridRule::GapAdapted(r) => {
                let positive = [
                    r.cells_per_eps,
                    r.cells_per_sqrt_eps,
                    r.growth,
                    r.h_mid,
                    r.h_far,
                    r.refine,
                ];
                if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::InvalidConfig(
                        "gap-adapted rule needs positive finite parameters".into(),
                    ));
                }
                if r.h_far < r.h_mid {
                    return Err(Error::InvalidConfig("h_far must not be below h_mid".into()));
                }
            }
        }
        Ok(())
    }

    /// Builds the grid for the geometry's gap; the box is a centred square
    /// enclosing the outer domain with a margin.
    pub fn build(&self, geom: &GapGeometry) -> Result<StaggeredGrid> {
        self.validate()?;
        if geom.dim() != 2 {
            return Err(Error::Unsupported("grids are two-dimensional".into()));
        }
        let eps = geom.eps();
        let extent = geom.outer().extent();
        match *self {
            GridRule::Uniform {
                cells_per_eps,
                max_n,
            } => {
                let mut n = 16usize;
                loop {
                    let half = extent + BOX_MARGIN_CELLS * 2.0 * (extent + 1.0) / n as f64;
                    if 2.0 * half / n as f64 <= eps / cells_per_eps || n >= max_n {
                        break;
                    }
                    n *= 2;
                }
                let n = n.min(max_n);
                // margin chosen so that it spans at least two cells
                let half = extent * n as f64 / (n as f64 - 2.0 * BOX_MARGIN_CELLS);
                StaggeredGrid::uniform([-half, -half], [half, half], n)
            }
            GridRule::GapAdapted(r) => {
                let half = extent + BOX_MARGIN_CELLS * r.h_far / r.refine;
                let hx0 = eps.sqrt() / r.cells_per_sqrt_eps / r.refine;
                let xs = march(0.0, half, |x| spacing(x, hx0, &r))?;
                let mut xn: Vec<f64> = xs.iter().rev().map(|v| -v).collect();
                xn.extend_from_slice(&xs[1..]);

                let hy0 = eps / r.cells_per_eps / r.refine;
                let inner = ((0.5 * eps) / hy0).round().max(4.0) as usize;
                let mut ys: Vec<f64> = (0..=inner)
                    .map(|k| 0.5 * eps * k as f64 / inner as f64)
                    .collect();
                let outer = march(0.5 * eps, half, |y| spacing(y - 0.5 * eps, hy0, &r))?;
                ys.extend_from_slice(&outer[1..]);
                let mut yn: Vec<f64> = ys.iter().rev().map(|v| -v).collect();
                yn.extend_from_slice(&ys[1..]);
                if xn.len() - 1 > r.max_n || yn.len() - 1 > r.max_n {
                    return Err(Error::Resolution(format!(
                        "gap-adapted grid needs {}x{} cells, above max_n = {}",
                        xn.len() - 1,
                        yn.len() - 1,
                        r.max_n
                    )));
                }
                StaggeredGrid::from_nodes(xn, yn)
            }
        }
    }
}

fn spacing(s: f64, h0: f64, r: &GapAdaptedRule) -> f64 {
    let s = s.abs();
    let near = (h0 + r.growth * s).min(r.h_mid / r.refine);
    if s < PARTICLE_ZONE {
        near
    } else {
        near.max(((r.h_mid + 0.3 * (s - PARTICLE_ZONE)) / r.refine).min(r.h_far / r.refine))
    }
}

/// Nodes from `start` to `end` following the local spacing law, stretched
/// uniformly so that the last node lands on `end`.
fn march(start: f64, end: f64, h: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let mut pts = vec![start];
    while *pts.last().unwrap() < end {
        let last = *pts.last().unwrap();
        let step = h(last);
        if !(step > 0.0) {
            return Err(Error::Domain("non-positive grid spacing".into()));
        }
        pts.push(last + step);
        if pts.len() > 1_000_000 {
            return Err(Error::Resolution("grid spacing too small".into()));
        }
    }
    let span = pts.last().unwrap() - start;
    let scale = (end - start) / span;
    Ok(pts.iter().map(|p| start + (p - start) * scale).collect())
}
