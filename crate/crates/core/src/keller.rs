//! Keller-type function and the auxiliary velocity/pressure pairs that capture
//! the singular part of the flow in the neck between the particles.
//!
//! Every field is a closed-form expression in `x'`, `delta(x')` and the Keller
//! function `k = x_d / delta(x')`. Fields of particle 2 are mirror images of
//! the particle-1 fields under `x_d -> -x_d`, which turns `k` into `-k`.

use serde::{Deserialize, Serialize};

use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::geometry::GapGeometry;

/// Slack allowed when testing whether a point lies on the closed neck.
const NECK_SLACK: f64 = 1e-12;

/// Rigid displacement basis: translations first, then rotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RigidMode {
    dim: usize,
    alpha: usize,
}

impl RigidMode {
    pub fn new(dim: usize, alpha: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Domain(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        if alpha == 0 || alpha > Self::count(dim) {
            return Err(Error::OutOfRange(format!(
                "mode index {alpha} not in 1..={} for dimension {dim}",
                Self::count(dim)
            )));
        }
        Ok(Self { dim, alpha })
    }

    /// Number of rigid modes, `d(d+1)/2`.
    pub fn count(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    pub fn all(dim: usize) -> Vec<RigidMode> {
        (1..=Self::count(dim))
            .map(|a| RigidMode { dim, alpha: a })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn alpha(&self) -> usize {
        self.alpha
    }
    pub fn is_translation(&self) -> bool {
        self.alpha <= self.dim
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match (self.dim, self.alpha) {
            (2, 1) => vec![1.0, 0.0],
            (2, 2) => vec![0.0, 1.0],
            (2, 3) => vec![x[1], -x[0]],
            (3, 1) => vec![1.0, 0.0, 0.0],
            (3, 2) => vec![0.0, 1.0, 0.0],
            (3, 3) => vec![0.0, 0.0, 1.0],
            (3, 4) => vec![x[1], -x[0], 0.0],
            (3, 5) => vec![x[2], 0.0, -x[0]],
            _ => vec![0.0, x[2], -x[1]],
        }
    }

    fn eval_dual(&self, x: &[Dual]) -> [Dual; 3] {
        let z = Dual::cst(0.0);
        let one = Dual::cst(1.0);
        match (self.dim, self.alpha) {
            (2, 1) => [one, z, z],
            (2, 2) => [z, one, z],
            (2, 3) => [x[1], -x[0], z],
            (3, 1) => [one, z, z],
            (3, 2) => [z, one, z],
            (3, 3) => [z, z, one],
            (3, 4) => [x[1], -x[0], z],
            (3, 5) => [x[2], z, -x[0]],
            _ => [z, x[2], -x[1]],
        }
    }

    /// Sign `s` with `P psi(P x) = s psi(x)`, `P` the reflection `x_d -> -x_d`.
    pub fn mirror_sign(&self) -> f64 {
        match (self.dim, self.alpha) {
            (2, 1) | (3, 1) | (3, 2) | (3, 4) => 1.0,
            _ => -1.0,
        }
    }
}

/// `mu Delta v - grad p` at a point, estimated by finite differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub point: Vec<f64>,
    pub f: Vec<f64>,
    /// `|f| delta^2 / (|x'| + delta)`; for the 3D mode 4 field `|f| delta^{3/2}`.
    pub normalized_ratio: f64,
}

/// Keller function `x_d / delta(x')` on the closed neck of radius `2R`.
pub fn keller(geom: &GapGeometry, x: &[f64]) -> Result<f64> {
    check_neck(geom, x)?;
    let d = geom.dim() - 1;
    Ok(x[d] / geom.gap_width(&x[..d])?)
}

/// Gradient of the Keller function. Requires a symmetric quadratic geometry.
pub fn keller_gradient(geom: &GapGeometry, x: &[f64]) -> Result<Vec<f64>> {
    let kappa = geom.symmetric_quadratic().ok_or_else(|| {
        Error::UnsupportedGeometry("Keller gradient needs quadratic profiles".into())
    })?;
    check_neck(geom, x)?;
    let d = geom.dim() - 1;
    let delta = geom.gap_width(&x[..d])?;
    let k = x[d] / delta;
    let mut g: Vec<f64> = x[..d]
        .iter()
        .map(|xj| -2.0 * kappa * xj * k / delta)
        .collect();
    g.push(1.0 / delta);
    Ok(g)
}

fn check_neck(geom: &GapGeometry, x: &[f64]) -> Result<()> {
    let dim = geom.dim();
    if x.len() != dim || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("expected a finite {dim}-point")));
    }
    let d = dim - 1;
    let r = 2.0 * geom.neck_radius();
    let r2: f64 = x[..d].iter().map(|v| v * v).sum();
    if r2 > r * r {
        return Err(Error::OutOfNeck(format!(
            "|x'| = {} exceeds {r}",
            r2.sqrt()
        )));
    }
    let top = geom
        .upper_boundary(&x[..d])
        .map_err(|e| Error::OutOfNeck(e.to_string()))?;
    let bottom = geom
        .lower_boundary(&x[..d])
        .map_err(|e| Error::OutOfNeck(e.to_string()))?;
    let slack = NECK_SLACK * (top - bottom).max(1.0);
    if x[d] > top + slack || x[d] < bottom - slack {
        return Err(Error::OutOfNeck(format!(
            "x_d = {} outside [{bottom}, {top}]",
            x[d]
        )));
    }
    Ok(())
}

/// One auxiliary pair `(v_i^alpha, p_i^alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryField {
    geom: GapGeometry,
    particle: u8,
    mode: RigidMode,
    mu: f64,
    kappa: f64,
    #[serde(skip, default = "unit_sign")]
    pressure_sign: f64,
}

fn unit_sign() -> f64 {
    1.0
}

/// Builds the auxiliary field of particle `i` for rigid mode `alpha`.
pub fn aux_field(geom: &GapGeometry, i: u8, alpha: usize, mu: f64) -> Result<AuxiliaryField> {
    let kappa = geom.symmetric_quadratic().ok_or_else(|| {
        Error::UnsupportedGeometry("auxiliary fields need symmetric quadratic profiles".into())
    })?;
    if i != 1 && i != 2 {
        return Err(Error::OutOfRange(format!(
            "particle index must be 1 or 2, got {i}"
        )));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::Domain(format!(
            "viscosity must be positive, got {mu}"
        )));
    }
    let mode = RigidMode::new(geom.dim(), alpha)?;
    Ok(AuxiliaryField {
        geom: *geom,
        particle: i,
        mode,
        mu,
        kappa,
        pressure_sign: 1.0,
    })
}

impl AuxiliaryField {
    pub fn dim(&self) -> usize {
        self.geom.dim()
    }
    pub fn particle(&self) -> u8 {
        self.particle
    }
    pub fn mode(&self) -> RigidMode {
        self.mode
    }
    pub fn geometry(&self) -> &GapGeometry {
        &self.geom
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Copy with the pressure negated. Only used to mutation-test the checks.
    #[doc(hidden)]
    pub fn with_flipped_pressure(mut self) -> Self {
        self.pressure_sign = -self.pressure_sign;
        self
    }

    /// Velocity and pressure as dual numbers, differentiated in the caller's frame.
    fn eval_dual(&self, x: &[f64]) -> ([Dual; 3], Dual) {
        let dim = self.dim();
        let mut xs: Vec<Dual> = (0..dim).map(|j| Dual::var(x[j], j)).collect();
        if self.particle == 2 {
            xs[dim - 1] = -xs[dim - 1];
        }
        let (mut v, mut p) = match dim {
            2 => self.particle1_2d(&xs),
            _ => self.particle1_3d(&xs),
        };
        if self.particle == 2 {
            let s = self.mode.mirror_sign();
            for c in v.iter_mut().take(dim) {
                *c = *c * s;
            }
            v[dim - 1] = -v[dim - 1];
            p = p * s;
        }
        (v, p * self.pressure_sign)
    }

    fn particle1_2d(&self, x: &[Dual]) -> ([Dual; 3], Dual) {
        let mu = self.mu;
        let delta = x[0].sq() * self.kappa + self.geom.eps();
        let k = x[1] / delta;
        let lift = k + 0.5;
        let bump = k.sq() - 0.25;
        let z = Dual::cst(0.0);
        let psi = self.mode.eval_dual(x);
        match self.mode.alpha() {
            1 => {
                let v = [lift, x[0] * bump, z];
                (v, x[0] * k / delta * (2.0 * mu))
            }
            2 => {
                let c = 6.0 / delta;
                let shape = x[0].sq() * 2.0 / delta - 1.0 / 3.0;
                let v = [c * x[0] * bump, lift + c * x[1] * shape * bump, z];
                let p = -3.0 * mu / delta.sq() + 18.0 * mu / delta * shape * k.sq();
                (v, p)
            }
            _ => {
                let a = x[0].sq() / delta;
                let c1 = 1.0 - a * 4.0 - x[1] * k * 5.0;
                let c2 = x[0] * k * 2.0 * (2.0 - a * 4.0 - x[1] * k * 3.0);
                let v = [psi[0] * lift + c1 * bump, psi[1] * lift + c2 * bump, z];
                let p = 2.0 * mu * x[0] / delta.sq()
                    + 12.0 * mu * x[0] / delta * (1.0 - a * 2.0) * k.sq();
                (v, p)
            }
        }
    }

    fn particle1_3d(&self, x: &[Dual]) -> ([Dual; 3], Dual) {
        let mu = self.mu;
        let r2 = x[0].sq() + x[1].sq();
        let delta = r2 * self.kappa + self.geom.eps();
        let k = x[2] / delta;
        let lift = k + 0.5;
        let bump = k.sq() - 0.25;
        let q = r2 / delta;
        let psi = self.mode.eval_dual(x);
        let mut v = [psi[0] * lift, psi[1] * lift, psi[2] * lift];
        let p = match self.mode.alpha() {
            a @ (1 | 2) => {
                let xa = x[a - 1];
                v[2] = v[2] + xa * bump;
                2.0 * mu * xa * k / delta
            }
            3 => {
                let c = 3.0 / delta;
                v[0] = v[0] + c * x[0] * bump;
                v[1] = v[1] + c * x[1] * bump;
                v[2] = v[2] + c * x[2] * (q - 1.0 / 3.0) * bump * 2.0;
                -1.5 * mu / delta.sq() + 18.0 * mu / delta * (q - 1.0 / 3.0) * k.sq()
            }
            4 => Dual::cst(0.0),
            a => {
                // F_i, G, H_i helpers; mode 5 uses x_1, mode 6 uses x_2
                let xi = if a == 5 { x[0] } else { x[1] };
                let g = -4.0 * x[0] * x[1] / delta;
                let f = 1.0 - xi.sq() * 4.0 / delta - x[2] * k * (25.0 / 3.0);
                let h = xi * (2.0 / 3.0 - q) * k * 8.0 - xi * x[2] * k.sq() * 10.0;
                let w = bump * 0.6;
                let (c0, c1) = if a == 5 { (f, g) } else { (g, f) };
                v[0] = v[0] + w * c0;
                v[1] = v[1] + w * c1;
                v[2] = v[2] + w * h;
                1.2 * mu * xi / delta.sq() + 14.4 * mu * xi / delta * (2.0 / 3.0 - q) * k.sq()
            }
        };
        (v, p)
    }

    pub fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_neck(&self.geom, x)?;
        let (v, _) = self.eval_dual(x);
        Ok(v[..self.dim()].iter().map(|c| c.v).collect())
    }

    pub fn pressure(&self, x: &[f64]) -> Result<f64> {
        check_neck(&self.geom, x)?;
        Ok(self.eval_dual(x).1.v)
    }

    /// Velocity gradient, `g[j][l] = d v^(j) / d x_l`.
    ///
    /// The 3D mode-3 field of particle 1 at unit curvature uses the expanded
    /// closed forms; everything else is differentiated exactly with dual numbers.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_neck(&self.geom, x)?;
        if self.uses_expanded_forms() {
            return Ok(self.expanded_gradient(x));
        }
        Ok(self.dual_gradient(x))
    }

    pub(crate) fn dual_gradient(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let dim = self.dim();
        let (v, _) = self.eval_dual(x);
        v[..dim].iter().map(|c| c.d[..dim].to_vec()).collect()
    }

    pub fn pressure_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_neck(&self.geom, x)?;
        if self.uses_expanded_forms() {
            return Ok(self.expanded_pressure_gradient(x));
        }
        let (_, p) = self.eval_dual(x);
        Ok(p.d[..self.dim()].to_vec())
    }

    /// Divergence as the trace of the analytic gradient.
    pub fn divergence(&self, x: &[f64]) -> Result<f64> {
        let g = self.gradient(x)?;
        Ok((0..self.dim()).map(|j| g[j][j]).sum())
    }

    fn uses_expanded_forms(&self) -> bool {
        self.dim() == 3 && self.mode.alpha() == 3 && self.particle == 1 && self.kappa == 1.0
    }

    fn parts(&self, x: &[f64]) -> (f64, f64, f64) {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let delta = self.geom.eps() + r2;
        (r2, delta, x[2] / delta)
    }

    // Closed forms for the 3D mode-3 field with delta = eps + |x'|^2:
    //   d_j v^(j) = (3/delta - 18 x_j^2/delta^2) k^2 - (3/delta - 6 x_j^2/delta^2)/4
    //   d_l v^(j) = -18 x_j x_l k^2/delta^2 + (3/2) x_j x_l/delta^2      (l != j)
    //   d_3 v^(j) = 6 x_j k/delta^2
    //   d_3 v^(3) = (18|x'|^2/delta^2 - 6/delta) k^2 - (3/2)(|x'|^2/delta^2 - 1/delta)
    //   d_j v^(3) = d_j k (1 + 6(q - 1/3)(3k^2 - 1/4)) + 12 x_j (1 - q)(k^3 - k/4)/delta
    // with q = |x'|^2/delta and d_j k = -2 x_j k/delta.
    fn expanded_gradient(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let (r2, delta, k) = self.parts(x);
        let d2 = delta * delta;
        let k2 = k * k;
        let q = r2 / delta;
        let mut g = vec![vec![0.0; 3]; 3];
        for j in 0..2 {
            let l = 1 - j;
            g[j][j] = (3.0 / delta - 18.0 * x[j] * x[j] / d2) * k2
                - 0.25 * (3.0 / delta - 6.0 * x[j] * x[j] / d2);
            g[j][l] = -18.0 * x[j] * x[l] * k2 / d2 + 1.5 * x[j] * x[l] / d2;
            g[j][2] = 6.0 * x[j] * k / d2;
            let dk = -2.0 * x[j] * k / delta;
            g[2][j] = dk * (1.0 + 6.0 * (q - 1.0 / 3.0) * (3.0 * k2 - 0.25))
                + 12.0 * x[j] * (1.0 - q) * (k2 * k - 0.25 * k) / delta;
        }
        g[2][2] = (18.0 * r2 / d2 - 6.0 / delta) * k2 - 1.5 * (r2 / d2 - 1.0 / delta);
        g
    }

    //   d_j p = 6 mu x_j/delta^3 + 72 mu x_j (1 - 2q) k^2/delta^2
    //   d_3 p = 36 mu (q - 1/3) k/delta^2
    fn expanded_pressure_gradient(&self, x: &[f64]) -> Vec<f64> {
        let (r2, delta, k) = self.parts(x);
        let mu = self.mu;
        let q = r2 / delta;
        let d2 = delta * delta;
        let mut g: Vec<f64> = (0..2)
            .map(|j| {
                6.0 * mu * x[j] / (d2 * delta) + 72.0 * mu * x[j] * (1.0 - 2.0 * q) * k * k / d2
            })
            .collect();
        g.push(36.0 * mu * (q - 1.0 / 3.0) * k / d2);
        g.iter().map(|v| v * self.pressure_sign).collect()
    }

    fn require_cancellation_field(&self) -> Result<()> {
        if !(self.dim() == 3 && self.mode.alpha() == 3 && self.particle == 1) {
            return Err(Error::Unsupported(
                "the vertical cancellation identity belongs to the 3D mode-3 field of particle 1"
                    .into(),
            ));
        }
        if self.kappa != 1.0 {
            return Err(Error::UnsupportedGeometry(
                "cancellation identity needs unit curvature".into(),
            ));
        }
        Ok(())
    }

    /// `mu d33 v^(3) - d3 p` from hand-coded second derivatives; identically zero.
    ///
    /// `d33 v^(3) = (18|x'|^2/delta^2 - 6/delta) 2k/delta` and
    /// `d3 p = (18 mu/delta)(|x'|^2/delta - 1/3) 2k/delta`.
    pub fn vertical_cancellation(&self, x: &[f64]) -> Result<f64> {
        self.require_cancellation_field()?;
        check_neck(&self.geom, x)?;
        let (r2, delta, k) = self.parts(x);
        let d33 = (18.0 * r2 / (delta * delta) - 6.0 / delta) * 2.0 * k / delta;
        let d3p = self.pressure_sign * 18.0 * self.mu / delta * (r2 / delta - 1.0 / 3.0) * 2.0 * k
            / delta;
        Ok(self.mu * d33 - d3p)
    }

    /// Same combination from central differences in `x_d` with the given step.
    pub fn vertical_cancellation_fd(&self, x: &[f64], step: f64) -> Result<f64> {
        self.require_cancellation_field()?;
        check_neck(&self.geom, x)?;
        check_step(step)?;
        let at = |dz: f64| -> Result<(f64, f64)> {
            let y = [x[0], x[1], x[2] + dz];
            let (v, p) = self.eval_dual_checked(&y)?;
            Ok((v[2], p))
        };
        let (vp, pp) = at(step)?;
        let (v0, _) = at(0.0)?;
        let (vm, pm) = at(-step)?;
        Ok(self.mu * (vp - 2.0 * v0 + vm) / (step * step) - (pp - pm) / (2.0 * step))
    }

    fn eval_dual_checked(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_neck(&self.geom, x)?;
        let (v, p) = self.eval_dual(x);
        Ok((v[..self.dim()].iter().map(|c| c.v).collect(), p.v))
    }

    /// `mu Delta v - grad p` by fourth-order differences of `v` and second-order
    /// differences of `p`.
    pub fn stokes_residual(&self, x: &[f64], step: f64) -> Result<ResidualSample> {
        check_neck(&self.geom, x)?;
        check_step(step)?;
        let dim = self.dim();
        let d = dim - 1;
        let delta = self.geom.gap_width(&x[..d])?;
        if step > delta / 16.0 {
            return Err(Error::InvalidStep(format!(
                "step {step} exceeds delta/16 = {}",
                delta / 16.0
            )));
        }
        let top = self.geom.upper_boundary(&x[..d])?;
        let bottom = self.geom.lower_boundary(&x[..d])?;
        let clearance = (top - x[d]).min(x[d] - bottom);
        if clearance < 4.0 * step {
            return Err(Error::InvalidStep(format!(
                "clearance {clearance:.3e} is below four steps ({:.3e})",
                4.0 * step
            )));
        }
        let eval = |y: &[f64]| {
            self.eval_dual_checked(y)
                .map_err(|e| Error::InvalidStep(e.to_string()))
        };
        let (v0, _) = eval(x)?;
        let mut lap = vec![0.0; dim];
        let mut grad_p = vec![0.0; dim];
        let mut y = x.to_vec();
        for l in 0..dim {
            let mut vals = [
                (Vec::new(), 0.0),
                (Vec::new(), 0.0),
                (Vec::new(), 0.0),
                (Vec::new(), 0.0),
            ];
            for (slot, off) in [-2.0, -1.0, 1.0, 2.0].into_iter().enumerate() {
                y[l] = x[l] + off * step;
                vals[slot] = eval(&y)?;
            }
            y[l] = x[l];
            for j in 0..dim {
                lap[j] += (-vals[0].0[j] + 16.0 * vals[1].0[j] - 30.0 * v0[j]
                    + 16.0 * vals[2].0[j]
                    - vals[3].0[j])
                    / (12.0 * step * step);
            }
            grad_p[l] = (vals[2].1 - vals[1].1) / (2.0 * step);
        }
        let f: Vec<f64> = (0..dim).map(|j| self.mu * lap[j] - grad_p[j]).collect();
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rp = x[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
        let normalized_ratio = if dim == 3 && self.mode.alpha() == 4 {
            norm * delta.powf(1.5)
        } else {
            norm * delta * delta / (rp + delta)
        };
        Ok(ResidualSample {
            point: x.to_vec(),
            f,
            normalized_ratio,
        })
    }
}

fn check_step(step: f64) -> Result<()> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidStep(format!(
            "step must be positive, got {step}"
        )));
    }
    Ok(())
}
