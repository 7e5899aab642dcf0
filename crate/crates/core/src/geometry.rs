//! Two particles separated by a small gap of width `eps`.
//!
//! Coordinates are `(x', x_d)` with the gap axis last. Particle 1 sits above the
//! plane `x_d = 0` and particle 2 below; their facing boundaries are the graphs
//! `x_d = eps/2 + h1(x')` and `x_d = -eps/2 - h2(x')`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Height of a flattened quadratic particle above its lowest point.
pub const BOWL_HEIGHT: f64 = 2.0;

/// Shape of one particle boundary near the gap, measured from the gap plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GapProfile {
    /// `h(x') = kappa |x'|^2 / 2`.
    Quadratic { kappa: f64 },
    /// Ball of the given radius touching the gap plane from one side.
    Circle { radius: f64 },
}

impl GapProfile {
    fn validate(&self) -> Result<()> {
        match *self {
            GapProfile::Quadratic { kappa } if !(kappa.is_finite() && kappa > 0.0) => Err(
                Error::Domain(format!("curvature must be positive, got {kappa}")),
            ),
            GapProfile::Circle { radius } if !(radius.is_finite() && radius > 0.0) => Err(
                Error::Domain(format!("radius must be positive, got {radius}")),
            ),
            _ => Ok(()),
        }
    }

    /// Profile height at squared horizontal distance `r2`.
    pub fn height(&self, r2: f64) -> Result<f64> {
        match *self {
            GapProfile::Quadratic { kappa } => Ok(0.5 * kappa * r2),
            GapProfile::Circle { radius } => {
                let s = radius * radius - r2;
                if s <= 0.0 {
                    return Err(Error::OutOfRange(format!(
                        "|x'| = {} is not below the particle radius {radius}",
                        r2.sqrt()
                    )));
                }
                // radius - sqrt(radius^2 - r2), written without cancellation
                Ok(r2 / (radius + s.sqrt()))
            }
        }
    }

    /// Curvature at the point closest to the gap.
    pub fn curvature(&self) -> f64 {
        match *self {
            GapProfile::Quadratic { kappa } => kappa,
            GapProfile::Circle { radius } => 1.0 / radius,
        }
    }
}

/// Outer boundary of the flow domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OuterDomain {
    /// Ball centred at the origin.
    Ball { radius: f64 },
    /// Axis-aligned cube `[-half_width, half_width]^d`.
    Box { half_width: f64 },
}

impl OuterDomain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            OuterDomain::Ball { radius } => x.iter().map(|v| v * v).sum::<f64>() < radius * radius,
            OuterDomain::Box { half_width } => x.iter().all(|v| v.abs() < half_width),
        }
    }

    /// Half width of the smallest centred cube containing the domain.
    pub fn extent(&self) -> f64 {
        match *self {
            OuterDomain::Ball { radius } => radius,
            OuterDomain::Box { half_width } => half_width,
        }
    }
}

/// Where a point sits relative to the particles and the outer boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    InsideD1,
    InsideD2,
    Fluid,
    OutsideD,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapGeometry {
    dim: usize,
    eps: f64,
    profile1: GapProfile,
    profile2: GapProfile,
    neck_radius: f64,
    outer: OuterDomain,
}

impl GapGeometry {
    pub fn new(
        dim: usize,
        eps: f64,
        profile1: GapProfile,
        profile2: GapProfile,
        neck_radius: f64,
        outer: OuterDomain,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Domain(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        if !(eps.is_finite() && eps > 0.0 && eps < 0.5) {
            return Err(Error::Domain(format!(
                "eps must lie in (0, 1/2), got {eps}"
            )));
        }
        if !(neck_radius.is_finite() && neck_radius > 0.0) {
            return Err(Error::Domain(format!(
                "neck radius must be positive, got {neck_radius}"
            )));
        }
        profile1.validate()?;
        profile2.validate()?;
        if outer.extent() <= 0.0 || !outer.extent().is_finite() {
            return Err(Error::Domain(
                "outer domain must have positive extent".into(),
            ));
        }
        Ok(Self {
            dim,
            eps,
            profile1,
            profile2,
            neck_radius,
            outer,
        })
    }

    /// Two unit balls in the ball of radius 4, neck radius 1/2.
    pub fn unit_disks(dim: usize, eps: f64) -> Result<Self> {
        let c = GapProfile::Circle { radius: 1.0 };
        Self::new(dim, eps, c, c, 0.5, OuterDomain::Ball { radius: 4.0 })
    }

    /// Symmetric quadratic profiles `h1 = h2 = kappa |x'|^2 / 2`.
    pub fn quadratic(dim: usize, eps: f64, kappa: f64) -> Result<Self> {
        let q = GapProfile::Quadratic { kappa };
        Self::new(dim, eps, q, q, 0.5, OuterDomain::Ball { radius: 4.0 })
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(
            self.dim,
            eps,
            self.profile1,
            self.profile2,
            self.neck_radius,
            self.outer,
        )
    }

    pub fn with_outer(&self, outer: OuterDomain) -> Result<Self> {
        Self::new(
            self.dim,
            self.eps,
            self.profile1,
            self.profile2,
            self.neck_radius,
            outer,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn profiles(&self) -> (GapProfile, GapProfile) {
        (self.profile1, self.profile2)
    }
    pub fn neck_radius(&self) -> f64 {
        self.neck_radius
    }
    pub fn outer(&self) -> OuterDomain {
        self.outer
    }

    /// `Some(kappa)` when both profiles are the same quadratic.
    pub fn symmetric_quadratic(&self) -> Option<f64> {
        match (self.profile1, self.profile2) {
            (GapProfile::Quadratic { kappa: a }, GapProfile::Quadratic { kappa: b }) if a == b => {
                Some(a)
            }
            _ => None,
        }
    }

    fn check_horizontal(&self, xp: &[f64]) -> Result<f64> {
        if xp.len() + 1 != self.dim {
            return Err(Error::Domain(format!(
                "expected {} horizontal coordinates, got {}",
                self.dim - 1,
                xp.len()
            )));
        }
        if xp.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite coordinate".into()));
        }
        Ok(xp.iter().map(|v| v * v).sum())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Domain(format!(
                "expected {} coordinates, got {}",
                self.dim,
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite coordinate".into()));
        }
        Ok(())
    }

    /// Vertical distance `delta(x') = eps + h1(x') + h2(x')` between the particles.
    pub fn gap_width(&self, xp: &[f64]) -> Result<f64> {
        let r2 = self.check_horizontal(xp)?;
        Ok(self.eps + self.profile1.height(r2)? + self.profile2.height(r2)?)
    }

    /// Height of the lower boundary of particle 1.
    pub fn upper_boundary(&self, xp: &[f64]) -> Result<f64> {
        let r2 = self.check_horizontal(xp)?;
        Ok(0.5 * self.eps + self.profile1.height(r2)?)
    }

    /// Height of the upper boundary of particle 2.
    pub fn lower_boundary(&self, xp: &[f64]) -> Result<f64> {
        let r2 = self.check_horizontal(xp)?;
        Ok(-0.5 * self.eps - self.profile2.height(r2)?)
    }

    fn particle_contains(&self, profile: GapProfile, xp2: f64, height: f64) -> bool {
        // `height` is measured away from the gap, starting at the particle's tip
        match profile {
            GapProfile::Circle { radius } => {
                let c = height - radius;
                xp2 + c * c < radius * radius
            }
            GapProfile::Quadratic { kappa } => height > 0.5 * kappa * xp2 && height < BOWL_HEIGHT,
        }
    }

    pub fn in_particle1(&self, x: &[f64]) -> bool {
        let d = x.len() - 1;
        let r2: f64 = x[..d].iter().map(|v| v * v).sum();
        self.particle_contains(self.profile1, r2, x[d] - 0.5 * self.eps)
    }

    pub fn in_particle2(&self, x: &[f64]) -> bool {
        let d = x.len() - 1;
        let r2: f64 = x[..d].iter().map(|v| v * v).sum();
        self.particle_contains(self.profile2, r2, -x[d] - 0.5 * self.eps)
    }

    pub fn classify(&self, x: &[f64]) -> Result<Region> {
        self.check_point(x)?;
        Ok(self.classify_unchecked(x))
    }

    pub(crate) fn classify_unchecked(&self, x: &[f64]) -> Region {
        if self.in_particle1(x) {
            Region::InsideD1
        } else if self.in_particle2(x) {
            Region::InsideD2
        } else if !self.outer.contains(x) {
            Region::OutsideD
        } else {
            Region::Fluid
        }
    }

    /// Membership in the neck `{|x'| < r, lower(x') < x_d < upper(x')}`.
    pub fn neck_contains(&self, x: &[f64], r: f64) -> Result<bool> {
        self.check_point(x)?;
        let d = self.dim - 1;
        let r2: f64 = x[..d].iter().map(|v| v * v).sum();
        if r2 >= r * r {
            return Ok(false);
        }
        let (top, bottom) = match (self.upper_boundary(&x[..d]), self.lower_boundary(&x[..d])) {
            (Ok(t), Ok(b)) => (t, b),
            _ => return Ok(false),
        };
        Ok(x[d] > bottom && x[d] < top)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gap_width() {
        let g = GapGeometry::quadratic(2, 0.1, 1.0).unwrap();
        assert!((g.gap_width(&[0.2]).unwrap() - 0.14).abs() < 1e-15);
        let g3 = GapGeometry::quadratic(3, 0.1, 1.0).unwrap();
        assert!((g3.gap_width(&[0.1, 0.2]).unwrap() - 0.15).abs() < 1e-15);
    }

    #[test]
    fn circle_gap_matches_closed_form() {
        let g = GapGeometry::unit_disks(2, 0.05).unwrap();
        let x: f64 = 0.3;
        let expected = 0.05 + 2.0 * (1.0 - (1.0 - x * x).sqrt());
        assert!((g.gap_width(&[x]).unwrap() - expected).abs() < 1e-14);
        assert!(matches!(g.gap_width(&[1.5]), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn rejects_bad_eps() {
        assert!(matches!(
            GapGeometry::quadratic(2, -0.1, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            GapGeometry::quadratic(2, 0.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            GapGeometry::quadratic(4, 0.1, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn classify_unit_disks() {
        let g = GapGeometry::unit_disks(2, 0.1).unwrap();
        assert_eq!(g.classify(&[0.0, 0.0]).unwrap(), Region::Fluid);
        assert_eq!(g.classify(&[0.0, 1.0]).unwrap(), Region::InsideD1);
        assert_eq!(g.classify(&[0.0, -1.0]).unwrap(), Region::InsideD2);
        assert_eq!(g.classify(&[3.0, 3.0]).unwrap(), Region::OutsideD);
        assert!(g.classify(&[0.0]).is_err());
    }

    #[test]
    fn neck_membership() {
        let g = GapGeometry::quadratic(2, 0.1, 1.0).unwrap();
        assert!(g.neck_contains(&[0.0, 0.0], 0.5).unwrap());
        assert!(!g.neck_contains(&[0.0, 0.06], 0.5).unwrap());
        assert!(!g.neck_contains(&[0.6, 0.0], 0.5).unwrap());
        assert!(g.neck_contains(&[0.3, 0.09], 0.5).unwrap());
    }
}
