//! Poincaré half-space model of hyperbolic 3-space.
//!
//! Points live in `{z > 0}` with metric `z^{-2}(dx^2 + dy^2 + dz^2)`.
//! Two geodesic families appear: the vertical axis `t -> (0,0,e^t)` and
//! the half-circles orthogonal to the boundary plane, both unit-speed.

use crate::error::{Error, Result};

/// A point of the open upper half-space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(z > 0.0) || !z.is_finite() || !x.is_finite() || !y.is_finite() {
            return Err(Error::Domain(format!(
                "half-space point needs finite coordinates with z > 0, got ({x}, {y}, {z})"
            )));
        }
        Ok(Self { x, y, z })
    }
}

/// arcosh(1 + u) for u >= 0, computed without cancellation near u = 0.
pub(crate) fn acosh1p(u: f64) -> f64 {
    debug_assert!(u >= -1e-12);
    let u = u.max(0.0);
    (u + (u * (u + 2.0)).sqrt()).ln_1p()
}

/// Hyperbolic distance between two half-space points.
///
/// arcosh(1 + |p - q|^2 / (2 p.z q.z)), stable for nearby points.
pub fn distance3(p: Point3, q: Point3) -> f64 {
    let dx = q.x - p.x;
    let dy = q.y - p.y;
    let dz = q.z - p.z;
    let u = (dx * dx + dy * dy + dz * dz) / (2.0 * p.z * q.z);
    acosh1p(u)
}

/// The canonical vertical geodesic, `t -> (0, 0, e^t)`, unit-speed.
#[derive(Debug, Clone, Copy, Default)]
pub struct AxisGeodesic;

/// Point on the axis geodesic at arclength parameter `t`.
pub fn gamma1(t: f64) -> Point3 {
    Point3 {
        x: 0.0,
        y: 0.0,
        z: t.exp(),
    }
}

/// A half-circle geodesic of Euclidean radius `r` centered at `(a, 0, 0)`,
/// in the plane tilted by `beta` from the common-plane position.
#[derive(Debug, Clone, Copy)]
pub struct CircleGeodesic {
    a: f64,
    r: f64,
    beta: f64,
}

impl CircleGeodesic {
    /// Canonical form requires `a >= 0`, `r > 0`, `beta in (0, pi/2]`.
    /// Inputs outside that range are rejected, not re-normalized.
    pub fn new(a: f64, r: f64, beta: f64) -> Result<Self> {
        let mut problems = Vec::new();
        if !(a >= 0.0) || !a.is_finite() {
            problems.push(format!("a must be >= 0, got {a}"));
        }
        if !(r > 0.0) || !r.is_finite() {
            problems.push(format!("r must be > 0, got {r}"));
        }
        if !(beta > 0.0 && beta <= std::f64::consts::FRAC_PI_2) {
            problems.push(format!("beta out of (0, pi/2], got {beta}"));
        }
        if problems.is_empty() {
            Ok(Self { a, r, beta })
        } else {
            Err(Error::Domain(problems.join("; ")))
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Arclength parametrization of the half-circle.
    pub fn point(&self, s: f64) -> Point3 {
        gamma2(s, self)
    }
}

/// Point on a circle geodesic at arclength parameter `s`.
pub fn gamma2(s: f64, g: &CircleGeodesic) -> Point3 {
    // (1 - e^{2s}) / (1 + e^{2s}) = -tanh(s), 2 e^s / (1 + e^{2s}) = sech(s)
    let c = -s.tanh();
    let sech = 1.0 / s.cosh();
    Point3 {
        x: g.a + c * g.r * g.beta.cos(),
        y: c * g.r * g.beta.sin(),
        z: g.r * sech,
    }
}

/// Hyperbolic distance from `p` to the full z-axis geodesic:
/// arcosh(sqrt(1 + (x/z)^2 + (y/z)^2)).
pub fn dist_to_axis(p: Point3) -> f64 {
    let q = (p.x * p.x + p.y * p.y) / (p.z * p.z);
    // arcosh(sqrt(1+q)) = arcosh(1 + u), u = q / (sqrt(1+q) + 1)
    acosh1p(q / ((1.0 + q).sqrt() + 1.0))
}

/// The set of points within hyperbolic distance `R` of the axis geodesic;
/// equivalently the Euclidean cone `z >= sqrt(x^2+y^2)/sqrt(cosh^2 R - 1)`.
#[derive(Debug, Clone, Copy)]
pub struct Tube {
    radius: f64,
}

impl Tube {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Domain(format!("tube radius must be > 0, got {radius}")));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Cone-inequality form of membership.
    pub fn contains(&self, p: Point3) -> bool {
        let ch = self.radius.cosh();
        let slope2 = ch * ch - 1.0;
        p.z * p.z * slope2 >= p.x * p.x + p.y * p.y
    }

    /// Parameter window where a circle geodesic meets the tube.
    ///
    /// Returns `(u_minus, u_plus)` such that `gamma2(s)` is inside iff
    /// `u_minus <= e^{2s} <= u_plus` (`u_plus` is `+inf` when the leading
    /// quadratic coefficient degenerates). `None` means no intersection.
    pub fn interval(&self, g: &CircleGeodesic) -> Option<(f64, f64)> {
        let (a, r) = (g.a, g.r);
        let d1sq = a * a + r * r - 2.0 * a * r * g.beta.cos();
        let d2sq = a * a + r * r + 2.0 * a * r * g.beta.cos();
        let ch = self.radius.cosh();
        // quadratic in u = e^{2s}: d1^2 u^2 + 2(a^2 + r^2 - 2 cosh^2 R r^2) u + d2^2 <= 0
        let half_b = a * a + r * r - 2.0 * ch * ch * r * r;
        if half_b >= 0.0 {
            // both roots (if any) would be non-positive
            return None;
        }
        let disc = half_b * half_b - d1sq * d2sq;
        if disc < 0.0 {
            return None;
        }
        if d1sq == 0.0 {
            return Some((d2sq / (-2.0 * half_b), f64::INFINITY));
        }
        let sq = disc.sqrt();
        // -half_b > 0, so the larger root is cancellation-free; recover the
        // smaller one from the product of roots d2^2/d1^2 instead of the
        // subtractive formula
        let u_plus = (-half_b + sq) / d1sq;
        Some((d2sq / (d1sq * u_plus), u_plus))
    }
}
