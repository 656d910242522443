//! Geometric optics in the two-layered medium: optical path lengths, the
//! Snell refraction point on the interface, closed-form Hessians of the
//! travel-time function, set-level optical distances and the enclosure
//! region.
//!
//! Throughout, the interface is the plane `x3 = 0`; the lower half-space
//! (`x3 < 0`) carries the coefficient `gamma_minus`, the upper one
//! `gamma_plus`, and wave speeds are `sqrt(gamma)`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A point of R^3. `x3` is the signed vertical coordinate; the obstacle
/// lives in `x3 < 0`, the source ball in `x3 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl Point3 {
    pub fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }

    pub fn horizontal(&self) -> [f64; 2] {
        [self.x1, self.x2]
    }

    pub fn sub(&self, other: &Point3) -> Point3 {
        Point3::new(self.x1 - other.x1, self.x2 - other.x2, self.x3 - other.x3)
    }

    pub fn add(&self, other: &Point3) -> Point3 {
        Point3::new(self.x1 + other.x1, self.x2 + other.x2, self.x3 + other.x3)
    }

    pub fn scale(&self, s: f64) -> Point3 {
        Point3::new(self.x1 * s, self.x2 * s, self.x3 * s)
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2 + self.x3 * other.x3
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(&self, other: &Point3) -> f64 {
        self.sub(other).norm()
    }

    /// Distance to the interface point `(z1, z2, 0)`.
    pub fn dist_to_interface_point(&self, z: [f64; 2]) -> f64 {
        let d1 = self.x1 - z[0];
        let d2 = self.x2 - z[1];
        (d1 * d1 + d2 * d2 + self.x3 * self.x3).sqrt()
    }
}

/// The two-layer background coefficient: `gamma_plus` above the interface,
/// `gamma_minus` below. The main theorems assume `gamma_plus < gamma_minus`
/// (no total reflection for waves incident from below), and the constructor
/// enforces it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LayeredMedium {
    pub gamma_plus: f64,
    pub gamma_minus: f64,
}

impl LayeredMedium {
    pub fn new(gamma_plus: f64, gamma_minus: f64) -> Result<Self> {
        if !(gamma_plus > 0.0) || !(gamma_minus > 0.0) {
            return Err(Error::Configuration(format!(
                "layer coefficients must be positive, got gamma_plus={gamma_plus}, gamma_minus={gamma_minus}"
            )));
        }
        if gamma_plus >= gamma_minus {
            return Err(Error::Configuration(format!(
                "gamma_plus < gamma_minus is required (got {gamma_plus} >= {gamma_minus}); \
                 the slower upper layer rules out total reflection from below"
            )));
        }
        Ok(Self {
            gamma_plus,
            gamma_minus,
        })
    }

    /// Equal-speed medium. Outside the main assumption; used by
    /// degeneration tests where the layered kernel must collapse to the
    /// free-space one.
    pub fn equal_speeds(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::Configuration(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        Ok(Self {
            gamma_plus: gamma,
            gamma_minus: gamma,
        })
    }

    /// a0 = sqrt(gamma_minus / gamma_plus), >= 1.
    pub fn a0(&self) -> f64 {
        (self.gamma_minus / self.gamma_plus).sqrt()
    }

    pub fn slow_minus(&self) -> f64 {
        1.0 / self.gamma_minus.sqrt()
    }

    pub fn slow_plus(&self) -> f64 {
        1.0 / self.gamma_plus.sqrt()
    }
}

/// The source ball B: the initial datum is `amplitude` on B (optionally
/// cosine-tapered at the rim by the solver) and zero outside.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SourceBall {
    pub center: Point3,
    pub radius: f64,
    pub amplitude: f64,
}

impl SourceBall {
    pub fn new(center: Point3, radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Configuration(format!(
                "source radius must be positive, got {radius}"
            )));
        }
        if center.x3 - radius <= 0.0 {
            return Err(Error::Configuration(format!(
                "source ball must have closure in the upper half-space: center x3={} radius={}",
                center.x3, radius
            )));
        }
        if amplitude == 0.0 || !amplitude.is_finite() {
            return Err(Error::Configuration(
                "source amplitude must be nonzero and finite".into(),
            ));
        }
        Ok(Self {
            center,
            radius,
            amplitude,
        })
    }
}

/// Obstacle shapes supported by the pipeline.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Ball { center: Point3, radius: f64 },
    Box { lo: Point3, hi: Point3 },
}

impl Shape {
    /// Highest and lowest x3 of the closure.
    pub fn x3_range(&self) -> (f64, f64) {
        match self {
            Shape::Ball { center, radius } => (center.x3 - radius, center.x3 + radius),
            Shape::Box { lo, hi } => (lo.x3, hi.x3),
        }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        match self {
            Shape::Ball { center, radius } => p.dist(center) <= *radius,
            Shape::Box { lo, hi } => {
                p.x1 >= lo.x1
                    && p.x1 <= hi.x1
                    && p.x2 >= lo.x2
                    && p.x2 <= hi.x2
                    && p.x3 >= lo.x3
                    && p.x3 <= hi.x3
            }
        }
    }

    /// Axis-aligned bounding box.
    pub fn bounds(&self) -> (Point3, Point3) {
        match self {
            Shape::Ball { center, radius } => (
                Point3::new(center.x1 - radius, center.x2 - radius, center.x3 - radius),
                Point3::new(center.x1 + radius, center.x2 + radius, center.x3 + radius),
            ),
            Shape::Box { lo, hi } => (*lo, *hi),
        }
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, p: &Point3) -> Point3 {
        match self {
            Shape::Ball { center, .. } => {
                let d = p.sub(center);
                d.scale(1.0 / d.norm())
            }
            Shape::Box { lo, hi } => {
                // nearest face wins
                let gaps = [
                    (p.x1 - lo.x1, Point3::new(-1.0, 0.0, 0.0)),
                    (hi.x1 - p.x1, Point3::new(1.0, 0.0, 0.0)),
                    (p.x2 - lo.x2, Point3::new(0.0, -1.0, 0.0)),
                    (hi.x2 - p.x2, Point3::new(0.0, 1.0, 0.0)),
                    (p.x3 - lo.x3, Point3::new(0.0, 0.0, -1.0)),
                    (hi.x3 - p.x3, Point3::new(0.0, 0.0, 1.0)),
                ];
                gaps.iter()
                    .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                    .unwrap()
                    .1
            }
        }
    }
}

/// The penetrable obstacle D with a scalar isotropic contrast: the wave
/// coefficient is `gamma_minus + contrast` inside D. `contrast < 0` is
/// condition (A1), `contrast > 0` is (A2).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstacleSpec {
    pub shape: Shape,
    pub contrast: f64,
    #[serde(skip)]
    pub boundary_samples: Vec<Point3>,
}

/// Sign classification of the contrast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContrastClass {
    A1,
    A2,
    Undetermined,
}

impl std::fmt::Display for ContrastClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ContrastClass::A1 => write!(f, "A1"),
            ContrastClass::A2 => write!(f, "A2"),
            ContrastClass::Undetermined => write!(f, "undetermined"),
        }
    }
}

impl ObstacleSpec {
    pub fn new(shape: Shape, contrast: f64, medium: &LayeredMedium) -> Result<Self> {
        let (_, top) = shape.x3_range();
        if top >= 0.0 {
            return Err(Error::Configuration(format!(
                "obstacle closure must stay in the lower half-space (top at x3={top})"
            )));
        }
        if medium.gamma_minus + contrast <= 0.0 {
            return Err(Error::Configuration(format!(
                "ellipticity requires gamma_minus + contrast > 0 (got {} + {})",
                medium.gamma_minus, contrast
            )));
        }
        let mut spec = Self {
            shape,
            contrast,
            boundary_samples: Vec::new(),
        };
        spec.boundary_samples = spec.sample_boundary(DEFAULT_BOUNDARY_SAMPLES);
        Ok(spec)
    }

    pub fn class(&self) -> ContrastClass {
        if self.contrast < 0.0 {
            ContrastClass::A1
        } else if self.contrast > 0.0 {
            ContrastClass::A2
        } else {
            ContrastClass::Undetermined
        }
    }

    /// Quasi-uniform boundary sampling: Fibonacci sphere for balls, per-face
    /// lattices for boxes.
    pub fn sample_boundary(&self, n: usize) -> Vec<Point3> {
        match &self.shape {
            Shape::Ball { center, radius } => fibonacci_sphere(*center, *radius, n),
            Shape::Box { lo, hi } => box_boundary(lo, hi, n),
        }
    }

    /// Deterministic volumetric samples of D (lattice points inside).
    pub fn sample_volume(&self, per_axis: usize) -> Vec<Point3> {
        let (lo, hi) = self.shape.bounds();
        let mut out = Vec::new();
        let n = per_axis.max(2);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let frac = |m: usize| (m as f64 + 0.5) / n as f64;
                    let p = Point3::new(
                        lo.x1 + frac(i) * (hi.x1 - lo.x1),
                        lo.x2 + frac(j) * (hi.x2 - lo.x2),
                        lo.x3 + frac(k) * (hi.x3 - lo.x3),
                    );
                    if self.shape.contains(&p) {
                        out.push(p);
                    }
                }
            }
        }
        out
    }
}

pub const DEFAULT_BOUNDARY_SAMPLES: usize = 4096;

fn fibonacci_sphere(center: Point3, radius: f64, n: usize) -> Vec<Point3> {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) / n as f64;
            let cos_th = 1.0 - 2.0 * t;
            let sin_th = (1.0 - cos_th * cos_th).max(0.0).sqrt();
            let phi = 2.0 * std::f64::consts::PI * (i as f64 / golden).fract();
            Point3::new(
                center.x1 + radius * sin_th * phi.cos(),
                center.x2 + radius * sin_th * phi.sin(),
                center.x3 + radius * cos_th,
            )
        })
        .collect()
}

fn box_boundary(lo: &Point3, hi: &Point3, n: usize) -> Vec<Point3> {
    let per_face = ((n / 6) as f64).sqrt().ceil() as usize;
    let m = per_face.max(2);
    let mut out = Vec::new();
    let lin = |a: f64, b: f64, i: usize| a + (i as f64 + 0.5) / m as f64 * (b - a);
    for i in 0..m {
        for j in 0..m {
            let (u1, u2) = (lin(lo.x1, hi.x1, i), lin(lo.x2, hi.x2, j));
            out.push(Point3::new(u1, u2, lo.x3));
            out.push(Point3::new(u1, u2, hi.x3));
            let (v2, v3) = (lin(lo.x2, hi.x2, i), lin(lo.x3, hi.x3, j));
            out.push(Point3::new(lo.x1, v2, v3));
            out.push(Point3::new(hi.x1, v2, v3));
            let (w1, w3) = (lin(lo.x1, hi.x1, i), lin(lo.x3, hi.x3, j));
            out.push(Point3::new(w1, lo.x2, w3));
            out.push(Point3::new(w1, hi.x2, w3));
        }
    }
    out
}

/// The refraction point and the local data of the travel-time function at
/// its minimum.
#[derive(Debug, Clone, Copy)]
pub struct SnellSolution {
    /// Refraction point on the interface plane.
    pub z_prime: [f64; 2],
    /// Optical distance l(x, y).
    pub l_value: f64,
    /// Angle to the vertical on the lower leg.
    pub theta_minus: f64,
    /// Angle to the vertical on the upper leg.
    pub theta_plus: f64,
    /// Hessian of the travel time at the minimizer.
    pub hessian: [[f64; 2]; 2],
    pub det_h: f64,
    /// Eigenvalue along the horizontal ray direction.
    pub eig_tangent: f64,
    /// Eigenvalue perpendicular to it.
    pub eig_perp: f64,
}

fn check_sides(x: &Point3, y: &Point3) -> Result<()> {
    if x.x3 >= 0.0 || y.x3 <= 0.0 {
        return Err(Error::Precondition(format!(
            "need x3 < 0 < y3, got x3={}, y3={}",
            x.x3, y.x3
        )));
    }
    Ok(())
}

/// Travel time of the broken ray x -> (z', 0) -> y:
/// `|z~' - x| / sqrt(gamma_minus) + |z~' - y| / sqrt(gamma_plus)`.
pub fn path_length(x: &Point3, y: &Point3, z_prime: [f64; 2], medium: &LayeredMedium) -> Result<f64> {
    check_sides(x, y)?;
    Ok(path_length_unchecked(x, y, z_prime, medium))
}

#[inline]
pub(crate) fn path_length_unchecked(
    x: &Point3,
    y: &Point3,
    z_prime: [f64; 2],
    medium: &LayeredMedium,
) -> f64 {
    x.dist_to_interface_point(z_prime) * medium.slow_minus()
        + y.dist_to_interface_point(z_prime) * medium.slow_plus()
}

/// The unique minimizer of the travel time over interface points, i.e. the
/// Snell refraction point, together with angles and Hessian data.
///
/// The minimizer lies on the segment `[x', y']` and the restriction
/// `phi(t) = l_{x,y}(x' + t (y' - x'))` is strictly convex, so a
/// bisection-safeguarded Newton iteration on `phi'` is globally convergent.
pub fn snell_point(x: &Point3, y: &Point3, medium: &LayeredMedium) -> Result<SnellSolution> {
    check_sides(x, y)?;
    let dx1 = y.x1 - x.x1;
    let dx2 = y.x2 - x.x2;
    let d = (dx1 * dx1 + dx2 * dx2).sqrt();
    let sm = medium.slow_minus();
    let sp = medium.slow_plus();

    let z_prime = if d == 0.0 {
        [x.x1, x.x2]
    } else {
        // phi'(t) = sm * t d^2 / r_minus(t) - sp * (1 - t) d^2 / r_plus(t)
        let x3s = x.x3 * x.x3;
        let y3s = y.x3 * y.x3;
        let dphi = |t: f64| {
            let rm = (t * t * d * d + x3s).sqrt();
            let rp = ((1.0 - t) * (1.0 - t) * d * d + y3s).sqrt();
            sm * t * d * d / rm - sp * (1.0 - t) * d * d / rp
        };
        let ddphi = |t: f64| {
            let rm = (t * t * d * d + x3s).sqrt();
            let rp = ((1.0 - t) * (1.0 - t) * d * d + y3s).sqrt();
            sm * d * d * x3s / (rm * rm * rm) + sp * d * d * y3s / (rp * rp * rp)
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut t = sp * x.x3.abs() / (sp * x.x3.abs() + sm * y.x3.abs()); // straight-ray guess
        for _ in 0..200 {
            let g = dphi(t);
            if g.abs() <= 1e-13 {
                break;
            }
            if g > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let step = g / ddphi(t);
            let mut t_new = t - step;
            if !(t_new > lo && t_new < hi) {
                t_new = 0.5 * (lo + hi);
            }
            if (t_new - t).abs() < 1e-17 {
                t = t_new;
                break;
            }
            t = t_new;
        }
        [x.x1 + t * dx1, x.x2 + t * dx2]
    };

    let rm = x.dist_to_interface_point(z_prime);
    let rp = y.dist_to_interface_point(z_prime);
    let l_value = rm * sm + rp * sp;
    let hm1 = z_prime[0] - x.x1;
    let hm2 = z_prime[1] - x.x2;
    let sin_minus = (hm1 * hm1 + hm2 * hm2).sqrt() / rm;
    let hp1 = z_prime[0] - y.x1;
    let hp2 = z_prime[1] - y.x2;
    let sin_plus = (hp1 * hp1 + hp2 * hp2).sqrt() / rp;

    // unit horizontal ray direction; irrelevant (sin = 0) when x' = y'
    let e = if d == 0.0 { [1.0, 0.0] } else { [dx1 / d, dx2 / d] };

    let (hessian, eig_tangent, eig_perp, det_h) =
        hessian_at(rm, rp, sin_minus, sin_plus, e, x.x3, y.x3, medium);

    Ok(SnellSolution {
        z_prime,
        l_value,
        theta_minus: sin_minus.asin(),
        theta_plus: sin_plus.asin(),
        hessian,
        det_h,
        eig_tangent,
        eig_perp,
    })
}

#[allow(clippy::too_many_arguments)]
fn hessian_at(
    rm: f64,
    rp: f64,
    sin_minus: f64,
    sin_plus: f64,
    e: [f64; 2],
    x3: f64,
    y3: f64,
    medium: &LayeredMedium,
) -> ([[f64; 2]; 2], f64, f64, f64) {
    let am = medium.slow_minus() / rm;
    let ap = medium.slow_plus() / rp;
    let mut h = [[0.0f64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let delta = if i == j { 1.0 } else { 0.0 };
            h[i][j] = am * (delta - sin_minus * sin_minus * e[i] * e[j])
                + ap * (delta - sin_plus * sin_plus * e[i] * e[j]);
        }
    }
    let eig_tangent =
        x3 * x3 * medium.slow_minus() / (rm * rm * rm) + y3 * y3 * medium.slow_plus() / (rp * rp * rp);
    let eig_perp = am + ap;
    (h, eig_tangent, eig_perp, eig_tangent * eig_perp)
}

/// Closed-form Hessian of the travel time at the Snell point, with its
/// eigen-data. The tangent eigenvector is the horizontal ray direction.
pub fn hessian_closed_form(
    x: &Point3,
    y: &Point3,
    snell: &SnellSolution,
    medium: &LayeredMedium,
) -> ([[f64; 2]; 2], f64, f64, f64) {
    let rm = x.dist_to_interface_point(snell.z_prime);
    let rp = y.dist_to_interface_point(snell.z_prime);
    let d1 = y.x1 - x.x1;
    let d2 = y.x2 - x.x2;
    let d = (d1 * d1 + d2 * d2).sqrt();
    let e = if d == 0.0 { [1.0, 0.0] } else { [d1 / d, d2 / d] };
    hessian_at(
        rm,
        rp,
        snell.theta_minus.sin(),
        snell.theta_plus.sin(),
        e,
        x.x3,
        y.x3,
        medium,
    )
}

/// Set-level optical distances and the achieving pair.
#[derive(Debug, Clone, Copy)]
pub struct OpticalDistances {
    /// l(D, B) = l(D, p) - eta / sqrt(gamma_plus).
    pub l_db: f64,
    /// l(D, p): shortest optical path from the obstacle to the source center.
    pub l_dp: f64,
    /// Minimizing obstacle boundary point.
    pub x0: Point3,
    /// Minimizing source boundary point (on the ray from p toward the
    /// refraction point).
    pub y0: Point3,
    /// The refraction point of the minimizing ray x0 -> p.
    pub z0: [f64; 2],
}

/// l(D, p) by boundary sampling plus a local pattern-search polish over the
/// boundary chart, then l(D, B) = l(D, p) - eta / sqrt(gamma_plus).
pub fn optical_distance_sets(
    obstacle: &ObstacleSpec,
    source: &SourceBall,
    medium: &LayeredMedium,
) -> Result<OpticalDistances> {
    if obstacle.boundary_samples.is_empty() {
        return Err(Error::Configuration(
            "obstacle has no boundary samples".into(),
        ));
    }
    let p = source.center;
    let l_of = |pt: &Point3| -> f64 {
        snell_point(pt, &p, medium)
            .map(|s| s.l_value)
            .unwrap_or(f64::INFINITY)
    };

    let mut best = obstacle.boundary_samples[0];
    let mut best_l = l_of(&best);
    for s in &obstacle.boundary_samples[1..] {
        let l = l_of(s);
        if l < best_l {
            best_l = l;
            best = *s;
        }
    }

    let (x0, l_dp) = polish_on_boundary(&obstacle.shape, best, best_l, &l_of);
    let snell = snell_point(&x0, &p, medium)?;
    let z0 = snell.z_prime;
    // y0 = p + eta * (unit vector from p toward the interface point z~0)
    let z_tilde = Point3::new(z0[0], z0[1], 0.0);
    let dir = z_tilde.sub(&p);
    let y0 = p.add(&dir.scale(source.radius / dir.norm()));
    let l_db = l_dp - source.radius * medium.slow_plus();
    Ok(OpticalDistances {
        l_db,
        l_dp,
        x0,
        y0,
        z0,
    })
}

/// Shrinking pattern search over the boundary chart around a seed sample.
fn polish_on_boundary<F: Fn(&Point3) -> f64>(
    shape: &Shape,
    seed: Point3,
    seed_l: f64,
    l_of: &F,
) -> (Point3, f64) {
    match shape {
        Shape::Ball { center, radius } => {
            let d = seed.sub(center);
            let mut theta = (d.x3 / *radius).clamp(-1.0, 1.0).acos();
            let mut phi = d.x2.atan2(d.x1);
            let point = |th: f64, ph: f64| {
                Point3::new(
                    center.x1 + radius * th.sin() * ph.cos(),
                    center.x2 + radius * th.sin() * ph.sin(),
                    center.x3 + radius * th.cos(),
                )
            };
            let mut step = 0.1;
            let mut best = seed_l;
            while step > 1e-9 {
                let mut improved = false;
                for (dt, dp) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                    let cand = point(theta + dt, phi + dp);
                    let l = l_of(&cand);
                    if l < best {
                        best = l;
                        theta += dt;
                        phi += dp;
                        improved = true;
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            (point(theta, phi), best)
        }
        Shape::Box { lo, hi } => {
            // polish within the face of the seed point
            let mut q = seed;
            let mut best = seed_l;
            let face_x3 = (q.x3 - lo.x3).abs() < 1e-12 || (q.x3 - hi.x3).abs() < 1e-12;
            let face_x1 = (q.x1 - lo.x1).abs() < 1e-12 || (q.x1 - hi.x1).abs() < 1e-12;
            let mut step = 0.1 * (hi.sub(lo).norm());
            while step > 1e-10 {
                let mut improved = false;
                let moves: [(f64, f64, f64); 4] = if face_x3 {
                    [
                        (step, 0.0, 0.0),
                        (-step, 0.0, 0.0),
                        (0.0, step, 0.0),
                        (0.0, -step, 0.0),
                    ]
                } else if face_x1 {
                    [
                        (0.0, step, 0.0),
                        (0.0, -step, 0.0),
                        (0.0, 0.0, step),
                        (0.0, 0.0, -step),
                    ]
                } else {
                    [
                        (step, 0.0, 0.0),
                        (-step, 0.0, 0.0),
                        (0.0, 0.0, step),
                        (0.0, 0.0, -step),
                    ]
                };
                for (m1, m2, m3) in moves {
                    let cand = Point3::new(
                        (q.x1 + m1).clamp(lo.x1, hi.x1),
                        (q.x2 + m2).clamp(lo.x2, hi.x2),
                        (q.x3 + m3).clamp(lo.x3, hi.x3),
                    );
                    let l = l_of(&cand);
                    if l < best {
                        best = l;
                        q = cand;
                        improved = true;
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            (q, best)
        }
    }
}

/// A lattice over a query box in the lower half-space.
#[derive(Debug, Clone)]
pub struct QueryGrid {
    pub lo: Point3,
    pub hi: Point3,
    pub n: [usize; 3],
}

impl QueryGrid {
    pub fn point(&self, i: usize, j: usize, k: usize) -> Point3 {
        let f = |a: f64, b: f64, m: usize, n: usize| a + (m as f64 + 0.5) / n as f64 * (b - a);
        Point3::new(
            f(self.lo.x1, self.hi.x1, i, self.n[0]),
            f(self.lo.x2, self.hi.x2, j, self.n[1]),
            f(self.lo.x3, self.hi.x3, k, self.n[2]),
        )
    }
}

/// The enclosure region E(D; B, gamma_plus, gamma_minus) sampled on a
/// lattice: marks points with `l(x, p) > l_db + eta / sqrt(gamma_plus)`.
/// Every point of D satisfies the strict inequality when `l_db` is exact,
/// so the marked set is a guaranteed superset of D.
pub fn enclosure_region(
    l_db: f64,
    source: &SourceBall,
    medium: &LayeredMedium,
    grid: &QueryGrid,
) -> Result<Vec<bool>> {
    if !(l_db > 0.0) {
        return Err(Error::Precondition(format!(
            "l(D,B) must be positive, got {l_db}"
        )));
    }
    let threshold = l_db + source.radius * medium.slow_plus();
    let mut mask = Vec::with_capacity(grid.n[0] * grid.n[1] * grid.n[2]);
    for k in 0..grid.n[2] {
        for j in 0..grid.n[1] {
            for i in 0..grid.n[0] {
                let x = grid.point(i, j, k);
                let marked = if x.x3 >= 0.0 {
                    false
                } else {
                    let s = snell_point(&x, &source.center, medium)?;
                    s.l_value > threshold
                };
                mask.push(marked);
            }
        }
    }
    Ok(mask)
}

/// Membership test against the same threshold, for individual points.
pub fn in_enclosure_region(
    x: &Point3,
    l_db: f64,
    source: &SourceBall,
    medium: &LayeredMedium,
) -> Result<bool> {
    if x.x3 >= 0.0 {
        return Ok(false);
    }
    let s = snell_point(x, &source.center, medium)?;
    Ok(s.l_value > l_db + source.radius * medium.slow_plus())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn med(gp: f64, gm: f64) -> LayeredMedium {
        LayeredMedium::new(gp, gm).unwrap()
    }

    #[test]
    fn path_length_collinear_equal_speeds() {
        let m = LayeredMedium::equal_speeds(1.0).unwrap();
        let l = path_length(
            &Point3::new(0.0, 0.0, -1.0),
            &Point3::new(0.0, 0.0, 1.0),
            [0.0, 0.0],
            &m,
        )
        .unwrap();
        assert_relative_eq!(l, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn path_length_vertical_two_speeds() {
        let m = med(1.0, 4.0);
        let l = path_length(
            &Point3::new(0.0, 0.0, -1.0),
            &Point3::new(0.0, 0.0, 1.0),
            [0.0, 0.0],
            &m,
        )
        .unwrap();
        assert_relative_eq!(l, 1.5, max_relative = 1e-15);
    }

    #[test]
    fn path_length_offset_point() {
        let m = med(1.0, 4.0);
        let l = path_length(
            &Point3::new(3.0, 0.0, -1.0),
            &Point3::new(0.0, 0.0, 1.0),
            [1.0, 0.0],
            &m,
        )
        .unwrap();
        assert_relative_eq!(l, 5f64.sqrt() / 2.0 + 2f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn path_length_rejects_wrong_sides() {
        let m = med(1.0, 4.0);
        assert!(path_length(
            &Point3::new(0.0, 0.0, 1.0),
            &Point3::new(0.0, 0.0, 2.0),
            [0.0, 0.0],
            &m
        )
        .is_err());
    }

    #[test]
    fn snell_vertical_symmetry() {
        let m = med(1.0, 4.0);
        let s = snell_point(&Point3::new(0.0, 0.0, -1.0), &Point3::new(0.0, 0.0, 2.0), &m).unwrap();
        assert_eq!(s.z_prime, [0.0, 0.0]);
        assert_eq!(s.theta_minus, 0.0);
        assert_eq!(s.theta_plus, 0.0);
    }

    #[test]
    fn snell_equal_speeds_straight_ray() {
        // equal speeds: straight line from (0,0,-1) to (2,0,1) crosses at (1,0)
        let m = LayeredMedium::equal_speeds(1.0).unwrap();
        let x = Point3::new(0.0, 0.0, -1.0);
        let y = Point3::new(2.0, 0.0, 1.0);
        let s = snell_point(&x, &y, &m).unwrap();
        assert_relative_eq!(s.z_prime[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.l_value, x.dist(&y), epsilon = 1e-12);
    }

    #[test]
    fn snell_residual_small() {
        let m = med(1.0, 4.0);
        let s = snell_point(&Point3::new(2.0, 0.5, -1.0), &Point3::new(0.0, 0.0, 1.0), &m).unwrap();
        let resid =
            (s.theta_minus.sin() * m.slow_minus() - s.theta_plus.sin() * m.slow_plus()).abs();
        assert!(resid <= 1e-10, "Snell residual {resid}");
    }

    #[test]
    fn hessian_vertical_case() {
        let m = med(1.0, 4.0);
        let x = Point3::new(0.0, 0.0, -1.0);
        let y = Point3::new(0.0, 0.0, 1.0);
        let s = snell_point(&x, &y, &m).unwrap();
        let (h, et, ep, det) = hessian_closed_form(&x, &y, &s, &m);
        assert_relative_eq!(et, 1.5, epsilon = 1e-14);
        assert_relative_eq!(ep, 1.5, epsilon = 1e-14);
        assert_relative_eq!(det, 2.25, epsilon = 1e-14);
        assert_relative_eq!(h[0][0], 1.5, epsilon = 1e-14);
        assert_relative_eq!(h[1][1], 1.5, epsilon = 1e-14);
        assert_relative_eq!(h[0][1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let m = med(1.0, 4.0);
        let x = Point3::new(2.0, 0.0, -1.0);
        let y = Point3::new(0.0, 0.0, 1.0);
        let s = snell_point(&x, &y, &m).unwrap();
        let (h, _, _, det) = hessian_closed_form(&x, &y, &s, &m);
        let step = 1e-4;
        let f = |z: [f64; 2]| path_length_unchecked(&x, &y, z, &m);
        let z0 = s.z_prime;
        let mut h_fd = [[0.0f64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut zpp = z0;
                let mut zpm = z0;
                let mut zmp = z0;
                let mut zmm = z0;
                zpp[i] += step;
                zpp[j] += step;
                zpm[i] += step;
                zpm[j] -= step;
                zmp[i] -= step;
                zmp[j] += step;
                zmm[i] -= step;
                zmm[j] -= step;
                h_fd[i][j] = (f(zpp) - f(zpm) - f(zmp) + f(zmm)) / (4.0 * step * step);
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (h[i][j] - h_fd[i][j]).abs() <= 1e-5,
                    "H[{i}][{j}] {} vs fd {}",
                    h[i][j],
                    h_fd[i][j]
                );
            }
        }
        let det_fd = h_fd[0][0] * h_fd[1][1] - h_fd[0][1] * h_fd[1][0];
        assert!((det - det_fd).abs() <= 1e-5);
    }

    #[test]
    fn det_is_eigen_product() {
        let m = med(1.0, 3.0);
        let s = snell_point(&Point3::new(1.3, -0.4, -0.8), &Point3::new(0.2, 0.1, 1.1), &m).unwrap();
        assert_relative_eq!(s.det_h, s.eig_tangent * s.eig_perp, max_relative = 1e-14);
    }

    #[test]
    fn optical_distance_vertical_ball() {
        // D = ball((0,0,-d-r), r), B = ball((0,0,b), eta): everything vertical
        let m = med(1.0, 4.0);
        let (d, r, b, eta) = (1.0, 0.5, 2.0, 0.25);
        let obstacle = ObstacleSpec::new(
            Shape::Ball {
                center: Point3::new(0.0, 0.0, -d - r),
                radius: r,
            },
            1.0,
            &m,
        )
        .unwrap();
        let source = SourceBall::new(Point3::new(0.0, 0.0, b), eta, 1.0).unwrap();
        let od = optical_distance_sets(&obstacle, &source, &m).unwrap();
        let expect = d / 2.0 + (b - eta);
        assert_relative_eq!(od.l_db, expect, epsilon = 1e-9);
        assert_relative_eq!(od.x0.x3, -d, epsilon = 1e-6);
    }

    #[test]
    fn optical_distance_translation_invariant() {
        let m = med(1.0, 2.0);
        let shift = [0.7, -0.3];
        let mk = |s: [f64; 2]| {
            let obstacle = ObstacleSpec::new(
                Shape::Ball {
                    center: Point3::new(0.4 + s[0], 0.2 + s[1], -1.5),
                    radius: 0.4,
                },
                1.0,
                &m,
            )
            .unwrap();
            let source =
                SourceBall::new(Point3::new(s[0], s[1], 1.2), 0.3, 1.0).unwrap();
            optical_distance_sets(&obstacle, &source, &m).unwrap().l_db
        };
        assert_relative_eq!(mk([0.0, 0.0]), mk(shift), epsilon = 1e-9);
    }

    #[test]
    fn enclosure_contains_obstacle_with_exact_ldb() {
        let m = med(1.0, 2.0);
        let obstacle = ObstacleSpec::new(
            Shape::Ball {
                center: Point3::new(0.0, 0.0, -1.5),
                radius: 0.4,
            },
            1.0,
            &m,
        )
        .unwrap();
        let source = SourceBall::new(Point3::new(0.0, 0.0, 1.2), 0.3, 1.0).unwrap();
        let od = optical_distance_sets(&obstacle, &source, &m).unwrap();
        for p in obstacle.sample_volume(12) {
            assert!(
                in_enclosure_region(&p, od.l_db, &source, &m).unwrap(),
                "obstacle point {p:?} not enclosed"
            );
        }
    }

    #[test]
    fn enclosure_strict_inequality_boundary() {
        let m = med(1.0, 2.0);
        let source = SourceBall::new(Point3::new(0.0, 0.0, 1.2), 0.3, 1.0).unwrap();
        // A point whose l(x,p) sits just below the threshold must be unmarked.
        let l_db = 1.0;
        let threshold = l_db + source.radius * m.slow_plus();
        // vertical point: l(x,p) = |x3|/sqrt(gm) + p3
        let x3 = -((threshold - 1e-3 - source.center.x3) * m.gamma_minus.sqrt());
        let x = Point3::new(0.0, 0.0, x3);
        let s = snell_point(&x, &source.center, &m).unwrap();
        assert!(s.l_value < threshold);
        assert!(!in_enclosure_region(&x, l_db, &source, &m).unwrap());
    }

    #[test]
    fn medium_rejects_bad_ordering() {
        assert!(LayeredMedium::new(2.0, 1.0).is_err());
        assert!(LayeredMedium::new(1.0, 1.0).is_err());
        assert!(LayeredMedium::new(-1.0, 1.0).is_err());
    }
}
