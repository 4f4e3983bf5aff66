//! Unit-disc primitives: points, boundary points, automorphisms, the Cayley
//! map and the Poisson kernel normalized at `1`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const I: Complex64 = Complex64::new(0.0, 1.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A point of the open unit disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscPoint(Complex64);

impl DiscPoint {
    pub fn new(value: Complex64) -> Result<Self> {
        if value.is_finite() && value.norm() < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::NotInDisc(value))
        }
    }

    pub fn from_re(x: f64) -> Result<Self> {
        Self::new(Complex64::new(x, 0.0))
    }

    pub fn value(self) -> Complex64 {
        self.0
    }
}

impl TryFrom<Complex64> for DiscPoint {
    type Error = Error;
    fn try_from(value: Complex64) -> Result<Self> {
        Self::new(value)
    }
}

/// A point of the unit circle, stored by its angle in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    angle: f64,
}

impl BoundaryPoint {
    pub fn from_angle(angle: f64) -> Self {
        let mut a = angle.rem_euclid(TAU);
        if a >= TAU {
            a = 0.0;
        }
        Self { angle: a }
    }

    /// Projects a nonzero complex number radially onto the circle.
    pub fn from_complex(w: Complex64) -> Result<Self> {
        if !(w.norm() > 0.0) {
            return Err(Error::Domain("cannot project 0 onto the circle".into()));
        }
        Ok(Self::from_angle(w.arg()))
    }

    pub fn one() -> Self {
        Self { angle: 0.0 }
    }

    pub fn angle(self) -> f64 {
        self.angle
    }

    pub fn value(self) -> Complex64 {
        Complex64::from_polar(1.0, self.angle)
    }
}

/// Cayley map `(1+z)/(1-z)`: disc onto the right half-plane, `1 ↦ ∞`.
pub fn cayley(z: Complex64) -> Result<Complex64> {
    if z == ONE {
        return Err(Error::Singularity("cayley map is singular at z = 1".into()));
    }
    Ok((ONE + z) / (ONE - z))
}

pub fn cayley_inverse(w: Complex64) -> Result<Complex64> {
    if w == -ONE {
        return Err(Error::Singularity(
            "inverse cayley map is singular at w = -1".into(),
        ));
    }
    Ok((w - ONE) / (w + ONE))
}

/// Negative Poisson kernel with pole at `1`: `-(1-|z|²)/|1-z|²`.
pub fn poisson_u(z: DiscPoint) -> f64 {
    let z = z.value();
    -(1.0 - z.norm_sqr()) / (ONE - z).norm_sqr()
}

/// `∂u/∂x − i ∂u/∂y` for [`poisson_u`].
///
/// `u = -Re p(z)` with `p` the Cayley map, so this is `-p'(z) = -2/(1-z)²`.
pub fn poisson_v(z: DiscPoint) -> Complex64 {
    let d = ONE - z.value();
    -2.0 / (d * d)
}

/// Conformal automorphism `z ↦ rotation·(z + center)/(1 + conj(center)·z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoebiusAutomorphism {
    rotation: Complex64,
    center: Complex64,
}

impl MoebiusAutomorphism {
    pub fn new(rotation: Complex64, center: Complex64) -> Result<Self> {
        if !rotation.is_finite() || (rotation.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "rotation {rotation} is not unimodular"
            )));
        }
        if !(center.norm() < 1.0) {
            return Err(Error::NotInDisc(center));
        }
        Ok(Self {
            rotation: rotation / rotation.norm(),
            center,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: ONE,
            center: Complex64::new(0.0, 0.0),
        }
    }

    pub fn rotation_by(angle: f64) -> Self {
        Self {
            rotation: Complex64::from_polar(1.0, angle),
            center: Complex64::new(0.0, 0.0),
        }
    }

    /// Hyperbolic automorphism `(z + x)/(1 + x z)` fixing `±1`, `x ∈ (-1, 1)`.
    pub fn hyperbolic(x: f64) -> Result<Self> {
        Self::new(ONE, Complex64::new(x, 0.0))
    }

    /// Canonical form of `(a z + b)/(c z + d)`, which must preserve the disc.
    pub fn from_coefficients(
        a: Complex64,
        b: Complex64,
        c: Complex64,
        d: Complex64,
    ) -> Result<Self> {
        if a.norm() == 0.0 || d.norm() == 0.0 {
            return Err(Error::Domain("degenerate Moebius coefficients".into()));
        }
        let center = b / a;
        let rotation = a / d;
        let expected = c / d;
        if (expected - center.conj()).norm() > 1e-10 * (1.0 + expected.norm()) {
            return Err(Error::Domain(
                "coefficients do not describe a disc automorphism".into(),
            ));
        }
        Self::new(rotation, center)
    }

    pub fn rotation(&self) -> Complex64 {
        self.rotation
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        self.rotation * (z + self.center) / (ONE + self.center.conj() * z)
    }

    pub fn apply_boundary(&self, sigma: BoundaryPoint) -> BoundaryPoint {
        // The image of a unit vector is unimodular up to rounding; re-project.
        BoundaryPoint::from_angle(self.apply(sigma.value()).arg())
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let d = ONE + self.center.conj() * z;
        self.rotation * (1.0 - self.center.norm_sqr()) / (d * d)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        let (a1, b1, c1, d1) = self.coefficients();
        let (a2, b2, c2, d2) = other.coefficients();
        let a = a1 * a2 + b1 * c2;
        let b = a1 * b2 + b1 * d2;
        let d = c1 * b2 + d1 * d2;
        Self {
            rotation: {
                let r = a / d;
                r / r.norm()
            },
            center: b / a,
        }
    }

    pub fn invert(&self) -> Self {
        Self {
            rotation: self.rotation.conj(),
            center: -self.rotation * self.center,
        }
    }

    fn coefficients(&self) -> (Complex64, Complex64, Complex64, Complex64) {
        (
            self.rotation,
            self.rotation * self.center,
            self.center.conj(),
            ONE,
        )
    }
}

/// Derivative of `m` at a boundary point, from the rational formula.
pub fn boundary_derivative_of_automorphism(
    m: &MoebiusAutomorphism,
    sigma: BoundaryPoint,
) -> Complex64 {
    m.derivative(sigma.value())
}

/// Geometric approach schedule toward a boundary point.
///
/// Sample `k` sits at `σ(1 − h_k e^{iγ})` with `h_k = 2^{-k}` and `γ` the
/// aperture (zero means radial approach).
#[derive(Debug, Clone, PartialEq)]
pub struct StolzSchedule {
    base: BoundaryPoint,
    k_min: u32,
    k_max: u32,
    aperture: f64,
}

impl StolzSchedule {
    pub const DEFAULT_K_MIN: u32 = 4;
    pub const DEFAULT_K_MAX: u32 = 24;

    pub fn radial(base: BoundaryPoint) -> Self {
        Self {
            base,
            k_min: Self::DEFAULT_K_MIN,
            k_max: Self::DEFAULT_K_MAX,
            aperture: 0.0,
        }
    }

    pub fn new(base: BoundaryPoint, k_min: u32, k_max: u32, aperture: f64) -> Result<Self> {
        if k_min < 1 || k_max <= k_min + 2 || k_max > 60 {
            return Err(Error::Domain(format!(
                "schedule exponents {k_min}..={k_max} must satisfy 1 <= k_min, k_min + 3 <= k_max <= 60"
            )));
        }
        if !(0.0..PI / 2.0).contains(&aperture) {
            return Err(Error::Domain(format!(
                "aperture {aperture} outside [0, π/2)"
            )));
        }
        let h = 0.5f64.powi(k_min as i32);
        if h >= 2.0 * aperture.cos() {
            return Err(Error::Domain(
                "first schedule point falls outside the disc".into(),
            ));
        }
        Ok(Self {
            base,
            k_min,
            k_max,
            aperture,
        })
    }

    pub fn with_range(&self, k_min: u32, k_max: u32) -> Result<Self> {
        Self::new(self.base, k_min, k_max, self.aperture)
    }

    pub fn with_base(&self, base: BoundaryPoint) -> Self {
        Self { base, ..self.clone() }
    }

    pub fn base(&self) -> BoundaryPoint {
        self.base
    }

    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    pub fn k_range(&self) -> (u32, u32) {
        (self.k_min, self.k_max)
    }

    /// Distances `h_k = 2^{-k}`, decreasing.
    pub fn steps(&self) -> Vec<f64> {
        (self.k_min..=self.k_max)
            .map(|k| 0.5f64.powi(k as i32))
            .collect()
    }

    /// Radii `r_k = 1 − h_k`, increasing toward one.
    pub fn ratios(&self) -> Vec<f64> {
        self.steps().into_iter().map(|h| 1.0 - h).collect()
    }

    pub fn points(&self) -> Vec<Complex64> {
        let s = self.base.value();
        let dir = Complex64::from_polar(1.0, self.aperture);
        self.steps().into_iter().map(|h| s * (ONE - h * dir)).collect()
    }
}

/// Deterministic polar grid: `n_radii` radii up to `r_max`, `n_angles` angles
/// offset by half a step so the real axis is not sampled twice.
pub fn disc_grid(n_radii: usize, n_angles: usize, r_max: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n_radii * n_angles);
    for i in 0..n_radii {
        let r = r_max * (i + 1) as f64 / n_radii as f64;
        for j in 0..n_angles {
            let theta = TAU * (j as f64 + 0.5) / n_angles as f64;
            out.push(Complex64::from_polar(r, theta));
        }
    }
    out
}

/// Seeded uniform sample of the disc of radius `r_max`.
pub fn random_grid(n: usize, r_max: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = r_max * rng.gen::<f64>().sqrt();
            let theta = TAU * rng.gen::<f64>();
            Complex64::from_polar(r, theta)
        })
        .collect()
}

/// 500-point grid used by the inequality sweeps.
pub fn sweep_grid_500() -> Vec<Complex64> {
    disc_grid(20, 25, 0.99)
}

/// 50-point grid used by composition checks.
pub fn sweep_grid_50() -> Vec<Complex64> {
    disc_grid(5, 10, 0.9)
}
