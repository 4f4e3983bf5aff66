//! One-parameter semigroups, Denjoy–Wolff points, the product formula for
//! frozen generators, and conjugations that prescribe the spectral function
//! at a boundary fixed point.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::boundary::{angular_derivative, angular_limit, dilatation_coefficient, DEFAULT_TOL};
use crate::disc::{BoundaryPoint, MoebiusAutomorphism, StolzSchedule, I, ONE};
use crate::error::{Error, Result};
use crate::evolution::{EvolutionFamily, IntegratorConfig};
use crate::herglotz::{contour_derivative, HerglotzField, TimeFn};
use crate::quad;

/// Flow of an autonomous field.
#[derive(Debug, Clone)]
pub struct Semigroup {
    family: EvolutionFamily,
}

impl Semigroup {
    pub fn new(generator: HerglotzField) -> Result<Self> {
        if !generator.is_autonomous() {
            return Err(Error::Precondition(format!("field {} is not autonomous", generator.id())));
        }
        Ok(Self { family: EvolutionFamily::with_defaults(generator) })
    }

    pub fn generator(&self) -> &HerglotzField {
        self.family.field()
    }

    pub fn family(&self) -> &EvolutionFamily {
        &self.family
    }

    pub fn flow(&self, t: f64, z: Complex64) -> Result<Complex64> {
        semigroup_flow(&self.family, t, z)
    }

    /// `max |φ_{s+t}(z) − φ_t(φ_s(z))|`.
    pub fn law_residual(&self, s: f64, t: f64, grid: &[Complex64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &z in grid {
            let direct = self.family.evolve_fresh(0.0, s + t, z)?;
            let mid = self.family.evolve_fresh(0.0, s, z)?;
            let two = self.family.evolve_fresh(0.0, t, mid)?;
            worst = worst.max((direct - two).norm());
        }
        Ok(worst)
    }
}

pub fn semigroup_flow(fam: &EvolutionFamily, t: f64, z: Complex64) -> Result<Complex64> {
    if t < 0.0 {
        return Err(Error::Domain(format!("semigroup time {t} is negative")));
    }
    fam.evolve(0.0, t, z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DwCase {
    /// Interior fixed point with unimodular multiplier.
    Elliptic,
    /// Interior fixed point, `|φ'(τ)| < 1`.
    Attracting,
    /// Boundary point with `α_φ(τ) ≤ 1`.
    Boundary,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct DwReport {
    pub tau: [f64; 2],
    pub case: DwCase,
    pub iterations: usize,
    pub multiplier: Option<f64>,
    pub alpha: Option<f64>,
    pub seeds_converged: usize,
}

impl DwReport {
    pub fn tau(&self) -> Complex64 {
        Complex64::new(self.tau[0], self.tau[1])
    }
}

pub const DW_SEEDS: [Complex64; 5] = [
    Complex64::new(0.0, 0.0),
    Complex64::new(0.5, 0.0),
    Complex64::new(-0.5, 0.0),
    Complex64::new(0.0, 0.5),
    Complex64::new(0.0, -0.5),
];

enum Orbit {
    Interior(Complex64),
    Boundary(Complex64),
    Open,
}

fn run_orbit<F>(phi: &F, seed: Complex64, max_iter: usize, tol: f64, count: &mut usize) -> Result<Orbit>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut z = seed;
    for _ in 0..max_iter {
        *count += 1;
        let w = match phi(z) {
            Ok(w) => w,
            Err(Error::NotInDisc(_)) | Err(Error::Containment { .. }) => return Ok(Orbit::Boundary(z)),
            Err(e) => return Err(e),
        };
        if 1.0 - w.norm() < 1e-9 {
            return Ok(Orbit::Boundary(w));
        }
        if (w - z).norm() < tol {
            return Ok(if 1.0 - w.norm() < 1e-6 { Orbit::Boundary(w) } else { Orbit::Interior(w) });
        }
        z = w;
    }
    Ok(Orbit::Open)
}

/// Locates the Denjoy–Wolff point by iterating from [`DW_SEEDS`].
pub fn dw_point<F>(phi: F, max_iter: usize, tol: f64) -> Result<DwReport>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut iterations = 0;
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    for seed in DW_SEEDS {
        match run_orbit(&phi, seed, max_iter, tol, &mut iterations)? {
            Orbit::Interior(w) => interior.push(w),
            Orbit::Boundary(w) => boundary.push(w),
            Orbit::Open => {}
        }
    }
    let seeds_converged = interior.len() + boundary.len();
    if let Some(&tau) = interior.first() {
        let rho = (0.25 * (1.0 - tau.norm())).clamp(1e-6, 0.05);
        let d = contour_derivative(|z| phi(z).unwrap_or(Complex64::new(f64::NAN, f64::NAN)), tau, rho);
        let m = d.norm();
        let case = if (m - 1.0).abs() < 1e-6 {
            DwCase::Elliptic
        } else if m < 1.0 {
            DwCase::Attracting
        } else {
            DwCase::Inconclusive
        };
        return Ok(DwReport { tau: [tau.re, tau.im], case, iterations, multiplier: Some(m), alpha: None, seeds_converged });
    }
    if !boundary.is_empty() {
        let mean: Complex64 = boundary.iter().map(|w| w / w.norm()).sum();
        let sigma = BoundaryPoint::from_angle(mean.arg());
        let alpha = dilatation_coefficient(&phi, sigma, &StolzSchedule::radial(sigma), DEFAULT_TOL)?;
        let a = alpha.value.re;
        let case = if a <= 1.0 + 1e-6 { DwCase::Boundary } else { DwCase::Inconclusive };
        let tau = sigma.value();
        return Ok(DwReport { tau: [tau.re, tau.im], case, iterations, multiplier: None, alpha: Some(a), seeds_converged });
    }
    Ok(DwReport {
        tau: [f64::NAN, f64::NAN],
        case: DwCase::Inconclusive,
        iterations,
        multiplier: None,
        alpha: None,
        seeds_converged,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductRow {
    pub n: usize,
    pub value: [f64; 2],
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductFormulaTable {
    pub t0: f64,
    pub t: f64,
    pub z: [f64; 2],
    pub reference: [f64; 2],
    pub rows: Vec<ProductRow>,
    pub monotone: bool,
}

impl ProductFormulaTable {
    pub fn final_error(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.error)
    }
}

pub const PRODUCT_SEQUENCE: [usize; 6] = [1, 2, 4, 8, 16, 32];

/// Compares `(φ̃_{t0,t0+t/n})^{∘n}(z)` with the flow of the frozen field
/// `G̃(·,t0)` for each `n`. With a contact point `σ₀` the family is
/// rotated along `σ(t) = φ_{0,t}(σ₀)` so that `1` stays fixed:
/// `φ̃_{s,t}(z) = conj(σ(t)) φ_{s,t}(σ(s) z)`.
pub fn product_formula_check(
    field: &HerglotzField,
    t0: f64,
    t: f64,
    ns: &[usize],
    z: Complex64,
    sigma0: Option<BoundaryPoint>,
) -> Result<ProductFormulaTable> {
    product_formula_check_with(field, t0, t, ns, z, sigma0, IntegratorConfig::default())
}

#[allow(clippy::too_many_arguments)]
pub fn product_formula_check_with(
    field: &HerglotzField,
    t0: f64,
    t: f64,
    ns: &[usize],
    z: Complex64,
    sigma0: Option<BoundaryPoint>,
    config: IntegratorConfig,
) -> Result<ProductFormulaTable> {
    if t <= 0.0 || ns.is_empty() {
        return Err(Error::Precondition("product formula needs t > 0 and a nonempty n sequence".into()));
    }
    let fam = EvolutionFamily::new(field.clone(), config)?.without_cache();
    let dom = field.validity();
    let rotation = |times: &[f64]| -> Result<Vec<Complex64>> {
        match sigma0 {
            None => Ok(vec![ONE; times.len()]),
            Some(s0) if field.nullpoint_at(s0).is_some() => Ok(vec![s0.value(); times.len()]),
            Some(s0) => {
                let mut grid = vec![dom.start];
                grid.extend_from_slice(times);
                let tr = fam.boundary_trajectory(s0, &grid)?;
                Ok(tr.points()[1..].to_vec())
            }
        }
    };
    let sig0 = if t0 == dom.start {
        sigma0.map_or(ONE, |s| s.value())
    } else {
        rotation(&[t0])?[0]
    };
    let g = field.clone();
    let frozen = HerglotzField::new(format!("{}@{t0}", field.id()), move |w, _| {
        let vel = g.eval(sig0, t0);
        sig0.conj() * (g.eval(sig0 * w, t0) - w * vel)
    })
    .autonomous(true);
    let frozen_vel = field.eval(sig0, t0);
    if sigma0.is_some() && frozen_vel.is_finite() {
        // `σ'(t0) = G(σ(t0), t0)` must be tangent for the rotation to make sense
        let normal = (sig0.conj() * frozen_vel).re;
        if normal.abs() > 1e-8 {
            return Err(Error::Tangency { t: t0, residual: normal });
        }
    }
    let reference = EvolutionFamily::new(frozen, config)?.without_cache().evolve_fresh(0.0, t, z)?;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let h = t / n as f64;
        let sig1 = if sigma0.is_some() { rotation(&[t0 + h])?[0] } else { ONE };
        let mut w = z;
        for _ in 0..n {
            w = sig1.conj() * fam.evolve_fresh(t0, t0 + h, sig0 * w)?;
        }
        rows.push(ProductRow { n, value: [w.re, w.im], error: (w - reference).norm() });
    }
    let monotone = rows.windows(2).all(|r| r[1].error <= r[0].error * (1.0 + 1e-9) + 1e-13);
    Ok(ProductFormulaTable { t0, t, z: [z.re, z.im], reference: [reference.re, reference.im], rows, monotone })
}

#[derive(Debug, Clone, Serialize)]
pub struct BrfpRow {
    pub t: f64,
    pub derivative: [f64; 2],
    pub expected: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BrfpReport {
    pub sigma: f64,
    pub lambda: f64,
    pub rows: Vec<BrfpRow>,
    pub all_ok: bool,
}

/// `φ'_t(σ) = e^{λt}` at a declared boundary null point `(σ, λ)`.
pub fn semigroup_brfp_check(sg: &Semigroup, sigma: BoundaryPoint, lambda: f64, times: &[f64]) -> Result<BrfpReport> {
    let sched = StolzSchedule::radial(sigma);
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let d = angular_derivative(|z| sg.flow(t, z), sigma, sigma.value(), &sched, DEFAULT_TOL)?;
        let expected = (lambda * t).exp();
        rows.push(BrfpRow {
            t,
            derivative: [d.value.re, d.value.im],
            expected,
            ok: d.converged && (d.value - expected).norm() < 1e-5 * expected.max(1.0),
        });
    }
    let all_ok = rows.iter().all(|r| r.ok);
    Ok(BrfpReport { sigma: sigma.angle(), lambda, rows, all_ok })
}

/// `x(t) = (e^Λ − 1)/(e^Λ + 1)`, so that `(z + x)/(1 + xz)` has boundary
/// derivative `e^{−Λ}` at `1`.
pub fn spectral_shift(lambda: f64) -> f64 {
    (0.5 * lambda).tanh()
}

/// Parabolic automorphisms `ℓ_t`, the translation by `i t v0/t0` in the
/// right half-plane picture where `1` sits at infinity.
#[derive(Debug, Clone, Copy)]
pub struct ParabolicFamily {
    pub v0: f64,
    pub t0: f64,
}

pub fn parabolic_translation_family(v0: f64, t0: f64) -> Result<ParabolicFamily> {
    if !(t0 > 0.0) {
        return Err(Error::Precondition(format!("t0 = {t0} must be positive")));
    }
    Ok(ParabolicFamily { v0, t0 })
}

impl ParabolicFamily {
    pub fn shift(&self, t: f64) -> f64 {
        t * self.v0 / self.t0
    }

    pub fn at(&self, t: f64) -> MoebiusAutomorphism {
        let c = I * self.shift(t);
        MoebiusAutomorphism::from_coefficients(2.0 - c, c, -c, 2.0 + c).expect("translation of the half-plane")
    }
}

fn to_half_plane(z: Complex64) -> Complex64 {
    (ONE + z) / (ONE - z)
}

fn from_half_plane(w: Complex64) -> Complex64 {
    (w - ONE) / (w + ONE)
}

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Time-dependent automorphism fixing `1`, acting as `W ↦ e^{L(t)} W + i b(t)`
/// on the right half-plane.
#[derive(Clone)]
pub struct AffineConjugation {
    log_scale: Scalar,
    log_scale_rate: Scalar,
    shift: Scalar,
    shift_rate: Scalar,
}

impl std::fmt::Debug for AffineConjugation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("AffineConjugation")
    }
}

impl AffineConjugation {
    pub fn identity() -> Self {
        let zero: Scalar = Arc::new(|_| 0.0);
        Self { log_scale: zero.clone(), log_scale_rate: zero.clone(), shift: zero.clone(), shift_rate: zero }
    }

    /// `m_Λ ∘ self` with `m_Λ(W) = e^{Λ} W`.
    pub fn then_scale(&self, lambda: Scalar, rate: Scalar) -> Self {
        let (l, lr, b, br) = (self.log_scale.clone(), self.log_scale_rate.clone(), self.shift.clone(), self.shift_rate.clone());
        let (lam, lam_r) = (lambda.clone(), rate.clone());
        let (lam2, lam_r2) = (lambda, rate);
        Self {
            log_scale: Arc::new(move |t| l(t) + lam(t)),
            log_scale_rate: Arc::new(move |t| lr(t) + lam_r(t)),
            shift: {
                let (b, lam) = (b.clone(), lam2.clone());
                Arc::new(move |t| lam(t).exp() * b(t))
            },
            shift_rate: Arc::new(move |t| lam2(t).exp() * (lam_r2(t) * b(t) + br(t))),
        }
    }

    /// `ℓ^{−1} ∘ ℓ_t ∘ self`.
    pub fn then_translate(&self, p: ParabolicFamily) -> Self {
        let (b, br) = (self.shift.clone(), self.shift_rate.clone());
        Self {
            log_scale: self.log_scale.clone(),
            log_scale_rate: self.log_scale_rate.clone(),
            shift: Arc::new(move |t| b(t) + p.shift(t) - p.v0),
            shift_rate: Arc::new(move |t| br(t) + p.v0 / p.t0),
        }
    }

    pub fn log_scale(&self, t: f64) -> f64 {
        (self.log_scale)(t)
    }

    pub fn shift(&self, t: f64) -> f64 {
        (self.shift)(t)
    }

    pub fn apply(&self, t: f64, z: Complex64) -> Complex64 {
        from_half_plane((self.log_scale)(t).exp() * to_half_plane(z) + I * (self.shift)(t))
    }

    pub fn inverse(&self, t: f64, z: Complex64) -> Complex64 {
        from_half_plane((to_half_plane(z) - I * (self.shift)(t)) * (-(self.log_scale)(t)).exp())
    }

    pub fn derivative(&self, t: f64, z: Complex64) -> Complex64 {
        let a = (self.log_scale)(t).exp();
        let v = a * to_half_plane(z) + I * (self.shift)(t);
        let dv = a * 2.0 / ((ONE - z) * (ONE - z));
        dv * 2.0 / ((v + ONE) * (v + ONE))
    }

    /// `∂_t A_t` expressed at the image point `w = A_t(ζ)`.
    pub fn velocity(&self, t: f64, w: Complex64) -> Complex64 {
        let big = to_half_plane(w);
        let b = (self.shift)(t);
        let v = (self.log_scale_rate)(t) * (big - I * b) + I * (self.shift_rate)(t);
        v * (ONE - w) * (ONE - w) * 0.5
    }

    /// Boundary derivative at the fixed point `1`.
    pub fn boundary_derivative(&self, t: f64) -> f64 {
        (-(self.log_scale)(t)).exp()
    }
}

/// `ψ_{s,t} = A_t ∘ φ_{s,t} ∘ A_s^{−1}` for a family with a boundary fixed
/// point at `1`.
#[derive(Clone)]
pub struct ConjugatedFamily {
    base: Arc<EvolutionFamily>,
    conj: AffineConjugation,
    base_spectral: Scalar,
}

impl std::fmt::Debug for ConjugatedFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConjugatedFamily").field("base", &self.base.field().id()).finish()
    }
}

/// Spectral function at `1` of a family whose field declares a boundary
/// null point there: `Λ(t) = −∫ dilation`.
pub fn declared_spectral_function(field: &HerglotzField) -> Result<(Scalar, Scalar)> {
    let np = field
        .nullpoint_at(BoundaryPoint::one())
        .ok_or_else(|| Error::Precondition(format!("field {} declares no boundary null point at 1", field.id())))?;
    let d = np.dilation.clone();
    let start = field.validity().start;
    let rate: Scalar = {
        let d = d.clone();
        Arc::new(move |t| -d.eval(t))
    };
    let value: Scalar = match d.as_constant() {
        Some(c) => Arc::new(move |t| -c * (t - start)),
        None => Arc::new(move |t| {
            quad::integrate(|x| Ok(d.eval(x)), start, t, 1e-13, 1e-13).map_or(f64::NAN, |q| -q.value)
        }),
    };
    Ok((value, rate))
}

impl ConjugatedFamily {
    pub fn from_family(base: Arc<EvolutionFamily>) -> Result<Self> {
        let (spec, _) = declared_spectral_function(base.field())?;
        Ok(Self { base, conj: AffineConjugation::identity(), base_spectral: spec })
    }

    pub fn base(&self) -> &EvolutionFamily {
        &self.base
    }

    pub fn conjugation(&self) -> &AffineConjugation {
        &self.conj
    }

    pub fn start(&self) -> f64 {
        self.base.field().validity().start
    }

    pub fn eval(&self, s: f64, t: f64, z: Complex64) -> Result<Complex64> {
        let zeta = self.conj.inverse(s, z);
        Ok(self.conj.apply(t, self.base.evolve(s, t, zeta)?))
    }

    /// Spectral function at `1`, tracked through the conjugations.
    pub fn spectral(&self, t: f64) -> f64 {
        let s0 = self.start();
        (self.base_spectral)(t) + self.conj.log_scale(t) - self.conj.log_scale(s0)
    }

    /// Generator of the conjugated family:
    /// `H(w,t) = ∂_t A_t(ζ) + A_t'(ζ) G(ζ,t)`, `ζ = A_t^{−1}(w)`.
    pub fn field(&self) -> HerglotzField {
        let base = self.base.field().clone();
        let conj = self.conj.clone();
        let id = format!("conj[{}]", base.id());
        let dom = base.validity();
        HerglotzField::new(id, move |w, t| {
            let zeta = conj.inverse(t, w);
            conj.velocity(t, w) + conj.derivative(t, zeta) * base.eval(zeta, t)
        })
        .with_validity(dom)
        .autonomous(false)
    }

    fn with_conj(&self, conj: AffineConjugation) -> Self {
        Self { base: self.base.clone(), conj, base_spectral: self.base_spectral.clone() }
    }
}

fn time_rate(f: &TimeFn, t: f64) -> f64 {
    let h = 1e-5 * t.abs().max(1.0);
    let dom = f.domain();
    if dom.contains(t - h) {
        (f.eval(t + h) - f.eval(t - h)) / (2.0 * h)
    } else {
        (-3.0 * f.eval(t) + 4.0 * f.eval(t + h) - f.eval(t + 2.0 * h)) / (2.0 * h)
    }
}

/// Conjugates by `m_t(z) = (z + x(t))/(1 + x(t) z)` with `x = tanh(−Λ_base/2)`
/// so the spectral function at `1` becomes zero.
pub fn normalize_spectral(fam: Arc<EvolutionFamily>) -> Result<ConjugatedFamily> {
    let cf = ConjugatedFamily::from_family(fam)?;
    let (value, rate) = declared_spectral_function(cf.base.field())?;
    let neg: Scalar = Arc::new(move |t| -value(t));
    let neg_rate: Scalar = Arc::new(move |t| -rate(t));
    Ok(cf.with_conj(cf.conj.then_scale(neg, neg_rate)))
}

/// `ψ_{s,t} = m_t ∘ φ_{s,t} ∘ m_s^{−1}` with `x(t) = (e^{Λ(t)} − 1)/(e^{Λ(t)} + 1)`.
/// The input family must have zero spectral function at `1` on
/// `[start, horizon]`.
pub fn prescribe_spectral(cf: &ConjugatedFamily, lambda: &TimeFn, horizon: f64) -> Result<ConjugatedFamily> {
    let s0 = cf.start();
    let l0 = lambda.eval(s0);
    if l0.abs() > 1e-12 {
        return Err(Error::Precondition(format!("Λ({s0}) = {l0}, expected 0")));
    }
    for k in 0..=10 {
        let t = s0 + (horizon - s0) * k as f64 / 10.0;
        let v = cf.spectral(t);
        if v.abs() > 1e-9 {
            return Err(Error::Precondition(format!(
                "family's spectral function at 1 is {v} at t = {t}; normalize it first"
            )));
        }
    }
    let (lv, lr) = (lambda.clone(), lambda.clone());
    let value: Scalar = Arc::new(move |t| lv.eval(t));
    let rate: Scalar = Arc::new(move |t| time_rate(&lr, t));
    Ok(cf.with_conj(cf.conj.then_scale(value, rate)))
}

#[derive(Debug, Clone)]
pub struct EmbeddingResult {
    pub family: ConjugatedFamily,
    pub lambda: TimeFn,
    pub sigma: BoundaryPoint,
    pub t0: f64,
    pub v0: f64,
    pub target: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingReport {
    pub target_deviation: f64,
    pub fixed_point_residual: f64,
    pub derivative_error: f64,
    pub spectral_discrepancy: f64,
    pub ok: bool,
}

impl EmbeddingResult {
    pub fn psi(&self, s: f64, t: f64, z: Complex64) -> Result<Complex64> {
        self.family.eval(s, t, z)
    }

    /// `φ(z) = φ_{0,t0}(ℓ(z))`, the map being embedded.
    pub fn target_map(&self, z: Complex64) -> Result<Complex64> {
        let l = ParabolicFamily { v0: self.v0, t0: self.t0 }.at(self.t0);
        let s0 = self.family.start();
        self.family.base.evolve(s0, self.t0, l.apply(z))
    }

    /// Checks `ψ_{0,t0} = φ` on the grid, and at each time pair from
    /// `times` that `ψ_{s,t}(1) = 1` and `ψ'_{s,t}(1) = e^{Λ(s)−Λ(t)}`.
    pub fn verify(&self, grid: &[Complex64], times: &[f64]) -> Result<EmbeddingReport> {
        let s0 = self.family.start();
        let mut dev: f64 = 0.0;
        for &z in grid {
            dev = dev.max((self.psi(s0, self.t0, z)? - self.target_map(z)?).norm());
        }
        let one = BoundaryPoint::one();
        let sched = StolzSchedule::radial(one);
        let (mut fix, mut der, mut spec): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for (i, &s) in times.iter().enumerate() {
            for &t in &times[i + 1..] {
                let lim = angular_limit(|z| self.psi(s, t, z), one, &sched, DEFAULT_TOL)?;
                fix = fix.max((lim.value - ONE).norm());
                let d = angular_derivative(|z| self.psi(s, t, z), one, ONE, &sched, DEFAULT_TOL)?;
                let expected = (self.lambda.eval(s) - self.lambda.eval(t)).exp();
                der = der.max((d.value - expected).norm());
                if s == s0 {
                    spec = spec.max((-d.value.norm().ln() - self.lambda.eval(t)).abs());
                }
            }
        }
        Ok(EmbeddingReport {
            target_deviation: dev,
            fixed_point_residual: fix,
            derivative_error: der,
            spectral_discrepancy: spec,
            ok: dev < 1e-7 && fix < 1e-6 && der < 1e-5,
        })
    }
}

/// Embeds `φ = φ_{0,t0} ∘ ℓ` (with `ℓ` the parabolic translation by `i v0`)
/// into an evolution family whose spectral function at `1` is `Λ`.
pub fn embed_map(field: HerglotzField, t0: f64, lambda: TimeFn, v0: f64) -> Result<EmbeddingResult> {
    embed_map_with(field, t0, lambda, v0, IntegratorConfig::default())
}

pub fn embed_map_with(field: HerglotzField, t0: f64, lambda: TimeFn, v0: f64, config: IntegratorConfig) -> Result<EmbeddingResult> {
    let dom = field.validity();
    if !(t0 > dom.start) || !dom.contains_interval(dom.start, t0) {
        return Err(Error::Domain(format!("t0 = {t0} outside the field's validity")));
    }
    let (base_spec, _) = declared_spectral_function(&field)?;
    let required = base_spec(t0);
    let given = lambda.eval(t0);
    if (given - required).abs() > 1e-6 {
        return Err(Error::Precondition(format!(
            "Λ(t0) = {given} is incompatible with the target; it must equal −log φ'(1) = {required}"
        )));
    }
    let target = format!("φ_{{0,{t0}}} of {} composed with translation {v0}", field.id());
    let fam = Arc::new(EvolutionFamily::new(field, config)?);
    let normalized = normalize_spectral(fam)?;
    let prescribed = prescribe_spectral(&normalized, &lambda, t0)?;
    let p = parabolic_translation_family(v0, t0)?;
    let family = prescribed.with_conj(prescribed.conj.then_translate(p));
    Ok(EmbeddingResult { family, lambda, sigma: BoundaryPoint::one(), t0, v0, target })
}
