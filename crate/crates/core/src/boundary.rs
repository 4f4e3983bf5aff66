//! Boundary behaviour: angular limits and derivatives, dilatation
//! coefficients, Julia–Wolff–Carathéodory checks, boundary null point
//! dilations, spectral functions, and classification of boundary points.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::disc::{poisson_u, poisson_v, BoundaryPoint, DiscPoint, StolzSchedule};
use crate::error::{Error, Result};
use crate::evolution::EvolutionFamily;
use crate::extrapolate::{extrapolate, extrapolate_real, AngularEstimate, Divergence};
use crate::herglotz::HerglotzField;
use crate::quad;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

fn sample<F>(f: &F, points: &[Complex64]) -> Result<Vec<Complex64>>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    points
        .iter()
        .map(|&z| {
            let v = f(z)?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(format!("f({z}) = {v}")))
            }
        })
        .collect()
}

/// Extrapolated `∠lim_{z→σ} f(z)`.
pub fn angular_limit<F>(f: F, sigma: BoundaryPoint, schedule: &StolzSchedule, tol: f64) -> Result<AngularEstimate>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let pts = schedule.with_base(sigma).points();
    Ok(extrapolate(&sample(&f, &pts)?, tol))
}

/// Extrapolated `∠lim (f(z) − ω)/(z − σ)` with `ω = f(σ)`.
pub fn angular_derivative<F>(
    f: F,
    sigma: BoundaryPoint,
    f_at_sigma: Complex64,
    schedule: &StolzSchedule,
    tol: f64,
) -> Result<AngularEstimate>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    if !f_at_sigma.is_finite() {
        return Err(Error::Precondition(format!("boundary value {f_at_sigma} is not finite")));
    }
    let pts = schedule.with_base(sigma).points();
    let s = sigma.value();
    let vals = sample(&f, &pts)?;
    let q: Vec<Complex64> = vals.iter().zip(&pts).map(|(w, z)| (w - f_at_sigma) / (z - s)).collect();
    Ok(extrapolate(&q, tol))
}

fn one_minus_modulus(z: Complex64) -> f64 {
    (1.0 - z.norm_sqr()) / (1.0 + z.norm())
}

/// `liminf (1 − |f(z)|)/(1 − |z|)` along the schedule: extrapolated when
/// the tail is monotone, otherwise the tail minimum.
pub fn dilatation_coefficient<F>(f: F, sigma: BoundaryPoint, schedule: &StolzSchedule, tol: f64) -> Result<AngularEstimate>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let sched = schedule.with_base(sigma);
    let pts = sched.points();
    let cosg = sched.aperture().cos();
    let vals = sample(&f, &pts)?;
    let q: Vec<f64> = vals
        .iter()
        .zip(sched.steps())
        .map(|(w, h)| {
            // 1 − |1 − h e^{iγ}| without cancellation
            let one_minus_z = (2.0 * h * cosg - h * h) / (1.0 + (1.0 - (2.0 * h * cosg - h * h)).sqrt());
            one_minus_modulus(*w) / one_minus_z
        })
        .collect();
    // 1 − |f(z)| carries an absolute rounding error of a few ulps, so the
    // quotient is noise once h is small; drop those samples
    let noise: Vec<f64> = sched.steps().iter().zip(&q).map(|(h, v)| 8.0 * f64::EPSILON * (1.0 + v.abs()) / h).collect();
    let keep = noise.iter().take_while(|&&e| e <= 1e-2 * tol).count().max(8).min(q.len());
    let (q, noise) = (&q[..keep], &noise[..keep]);
    let n = q.len();
    let tail = &q[n.saturating_sub(6)..];
    let tail_noise = &noise[n.saturating_sub(6)..];
    let d: Vec<f64> = tail
        .windows(2)
        .zip(tail_noise.windows(2))
        .map(|(w, e)| if (w[1] - w[0]).abs() <= 2.0 * (e[0] + e[1]) { 0.0 } else { w[1] - w[0] })
        .collect();
    let monotone = d.iter().all(|&x| x >= 0.0) || d.iter().all(|&x| x <= 0.0);
    let est = extrapolate_real(q, tol);
    if monotone || est.pattern == Divergence::MonotoneBlowUp {
        return Ok(est);
    }
    let (min, spread) = tail.iter().fold((f64::INFINITY, 0.0f64), |(m, s), &x| (m.min(x), s.max(x)));
    Ok(AngularEstimate {
        value: Complex64::new(min, 0.0),
        error_estimate: spread - min,
        converged: spread - min <= tol * min.abs().max(1.0),
        samples_used: n,
        pattern: Divergence::Oscillation,
        order: None,
        level: 0,
    })
}

/// `max_z |ω − f(z)|²/(1 − |f(z)|²) − A|σ − z|²/(1 − |z|²)`.
pub fn jwc_inequality_check<F>(f: F, sigma: BoundaryPoint, omega: Complex64, a: f64, grid: &[Complex64]) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let s = sigma.value();
    let mut worst = f64::NEG_INFINITY;
    for &z in grid {
        let w = f(z)?;
        let lhs = (omega - w).norm_sqr() / (1.0 - w.norm_sqr());
        let rhs = (s - z).norm_sqr() / (1.0 - z.norm_sqr());
        worst = worst.max(lhs - a * rhs);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct DwBoundReport {
    pub alpha: f64,
    pub bound: f64,
    pub slack: f64,
    pub skipped: bool,
    pub holds: bool,
}

/// `α_f(σ) ≥ |1 − τ̄ f(σ)|² / |1 − τ̄ σ|²` for a contact point `σ ≠ τ`.
pub fn dw_lower_bound_check<F>(f: F, tau: Complex64, sigma: BoundaryPoint, schedule: &StolzSchedule) -> Result<DwBoundReport>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let s = sigma.value();
    if (s - tau).norm() < 1e-12 {
        return Ok(DwBoundReport { alpha: f64::NAN, bound: f64::NAN, slack: 0.0, skipped: true, holds: true });
    }
    let omega = angular_limit(&f, sigma, schedule, DEFAULT_TOL)?.value;
    let alpha = dilatation_coefficient(&f, sigma, schedule, DEFAULT_TOL)?;
    let bound = (1.0 - tau.conj() * omega).norm_sqr() / (1.0 - tau.conj() * s).norm_sqr();
    let a = alpha.value.re;
    Ok(DwBoundReport {
        alpha: a,
        bound,
        slack: a - bound,
        skipped: false,
        holds: a >= bound - 1e-6,
    })
}

/// Extrapolated `∠lim G(z)/(z − σ)`; a genuine null point gives a
/// converged, real value.
pub fn brnp_dilation<G>(g: G, sigma: BoundaryPoint, schedule: &StolzSchedule, tol: f64) -> Result<AngularEstimate>
where
    G: Fn(Complex64) -> Complex64,
{
    let s = sigma.value();
    let pts = schedule.with_base(sigma).points();
    let mut q = Vec::with_capacity(pts.len());
    for z in pts {
        let v = g(z) / (z - s);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("G({z})/(z-σ) = {v}")));
        }
        q.push(v);
    }
    Ok(extrapolate(&q, tol))
}

pub fn is_brnp(est: &AngularEstimate) -> bool {
    est.converged && est.value.im.abs() < 1e-6
}

/// Dilation at `(σ, t)`, retrying on longer schedules when the default one
/// has not reached the asymptotic regime.
pub fn field_dilation(field: &HerglotzField, sigma: BoundaryPoint, t: f64, tol: f64) -> Result<AngularEstimate> {
    let mut last = None;
    for k_max in [24, 36, 52] {
        let sched = StolzSchedule::new(sigma, k_max - 20, k_max, 0.0)?;
        let est = brnp_dilation(|z| field.eval(z, t), sigma, &sched, tol)?;
        if est.converged {
            return Ok(est);
        }
        last = Some(est);
    }
    Ok(last.expect("at least one schedule tried"))
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralTrace {
    pub times: Vec<f64>,
    pub lambda_direct: Vec<f64>,
    pub lambda_integral: Vec<f64>,
    pub discrepancy: f64,
    pub direct_converged: Vec<bool>,
    pub integral_error: Vec<f64>,
    pub flags: Vec<String>,
}

impl SpectralTrace {
    pub fn total_variation(values: &[f64]) -> f64 {
        values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    pub fn complete(&self) -> bool {
        self.flags.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralOptions {
    pub k_min: u32,
    pub k_max: u32,
    pub tol: f64,
    pub quad_tol: f64,
    pub parallel: bool,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { k_min: 4, k_max: 24, tol: DEFAULT_TOL, quad_tol: 1e-9, parallel: false }
    }
}

impl SpectralOptions {
    pub fn scaled(&self, factor: f64) -> Self {
        Self { tol: self.tol * factor, quad_tol: self.quad_tol * factor, ..*self }
    }
}

fn schedule_paths(
    fam: &EvolutionFamily,
    s: f64,
    pts: &[Complex64],
    times: &[f64],
    parallel: bool,
) -> Result<Vec<Vec<Complex64>>> {
    let run = |z: &Complex64| fam.evolve_path(s, times, *z);
    if parallel {
        pts.par_iter().map(run).collect()
    } else {
        pts.iter().map(run).collect()
    }
}

fn direct_route(
    fam: &EvolutionFamily,
    sigma0: BoundaryPoint,
    targets: &[Complex64],
    times: &[f64],
    opts: &SpectralOptions,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let sched = StolzSchedule::new(sigma0, opts.k_min, opts.k_max, 0.0)?;
    let pts = sched.points();
    let s = fam.field().validity().start;
    let paths = schedule_paths(fam, s, &pts, times, opts.parallel)?;
    let s0 = sigma0.value();
    let mut lam = Vec::with_capacity(times.len());
    let mut conv = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        if t == s {
            lam.push(0.0);
            conv.push(true);
            continue;
        }
        let q: Vec<Complex64> = pts
            .iter()
            .zip(&paths)
            .map(|(z, p)| (p[i] - targets[i]) / (z - s0))
            .collect();
        let est = extrapolate(&q, opts.tol);
        lam.push(-est.value.norm().ln());
        conv.push(est.converged);
    }
    Ok((lam, conv))
}

/// `Λ(t) = −log|φ'_{0,t}(σ)|` directly and via `−∫₀ᵗ G'(σ,s) ds`.
pub fn spectral_trace(fam: &EvolutionFamily, sigma: BoundaryPoint, times: &[f64], opts: &SpectralOptions) -> Result<SpectralTrace> {
    check_times(times)?;
    let field = fam.field();
    let targets = vec![sigma.value(); times.len()];
    let (direct, conv) = direct_route(fam, sigma, &targets, times, opts)?;
    let mut flags = Vec::new();
    for (t, c) in times.iter().zip(&conv) {
        if !c {
            flags.push(format!("direct route not converged at t = {t}"));
        }
    }
    let s0 = field.validity().start;
    let mut integral = Vec::with_capacity(times.len());
    let mut errors = Vec::with_capacity(times.len());
    let (mut acc, mut acc_err, mut prev) = (0.0, 0.0, s0);
    for &t in times {
        if t > prev {
            let q = quad::integrate(
                |x| {
                    let est = field_dilation(field, sigma, x, opts.tol)?;
                    if !is_brnp(&est) {
                        return Err(Error::NoConvergence(format!("no boundary null point at t = {x}")));
                    }
                    Ok(est.value.re)
                },
                prev,
                t,
                opts.quad_tol,
                0.0,
            );
            match q {
                Ok(q) => {
                    acc += q.value;
                    acc_err += q.error;
                }
                Err(e) => {
                    flags.push(format!("integral route failed on [{prev}, {t}]: {e}"));
                    acc = f64::NAN;
                }
            }
            prev = t;
        }
        integral.push(-acc);
        errors.push(acc_err);
    }
    let discrepancy = max_discrepancy(&direct, &integral);
    Ok(SpectralTrace {
        times: times.to_vec(),
        lambda_direct: direct,
        lambda_integral: integral,
        discrepancy,
        direct_converged: conv,
        integral_error: errors,
        flags,
    })
}

fn max_discrepancy(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, |m, d| if d.is_nan() { f64::NAN } else { m.max(d) })
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("time grid must be nonempty and strictly increasing".into()));
    }
    Ok(())
}

/// `∂G/∂z` at a boundary point by radial extrapolation of the difference
/// quotient.
pub fn boundary_field_derivative(field: &HerglotzField, sigma: BoundaryPoint, t: f64, tol: f64) -> Result<AngularEstimate> {
    let g_sigma = field.eval(sigma.value(), t);
    let sched = StolzSchedule::radial(sigma);
    angular_derivative(|z| Ok(field.eval(z, t)), sigma, g_sigma, &sched, tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct MovingSpectralTrace {
    pub trace: SpectralTrace,
    pub angles: Vec<f64>,
    /// `max |Im G'(σ(t),t) − v(t)|` over the grid, from radial estimates.
    pub tangential_mismatch: f64,
}

/// Spectral function at a moving contact point `σ(t) = φ_{0,t}(σ₀)`.
/// Integral route: `Λ(t) = −∫₀ᵗ Re G'(σ(ξ),ξ) dξ` on a composite
/// Gauss–Kronrod rule.
pub fn moving_spectral_trace(
    fam: &EvolutionFamily,
    sigma0: BoundaryPoint,
    times: &[f64],
    opts: &SpectralOptions,
) -> Result<MovingSpectralTrace> {
    check_times(times)?;
    let field = fam.field();
    let s0 = field.validity().start;
    let mut grid = times.to_vec();
    if grid[0] > s0 {
        grid.insert(0, s0);
    }
    let traj = fam.boundary_trajectory(sigma0, &grid)?;
    let offset = grid.len() - times.len();
    let targets: Vec<Complex64> = traj.points()[offset..].to_vec();
    let (direct, conv) = direct_route(fam, sigma0, &targets, times, opts)?;
    let mut flags = Vec::new();
    for (t, c) in times.iter().zip(&conv) {
        if !c {
            flags.push(format!("direct route not converged at t = {t}"));
        }
    }

    // composite G7K15 with 4 panels per grid interval
    const XGK: [f64; 8] = [
        0.991_455_371_120_812_6, 0.949_107_912_342_758_5, 0.864_864_423_359_769_1, 0.741_531_185_599_394_4,
        0.586_087_235_467_691_1, 0.405_845_151_377_397_2, 0.207_784_955_007_898_5, 0.0,
    ];
    const WGK: [f64; 8] = [
        0.022_935_322_010_529_22, 0.063_092_092_629_978_55, 0.104_790_010_322_250_2, 0.140_653_259_715_525_9,
        0.169_004_726_639_267_9, 0.190_350_578_064_785_4, 0.204_432_940_075_298_9, 0.209_482_141_084_727_8,
    ];
    const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];
    const PANELS: usize = 4;
    let mut nodes = Vec::new();
    for w in grid.windows(2) {
        let len = (w[1] - w[0]) / PANELS as f64;
        for p in 0..PANELS {
            let c = w[0] + (p as f64 + 0.5) * len;
            for j in 0..15 {
                let x = if j < 7 { -XGK[j] } else if j == 7 { 0.0 } else { XGK[14 - j] };
                nodes.push(c + 0.5 * len * x);
            }
        }
    }
    let mut all: Vec<f64> = nodes.clone();
    all.insert(0, s0);
    let node_traj = fam.boundary_trajectory(sigma0, &all)?;
    let mut integrand = Vec::with_capacity(nodes.len());
    for (i, &x) in nodes.iter().enumerate() {
        let sig = BoundaryPoint::from_angle(node_traj.angles[i + 1]);
        let d = boundary_field_derivative(field, sig, x, opts.tol)?;
        if !d.converged {
            flags.push(format!("G' not converged at t = {x}"));
        }
        integrand.push(d.value.re);
    }
    let mut integral = vec![0.0];
    let mut errors = vec![0.0];
    let (mut acc, mut acc_err) = (0.0, 0.0);
    let mut idx = 0;
    for w in grid.windows(2) {
        let len = (w[1] - w[0]) / PANELS as f64;
        for _ in 0..PANELS {
            let f = &integrand[idx..idx + 15];
            let mut k = WGK[7] * f[7];
            let mut g = WG[3] * f[7];
            for j in 0..7 {
                let s = f[j] + f[14 - j];
                k += WGK[j] * s;
                if j % 2 == 1 {
                    g += WG[j / 2] * s;
                }
            }
            acc += 0.5 * len * k;
            acc_err += (0.5 * len * (k - g)).abs();
            idx += 15;
        }
        integral.push(-acc);
        errors.push(acc_err);
    }
    let integral = integral[offset..].to_vec();
    let errors = errors[offset..].to_vec();

    let mut mismatch: f64 = 0.0;
    for (i, &t) in grid.iter().enumerate() {
        let sig = BoundaryPoint::from_angle(traj.angles[i]);
        let d = boundary_field_derivative(field, sig, t, opts.tol)?;
        mismatch = mismatch.max((d.value.im - traj.velocities[i]).abs());
    }
    let discrepancy = max_discrepancy(&direct, &integral);
    Ok(MovingSpectralTrace {
        trace: SpectralTrace {
            times: times.to_vec(),
            lambda_direct: direct,
            lambda_integral: integral,
            discrepancy,
            direct_converged: conv,
            integral_error: errors,
            flags,
        },
        angles: traj.angles[offset..].to_vec(),
        tangential_mismatch: mismatch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    RegularFixed,
    FixedNonregular,
    ContactMoving,
    LostToInterior,
    /// None of the rules fired within thresholds.
    Withheld,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::RegularFixed => "regular_fixed",
            Verdict::FixedNonregular => "fixed_nonregular",
            Verdict::ContactMoving => "contact_moving",
            Verdict::LostToInterior => "lost_to_interior",
            Verdict::Withheld => "withheld",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    /// Time at which `φ_{0,t}` is examined.
    pub t_eval: f64,
    pub eps_exponents: (i32, i32),
    pub gap_k: (u32, u32),
    pub divergence_threshold: f64,
    pub margin: f64,
    pub spectral_tol: f64,
    pub spectral: SpectralOptions,
}

impl ClassifyOptions {
    pub fn at(t_eval: f64) -> Self {
        Self {
            t_eval,
            eps_exponents: (2, 6),
            gap_k: (4, 48),
            divergence_threshold: DIVERGENCE_THRESHOLD,
            margin: 1e-3,
            spectral_tol: 1e-4,
            spectral: SpectralOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ClassificationEvidence {
    pub null_residual: f64,
    pub trajectory_displacement: Option<f64>,
    pub eps: Vec<f64>,
    pub dilation_integrals: Vec<f64>,
    pub integral_increment_ratio: Option<f64>,
    pub log_slope: Option<f64>,
    pub integrable: Option<bool>,
    pub spectral_discrepancy: Option<f64>,
    pub gap_exponents: Vec<u32>,
    pub gaps: Vec<f64>,
    pub quotients: Vec<f64>,
    pub sup_phi: Option<f64>,
    pub max_quotient: Option<f64>,
    pub radial_limit: Option<f64>,
    pub radial_limit_error: Option<f64>,
    pub thresholds_crossed: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub verdict: Verdict,
    pub evidence: ClassificationEvidence,
}

fn log_quadrature(field: &HerglotzField, sigma: BoundaryPoint, a: f64, b: f64, tol: f64) -> Result<f64> {
    let q = quad::integrate(
        |x| {
            let s = x.exp();
            let est = field_dilation(field, sigma, s, tol)?;
            if !est.converged {
                return Err(Error::NoConvergence(format!("dilation at t = {s} did not converge")));
            }
            Ok(est.value.re * s)
        },
        a.ln(),
        b.ln(),
        1e-10,
        1e-9,
    )?;
    Ok(q.value)
}

/// Decides what happens to `σ` under `φ_{0,t}` for `t = opts.t_eval`.
///
/// Rules, in order: a boundary point that is not a null point and moves
/// is `contact_moving`; an integrable dilation with consistent spectral
/// routes is `regular_fixed`; a real-slice sweep whose supremum reaches
/// one while the difference quotient exceeds the divergence threshold is
/// `fixed_nonregular`; a radial limit strictly inside `(0,1)` is
/// `lost_to_interior`.
pub fn classify_boundary_point(fam: &EvolutionFamily, sigma: BoundaryPoint, opts: &ClassifyOptions) -> Result<ClassificationReport> {
    let field = fam.field();
    let mut ev = ClassificationEvidence::default();
    let t_eval = opts.t_eval;
    let dom = field.validity();
    let s0 = dom.start;
    if !dom.contains_interval(s0, t_eval) || t_eval <= s0 {
        return Err(Error::Domain(format!("evaluation time {t_eval} outside the field's validity")));
    }
    let probe: Vec<f64> = (1..=8).map(|k| s0 + (t_eval - s0) * k as f64 / 8.0).collect();
    ev.null_residual = probe.iter().map(|&t| field.eval(sigma.value(), t).norm()).fold(0.0, f64::max);

    if ev.null_residual > 1e-10 {
        let mut times = vec![s0];
        times.extend(&probe);
        match fam.boundary_trajectory(sigma, &times) {
            Ok(tr) => {
                let disp = (tr.angles.last().unwrap() - tr.angles[0]).abs();
                ev.trajectory_displacement = Some(disp);
                if disp > 1e-8 {
                    ev.thresholds_crossed.push("boundary trajectory displacement > 1e-8".into());
                    return Ok(ClassificationReport { verdict: Verdict::ContactMoving, evidence: ev });
                }
            }
            Err(e) => ev.notes.push(format!("boundary trajectory failed: {e}")),
        }
    }

    // (1) local integrability of the dilation near the start
    let (j0, j1) = opts.eps_exponents;
    let mut integrals = Vec::new();
    let mut integration_failed = false;
    for j in j0..=j1 {
        let eps = s0 + 10f64.powi(-j);
        if eps >= t_eval {
            continue;
        }
        match log_quadrature(field, sigma, eps, t_eval, opts.spectral.tol) {
            Ok(v) => {
                ev.eps.push(eps);
                integrals.push(v);
            }
            Err(e) => {
                ev.notes.push(format!("dilation quadrature failed at ε = {eps:e}: {e}"));
                integration_failed = true;
                break;
            }
        }
    }
    ev.dilation_integrals = integrals.clone();
    if !integration_failed && integrals.len() >= 3 {
        let n = integrals.len();
        let d1 = integrals[n - 2] - integrals[n - 3];
        let d2 = integrals[n - 1] - integrals[n - 2];
        let ratio = if d1.abs() > 0.0 { d2 / d1 } else { 0.0 };
        ev.integral_increment_ratio = Some(ratio);
        ev.log_slope = Some(d2 / 10f64.ln());
        let integrable = d2.abs() <= 1e-9 * integrals[n - 1].abs().max(1.0) || ratio.abs() < 0.5;
        ev.integrable = Some(integrable);
        if integrable {
            let times: Vec<f64> = (0..=10).map(|k| s0 + (t_eval - s0) * k as f64 / 10.0).collect();
            match spectral_trace(fam, sigma, &times, &opts.spectral) {
                Ok(tr) => {
                    ev.spectral_discrepancy = Some(tr.discrepancy);
                    if tr.discrepancy < opts.spectral_tol {
                        ev.thresholds_crossed.push(format!("spectral routes agree within {:e}", opts.spectral_tol));
                        return Ok(ClassificationReport { verdict: Verdict::RegularFixed, evidence: ev });
                    }
                }
                Err(e) => ev.notes.push(format!("spectral trace failed: {e}")),
            }
        } else {
            ev.thresholds_crossed.push("dilation integral grows logarithmically as ε → 0".into());
        }
    }

    // (2)/(3) real-slice sweep toward σ = 1
    if !(field.has_real_coefficients() && sigma.angle() == 0.0) {
        ev.notes.push("real-slice sweep needs σ = 1 and a real field".into());
        return Ok(ClassificationReport { verdict: Verdict::Withheld, evidence: ev });
    }
    let (k0, k1) = opts.gap_k;
    for k in k0..=k1 {
        let u0 = 0.5f64.powi(k as i32);
        match fam.evolve_real_gap(s0, t_eval, u0) {
            Ok(u) => {
                ev.gap_exponents.push(k);
                ev.gaps.push(u);
                ev.quotients.push(u / u0);
            }
            Err(e) => {
                ev.notes.push(format!("gap integration failed at k = {k}: {e}"));
                break;
            }
        }
    }
    if ev.gaps.len() < 4 {
        return Ok(ClassificationReport { verdict: Verdict::Withheld, evidence: ev });
    }
    let min_gap = ev.gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_q = ev.quotients.iter().cloned().fold(0.0, f64::max);
    ev.sup_phi = Some(1.0 - min_gap);
    ev.max_quotient = Some(max_q);
    let limit = extrapolate_real(&ev.gaps, 1e-6);
    let gap_limit = limit.value.re;
    ev.radial_limit = Some(1.0 - gap_limit);
    ev.radial_limit_error = Some(limit.error_estimate);

    if gap_limit.abs() < opts.margin && max_q > opts.divergence_threshold {
        ev.thresholds_crossed.push(format!(
            "sup φ → 1 while (1-φ(x))/(1-x) exceeds {:e}",
            opts.divergence_threshold
        ));
        return Ok(ClassificationReport { verdict: Verdict::FixedNonregular, evidence: ev });
    }
    let lim = 1.0 - gap_limit;
    if limit.converged && lim > opts.margin && lim < 1.0 - opts.margin {
        ev.thresholds_crossed.push(format!("radial limit {lim} inside (0,1) with margin {:e}", opts.margin));
        return Ok(ClassificationReport { verdict: Verdict::LostToInterior, evidence: ev });
    }
    Ok(ClassificationReport { verdict: Verdict::Withheld, evidence: ev })
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub t: f64,
    pub dilation: f64,
    pub max_violation: f64,
    pub witness: [f64; 2],
    pub holds: bool,
}

/// `max_z Re(v(z)G(z,t)) + G'(1,t)u(z)` with `u` the negative Poisson
/// kernel at `1` and `v = u_x − i u_y`. The dilation is the declared one
/// when the field carries it, otherwise the extrapolated quotient.
pub fn brnp_pde_inequality_check(field: &HerglotzField, t: f64, grid: &[Complex64]) -> Result<InequalityReport> {
    let one = BoundaryPoint::one();
    let lambda = match field.nullpoint_at(one) {
        Some(np) => np.dilation.eval(t),
        None => {
            let est = field_dilation(field, one, t, DEFAULT_TOL)?;
            if !is_brnp(&est) {
                return Err(Error::Precondition(format!("no boundary null point at 1 for t = {t}")));
            }
            est.value.re
        }
    };
    let mut report = InequalityReport { t, dilation: lambda, max_violation: f64::NEG_INFINITY, witness: [0.0, 0.0], holds: true };
    for &z in grid {
        let p = DiscPoint::new(z)?;
        let val = (poisson_v(p) * field.eval(z, t)).re + lambda * poisson_u(p);
        if val > report.max_violation {
            report.max_violation = val;
            report.witness = [z.re, z.im];
        }
    }
    report.holds = report.max_violation <= 1e-9;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct BvReport {
    pub s: f64,
    pub t: f64,
    pub increment: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `[Λ(t) − Λ(s)]⁺ ≤ log((1 + |φ_{s,t}(0)|)/(1 − |φ_{s,t}(0)|))` at a
/// boundary fixed point, with `Λ(t) − Λ(s) = −log|φ'_{s,t}(σ)|`.
pub fn bv_bound_check(fam: &EvolutionFamily, sigma: BoundaryPoint, s: f64, t: f64) -> Result<BvReport> {
    if s == t {
        return Ok(BvReport { s, t, increment: 0.0, bound: 0.0, holds: true });
    }
    let sched = StolzSchedule::radial(sigma);
    let omega = sigma.value();
    let d = angular_derivative(|z| fam.evolve(s, t, z), sigma, omega, &sched, DEFAULT_TOL)?;
    let increment = -d.value.norm().ln();
    let r = fam.evolve(s, t, Complex64::new(0.0, 0.0))?.norm();
    let bound = ((1.0 + r) / (1.0 - r)).ln();
    Ok(BvReport { s, t, increment, bound, holds: increment.max(0.0) <= bound + 1e-6 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disc::{sweep_grid_500, MoebiusAutomorphism, ONE};
    use crate::herglotz::{gallery_field, hyperbolic_field, pinned_zero_field, rotation_field, TimeFn};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one() -> BoundaryPoint {
        BoundaryPoint::one()
    }

    fn radial() -> StolzSchedule {
        StolzSchedule::radial(one())
    }

    #[test]
    fn angular_limit_examples() {
        let e = angular_limit(|z| Ok(z), one(), &radial(), DEFAULT_TOL).unwrap();
        assert!(e.converged && (e.value - ONE).norm() < 1e-12);
        let m = MoebiusAutomorphism::hyperbolic(0.5).unwrap();
        let e = angular_limit(|z| Ok(m.apply(z)), one(), &radial(), DEFAULT_TOL).unwrap();
        assert!((e.value - ONE).norm() < 1e-10);
        let e = angular_limit(|z| Ok(((z + ONE) / (z - ONE)).exp()), one(), &radial(), DEFAULT_TOL).unwrap();
        assert!(e.value.norm() < 1e-10, "{e:?}");
        assert!(angular_limit(|_| Ok(c(f64::NAN, 0.0)), one(), &radial(), DEFAULT_TOL).is_err());
    }

    #[test]
    fn angular_derivative_examples() {
        let e = angular_derivative(|z| Ok(z), one(), ONE, &radial(), DEFAULT_TOL).unwrap();
        assert!((e.value - ONE).norm() < 1e-12);
        let m = MoebiusAutomorphism::hyperbolic(0.5).unwrap();
        let e = angular_derivative(|z| Ok(m.apply(z)), one(), ONE, &radial(), DEFAULT_TOL).unwrap();
        assert!((e.value.re - 1.0 / 3.0).abs() < 1e-9, "{e:?}");
        let fam = EvolutionFamily::with_defaults(hyperbolic_field(1.0));
        let e = angular_derivative(|z| fam.evolve(0.0, 0.7, z), one(), ONE, &radial(), DEFAULT_TOL).unwrap();
        assert!((e.value.re - (-0.7f64).exp()).abs() < 1e-7, "{e:?}");
    }

    #[test]
    fn angular_derivative_in_stolz_angle() {
        let m = MoebiusAutomorphism::hyperbolic(0.5).unwrap();
        let sched = StolzSchedule::new(one(), 4, 24, 0.6).unwrap();
        let e = angular_derivative(|z| Ok(m.apply(z)), one(), ONE, &sched, DEFAULT_TOL).unwrap();
        assert!((e.value - 1.0 / 3.0).norm() < 1e-9);
    }

    #[test]
    fn dilatation_examples() {
        let e = dilatation_coefficient(|z| Ok(z), one(), &radial(), DEFAULT_TOL).unwrap();
        assert!((e.value.re - 1.0).abs() < 1e-9);
        let m = MoebiusAutomorphism::hyperbolic(0.5).unwrap();
        let e = dilatation_coefficient(|z| Ok(m.apply(z)), one(), &radial(), DEFAULT_TOL).unwrap();
        assert!((e.value.re - 1.0 / 3.0).abs() < 1e-8, "{e:?}");
        let e = dilatation_coefficient(|z| Ok(z * z), one(), &radial(), DEFAULT_TOL).unwrap();
        assert!((e.value.re - 2.0).abs() < 1e-8, "{e:?}");
        let e = dilatation_coefficient(|z| Ok(((z + ONE) / (z - ONE)).exp()), one(), &radial(), DEFAULT_TOL).unwrap();
        assert!(!e.converged);
    }

    #[test]
    fn jwc_examples() {
        let grid = sweep_grid_500();
        assert!(jwc_inequality_check(|z| Ok(z), one(), ONE, 1.0, &grid).unwrap() <= 0.0);
        let m = MoebiusAutomorphism::hyperbolic(0.5).unwrap();
        assert!(jwc_inequality_check(|z| Ok(m.apply(z)), one(), ONE, 1.0 / 3.0, &grid).unwrap() <= 1e-9);
        assert!(jwc_inequality_check(|z| Ok(z * z), one(), ONE, 2.0, &grid).unwrap() <= 1e-9);
        assert!(jwc_inequality_check(|z| Ok(z * z), one(), ONE, 1.0, &grid).unwrap() > 0.0);
    }

    #[test]
    fn dw_bound_examples() {
        let r = dw_lower_bound_check(|z| Ok(z * z), c(0.0, 0.0), one(), &radial()).unwrap();
        assert!(r.holds && (r.bound - 1.0).abs() < 1e-12 && (r.alpha - 2.0).abs() < 1e-8);
        // elliptic automorphism: equality
        let a = c(0.3, 0.2);
        let to0 = MoebiusAutomorphism::new(ONE, -a).unwrap();
        let rot = MoebiusAutomorphism::rotation_by(0.9);
        let m = to0.invert().compose(&rot.compose(&to0));
        let sigma = BoundaryPoint::from_angle(2.0);
        let r = dw_lower_bound_check(|z| Ok(m.apply(z)), a, sigma, &StolzSchedule::radial(sigma)).unwrap();
        assert!(r.slack.abs() < 1e-8, "{r:?}");
        // hyperbolic automorphism: strict inequality at the repelling point
        let m = MoebiusAutomorphism::hyperbolic(0.5).unwrap();
        let s = BoundaryPoint::from_angle(PI);
        let r = dw_lower_bound_check(|z| Ok(m.apply(z)), ONE, s, &StolzSchedule::radial(s)).unwrap();
        assert!(r.holds && (r.alpha - 3.0).abs() < 1e-7 && (r.bound - 1.0).abs() < 1e-9, "{r:?}");
        let r = dw_lower_bound_check(|z| Ok(z), ONE, one(), &radial()).unwrap();
        assert!(r.skipped);
    }

    #[test]
    fn brnp_dilation_examples() {
        let e = brnp_dilation(|z| 0.5 * (z * z - ONE), one(), &radial(), DEFAULT_TOL).unwrap();
        assert!(is_brnp(&e) && (e.value.re - 1.0).abs() < 1e-10);
        let e = brnp_dilation(|z| -z, one(), &radial(), DEFAULT_TOL).unwrap();
        assert!(!e.converged);
        let g = crate::herglotz::example64_field(1.0).unwrap();
        let f = g.to_field();
        for t in [0.05, 0.1, 0.3] {
            let e = field_dilation(&f, one(), t, DEFAULT_TOL).unwrap();
            assert!(is_brnp(&e));
            assert!((e.value.re / g.lambda(t) - 1.0).abs() < 1e-8, "t = {t}: {e:?}");
        }
    }

    #[test]
    fn pinned_dilation_recovered() {
        for lam in [-2.0, -0.5, 1.0, 3.0] {
            let f = pinned_zero_field(one(), TimeFn::constant(lam));
            let e = field_dilation(&f, one(), 0.0, DEFAULT_TOL).unwrap();
            assert!((e.value.re - lam).abs() < 1e-6);
        }
    }

    fn grid(n: usize, end: f64) -> Vec<f64> {
        (0..=n).map(|k| end * k as f64 / n as f64).collect()
    }

    #[test]
    fn spectral_constant_dilation() {
        let f = pinned_zero_field(one(), TimeFn::constant(1.0));
        let fam = EvolutionFamily::with_defaults(f);
        let times = grid(10, 1.0);
        let tr = spectral_trace(&fam, one(), &times, &SpectralOptions::default()).unwrap();
        assert!(tr.discrepancy < 1e-4, "{tr:?}");
        for (t, l) in times.iter().zip(&tr.lambda_integral) {
            assert!((l + t).abs() < 1e-8);
        }
        assert_eq!(tr.lambda_direct[0], 0.0);
    }

    #[test]
    fn spectral_zero_field() {
        let fam = EvolutionFamily::with_defaults(pinned_zero_field(one(), TimeFn::constant(0.0)));
        let tr = spectral_trace(&fam, one(), &grid(4, 1.0), &SpectralOptions::default()).unwrap();
        assert!(tr.lambda_direct.iter().chain(&tr.lambda_integral).all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn moving_trace_rotation_and_rotated_hyperbolic() {
        let times = grid(5, 1.0);
        let fam = EvolutionFamily::with_defaults(rotation_field(1.0));
        let m = moving_spectral_trace(&fam, one(), &times, &SpectralOptions::default()).unwrap();
        assert!(m.trace.lambda_integral.iter().all(|v| v.abs() < 1e-8));
        assert!(m.trace.discrepancy < 1e-6, "{:?}", m.trace);
        assert!(m.tangential_mismatch < 1e-6);

        let rot = MoebiusAutomorphism::rotation_by(PI / 4.0);
        let fam_r = EvolutionFamily::with_defaults(hyperbolic_field(1.0).pushforward(&rot));
        let fam_0 = EvolutionFamily::with_defaults(hyperbolic_field(1.0));
        let a = moving_spectral_trace(&fam_r, BoundaryPoint::from_angle(PI / 4.0), &times, &SpectralOptions::default()).unwrap();
        let b = spectral_trace(&fam_0, one(), &times, &SpectralOptions::default()).unwrap();
        for (x, y) in a.trace.lambda_integral.iter().zip(&b.lambda_integral) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn moving_trace_two_routes_agree() {
        let base = hyperbolic_field(1.0);
        let field = HerglotzField::new("hyp+rot", move |z, t| base.eval(z, t) + c(0.0, 0.7) * z);
        let fam = EvolutionFamily::with_defaults(field);
        let m = moving_spectral_trace(&fam, BoundaryPoint::from_angle(2.0), &grid(5, 0.5), &SpectralOptions::default()).unwrap();
        assert!(m.trace.discrepancy < 1e-4, "{:?}", m.trace);
        assert!(m.angles.last().unwrap() - m.angles[0] != 0.0);
        assert!(m.tangential_mismatch < 1e-6);
    }

    #[test]
    fn classification_of_hyperbolic_field() {
        let fam = EvolutionFamily::with_defaults(pinned_zero_field(one(), TimeFn::constant(1.0)));
        let r = classify_boundary_point(&fam, one(), &ClassifyOptions::at(0.5)).unwrap();
        assert_eq!(r.verdict, Verdict::RegularFixed, "{r:?}");
    }

    #[test]
    fn classification_of_rotation() {
        let fam = EvolutionFamily::with_defaults(rotation_field(1.0));
        let r = classify_boundary_point(&fam, one(), &ClassifyOptions::at(0.5)).unwrap();
        assert_eq!(r.verdict, Verdict::ContactMoving);
    }

    #[test]
    fn pde_inequality_examples() {
        let grid = sweep_grid_500();
        let zero = pinned_zero_field(one(), TimeFn::constant(0.0));
        assert!(brnp_pde_inequality_check(&zero, 0.0, &grid).unwrap().max_violation.abs() < 1e-15);
        let f = pinned_zero_field(one(), TimeFn::constant(1.0));
        assert!(brnp_pde_inequality_check(&f, 0.0, &grid).unwrap().holds);
        let g = gallery_field("g64:1").unwrap();
        let r = brnp_pde_inequality_check(&g, 0.1, &grid).unwrap();
        assert!(r.holds, "{r:?}");
    }

    #[test]
    fn bv_bound_examples() {
        let fam = EvolutionFamily::with_defaults(hyperbolic_field(1.0));
        let r = bv_bound_check(&fam, one(), 0.0, 1.0).unwrap();
        assert!(r.holds && (r.increment - 1.0).abs() < 1e-6, "{r:?}");
        assert!(bv_bound_check(&fam, one(), 0.3, 0.3).unwrap().holds);
        let fam = EvolutionFamily::with_defaults(pinned_zero_field(one(), TimeFn::constant(-2.0)));
        let r = bv_bound_check(&fam, one(), 0.0, 0.5).unwrap();
        assert!(r.holds && r.increment > 0.0, "{r:?}");
    }
}
