//! Finite-horizon Loewner chains `f_s = φ_{s,T}`, their PDE and
//! association residuals, the boundary conditions at a point, simple
//! poles, and the radial Loewner equation.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::boundary::{angular_derivative, angular_limit, DEFAULT_TOL};
use crate::disc::{BoundaryPoint, StolzSchedule, ONE};
use crate::error::{Error, Result};
use crate::evolution::EvolutionFamily;
use crate::extrapolate::extrapolate;
use crate::herglotz::{CaratheodoryFunction, HerglotzField};

type MapFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// Conformal map applied after the chain, e.g. to move a boundary fixed
/// point to a pole.
#[derive(Clone)]
pub struct OuterMap {
    label: String,
    f: MapFn,
    df: MapFn,
}

impl std::fmt::Debug for OuterMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label)
    }
}

impl OuterMap {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static,
        df: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self { label: label.into(), f: Arc::new(f), df: Arc::new(df) }
    }

    /// `w ↦ (1 + w)/(1 − w)`, a pole at `1`.
    pub fn cayley_pole() -> Self {
        Self::new("(1+w)/(1-w)", |w| (ONE + w) / (ONE - w), |w| 2.0 / ((ONE - w) * (ONE - w)))
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

#[derive(Debug, Clone)]
pub struct ChainSnapshot {
    family: Arc<EvolutionFamily>,
    horizon: f64,
    outer: Option<OuterMap>,
}

pub fn chain_from_family(fam: Arc<EvolutionFamily>, horizon: f64) -> Result<ChainSnapshot> {
    let dom = fam.field().validity();
    if !(horizon > dom.start) || !dom.contains_interval(dom.start, horizon) {
        return Err(Error::Domain(format!("horizon {horizon} outside the field's validity")));
    }
    Ok(ChainSnapshot { family: fam, horizon, outer: None })
}

impl ChainSnapshot {
    pub fn with_outer(mut self, outer: OuterMap) -> Self {
        self.outer = Some(outer);
        self
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn family(&self) -> &EvolutionFamily {
        &self.family
    }

    pub fn field_id(&self) -> &str {
        self.family.field().id()
    }

    pub fn outer(&self) -> Option<&OuterMap> {
        self.outer.as_ref()
    }

    fn check_time(&self, s: f64) -> Result<()> {
        let start = self.family.field().validity().start;
        if s < start || s > self.horizon {
            return Err(Error::Domain(format!("chain time {s} outside [{start}, {}]", self.horizon)));
        }
        Ok(())
    }

    /// `φ_{s,T}(z)` before the outer map.
    pub fn inner(&self, s: f64, z: Complex64) -> Result<Complex64> {
        self.check_time(s)?;
        self.family.evolve(s, self.horizon, z)
    }

    /// `f_s(z)`.
    pub fn eval(&self, s: f64, z: Complex64) -> Result<Complex64> {
        let w = self.inner(s, z)?;
        Ok(match &self.outer {
            Some(o) => (o.f)(w),
            None => w,
        })
    }

    /// `(f_s(z), f'_s(z))`.
    pub fn eval_with_derivative(&self, s: f64, z: Complex64) -> Result<(Complex64, Complex64)> {
        self.check_time(s)?;
        let (w, d) = self.family.evolve_with_derivative(s, self.horizon, z)?;
        Ok(match &self.outer {
            Some(o) => ((o.f)(w), (o.df)(w) * d),
            None => (w, d),
        })
    }

    /// `max |f_t(φ_{s,t}(z)) − f_s(z)|` over the grid.
    pub fn association_residual(&self, s: f64, t: f64, grid: &[Complex64]) -> Result<f64> {
        if s > t {
            return Err(Error::Domain(format!("association needs s <= t, got {s} > {t}")));
        }
        let mut worst: f64 = 0.0;
        for &z in grid {
            let w = self.family.evolve_fresh(s, t, z)?;
            let a = self.eval_fresh(t, w)?;
            let b = self.eval_fresh(s, z)?;
            worst = worst.max((a - b).norm());
        }
        Ok(worst)
    }

    fn eval_fresh(&self, s: f64, z: Complex64) -> Result<Complex64> {
        self.check_time(s)?;
        let w = self.family.evolve_fresh(s, self.horizon, z)?;
        Ok(match &self.outer {
            Some(o) => (o.f)(w),
            None => w,
        })
    }

    /// Worst Newton residual of `f_t(ζ) = f_s(z)` over the grid, failing if
    /// some preimage cannot be found inside the disc.
    pub fn range_monotonicity(&self, s: f64, t: f64, grid: &[Complex64]) -> Result<f64> {
        if s >= t {
            return Err(Error::Domain(format!("range check needs s < t, got {s}, {t}")));
        }
        let mut worst: f64 = 0.0;
        for &z in grid {
            let w = self.inner(s, z)?;
            let zeta = self.family.invert(t, self.horizon, w)?;
            if zeta.norm() >= 1.0 {
                return Err(Error::InvariantViolation {
                    what: "range monotonicity".into(),
                    witness: z,
                    value: zeta.norm(),
                });
            }
            let r = (self.family.evolve_fresh(t, self.horizon, zeta)? - w).norm();
            worst = worst.max(r);
        }
        Ok(worst)
    }
}

/// `|∂f_s/∂s + G(z,s) f'_s(z)|` with a central difference of width `δ`.
pub fn pde_residual(chain: &ChainSnapshot, z: Complex64, s: f64, delta: f64) -> Result<f64> {
    let start = chain.family.field().validity().start;
    if s - delta < start || s + delta > chain.horizon {
        return Err(Error::Domain(format!("s ± δ = {s} ± {delta} leaves [{start}, {}]", chain.horizon)));
    }
    let plus = chain.eval_fresh(s + delta, z)?;
    let minus = chain.eval_fresh(s - delta, z)?;
    let ds = (plus - minus) / (2.0 * delta);
    let (_, d) = chain.eval_with_derivative(s, z)?;
    Ok((ds + chain.family.field().eval(z, s) * d).norm())
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionRow {
    pub s: f64,
    pub boundary_value: [f64; 2],
    pub derivative: [f64; 2],
    pub conformal: bool,
    pub same_value: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub sigma: f64,
    pub t0: f64,
    pub rows: Vec<ConditionRow>,
    pub c1: bool,
    pub c2: bool,
    pub max_arg_jump: f64,
    pub c3: bool,
    pub arg_spread: Option<f64>,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        self.c1 && self.c2 && self.c3
    }
}

/// Conformality of each `f_s` at `σ`, agreement of boundary values with
/// `f_{t0}(σ)`, and the largest argument jump of `f'_s(σ)` between
/// consecutive grid times. When all three hold, `arg_spread` records how
/// much `arg f'_s(σ)` varies over the grid.
pub fn condition_c_check(chain: &ChainSnapshot, sigma: BoundaryPoint, t0: f64, grid: &[f64], margin: f64) -> Result<ConditionReport> {
    if !grid.iter().any(|&s| s == t0) {
        return Err(Error::Precondition(format!("t0 = {t0} is not on the time grid")));
    }
    let sched = StolzSchedule::radial(sigma);
    let mut rows = Vec::with_capacity(grid.len());
    for &s in grid {
        let f = |z| chain.eval(s, z);
        let mut notes = Vec::new();
        let lim = angular_limit(f, sigma, &sched, DEFAULT_TOL)?;
        let mut row = ConditionRow {
            s,
            boundary_value: [lim.value.re, lim.value.im],
            derivative: [f64::NAN, f64::NAN],
            conformal: false,
            same_value: false,
            notes: Vec::new(),
        };
        if lim.converged {
            let d = angular_derivative(f, sigma, lim.value, &sched, 1e-6)?;
            row.derivative = [d.value.re, d.value.im];
            row.conformal = d.converged && d.value.is_finite() && d.value.norm() > 1e-12;
            if !d.converged {
                notes.push(format!("derivative not converged ({:?})", d.pattern));
            }
        } else {
            notes.push(format!("boundary value not converged ({:?})", lim.pattern));
        }
        row.notes = notes;
        rows.push(row);
    }
    let base = rows.iter().find(|r| r.s == t0).map(|r| Complex64::new(r.boundary_value[0], r.boundary_value[1])).unwrap();
    for r in &mut rows {
        let v = Complex64::new(r.boundary_value[0], r.boundary_value[1]);
        r.same_value = (v - base).norm() < 1e-6;
    }
    let derivs: Vec<Complex64> = rows.iter().map(|r| Complex64::new(r.derivative[0], r.derivative[1])).collect();
    let max_arg_jump = derivs
        .windows(2)
        .map(|w| (w[1] / w[0]).arg().abs())
        .fold(0.0, |m: f64, x| if x.is_nan() { f64::NAN } else { m.max(x) });
    let c1 = rows.iter().all(|r| r.conformal);
    let c2 = rows.iter().all(|r| r.same_value);
    let c3 = max_arg_jump < PI - margin;
    let arg_spread = if c1 && c2 && c3 {
        Some(derivs.iter().map(|d| (d / derivs[0]).arg().abs()).fold(0.0, f64::max))
    } else {
        None
    };
    Ok(ConditionReport { sigma: sigma.angle(), t0, rows, c1, c2, max_arg_jump, c3, arg_spread })
}

#[derive(Debug, Clone, Serialize)]
pub struct PoleData {
    pub sigma: f64,
    pub residue: [f64; 2],
    pub converged: bool,
    pub simple_pole: bool,
}

impl PoleData {
    pub fn residue(&self) -> Complex64 {
        Complex64::new(self.residue[0], self.residue[1])
    }
}

/// Extrapolated `∠lim (z − σ) f(z)`; a simple pole needs a converged,
/// nonzero limit.
pub fn residue_at_pole<F>(f: F, sigma: BoundaryPoint, schedule: &StolzSchedule) -> Result<PoleData>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let s = sigma.value();
    let pts = schedule.with_base(sigma).points();
    let mut q = Vec::with_capacity(pts.len());
    for z in pts {
        let v = (z - s) * f(z)?;
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("(z-σ)f(z) at {z}")));
        }
        q.push(v);
    }
    let est = extrapolate(&q, DEFAULT_TOL);
    let simple = est.converged && est.value.norm() > 1e-8;
    Ok(PoleData { sigma: sigma.angle(), residue: [est.value.re, est.value.im], converged: est.converged, simple_pole: simple })
}

/// Time change `l(t) = T t/(1 + t)` from `[0, ∞)` onto `[0, T)`.
pub fn pole_time(horizon: f64, t: f64) -> f64 {
    if t.is_infinite() {
        horizon
    } else {
        horizon * t / (1.0 + t)
    }
}

/// `g_t(z) = 1/(f_{l(t)}(z) − w0)`.
#[derive(Debug, Clone)]
pub struct PoleTransform {
    chain: ChainSnapshot,
    w0: Complex64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PoleTransformCheck {
    pub t: f64,
    pub chain_time: f64,
    pub value_at_sigma: [f64; 2],
    pub derivative: [f64; 2],
    pub reciprocal_residue: [f64; 2],
    pub vanishes: bool,
    pub matches: bool,
}

pub const DEFAULT_POLE_OFFSET: Complex64 = Complex64::new(-2.0, 0.0);

/// Builds `g_t`, refusing `w0` closer than `0.1` to the sampled images
/// `f_{l(t)}(grid)` at the test times.
pub fn pole_transform(chain: &ChainSnapshot, w0: Complex64, test_times: &[f64], grid: &[Complex64]) -> Result<PoleTransform> {
    for &t in test_times {
        let s = pole_time(chain.horizon, t);
        for &z in grid {
            let d = (chain.eval(s, z)? - w0).norm();
            if d <= 0.1 {
                return Err(Error::Precondition(format!(
                    "w0 = {w0} lies within {d:.3e} of f_{s}({z}); pick a point away from the image"
                )));
            }
        }
    }
    Ok(PoleTransform { chain: chain.clone(), w0 })
}

impl PoleTransform {
    pub fn w0(&self) -> Complex64 {
        self.w0
    }

    pub fn eval(&self, t: f64, z: Complex64) -> Result<Complex64> {
        let s = pole_time(self.chain.horizon, t);
        Ok(1.0 / (self.chain.eval(s, z)? - self.w0))
    }

    /// `g_t(σ) = 0` and `g'_t(σ) = 1/Res(f_{l(t)}; σ)`.
    pub fn check(&self, sigma: BoundaryPoint, t: f64) -> Result<PoleTransformCheck> {
        let sched = StolzSchedule::radial(sigma);
        let s = pole_time(self.chain.horizon, t);
        let v = angular_limit(|z| self.eval(t, z), sigma, &sched, DEFAULT_TOL)?;
        let d = angular_derivative(|z| self.eval(t, z), sigma, Complex64::new(0.0, 0.0), &sched, 1e-6)?;
        let pole = residue_at_pole(|z| self.chain.eval(s, z), sigma, &sched)?;
        let recip = 1.0 / pole.residue();
        Ok(PoleTransformCheck {
            t,
            chain_time: s,
            value_at_sigma: [v.value.re, v.value.im],
            derivative: [d.value.re, d.value.im],
            reciprocal_residue: [recip.re, recip.im],
            vanishes: v.value.norm() < 1e-6,
            matches: pole.simple_pole && (d.value - recip).norm() < 1e-5 * recip.norm().max(1.0),
        })
    }
}

fn radial_field(p: &CaratheodoryFunction) -> HerglotzField {
    let p1 = p.clone();
    HerglotzField::new(format!("radial[{}]", p.label()), move |w, t| -w * p1.eval(w, t))
        .autonomous(p.is_autonomous())
}

fn check_normalized(p: &CaratheodoryFunction, s: f64, t: f64) -> Result<()> {
    for k in 0..=16 {
        let x = s + (t - s) * k as f64 / 16.0;
        let v = p.eval(Complex64::new(0.0, 0.0), x);
        if (v - ONE).norm() > 1e-10 {
            return Err(Error::Precondition(format!("p(0, {x}) = {v}, expected 1")));
        }
    }
    Ok(())
}

/// Solution of `dw/dt = −w p(w,t)`, `w(s) = z`.
pub fn radial_loewner(p: &CaratheodoryFunction, s: f64, t: f64, z: Complex64) -> Result<Complex64> {
    check_normalized(p, s, t)?;
    EvolutionFamily::with_defaults(radial_field(p)).without_cache().evolve_fresh(s, t, z)
}

/// `(φ_{s,t}(z), φ'_{s,t}(z))` for the radial equation.
pub fn radial_loewner_with_derivative(p: &CaratheodoryFunction, s: f64, t: f64, z: Complex64) -> Result<(Complex64, Complex64)> {
    check_normalized(p, s, t)?;
    EvolutionFamily::with_defaults(radial_field(p)).without_cache().evolve_with_derivative(s, t, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disc::sweep_grid_50;
    use crate::herglotz::{example64_field, hyperbolic_field, rotation_field, HerglotzField};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn chain(field: HerglotzField, t: f64) -> ChainSnapshot {
        chain_from_family(Arc::new(EvolutionFamily::with_defaults(field)), t).unwrap()
    }

    /// Closed-form flow of `(λ/2)(1 − z²)`: `tanh` shift in Cayley
    /// coordinates.
    fn hyperbolic_flow(lambda: f64, dt: f64, z: Complex64) -> Complex64 {
        let h = (ONE + z) / (ONE - z);
        let w = h * (lambda * dt).exp();
        (w - ONE) / (w + ONE)
    }

    #[test]
    fn identity_at_horizon() {
        let ch = chain(hyperbolic_field(1.0), 0.8);
        let z = c(0.3, -0.4);
        assert_eq!(ch.eval(0.8, z).unwrap(), z);
    }

    #[test]
    fn hyperbolic_chain_closed_form() {
        let ch = chain(hyperbolic_field(1.0), 1.0);
        for &z in &sweep_grid_50() {
            for s in [0.0, 0.4] {
                let exact = hyperbolic_flow(1.0, 1.0 - s, z);
                assert!((ch.eval(s, z).unwrap() - exact).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn association_residual_g64() {
        let ch = chain(example64_field(1.0).unwrap().to_field(), 0.3);
        let r = ch.association_residual(0.05, 0.2, &sweep_grid_50()).unwrap();
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn pde_residual_examples() {
        let ch = chain(hyperbolic_field(1.0), 1.0);
        assert!(pde_residual(&ch, c(0.0, 0.0), 0.5, 1e-4).unwrap() < 1e-6);
        let ch = chain(rotation_field(1.0), 1.0);
        assert!(pde_residual(&ch, c(0.3, 0.2), 0.5, 1e-4).unwrap() < 1e-8);
        let ch = chain(example64_field(1.0).unwrap().to_field(), 0.3);
        let r = pde_residual(&ch, c(0.3, 0.1), 0.15, 1e-4).unwrap();
        assert!(r < 1e-5, "{r}");
        assert!(pde_residual(&ch, c(0.3, 0.1), 0.29999, 1e-4).is_err());
    }

    #[test]
    fn condition_c_hyperbolic_and_rotation() {
        let ch = chain(hyperbolic_field(1.0), 1.0);
        let grid = [0.0, 0.25, 0.5, 0.75];
        let r = condition_c_check(&ch, BoundaryPoint::one(), 0.5, &grid, 0.1).unwrap();
        assert!(r.all_hold(), "{r:?}");
        assert!(r.arg_spread.unwrap() < 1e-8);
        for row in &r.rows {
            assert!((row.derivative[0] - (-(1.0 - row.s)).exp()).abs() < 1e-6);
        }
        let ch = chain(rotation_field(1.0), 1.0);
        let r = condition_c_check(&ch, BoundaryPoint::one(), 0.5, &grid, 0.1).unwrap();
        assert!(!r.c2);
    }

    #[test]
    fn condition_c_g64_fails_conformality_at_start() {
        let ch = chain(example64_field(1.0).unwrap().to_field(), 0.3);
        let r = condition_c_check(&ch, BoundaryPoint::one(), 0.1, &[0.0, 0.1, 0.2], 0.1).unwrap();
        assert!(!r.rows[0].conformal, "{r:?}");
        assert!(!r.c1);
        assert!(r.rows[1].conformal);
    }

    #[test]
    fn residue_examples() {
        let one = BoundaryPoint::one();
        let sched = StolzSchedule::radial(one);
        let p = residue_at_pole(|z| Ok(1.0 / (ONE - z)), one, &sched).unwrap();
        assert!(p.simple_pole && (p.residue() + 1.0).norm() < 1e-12);
        let p = residue_at_pole(|z| Ok((ONE + z) / (ONE - z)), one, &sched).unwrap();
        assert!(p.simple_pole && (p.residue() + 2.0).norm() < 1e-9);
        let p = residue_at_pole(|z| Ok(z), one, &sched).unwrap();
        assert!(!p.simple_pole);
    }

    #[test]
    fn pole_time_map() {
        assert_eq!(pole_time(2.0, 0.0), 0.0);
        assert_eq!(pole_time(2.0, 1.0), 1.0);
        assert_eq!(pole_time(2.0, f64::INFINITY), 2.0);
    }

    #[test]
    fn pole_transform_of_cayley_chain() {
        let ch = chain(hyperbolic_field(1.0), 1.0).with_outer(OuterMap::cayley_pole());
        let grid = sweep_grid_50();
        // 2 = (1 + 1/3)/(1 − 1/3) lies in the image of f_T
        let probe = [c(1.0 / 3.0, 0.0)];
        assert!(pole_transform(&ch, c(2.0, 0.0), &[f64::INFINITY], &probe).is_err());
        let pt = pole_transform(&ch, DEFAULT_POLE_OFFSET, &[0.0, 1.0], &grid).unwrap();
        let r = pt.check(BoundaryPoint::one(), 1.0).unwrap();
        assert!(r.vanishes && r.matches, "{r:?}");
        // Res = −2 e^{T − l(1)}
        assert!((r.reciprocal_residue[0] + 0.5 * (-0.5f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn pole_transform_of_plain_cayley() {
        let ch = chain(hyperbolic_field(1.0), 1.0).with_outer(OuterMap::cayley_pole());
        let pt = pole_transform(&ch, DEFAULT_POLE_OFFSET, &[], &[]).unwrap();
        let r = pt.check(BoundaryPoint::one(), f64::INFINITY).unwrap();
        assert!((r.derivative[0] + 0.5).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn radial_examples() {
        let one = CaratheodoryFunction::constant(ONE);
        let z = c(0.4, 0.3);
        let w = radial_loewner(&one, 0.2, 1.0, z).unwrap();
        assert!((w - z * (-0.8f64).exp()).norm() < 1e-10);
        let cay = CaratheodoryFunction::cayley();
        assert_eq!(radial_loewner(&cay, 0.0, 1.0, c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        let (_, d) = radial_loewner_with_derivative(&cay, 0.0, 1.0, c(0.0, 0.0)).unwrap();
        assert!((d - (-1.0f64).exp()).norm() < 1e-8);
        assert!(radial_loewner(&CaratheodoryFunction::constant(c(2.0, 0.0)), 0.0, 1.0, z).is_err());
    }

    #[test]
    fn range_monotone() {
        let ch = chain(hyperbolic_field(1.0), 1.0);
        let r = ch.range_monotonicity(0.1, 0.6, &sweep_grid_50()).unwrap();
        assert!(r < 1e-10);
    }
}
