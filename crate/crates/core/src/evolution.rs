//! Evolution families `φ_{s,t}` obtained by integrating `dw/dt = G(w,t)`.

use std::collections::HashMap;
use std::sync::RwLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disc::BoundaryPoint;
use crate::error::{Error, Result};
use crate::herglotz::HerglotzField;
use crate::ode::{Dopri5, Refusal, StepControl};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub containment_margin: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-2,
            h_min: 1e-20,
            h_max: 0.1,
            containment_margin: 1e-12,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rtol >= 1e-15
            && self.atol > 0.0
            && self.h_min > 0.0
            && self.h_min <= self.h_init
            && self.h_init <= self.h_max
            && self.containment_margin >= 0.0
            && self.containment_margin < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "invalid integrator configuration {self:?}"
            )))
        }
    }

    /// Multiplies `rtol` and `atol` by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rtol: self.rtol * factor,
            atol: self.atol * factor,
            ..*self
        }
    }

    fn control(&self) -> StepControl {
        StepControl {
            rtol: self.rtol,
            atol: self.atol,
            h_init: self.h_init,
            h_min: self.h_min,
            h_max: self.h_max,
        }
    }
}

type Key = (u64, u64, u64);

fn key(s: f64, z: Complex64) -> Key {
    (s.to_bits(), z.re.to_bits(), z.im.to_bits())
}

/// Two-parameter family `φ_{s,t}` of a Herglotz field.
///
/// Forward trajectories started at `(s, z)` are remembered at every
/// requested time so later queries resume from the nearest earlier
/// checkpoint instead of restarting at `s`.
pub struct EvolutionFamily {
    field: HerglotzField,
    config: IntegratorConfig,
    cache: Option<RwLock<HashMap<Key, Vec<(f64, Complex64)>>>>,
}

impl std::fmt::Debug for EvolutionFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EvolutionFamily")
            .field("field", &self.field.id())
            .field("config", &self.config)
            .field("cached", &self.cache.is_some())
            .finish()
    }
}

impl Clone for EvolutionFamily {
    fn clone(&self) -> Self {
        Self {
            field: self.field.clone(),
            config: self.config,
            cache: self.cache.as_ref().map(|_| RwLock::new(HashMap::new())),
        }
    }
}

impl EvolutionFamily {
    pub fn new(field: HerglotzField, config: IntegratorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            field,
            config,
            cache: Some(RwLock::new(HashMap::new())),
        })
    }

    pub fn with_defaults(field: HerglotzField) -> Self {
        Self::new(field, IntegratorConfig::default()).expect("default configuration is valid")
    }

    pub fn without_cache(mut self) -> Self {
        self.cache = None;
        self
    }

    pub fn field(&self) -> &HerglotzField {
        &self.field
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.config
    }

    pub fn cached_trajectories(&self) -> usize {
        self.cache
            .as_ref()
            .map(|c| c.read().expect("cache lock").len())
            .unwrap_or(0)
    }

    fn check_interval(&self, s: f64, t: f64) -> Result<()> {
        if !(s <= t) {
            return Err(Error::Domain(format!("need s <= t, got s = {s}, t = {t}")));
        }
        let d = self.field.validity();
        if !d.contains_interval(s, t) {
            return Err(Error::Domain(format!(
                "[{s}, {t}] outside the validity interval [{}, {}) of {}",
                d.start,
                d.end,
                self.field.id()
            )));
        }
        Ok(())
    }

    fn solver<'a>(&'a self, s: f64, z: Complex64) -> Dopri5<'a, 2> {
        let field = &self.field;
        let (rtol, atol) = (self.config.rtol, self.config.atol);
        let limit = 1.0 - self.config.containment_margin;
        Dopri5::new(
            move |t, y: &[f64; 2]| {
                let g = field.eval(Complex64::new(y[0], y[1]), t);
                [g.re, g.im]
            },
            s,
            [z.re, z.im],
            self.config.control(),
        )
        .with_scale(move |a, b| {
            let m = a[0].hypot(a[1]).max(b[0].hypot(b[1]));
            let sc = (atol + rtol * m) * (1.0 - m).max(1e-300);
            [sc, sc]
        })
        .with_admissible(move |y| {
            let m = y[0].hypot(y[1]);
            if m < limit {
                Ok(())
            } else {
                Err(Refusal { modulus: m })
            }
        })
    }

    fn validate_start(z: Complex64) -> Result<()> {
        if z.is_finite() && z.norm() < 1.0 {
            Ok(())
        } else {
            Err(Error::NotInDisc(z))
        }
    }

    /// `φ_{s,t}(z)` without touching the cache.
    pub fn evolve_fresh(&self, s: f64, t: f64, z: Complex64) -> Result<Complex64> {
        self.check_interval(s, t)?;
        Self::validate_start(z)?;
        if s == t {
            return Ok(z);
        }
        let y = self.solver(s, z).advance_to(t)?;
        Ok(Complex64::new(y[0], y[1]))
    }

    /// `φ_{s,t}(z)`.
    pub fn evolve(&self, s: f64, t: f64, z: Complex64) -> Result<Complex64> {
        Ok(self.evolve_path(s, &[t], z)?[0])
    }

    /// `φ_{s,t}(z)` for every `t` in the nondecreasing list `times`.
    pub fn evolve_path(&self, s: f64, times: &[f64], z: Complex64) -> Result<Vec<Complex64>> {
        Self::validate_start(z)?;
        if let Some(&last) = times.last() {
            self.check_interval(s, last)?;
        }
        if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < s) {
            return Err(Error::Domain("output times must be nondecreasing and >= s".into()));
        }
        let Some(cache) = &self.cache else {
            return self.integrate_path(s, z, s, z, times).map(|v| v.into_iter().map(|p| p.1).collect());
        };
        let k = key(s, z);
        let (t_start, w_start) = {
            let guard = cache.read().expect("cache lock");
            match (guard.get(&k), times.first()) {
                (Some(cps), Some(&t0)) => cps
                    .iter()
                    .rev()
                    .find(|(tc, _)| *tc <= t0)
                    .copied()
                    .unwrap_or((s, z)),
                _ => (s, z),
            }
        };
        let out = self.integrate_path(s, z, t_start, w_start, times)?;
        let mut guard = cache.write().expect("cache lock");
        let entry = guard.entry(k).or_default();
        for &(t, w) in &out {
            match entry.binary_search_by(|(tc, _)| tc.total_cmp(&t)) {
                Ok(_) => {}
                Err(i) => entry.insert(i, (t, w)),
            }
        }
        Ok(out.into_iter().map(|p| p.1).collect())
    }

    fn integrate_path(
        &self,
        s: f64,
        z: Complex64,
        t_start: f64,
        w_start: Complex64,
        times: &[f64],
    ) -> Result<Vec<(f64, Complex64)>> {
        let mut solver = self.solver(t_start, w_start);
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let w = if t == s {
                z
            } else {
                let y = solver.advance_to(t)?;
                Complex64::new(y[0], y[1])
            };
            out.push((t, w));
        }
        Ok(out)
    }

    /// `(φ_{s,t}(z), φ'_{s,t}(z))` via the variational equation
    /// `ψ' = G'(w,t)ψ`, `ψ(s) = 1`.
    pub fn evolve_with_derivative(&self, s: f64, t: f64, z: Complex64) -> Result<(Complex64, Complex64)> {
        Ok(self.evolve_path_with_derivative(s, &[t], z)?[0])
    }

    pub fn evolve_path_with_derivative(
        &self,
        s: f64,
        times: &[f64],
        z: Complex64,
    ) -> Result<Vec<(Complex64, Complex64)>> {
        Self::validate_start(z)?;
        if let Some(&last) = times.last() {
            self.check_interval(s, last)?;
        }
        let field = &self.field;
        let (rtol, atol) = (self.config.rtol, self.config.atol);
        let limit = 1.0 - self.config.containment_margin;
        let mut solver = Dopri5::new(
            move |t, y: &[f64; 4]| {
                let w = Complex64::new(y[0], y[1]);
                let psi = Complex64::new(y[2], y[3]);
                let g = field.eval(w, t);
                let dp = field.derivative(w, t) * psi;
                [g.re, g.im, dp.re, dp.im]
            },
            s,
            [z.re, z.im, 1.0, 0.0],
            self.config.control(),
        )
        .with_scale(move |a, b| {
            let m = a[0].hypot(a[1]).max(b[0].hypot(b[1]));
            let p = a[2].hypot(a[3]).max(b[2].hypot(b[3]));
            let sc = (atol + rtol * m) * (1.0 - m).max(1e-300);
            let sp = atol + rtol * p;
            [sc, sc, sp, sp]
        })
        .with_admissible(move |y| {
            let m = y[0].hypot(y[1]);
            if m < limit {
                Ok(())
            } else {
                Err(Refusal { modulus: m })
            }
        });
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let y = solver.advance_to(t)?;
            out.push((Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3])));
        }
        Ok(out)
    }

    /// Real-arithmetic integration of `φ_{s,t}(x)` for fields real on `(−1,1)`.
    pub fn evolve_real_slice(&self, s: f64, t: f64, x: f64) -> Result<f64> {
        Ok(self.evolve_real_path(s, &[t], x)?[0])
    }

    pub fn evolve_real_path(&self, s: f64, times: &[f64], x: f64) -> Result<Vec<f64>> {
        self.require_real()?;
        if !(x > -1.0 && x < 1.0) {
            return Err(Error::NotInDisc(Complex64::new(x, 0.0)));
        }
        if let Some(&last) = times.last() {
            self.check_interval(s, last)?;
        }
        let field = &self.field;
        let (rtol, atol) = (self.config.rtol, self.config.atol);
        let limit = 1.0 - self.config.containment_margin;
        let mut solver = Dopri5::new(
            move |t, y: &[f64; 1]| [field.eval(Complex64::new(y[0], 0.0), t).re],
            s,
            [x],
            self.config.control(),
        )
        .with_scale(move |a, b| {
            let m = a[0].abs().max(b[0].abs());
            [(atol + rtol * m) * (1.0 - m).max(1e-300)]
        })
        .with_admissible(move |y| {
            if y[0].abs() < limit {
                Ok(())
            } else {
                Err(Refusal { modulus: y[0].abs() })
            }
        });
        times.iter().map(|&t| Ok(solver.advance_to(t)?[0])).collect()
    }

    /// Integrates the gap `u = 1 − φ_{s,t}(1 − u₀)` directly, which keeps
    /// relative accuracy for starting gaps far below machine epsilon of `x`.
    pub fn evolve_real_gap(&self, s: f64, t: f64, u0: f64) -> Result<f64> {
        Ok(self.evolve_gap_path(s, &[t], u0)?[0])
    }

    pub fn evolve_gap_path(&self, s: f64, times: &[f64], u0: f64) -> Result<Vec<f64>> {
        self.require_real()?;
        if !(u0 > 0.0 && u0 < 2.0) {
            return Err(Error::Domain(format!("gap {u0} outside (0, 2)")));
        }
        if let Some(&last) = times.last() {
            self.check_interval(s, last)?;
        }
        let field = &self.field;
        let rtol = self.config.rtol;
        let mut solver = Dopri5::new(
            move |t, y: &[f64; 1]| [field.gap_velocity(y[0], t)],
            s,
            [u0],
            self.config.control(),
        )
        .with_scale(move |a, b| [rtol * a[0].abs().max(b[0].abs()).max(1e-300)])
        .with_admissible(|y| {
            if y[0] > 0.0 && y[0] < 2.0 {
                Ok(())
            } else {
                Err(Refusal { modulus: (1.0 - y[0]).abs() })
            }
        });
        times.iter().map(|&t| Ok(solver.advance_to(t)?[0])).collect()
    }

    fn require_real(&self) -> Result<()> {
        if self.field.has_real_coefficients() {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "field {} is not declared real on the real axis",
                self.field.id()
            )))
        }
    }

    fn map_points<T: Send>(
        &self,
        points: &[Complex64],
        parallel: bool,
        f: impl Fn(Complex64) -> Result<T> + Sync + Send,
    ) -> Result<Vec<T>> {
        if parallel {
            points.par_iter().map(|&z| f(z)).collect()
        } else {
            points.iter().map(|&z| f(z)).collect()
        }
    }

    /// `max |φ_{s,t}(z) − φ_{u,t}(φ_{s,u}(z))|` over the grid, with fresh
    /// integrations for every leg.
    pub fn check_ef2(&self, s: f64, u: f64, t: f64, grid: &[Complex64]) -> Result<f64> {
        self.check_ef2_with(s, u, t, grid, false)
    }

    pub fn check_ef2_with(&self, s: f64, u: f64, t: f64, grid: &[Complex64], parallel: bool) -> Result<f64> {
        if !(s <= u && u <= t) {
            return Err(Error::Precondition(format!("need s <= u <= t, got ({s}, {u}, {t})")));
        }
        let res = self.map_points(grid, parallel, |z| {
            let direct = self.evolve_fresh(s, t, z)?;
            let mid = self.evolve_fresh(s, u, z)?;
            let spliced = self.evolve_fresh(u, t, mid)?;
            Ok((direct - spliced).norm())
        })?;
        Ok(res.into_iter().fold(0.0, f64::max))
    }

    /// Increments of `t ↦ φ_{s,t}(z)` between consecutive grid times.
    pub fn check_ef3(&self, z: Complex64, times: &[f64], d: f64) -> Result<Ef3Report> {
        if times.len() < 2 {
            return Err(Error::Precondition("need at least two times".into()));
        }
        let s = times[0];
        let path = self.evolve_path(s, times, z)?;
        let mut increments = Vec::with_capacity(times.len() - 1);
        let mut rates = Vec::with_capacity(times.len() - 1);
        let mut speed_bounds = Vec::with_capacity(times.len() - 1);
        for i in 0..times.len() - 1 {
            let dt = times[i + 1] - times[i];
            let inc = (path[i + 1] - path[i]).norm();
            increments.push(inc);
            rates.push(if dt > 0.0 { inc / dt } else { 0.0 });
            // sup of |G| on the chord, sampled
            let mut sup: f64 = 0.0;
            for j in 0..=8 {
                let a = j as f64 / 8.0;
                let w = path[i] * (1.0 - a) + path[i + 1] * a;
                let tm = times[i] + a * dt;
                sup = sup.max(self.field.eval(w, tm).norm());
            }
            speed_bounds.push(sup);
        }
        let majorant_norm = if d.is_infinite() {
            rates.iter().cloned().fold(0.0, f64::max)
        } else {
            let mut acc = 0.0;
            for i in 0..rates.len() {
                acc += rates[i].powf(d) * (times[i + 1] - times[i]);
            }
            acc.powf(1.0 / d)
        };
        let finite = increments.iter().all(|v| v.is_finite());
        Ok(Ef3Report {
            z: [z.re, z.im],
            d,
            increments,
            rates,
            speed_bounds,
            majorant_norm,
            falsified: !finite || !majorant_norm.is_finite(),
        })
    }

    /// Integrates the contact-point motion `θ' = Re(−i σ̄ G(σ,t))` on the
    /// circle and records the velocity. Fails with a tangency error when
    /// the normal component exceeds `1e−8`.
    pub fn boundary_trajectory(&self, sigma0: BoundaryPoint, times: &[f64]) -> Result<BoundaryTrajectory> {
        let Some(&s) = times.first() else {
            return Err(Error::Precondition("empty time grid".into()));
        };
        self.check_interval(s, *times.last().unwrap())?;
        let field = &self.field;
        let normal = std::cell::Cell::new((0.0f64, s));
        let velocity = |theta: f64, t: f64| {
            let sig = Complex64::from_polar(1.0, theta);
            -Complex64::i() * sig.conj() * field.eval(sig, t)
        };
        let mut solver = Dopri5::new(
            |t, y: &[f64; 1]| {
                let v = velocity(y[0], t);
                if v.im.abs() > normal.get().0 {
                    normal.set((v.im.abs(), t));
                }
                [v.re]
            },
            s,
            [sigma0.angle()],
            self.config.control(),
        );
        let mut angles = Vec::with_capacity(times.len());
        let mut velocities = Vec::with_capacity(times.len());
        for &t in times {
            let theta = solver.advance_to(t)?[0];
            let v = velocity(theta, t);
            if v.im.abs() > normal.get().0 {
                normal.set((v.im.abs(), t));
            }
            angles.push(theta);
            velocities.push(v.re);
        }
        let (res, t_bad) = normal.get();
        if res > 1e-8 {
            return Err(Error::Tangency { t: t_bad, residual: res });
        }
        Ok(BoundaryTrajectory {
            sigma0,
            times: times.to_vec(),
            angles,
            velocities,
            max_normal_velocity: res,
        })
    }

    /// Solves `φ_{s,t}(z) = w` by Newton iteration seeded at `w`.
    pub fn invert(&self, s: f64, t: f64, w: Complex64) -> Result<Complex64> {
        Self::validate_start(w)?;
        let mut z = w;
        for _ in 0..50 {
            let (fz, dz) = self.evolve_with_derivative(s, t, z)?;
            let r = fz - w;
            if r.norm() < 1e-12 {
                return Ok(z);
            }
            let mut step = r / dz;
            let mut next = z - step;
            while next.norm() >= 1.0 {
                step *= 0.5;
                next = z - step;
            }
            z = next;
        }
        let r = (self.evolve_fresh(s, t, z)? - w).norm();
        if r < 1e-10 {
            Ok(z)
        } else {
            Err(Error::NoConvergence(format!(
                "Newton inversion of φ_{{{s},{t}}} at {w}: residual {r:e}"
            )))
        }
    }

    /// Largest `|φ'(z)|(1−|z|²) / (1−|φ(z)|²)` over the grid.
    pub fn schwarz_pick_ratio(&self, s: f64, t: f64, grid: &[Complex64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &z in grid {
            let (w, d) = self.evolve_with_derivative(s, t, z)?;
            worst = worst.max(d.norm() * (1.0 - z.norm_sqr()) / (1.0 - w.norm_sqr()));
        }
        Ok(worst)
    }

    /// Minimum pairwise distance between images of the grid.
    pub fn min_image_separation(&self, s: f64, t: f64, grid: &[Complex64]) -> Result<f64> {
        let images: Vec<Complex64> = grid
            .iter()
            .map(|&z| self.evolve_fresh(s, t, z))
            .collect::<Result<_>>()?;
        let mut best = f64::INFINITY;
        for i in 0..images.len() {
            for j in i + 1..images.len() {
                best = best.min((images[i] - images[j]).norm());
            }
        }
        Ok(best)
    }

    /// Flows every grid point for `dt` from each start time; any exit from
    /// the disc is reported as an error.
    pub fn generator_containment(&self, starts: &[f64], dt: f64, grid: &[Complex64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &s in starts {
            for &z in grid {
                let w = self.evolve_fresh(s, s + dt, z)?;
                worst = worst.max(w.norm());
            }
        }
        Ok(worst)
    }

    /// True if `x ↦ φ_{s,t}(x)` is strictly increasing on the sorted inputs.
    pub fn real_slice_monotone(&self, s: f64, t: f64, xs: &[f64]) -> Result<bool> {
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| self.evolve_real_slice(s, t, x))
            .collect::<Result<_>>()?;
        Ok(ys.windows(2).all(|w| w[0] < w[1]))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Ef3Report {
    pub z: [f64; 2],
    pub d: f64,
    pub increments: Vec<f64>,
    pub rates: Vec<f64>,
    /// Sampled `sup |G|` on the chord between consecutive positions.
    pub speed_bounds: Vec<f64>,
    pub majorant_norm: f64,
    pub falsified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryTrajectory {
    pub sigma0: BoundaryPoint,
    pub times: Vec<f64>,
    pub angles: Vec<f64>,
    pub velocities: Vec<f64>,
    pub max_normal_velocity: f64,
}

impl BoundaryTrajectory {
    pub fn points(&self) -> Vec<Complex64> {
        self.angles.iter().map(|&a| Complex64::from_polar(1.0, a)).collect()
    }

    pub fn total_variation(&self) -> f64 {
        self.angles.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disc::{random_grid, sweep_grid_50, MoebiusAutomorphism, ONE};
    use crate::herglotz::{example64_field, gallery_field, hyperbolic_field, rotation_field};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cayley_flow(lambda: f64, t: f64, z: Complex64) -> Complex64 {
        let w = (ONE + z) / (ONE - z) * (lambda * t).exp();
        (w - ONE) / (w + ONE)
    }

    #[test]
    fn identity_at_equal_times() {
        let fam = EvolutionFamily::with_defaults(hyperbolic_field(1.0));
        assert_eq!(fam.evolve(0.3, 0.3, c(0.2, 0.1)).unwrap(), c(0.2, 0.1));
    }

    #[test]
    fn linear_flow() {
        let fam = EvolutionFamily::with_defaults(gallery_field("brnp:0,0").unwrap());
        assert_eq!(fam.evolve(0.0, 1.0, c(0.5, 0.0)).unwrap(), c(0.5, 0.0));
        let minus_z = HerglotzField::new("-z", |z, _| -z);
        let fam = EvolutionFamily::with_defaults(minus_z);
        let w = fam.evolve(0.0, 1.0, c(0.5, 0.0)).unwrap();
        assert!((w.re - 0.5 * (-1f64).exp()).abs() < 1e-11);
        assert!((w.re - 0.18394).abs() < 1e-5);
    }

    #[test]
    fn hyperbolic_matches_cayley_form() {
        let fam = EvolutionFamily::with_defaults(hyperbolic_field(1.0));
        let w = fam.evolve(0.0, 1.0, c(0.0, 0.0)).unwrap();
        assert!((w.re - 0.5f64.tanh()).abs() < 1e-11);
        for z in random_grid(20, 0.95, 9) {
            let w = fam.evolve(0.0, 2.0, z).unwrap();
            assert!((w - cayley_flow(1.0, 2.0, z)).norm() < 1e-9);
        }
    }

    #[test]
    fn cached_queries_agree_with_fresh() {
        let fam = EvolutionFamily::with_defaults(gallery_field("g64:1").unwrap());
        let z = c(0.3, 0.4);
        let a = fam.evolve(0.0, 0.2, z).unwrap();
        let b = fam.evolve(0.0, 0.5, z).unwrap();
        assert_eq!(fam.cached_trajectories(), 1);
        let fresh = fam.evolve_fresh(0.0, 0.5, z).unwrap();
        assert!((b - fresh).norm() < 1e-10);
        assert_eq!(fam.evolve(0.0, 0.2, z).unwrap(), a);
    }

    #[test]
    fn derivative_matches_closed_form() {
        let fam = EvolutionFamily::with_defaults(hyperbolic_field(1.0));
        let z = c(0.3, -0.2);
        let (_, d) = fam.evolve_with_derivative(0.0, 1.0, z).unwrap();
        let h = 1e-6;
        let fd = (cayley_flow(1.0, 1.0, z + h) - cayley_flow(1.0, 1.0, z - h)) / (2.0 * h);
        assert!((d - fd).norm() < 1e-8);
    }

    #[test]
    fn real_slice_examples() {
        let minus_x = HerglotzField::new("-z", |z, _| -z).real_coefficients(true);
        let fam = EvolutionFamily::with_defaults(minus_x);
        let x = fam.evolve_real_slice(0.2, 0.9, 0.6).unwrap();
        assert!((x - 0.6 * (-0.7f64).exp()).abs() < 1e-10);

        let g = example64_field(1.0).unwrap();
        let fam = EvolutionFamily::with_defaults(g.to_field());
        for k in 1..6 {
            let t = 0.05 * k as f64;
            let x = fam.evolve_real_slice(0.0, t, 0.9).unwrap();
            assert!(x < (-t).exp());
        }
        assert!(fam.real_slice_monotone(0.0, 0.25, &[0.1, 0.5, 0.9, 0.99, 0.999]).unwrap());
        let traj = fam.evolve_real_path(0.0, &[0.05, 0.1, 0.15, 0.2], 0.99).unwrap();
        assert!(traj.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn gap_form_agrees_with_real_slice() {
        let fam = EvolutionFamily::with_defaults(gallery_field("g64:1").unwrap());
        for x in [0.5, 0.9, 0.999] {
            let a = fam.evolve_real_slice(0.0, 0.3, x).unwrap();
            let u = fam.evolve_real_gap(0.0, 0.3, 1.0 - x).unwrap();
            assert!((a - (1.0 - u)).abs() < 1e-10, "{a} vs {}", 1.0 - u);
        }
        let fam = EvolutionFamily::with_defaults(hyperbolic_field(1.0));
        let u = fam.evolve_real_gap(0.0, 1.0, 1e-30).unwrap();
        assert!((u / 1e-30 - (-1f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn real_slice_requires_real_field() {
        let fam = EvolutionFamily::with_defaults(rotation_field(1.0));
        assert!(fam.evolve_real_slice(0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn ef2_examples() {
        let grid = sweep_grid_50();
        let fam = EvolutionFamily::with_defaults(hyperbolic_field(1.0));
        assert!(fam.check_ef2(0.0, 0.5, 1.0, &grid).unwrap() < 1e-8);
        assert!(fam.check_ef2(0.0, 0.0, 1.0, &grid).unwrap() < 1e-12);
        let fam = EvolutionFamily::with_defaults(rotation_field(1.0));
        assert!(fam.check_ef2_with(0.0, 0.5, 1.0, &grid, true).unwrap() < 1e-10);
        assert!(fam.check_ef2(0.5, 0.2, 1.0, &grid).is_err());
    }

    #[test]
    fn ef3_increments_bounded_by_speed() {
        let fam = EvolutionFamily::with_defaults(HerglotzField::new("-z", |z, _| -z));
        let times: Vec<f64> = (0..=10).map(|k| 0.1 * k as f64).collect();
        let r = fam.check_ef3(c(0.6, 0.2), &times, f64::INFINITY).unwrap();
        let z0 = c(0.6, 0.2).norm();
        assert!(r.increments.iter().all(|&v| v <= z0 * 0.1 + 1e-12));
        assert!(!r.falsified);

        let fam = EvolutionFamily::with_defaults(gallery_field("g65:3").unwrap());
        let times: Vec<f64> = (0..=10).map(|k| 0.01 + 0.015 * k as f64).collect();
        let r = fam.check_ef3(c(0.5, 0.3), &times, f64::INFINITY).unwrap();
        assert!(!r.falsified);
        assert!(r.rates.iter().zip(&r.speed_bounds).all(|(a, b)| *a <= b * 1.001));
    }

    #[test]
    fn boundary_trajectory_examples() {
        let times: Vec<f64> = (0..=10).map(|k| 0.1 * k as f64).collect();
        let fam = EvolutionFamily::with_defaults(hyperbolic_field(1.0));
        let tr = fam.boundary_trajectory(BoundaryPoint::one(), &times).unwrap();
        assert!(tr.angles.iter().all(|a| a.abs() < 1e-15));

        let fam = EvolutionFamily::with_defaults(rotation_field(1.0));
        let tr = fam.boundary_trajectory(BoundaryPoint::from_angle(0.5), &times).unwrap();
        for (t, a) in times.iter().zip(&tr.angles) {
            assert!((a - 0.5 - t).abs() < 1e-10);
        }
        assert!(tr.points().iter().all(|p| (p.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn boundary_trajectory_transported_by_rotation() {
        let times: Vec<f64> = (0..=10).map(|k| 0.1 * k as f64).collect();
        let m = MoebiusAutomorphism::rotation_by(PI / 4.0);
        let fam = EvolutionFamily::with_defaults(hyperbolic_field(1.0).pushforward(&m));
        let theta0 = 1.0;
        let tr = fam.boundary_trajectory(BoundaryPoint::from_angle(theta0 + PI / 4.0), &times).unwrap();
        for (t, p) in times.iter().zip(tr.points()) {
            let expected = m.apply(cayley_flow(1.0, *t, Complex64::from_polar(1.0, theta0)));
            assert!((p - expected).norm() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn tangency_violation_detected() {
        let fam = EvolutionFamily::with_defaults(HerglotzField::new("-z", |z, _| -z));
        assert!(matches!(
            fam.boundary_trajectory(BoundaryPoint::one(), &[0.0, 0.5]),
            Err(Error::Tangency { .. })
        ));
    }

    #[test]
    fn newton_inverse_round_trip() {
        let fam = EvolutionFamily::with_defaults(gallery_field("g64:1").unwrap());
        for z in random_grid(10, 0.9, 4) {
            let w = fam.evolve(0.1, 0.4, z).unwrap();
            let back = fam.invert(0.1, 0.4, w).unwrap();
            assert!((back - z).norm() < 1e-9);
        }
    }

    #[test]
    fn schwarz_pick_and_univalence() {
        let grid = random_grid(100, 0.95, 17);
        for id in ["hyperbolic:1", "g64:1", "brnp-sin:0"] {
            let fam = EvolutionFamily::with_defaults(gallery_field(id).unwrap());
            assert!(fam.schwarz_pick_ratio(0.0, 0.5, &grid).unwrap() <= 1.0 + 1e-6, "{id}");
            assert!(fam.min_image_separation(0.0, 0.5, &grid).unwrap() > 0.0);
        }
    }

    #[test]
    fn generator_flow_containment() {
        let grid = crate::disc::disc_grid(5, 12, 0.99);
        for id in ["rot", "hyperbolic:2", "g64:1", "g65:3", "brnp:1,-2", "brnp-sin:0"] {
            let f = gallery_field(id).unwrap();
            let starts = f.validity().sample_times(3);
            let dt = (f.validity().end - starts[2]).min(0.1) * 0.99;
            let fam = EvolutionFamily::with_defaults(f);
            assert!(fam.generator_containment(&starts, dt, &grid).unwrap() < 1.0, "{id}");
        }
    }

    #[test]
    fn domain_errors() {
        let fam = EvolutionFamily::with_defaults(gallery_field("g65:3").unwrap());
        assert!(matches!(fam.evolve(0.0, 0.2, c(0.1, 0.0)), Err(Error::Domain(_))));
        assert!(matches!(fam.evolve(0.1, 0.05, c(0.1, 0.0)), Err(Error::Domain(_))));
        assert!(matches!(fam.evolve(0.0, 0.1, c(1.0, 0.0)), Err(Error::NotInDisc(_))));
        assert!(IntegratorConfig { h_min: 1.0, ..Default::default() }.validate().is_err());
        assert!(IntegratorConfig { rtol: 1e-30, ..Default::default() }.validate().is_err());
    }
}
