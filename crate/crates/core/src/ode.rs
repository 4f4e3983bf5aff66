//! Dormand–Prince 5(4) with PI step control over fixed-size real states.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound for the automatically selected first step.
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-2,
            h_min: 1e-20,
            h_max: 0.1,
        }
    }
}

/// Attempted steps allowed in one call to `advance_to`.
pub const MAX_STEPS: usize = 1_000_000;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const ALPHA: f64 = 0.17;
const BETA: f64 = 0.04;

type State<const N: usize> = [f64; N];

fn comb<const N: usize>(y: &State<N>, h: f64, terms: &[(f64, &State<N>)]) -> State<N> {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn finite<const N: usize>(y: &State<N>) -> bool {
    y.iter().all(|v| v.is_finite())
}

/// Per-component error scale; receives the old and new state.
pub type ScaleFn<'a, const N: usize> = dyn Fn(&State<N>, &State<N>) -> State<N> + 'a;

/// Why a trial state was refused by the admissibility predicate.
#[derive(Debug, Clone, Copy)]
pub struct Refusal {
    pub modulus: f64,
}

/// Integrator carrying `(t, y, h)` across successive [`Dopri5::advance_to`]
/// calls so that output times do not reset the step size.
pub struct Dopri5<'a, const N: usize> {
    rhs: Box<dyn FnMut(f64, &State<N>) -> State<N> + 'a>,
    scale: Box<ScaleFn<'a, N>>,
    admissible: Box<dyn Fn(&State<N>) -> std::result::Result<(), Refusal> + 'a>,
    ctl: StepControl,
    t: f64,
    y: State<N>,
    k1: State<N>,
    h: Option<f64>,
    err_old: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl<'a, const N: usize> Dopri5<'a, N> {
    pub fn new(
        rhs: impl FnMut(f64, &State<N>) -> State<N> + 'a,
        t0: f64,
        y0: State<N>,
        ctl: StepControl,
    ) -> Self {
        let mut rhs: Box<dyn FnMut(f64, &State<N>) -> State<N> + 'a> = Box::new(rhs);
        let k1 = rhs(t0, &y0);
        let r = ctl.rtol;
        let a = ctl.atol;
        Self {
            rhs,
            scale: Box::new(move |y0: &State<N>, y1: &State<N>| {
                let mut s = [0.0; N];
                for i in 0..N {
                    s[i] = a + r * y0[i].abs().max(y1[i].abs());
                }
                s
            }),
            admissible: Box::new(|_| Ok(())),
            ctl,
            t: t0,
            y: y0,
            k1,
            h: None,
            err_old: 1e-4,
            accepted: 0,
            rejected: 0,
            evaluations: 1,
        }
    }

    pub fn with_scale(mut self, scale: impl Fn(&State<N>, &State<N>) -> State<N> + 'a) -> Self {
        self.scale = Box::new(scale);
        self
    }

    pub fn with_admissible(
        mut self,
        pred: impl Fn(&State<N>) -> std::result::Result<(), Refusal> + 'a,
    ) -> Self {
        self.admissible = Box::new(pred);
        self
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> State<N> {
        self.y
    }

    fn norm(&self, e: &State<N>, y0: &State<N>, y1: &State<N>) -> f64 {
        let sc = (self.scale)(y0, y1);
        let mut acc = 0.0;
        for i in 0..N {
            let q = e[i] / sc[i];
            acc += q * q;
        }
        (acc / N as f64).sqrt()
    }

    fn initial_step(&mut self, span: f64) -> f64 {
        let y0 = self.y;
        let f0 = self.k1;
        let d0 = self.norm(&y0, &y0, &y0);
        let d1 = self.norm(&f0, &y0, &y0);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(span).min(self.ctl.h_init);
        let y1 = comb(&y0, h0, &[(1.0, &f0)]);
        let f1 = (self.rhs)(self.t + h0, &y1);
        self.evaluations += 1;
        let mut diff = [0.0; N];
        for i in 0..N {
            diff[i] = f1[i] - f0[i];
        }
        let d2 = self.norm(&diff, &y0, &y0) / h0;
        let dm = d1.max(d2);
        let h1 = if dm <= 1e-15 || !dm.is_finite() {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dm).powf(0.2)
        };
        (100.0 * h0)
            .min(h1)
            .min(self.ctl.h_init)
            .min(self.ctl.h_max)
            .min(span)
            .max(self.ctl.h_min)
    }

    /// Advances the solution to `t_end ≥ t` and returns the state there.
    pub fn advance_to(&mut self, t_end: f64) -> Result<State<N>> {
        if t_end < self.t {
            return Err(Error::Domain(format!(
                "cannot integrate backward from {} to {t_end}",
                self.t
            )));
        }
        if t_end == self.t {
            return Ok(self.y);
        }
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(t_end - self.t),
        };
        let mut last_refusal: Option<Refusal> = None;
        let mut last_nonfinite = false;
        let mut attempts = 0usize;
        loop {
            attempts += 1;
            if attempts > MAX_STEPS {
                return Err(Error::NoConvergence(format!(
                    "{MAX_STEPS} steps without reaching t = {t_end} (stalled at {})",
                    self.t
                )));
            }
            let remaining = t_end - self.t;
            if remaining <= 0.0 {
                break;
            }
            let mut last = false;
            if h >= remaining * (1.0 - 1e-12) {
                h = remaining;
                last = true;
            }
            h = h.min(self.ctl.h_max);
            if h < self.ctl.h_min || self.t + h == self.t {
                if let Some(r) = last_refusal {
                    return Err(Error::Containment {
                        t: self.t,
                        modulus: r.modulus,
                    });
                }
                if last_nonfinite {
                    return Err(Error::NonFinite(format!(
                        "right-hand side blew up near t = {}",
                        self.t
                    )));
                }
                return Err(Error::StepUnderflow { t: self.t, h });
            }
            let (t, y, k1) = (self.t, self.y, self.k1);
            let k2 = (self.rhs)(t + C2 * h, &comb(&y, h, &[(A21, &k1)]));
            let k3 = (self.rhs)(t + C3 * h, &comb(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = (self.rhs)(
                t + C4 * h,
                &comb(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = (self.rhs)(
                t + C5 * h,
                &comb(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = (self.rhs)(
                t + h,
                &comb(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y_new = comb(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let t_new = if last { t_end } else { t + h };
            let k7 = (self.rhs)(t_new, &y_new);
            self.evaluations += 6;

            if !(finite(&k2) && finite(&k3) && finite(&k4) && finite(&k5) && finite(&k6) && finite(&k7) && finite(&y_new)) {
                last_nonfinite = true;
                self.rejected += 1;
                h *= FAC_MIN;
                continue;
            }
            if let Err(r) = (self.admissible)(&y_new) {
                last_refusal = Some(r);
                self.rejected += 1;
                h *= 0.25;
                continue;
            }
            let mut e = [0.0; N];
            for i in 0..N {
                e[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let err = self.norm(&e, &y, &y_new);
            if !err.is_finite() {
                last_nonfinite = true;
                self.rejected += 1;
                h *= FAC_MIN;
                continue;
            }
            if err <= 1.0 {
                let fac = if err == 0.0 {
                    FAC_MAX
                } else {
                    (SAFE * err.powf(-ALPHA) * self.err_old.powf(BETA)).clamp(FAC_MIN, FAC_MAX)
                };
                self.err_old = err.max(1e-4);
                self.t = t_new;
                self.y = y_new;
                self.k1 = k7;
                self.accepted += 1;
                last_refusal = None;
                last_nonfinite = false;
                let h_next = (h * fac).min(self.ctl.h_max);
                if last {
                    // keep the unclamped proposal for the next leg
                    self.h = Some(h_next.max(self.h.unwrap_or(0.0).min(h_next)));
                    break;
                }
                h = h_next;
                self.h = Some(h);
            } else {
                self.rejected += 1;
                h *= (SAFE * err.powf(-0.2)).clamp(FAC_MIN, 1.0);
            }
        }
        Ok(self.y)
    }
}

/// One-shot integration from `t0` to `t1`.
pub fn integrate<const N: usize>(
    rhs: impl FnMut(f64, &State<N>) -> State<N>,
    t0: f64,
    t1: f64,
    y0: State<N>,
    ctl: StepControl,
) -> Result<State<N>> {
    Dopri5::new(rhs, t0, y0, ctl).advance_to(t1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let y = integrate(|_, y: &[f64; 1]| [-y[0]], 0.0, 1.0, [0.5], StepControl::default()).unwrap();
        assert!((y[0] - 0.5 * (-1f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_long_run() {
        let y = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            20.0,
            [1.0, 0.0],
            StepControl::default(),
        )
        .unwrap();
        assert!((y[0] - 20f64.cos()).abs() < 1e-8);
        assert!((y[1] + 20f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn nonautonomous_rhs() {
        let y = integrate(|t, _: &[f64; 1]| [t.cos()], 0.0, 2.0, [0.0], StepControl::default()).unwrap();
        assert!((y[0] - 2f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn successive_outputs_match_single_run() {
        let rhs = |t: f64, y: &[f64; 1]| [-y[0] * (1.0 + t)];
        let mut d = Dopri5::new(rhs, 0.0, [1.0], StepControl::default());
        let mut last = 0.0;
        for k in 1..=10 {
            last = d.advance_to(0.1 * k as f64).unwrap()[0];
        }
        let exact = (-(1.0f64 + 0.5)).exp();
        assert!((last - exact).abs() < 1e-10);
    }

    #[test]
    fn zero_length_interval_is_identity() {
        let y = integrate(|_, y: &[f64; 2]| [y[1], 1.0], 0.3, 0.3, [0.25, -1.0], StepControl::default()).unwrap();
        assert_eq!(y, [0.25, -1.0]);
    }

    #[test]
    fn blow_up_reports_solver_error() {
        let err = integrate(|_, y: &[f64; 1]| [y[0] * y[0]], 0.0, 2.0, [1.0], StepControl::default()).unwrap_err();
        assert!(err.is_solver(), "{err}");
    }

    #[test]
    fn refused_states_become_containment_errors() {
        let d = Dopri5::new(|_, _: &[f64; 1]| [1.0], 0.0, [0.0], StepControl::default())
            .with_admissible(|y| if y[0] < 0.5 { Ok(()) } else { Err(Refusal { modulus: y[0] }) });
        let mut d = d;
        match d.advance_to(1.0) {
            Err(Error::Containment { modulus, .. }) => assert!(modulus >= 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn backward_request_rejected() {
        let mut d = Dopri5::new(|_, y: &[f64; 1]| [y[0]], 1.0, [1.0], StepControl::default());
        assert!(d.advance_to(0.5).is_err());
    }
}
