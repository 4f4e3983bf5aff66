//! Richardson extrapolation on geometric samples `h_k = 2^{-k}` with the
//! convergence order fitted from the data.

use num_complex::Complex64;
use serde::Serialize;

/// How a non-converged sequence misbehaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    None,
    MonotoneBlowUp,
    Oscillation,
    Stalled,
}

/// Extrapolated boundary limit with diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct AngularEstimate {
    #[serde(serialize_with = "ser_complex")]
    pub value: Complex64,
    pub error_estimate: f64,
    pub converged: bool,
    pub samples_used: usize,
    pub pattern: Divergence,
    /// Fitted exponent `p` in `f(h) ≈ L + c h^p` at the first level.
    pub order: Option<f64>,
    pub level: usize,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("Complex", 2)?;
    st.serialize_field("re", &z.re)?;
    st.serialize_field("im", &z.im)?;
    st.end()
}

impl AngularEstimate {
    pub fn re(&self) -> f64 {
        self.value.re
    }
}

const MAX_LEVELS: usize = 4;

/// Fits `q = 2^p` from the last three differences of `seq`.
fn fitted_ratio(seq: &[Complex64]) -> Option<f64> {
    let n = seq.len();
    if n < 4 {
        return None;
    }
    let d: Vec<f64> = (n - 4..n - 1).map(|i| (seq[i + 1] - seq[i]).norm()).collect();
    let scale = seq[n - 1].norm().max(1e-300);
    if d.iter().any(|&v| v <= 1e-15 * scale) {
        return None;
    }
    let r1 = d[0] / d[1];
    let r2 = d[1] / d[2];
    if !(r1 > 1.05 && r2 > 1.05) || (r1 / r2 - 1.0).abs() > 0.5 {
        return None;
    }
    let p = (r1 * r2).sqrt().log2();
    let snapped = (2.0 * p).round() / 2.0;
    let p = if snapped > 0.0 && (p - snapped).abs() < 0.02 * snapped { snapped } else { p };
    Some(p.exp2())
}

fn tail_error(seq: &[Complex64]) -> f64 {
    let n = seq.len();
    match n {
        0 => f64::INFINITY,
        1 => f64::INFINITY,
        2 => (seq[1] - seq[0]).norm(),
        _ => (seq[n - 1] - seq[n - 2]).norm().max((seq[n - 2] - seq[n - 3]).norm()),
    }
}

fn classify_divergence(samples: &[Complex64]) -> Divergence {
    let n = samples.len();
    if n < 4 {
        return Divergence::Stalled;
    }
    let mags: Vec<f64> = samples[n - 4..].iter().map(|z| z.norm()).collect();
    if mags.windows(2).all(|w| w[1] > w[0] * 1.1) {
        return Divergence::MonotoneBlowUp;
    }
    let d: Vec<Complex64> = (n - 4..n - 1).map(|i| samples[i + 1] - samples[i]).collect();
    let flips = d
        .windows(2)
        .filter(|w| (w[0].re * w[1].re + w[0].im * w[1].im) < 0.0)
        .count();
    if flips == 2 {
        Divergence::Oscillation
    } else {
        Divergence::Stalled
    }
}

/// Extrapolates `samples[k] = f(2^{-(k0+k)})` toward `h → 0`.
///
/// `tol` is relative to `max(1, |value|)`. Trailing samples dominated by
/// rounding are dropped when that lowers the error estimate.
pub fn extrapolate(samples: &[Complex64], tol: f64) -> AngularEstimate {
    let n = samples.len();
    let mut best = extrapolate_once(samples, tol);
    for drop in 1..=8usize {
        if n < drop + 8 || best.converged && best.error_estimate == 0.0 {
            break;
        }
        let e = extrapolate_once(&samples[..n - drop], tol);
        if e.error_estimate < 0.5 * best.error_estimate {
            best = e;
        }
    }
    best.samples_used = n;
    if !best.converged {
        best.pattern = classify_divergence(samples);
    }
    best
}

fn extrapolate_once(samples: &[Complex64], tol: f64) -> AngularEstimate {
    let n = samples.len();
    if n == 0 {
        return AngularEstimate {
            value: Complex64::new(f64::NAN, f64::NAN),
            error_estimate: f64::INFINITY,
            converged: false,
            samples_used: 0,
            pattern: Divergence::Stalled,
            order: None,
            level: 0,
        };
    }
    let mut seq = samples.to_vec();
    let mut best = (seq[n - 1], tail_error(&seq), 0usize);
    let mut order = None;
    for level in 1..=MAX_LEVELS {
        let Some(q) = fitted_ratio(&seq) else { break };
        if level == 1 {
            order = Some(q.log2());
        }
        seq = seq
            .windows(2)
            .map(|w| (q * w[1] - w[0]) / (q - 1.0))
            .collect();
        let err = tail_error(&seq);
        if seq.len() >= 3 && err < best.1 {
            best = (seq[seq.len() - 1], err, level);
        }
        if seq.len() < 4 {
            break;
        }
    }
    let (value, err, level) = best;
    let converged = value.is_finite() && err <= tol * value.norm().max(1.0);
    AngularEstimate {
        value,
        error_estimate: err,
        converged,
        samples_used: n,
        pattern: if converged { Divergence::None } else { classify_divergence(samples) },
        order,
        level,
    }
}

pub fn extrapolate_real(samples: &[f64], tol: f64) -> AngularEstimate {
    let c: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    extrapolate(&c, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(f: impl Fn(f64) -> f64, k0: i32, k1: i32) -> Vec<f64> {
        (k0..=k1).map(|k| f(0.5f64.powi(k))).collect()
    }

    #[test]
    fn constant_sequence_converges_immediately() {
        let e = extrapolate_real(&[2.0; 8], 1e-8);
        assert!(e.converged);
        assert_eq!(e.value.re, 2.0);
        assert_eq!(e.error_estimate, 0.0);
    }

    #[test]
    fn linear_and_quadratic_error_terms() {
        let e = extrapolate_real(&seq(|h| 1.0 + 3.0 * h + 5.0 * h * h, 4, 20), 1e-8);
        assert!(e.converged);
        assert!((e.value.re - 1.0).abs() < 1e-12, "{e:?}");
        assert!((e.order.unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn fractional_order_detected() {
        let e = extrapolate_real(&seq(|h| 0.3 + h.sqrt() + 0.2 * h, 4, 40), 1e-8);
        assert!((e.order.unwrap() - 0.5).abs() < 0.05);
        assert!((e.value.re - 0.3).abs() < 1e-8, "{e:?}");
    }

    #[test]
    fn blow_up_flagged() {
        let e = extrapolate_real(&seq(|h| 1.0 / h, 4, 20), 1e-8);
        assert!(!e.converged);
        assert_eq!(e.pattern, Divergence::MonotoneBlowUp);
    }

    #[test]
    fn oscillation_flagged() {
        let s: Vec<f64> = (0..12).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let e = extrapolate_real(&s, 1e-8);
        assert!(!e.converged);
        assert_eq!(e.pattern, Divergence::Oscillation);
    }

    #[test]
    fn complex_sequence() {
        let s: Vec<Complex64> = (4..=24)
            .map(|k| {
                let h = 0.5f64.powi(k);
                Complex64::new(1.0, 2.0) + Complex64::new(0.5, -1.0) * h
            })
            .collect();
        let e = extrapolate(&s, 1e-8);
        assert!(e.converged);
        assert!((e.value - Complex64::new(1.0, 2.0)).norm() < 1e-12);
    }
}
