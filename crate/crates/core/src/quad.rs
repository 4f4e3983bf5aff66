//! Adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn kronrod<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x)? + f(c + x)?;
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Ok((k * h, ((k - g) * h).abs()))
}

/// `∫_a^b f` to within `max(abs_tol, rel_tol·|I|)`, bisecting up to
/// `max_depth` times.
pub fn integrate<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let mut evals = 0usize;
    let mut stack = vec![(a, b, 0u32)];
    let (mut total, mut err_total) = (0.0, 0.0);
    let (first, _) = kronrod(&mut f, a, b)?;
    evals += 15;
    let target = abs_tol.max(rel_tol * first.abs());
    let span = (b - a).abs();
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = kronrod(&mut f, lo, hi)?;
        evals += 15;
        let share = target * (hi - lo).abs() / span;
        if e <= share.max(1e-15 * v.abs()) || depth >= 30 {
            if depth >= 30 && e > share {
                return Err(Error::NoConvergence(format!(
                    "quadrature on [{lo}, {hi}] stuck at error {e:e}"
                )));
            }
            total += v;
            err_total += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
        if evals > 2_000_000 {
            return Err(Error::NoConvergence("quadrature evaluation budget exhausted".into()));
        }
    }
    Ok(Quadrature { value: total, error: err_total, evaluations: evals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact() {
        let q = integrate(|x| Ok(x.powi(5) - 2.0 * x), 0.0, 2.0, 1e-12, 0.0).unwrap();
        assert!((q.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn sine_integral() {
        let q = integrate(|x| Ok(x.sin()), 0.0, PI, 1e-12, 0.0).unwrap();
        assert!((q.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn peaked_integrand_adapts() {
        let q = integrate(|x| Ok(1.0 / (1e-4 + x * x)), -1.0, 1.0, 1e-9, 0.0).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((q.value - exact).abs() < 1e-7, "{} vs {exact}", q.value);
        assert!(q.evaluations > 15);
    }

    #[test]
    fn errors_propagate() {
        assert!(integrate(|_| Err(Error::NonFinite("x".into())), 0.0, 1.0, 1e-9, 0.0).is_err());
    }
}
