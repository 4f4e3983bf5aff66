//! Herglotz vector fields: Berkson–Porta and pinned representations, the
//! `G_{λ,r}` example family, gallery lookup and sampled validity checks.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::disc::{BoundaryPoint, MoebiusAutomorphism, StolzSchedule, ONE};
use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type PathFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;
pub type FieldFn = Arc<dyn Fn(Complex64, f64) -> Complex64 + Send + Sync>;
pub type GapFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Time interval on which a time function or field may be evaluated.
/// The end point is excluded unless infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeDomain {
    pub start: f64,
    pub end: f64,
    pub open_start: bool,
}

impl TimeDomain {
    pub const fn half_line() -> Self {
        Self {
            start: 0.0,
            end: f64::INFINITY,
            open_start: false,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        let after = if self.open_start {
            t > self.start
        } else {
            t >= self.start
        };
        after && t < self.end
    }

    pub fn contains_interval(&self, s: f64, t: f64) -> bool {
        s <= t && self.contains(s) && (self.contains(t) || t == s)
    }

    /// `n` evenly spaced times inside the domain (or `[start, start+1]` when
    /// the domain is unbounded), avoiding an open start point.
    pub fn sample_times(&self, n: usize) -> Vec<f64> {
        let end = if self.end.is_finite() {
            self.end
        } else {
            self.start + 1.0
        };
        let span = end - self.start;
        (0..n)
            .map(|i| {
                let frac = if self.open_start || self.end.is_finite() {
                    (i as f64 + 0.5) / n as f64
                } else if n == 1 {
                    0.0
                } else {
                    i as f64 / (n - 1) as f64
                };
                self.start + frac * span
            })
            .collect()
    }
}

impl Default for TimeDomain {
    fn default() -> Self {
        Self::half_line()
    }
}

/// Real function of time with a declared domain.
#[derive(Clone)]
pub struct TimeFn {
    f: ScalarFn,
    domain: TimeDomain,
    constant: Option<f64>,
}

impl TimeFn {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, domain: TimeDomain) -> Self {
        Self {
            f: Arc::new(f),
            domain,
            constant: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            f: Arc::new(move |_| c),
            domain: TimeDomain::half_line(),
            constant: Some(c),
        }
    }

    pub fn sin() -> Self {
        Self::new(f64::sin, TimeDomain::half_line())
    }

    pub fn domain(&self) -> TimeDomain {
        self.domain
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    /// Unchecked evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        if !self.domain.contains(t) {
            return Err(Error::Domain(format!(
                "t = {t} outside [{}, {})",
                self.domain.start, self.domain.end
            )));
        }
        Ok((self.f)(t))
    }
}

impl fmt::Debug for TimeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constant {
            Some(c) => write!(f, "TimeFn(const {c})"),
            None => write!(f, "TimeFn({:?})", self.domain),
        }
    }
}

/// What to do when the side condition `∠lim (z−σ)p(z) = 0` fails on the
/// sampled schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideConditionPolicy {
    #[default]
    Warn,
    Reject,
}

/// A function `p(z, t)` of the Carathéodory class (nonnegative real part).
#[derive(Clone)]
pub struct CaratheodoryFunction {
    f: FieldFn,
    label: String,
    autonomous: bool,
}

impl CaratheodoryFunction {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(Complex64, f64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            label: label.into(),
            autonomous: false,
        }
    }

    pub fn autonomous(
        label: impl Into<String>,
        f: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(move |z, _| f(z)),
            label: label.into(),
            autonomous: true,
        }
    }

    pub fn constant(c: Complex64) -> Self {
        let mut p = Self::autonomous(format!("const {c}"), move |_| c);
        p.autonomous = true;
        p
    }

    pub fn zero() -> Self {
        Self::constant(Complex64::new(0.0, 0.0))
    }

    /// Cayley map `(1+z)/(1−z)`.
    pub fn cayley() -> Self {
        Self::autonomous("cayley", |z| (ONE + z) / (ONE - z))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn eval(&self, z: Complex64, t: f64) -> Complex64 {
        (self.f)(z, t)
    }

    /// 256 points: radii {0.5, 0.9, 0.99, 0.999} × 64 angles.
    pub fn validation_grid() -> Vec<Complex64> {
        let mut out = Vec::with_capacity(256);
        for r in [0.5, 0.9, 0.99, 0.999] {
            for j in 0..64 {
                out.push(Complex64::from_polar(r, TAU * (j as f64 + 0.5) / 64.0));
            }
        }
        out
    }

    /// Rejects `p` if `Re p < 0` anywhere on the validation grid at the
    /// given times.
    pub fn validate(&self, times: &[f64]) -> Result<()> {
        let grid = Self::validation_grid();
        for &t in times {
            for &z in &grid {
                let v = self.eval(z, t);
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "p = {v} at z = {z}, t = {t}"
                    )));
                }
                if v.re < -1e-12 * (1.0 + v.norm()) {
                    return Err(Error::InvariantViolation {
                        what: format!("Re p >= 0 for {} at t = {t}", self.label),
                        witness: z,
                        value: v.re,
                    });
                }
            }
        }
        Ok(())
    }

    /// Samples `|(z−σ)p(z,t)|` along the radial schedule; true if the tail
    /// tends to zero.
    pub fn side_condition_holds(&self, sigma: BoundaryPoint, t: f64) -> bool {
        let s = sigma.value();
        let values: Vec<f64> = StolzSchedule::radial(sigma)
            .points()
            .into_iter()
            .map(|z| ((z - s) * self.eval(z, t)).norm())
            .collect();
        let first = values[0].max(1.0);
        let last = *values.last().unwrap();
        last.is_finite() && last <= 1e-5 * first
    }
}

impl fmt::Debug for CaratheodoryFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CaratheodoryFunction({})", self.label)
    }
}

/// Boundary regular null point with its dilation `λ(t)`.
#[derive(Clone, Debug)]
pub struct NullPoint {
    pub sigma: BoundaryPoint,
    pub dilation: TimeFn,
}

/// Time-dependent holomorphic vector field on the disc with declared metadata.
#[derive(Clone)]
pub struct HerglotzField {
    id: String,
    eval: FieldFn,
    derivative: Option<FieldFn>,
    gap: Option<GapFn>,
    order: f64,
    nullpoints: Vec<NullPoint>,
    dw_point: Option<PathFn>,
    validity: TimeDomain,
    autonomous: bool,
    real_coefficients: bool,
    warnings: Vec<String>,
}

impl fmt::Debug for HerglotzField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HerglotzField")
            .field("id", &self.id)
            .field("order", &self.order)
            .field("nullpoints", &self.nullpoints)
            .field("validity", &self.validity)
            .field("autonomous", &self.autonomous)
            .field("warnings", &self.warnings)
            .finish()
    }
}

impl HerglotzField {
    pub fn new(
        id: impl Into<String>,
        eval: impl Fn(Complex64, f64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.into(),
            eval: Arc::new(eval),
            derivative: None,
            gap: None,
            order: f64::INFINITY,
            nullpoints: Vec::new(),
            dw_point: None,
            validity: TimeDomain::half_line(),
            autonomous: false,
            real_coefficients: false,
            warnings: Vec::new(),
        }
    }

    pub fn with_derivative(
        mut self,
        d: impl Fn(Complex64, f64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }

    /// Velocity of the gap `u = 1 − x` for real-slice motion toward `1`.
    pub fn with_gap_velocity(mut self, g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.gap = Some(Arc::new(g));
        self
    }

    pub fn with_order(mut self, d: f64) -> Self {
        self.order = d;
        self
    }

    pub fn with_nullpoint(mut self, sigma: BoundaryPoint, dilation: TimeFn) -> Self {
        self.nullpoints.push(NullPoint { sigma, dilation });
        self
    }

    pub fn with_dw_point(mut self, tau: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> Self {
        self.dw_point = Some(Arc::new(tau));
        self
    }

    pub fn with_validity(mut self, domain: TimeDomain) -> Self {
        self.validity = domain;
        self
    }

    pub fn autonomous(mut self, yes: bool) -> Self {
        self.autonomous = yes;
        self
    }

    pub fn real_coefficients(mut self, yes: bool) -> Self {
        self.real_coefficients = yes;
        self
    }

    pub fn with_warning(mut self, w: impl Into<String>) -> Self {
        self.warnings.push(w.into());
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn eval(&self, z: Complex64, t: f64) -> Complex64 {
        (self.eval)(z, t)
    }

    /// `∂G/∂z`, analytic when the constructor supplied it, otherwise by a
    /// trapezoidal Cauchy integral on a small circle around `z`.
    pub fn derivative(&self, z: Complex64, t: f64) -> Complex64 {
        match &self.derivative {
            Some(d) => d(z, t),
            None => {
                let rho = ((1.0 - z.norm()) * 0.25).clamp(1e-9, 0.05);
                contour_derivative(|w| self.eval(w, t), z, rho)
            }
        }
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    pub fn gap_velocity(&self, u: f64, t: f64) -> f64 {
        match &self.gap {
            Some(g) => g(u, t),
            None => -self.eval(Complex64::new(1.0 - u, 0.0), t).re,
        }
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn nullpoints(&self) -> &[NullPoint] {
        &self.nullpoints
    }

    pub fn nullpoint_at(&self, sigma: BoundaryPoint) -> Option<&NullPoint> {
        self.nullpoints
            .iter()
            .find(|n| (n.sigma.value() - sigma.value()).norm() < 1e-12)
    }

    pub fn dw_point(&self, t: f64) -> Option<Complex64> {
        self.dw_point.as_ref().map(|f| f(t))
    }

    pub fn validity(&self) -> TimeDomain {
        self.validity
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn has_real_coefficients(&self) -> bool {
        self.real_coefficients
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Field of the conjugated flow `m ∘ φ ∘ m⁻¹`:
    /// `H(w) = m'(m⁻¹w)·G(m⁻¹w)`. Null points move to `m(σ)` and keep
    /// their dilations.
    pub fn pushforward(&self, m: &MoebiusAutomorphism) -> Self {
        let inv = m.invert();
        let g = self.clone();
        let (m1, inv1) = (*m, inv);
        let mut out = HerglotzField::new(format!("{}@moebius", self.id), move |w, t| {
            let z = inv1.apply(w);
            m1.derivative(z) * g.eval(z, t)
        })
        .with_order(self.order)
        .with_validity(self.validity)
        .autonomous(self.autonomous);
        for n in &self.nullpoints {
            out = out.with_nullpoint(m.apply_boundary(n.sigma), n.dilation.clone());
        }
        if let Some(tau) = self.dw_point.clone() {
            let m2 = *m;
            out = out.with_dw_point(move |t| {
                let p = tau(t);
                if p.norm() >= 1.0 - 1e-15 {
                    m2.apply_boundary(BoundaryPoint::from_angle(p.arg())).value()
                } else {
                    m2.apply(p)
                }
            });
        }
        out
    }
}

/// `f'(z)` from `N = 32` equispaced samples on `|w − z| = ρ`.
pub fn contour_derivative(f: impl Fn(Complex64) -> Complex64, z: Complex64, rho: f64) -> Complex64 {
    const N: usize = 32;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..N {
        let e = Complex64::from_polar(1.0, TAU * j as f64 / N as f64);
        acc += f(z + rho * e) * e.conj();
    }
    acc / (N as f64 * rho)
}

/// `G(z,t) = (z − τ(t))(conj(τ(t))z − 1)p(z,t)`.
pub fn berkson_porta_field(
    tau: impl Fn(f64) -> Complex64 + Send + Sync + 'static,
    p: CaratheodoryFunction,
) -> Result<HerglotzField> {
    let tau: PathFn = Arc::new(tau);
    let domain = TimeDomain::half_line();
    let times = domain.sample_times(11);
    for &t in &times {
        let v = tau(t);
        if !(v.norm() <= 1.0 + 1e-15) {
            return Err(Error::Domain(format!("τ({t}) = {v} outside the closed disc")));
        }
    }
    p.validate(&times)?;
    let autonomous = p.is_autonomous();
    let (tau1, p1) = (tau.clone(), p.clone());
    let field = HerglotzField::new(format!("berkson-porta[{}]", p.label()), move |z, t| {
        let a = tau1(t);
        (z - a) * (a.conj() * z - ONE) * p1.eval(z, t)
    })
    .autonomous(autonomous);
    let tau2 = tau.clone();
    Ok(field.with_dw_point(move |t| tau2(t)))
}

/// Pinned representation with a boundary regular null point at `σ` of
/// dilation `λ(t)`:
/// `G = (z−σ)(σ̄z−1)(p − (λ/2)(σ+z)/(σ−z)) = (σ̄z−1)[(z−σ)p + (λ/2)(σ+z)]`.
pub fn brnp_pinned_field(
    sigma: BoundaryPoint,
    lambda: TimeFn,
    p: CaratheodoryFunction,
    policy: SideConditionPolicy,
) -> Result<HerglotzField> {
    let domain = lambda.domain();
    let times = domain.sample_times(11);
    p.validate(&times)?;
    let mut warnings = Vec::new();
    for &t in times.iter().take(3) {
        if !p.side_condition_holds(sigma, t) {
            let msg = format!(
                "(z-σ)p(z) does not tend to 0 at σ = {} (t = {t})",
                sigma.value()
            );
            if policy == SideConditionPolicy::Reject {
                return Err(Error::Precondition(msg));
            }
            warnings.push(msg);
            break;
        }
    }
    let s = sigma.value();
    let autonomous = p.is_autonomous() && lambda.as_constant().is_some();
    let (p1, l1) = (p.clone(), lambda.clone());
    let mut field = HerglotzField::new(format!("pinned[{}]", p.label()), move |z, t| {
        (s.conj() * z - ONE) * ((z - s) * p1.eval(z, t) + 0.5 * l1.eval(t) * (s + z))
    })
    .with_validity(domain)
    .with_nullpoint(sigma, lambda.clone())
    .autonomous(autonomous)
    .real_coefficients(sigma.angle() == 0.0);
    if p.label().starts_with("const 0") {
        let l2 = lambda.clone();
        field = field
            .with_derivative(move |z, t| l2.eval(t) * 0.5 * (s.conj() * (s + z) + s.conj() * z - ONE))
            .with_nullpoint(BoundaryPoint::from_angle(sigma.angle() + PI), {
                let l3 = lambda.clone();
                TimeFn::new(move |t| -l3.eval(t), domain)
            });
        if let Some(c) = lambda.as_constant() {
            if c != 0.0 {
                // dilation ≤ 0 marks the attracting null point
                let tau = if c < 0.0 { s } else { -s };
                field = field.with_dw_point(move |_| tau);
            }
        }
    }
    for w in warnings {
        field = field.with_warning(w);
    }
    Ok(field)
}

/// The family `G_{λ,r}(z,t) = −M(t)·z(1−z)/(1−r(t)z)` with `M = λ(1−r)`.
///
/// Parametrized internally by `M` and `ω = 1 − r` so that `ω → 0` keeps
/// full relative precision.
#[derive(Clone)]
pub struct ExampleFieldGLambdaR {
    m: TimeFn,
    omega: TimeFn,
    domain: TimeDomain,
    label: String,
    horizon: f64,
    singular_solution: Option<ScalarFn>,
}

impl fmt::Debug for ExampleFieldGLambdaR {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExampleFieldGLambdaR")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl ExampleFieldGLambdaR {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> TimeDomain {
        self.domain
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn m(&self, t: f64) -> f64 {
        self.m.eval(t)
    }

    pub fn omega(&self, t: f64) -> f64 {
        self.omega.eval(t)
    }

    pub fn r(&self, t: f64) -> f64 {
        1.0 - self.omega.eval(t)
    }

    /// `λ(t) = M/(1−r)`; infinite where `r = 1`.
    pub fn lambda(&self, t: f64) -> f64 {
        self.m.eval(t) / self.omega.eval(t)
    }

    pub fn lambda_at(&self, t: f64) -> Result<f64> {
        if !self.domain.contains(t) || self.omega.eval(t) <= 0.0 {
            return Err(Error::Domain(format!(
                "λ is not defined at t = {t} for {}",
                self.label
            )));
        }
        Ok(self.lambda(t))
    }

    /// `ξ_*(t)` for fields that record a singular real solution.
    pub fn singular_solution(&self, t: f64) -> Option<f64> {
        self.singular_solution.as_ref().map(|f| f(t))
    }

    pub fn rational_form(&self, z: Complex64, t: f64) -> Complex64 {
        let (m, w) = (self.m.eval(t), self.omega.eval(t));
        let d = (ONE - z) + w * z;
        -m * z * (ONE - z) / d
    }

    /// `(1−z)²(λ/2)(p₀(rz) − p₀(z))`, only meaningful where `r < 1`.
    ///
    /// The difference uses `p₀(a) − p₀(b) = 2(a−b)/((1−a)(1−b))` with
    /// `a − b = −ωz`; subtracting the two values directly loses about
    /// `ε/ω` relative accuracy as `r → 1`.
    pub fn product_form(&self, z: Complex64, t: f64) -> Complex64 {
        let lambda = self.lambda(t);
        let w = self.omega.eval(t);
        let a = (1.0 - w) * z;
        let diff = 2.0 * (-w * z) / ((ONE - a) * (ONE - z));
        (ONE - z) * (ONE - z) * (0.5 * lambda) * diff
    }

    pub fn derivative(&self, z: Complex64, t: f64) -> Complex64 {
        let (m, w) = (self.m.eval(t), self.omega.eval(t));
        let r = 1.0 - w;
        let d = (ONE - z) + w * z;
        -m * (ONE - 2.0 * z + r * z * z) / (d * d)
    }

    pub fn to_field(&self) -> HerglotzField {
        let (a, b, c) = (self.clone(), self.clone(), self.clone());
        let lam = self.clone();
        let ext = self.clone();
        HerglotzField::new(self.label.clone(), move |z, t| a.rational_form(z, t))
            .with_derivative(move |z, t| b.derivative(z, t))
            .with_gap_velocity(move |u, t| {
                let (m, w) = (c.m.eval(t), c.omega.eval(t));
                m * (1.0 - u) * u / (w + (1.0 - w) * u)
            })
            .with_nullpoint(
                BoundaryPoint::one(),
                TimeFn::new(move |t| lam.lambda(t), TimeDomain { open_start: true, ..self.domain }),
            )
            .with_dw_point(|_| Complex64::new(0.0, 0.0))
            .with_validity(self.domain)
            .with_order(f64::INFINITY)
            .real_coefficients(true)
            .autonomous(ext.m.as_constant().is_some() && ext.omega.as_constant().is_some())
    }
}

/// `G_{λ,r}` from arbitrary `λ ≥ 0` and `r ∈ [0,1)`.
pub fn example_field(lambda: TimeFn, r: TimeFn) -> Result<ExampleFieldGLambdaR> {
    let domain = lambda.domain();
    for t in domain.sample_times(21) {
        let (l, rv) = (lambda.eval(t), r.eval(t));
        if !(rv < 1.0) || rv < 0.0 {
            return Err(Error::Domain(format!("r({t}) = {rv} outside [0, 1)")));
        }
        if !(l >= 0.0) {
            return Err(Error::Domain(format!("λ({t}) = {l} is negative")));
        }
    }
    let (l1, r1, r2) = (lambda.clone(), r.clone(), r.clone());
    let constant = lambda.as_constant().zip(r.as_constant());
    let mut m = TimeFn::new(move |t| l1.eval(t) * (1.0 - r1.eval(t)), domain);
    let mut omega = TimeFn::new(move |t| 1.0 - r2.eval(t), domain);
    if let Some((l, rv)) = constant {
        m = TimeFn::constant(l * (1.0 - rv));
        omega = TimeFn::constant(1.0 - rv);
    }
    Ok(ExampleFieldGLambdaR {
        m,
        omega,
        domain,
        label: "example".into(),
        horizon: domain.end,
        singular_solution: None,
    })
}

/// `r(t) = 1 − (2/α − 1)(e^{αt} − 1)`, `λ = 2/(1−r)`; valid while `r > 0`.
pub fn example64_field(alpha: f64) -> Result<ExampleFieldGLambdaR> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain(format!("α = {alpha} outside (0, 2)")));
    }
    let horizon = example64_horizon(alpha);
    let domain = TimeDomain {
        start: 0.0,
        end: horizon,
        open_start: false,
    };
    let c = 2.0 / alpha - 1.0;
    Ok(ExampleFieldGLambdaR {
        m: TimeFn::constant(2.0),
        omega: TimeFn::new(move |t| c * (alpha * t).exp_m1(), domain),
        domain,
        label: format!("g64:{alpha}"),
        horizon,
        singular_solution: Some(Arc::new(move |t| (-alpha * t).exp())),
    })
}

/// Time at which `r` reaches `0` for [`example64_field`]: `ln(2/(2−α))/α`.
pub fn example64_horizon(alpha: f64) -> f64 {
    (2.0 / (2.0 - alpha)).ln() / alpha
}

/// `r(t) = 1 − βt`, `λ = 2/(βt)`; valid while `r > 1/2`.
pub fn example65_field(beta: f64) -> Result<ExampleFieldGLambdaR> {
    if !(beta > 2.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("β = {beta} must exceed 2")));
    }
    let horizon = 0.5 / beta;
    let domain = TimeDomain {
        start: 0.0,
        end: horizon,
        open_start: false,
    };
    Ok(ExampleFieldGLambdaR {
        m: TimeFn::constant(2.0),
        omega: TimeFn::new(move |t| beta * t, domain),
        domain,
        label: format!("g65:{beta}"),
        horizon,
        singular_solution: None,
    })
}

/// Sampled maximum of `|G(z,t)| / RHS` for the growth bound at a null point.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub t: f64,
    pub max_ratio: f64,
    pub witness: [f64; 2],
}

/// Checks `|G(z)| ≤ 4(√2|G(0)| + (√2+1)|λ|/2)·|σ−z|²/(1−|z|²)` at every
/// declared null point.
pub fn check_growth_bound(field: &HerglotzField, grid: &[Complex64], t: f64) -> Result<GrowthReport> {
    if field.nullpoints().is_empty() {
        return Err(Error::Precondition(format!(
            "field {} declares no boundary null point",
            field.id()
        )));
    }
    let g0 = field.eval(Complex64::new(0.0, 0.0), t).norm();
    let mut report = GrowthReport {
        t,
        max_ratio: 0.0,
        witness: [0.0, 0.0],
    };
    for np in field.nullpoints() {
        let lambda = np.dilation.eval(t).abs();
        let c = 4.0 * (SQRT_2 * g0 + (SQRT_2 + 1.0) * 0.5 * lambda);
        let s = np.sigma.value();
        for &z in grid {
            let g = field.eval(z, t).norm();
            let rhs = c * (s - z).norm_sqr() / (1.0 - z.norm_sqr());
            let ratio = if g == 0.0 { 0.0 } else { g / rhs };
            if !(ratio <= report.max_ratio) {
                report.max_ratio = ratio;
                report.witness = [z.re, z.im];
            }
        }
    }
    if !(report.max_ratio <= 1.0 + 1e-9) {
        return Err(Error::InvariantViolation {
            what: format!("growth bound for {} at t = {t}", field.id()),
            witness: Complex64::new(report.witness[0], report.witness[1]),
            value: report.max_ratio,
        });
    }
    Ok(report)
}

/// `G·χ_{λ ≤ 0}` for the first declared null point.
pub fn negative_part_field(field: &HerglotzField) -> Result<HerglotzField> {
    let np = field.nullpoints().first().cloned().ok_or_else(|| {
        Error::Precondition(format!("field {} declares no null point", field.id()))
    })?;
    let (g, lam) = (field.clone(), np.dilation.clone());
    let (g2, lam2) = (field.clone(), np.dilation.clone());
    let lam3 = np.dilation.clone();
    Ok(HerglotzField::new(format!("{}[λ<=0]", field.id()), move |z, t| {
        if lam.eval(t) <= 0.0 {
            g.eval(z, t)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
    .with_derivative(move |z, t| {
        if lam2.eval(t) <= 0.0 {
            g2.derivative(z, t)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
    .with_nullpoint(
        np.sigma,
        TimeFn::new(move |t| lam3.eval(t).min(0.0), np.dilation.domain()),
    )
    .with_validity(field.validity())
    .real_coefficients(field.has_real_coefficients()))
}

/// `G(z) = iωz`: rigid rotation.
pub fn rotation_field(omega: f64) -> HerglotzField {
    let w = Complex64::new(0.0, omega);
    HerglotzField::new(format!("rot:{omega}"), move |z, _| w * z)
        .with_derivative(move |_, _| w)
        .with_dw_point(|_| Complex64::new(0.0, 0.0))
        .autonomous(true)
}

/// `G(z) = (λ/2)(1 − z²)`, null points `1` (dilation `−λ`) and `−1` (`+λ`).
pub fn hyperbolic_field(lambda: f64) -> HerglotzField {
    let mut f = HerglotzField::new(format!("hyperbolic:{lambda}"), move |z, _| {
        0.5 * lambda * (ONE - z * z)
    })
    .with_derivative(move |z, _| -lambda * z)
    .with_gap_velocity(move |u, _| -0.5 * lambda * u * (2.0 - u))
    .with_nullpoint(BoundaryPoint::one(), TimeFn::constant(-lambda))
    .with_nullpoint(BoundaryPoint::from_angle(PI), TimeFn::constant(lambda))
    .autonomous(true)
    .real_coefficients(true);
    if lambda != 0.0 {
        let tau = Complex64::new(lambda.signum(), 0.0);
        f = f.with_dw_point(move |_| tau);
    }
    f
}

/// Pinned field with `p ≡ 0`: `(λ/2)(σ̄z − 1)(σ + z)`.
pub fn pinned_zero_field(sigma: BoundaryPoint, lambda: TimeFn) -> HerglotzField {
    brnp_pinned_field(
        sigma,
        lambda,
        CaratheodoryFunction::zero(),
        SideConditionPolicy::Warn,
    )
    .expect("p = 0 is a valid Carathéodory function")
}

#[derive(Debug, Clone, Serialize)]
pub struct GalleryEntry {
    pub id: &'static str,
    pub params: &'static str,
    pub example: &'static str,
    pub reference: &'static str,
    pub description: &'static str,
}

pub fn gallery_entries() -> Vec<GalleryEntry> {
    vec![
        GalleryEntry {
            id: "rot",
            params: "optional angular speed ω (default 1)",
            example: "rot",
            reference: "elliptic generator, rigid rotation",
            description: "G(z) = iωz",
        },
        GalleryEntry {
            id: "hyperbolic",
            params: "λ: real",
            example: "hyperbolic:1",
            reference: "hyperbolic semigroup, Cayley conjugate of w -> e^{λt}w",
            description: "G(z) = (λ/2)(1 - z^2)",
        },
        GalleryEntry {
            id: "g64",
            params: "α in (0, 2)",
            example: "g64:1",
            reference: "lost fixed point example, r(t) = 1 - (2/α - 1)(e^{αt} - 1)",
            description: "G = -2z(1-z)/(1-r(t)z), λ = 2/(1-r)",
        },
        GalleryEntry {
            id: "g65",
            params: "β > 2",
            example: "g65:3",
            reference: "non-regular boundary fixed point example, r(t) = 1 - βt",
            description: "G = -2z(1-z)/(1-r(t)z), λ = 2/(βt)",
        },
        GalleryEntry {
            id: "brnp",
            params: "σ angle (radians), λ: real",
            example: "brnp:0,1",
            reference: "pinned representation at a boundary regular null point with p = 0",
            description: "G(z) = (λ/2)(conj(σ)z - 1)(σ + z)",
        },
        GalleryEntry {
            id: "brnp-sin",
            params: "σ angle (radians)",
            example: "brnp-sin:0",
            reference: "pinned representation with dilation λ(t) = sin t and p = 0",
            description: "G(z,t) = (sin t/2)(conj(σ)z - 1)(σ + z)",
        },
    ]
}

fn parse_params(id: &str, raw: &str, n: usize) -> Result<Vec<f64>> {
    let vals: std::result::Result<Vec<f64>, _> =
        raw.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if v.len() == n && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(Error::UnknownField(format!("{id} (expected {n} numeric parameter(s))"))),
    }
}

/// Resolves a gallery identifier such as `"hyperbolic:1"` or `"g65:3"`.
pub fn gallery_field(id: &str) -> Result<HerglotzField> {
    let (name, raw) = match id.split_once(':') {
        Some((a, b)) => (a.trim(), Some(b)),
        None => (id.trim(), None),
    };
    let field = match (name, raw) {
        ("rot", None) => rotation_field(1.0),
        ("rot", Some(r)) => rotation_field(parse_params(id, r, 1)?[0]),
        ("hyperbolic", Some(r)) => hyperbolic_field(parse_params(id, r, 1)?[0]),
        ("g64", Some(r)) => example64_field(parse_params(id, r, 1)?[0])?.to_field(),
        ("g65", Some(r)) => example65_field(parse_params(id, r, 1)?[0])?.to_field(),
        ("brnp", Some(r)) => {
            let v = parse_params(id, r, 2)?;
            pinned_zero_field(BoundaryPoint::from_angle(v[0]), TimeFn::constant(v[1]))
        }
        ("brnp-sin", Some(r)) => {
            let v = parse_params(id, r, 1)?;
            pinned_zero_field(BoundaryPoint::from_angle(v[0]), TimeFn::sin())
        }
        _ => return Err(Error::UnknownField(id.to_string())),
    };
    Ok(field.with_id(id))
}
