//! Coordinate-wise bounded maps `φ` and their Gaussian-smoothed means
//! `μ(x) = E φ(√a·Z + x)`.
//!
//! Smoothing against the Gaussian kernel makes `μ` Lipschitz with constant
//! `√(2/(π·a))` even when `φ` jumps. Integrals are split at the declared
//! breakpoints of `φ` and evaluated with adaptive Gauss–Kronrod panels in the
//! standardized variable `z`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::quadrature::integrate_piecewise;

/// Absolute tolerance for the smoothing integrals.
pub const QUAD_TOL: f64 = 1e-12;
/// Panel budget for one smoothing integral.
pub const QUAD_MAX_PANELS: usize = 4000;
/// Slack allowed on top of the theoretical Lipschitz bound.
pub const LIPSCHITZ_SLACK: f64 = 1e-9;
/// Points in the certificate grid on `[−10√a, 10√a]`.
pub const CERTIFICATE_GRID: usize = 2001;

// Standard-normal truncation and fixed interior cuts in z.
const Z_CUTS: [f64; 9] = [-12.0, -6.0, -3.0, -1.5, 0.0, 1.5, 3.0, 6.0, 12.0];

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type SmoothFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Closed forms of the smoothed mean and its derivative as functions of `(a, x)`.
#[derive(Clone)]
pub struct ClosedForm {
    pub mean: SmoothFn,
    pub derivative: SmoothFn,
}

/// A map `φ: ℝ → ℝ` with `‖φ‖_∞ ≤ 1`, applied coordinate-wise.
#[derive(Clone)]
pub struct BoundedMap {
    name: String,
    eval: ScalarFn,
    sup_bound: f64,
    breakpoints: Vec<f64>,
    closed_form: Option<ClosedForm>,
}

impl fmt::Debug for BoundedMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundedMap")
            .field("name", &self.name)
            .field("sup_bound", &self.sup_bound)
            .field("breakpoints", &self.breakpoints)
            .field("closed_form", &self.closed_form.is_some())
            .finish()
    }
}

impl BoundedMap {
    /// A user-defined map. `sup_bound` is the declared `‖φ‖_∞` and must be at
    /// most 1; `breakpoints` lists every discontinuity of `φ`.
    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sup_bound: f64,
        breakpoints: Vec<f64>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&sup_bound) {
            return Err(Error::Domain(format!("sup-norm bound must lie in [0, 1], got {sup_bound}")));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("breakpoints must be finite".into()));
        }
        let mut breakpoints = breakpoints;
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Ok(BoundedMap {
            name: name.into(),
            eval: Arc::new(eval),
            sup_bound,
            breakpoints,
            closed_form: None,
        })
    }

    pub fn with_closed_form(
        mut self,
        mean: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.closed_form = Some(ClosedForm {
            mean: Arc::new(mean),
            derivative: Arc::new(derivative),
        });
        self
    }

    /// `sgn`, with `sgn(0) = 0` and smoothed mean `erf(x/√(2a))`.
    pub fn sgn() -> Self {
        Self::custom("sgn", sign, 1.0, vec![0.0])
            .expect("valid built-in")
            .with_closed_form(
                |a, x| erf(x / (2.0 * a).sqrt()),
                |a, x| (2.0 / (PI * a)).sqrt() * (-x * x / (2.0 * a)).exp(),
            )
    }

    /// Clamp to `[−1, 1]`.
    pub fn clamp() -> Self {
        Self::custom("clamp", |x: f64| x.clamp(-1.0, 1.0), 1.0, Vec::new()).expect("valid built-in")
    }

    /// Hard threshold (Heaviside step) at level `t`: `1` for `x ≥ t`, else `0`.
    pub fn threshold(t: f64) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("threshold level must be finite, got {t}")));
        }
        Ok(
            Self::custom(format!("threshold:{t}"), move |x| if x >= t { 1.0 } else { 0.0 }, 1.0, vec![t])?
                .with_closed_form(
                    move |a, x| 0.5 * (1.0 + erf((x - t) / (2.0 * a).sqrt())),
                    move |a, x| (-(x - t) * (x - t) / (2.0 * a)).exp() / (2.0 * PI * a).sqrt(),
                ),
        )
    }

    /// `cos`, with smoothed mean `e^{−a/2}·cos x`.
    pub fn cos() -> Self {
        Self::custom("cos", f64::cos, 1.0, Vec::new())
            .expect("valid built-in")
            .with_closed_form(|a, x| (-a / 2.0).exp() * x.cos(), |a, x| -(-a / 2.0).exp() * x.sin())
    }

    /// The constant map `φ ≡ c`, `|c| ≤ 1`.
    pub fn constant(c: f64) -> Result<Self> {
        if c.is_nan() || c.abs() > 1.0 {
            return Err(Error::Domain(format!("constant must satisfy |c| <= 1, got {c}")));
        }
        Ok(Self::custom(format!("const:{c}"), move |_| c, c.abs(), Vec::new())?
            .with_closed_form(move |_, _| c, |_, _| 0.0))
    }

    /// Looks up a built-in map: `sgn`, `clamp`, `cos`, `threshold:<t>`, `const:<c>`.
    pub fn from_name(name: &str) -> Result<Self> {
        let unknown = || Error::UnknownMap(name.to_string());
        match name {
            "sgn" | "sign" => Ok(Self::sgn()),
            "clamp" => Ok(Self::clamp()),
            "cos" => Ok(Self::cos()),
            _ => {
                let (kind, arg) = name.split_once(':').ok_or_else(unknown)?;
                let value: f64 = arg.trim().parse().map_err(|_| unknown())?;
                match kind {
                    "threshold" => Self::threshold(value),
                    "const" => Self::constant(value),
                    _ => Err(unknown()),
                }
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn closed_form(&self) -> Option<&ClosedForm> {
        self.closed_form.as_ref()
    }

    /// Probes `|φ| ≤ B` on a dense grid over `[−50, 50]` and around every
    /// breakpoint, and checks any closed form against quadrature.
    pub fn validate(&self) -> Result<()> {
        let grid = (0..=100_000).map(|i| -50.0 + 1e-3 * i as f64);
        let near_breaks = self.breakpoints.iter().flat_map(|&b| {
            (1..=12).flat_map(move |k| {
                let h = 10f64.powi(-k);
                [b - h, b, b + h]
            })
        });
        for x in grid.chain(near_breaks) {
            let v = self.eval(x);
            if v.is_nan() || v.abs() > self.sup_bound {
                return Err(Error::BoundViolation {
                    what: format!("|{}({x})|", self.name),
                    value: v.abs(),
                    bound: self.sup_bound,
                });
            }
        }
        if let Some(form) = &self.closed_form {
            for a in [0.25, 1.0, 4.0] {
                for i in 0..=20 {
                    let x = -5.0 + 0.5 * i as f64;
                    let numeric = smoothed_mean_numeric(self, a, x)?;
                    let closed = (form.mean)(a, x);
                    if (numeric - closed).abs() > 1e-6 {
                        return Err(Error::BoundViolation {
                            what: format!("closed-form smoothed mean of {} at (a={a}, x={x})", self.name),
                            value: (numeric - closed).abs(),
                            bound: 1e-6,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Sign function with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `√(2/(π·a))`, the Lipschitz constant of every smoothed mean at variance `a`.
pub fn lipschitz_bound(a: f64) -> f64 {
    (2.0 / (PI * a)).sqrt()
}

fn check_variance(a: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("smoothing variance must be positive and finite, got {a}")));
    }
    Ok(())
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn z_cuts(map: &BoundedMap, a: f64, x: f64) -> Vec<f64> {
    let sd = a.sqrt();
    let lo = Z_CUTS[0];
    let hi = Z_CUTS[Z_CUTS.len() - 1];
    let mut cuts: Vec<f64> = Z_CUTS
        .iter()
        .copied()
        .chain(map.breakpoints.iter().map(|b| (b - x) / sd).filter(|z| *z > lo && *z < hi))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts
}

/// `E φ(√a·Z + x)` by breakpoint-split adaptive quadrature, ignoring any
/// closed form.
pub fn smoothed_mean_numeric(map: &BoundedMap, a: f64, x: f64) -> Result<f64> {
    check_variance(a)?;
    let sd = a.sqrt();
    let r = integrate_piecewise(
        |z| map.eval(x + sd * z) * std_normal_pdf(z),
        &z_cuts(map, a, x),
        QUAD_TOL,
        QUAD_MAX_PANELS,
    )?;
    Ok(r.value)
}

/// `(1/√a)·E[Z·φ(√a·Z + x)]` by quadrature, ignoring any closed form.
pub fn smoothed_mean_derivative_numeric(map: &BoundedMap, a: f64, x: f64) -> Result<f64> {
    check_variance(a)?;
    let sd = a.sqrt();
    let r = integrate_piecewise(
        |z| z * map.eval(x + sd * z) * std_normal_pdf(z),
        &z_cuts(map, a, x),
        QUAD_TOL,
        QUAD_MAX_PANELS,
    )?;
    Ok(r.value / sd)
}

/// `μ(x) = E φ(√a·Z + x)`, from the closed form when the map has one.
pub fn smoothed_mean(map: &BoundedMap, a: f64, x: f64) -> Result<f64> {
    check_variance(a)?;
    match &map.closed_form {
        Some(form) => Ok((form.mean)(a, x)),
        None => smoothed_mean_numeric(map, a, x),
    }
}

/// `μ′(x)`, guaranteed to satisfy `|μ′(x)| ≤ √(2/(πa)) + 1e−9`.
pub fn smoothed_mean_derivative(map: &BoundedMap, a: f64, x: f64) -> Result<f64> {
    check_variance(a)?;
    let d = match &map.closed_form {
        Some(form) => (form.derivative)(a, x),
        None => smoothed_mean_derivative_numeric(map, a, x)?,
    };
    let bound = lipschitz_bound(a);
    if d.is_nan() || d.abs() > bound + LIPSCHITZ_SLACK {
        return Err(Error::BoundViolation {
            what: format!("|μ′({x})| for {} at a={a}", map.name),
            value: d.abs(),
            bound,
        });
    }
    Ok(d)
}

/// A bounded map smoothed at a fixed variance `a`.
#[derive(Clone, Debug)]
pub struct SmoothedMean {
    map: BoundedMap,
    a: f64,
}

impl SmoothedMean {
    pub fn new(map: BoundedMap, a: f64) -> Result<Self> {
        check_variance(a)?;
        Ok(SmoothedMean { map, a })
    }

    pub fn map(&self) -> &BoundedMap {
        &self.map
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        smoothed_mean(&self.map, self.a, x)
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        smoothed_mean_derivative(&self.map, self.a, x)
    }

    pub fn lipschitz_bound(&self) -> f64 {
        lipschitz_bound(self.a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzCertificate {
    pub max_abs_derivative: f64,
    pub argmax: f64,
    pub bound: f64,
}

/// Max of `|μ′|` over 2001 uniform points on `[−10√a, 10√a]`, with the
/// theoretical bound `√(2/(πa))`.
pub fn lipschitz_certificate(map: &BoundedMap, a: f64) -> Result<LipschitzCertificate> {
    check_variance(a)?;
    let half_width = 10.0 * a.sqrt();
    let step = 2.0 * half_width / (CERTIFICATE_GRID - 1) as f64;
    let mut best = (0.0_f64, 0.0_f64);
    for i in 0..CERTIFICATE_GRID {
        let x = if i == (CERTIFICATE_GRID - 1) / 2 { 0.0 } else { -half_width + step * i as f64 };
        let d = smoothed_mean_derivative(map, a, x)?.abs();
        if d > best.0 {
            best = (d, x);
        }
    }
    Ok(LipschitzCertificate {
        max_abs_derivative: best.0,
        argmax: best.1,
        bound: lipschitz_bound(a),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn registry_resolves_builtins() {
        for name in ["sgn", "clamp", "cos", "threshold:0.5", "const:1", "const:-0.25"] {
            let map = BoundedMap::from_name(name).unwrap();
            map.validate().unwrap();
        }
        assert!(matches!(BoundedMap::from_name("tanh"), Err(Error::UnknownMap(_))));
        assert!(matches!(BoundedMap::from_name("threshold:x"), Err(Error::UnknownMap(_))));
        assert!(BoundedMap::from_name("const:2").is_err());
    }

    #[test]
    fn validate_catches_unbounded_map() {
        let map = BoundedMap::custom("twice", |x: f64| 2.0 * x.clamp(-1.0, 1.0), 1.0, vec![]).unwrap();
        assert!(matches!(map.validate(), Err(Error::BoundViolation { .. })));
        assert!(BoundedMap::custom("big", |x| x, 1.5, vec![]).is_err());
    }

    #[test]
    fn validate_catches_wrong_closed_form() {
        let map = BoundedMap::custom("sgn-wrong", sign, 1.0, vec![0.0])
            .unwrap()
            .with_closed_form(|a, x| erf(x / a.sqrt()), |_, _| 0.0);
        assert!(matches!(map.validate(), Err(Error::BoundViolation { .. })));
    }

    #[test]
    fn smoothed_mean_examples() {
        let sgn = BoundedMap::sgn();
        assert_eq!(smoothed_mean(&sgn, 1.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(smoothed_mean_numeric(&sgn, 1.0, 0.0).unwrap(), 0.0, epsilon = 1e-12);
        let one = BoundedMap::constant(1.0).unwrap();
        assert_abs_diff_eq!(smoothed_mean_numeric(&one, 3.0, -2.0).unwrap(), 1.0, epsilon = 1e-12);
        assert!(smoothed_mean(&sgn, 0.0, 1.0).is_err());
        assert!(smoothed_mean(&sgn, -1.0, 1.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let sgn = BoundedMap::sgn();
        assert_abs_diff_eq!(
            smoothed_mean_derivative_numeric(&sgn, 1.0, 0.0).unwrap(),
            0.797_884_560_802_865_4,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            smoothed_mean_derivative_numeric(&sgn, 4.0, 0.0).unwrap(),
            0.398_942_280_401_432_7,
            epsilon = 1e-10
        );
        let one = BoundedMap::constant(1.0).unwrap();
        assert_abs_diff_eq!(smoothed_mean_derivative_numeric(&one, 1.0, 0.7).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn certificates_for_builtins() {
        let c = lipschitz_certificate(&BoundedMap::sgn(), 1.0).unwrap();
        assert_abs_diff_eq!(c.max_abs_derivative, 0.797_884_560_802_865_4, epsilon = 1e-12);
        assert_eq!(c.argmax, 0.0);
        let c = lipschitz_certificate(&BoundedMap::constant(1.0).unwrap(), 1.0).unwrap();
        assert_eq!(c.max_abs_derivative, 0.0);
    }
}
