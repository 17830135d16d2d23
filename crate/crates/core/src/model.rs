//! Model functions of the fiber-coating equation.
//!
//! The evolution equation is
//!
//! ```text
//! d/dt (h + a/2 h^2) + d/dx [ M(h) (1 + p_x) ] = 0,   p = h_xx - Z+(h) - Z-(h)
//! ```
//!
//! where `M` is the mobility and the nonlinear pressure is split into a
//! stabilizing part `Z+` (nondecreasing) and a destabilizing part `Z-`
//! (nonincreasing). This module supplies `M`, `Z+`, `Z-` and their first
//! derivatives for the model families the solver supports.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Below this magnitude `phi` and `phi'` are evaluated from their Taylor series.
const PHI_SERIES_THRESHOLD: f64 = 0.1;

/// Taylor coefficients of `phi` about 0. For `k >= 2` they follow
/// `c_k = 3/4 * sum_{i=0}^{4} C(4,i) (-1)^(k+i) / (k+3-i)`.
const PHI_SERIES: [f64; 26] = [
    1.0,
    1.0,
    0.15,
    -0.025,
    0.007142857142857143,
    -0.0026785714285714286,
    0.0011904761904761906,
    -0.0005952380952380953,
    0.0003246753246753247,
    -0.0001893939393939394,
    0.00011655011655011655,
    -7.492507492507493e-05,
    4.995004995004995e-05,
    -3.434065934065934e-05,
    2.4240465416936004e-05,
    -1.7507002801120447e-05,
    1.2899896800825593e-05,
    -9.674922600619196e-06,
    7.371369600471768e-06,
    -5.696058327637275e-06,
    4.457784778150911e-06,
    -3.529079616036138e-06,
    2.8232636928289104e-06,
    -2.280328367284889e-06,
    1.858045336306206e-06,
    -1.5262515262515263e-06,
];

/// Which set of model functions to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelFamily {
    /// Film stabilization model: FSM mobility, `Z+ = -A_H/h^3`, `Z- = a/(eta(1+a h))`.
    Fsm,
    /// Same mobility as FSM without the stabilization term (`Z+ = 0`).
    Cm,
    /// `M(h) = h^n`. Pressures vanish unless FSM pressures are requested.
    PowerLaw,
    /// `M = 1` and no nonlinear pressure: the linear biharmonic reduction used
    /// to test discretizations against exact solutions. Not degenerate.
    ConstantMobility,
}

impl std::str::FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fsm" => Ok(Self::Fsm),
            "cm" => Ok(Self::Cm),
            "power_law" | "powerlaw" | "power-law" => Ok(Self::PowerLaw),
            "constant" | "constant_mobility" => Ok(Self::ConstantMobility),
            other => Err(Error::invalid(format!("unknown model family `{other}`"))),
        }
    }
}

/// Dimensionless model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    /// Aspect ratio of film thickness to fiber radius.
    pub alpha: T,
    /// Scale of the azimuthal curvature term.
    pub eta: T,
    /// Stabilization (Hamaker-like) coefficient.
    pub a_h: T,
    /// Slip coefficient.
    pub lambda: T,
    /// Exponent of the power-law mobility.
    pub mobility_order: T,
}

impl<T: Scalar> ModelParams<T> {
    /// No-slip parameters with the default power-law order 3.
    pub fn new(alpha: T, eta: T, a_h: T) -> Self {
        Self { alpha, eta, a_h, lambda: T::zero(), mobility_order: T::lit(3.0) }
    }

    pub fn with_lambda(mut self, lambda: T) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_mobility_order(mut self, n: T) -> Self {
        self.mobility_order = n;
        self
    }

    fn validate(&self, family: ModelFamily) -> Result<()> {
        let ok = |v: T| v.is_finite();
        if !(ok(self.alpha) && self.alpha >= T::zero()) {
            return Err(Error::invalid(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(ok(self.eta) && self.eta > T::zero()) {
            return Err(Error::invalid(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(ok(self.a_h) && self.a_h >= T::zero()) {
            return Err(Error::invalid(format!("a_h must be >= 0, got {}", self.a_h)));
        }
        if !(ok(self.lambda) && self.lambda >= T::zero()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if family == ModelFamily::PowerLaw && !(ok(self.mobility_order) && self.mobility_order >= T::lit(2.0)) {
            return Err(Error::invalid(format!(
                "power-law mobility order must be >= 2, got {}",
                self.mobility_order
            )));
        }
        Ok(())
    }
}

/// `Z+`, `Z-` and their derivatives at one height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureTerms<T> {
    pub z_plus: T,
    pub z_minus: T,
    pub dz_plus: T,
    pub dz_minus: T,
}

/// A model family together with its parameters. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalModel<T> {
    family: ModelFamily,
    params: ModelParams<T>,
    phi_alpha: T,
    power_law_pressures: bool,
}

impl<T: Scalar> PhysicalModel<T> {
    pub fn new(family: ModelFamily, params: ModelParams<T>) -> Result<Self> {
        params.validate(family)?;
        let phi_alpha = phi_raw(params.alpha);
        Ok(Self { family, params, phi_alpha, power_law_pressures: false })
    }

    pub fn fsm(params: ModelParams<T>) -> Result<Self> {
        Self::new(ModelFamily::Fsm, params)
    }

    pub fn cm(params: ModelParams<T>) -> Result<Self> {
        Self::new(ModelFamily::Cm, params)
    }

    /// `M(h) = h^n`; with `with_fsm_pressures` the FSM pressure terms are used,
    /// otherwise `Z+ = Z- = 0`.
    pub fn power_law(params: ModelParams<T>, with_fsm_pressures: bool) -> Result<Self> {
        let mut m = Self::new(ModelFamily::PowerLaw, params)?;
        m.power_law_pressures = with_fsm_pressures;
        Ok(m)
    }

    pub fn constant_mobility(params: ModelParams<T>) -> Result<Self> {
        Self::new(ModelFamily::ConstantMobility, params)
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn alpha(&self) -> T {
        self.params.alpha
    }

    /// Mobility `M(h)` for `h >= 0`.
    pub fn mobility(&self, h: T) -> Result<T> {
        if !(h >= T::zero()) {
            return Err(Error::Domain { what: "mobility", value: h.as_f64() });
        }
        Ok(self.mobility_raw(h))
    }

    /// `M'(h)` for `h >= 0`.
    pub fn mobility_derivative(&self, h: T) -> Result<T> {
        if !(h >= T::zero()) {
            return Err(Error::Domain { what: "mobility derivative", value: h.as_f64() });
        }
        Ok(self.mobility_with_derivative_raw(h).1)
    }

    /// Mobility without the sign check. For the FSM/CM families the closed
    /// form is analytic on `a h > -1`, which lets a non-positivity-preserving
    /// scheme keep integrating after it has produced a negative height.
    /// Outside that range the result is NaN.
    pub fn mobility_raw(&self, h: T) -> T {
        match self.family {
            ModelFamily::Fsm | ModelFamily::Cm => {
                let a = self.params.alpha;
                let three = T::lit(3.0);
                let four = T::lit(4.0);
                let two = T::lit(2.0);
                let h2 = h * h;
                let slip = self.params.lambda * h2 * (a * h + two).powi(2) / (four * self.phi_alpha);
                h2 * h * phi_raw(a * h) / (three * self.phi_alpha) + slip
            }
            ModelFamily::PowerLaw => h.powf(self.params.mobility_order),
            ModelFamily::ConstantMobility => T::one(),
        }
    }

    /// `(M(h), M'(h))` without the sign check.
    pub fn mobility_with_derivative_raw(&self, h: T) -> (T, T) {
        match self.family {
            ModelFamily::Fsm | ModelFamily::Cm => {
                let a = self.params.alpha;
                let lam = self.params.lambda;
                let (two, three, four) = (T::lit(2.0), T::lit(3.0), T::lit(4.0));
                let (ph, dph) = phi_with_derivative_raw(a * h);
                let h2 = h * h;
                let q = a * h + two;
                let m = h2 * h * ph / (three * self.phi_alpha) + lam * h2 * q * q / (four * self.phi_alpha);
                let dm = (three * h2 * ph + h2 * h * a * dph) / (three * self.phi_alpha)
                    + lam * (two * h * q * q + two * a * h2 * q) / (four * self.phi_alpha);
                (m, dm)
            }
            ModelFamily::PowerLaw => {
                let n = self.params.mobility_order;
                (h.powf(n), n * h.powf(n - T::one()))
            }
            ModelFamily::ConstantMobility => (T::one(), T::zero()),
        }
    }

    /// Whether `Z+` is identically zero for this model.
    pub fn has_z_plus(&self) -> bool {
        match self.family {
            ModelFamily::Fsm => self.params.a_h > T::zero(),
            ModelFamily::PowerLaw => self.power_law_pressures && self.params.a_h > T::zero(),
            ModelFamily::Cm | ModelFamily::ConstantMobility => false,
        }
    }

    fn has_z_minus(&self) -> bool {
        match self.family {
            ModelFamily::Fsm | ModelFamily::Cm => true,
            ModelFamily::PowerLaw => self.power_law_pressures,
            ModelFamily::ConstantMobility => false,
        }
    }

    /// `(Z+(h), Z+'(h))`. Requires `h > 0` only when the term is present.
    pub fn z_plus(&self, h: T) -> Result<(T, T)> {
        if !self.has_z_plus() {
            return Ok((T::zero(), T::zero()));
        }
        if !(h > T::zero()) {
            return Err(Error::Positivity { index: None, value: h.as_f64() });
        }
        let h3 = h * h * h;
        Ok((-self.params.a_h / h3, T::lit(3.0) * self.params.a_h / (h3 * h)))
    }

    /// `(Z-(h), Z-'(h))`. Requires `1 + a h > 0`.
    pub fn z_minus(&self, h: T) -> Result<(T, T)> {
        if !self.has_z_minus() {
            return Ok((T::zero(), T::zero()));
        }
        let a = self.params.alpha;
        let den = T::one() + a * h;
        if !(den > T::zero()) {
            return Err(Error::Domain { what: "Z-", value: h.as_f64() });
        }
        let eta = self.params.eta;
        Ok((a / (eta * den), -a * a / (eta * den * den)))
    }

    /// `Z+(b) - Z+(a)` where `d = b - a` is supplied by the caller, evaluated
    /// without cancellation. Requires `a, b > 0` when the term is present.
    pub fn z_plus_difference(&self, a: T, b: T, d: T) -> Result<T> {
        if !self.has_z_plus() {
            return Ok(T::zero());
        }
        for h in [a, b] {
            if !(h > T::zero()) {
                return Err(Error::Positivity { index: None, value: h.as_f64() });
            }
        }
        let (a3, b3) = (a * a * a, b * b * b);
        Ok(self.params.a_h * d * (a * a + a * b + b * b) / (a3 * b3))
    }

    /// `Z-(b) - Z-(a)` with `d = b - a` supplied by the caller.
    pub fn z_minus_difference(&self, a: T, b: T, d: T) -> Result<T> {
        if !self.has_z_minus() {
            return Ok(T::zero());
        }
        let al = self.params.alpha;
        let (da, db) = (T::one() + al * a, T::one() + al * b);
        if !(da > T::zero()) || !(db > T::zero()) {
            return Err(Error::Domain { what: "Z-", value: if da > T::zero() { b } else { a }.as_f64() });
        }
        Ok(-al * al * d / (self.params.eta * da * db))
    }

    /// All pressure terms at `h > 0`.
    pub fn pressure_terms(&self, h: T) -> Result<PressureTerms<T>> {
        if !(h > T::zero()) {
            return Err(Error::Domain { what: "pressure terms", value: h.as_f64() });
        }
        let (z_plus, dz_plus) = self.z_plus(h)?;
        let (z_minus, dz_minus) = self.z_minus(h)?;
        Ok(PressureTerms { z_plus, z_minus, dz_plus, dz_minus })
    }

    /// Upper bound of `Z-(h)^2` over `h >= 0`.
    pub fn z_minus_sq_bound(&self) -> T {
        if self.has_z_minus() {
            let b = self.params.alpha / self.params.eta;
            b * b
        } else {
            T::zero()
        }
    }
}

/// `phi(X) = 3/(16 X^3) [ (1+X)^4 (4 ln(1+X) - 3) + 4 (1+X)^2 - 1 ]` for `X >= 0`.
pub fn phi<T: Scalar>(x: T) -> Result<T> {
    if !(x >= T::zero()) {
        return Err(Error::Domain { what: "phi", value: x.as_f64() });
    }
    Ok(phi_raw(x))
}

/// `phi'(X)` for `X >= 0`.
pub fn phi_derivative<T: Scalar>(x: T) -> Result<T> {
    if !(x >= T::zero()) {
        return Err(Error::Domain { what: "phi derivative", value: x.as_f64() });
    }
    Ok(phi_with_derivative_raw(x).1)
}

fn phi_raw<T: Scalar>(x: T) -> T {
    if x.abs() < T::lit(PHI_SERIES_THRESHOLD) {
        phi_series(x).0
    } else {
        let y = T::one() + x;
        let y2 = y * y;
        let bracket = y2 * y2 * (T::lit(4.0) * x.ln_1p() - T::lit(3.0)) + T::lit(4.0) * y2 - T::one();
        T::lit(3.0) * bracket / (T::lit(16.0) * x * x * x)
    }
}

fn phi_with_derivative_raw<T: Scalar>(x: T) -> (T, T) {
    if x.abs() < T::lit(PHI_SERIES_THRESHOLD) {
        return phi_series(x);
    }
    let (two, three, four) = (T::lit(2.0), T::lit(3.0), T::lit(4.0));
    let y = T::one() + x;
    let y2 = y * y;
    let log = x.ln_1p();
    let bracket = y2 * y2 * (four * log - three) + four * y2 - T::one();
    let dbracket = four * y2 * y * (four * log - two) + T::lit(8.0) * y;
    let x3 = x * x * x;
    let c = three / T::lit(16.0);
    (c * bracket / x3, c * (dbracket / x3 - three * bracket / (x3 * x)))
}

fn phi_series<T: Scalar>(x: T) -> (T, T) {
    let mut value = T::zero();
    let mut deriv = T::zero();
    for (k, &c) in PHI_SERIES.iter().enumerate().rev() {
        value = value * x + T::lit(c);
        if k > 0 {
            deriv = deriv * x + T::lit(c * k as f64);
        }
    }
    (value, deriv)
}
