//! The 4-species relaxation oscillator, its 2-species driving subsystem,
//! critical-manifold formulas, basin classification, and clock validation.
//!
//! The driving pair obeys
//!
//! ```text
//! eps1 * dx/dt = eta1 * (phi(x) - y) * x,    phi(x) = -x^3 + 9x^2 - 24x + 21
//!        dy/dt = eta1 * (x - ell) * y
//! ```
//!
//! and the clock pair responds through a fast truncated-subtraction block
//!
//! ```text
//! eps1*eps2 * du/dt = eta1 * (eps1*(p - u) - u*v)
//! eps1*eps2 * dv/dt = eta1 * (eps1*(x - v) - u*v)
//! ```
//!
//! so that on the attracting manifold one of `u`, `v` is within O(eps1) of
//! zero while the other tracks `|x - p|`.

mod clock;

pub use clock::{
    first_clock_signal, transition_windows, validate_clock, ClockReport, ClockSignal,
    ClockThresholds,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crn::{Monomial, PolynomialOde};
use crate::dynamics::{DynamicsError, OdeSystem};

#[derive(Debug, Error)]
pub enum OscillatorError {
    #[error("invalid oscillator configuration: {0}")]
    InvalidConfig(String),
    #[error("inputs must be positive, got ({x0}, {y0})")]
    NonPositiveInput { x0: f64, y0: f64 },
    #[error("the plateau approximation is undefined at the crossover x == p (x = {0}); use the exact manifold form")]
    ApproxAtCrossover(f64),
    #[error("no oscillation detected: found {edges} qualifying clock edge(s), need at least {needed}")]
    NoOscillation { edges: usize, needed: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Parameters of the oscillator. Defaults are the reference parameter set
/// eps1 = eps2 = 1e-3, eta1 = 0.1, p = 3, ell = 3.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatorConfig {
    /// Time-scale separation of the driving signal x.
    pub eps1: f64,
    /// Response time scale of the clock pair; the annihilation rate is
    /// eta1/(eps1*eps2).
    pub eps2: f64,
    /// Overall rate of the slow flow; periods scale as 1/eta1.
    pub eta1: f64,
    /// Catalyst level: the subtraction offset separating the two clock
    /// amplitudes. Must sit between the low and high plateaus of x.
    pub p: f64,
    /// Equilibrium abscissa of the driving subsystem.
    pub ell: f64,
}

impl Default for OscillatorConfig {
    fn default() -> Self {
        Self {
            eps1: 1e-3,
            eps2: 1e-3,
            eta1: 0.1,
            p: 3.0,
            ell: 3.0,
        }
    }
}

impl OscillatorConfig {
    /// Hard-validates ranges and returns soft warnings about parameter
    /// choices that technically build but degrade the clock.
    pub fn validate(&self) -> Result<Vec<String>, OscillatorError> {
        let bad = |msg: String| Err(OscillatorError::InvalidConfig(msg));
        if !(self.eps1 > 0.0 && self.eps1 < 1.0) {
            return bad(format!("eps1 must lie in (0, 1), got {}", self.eps1));
        }
        if !(self.eps2 > 0.0 && self.eps2 < 1.0) {
            return bad(format!("eps2 must lie in (0, 1), got {}", self.eps2));
        }
        if !(self.eta1 > 0.0) || !self.eta1.is_finite() {
            return bad(format!("eta1 must be positive, got {}", self.eta1));
        }
        if !(self.p > 0.0) || !self.p.is_finite() {
            return bad(format!("p must be positive, got {}", self.p));
        }
        if !self.ell.is_finite() {
            return bad(format!("ell must be finite, got {}", self.ell));
        }

        let mut warnings = Vec::new();
        if self.eps1 > 0.05 {
            warnings.push(format!(
                "eps1 = {} is large; plateau residuals scale with eps1",
                self.eps1
            ));
        }
        if self.eps2 > 0.05 {
            warnings.push(format!(
                "eps2 = {} is large; clock response lags the driving signal",
                self.eps2
            ));
        }
        if !(self.ell > 2.0 && self.ell < 4.0) {
            warnings.push(format!(
                "ell = {} is outside (2, 4): the equilibrium is not on the repelling branch and no oscillation occurs",
                self.ell
            ));
        }
        if !(self.p > 2.0 && self.p < 4.0) {
            warnings.push(format!(
                "p = {} is outside the recommended (2, 4): it must separate the plateaus of x",
                self.p
            ));
        }
        Ok(warnings)
    }

    /// The effective rate constant of the fast subtraction block.
    pub fn kappa(&self) -> f64 {
        self.eta1 / self.eps2
    }

    /// Equilibrium of the driving subsystem in the positive quadrant.
    pub fn equilibrium(&self) -> (f64, f64) {
        (self.ell, CubicGeometry::default().phi(self.ell))
    }

    /// The driving subsystem in (x, y) as a polynomial system.
    pub fn xy_polynomials(&self) -> PolynomialOde {
        let a = self.eta1 / self.eps1;
        PolynomialOde::new(
            vec!["x".into(), "y".into()],
            vec![
                vec![
                    Monomial::new(-a, [("x", 4)]),
                    Monomial::new(9.0 * a, [("x", 3)]),
                    Monomial::new(-24.0 * a, [("x", 2)]),
                    Monomial::new(21.0 * a, [("x", 1)]),
                    Monomial::new(-a, [("x", 1), ("y", 1)]),
                ],
                vec![
                    Monomial::new(self.eta1, [("x", 1), ("y", 1)]),
                    Monomial::new(-self.ell * self.eta1, [("y", 1)]),
                ],
            ],
        )
        .expect("fixed species list")
    }

    /// The full 4-species oscillator in (x, y, u, v).
    pub fn oscillator_polynomials(&self) -> PolynomialOde {
        let xy = self.xy_polynomials();
        let kappa = self.eta1 / self.eps2;
        let ann = self.eta1 / (self.eps1 * self.eps2);
        let mut equations = xy.equations().to_vec();
        equations.push(vec![
            Monomial::constant(kappa * self.p),
            Monomial::new(-kappa, [("u", 1)]),
            Monomial::new(-ann, [("u", 1), ("v", 1)]),
        ]);
        equations.push(vec![
            Monomial::new(kappa, [("x", 1)]),
            Monomial::new(-kappa, [("v", 1)]),
            Monomial::new(-ann, [("u", 1), ("v", 1)]),
        ]);
        PolynomialOde::new(
            vec!["x".into(), "y".into(), "u".into(), "v".into()],
            equations,
        )
        .expect("fixed species list")
    }

    pub fn build_subsystem_xy(&self) -> OdeSystem {
        OdeSystem::from_polynomials(&self.xy_polynomials())
    }

    pub fn build_oscillator(&self) -> OdeSystem {
        OdeSystem::from_polynomials(&self.oscillator_polynomials())
    }
}

/// The fixed S-shaped manifold geometry of the cubic
/// `phi(x) = -x^3 + 9x^2 - 24x + 21`: folds at x = 2 and x = 4, jump
/// targets at x = 1 and x = 5, fold ordinates 1 and 5.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicGeometry {
    /// Coefficients of phi in degree-descending order.
    pub phi_coeffs: [f64; 4],
    /// Abscissa of the lower fold (local minimum of phi), x_m.
    pub fold_low: f64,
    /// Abscissa of the upper fold (local maximum of phi), x_M.
    pub fold_high: f64,
    /// Landing abscissa of the leftward jump, x_l.
    pub jump_left: f64,
    /// Landing abscissa of the rightward jump, x_r.
    pub jump_right: f64,
    /// Ordinate of the lower fold, y_m = phi(fold_low).
    pub y_low: f64,
    /// Ordinate of the upper fold, y_M = phi(fold_high).
    pub y_high: f64,
}

impl Default for CubicGeometry {
    fn default() -> Self {
        Self {
            phi_coeffs: [-1.0, 9.0, -24.0, 21.0],
            fold_low: 2.0,
            fold_high: 4.0,
            jump_left: 1.0,
            jump_right: 5.0,
            y_low: 1.0,
            y_high: 5.0,
        }
    }
}

impl CubicGeometry {
    pub fn phi(&self, x: f64) -> f64 {
        let [a, b, c, d] = self.phi_coeffs;
        ((a * x + b) * x + c) * x + d
    }

    pub fn phi_prime(&self, x: f64) -> f64 {
        let [a, b, c, _] = self.phi_coeffs;
        (3.0 * a * x + 2.0 * b) * x + c
    }

    /// Numeric consistency of the landmark values with phi, to 1e-12.
    pub fn verify(&self) -> Result<(), OscillatorError> {
        let checks = [
            ("phi'(fold_low)", self.phi_prime(self.fold_low), 0.0),
            ("phi'(fold_high)", self.phi_prime(self.fold_high), 0.0),
            ("phi(jump_left)", self.phi(self.jump_left), self.y_high),
            ("phi(jump_right)", self.phi(self.jump_right), self.y_low),
            ("phi(fold_low)", self.phi(self.fold_low), self.y_low),
            ("phi(fold_high)", self.phi(self.fold_high), self.y_high),
        ];
        for (what, got, want) in checks {
            if (got - want).abs() > 1e-12 {
                return Err(OscillatorError::InvalidConfig(format!(
                    "{what} = {got}, expected {want}"
                )));
            }
        }
        Ok(())
    }

    /// Inverse of phi restricted to the repelling branch (fold_low,
    /// fold_high), by bisection to 1e-10. `y` must lie in (y_low, y_high).
    pub fn repelling_inverse(&self, y: f64) -> Result<f64, OscillatorError> {
        if !(y > self.y_low && y < self.y_high) {
            return Err(OscillatorError::InvalidConfig(format!(
                "repelling branch covers y in ({}, {}), got {y}",
                self.y_low, self.y_high
            )));
        }
        // phi is increasing on (fold_low, fold_high).
        let (mut lo, mut hi) = (self.fold_low, self.fold_high);
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if self.phi(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Nonnegative roots of the fast-block equilibrium equations
///
/// ```text
/// u^2 - (p - x - eps1) u - eps1 p = 0
/// v^2 + (p - x + eps1) v - eps1 x = 0
/// ```
///
/// Both roots are nonnegative and satisfy the manifold equations to
/// rounding error, with `u - v = p - x` holding exactly.
pub fn manifold_uv_exact(x: f64, p: f64, eps1: f64) -> (f64, f64) {
    let d = p - x;
    let u = 0.5 * ((d - eps1) + ((d - eps1).powi(2) + 4.0 * eps1 * p).sqrt());
    let v = 0.5 * (-(d + eps1) + ((d + eps1).powi(2) + 4.0 * eps1 * x).sqrt());
    (u, v)
}

/// Zeroth-order plateau estimate: (0, x-p) on the high plateau,
/// (p-x, 0) on the low plateau. Errors at the crossover x == p where the
/// truncation is undefined.
pub fn manifold_uv_approx(x: f64, p: f64) -> Result<(f64, f64), OscillatorError> {
    if x == p {
        return Err(OscillatorError::ApproxAtCrossover(x));
    }
    Ok(if x > p { (0.0, x - p) } else { (p - x, 0.0) })
}

/// Which side of the relaxation orbit an initial point of the driving
/// subsystem merges into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasinRegion {
    /// Merges into the left (low-amplitude) branch first; u leads.
    A1,
    /// Merges into the right (high-amplitude) branch first; v leads.
    A2,
    /// The unstable equilibrium itself.
    Equilibrium,
}

impl std::fmt::Display for BasinRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasinRegion::A1 => write!(f, "A1"),
            BasinRegion::A2 => write!(f, "A2"),
            BasinRegion::Equilibrium => write!(f, "Equilibrium"),
        }
    }
}

/// Classify an initial point of the driving subsystem (with ell = 3):
///
/// - A1: y >= y_high, or 1 < y < 5 left of the repelling branch, or on the
///   branch with y > 3;
/// - A2: y <= y_low, or right of the repelling branch, or on it with y < 3;
/// - Equilibrium: within `tol` of (3, 3).
pub fn classify_initial(
    x0: f64,
    y0: f64,
    geometry: &CubicGeometry,
    tol: f64,
) -> Result<BasinRegion, OscillatorError> {
    if !(x0 > 0.0 && y0 > 0.0) {
        return Err(OscillatorError::NonPositiveInput { x0, y0 });
    }
    let (ex, ey) = (3.0, 3.0);
    if ((x0 - ex).powi(2) + (y0 - ey).powi(2)).sqrt() <= tol {
        return Ok(BasinRegion::Equilibrium);
    }
    if y0 >= geometry.y_high {
        return Ok(BasinRegion::A1);
    }
    if y0 <= geometry.y_low {
        return Ok(BasinRegion::A2);
    }
    let xr = geometry.repelling_inverse(y0)?;
    // Points numerically on the branch follow its drift direction.
    if (x0 - xr).abs() <= 1e-9 {
        return Ok(if y0 > ey { BasinRegion::A1 } else { BasinRegion::A2 });
    }
    Ok(if x0 < xr { BasinRegion::A1 } else { BasinRegion::A2 })
}

/// Character of the driving-subsystem equilibrium as ell moves along the
/// manifold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumKind {
    /// ell < 2 or ell > 4: asymptotically stable, trajectories converge.
    Stable,
    /// 2 < ell < 4: equilibrium on the repelling branch, relaxation
    /// oscillation around it.
    Oscillatory,
    /// ell at a fold (2 or 4): non-hyperbolic.
    FoldDegenerate,
}

pub fn equilibrium_character(ell: f64) -> (EquilibriumKind, (f64, f64)) {
    let geom = CubicGeometry::default();
    let kind = if ell == geom.fold_low || ell == geom.fold_high {
        EquilibriumKind::FoldDegenerate
    } else if ell > geom.fold_low && ell < geom.fold_high {
        EquilibriumKind::Oscillatory
    } else {
        EquilibriumKind::Stable
    };
    (kind, (ell, geom.phi(ell)))
}

/// Eigenvalues of the fast-block Jacobian in the fast time scale:
/// `-eta1` and `-eta1 * (1 + (u + v)/eps1)`. Both negative whenever
/// u, v >= 0, which is what makes the manifold attracting.
pub fn fast_block_eigenvalues(cfg: &OscillatorConfig, u: f64, v: f64) -> (f64, f64) {
    (
        -cfg.eta1,
        -cfg.eta1 - cfg.eta1 * (u + v) / cfg.eps1,
    )
}
