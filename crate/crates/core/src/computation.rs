//! Computation modules (addition, load, truncated subtraction, counter),
//! their clock-gated forms, and full composed systems in which the clock
//! pair alternately fires the gated modules to run the iteration
//! `s1 = s1 + s3` once per cycle, optionally terminated by a counter
//! species.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crn::{CrnError, Monomial, PolynomialOde, Reaction, ReactionNetwork};
use crate::dynamics::OdeSystem;
use crate::oscillator::{OscillatorConfig, OscillatorError};

#[derive(Debug, Error)]
pub enum ComputationError {
    #[error("module kind {kind:?} requires a binding for role {role:?}")]
    MissingBinding { kind: ModuleKind, role: Role },
    #[error("bindings must be injective: `{name}` is bound to more than one role")]
    DuplicateBinding { name: String },
    #[error("rate constant must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Crn(#[from] CrnError),
    #[error(transparent)]
    Oscillator(#[from] OscillatorError),
}

/// The module catalogue. Gated kinds add the clock catalyst to every
/// reaction; binding W as well yields the terminating variants that the
/// counter species can shut down.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModuleKind {
    /// s2* = s1(0) + s3(0).
    Addition,
    /// s1* = s2(0).
    Load,
    /// Addition gated by U (and by W when bound).
    GatedAddition,
    /// Load gated by V (and by W when bound).
    GatedLoad,
    /// u* = max(p(0) - x(0), 0).
    TruncatedSubtraction,
    /// dw/dt = eta3 (l - s1 - w) w: w tracks max(l - s1, 0).
    Counter,
}

/// Species roles a module may bind to global names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    S1,
    S2,
    S3,
    U,
    V,
    W,
    L,
    P,
    X,
}

impl Role {
    fn default_name(self) -> &'static str {
        match self {
            Role::S1 => "s1",
            Role::S2 => "s2",
            Role::S3 => "s3",
            Role::U => "u",
            Role::V => "v",
            Role::W => "w",
            Role::L => "l",
            Role::P => "p",
            Role::X => "x",
        }
    }
}

/// A module instance: kind, shared rate constant (1 unless parameterized,
/// eta3 for the counter), and role-to-name bindings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModuleSpec {
    pub kind: ModuleKind,
    pub rate: f64,
    pub bindings: BTreeMap<Role, String>,
}

impl ModuleSpec {
    /// A spec with the canonical lowercase bindings for the roles the kind
    /// requires, and rate 1.
    pub fn new(kind: ModuleKind) -> Self {
        let mut spec = Self {
            kind,
            rate: 1.0,
            bindings: BTreeMap::new(),
        };
        for role in kind.required_roles() {
            spec.bindings.insert(*role, role.default_name().to_string());
        }
        spec
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.rate = rate;
        self
    }

    pub fn bind(mut self, role: Role, name: impl Into<String>) -> Self {
        self.bindings.insert(role, name.into());
        self
    }

    fn name(&self, role: Role) -> Result<&str, ComputationError> {
        self.bindings
            .get(&role)
            .map(|s| s.as_str())
            .ok_or(ComputationError::MissingBinding {
                kind: self.kind,
                role,
            })
    }
}

impl ModuleKind {
    pub fn required_roles(&self) -> &'static [Role] {
        match self {
            ModuleKind::Addition => &[Role::S1, Role::S2, Role::S3],
            ModuleKind::Load => &[Role::S1, Role::S2],
            ModuleKind::GatedAddition => &[Role::S1, Role::S2, Role::S3, Role::U],
            ModuleKind::GatedLoad => &[Role::S1, Role::S2, Role::V],
            ModuleKind::TruncatedSubtraction => &[Role::P, Role::U, Role::X, Role::V],
            ModuleKind::Counter => &[Role::L, Role::W, Role::S1],
        }
    }
}

/// Build the exact reaction list of one module.
pub fn build_module(spec: &ModuleSpec) -> Result<ReactionNetwork, ComputationError> {
    if !(spec.rate > 0.0) || !spec.rate.is_finite() {
        return Err(ComputationError::NonPositiveRate(spec.rate));
    }
    let mut names_seen = std::collections::BTreeSet::new();
    for name in spec.bindings.values() {
        if !names_seen.insert(name.clone()) {
            return Err(ComputationError::DuplicateBinding { name: name.clone() });
        }
    }

    let k = spec.rate;
    // Optional W catalyst turns the gated modules into their terminating
    // variants.
    let w_gate = matches!(spec.kind, ModuleKind::GatedAddition | ModuleKind::GatedLoad)
        .then(|| spec.bindings.get(&Role::W).cloned())
        .flatten();
    fn gate(mut r: Reaction, cat: Option<&str>) -> Reaction {
        if let Some(c) = cat {
            *r.reactants.entry(c.to_string()).or_insert(0) += 1;
            *r.products.entry(c.to_string()).or_insert(0) += 1;
        }
        r
    }

    let mut species: Vec<String> = Vec::new();
    let push = |name: &str, species: &mut Vec<String>| {
        if !species.iter().any(|s| s == name) {
            species.push(name.to_string());
        }
    };

    let reactions = match spec.kind {
        ModuleKind::Addition => {
            let (s1, s2, s3) = (spec.name(Role::S1)?, spec.name(Role::S2)?, spec.name(Role::S3)?);
            for n in [s1, s2, s3] {
                push(n, &mut species);
            }
            vec![
                Reaction::from_pairs(&[(s1, 1)], &[(s1, 1), (s2, 1)], k),
                Reaction::from_pairs(&[(s3, 1)], &[(s3, 1), (s2, 1)], k),
                Reaction::from_pairs(&[(s2, 1)], &[], k),
            ]
        }
        ModuleKind::Load => {
            let (s1, s2) = (spec.name(Role::S1)?, spec.name(Role::S2)?);
            for n in [s1, s2] {
                push(n, &mut species);
            }
            vec![
                Reaction::from_pairs(&[(s2, 1)], &[(s2, 1), (s1, 1)], k),
                Reaction::from_pairs(&[(s1, 1)], &[], k),
            ]
        }
        ModuleKind::GatedAddition => {
            let (s1, s2, s3, u) = (
                spec.name(Role::S1)?,
                spec.name(Role::S2)?,
                spec.name(Role::S3)?,
                spec.name(Role::U)?,
            );
            for n in [s1, s2, s3, u] {
                push(n, &mut species);
            }
            let w = w_gate.as_deref();
            if let Some(wn) = w {
                push(wn, &mut species);
            }
            vec![
                gate(Reaction::from_pairs(&[(s1, 1), (u, 1)], &[(s1, 1), (s2, 1), (u, 1)], k), w),
                gate(Reaction::from_pairs(&[(s3, 1), (u, 1)], &[(s3, 1), (s2, 1), (u, 1)], k), w),
                gate(Reaction::from_pairs(&[(s2, 1), (u, 1)], &[(u, 1)], k), w),
            ]
        }
        ModuleKind::GatedLoad => {
            let (s1, s2, v) = (spec.name(Role::S1)?, spec.name(Role::S2)?, spec.name(Role::V)?);
            for n in [s1, s2, v] {
                push(n, &mut species);
            }
            let w = w_gate.as_deref();
            if let Some(wn) = w {
                push(wn, &mut species);
            }
            vec![
                gate(Reaction::from_pairs(&[(s2, 1), (v, 1)], &[(s2, 1), (s1, 1), (v, 1)], k), w),
                gate(Reaction::from_pairs(&[(s1, 1), (v, 1)], &[(v, 1)], k), w),
            ]
        }
        ModuleKind::TruncatedSubtraction => {
            let (p, u, x, v) = (
                spec.name(Role::P)?,
                spec.name(Role::U)?,
                spec.name(Role::X)?,
                spec.name(Role::V)?,
            );
            for n in [p, u, x, v] {
                push(n, &mut species);
            }
            vec![
                Reaction::from_pairs(&[(p, 1)], &[(p, 1), (u, 1)], k),
                Reaction::from_pairs(&[(u, 1)], &[], k),
                Reaction::from_pairs(&[(x, 1)], &[(x, 1), (v, 1)], k),
                Reaction::from_pairs(&[(u, 1), (v, 1)], &[], k),
            ]
        }
        ModuleKind::Counter => {
            let (l, w, s1) = (spec.name(Role::L)?, spec.name(Role::W)?, spec.name(Role::S1)?);
            for n in [l, w, s1] {
                push(n, &mut species);
            }
            vec![
                Reaction::from_pairs(&[(l, 1), (w, 1)], &[(l, 1), (w, 2)], k),
                Reaction::from_pairs(&[(s1, 1), (w, 1)], &[(s1, 1)], k),
                Reaction::from_pairs(&[(w, 2)], &[(w, 1)], k),
            ]
        }
    };

    Ok(ReactionNetwork::new(species, reactions)?)
}

/// Closed-form counter trajectory from `dw/dt = eta3 (l - s1 - w) w` with
/// s1 held constant:
///
/// ```text
/// w(t) = (l - s1) w0 / (w0 + (l - s1 - w0) exp(-eta3 (l - s1) t))
/// ```
///
/// degenerating to `w0 / (1 + eta3 w0 t)` when `l == s1`. Converges to
/// `l - s1` when positive and to 0 otherwise.
pub fn counter_closed_form(l: f64, s1: f64, w0: f64, eta3: f64, t: f64) -> f64 {
    if w0 == 0.0 {
        return 0.0;
    }
    let d = l - s1;
    if d == 0.0 {
        return w0 / (1.0 + eta3 * w0 * t);
    }
    if d == w0 {
        // Started on the equilibrium.
        return d;
    }
    let e = (-eta3 * d * t).exp();
    if e.is_infinite() {
        // Deep decay regime: w already collapsed to zero.
        return 0.0;
    }
    d * w0 / (w0 + (d - w0) * e)
}

/// A clock-driven computation stack: the reaction network of the whole
/// system (clock realization plus catalytic modules), its polynomial
/// dynamics, a compiled ODE system, and the default initial state.
pub struct ComposedSystem {
    pub network: ReactionNetwork,
    pub polynomials: PolynomialOde,
    pub system: OdeSystem,
    pub config: OscillatorConfig,
    pub species: Vec<String>,
    pub initial_state: Vec<f64>,
    /// Counter target l for terminating systems.
    pub iteration_target: Option<f64>,
    /// Soft configuration warnings gathered while composing.
    pub warnings: Vec<String>,
}

fn oscillator_equations(cfg: &OscillatorConfig) -> Vec<Vec<Monomial>> {
    cfg.oscillator_polynomials().equations().to_vec()
}

/// Clock-gated iteration loop over species (x, y, u, v, s1, s2, s3):
/// during each u-high phase the gated addition writes s1 + s3 into s2,
/// during the following v-high phase the gated load copies s2 back to s1,
/// so s1 climbs by s3 once per clock cycle. The clock never feels the
/// modules: s-species do not appear in the clock equations.
///
/// The default initial state starts the clock at (5, 5, 0, 0), which
/// fires the addition module first.
pub fn compose_loop(
    cfg: &OscillatorConfig,
    s_init: (f64, f64, f64),
) -> Result<ComposedSystem, ComputationError> {
    let warnings = cfg.validate()?;
    let (s1_0, s2_0, s3_0) = s_init;
    for (name, v) in [("s1", s1_0), ("s2", s2_0), ("s3", s3_0)] {
        if v < 0.0 {
            return Err(ComputationError::InvalidInput(format!(
                "initial {name} must be nonnegative, got {v}"
            )));
        }
    }

    let mut equations = oscillator_equations(cfg);
    // d s1/dt = (s2 - s1) v
    equations.push(vec![
        Monomial::new(1.0, [("s2", 1), ("v", 1)]),
        Monomial::new(-1.0, [("s1", 1), ("v", 1)]),
    ]);
    // d s2/dt = (s1 + s3 - s2) u
    equations.push(vec![
        Monomial::new(1.0, [("s1", 1), ("u", 1)]),
        Monomial::new(1.0, [("s3", 1), ("u", 1)]),
        Monomial::new(-1.0, [("s2", 1), ("u", 1)]),
    ]);
    // d s3/dt = 0
    equations.push(vec![]);

    let species: Vec<String> = ["x", "y", "u", "v", "s1", "s2", "s3"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let polynomials = PolynomialOde::new(species.clone(), equations)?;
    let network = polynomials.realize_network()?;
    let system = OdeSystem::from_polynomials(&polynomials);
    Ok(ComposedSystem {
        network,
        polynomials,
        system,
        config: *cfg,
        species,
        initial_state: vec![5.0, 5.0, 0.0, 0.0, s1_0, s2_0, s3_0],
        iteration_target: None,
        warnings,
    })
}

/// The terminating loop over (x, y, u, v, s1, s2, s3, w, l): the gated
/// modules additionally carry the counter species W as catalyst, and W
/// tracks l - s1 through the counter block, collapsing once s1 reaches
/// the target and freezing both modules.
pub fn compose_terminating_loop(
    cfg: &OscillatorConfig,
    s_init: (f64, f64, f64),
    l: f64,
    w0: f64,
    eta3: f64,
) -> Result<ComposedSystem, ComputationError> {
    let warnings = cfg.validate()?;
    let (s1_0, s2_0, s3_0) = s_init;
    for (name, v) in [("s1", s1_0), ("s2", s2_0), ("s3", s3_0), ("l", l)] {
        if v < 0.0 {
            return Err(ComputationError::InvalidInput(format!(
                "initial {name} must be nonnegative, got {v}"
            )));
        }
    }
    if !(w0 > 0.0) {
        return Err(ComputationError::InvalidInput(format!(
            "w0 must be positive for the counter to act, got {w0}"
        )));
    }
    if !(eta3 > 0.0) {
        return Err(ComputationError::NonPositiveRate(eta3));
    }

    let mut equations = oscillator_equations(cfg);
    // d s1/dt = (s2 - s1) v w
    equations.push(vec![
        Monomial::new(1.0, [("s2", 1), ("v", 1), ("w", 1)]),
        Monomial::new(-1.0, [("s1", 1), ("v", 1), ("w", 1)]),
    ]);
    // d s2/dt = (s1 + s3 - s2) u w
    equations.push(vec![
        Monomial::new(1.0, [("s1", 1), ("u", 1), ("w", 1)]),
        Monomial::new(1.0, [("s3", 1), ("u", 1), ("w", 1)]),
        Monomial::new(-1.0, [("s2", 1), ("u", 1), ("w", 1)]),
    ]);
    // d s3/dt = 0
    equations.push(vec![]);
    // d w/dt = eta3 (l - s1 - w) w
    equations.push(vec![
        Monomial::new(eta3, [("l", 1), ("w", 1)]),
        Monomial::new(-eta3, [("s1", 1), ("w", 1)]),
        Monomial::new(-eta3, [("w", 2)]),
    ]);
    // d l/dt = 0
    equations.push(vec![]);

    let species: Vec<String> = ["x", "y", "u", "v", "s1", "s2", "s3", "w", "l"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let polynomials = PolynomialOde::new(species.clone(), equations)?;
    let network = polynomials.realize_network()?;
    let system = OdeSystem::from_polynomials(&polynomials);
    Ok(ComposedSystem {
        network,
        polynomials,
        system,
        config: *cfg,
        species,
        initial_state: vec![5.0, 5.0, 0.0, 0.0, s1_0, s2_0, s3_0, w0, l],
        iteration_target: Some(l),
        warnings,
    })
}
