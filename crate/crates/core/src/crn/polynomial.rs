//! Polynomial right-hand sides and their realization as reaction networks.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{CrnError, Reaction, ReactionNetwork, COEFF_EPS};

/// One term `coeff * prod_i s_i^exps[i]` of a polynomial right-hand side.
/// Zero exponents are not stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    #[serde(default)]
    pub exps: BTreeMap<String, u32>,
}

impl Monomial {
    pub fn new<S: Into<String>>(coeff: f64, exps: impl IntoIterator<Item = (S, u32)>) -> Self {
        let exps = exps
            .into_iter()
            .filter(|(_, e)| *e > 0)
            .map(|(n, e)| (n.into(), e))
            .collect();
        Self { coeff, exps }
    }

    /// Constant term.
    pub fn constant(coeff: f64) -> Self {
        Self {
            coeff,
            exps: BTreeMap::new(),
        }
    }

    pub fn degree_in(&self, species: &str) -> u32 {
        self.exps.get(species).copied().unwrap_or(0)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.coeff)?;
        for (name, e) in &self.exps {
            if *e == 1 {
                write!(f, "*{name}")?;
            } else {
                write!(f, "*{name}^{e}")?;
            }
        }
        Ok(())
    }
}

/// A system `d s_i/dt = sum of monomials` over an ordered species list,
/// kept in canonical collected form: within one equation no two monomials
/// share an exponent map, and coefficients below [`COEFF_EPS`] are dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialOde {
    species: Vec<String>,
    equations: Vec<Vec<Monomial>>,
}

impl PolynomialOde {
    /// Build from per-species equations given in species order.
    pub fn new(
        species: Vec<String>,
        equations: Vec<Vec<Monomial>>,
    ) -> Result<Self, CrnError> {
        if equations.len() != species.len() {
            return Err(CrnError::DimensionMismatch {
                got: equations.len(),
                expected: species.len(),
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in &species {
            if !seen.insert(name.clone()) {
                return Err(CrnError::DuplicateSpecies(name.clone()));
            }
        }
        for eq in &equations {
            for mono in eq {
                for name in mono.exps.keys() {
                    if !seen.contains(name) {
                        return Err(CrnError::UnknownSpecies {
                            species: name.clone(),
                            context: "a monomial exponent map".into(),
                        });
                    }
                }
            }
        }
        let equations = equations.into_iter().map(canonicalize).collect();
        Ok(Self { species, equations })
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn dimension(&self) -> usize {
        self.species.len()
    }

    pub fn equations(&self) -> &[Vec<Monomial>] {
        &self.equations
    }

    pub fn equation(&self, species: &str) -> Result<&[Monomial], CrnError> {
        let i = self
            .species
            .iter()
            .position(|s| s == species)
            .ok_or_else(|| CrnError::UnknownSpecies {
                species: species.into(),
                context: "polynomial system".into(),
            })?;
        Ok(&self.equations[i])
    }

    /// Evaluate all right-hand sides at the state `s` (species order).
    pub fn evaluate(&self, s: &[f64]) -> Result<Vec<f64>, CrnError> {
        if s.len() != self.species.len() {
            return Err(CrnError::DimensionMismatch {
                got: s.len(),
                expected: self.species.len(),
            });
        }
        let index: BTreeMap<&str, usize> = self
            .species
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        Ok(self
            .equations
            .iter()
            .map(|eq| {
                eq.iter()
                    .map(|m| {
                        m.coeff
                            * m.exps
                                .iter()
                                .map(|(n, e)| s[index[n.as_str()]].powi(*e as i32))
                                .product::<f64>()
                    })
                    .sum()
            })
            .collect())
    }

    /// Transform every monomial into one abstract reaction: a monomial
    /// `c * prod s^a` in `d s_i/dt` becomes the reaction with reactant
    /// complex `a`, product complex `a + e_i` (`c > 0`) or `a - e_i`
    /// (`c < 0`), and rate constant `|c|`.
    ///
    /// Requires the kinetic condition: every negative monomial in
    /// `d s_i/dt` must contain `s_i` as a factor.
    pub fn realize_network(&self) -> Result<ReactionNetwork, CrnError> {
        let mut reactions = Vec::new();
        for (i, eq) in self.equations.iter().enumerate() {
            let name = &self.species[i];
            for mono in eq {
                if mono.coeff < 0.0 && mono.degree_in(name) == 0 {
                    return Err(CrnError::KineticCondition {
                        species: name.clone(),
                        monomial: mono.to_string(),
                    });
                }
                let reactants = mono.exps.clone();
                let mut products = mono.exps.clone();
                if mono.coeff > 0.0 {
                    *products.entry(name.clone()).or_insert(0) += 1;
                } else {
                    let c = products.get_mut(name).expect("kinetic condition checked");
                    *c -= 1;
                    if *c == 0 {
                        products.remove(name);
                    }
                }
                reactions.push(Reaction::new(reactants, products, mono.coeff.abs()));
            }
        }
        ReactionNetwork::new(self.species.clone(), reactions)
    }
}

/// Merge monomials with equal exponent maps and drop negligible ones.
/// The result is sorted by exponent map so equal systems compare equal.
fn canonicalize(eq: Vec<Monomial>) -> Vec<Monomial> {
    let mut collected: BTreeMap<BTreeMap<String, u32>, f64> = BTreeMap::new();
    for m in eq {
        *collected.entry(m.exps).or_insert(0.0) += m.coeff;
    }
    collected
        .into_iter()
        .filter(|(_, c)| c.abs() >= COEFF_EPS)
        .map(|(exps, coeff)| Monomial { coeff, exps })
        .collect()
}

// JSON interchange: {"species": [...], "equations": {name: [monomials]}}.
#[derive(Serialize, Deserialize)]
struct PolynomialOdeRepr {
    species: Vec<String>,
    equations: BTreeMap<String, Vec<Monomial>>,
}

impl Serialize for PolynomialOde {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let equations = self
            .species
            .iter()
            .cloned()
            .zip(self.equations.iter().cloned())
            .collect();
        PolynomialOdeRepr {
            species: self.species.clone(),
            equations,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PolynomialOde {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let mut repr = PolynomialOdeRepr::deserialize(deserializer)?;
        let equations = repr
            .species
            .iter()
            .map(|name| repr.equations.remove(name).unwrap_or_default())
            .collect();
        if let Some(extra) = repr.equations.keys().next() {
            return Err(serde::de::Error::custom(format!(
                "equation for `{extra}` does not match any listed species"
            )));
        }
        PolynomialOde::new(repr.species, equations).map_err(serde::de::Error::custom)
    }
}
