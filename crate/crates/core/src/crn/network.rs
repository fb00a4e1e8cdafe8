//! Reaction networks and their mass-action dynamics.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::polynomial::{Monomial, PolynomialOde};
use super::CrnError;

/// A named species with its position in the concentration vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Species {
    pub id: String,
    pub index: usize,
}

/// One reaction: reactant and product complexes (species name to
/// non-negative integer coefficient) plus a positive rate constant.
///
/// `rate_expr` optionally keeps the parameter expression the numeric rate
/// was resolved from (for example `9*eta1/eps1`); it is display-only and
/// never serialized.
#[derive(Clone, Debug, PartialEq)]
pub struct Reaction {
    pub reactants: BTreeMap<String, u32>,
    pub products: BTreeMap<String, u32>,
    pub rate: f64,
    pub rate_expr: Option<String>,
}

impl Reaction {
    pub fn new(
        reactants: BTreeMap<String, u32>,
        products: BTreeMap<String, u32>,
        rate: f64,
    ) -> Self {
        let drop_zeros = |m: BTreeMap<String, u32>| {
            m.into_iter().filter(|(_, c)| *c > 0).collect::<BTreeMap<_, _>>()
        };
        Self {
            reactants: drop_zeros(reactants),
            products: drop_zeros(products),
            rate,
            rate_expr: None,
        }
    }

    /// Convenience constructor from coefficient slices.
    pub fn from_pairs(reactants: &[(&str, u32)], products: &[(&str, u32)], rate: f64) -> Self {
        let collect = |pairs: &[(&str, u32)]| {
            pairs
                .iter()
                .map(|(n, c)| (n.to_string(), *c))
                .collect::<BTreeMap<_, _>>()
        };
        Self::new(collect(reactants), collect(products), rate)
    }

    pub fn with_rate_expr(mut self, expr: impl Into<String>) -> Self {
        self.rate_expr = Some(expr.into());
        self
    }

    /// Net stoichiometric change of `species` (products minus reactants).
    pub fn net_change(&self, species: &str) -> i64 {
        self.products.get(species).copied().unwrap_or(0) as i64
            - self.reactants.get(species).copied().unwrap_or(0) as i64
    }
}

/// A validated reaction network over an ordered species list.
///
/// Species order is declaration order; all matrices and vectors follow it.
/// Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<Species>,
    reactions: Vec<Reaction>,
}

impl ReactionNetwork {
    pub fn new(
        species_names: Vec<String>,
        reactions: Vec<Reaction>,
    ) -> Result<Self, CrnError> {
        if species_names.is_empty() || reactions.is_empty() {
            return Err(CrnError::EmptyNetwork);
        }
        let mut seen = std::collections::BTreeSet::new();
        let species: Vec<Species> = species_names
            .into_iter()
            .enumerate()
            .map(|(index, id)| Species { id, index })
            .collect();
        for sp in &species {
            if !seen.insert(sp.id.clone()) {
                return Err(CrnError::DuplicateSpecies(sp.id.clone()));
            }
        }
        for (index, r) in reactions.iter().enumerate() {
            if !(r.rate > 0.0) || !r.rate.is_finite() {
                return Err(CrnError::NonPositiveRate(r.rate));
            }
            if r.reactants.is_empty() && r.products.is_empty() {
                return Err(CrnError::EmptyReaction { index });
            }
            for name in r.reactants.keys().chain(r.products.keys()) {
                if !seen.contains(name) {
                    return Err(CrnError::UnknownSpecies {
                        species: name.clone(),
                        context: format!("reaction {index}"),
                    });
                }
            }
        }
        Ok(Self { species, reactions })
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn species_names(&self) -> Vec<String> {
        self.species.iter().map(|s| s.id.clone()).collect()
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.id == name)
    }

    /// The n-by-m matrix with entry (i, j) equal to the net production of
    /// species i by reaction j.
    pub fn stoichiometric_matrix(&self) -> DMatrix<i64> {
        DMatrix::from_fn(self.n_species(), self.n_reactions(), |i, j| {
            self.reactions[j].net_change(&self.species[i].id)
        })
    }

    /// Mass-action rate of each reaction at the state `s`:
    /// `k_j * prod_i s_i^{a_ji}`, with the convention `0^0 = 1` so that
    /// zero-order inflows fire at bare rate `k_j`.
    pub fn mass_action_rates(&self, s: &[f64]) -> Result<Vec<f64>, CrnError> {
        if s.len() != self.n_species() {
            return Err(CrnError::DimensionMismatch {
                got: s.len(),
                expected: self.n_species(),
            });
        }
        for (sp, &c) in self.species.iter().zip(s) {
            if c < 0.0 {
                return Err(CrnError::NegativeConcentration {
                    species: sp.id.clone(),
                    value: c,
                });
            }
        }
        Ok(self
            .reactions
            .iter()
            .map(|r| {
                r.rate
                    * r.reactants
                        .iter()
                        .map(|(name, &a)| {
                            let i = self.index_of(name).expect("validated at construction");
                            s[i].powi(a as i32)
                        })
                        .product::<f64>()
            })
            .collect())
    }

    /// Time derivative of every concentration: the stoichiometric matrix
    /// applied to the mass-action rate vector.
    pub fn ode_rhs(&self, s: &[f64]) -> Result<Vec<f64>, CrnError> {
        let rates = self.mass_action_rates(s)?;
        let mut ds = vec![0.0; self.n_species()];
        for (r, &rate) in self.reactions.iter().zip(&rates) {
            for (name, &a) in &r.reactants {
                let i = self.index_of(name).expect("validated");
                ds[i] -= a as f64 * rate;
            }
            for (name, &b) in &r.products {
                let i = self.index_of(name).expect("validated");
                ds[i] += b as f64 * rate;
            }
        }
        Ok(ds)
    }

    /// Collect the mass-action dynamics into canonical polynomial form.
    /// Symbolically equal to [`ReactionNetwork::ode_rhs`] for all states.
    pub fn to_polynomials(&self) -> PolynomialOde {
        let names = self.species_names();
        let mut equations: Vec<Vec<Monomial>> = vec![Vec::new(); names.len()];
        for r in &self.reactions {
            let exps: Vec<(String, u32)> = r
                .reactants
                .iter()
                .map(|(n, &a)| (n.clone(), a))
                .collect();
            for (i, sp) in self.species.iter().enumerate() {
                let net = r.net_change(&sp.id);
                if net != 0 {
                    equations[i].push(Monomial::new(net as f64 * r.rate, exps.clone()));
                }
            }
        }
        PolynomialOde::new(names, equations).expect("network species are valid")
    }
}

// JSON interchange:
// {"species": [names], "reactions": [{"reactants": {..}, "products": {..}, "rate": f}]}
#[derive(Serialize, Deserialize)]
struct ReactionRepr {
    #[serde(default)]
    reactants: BTreeMap<String, u32>,
    #[serde(default)]
    products: BTreeMap<String, u32>,
    rate: f64,
}

#[derive(Serialize, Deserialize)]
struct NetworkRepr {
    species: Vec<String>,
    reactions: Vec<ReactionRepr>,
}

impl Serialize for ReactionNetwork {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        NetworkRepr {
            species: self.species_names(),
            reactions: self
                .reactions
                .iter()
                .map(|r| ReactionRepr {
                    reactants: r.reactants.clone(),
                    products: r.products.clone(),
                    rate: r.rate,
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ReactionNetwork {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = NetworkRepr::deserialize(deserializer)?;
        let reactions = repr
            .reactions
            .into_iter()
            .map(|r| Reaction::new(r.reactants, r.products, r.rate))
            .collect();
        ReactionNetwork::new(repr.species, reactions).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two reactions over {s1, s2, s3}: 2 s1 -> s2 + s3 and s3 -> 2 s1.
    fn two_reaction_network(k1: f64, k2: f64) -> ReactionNetwork {
        ReactionNetwork::new(
            vec!["s1".into(), "s2".into(), "s3".into()],
            vec![
                Reaction::from_pairs(&[("s1", 2)], &[("s2", 1), ("s3", 1)], k1),
                Reaction::from_pairs(&[("s3", 1)], &[("s1", 2)], k2),
            ],
        )
        .unwrap()
    }

    #[test]
    fn builds_with_expected_sizes() {
        let net = two_reaction_network(1.0, 1.0);
        assert_eq!(net.n_species(), 3);
        assert_eq!(net.n_reactions(), 2);
    }

    #[test]
    fn single_outflow_is_valid() {
        let net = ReactionNetwork::new(
            vec!["x".into()],
            vec![Reaction::from_pairs(&[("x", 1)], &[], 1.0)],
        )
        .unwrap();
        assert_eq!(net.n_species(), 1);
        assert_eq!(net.ode_rhs(&[0.7]).unwrap(), vec![-0.7]);
    }

    #[test]
    fn unknown_species_rejected() {
        let err = ReactionNetwork::new(
            vec!["x".into()],
            vec![Reaction::from_pairs(&[("z", 1)], &[("x", 1)], 1.0)],
        )
        .unwrap_err();
        assert!(matches!(err, CrnError::UnknownSpecies { species, .. } if species == "z"));
    }

    #[test]
    fn duplicate_species_rejected() {
        let err = ReactionNetwork::new(
            vec!["x".into(), "x".into()],
            vec![Reaction::from_pairs(&[("x", 1)], &[], 1.0)],
        )
        .unwrap_err();
        assert!(matches!(err, CrnError::DuplicateSpecies(_)));
    }

    #[test]
    fn non_positive_rate_rejected() {
        for bad in [0.0, -1.0, f64::NAN] {
            let err = ReactionNetwork::new(
                vec!["x".into()],
                vec![Reaction::from_pairs(&[("x", 1)], &[], bad)],
            )
            .unwrap_err();
            assert!(matches!(err, CrnError::NonPositiveRate(_)));
        }
    }

    #[test]
    fn stoichiometric_matrix_two_reactions() {
        let net = two_reaction_network(1.0, 1.0);
        let m = net.stoichiometric_matrix();
        assert_eq!(m.shape(), (3, 2));
        assert_eq!(
            m.row_iter()
                .map(|r| (r[0], r[1]))
                .collect::<Vec<_>>(),
            vec![(-2, 2), (1, 0), (1, -1)]
        );
    }

    #[test]
    fn stoichiometric_matrix_outflow() {
        let net = ReactionNetwork::new(
            vec!["x".into()],
            vec![Reaction::from_pairs(&[("x", 1)], &[], 1.0)],
        )
        .unwrap();
        assert_eq!(net.stoichiometric_matrix()[(0, 0)], -1);
    }

    #[test]
    fn catalyst_column_nets_to_zero() {
        // s1 + u -> s1 + s2 + u: both catalysts net to zero, s2 to +1.
        let net = ReactionNetwork::new(
            vec!["s1".into(), "s2".into(), "u".into()],
            vec![Reaction::from_pairs(
                &[("s1", 1), ("u", 1)],
                &[("s1", 1), ("s2", 1), ("u", 1)],
                1.0,
            )],
        )
        .unwrap();
        let m = net.stoichiometric_matrix();
        assert_eq!((m[(0, 0)], m[(1, 0)], m[(2, 0)]), (0, 1, 0));
    }

    #[test]
    fn mass_action_rates_unit_state() {
        let net = two_reaction_network(1.0, 1.0);
        assert_eq!(net.mass_action_rates(&[1.0, 1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn mass_action_rates_hand_evaluated() {
        // k1*s1^2 = 1*2^2 = 4, k2*s3 = 1*3 = 3.
        let net = two_reaction_network(1.0, 1.0);
        assert_eq!(net.mass_action_rates(&[2.0, 0.0, 3.0]).unwrap(), vec![4.0, 3.0]);
    }

    #[test]
    fn negative_concentration_rejected() {
        let net = two_reaction_network(1.0, 1.0);
        let err = net.mass_action_rates(&[1.0, -0.1, 1.0]).unwrap_err();
        assert!(matches!(err, CrnError::NegativeConcentration { species, .. } if species == "s2"));
    }

    #[test]
    fn ode_rhs_hand_evaluated() {
        let net = two_reaction_network(1.0, 1.0);
        // ds1 = -2*1 + 2*1 = 0, ds2 = 1, ds3 = 1 - 1 = 0.
        assert_eq!(net.ode_rhs(&[1.0, 1.0, 1.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        // both rates vanish at s1 = s3 = 0.
        assert_eq!(net.ode_rhs(&[0.0, 4.0, 0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn ode_rhs_matches_matrix_product() {
        let net = two_reaction_network(0.7, 1.3);
        let s = [1.7, 0.2, 2.4];
        let rhs = net.ode_rhs(&s).unwrap();
        let m = net.stoichiometric_matrix();
        let rates = net.mass_action_rates(&s).unwrap();
        for i in 0..3 {
            let want: f64 = (0..2).map(|j| m[(i, j)] as f64 * rates[j]).sum();
            assert!((rhs[i] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn polynomials_of_example_network() {
        let net = two_reaction_network(1.0, 1.0);
        let ode = net.to_polynomials();
        assert_eq!(
            ode.equation("s1").unwrap(),
            &[
                Monomial::new(-2.0, [("s1", 2)]),
                Monomial::new(2.0, [("s3", 1)]),
            ]
        );
        assert_eq!(ode.equation("s2").unwrap(), &[Monomial::new(1.0, [("s1", 2)])]);
        assert_eq!(
            ode.equation("s3").unwrap(),
            &[
                Monomial::new(1.0, [("s1", 2)]),
                Monomial::new(-1.0, [("s3", 1)]),
            ]
        );
    }

    #[test]
    fn inflow_reaction_gives_constant_monomial() {
        let net = ReactionNetwork::new(
            vec!["x".into()],
            vec![Reaction::from_pairs(&[], &[("x", 1)], 2.5)],
        )
        .unwrap();
        assert_eq!(net.to_polynomials().equation("x").unwrap(), &[Monomial::constant(2.5)]);
    }

    #[test]
    fn network_json_round_trip() {
        let net = two_reaction_network(0.25, 4.0);
        let text = serde_json::to_string_pretty(&net).unwrap();
        let back: ReactionNetwork = serde_json::from_str(&text).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn invalid_json_network_rejected() {
        let text = r#"{"species": ["x"], "reactions": [{"reactants": {"z": 1}, "products": {}, "rate": 1.0}]}"#;
        assert!(serde_json::from_str::<ReactionNetwork>(text).is_err());
    }
}
