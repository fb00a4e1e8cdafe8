//! Evaluable ODE systems with optional analytic Jacobians.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::crn::PolynomialOde;

type RhsFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
type JacFn = dyn Fn(f64, &[f64], &mut DMatrix<f64>) + Send + Sync;

/// A right-hand side `f(t, s)` over named state components, with an
/// optional analytic Jacobian `df/ds`. Immutable and shareable across
/// threads; evaluation is pure.
#[derive(Clone)]
pub struct OdeSystem {
    names: Vec<String>,
    rhs: Arc<RhsFn>,
    jacobian: Option<Arc<JacFn>>,
}

impl OdeSystem {
    pub fn new(
        names: Vec<String>,
        rhs: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            names,
            rhs: Arc::new(rhs),
            jacobian: None,
        }
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(f64, &[f64], &mut DMatrix<f64>) + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    /// Compile a polynomial system into an index-based evaluator with the
    /// exact analytic Jacobian assembled term by term.
    pub fn from_polynomials(ode: &PolynomialOde) -> Self {
        let names = ode.species().to_vec();
        let terms = Arc::new(compile(ode));
        let eval_terms = Arc::clone(&terms);
        let jac_terms = Arc::clone(&terms);
        let n = names.len();
        Self {
            names,
            rhs: Arc::new(move |_t, s, out| {
                for (i, eq) in eval_terms.iter().enumerate() {
                    out[i] = eq
                        .iter()
                        .map(|term| {
                            term.coeff
                                * term
                                    .factors
                                    .iter()
                                    .map(|&(j, e)| s[j].powi(e as i32))
                                    .product::<f64>()
                        })
                        .sum();
                }
            }),
            jacobian: Some(Arc::new(move |_t, s, jac| {
                jac.fill(0.0);
                for (i, eq) in jac_terms.iter().enumerate() {
                    for term in eq {
                        for (k, &(j, e)) in term.factors.iter().enumerate() {
                            // d/ds_j of the term: e * s_j^(e-1) * rest.
                            let mut d = term.coeff * e as f64 * s[j].powi(e as i32 - 1);
                            for (k2, &(j2, e2)) in term.factors.iter().enumerate() {
                                if k2 != k {
                                    d *= s[j2].powi(e2 as i32);
                                }
                            }
                            jac[(i, j)] += d;
                        }
                    }
                }
                debug_assert_eq!(jac.nrows(), n);
            })),
        }
    }

    pub fn dimension(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn eval(&self, t: f64, s: &[f64], out: &mut [f64]) {
        (self.rhs)(t, s, out);
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// Analytic Jacobian when available, forward finite differences
    /// otherwise.
    pub fn eval_jacobian(&self, t: f64, s: &[f64], jac: &mut DMatrix<f64>) {
        if let Some(j) = &self.jacobian {
            j(t, s, jac);
            return;
        }
        let n = self.dimension();
        let mut f0 = vec![0.0; n];
        let mut f1 = vec![0.0; n];
        let mut sp = s.to_vec();
        self.eval(t, s, &mut f0);
        for col in 0..n {
            let h = (s[col].abs().max(1e-5)) * 1e-8;
            sp[col] = s[col] + h;
            self.eval(t, &sp, &mut f1);
            sp[col] = s[col];
            for row in 0..n {
                jac[(row, col)] = (f1[row] - f0[row]) / h;
            }
        }
    }
}

struct Term {
    coeff: f64,
    factors: Vec<(usize, u32)>,
}

fn compile(ode: &PolynomialOde) -> Vec<Vec<Term>> {
    let index: std::collections::BTreeMap<&str, usize> = ode
        .species()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    ode.equations()
        .iter()
        .map(|eq| {
            eq.iter()
                .map(|m| Term {
                    coeff: m.coeff,
                    factors: m
                        .exps
                        .iter()
                        .map(|(name, &e)| (index[name.as_str()], e))
                        .collect(),
                })
                .collect()
        })
        .collect()
}
