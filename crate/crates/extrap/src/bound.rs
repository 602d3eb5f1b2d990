//! Parametrised discretisation-error bounds `b` with `b(0) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// One term of a multivariate polynomial bound: `coeff · Π x_i^{exponents[i]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub coeff: f64,
    pub exponents: Vec<f64>,
}

/// Error-bound families. All variants vanish at the origin and are
/// positive on the open positive orthant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ErrorBound {
    /// `x_axis^order` in a single coordinate.
    Monomial {
        order: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `Σ weights_i · x_i^{orders_i}`.
    Additive { weights: Vec<f64>, orders: Vec<f64> },
    /// `Π x_i^{orders_i}`.
    Product { orders: Vec<f64> },
    /// Arbitrary positive combination of monomial terms.
    Polynomial { terms: Vec<PolyTerm> },
}

impl ErrorBound {
    pub fn monomial(order: f64) -> Self {
        ErrorBound::Monomial { order, axis: 0 }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |name: &str, reason: String| Error::InvalidParameter {
            name: name.into(),
            reason,
        };
        match self {
            ErrorBound::Monomial { order, axis } => {
                if !(*order > 0.0) {
                    return Err(bad("order", format!("must be positive, got {order}")));
                }
                if *axis >= dim {
                    return Err(bad(
                        "axis",
                        format!("axis {axis} out of range for dim {dim}"),
                    ));
                }
            }
            ErrorBound::Additive { weights, orders } => {
                if weights.len() != dim || orders.len() != dim {
                    return Err(bad(
                        "weights/orders",
                        format!("need {dim} entries, got {}/{}", weights.len(), orders.len()),
                    ));
                }
                if weights.iter().any(|w| !(*w > 0.0)) || orders.iter().any(|r| !(*r > 0.0)) {
                    return Err(bad("weights/orders", "must all be positive".into()));
                }
            }
            ErrorBound::Product { orders } => {
                if orders.len() != dim {
                    return Err(bad(
                        "orders",
                        format!("need {dim} entries, got {}", orders.len()),
                    ));
                }
                if orders.iter().any(|r| !(*r > 0.0)) {
                    return Err(bad("orders", "must all be positive".into()));
                }
            }
            ErrorBound::Polynomial { terms } => {
                if terms.is_empty() {
                    return Err(bad("terms", "at least one term required".into()));
                }
                for (k, t) in terms.iter().enumerate() {
                    if t.exponents.len() != dim {
                        return Err(bad(
                            "terms",
                            format!("term {k}: need {dim} exponents, got {}", t.exponents.len()),
                        ));
                    }
                    if !(t.coeff > 0.0) {
                        return Err(bad(
                            "terms",
                            format!("term {k}: coefficient must be positive"),
                        ));
                    }
                    // A term with all-zero exponents would break b(0) = 0.
                    if !t.exponents.iter().any(|e| *e > 0.0) {
                        return Err(bad(
                            "terms",
                            format!(
                                "term {k}: needs a positive exponent so the bound vanishes at 0"
                            ),
                        ));
                    }
                    if t.exponents.iter().any(|e| *e < 0.0) {
                        return Err(bad(
                            "terms",
                            format!("term {k}: exponents must be nonnegative"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_in::<f64>(&x.iter().map(|&v| v).collect::<Vec<_>>())
    }

    pub fn eval_in<T: Real>(&self, x: &[T]) -> T {
        match self {
            ErrorBound::Monomial { order, axis } => x[*axis].powf(*order),
            ErrorBound::Additive { weights, orders } => {
                let mut acc = T::zero();
                for i in 0..x.len() {
                    acc = acc.add(&T::of(weights[i]).mul(&x[i].powf(orders[i])));
                }
                acc
            }
            ErrorBound::Product { orders } => {
                let mut acc = T::one();
                for i in 0..x.len() {
                    acc = acc.mul(&x[i].powf(orders[i]));
                }
                acc
            }
            ErrorBound::Polynomial { terms } => {
                let mut acc = T::zero();
                for t in terms {
                    let mut term = T::of(t.coeff);
                    for i in 0..x.len() {
                        if t.exponents[i] != 0.0 {
                            term = term.mul(&x[i].powf(t.exponents[i]));
                        }
                    }
                    acc = acc.add(&term);
                }
                acc
            }
        }
    }
}
