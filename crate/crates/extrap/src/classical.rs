//! Classical sequence transformations: the unified E-algorithm and its
//! named instances, used as extrapolation baselines.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A convergent sequence of approximations, optionally tagged with the
/// discretisation parameters that generated it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    /// Strictly decreasing discretisation parameters, when known.
    pub x: Option<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Sequence {
    pub fn values(y: Vec<f64>) -> Result<Self> {
        let s = Sequence { x: None, y };
        s.validate()?;
        Ok(s)
    }

    pub fn with_x(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let s = Sequence { x: Some(x), y };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.y.is_empty() {
            return Err(Error::InvalidData(
                "sequence must have at least one term".into(),
            ));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("sequence values must be finite".into()));
        }
        if let Some(x) = &self.x {
            if x.len() != self.y.len() {
                return Err(Error::InvalidData(format!(
                    "{} x values for {} sequence terms",
                    x.len(),
                    self.y.len()
                )));
            }
            if !x.windows(2).all(|w| w[0] > w[1]) {
                return Err(Error::InvalidData(
                    "discretisation parameters must be strictly decreasing".into(),
                ));
            }
        }
        Ok(())
    }

    /// Read the `x,y` (or `y`-only) CSV form.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        let has_x = match cols.as_slice() {
            ["x", "y"] => true,
            ["y"] => false,
            other => {
                return Err(Error::InvalidData(format!(
                    "expected header x,y (or just y), got {}",
                    other.join(",")
                )))
            }
        };
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let parse = |i: usize| -> Result<f64> {
                record
                    .get(i)
                    .ok_or_else(|| Error::InvalidData(format!("row {row}: missing column {i}")))?
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidData(format!("row {row}: {e}")))
            };
            if has_x {
                x.push(parse(0)?);
                y.push(parse(1)?);
            } else {
                y.push(parse(0)?);
            }
        }
        if has_x {
            Sequence::with_x(x, y)
        } else {
            Sequence::values(y)
        }
    }

    /// Render as `x,y` CSV (empty x column when parameters are unknown).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("x,y\n");
        for (i, y) in self.y.iter().enumerate() {
            let x = self
                .x
                .as_ref()
                .map(|x| crate::data::fmt_float(x[i]))
                .unwrap_or_default();
            out.push_str(&format!("{x},{}\n", crate::data::fmt_float(*y)));
        }
        out
    }

    fn require_x(&self) -> Result<&[f64]> {
        self.x.as_deref().ok_or_else(|| {
            Error::InvalidData("this transform needs discretisation parameters x".into())
        })
    }
}

/// Ansatz basis for the E-algorithm: the model is
/// `y_m = limit + Σ_i a_i g_i(m)`.
pub enum BasisSpec {
    /// `g_i(m) = x_m^i` for `i = 1..=count` (polynomial extrapolation).
    RichardsonPowers { count: usize },
    /// `g_1(m) = y_{m+1} - y_m`.
    Shanks,
    /// `g_i(m) = (y_{m+1} - y_m)^i` for `i = 1..=count`.
    GermainBonne { count: usize },
    /// `g_i(m) = x_m^i`, `g_{p+i}(m) = y_m x_m^i` for `i = 1..=p`
    /// (rational extrapolation).
    Thiele { p: usize },
    /// User-supplied basis functions of the index `m`.
    Custom(Vec<Box<dyn Fn(usize) -> f64 + Sync>>),
}

impl BasisSpec {
    fn count(&self) -> usize {
        match self {
            BasisSpec::RichardsonPowers { count } => *count,
            BasisSpec::Shanks => 1,
            BasisSpec::GermainBonne { count } => *count,
            BasisSpec::Thiele { p } => 2 * p,
            BasisSpec::Custom(fns) => fns.len(),
        }
    }

    /// Highest sequence index read when instantiating the ansatz on rows
    /// `m..m+rows`.
    fn max_index(&self, m: usize, rows: usize) -> usize {
        let last_row = m + rows - 1;
        match self {
            BasisSpec::Shanks | BasisSpec::GermainBonne { .. } => last_row + 1,
            _ => last_row,
        }
    }

    fn eval(&self, seq: &Sequence, i: usize, m: usize) -> Result<f64> {
        Ok(match self {
            BasisSpec::RichardsonPowers { .. } => seq.require_x()?[m].powi(i as i32 + 1),
            BasisSpec::Shanks => seq.y[m + 1] - seq.y[m],
            BasisSpec::GermainBonne { .. } => (seq.y[m + 1] - seq.y[m]).powi(i as i32 + 1),
            BasisSpec::Thiele { p } => {
                let x = seq.require_x()?[m];
                if i < *p {
                    x.powi(i as i32 + 1)
                } else {
                    seq.y[m] * x.powi((i - p) as i32 + 1)
                }
            }
            BasisSpec::Custom(fns) => fns[i](m),
        })
    }
}

/// Solve the ansatz on rows `m..m+n` for the limit, where `n` is one more
/// than the number of basis functions. This is a linear solve, not the
/// literal determinant ratio — the two are identical in exact arithmetic
/// and the solve is far better conditioned.
pub fn e_algorithm(seq: &Sequence, basis: &BasisSpec, m: usize) -> Result<f64> {
    seq.validate()?;
    let n = basis.count() + 1;
    if basis.max_index(m, n) >= seq.len() {
        return Err(Error::InvalidData(format!(
            "need sequence index {} but only {} terms are available",
            basis.max_index(m, n),
            seq.len()
        )));
    }
    if n == 1 {
        return Ok(seq.y[m]);
    }
    let mut a = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for row in 0..n {
        a[(row, 0)] = 1.0;
        for i in 0..(n - 1) {
            a[(row, i + 1)] = basis.eval(seq, i, m + row)?;
        }
        rhs[row] = seq.y[m + row];
    }
    let scale = rhs.amax().max(1.0);
    let qr = a.clone().col_piv_qr();
    let solution = qr
        .solve(&rhs)
        .ok_or_else(|| Error::DegenerateBasis("ansatz system is singular".into()))?;
    if !solution.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateBasis(
            "ansatz solution is not finite".into(),
        ));
    }
    let residual = (&a * &solution - &rhs).amax();
    if residual > 1e-6 * scale {
        return Err(Error::DegenerateBasis(format!(
            "ansatz system is numerically singular (residual {residual:e})"
        )));
    }
    Ok(solution[0])
}

/// Elimination tableau for power-law error expansions: Neville–Aitken
/// polynomial extrapolation to the origin in the variable `u = x^r`, so
/// stage `k` removes the `x^{r(k+1)}` error term exactly on any node
/// sequence. With `r = 1` this is plain polynomial extrapolation (exact
/// on polynomial data); with `r = 2` it is the classical treatment of
/// even error expansions. Entry `j` of the output is labelled with the
/// window-opening `x_j`.
pub fn richardson(seq: &Sequence, r: u32, depth: usize) -> Result<Sequence> {
    seq.validate()?;
    let x = seq.require_x()?.to_vec();
    if seq.len() < 2 {
        return Err(Error::InvalidData("need at least two terms".into()));
    }
    if r == 0 {
        return Err(Error::InvalidParameter {
            name: "r".into(),
            reason: "elimination order must be positive".into(),
        });
    }
    if depth == 0 || depth >= seq.len() {
        return Err(Error::InvalidParameter {
            name: "depth".into(),
            reason: format!("depth must lie in 1..={}", seq.len() - 1),
        });
    }
    let u: Vec<f64> = x.iter().map(|v| v.powi(r as i32)).collect();
    let mut current = seq.y.clone();
    for k in 0..depth {
        let mut next = Vec::with_capacity(current.len() - 1);
        for j in 0..current.len() - 1 {
            let wa = u[j];
            let wb = u[j + k + 1];
            let den = wa - wb;
            if den == 0.0 {
                return Err(Error::DegenerateBasis(
                    "repeated discretisation parameters in tableau".into(),
                ));
            }
            next.push((wa * current[j + 1] - wb * current[j]) / den);
        }
        current = next;
    }
    Sequence::with_x(x[..current.len()].to_vec(), current)
}

/// Closed-form Shanks transformation with a zero-denominator guard.
/// Guarded entries are dropped, so the output can be shorter than
/// `len - 2`.
pub fn shanks(seq: &Sequence) -> Result<Sequence> {
    seq.validate()?;
    if seq.len() < 3 {
        return Err(Error::InvalidData("need at least three terms".into()));
    }
    let y = &seq.y;
    let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut out_x = Vec::new();
    let mut out_y = Vec::new();
    for m in 0..y.len() - 2 {
        let den = y[m] - 2.0 * y[m + 1] + y[m + 2];
        if den.abs() < 1e-14 * scale {
            continue; // undefined entry
        }
        out_y.push((y[m] * y[m + 2] - y[m + 1] * y[m + 1]) / den);
        if let Some(x) = &seq.x {
            out_x.push(x[m]);
        }
    }
    if out_y.is_empty() {
        return Err(Error::DegenerateBasis(
            "every transformed entry had a vanishing denominator".into(),
        ));
    }
    Ok(Sequence {
        x: seq.x.as_ref().map(|_| out_x),
        y: out_y,
    })
}

/// E-algorithm with the difference-power basis of size `n - 1`.
pub fn germain_bonne(seq: &Sequence, n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParameter {
            name: "n".into(),
            reason: "order must be at least 1".into(),
        });
    }
    e_algorithm(seq, &BasisSpec::GermainBonne { count: n - 1 }, 0)
}

/// Rational extrapolation: exact at the origin for data on a
/// degree-(p, p) rational function.
pub fn thiele(seq: &Sequence, p: usize) -> Result<f64> {
    e_algorithm(seq, &BasisSpec::Thiele { p }, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn e_algorithm_identity_and_exact_ansatz() {
        // n = 1: identity transform.
        let seq = Sequence::values(vec![4.0, 3.0, 2.5]).unwrap();
        let basis = BasisSpec::Custom(vec![]);
        assert_eq!(e_algorithm(&seq, &basis, 1).unwrap(), 3.0);

        // Exact one-term ansatz y_m = 5 + 3 g(m) for a known g.
        let g = |m: usize| 1.0 / (m as f64 + 1.0);
        let y: Vec<f64> = (0..4).map(|m| 5.0 + 3.0 * g(m)).collect();
        let seq = Sequence::values(y).unwrap();
        let basis = BasisSpec::Custom(vec![Box::new(g)]);
        assert_relative_eq!(
            e_algorithm(&seq, &basis, 0).unwrap(),
            5.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            e_algorithm(&seq, &basis, 1).unwrap(),
            5.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn e_algorithm_richardson_basis_on_quadratic() {
        // y = 1 + x + x² over x = {1, 1/2, 1/4}: basis of size 2 recovers 1.
        let x = vec![1.0, 0.5, 0.25];
        let y: Vec<f64> = x.iter().map(|&v| 1.0 + v + v * v).collect();
        let seq = Sequence::with_x(x, y).unwrap();
        let s = e_algorithm(&seq, &BasisSpec::RichardsonPowers { count: 2 }, 0).unwrap();
        assert_relative_eq!(s, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn richardson_two_point_cases() {
        // First-order data at x = {2h, h}: intercept is 2 f(h) - f(2h).
        let (f0, c1, h) = (3.0, 2.0, 0.1);
        let seq = Sequence::with_x(vec![2.0 * h, h], vec![f0 + c1 * 2.0 * h, f0 + c1 * h]).unwrap();
        let out = richardson(&seq, 1, 1).unwrap();
        assert_relative_eq!(out.y[0], f0, max_relative = 1e-13);

        // f(h) = 1 + h², r = 2 at x = {1, 1/2}: exact in one stage.
        let seq = Sequence::with_x(vec![1.0, 0.5], vec![2.0, 1.25]).unwrap();
        let out = richardson(&seq, 2, 1).unwrap();
        assert_relative_eq!(out.y[0], 1.0, max_relative = 1e-14);

        // Constant sequences stay constant.
        let seq = Sequence::with_x(vec![1.0, 0.5, 0.25], vec![7.0, 7.0, 7.0]).unwrap();
        let out = richardson(&seq, 1, 2).unwrap();
        assert_relative_eq!(out.y[0], 7.0, max_relative = 1e-14);
    }

    #[test]
    fn richardson_polynomial_exactness_class() {
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..100 {
            let k = rng.random_range(1..=4usize);
            let coeffs: Vec<f64> = (0..=k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut x: Vec<f64> = (0..=k).map(|_| rng.random_range(0.05..1.0)).collect();
            x.sort_by(|a, b| b.partial_cmp(a).unwrap());
            x.dedup_by(|a, b| (*a - *b).abs() < 1e-4);
            if x.len() < k + 1 {
                continue;
            }
            let y: Vec<f64> = x
                .iter()
                .map(|&v| {
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(i, c)| c * v.powi(i as i32))
                        .sum()
                })
                .collect();
            let seq = Sequence::with_x(x, y).unwrap();
            let out = richardson(&seq, 1, k).unwrap();
            assert!(
                (out.y[0] - coeffs[0]).abs() <= 1e-10 * coeffs[0].abs().max(1.0),
                "degree-{k} polynomial: got {} expected {}",
                out.y[0],
                coeffs[0]
            );
        }
    }

    #[test]
    fn richardson_tableau_matches_e_algorithm() {
        let x = vec![1.0, 0.7, 0.45, 0.3, 0.2];
        let y: Vec<f64> = x.iter().map(|&v: &f64| 2.0 + v.sin()).collect();
        let seq = Sequence::with_x(x, y).unwrap();
        for k in 1..=4usize {
            let tab = richardson(&seq, 1, k).unwrap();
            let ea = e_algorithm(&seq, &BasisSpec::RichardsonPowers { count: k }, 0).unwrap();
            assert!(
                (tab.y[0] - ea).abs() <= 1e-9 * ea.abs().max(1.0),
                "depth {k}: tableau {} vs e-algorithm {ea}",
                tab.y[0]
            );
        }
    }

    #[test]
    fn richardson_rejects_bad_input() {
        let seq = Sequence::values(vec![1.0, 2.0]).unwrap();
        assert!(richardson(&seq, 1, 1).is_err()); // no x
        assert!(Sequence::with_x(vec![0.5, 0.5], vec![1.0, 2.0]).is_err()); // repeated x
    }

    #[test]
    fn shanks_exact_on_geometric_remainder() {
        // y_m = 1 + 2 (1/2)^m: values 3, 2, 1.5.
        let seq = Sequence::values(vec![3.0, 2.0, 1.5]).unwrap();
        let out = shanks(&seq).unwrap();
        assert_relative_eq!(out.y[0], 1.0, max_relative = 1e-13);

        // General A + B q^m, random instances.
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..100 {
            let a = rng.random_range(-3.0..3.0);
            let b = rng.random_range(0.5..2.0);
            let q: f64 = rng.random_range(0.2..0.9);
            let y: Vec<f64> = (0..5).map(|m| a + b * q.powi(m)).collect();
            let out = shanks(&Sequence::values(y).unwrap()).unwrap();
            for v in &out.y {
                assert!(
                    (v - a).abs() <= 1e-10 * a.abs().max(1.0),
                    "limit {a}, got {v}"
                );
            }
        }
    }

    #[test]
    fn shanks_degenerate_and_guards() {
        // Arithmetic sequence: second difference is identically zero.
        let seq = Sequence::values(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(shanks(&seq).is_err());

        // Mixed: one good window, one degenerate window.
        let seq = Sequence::values(vec![3.0, 2.0, 1.5, 1.0, 0.5]).unwrap();
        let out = shanks(&seq).unwrap();
        assert!(out.y.len() < seq.len() - 2 + 1);
    }

    #[test]
    fn shanks_accelerates_leibniz() {
        // Partial sums of the alternating series for pi/4.
        let partial: Vec<f64> = (0..3)
            .map(|m| {
                (0..=m)
                    .map(|k| (-1.0f64).powi(k) / (2.0 * k as f64 + 1.0))
                    .sum()
            })
            .collect();
        let target = std::f64::consts::FRAC_PI_4;
        let out = shanks(&Sequence::values(partial.clone()).unwrap()).unwrap();
        assert!((out.y[0] - target).abs() < (partial[2] - target).abs());
    }

    #[test]
    fn germain_bonne_cases() {
        // Exact one-term ansatz: e_{m+1} = e_m (1 + 1/a).
        let (f0, a) = (2.0, -3.0);
        let mut y = vec![f0 + 1.0];
        for _ in 0..4 {
            let e = y.last().unwrap() - f0;
            y.push(f0 + e * (1.0 + 1.0 / a));
        }
        let seq = Sequence::values(y).unwrap();
        assert_relative_eq!(germain_bonne(&seq, 2).unwrap(), f0, max_relative = 1e-10);

        // Constant sequence: basis vanishes, the system is singular.
        let seq = Sequence::values(vec![1.0; 5]).unwrap();
        assert!(germain_bonne(&seq, 2).is_err());

        // Pure geometric remainder with order 3.
        let y: Vec<f64> = (0..6).map(|m| 4.0 + 1.5 * 0.4f64.powi(m)).collect();
        let seq = Sequence::values(y).unwrap();
        assert_relative_eq!(germain_bonne(&seq, 3).unwrap(), 4.0, max_relative = 1e-9);
    }

    #[test]
    fn thiele_rational_and_polynomial() {
        // Data on (1+x)/(1+2x) with p = 1: value at 0 is exactly 1.
        let x = vec![1.0, 0.5, 0.25];
        let y: Vec<f64> = x.iter().map(|&v| (1.0 + v) / (1.0 + 2.0 * v)).collect();
        let seq = Sequence::with_x(x, y).unwrap();
        assert_relative_eq!(thiele(&seq, 1).unwrap(), 1.0, max_relative = 1e-12);

        // p = 0 is the identity.
        assert_eq!(thiele(&seq, 0).unwrap(), seq.y[0]);

        // Polynomial data of degree <= p is in the span.
        let x = vec![1.0, 0.8, 0.6, 0.4, 0.2];
        let y: Vec<f64> = x.iter().map(|&v| 2.0 - 0.5 * v).collect();
        let seq = Sequence::with_x(x.clone(), y).unwrap();
        assert_relative_eq!(thiele(&seq, 1).unwrap(), 2.0, max_relative = 1e-10);
        let y2: Vec<f64> = x.iter().map(|&v| 1.0 + v - 0.3 * v * v).collect();
        let seq2 = Sequence::with_x(x, y2).unwrap();
        assert_relative_eq!(thiele(&seq2, 2).unwrap(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn affine_equivariance() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..30 {
            let n = 6;
            let mut x: Vec<f64> = (0..n).map(|i| 1.0 / (i as f64 + 1.0)).collect();
            x.sort_by(|p, q| q.partial_cmp(p).unwrap());
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = rng.random_range(0.5..3.0);
            let b = rng.random_range(-2.0..2.0);
            let ya: Vec<f64> = y.iter().map(|v| a * v + b).collect();

            let s0 = Sequence::with_x(x.clone(), y.clone()).unwrap();
            let s1 = Sequence::with_x(x.clone(), ya.clone()).unwrap();

            // Richardson is affine equivariant entry by entry.
            let r0 = richardson(&s0, 1, 3).unwrap();
            let r1 = richardson(&s1, 1, 3).unwrap();
            for (u, v) in r0.y.iter().zip(&r1.y) {
                assert_relative_eq!(a * u + b, *v, max_relative = 1e-9, epsilon = 1e-9);
            }

            // Shanks via its closed form (guards permitting).
            if let (Ok(t0), Ok(t1)) = (
                shanks(&Sequence::values(y.clone()).unwrap()),
                shanks(&Sequence::values(ya).unwrap()),
            ) {
                if t0.y.len() == t1.y.len() {
                    for (u, v) in t0.y.iter().zip(&t1.y) {
                        assert_relative_eq!(a * u + b, *v, max_relative = 1e-8, epsilon = 1e-8);
                    }
                }
            }
        }
    }
}
