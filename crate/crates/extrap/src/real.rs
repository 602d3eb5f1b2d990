//! Scalar abstraction over `f64` and software multi-precision floats.
//!
//! The convergence-study harness evaluates oracles and solves the model
//! linear systems in either native double precision or an extended
//! precision selected at runtime. All code that must run in both modes is
//! generic over [`Real`].

use std::cell::{Cell, RefCell};

use astro_float::{BigFloat, Consts, RoundingMode, Sign};

const RM: RoundingMode = RoundingMode::ToEven;

/// Arithmetic precision for study runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Precision {
    Double,
    /// Software floats carrying roughly the given number of significant
    /// decimal digits.
    Extended(u32),
}

impl Precision {
    /// Unit roundoff of this arithmetic, used for error floors.
    pub fn epsilon(self) -> f64 {
        match self {
            Precision::Double => f64::EPSILON,
            Precision::Extended(digits) => 10f64.powi(-(digits as i32)),
        }
    }
}

/// Minimal scalar interface needed by the kernel, bound and solve paths.
///
/// Operations take references so that the multi-precision implementation
/// avoids implicit copies of heap-allocated mantissas.
pub trait Real: Clone + PartialOrd + std::fmt::Debug + Send + Sync {
    fn of(v: f64) -> Self;
    fn to_f64(&self) -> f64;

    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn abs(&self) -> Self;

    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;

    fn powi(&self, n: i64) -> Self;
    /// `self^e` for strictly positive `self`.
    fn powf(&self, e: f64) -> Self;

    fn zero() -> Self {
        Self::of(0.0)
    }
    fn one() -> Self {
        Self::of(1.0)
    }
    fn is_finite(&self) -> bool;
}

impl Real for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn powi(&self, n: i64) -> Self {
        f64::powi(*self, n as i32)
    }
    fn powf(&self, e: f64) -> Self {
        f64::powf(*self, e)
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

thread_local! {
    static PREC_BITS: Cell<usize> = const { Cell::new(192) };
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constants cache"));
}

/// Set the working mantissa width (bits) for [`MpFloat`] on the current
/// thread. Call this at the start of any task that creates `MpFloat`s;
/// thread pools do not inherit the setting from the spawning thread.
pub fn set_precision_bits(bits: usize) {
    PREC_BITS.with(|p| p.set(bits.max(64)));
}

/// Mantissa width corresponding to a decimal digit count, with guard bits.
pub fn bits_for_digits(digits: u32) -> usize {
    (digits as f64 * std::f64::consts::LOG2_10).ceil() as usize + 32
}

fn prec() -> usize {
    PREC_BITS.with(|p| p.get())
}

/// Arbitrary-precision float with thread-local working precision.
#[derive(Clone, Debug)]
pub struct MpFloat(BigFloat);

impl MpFloat {
    pub fn raw(&self) -> &BigFloat {
        &self.0
    }
}

impl PartialEq for MpFloat {
    fn eq(&self, other: &Self) -> bool {
        self.0.cmp(&other.0) == Some(0)
    }
}

impl PartialOrd for MpFloat {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.0.cmp(&other.0).map(|c| c.cmp(&0))
    }
}

impl Real for MpFloat {
    fn of(v: f64) -> Self {
        MpFloat(BigFloat::from_f64(v, prec()))
    }

    fn to_f64(&self) -> f64 {
        if self.0.is_nan() {
            return f64::NAN;
        }
        if self.0.is_inf_pos() {
            return f64::INFINITY;
        }
        if self.0.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        // Decimal round-trip: Display emits enough digits and Rust's parser
        // rounds correctly, so this is exact to the nearest double.
        format!("{}", self.0).parse().unwrap_or(f64::NAN)
    }

    fn add(&self, o: &Self) -> Self {
        MpFloat(self.0.add(&o.0, prec(), RM))
    }
    fn sub(&self, o: &Self) -> Self {
        MpFloat(self.0.sub(&o.0, prec(), RM))
    }
    fn mul(&self, o: &Self) -> Self {
        MpFloat(self.0.mul(&o.0, prec(), RM))
    }
    fn div(&self, o: &Self) -> Self {
        MpFloat(self.0.div(&o.0, prec(), RM))
    }
    fn neg(&self) -> Self {
        MpFloat(self.0.neg())
    }
    fn abs(&self) -> Self {
        MpFloat(self.0.abs())
    }
    fn sqrt(&self) -> Self {
        MpFloat(self.0.sqrt(prec(), RM))
    }
    fn exp(&self) -> Self {
        CONSTS.with(|cc| MpFloat(self.0.exp(prec(), RM, &mut cc.borrow_mut())))
    }
    fn ln(&self) -> Self {
        CONSTS.with(|cc| MpFloat(self.0.ln(prec(), RM, &mut cc.borrow_mut())))
    }
    fn sin(&self) -> Self {
        CONSTS.with(|cc| MpFloat(self.0.sin(prec(), RM, &mut cc.borrow_mut())))
    }
    fn cos(&self) -> Self {
        CONSTS.with(|cc| MpFloat(self.0.cos(prec(), RM, &mut cc.borrow_mut())))
    }

    fn powi(&self, n: i64) -> Self {
        // Exponentiation by squaring keeps this exact for integer powers of
        // exactly-representable bases.
        let mut result = <MpFloat as Real>::one();
        let mut base = if n < 0 {
            <MpFloat as Real>::one().div(self)
        } else {
            self.clone()
        };
        let mut e = n.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        result
    }

    fn powf(&self, e: f64) -> Self {
        if e == 0.0 {
            return <MpFloat as Real>::one();
        }
        if e.fract() == 0.0 && e.abs() < 1e15 {
            return self.powi(e as i64);
        }
        if self.0.is_zero() {
            return <MpFloat as Real>::zero();
        }
        self.ln().mul(&<MpFloat as Real>::of(e)).exp()
    }

    fn is_finite(&self) -> bool {
        !(self.0.is_nan() || self.0.is_inf())
    }
}

impl MpFloat {
    pub fn sign(&self) -> Option<Sign> {
        self.0.sign()
    }
}
