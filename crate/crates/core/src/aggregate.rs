//! Folding a bounded equality system into a single knapsack equation.
//!
//! With `Δ` the largest absolute coefficient, `U = Σ u_j` and
//! `M = Δ·U + max(‖b‖∞, ‖u‖∞) + Δ + 2`, row `i` is weighted by `M^i`, the
//! bound row `x_j + y_j = u_j` by `M^(k+j)`, and the row summing all bounds by
//! `M^(k+d)`. The base is large enough that no digit ever carries, so the
//! single equation holds exactly when every original row does.

use std::fmt::Write as _;
use std::sync::Arc;

use num_integer::Integer;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::ilp::{check_solution, IlpError, IlpSystem};
use crate::{Int, Nat};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AggregateError {
    #[error("vector is not a feasible solution of the system")]
    Infeasible,
    #[error(transparent)]
    Ilp(#[from] IlpError),
    #[error("aggregated membership {aggregated} disagrees with original membership {original}")]
    Mismatch { aggregated: bool, original: bool },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregatedEquation {
    /// Coefficients: the `d` original variables, then `y_1..=y_{d+1}`.
    pub s: Arc<Vec<Nat>>,
    pub b: Nat,
    pub m: Nat,
    pub u: Nat,
    pub delta: Nat,
    /// Original row count.
    pub k: usize,
    /// Original variable count.
    pub d: usize,
}

/// Original values plus the bound slacks `y_1..=y_{d+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LiftedVector {
    pub x: Vec<Nat>,
    pub y: Vec<Nat>,
}

impl LiftedVector {
    /// `x` followed by `y`, matching the coefficient order.
    pub fn flat(&self) -> Vec<Nat> {
        self.x.iter().chain(self.y.iter()).cloned().collect()
    }
}

pub fn aggregate(sys: &IlpSystem) -> AggregatedEquation {
    let k = sys.num_rows();
    let d = sys.num_vars();
    let uppers = sys.uppers();
    let delta = sys.max_coeff();
    let u: Nat = uppers.iter().sum();
    let norm = sys.max_rhs().max(uppers.iter().max().cloned().unwrap_or_default());
    let m = &delta * &u + norm + &delta + 2u32;

    let mut pows = Vec::with_capacity(k + d + 1);
    let mut p = Nat::one();
    for _ in 0..=k + d {
        pows.push(p.clone());
        p *= &m;
    }
    let top = &pows[k + d];

    let mut cols = vec![Int::zero(); d];
    let mut rhs = Int::zero();
    for (i, row) in sys.rows.iter().enumerate() {
        let w = Int::from(pows[i].clone());
        for (v, a) in &row.terms {
            cols[*v] += a * &w;
        }
        rhs += &row.rhs * &w;
    }

    let mut s = Vec::with_capacity(2 * d + 1);
    for (j, c) in cols.into_iter().enumerate() {
        let v = c + Int::from(&pows[k + j] + top);
        s.push(v.to_biguint().expect("bound weights dominate row weights"));
    }
    for j in 0..d {
        s.push(&pows[k + j] + top);
    }
    s.push(top.clone());

    let mut b = rhs.to_biguint().expect("aggregated right-hand side is non-negative");
    for (j, uj) in uppers.iter().enumerate() {
        b += uj * &pows[k + j];
    }
    b += &u * top;

    AggregatedEquation { s: Arc::new(s), b, m, u, delta, k, d }
}

impl AggregatedEquation {
    /// `sᵀv` over a flat vector of length `2d + 1`.
    pub fn dot(&self, v: &[Nat]) -> Nat {
        assert_eq!(v.len(), self.s.len(), "vector length");
        self.s.iter().zip(v).filter(|(_, x)| !x.is_zero()).map(|(s, x)| s * x).sum()
    }

    pub fn satisfied_by(&self, v: &LiftedVector) -> bool {
        v.x.len() == self.d && v.y.len() == self.d + 1 && self.dot(&v.flat()) == self.b
    }

    /// Base-`M` digits, least significant first.
    pub fn digits(&self, value: &Nat) -> Vec<Nat> {
        let mut out = Vec::new();
        let mut v = value.clone();
        while !v.is_zero() {
            let (q, r) = v.div_rem(&self.m);
            out.push(r);
            v = q;
        }
        out
    }

    /// `s_1 ... s_D = B`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (j, s) in self.s.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{s}");
        }
        let _ = writeln!(out, " = {}", self.b);
        out
    }

    /// Non-zero base-`M` digits of `B` and each coefficient, as `pos:digit`.
    pub fn dump_digits(&self) -> String {
        let mut out = format!("M {}\nk {} d {}\n", self.m, self.k, self.d);
        let mut line = |label: String, v: &Nat| {
            let _ = write!(out, "{label}");
            for (p, dg) in self.digits(v).iter().enumerate() {
                if !dg.is_zero() {
                    let _ = write!(out, " {p}:{dg}");
                }
            }
            out.push('\n');
        };
        line("B".into(), &self.b);
        for (j, s) in self.s.iter().enumerate() {
            line(format!("s_{}", j + 1), s);
        }
        out
    }
}

/// `y_j = u_j - x_j`, `y_{d+1} = 0`.
pub fn lift(sys: &IlpSystem, x: &[Nat]) -> Result<LiftedVector, AggregateError> {
    if !check_solution(sys, x)? {
        return Err(AggregateError::Infeasible);
    }
    Ok(mechanical_lift(sys, x))
}

/// Lift without the feasibility check; requires `x <= u` componentwise.
pub fn mechanical_lift(sys: &IlpSystem, x: &[Nat]) -> LiftedVector {
    let mut y: Vec<Nat> = sys.registry.iter().zip(x).map(|(v, xj)| &v.upper - xj).collect();
    y.push(Nat::zero());
    LiftedVector { x: x.to_vec(), y }
}

/// Membership in the aggregated equation, checked against membership in the
/// original system with the unique slack completion. Disagreement is an error.
pub fn verify_roundtrip(sys: &IlpSystem, agg: &AggregatedEquation, v: &LiftedVector) -> Result<bool, AggregateError> {
    let aggregated = agg.satisfied_by(v);
    let original = v.x.len() == sys.num_vars()
        && v.y.len() == sys.num_vars() + 1
        && check_solution(sys, &v.x)?
        && v.y[..sys.num_vars()].iter().zip(sys.registry.iter()).zip(&v.x).all(|((y, var), x)| x + y == var.upper)
        && v.y[sys.num_vars()].is_zero();
    if aggregated != original {
        return Err(AggregateError::Mismatch { aggregated, original });
    }
    Ok(aggregated)
}
