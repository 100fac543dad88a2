//! Satisfying assignments to packings and back.
//!
//! A packing is described by `λ^(i) = (λ1..λ5)`: how many times each of the
//! five solution types of variable `i` is used. Types 1-3 pay for one clause
//! each, types 4 and 5 pay for none.

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::aggregate::{lift, AggregateError, LiftedVector};
use crate::binpack::{alpha_hat, beta_hat, y_hat, BinPackError, ChiGuess};
use crate::cnf::{Assignment, Lit, WellStructuredCnf};
use crate::encode::EncodingContext;
use crate::ilp::{make_solution, IlpError, IlpSystem};
use crate::Nat;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WitnessError {
    #[error("clause {clause} has no true literal")]
    UnsatAssignment { clause: usize },
    #[error("assignment has {got} values, formula has {expected} variables")]
    LengthMismatch { expected: usize, got: usize },
    #[error("lambda violates {0}")]
    BadLambda(String),
    #[error("configuration sum differs from the multiplicities at item {index}")]
    SumMismatch { index: usize },
    #[error("decoded assignment does not satisfy the formula")]
    DecodedUnsat,
    #[error(transparent)]
    Ilp(#[from] IlpError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error(transparent)]
    BinPack(#[from] BinPackError),
}

/// Chosen true literal per clause.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatisfierMap(pub Vec<Lit>);

/// Per-variable type counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LambdaCoeffs(pub Vec<[u32; 5]>);

impl Serialize for LambdaCoeffs {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl LambdaCoeffs {
    pub fn check_invariants(&self) -> Result<(), WitnessError> {
        for (i, l) in self.0.iter().enumerate() {
            if l[0] + l[1] + 2 * l[2] + l[3] != 2 {
                return Err(WitnessError::BadLambda(format!("second component of v{i}")));
            }
            if l[2] == 1 && (l[0] > 0 || l[1] > 0) {
                return Err(WitnessError::BadLambda(format!("negative payment of v{i} next to a positive one")));
            }
        }
        let total: u32 = self.0.iter().flatten().sum();
        if total as usize != 2 * self.0.len() {
            return Err(WitnessError::BadLambda(format!("{total} configurations instead of 2n")));
        }
        Ok(())
    }

    /// `χ̂_t = Σ_i λ_t^(i)` for `t = 1..=4`.
    pub fn implied_chi(&self) -> ChiGuess {
        let mut c = [0u32; 4];
        for l in &self.0 {
            for t in 0..4 {
                c[t] += l[t];
            }
        }
        ChiGuess(c)
    }

    /// `(i, type)` for each configuration, with repetition.
    pub fn configs(&self) -> Vec<(usize, u8)> {
        let mut out = Vec::new();
        for (i, l) in self.0.iter().enumerate() {
            for (t, &k) in l.iter().enumerate() {
                for _ in 0..k {
                    out.push((i, t as u8 + 1));
                }
            }
        }
        out
    }

    /// One line of five counts per variable.
    pub fn to_text(&self) -> String {
        self.0.iter().map(|l| format!("{} {} {} {} {}\n", l[0], l[1], l[2], l[3], l[4])).collect()
    }
}

/// Per clause, the true literal with the smallest variable index, positive
/// first on ties.
pub fn satisfier(ws: &WellStructuredCnf, phi: &Assignment) -> Result<SatisfierMap, WitnessError> {
    if phi.len() != ws.num_vars() {
        return Err(WitnessError::LengthMismatch { expected: ws.num_vars(), got: phi.len() });
    }
    let mut out = Vec::with_capacity(ws.num_clauses());
    for (ci, c) in ws.inner().clauses().iter().enumerate() {
        let best = c
            .iter()
            .filter(|l| l.eval(phi.values()))
            .min_by_key(|l| (l.var, !l.positive))
            .ok_or(WitnessError::UnsatAssignment { clause: ci })?;
        out.push(*best);
    }
    Ok(SatisfierMap(out))
}

/// When both positive occurrences share a clause only the first is paid.
pub fn lambda_from_assignment(ws: &WellStructuredCnf, phi: &Assignment, s: &SatisfierMap) -> LambdaCoeffs {
    let mut out = Vec::with_capacity(ws.num_vars());
    for (v, o) in ws.occurrences().iter().enumerate() {
        let mut l = [0u32; 5];
        if phi.values()[v] {
            l[0] = u32::from(s.0[o.pos1] == Lit::pos(v));
            l[1] = u32::from(o.pos2 != o.pos1 && s.0[o.pos2] == Lit::pos(v));
            l[3] = 2 - l[0] - l[1];
        } else if s.0[o.neg] == Lit::neg(v) {
            l[2] = 1;
            l[4] = 1;
        } else {
            l[3] = 2;
        }
        out.push(l);
    }
    LambdaCoeffs(out)
}

/// Multiplicity vector `(α̂, β̂, χ̂, ŷ)` for a guess, via the reference path.
pub fn target_multiplicities(
    sys: &IlpSystem,
    ctx: &EncodingContext,
    ws: &WellStructuredCnf,
    chi: ChiGuess,
) -> Result<Vec<Nat>, WitnessError> {
    let a = alpha_hat(ctx)?;
    let b = beta_hat(sys, ctx, ws)?;
    let y = y_hat(sys, &a, &b, chi)?;
    let mut out: Vec<Nat> = a.into_iter().chain(b).chain(chi.0.iter().map(|&c| Nat::from(c))).collect();
    out.extend(y);
    Ok(out)
}

/// The `2n` lifted configurations named by `lam`, checked to sum to the
/// multiplicities of the guess they imply.
pub fn configs_from_lambda(
    sys: &IlpSystem,
    ctx: &EncodingContext,
    ws: &WellStructuredCnf,
    lam: &LambdaCoeffs,
) -> Result<(Vec<LiftedVector>, ChiGuess), WitnessError> {
    lam.check_invariants()?;
    let chi = lam.implied_chi();
    let target = target_multiplicities(sys, ctx, ws, chi)?;
    let mut configs = Vec::with_capacity(2 * ctx.n);
    let mut sum = vec![Nat::default(); target.len()];
    for (i, t) in lam.configs() {
        let v = lift(sys, &make_solution(sys, ctx, ws, i, t)?.values)?;
        for (acc, x) in sum.iter_mut().zip(v.x.iter().chain(&v.y)) {
            *acc += x;
        }
        configs.push(v);
    }
    if let Some(index) = sum.iter().zip(&target).position(|(a, b)| a != b) {
        return Err(WitnessError::SumMismatch { index });
    }
    Ok((configs, chi))
}

/// `v_i` is false exactly when `λ3^(i) = 1`.
pub fn decode_assignment(ws: &WellStructuredCnf, lam: &LambdaCoeffs) -> Result<Assignment, WitnessError> {
    let phi = Assignment::new(lam.0.iter().map(|l| l[2] != 1).collect());
    if !ws.inner().is_satisfied_by(&phi) {
        return Err(WitnessError::DecodedUnsat);
    }
    Ok(phi)
}
