//! The integer `Z` that packs every variable's three clause indices, and the
//! forced values of all auxiliary variables for a fixed variable index.
//!
//! `Z` is written in base `γ^m` with three digits per variable: digit `3i`
//! holds `γ^pos1`, digit `3i+1` holds `γ^pos2`, digit `3i+2` holds `γ^neg`.

use num_integer::Integer;
use num_traits::{One, Pow, Zero};
use thiserror::Error;

use crate::cnf::WellStructuredCnf;
use crate::Nat;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("gamma = {gamma} is too small, it must exceed {bound}")]
    GammaTooSmall { gamma: Nat, bound: Nat },
    #[error("variable index {i} out of range for n = {n}")]
    IndexOutOfRange { i: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingContext {
    pub n: usize,
    pub m: usize,
    /// `log2 n`.
    pub log_n: usize,
    pub gamma: Nat,
    pub gamma_m: Nat,
    pub z: Nat,
    /// Clause index stored in each base-`γ^m` digit of `Z`, `3n` entries.
    exps: Vec<usize>,
    /// `γ^e` for `e` in `0..=max(n, m)`.
    gamma_pows: Vec<Nat>,
    /// `(γ^m)^(3n / 2^j)` for `j` in `0..=log n`.
    block_pows: Vec<Nat>,
}

impl EncodingContext {
    /// `γ^e`, memoized up to `max(n, m)`.
    pub fn gamma_pow(&self, e: usize) -> Nat {
        match self.gamma_pows.get(e) {
            Some(p) => p.clone(),
            None => Pow::pow(&self.gamma, e),
        }
    }

    /// `γ^(2^j)`.
    pub fn gamma_pow2(&self, j: usize) -> Nat {
        self.gamma_pow(1 << j)
    }

    /// `(γ^m)^(3n / 2^j)`; `j = 0` gives `U^dc = γ^(3nm)`.
    pub fn block_pow(&self, j: usize) -> &Nat {
        &self.block_pows[j]
    }

    /// Divisor of cascade step `j`: `(γ^m)^(3n / 2^(j+1))`.
    pub fn split_pow(&self, j: usize) -> &Nat {
        &self.block_pows[j + 1]
    }

    pub fn u_dc(&self) -> &Nat {
        &self.block_pows[0]
    }

    /// `max(2γ^n, γ^m - 1)`.
    pub fn u_cc(&self) -> Nat {
        let a = self.gamma_pow(self.n) * 2u32;
        let b = &self.gamma_m - 1u32;
        a.max(b)
    }

    /// Clause-index exponents of the `3n` digits of `Z`, least significant first.
    pub fn digit_exponents(&self) -> &[usize] {
        &self.exps
    }

    /// Bit `ℓ` (1-based, most significant first) of variable index `i`.
    pub fn xbin(&self, i: usize, l: usize) -> bool {
        (i >> (self.log_n - l)) & 1 == 1
    }
}

/// Default `γ = 4n + 1`.
pub fn default_gamma(n: usize) -> Nat {
    Nat::from(4 * n + 1)
}

pub fn make_context(ws: &WellStructuredCnf, gamma_override: Option<Nat>) -> Result<EncodingContext, EncodeError> {
    let n = ws.num_vars();
    let m = ws.num_clauses();
    let bound = Nat::from((4 * n).max(3));
    let gamma = match gamma_override {
        Some(g) if g <= bound => return Err(EncodeError::GammaTooSmall { gamma: g, bound }),
        Some(g) => g,
        None => default_gamma(n),
    };
    let log_n = n.trailing_zeros() as usize;

    let top = n.max(m);
    let mut gamma_pows = Vec::with_capacity(top + 1);
    let mut p = Nat::one();
    for _ in 0..=top {
        gamma_pows.push(p.clone());
        p *= &gamma;
    }
    let gamma_m = gamma_pows[m].clone();

    let mut exps = Vec::with_capacity(3 * n);
    for o in ws.occurrences() {
        exps.extend([o.pos1, o.pos2, o.neg]);
    }
    // Horner from the most significant digit down.
    let mut z = Nat::zero();
    for &e in exps.iter().rev() {
        z = z * &gamma_m + &gamma_pows[e];
    }

    // (γ^m)^3 then repeated squaring up to (γ^m)^(3n)
    let mut block_pows = vec![Nat::zero(); log_n + 1];
    block_pows[log_n] = Pow::pow(&gamma_m, 3u32);
    for j in (0..log_n).rev() {
        block_pows[j] = &block_pows[j + 1] * &block_pows[j + 1];
    }

    Ok(EncodingContext { n, m, log_n, gamma, gamma_m, z, exps, gamma_pows, block_pows })
}

/// The three clause terms `γ^pos1, γ^pos2, γ^neg` of one variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockValue {
    pub c_pos1: Nat,
    pub c_pos2: Nat,
    pub c_neg: Nat,
}

impl BlockValue {
    pub fn as_array(&self) -> [&Nat; 3] {
        [&self.c_pos1, &self.c_pos2, &self.c_neg]
    }
}

pub fn c_terms(ctx: &EncodingContext, ws: &WellStructuredCnf, i: usize) -> BlockValue {
    let o = ws.occurrences()[i];
    BlockValue { c_pos1: ctx.gamma_pow(o.pos1), c_pos2: ctx.gamma_pow(o.pos2), c_neg: ctx.gamma_pow(o.neg) }
}

/// Block of variable `i` via the binary-search division cascade.
pub fn extract_block(ctx: &EncodingContext, i: usize) -> Nat {
    let mut z = ctx.z.clone();
    for j in 0..ctx.log_n {
        let (q, r) = z.div_rem(ctx.split_pow(j));
        z = if ctx.xbin(i, j + 1) { q } else { r };
    }
    z
}

/// One step of the power chain: multiplier `G = γ^(2^j)` applied when the
/// consumed bit is set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerStep {
    /// Bit consumed at this step, `x^bin_{log n - j}`.
    pub bit: bool,
    pub rt: Nat,
    pub yt: Nat,
    pub zt: Nat,
    /// Slacks 1..=5, 7, 8, 9 of the step (there is no sixth).
    pub slack: [Nat; 8],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CascadeStep {
    pub z: Nat,
    pub q: Nat,
    pub r: Nat,
    /// `y^dc_1..5` of the step.
    pub ydc: [Nat; 5],
}

/// Forced values of every variable that depends only on `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForcedAssignment {
    pub i: usize,
    /// `x^bin_1..x^bin_{log n}`, most significant first.
    pub xbin: Vec<bool>,
    pub power: Vec<PowerStep>,
    /// `r̃_{log n} = γ^i`.
    pub rt_last: Nat,
    pub s_lo: Nat,
    pub s_hi: Nat,
    pub cascade: Vec<CascadeStep>,
    pub z_last: Nat,
    pub qc: Nat,
    pub c: BlockValue,
    /// `y^dc_6..8`.
    pub ydc_c: [Nat; 3],
}

fn nat(b: bool) -> Nat {
    if b {
        Nat::one()
    } else {
        Nat::zero()
    }
}

pub fn beta_of(ctx: &EncodingContext, ws: &WellStructuredCnf, i: usize) -> Result<ForcedAssignment, EncodeError> {
    if i >= ctx.n {
        return Err(EncodeError::IndexOutOfRange { i, n: ctx.n });
    }
    let l = ctx.log_n;
    let xbin: Vec<bool> = (1..=l).map(|t| ctx.xbin(i, t)).collect();

    let mut power = Vec::with_capacity(l);
    let mut rt = Nat::one();
    for j in 0..l {
        let g = ctx.gamma_pow2(j);
        let bit = xbin[l - 1 - j];
        let b = nat(bit);
        let zt = if bit { rt.clone() } else { Nat::zero() };
        let next = &rt + (&g - 1u32) * &zt;
        let yt = &next / &g;
        let g1 = &g + 1u32;
        // slacks: each row's rhs minus its other terms, all non-negative here
        let s1 = &g + &g1 * &next - &g * &g1 * &yt;
        let s2 = &g - 1u32 + &g * &yt - &next;
        let s3 = Nat::one() - &b;
        let s4 = &yt - &b;
        let s5 = &g1 * &b - &yt;
        let s7 = &g + &zt - &g * &b - &rt;
        let s8 = &g * &b - &zt;
        let s9 = &rt - &zt;
        power.push(PowerStep { bit, rt: rt.clone(), yt, zt, slack: [s1, s2, s3, s4, s5, s7, s8, s9] });
        rt = next;
    }
    let s_lo = &rt - 1u32;
    let s_hi = ctx.gamma_pow(ctx.n - 1) - &rt;

    let u = ctx.u_dc();
    let mut cascade = Vec::with_capacity(l);
    let mut z = ctx.z.clone();
    for j in 0..l {
        let p = ctx.split_pow(j);
        let (q, r) = z.div_rem(p);
        let x = xbin[j];
        let next = if x { q.clone() } else { r.clone() };
        let y1 = p - 1u32 - &r;
        let ux = if x { u.clone() } else { Nat::zero() };
        let y2 = u + &q - &next - &ux;
        let y3 = u + &next - &q - &ux;
        let y4 = &r + &ux - &next;
        let y5 = &next + &ux - &r;
        cascade.push(CascadeStep { z, q, r, ydc: [y1, y2, y3, y4, y5] });
        z = next;
    }
    let (qc, c_pos1) = z.div_rem(&ctx.gamma_m);
    let (c_neg, c_pos2) = qc.div_rem(&ctx.gamma_m);
    let top = &ctx.gamma_m - 1u32;
    let ydc_c = [&top - &c_pos1, &top - &c_pos2, &top - &c_neg];
    debug_assert_eq!(BlockValue { c_pos1: c_pos1.clone(), c_pos2: c_pos2.clone(), c_neg: c_neg.clone() }, c_terms(ctx, ws, i));

    Ok(ForcedAssignment {
        i,
        xbin,
        power,
        rt_last: rt,
        s_lo,
        s_hi,
        cascade,
        z_last: z,
        qc,
        c: BlockValue { c_pos1, c_pos2, c_neg },
        ydc_c,
    })
}
