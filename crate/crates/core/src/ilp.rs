//! The compact equality system whose solutions are exactly the `5n`
//! configuration vectors, plus a structured enumerator and the standalone
//! selector linearization.
//!
//! Row families, in emission order:
//!
//! * `C1` power chain: `r̃_{log n} = γ^i` from the bits of `i`.
//! * `C2`-`C5` division cascade extracting the block of variable `i` from `Z`.
//! * `C6`-`C8` splitting that block into its three clause terms.
//! * `C9`-`C12` selecting which of the five solution types is realized.
//!
//! Every inequality already carries its own slack variable.

use std::fmt::{self, Write as _};
use std::ops::Range;

use num_bigint::Sign;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::encode::{beta_of, EncodeError, EncodingContext};
use crate::cnf::WellStructuredCnf;
use crate::{Int, Nat};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IlpError {
    #[error("vector has {got} entries, system has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("system was not produced by build_system")]
    NoLayout,
    #[error("solution type {0} is not in 1..=5")]
    InvalidType(u8),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("slack {name} would be negative")]
    NegativeSlack { name: String },
    #[error("propagation left {name} with a non-binary domain")]
    Underdetermined { name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Role {
    Alpha1,
    Alpha2,
    Alpha3,
    Xbin,
    Rtilde,
    Ytilde,
    Ztilde,
    Stilde,
    Z,
    Q,
    R,
    Qc,
    Cpos1,
    Cpos2,
    Cneg,
    Chi1,
    Chi2,
    Chi3,
    Chi4,
    Ydc,
    Ycc,
    /// Variables of hand-built systems.
    Free,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Var {
    pub name: String,
    pub role: Role,
    pub upper: Nat,
}

/// Ordered variables; lower bounds are all zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VarRegistry {
    vars: Vec<Var>,
}

impl VarRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, role: Role, upper: Nat) -> usize {
        self.vars.push(Var { name: name.into(), role, upper });
        self.vars.len() - 1
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn get(&self, idx: usize) -> &Var {
        &self.vars[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Var> {
        self.vars.iter()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn upper(&self, idx: usize) -> &Nat {
        &self.vars[idx].upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RowTag {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
    C9,
    C10,
    C11,
    C12,
    Custom,
}

/// `Σ terms = rhs`. `slack` names the row's own slack variable, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub tag: RowTag,
    pub terms: Vec<(usize, Int)>,
    pub rhs: Int,
    pub slack: Option<usize>,
}

impl Row {
    pub fn new(terms: Vec<(usize, Int)>, rhs: Int) -> Self {
        Row { tag: RowTag::Custom, terms, rhs, slack: None }
    }

    pub fn lhs(&self, x: &[Nat]) -> Int {
        self.terms.iter().fold(Int::zero(), |acc, (v, a)| acc + a * Int::from(x[*v].clone()))
    }

    pub fn holds(&self, x: &[Nat]) -> bool {
        self.lhs(x) == self.rhs
    }

    fn coeff(&self, var: usize) -> Option<&Int> {
        self.terms.iter().find(|(v, _)| *v == var).map(|(_, a)| a)
    }
}

/// Indices of every variable family in a built system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarIds {
    pub alpha: [usize; 3],
    /// `xbin[ℓ - 1]` is `x^bin_ℓ`, most significant first.
    pub xbin: Vec<usize>,
    /// `r̃_0..=r̃_{log n}`.
    pub rt: Vec<usize>,
    pub yt: Vec<usize>,
    pub zt: Vec<usize>,
    pub st: Vec<[usize; 8]>,
    pub s_lo: usize,
    pub s_hi: usize,
    /// `z_0..=z_{log n}`.
    pub z: Vec<usize>,
    pub q: Vec<usize>,
    pub r: Vec<usize>,
    pub ydc: Vec<[usize; 5]>,
    pub qc: usize,
    /// `c_pos1, c_pos2, c_neg`.
    pub c: [usize; 3],
    pub ydc_c: [usize; 3],
    pub chi: [usize; 4],
    /// `y^cc_1..=y^cc_17`; 16 and 17 are the selector caps.
    pub ycc: Vec<usize>,
    /// Variables fixed by the variable index alone.
    pub beta: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub m: usize,
    pub log_n: usize,
    pub gamma: Nat,
    pub u_dc: Nat,
    pub u_cc: Nat,
    pub ids: VarIds,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IlpSystem {
    pub registry: VarRegistry,
    pub rows: Vec<Row>,
    pub layout: Option<Layout>,
}

/// Values aligned with registry order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Solution {
    pub values: Vec<Nat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    /// Emit `α1 <= U^cc(χ1+χ2+χ3)` and `α2 <= U^cc(χ1+…+χ4)`. Without them
    /// `α1`/`α2` are unconstrained when their selectors are all zero.
    pub selector_caps: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { selector_caps: true }
    }
}

fn int(x: &Nat) -> Int {
    Int::from(x.clone())
}

fn ii(x: i64) -> Int {
    Int::from(x)
}

impl IlpSystem {
    pub fn new(registry: VarRegistry, rows: Vec<Row>) -> Self {
        IlpSystem { registry, rows, layout: None }
    }

    pub fn num_vars(&self) -> usize {
        self.registry.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn layout(&self) -> Result<&Layout, IlpError> {
        self.layout.as_ref().ok_or(IlpError::NoLayout)
    }

    pub fn uppers(&self) -> Vec<Nat> {
        self.registry.iter().map(|v| v.upper.clone()).collect()
    }

    /// Largest absolute coefficient.
    pub fn max_coeff(&self) -> Nat {
        self.rows.iter().flat_map(|r| r.terms.iter()).map(|(_, a)| a.magnitude().clone()).max().unwrap_or_default()
    }

    pub fn max_rhs(&self) -> Nat {
        self.rows.iter().map(|r| r.rhs.magnitude().clone()).max().unwrap_or_default()
    }

    /// One row per line: `+a*name ... = rhs`.
    pub fn dump_rows(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            for (v, a) in &row.terms {
                let sign = if a.is_negative() { '-' } else { '+' };
                let _ = write!(out, "{sign}{}*{} ", a.magnitude(), self.registry.get(*v).name);
            }
            let _ = writeln!(out, "= {}", row.rhs);
        }
        out
    }

    /// One variable per line: `name role upper`.
    pub fn dump_bounds(&self) -> String {
        let mut out = String::new();
        for v in self.registry.iter() {
            let _ = writeln!(out, "{} {} {}", v.name, v.role, v.upper);
        }
        out
    }

    /// Fills each unset designated slack from its row, in row order.
    pub fn complete_slacks(&self, values: &mut [Nat], known: &mut [bool]) -> Result<(), IlpError> {
        for row in &self.rows {
            let Some(s) = row.slack else { continue };
            if known[s] {
                continue;
            }
            let sigma = row.coeff(s).expect("slack appears in its row");
            let mut rest = Int::zero();
            for (v, a) in &row.terms {
                if *v != s {
                    debug_assert!(known[*v], "slack row depends on unset {}", self.registry.get(*v).name);
                    rest += a * int(&values[*v]);
                }
            }
            let val = (&row.rhs - rest) * sigma;
            let val = val
                .to_biguint()
                .ok_or_else(|| IlpError::NegativeSlack { name: self.registry.get(s).name.clone() })?;
            values[s] = val;
            known[s] = true;
        }
        Ok(())
    }
}

impl Solution {
    /// Decoded variable index and solution type (1..=5).
    pub fn index_and_type(&self, sys: &IlpSystem) -> Result<(usize, u8), IlpError> {
        let ids = &sys.layout()?.ids;
        let i = ids.xbin.iter().fold(0usize, |acc, &v| acc << 1 | usize::from(self.values[v].is_one()));
        let t = ids.chi.iter().position(|&c| self.values[c].is_one()).map(|p| p as u8 + 1).unwrap_or(5);
        Ok((i, t))
    }

    pub fn alpha(&self, sys: &IlpSystem) -> Result<[Nat; 3], IlpError> {
        let a = sys.layout()?.ids.alpha;
        Ok([self.values[a[0]].clone(), self.values[a[1]].clone(), self.values[a[2]].clone()])
    }
}

struct Builder {
    reg: VarRegistry,
    rows: Vec<Row>,
    box_slacks: Vec<usize>,
}

impl Builder {
    fn var(&mut self, name: String, role: Role, upper: Nat) -> usize {
        self.reg.push(name, role, upper)
    }

    fn slack_box(&mut self, name: String, role: Role) -> usize {
        let v = self.reg.push(name, role, Nat::zero());
        self.box_slacks.push(v);
        v
    }

    fn row(&mut self, tag: RowTag, terms: Vec<(usize, Int)>, rhs: Int, slack: Option<usize>) {
        self.rows.push(Row { tag, terms, rhs, slack });
    }

    /// Upper bound of a slack: the largest value its row allows over the box.
    fn fix_box_bounds(&mut self) {
        for &s in &self.box_slacks {
            let row = self.rows.iter().find(|r| r.slack == Some(s)).expect("box slack has a row");
            let sigma = row.coeff(s).unwrap().clone();
            let mut max = &row.rhs * &sigma;
            for (v, a) in &row.terms {
                if *v != s {
                    let sa = a * &sigma;
                    if sa.is_negative() {
                        max += sa.abs() * int(self.reg.upper(*v));
                    }
                }
            }
            let upper = max.to_biguint().expect("box maximum is non-negative");
            self.reg.vars[s].upper = upper;
        }
    }
}

pub fn build_system(ctx: &EncodingContext, ws: &WellStructuredCnf) -> IlpSystem {
    build_system_with(ctx, ws, BuildOptions::default())
}

pub fn build_system_with(ctx: &EncodingContext, _ws: &WellStructuredCnf, opts: BuildOptions) -> IlpSystem {
    let n = ctx.n;
    let l = ctx.log_n;
    let gm = &ctx.gamma_m;
    let u_dc = ctx.u_dc().clone();
    let u_cc = ctx.u_cc();
    let one = Nat::one();
    let mut b = Builder { reg: VarRegistry::new(), rows: Vec::new(), box_slacks: Vec::new() };

    let alpha = [
        b.var("alpha1".into(), Role::Alpha1, gm.clone()),
        b.var("alpha2".into(), Role::Alpha2, ctx.gamma_pow(n) * 2u32),
        b.var("alpha3".into(), Role::Alpha3, one.clone()),
    ];
    let beta_start = b.reg.len();

    let xbin: Vec<usize> = (1..=l).map(|t| b.var(format!("xbin_{t}"), Role::Xbin, one.clone())).collect();
    let chain_cap = |j: usize| ctx.gamma_pow((1 << j) - 1);
    let rt: Vec<usize> = (0..=l).map(|j| b.var(format!("rt_{j}"), Role::Rtilde, chain_cap(j))).collect();
    let mut yt = Vec::with_capacity(l);
    let mut zt = Vec::with_capacity(l);
    let mut st = Vec::with_capacity(l);
    for j in 0..l {
        yt.push(b.var(format!("yt_{j}"), Role::Ytilde, chain_cap(j)));
        zt.push(b.var(format!("zt_{j}"), Role::Ztilde, chain_cap(j)));
        let mut s = [0usize; 8];
        for (slot, k) in [1, 2, 3, 4, 5, 7, 8, 9].into_iter().enumerate() {
            s[slot] = b.slack_box(format!("st{k}_{j}"), Role::Stilde);
        }
        st.push(s);
    }
    let s_lo = b.var("s_9L".into(), Role::Stilde, ctx.gamma_pow(n - 1) - 1u32);
    let s_hi = b.var("s_9L1".into(), Role::Stilde, ctx.gamma_pow(n - 1));

    let z: Vec<usize> = (0..=l).map(|j| b.var(format!("z_{j}"), Role::Z, ctx.block_pow(j).clone())).collect();
    let mut q = Vec::with_capacity(l);
    let mut r = Vec::with_capacity(l);
    let mut ydc = Vec::with_capacity(l);
    for j in 0..l {
        let cap = ctx.split_pow(j) - 1u32;
        q.push(b.var(format!("q_{j}"), Role::Q, cap.clone()));
        r.push(b.var(format!("r_{j}"), Role::R, cap.clone()));
        let mut y = [0usize; 5];
        y[0] = b.var(format!("ydc1_{j}"), Role::Ydc, cap);
        for (k, slot) in y.iter_mut().enumerate().skip(1) {
            *slot = b.var(format!("ydc{}_{j}", k + 1), Role::Ydc, &u_dc * 2u32);
        }
        ydc.push(y);
    }
    let qc = b.var("qc".into(), Role::Qc, gm * gm);
    let digit = gm - 1u32;
    let c = [
        b.var("cpos1".into(), Role::Cpos1, digit.clone()),
        b.var("cpos2".into(), Role::Cpos2, digit.clone()),
        b.var("cneg".into(), Role::Cneg, digit.clone()),
    ];
    let ydc_c = [
        b.var("ydc6".into(), Role::Ydc, digit.clone()),
        b.var("ydc7".into(), Role::Ydc, digit.clone()),
        b.var("ydc8".into(), Role::Ydc, digit.clone()),
    ];
    let beta = beta_start..b.reg.len();

    let chi = [
        b.var("chi1".into(), Role::Chi1, one.clone()),
        b.var("chi2".into(), Role::Chi2, one.clone()),
        b.var("chi3".into(), Role::Chi3, one.clone()),
        b.var("chi4".into(), Role::Chi4, one.clone()),
    ];
    let mut ycc = Vec::with_capacity(17);
    for k in 1..=14 {
        ycc.push(b.var(format!("ycc{k}"), Role::Ycc, &u_cc * 2u32));
    }
    ycc.push(b.var("ycc15".into(), Role::Ycc, one.clone()));
    if opts.selector_caps {
        ycc.push(b.slack_box("ycc16".into(), Role::Ycc));
        ycc.push(b.slack_box("ycc17".into(), Role::Ycc));
    }

    // C1
    let x_of = |j: usize| xbin[l - 1 - j];
    b.row(RowTag::C1, vec![(rt[0], ii(1))], ii(1), None);
    let gs: Vec<Int> = (0..l).map(|j| int(&ctx.gamma_pow2(j))).collect();
    for j in 0..l {
        let g = &gs[j];
        b.row(
            RowTag::C1,
            vec![(yt[j], g * g + g.clone()), (rt[j + 1], -(g + 1i64)), (st[j][0], ii(1))],
            g.clone(),
            Some(st[j][0]),
        );
    }
    for j in 0..l {
        let g = &gs[j];
        b.row(RowTag::C1, vec![(yt[j], -g.clone()), (rt[j + 1], ii(1)), (st[j][1], ii(1))], g - 1, Some(st[j][1]));
    }
    for j in 0..l {
        b.row(RowTag::C1, vec![(x_of(j), ii(1)), (st[j][2], ii(1))], ii(1), Some(st[j][2]));
    }
    for j in 0..l {
        b.row(RowTag::C1, vec![(x_of(j), ii(1)), (yt[j], ii(-1)), (st[j][3], ii(1))], ii(0), Some(st[j][3]));
    }
    for j in 0..l {
        let g = &gs[j];
        b.row(RowTag::C1, vec![(yt[j], ii(1)), (x_of(j), -(g + 1i64)), (st[j][4], ii(1))], ii(0), Some(st[j][4]));
    }
    for j in 0..l {
        let g = &gs[j];
        b.row(RowTag::C1, vec![(zt[j], g - 1), (rt[j], ii(1)), (rt[j + 1], ii(-1))], ii(0), None);
    }
    for j in 0..l {
        let g = &gs[j];
        b.row(
            RowTag::C1,
            vec![(x_of(j), g.clone()), (zt[j], ii(-1)), (rt[j], ii(1)), (st[j][5], ii(1))],
            g.clone(),
            Some(st[j][5]),
        );
    }
    for j in 0..l {
        let g = &gs[j];
        b.row(RowTag::C1, vec![(x_of(j), -g.clone()), (zt[j], ii(1)), (st[j][6], ii(1))], ii(0), Some(st[j][6]));
    }
    for j in 0..l {
        b.row(RowTag::C1, vec![(zt[j], ii(1)), (rt[j], ii(-1)), (st[j][7], ii(1))], ii(0), Some(st[j][7]));
    }
    b.row(RowTag::C1, vec![(rt[l], ii(1)), (s_lo, ii(-1))], ii(1), Some(s_lo));
    b.row(RowTag::C1, vec![(rt[l], ii(1)), (s_hi, ii(1))], int(&ctx.gamma_pow(n - 1)), Some(s_hi));

    // C2-C5
    let udc = int(&u_dc);
    b.row(RowTag::C2, vec![(z[0], ii(1))], int(&ctx.z), None);
    for j in 0..l {
        let p = int(ctx.split_pow(j));
        b.row(RowTag::C3, vec![(z[j], ii(1)), (q[j], -p), (r[j], ii(-1))], ii(0), None);
    }
    for j in 0..l {
        let p = int(ctx.split_pow(j));
        b.row(RowTag::C4, vec![(r[j], ii(1)), (ydc[j][0], ii(1))], p - 1, Some(ydc[j][0]));
    }
    for j in 0..l {
        b.row(
            RowTag::C5,
            vec![(z[j + 1], ii(1)), (q[j], ii(-1)), (xbin[j], udc.clone()), (ydc[j][1], ii(1))],
            udc.clone(),
            Some(ydc[j][1]),
        );
    }
    for j in 0..l {
        b.row(
            RowTag::C5,
            vec![(z[j + 1], ii(-1)), (q[j], ii(1)), (xbin[j], udc.clone()), (ydc[j][2], ii(1))],
            udc.clone(),
            Some(ydc[j][2]),
        );
    }
    for j in 0..l {
        b.row(
            RowTag::C5,
            vec![(z[j + 1], ii(1)), (r[j], ii(-1)), (xbin[j], -udc.clone()), (ydc[j][3], ii(1))],
            ii(0),
            Some(ydc[j][3]),
        );
    }
    for j in 0..l {
        b.row(
            RowTag::C5,
            vec![(z[j + 1], ii(1)), (r[j], ii(-1)), (xbin[j], udc.clone()), (ydc[j][4], ii(-1))],
            ii(0),
            Some(ydc[j][4]),
        );
    }

    // C6-C8
    let gmi = int(gm);
    b.row(RowTag::C6, vec![(z[l], ii(1)), (qc, -gmi.clone()), (c[0], ii(-1))], ii(0), None);
    b.row(RowTag::C7, vec![(qc, ii(1)), (c[2], -gmi.clone()), (c[1], ii(-1))], ii(0), None);
    for t in 0..3 {
        b.row(RowTag::C8, vec![(c[t], ii(1)), (ydc_c[t], ii(1))], &gmi - 1, Some(ydc_c[t]));
    }

    // C9-C12
    let ucc = int(&u_cc);
    for t in 0..3 {
        b.row(
            RowTag::C9,
            vec![(alpha[0], ii(1)), (c[t], ii(-1)), (chi[t], ucc.clone()), (ycc[2 * t], ii(1))],
            ucc.clone(),
            Some(ycc[2 * t]),
        );
        b.row(
            RowTag::C9,
            vec![(alpha[0], ii(-1)), (c[t], ii(1)), (chi[t], ucc.clone()), (ycc[2 * t + 1], ii(1))],
            ucc.clone(),
            Some(ycc[2 * t + 1]),
        );
    }
    if opts.selector_caps {
        let mut terms = vec![(alpha[0], ii(1))];
        terms.extend(chi[..3].iter().map(|&x| (x, -ucc.clone())));
        terms.push((ycc[15], ii(1)));
        b.row(RowTag::C9, terms, ii(0), Some(ycc[15]));
    }
    for t in 0..4 {
        let mult = if t == 2 { 2 } else { 1 };
        b.row(
            RowTag::C10,
            vec![(alpha[1], ii(1)), (rt[l], ii(-mult)), (chi[t], ucc.clone()), (ycc[6 + 2 * t], ii(1))],
            ucc.clone(),
            Some(ycc[6 + 2 * t]),
        );
        b.row(
            RowTag::C10,
            vec![(alpha[1], ii(-1)), (rt[l], ii(mult)), (chi[t], ucc.clone()), (ycc[7 + 2 * t], ii(1))],
            ucc.clone(),
            Some(ycc[7 + 2 * t]),
        );
    }
    if opts.selector_caps {
        let mut terms = vec![(alpha[1], ii(1))];
        terms.extend(chi.iter().map(|&x| (x, -ucc.clone())));
        terms.push((ycc[16], ii(1)));
        b.row(RowTag::C10, terms, ii(0), Some(ycc[16]));
    }
    b.row(
        RowTag::C11,
        vec![(chi[0], ii(1)), (chi[1], ii(1)), (chi[2], ii(1)), (alpha[2], ii(1))],
        ii(1),
        None,
    );
    b.row(RowTag::C12, vec![(chi[3], ii(1)), (alpha[2], ii(-1)), (ycc[14], ii(1))], ii(0), Some(ycc[14]));

    b.fix_box_bounds();

    let ids = VarIds {
        alpha,
        xbin,
        rt,
        yt,
        zt,
        st,
        s_lo,
        s_hi,
        z,
        q,
        r,
        ydc,
        qc,
        c,
        ydc_c,
        chi,
        ycc,
        beta,
    };
    let layout = Layout { n, m: ctx.m, log_n: l, gamma: ctx.gamma.clone(), u_dc, u_cc, ids };
    IlpSystem { registry: b.reg, rows: b.rows, layout: Some(layout) }
}

/// True iff every row holds and every value is within its bound.
pub fn check_solution(sys: &IlpSystem, x: &[Nat]) -> Result<bool, IlpError> {
    if x.len() != sys.num_vars() {
        return Err(IlpError::DimensionMismatch { expected: sys.num_vars(), got: x.len() });
    }
    if x.iter().zip(sys.registry.iter()).any(|(v, var)| v > &var.upper) {
        return Ok(false);
    }
    Ok(sys.rows.iter().all(|r| r.holds(x)))
}

/// Writes the forced part of variable `i` into `values`.
pub fn place_beta(
    sys: &IlpSystem,
    ctx: &EncodingContext,
    ws: &WellStructuredCnf,
    i: usize,
    values: &mut [Nat],
    known: &mut [bool],
) -> Result<(), IlpError> {
    let ids = &sys.layout()?.ids;
    let f = beta_of(ctx, ws, i)?;
    let mut set = |v: usize, x: Nat| {
        values[v] = x;
        known[v] = true;
    };
    for (t, &b) in f.xbin.iter().enumerate() {
        set(ids.xbin[t], if b { Nat::one() } else { Nat::zero() });
    }
    for (j, step) in f.power.iter().enumerate() {
        set(ids.rt[j], step.rt.clone());
        set(ids.yt[j], step.yt.clone());
        set(ids.zt[j], step.zt.clone());
        for (slot, s) in step.slack.iter().enumerate() {
            set(ids.st[j][slot], s.clone());
        }
    }
    set(ids.rt[ctx.log_n], f.rt_last);
    set(ids.s_lo, f.s_lo);
    set(ids.s_hi, f.s_hi);
    for (j, step) in f.cascade.iter().enumerate() {
        set(ids.z[j], step.z.clone());
        set(ids.q[j], step.q.clone());
        set(ids.r[j], step.r.clone());
        for (k, y) in step.ydc.iter().enumerate() {
            set(ids.ydc[j][k], y.clone());
        }
    }
    set(ids.z[ctx.log_n], f.z_last);
    set(ids.qc, f.qc);
    set(ids.c[0], f.c.c_pos1);
    set(ids.c[1], f.c.c_pos2);
    set(ids.c[2], f.c.c_neg);
    for (k, y) in f.ydc_c.into_iter().enumerate() {
        set(ids.ydc_c[k], y);
    }
    Ok(())
}

/// Values of the index-determined variables (`ids.beta`) for variable `i`.
pub fn beta_values(sys: &IlpSystem, ctx: &EncodingContext, ws: &WellStructuredCnf, i: usize) -> Result<Vec<Nat>, IlpError> {
    let range = sys.layout()?.ids.beta.clone();
    let mut values = vec![Nat::zero(); sys.num_vars()];
    let mut known = vec![false; sys.num_vars()];
    place_beta(sys, ctx, ws, i, &mut values, &mut known)?;
    Ok(values[range].to_vec())
}

/// The solution of type `t` for variable `i`:
///
/// | type | α | χ |
/// |---|---|---|
/// | 1 | `(C_pos1, γ^i, 0)` | `e1` |
/// | 2 | `(C_pos2, γ^i, 0)` | `e2` |
/// | 3 | `(C_neg, 2γ^i, 0)` | `e3` |
/// | 4 | `(0, γ^i, 1)` | `e4` |
/// | 5 | `(0, 0, 1)` | `0` |
pub fn make_solution(
    sys: &IlpSystem,
    ctx: &EncodingContext,
    ws: &WellStructuredCnf,
    i: usize,
    t: u8,
) -> Result<Solution, IlpError> {
    if !(1..=5).contains(&t) {
        return Err(IlpError::InvalidType(t));
    }
    let lay = sys.layout()?;
    let ids = &lay.ids;
    let d = sys.num_vars();
    let mut values = vec![Nat::zero(); d];
    let mut known = vec![false; d];
    place_beta(sys, ctx, ws, i, &mut values, &mut known)?;

    let gi = ctx.gamma_pow(i);
    let (a1, a2, a3) = match t {
        1 => (values[ids.c[0]].clone(), gi, 0u32),
        2 => (values[ids.c[1]].clone(), gi, 0),
        3 => (values[ids.c[2]].clone(), gi * 2u32, 0),
        4 => (Nat::zero(), gi, 1),
        _ => (Nat::zero(), Nat::zero(), 1),
    };
    for (v, x) in ids.alpha.iter().zip([a1, a2, Nat::from(a3)]) {
        values[*v] = x;
        known[*v] = true;
    }
    for (k, &c) in ids.chi.iter().enumerate() {
        values[c] = if usize::from(t) == k + 1 { Nat::one() } else { Nat::zero() };
        known[c] = true;
    }
    sys.complete_slacks(&mut values, &mut known)?;
    Ok(Solution { values })
}

/// Interval domains over the registry.
#[derive(Clone)]
struct Domains {
    lo: Vec<Int>,
    hi: Vec<Int>,
}

const PROPAGATION_ROUNDS: usize = 200;

fn floor_div(a: &Int, b: &Int) -> Int {
    a.div_floor(b)
}

fn ceil_div(a: &Int, b: &Int) -> Int {
    -(-a).div_floor(b)
}

impl Domains {
    fn fix(&mut self, v: usize, x: i64) {
        self.lo[v] = Int::from(x);
        self.hi[v] = Int::from(x);
    }

    /// Bound propagation to a fixpoint. `false` on an empty domain.
    fn propagate(&mut self, rows: &[Row]) -> bool {
        for _ in 0..PROPAGATION_ROUNDS {
            let mut changed = false;
            for row in rows {
                let mut min = Int::zero();
                let mut max = Int::zero();
                let contrib: Vec<(Int, Int)> = row
                    .terms
                    .iter()
                    .map(|(v, a)| {
                        let (p, q) = (a * &self.lo[*v], a * &self.hi[*v]);
                        if a.sign() == Sign::Minus {
                            (q, p)
                        } else {
                            (p, q)
                        }
                    })
                    .collect();
                for (p, q) in &contrib {
                    min += p;
                    max += q;
                }
                if min > row.rhs || max < row.rhs {
                    return false;
                }
                for ((v, a), (p, q)) in row.terms.iter().zip(&contrib) {
                    // a·x ∈ [rhs - (max - q), rhs - (min - p)]
                    let lo_ax = &row.rhs - (&max - q);
                    let hi_ax = &row.rhs - (&min - p);
                    let (nlo, nhi) = if a.is_positive() {
                        (ceil_div(&lo_ax, a), floor_div(&hi_ax, a))
                    } else {
                        (ceil_div(&hi_ax, a), floor_div(&lo_ax, a))
                    };
                    if nlo > self.lo[*v] {
                        self.lo[*v] = nlo;
                        changed = true;
                    }
                    if nhi < self.hi[*v] {
                        self.hi[*v] = nhi;
                        changed = true;
                    }
                    if self.lo[*v] > self.hi[*v] {
                        return false;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        true
    }
}

fn search(sys: &IlpSystem, mut dom: Domains, out: &mut Vec<Solution>) -> Result<(), IlpError> {
    if !dom.propagate(&sys.rows) {
        return Ok(());
    }
    let open = (0..sys.num_vars()).find(|&v| dom.lo[v] != dom.hi[v]);
    match open {
        None => {
            let values: Vec<Nat> = dom.lo.iter().map(|x| x.to_biguint().expect("non-negative")).collect();
            if check_solution(sys, &values)? {
                out.push(Solution { values });
            }
            Ok(())
        }
        Some(v) => {
            if &dom.hi[v] - &dom.lo[v] > Int::one() {
                return Err(IlpError::Underdetermined { name: sys.registry.get(v).name.clone() });
            }
            for x in [dom.lo[v].clone(), dom.hi[v].clone()] {
                let mut d = dom.clone();
                d.lo[v] = x.clone();
                d.hi[v] = x;
                search(sys, d, out)?;
            }
            Ok(())
        }
    }
}

/// All solutions, sorted by (decoded index, type).
///
/// Branches on the bits of `i` and the four selectors, then propagates
/// bounds; any variable still open afterwards must be binary and is branched
/// on too.
pub fn enumerate_solutions(sys: &IlpSystem, ctx: &EncodingContext) -> Result<Vec<Solution>, IlpError> {
    let ids = &sys.layout()?.ids;
    let base = Domains {
        lo: vec![Int::zero(); sys.num_vars()],
        hi: sys.registry.iter().map(|v| int(&v.upper)).collect(),
    };
    let per_index: Vec<Vec<Solution>> = (0..ctx.n)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for pattern in 0u8..16 {
                let mut dom = base.clone();
                for (t, &v) in ids.xbin.iter().enumerate() {
                    dom.fix(v, i64::from(ctx.xbin(i, t + 1)));
                }
                for (k, &c) in ids.chi.iter().enumerate() {
                    dom.fix(c, i64::from(pattern >> k & 1));
                }
                search(sys, dom, &mut out)?;
            }
            Ok(out)
        })
        .collect::<Result<_, IlpError>>()?;
    let mut all: Vec<Solution> = per_index.into_iter().flatten().collect();
    let mut keyed: Vec<((usize, u8), Solution)> =
        all.drain(..).map(|s| (s.index_and_type(sys).expect("layout present"), s)).collect();
    keyed.sort_by_key(|k| k.0);
    Ok(keyed.into_iter().map(|(_, s)| s).collect())
}

/// `Σ coeffs·vars <= rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IneqRow {
    pub terms: Vec<(usize, Int)>,
    pub rhs: Int,
}

impl IneqRow {
    pub fn holds(&self, point: &[Int]) -> bool {
        let lhs = self.terms.iter().fold(Int::zero(), |acc, (v, a)| acc + a * &point[*v]);
        lhs <= self.rhs
    }
}

/// Linear rows for `y = Σ x_j χ_j` with at most one `χ_j` set and `x_j <= u`.
///
/// Variable 0 is `y`, `1..=k` are the `x_j`, `k+1..=2k` the `χ_j`.
pub fn linearize_selector(k: usize, u: &Nat) -> Vec<IneqRow> {
    let u = int(u);
    let y = 0;
    let x = |j: usize| 1 + j;
    let chi = |j: usize| 1 + k + j;
    let mut rows = Vec::with_capacity(2 * k + 2);
    for j in 0..k {
        rows.push(IneqRow { terms: vec![(y, ii(1)), (x(j), ii(-1)), (chi(j), u.clone())], rhs: u.clone() });
        rows.push(IneqRow { terms: vec![(y, ii(-1)), (x(j), ii(1)), (chi(j), u.clone())], rhs: u.clone() });
    }
    rows.push(IneqRow { terms: vec![(y, ii(-1))], rhs: ii(0) });
    let mut cap = vec![(y, ii(1))];
    cap.extend((0..k).map(|j| (chi(j), -u.clone())));
    rows.push(IneqRow { terms: cap, rhs: ii(0) });
    rows
}

/// Largest bit length of any upper bound.
pub fn max_upper_bits(sys: &IlpSystem) -> u64 {
    sys.registry.iter().map(|v| v.upper.bits()).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{well_structure, CnfFormula};
    use crate::encode::make_context;

    fn setup() -> (WellStructuredCnf, EncodingContext, IlpSystem) {
        let ws = well_structure(&CnfFormula::from_dimacs_clauses(2, &[&[1, 2], &[1, 2], &[-1, -2]]).unwrap());
        let ctx = make_context(&ws, None).unwrap();
        let sys = build_system(&ctx, &ws);
        (ws, ctx, sys)
    }

    #[test]
    fn counts_for_two_variables() {
        let (_, _, sys) = setup();
        // power chain 9+3, cascade 1+6, clause terms 5, selectors 7+9+1+1
        assert_eq!(sys.num_rows(), 42);
        assert_eq!(sys.num_vars(), 55);
    }

    #[test]
    fn c11_row() {
        let (_, _, sys) = setup();
        let row = sys.rows.iter().find(|r| r.tag == RowTag::C11).unwrap();
        assert_eq!(row.rhs, ii(1));
        assert!(row.terms.iter().all(|(_, a)| a == &ii(1)));
    }

    #[test]
    fn type_three_alpha() {
        let (ws, ctx, sys) = setup();
        let s = make_solution(&sys, &ctx, &ws, 0, 3).unwrap();
        assert_eq!(s.alpha(&sys).unwrap(), [Nat::from(81u32), Nat::from(2u32), Nat::zero()]);
        let s5 = make_solution(&sys, &ctx, &ws, 1, 5).unwrap();
        assert_eq!(s5.alpha(&sys).unwrap(), [Nat::zero(), Nat::zero(), Nat::one()]);
    }

    #[test]
    fn check_solution_cases() {
        let (ws, ctx, sys) = setup();
        let s = make_solution(&sys, &ctx, &ws, 1, 2).unwrap();
        assert!(check_solution(&sys, &s.values).unwrap());
        let mut bad = s.values.clone();
        bad[sys.layout().unwrap().ids.z[0]] += 1u32;
        assert!(!check_solution(&sys, &bad).unwrap());
        assert!(!check_solution(&sys, &vec![Nat::zero(); sys.num_vars()]).unwrap());
        assert!(check_solution(&sys, &[]).is_err());
    }

    #[test]
    fn enumerates_ten() {
        let (_, ctx, sys) = setup();
        assert_eq!(enumerate_solutions(&sys, &ctx).unwrap().len(), 10);
    }

    #[test]
    fn selector_k1() {
        let rows = linearize_selector(1, &Nat::one());
        assert_eq!(rows.len(), 4);
        for y in 0..2 {
            for x in 0..2 {
                for c in 0..2 {
                    let p = [ii(y), ii(x), ii(c)];
                    assert_eq!(rows.iter().all(|r| r.holds(&p)), y == x * c);
                }
            }
        }
    }
}
