//! The Bin Packing instance family indexed by a selector guess `χ̂`.
//!
//! Item sizes and capacity come straight from the aggregated equation. The
//! multiplicity vector `a = (α̂, β̂, χ̂, ŷ)` is what `2n` solutions of the
//! system would sum to: `α̂` and `β̂` are known in closed form, `χ̂` is
//! guessed, and each slack in `ŷ` is solved from its row summed over the
//! `2n` solutions.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::aggregate::AggregatedEquation;
use crate::cnf::WellStructuredCnf;
use crate::encode::EncodingContext;
use crate::ilp::{beta_values, IlpError, IlpSystem};
use crate::{Int, Nat};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BinPackError {
    #[error("{m} clauses exceed the 2n = {bins} selections available")]
    ClauseSurplus { m: usize, bins: usize },
    #[error("guess {chi} admits no multiplicity vector: {reason}")]
    InfeasibleGuess { chi: ChiGuess, reason: String },
    #[error("multiplicities sum to {got} instead of 2n·B")]
    NotTight { got: Nat },
    #[error(transparent)]
    Ilp(#[from] IlpError),
}

/// Summed selector values over the `2n` chosen configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChiGuess(pub [u32; 4]);

impl fmt::Display for ChiGuess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "{a}_{b}_{c}_{d}")
    }
}

impl Serialize for ChiGuess {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChiMode {
    /// All `(2n+1)^4` tuples.
    Full,
    /// `(χ̂1, χ̂2)` free, `χ̂3 = m - χ̂1 - χ̂2`, `χ̂4 = 2n - m - χ̂3`.
    Reduced,
}

impl FromStr for ChiMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(ChiMode::Full),
            "reduced" => Ok(ChiMode::Reduced),
            other => Err(format!("unknown chi mode {other:?}, expected full or reduced")),
        }
    }
}

impl fmt::Display for ChiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChiMode::Full => "full",
            ChiMode::Reduced => "reduced",
        })
    }
}

pub fn chi_guesses(n: usize, m: usize, mode: ChiMode) -> Vec<ChiGuess> {
    let top = 2 * n as i64;
    let m = m as i64;
    let mut out = Vec::new();
    match mode {
        ChiMode::Full => {
            let r = top as u32;
            for a in 0..=r {
                for b in 0..=r {
                    for c in 0..=r {
                        for d in 0..=r {
                            out.push(ChiGuess([a, b, c, d]));
                        }
                    }
                }
            }
        }
        ChiMode::Reduced => {
            for a in 0..=top {
                for b in 0..=top {
                    let c = m - a - b;
                    let d = top - m - c;
                    if c < 0 || d < 0 || c > top || d > top {
                        continue;
                    }
                    out.push(ChiGuess([a as u32, b as u32, c as u32, d as u32]));
                }
            }
        }
    }
    out
}

/// `(Σ_{j<m} γ^j, Σ_{i<n} 2γ^i, 2n - m)`.
pub fn alpha_hat(ctx: &EncodingContext) -> Result<[Nat; 3], BinPackError> {
    if ctx.m > 2 * ctx.n {
        return Err(BinPackError::ClauseSurplus { m: ctx.m, bins: 2 * ctx.n });
    }
    let a1: Nat = (0..ctx.m).map(|j| ctx.gamma_pow(j)).sum();
    let a2: Nat = (0..ctx.n).map(|i| ctx.gamma_pow(i) * 2u32).sum();
    Ok([a1, a2, Nat::from(2 * ctx.n - ctx.m)])
}

/// `2·Σ_i β(i)`, aligned with the index-determined range of the registry.
pub fn beta_hat(sys: &IlpSystem, ctx: &EncodingContext, ws: &WellStructuredCnf) -> Result<Vec<Nat>, BinPackError> {
    let len = sys.layout()?.ids.beta.len();
    let mut acc = vec![Nat::zero(); len];
    for i in 0..ctx.n {
        for (a, v) in acc.iter_mut().zip(beta_values(sys, ctx, ws, i)?) {
            *a += v;
        }
    }
    for a in acc.iter_mut() {
        *a *= 2u32;
    }
    Ok(acc)
}

fn infeasible(chi: ChiGuess, reason: impl Into<String>) -> BinPackError {
    BinPackError::InfeasibleGuess { chi, reason: reason.into() }
}

/// Slack multiplicities for a guess: the selector slacks solved row by row
/// from the summed system, then the bound slacks `2n·u_j - x̂_j`, then the
/// always-zero last slack. Reference implementation; [`Family`] does the
/// same with the guess-independent parts cached.
pub fn y_hat(sys: &IlpSystem, alpha_hat: &[Nat; 3], beta_hat: &[Nat], chi_hat: ChiGuess) -> Result<Vec<Nat>, BinPackError> {
    let lay = sys.layout()?;
    let ids = &lay.ids;
    let bins = Nat::from(2 * lay.n);
    let d = sys.num_vars();
    let mut x = vec![Nat::zero(); d];
    let mut known = vec![false; d];
    for (v, a) in ids.alpha.iter().zip(alpha_hat) {
        x[*v] = a.clone();
        known[*v] = true;
    }
    for (v, b) in ids.beta.clone().zip(beta_hat) {
        x[v] = b.clone();
        known[v] = true;
    }
    for (v, c) in ids.chi.iter().zip(chi_hat.0) {
        x[*v] = Nat::from(c);
        known[*v] = true;
    }
    let bins_i = Int::from(bins.clone());
    for row in &sys.rows {
        let target = &row.rhs * &bins_i;
        let open: Vec<&(usize, Int)> = row.terms.iter().filter(|(v, _)| !known[*v]).collect();
        let rest = row
            .terms
            .iter()
            .filter(|(v, _)| known[*v])
            .fold(Int::zero(), |acc, (v, a)| acc + a * Int::from(x[*v].clone()));
        match open.as_slice() {
            [] => {
                if rest != target {
                    return Err(infeasible(chi_hat, format!("summed row {:?} is violated", row.tag)));
                }
            }
            [(s, sigma)] => {
                let val = ((target - rest) * sigma).to_biguint().ok_or_else(|| {
                    infeasible(chi_hat, format!("{} forced negative", sys.registry.get(*s).name))
                })?;
                x[*s] = val;
                known[*s] = true;
            }
            _ => unreachable!("selector rows have one slack each"),
        }
    }
    let mut out: Vec<Nat> = ids.ycc.iter().map(|&v| x[v].clone()).collect();
    for (j, var) in sys.registry.iter().enumerate() {
        let cap = &bins * &var.upper;
        if x[j] > cap {
            return Err(infeasible(chi_hat, format!("{} exceeds 2n times its bound", var.name)));
        }
        out.push(cap - &x[j]);
    }
    out.push(Nat::zero());
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BinPackingInstance {
    pub sizes: Arc<Vec<Nat>>,
    pub capacity: Nat,
    pub multiplicities: Vec<Nat>,
    pub bin_budget: usize,
    pub chi_hat: ChiGuess,
}

impl BinPackingInstance {
    /// Number of item types.
    pub fn d(&self) -> usize {
        self.sizes.len()
    }

    /// `sᵀa`, computed directly.
    pub fn total_size(&self) -> Nat {
        self.sizes.iter().zip(&self.multiplicities).filter(|(_, a)| !a.is_zero()).map(|(s, a)| s * a).sum()
    }

    pub fn is_tight(&self) -> bool {
        self.total_size() == &self.capacity * self.bin_budget
    }

    /// Header `d B bins`, then one `size multiplicity` line per item type.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.d(), self.capacity, self.bin_budget);
        for (s, a) in self.sizes.iter().zip(&self.multiplicities) {
            out.push_str(&format!("{s} {a}\n"));
        }
        out
    }
}

/// Summed selector row with its guess-independent part folded in.
#[derive(Debug, Clone)]
struct SelectorRow {
    /// `2n·rhs - Σ a·x̂` over the `α`/`β` terms.
    base: Int,
    chi: [Int; 4],
    /// Slack position within the selector-slack block and its coefficient.
    slack: Option<(usize, Int)>,
}

/// Everything about the family that does not depend on `χ̂`.
#[derive(Debug, Clone)]
pub struct Family {
    pub n: usize,
    pub m: usize,
    pub alpha_hat: [Nat; 3],
    pub beta_hat: Vec<Nat>,
    sizes: Arc<Vec<Nat>>,
    capacity: Nat,
    d: usize,
    bins: Nat,
    chi_ids: [usize; 4],
    ycc_ids: Vec<usize>,
    uppers: Vec<Nat>,
    rows: Vec<SelectorRow>,
    /// `a` on every guess-independent position, zero elsewhere.
    fixed: Vec<Nat>,
    fixed_dot: Nat,
}

impl Family {
    pub fn new(
        sys: &IlpSystem,
        agg: &AggregatedEquation,
        ctx: &EncodingContext,
        ws: &WellStructuredCnf,
    ) -> Result<Self, BinPackError> {
        let alpha_hat = alpha_hat(ctx)?;
        let beta_hat = beta_hat(sys, ctx, ws)?;
        let lay = sys.layout()?;
        let ids = &lay.ids;
        let d = sys.num_vars();
        let bins = Nat::from(2 * lay.n);
        let bins_i = Int::from(bins.clone());

        let mut fixed = vec![Nat::zero(); 2 * d + 1];
        let mut is_fixed = vec![false; d];
        for (v, a) in ids.alpha.iter().zip(&alpha_hat) {
            fixed[*v] = a.clone();
            is_fixed[*v] = true;
        }
        for (v, b) in ids.beta.clone().zip(&beta_hat) {
            fixed[v] = b.clone();
            is_fixed[v] = true;
        }
        let uppers = sys.uppers();
        for j in 0..d {
            if is_fixed[j] {
                let cap = &bins * &uppers[j];
                if fixed[j] > cap {
                    return Err(IlpError::NegativeSlack { name: sys.registry.get(j).name.clone() }.into());
                }
                fixed[d + j] = cap - &fixed[j];
            }
        }

        let ycc_pos = |v: usize| ids.ycc.iter().position(|&y| y == v);
        let chi_pos = |v: usize| ids.chi.iter().position(|&c| c == v);
        let mut rows = Vec::new();
        for row in &sys.rows {
            let mut base = &row.rhs * &bins_i;
            let mut chi: [Int; 4] = Default::default();
            let mut slack = None;
            for (v, a) in &row.terms {
                if is_fixed[*v] {
                    base -= a * Int::from(fixed[*v].clone());
                } else if let Some(p) = chi_pos(*v) {
                    chi[p] = a.clone();
                } else if let Some(p) = ycc_pos(*v) {
                    slack = Some((p, a.clone()));
                } else {
                    unreachable!("variable outside α, β, χ, y^cc");
                }
            }
            if slack.is_none() && chi.iter().all(Zero::is_zero) {
                // index-determined rows hold for every guess
                if !base.is_zero() {
                    return Err(IlpError::NegativeSlack { name: format!("summed {:?} row", row.tag) }.into());
                }
                continue;
            }
            rows.push(SelectorRow { base, chi, slack });
        }

        let fixed_dot = agg.s.iter().zip(&fixed).filter(|(_, a)| !a.is_zero()).map(|(s, a)| s * a).sum();
        Ok(Family {
            n: lay.n,
            m: lay.m,
            alpha_hat,
            beta_hat,
            sizes: agg.s.clone(),
            capacity: agg.b.clone(),
            d,
            bins,
            chi_ids: ids.chi,
            ycc_ids: ids.ycc.clone(),
            uppers,
            rows,
            fixed,
            fixed_dot,
        })
    }

    /// Selector-slack multiplicities for `chi`, or why the guess is infeasible.
    pub fn selector_slacks(&self, chi: ChiGuess) -> Result<Vec<Nat>, BinPackError> {
        let mut out = vec![Nat::zero(); self.ycc_ids.len()];
        for (c, &v) in chi.0.iter().zip(&self.chi_ids) {
            if Nat::from(*c) > &self.bins * &self.uppers[v] {
                return Err(infeasible(chi, "selector sum exceeds 2n"));
            }
        }
        for row in &self.rows {
            let mut val = row.base.clone();
            for (a, c) in row.chi.iter().zip(chi.0) {
                if !a.is_zero() && c != 0 {
                    val -= a * c;
                }
            }
            match &row.slack {
                None if !val.is_zero() => return Err(infeasible(chi, "selector count row is violated")),
                None => {}
                Some((p, sigma)) => {
                    let y = (val * sigma).to_biguint().ok_or_else(|| infeasible(chi, "slack forced negative"))?;
                    if y > &self.bins * &self.uppers[self.ycc_ids[*p]] {
                        return Err(infeasible(chi, "slack exceeds 2n times its bound"));
                    }
                    out[*p] = y;
                }
            }
        }
        Ok(out)
    }

    pub fn is_admissible(&self, chi: ChiGuess) -> bool {
        self.selector_slacks(chi).is_ok()
    }

    /// Full multiplicity vector for `chi`.
    pub fn multiplicities(&self, chi: ChiGuess) -> Result<Vec<Nat>, BinPackError> {
        let ycc = self.selector_slacks(chi)?;
        let mut a = self.fixed.clone();
        let d = self.d;
        for (c, &v) in chi.0.iter().zip(&self.chi_ids) {
            a[v] = Nat::from(*c);
            a[d + v] = &self.bins * &self.uppers[v] - &a[v];
        }
        for (y, &v) in ycc.into_iter().zip(&self.ycc_ids) {
            a[d + v] = &self.bins * &self.uppers[v] - &y;
            a[v] = y;
        }
        Ok(a)
    }

    /// `sᵀa` from the cached guess-independent part plus the rest.
    fn total_size(&self, a: &[Nat]) -> Nat {
        let d = self.d;
        let mut total = self.fixed_dot.clone();
        for &v in self.chi_ids.iter().chain(&self.ycc_ids) {
            for p in [v, d + v] {
                if !a[p].is_zero() {
                    total += &self.sizes[p] * &a[p];
                }
            }
        }
        total
    }

    pub fn instance(&self, chi: ChiGuess) -> Result<BinPackingInstance, BinPackError> {
        let a = self.multiplicities(chi)?;
        let total = self.total_size(&a);
        if total != &self.capacity * &self.bins {
            return Err(BinPackError::NotTight { got: total });
        }
        Ok(BinPackingInstance {
            sizes: self.sizes.clone(),
            capacity: self.capacity.clone(),
            multiplicities: a,
            bin_budget: 2 * self.n,
            chi_hat: chi,
        })
    }

    pub fn sizes(&self) -> &Arc<Vec<Nat>> {
        &self.sizes
    }

    pub fn capacity(&self) -> &Nat {
        &self.capacity
    }
}

/// One-shot instance construction.
pub fn build_instance(
    agg: &AggregatedEquation,
    sys: &IlpSystem,
    ctx: &EncodingContext,
    ws: &WellStructuredCnf,
    chi_hat: ChiGuess,
) -> Result<BinPackingInstance, BinPackError> {
    Family::new(sys, agg, ctx, ws)?.instance(chi_hat)
}

/// `true` iff every digit of `x` in base `γ` is 1 over the low `len` digits.
pub fn is_all_ones(x: &Nat, gamma: &Nat, len: usize) -> bool {
    let mut v = x.clone();
    for _ in 0..len {
        let r = &v % gamma;
        if !r.is_one() {
            return false;
        }
        v /= gamma;
    }
    v.is_zero()
}
