//! End-to-end harness: reduce, solve the produced Bin Packing instances with
//! a search restricted to the `5n` tight configurations, decode, and compare
//! with brute-force SAT.

use std::time::{Duration, Instant};

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::aggregate::{aggregate, lift, AggregateError, AggregatedEquation, LiftedVector};
use crate::binpack::{chi_guesses, BinPackError, BinPackingInstance, ChiGuess, ChiMode, Family};
use crate::cnf::{brute_force_sat, well_structure, Assignment, CnfError, CnfFormula, Lit, WellStructuredCnf};
use crate::encode::{make_context, EncodeError, EncodingContext};
use crate::ilp::{build_system, make_solution, IlpError, IlpSystem};
use crate::witness::{
    configs_from_lambda, decode_assignment, lambda_from_assignment, satisfier, LambdaCoeffs, WitnessError,
};
use crate::Nat;

/// Largest `n` the restricted solver accepts.
pub const MAX_SOLVER_VARS: usize = 8;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cnf: {0}")]
    Cnf(#[from] CnfError),
    #[error("encode: {0}")]
    Encode(#[from] EncodeError),
    #[error("ilp: {0}")]
    Ilp(#[from] IlpError),
    #[error("aggregate: {0}")]
    Aggregate(#[from] AggregateError),
    #[error("binpack: {0}")]
    BinPack(#[from] BinPackError),
    #[error("witness: {0}")]
    Witness(#[from] WitnessError),
    #[error("verify: n = {n} exceeds the solver limit of {MAX_SOLVER_VARS}")]
    GuardExceeded { n: usize },
    #[error("verify: worker pool: {0}")]
    Pool(String),
}

/// All stages of the reduction for one well-structured formula.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub ws: WellStructuredCnf,
    pub ctx: EncodingContext,
    pub sys: IlpSystem,
    pub agg: AggregatedEquation,
    family: Result<Family, BinPackError>,
}

impl Reduction {
    pub fn new(ws: WellStructuredCnf, gamma: Option<Nat>) -> Result<Self, PipelineError> {
        let ctx = make_context(&ws, gamma)?;
        let sys = build_system(&ctx, &ws);
        let agg = aggregate(&sys);
        let family = Family::new(&sys, &agg, &ctx, &ws);
        if let Err(e) = &family {
            if !matches!(e, BinPackError::ClauseSurplus { .. }) {
                return Err(family.unwrap_err().into());
            }
        }
        Ok(Reduction { ws, ctx, sys, agg, family })
    }

    pub fn from_formula(raw: &CnfFormula, gamma: Option<Nat>) -> Result<Self, PipelineError> {
        Self::new(well_structure(raw), gamma)
    }

    pub fn n(&self) -> usize {
        self.ctx.n
    }

    pub fn m(&self) -> usize {
        self.ctx.m
    }

    /// Fails with `ClauseSurplus` when `m > 2n`: no family exists.
    pub fn family(&self) -> Result<&Family, BinPackError> {
        self.family.as_ref().map_err(Clone::clone)
    }

    pub fn guesses(&self, mode: ChiMode) -> Vec<ChiGuess> {
        chi_guesses(self.n(), self.m(), mode)
    }

    pub fn instance(&self, chi: ChiGuess) -> Result<BinPackingInstance, BinPackError> {
        self.family()?.instance(chi)
    }

    /// Lifted solution of type `t` for variable `i`.
    pub fn config(&self, i: usize, t: u8) -> Result<LiftedVector, PipelineError> {
        let s = make_solution(&self.sys, &self.ctx, &self.ws, i, t)?;
        Ok(lift(&self.sys, &s.values)?)
    }

    /// Item-type count of every instance in the family.
    pub fn item_types(&self) -> usize {
        self.agg.s.len()
    }
}

fn base_gamma_digits(x: &Nat, gamma: &Nat, len: usize) -> Option<Vec<u32>> {
    let mut v = x.clone();
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let r = &v % gamma;
        out.push(u32::try_from(&r).ok()?);
        v /= gamma;
    }
    v.is_zero().then_some(out)
}

/// Per-variable type counts with `λ1 + λ2 + 2λ3 + λ4 = w` and `λ5 <= max5`.
fn lambda_candidates(w: u32, max5: u32) -> Vec<[u32; 5]> {
    let mut out = Vec::new();
    for l3 in 0..=w / 2 {
        for l1 in 0..=w - 2 * l3 {
            for l2 in 0..=w - 2 * l3 - l1 {
                let l4 = w - 2 * l3 - l1 - l2;
                for l5 in 0..=max5 {
                    out.push([l1, l2, l3, l4, l5]);
                }
            }
        }
    }
    out
}

type Leaf<'l> = dyn FnMut(&[[u32; 5]]) -> Result<bool, PipelineError> + 'l;

struct Search<'a> {
    n: usize,
    clause_target: Vec<u32>,
    chi_target: [u32; 4],
    slack_target: u32,
    budget: u32,
    candidates: Vec<Vec<[u32; 5]>>,
    /// Clauses whose count is final once this variable is placed.
    closes: Vec<Vec<usize>>,
    occ: &'a [crate::cnf::Occurrence],
    clause: Vec<u32>,
    chi: [u32; 4],
    slack: u32,
    used: u32,
    picks: Vec<[u32; 5]>,
}

impl Search<'_> {
    fn apply(&mut self, i: usize, l: &[u32; 5], sign: bool) -> bool {
        let o = &self.occ[i];
        let step = |x: &mut u32, k: u32| if sign { *x += k } else { *x -= k };
        for (c, k) in [(o.pos1, l[0]), (o.pos2, l[1]), (o.neg, l[2])] {
            step(&mut self.clause[c], k);
        }
        for t in 0..4 {
            step(&mut self.chi[t], l[t]);
        }
        step(&mut self.slack, l[3] + l[4]);
        step(&mut self.used, l.iter().sum());
        !sign
            || ([o.pos1, o.pos2, o.neg].iter().all(|&c| self.clause[c] <= self.clause_target[c])
                && (0..4).all(|t| self.chi[t] <= self.chi_target[t])
                && self.slack <= self.slack_target
                && self.used <= self.budget
                && self.closes[i].iter().all(|&c| self.clause[c] == self.clause_target[c]))
    }

    fn dfs(
        &mut self,
        i: usize,
        leaf: &mut Leaf<'_>,
    ) -> Result<bool, PipelineError> {
        if i == self.n {
            let exact = self.chi == self.chi_target && self.slack == self.slack_target && self.used == self.budget;
            return if exact { leaf(&self.picks) } else { Ok(false) };
        }
        for k in 0..self.candidates[i].len() {
            let l = self.candidates[i][k];
            if self.apply(i, &l, true) {
                self.picks.push(l);
                let found = self.dfs(i + 1, leaf)?;
                if found {
                    return Ok(true);
                }
                self.picks.pop();
            }
            self.apply(i, &l, false);
        }
        Ok(false)
    }
}

/// Exact packing search over the tight configurations. Every full bin holds
/// one of the `5n` solution vectors, so a packing is a count vector `λ`; the
/// base-`γ` digits of `α̂1` (clauses) and `α̂2` (variables), the selector
/// counts `χ̂`, `α̂3` and the bin budget prune it, and a full sum check against
/// the multiplicities accepts the leaf.
pub fn solve_bp_restricted(red: &Reduction, inst: &BinPackingInstance) -> Result<Option<LambdaCoeffs>, PipelineError> {
    let n = red.n();
    if n > MAX_SOLVER_VARS {
        return Err(PipelineError::GuardExceeded { n });
    }
    let m = red.m();
    let ids = &red.sys.layout()?.ids;
    let a = &inst.multiplicities;
    let gamma = &red.ctx.gamma;
    let (Some(clause_target), Some(var_target)) =
        (base_gamma_digits(&a[ids.alpha[0]], gamma, m), base_gamma_digits(&a[ids.alpha[1]], gamma, n))
    else {
        return Ok(None);
    };
    let Ok(slack_target) = u32::try_from(&a[ids.alpha[2]]) else { return Ok(None) };
    let budget = inst.bin_budget as u32;

    let mut closes: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (c, clause) in red.ws.inner().clauses().iter().enumerate() {
        let last = clause.iter().map(|l| l.var).max().expect("non-empty clause");
        closes[last].push(c);
    }
    let max5 = slack_target.min(budget);
    let mut search = Search {
        n,
        clause_target,
        chi_target: inst.chi_hat.0,
        slack_target,
        budget,
        candidates: var_target.iter().map(|&w| lambda_candidates(w, max5)).collect(),
        closes,
        occ: red.ws.occurrences(),
        clause: vec![0; m],
        chi: [0; 4],
        slack: 0,
        used: 0,
        picks: Vec::with_capacity(n),
    };

    let mut cache: Vec<Option<Vec<LiftedVector>>> = vec![None; n];
    let mut leaf = |lam: &[[u32; 5]]| -> Result<bool, PipelineError> {
        let mut sum = vec![Nat::zero(); a.len()];
        for (i, l) in lam.iter().enumerate() {
            if cache[i].is_none() {
                cache[i] = Some((1..=5).map(|t| red.config(i, t)).collect::<Result<_, _>>()?);
            }
            let cfg = cache[i].as_ref().expect("filled above");
            for (t, &k) in l.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let k = Nat::from(k);
                for (acc, v) in sum.iter_mut().zip(cfg[t].x.iter().chain(&cfg[t].y)) {
                    if !v.is_zero() {
                        *acc += v * &k;
                    }
                }
            }
        }
        Ok(&sum == a)
    };
    if !search.dfs(0, &mut leaf)? {
        return Ok(None);
    }
    let lam = LambdaCoeffs(search.picks);
    lam.check_invariants()?;
    Ok(Some(lam))
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub chi_mode: ChiMode,
    pub gamma: Option<u64>,
    pub jobs: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { chi_mode: ChiMode::Reduced, gamma: None, jobs: 1 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Timings {
    pub reduce: Duration,
    pub sweep: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub input_vars: usize,
    pub input_clauses: usize,
    pub n: usize,
    pub m: usize,
    pub gamma: String,
    pub chi_mode: ChiMode,
    pub sat_answer: bool,
    pub bp_answer: bool,
    /// `sat_answer == bp_answer`, and on SAT the decoded assignment checks out.
    pub agreement: bool,
    pub feasible_chi: Option<ChiGuess>,
    pub witness: Option<LambdaCoeffs>,
    pub decoded: Option<Assignment>,
    /// Guess implied by the oracle's assignment, when satisfiable.
    pub forward_chi: Option<ChiGuess>,
    pub guess_space: usize,
    pub admissible_guesses: usize,
    pub item_types: usize,
    pub ilp_rows: usize,
    pub ilp_vars: usize,
    pub bits_capacity: u64,
    pub bits_max_size: u64,
    pub seed: Option<u64>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub timings: Timings,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| PipelineError::Pool(e.to_string()))
}

/// First guess (in canonical order) whose instance the restricted solver packs.
pub fn sweep(red: &Reduction, guesses: &[ChiGuess], jobs: usize) -> Result<Option<(ChiGuess, LambdaCoeffs)>, PipelineError> {
    if red.n() > MAX_SOLVER_VARS {
        return Err(PipelineError::GuardExceeded { n: red.n() });
    }
    let Ok(family) = red.family() else { return Ok(None) };
    let run = || {
        guesses.par_iter().find_map_first(|&g| {
            let inst = match family.instance(g) {
                Ok(inst) => inst,
                Err(BinPackError::InfeasibleGuess { .. }) => return None,
                Err(e) => return Some(Err(PipelineError::from(e))),
            };
            match solve_bp_restricted(red, &inst) {
                Ok(Some(lam)) => Some(Ok((g, lam))),
                Ok(None) => None,
                Err(e) => Some(Err(e)),
            }
        })
    };
    pool(jobs)?.install(run).transpose()
}

pub fn end_to_end(raw: &CnfFormula, opts: SolveOptions) -> Result<Report, PipelineError> {
    let t0 = Instant::now();
    let sat = brute_force_sat(raw)?;
    let red = Reduction::from_formula(raw, opts.gamma.map(Nat::from))?;
    let reduce = t0.elapsed();
    let ws = &red.ws;
    let mut notes = Vec::new();

    let ws_sat = brute_force_sat(ws.inner())?;
    if ws_sat.is_some() != sat.is_some() {
        notes.push("normalized formula disagrees with the input on satisfiability".into());
    }

    let guesses = red.guesses(opts.chi_mode);
    let (admissible, found) = match red.family() {
        Err(BinPackError::ClauseSurplus { m, bins }) => {
            notes.push(format!("{m} clauses exceed {bins} bins; the family is empty"));
            (0, None)
        }
        Err(e) => return Err(e.into()),
        Ok(family) => {
            let admissible = guesses.iter().filter(|&&g| family.is_admissible(g)).count();
            (admissible, sweep(&red, &guesses, opts.jobs)?)
        }
    };
    let sweep_time = t0.elapsed() - reduce;

    let mut decoded = None;
    let mut agreement = found.is_some() == sat.is_some() && ws_sat.is_some() == sat.is_some();
    if let Some((_, lam)) = &found {
        match decode_assignment(ws, lam) {
            Ok(phi) => {
                let tight = lam
                    .configs()
                    .into_iter()
                    .map(|(i, t)| red.config(i, t).map(|v| red.agg.satisfied_by(&v)))
                    .collect::<Result<Vec<bool>, _>>()?;
                if !tight.iter().all(|&b| b) {
                    notes.push("a packed configuration is not tight".into());
                    agreement = false;
                }
                decoded = Some(phi);
            }
            Err(e) => {
                notes.push(format!("decoding failed: {e}"));
                agreement = false;
            }
        }
    }

    let mut forward_chi = None;
    if let Some(phi) = &ws_sat {
        let s = satisfier(ws, phi)?;
        let lam = lambda_from_assignment(ws, phi, &s);
        if red.family().is_ok() {
            let (_, chi) = configs_from_lambda(&red.sys, &red.ctx, ws, &lam)?;
            forward_chi = Some(chi);
        }
    }

    let (ilp_rows, ilp_vars) = (red.sys.num_rows(), red.sys.num_vars());
    Ok(Report {
        input_vars: raw.num_vars(),
        input_clauses: raw.num_clauses(),
        n: red.n(),
        m: red.m(),
        gamma: red.ctx.gamma.to_string(),
        chi_mode: opts.chi_mode,
        sat_answer: sat.is_some(),
        bp_answer: found.is_some(),
        agreement,
        feasible_chi: found.as_ref().map(|(g, _)| *g),
        witness: found.map(|(_, l)| l),
        decoded,
        forward_chi,
        guess_space: guesses.len(),
        admissible_guesses: admissible,
        item_types: red.item_types(),
        ilp_rows,
        ilp_vars,
        bits_capacity: red.agg.b.bits(),
        bits_max_size: red.agg.s.iter().map(|s| s.bits()).max().unwrap_or(0),
        seed: None,
        notes,
        timings: Timings { reduce, sweep: sweep_time, total: t0.elapsed() },
    })
}

/// Cyclic well-structured formula with `m = n`: clause `i` is
/// `(v_i ∨ v_{i+1} ∨ ¬v_{i+2})` with indices mod `n`.
pub fn synthetic_formula(n: usize) -> Result<WellStructuredCnf, CnfError> {
    assert!(n.is_power_of_two(), "n must be a power of two");
    let clauses = (0..n).map(|i| vec![Lit::pos(i), Lit::pos((i + 1) % n), Lit::neg((i + 2) % n)]).collect();
    WellStructuredCnf::try_new(CnfFormula::new(n, clauses)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeRow {
    pub n: usize,
    pub m: usize,
    pub item_types: usize,
    pub ilp_rows: usize,
    pub ilp_vars: usize,
    pub bits_capacity: u64,
    pub bits_max_size: u64,
    pub bits_max_multiplicity: u64,
    /// `log2 B / (n² log2² n)`; undefined at `n = 1`.
    pub ratio: Option<f64>,
}

/// Growth measurements over the synthetic family at each `n`.
pub fn size_report(n_values: &[usize]) -> Result<Vec<SizeRow>, PipelineError> {
    n_values
        .par_iter()
        .map(|&n| {
            let ws = synthetic_formula(n)?;
            let red = Reduction::new(ws, None)?;
            let family = red.family()?;
            let phi = Assignment::new(vec![true; n]);
            let lam = lambda_from_assignment(&red.ws, &phi, &satisfier(&red.ws, &phi)?);
            let a = family.multiplicities(lam.implied_chi())?;
            let bits_b = red.agg.b.bits();
            let ln = (n as f64).log2();
            let ratio = (n > 1).then(|| bits_b as f64 / ((n * n) as f64 * ln * ln));
            Ok(SizeRow {
                n,
                m: red.m(),
                item_types: red.item_types(),
                ilp_rows: red.sys.num_rows(),
                ilp_vars: red.sys.num_vars(),
                bits_capacity: bits_b,
                bits_max_size: red.agg.s.iter().map(|s| s.bits()).max().unwrap_or(0),
                bits_max_multiplicity: a.iter().map(|x| x.bits()).max().unwrap_or(0),
                ratio,
            })
        })
        .collect()
}

/// Item-type bound `d <= c·log2 n + c'` checked by the growth test.
pub const ITEM_TYPES_SLOPE: usize = 48;
pub const ITEM_TYPES_OFFSET: usize = 80;

#[derive(Debug, Clone, Serialize)]
pub struct GrowthCheck {
    pub item_types_within_bound: bool,
    pub item_types_increasing: bool,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub ratio_spread: f64,
    pub ratio_within_4x: bool,
}

pub fn growth_check(rows: &[SizeRow]) -> GrowthCheck {
    let within = rows.iter().all(|r| {
        let l = r.n.trailing_zeros() as usize;
        r.item_types <= ITEM_TYPES_SLOPE * l + ITEM_TYPES_OFFSET
    });
    let increasing = rows.windows(2).all(|w| w[0].item_types < w[1].item_types);
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let spread = if ratios.is_empty() { 1.0 } else { hi / lo };
    GrowthCheck {
        item_types_within_bound: within,
        item_types_increasing: increasing,
        ratio_min: lo,
        ratio_max: hi,
        ratio_spread: spread,
        ratio_within_4x: spread < 4.0,
    }
}

/// Raw formulas whose normalized size the restricted solver can handle.
#[derive(Debug, Clone)]
pub struct RandomSuite {
    pub seed: u64,
    pub formulas: Vec<CnfFormula>,
    /// Draws rejected because normalization exceeded the solver limit.
    pub resampled: usize,
}

fn random_clause(rng: &mut ChaCha8Rng, vars: usize, width: usize) -> Vec<Lit> {
    let mut pool: Vec<usize> = (0..vars).collect();
    pool.shuffle(rng);
    pool[..width].iter().map(|&v| Lit { var: v, positive: rng.gen_bool(0.5) }).collect()
}

/// `count` formulas of uniform 3-literal clauses over 3 or 4 variables.
pub fn random_3sat_suite(seed: u64, count: usize) -> RandomSuite {
    random_suite(seed, count, |rng| {
        let vars = rng.gen_range(3..=4);
        let clauses = rng.gen_range(1..=4);
        let cls = (0..clauses).map(|_| random_clause(rng, vars, 3)).collect();
        CnfFormula::new(vars, cls).expect("generated clauses are valid")
    })
}

/// `count` formulas with clause widths 1..=3 over 1..=4 variables; these are
/// unsatisfiable far more often than the 3-literal ones.
pub fn random_mixed_suite(seed: u64, count: usize) -> RandomSuite {
    random_suite(seed, count, |rng| {
        let vars = rng.gen_range(1..=4);
        let clauses = rng.gen_range(1..=6);
        let cls = (0..clauses)
            .map(|_| {
                let w = rng.gen_range(1..=3.min(vars));
                random_clause(rng, vars, w)
            })
            .collect();
        CnfFormula::new(vars, cls).expect("generated clauses are valid")
    })
}

fn random_suite(seed: u64, count: usize, mut draw: impl FnMut(&mut ChaCha8Rng) -> CnfFormula) -> RandomSuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut formulas = Vec::with_capacity(count);
    let mut resampled = 0;
    while formulas.len() < count {
        let f = draw(&mut rng);
        if well_structure(&f).num_vars() > MAX_SOLVER_VARS {
            resampled += 1;
            continue;
        }
        formulas.push(f);
    }
    RandomSuite { seed, formulas, resampled }
}

/// Hand-picked corner cases: empty inputs, contradictions, padding.
pub fn edge_cases() -> Vec<(&'static str, CnfFormula)> {
    let f = |nv: usize, cls: &[&[i64]]| CnfFormula::from_dimacs_clauses(nv, cls).expect("valid edge case");
    vec![
        ("no variables", f(0, &[])),
        ("no clauses", f(3, &[])),
        ("unit clause", f(1, &[&[1]])),
        ("contradiction", f(1, &[&[1], &[-1]])),
        ("two-variable example", f(2, &[&[1, 2], &[1, 2], &[-1, -2]])),
        ("all four binary clauses", f(2, &[&[1, 2], &[1, -2], &[-1, 2], &[-1, -2]])),
        ("clause surplus", f(1, &[&[1], &[1], &[-1]])),
        ("or with both negated", f(2, &[&[1, 2], &[-1], &[-2]])),
        ("one true among three", f(3, &[&[1, 2, 3], &[-1, -2], &[-2, -3], &[-1, -3]])),
        ("tautology input", f(1, &[&[1, -1]])),
        ("chain", f(2, &[&[-1], &[1, 2], &[-2]])),
        ("tautology with partner", f(2, &[&[1, -1, 2], &[-2], &[2, 1]])),
    ]
}
