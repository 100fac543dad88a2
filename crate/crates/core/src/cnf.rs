//! CNF formulas, DIMACS parsing, and normalization into well-structured form.
//!
//! A well-structured formula has every variable occurring exactly twice
//! positively and once negatively, and a power-of-two variable count. The
//! padding clause `(v ∨ v ∨ ¬v)` counts its repeated literal twice.

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

/// Largest formula the brute-force oracle will touch.
pub const BRUTE_FORCE_MAX_VARS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CnfError {
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("malformed header: {0:?}")]
    MalformedHeader(String),
    #[error("line {line}: invalid token {token:?}")]
    InvalidToken { line: usize, token: String },
    #[error("line {line}: literal {lit} out of range for {num_vars} variables")]
    LiteralOutOfRange { line: usize, lit: i64, num_vars: usize },
    #[error("clause {clause} has {len} distinct literals, at most 3 are supported")]
    ClauseTooLong { clause: usize, len: usize },
    #[error("clause {clause} is empty")]
    EmptyClause { clause: usize },
    #[error("last clause is not terminated by 0")]
    UnterminatedClause,
    #[error("header declares {declared} clauses, found {found}")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("variable index {var} out of range for {num_vars} variables")]
    VarOutOfRange { var: usize, num_vars: usize },
    #[error("formula has {0} variables, brute force is limited to {BRUTE_FORCE_MAX_VARS}")]
    TooLarge(usize),
    #[error("formula is not well-structured: {0}")]
    NotWellStructured(String),
}

/// A literal over a 0-based variable index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit {
    pub var: usize,
    pub positive: bool,
}

impl Lit {
    pub fn pos(var: usize) -> Self {
        Lit { var, positive: true }
    }

    pub fn neg(var: usize) -> Self {
        Lit { var, positive: false }
    }

    pub fn negate(self) -> Self {
        Lit { var: self.var, positive: !self.positive }
    }

    pub fn eval(self, values: &[bool]) -> bool {
        values[self.var] == self.positive
    }

    /// Signed 1-based DIMACS literal.
    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64 + 1;
        if self.positive {
            v
        } else {
            -v
        }
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "v{}", self.var)
        } else {
            write!(f, "¬v{}", self.var)
        }
    }
}

pub type Clause = Vec<Lit>;

/// Formula with 1..=3 literals per clause.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Result<Self, CnfError> {
        for (ci, c) in clauses.iter().enumerate() {
            if c.is_empty() {
                return Err(CnfError::EmptyClause { clause: ci });
            }
            if c.len() > 3 {
                return Err(CnfError::ClauseTooLong { clause: ci, len: c.len() });
            }
            if let Some(l) = c.iter().find(|l| l.var >= num_vars) {
                return Err(CnfError::VarOutOfRange { var: l.var, num_vars });
            }
        }
        Ok(CnfFormula { num_vars, clauses })
    }

    /// Convenience constructor from signed 1-based literals.
    pub fn from_dimacs_clauses(num_vars: usize, clauses: &[&[i64]]) -> Result<Self, CnfError> {
        let cls = clauses
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&l| {
                        let var = l.unsigned_abs() as usize - 1;
                        Lit { var, positive: l > 0 }
                    })
                    .collect()
            })
            .collect();
        Self::new(num_vars, cls)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn is_satisfied_by(&self, a: &Assignment) -> bool {
        a.len() == self.num_vars
            && self.clauses.iter().all(|c| c.iter().any(|l| l.eval(a.values())))
    }

    /// Canonical DIMACS text: header, then one clause per line.
    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                out.push_str(&l.to_dimacs().to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn new(values: Vec<bool>) -> Self {
        Assignment(values)
    }

    pub fn values(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `0`/`1` string, variable 0 first.
    pub fn to_bits(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl Serialize for Assignment {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_bits())
    }
}

/// Clause indices of a variable's three occurrences, `pos1 <= pos2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Occurrence {
    pub pos1: usize,
    pub pos2: usize,
    pub neg: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WellStructuredCnf {
    inner: CnfFormula,
    occ: Vec<Occurrence>,
}

impl WellStructuredCnf {
    /// Checks the structural invariants and indexes occurrences.
    pub fn try_new(inner: CnfFormula) -> Result<Self, CnfError> {
        let n = inner.num_vars;
        if n == 0 || !n.is_power_of_two() {
            return Err(CnfError::NotWellStructured(format!("{n} variables is not a power of two")));
        }
        if inner.clauses.len() > 3 * n {
            return Err(CnfError::NotWellStructured(format!(
                "{} clauses exceed 3n = {}",
                inner.clauses.len(),
                3 * n
            )));
        }
        let mut pos: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut neg: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (ci, c) in inner.clauses.iter().enumerate() {
            for l in c {
                if l.positive {
                    pos[l.var].push(ci);
                } else {
                    neg[l.var].push(ci);
                }
            }
        }
        let mut occ = Vec::with_capacity(n);
        for v in 0..n {
            if pos[v].len() != 2 || neg[v].len() != 1 {
                return Err(CnfError::NotWellStructured(format!(
                    "v{v} occurs {}+/{}-",
                    pos[v].len(),
                    neg[v].len()
                )));
            }
            occ.push(Occurrence { pos1: pos[v][0], pos2: pos[v][1], neg: neg[v][0] });
        }
        Ok(WellStructuredCnf { inner, occ })
    }

    pub fn inner(&self) -> &CnfFormula {
        &self.inner
    }

    pub fn num_vars(&self) -> usize {
        self.inner.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.inner.clauses.len()
    }

    pub fn occurrences(&self) -> &[Occurrence] {
        &self.occ
    }

    pub fn into_inner(self) -> CnfFormula {
        self.inner
    }
}

/// Parses DIMACS CNF. Duplicate literals inside a clause are merged;
/// clauses containing both `v` and `¬v` are kept.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, CnfError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut cur: Clause = Vec::new();
    let mut open = false;

    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = ln + 1;
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(CnfError::MalformedHeader(line.to_string()));
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(CnfError::MalformedHeader(line.to_string()));
            }
            let v = parts[2].parse().map_err(|_| CnfError::MalformedHeader(line.to_string()))?;
            let c = parts[3].parse().map_err(|_| CnfError::MalformedHeader(line.to_string()))?;
            header = Some((v, c));
            continue;
        }
        let (nv, _) = header.ok_or(CnfError::MissingHeader)?;
        for tok in line.split_whitespace() {
            let lit: i64 = tok
                .parse()
                .map_err(|_| CnfError::InvalidToken { line: lineno, token: tok.to_string() })?;
            if lit == 0 {
                if cur.is_empty() {
                    return Err(CnfError::EmptyClause { clause: clauses.len() });
                }
                if cur.len() > 3 {
                    return Err(CnfError::ClauseTooLong { clause: clauses.len(), len: cur.len() });
                }
                clauses.push(std::mem::take(&mut cur));
                open = false;
                continue;
            }
            if lit.unsigned_abs() as usize > nv {
                return Err(CnfError::LiteralOutOfRange { line: lineno, lit, num_vars: nv });
            }
            let l = Lit { var: lit.unsigned_abs() as usize - 1, positive: lit > 0 };
            if !cur.contains(&l) {
                cur.push(l);
            }
            open = true;
        }
    }
    let (nv, nc) = header.ok_or(CnfError::MissingHeader)?;
    if open {
        return Err(CnfError::UnterminatedClause);
    }
    if clauses.len() != nc {
        return Err(CnfError::ClauseCountMismatch { declared: nc, found: clauses.len() });
    }
    CnfFormula::new(nv, clauses)
}

/// Lexicographically first satisfying assignment (false < true, v0 most
/// significant), or `None` when unsatisfiable.
pub fn brute_force_sat(f: &CnfFormula) -> Result<Option<Assignment>, CnfError> {
    let n = f.num_vars;
    if n > BRUTE_FORCE_MAX_VARS {
        return Err(CnfError::TooLarge(n));
    }
    // bit (n-1-v) of the counter holds variable v
    let masks: Vec<(u32, u32)> = f
        .clauses
        .iter()
        .map(|c| {
            c.iter().fold((0u32, 0u32), |(p, q), l| {
                let b = 1u32 << (n - 1 - l.var);
                if l.positive {
                    (p | b, q)
                } else {
                    (p, q | b)
                }
            })
        })
        .collect();
    for a in 0u32..(1u32 << n) {
        if masks.iter().all(|&(p, q)| a & p != 0 || !a & q != 0) {
            let values = (0..n).map(|v| a >> (n - 1 - v) & 1 == 1).collect();
            return Ok(Some(Assignment(values)));
        }
    }
    Ok(None)
}

/// Occurrence record of variable `i`.
pub fn occurrence_index(ws: &WellStructuredCnf, i: usize) -> Occurrence {
    ws.occ[i]
}

fn polarity_counts(num_vars: usize, clauses: &[Clause]) -> Vec<(usize, usize)> {
    let mut cnt = vec![(0usize, 0usize); num_vars];
    for c in clauses {
        for l in c {
            if l.positive {
                cnt[l.var].0 += 1;
            } else {
                cnt[l.var].1 += 1;
            }
        }
    }
    cnt
}

/// Normalizes `f` into an equisatisfiable well-structured formula.
///
/// Pure literals are eliminated to a fixpoint first, so every surviving
/// variable has both polarities. Variables with 2 or more than 3 occurrences
/// are then split along an implication cycle, `(1+, 2-)` variables are
/// flipped, and fresh padding variables fill up to a power of two.
pub fn well_structure(f: &CnfFormula) -> WellStructuredCnf {
    let mut clauses: Vec<Clause> = f.clauses.clone();
    let mut nv = f.num_vars;

    loop {
        let cnt = polarity_counts(nv, &clauses);
        let pure: Vec<bool> = cnt.iter().map(|&(p, q)| (p == 0) != (q == 0)).collect();
        if !pure.iter().any(|&b| b) {
            break;
        }
        clauses.retain(|c| !c.iter().any(|l| pure[l.var]));
    }

    // Cycle split. The variable keeps its first occurrence, later occurrences
    // get fresh variables in scan order, and the cycle clauses force equality.
    let mut positions: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv];
    for (ci, c) in clauses.iter().enumerate() {
        for (li, l) in c.iter().enumerate() {
            positions[l.var].push((ci, li));
        }
    }
    let mut cycles: Vec<Clause> = Vec::new();
    for (v, pos) in positions.iter().enumerate() {
        let k = pos.len();
        if k == 0 || k == 3 {
            continue;
        }
        let mut ring = vec![v];
        for &(ci, li) in &pos[1..] {
            let fresh = nv;
            nv += 1;
            clauses[ci][li].var = fresh;
            ring.push(fresh);
        }
        for t in 0..k {
            cycles.push(vec![Lit::pos(ring[t]), Lit::neg(ring[(t + 1) % k])]);
        }
    }
    clauses.extend(cycles);

    let cnt = polarity_counts(nv, &clauses);
    for c in clauses.iter_mut() {
        for l in c.iter_mut() {
            if cnt[l.var] == (1, 2) {
                l.positive = !l.positive;
            }
        }
    }

    // Drop variables that no longer occur, keeping relative order.
    let mut remap = vec![usize::MAX; nv];
    let mut next = 0;
    for (v, &(p, q)) in cnt.iter().enumerate() {
        if p + q > 0 {
            remap[v] = next;
            next += 1;
        }
    }
    for c in clauses.iter_mut() {
        for l in c.iter_mut() {
            l.var = remap[l.var];
        }
    }

    let target = next.max(1).next_power_of_two();
    for v in next..target {
        clauses.push(vec![Lit::pos(v), Lit::pos(v), Lit::neg(v)]);
    }
    let inner = CnfFormula { num_vars: target, clauses };
    WellStructuredCnf::try_new(inner).expect("normalization produced a well-structured formula")
}
