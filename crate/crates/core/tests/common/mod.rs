#![allow(dead_code)]

use proptest::prelude::*;
use sat2binpack::cnf::{well_structure, CnfFormula, Lit, WellStructuredCnf};

pub fn n2_raw() -> CnfFormula {
    CnfFormula::from_dimacs_clauses(2, &[&[1, 2], &[1, 2], &[-1, -2]]).unwrap()
}

pub fn n2() -> WellStructuredCnf {
    well_structure(&n2_raw())
}

/// Formula whose normalized variable count is exactly `n`: the cyclic family
/// plus the normalized n = 2 example.
pub fn well_structured_family(n: usize) -> Vec<WellStructuredCnf> {
    let mut out = vec![sat2binpack::verify::synthetic_formula(n).unwrap()];
    if n == 2 {
        out.push(n2());
    }
    out
}

pub fn clause_strategy(vars: usize) -> impl Strategy<Value = Vec<Lit>> {
    prop::collection::vec((0..vars, any::<bool>()), 1..=3)
        .prop_map(|ls| ls.into_iter().map(|(var, positive)| Lit { var, positive }).collect())
}

pub fn formula_strategy(max_vars: usize, max_clauses: usize) -> impl Strategy<Value = CnfFormula> {
    (1..=max_vars).prop_flat_map(move |nv| {
        prop::collection::vec(clause_strategy(nv), 0..=max_clauses)
            .prop_map(move |cls| CnfFormula::new(nv, cls).unwrap())
    })
}

/// Raw formulas whose normalization has at most `max_n` variables.
pub fn small_ws_strategy(max_n: usize) -> impl Strategy<Value = WellStructuredCnf> {
    formula_strategy(4, 5).prop_map(|f| well_structure(&f)).prop_filter("normalized size", move |w| w.num_vars() <= max_n)
}

use sat2binpack::ilp::{IlpSystem, Role, Row, VarRegistry};
use sat2binpack::{Int, Nat};

/// `Σ coeffs·x = rhs` rows over variables with the given upper bounds.
pub fn toy_system(uppers: &[u32], rows: &[(&[i64], i64)]) -> IlpSystem {
    let mut reg = VarRegistry::new();
    for (j, &u) in uppers.iter().enumerate() {
        reg.push(format!("x{}", j + 1), Role::Free, Nat::from(u));
    }
    let rows = rows
        .iter()
        .map(|(coeffs, rhs)| {
            let terms = coeffs.iter().enumerate().filter(|(_, a)| **a != 0).map(|(j, &a)| (j, Int::from(a))).collect();
            Row::new(terms, Int::from(*rhs))
        })
        .collect();
    IlpSystem::new(reg, rows)
}

pub fn toy_systems() -> Vec<IlpSystem> {
    vec![
        toy_system(&[1, 1], &[(&[1, 1], 2)]),
        toy_system(&[2, 2, 2], &[(&[1, -1, 0], 0), (&[1, 0, 1], 2)]),
        toy_system(&[3, 2, 4], &[(&[2, 3, -1], 4)]),
    ]
}

/// Every integer point of the box `0 <= v_j <= bounds_j`.
pub fn box_points(bounds: &[Nat]) -> Vec<Vec<Nat>> {
    let mut out = vec![Vec::new()];
    for b in bounds {
        let hi: u64 = b.try_into().expect("small box");
        out = out.into_iter().flat_map(|p| (0..=hi).map(move |v| {
            let mut q = p.clone();
            q.push(Nat::from(v));
            q
        })).collect();
    }
    out
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sat2binpack::aggregate::{aggregate, lift, mechanical_lift, verify_roundtrip};
use sat2binpack::encode::make_context;
use sat2binpack::ilp::{build_system, check_solution, make_solution};

fn below(rng: &mut ChaCha8Rng, upper: &Nat) -> Nat {
    let bytes = (upper.bits() / 8 + 2) as usize;
    let raw: Vec<u8> = (0..bytes).map(|_| rng.gen()).collect();
    Nat::from_bytes_le(&raw) % (upper + 1u32)
}

#[derive(Debug, Default)]
pub struct MembershipTally {
    pub samples: usize,
    pub feasible: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Random in-bound vectors, lifted mechanically, checked for membership on
/// both sides. A third are uniform in the box of a toy system, a third uniform
/// in the box of a pipeline system, a third single-coordinate perturbations of
/// pipeline solutions (kept in bounds), with every fifth left unperturbed.
pub fn random_membership(seed: u64, samples: usize) -> MembershipTally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let toys = toy_systems();
    let pipes: Vec<_> = [n2(), sat2binpack::verify::synthetic_formula(4).unwrap()]
        .into_iter()
        .map(|ws| {
            let ctx = make_context(&ws, None).unwrap();
            let sys = build_system(&ctx, &ws);
            (ws, ctx, sys)
        })
        .collect();
    let toy_aggs: Vec<_> = toys.iter().map(aggregate).collect();
    let pipe_aggs: Vec<_> = pipes.iter().map(|(_, _, s)| aggregate(s)).collect();
    let mut tally = MembershipTally::default();
    for k in 0..samples {
        let (sys, agg, x) = match k % 3 {
            0 => {
                let t = rng.gen_range(0..toys.len());
                let x = toys[t].uppers().iter().map(|u| below(&mut rng, u)).collect::<Vec<_>>();
                (&toys[t], &toy_aggs[t], x)
            }
            1 => {
                let p = rng.gen_range(0..pipes.len());
                let x = pipes[p].2.uppers().iter().map(|u| below(&mut rng, u)).collect::<Vec<_>>();
                (&pipes[p].2, &pipe_aggs[p], x)
            }
            _ => {
                let p = rng.gen_range(0..pipes.len());
                let (ws, ctx, sys) = &pipes[p];
                let i = rng.gen_range(0..ctx.n);
                let t = rng.gen_range(1..=5u8);
                let mut x = make_solution(sys, ctx, ws, i, t).unwrap().values;
                if k % 5 != 2 {
                    let j = rng.gen_range(0..x.len());
                    let u = sys.registry.upper(j).clone();
                    x[j] = if x[j] < u && (x[j] == Nat::from(0u32) || rng.gen_bool(0.5)) {
                        &x[j] + 1u32
                    } else if x[j] > Nat::from(0u32) {
                        &x[j] - 1u32
                    } else {
                        x[j].clone()
                    };
                }
                (sys, &pipe_aggs[p], x)
            }
        };
        let original = check_solution(sys, &x).unwrap();
        let v = mechanical_lift(sys, &x);
        let aggregated = agg.satisfied_by(&v);
        tally.samples += 1;
        tally.feasible += usize::from(original);
        tally.false_positives += usize::from(aggregated && !original);
        tally.false_negatives += usize::from(!aggregated && original);
        if original {
            assert_eq!(lift(sys, &x).unwrap(), v);
            assert!(verify_roundtrip(sys, agg, &v).unwrap());
        }
    }
    tally
}
