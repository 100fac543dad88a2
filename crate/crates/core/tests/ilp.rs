mod common;

use common::{small_ws_strategy, well_structured_family};
use num_traits::{One, Pow, Zero};
use proptest::prelude::*;
use sat2binpack::cnf::WellStructuredCnf;
use sat2binpack::encode::{c_terms, make_context, EncodingContext};
use sat2binpack::ilp::{
    build_system, build_system_with, check_solution, enumerate_solutions, linearize_selector, make_solution,
    BuildOptions, IlpError, IlpSystem,
};
use sat2binpack::{Int, Nat};

fn setup(ws: &WellStructuredCnf) -> (EncodingContext, IlpSystem) {
    let ctx = make_context(ws, None).unwrap();
    let sys = build_system(&ctx, ws);
    (ctx, sys)
}

/// The five α-vectors of variable `i`, in type order.
fn expected_alphas(ctx: &EncodingContext, ws: &WellStructuredCnf, i: usize) -> [[Nat; 3]; 5] {
    let c = c_terms(ctx, ws, i);
    let g = ctx.gamma_pow(i);
    let (z, one) = (Nat::zero(), Nat::one());
    [
        [c.c_pos1, g.clone(), z.clone()],
        [c.c_pos2, g.clone(), z.clone()],
        [c.c_neg, &g * 2u32, z.clone()],
        [z.clone(), g, one.clone()],
        [z.clone(), z, one],
    ]
}

#[test]
fn dimensions_follow_log_n() {
    for n in [1usize, 2, 4, 8, 16] {
        let l = n.trailing_zeros() as usize;
        let (_, sys) = setup(&sat2binpack::verify::synthetic_formula(n).unwrap());
        assert_eq!(sys.num_rows(), 15 * l + 27, "rows at n = {n}");
        assert_eq!(sys.num_vars(), 20 * l + 35, "vars at n = {n}");
    }
}

#[test]
fn enumeration_matches_constructed_solutions() {
    for n in [1, 2, 4, 8] {
        for ws in well_structured_family(n) {
            let (ctx, sys) = setup(&ws);
            let sols = enumerate_solutions(&sys, &ctx).unwrap();
            assert_eq!(sols.len(), 5 * n);
            for (k, s) in sols.iter().enumerate() {
                let (i, t) = s.index_and_type(&sys).unwrap();
                assert_eq!((i, t as usize), (k / 5, k % 5 + 1));
                assert_eq!(s, &make_solution(&sys, &ctx, &ws, i, t).unwrap());
                assert_eq!(s.alpha(&sys).unwrap(), expected_alphas(&ctx, &ws, i)[k % 5]);
            }
        }
    }
}

#[test]
fn block_variables_hold_the_clause_terms() {
    for n in [1, 2, 4, 8] {
        for ws in well_structured_family(n) {
            let (ctx, sys) = setup(&ws);
            let ids = &sys.layout().unwrap().ids;
            for i in 0..n {
                let s = make_solution(&sys, &ctx, &ws, i, 5).unwrap();
                let direct = (&ctx.z / Pow::pow(&ctx.gamma_m, 3 * i as u32)) % Pow::pow(&ctx.gamma_m, 3u32);
                assert_eq!(s.values[*ids.z.last().unwrap()], direct);
                let o = ws.occurrences()[i];
                for (v, e) in ids.c.iter().zip([o.pos1, o.pos2, o.neg]) {
                    assert_eq!(s.values[*v], ctx.gamma_pow(e));
                }
            }
        }
    }
}

#[test]
fn uncapped_system_is_looser() {
    let ws = common::n2();
    let ctx = make_context(&ws, None).unwrap();
    let sys = build_system_with(&ctx, &ws, BuildOptions { selector_caps: false });
    // type 5 with α1 = 1 and recomputed slacks satisfies every remaining row
    let capped = build_system(&ctx, &ws);
    let mut s = make_solution(&capped, &ctx, &ws, 0, 5).unwrap().values;
    let ids = &capped.layout().unwrap().ids;
    s[ids.alpha[0]] = Nat::one();
    assert!(!check_solution(&capped, &s).unwrap());
    let loose_ids = &sys.layout().unwrap().ids;
    let mut t = vec![Nat::zero(); sys.num_vars()];
    for (k, var) in sys.registry.iter().enumerate() {
        if let Some(j) = capped.registry.index_of(&var.name) {
            t[k] = s[j].clone();
        }
    }
    assert_eq!(t[loose_ids.alpha[0]], Nat::one());
    let mut known: Vec<bool> = vec![true; sys.num_vars()];
    for row in &sys.rows {
        if let Some(v) = row.slack {
            known[v] = false;
        }
    }
    sys.complete_slacks(&mut t, &mut known).unwrap();
    assert!(check_solution(&sys, &t).unwrap());
    match enumerate_solutions(&sys, &ctx) {
        Err(IlpError::Underdetermined { .. }) => {}
        Ok(sols) => assert!(sols.len() > 10),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn selector_linearization_grid() {
    for k in 1..=3usize {
        for u in 0..=3i64 {
            let rows = linearize_selector(k, &Nat::from(u as u64));
            let width = 1 + 2 * k;
            let mut point = vec![Int::zero(); width];
            let xs = (u + 1).pow(k as u32);
            for y in -1..=u + 1 {
                for xcode in 0..xs {
                    for chi in 0..1u32 << k {
                        if chi.count_ones() > 1 {
                            continue;
                        }
                        point[0] = y.into();
                        let mut c = xcode;
                        let mut want = 0;
                        for j in 0..k {
                            let x = c % (u + 1);
                            c /= u + 1;
                            let on = i64::from(chi >> j & 1);
                            point[1 + j] = x.into();
                            point[1 + k + j] = on.into();
                            want += x * on;
                        }
                        let holds = rows.iter().all(|r| r.holds(&point));
                        assert_eq!(holds, y == want, "k={k} u={u} y={y} x={xcode} chi={chi:b}");
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_constructed_solution_is_feasible(ws in small_ws_strategy(8)) {
        let (ctx, sys) = setup(&ws);
        for i in 0..ctx.n {
            let alphas = expected_alphas(&ctx, &ws, i);
            for t in 1..=5u8 {
                let s = make_solution(&sys, &ctx, &ws, i, t).unwrap();
                prop_assert!(check_solution(&sys, &s.values).unwrap());
                prop_assert!(s.values.iter().zip(sys.uppers()).all(|(v, u)| v <= &u));
                prop_assert_eq!(s.index_and_type(&sys).unwrap(), (i, t));
                prop_assert_eq!(&s.alpha(&sys).unwrap(), &alphas[t as usize - 1]);
            }
        }
    }

    #[test]
    fn perturbed_solutions_fail(ws in small_ws_strategy(4), pick in any::<prop::sample::Index>(), up in any::<bool>()) {
        let (ctx, sys) = setup(&ws);
        let s = make_solution(&sys, &ctx, &ws, 0, 1).unwrap();
        let mut v = s.values.clone();
        let j = pick.index(v.len());
        if up {
            v[j] += 1u32;
        } else if v[j].is_zero() {
            return Ok(());
        } else {
            v[j] -= 1u32;
        }
        prop_assert!(!check_solution(&sys, &v).unwrap());
    }
}
