mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{box_points, random_membership, toy_systems, well_structured_family};
use num_traits::Pow;
use rayon::prelude::*;
use sat2binpack::aggregate::{aggregate, lift, verify_roundtrip, LiftedVector};
use sat2binpack::binpack::{BinPackError, ChiMode};
use sat2binpack::cli::run_with;
use sat2binpack::cnf::{brute_force_sat, well_structure, CnfFormula, WellStructuredCnf};
use sat2binpack::encode::{c_terms, make_context};
use sat2binpack::ilp::{build_system, check_solution, enumerate_solutions, linearize_selector, make_solution};
use sat2binpack::verify::{
    edge_cases, end_to_end, growth_check, random_3sat_suite, random_mixed_suite, size_report, ITEM_TYPES_OFFSET,
    ITEM_TYPES_SLOPE,
};
use sat2binpack::witness::decode_assignment;
use sat2binpack::{Int, Nat, Reduction, SolveOptions};

const SEED: u64 = 2024;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Random 3-SAT suite, mixed-width suite and corner cases.
fn suite() -> Vec<(String, CnfFormula)> {
    let mut out: Vec<(String, CnfFormula)> = edge_cases().into_iter().map(|(n, f)| (n.to_string(), f)).collect();
    let main = random_3sat_suite(SEED, 100);
    let mixed = random_mixed_suite(SEED + 1, 30);
    out.extend(main.formulas.into_iter().enumerate().map(|(i, f)| (format!("random #{i}"), f)));
    out.extend(mixed.formulas.into_iter().enumerate().map(|(i, f)| (format!("mixed #{i}"), f)));
    out
}

/// Normalized formulas with `n <= 8`: the cyclic family and the suite.
fn small_instances() -> Vec<WellStructuredCnf> {
    let mut out: Vec<WellStructuredCnf> = [1, 2, 4, 8].into_iter().flat_map(well_structured_family).collect();
    out.extend(suite().into_iter().map(|(_, f)| well_structure(&f)).filter(|w| w.num_vars() <= 8));
    out
}

fn exact_solution_count() -> Outcome {
    let mut notes = Vec::new();
    for n in [1, 2, 4, 8] {
        let t = Instant::now();
        for ws in well_structured_family(n) {
            let ctx = make_context(&ws, None).map_err(|e| e.to_string())?;
            let sys = build_system(&ctx, &ws);
            let sols = enumerate_solutions(&sys, &ctx).map_err(|e| e.to_string())?;
            ensure(sols.len() == 5 * n, || format!("n = {n}: {} solutions", sols.len()))?;
            let mut got: Vec<[Nat; 3]> = sols.iter().map(|s| s.alpha(&sys).unwrap()).collect();
            let mut want = Vec::new();
            for i in 0..n {
                let c = c_terms(&ctx, &ws, i);
                let g = ctx.gamma_pow(i);
                let zero = Nat::from(0u32);
                let one = Nat::from(1u32);
                want.push([c.c_pos1, g.clone(), zero.clone()]);
                want.push([c.c_pos2, g.clone(), zero.clone()]);
                want.push([c.c_neg, &g * 2u32, zero.clone()]);
                want.push([zero.clone(), g, one.clone()]);
                want.push([zero.clone(), zero, one]);
            }
            got.sort();
            want.sort();
            ensure(got == want, || format!("n = {n}: alpha projections differ"))?;
        }
        let el = t.elapsed();
        ensure(el < Duration::from_secs(10), || format!("n = {n} took {el:?}"))?;
        notes.push(format!("n={n} {:.2}s", el.as_secs_f64()));
    }
    Ok(notes.join(", "))
}

fn block_extraction() -> Outcome {
    let mut checked = 0;
    for ws in small_instances() {
        let ctx = make_context(&ws, None).map_err(|e| e.to_string())?;
        let sys = build_system(&ctx, &ws);
        let ids = &sys.layout().map_err(|e| e.to_string())?.ids;
        let width: Nat = Pow::pow(&ctx.gamma_m, 3u32);
        for i in 0..ctx.n {
            let direct = (&ctx.z / Pow::pow(&ctx.gamma_m, 3 * i as u32)) % &width;
            let o = ws.occurrences()[i];
            for t in 1..=5 {
                let s = make_solution(&sys, &ctx, &ws, i, t).map_err(|e| e.to_string())?;
                ensure(s.values[*ids.z.last().unwrap()] == direct, || format!("block of v{i}"))?;
                for (v, e) in ids.c.iter().zip([o.pos1, o.pos2, o.neg]) {
                    ensure(s.values[*v] == ctx.gamma_pow(e), || format!("clause term of v{i}"))?;
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} solutions"))
}

fn selector_grid() -> Outcome {
    let t = Instant::now();
    let mut points = 0;
    for k in 1..=3usize {
        for u in 0..=3i64 {
            let rows = linearize_selector(k, &Nat::from(u as u64));
            let mut p = vec![Int::from(0); 1 + 2 * k];
            for y in -1..=u + 1 {
                for xcode in 0..(u + 1).pow(k as u32) {
                    for chi in (0..1u32 << k).filter(|c| c.count_ones() <= 1) {
                        p[0] = y.into();
                        let (mut c, mut want) = (xcode, 0);
                        for j in 0..k {
                            let x = c % (u + 1);
                            c /= u + 1;
                            let on = i64::from(chi >> j & 1);
                            p[1 + j] = x.into();
                            p[1 + k + j] = on.into();
                            want += x * on;
                        }
                        ensure(rows.iter().all(|r| r.holds(&p)) == (y == want), || {
                            format!("k={k} U={u} y={y} x={xcode} chi={chi:b}")
                        })?;
                        points += 1;
                    }
                }
            }
        }
    }
    let el = t.elapsed();
    ensure(el < Duration::from_secs(1), || format!("took {el:?}"))?;
    Ok(format!("{points} points in {:.3}s", el.as_secs_f64()))
}

fn aggregation_roundtrip() -> Outcome {
    let mut lifted = 0;
    for ws in [common::n2(), sat2binpack::verify::synthetic_formula(4).unwrap()] {
        let ctx = make_context(&ws, None).map_err(|e| e.to_string())?;
        let sys = build_system(&ctx, &ws);
        let agg = aggregate(&sys);
        for s in enumerate_solutions(&sys, &ctx).map_err(|e| e.to_string())? {
            let v = lift(&sys, &s.values).map_err(|e| e.to_string())?;
            ensure(verify_roundtrip(&sys, &agg, &v).map_err(|e| e.to_string())?, || "lift rejected".into())?;
            ensure(v.x == s.values, || "projection differs".into())?;
            for j in 0..v.y.len() {
                let mut w = v.clone();
                w.y[j] += 1u32;
                ensure(!agg.satisfied_by(&w), || format!("second lift via y{j}"))?;
            }
            lifted += 1;
        }
    }
    for sys in toy_systems() {
        let agg = aggregate(&sys);
        let d = sys.num_vars();
        let mut bounds = sys.uppers();
        bounds.extend(sys.uppers());
        bounds.push(Nat::from(2u32));
        let hits: Vec<LiftedVector> = box_points(&bounds)
            .into_iter()
            .map(|p| LiftedVector { x: p[..d].to_vec(), y: p[d..].to_vec() })
            .filter(|v| agg.satisfied_by(v))
            .collect();
        let want: Vec<LiftedVector> = box_points(&sys.uppers())
            .into_iter()
            .filter(|x| check_solution(&sys, x).unwrap())
            .map(|x| lift(&sys, &x).unwrap())
            .collect();
        ensure(hits == want, || "toy solution sets differ".into())?;
        lifted += want.len();
    }
    let t = random_membership(SEED, 1000);
    ensure(t.false_positives == 0 && t.false_negatives == 0, || format!("{t:?}"))?;
    Ok(format!(
        "{lifted} lifts; {} random vectors ({} feasible), 0 false positives, 0 false negatives",
        t.samples, t.feasible
    ))
}

fn construction_tightness() -> Outcome {
    let instances = small_instances();
    let counts: Vec<(usize, usize)> = instances
        .par_iter()
        .map(|ws| -> Result<(usize, usize), String> {
            let red = Reduction::new(ws.clone(), None).map_err(|e| e.to_string())?;
            let Ok(family) = red.family() else { return Ok((0, 0)) };
            let bins = Nat::from(2 * red.n());
            let (mut built, mut rejected) = (0, 0);
            for g in red.guesses(ChiMode::Full) {
                match family.instance(g) {
                    Ok(inst) => {
                        ensure(inst.total_size() == &inst.capacity * &bins, || format!("{g} not tight"))?;
                        built += 1;
                    }
                    Err(BinPackError::InfeasibleGuess { .. }) => rejected += 1,
                    Err(e) => return Err(format!("{g}: {e}")),
                }
            }
            Ok((built, rejected))
        })
        .collect::<Result<_, _>>()?;
    let built: usize = counts.iter().map(|c| c.0).sum();
    let rejected: usize = counts.iter().map(|c| c.1).sum();
    ensure(built > 0, || "no instance built".into())?;
    Ok(format!("{} formulas, {built} instances tight, {rejected} guesses rejected", instances.len()))
}

fn end_to_end_agreement() -> Outcome {
    let t = Instant::now();
    let cases = suite();
    let corner = cases.iter().filter(|(n, _)| !n.starts_with("random") && !n.starts_with("mixed")).count();
    let random = cases.len() - corner;
    ensure(corner >= 10 && random >= 100, || format!("{corner} corner cases, {random} random"))?;
    ensure(cases.iter().all(|(_, f)| f.num_vars() <= 4), || "raw formula too wide".into())?;
    let mut sat = 0;
    for (name, f) in &cases {
        let r = end_to_end(f, SolveOptions::default()).map_err(|e| format!("{name}: {e}"))?;
        let oracle = brute_force_sat(f).map_err(|e| e.to_string())?.is_some();
        ensure(r.sat_answer == oracle, || format!("{name}: oracle mismatch"))?;
        ensure(r.sat_answer == r.bp_answer, || format!("{name}: sat {} bp {}", r.sat_answer, r.bp_answer))?;
        if let Some(lam) = &r.witness {
            let ws = well_structure(f);
            let phi = decode_assignment(&ws, lam).map_err(|e| format!("{name}: {e}"))?;
            ensure(ws.inner().is_satisfied_by(&phi), || format!("{name}: decoded assignment fails"))?;
        }
        ensure(r.agreement, || format!("{name}: report disagrees"))?;
        sat += usize::from(oracle);
    }
    let el = t.elapsed();
    ensure(el < Duration::from_secs(600), || format!("took {el:?}"))?;
    Ok(format!("{} formulas ({sat} satisfiable) agree in {:.1}s", cases.len(), el.as_secs_f64()))
}

fn guess_reduction() -> Outcome {
    let cases = suite();
    let results: Vec<(bool, bool)> = cases
        .par_iter()
        .map(|(name, f)| -> Result<(bool, bool), String> {
            let full = end_to_end(f, SolveOptions { chi_mode: ChiMode::Full, ..SolveOptions::default() })
                .map_err(|e| format!("{name}: {e}"))?;
            let reduced = end_to_end(f, SolveOptions::default()).map_err(|e| format!("{name}: {e}"))?;
            ensure(full.bp_answer == reduced.bp_answer, || format!("{name}: full {} reduced {}", full.bp_answer, reduced.bp_answer))?;
            Ok((full.bp_answer, reduced.guess_space < full.guess_space))
        })
        .collect::<Result<_, _>>()?;
    ensure(results.iter().all(|r| r.1), || "reduced sweep is not smaller".into())?;
    let feasible = results.iter().filter(|r| r.0).count();
    Ok(format!("{} formulas, {feasible} feasible under both sweeps", results.len()))
}

fn size_growth() -> Outcome {
    let t = Instant::now();
    let rows = size_report(&[2, 4, 8, 16]).map_err(|e| e.to_string())?;
    let el = t.elapsed();
    let g = growth_check(&rows);
    let table: Vec<String> = rows
        .iter()
        .map(|r| format!("n={} D={} log2B={} ratio={:.1}", r.n, r.item_types, r.bits_capacity, r.ratio.unwrap_or(0.0)))
        .collect();
    let detail = format!("{}; spread {:.3}; {:.2}s", table.join(", "), g.ratio_spread, el.as_secs_f64());
    ensure(el < Duration::from_secs(60), || format!("took {el:?}"))?;
    ensure(g.item_types_within_bound, || {
        format!("D exceeds {ITEM_TYPES_SLOPE}·log2 n + {ITEM_TYPES_OFFSET}: {detail}")
    })?;
    ensure(g.ratio_within_4x, || format!("ratio spread {:.3} is not below 4: {detail}", g.ratio_spread))?;
    Ok(detail)
}

fn reduce_files(dir: &std::path::Path, cnf: &str) -> BTreeMap<String, Vec<u8>> {
    let out = dir.join("out");
    let argv = ["sat2binpack", "reduce", cnf, "--out", out.to_str().unwrap(), "--chi-mode", "full"];
    assert_eq!(run_with(argv, &mut Vec::new(), &mut Vec::new()), 0);
    let mut files = BTreeMap::new();
    let mut stack = vec![out.clone()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(&out).unwrap().to_string_lossy().into_owned();
                files.insert(key, fs::read(&p).unwrap());
            }
        }
    }
    files
}

fn determinism() -> Outcome {
    let a = random_3sat_suite(SEED, 100);
    let b = random_3sat_suite(SEED, 100);
    ensure(a.formulas == b.formulas && a.resampled == b.resampled, || "suite differs".into())?;

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for (k, f) in a.formulas.iter().take(5).enumerate() {
        let cnf = tmp.path().join(format!("f{k}.cnf"));
        fs::write(&cnf, f.to_dimacs()).map_err(|e| e.to_string())?;
        let cnf = cnf.to_str().unwrap();
        let d1 = tempfile::tempdir().map_err(|e| e.to_string())?;
        let d2 = tempfile::tempdir().map_err(|e| e.to_string())?;
        let (f1, f2) = (reduce_files(d1.path(), cnf), reduce_files(d2.path(), cnf));
        ensure(f1 == f2, || format!("formula {k}: instance files differ"))?;
        compared += f1.len();

        let r1 = end_to_end(f, SolveOptions::default()).map_err(|e| e.to_string())?.to_json();
        let r2 = end_to_end(f, SolveOptions { jobs: 4, ..SolveOptions::default() }).map_err(|e| e.to_string())?.to_json();
        ensure(r1 == r2, || format!("formula {k}: reports differ"))?;
    }
    let mut out1 = Vec::new();
    let mut out2 = Vec::new();
    let args = ["sat2binpack", "selftest", "--count", "20", "--seed", "5"];
    run_with(args, &mut out1, &mut Vec::new());
    run_with(args, &mut out2, &mut Vec::new());
    ensure(out1 == out2, || "selftest output differs".into())?;
    Ok(format!("{compared} files and 10 reports byte-identical"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("exactly 5n solutions", exact_solution_count),
        ("block and clause-term extraction", block_extraction),
        ("selector linearization grid", selector_grid),
        ("aggregation round trip", aggregation_roundtrip),
        ("instance tightness", construction_tightness),
        ("end-to-end agreement", end_to_end_agreement),
        ("guess-space reduction", guess_reduction),
        ("size growth", size_growth),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (k, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panic: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", k + 1),
            Err(detail) => {
                println!("FAIL criterion {} ({name}): {detail}", k + 1);
                failed.push(k + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
