//! Command-line front end. `run` returns the process exit code: 0 on success,
//! 1 when a check fails, 2 on bad usage or input.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::aggregate::verify_roundtrip;
use crate::binpack::{BinPackError, ChiMode};
use crate::cnf::{brute_force_sat, parse_dimacs, CnfFormula};
use crate::ilp::enumerate_solutions;
use crate::verify::{
    edge_cases, end_to_end, growth_check, random_3sat_suite, random_mixed_suite, size_report, PipelineError, Reduction,
    SolveOptions,
};
use crate::witness::{configs_from_lambda, decode_assignment, lambda_from_assignment, satisfier};
use crate::Nat;

#[derive(Debug, Parser)]
#[command(name = "sat2binpack", version, about = "Reduce 3-SAT to high-multiplicity Bin Packing")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// DIMACS CNF file, or `-` for stdin.
    input: PathBuf,
    /// Encoding base; must exceed max(4n, 3).
    #[arg(long)]
    gamma: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write every stage of the reduction to a directory.
    Reduce {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "reduced")]
        out: PathBuf,
        #[arg(long, default_value = "reduced")]
        chi_mode: ChiMode,
    },
    /// List the solutions of the equality system.
    Enumerate {
        #[command(flatten)]
        common: Common,
    },
    /// Decide the instance through the reduction and compare with brute force.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "reduced")]
        chi_mode: ChiMode,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Check that a satisfying assignment maps to a tight packing and back.
    Roundtrip {
        #[command(flatten)]
        common: Common,
    },
    /// Size growth over the synthetic cyclic family.
    Sizes {
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
        n_list: Vec<usize>,
    },
    /// Run random and corner-case formulas end to end.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value = "reduced")]
        chi_mode: ChiMode,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

enum Failure {
    Usage(String),
    Check(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Cnf(_) | PipelineError::Encode(_) | PipelineError::GuardExceeded { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Check(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn read_formula(path: &Path) -> Result<CnfFormula, Failure> {
    let text = if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        s
    } else {
        fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
    };
    parse_dimacs(&text).map_err(|e| Failure::Usage(e.to_string()))
}

fn reduction(common: &Common) -> Result<(CnfFormula, Reduction), Failure> {
    let raw = read_formula(&common.input)?;
    let red = Reduction::from_formula(&raw, common.gamma.map(Nat::from))?;
    Ok((raw, red))
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut io::stdout().lock(), &mut io::stderr().lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 { write!(out, "{}", e.render()) } else { write!(err, "{}", e.render()) };
            return code;
        }
    };
    match dispatch(cli.cmd, out) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(Failure::Check(msg)) => {
            let _ = writeln!(err, "check failed: {msg}");
            1
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match cmd {
        Command::Reduce { common, out: dir, chi_mode } => reduce(&common, &dir, chi_mode, out),
        Command::Enumerate { common } => enumerate(&common, out),
        Command::Solve { common, chi_mode, jobs, json } => {
            let raw = read_formula(&common.input)?;
            let r = end_to_end(&raw, SolveOptions { chi_mode, gamma: common.gamma, jobs })?;
            if json {
                writeln!(out, "{}", r.to_json())?;
            } else {
                let word = |b: bool| if b { "SAT" } else { "UNSAT" };
                writeln!(out, "n {} m {} item types {}", r.n, r.m, r.item_types)?;
                writeln!(out, "brute force: {}", word(r.sat_answer))?;
                writeln!(out, "bin packing: {}", word(r.bp_answer))?;
                if let (Some(chi), Some(phi)) = (r.feasible_chi, &r.decoded) {
                    writeln!(out, "guess {chi} decodes to {}", phi.to_bits())?;
                }
                for n in &r.notes {
                    writeln!(out, "note: {n}")?;
                }
            }
            if !r.agreement {
                return Err(Failure::Check("answers disagree".into()));
            }
            Ok(())
        }
        Command::Roundtrip { common } => roundtrip(&common, out),
        Command::Sizes { n_list } => {
            if let Some(&n) = n_list.iter().find(|n| !n.is_power_of_two()) {
                return Err(Failure::Usage(format!("{n} is not a power of two")));
            }
            let rows = size_report(&n_list)?;
            writeln!(out, "n\tD\trows\tvars\tbits(B)\tbits(s)\tbits(a)\tratio")?;
            for r in &rows {
                let ratio = r.ratio.map_or("-".to_string(), |x| format!("{x:.1}"));
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{ratio}",
                    r.n, r.item_types, r.ilp_rows, r.ilp_vars, r.bits_capacity, r.bits_max_size, r.bits_max_multiplicity
                )?;
            }
            let g = growth_check(&rows);
            writeln!(out, "ratio spread {:.2}", g.ratio_spread)?;
            Ok(())
        }
        Command::Selftest { seed, count, chi_mode, jobs } => {
            let opts = SolveOptions { chi_mode, gamma: None, jobs };
            let main = random_3sat_suite(seed, count);
            let mixed = random_mixed_suite(seed ^ 0x5eed, count.div_ceil(3));
            let mut cases: Vec<(String, CnfFormula)> =
                edge_cases().into_iter().map(|(name, f)| (name.to_string(), f)).collect();
            cases.extend(main.formulas.into_iter().enumerate().map(|(i, f)| (format!("random #{i}"), f)));
            cases.extend(mixed.formulas.into_iter().enumerate().map(|(i, f)| (format!("mixed #{i}"), f)));
            let (mut sat, mut bad) = (0, Vec::new());
            for (name, f) in &cases {
                let r = end_to_end(f, opts)?;
                sat += usize::from(r.sat_answer);
                if !r.agreement {
                    bad.push(name.clone());
                }
            }
            writeln!(
                out,
                "{} formulas, {sat} satisfiable, {} resampled, {} disagreements",
                cases.len(),
                main.resampled + mixed.resampled,
                bad.len()
            )?;
            if !bad.is_empty() {
                return Err(Failure::Check(format!("disagreement on {}", bad.join(", "))));
            }
            Ok(())
        }
    }
}

fn reduce(common: &Common, dir: &Path, mode: ChiMode, out: &mut dyn Write) -> Result<(), Failure> {
    let (_, red) = reduction(common)?;
    fs::create_dir_all(dir.join("instances"))?;
    fs::write(dir.join("formula.cnf"), red.ws.inner().to_dimacs())?;
    fs::write(dir.join("system.txt"), red.sys.dump_rows())?;
    fs::write(dir.join("bounds.txt"), red.sys.dump_bounds())?;
    fs::write(dir.join("aggregated.txt"), red.agg.dump())?;
    fs::write(dir.join("digits.txt"), red.agg.dump_digits())?;
    let mut written = 0;
    match red.family() {
        Ok(family) => {
            let mut listing = format!("capacity {}\nsizes", family.capacity());
            for s in family.sizes().iter() {
                listing.push(' ');
                listing.push_str(&s.to_string());
            }
            listing.push('\n');
            for g in red.guesses(mode) {
                match family.instance(g) {
                    Ok(inst) => {
                        fs::write(dir.join("instances").join(format!("chi_{g}.txt")), inst.to_text())?;
                        listing.push_str(&format!("{g} admissible\n"));
                        written += 1;
                    }
                    Err(BinPackError::InfeasibleGuess { reason, .. }) => {
                        listing.push_str(&format!("{g} skipped: {reason}\n"));
                    }
                    Err(e) => return Err(Failure::Check(e.to_string())),
                }
            }
            fs::write(dir.join("family.txt"), listing)?;
        }
        Err(e) => fs::write(dir.join("family.txt"), format!("empty: {e}\n"))?,
    }
    writeln!(
        out,
        "n {} m {}: {} rows, {} variables, {} item types, {written} instances in {}",
        red.n(),
        red.m(),
        red.sys.num_rows(),
        red.sys.num_vars(),
        red.item_types(),
        dir.display()
    )?;
    Ok(())
}

fn enumerate(common: &Common, out: &mut dyn Write) -> Result<(), Failure> {
    let (_, red) = reduction(common)?;
    let sols = enumerate_solutions(&red.sys, &red.ctx).map_err(PipelineError::from)?;
    let mut seen = Vec::with_capacity(sols.len());
    for s in &sols {
        let (i, t) = s.index_and_type(&red.sys).map_err(PipelineError::from)?;
        let [a1, a2, a3] = s.alpha(&red.sys).map_err(PipelineError::from)?;
        writeln!(out, "v{i} type {t}: alpha = ({a1}, {a2}, {a3})")?;
        seen.push((i, t));
    }
    seen.sort_unstable();
    seen.dedup();
    writeln!(out, "{} solutions", sols.len())?;
    if sols.len() != 5 * red.n() || seen.len() != sols.len() {
        return Err(Failure::Check(format!("expected {} distinct solutions", 5 * red.n())));
    }
    Ok(())
}

fn roundtrip(common: &Common, out: &mut dyn Write) -> Result<(), Failure> {
    let (_, red) = reduction(common)?;
    let Some(phi) = brute_force_sat(red.ws.inner()).map_err(PipelineError::from)? else {
        writeln!(out, "unsatisfiable; nothing to map")?;
        return Ok(());
    };
    let family = red.family().map_err(PipelineError::from)?;
    let s = satisfier(&red.ws, &phi).map_err(PipelineError::from)?;
    let lam = lambda_from_assignment(&red.ws, &phi, &s);
    let (configs, chi) = configs_from_lambda(&red.sys, &red.ctx, &red.ws, &lam).map_err(PipelineError::from)?;
    for v in &configs {
        if !verify_roundtrip(&red.sys, &red.agg, v).map_err(PipelineError::from)? {
            return Err(Failure::Check("configuration is not tight".into()));
        }
    }
    let inst = family.instance(chi).map_err(PipelineError::from)?;
    let decoded = decode_assignment(&red.ws, &lam).map_err(PipelineError::from)?;
    writeln!(out, "assignment {} -> guess {chi}, {} configurations", phi.to_bits(), configs.len())?;
    writeln!(out, "capacity bits {}, tight {}", inst.capacity.bits(), inst.is_tight())?;
    writeln!(out, "decoded {}", decoded.to_bits())?;
    Ok(())
}
