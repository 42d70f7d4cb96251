//! `mulop`: drive decompositions, classifications, and the demonstration
//! tables from measure spec files.
//!
//! Exit codes: 0 success, 1 a computed check failed, 2 bad input.

use clap::{Args, Parser, Subcommand, ValueEnum};
use mulop_core::classify::{approx_similar, atom_absorb_demo, similar_mod_compact, Reason};
use mulop_core::decompose::{decompose, verify_certificate, Decomposition};
use mulop_core::dyadic::{self, CellId};
use mulop_core::haar::{estimate_unconditional_constant, HaarBasis};
use mulop_core::lpnum::{mult_operator, op_norm, rademacher_growth, NormMode, PowerOpts};
use mulop_core::measure::MeasureSpec;
use std::path::PathBuf;
use std::process::ExitCode;

const LEVEL_CAP: u32 = 14;
const CONSTANT_BUDGET: usize = 64;

#[derive(Parser)]
#[command(name = "mulop", version, about = "multiplication operators at finite resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Records,
}

#[derive(Args)]
struct Common {
    /// Exponent of the L^p space, in (1, inf).
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Target bound for the compact part.
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// Finest dyadic level.
    #[arg(long, default_value_t = 8)]
    level: u32,
    /// Seed for every randomized routine.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Also write the output (certificate JSON for decompose) to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Split the multiplication operator into diagonal plus certified-small.
    Decompose {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Decide similarity modulo compacts and approximate similarity.
    Classify {
        spec1: PathBuf,
        spec2: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Unconditional-constant estimates of the Haar system per level.
    HaarConst {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Norm bracketing of the diagonal model operator.
    Norms {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Rademacher sum growth: the table behind the non-embedding argument.
    DemoNonembed {
        #[command(flatten)]
        common: Common,
    },
    /// Defect trend when a diagonal block is absorbed into the measure.
    DemoAbsorb {
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

/// 1: a computed check failed. 2: the input was unusable.
enum CliError {
    Check(String),
    Input(String),
}

impl From<mulop_core::Error> for CliError {
    fn from(e: mulop_core::Error) -> CliError {
        match e {
            mulop_core::Error::CheckFailed(_) => CliError::Check(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

fn load_spec(path: &PathBuf) -> Result<MeasureSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    MeasureSpec::from_json_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn validate(common: &Common) -> Result<(), CliError> {
    if !(common.p > 1.0) || !common.p.is_finite() {
        return Err(CliError::Input(format!("--p must lie in (1, inf), got {}", common.p)));
    }
    if !(common.epsilon > 0.0) {
        return Err(CliError::Input(format!("--epsilon must be positive, got {}", common.epsilon)));
    }
    if common.level > LEVEL_CAP {
        return Err(CliError::Input(format!(
            "--level {} exceeds the cap {LEVEL_CAP}",
            common.level
        )));
    }
    Ok(())
}

/// Largest certified coordinate-projection norm: the observed basis constant.
fn empirical_constant(dec: &Decomposition) -> f64 {
    let head = dec.cert.head_proj.upper.unwrap_or(dec.cert.head_proj.lower);
    dec.cert
        .per_level_proj
        .values()
        .map(|e| e.upper.unwrap_or(e.lower))
        .fold(head, f64::max)
}

fn run_decompose(spec: &PathBuf, common: &Common) -> Result<String, CliError> {
    let m = load_spec(spec)?;
    let start = m.nonatomic.level.min(common.level).max(2);
    let mut rows = Vec::new();
    let mut last: Option<Decomposition> = None;
    for level in start..=common.level {
        // Coarse levels may not reach the target; the table starts where
        // certification first succeeds.
        let dec = match decompose(&m, common.p, common.epsilon, level) {
            Ok(dec) => dec,
            Err(mulop_core::Error::LevelCapExceeded { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        rows.push(format!(
            "{level},{},{},{},{}",
            dec.cert.total_k_bound_upper,
            dec.cert.discretization_error,
            dec.cert.cutoff,
            empirical_constant(&dec)
        ));
        last = Some(dec);
    }
    let dec = last.ok_or_else(|| {
        CliError::Check(format!(
            "no level up to {} certifies epsilon {}",
            common.level, common.epsilon
        ))
    })?;
    let report = verify_certificate(&dec);
    if !report.ok() {
        let names: Vec<&str> = report.failures().iter().map(|c| c.name.as_str()).collect();
        return Err(CliError::Check(format!("certificate checks failed: {}", names.join(", "))));
    }
    if let Some(path) = &common.out {
        let json = serde_json::to_string_pretty(&dec.cert)
            .map_err(|e| CliError::Input(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| CliError::Input(e.to_string()))?;
    }
    Ok(match common.format {
        Format::Table => {
            let mut out =
                String::from("level,certified_k_upper,discretization_error,cutoff,empirical_constant\n");
            out.push_str(&rows.join("\n"));
            out.push('\n');
            out
        }
        Format::Records => dec.cert.to_records(),
    })
}

fn reason_name(r: &Reason) -> (&'static str, bool) {
    match *r {
        Reason::EquivalentNonatomic(b) => ("equivalent_nonatomic", b),
        Reason::ClusterSetsEqual(b) => ("cluster_sets_equal", b),
        Reason::SupportsEqual(b) => ("supports_equal", b),
    }
}

fn run_classify(spec1: &PathBuf, spec2: &PathBuf, common: &Common) -> Result<String, CliError> {
    let m1 = load_spec(spec1)?;
    let m2 = load_spec(spec2)?;
    // At p = 2 similarity modulo compacts has no criterion; report the
    // approximate-similarity verdict alone.
    let verdict = if common.p == 2.0 {
        approx_similar(&m1, &m2)?
    } else {
        similar_mod_compact(&m1, &m2, common.p)?
    };
    let smc = verdict.similar_mod_compact.map_or("n/a".to_string(), |b| b.to_string());
    Ok(match common.format {
        Format::Table => {
            let mut header = String::from("p,similar_mod_compact,approx_similar");
            let mut row = format!("{},{smc},{}", common.p, verdict.approx_similar);
            for r in &verdict.reasons {
                let (name, value) = reason_name(r);
                header.push(',');
                header.push_str(name);
                row.push_str(&format!(",{value}"));
            }
            format!("{header}\n{row}\n")
        }
        Format::Records => {
            let mut out = String::from("record verdict\n");
            out.push_str(&format!("p {}\n", common.p));
            out.push_str(&format!("similar_mod_compact {smc}\n"));
            out.push_str(&format!("approx_similar {}\n", verdict.approx_similar));
            for r in &verdict.reasons {
                let (name, value) = reason_name(r);
                out.push_str(&format!("reason {name} {value}\n"));
            }
            out
        }
    })
}

fn run_haar_const(spec: &PathBuf, common: &Common) -> Result<String, CliError> {
    let m = load_spec(spec)?;
    let (normalized, _) = m.normalize()?;
    let (nonatomic, _) = normalized.split_parts();
    if nonatomic.nonatomic.is_empty() {
        return Err(CliError::Input("the spec has no nonatomic part to build a basis on".into()));
    }
    let mut out = String::from("level,basis_size,constant_estimate\n");
    for level in nonatomic.nonatomic.level.max(1)..=common.level {
        let basis = HaarBasis::build(&nonatomic, level, common.p)?;
        let c = estimate_unconditional_constant(&basis, CONSTANT_BUDGET, common.seed);
        out.push_str(&format!("{level},{},{c}\n", basis.dim()));
    }
    Ok(out)
}

fn run_norms(spec: &PathBuf, common: &Common) -> Result<String, CliError> {
    let m = load_spec(spec)?;
    let (normalized, _) = m.normalize()?;
    let (op, disc) = mult_operator(&normalized, common.level, common.p)?;
    let mode = if op.is_diagonal() {
        NormMode::ExactDiagonal
    } else {
        NormMode::TwoSided(PowerOpts { seed: common.seed, ..PowerOpts::default() })
    };
    let est = op_norm(&op, mode)?;
    let upper = est.upper.map_or("unbounded".to_string(), |u| u.to_string());
    Ok(match common.format {
        Format::Table => format!(
            "p,level,dim,lower,upper,method,discretization_error\n{},{},{},{},{upper},{:?},{disc}\n",
            common.p,
            common.level,
            op.domain.dim(),
            est.lower,
            est.method
        ),
        Format::Records => format!(
            "record norm\np {}\nlevel {}\ndim {}\nlower {}\nupper {upper}\nmethod {:?}\ndiscretization_error {disc}\n",
            common.p,
            common.level,
            op.domain.dim(),
            est.lower,
            est.method
        ),
    })
}

fn run_demo_nonembed(common: &Common) -> Result<String, CliError> {
    let mut out = String::from("k,lp_norm,sqrt_k,k_pow_inv_p\n");
    for k in 1..=8u32 {
        let (lp, _) = rademacher_growth(k, common.p, k)?;
        out.push_str(&format!(
            "{k},{lp},{},{}\n",
            (k as f64).sqrt(),
            (k as f64).powf(1.0 / common.p)
        ));
    }
    Ok(out)
}

fn run_demo_absorb(spec: &PathBuf, common: &Common) -> Result<String, CliError> {
    let m = load_spec(spec)?;
    let (normalized, _) = m.normalize()?;
    let (nonatomic, _) = normalized.split_parts();
    if nonatomic.nonatomic.is_empty() {
        return Err(CliError::Input("the spec has no nonatomic part to absorb into".into()));
    }
    // Diagonal entries: centers of the positive level-2 cells, pulled back to
    // the original coordinates.
    let coarse = 2u32;
    let refined = nonatomic.refine(nonatomic.nonatomic.level.max(coarse))?;
    let map = refined.frame.to_map();
    let mut entries = Vec::new();
    for j in 1..=(1u64 << coarse) {
        let cell = CellId { level: coarse, index: j };
        if refined.cell_mass(cell)? > 0.0 {
            entries.push(map.backward(dyadic::geometry(cell, refined.ambient).center()));
        }
    }
    let report = atom_absorb_demo(&m, &entries, common.p, common.level)?;
    let mut out = String::from("target,defect_ml_ld,defect_rm_dr,defect_rl_i,within_target\n");
    for s in &report.steps {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.target, s.defect_ml_ld, s.defect_rm_dr, s.defect_rl_i, s.within_target
        ));
    }
    if !report.all_within() {
        print!("{out}");
        return Err(CliError::Check("absorption defects exceeded their targets".into()));
    }
    Ok(out)
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let common = match &cli.command {
        Command::Decompose { common, .. }
        | Command::Classify { common, .. }
        | Command::HaarConst { common, .. }
        | Command::Norms { common, .. }
        | Command::DemoNonembed { common }
        | Command::DemoAbsorb { common, .. } => common,
    };
    validate(common)?;
    let output = match &cli.command {
        Command::Decompose { spec, common } => run_decompose(spec, common)?,
        Command::Classify { spec1, spec2, common } => run_classify(spec1, spec2, common)?,
        Command::HaarConst { spec, common } => run_haar_const(spec, common)?,
        Command::Norms { spec, common } => run_norms(spec, common)?,
        Command::DemoNonembed { common } => run_demo_nonembed(common)?,
        Command::DemoAbsorb { spec, common } => run_demo_absorb(spec, common)?,
    };
    // Every non-certificate output also lands in --out when requested.
    if let Some(path) = &common.out {
        if !matches!(cli.command, Command::Decompose { .. }) {
            std::fs::write(path, &output).map_err(|e| CliError::Input(e.to_string()))?;
        }
    }
    Ok(output)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(output) => {
            print!("{output}");
            ExitCode::SUCCESS
        }
        Err(CliError::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("input error: {msg}");
            ExitCode::from(2)
        }
    }
}
