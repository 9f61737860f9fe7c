//! `tlvar`: norms, atomic decompositions, verification suites and profile
//! export, all driven by one JSON config.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use tlvar_core::atoms::{admissible_kl, atomic_analyze, atomic_synthesize, validate_atom, DEFAULT_ATOM_TOL};
use tlvar_core::config::RunConfig;
use tlvar_core::grid::io;
use tlvar_core::lab::{self, report};
use tlvar_core::lebesgue::DEFAULT_TOL;
use tlvar_core::lp::{f_norm, profile_rows};
use tlvar_core::{Error, SampledField};

#[derive(Parser)]
#[command(name = "tlvar", version, about = "Variable-exponent Triebel-Lizorkin-type norms and checks")]
struct Cli {
    /// Print progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the norm of a field file.
    Norm {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        field: PathBuf,
    },
    /// Atomic decomposition of a field file, written to a directory.
    Decompose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the configured check suite; exits with 1 if any check fails.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Report directory (default: the config's output.dir, else the current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CSV of the cutoff, annulus and dual profiles with the Calderon residual.
    ExportProfiles {
        #[arg(long)]
        config: PathBuf,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Self { code: 2, message: format!("config error: {e}") }
    }

    fn data(e: impl std::fmt::Display) -> Self {
        Self { code: 3, message: format!("data error: {e}") }
    }

    fn output(path: &Path, e: impl std::fmt::Display) -> Self {
        Self { code: 4, message: format!("cannot write {}: {e}", path.display()) }
    }

    /// Hypothesis and parameter errors are configuration problems.
    fn from_core(e: Error) -> Self {
        match e {
            Error::Hypothesis(_) | Error::UnknownCheck(_) | Error::InvalidParameter(_) | Error::InvalidExponent(_) => {
                Self::config(e)
            }
            other => Self::data(other),
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    RunConfig::load(path).map_err(Failure::config)
}

fn load_field(path: &Path, cfg: &RunConfig) -> Result<SampledField, Failure> {
    let f = io::load(path).map_err(Failure::data)?;
    let grid = cfg.grid.build().map_err(Failure::config)?;
    grid.same_as(f.grid()).map_err(Failure::data)?;
    Ok(f)
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::output(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::output(path, e))
}

fn norm(config: &Path, field: &Path) -> Result<u8, Failure> {
    let cfg = load_config(config)?;
    let f = load_field(field, &cfg)?;
    let ex = cfg.exponents().map_err(Failure::config)?;
    let r = f_norm(&f, ex.space(), cfg.lp.v_max, None, DEFAULT_TOL).map_err(Failure::from_core)?;
    println!("{}", serde_json::to_string_pretty(&r).expect("serializable"));
    Ok(0)
}

fn decompose(config: &Path, field: &Path, out: &Path, verbose: bool) -> Result<u8, Failure> {
    let cfg = load_config(config)?;
    let f = load_field(field, &cfg)?;
    let (k, l) = match (cfg.atoms.k, cfg.atoms.l) {
        (Some(k), Some(l)) => (k, l),
        (k, l) => {
            let ex = cfg.exponents().map_err(Failure::config)?;
            let (k0, l0) = admissible_kl(&ex.alpha, &ex.tau, &ex.p, ex.q.as_ref()).map_err(Failure::from_core)?;
            (k.unwrap_or(k0), l.unwrap_or(l0))
        }
    };
    create_dir(out)?;
    let d = atomic_analyze(&f, cfg.lp.v_max, k, l).map_err(Failure::from_core)?;
    let back = atomic_synthesize(&d);
    let sup = f.sup_norm();
    let diff = f.max_abs_diff(&back).map_err(Failure::data)?;
    let err = if sup > 0.0 { diff / sup } else { diff };
    let coefficients = d.coefficients.pruned();
    let atoms_dir = out.join("atoms");
    let mut valid = 0usize;
    let mut invalid = Vec::new();
    for (cube, _) in coefficients.iter() {
        let (Some(atom), Some(cand)) = (d.atom_field(cube), d.candidate(cube)) else { continue };
        let dir = atoms_dir.join(cube.v.to_string());
        create_dir(&dir)?;
        let name = cube.m.iter().map(|m| m.to_string()).collect::<Vec<_>>().join("_");
        let path = dir.join(format!("{name}.bin"));
        io::save(&path, &atom).map_err(|e| Failure::output(&path, e))?;
        let rep = validate_atom(&cand, DEFAULT_ATOM_TOL).map_err(Failure::from_core)?;
        if rep.ok() {
            valid += 1;
        } else {
            invalid.push(json!({ "cube": cube, "report": rep }));
        }
    }
    if verbose {
        eprintln!("{} atoms written under {}", valid + invalid.len(), atoms_dir.display());
    }
    let coeff_json = serde_json::to_string_pretty(&coefficients).expect("serializable") + "\n";
    write_file(&out.join("coefficients.json"), coeff_json.as_bytes())?;
    let total = valid + invalid.len();
    let summary = json!({
        "K": k, "L": l, "gamma": d.gamma, "c_theta": d.c_theta, "e_min": d.e_min,
        "atoms": total, "valid_atoms": valid, "invalid_atoms": invalid,
        "reconstruction_error": err,
    });
    let text = serde_json::to_string_pretty(&summary).expect("serializable") + "\n";
    write_file(&out.join("validation.json"), text.as_bytes())?;
    println!("atoms {total} valid {valid}");
    println!("reconstruction_error {err:e}");
    Ok(0)
}

fn verify(config: &Path, out: Option<&Path>, verbose: bool) -> Result<u8, Failure> {
    let cfg = load_config(config)?;
    let dir = out.map(Path::to_path_buf).or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    create_dir(&dir)?;
    let entries = cfg.entries();
    if verbose {
        eprintln!("running {} checks", entries.len());
    }
    let reports = lab::run_suite(&entries, &cfg.digest()).map_err(Failure::from_core)?;
    let mut json_buf = Vec::new();
    report::write_json(&reports, &mut json_buf).map_err(Failure::data)?;
    let mut csv_buf = Vec::new();
    report::write_csv(&reports, &mut csv_buf).map_err(Failure::data)?;
    write_file(&dir.join("report.json"), &json_buf)?;
    write_file(&dir.join("summary.csv"), &csv_buf)?;
    std::io::stdout().write_all(&csv_buf).map_err(Failure::data)?;
    Ok(if report::any_failed(&reports) { 1 } else { 0 })
}

fn export_profiles(config: &Path, out: Option<&Path>) -> Result<u8, Failure> {
    let cfg = load_config(config)?;
    let grid = cfg.grid.build().map_err(Failure::config)?;
    let mut buf = String::from("xi,phi_big,phi,psi_big,psi,residual\n");
    for r in profile_rows(&grid, cfg.lp.v_max) {
        buf.push_str(&format!("{:e},{:e},{:e},{:e},{:e},{:e}\n", r.xi, r.phi_big, r.phi, r.psi_big, r.psi, r.residual));
    }
    match out {
        Some(p) => write_file(p, buf.as_bytes())?,
        None => print!("{buf}"),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Norm { config, field } => norm(config, field),
        Command::Decompose { config, field, out } => decompose(config, field, out, cli.verbose),
        Command::Verify { config, out } => verify(config, out.as_deref(), cli.verbose),
        Command::ExportProfiles { config, out } => export_profiles(config, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("tlvar: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
