//! `nanorod` command-line front end.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on numerical failures.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nanorod::assumptions::check_assumptions;
use nanorod::config::{ReportFormat, StudyConfig};
use nanorod::crack::{phi_numeric, CrackProblem};
use nanorod::elastic::{hessian_forms, Q3relCache, SkewGenerator};
use nanorod::energy::{slice_profile, total_energy};
use nanorod::io::read_deformation;
use nanorod::study::{evaluate_limit_of_def, format_report, limit_options, run_convergence_study, PhiMemo};
use nanorod::{Error, Result};

#[derive(Parser)]
#[command(name = "nanorod", version, about = "Discrete and limit energies of atomistic nanorods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true, default_value = "nanorod.toml")]
    config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Overrides the seed of the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Energy of the deformation file named in `[energy]`.
    Energy,
    /// Relaxed elastic form over the generators in `[qrel]`.
    Qrel,
    /// Numerical cell-formula estimate for the jump in `[phi]`.
    Phi,
    /// Limit energy of the frame in `[frame]`.
    Limit,
    /// Convergence study over `study.k`.
    Converge,
    /// Structural assumption validators.
    Check,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))
}

/// Returns the rendered output and the default output path, if any.
fn run(cli: &Cli) -> Result<(String, Option<PathBuf>)> {
    let mut cfg = StudyConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let format = match cli.format {
        Some(Format::Csv) => ReportFormat::Csv,
        Some(Format::Json) => ReportFormat::Json,
        None => cfg.output.format,
    };
    let cs = cfg.cross_section()?;
    let mut out = String::new();
    match cli.command {
        Command::Energy => {
            let path = cfg.energy.deformation.as_ref().ok_or_else(|| Error::config("energy.deformation", "missing"))?;
            let def = read_deformation(&resolve(&cli.config, path))?;
            let e = total_energy(&cfg.model, &def)?.energy;
            let prof = slice_profile(&cfg.model, &def, cfg.study.extension_constant)?;
            let k = def.lattice().k();
            match format {
                ReportFormat::Csv => {
                    writeln!(out, "k,E,kE,broken_slices").unwrap();
                    writeln!(out, "{k},{e},{},{}", prof.total_mass(), prof.broken_count()).unwrap();
                }
                ReportFormat::Json => {
                    out = json(&serde_json::json!({
                        "k": k,
                        "E": e,
                        "kE": prof.total_mass(),
                        "broken_slices": prof.broken_count(),
                        "slices": prof,
                    }))?;
                }
            }
        }
        Command::Qrel => {
            let table = hessian_forms(&cfg.model, &cs)?;
            let cache_path = cfg.qrel.cache.as_ref().map(|p| resolve(&cli.config, p));
            let mut cache = match &cache_path {
                Some(p) => Q3relCache::load(p)?,
                None => Q3relCache::default(),
            };
            let mut rows = Vec::new();
            for w in &cfg.qrel.generators {
                let a = SkewGenerator::from_axial((*w).into());
                rows.push((*w, cache.get_or_compute(&cfg.model, &cs, &table, &a)?));
            }
            if let Some(p) = &cache_path {
                cache.save(p)?;
            }
            match format {
                ReportFormat::Csv => {
                    writeln!(out, "w1,w2,w3,q3rel").unwrap();
                    for (w, v) in &rows {
                        writeln!(out, "{},{},{},{v}", w[0], w[1], w[2]).unwrap();
                    }
                }
                ReportFormat::Json => {
                    let v: Vec<_> = rows.iter().map(|(w, v)| serde_json::json!({ "axial": w, "q3rel": v })).collect();
                    out = json(&v)?;
                }
            }
        }
        Command::Phi => {
            let (u, r) = cfg.phi.jump();
            let p = CrackProblem::new(u, r, cfg.model, cs, cfg.phi.schedule.clone())
                .map_err(|e| Error::config("phi", e.to_string()))?;
            let sol = phi_numeric(&p, &cfg.phi.options(cfg.seed))?;
            match format {
                ReportFormat::Csv => {
                    writeln!(out, "r,k,energy,best_start,broken_slices").unwrap();
                    for e in &sol.entries {
                        writeln!(out, "{},{},{},{},{}", e.r, e.k, e.energy, e.best_start, e.broken_slices).unwrap();
                    }
                }
                ReportFormat::Json => out = sol.to_json(),
            }
        }
        Command::Limit => {
            let b = evaluate_limit_of_def(cfg.frame_def()?, &cfg.model, &cs, &limit_options(&cfg), &PhiMemo::new())?;
            match format {
                ReportFormat::Csv => {
                    writeln!(out, "E_lim_elastic,E_lim_crack,E_lim").unwrap();
                    writeln!(out, "{},{},{}", b.elastic, b.crack, b.total).unwrap();
                }
                ReportFormat::Json => out = json(&b)?,
            }
        }
        Command::Converge => {
            let report = run_convergence_study(&cfg)?;
            out = format_report(&report.rows, format)?;
        }
        Command::Check => {
            let report = check_assumptions(&cfg.model, &cfg.check.k, cfg.check.samples, cfg.seed)?;
            match format {
                ReportFormat::Csv => {
                    writeln!(out, "name,status,worst,samples").unwrap();
                    for c in &report.checks {
                        let status = serde_json::to_value(c.status).map_err(|e| Error::Parse(e.to_string()))?;
                        writeln!(out, "{},{},{},{}", c.name, status.as_str().unwrap_or(""), c.worst, c.samples).unwrap();
                    }
                }
                ReportFormat::Json => out = json(&report)?,
            }
        }
    }
    // only the study writes to the configured output path by default
    let configured = match cli.command {
        Command::Converge => cfg.output.path.as_ref().map(|p| resolve(&cli.config, p)),
        _ => None,
    };
    Ok((out, configured))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = run(&cli).and_then(|(text, configured)| {
        let path = cli.out.clone().or(configured);
        match path {
            Some(p) => std::fs::write(&p, text).map_err(Error::from),
            None => {
                print!("{text}");
                if !text.ends_with('\n') {
                    println!();
                }
                Ok(())
            }
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
