use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use spinlab_cli::config::{resolve_config, CommonArgs, RunConfig};
use spinlab_cli::error::Result;
use spinlab_cli::records::{
    emit_records, ClassicalRecord, GgRecord, RsbRecord, ScalingRecord,
};
use spinlab_cli::runners::{run_classical, run_gg, run_rsb, run_scaling};

/// Numerical studies of disordered quantum spin chains at exact-
/// diagonalization scale.
#[derive(Debug, Parser)]
#[command(name = "spinlab", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Self-averaging of the free energy density over system size, with
    /// concentration-bound overlays and fluctuation sandwich checks.
    Scaling(CommonArgs),
    /// Overlap identities from disorder integration by parts, averaged
    /// exactly (quadrature) or by Monte Carlo.
    Gg(CommonArgs),
    /// Classical overlap variance proportions (2:3:6 gap shrinkage) on the
    /// diagonal fast path.
    Classical(CommonArgs),
    /// Two-replica coupling sweeps toward the decoupled point at fixed
    /// disorder seed.
    Rsb(CommonArgs),
}

/// Patch subcommand-appropriate defaults into unset flags, but only when no
/// config file governs the run.
fn patch_defaults(mut args: CommonArgs, model: Option<&str>, l_grid: Option<&str>) -> CommonArgs {
    if args.config.is_none() {
        if args.model.is_none() {
            if let Some(m) = model {
                args.model = Some(m.to_string());
            }
        }
        if args.l_grid.is_none() {
            if let Some(g) = l_grid {
                args.l_grid = Some(g.to_string());
            }
        }
    }
    args
}

fn announce(cfg: &RunConfig, subcommand: &str, rows: usize) -> Result<()> {
    println!(
        "{subcommand}: {rows} record(s) -> {} (config {}, seed {})",
        cfg.out_path(subcommand).display(),
        cfg.hash()?,
        cfg.seed
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Scaling(args) => {
            let cfg = resolve_config(&args)?;
            let res = run_scaling(&cfg)?;
            let path = cfg.out_path("scaling");
            emit_records(&res.records, cfg.format, &path, &ScalingRecord::column_docs())?;
            announce(&cfg, "scaling", res.records.len())?;
            if res.fits.is_empty() {
                println!("  no log-log fit (need >= 3 sizes with positive variance)");
            }
            for f in &res.fits {
                println!(
                    "  beta = {}: ln Var(psi) ~ {:.4} (+/- {:.4}) * ln V + {:.4} over {} sizes",
                    f.beta, f.slope, f.slope_stderr, f.intercept, f.n_points
                );
            }
            Ok(())
        }
        Cmd::Gg(args) => {
            let cfg = resolve_config(&args)?;
            let res = run_gg(&cfg)?;
            let path = cfg.out_path("gg");
            emit_records(&res.records, cfg.format, &path, &GgRecord::column_docs())?;
            announce(&cfg, "gg", res.records.len())?;
            for branch in ["quadrature", "mc"] {
                let worst = res
                    .records
                    .iter()
                    .filter(|r| r.branch == branch)
                    .map(|r| r.residual_norm)
                    .fold(f64::NAN, f64::max);
                if worst.is_finite() {
                    println!("  max |lhs - rhs| ({branch}): {worst:.3e}");
                }
            }
            Ok(())
        }
        Cmd::Classical(args) => {
            let args = patch_defaults(args, Some("random_bond_ising"), None);
            let cfg = resolve_config(&args)?;
            let res = run_classical(&cfg)?;
            let path = cfg.out_path("classical");
            emit_records(&res.records, cfg.format, &path, &ClassicalRecord::column_docs())?;
            announce(&cfg, "classical", res.records.len())?;
            if let Some(r) = res.records.last() {
                println!(
                    "  L = {}: |2vD - 3vd| = {:.3e}, |3vd - 6vm| = {:.3e}, decomposition residual {:.1e}",
                    r.l, r.gap_ds, r.gap_sm, r.decomposition_residual
                );
            }
            Ok(())
        }
        Cmd::Rsb(args) => {
            let args = patch_defaults(args, None, Some("2,3,4"));
            let cfg = resolve_config(&args)?;
            let res = run_rsb(&cfg)?;
            let path = cfg.out_path("rsb");
            emit_records(&res.records, cfg.format, &path, &RsbRecord::column_docs())?;
            announce(&cfg, "rsb", res.records.len())?;
            let m0 = res
                .records
                .iter()
                .map(|r| r.m0_overlap_gap)
                .fold(0.0f64, f64::max);
            println!("  max coupling-density vs overlap-operator defect: {m0:.3e}");
            if let Some(gap) = res.records.iter().filter_map(|r| r.decoupling_gap).reduce(f64::max)
            {
                println!("  max zero-coupling factorization gap: {gap:.3e}");
            }
            Ok(())
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version are successes; everything else is a usage
            // problem, same exit class as a bad config
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
