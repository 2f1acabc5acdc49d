use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use superchem::analytic::{bosonic_moments, fermionic_moments, fmt_num, FermiFlavor, MomentSet};
use superchem::config::{self, RunConfig, Value};
use superchem::cpt::{cpt_solution, table_rows};
use superchem::dynamics::integrate;
use superchem::ensemble::{draw_seed, run_ensemble, trajectory_rng};
use superchem::fock::{pair_moments_on_grid, relative_deviation, PairBasis, Statistics};
use superchem::io::{self, parse_grid, write_output, Figure, RunManifest};
use superchem::{ReactionVariant, Result};

#[derive(Parser)]
#[command(name = "superchem", version, about = "Coherent abstraction reactions of quantum-degenerate gases")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file, or a manifest.json from an earlier run.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one mean-field trajectory.
    Simulate {
        /// Start from the exact initial state with empty product modes.
        #[arg(long)]
        zero_seed: bool,
    },
    /// Run a seeded ensemble of mean-field trajectories.
    Ensemble {
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long)]
        master_seed: Option<u64>,
    },
    /// Print dark-state populations and detunings.
    Cpt {
        /// Imbalance ratios (comma list or start:stop:count).
        #[arg(long = "R")]
        r: Option<String>,
        /// Rabi ratios Ω/λ (comma list or start:stop:count).
        #[arg(long, default_value = "20")]
        ratio: String,
    },
    /// Final conversion against the imbalance ratio.
    Sweep {
        #[arg(long = "R-grid", default_value = "0.1:2.5:25")]
        r_grid: String,
    },
    /// Exact pair-conversion dynamics in a truncated Fock basis.
    Oracle {
        #[arg(long, default_value_t = 32)]
        na0: u64,
        #[arg(long, default_value_t = 32)]
        nb20: u64,
        #[arg(long, default_value = "bose")]
        statistics: String,
        #[arg(long, default_value = "0.05:0.3:6")]
        gt_grid: String,
    },
    /// Closed-form product statistics of the amplified regime.
    Moments {
        #[arg(long, default_value = "bose")]
        statistics: String,
        #[arg(long, default_value = "oracle")]
        flavor: String,
        #[arg(long, default_value = "0.1:3:30")]
        x_grid: String,
    },
    /// Plot data and gnuplot script of one figure.
    Figure {
        #[arg(value_name = "NAME")]
        name: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn user_entries(common: &Common) -> Result<Vec<(String, Value)>> {
    let mut entries = match &common.config {
        Some(p) => config::read_document(p)?,
        None => Vec::new(),
    };
    for s in &common.set {
        entries.push(config::parse_override(s)?);
    }
    Ok(entries)
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.common.out.clone();
    std::fs::create_dir_all(&out)?;
    let mut entries = user_entries(&cli.common)?;

    let manifest = match cli.command {
        Command::Figure { name } => io::figure_data(name.parse::<Figure>()?, &entries, &out)?,
        Command::Simulate { zero_seed } => simulate(&RunConfig::from_entries(&entries)?, zero_seed, &out)?,
        Command::Ensemble {
            trajectories,
            master_seed,
        } => {
            if let Some(m) = trajectories {
                entries.push(("trajectories".into(), Value::Int(m as i64)));
            }
            if let Some(s) = master_seed {
                entries.push(("seed".into(), Value::Int(s as i64)));
            }
            ensemble(&RunConfig::from_entries(&entries)?, &out)?
        }
        Command::Cpt { r, ratio } => {
            let cfg = RunConfig::from_entries(&entries)?;
            let rs = match r {
                Some(text) => parse_grid("R", &text)?,
                None => vec![cfg.r],
            };
            cpt_table(&cfg, &rs, &parse_grid("ratio", &ratio)?)?
        }
        Command::Sweep { r_grid } => {
            let cfg = RunConfig::from_entries(&entries)?;
            sweep(&cfg, &parse_grid("R", &r_grid)?, &out)?
        }
        Command::Oracle {
            na0,
            nb20,
            statistics,
            gt_grid,
        } => {
            let cfg = RunConfig::from_entries(&entries)?;
            let basis = PairBasis::new(na0, nb20, statistics.parse()?)?;
            oracle(&cfg, basis, &parse_grid("gt_grid", &gt_grid)?, &out)?
        }
        Command::Moments {
            statistics,
            flavor,
            x_grid,
        } => {
            let cfg = RunConfig::from_entries(&entries)?;
            moments(&cfg, statistics.parse()?, flavor.parse()?, &parse_grid("x_grid", &x_grid)?, &out)?
        }
    };
    manifest.write(&out)?;
    Ok(())
}

fn simulate(cfg: &RunConfig, zero_seed: bool, out: &Path) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("simulate", cfg);
    let base = cfg.initial_state()?;
    let state0 = if zero_seed {
        manifest.notes.insert("initial_state".into(), "zero product seed".into());
        base
    } else {
        let occupation = cfg.seed.occupation(&cfg.params, &base)?;
        manifest
            .notes
            .insert("initial_state".into(), format!("trajectory 0 of master seed {}", cfg.seed.master_seed));
        draw_seed(&mut trajectory_rng(cfg.seed.master_seed, 0), occupation, &base)?
    };
    let tr = integrate(&state0, &cfg.params, &cfg.time_grid()?, &cfg.integrator)?;
    write_output(out, io::TRAJECTORY_CSV, &mut manifest.outputs, |w| tr.write_csv(w))?;
    Ok(manifest)
}

fn ensemble(cfg: &RunConfig, out: &Path) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("ensemble", cfg);
    let res = run_ensemble(
        &cfg.params,
        &cfg.initial_state()?,
        &cfg.seed,
        cfg.trajectories,
        &cfg.time_grid()?,
        &cfg.integrator,
    )?;
    manifest.failures.failed_trajectories = res.failed.len();
    manifest.failures.requested_trajectories = cfg.trajectories;
    manifest
        .notes
        .insert("seed_occupation".into(), fmt_num(res.seed_occupation));
    write_output(out, io::ENSEMBLE_MEAN_CSV, &mut manifest.outputs, |w| res.write_mean_csv(w))?;
    write_output(out, io::ENSEMBLE_SPREAD_CSV, &mut manifest.outputs, |w| res.write_spread_csv(w))?;
    Ok(manifest)
}

fn cpt_table(cfg: &RunConfig, rs: &[f64], ratios: &[f64]) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("cpt", cfg);
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    writeln!(w, "variant,R,ratio,N_ab,N_b,N_b2,N_a,Delta,closed_form")?;
    let trimer = cfg.params.variant == ReactionVariant::TrimerFormation;
    for &ratio in ratios {
        for &r in rs {
            let sol = cpt_solution(r, ratio, &cfg.params, cfg.resonance_rule)?;
            let closed = if trimer {
                "-".to_string()
            } else {
                table_rows(ratio)
                    .iter()
                    .find(|(rr, _)| *rr == r)
                    .map(|(_, n)| fmt_num(*n))
                    .unwrap_or_else(|| "-".into())
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                cfg.params.variant,
                fmt_num(r),
                fmt_num(ratio),
                fmt_num(sol.n_ab_s),
                fmt_num(sol.n_b_s),
                fmt_num(sol.n_b2_s),
                fmt_num(sol.n_a_s),
                fmt_num(sol.delta),
                closed
            )?;
        }
    }
    manifest.notes.insert("R".into(), join(rs));
    manifest.notes.insert("ratio".into(), join(ratios));
    Ok(manifest)
}

fn sweep(cfg: &RunConfig, grid: &[f64], out: &Path) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("sweep", cfg);
    let conv = io::sweep(cfg, grid)?;
    manifest.failures.failed_points = conv.iter().filter(|c| c.is_none()).count();
    manifest.notes.insert("R_grid".into(), join(grid));
    write_output(out, io::SWEEP_CSV, &mut manifest.outputs, |w| {
        writeln!(w, "R,final_conversion")?;
        for (r, c) in grid.iter().zip(&conv) {
            let c = c.map(fmt_num).unwrap_or_else(|| "undefined".into());
            writeln!(w, "{},{c}", fmt_num(*r))?;
        }
        Ok(())
    })?;
    Ok(manifest)
}

const MOMENT_COLUMNS: &str = "N,Q,g2_single,g2_cross,C,csi_gap";

fn analytic(statistics: Statistics, flavor: FermiFlavor, x: f64) -> Result<MomentSet> {
    match statistics {
        Statistics::Bose => bosonic_moments(x),
        Statistics::Fermi => fermionic_moments(x, flavor),
    }
}

fn oracle(cfg: &RunConfig, basis: PairBasis, grid: &[f64], out: &Path) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("oracle", cfg);
    let sets = pair_moments_on_grid(&basis, grid)?;
    manifest.notes.insert("na0".into(), basis.na0.to_string());
    manifest.notes.insert("nb20".into(), basis.nb20.to_string());
    manifest.notes.insert("gt_grid".into(), join(grid));
    write_output(out, io::ORACLE_CSV, &mut manifest.outputs, |w| {
        writeln!(w, "gt,{MOMENT_COLUMNS},deviation_vs_analytic")?;
        for (x, m) in grid.iter().zip(&sets) {
            let reference = analytic(basis.statistics, FermiFlavor::Oracle, *x)?;
            writeln!(
                w,
                "{},{},{}",
                fmt_num(*x),
                m.csv_fields().join(","),
                fmt_num(relative_deviation(m, &reference))
            )?;
        }
        Ok(())
    })?;
    Ok(manifest)
}

fn moments(
    cfg: &RunConfig,
    statistics: Statistics,
    flavor: FermiFlavor,
    grid: &[f64],
    out: &Path,
) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("moments", cfg);
    manifest.notes.insert("x_grid".into(), join(grid));
    manifest.notes.insert("flavor".into(), flavor.to_string());
    let rows = grid
        .iter()
        .map(|&x| analytic(statistics, flavor, x))
        .collect::<Result<Vec<_>>>()?;
    write_output(out, io::MOMENTS_CSV, &mut manifest.outputs, |w| {
        writeln!(w, "x,{MOMENT_COLUMNS}")?;
        for (x, m) in grid.iter().zip(&rows) {
            writeln!(w, "{},{}", fmt_num(*x), m.csv_fields().join(","))?;
        }
        Ok(())
    })?;
    Ok(manifest)
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(",")
}

