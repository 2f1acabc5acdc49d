//! Run manifests, output files and figure presets.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::analytic::fmt_num;
use crate::config::{RunConfig, Value};
use crate::cpt::{cpt_population, sweep_imbalance, SweepSettings};
use crate::dynamics::sci17;
use crate::ensemble::{run_ensemble, EnsembleResult};
use crate::error::{Error, Result};
use crate::model::ReactionVariant;
use crate::ARTIFACT_VERSION;

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const ENSEMBLE_MEAN_CSV: &str = "ensemble_mean.csv";
pub const ENSEMBLE_SPREAD_CSV: &str = "ensemble_spread.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const MOMENTS_CSV: &str = "moments.csv";
pub const ORACLE_CSV: &str = "oracle.csv";
pub const MANIFEST_JSON: &str = "manifest.json";

/// Failure tally of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FailureCounts {
    pub failed_trajectories: usize,
    pub requested_trajectories: usize,
    /// Sweep points whose ensemble did not complete.
    pub failed_points: usize,
}

/// Record of one command invocation, sufficient to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub subcommand: String,
    pub config: BTreeMap<String, Value>,
    pub master_seed: u64,
    pub params_hash: String,
    pub outputs: Vec<String>,
    pub failures: FailureCounts,
    /// Free-form settings that are not configuration keys, such as
    /// figure-preset choices and command-line grids.
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, cfg: &RunConfig) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            artifact_version: ARTIFACT_VERSION.to_string(),
            timestamp,
            subcommand: subcommand.to_string(),
            config: cfg.entries(),
            master_seed: cfg.seed.master_seed,
            params_hash: cfg.params_hash(),
            outputs: Vec::new(),
            failures: FailureCounts::default(),
            notes: BTreeMap::new(),
        }
    }

    /// The configuration this manifest was produced with.
    pub fn run_config(&self) -> Result<RunConfig> {
        let entries: Vec<(String, Value)> = self.config.clone().into_iter().collect();
        RunConfig::from_entries(&entries)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_JSON);
        std::fs::write(&path, self.to_json()? + "\n")?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Creates `dir/name`, hands a buffered writer to `body` and records the
/// name in `outputs`.
pub fn write_output<F>(dir: &Path, name: &str, outputs: &mut Vec<String>, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    body(&mut w)?;
    w.flush()?;
    outputs.push(name.to_string());
    Ok(())
}

/// Parses `start:stop:count` (inclusive, evenly spaced) or a comma list.
pub fn parse_grid(key: &str, text: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| Error::config(key, format!("{what} in grid `{text}`"));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.len() {
        1 => text
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("invalid number")))
            .collect(),
        3 => {
            let a: f64 = parts[0].trim().parse().map_err(|_| bad("invalid start"))?;
            let b: f64 = parts[1].trim().parse().map_err(|_| bad("invalid stop"))?;
            let n: usize = parts[2].trim().parse().map_err(|_| bad("invalid count"))?;
            match n {
                0 => Err(bad("empty count")),
                1 => Ok(vec![a]),
                _ => Ok((0..n)
                    .map(|k| if k == n - 1 { b } else { a + (b - a) * k as f64 / (n - 1) as f64 })
                    .collect()),
            }
        }
        _ => Err(bad("expected start:stop:count or a comma list")),
    }
}

/// Figure presets: plot-ready CSVs and a gnuplot script per figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3a,
    Fig3b,
    Fig4a,
    Fig4b,
    Fig5a,
    Fig5b,
}

pub const ALL_FIGURES: [Figure; 7] = [
    Figure::Fig2,
    Figure::Fig3a,
    Figure::Fig3b,
    Figure::Fig4a,
    Figure::Fig4b,
    Figure::Fig5a,
    Figure::Fig5b,
];

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3a => "fig3a",
            Figure::Fig3b => "fig3b",
            Figure::Fig4a => "fig4a",
            Figure::Fig4b => "fig4b",
            Figure::Fig5a => "fig5a",
            Figure::Fig5b => "fig5b",
        }
    }

    pub fn variant(self) -> ReactionVariant {
        match self {
            Figure::Fig2 | Figure::Fig3a | Figure::Fig3b | Figure::Fig5a => {
                ReactionVariant::BosonicAbstraction
            }
            _ => ReactionVariant::BoseFermiAbstraction,
        }
    }

    /// Two-body detunings plotted in the figure.
    pub fn detunings(self) -> &'static [f64] {
        match self {
            Figure::Fig2 | Figure::Fig3a | Figure::Fig4a => &[3.0, -3.0],
            Figure::Fig3b | Figure::Fig4b => &[1.0, -1.0],
            Figure::Fig5a | Figure::Fig5b => &[-3.0, -1.0, 1.0, 3.0],
        }
    }

    fn is_sweep(self) -> bool {
        matches!(self, Figure::Fig5a | Figure::Fig5b)
    }

    /// Defaults the caller may override (keys the figure does not fix).
    fn soft_defaults(self) -> Vec<(String, Value)> {
        if self.is_sweep() {
            vec![("trajectories".into(), Value::Int(16))]
        } else {
            Vec::new()
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ALL_FIGURES
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::config("figure", format!("unknown figure `{s}`")))
    }
}

/// Imbalance grid of the sweep figures: 0.1 to 2.5 in steps of 0.1.
pub fn figure_sweep_grid() -> Vec<f64> {
    (1..=25).map(|k| k as f64 / 10.0).collect()
}

fn delta_tag(delta: f64) -> String {
    let mag = fmt_num(delta.abs());
    if delta < 0.0 {
        format!("m{mag}")
    } else {
        format!("p{mag}")
    }
}

fn panel_config(fig: Figure, delta: f64, user: &[(String, Value)]) -> Result<RunConfig> {
    for (k, _) in user {
        if k == "variant" || k == "delta" {
            return Err(Error::config(k.clone(), format!("fixed by the {fig} preset")));
        }
    }
    let mut entries = vec![
        ("variant".to_string(), Value::Str(fig.variant().name().into())),
        ("delta".to_string(), Value::Float(delta)),
    ];
    entries.extend(fig.soft_defaults());
    entries.extend(user.iter().cloned());
    RunConfig::from_entries(&entries)
}

/// Writes the data and gnuplot script of `fig` into `dir`. `user` holds
/// configuration entries layered over the preset; overriding a key the
/// figure fixes (variant, two-body detuning) is a configuration error.
pub fn figure_data(fig: Figure, user: &[(String, Value)], dir: &Path) -> Result<RunManifest> {
    let deltas = fig.detunings();
    let configs = deltas
        .iter()
        .map(|&d| panel_config(fig, d, user))
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = RunManifest::new(&format!("figure {fig}"), &configs[0]);
    manifest.notes.insert(
        "detunings".into(),
        deltas.iter().map(|d| fmt_num(*d)).collect::<Vec<_>>().join(","),
    );
    for (cfg, d) in configs.iter().zip(deltas) {
        manifest
            .notes
            .insert(format!("Delta[delta={}]", fmt_num(*d)), fmt_num(cfg.params.laser_detuning));
    }
    let c0 = &configs[0];
    manifest.notes.insert(
        "time_window".into(),
        format!("[{}, {}] with {} samples", fmt_num(c0.t_start), fmt_num(c0.t_end), c0.samples),
    );

    if fig.is_sweep() {
        let grid = figure_sweep_grid();
        manifest.notes.insert(
            "R_grid".into(),
            grid.iter().map(|r| fmt_num(*r)).collect::<Vec<_>>().join(","),
        );
        let mut columns = Vec::new();
        for cfg in &configs {
            let res = sweep(cfg, &grid)?;
            manifest.failures.failed_points += res.iter().filter(|c| c.is_none()).count();
            columns.push(res);
        }
        let name = format!("{fig}.csv");
        write_output(dir, &name, &mut manifest.outputs, |w| {
            let head: Vec<String> = deltas.iter().map(|d| format!("delta={}", fmt_num(*d))).collect();
            writeln!(w, "R,{}", head.join(","))?;
            for (i, r) in grid.iter().enumerate() {
                let row: Vec<String> = columns
                    .iter()
                    .map(|c| c[i].map(fmt_num).unwrap_or_else(|| "undefined".into()))
                    .collect();
                writeln!(w, "{},{}", fmt_num(*r), row.join(","))?;
            }
            Ok(())
        })?;
        write_script(dir, fig, &sweep_script(fig, &name, deltas), &mut manifest.outputs)?;
        return Ok(manifest);
    }

    let mut files = Vec::new();
    for (cfg, &d) in configs.iter().zip(deltas) {
        let res = ensemble(cfg)?;
        manifest.failures.failed_trajectories += res.failed.len();
        manifest.failures.requested_trajectories += cfg.trajectories;
        let name = match fig {
            Figure::Fig2 => format!("{fig}_band_{}.csv", delta_tag(d)),
            _ => format!("{fig}_{}.csv", delta_tag(d)),
        };
        write_output(dir, &name, &mut manifest.outputs, |w| match fig {
            Figure::Fig2 => write_band(w, &res),
            _ => write_populations_with_cpt(w, &res, cfg),
        })?;
        files.push((d, name));
    }
    let script = match fig {
        Figure::Fig2 => band_script(&files, fig.variant()),
        _ => population_script(fig, &files, fig.variant()),
    };
    write_script(dir, fig, &script, &mut manifest.outputs)?;
    Ok(manifest)
}

fn ensemble(cfg: &RunConfig) -> Result<EnsembleResult> {
    run_ensemble(
        &cfg.params,
        &cfg.initial_state()?,
        &cfg.seed,
        cfg.trajectories,
        &cfg.time_grid()?,
        &cfg.integrator,
    )
}

/// Imbalance sweep with the settings of `cfg`.
pub fn sweep(cfg: &RunConfig, grid: &[f64]) -> Result<Vec<Option<f64>>> {
    let settings = SweepSettings {
        t_start: cfg.t_start,
        t_end: cfg.t_end,
        trajectories: cfg.trajectories,
        rule: cfg.resonance_rule,
        auto_delta: cfg.delta_mode == crate::config::DeltaMode::Auto,
        reference_ratio: cfg.reference_ratio(),
    };
    Ok(sweep_imbalance(&cfg.params, grid, &cfg.seed, &settings, &cfg.integrator)?.final_conversion)
}

fn write_band<W: Write>(w: &mut W, res: &EnsembleResult) -> Result<()> {
    let labels = res.variant.mode_labels();
    let mut head = vec!["t".to_string()];
    for l in labels {
        head.push(format!("N_{l}_mean"));
        head.push(format!("N_{l}_spread"));
    }
    writeln!(w, "{}", head.join(","))?;
    for (k, t) in res.times.iter().enumerate() {
        let mut row = vec![sci17(*t)];
        for i in 0..labels.len() {
            row.push(sci17(res.mean[k][i]));
            row.push(sci17(res.spread[k][i]));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

fn write_populations_with_cpt<W: Write>(w: &mut W, res: &EnsembleResult, cfg: &RunConfig) -> Result<()> {
    let labels = res.variant.mode_labels();
    let head: Vec<String> = labels.iter().map(|l| format!("N_{l}")).collect();
    writeln!(w, "t,{},CPT", head.join(","))?;
    for (k, t) in res.times.iter().enumerate() {
        let mut row = vec![sci17(*t)];
        row.extend(res.mean[k].iter().map(|x| sci17(*x)));
        let ratio = cfg.params.omega(*t) / cfg.params.lambda;
        row.push(sci17(cpt_population(cfg.r, ratio)));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

fn write_script(dir: &Path, fig: Figure, body: &str, outputs: &mut Vec<String>) -> Result<()> {
    write_output(dir, &format!("{fig}.gp"), outputs, |w| {
        w.write_all(body.as_bytes())?;
        Ok(())
    })
}

const SCRIPT_HEAD: &str = "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't [1/lambda]'\n";

fn product_columns(variant: ReactionVariant) -> [(usize, &'static str); 2] {
    let labels = variant.mode_labels();
    let [p1, p2] = variant.product_modes();
    [(p2, labels[p2]), (p1, labels[p1])]
}

fn band_script(files: &[(f64, String)], variant: ReactionVariant) -> String {
    let n = variant.mode_labels().len();
    let mut s = format!("{SCRIPT_HEAD}set terminal pngcairo size 800,600\nset output 'fig2.png'\nset ylabel 'spread'\n");
    let curves: Vec<String> = files
        .iter()
        .flat_map(|(d, f)| {
            (0..n).map(move |i| {
                format!(
                    "'{f}' using 1:{} with lines title '{} delta={}'",
                    3 + 2 * i,
                    variant.mode_labels()[i],
                    fmt_num(*d)
                )
            })
        })
        .collect();
    s += &format!("set multiplot\nplot {}\n", curves.join(", \\\n     "));
    let (_, first) = &files[0];
    s += "set origin 0.5,0.5\nset size 0.45,0.45\nunset xlabel\nset ylabel 'mean +- spread'\n";
    let bands: Vec<String> = product_columns(variant)
        .iter()
        .map(|(i, l)| {
            let m = 2 + 2 * i;
            format!(
                "'{first}' using 1:(${m}-${}):(${m}+${}) with filledcurves fs transparent solid 0.3 title '{l}'",
                m + 1,
                m + 1
            )
        })
        .collect();
    s += &format!("plot {}\nunset multiplot\n", bands.join(", \\\n     "));
    s
}

fn population_script(fig: Figure, files: &[(f64, String)], variant: ReactionVariant) -> String {
    let mut s = format!(
        "{SCRIPT_HEAD}set terminal pngcairo size 800,600\nset output '{fig}.png'\nset ylabel 'population'\n"
    );
    let ncols = variant.mode_labels().len();
    let mut curves = Vec::new();
    for (d, f) in files {
        for (i, l) in product_columns(variant) {
            curves.push(format!(
                "'{f}' using 1:{} with lines title '{l} delta={}'",
                2 + i,
                fmt_num(*d)
            ));
        }
    }
    curves.push(format!(
        "'{}' using 1:{} with lines dt 2 lc black title 'CPT'",
        files[0].1,
        2 + ncols
    ));
    s += &format!("plot {}\n", curves.join(", \\\n     "));
    s
}

fn sweep_script(fig: Figure, file: &str, deltas: &[f64]) -> String {
    let mut s = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 800,600\nset output '{fig}.png'\nset xlabel 'R'\nset ylabel 'final N_ab'\n"
    );
    let curves: Vec<String> = (0..deltas.len())
        .map(|i| format!("'{file}' using 1:{} with linespoints", i + 2))
        .collect();
    s += &format!("plot {}\n", curves.join(", \\\n     "));
    s
}
