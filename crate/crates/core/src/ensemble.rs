//! Vacuum-seeded mean-field ensembles.
//!
//! Product modes start from small random classical amplitudes standing in for
//! quantum noise. Each trajectory draws from its own RNG stream derived from
//! `(master_seed, index)`, so results do not depend on how the trajectories
//! are scheduled across threads.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::effective_couplings;
use crate::dynamics::{integrate, IntegratorOptions};
use crate::error::{Error, Result};
use crate::model::{ModeAmplitudes, ReactionVariant, SystemParams};

/// Largest fraction of failed trajectories an ensemble tolerates.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedRule {
    /// Half a quantum per product mode: mean occupation `1/(2 N₀)`.
    #[default]
    HalfVacuum,
    /// Occupation reached by linearized growth after `t_seed`:
    /// `sinh²(𝒢 t_seed)/N₀`.
    MatchedGrowth,
}

impl FromStr for SeedRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half-vacuum" | "half_vacuum" => Ok(SeedRule::HalfVacuum),
            "matched-growth" | "matched_growth" => Ok(SeedRule::MatchedGrowth),
            other => Err(Error::config(
                "seed_rule",
                format!("unknown seed rule `{other}` (expected half-vacuum or matched-growth)"),
            )),
        }
    }
}

impl fmt::Display for SeedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeedRule::HalfVacuum => "half-vacuum",
            SeedRule::MatchedGrowth => "matched-growth",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedSpec {
    /// Total particle number `N₀`.
    pub n_total: f64,
    pub rule: SeedRule,
    /// Growth time for [`SeedRule::MatchedGrowth`], units of `1/λ`.
    pub t_seed: f64,
    pub master_seed: u64,
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec {
            n_total: 1e5,
            rule: SeedRule::HalfVacuum,
            t_seed: 0.1,
            master_seed: 0,
        }
    }
}

impl SeedSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_total >= 100.0) || !self.n_total.is_finite() {
            return Err(Error::config("n_total", "must be at least 100"));
        }
        if self.rule == SeedRule::MatchedGrowth && !(self.t_seed > 0.0) {
            return Err(Error::config("t_seed", "must be positive for matched-growth seeds"));
        }
        Ok(())
    }

    /// Mean occupation given to each product mode.
    ///
    /// For matched growth the amplified rate uses the peak Rabi coupling and
    /// the source populations of `base`.
    pub fn occupation(&self, params: &SystemParams, base: &ModeAmplitudes) -> Result<f64> {
        match self.rule {
            SeedRule::HalfVacuum => Ok(0.5 / self.n_total),
            SeedRule::MatchedGrowth => {
                let n = base.populations();
                let (n1, n2) = match base.variant {
                    ReactionVariant::TrimerFormation => (n[1], n[1]),
                    _ => (n[0], n[2]),
                };
                let c = effective_couplings(params, params.pulse.omega0, n1, n2)?;
                Ok((c.amplified_rate * self.t_seed).sinh().powi(2) / self.n_total)
            }
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the RNG stream for trajectory `index`.
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trajectory_seed(master_seed, index))
}

/// Adds independent circular Gaussian amplitudes with mean occupation
/// `occupation` to both product modes and rescales the source modes so the
/// atom-weighted norm is unchanged.
pub fn draw_seed<R: rand::Rng + ?Sized>(
    rng: &mut R,
    occupation: f64,
    base: &ModeAmplitudes,
) -> Result<ModeAmplitudes> {
    let variant = base.variant;
    let products = variant.product_modes();
    if products.iter().any(|&i| base.psi[i] != Complex64::new(0.0, 0.0)) {
        return Err(Error::Domain("seeding needs empty product modes".into()));
    }
    if !(occupation >= 0.0) {
        return Err(Error::Domain(format!("seed occupation must be non-negative, got {occupation}")));
    }
    let mut state = base.clone();
    let scale = (occupation / 2.0).sqrt();
    for &i in &products {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        state.psi[i] = Complex64::new(re, im) * scale;
    }
    let weights = variant.atom_weights();
    let sources = variant.source_modes();
    let w_total = base.atom_norm();
    let w_src: f64 = sources.iter().map(|&i| weights[i] * base.population(i)).sum();
    let w_prod: f64 = products.iter().map(|&i| weights[i] * state.population(i)).sum();
    let w_rest = w_total - w_src;
    if !(w_src > 0.0) || w_prod >= w_src {
        return Err(Error::Domain("seed occupation exceeds the available source atoms".into()));
    }
    let s = ((w_src - w_prod) / w_src).sqrt();
    for &i in sources {
        state.psi[i] *= s;
    }
    debug_assert!((state.atom_norm() - (w_src + w_rest)).abs() < 1e-12);
    Ok(state)
}

/// Per-mode ensemble statistics on a fixed time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub variant: ReactionVariant,
    pub times: Vec<f64>,
    /// `mean[k][i]`: average population of mode `i` at `times[k]`.
    pub mean: Vec<Vec<f64>>,
    /// `spread[k][i]`: population standard deviation (1/M normalization).
    pub spread: Vec<Vec<f64>>,
    /// `populations[n][k][i]` for every kept trajectory `n`.
    pub populations: Vec<Vec<Vec<f64>>>,
    pub trajectories_kept: usize,
    /// Indices of trajectories that failed to integrate.
    pub failed: Vec<usize>,
    pub master_seed: u64,
    /// RNG seed of every requested trajectory, in index order.
    pub trajectory_seeds: Vec<u64>,
    pub seed_occupation: f64,
}

impl EnsembleResult {
    /// Aggregates per-trajectory population samples `populations[n][k][i]`.
    pub fn from_samples(
        variant: ReactionVariant,
        times: Vec<f64>,
        populations: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let m = populations.len();
        if m == 0 {
            return Err(Error::Domain("ensemble statistics need at least one trajectory".into()));
        }
        let modes = variant.mode_count();
        let mut mean = vec![vec![0.0; modes]; times.len()];
        let mut spread = vec![vec![0.0; modes]; times.len()];
        for (k, (mk, sk)) in mean.iter_mut().zip(spread.iter_mut()).enumerate() {
            for i in 0..modes {
                let avg = populations.iter().map(|p| p[k][i]).sum::<f64>() / m as f64;
                let var = populations.iter().map(|p| (p[k][i] - avg).powi(2)).sum::<f64>() / m as f64;
                mk[i] = avg;
                sk[i] = var.sqrt();
            }
        }
        Ok(EnsembleResult {
            variant,
            times,
            mean,
            spread,
            populations,
            trajectories_kept: m,
            failed: Vec::new(),
            master_seed: 0,
            trajectory_seeds: Vec::new(),
            seed_occupation: 0.0,
        })
    }

    pub fn failures(&self) -> usize {
        self.failed.len()
    }

    pub fn mean_series(&self, mode: usize) -> Vec<f64> {
        self.mean.iter().map(|row| row[mode]).collect()
    }

    pub fn spread_series(&self, mode: usize) -> Vec<f64> {
        self.spread.iter().map(|row| row[mode]).collect()
    }

    /// Index of the grid time closest to `t`.
    pub fn time_index(&self, t: f64) -> usize {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(k, _)| k)
            .unwrap_or(0)
    }

    pub fn write_mean_csv<W: Write>(&self, w: W) -> Result<()> {
        write_table(w, self.variant, &self.times, &self.mean)
    }

    pub fn write_spread_csv<W: Write>(&self, w: W) -> Result<()> {
        write_table(w, self.variant, &self.times, &self.spread)
    }
}

fn write_table<W: Write>(
    mut w: W,
    variant: ReactionVariant,
    times: &[f64],
    rows: &[Vec<f64>],
) -> Result<()> {
    let labels: Vec<String> = variant.mode_labels().iter().map(|l| format!("N_{l}")).collect();
    writeln!(w, "t,{}", labels.join(","))?;
    for (t, row) in times.iter().zip(rows) {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(w, "{t:.16e},{}", cells.join(","))?;
    }
    Ok(())
}

/// Integrates every initial state on `grid` in parallel and aggregates the
/// populations. Failed trajectories are dropped; more than 10% failures is
/// an error.
pub fn run_states(
    params: &SystemParams,
    states: &[ModeAmplitudes],
    grid: &[f64],
    opts: &IntegratorOptions,
) -> Result<EnsembleResult> {
    let outcomes: Vec<Result<Vec<Vec<f64>>>> = states
        .par_iter()
        .map(|s| {
            integrate(s, params, grid, opts)
                .map(|tr| tr.states.iter().map(|x| x.populations()).collect())
        })
        .collect();
    let requested = states.len();
    let mut kept = Vec::with_capacity(requested);
    let mut failed = Vec::new();
    for (n, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(p) => kept.push(p),
            Err(_) => failed.push(n),
        }
    }
    if failed.len() as f64 > MAX_FAILURE_FRACTION * requested as f64 || kept.is_empty() {
        return Err(Error::Ensemble {
            failures: failed.len(),
            requested,
        });
    }
    let mut result = EnsembleResult::from_samples(params.variant, grid.to_vec(), kept)?;
    result.failed = failed;
    Ok(result)
}

/// Runs `m` independently seeded trajectories starting from `base`.
pub fn run_ensemble(
    params: &SystemParams,
    base: &ModeAmplitudes,
    spec: &SeedSpec,
    m: usize,
    grid: &[f64],
    opts: &IntegratorOptions,
) -> Result<EnsembleResult> {
    if m < 2 {
        return Err(Error::config("trajectories", "an ensemble needs at least 2 trajectories"));
    }
    spec.validate()?;
    let occupation = spec.occupation(params, base)?;
    let seeds: Vec<u64> = (0..m as u64)
        .map(|n| trajectory_seed(spec.master_seed, n))
        .collect();
    let states = seeds
        .iter()
        .map(|&s| draw_seed(&mut ChaCha8Rng::seed_from_u64(s), occupation, base))
        .collect::<Result<Vec<_>>>()?;
    let mut result = run_states(params, &states, grid, opts)?;
    result.master_seed = spec.master_seed;
    result.trajectory_seeds = seeds;
    result.seed_occupation = occupation;
    Ok(result)
}

/// Sample covariance of modes `i` and `j` at grid index `k`, normalized by
/// `√(N̄_i N̄_j)`. `None` when either mean vanishes.
pub fn correlation_extract(result: &EnsembleResult, i: usize, j: usize, k: usize) -> Option<f64> {
    let mi = result.mean[k][i];
    let mj = result.mean[k][j];
    if mi <= 0.0 || mj <= 0.0 {
        return None;
    }
    let m = result.populations.len() as f64;
    let cov = result
        .populations
        .iter()
        .map(|p| (p[k][i] - mi) * (p[k][j] - mj))
        .sum::<f64>()
        / m;
    Some(cov / (mi * mj).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::time_grid;
    use crate::model::{abstraction, initial_state, trimer};
    use proptest::prelude::*;

    #[test]
    fn half_vacuum_mean_occupation() {
        let base = initial_state(0.5, ReactionVariant::BosonicAbstraction).unwrap();
        let occ = 0.5 / 1e5;
        let draws = 10_000;
        let mut total = 0.0;
        for n in 0..draws {
            let s = draw_seed(&mut trajectory_rng(11, n), occ, &base).unwrap();
            total += s.population(abstraction::AB);
            assert!((s.atom_norm() - 1.0).abs() < 1e-12);
        }
        let mean = total / draws as f64;
        assert!((mean / 5e-6 - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn seeding_is_deterministic() {
        let base = initial_state(1.0, ReactionVariant::TrimerFormation).unwrap();
        let a = draw_seed(&mut trajectory_rng(7, 3), 1e-5, &base).unwrap();
        let b = draw_seed(&mut trajectory_rng(7, 3), 1e-5, &base).unwrap();
        assert_eq!(a, b);
        assert!(a.population(trimer::A3) > 0.0 && a.population(trimer::A) > 0.0);
        assert_eq!(a.population(trimer::T), 0.0);
        let c = draw_seed(&mut trajectory_rng(7, 4), 1e-5, &base).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_variance_is_the_fixed_point() {
        let base = initial_state(0.5, ReactionVariant::BosonicAbstraction).unwrap();
        let s = draw_seed(&mut trajectory_rng(1, 0), 0.0, &base).unwrap();
        assert_eq!(s, base);
    }

    #[test]
    fn seeding_needs_empty_products() {
        let mut base = initial_state(0.5, ReactionVariant::BosonicAbstraction).unwrap();
        base.psi[abstraction::B] = Complex64::new(1e-3, 0.0);
        assert!(draw_seed(&mut trajectory_rng(1, 0), 1e-5, &base).is_err());
    }

    #[test]
    fn matched_growth_occupation() {
        let p = SystemParams::preset(ReactionVariant::BosonicAbstraction);
        let base = initial_state(0.5, p.variant).unwrap();
        let spec = SeedSpec {
            rule: SeedRule::MatchedGrowth,
            t_seed: 0.1,
            ..SeedSpec::default()
        };
        let occ = spec.occupation(&p, &base).unwrap();
        let expect = (20.0f64 / 9.0 * 0.1).sinh().powi(2) / 1e5;
        assert!((occ - expect).abs() < 1e-18);
    }

    #[test]
    fn hand_forced_statistics() {
        let v = ReactionVariant::BosonicAbstraction;
        let row = |x: f64| vec![vec![0.0, x, 0.0, x, 0.0]];
        let r = EnsembleResult::from_samples(v, vec![0.0], vec![row(0.0), row(2.0)]).unwrap();
        assert_eq!(r.mean[0][abstraction::AB], 1.0);
        assert_eq!(r.spread[0][abstraction::AB], 1.0);
        let c = correlation_extract(&r, abstraction::AB, abstraction::AB, 0).unwrap();
        assert_eq!(c, 1.0);
        assert!(correlation_extract(&r, abstraction::M, abstraction::AB, 0).is_none());
    }

    #[test]
    fn identical_seeds_have_no_spread() {
        let p = SystemParams::preset(ReactionVariant::BosonicAbstraction);
        let base = initial_state(0.5, p.variant).unwrap();
        let s = draw_seed(&mut trajectory_rng(5, 0), 1e-4, &base).unwrap();
        let grid = time_grid(-10.0, 10.0, 5).unwrap();
        let r = run_states(&p, &vec![s; 4], &grid, &IntegratorOptions::default()).unwrap();
        assert!(r.spread.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn too_few_trajectories() {
        let p = SystemParams::preset(ReactionVariant::BosonicAbstraction);
        let base = initial_state(0.5, p.variant).unwrap();
        let err = run_ensemble(&p, &base, &SeedSpec::default(), 1, &[0.0, 1.0], &IntegratorOptions::default());
        assert!(err.is_err());
    }

    #[test]
    fn pair_difference_conserved_without_decay() {
        let mut p = SystemParams::preset(ReactionVariant::BosonicAbstraction);
        p.gamma = 0.0;
        let base = initial_state(0.5, p.variant).unwrap();
        let s = draw_seed(&mut trajectory_rng(9, 0), 1e-3, &base).unwrap();
        let d0 = s.population(abstraction::AB) - s.population(abstraction::B);
        let grid = time_grid(-20.0, 20.0, 9).unwrap();
        let tr = integrate(&s, &p, &grid, &IntegratorOptions::default()).unwrap();
        for st in &tr.states {
            let d = st.population(abstraction::AB) - st.population(abstraction::B);
            assert!((d - d0).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn spreads_are_nonnegative(xs in proptest::collection::vec(0.0f64..1.0, 2..20)) {
            let v = ReactionVariant::TrimerFormation;
            let samples = xs.iter().map(|&x| vec![vec![x, 1.0 - x, x * x, 0.0]]).collect();
            let r = EnsembleResult::from_samples(v, vec![0.0], samples).unwrap();
            prop_assert!(r.spread[0].iter().all(|&s| s >= 0.0));
        }

        #[test]
        fn seeded_norm_is_exact(r in 0.05f64..5.0, occ in 0.0f64..1e-3, idx in 0u64..1000) {
            let base = initial_state(r, ReactionVariant::BoseFermiAbstraction).unwrap();
            let s = draw_seed(&mut trajectory_rng(3, idx), occ, &base).unwrap();
            prop_assert!((s.atom_norm() - 1.0).abs() < 1e-12);
        }
    }
}
