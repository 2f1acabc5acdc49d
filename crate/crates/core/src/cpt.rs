//! Dark-state (CPT) steady states and the adiabatic passage that follows them.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{resonance_delta_with, rhs, IntegratorOptions, ResonanceRule};
use crate::ensemble::{run_ensemble, SeedSpec};
use crate::error::{Error, Result};
use crate::model::{abstraction, initial_state, trimer, ModeAmplitudes, PulseSchedule, ReactionVariant, SystemParams};

/// `√(1 + 8 ratio²)`.
pub fn omega_eff(ratio: f64) -> f64 {
    (1.0 + 8.0 * ratio * ratio).sqrt()
}

/// Steady dimer fraction `N_ab` of the dark state at imbalance `r` and
/// `ratio = Ω/λ`:
/// `2R / ((1+R)(1 + 2R + √((1-2R)² + 8R ratio²)))`.
pub fn cpt_population(r: f64, ratio: f64) -> f64 {
    let root = ((1.0 - 2.0 * r).powi(2) + 8.0 * r * ratio * ratio).sqrt();
    2.0 * r / ((1.0 + r) * (1.0 + 2.0 * r + root))
}

/// Coefficients `(a, b, c)` of the particle-number quadratic `aN² + bN + c = 0`
/// whose positive root is [`cpt_population`].
pub fn cpt_quadratic(r: f64, ratio: f64) -> (f64, f64, f64) {
    (
        ratio * ratio - 1.0,
        (2.0 * r + 1.0) / (2.0 * r + 2.0),
        -r / (2.0 * (1.0 + r).powi(2)),
    )
}

/// `|aN² + bN + c|` for `N = cpt_population(r, ratio)`.
pub fn quadratic_residual(r: f64, ratio: f64) -> f64 {
    let (a, b, c) = cpt_quadratic(r, ratio);
    let n = cpt_population(r, ratio);
    (a * n * n + b * n + c).abs()
}

/// Closed forms of the three tabulated imbalances, `(R, N_ab(ratio))`:
/// `R = 1/2: 1/(3(1+x))`, `R = 1: 1/(3+Ω_eff)`, `R = 1/4: 4/(5(3+Ω_eff))`.
pub fn table_rows(ratio: f64) -> [(f64, f64); 3] {
    let w = omega_eff(ratio);
    [
        (0.5, 1.0 / (3.0 * (1.0 + ratio))),
        (1.0, 1.0 / (3.0 + w)),
        (0.25, 4.0 / (5.0 * (3.0 + w))),
    ]
}

/// Populations of the dark state with the detuning that keeps it stationary.
///
/// For the trimer variant `n_b2_s` holds `N_a2`, `n_ab_s` holds `N_a3` and
/// `n_b_s`, `n_a_s` both hold `N_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CptSolution {
    pub variant: ReactionVariant,
    pub n_ab_s: f64,
    pub n_b_s: f64,
    pub n_b2_s: f64,
    pub n_a_s: f64,
    pub delta: f64,
    pub r: f64,
    pub ratio: f64,
    pub omega_eff: f64,
}

impl CptSolution {
    /// Real non-negative amplitudes of the dark state, intermediate empty.
    pub fn state(&self) -> ModeAmplitudes {
        let mut s = ModeAmplitudes::zeros(self.variant);
        let c = |n: f64| Complex64::new(n.max(0.0).sqrt(), 0.0);
        match self.variant {
            ReactionVariant::TrimerFormation => {
                s.psi[trimer::A] = c(self.n_a_s);
                s.psi[trimer::A2] = c(self.n_b2_s);
                s.psi[trimer::A3] = c(self.n_ab_s);
            }
            _ => {
                s.psi[abstraction::A] = c(self.n_a_s);
                s.psi[abstraction::B] = c(self.n_b_s);
                s.psi[abstraction::B2] = c(self.n_b2_s);
                s.psi[abstraction::AB] = c(self.n_ab_s);
            }
        }
        s
    }
}

/// Dark-state solution of `params.variant` at imbalance `r` (ignored for
/// trimer formation) and `ratio = Ω/λ`.
pub fn cpt_solution(
    r: f64,
    ratio: f64,
    params: &SystemParams,
    rule: ResonanceRule,
) -> Result<CptSolution> {
    if !(ratio >= 0.0) {
        return Err(Error::Domain(format!("Rabi ratio must be non-negative, got {ratio}")));
    }
    let variant = params.variant;
    let (n_ab, n_b2, n_a) = match variant {
        ReactionVariant::TrimerFormation => {
            let n = trimer_cpt(ratio);
            (n, 0.5 - 2.0 * n, n)
        }
        _ => {
            if !(r > 0.0) {
                return Err(Error::Domain(format!("imbalance ratio must be positive, got {r}")));
            }
            let n = cpt_population(r, ratio);
            (n, 0.5 / (1.0 + r) - n, r / (1.0 + r) - n)
        }
    };
    if [n_ab, n_b2, n_a].iter().any(|&x| !(-1e-15..=1.0).contains(&x)) {
        return Err(Error::Domain(format!(
            "inconsistent dark state populations ({n_ab}, {n_b2}, {n_a})"
        )));
    }
    let (n_ab, n_b2, n_a) = (n_ab.max(0.0), n_b2.max(0.0), n_a.max(0.0));
    Ok(CptSolution {
        variant,
        n_ab_s: n_ab,
        n_b_s: n_ab,
        n_b2_s: n_b2,
        n_a_s: n_a,
        delta: resonance_delta_with(rule, params, n_b2, n_ab),
        r,
        ratio,
        omega_eff: omega_eff(ratio),
    })
}

/// Imbalance maximizing the dark dimer fraction at `ratio`, by golden-section
/// search over `(0, 10]`. Returns `(R*, N_max)`.
pub fn cpt_optimum(ratio: f64) -> (f64, f64) {
    let f = |r: f64| cpt_population(r, ratio);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (1e-12, 10.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-9 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let r = 0.5 * (lo + hi);
    (r, f(r))
}

/// Dark trimer-variant product fraction `N_a3 = N_a = 1/(2(2 + ratio))`.
pub fn trimer_cpt(ratio: f64) -> f64 {
    1.0 / (2.0 * (2.0 + ratio))
}

/// Nonlinear adiabaticity parameter `|dη/dt| / ((1+η) 4λ)` with `η = λ/Ω(t)`.
/// Infinite where the pulse vanishes.
pub fn adiabaticity(t: f64, params: &SystemParams) -> f64 {
    let omega = params.omega(t);
    if omega <= 0.0 {
        return f64::INFINITY;
    }
    let lambda = params.lambda;
    let eta = lambda / omega;
    let eta_rate = -lambda * params.pulse.omega_rate(t) / (omega * omega);
    eta_rate.abs() / ((1.0 + eta) * 4.0 * lambda)
}

/// Stationarity diagnostics of a dark state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stationarity {
    /// Euclidean norm of the motion left after removing per-mode phase rotations.
    pub residual: f64,
    /// `|λψ_aψ_b2 - Ωψ_bψ_ab|` (trimer: `|λψ_a2² - Ωψ_a3ψ_a|`).
    pub dark_residual: f64,
    /// Fitted rotation rate of each mode; zero for empty modes.
    pub chemical_potentials: Vec<f64>,
}

/// Checks whether the dark state of `sol` is stationary under the full
/// mean-field equations with a constant pulse `Ω = ratio λ` and `Δ = sol.delta`.
///
/// Every occupied mode may rotate at its own rate `μ_i` (fitted by least
/// squares). What remains is the intermediate's source, plus the phase drift
/// between its two source pairs weighted by the pair amplitude.
pub fn stationarity_residual(sol: &CptSolution, params: &SystemParams) -> Stationarity {
    let mut p = params.clone();
    p.variant = sol.variant;
    p.pulse = PulseSchedule::constant(sol.ratio * params.lambda);
    p.laser_detuning = sol.delta;
    let state = sol.state();
    let f = rhs(&state, &p, 0.0).dpsi;
    let mid = sol.variant.intermediate_mode();
    let mut mu = vec![0.0; state.psi.len()];
    let mut sq = 0.0;
    for (i, (psi, fi)) in state.psi.iter().zip(&f).enumerate() {
        if i == mid || psi.norm_sqr() == 0.0 {
            sq += fi.norm_sqr();
            continue;
        }
        mu[i] = (psi.conj() * fi).im / psi.norm_sqr();
        sq += (fi - Complex64::i() * mu[i] * psi).norm_sqr();
    }
    let psi = &state.psi;
    let lambda = params.lambda;
    let omega = p.omega(0.0);
    let (pair, drift, dark) = match sol.variant {
        ReactionVariant::TrimerFormation => {
            use trimer::*;
            (
                lambda * psi[A2].norm_sqr(),
                2.0 * mu[A2] - mu[A3] - mu[A],
                (lambda * psi[A2] * psi[A2] - omega * psi[A3] * psi[A]).norm(),
            )
        }
        _ => {
            use abstraction::*;
            (
                lambda * (psi[A] * psi[B2]).norm(),
                mu[A] + mu[B2] - mu[B] - mu[AB],
                (lambda * psi[A] * psi[B2] - omega * psi[B] * psi[AB]).norm(),
            )
        }
    };
    sq += (pair * drift).powi(2);
    Stationarity {
        residual: sq.sqrt(),
        dark_residual: dark,
        chemical_potentials: mu,
    }
}

/// Final dimer fraction against imbalance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub variant: ReactionVariant,
    pub r_grid: Vec<f64>,
    /// Ensemble-mean `|ψ_ab(t_end)|²`; `None` where the ensemble failed.
    pub final_conversion: Vec<Option<f64>>,
    pub params_hash: String,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "R,final_conversion")?;
        for (r, c) in self.r_grid.iter().zip(&self.final_conversion) {
            match c {
                Some(c) => writeln!(w, "{r},{c}")?,
                None => writeln!(w, "{r},undefined")?,
            }
        }
        Ok(())
    }

    /// Grid point with the largest conversion.
    pub fn argmax(&self) -> Option<(f64, f64)> {
        self.r_grid
            .iter()
            .zip(&self.final_conversion)
            .filter_map(|(r, c)| c.map(|c| (*r, c)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// How each point of an imbalance sweep is run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub t_start: f64,
    pub t_end: f64,
    pub trajectories: usize,
    pub rule: ResonanceRule,
    /// Whether `Δ` is recomputed from the dark state at each `R`.
    pub auto_delta: bool,
    /// `Ω/λ` at which the dark state fixing `Δ` is evaluated.
    pub reference_ratio: f64,
}

/// Runs a small seeded ensemble for every `R` in `r_grid` and records the
/// mean final product fraction. Failed ensembles are recorded as `None`.
pub fn sweep_imbalance(
    params: &SystemParams,
    r_grid: &[f64],
    spec: &SeedSpec,
    settings: &SweepSettings,
    opts: &IntegratorOptions,
) -> Result<SweepResult> {
    if params.variant == ReactionVariant::TrimerFormation {
        return Err(Error::config("variant", "imbalance sweeps need an abstraction variant"));
    }
    if r_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config("R", "sweep grid must be strictly ascending"));
    }
    if r_grid.iter().any(|&r| !(r > 0.0 && r <= 3.0)) {
        return Err(Error::config("R", "sweep grid must lie within (0, 3]"));
    }
    let product = params.variant.product_modes()[1];
    let grid = [settings.t_start, settings.t_end];
    let final_conversion = r_grid
        .par_iter()
        .map(|&r| {
            let mut p = params.clone();
            if settings.auto_delta {
                p.laser_detuning = cpt_solution(r, settings.reference_ratio, &p, settings.rule).ok()?.delta;
            }
            let base = initial_state(r, p.variant).ok()?;
            let res = run_ensemble(&p, &base, spec, settings.trajectories, &grid, opts).ok()?;
            Some(res.mean[1][product])
        })
        .collect();
    Ok(SweepResult {
        variant: params.variant,
        r_grid: r_grid.to_vec(),
        final_conversion,
        params_hash: String::new(),
    })
}
