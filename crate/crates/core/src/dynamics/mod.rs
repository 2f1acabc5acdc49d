//! Mean-field dynamics: equations of motion, time integration and
//! conservation diagnostics.

pub mod integrator;
pub mod resonance;
pub mod rhs;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{abstraction, trimer, ModeAmplitudes, ReactionVariant, SystemParams};

pub use integrator::IntegratorOptions;
pub use resonance::{phase_matched_delta, resonance_delta, resonance_delta_with, ResonanceRule};
pub use rhs::{rhs, rhs_bosefermi, rhs_bosonic, rhs_trimer, Derivative, MeanField, OdeSystem};

/// Sampled solution of the mean-field equations.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ModeAmplitudes>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// `|W(t_end) - W(t_start)|` for the atom-weighted norm `W`.
    pub final_norm_drift: f64,
}

impl Trajectory {
    pub fn variant(&self) -> ReactionVariant {
        self.states[0].variant
    }

    /// Population of one mode at every sample.
    pub fn population_series(&self, mode: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.population(mode)).collect()
    }

    /// Largest deviation of any conserved charge from its initial value.
    pub fn max_charge_drift(&self) -> f64 {
        let c0 = conserved_charges(&self.states[0]).values();
        self.states
            .iter()
            .flat_map(|s| {
                conserved_charges(s)
                    .values()
                    .into_iter()
                    .zip(c0.clone())
                    .map(|(a, b)| (a - b).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    /// Writes `t,N_a,N_b,N_b2,N_ab,N_m,I_A,I_B` (or the trimer columns
    /// `t,N_a,N_a2,N_a3,N_t,I`) with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let variant = self.variant();
        let header = match variant {
            ReactionVariant::TrimerFormation => "t,N_a,N_a2,N_a3,N_t,I",
            _ => "t,N_a,N_b,N_b2,N_ab,N_m,I_A,I_B",
        };
        writeln!(w, "{header}")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut fields = vec![sci17(*t)];
            fields.extend(s.populations().into_iter().map(sci17));
            fields.extend(conserved_charges(s).values().into_iter().map(sci17));
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Scientific notation with 17 significant digits.
pub fn sci17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Integrates the mean-field equations of `params.variant` and samples the
/// state at each time in `samples` (the first entry is the start time).
pub fn integrate(
    state0: &ModeAmplitudes,
    params: &SystemParams,
    samples: &[f64],
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if state0.variant != params.variant {
        return Err(Error::Domain(format!(
            "state is {} but parameters are {}",
            state0.variant, params.variant
        )));
    }
    let sol = integrator::solve(&MeanField::new(params), &state0.psi, samples, opts)?;
    let states: Vec<ModeAmplitudes> = sol
        .states
        .into_iter()
        .map(|psi| ModeAmplitudes {
            variant: params.variant,
            psi,
        })
        .collect();
    let w0 = states[0].atom_norm();
    let w1 = states.last().map(|s| s.atom_norm()).unwrap_or(w0);
    Ok(Trajectory {
        times: sol.times,
        states,
        accepted_steps: sol.accepted_steps,
        rejected_steps: sol.rejected_steps,
        final_norm_drift: (w1 - w0).abs(),
    })
}

/// Evenly spaced sample grid including both endpoints.
pub fn time_grid(t_start: f64, t_end: f64, samples: usize) -> Result<Vec<f64>> {
    if samples < 2 || !(t_end > t_start) {
        return Err(Error::Domain(format!(
            "need t_end > t_start and at least two samples (got [{t_start}, {t_end}], {samples})"
        )));
    }
    let dt = (t_end - t_start) / (samples - 1) as f64;
    let mut grid: Vec<f64> = (0..samples).map(|k| t_start + k as f64 * dt).collect();
    grid[samples - 1] = t_end;
    Ok(grid)
}

/// Atom-number bilinears conserved by the lossless dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConservedCharges {
    /// `I_A = N_a + N_ab + N_m`, `I_B = N_b + 2N_b2 + N_ab + 2N_m`.
    Abstraction { i_a: f64, i_b: f64 },
    /// `I = N_a + 2N_a2 + 3N_a3 + 4N_t`.
    Trimer { i: f64 },
}

impl ConservedCharges {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            ConservedCharges::Abstraction { i_a, i_b } => vec![i_a, i_b],
            ConservedCharges::Trimer { i } => vec![i],
        }
    }
}

pub fn conserved_charges(state: &ModeAmplitudes) -> ConservedCharges {
    let n = state.populations();
    match state.variant {
        ReactionVariant::TrimerFormation => {
            use trimer::*;
            ConservedCharges::Trimer {
                i: n[A] + 2.0 * n[A2] + 3.0 * n[A3] + 4.0 * n[T],
            }
        }
        _ => {
            use abstraction::*;
            ConservedCharges::Abstraction {
                i_a: n[A] + n[AB] + n[M],
                i_b: n[B] + 2.0 * n[B2] + n[AB] + 2.0 * n[M],
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{initial_state, CollisionMatrix, PulseSchedule};
    use num_complex::Complex64;

    #[test]
    fn charges_of_reference_states() {
        use abstraction::*;
        let s = initial_state(0.5, ReactionVariant::BosonicAbstraction).unwrap();
        match conserved_charges(&s) {
            ConservedCharges::Abstraction { i_a, i_b } => {
                assert!((i_a - 1.0 / 3.0).abs() < 1e-15);
                assert!((i_b - 2.0 / 3.0).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
        let mut full = ModeAmplitudes::zeros(ReactionVariant::BosonicAbstraction);
        let r = (1.0f64 / 3.0).sqrt();
        full.psi[AB] = Complex64::new(r, 0.0);
        full.psi[B] = Complex64::new(0.0, r);
        assert_eq!(conserved_charges(&full).values().len(), 2);
        let v = conserved_charges(&full).values();
        assert!((v[0] - 1.0 / 3.0).abs() < 1e-15 && (v[1] - 2.0 / 3.0).abs() < 1e-15);
        let vac = ModeAmplitudes::zeros(ReactionVariant::BosonicAbstraction);
        assert_eq!(conserved_charges(&vac).values(), vec![0.0, 0.0]);
        let t = initial_state(1.0, ReactionVariant::TrimerFormation).unwrap();
        assert!((conserved_charges(&t).values()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn detuned_intermediate_only_rotates() {
        use abstraction::*;
        let mut p = SystemParams::preset(ReactionVariant::BosonicAbstraction);
        p.chi = CollisionMatrix::zeros(5);
        p.pulse = PulseSchedule::constant(0.0);
        p.delta = 1.0;
        p.gamma = 0.0;
        let mut s = ModeAmplitudes::zeros(p.variant);
        s.psi[M] = Complex64::new(1.0, 0.0);
        let grid = time_grid(0.0, 10.0, 11).unwrap();
        let tr = integrate(&s, &p, &grid, &IntegratorOptions::default()).unwrap();
        for (t, st) in tr.times.iter().zip(&tr.states) {
            let exact = Complex64::new(0.0, *t).exp();
            assert!((st.psi[M] - exact).norm() < 1e-8);
            assert!((st.population(M) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn variant_mismatch_is_rejected() {
        let p = SystemParams::preset(ReactionVariant::TrimerFormation);
        let s = initial_state(0.5, ReactionVariant::BosonicAbstraction).unwrap();
        assert!(integrate(&s, &p, &[0.0, 1.0], &IntegratorOptions::default()).is_err());
    }

    #[test]
    fn csv_layout() {
        let p = SystemParams::preset(ReactionVariant::BosonicAbstraction);
        let s = initial_state(0.5, p.variant).unwrap();
        let tr = integrate(&s, &p, &[0.0, 0.5, 1.0], &IntegratorOptions::default()).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,N_a,N_b,N_b2,N_ab,N_m,I_A,I_B");
        assert_eq!(lines.len(), 4);
        let first: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(first.len(), 8);
        assert_eq!(first[1], 1.0 / 3.0);
        assert_eq!(sci17(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn grid_endpoints() {
        let g = time_grid(-60.0, 100.0, 161).unwrap();
        assert_eq!(g[0], -60.0);
        assert_eq!(g[160], 100.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(time_grid(1.0, 1.0, 5).is_err());
        assert!(time_grid(0.0, 1.0, 1).is_err());
    }
}
