//! Two-photon resonance conditions that keep the dark state stationary.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::rhs::mode_shift;
use crate::error::{Error, Result};
use crate::model::{abstraction, trimer, ReactionVariant, SystemParams};

/// How the laser detuning `Δ` that compensates mean-field shifts is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResonanceRule {
    /// The closed-form collision combinations as published for each variant.
    Printed,
    /// Phase matching of the intermediate's two sources: the rotation rate of
    /// the entrance pair equals that of the product pair, so a source that
    /// cancels once stays cancelled.
    #[default]
    PhaseMatched,
}

impl FromStr for ResonanceRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "printed" => Ok(ResonanceRule::Printed),
            "phase-matched" | "phase_matched" => Ok(ResonanceRule::PhaseMatched),
            other => Err(Error::config(
                "resonance_rule",
                format!("unknown rule `{other}` (expected printed or phase-matched)"),
            )),
        }
    }
}

impl fmt::Display for ResonanceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResonanceRule::Printed => "printed",
            ResonanceRule::PhaseMatched => "phase-matched",
        })
    }
}

/// Steady-state populations of every mode implied by the two CPT numbers
/// and total-atom normalization.
///
/// For abstraction variants the inputs are `(N_b2, N_ab)`, with `N_b = N_ab`
/// and `N_a = 1 - 2 N_b2 - 3 N_ab`. For trimer formation they are
/// `(N_a2, N_a3)` with `N_a = N_a3`.
pub fn steady_populations(variant: ReactionVariant, source: f64, product: f64) -> Vec<f64> {
    match variant {
        ReactionVariant::TrimerFormation => {
            let mut n = vec![0.0; 4];
            n[trimer::A] = product;
            n[trimer::A2] = source;
            n[trimer::A3] = product;
            n
        }
        _ => {
            let mut n = vec![0.0; 5];
            n[abstraction::A] = (1.0 - 2.0 * source - 3.0 * product).max(0.0);
            n[abstraction::B] = product;
            n[abstraction::B2] = source;
            n[abstraction::AB] = product;
            n
        }
    }
}

/// Resonance detuning from the published closed forms.
///
/// Abstraction, all bosons:
/// `Δ = -δ + (2χ_aa + 6χ_ab + 5χ_bb2 + 2χ_bb) N_b2 + (2χ_ab + χ_bb2) N_ab`.
/// Bose-Fermi:
/// `Δ = -δ + 2(χ_ab + χ_aa + χ_ab2) N_b2 + 4χ_ab N_ab + (A_b - A_ab) N_ab^{2/3}`.
/// Trimer:
/// `Δ = -δ + Σ_{j∈{a,a2,a3}} (3χ_{a2,j} - 2χ_{t,j}) N_j`.
///
/// Here `χ_ab` is the atom-atom `A`-`B` coefficient. For trimer formation
/// the arguments are `(N_a2, N_a3)`.
pub fn resonance_delta(params: &SystemParams, n_b2_s: f64, n_ab_s: f64) -> f64 {
    let chi = &params.chi;
    let d = params.delta;
    match params.variant {
        ReactionVariant::BosonicAbstraction => {
            use abstraction::*;
            -d + (2.0 * chi.get(A, A)
                + 6.0 * chi.get(A, B)
                + 5.0 * chi.get(B, B2)
                + 2.0 * chi.get(B, B))
                * n_b2_s
                + (2.0 * chi.get(A, B) + chi.get(B, B2)) * n_ab_s
        }
        ReactionVariant::BoseFermiAbstraction => {
            use abstraction::*;
            -d + 2.0 * (chi.get(A, B) + chi.get(A, A) + chi.get(A, B2)) * n_b2_s
                + 4.0 * chi.get(A, B) * n_ab_s
                + (params.kinetic.a_b - params.kinetic.a_ab) * n_ab_s.powf(2.0 / 3.0)
        }
        ReactionVariant::TrimerFormation => {
            use trimer::*;
            let n = steady_populations(params.variant, n_b2_s, n_ab_s);
            -d + [A, A2, A3]
                .iter()
                .map(|&j| (3.0 * chi.get(A2, j) - 2.0 * chi.get(T, j)) * n[j])
                .sum::<f64>()
        }
    }
}

/// Resonance detuning that phase-matches the intermediate's sources.
///
/// Abstraction: `Δ = -δ + ε_a + ε_b2 - ε_b - ε_ab`, trimer:
/// `Δ = -δ + 2ε_a2 - ε_a3 - ε_a`, where `ε_i` is the mean-field shift of
/// mode `i` (collisions plus the Fermi kinetic term) at the steady state.
pub fn phase_matched_delta(params: &SystemParams, source: f64, product: f64) -> f64 {
    let n = steady_populations(params.variant, source, product);
    let eps = |i| mode_shift(params, &n, i);
    match params.variant {
        ReactionVariant::TrimerFormation => {
            use trimer::*;
            -params.delta + 2.0 * eps(A2) - eps(A3) - eps(A)
        }
        _ => {
            use abstraction::*;
            -params.delta + eps(A) + eps(B2) - eps(B) - eps(AB)
        }
    }
}

pub fn resonance_delta_with(
    rule: ResonanceRule,
    params: &SystemParams,
    source: f64,
    product: f64,
) -> f64 {
    match rule {
        ResonanceRule::Printed => resonance_delta(params, source, product),
        ResonanceRule::PhaseMatched => phase_matched_delta(params, source, product),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CollisionMatrix, FermiKinetic};

    #[test]
    fn collisionless_limit() {
        for v in [
            ReactionVariant::BosonicAbstraction,
            ReactionVariant::BoseFermiAbstraction,
            ReactionVariant::TrimerFormation,
        ] {
            let mut p = SystemParams::preset(v);
            p.chi = CollisionMatrix::zeros(v.mode_count());
            p.kinetic = FermiKinetic::default();
            p.delta = 3.0;
            for rule in [ResonanceRule::Printed, ResonanceRule::PhaseMatched] {
                assert_eq!(resonance_delta_with(rule, &p, 0.2, 0.1), -3.0);
            }
        }
    }

    #[test]
    fn fermi_kinetic_term_printed() {
        let mut p = SystemParams::preset(ReactionVariant::BoseFermiAbstraction);
        p.chi = CollisionMatrix::zeros(5);
        p.delta = 0.0;
        let d = resonance_delta(&p, 0.3, 1.0 / 27.0);
        assert!((d - 0.004 / 9.0).abs() < 1e-15);
        assert!((d - 4.444e-4).abs() < 1e-7);
    }

    #[test]
    fn fermi_kinetic_term_phase_matched() {
        // both fermionic products carry their own kinetic shift
        let mut p = SystemParams::preset(ReactionVariant::BoseFermiAbstraction);
        p.chi = CollisionMatrix::zeros(5);
        p.delta = 0.0;
        let d = phase_matched_delta(&p, 0.3, 1.0 / 27.0);
        assert!((d + 0.012 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn bosonic_printed_combination() {
        let p = SystemParams::preset(ReactionVariant::BosonicAbstraction);
        let d = resonance_delta(&p, 1.0, 0.0) + p.delta;
        let expect = 2.0 * 0.5303 + 6.0 * 0.8731 + 5.0 * 0.0938 + 2.0 * 0.3214;
        assert!((d - expect).abs() < 1e-14);
        let d = resonance_delta(&p, 0.0, 1.0) + p.delta;
        assert!((d - (2.0 * 0.8731 + 0.0938)).abs() < 1e-14);
    }

    #[test]
    fn bosonic_phase_matched_by_hand() {
        // ε_a + ε_b2 - ε_b - ε_ab with the Rb-K table:
        // coefficient of N_a is 2(χ_aa - χ_ab), of N_b is 2(χ_ab - χ_bb),
        // the 0.0938 fill cancels for N_b2 and N_ab
        let p = SystemParams::preset(ReactionVariant::BosonicAbstraction);
        let (nb2, nab) = (0.2, 0.05);
        let na = 1.0 - 2.0 * nb2 - 3.0 * nab;
        let expect = -p.delta + 2.0 * (0.5303 - 0.8731) * na + 2.0 * (0.8731 - 0.3214) * nab;
        assert!((phase_matched_delta(&p, nb2, nab) - expect).abs() < 1e-14);
    }

    #[test]
    fn rule_names() {
        for r in [ResonanceRule::Printed, ResonanceRule::PhaseMatched] {
            assert_eq!(r.to_string().parse::<ResonanceRule>().unwrap(), r);
        }
        assert!("chirped".parse::<ResonanceRule>().is_err());
    }
}
