//! Reaction variants, parameter sets, pulse shapes and initial states.
//!
//! Everything is expressed in units where the Feshbach coupling `λ = 1`:
//! rates and detunings in units of `λ`, times in units of `1/λ`. Populations
//! are fractions of the total atom number.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mode indices for the two abstraction variants (`A + B2 -> AB + B`).
pub mod abstraction {
    pub const A: usize = 0;
    pub const B: usize = 1;
    pub const B2: usize = 2;
    pub const AB: usize = 3;
    /// The `AB2` trimer intermediate.
    pub const M: usize = 4;
}

/// Mode indices for trimer formation (`2 A2 -> A3 + A`).
pub mod trimer {
    pub const A: usize = 0;
    pub const A2: usize = 1;
    pub const A3: usize = 2;
    /// The `A4` tetramer intermediate.
    pub const T: usize = 3;
}

const ABSTRACTION_LABELS: [&str; 5] = ["a", "b", "b2", "ab", "m"];
const TRIMER_LABELS: [&str; 4] = ["a", "a2", "a3", "t"];
const ABSTRACTION_WEIGHTS: [f64; 5] = [1.0, 1.0, 2.0, 2.0, 3.0];
const TRIMER_WEIGHTS: [f64; 4] = [1.0, 2.0, 3.0, 4.0];

/// Which reaction the mean-field modes describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReactionVariant {
    /// `A + B2 -> AB + B` with all species bosonic.
    BosonicAbstraction,
    /// Bosonic `A`, fermionic `B`: the products `AB` and `B` are fermions.
    BoseFermiAbstraction,
    /// `2 A2 -> A3 + A` through a tetramer intermediate.
    TrimerFormation,
}

impl ReactionVariant {
    pub fn mode_count(self) -> usize {
        self.mode_labels().len()
    }

    pub fn mode_labels(self) -> &'static [&'static str] {
        match self {
            ReactionVariant::TrimerFormation => &TRIMER_LABELS,
            _ => &ABSTRACTION_LABELS,
        }
    }

    /// Number of atoms carried by one particle of each mode.
    pub fn atom_weights(self) -> &'static [f64] {
        match self {
            ReactionVariant::TrimerFormation => &TRIMER_WEIGHTS,
            _ => &ABSTRACTION_WEIGHTS,
        }
    }

    pub fn mode_index(self, label: &str) -> Option<usize> {
        self.mode_labels().iter().position(|&l| l == label)
    }

    /// Modes created in pairs by the reaction.
    pub fn product_modes(self) -> [usize; 2] {
        match self {
            ReactionVariant::TrimerFormation => [trimer::A, trimer::A3],
            _ => [abstraction::B, abstraction::AB],
        }
    }

    /// Macroscopically occupied entrance-channel modes.
    pub fn source_modes(self) -> &'static [usize] {
        match self {
            ReactionVariant::TrimerFormation => &[trimer::A2],
            _ => &[abstraction::A, abstraction::B2],
        }
    }

    /// The lossy intermediate that the dark state keeps empty.
    pub fn intermediate_mode(self) -> usize {
        match self {
            ReactionVariant::TrimerFormation => trimer::T,
            _ => abstraction::M,
        }
    }

    /// Whether a mode obeys Fermi statistics in this variant.
    pub fn is_fermionic(self, mode: usize) -> bool {
        self == ReactionVariant::BoseFermiAbstraction
            && (mode == abstraction::B || mode == abstraction::AB)
    }

    pub fn name(self) -> &'static str {
        match self {
            ReactionVariant::BosonicAbstraction => "bosonic",
            ReactionVariant::BoseFermiAbstraction => "bose-fermi",
            ReactionVariant::TrimerFormation => "trimer",
        }
    }
}

impl fmt::Display for ReactionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReactionVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bosonic" | "bose" => Ok(ReactionVariant::BosonicAbstraction),
            "bose-fermi" | "fermi" | "fermionic" => Ok(ReactionVariant::BoseFermiAbstraction),
            "trimer" => Ok(ReactionVariant::TrimerFormation),
            other => Err(Error::config(
                "variant",
                format!("unknown variant `{other}` (expected bosonic, bose-fermi or trimer)"),
            )),
        }
    }
}

/// Complex mean-field amplitudes, one per mode of the variant.
///
/// `|psi[i]|^2` is the fraction of particles in mode `i`; the atom-weighted
/// sum over modes is one for a freshly prepared state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeAmplitudes {
    pub variant: ReactionVariant,
    pub psi: Vec<Complex64>,
}

impl ModeAmplitudes {
    pub fn zeros(variant: ReactionVariant) -> Self {
        ModeAmplitudes {
            variant,
            psi: vec![Complex64::new(0.0, 0.0); variant.mode_count()],
        }
    }

    pub fn from_vec(variant: ReactionVariant, psi: Vec<Complex64>) -> Result<Self> {
        if psi.len() != variant.mode_count() {
            return Err(Error::Domain(format!(
                "{variant} state needs {} modes, got {}",
                variant.mode_count(),
                psi.len()
            )));
        }
        Ok(ModeAmplitudes { variant, psi })
    }

    pub fn population(&self, mode: usize) -> f64 {
        self.psi[mode].norm_sqr()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Atom-weighted norm `W = sum_i w_i |psi_i|^2`.
    pub fn atom_norm(&self) -> f64 {
        weighted_norm(self.variant, &self.psi)
    }
}

pub(crate) fn weighted_norm(variant: ReactionVariant, psi: &[Complex64]) -> f64 {
    variant
        .atom_weights()
        .iter()
        .zip(psi)
        .map(|(w, z)| w * z.norm_sqr())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    Sech,
    Constant,
}

impl FromStr for PulseShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sech" => Ok(PulseShape::Sech),
            "constant" => Ok(PulseShape::Constant),
            other => Err(Error::config(
                "pulse",
                format!("unknown pulse shape `{other}` (expected sech or constant)"),
            )),
        }
    }
}

impl fmt::Display for PulseShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PulseShape::Sech => "sech",
            PulseShape::Constant => "constant",
        })
    }
}

/// Photodissociation Rabi coupling `Ω(t)`, centered at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub shape: PulseShape,
    pub omega0: f64,
    pub tau: f64,
}

impl PulseSchedule {
    pub fn sech(omega0: f64, tau: f64) -> Self {
        PulseSchedule {
            shape: PulseShape::Sech,
            omega0,
            tau,
        }
    }

    pub fn constant(omega0: f64) -> Self {
        PulseSchedule {
            shape: PulseShape::Constant,
            omega0,
            tau: 1.0,
        }
    }

    /// `Ω(t)`.
    pub fn omega(&self, t: f64) -> f64 {
        pulse_omega(t, self)
    }

    /// `dΩ/dt`.
    pub fn omega_rate(&self, t: f64) -> f64 {
        match self.shape {
            PulseShape::Constant => 0.0,
            PulseShape::Sech => {
                let x = t / self.tau;
                -self.omega0 * sech(x) * x.tanh() / self.tau
            }
        }
    }
}

fn sech(x: f64) -> f64 {
    // cosh overflows to inf for |x| > ~710, which correctly gives 0
    1.0 / x.cosh()
}

/// Rabi coupling of the schedule at time `t` (units of `λ`).
pub fn pulse_omega(t: f64, schedule: &PulseSchedule) -> f64 {
    match schedule.shape {
        PulseShape::Constant => schedule.omega0,
        PulseShape::Sech => schedule.omega0 * sech(t / schedule.tau),
    }
}

/// Symmetric matrix of mean-field collision coefficients `χ_ij`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CollisionMatrix {
    pub fn zeros(n: usize) -> Self {
        CollisionMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn filled(n: usize, value: f64) -> Self {
        CollisionMatrix {
            n,
            data: vec![value; n * n],
        }
    }

    /// Builds a matrix from a full row-major table, rejecting asymmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = CollisionMatrix::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Domain("collision matrix must be square".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                m.data[i * n + j] = v;
            }
        }
        m.check_symmetric()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `χ_ij` and `χ_ji`.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
        self.data[j * self.n + i] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn check_symmetric(&self) -> Result<()> {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.get(i, j) != self.get(j, i) {
                    return Err(Error::Domain(format!(
                        "collision matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Kinetic-energy coefficients of the two fermionic product species.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FermiKinetic {
    pub a_b: f64,
    pub a_ab: f64,
}

/// Rb-K collision coefficients in units of `λ`.
pub const CHI_AA: f64 = 0.5303;
pub const CHI_BB: f64 = 0.3214;
pub const CHI_A_B: f64 = 0.8731;
pub const CHI_FILL: f64 = 0.0938;

/// Physical Feshbach coupling for the Rb-K example, in s⁻¹.
pub const LAMBDA_SI_RBK: f64 = 4.718e4;

/// Physical parameters of one reaction setup, in units of `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub variant: ReactionVariant,
    /// Feshbach coupling; 1 in the internal units.
    pub lambda: f64,
    pub pulse: PulseSchedule,
    /// Feshbach detuning `δ` of the intermediate.
    pub delta: f64,
    /// Laser detuning `Δ`.
    pub laser_detuning: f64,
    /// Phenomenological decay of the intermediate.
    pub gamma: f64,
    pub chi: CollisionMatrix,
    pub kinetic: FermiKinetic,
    /// Physical value of `λ` in s⁻¹, for unit conversion only.
    pub lambda_si: Option<f64>,
}

impl SystemParams {
    /// Parameter defaults for a variant: `γ = 1`, `Ω₀ = 20`, `τ = 20`, `δ = 3`,
    /// the Rb-K collision table (or the Bose-Fermi table), and the
    /// collisionless two-photon resonance `Δ = -δ`.
    pub fn preset(variant: ReactionVariant) -> Self {
        let delta = 3.0;
        SystemParams {
            variant,
            lambda: 1.0,
            pulse: PulseSchedule::sech(20.0, 20.0),
            delta,
            laser_detuning: -delta,
            gamma: 1.0,
            chi: default_chi(variant),
            kinetic: match variant {
                ReactionVariant::BoseFermiAbstraction => FermiKinetic {
                    a_b: 0.008,
                    a_ab: 0.004,
                },
                _ => FermiKinetic::default(),
            },
            lambda_si: Some(LAMBDA_SI_RBK),
        }
    }

    /// Same couplings and detunings with every collision and kinetic term removed.
    pub fn collisionless(&self) -> Self {
        SystemParams {
            chi: CollisionMatrix::zeros(self.variant.mode_count()),
            kinetic: FermiKinetic::default(),
            ..self.clone()
        }
    }

    pub fn omega(&self, t: f64) -> f64 {
        self.pulse.omega(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.chi.dim() != self.variant.mode_count() {
            return Err(Error::config(
                "chi",
                format!(
                    "{} collision matrix must be {n}x{n}",
                    self.variant,
                    n = self.variant.mode_count()
                ),
            ));
        }
        self.chi
            .check_symmetric()
            .map_err(|e| Error::config("chi", e.to_string()))?;
        if !(self.gamma >= 0.0) {
            return Err(Error::config("gamma", "decay rate must be non-negative"));
        }
        if !(self.pulse.tau > 0.0) {
            return Err(Error::config("tau", "pulse width must be positive"));
        }
        if !(self.pulse.omega0 >= 0.0) {
            return Err(Error::config("omega0", "Rabi coupling must be non-negative"));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::config("lambda", "coupling must be positive"));
        }
        if let Some(l) = self.lambda_si {
            if !(l > 0.0) {
                return Err(Error::config("lambda_si", "must be positive"));
            }
        }
        match self.variant {
            ReactionVariant::BoseFermiAbstraction => {
                use abstraction::{AB, B};
                if self.chi.get(B, B) != 0.0 {
                    return Err(Error::config(
                        "chi.b.b",
                        "identical fermions do not collide; must be 0",
                    ));
                }
                if self.chi.get(AB, AB) != 0.0 {
                    return Err(Error::config(
                        "chi.ab.ab",
                        "identical fermions do not collide; must be 0",
                    ));
                }
            }
            _ => {
                if self.kinetic.a_b != 0.0 {
                    return Err(Error::config("A_b", "only the bose-fermi variant has fermionic kinetic terms"));
                }
                if self.kinetic.a_ab != 0.0 {
                    return Err(Error::config("A_ab", "only the bose-fermi variant has fermionic kinetic terms"));
                }
            }
        }
        Ok(())
    }
}

/// Default collision table for a variant.
pub fn default_chi(variant: ReactionVariant) -> CollisionMatrix {
    match variant {
        ReactionVariant::BosonicAbstraction => {
            use abstraction::*;
            let mut chi = CollisionMatrix::filled(5, CHI_FILL);
            chi.set(A, A, CHI_AA);
            chi.set(B, B, CHI_BB);
            chi.set(A, B, CHI_A_B);
            chi
        }
        ReactionVariant::BoseFermiAbstraction => {
            use abstraction::*;
            let mut chi = CollisionMatrix::zeros(5);
            chi.set(A, A, CHI_AA);
            chi.set(A, B, -0.09);
            chi.set(B, AB, -0.09);
            chi.set(A, AB, -0.2637);
            chi
        }
        ReactionVariant::TrimerFormation => {
            let mut chi = CollisionMatrix::filled(4, CHI_FILL);
            chi.set(trimer::A, trimer::A, CHI_AA);
            chi
        }
    }
}

/// Entrance-channel state for imbalance `R = N_a(0) / (2 N_b2(0))`.
///
/// Abstraction variants: `N_a = R/(1+R)`, `N_b2 = 1/(2(1+R))`, products empty.
/// The trimer variant ignores `R` and puts every atom into `a2`.
pub fn initial_state(r: f64, variant: ReactionVariant) -> Result<ModeAmplitudes> {
    let mut state = ModeAmplitudes::zeros(variant);
    match variant {
        ReactionVariant::TrimerFormation => {
            state.psi[trimer::A2] = Complex64::new(0.5f64.sqrt(), 0.0);
        }
        _ => {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::Domain(format!(
                    "imbalance ratio must be positive and finite, got {r}"
                )));
            }
            let n_a = r / (1.0 + r);
            let n_b2 = 0.5 / (1.0 + r);
            state.psi[abstraction::A] = Complex64::new(n_a.sqrt(), 0.0);
            state.psi[abstraction::B2] = Complex64::new(n_b2.sqrt(), 0.0);
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ALL: [ReactionVariant; 3] = [
        ReactionVariant::BosonicAbstraction,
        ReactionVariant::BoseFermiAbstraction,
        ReactionVariant::TrimerFormation,
    ];

    #[test]
    fn initial_populations() {
        use abstraction::*;
        for (r, na, nb2) in [(0.5, 1.0 / 3.0, 1.0 / 3.0), (1.0, 0.5, 0.25), (0.25, 0.2, 0.4)] {
            let s = initial_state(r, ReactionVariant::BosonicAbstraction).unwrap();
            assert!((s.population(A) - na).abs() < 1e-15);
            assert!((s.population(B2) - nb2).abs() < 1e-15);
            for m in [B, AB, M] {
                assert_eq!(s.population(m), 0.0);
            }
            assert!((s.atom_norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn initial_state_rejects_bad_ratio() {
        for r in [0.0, -1.0, f64::NAN] {
            assert!(initial_state(r, ReactionVariant::BosonicAbstraction).is_err());
        }
        // the trimer variant ignores R
        let s = initial_state(-1.0, ReactionVariant::TrimerFormation).unwrap();
        assert!((s.atom_norm() - 1.0).abs() < 1e-15);
        assert_eq!(s.population(trimer::T), 0.0);
    }

    #[test]
    fn pulse_values() {
        let p = PulseSchedule::sech(20.0, 20.0);
        assert_eq!(pulse_omega(0.0, &p), 20.0);
        assert_eq!(pulse_omega(1e6, &p), 0.0);
        let unit = PulseSchedule::sech(1.0, 3.0);
        // sech(1) = 2 / (e + 1/e)
        let e = std::f64::consts::E;
        assert!((pulse_omega(3.0, &unit) - 2.0 / (e + 1.0 / e)).abs() < 1e-15);
        assert!((pulse_omega(3.0, &unit) - 0.648_054_273_663_885_4).abs() < 1e-15);
        assert_eq!(pulse_omega(123.0, &PulseSchedule::constant(7.0)), 7.0);
    }

    #[test]
    fn pulse_rate_matches_difference_quotient() {
        let p = PulseSchedule::sech(20.0, 20.0);
        for t in [-40.0, -3.0, 0.5, 17.0] {
            let h = 1e-5;
            let fd = (p.omega(t + h) - p.omega(t - h)) / (2.0 * h);
            assert!((p.omega_rate(t) - fd).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn presets_validate() {
        for v in ALL {
            SystemParams::preset(v).validate().unwrap();
        }
        let p = SystemParams::preset(ReactionVariant::BosonicAbstraction);
        use abstraction::*;
        assert_eq!(p.chi.get(A, A), 0.5303);
        assert_eq!(p.chi.get(B, B), 0.3214);
        assert_eq!(p.chi.get(B, A), 0.8731);
        assert_eq!(p.chi.get(M, AB), 0.0938);
        let f = SystemParams::preset(ReactionVariant::BoseFermiAbstraction);
        assert_eq!(f.chi.get(B, B), 0.0);
        assert_eq!(f.chi.get(A, AB), -0.2637);
        assert_eq!(f.chi.get(B, AB), -0.09);
        assert_eq!(f.kinetic.a_b, 0.008);
        assert_eq!(f.kinetic.a_ab, 0.004);
    }

    #[test]
    fn validation_errors_name_keys() {
        let mut p = SystemParams::preset(ReactionVariant::BosonicAbstraction);
        p.gamma = -1.0;
        match p.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "gamma"),
            other => panic!("unexpected {other:?}"),
        }
        let mut f = SystemParams::preset(ReactionVariant::BoseFermiAbstraction);
        f.chi.set(abstraction::B, abstraction::B, 0.1);
        assert!(f.validate().is_err());
        let mut b = SystemParams::preset(ReactionVariant::BosonicAbstraction);
        b.kinetic.a_b = 0.1;
        assert!(b.validate().is_err());
    }

    #[test]
    fn asymmetric_rows_rejected() {
        let rows = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(CollisionMatrix::from_rows(&rows).is_err());
        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(CollisionMatrix::from_rows(&rows).is_ok());
    }

    #[test]
    fn labels_round_trip() {
        for v in ALL {
            assert_eq!(v.name().parse::<ReactionVariant>().unwrap(), v);
            for (i, l) in v.mode_labels().iter().enumerate() {
                assert_eq!(v.mode_index(l), Some(i));
            }
        }
    }

    proptest! {
        #[test]
        fn initial_norm_is_one(log_r in -3.0f64..3.0) {
            let r = 10f64.powf(log_r);
            let s = initial_state(r, ReactionVariant::BosonicAbstraction).unwrap();
            prop_assert!((s.atom_norm() - 1.0).abs() < 1e-14);
            let nb2 = s.population(abstraction::B2);
            prop_assert!((s.population(abstraction::A) / (2.0 * nb2) - r).abs() < 1e-12 * r.max(1.0));
        }

        #[test]
        fn sech_pulse_even_and_decreasing(t in 0.0f64..200.0, dt in 1e-3f64..10.0) {
            let p = PulseSchedule::sech(20.0, 20.0);
            prop_assert_eq!(p.omega(t), p.omega(-t));
            prop_assert!(p.omega(t + dt) < p.omega(t));
            prop_assert!(p.omega(t) >= 0.0);
        }
    }
}
