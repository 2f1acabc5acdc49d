//! Mean-field equations of motion for the three reaction variants.

use num_complex::Complex64;

use crate::model::{abstraction, trimer, ModeAmplitudes, ReactionVariant, SystemParams};

/// Floor applied to `|psi|^2` inside the fractional Fermi power only.
pub const FERMI_POWER_FLOOR: f64 = 1e-30;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Time derivative of a [`ModeAmplitudes`] vector, units of `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub dpsi: Vec<Complex64>,
}

/// Anything the adaptive integrator can step.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]);
}

/// Mean-field equations for one parameter set, dispatched on its variant.
#[derive(Debug, Clone, Copy)]
pub struct MeanField<'a> {
    pub params: &'a SystemParams,
}

impl<'a> MeanField<'a> {
    pub fn new(params: &'a SystemParams) -> Self {
        MeanField { params }
    }
}

impl OdeSystem for MeanField<'_> {
    fn dim(&self) -> usize {
        self.params.variant.mode_count()
    }

    fn eval(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let omega = self.params.omega(t);
        match self.params.variant {
            ReactionVariant::BosonicAbstraction => abstraction_rhs(self.params, omega, false, y, dy),
            ReactionVariant::BoseFermiAbstraction => abstraction_rhs(self.params, omega, true, y, dy),
            ReactionVariant::TrimerFormation => trimer_rhs(self.params, omega, y, dy),
        }
    }
}

/// Mean-field energy shift of mode `i` for populations `n`.
///
/// Bosonic modes: `2 Σ_j χ_ij n_j`. A fermionic mode of the Bose-Fermi
/// variant drops its own `j = i` term and gains the kinetic term
/// `A_f (n_i)^{2/3}`.
pub fn mode_shift(params: &SystemParams, n: &[f64], i: usize) -> f64 {
    let row = params.chi.row(i);
    let fermionic = params.variant.is_fermionic(i);
    let mut s = 0.0;
    for (j, (&chi, &nj)) in row.iter().zip(n).enumerate() {
        if fermionic && j == i {
            continue;
        }
        s += chi * nj;
    }
    s *= 2.0;
    if fermionic {
        let a = if i == abstraction::B {
            params.kinetic.a_b
        } else {
            params.kinetic.a_ab
        };
        s += a * n[i].max(FERMI_POWER_FLOOR).powf(2.0 / 3.0);
    }
    s
}

fn abstraction_rhs(
    p: &SystemParams,
    omega: f64,
    fermi: bool,
    y: &[Complex64],
    dy: &mut [Complex64],
) {
    use abstraction::*;
    let mut n = [0.0; 5];
    for (ni, z) in n.iter_mut().zip(y) {
        *ni = z.norm_sqr();
    }
    debug_assert_eq!(fermi, p.variant == ReactionVariant::BoseFermiAbstraction);
    for i in 0..5 {
        dy[i] = I * mode_shift(p, &n, i) * y[i];
    }
    let lam = p.lambda;
    dy[A] += I * lam * y[B2].conj() * y[M];
    dy[B] -= I * omega * y[AB].conj() * y[M];
    dy[B2] += I * lam * y[A].conj() * y[M];
    dy[AB] += -I * omega * y[B].conj() * y[M] + I * (p.laser_detuning + p.delta) * y[AB];
    dy[M] += Complex64::new(-p.gamma, p.delta) * y[M] + I * lam * y[A] * y[B2]
        - I * omega * y[B] * y[AB];
}

fn trimer_rhs(p: &SystemParams, omega: f64, y: &[Complex64], dy: &mut [Complex64]) {
    use trimer::*;
    let mut n = [0.0; 4];
    for (ni, z) in n.iter_mut().zip(y) {
        *ni = z.norm_sqr();
    }
    for i in 0..4 {
        dy[i] = I * mode_shift(p, &n, i) * y[i];
    }
    let lam = p.lambda;
    dy[A] -= I * omega * y[A3].conj() * y[T];
    dy[A2] += 2.0 * I * lam * y[A2].conj() * y[T];
    dy[A3] += I * (p.laser_detuning + p.delta) * y[A3] - I * omega * y[A].conj() * y[T];
    dy[T] += Complex64::new(-p.gamma, p.delta) * y[T] + I * lam * y[A2] * y[A2]
        - I * omega * y[A3] * y[A];
}

fn evaluate(state: &ModeAmplitudes, params: &SystemParams, t: f64) -> Derivative {
    assert_eq!(
        state.psi.len(),
        params.variant.mode_count(),
        "state layout does not match the parameter variant"
    );
    let mut dpsi = vec![Complex64::new(0.0, 0.0); state.psi.len()];
    MeanField::new(params).eval(t, &state.psi, &mut dpsi);
    Derivative { dpsi }
}

/// All-boson abstraction equations.
pub fn rhs_bosonic(state: &ModeAmplitudes, params: &SystemParams, t: f64) -> Derivative {
    assert_eq!(params.variant, ReactionVariant::BosonicAbstraction);
    evaluate(state, params, t)
}

/// Abstraction equations with fermionic `B` and `AB`.
pub fn rhs_bosefermi(state: &ModeAmplitudes, params: &SystemParams, t: f64) -> Derivative {
    assert_eq!(params.variant, ReactionVariant::BoseFermiAbstraction);
    evaluate(state, params, t)
}

/// Trimer-formation equations.
pub fn rhs_trimer(state: &ModeAmplitudes, params: &SystemParams, t: f64) -> Derivative {
    assert_eq!(params.variant, ReactionVariant::TrimerFormation);
    evaluate(state, params, t)
}

/// Variant-dispatched right-hand side.
pub fn rhs(state: &ModeAmplitudes, params: &SystemParams, t: f64) -> Derivative {
    evaluate(state, params, t)
}
