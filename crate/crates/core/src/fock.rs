//! Exact evolution of the pair-creation Hamiltonian on a finite number basis.
//!
//! Basis state `k` holds `k` converted pairs: `N_a0 - k` atoms `a`,
//! `N_b20 - k` molecules `b2` and `k` each of `ab` and `b`. The Hamiltonian
//! is tridiagonal in `k` and is diagonalized once per evolution.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::MomentSet;
use crate::error::{Error, Result};

/// Largest basis the oracle will diagonalize.
pub const MAX_DIMENSION: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Bose,
    Fermi,
}

impl std::str::FromStr for Statistics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bose" => Ok(Statistics::Bose),
            "fermi" => Ok(Statistics::Fermi),
            other => Err(Error::config(
                "statistics",
                format!("unknown statistics `{other}` (expected bose or fermi)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairBasis {
    pub na0: u64,
    pub nb20: u64,
    pub statistics: Statistics,
}

impl PairBasis {
    pub fn new(na0: u64, nb20: u64, statistics: Statistics) -> Result<Self> {
        if na0 == 0 || nb20 == 0 {
            return Err(Error::Domain("initial counts must be at least 1".into()));
        }
        Ok(PairBasis {
            na0,
            nb20,
            statistics,
        })
    }

    /// Largest number of converted pairs; a fermionic pair mode holds one.
    pub fn k_max(&self) -> u64 {
        match self.statistics {
            Statistics::Bose => self.na0.min(self.nb20),
            Statistics::Fermi => 1,
        }
    }

    pub fn dimension(&self) -> u64 {
        self.k_max() + 1
    }
}

/// Real symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diagonal: Vec<f64>,
    pub off_diagonal: Vec<f64>,
}

impl Tridiagonal {
    pub fn dimension(&self) -> usize {
        self.diagonal.len()
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dimension();
        let mut m = DMatrix::zeros(n, n);
        for (k, &d) in self.diagonal.iter().enumerate() {
            m[(k, k)] = d;
        }
        for (k, &e) in self.off_diagonal.iter().enumerate() {
            m[(k, k + 1)] = e;
            m[(k + 1, k)] = e;
        }
        m
    }
}

/// `H[k][k] = ω₁(N_a0-k)(N_b20-k) + ω₂k²` and
/// `H[k][k+1] = -G(k+1)√((N_a0-k)(N_b20-k))`.
///
/// With Fermi statistics the pair modes are two-level, so the coupling loses
/// its `(k+1)` stimulation factor and the basis stops at `k = 1`.
pub fn build_pair_hamiltonian(
    basis: &PairBasis,
    g: f64,
    omega1: f64,
    omega2: f64,
) -> Result<Tridiagonal> {
    let dim = basis.dimension();
    if dim > MAX_DIMENSION as u64 {
        return Err(Error::Resource(format!(
            "pair basis of dimension {dim} exceeds the limit {MAX_DIMENSION}"
        )));
    }
    let (na, nb) = (basis.na0 as f64, basis.nb20 as f64);
    let diagonal = (0..dim)
        .map(|k| {
            let k = k as f64;
            omega1 * (na - k) * (nb - k) + omega2 * k * k
        })
        .collect();
    let off_diagonal = (0..dim - 1)
        .map(|k| {
            let k = k as f64;
            let stimulation = match basis.statistics {
                Statistics::Bose => k + 1.0,
                Statistics::Fermi => 1.0,
            };
            -g * stimulation * ((na - k) * (nb - k)).sqrt()
        })
        .collect();
    Ok(Tridiagonal {
        diagonal,
        off_diagonal,
    })
}

/// Amplitudes over the number of converted pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl PairState {
    /// No pairs converted yet.
    pub fn vacuum(dimension: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dimension];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        PairState {
            amplitudes,
            time: 0.0,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Spectral decomposition of a pair Hamiltonian, reusable across times.
pub struct Propagator {
    energies: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl Propagator {
    pub fn new(h: &Tridiagonal) -> Result<Self> {
        if h.dimension() > MAX_DIMENSION {
            return Err(Error::Resource(format!(
                "pair basis of dimension {} exceeds the limit {MAX_DIMENSION}",
                h.dimension()
            )));
        }
        let eig = SymmetricEigen::new(h.to_dense());
        Ok(Propagator {
            energies: eig.eigenvalues,
            vectors: eig.eigenvectors,
        })
    }

    /// `exp(-iHt) ψ0`.
    pub fn evolve(&self, psi0: &PairState, t: f64) -> Result<PairState> {
        let n = self.energies.len();
        if psi0.amplitudes.len() != n {
            return Err(Error::Domain(format!(
                "state has {} amplitudes, Hamiltonian has dimension {n}",
                psi0.amplitudes.len()
            )));
        }
        let v = &self.vectors;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            let overlap: Complex64 = (0..n).map(|k| psi0.amplitudes[k] * v[(k, j)]).sum();
            let phase = Complex64::from_polar(1.0, -self.energies[j] * t) * overlap;
            for (k, o) in out.iter_mut().enumerate() {
                *o += v[(k, j)] * phase;
            }
        }
        Ok(PairState {
            amplitudes: out,
            time: psi0.time + t,
        })
    }
}

pub fn evolve_pair(h: &Tridiagonal, psi0: &PairState, t: f64) -> Result<PairState> {
    Propagator::new(h)?.evolve(psi0, t)
}

/// Product-pair statistics of a pair state. Both products carry `k`
/// particles in basis state `k`, so `<N_ab N_b> = <N²> = Σ k²|c_k|²`.
pub fn pair_moments(state: &PairState) -> MomentSet {
    let (mut n, mut n2) = (0.0, 0.0);
    for (k, p) in state.probabilities().into_iter().enumerate() {
        let k = k as f64;
        n += k * p;
        n2 += k * k * p;
    }
    MomentSet::from_raw(n, n2, n2)
}

/// Oracle run on a grid of `x = 𝒢t`, with `G = 1/√(N_a0 N_b20)` so that the
/// amplified rate is one and no collisional phases.
pub fn pair_moments_on_grid(basis: &PairBasis, x_grid: &[f64]) -> Result<Vec<MomentSet>> {
    let g = 1.0 / ((basis.na0 as f64) * (basis.nb20 as f64)).sqrt();
    let h = build_pair_hamiltonian(basis, g, 0.0, 0.0)?;
    let prop = Propagator::new(&h)?;
    let psi0 = PairState::vacuum(h.dimension());
    x_grid
        .iter()
        .map(|&x| prop.evolve(&psi0, x).map(|s| pair_moments(&s)))
        .collect()
}

/// Largest relative deviation of the four headline statistics
/// `(N, Q, g2_single, g2_cross)` between an oracle and a reference set.
pub fn relative_deviation(oracle: &MomentSet, reference: &MomentSet) -> f64 {
    let pairs = [
        (Some(oracle.n), Some(reference.n)),
        (oracle.q, reference.q),
        (oracle.g2_single, reference.g2_single),
        (oracle.g2_cross, reference.g2_cross),
    ];
    pairs
        .iter()
        .map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) if *b != 0.0 => ((a - b) / b).abs(),
            (Some(a), Some(b)) => (a - b).abs(),
            _ => 0.0,
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{bosonic_moments, fermionic_moments, FermiFlavor};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn single_pair_rabi() {
        let basis = PairBasis::new(1, 1, Statistics::Bose).unwrap();
        let h = build_pair_hamiltonian(&basis, 0.7, 0.0, 0.0).unwrap();
        assert_eq!(h.off_diagonal, vec![-0.7]);
        for &t in &[0.0, 0.3, 1.1, 2.0] {
            let s = evolve_pair(&h, &PairState::vacuum(2), t).unwrap();
            assert!((pair_moments(&s).n - (0.7 * t).sin().powi(2)).abs() < 1e-14);
        }
        let s = evolve_pair(&h, &PairState::vacuum(2), PI / (2.0 * 0.7)).unwrap();
        assert!((s.amplitudes[1].norm() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn unequal_counts() {
        let basis = PairBasis::new(2, 1, Statistics::Bose).unwrap();
        assert_eq!(basis.dimension(), 2);
        let h = build_pair_hamiltonian(&basis, 1.0, 0.0, 0.0).unwrap();
        assert!((h.off_diagonal[0] + 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn diagonal_terms() {
        let basis = PairBasis::new(3, 2, Statistics::Bose).unwrap();
        let h = build_pair_hamiltonian(&basis, 0.0, 0.5, 2.0).unwrap();
        assert_eq!(h.diagonal, vec![3.0, 3.0, 8.0]);
        assert!(h.off_diagonal.iter().all(|&e| e == 0.0));
        let s = evolve_pair(&h, &PairState::vacuum(3), 5.0).unwrap();
        assert!((s.amplitudes[0].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_time_and_zero_hamiltonian() {
        let basis = PairBasis::new(4, 4, Statistics::Bose).unwrap();
        let h = build_pair_hamiltonian(&basis, 0.4, 0.1, 0.2).unwrap();
        let mut psi = PairState::vacuum(5);
        psi.amplitudes[2] = Complex64::new(0.3, -0.4);
        let s = evolve_pair(&h, &psi, 0.0).unwrap();
        for (a, b) in s.amplitudes.iter().zip(&psi.amplitudes) {
            assert!((a - b).norm() < 1e-14);
        }
        let zero = build_pair_hamiltonian(&basis, 0.0, 0.0, 0.0).unwrap();
        let s = evolve_pair(&zero, &psi, 123.0).unwrap();
        assert_eq!(s.amplitudes, psi.amplitudes);
    }

    #[test]
    fn vacuum_moments_undefined() {
        let m = pair_moments(&PairState::vacuum(3));
        assert_eq!(m.n, 0.0);
        assert!(m.q.is_none() && m.g2_single.is_none() && m.g2_cross.is_none());
    }

    #[test]
    fn equal_superposition() {
        let h = 0.5f64.sqrt();
        let s = PairState {
            amplitudes: vec![Complex64::new(h, 0.0), Complex64::new(0.0, h)],
            time: 0.0,
        };
        let m = pair_moments(&s);
        assert!((m.n - 0.5).abs() < 1e-15);
        assert!((m.q.unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(m.g2_single, Some(0.0));
    }

    #[test]
    fn twelve_pairs_against_closed_form() {
        let basis = PairBasis::new(12, 12, Statistics::Bose).unwrap();
        let m = pair_moments_on_grid(&basis, &[0.2]).unwrap()[0];
        let a = bosonic_moments(0.2).unwrap();
        assert!(rel(m.n, a.n) < 0.05);
        assert!(rel(m.q.unwrap(), a.q.unwrap()) < 0.05);
        assert!(rel(m.g2_cross.unwrap(), a.g2_cross.unwrap()) < 0.05);
        // stimulated pair creation is weakened by the finite source, so the
        // single-mode bunching falls short of 2 by roughly a factor (1 - 1/N)^2
        let finite = 2.0 * (1.0 - 1.0 / 12.0f64).powi(2);
        assert!(rel(m.g2_single.unwrap(), finite) < 0.01);
        assert!(rel(m.g2_single.unwrap(), 2.0) > 0.05);
    }

    #[test]
    fn deviation_shrinks_with_source_size() {
        for &x in &[0.05, 0.1, 0.2, 0.3] {
            let devs: Vec<f64> = [4u64, 8, 16, 32]
                .iter()
                .map(|&n| {
                    let b = PairBasis::new(n, n, Statistics::Bose).unwrap();
                    let m = pair_moments_on_grid(&b, &[x]).unwrap()[0];
                    relative_deviation(&m, &bosonic_moments(x).unwrap())
                })
                .collect();
            assert!(devs.windows(2).all(|w| w[1] < w[0]), "{devs:?}");
        }
    }

    #[test]
    fn fermi_matches_closed_form() {
        let basis = PairBasis::new(5, 7, Statistics::Fermi).unwrap();
        assert_eq!(basis.dimension(), 2);
        let grid: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let ms = pair_moments_on_grid(&basis, &grid).unwrap();
        for (x, m) in grid.iter().zip(ms) {
            let cf = fermionic_moments(*x, FermiFlavor::Oracle).unwrap();
            assert!((m.n - cf.n).abs() < 1e-10);
            if let (Some(a), Some(b)) = (m.g2_cross, cf.g2_cross) {
                if cf.n > 1e-3 {
                    assert!((a - b).abs() / b < 1e-9);
                }
            }
        }
    }

    #[test]
    fn one_pair_bose_equals_fermi() {
        let bose = PairBasis::new(1, 1, Statistics::Bose).unwrap();
        let fermi = PairBasis::new(1, 1, Statistics::Fermi).unwrap();
        let grid = [0.1, 0.7, 1.9];
        let a = pair_moments_on_grid(&bose, &grid).unwrap();
        let b = pair_moments_on_grid(&fermi, &grid).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.n - y.n).abs() < 1e-14);
        }
    }

    #[test]
    fn oversized_basis_is_a_resource_error() {
        let basis = PairBasis::new(2_000_000, 2_000_000, Statistics::Bose).unwrap();
        let err = build_pair_hamiltonian(&basis, 1.0, 0.0, 0.0).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    proptest! {
        #[test]
        fn norm_is_conserved(n in 1u64..40, g in 0.0f64..2.0, w1 in -1.0f64..1.0,
                             w2 in -1.0f64..1.0, t in 0.0f64..1000.0) {
            let basis = PairBasis::new(n, n + 3, Statistics::Bose).unwrap();
            let h = build_pair_hamiltonian(&basis, g, w1, w2).unwrap();
            let s = evolve_pair(&h, &PairState::vacuum(h.dimension()), t).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }
}
