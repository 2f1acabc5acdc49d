//! Short-time statistics of product pairs in the linearized (undepleted
//! source) regime.
//!
//! With the intermediate adiabatically eliminated the reaction reduces to a
//! two-mode pair-creation Hamiltonian with rate `G = λΩ/δ`. Bosonic products
//! then form a two-mode squeezed vacuum, fermionic ones a single two-level
//! pair, and every moment has a closed form in `x = 𝒢t`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemParams;

/// Couplings of the pair-creation Hamiltonian for homogeneous modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCouplings {
    /// Pair conversion rate `λΩ/δ`.
    pub g: f64,
    /// Collisional phase rate `λ²/δ` of the source pair.
    pub omega1: f64,
    /// Collisional phase rate `Ω²/δ` of the product pair.
    pub omega2: f64,
    /// Bose-enhanced rate `|G| √(N_a N_b2)`.
    pub amplified_rate: f64,
}

/// Evaluates the effective couplings at Rabi frequency `omega` and source
/// populations `n_a`, `n_b2`.
pub fn effective_couplings(
    params: &SystemParams,
    omega: f64,
    n_a: f64,
    n_b2: f64,
) -> Result<EffectiveCouplings> {
    let d = params.delta;
    if d == 0.0 || !d.is_finite() {
        return Err(Error::Domain(
            "the pair reduction needs a nonzero detuning; integrate the full mean-field equations instead"
                .into(),
        ));
    }
    if n_a < 0.0 || n_b2 < 0.0 {
        return Err(Error::Domain("source populations must be non-negative".into()));
    }
    let lambda = params.lambda;
    let g = lambda * omega / d;
    Ok(EffectiveCouplings {
        g,
        omega1: lambda * lambda / d,
        omega2: omega * omega / d,
        amplified_rate: g.abs() * (n_a * n_b2).sqrt(),
    })
}

/// Whether `|δ|` is large enough for adiabatic elimination to be trusted.
pub fn adiabatic_elimination_ok(params: &SystemParams, omega: f64) -> bool {
    params.delta.abs() >= 3.0 * params.lambda.max(omega)
}

/// Time `1/𝒢` after which pump depletion invalidates the linearized stage,
/// in units of `1/λ`.
pub fn validity_time(amplified_rate: f64) -> Result<f64> {
    if !(amplified_rate > 0.0) {
        return Err(Error::Domain(format!(
            "amplified rate must be positive, got {amplified_rate}"
        )));
    }
    Ok(1.0 / amplified_rate)
}

/// [`validity_time`] converted to seconds with the physical coupling `λ` in s⁻¹.
pub fn validity_time_seconds(amplified_rate: f64, lambda_si: f64) -> Result<f64> {
    Ok(validity_time(amplified_rate)? / lambda_si)
}

/// Number statistics of the product pair `(ab, b)`.
///
/// Normalized cross quantities are `None` where they are undefined (empty modes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    /// Mean occupation of each product mode.
    pub n: f64,
    /// Second moment `<N²>` of one product mode.
    pub n2: f64,
    /// Mandel parameter `(<N²> - <N>²)/<N>`.
    pub q: Option<f64>,
    pub g2_single: Option<f64>,
    pub g2_cross: Option<f64>,
    /// Normalized pair covariance `<ΔN_ab ΔN_b>/√(N_ab N_b)`.
    pub c: Option<f64>,
    /// `g2_cross² - g2_ab g2_b`; positive values violate the classical bound.
    pub csi_gap: Option<f64>,
}

impl MomentSet {
    /// Builds the set from `<N>`, `<N²>` (identical for both modes) and the
    /// cross moment `<N_ab N_b>`.
    pub fn from_raw(n: f64, n2: f64, cross: f64) -> Self {
        if n <= 0.0 {
            return MomentSet {
                n: 0.0,
                n2,
                q: None,
                g2_single: None,
                g2_cross: None,
                c: None,
                csi_gap: None,
            };
        }
        let var = n2 - n * n;
        let g2_single = (n2 - n) / (n * n);
        let g2_cross = cross / (n * n);
        MomentSet {
            n,
            n2,
            q: Some(var / n),
            g2_single: Some(g2_single),
            g2_cross: Some(g2_cross),
            c: Some((cross - n * n) / n),
            csi_gap: Some(g2_cross * g2_cross - g2_single * g2_single),
        }
    }

    /// CSV fields `N,Q,g2_single,g2_cross,C,csi_gap`.
    pub fn csv_fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_else(|| "undefined".to_string());
        vec![
            fmt_num(self.n),
            opt(self.q),
            opt(self.g2_single),
            opt(self.g2_cross),
            opt(self.c),
            opt(self.csi_gap),
        ]
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn check_x(x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("𝒢t must be finite and non-negative, got {x}")));
    }
    Ok(())
}

/// Two-mode squeezed vacuum statistics at `x = 𝒢t`.
///
/// `N = sinh²x`, `<N²> = sinh²x (2 sinh²x + 1)`, `Q = cosh²x`, `g2 = 2`,
/// `g2_cross = 1 + coth²x`, `C = 1 + sinh²x`, `csi_gap = 4/sinh²x + 1/sinh⁴x`.
/// At `x = 0` only `N = 0`, `Q = 1` and `g2_single = 2` are defined.
pub fn bosonic_moments(x: f64) -> Result<MomentSet> {
    check_x(x)?;
    let s2 = x.sinh().powi(2);
    let n2 = s2 * (2.0 * s2 + 1.0);
    if s2 == 0.0 {
        return Ok(MomentSet {
            n: 0.0,
            n2: 0.0,
            q: Some(1.0),
            g2_single: Some(2.0),
            g2_cross: None,
            c: None,
            csi_gap: None,
        });
    }
    Ok(MomentSet {
        n: s2,
        n2,
        q: Some(x.cosh().powi(2)),
        g2_single: Some(2.0),
        g2_cross: Some(2.0 + 1.0 / s2),
        c: Some(1.0 + s2),
        csi_gap: Some(4.0 / s2 + 1.0 / (s2 * s2)),
    })
}

/// Which closed form is used for the fermionic cross moment `<N_ab N_b>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FermiFlavor {
    /// Exact single-pair value `<N_ab N_b> = sin²x`.
    #[default]
    Oracle,
    /// Published value `<N_ab N_b> = -sin²x cos 2x`, giving
    /// `g2_cross = 1 - cos²x / sin²x`.
    Published,
}

impl FromStr for FermiFlavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(FermiFlavor::Oracle),
            "paper" => Ok(FermiFlavor::Published),
            other => Err(Error::config(
                "flavor",
                format!("unknown flavor `{other}` (expected paper or oracle)"),
            )),
        }
    }
}

impl fmt::Display for FermiFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FermiFlavor::Oracle => "oracle",
            FermiFlavor::Published => "paper",
        })
    }
}

/// Single fermionic pair: `N = sin²x`, `Q = cos²x`, `g2_single = 0`,
/// `C = 1 - N`. The cross coherence depends on `flavor`.
pub fn fermionic_moments(x: f64, flavor: FermiFlavor) -> Result<MomentSet> {
    check_x(x)?;
    let s2 = x.sin().powi(2);
    let c2 = x.cos().powi(2);
    let g2_cross = if s2 > 0.0 {
        Some(match flavor {
            FermiFlavor::Oracle => 1.0 / s2,
            FermiFlavor::Published => 1.0 - c2 / s2,
        })
    } else {
        None
    };
    Ok(MomentSet {
        n: s2,
        n2: s2,
        q: Some(c2),
        g2_single: Some(0.0),
        g2_cross,
        c: Some(1.0 - s2),
        csi_gap: g2_cross.map(|g| g * g),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ReactionVariant;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn reference_couplings() {
        let mut p = SystemParams::preset(ReactionVariant::BosonicAbstraction);
        p.delta = 3.0;
        let c = effective_couplings(&p, 20.0, 1.0 / 3.0, 1.0 / 3.0).unwrap();
        assert!(rel(c.g, 20.0 / 3.0) < 1e-15);
        assert!(rel(c.amplified_rate, 20.0 / 9.0) < 1e-15);
        assert!(rel(c.omega1, 1.0 / 3.0) < 1e-15);
        assert!(rel(c.omega2, 400.0 / 3.0) < 1e-15);

        let z = effective_couplings(&p, 0.0, 1.0 / 3.0, 1.0 / 3.0).unwrap();
        assert_eq!((z.g, z.amplified_rate, z.omega2), (0.0, 0.0, 0.0));

        p.delta = -3.0;
        let m = effective_couplings(&p, 20.0, 1.0 / 3.0, 1.0 / 3.0).unwrap();
        assert_eq!(m.g, -c.g);
        assert_eq!(m.omega1, -c.omega1);
        assert_eq!(m.omega2, -c.omega2);
        assert_eq!(m.amplified_rate, c.amplified_rate);

        p.delta = 0.0;
        assert!(effective_couplings(&p, 20.0, 0.3, 0.3).is_err());
    }

    #[test]
    fn rb_k_validity_window() {
        let t = validity_time(20.0 / 9.0).unwrap();
        assert!((t - 0.45).abs() < 1e-15);
        let secs = validity_time_seconds(20.0 / 9.0, 4.718e4).unwrap();
        assert!((secs - 9.53793980500212e-6).abs() < 1e-17);
        assert_eq!(validity_time(1.0).unwrap(), 1.0);
        assert_eq!(validity_time(2.0).unwrap(), 0.5);
        assert!(validity_time(0.0).is_err());
    }

    #[test]
    fn bosonic_reference_points() {
        let m = bosonic_moments(0.0).unwrap();
        assert_eq!((m.n, m.q, m.g2_single), (0.0, Some(1.0), Some(2.0)));
        assert!(m.g2_cross.is_none() && m.csi_gap.is_none());

        let m = bosonic_moments(1f64.asinh()).unwrap();
        assert!((m.n - 1.0).abs() < 1e-14);
        assert!((m.g2_cross.unwrap() - 3.0).abs() < 1e-13);
        assert!((m.csi_gap.unwrap() - 5.0).abs() < 1e-13);
        assert!((m.c.unwrap() - 2.0).abs() < 1e-14);
        assert!((m.n2 - 3.0).abs() < 1e-13);
        assert!(bosonic_moments(-0.1).is_err());
    }

    #[test]
    fn fermionic_reference_points() {
        let m = fermionic_moments(PI / 2.0, FermiFlavor::Oracle).unwrap();
        assert!((m.n - 1.0).abs() < 1e-15);
        assert!(m.q.unwrap().abs() < 1e-15 && m.c.unwrap().abs() < 1e-15);
        let m = fermionic_moments(PI / 4.0, FermiFlavor::Oracle).unwrap();
        assert!((m.n - 0.5).abs() < 1e-15 && (m.q.unwrap() - 0.5).abs() < 1e-15);
        let p = fermionic_moments(PI / 4.0, FermiFlavor::Published).unwrap();
        assert!(p.g2_cross.unwrap().abs() < 1e-15);
        assert!(fermionic_moments(0.0, FermiFlavor::Published).unwrap().g2_cross.is_none());
        assert!(fermionic_moments(-1.0, FermiFlavor::Oracle).is_err());
    }

    #[test]
    fn raw_moments_reproduce_closed_forms() {
        for &x in &[0.05, 0.3, 1.0, 2.5] {
            let s2 = f64::sinh(x).powi(2);
            let raw = MomentSet::from_raw(s2, s2 * (2.0 * s2 + 1.0), s2 * (2.0 * s2 + 1.0));
            let cf = bosonic_moments(x).unwrap();
            for (a, b) in [
                (raw.q, cf.q),
                (raw.g2_single, cf.g2_single),
                (raw.g2_cross, cf.g2_cross),
                (raw.c, cf.c),
                (raw.csi_gap, cf.csi_gap),
            ] {
                assert!(rel(a.unwrap(), b.unwrap()) < 1e-9, "x={x}: {a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn undefined_fields_print_as_marker() {
        let f = bosonic_moments(0.0).unwrap().csv_fields();
        assert_eq!(f, ["0", "1", "2", "undefined", "undefined", "undefined"]);
    }

    proptest! {
        #[test]
        fn bosonic_thermal_identities(x in 1e-3f64..3.0) {
            let m = bosonic_moments(x).unwrap();
            prop_assert!(rel(m.q.unwrap(), 1.0 + m.n) < 1e-12);
            prop_assert!(rel(m.c.unwrap(), m.q.unwrap()) < 1e-12);
            prop_assert!(m.c.unwrap() > 1.0);
            prop_assert!(m.csi_gap.unwrap() > 0.0);
        }

        #[test]
        fn bosonic_short_time_law(g in 0.1f64..10.0, frac in 0.01f64..1.0) {
            let x = 0.1 * frac;
            let t = x / g;
            let m = bosonic_moments(x).unwrap();
            prop_assert!(rel(m.n, g * g * t * t) < 0.01);
        }

        #[test]
        fn fermionic_identities(x in 0.0f64..10.0) {
            let m = fermionic_moments(x, FermiFlavor::Oracle).unwrap();
            prop_assert!((m.n + m.q.unwrap() - 1.0).abs() < 1e-15);
            prop_assert!(m.n <= 1.0);
        }

        #[test]
        fn fermionic_antibunching(x in 1e-6f64..(PI - 1e-6)) {
            let m = fermionic_moments(x, FermiFlavor::Oracle).unwrap();
            prop_assert!(m.c.unwrap() < 1.0);
        }

        #[test]
        fn both_flavors_nonnegative_csi(x in 1e-3f64..3.1) {
            for f in [FermiFlavor::Oracle, FermiFlavor::Published] {
                let m = fermionic_moments(x, f).unwrap();
                prop_assert!(m.csi_gap.unwrap() >= 0.0);
            }
        }
    }
}
