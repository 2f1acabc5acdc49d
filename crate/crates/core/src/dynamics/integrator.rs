//! Runge-Kutta-Fehlberg 7(8) integrator with PI step control.
//!
//! The eighth-order solution is propagated and the seventh-order companion
//! only serves as the error estimate. Steps are shortened to land exactly on
//! every requested sample time.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::rhs::OdeSystem;
use crate::error::{Error, Result};

/// Tolerances and step limits for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub tol_rel: f64,
    pub tol_abs: f64,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            tol_rel: 1e-9,
            tol_abs: 1e-12,
            h_init: None,
            h_max: None,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tolerances(tol_rel: f64, tol_abs: f64) -> Self {
        IntegratorOptions {
            tol_rel,
            tol_abs,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tol_rel", self.tol_rel), ("tol_abs", self.tol_abs)] {
            if !(v > 1e-15 && v < 1e-2) {
                return Err(Error::config(name, format!("{v} outside (1e-15, 1e-2)")));
            }
        }
        Ok(())
    }
}

/// Raw output of [`solve`]: states at the requested sample times.
#[derive(Debug, Clone)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

const STAGES: usize = 13;

const C: [f64; STAGES] = [
    0.0,
    2.0 / 27.0,
    1.0 / 9.0,
    1.0 / 6.0,
    5.0 / 12.0,
    1.0 / 2.0,
    5.0 / 6.0,
    1.0 / 6.0,
    2.0 / 3.0,
    1.0 / 3.0,
    1.0,
    0.0,
    1.0,
];

/// Nonzero entries `(j, a_ij)` of row `i` of the stage matrix.
const A: [&[(usize, f64)]; STAGES] = [
    &[],
    &[(0, 2.0 / 27.0)],
    &[(0, 1.0 / 36.0), (1, 1.0 / 12.0)],
    &[(0, 1.0 / 24.0), (2, 1.0 / 8.0)],
    &[(0, 5.0 / 12.0), (2, -25.0 / 16.0), (3, 25.0 / 16.0)],
    &[(0, 1.0 / 20.0), (3, 1.0 / 4.0), (4, 1.0 / 5.0)],
    &[(0, -25.0 / 108.0), (3, 125.0 / 108.0), (4, -65.0 / 27.0), (5, 125.0 / 54.0)],
    &[(0, 31.0 / 300.0), (4, 61.0 / 225.0), (5, -2.0 / 9.0), (6, 13.0 / 900.0)],
    &[
        (0, 2.0),
        (3, -53.0 / 6.0),
        (4, 704.0 / 45.0),
        (5, -107.0 / 9.0),
        (6, 67.0 / 90.0),
        (7, 3.0),
    ],
    &[
        (0, -91.0 / 108.0),
        (3, 23.0 / 108.0),
        (4, -976.0 / 135.0),
        (5, 311.0 / 54.0),
        (6, -19.0 / 60.0),
        (7, 17.0 / 6.0),
        (8, -1.0 / 12.0),
    ],
    &[
        (0, 2383.0 / 4100.0),
        (3, -341.0 / 164.0),
        (4, 4496.0 / 1025.0),
        (5, -301.0 / 82.0),
        (6, 2133.0 / 4100.0),
        (7, 45.0 / 82.0),
        (8, 45.0 / 164.0),
        (9, 18.0 / 41.0),
    ],
    &[
        (0, 3.0 / 205.0),
        (5, -6.0 / 41.0),
        (6, -3.0 / 205.0),
        (7, -3.0 / 41.0),
        (8, 3.0 / 41.0),
        (9, 6.0 / 41.0),
    ],
    &[
        (0, -1777.0 / 4100.0),
        (3, -341.0 / 164.0),
        (4, 4496.0 / 1025.0),
        (5, -289.0 / 82.0),
        (6, 2193.0 / 4100.0),
        (7, 51.0 / 82.0),
        (8, 33.0 / 164.0),
        (9, 12.0 / 41.0),
        (11, 1.0),
    ],
];

/// Eighth-order weights `(stage, b_i)`.
const B8: [(usize, f64); 7] = [
    (5, 34.0 / 105.0),
    (6, 9.0 / 35.0),
    (7, 9.0 / 35.0),
    (8, 9.0 / 280.0),
    (9, 9.0 / 280.0),
    (11, 41.0 / 840.0),
    (12, 41.0 / 840.0),
];

/// The error estimate is `ERR (k0 + k10 - k11 - k12) h`.
const ERR: f64 = 41.0 / 840.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const BETA: f64 = 0.025;
const ALPHA: f64 = 1.0 / 8.0 - 0.75 * BETA;

fn zeros(n: usize) -> Vec<Complex64> {
    vec![Complex64::new(0.0, 0.0); n]
}

/// Integrates `sys` from `samples[0]` to the last sample, returning the
/// state at every sample time.
///
/// The estimated local error of each accepted step satisfies
/// `|err_i| <= max(tol_abs, tol_rel |y_i|)` componentwise.
pub fn solve<S: OdeSystem>(
    sys: &S,
    y0: &[Complex64],
    samples: &[f64],
    opts: &IntegratorOptions,
) -> Result<Solution> {
    opts.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::Domain(format!("state has {} components, system needs {n}", y0.len())));
    }
    if samples.is_empty() {
        return Err(Error::Domain("at least one sample time is required".into()));
    }
    if samples.windows(2).any(|w| !(w[1] > w[0])) || samples.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("sample times must be finite and strictly increasing".into()));
    }

    let t0 = samples[0];
    let t_end = *samples.last().unwrap();
    let mut out_states = Vec::with_capacity(samples.len());
    out_states.push(y0.to_vec());
    let mut next_sample = 1;

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<Complex64>> = (0..STAGES).map(|_| zeros(n)).collect();
    let mut ytmp = zeros(n);
    let mut ynew = zeros(n);
    sys.eval(t, &y, &mut k[0]);

    let span = t_end - t0;
    let h_max = opts.h_max.unwrap_or(span).min(span.max(f64::MIN_POSITIVE));
    let mut h = match opts.h_init {
        Some(h) => h,
        None => initial_step(sys, t, &y, &k[0], opts, h_max),
    };
    let mut err_old: f64 = 1e-4;
    let mut reject = false;
    let mut accepted = 0usize;
    let mut rejected = 0usize;

    while next_sample < samples.len() {
        if accepted + rejected >= opts.max_steps {
            return Err(Error::Integration {
                t_last: t,
                msg: format!("step budget of {} exhausted", opts.max_steps),
            });
        }
        let h_min = 1e-14 * t.abs().max(1.0);
        if h < h_min {
            return Err(Error::Integration {
                t_last: t,
                msg: format!("step size underflow (h = {h:e})"),
            });
        }
        let target = samples[next_sample];
        let lands = t + 1.01 * h >= target;
        let h_step = if lands { target - t } else { h };

        for s in 1..STAGES {
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(j, a) in A[s] {
                    acc += a * k[j][i];
                }
                ytmp[i] = y[i] + h_step * acc;
            }
            sys.eval(t + C[s] * h_step, &ytmp, &mut k[s]);
        }

        let mut err: f64 = 0.0;
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(j, b) in &B8 {
                acc += b * k[j][i];
            }
            ynew[i] = y[i] + h_step * acc;
            let e = h_step * ERR * (k[0][i] + k[10][i] - k[11][i] - k[12][i]);
            let sc = opts.tol_abs.max(opts.tol_rel * y[i].norm().max(ynew[i].norm()));
            err = err.max(e.norm() / sc);
        }
        if !err.is_finite() || ynew.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            err = f64::INFINITY;
        }

        if err <= 1.0 {
            accepted += 1;
            t = if lands { target } else { t + h_step };
            std::mem::swap(&mut y, &mut ynew);
            if lands {
                out_states.push(y.clone());
                next_sample += 1;
            }
            if next_sample < samples.len() {
                sys.eval(t, &y, &mut k[0]);
            }

            if lands && h_step < h {
                // a step shortened to hit a sample says little about the next one
                reject = false;
                continue;
            }
            let err_c = err.max(1e-10);
            let mut fac = SAFETY * err_c.powf(-ALPHA) * err_old.powf(BETA);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if reject {
                fac = fac.min(1.0);
            }
            err_old = err_c.max(1e-4);
            h = (h_step * fac).min(h_max);
            reject = false;
        } else {
            rejected += 1;
            reject = true;
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-1.0 / 8.0)).max(FAC_MIN)
            } else {
                FAC_MIN
            };
            h = h_step * fac;
        }
    }

    Ok(Solution {
        times: samples.to_vec(),
        states: out_states,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

fn rms_scaled(v: &[Complex64], y: &[Complex64], opts: &IntegratorOptions) -> f64 {
    let s: f64 = v
        .iter()
        .zip(y)
        .map(|(vi, yi)| {
            let sc = opts.tol_abs.max(opts.tol_rel * yi.norm());
            (vi.norm() / sc).powi(2)
        })
        .sum();
    (s / v.len() as f64).sqrt()
}

/// Starting step from the first- and second-derivative scales.
fn initial_step<S: OdeSystem>(
    sys: &S,
    t: f64,
    y: &[Complex64],
    f0: &[Complex64],
    opts: &IntegratorOptions,
    h_max: f64,
) -> f64 {
    let d0 = rms_scaled(y, y, opts);
    let d1 = rms_scaled(f0, y, opts);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(h_max);
    let y1: Vec<Complex64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = zeros(y.len());
    sys.eval(t + h0, &y1, &mut f1);
    let df: Vec<Complex64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms_scaled(&df, y, opts) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 8.0)
    };
    (100.0 * h0).min(h1).min(h_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// dy/dt = i ω y
    struct Rotor(f64);

    impl OdeSystem for Rotor {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
            dy[0] = Complex64::new(0.0, self.0) * y[0];
        }
    }

    /// dy/dt = -y^2, blows up at t = 1 from y(0) = -1 ... written as y' = y^2.
    struct Blowup;

    impl OdeSystem for Blowup {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
            dy[0] = y[0] * y[0];
        }
    }

    #[test]
    fn rotor_is_exact_at_samples_and_between_steps() {
        let samples: Vec<f64> = (0..=200).map(|k| k as f64 * 0.05).collect();
        let y0 = [Complex64::new(1.0, 0.0)];
        let sol = solve(&Rotor(2.5), &y0, &samples, &IntegratorOptions::default()).unwrap();
        assert_eq!(sol.states.len(), samples.len());
        for (t, y) in sol.times.iter().zip(&sol.states) {
            let exact = Complex64::new(0.0, 2.5 * t).exp();
            assert!((y[0] - exact).norm() < 1e-8, "t = {t}: {}", (y[0] - exact).norm());
        }
        assert!(sol.accepted_steps < 2000);
    }

    #[test]
    fn singular_problem_reports_last_time() {
        let y0 = [Complex64::new(1.0, 0.0)];
        match solve(&Blowup, &y0, &[0.0, 2.0], &IntegratorOptions::default()) {
            Err(Error::Integration { t_last, msg }) => assert!(t_last > 0.9 && t_last < 1.0 + 1e-6, "{t_last} {msg}"),
            other => panic!("expected integration error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let y0 = [Complex64::new(1.0, 0.0)];
        let bad_tol = IntegratorOptions::with_tolerances(0.1, 1e-12);
        assert!(solve(&Rotor(1.0), &y0, &[0.0, 1.0], &bad_tol).is_err());
        let ok = IntegratorOptions::default();
        assert!(solve(&Rotor(1.0), &y0, &[0.0, 0.0], &ok).is_err());
        assert!(solve(&Rotor(1.0), &y0, &[], &ok).is_err());
        // single sample is the trivial trajectory
        let sol = solve(&Rotor(1.0), &y0, &[3.0], &ok).unwrap();
        assert_eq!(sol.states, vec![y0.to_vec()]);
    }

    #[test]
    fn backwards_time_not_allowed() {
        let y0 = [Complex64::new(1.0, 0.0)];
        assert!(solve(&Rotor(1.0), &y0, &[1.0, 0.0], &IntegratorOptions::default()).is_err());
    }
}
