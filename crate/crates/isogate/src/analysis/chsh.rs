//! CHSH correlation statistics with uncorrected readout.
//!
//! Analysis rotations use R(θ, φ_c) with the fixed phase convention
//! φ_c = π/2 on both qubits, under which the ideal Bell state gives
//! E(θ_a, θ_b) = cos(θ_a − θ_b) and the standard angle set produces the
//! (+, +, +, −) sign pattern.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{apply_confusion, sample_shots, ConfusionMatrix, ShotSet};
use crate::sequence::{embed_qubit, rotation_unitary, QubitId, TwoQubitState};

/// Fixed phase of all CHSH analysis rotations.
pub const CHSH_ANALYSIS_PHASE: f64 = std::f64::consts::FRAC_PI_2;

/// The four analysis-angle pairs (a, b), (a′, b), (a, b′), (a′, b′).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChshSettings {
    pub theta_a: f64,
    pub theta_a_prime: f64,
    pub theta_b: f64,
    pub theta_b_prime: f64,
}

impl ChshSettings {
    /// The experiment's angles: (θ_a, θ′_a) = (π/4, 3π/4), (θ_b, θ′_b) = (π/2, 0).
    pub fn standard() -> Self {
        Self {
            theta_a: std::f64::consts::FRAC_PI_4,
            theta_a_prime: 3.0 * std::f64::consts::FRAC_PI_4,
            theta_b: std::f64::consts::FRAC_PI_2,
            theta_b_prime: 0.0,
        }
    }

    /// Angle pairs in measurement order.
    pub fn pairs(&self) -> [(f64, f64); 4] {
        [
            (self.theta_a, self.theta_b),
            (self.theta_a_prime, self.theta_b),
            (self.theta_a, self.theta_b_prime),
            (self.theta_a_prime, self.theta_b_prime),
        ]
    }
}

/// Outcome probabilities after the analysis rotations (θ_a, θ_b).
pub fn rotated_probabilities(rho: &Array2<C64>, theta_a: f64, theta_b: f64) -> [f64; 4] {
    let u = embed_qubit(QubitId::A, &rotation_unitary(theta_a, CHSH_ANALYSIS_PHASE)).dot(
        &embed_qubit(QubitId::B, &rotation_unitary(theta_b, CHSH_ANALYSIS_PHASE)),
    );
    let rotated = u.dot(rho).dot(&crate::linalg::dagger(&u));
    let mut p = [0.0; 4];
    for (i, pi) in p.iter_mut().enumerate() {
        *pi = rotated[(i, i)].re.max(0.0);
    }
    let norm: f64 = p.iter().sum();
    for pi in p.iter_mut() {
        *pi /= norm;
    }
    p
}

/// Correlation estimate from one setting's counts:
/// E = P(same) − P(different), σ_E = √((1 − E²)/N).
pub fn chsh_e(shots: &ShotSet) -> (f64, f64) {
    let f = shots.frequencies();
    let e = f[0] + f[3] - f[1] - f[2];
    let sigma = ((1.0 - e * e) / shots.total as f64).max(0.0).sqrt();
    (e, sigma)
}

/// CHSH statistic with uncertainties.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChshResult {
    /// (E, σ_E) in the order of [`ChshSettings::pairs`].
    pub correlations: [(f64, f64); 4],
    pub s: f64,
    pub sigma_s: f64,
    /// Detection-limited maximum for an ideal Bell state, when confusion
    /// matrices were supplied.
    pub s_max: Option<f64>,
}

/// S = |E₁ + E₂| + |E₃ − E₄| with quadrature error propagation.
pub fn chsh_s(correlations: &[(f64, f64); 4]) -> Result<ChshResult> {
    for (e, _) in correlations {
        if e.abs() > 1.0 + 1e-9 {
            return Err(Error::InvalidParameter("|E| must not exceed 1".into()));
        }
    }
    let s = (correlations[0].0 + correlations[1].0).abs()
        + (correlations[2].0 - correlations[3].0).abs();
    let sigma_s = correlations
        .iter()
        .map(|&(_, sig)| sig * sig)
        .sum::<f64>()
        .sqrt();
    Ok(ChshResult { correlations: *correlations, s, sigma_s, s_max: None })
}

/// Simulate the CHSH experiment on a state: rotate, push through readout
/// confusion (uncorrected, as in the experiment), and sample counts.
pub fn simulate_chsh(
    state: &TwoQubitState,
    settings: &ChshSettings,
    ca: &ConfusionMatrix,
    cb: &ConfusionMatrix,
    shots_per_setting: u64,
    seed: u64,
) -> Result<(Vec<ShotSet>, ChshResult)> {
    let mut shot_sets = Vec::with_capacity(4);
    let mut correlations = [(0.0, 0.0); 4];
    for (k, (ta, tb)) in settings.pairs().into_iter().enumerate() {
        let p = rotated_probabilities(state.density(), ta, tb);
        let p_meas = apply_confusion(&p, ca, cb)?;
        let shots = sample_shots(&p_meas, shots_per_setting, seed.wrapping_add(k as u64))?;
        correlations[k] = chsh_e(&shots);
        shot_sets.push(shots);
    }
    let mut result = chsh_s(&correlations)?;
    result.s_max = Some(s_max(ca, cb)?);
    Ok((shot_sets, result))
}

/// Measured correlation of an ideal Bell state at one angle pair, through
/// the readout confusion.
fn bell_measured_e(ca: &ConfusionMatrix, cb: &ConfusionMatrix, ta: f64, tb: f64) -> f64 {
    let bell = TwoQubitState::from_pure(&TwoQubitState::bell_phi_plus());
    let p = rotated_probabilities(bell.density(), ta, tb);
    let m = apply_confusion(&p, ca, cb).expect("validated confusion");
    m[0] + m[3] - m[1] - m[2]
}

/// Detection-limited maximum CHSH parameter for an ideal Bell state.
///
/// Maximizes S over all four analysis angles numerically (coarse grid plus
/// Nelder-Mead refinement). For symmetric per-state errors this equals
/// 2√2 (1−2ε_a)(1−2ε_b).
pub fn s_max(ca: &ConfusionMatrix, cb: &ConfusionMatrix) -> Result<f64> {
    ca.validate()?;
    cb.validate()?;
    let s_of = |x: &[f64; 4]| -> f64 {
        let e1 = bell_measured_e(ca, cb, x[0], x[2]);
        let e2 = bell_measured_e(ca, cb, x[1], x[2]);
        let e3 = bell_measured_e(ca, cb, x[0], x[3]);
        let e4 = bell_measured_e(ca, cb, x[1], x[3]);
        (e1 + e2).abs() + (e3 - e4).abs()
    };

    // coarse grid with the common-rotation gauge fixed at θ_b = π/2
    let n = 24;
    let mut best = ([0.0; 4], f64::NEG_INFINITY);
    for ia in 0..n {
        for iap in 0..n {
            for ibp in 0..n {
                let x = [
                    std::f64::consts::TAU * ia as f64 / n as f64,
                    std::f64::consts::TAU * iap as f64 / n as f64,
                    std::f64::consts::FRAC_PI_2,
                    std::f64::consts::TAU * ibp as f64 / n as f64,
                ];
                let v = s_of(&x);
                if v > best.1 {
                    best = (x, v);
                }
            }
        }
    }
    let x = nelder_mead(&s_of, best.0, 0.1, 4000);
    Ok(s_of(&x))
}

/// Bootstrap standard error of E from one setting's counts by multinomial
/// resampling of the empirical frequencies.
pub fn bootstrap_sigma_e(shots: &ShotSet, replicates: usize, seed: u64) -> Result<f64> {
    if replicates < 2 {
        return Err(Error::InvalidParameter("need at least 2 replicates".into()));
    }
    let f = shots.frequencies();
    let mut es = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let resampled = sample_shots(&f, shots.total, seed.wrapping_add(r as u64))?;
        es.push(chsh_e(&resampled).0);
    }
    let mean = es.iter().sum::<f64>() / replicates as f64;
    let var = es.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
        / (replicates - 1) as f64;
    Ok(var.sqrt())
}

/// Deterministic Nelder-Mead maximizer over R⁴.
fn nelder_mead<F: Fn(&[f64; 4]) -> f64>(
    f: &F,
    x0: [f64; 4],
    scale: f64,
    max_iter: usize,
) -> [f64; 4] {
    const N: usize = 4;
    let mut simplex: Vec<[f64; 4]> = vec![x0];
    for i in 0..N {
        let mut v = x0;
        v[i] += scale;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(&f).collect();

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=N).collect();
        order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
        simplex = order.iter().map(|&i| simplex[i]).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if values[0] - values[N] < 1e-12 {
            break;
        }
        let mut centroid = [0.0; 4];
        for v in simplex.iter().take(N) {
            for (c, x) in centroid.iter_mut().zip(v.iter()) {
                *c += x / N as f64;
            }
        }
        let worst = simplex[N];
        let mut reflect = [0.0; 4];
        for i in 0..N {
            reflect[i] = 2.0 * centroid[i] - worst[i];
        }
        let f_r = f(&reflect);
        if f_r > values[0] {
            let mut expand = [0.0; 4];
            for i in 0..N {
                expand[i] = 3.0 * centroid[i] - 2.0 * worst[i];
            }
            let f_e = f(&expand);
            if f_e > f_r {
                simplex[N] = expand;
                values[N] = f_e;
            } else {
                simplex[N] = reflect;
                values[N] = f_r;
            }
        } else if f_r > values[N - 1] {
            simplex[N] = reflect;
            values[N] = f_r;
        } else {
            let mut contract = [0.0; 4];
            for i in 0..N {
                contract[i] = 0.5 * (centroid[i] + worst[i]);
            }
            let f_c = f(&contract);
            if f_c > values[N] {
                simplex[N] = contract;
                values[N] = f_c;
            } else {
                let best = simplex[0];
                for v in simplex.iter_mut().skip(1) {
                    for (x, b) in v.iter_mut().zip(best.iter()) {
                        *x = b + 0.5 * (*x - b);
                    }
                }
                for (v, val) in simplex.iter().zip(values.iter_mut()).skip(1) {
                    *val = f(v);
                }
            }
        }
    }
    simplex[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dagger;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1};

    fn bell() -> TwoQubitState {
        TwoQubitState::from_pure(&TwoQubitState::bell_phi_plus())
    }

    /// Independent route: E as the expectation of the rotated Z⊗Z operator.
    fn e_operator_route(rho: &Array2<C64>, ta: f64, tb: f64) -> f64 {
        let z = array![
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(-1.0, 0.0)]
        ];
        let zz = crate::linalg::kron(&z, &z);
        let u = embed_qubit(QubitId::A, &rotation_unitary(ta, CHSH_ANALYSIS_PHASE)).dot(
            &embed_qubit(QubitId::B, &rotation_unitary(tb, CHSH_ANALYSIS_PHASE)),
        );
        let obs = dagger(&u).dot(&zz).dot(&u);
        let m = obs.dot(rho);
        m.diag().iter().map(|v| v.re).sum()
    }

    #[test]
    fn ideal_bell_reproduces_sign_pattern_and_tsirelson() {
        let settings = ChshSettings::standard();
        let rho = bell();
        let mut es = [0.0; 4];
        for (k, (ta, tb)) in settings.pairs().into_iter().enumerate() {
            let p = rotated_probabilities(rho.density(), ta, tb);
            es[k] = p[0] + p[3] - p[1] - p[2];
            // cross-check against the operator-expectation route
            assert_abs_diff_eq!(es[k], e_operator_route(rho.density(), ta, tb), epsilon = 1e-12);
        }
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(es[0], r, epsilon = 1e-12);
        assert_abs_diff_eq!(es[1], r, epsilon = 1e-12);
        assert_abs_diff_eq!(es[2], r, epsilon = 1e-12);
        assert_abs_diff_eq!(es[3], -r, epsilon = 1e-12);
        let result = chsh_s(&[(es[0], 0.0), (es[1], 0.0), (es[2], 0.0), (es[3], 0.0)]).unwrap();
        assert_abs_diff_eq!(result.s, 2.0 * 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn published_e_values_give_published_s() {
        let es = [(0.565, 0.007), (0.530, 0.007), (0.560, 0.007), (-0.573, 0.008)];
        let result = chsh_s(&es).unwrap();
        assert_abs_diff_eq!(result.s, 2.228, epsilon = 1e-12);
        assert!((result.sigma_s - 0.0145).abs() < 5e-4, "σ_S = {}", result.sigma_s);
    }

    #[test]
    fn product_states_stay_below_classical_bound() {
        let settings = ChshSettings::standard();
        for i in 0..6 {
            for j in 0..6 {
                let (t1, t2) = (
                    std::f64::consts::PI * i as f64 / 5.0,
                    std::f64::consts::PI * j as f64 / 5.0,
                );
                let qubit = |t: f64| -> Array1<C64> {
                    array![C64::new((t / 2.0).cos(), 0.0), C64::new((t / 2.0).sin(), 0.0)]
                };
                let (qa, qb) = (qubit(t1), qubit(t2));
                let mut psi = Array1::zeros(4);
                for a in 0..2 {
                    for b in 0..2 {
                        psi[2 * a + b] = qa[a] * qb[b];
                    }
                }
                let rho = TwoQubitState::from_pure(&psi);
                let mut es = [(0.0, 0.0); 4];
                for (k, (ta, tb)) in settings.pairs().into_iter().enumerate() {
                    let p = rotated_probabilities(rho.density(), ta, tb);
                    es[k] = (p[0] + p[3] - p[1] - p[2], 0.0);
                }
                let s = chsh_s(&es).unwrap().s;
                assert!(s <= 2.0 + 1e-9, "product state exceeded 2: {s}");
            }
        }
    }

    #[test]
    fn s_max_without_errors_is_tsirelson() {
        let c = ConfusionMatrix::ideal();
        let s = s_max(&c, &c).unwrap();
        assert_abs_diff_eq!(s, 2.0 * 2f64.sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn s_max_symmetric_errors_match_closed_form() {
        let ca = ConfusionMatrix::symmetric(0.05);
        let cb = ConfusionMatrix::symmetric(0.05);
        let s = s_max(&ca, &cb).unwrap();
        let closed = 2.0 * 2f64.sqrt() * (1.0 - 0.1) * (1.0 - 0.1);
        assert_abs_diff_eq!(s, closed, epsilon = 1e-6);
    }

    #[test]
    fn s_max_beats_dense_grid_for_asymmetric_errors() {
        // the optimizer must at least match an independent dense angle grid
        // (and stay within its resolution error) for per-state asymmetries
        for (ca, cb) in [
            (
                ConfusionMatrix { eps_up: 0.09, eps_down: 0.02 },
                ConfusionMatrix { eps_up: 0.01, eps_down: 0.08 },
            ),
            (
                ConfusionMatrix { eps_up: 0.12, eps_down: 0.0 },
                ConfusionMatrix { eps_up: 0.0, eps_down: 0.12 },
            ),
            (
                ConfusionMatrix { eps_up: 0.2, eps_down: 0.05 },
                ConfusionMatrix { eps_up: 0.03, eps_down: 0.11 },
            ),
        ] {
            let s_opt = s_max(&ca, &cb).unwrap();
            let n = 48;
            let mut grid_best = f64::NEG_INFINITY;
            for ia in 0..n {
                for iap in 0..n {
                    for ibp in 0..n {
                        let ta = std::f64::consts::TAU * ia as f64 / n as f64;
                        let tap = std::f64::consts::TAU * iap as f64 / n as f64;
                        let tb = std::f64::consts::FRAC_PI_2;
                        let tbp = std::f64::consts::TAU * ibp as f64 / n as f64;
                        let e1 = bell_measured_e(&ca, &cb, ta, tb);
                        let e2 = bell_measured_e(&ca, &cb, tap, tb);
                        let e3 = bell_measured_e(&ca, &cb, ta, tbp);
                        let e4 = bell_measured_e(&ca, &cb, tap, tbp);
                        grid_best = grid_best.max((e1 + e2).abs() + (e3 - e4).abs());
                    }
                }
            }
            assert!(
                s_opt >= grid_best - 1e-9,
                "optimizer {s_opt} below dense grid {grid_best}"
            );
            assert!(
                s_opt <= grid_best + 0.02,
                "optimizer {s_opt} implausibly above dense grid {grid_best}"
            );
        }
    }

    #[test]
    fn s_max_monotone_in_errors() {
        let mut last = f64::INFINITY;
        for eps in [0.0, 0.02, 0.05, 0.08, 0.12] {
            let c = ConfusionMatrix::symmetric(eps);
            let s = s_max(&c, &ConfusionMatrix::symmetric(0.03)).unwrap();
            assert!(s <= last + 1e-9, "s_max rose at ε = {eps}");
            last = s;
        }
    }

    #[test]
    fn simulated_chsh_approaches_tsirelson_at_large_n() {
        let ideal = ConfusionMatrix::ideal();
        let (_, result) = simulate_chsh(
            &bell(),
            &ChshSettings::standard(),
            &ideal,
            &ideal,
            1_000_000,
            4242,
        )
        .unwrap();
        assert!(
            (result.s - 2.0 * 2f64.sqrt()).abs() < 4.0 * result.sigma_s,
            "S = {} ± {}",
            result.s,
            result.sigma_s
        );
    }

    #[test]
    fn plug_in_sigma_close_to_bootstrap() {
        let shots = sample_shots(&[0.45, 0.05, 0.06, 0.44], 4000, 77).unwrap();
        let (_, sigma_plug) = chsh_e(&shots);
        let sigma_boot = bootstrap_sigma_e(&shots, 400, 123).unwrap();
        assert!(
            (sigma_plug - sigma_boot).abs() / sigma_plug < 0.15,
            "plug-in {sigma_plug}, bootstrap {sigma_boot}"
        );
    }
}
