//! Maximum-likelihood state tomography from local-rotation measurement
//! settings.
//!
//! The density matrix is parameterized as ρ = T†T / tr(T†T) with T lower
//! triangular (real diagonal), which is physical by construction. The
//! multinomial log-likelihood is maximized by gradient ascent on the 16 real
//! Cholesky parameters with an analytic gradient and backtracking line
//! search. Readout errors, when supplied, are folded into the likelihood's
//! forward model rather than pre-inverted on the data.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dagger, kron_real};
use crate::noise::{sample_shots, two_ion_confusion, ConfusionMatrix, ShotSet};
use crate::sequence::{embed_qubit, rotation_unitary, QubitId, TwoQubitState};

/// Measurement basis of one qubit, realized by a pre-measurement rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasBasis {
    Z,
    X,
    Y,
}

impl MeasBasis {
    /// Rotation applied before the Z-basis readout.
    pub fn rotation(self) -> Array2<C64> {
        match self {
            MeasBasis::Z => rotation_unitary(0.0, 0.0),
            // R(π/2, π/2)† Z R(π/2, π/2) = X
            MeasBasis::X => rotation_unitary(std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
            // R(π/2, 0)† Z R(π/2, 0) = -Y; the sign is part of the fixed
            // convention and cancels in the reconstruction
            MeasBasis::Y => rotation_unitary(std::f64::consts::FRAC_PI_2, 0.0),
        }
    }
}

/// The nine independent local-rotation settings.
pub fn tomography_settings() -> [(MeasBasis, MeasBasis); 9] {
    use MeasBasis::*;
    let mut out = [(Z, Z); 9];
    let bases = [Z, X, Y];
    let mut k = 0;
    for a in bases {
        for b in bases {
            out[k] = (a, b);
            k += 1;
        }
    }
    out
}

/// Counts collected in one tomography setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TomographySetting {
    pub basis_a: MeasBasis,
    pub basis_b: MeasBasis,
    pub shots: ShotSet,
}

/// Reconstruction output.
#[derive(Debug, Clone)]
pub struct TomographyResult {
    /// Physical (PSD, unit-trace) density matrix.
    pub rho: Array2<C64>,
    pub log_likelihood: f64,
    /// ⟨Φ⁺|ρ|Φ⁺⟩.
    pub fidelity_phi_plus: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; ρ is then best-so-far.
    pub converged: bool,
}

const MAX_ITERATIONS: usize = 100_000;
const LOGL_TOLERANCE: f64 = 1e-10;

/// Two-qubit rotation of one setting.
fn setting_unitary(basis_a: MeasBasis, basis_b: MeasBasis) -> Array2<C64> {
    embed_qubit(QubitId::A, &basis_a.rotation())
        .dot(&embed_qubit(QubitId::B, &basis_b.rotation()))
}

/// Outcome probabilities of a state under one setting (before readout error).
pub fn setting_probabilities(
    rho: &Array2<C64>,
    basis_a: MeasBasis,
    basis_b: MeasBasis,
) -> [f64; 4] {
    let u = setting_unitary(basis_a, basis_b);
    let rotated = u.dot(rho).dot(&dagger(&u));
    let mut p = [0.0; 4];
    for (i, pi) in p.iter_mut().enumerate() {
        *pi = rotated[(i, i)].re.max(0.0);
    }
    p
}

/// Simulate a full tomography data set from a state.
pub fn simulate_tomography_data(
    state: &TwoQubitState,
    shots_per_setting: u64,
    confusion: Option<(&ConfusionMatrix, &ConfusionMatrix)>,
    seed: u64,
) -> Result<Vec<TomographySetting>> {
    let mut out = Vec::with_capacity(9);
    for (k, (basis_a, basis_b)) in tomography_settings().into_iter().enumerate() {
        let mut p = setting_probabilities(state.density(), basis_a, basis_b);
        if let Some((ca, cb)) = confusion {
            p = crate::noise::apply_confusion(&p, ca, cb)?;
        }
        let norm: f64 = p.iter().sum();
        for x in p.iter_mut() {
            *x /= norm;
        }
        let shots = sample_shots(&p, shots_per_setting, seed.wrapping_add(k as u64))?;
        out.push(TomographySetting { basis_a, basis_b, shots });
    }
    Ok(out)
}

/// Cholesky parameterization: 4 real diagonal entries followed by 6 complex
/// strictly-lower entries in row-major order.
fn t_from_params(params: &[f64; 16]) -> Array2<C64> {
    let mut t: Array2<C64> = Array2::zeros((4, 4));
    for i in 0..4 {
        t[(i, i)] = C64::new(params[i], 0.0);
    }
    let mut k = 4;
    for i in 1..4 {
        for j in 0..i {
            t[(i, j)] = C64::new(params[k], params[k + 1]);
            k += 2;
        }
    }
    t
}

fn rho_from_t(t: &Array2<C64>) -> (Array2<C64>, f64) {
    let tt = dagger(t).dot(t);
    let tau: f64 = tt.diag().iter().map(|z| z.re).sum();
    (tt.mapv(|z| z / tau), tau)
}

struct LikelihoodModel {
    unitaries: Vec<Array2<C64>>,
    counts: Vec<[f64; 4]>,
    /// Forward readout map folded into the likelihood (identity if absent).
    confusion: Array2<f64>,
}

impl LikelihoodModel {
    fn probabilities(&self, rho: &Array2<C64>, k: usize) -> [f64; 4] {
        let u = &self.unitaries[k];
        let rotated = u.dot(rho).dot(&dagger(u));
        let mut p = [0.0; 4];
        for (o, po) in p.iter_mut().enumerate() {
            let mut acc = 0.0;
            for op in 0..4 {
                acc += self.confusion[(o, op)] * rotated[(op, op)].re;
            }
            *po = acc;
        }
        p
    }

    fn log_likelihood(&self, rho: &Array2<C64>) -> f64 {
        let mut logl = 0.0;
        for k in 0..self.unitaries.len() {
            let p = self.probabilities(rho, k);
            for (po, n) in p.iter().zip(self.counts[k].iter()) {
                if *n > 0.0 {
                    logl += n * po.max(1e-300).ln();
                }
            }
        }
        logl
    }

    /// dlogL/dρ as a Hermitian matrix.
    fn gradient_rho(&self, rho: &Array2<C64>) -> Array2<C64> {
        let mut g: Array2<C64> = Array2::zeros((4, 4));
        for k in 0..self.unitaries.len() {
            let p = self.probabilities(rho, k);
            let mut c = [0.0f64; 4];
            for (op, cop) in c.iter_mut().enumerate() {
                for (o, (po, n)) in p.iter().zip(self.counts[k].iter()).enumerate() {
                    if *n > 0.0 {
                        *cop += n / po.max(1e-300) * self.confusion[(o, op)];
                    }
                }
            }
            let u = &self.unitaries[k];
            // U† diag(c) U
            let mut diag: Array2<C64> = Array2::zeros((4, 4));
            for (op, cop) in c.iter().enumerate() {
                diag[(op, op)] = C64::new(*cop, 0.0);
            }
            g += &dagger(u).dot(&diag).dot(u);
        }
        g
    }
}

/// Maximum-likelihood reconstruction from the nine tomography settings.
///
/// Every setting must appear exactly once with at least 100 shots. When
/// `confusion` is given, the readout errors become part of the likelihood's
/// forward model (the preferred path; inversion on frequencies can leave the
/// multinomial likelihood undefined).
pub fn mle_tomography(
    data: &[TomographySetting],
    confusion: Option<(&ConfusionMatrix, &ConfusionMatrix)>,
) -> Result<TomographyResult> {
    let expected = tomography_settings();
    if data.len() != 9 {
        return Err(Error::MissingSetting(format!("need 9 settings, got {}", data.len())));
    }
    for (a, b) in expected {
        let found = data
            .iter()
            .find(|s| s.basis_a == a && s.basis_b == b)
            .ok_or_else(|| Error::MissingSetting(format!("{a:?}⊗{b:?}")))?;
        if found.shots.total < 100 {
            return Err(Error::InvalidParameter(format!(
                "setting {a:?}⊗{b:?} has fewer than 100 shots"
            )));
        }
    }

    let model = LikelihoodModel {
        unitaries: data
            .iter()
            .map(|s| setting_unitary(s.basis_a, s.basis_b))
            .collect(),
        counts: data
            .iter()
            .map(|s| {
                let c = s.shots.counts;
                [c[0] as f64, c[1] as f64, c[2] as f64, c[3] as f64]
            })
            .collect(),
        confusion: match confusion {
            Some((ca, cb)) => two_ion_confusion(ca, cb),
            None => kron_real(&Array2::eye(2), &Array2::eye(2)),
        },
    };

    // start at the maximally mixed state
    let mut params = [0.0f64; 16];
    for p in params.iter_mut().take(4) {
        *p = 0.5;
    }
    let mut t = t_from_params(&params);
    let (mut rho, mut tau) = rho_from_t(&t);
    let mut logl = model.log_likelihood(&rho);
    let mut step = 1e-3;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let g_rho = model.gradient_rho(&rho);
        // Wirtinger gradient wrt conj(T): T(G - tr(Gρ)I)/τ, lower-triangular
        let trg: f64 = {
            let grho = g_rho.dot(&rho);
            grho.diag().iter().map(|z| z.re).sum()
        };
        let mut g_t = t.dot(&g_rho);
        for i in 0..4 {
            for j in 0..4 {
                if j > i {
                    g_t[(i, j)] = C64::new(0.0, 0.0);
                } else {
                    g_t[(i, j)] = (g_t[(i, j)] - t[(i, j)] * trg) / tau;
                    if i == j {
                        g_t[(i, j)] = C64::new(g_t[(i, j)].re, 0.0);
                    }
                }
            }
        }
        let gnorm_sq: f64 = g_t.iter().map(|z| z.norm_sqr()).sum();
        if gnorm_sq == 0.0 {
            converged = true;
            break;
        }

        let mut improved = false;
        for _ in 0..80 {
            let t_next = &t + &g_t.mapv(|z| z * step);
            let (rho_next, tau_next) = rho_from_t(&t_next);
            let logl_next = model.log_likelihood(&rho_next);
            if logl_next > logl {
                let gain = logl_next - logl;
                t = t_next;
                rho = rho_next;
                tau = tau_next;
                logl = logl_next;
                step *= 1.3;
                improved = true;
                if gain < LOGL_TOLERANCE {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                break;
            }
        }
        if !improved || converged {
            converged = converged || !improved;
            break;
        }
    }

    let bell = TwoQubitState::bell_phi_plus();
    let fidelity = crate::linalg::fidelity_to_pure(&rho, &bell);
    Ok(TomographyResult {
        rho,
        log_likelihood: logl,
        fidelity_phi_plus: fidelity,
        iterations,
        converged,
    })
}

/// Alternative readout handling: invert the confusion on each setting's
/// frequencies first, then reconstruct without a confusion model.
///
/// Inversion can produce quasi-probabilities; negative entries are clipped
/// to zero (renormalized) before being turned back into effective counts,
/// which slightly biases the likelihood. The folded path
/// ([`mle_tomography`] with `confusion`) is preferred; this one exists for
/// comparison.
pub fn mle_tomography_preinverted(
    data: &[TomographySetting],
    ca: &ConfusionMatrix,
    cb: &ConfusionMatrix,
) -> Result<TomographyResult> {
    let corrected: Vec<TomographySetting> = data
        .iter()
        .map(|s| -> Result<TomographySetting> {
            let q = crate::analysis::correct_frequencies(&s.shots.frequencies(), ca, cb)?;
            let clipped: Vec<f64> = q.iter().map(|&x| x.max(0.0)).collect();
            let norm: f64 = clipped.iter().sum();
            let mut counts = [0u64; 4];
            for (c, p) in counts.iter_mut().zip(clipped.iter()) {
                *c = ((p / norm) * s.shots.total as f64).round() as u64;
            }
            Ok(TomographySetting {
                basis_a: s.basis_a,
                basis_b: s.basis_b,
                shots: ShotSet {
                    counts,
                    total: counts.iter().sum(),
                    seed: s.shots.seed,
                },
            })
        })
        .collect::<Result<_>>()?;
    mle_tomography(&corrected, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn bell_state() -> TwoQubitState {
        TwoQubitState::from_pure(&TwoQubitState::bell_phi_plus())
    }

    #[test]
    fn settings_cover_all_nine_pairs() {
        let s = tomography_settings();
        assert_eq!(s.len(), 9);
        for a in [MeasBasis::Z, MeasBasis::X, MeasBasis::Y] {
            for b in [MeasBasis::Z, MeasBasis::X, MeasBasis::Y] {
                assert!(s.iter().any(|&(x, y)| x == a && y == b));
            }
        }
    }

    #[test]
    fn basis_rotations_turn_pauli_into_z() {
        // U† Z U should equal ±X, ±Y for the X and Y settings
        let z = array![
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(-1.0, 0.0)]
        ];
        let check = |basis: MeasBasis, target: Array2<C64>| {
            let u = basis.rotation();
            let m = dagger(&u).dot(&z).dot(&u);
            let plus: f64 = (&m - &target).iter().map(|v| v.norm()).sum();
            let minus: f64 = (&m + &target).iter().map(|v| v.norm()).sum();
            assert!(plus < 1e-12 || minus < 1e-12);
        };
        check(
            MeasBasis::X,
            array![
                [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
                [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
            ],
        );
        check(
            MeasBasis::Y,
            array![
                [C64::new(0.0, 0.0), C64::new(0.0, -1.0)],
                [C64::new(0.0, 1.0), C64::new(0.0, 0.0)]
            ],
        );
    }

    #[test]
    fn reconstructs_bell_state_from_clean_data() {
        let data = simulate_tomography_data(&bell_state(), 100_000, None, 7).unwrap();
        let result = mle_tomography(&data, None).unwrap();
        assert!(result.converged);
        assert!(
            result.fidelity_phi_plus >= 0.999,
            "fidelity = {}",
            result.fidelity_phi_plus
        );
        // PSD and unit trace by construction
        let (vals, _) = eigh(&result.rho);
        assert!(vals.iter().all(|&v| v >= -1e-10));
        let tr: f64 = result.rho.diag().iter().map(|z| z.re).sum();
        assert_abs_diff_eq!(tr, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reconstructs_through_readout_errors() {
        let ca = ConfusionMatrix::symmetric(0.077);
        let cb = ConfusionMatrix::symmetric(0.044);
        let data =
            simulate_tomography_data(&bell_state(), 100_000, Some((&ca, &cb)), 11).unwrap();
        let result = mle_tomography(&data, Some((&ca, &cb))).unwrap();
        assert!(
            result.fidelity_phi_plus >= 0.99,
            "fidelity = {}",
            result.fidelity_phi_plus
        );
    }

    #[test]
    fn preinverted_path_reconstructs_comparably_to_folded() {
        let ca = ConfusionMatrix::symmetric(0.077);
        let cb = ConfusionMatrix::symmetric(0.044);
        let data =
            simulate_tomography_data(&bell_state(), 50_000, Some((&ca, &cb)), 31).unwrap();
        let folded = mle_tomography(&data, Some((&ca, &cb))).unwrap();
        let pre = mle_tomography_preinverted(&data, &ca, &cb).unwrap();
        assert!(folded.fidelity_phi_plus >= 0.98);
        assert!(pre.fidelity_phi_plus >= 0.98, "pre-inverted {}", pre.fidelity_phi_plus);
    }

    #[test]
    fn maximally_mixed_data_returns_identity_over_four() {
        let mixed = TwoQubitState::from_density(Array2::eye(4).mapv(|z: C64| z / 4.0)).unwrap();
        let data = simulate_tomography_data(&mixed, 50_000, None, 3).unwrap();
        let result = mle_tomography(&data, None).unwrap();
        // trace distance to I/4 below 0.01
        let diff = &result.rho - &Array2::eye(4).mapv(|z: C64| z / 4.0);
        let (vals, _) = eigh(&diff);
        let trace_dist: f64 = vals.iter().map(|v| v.abs()).sum::<f64>() / 2.0;
        assert!(trace_dist < 0.01, "trace distance = {trace_dist}");
    }

    #[test]
    fn missing_setting_rejected() {
        let mut data = simulate_tomography_data(&bell_state(), 1000, None, 9).unwrap();
        data.pop();
        assert!(matches!(
            mle_tomography(&data, None),
            Err(Error::MissingSetting(_))
        ));
    }

    #[test]
    fn gradient_ascent_agrees_with_derivative_free_simplex() {
        // three small fixtures reconstructed both ways
        let fixtures: Vec<TwoQubitState> = vec![
            bell_state(),
            TwoQubitState::from_density(Array2::eye(4).mapv(|z: C64| z / 4.0)).unwrap(),
            {
                let mut s = bell_state();
                crate::noise::scattering_channel(&mut s, 0.05, 0.02).unwrap();
                s
            },
        ];
        for (i, state) in fixtures.iter().enumerate() {
            let data = simulate_tomography_data(state, 2000, None, 100 + i as u64).unwrap();
            let grad = mle_tomography(&data, None).unwrap();
            let (logl_simplex, rho_simplex) = simplex_mle(&data);
            assert!(
                grad.log_likelihood >= logl_simplex - 1e-3,
                "fixture {i}: gradient logL {} < simplex logL {}",
                grad.log_likelihood,
                logl_simplex
            );
            let diff = &grad.rho - &rho_simplex;
            let (vals, _) = eigh(&diff);
            let trace_dist: f64 = vals.iter().map(|v| v.abs()).sum::<f64>() / 2.0;
            assert!(trace_dist < 0.05, "fixture {i}: trace distance {trace_dist}");
        }
    }

    /// Derivative-free Nelder-Mead over the 16 Cholesky parameters, as an
    /// independent optimizer for the cross-check fixtures.
    fn simplex_mle(data: &[TomographySetting]) -> (f64, Array2<C64>) {
        let model_logl = |params: &[f64; 16]| -> f64 {
            let t = t_from_params(params);
            let (rho, _) = rho_from_t(&t);
            let model = LikelihoodModel {
                unitaries: data
                    .iter()
                    .map(|s| setting_unitary(s.basis_a, s.basis_b))
                    .collect(),
                counts: data
                    .iter()
                    .map(|s| {
                        let c = s.shots.counts;
                        [c[0] as f64, c[1] as f64, c[2] as f64, c[3] as f64]
                    })
                    .collect(),
                confusion: kron_real(&Array2::eye(2), &Array2::eye(2)),
            };
            model.log_likelihood(&rho)
        };

        let n = 16;
        let mut simplex: Vec<[f64; 16]> = Vec::with_capacity(n + 1);
        let mut base = [0.0f64; 16];
        for b in base.iter_mut().take(4) {
            *b = 0.5;
        }
        simplex.push(base);
        for i in 0..n {
            let mut v = base;
            v[i] += 0.2;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(model_logl).collect();

        for _ in 0..30_000 {
            // sort descending (maximization)
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
            let simplex_sorted: Vec<[f64; 16]> = order.iter().map(|&i| simplex[i]).collect();
            let values_sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
            simplex = simplex_sorted;
            values = values_sorted;
            if values[0] - values[n] < 1e-9 {
                break;
            }
            let mut centroid = [0.0f64; 16];
            for v in simplex.iter().take(n) {
                for (c, x) in centroid.iter_mut().zip(v.iter()) {
                    *c += x / n as f64;
                }
            }
            let worst = simplex[n];
            let mut reflect = [0.0f64; 16];
            for i in 0..16 {
                reflect[i] = centroid[i] + (centroid[i] - worst[i]);
            }
            let f_reflect = model_logl(&reflect);
            if f_reflect > values[0] {
                let mut expand = [0.0f64; 16];
                for i in 0..16 {
                    expand[i] = centroid[i] + 2.0 * (centroid[i] - worst[i]);
                }
                let f_expand = model_logl(&expand);
                if f_expand > f_reflect {
                    simplex[n] = expand;
                    values[n] = f_expand;
                } else {
                    simplex[n] = reflect;
                    values[n] = f_reflect;
                }
            } else if f_reflect > values[n - 1] {
                simplex[n] = reflect;
                values[n] = f_reflect;
            } else {
                let mut contract = [0.0f64; 16];
                for i in 0..16 {
                    contract[i] = centroid[i] + 0.5 * (worst[i] - centroid[i]);
                }
                let f_contract = model_logl(&contract);
                if f_contract > values[n] {
                    simplex[n] = contract;
                    values[n] = f_contract;
                } else {
                    // shrink toward the best vertex
                    let best = simplex[0];
                    for v in simplex.iter_mut().skip(1) {
                        for (x, b) in v.iter_mut().zip(best.iter()) {
                            *x = b + 0.5 * (*x - b);
                        }
                    }
                    for (v, val) in simplex.iter().zip(values.iter_mut()).skip(1) {
                        *val = model_logl(v);
                    }
                }
            }
        }
        let t = t_from_params(&simplex[0]);
        let (rho, _) = rho_from_t(&t);
        (values[0], rho)
    }
}
