//! Truncated-Fock verification oracle.
//!
//! Integrates the driven qubit⊗oscillator Schrödinger equation numerically
//! and traces out the motion, giving an independent check of the analytic
//! [`GateChannel`](super::GateChannel) phases and coherence factors.
//!
//! The default coupling model is the same first-order (Lamb-Dicke) force as
//! the analytic path, in the mode's rotating frame:
//!
//!   H_s(t)/ħ = 2π f_s env(t) (a† e^{i(ω_g t + χ)} + a e^{-i(ω_g t + χ)})
//!
//! per basis state s, with ω_g = 2π δ_g and χ a per-half drive phase offset.
//! A lab-frame full-exponential coupling is available as an experimental
//! option for probing Lamb-Dicke corrections.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use super::{basis_couplings, DriveConfig, Envelope, BASIS_STATES};
use crate::crystal::{MotionalMode, StandingWaveAlignment};
use crate::error::{Error, Result};
use crate::linalg::eigh_real;

/// Force coupling model used by the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingModel {
    /// First-order Lamb-Dicke coupling in the rotating frame; comparable to
    /// the analytic channel.
    Linearized,
    /// Experimental: lab-frame sin(η x̂ + ζ) standing-wave coupling per ion,
    /// including the carrier (scalar) term. Retains Lamb-Dicke corrections;
    /// not expected to match the analytic channel beyond O(η²).
    FullExponential,
}

/// Oracle run configuration.
#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Fock-space truncation; levels 0..=n_max are kept.
    pub n_max: usize,
    /// Thermal occupancy of the initial motional state.
    pub nbar: f64,
    /// Number of drive intervals; 2 applies the echo π pulses between them.
    pub halves: usize,
    /// Drive phase offset of each half (rad); defaults to zeros.
    pub phase_offsets: Vec<f64>,
    pub coupling_model: CouplingModel,
}

impl OracleConfig {
    pub fn new(n_max: usize, nbar: f64, halves: usize) -> Self {
        Self {
            n_max,
            nbar,
            halves,
            phase_offsets: vec![0.0; halves],
            coupling_model: CouplingModel::Linearized,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_max < 10 {
            return Err(Error::InvalidParameter("oracle requires n_max >= 10".into()));
        }
        if self.nbar < 0.0 {
            return Err(Error::InvalidParameter("thermal occupancy must be >= 0".into()));
        }
        if self.halves == 0 {
            return Err(Error::InvalidParameter("at least one drive interval".into()));
        }
        if self.phase_offsets.len() != self.halves {
            return Err(Error::InvalidParameter(
                "one drive phase offset per half required".into(),
            ));
        }
        Ok(())
    }
}

/// Joint state and diagnostics produced by the oracle.
#[derive(Debug, Clone)]
pub struct OracleOutcome {
    /// Joint qubit⊗oscillator density matrix, dimension 4(n_max+1); index
    /// s·(n_max+1) + n.
    pub joint: Array2<C64>,
    /// Qubit reduced density matrix (motion traced out).
    pub qubit_density: Array2<C64>,
    /// Peak population of the top Fock level over the whole evolution.
    pub truncation_leakage: f64,
    /// False when the leakage exceeded 1e-8.
    pub converged: bool,
}

const LEAKAGE_LIMIT: f64 = 1e-8;

/// Integrate the driven joint system from `qubit_input ⊗ thermal(n̄)`.
pub fn fock_oracle(
    drive: &DriveConfig,
    env: &Envelope,
    mode: &MotionalMode,
    alignment: &StandingWaveAlignment,
    qubit_input: &Array1<C64>,
    config: &OracleConfig,
) -> Result<OracleOutcome> {
    drive.validate()?;
    env.validate()?;
    config.validate()?;
    if qubit_input.len() != 4 {
        return Err(Error::InvalidParameter("qubit input must have 4 amplitudes".into()));
    }
    let norm: f64 = qubit_input.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("qubit input must be normalized".into()));
    }

    let dim_mot = config.n_max + 1;
    let dim = 4 * dim_mot;
    let couplings = basis_couplings(drive, mode, alignment);
    let hamiltonian = build_hamiltonian(drive, env, mode, alignment, &couplings, config);

    let (weights, n_init) = thermal_weights(config.nbar, config.n_max);
    let mut joint: Array2<C64> = Array2::zeros((dim, dim));
    let mut leakage = 0.0f64;
    for (n0, w) in weights.iter().enumerate().take(n_init) {
        if *w == 0.0 {
            continue;
        }
        let mut psi: Array1<C64> = Array1::zeros(dim);
        for s in BASIS_STATES {
            psi[s.index() * dim_mot + n0] = qubit_input[s.index()];
        }
        for h in 0..config.halves {
            let chi = config.phase_offsets[h];
            let mut intg = Rk45::new(1e-10, 1e-10);
            psi = intg.integrate(
                |t, y, out| hamiltonian.apply(t, chi, y, out),
                psi,
                env.duration_s,
            )?;
            leakage = leakage.max(intg.peak_observable);
            if h + 1 < config.halves {
                psi = apply_double_flip(&psi, dim_mot);
            }
        }
        for i in 0..dim {
            for j in 0..dim {
                joint[(i, j)] += *w * psi[i] * psi[j].conj();
            }
        }
    }

    let mut qubit_density: Array2<C64> = Array2::zeros((4, 4));
    for s in 0..4 {
        for sp in 0..4 {
            let mut acc = C64::new(0.0, 0.0);
            for n in 0..dim_mot {
                acc += joint[(s * dim_mot + n, sp * dim_mot + n)];
            }
            qubit_density[(s, sp)] = acc;
        }
    }

    Ok(OracleOutcome {
        joint,
        qubit_density,
        truncation_leakage: leakage,
        converged: leakage <= LEAKAGE_LIMIT,
    })
}

/// Thermal Fock weights p_n = n̄ⁿ/(1+n̄)^{n+1}, truncated once the cumulative
/// weight passes 1 - 1e-12 and renormalized.
fn thermal_weights(nbar: f64, n_max: usize) -> (Vec<f64>, usize) {
    let mut w = vec![0.0; n_max + 1];
    if nbar == 0.0 {
        w[0] = 1.0;
        return (w, 1);
    }
    let r = nbar / (1.0 + nbar);
    let mut cum = 0.0;
    let mut used = 0;
    for (n, wn) in w.iter_mut().enumerate() {
        *wn = r.powi(n as i32) / (1.0 + nbar);
        cum += *wn;
        used = n + 1;
        if 1.0 - cum < 1e-12 {
            break;
        }
    }
    for wn in w.iter_mut().take(used) {
        *wn /= cum;
    }
    (w, used)
}

/// |s, n⟩ → |flip(s), n⟩ (the echo π⊗π pulses, global phase dropped).
fn apply_double_flip(psi: &Array1<C64>, dim_mot: usize) -> Array1<C64> {
    let mut out = Array1::zeros(psi.len());
    for s in BASIS_STATES {
        let f = s.flipped().index();
        for n in 0..dim_mot {
            out[f * dim_mot + n] = psi[s.index() * dim_mot + n];
        }
    }
    out
}

enum OracleHamiltonian {
    Rotating(RotatingForce),
    Lab(Box<LabStandingWave>),
}

impl OracleHamiltonian {
    /// out ← -i H(t) ψ, also reporting the top-level population for the
    /// truncation monitor via the integrator's observable hook.
    fn apply(&self, t: f64, chi: f64, psi: &Array1<C64>, out: &mut Array1<C64>) {
        match self {
            OracleHamiltonian::Rotating(h) => h.apply(t, chi, psi, out),
            OracleHamiltonian::Lab(h) => h.apply(t, chi, psi, out),
        }
    }
}

fn build_hamiltonian(
    drive: &DriveConfig,
    env: &Envelope,
    mode: &MotionalMode,
    alignment: &StandingWaveAlignment,
    couplings: &[f64; 4],
    config: &OracleConfig,
) -> OracleHamiltonian {
    let dim_mot = config.n_max + 1;
    match config.coupling_model {
        CouplingModel::Linearized => OracleHamiltonian::Rotating(RotatingForce {
            couplings: *couplings,
            omega_g: 2.0 * std::f64::consts::PI * drive.gate_detuning_hz,
            env: *env,
            dim_mot,
        }),
        CouplingModel::FullExponential => {
            // Diagonalize x̂ = a + a† once; sin(η x̂ + ζ - ω_d t - φ) is then a
            // rotated diagonal at each time.
            let mut x = Array2::<f64>::zeros((dim_mot, dim_mot));
            for n in 0..dim_mot - 1 {
                let v = ((n + 1) as f64).sqrt();
                x[(n, n + 1)] = v;
                x[(n + 1, n)] = v;
            }
            let (xvals, xvecs) = eigh_real(&x);
            OracleHamiltonian::Lab(Box::new(LabStandingWave {
                drive: drive.clone(),
                mode: mode.clone(),
                // ζ_b = π at half-integer alignment (+ residual mismatch)
                zeta_b: if alignment.force_sign < 0.0 {
                    std::f64::consts::PI + alignment.residual_phase
                } else {
                    alignment.residual_phase
                },
                omega_z: 2.0 * std::f64::consts::PI * mode.frequency_hz,
                omega_g: 2.0 * std::f64::consts::PI * drive.gate_detuning_hz,
                env: *env,
                xvals,
                xvecs,
                dim_mot,
            }))
        }
    }
}

struct RotatingForce {
    couplings: [f64; 4],
    omega_g: f64,
    env: Envelope,
    dim_mot: usize,
}

impl RotatingForce {
    fn apply(&self, t: f64, chi: f64, psi: &Array1<C64>, out: &mut Array1<C64>) {
        let e = self.env.value(t);
        let phase = C64::from_polar(1.0, self.omega_g * t + chi);
        let minus_i = -C64::i();
        for s in BASIS_STATES {
            let g = 2.0 * std::f64::consts::PI * self.couplings[s.index()] * e;
            let base = s.index() * self.dim_mot;
            for n in 0..self.dim_mot {
                // a† e^{iθ} √n ψ_{n-1} + a e^{-iθ} √(n+1) ψ_{n+1}
                let mut acc = C64::new(0.0, 0.0);
                if n > 0 {
                    acc += phase * (n as f64).sqrt() * psi[base + n - 1];
                }
                if n + 1 < self.dim_mot {
                    acc += phase.conj() * ((n + 1) as f64).sqrt() * psi[base + n + 1];
                }
                out[base + n] = minus_i * g * acc;
            }
        }
    }
}

struct LabStandingWave {
    drive: DriveConfig,
    mode: MotionalMode,
    zeta_b: f64,
    omega_z: f64,
    omega_g: f64,
    env: Envelope,
    xvals: Array1<f64>,
    xvecs: Array2<f64>,
    dim_mot: usize,
}

impl LabStandingWave {
    fn apply(&self, t: f64, chi: f64, psi: &Array1<C64>, out: &mut Array1<C64>) {
        let e = self.env.value(t);
        // Red-side lab drive ω_d = ω_z - ω_g reproduces the analytic
        // trajectory orientation α ∝ ∮ e^{+i ω_g t}.
        let omega_d = self.omega_z - self.omega_g;
        let arg0 = omega_d * t + chi + self.drive.optical_phase_rad;
        let minus_i = -C64::i();
        let n = self.dim_mot;
        for s in BASIS_STATES {
            let base = s.index() * n;
            // V_j = 2π·2Ω_j env cos(η_j x̂ + ζ_j - ω_d t - χ) per ion,
            // evaluated in the x̂ eigenbasis.
            let w_a = 4.0 * std::f64::consts::PI
                * self.drive.couplings.ion_a(s.spin_a())
                * e;
            let w_b = 4.0 * std::f64::consts::PI
                * self.drive.couplings.ion_b(s.spin_b())
                * e;
            // project into x̂ eigenbasis
            let mut proj = vec![C64::new(0.0, 0.0); n];
            for (k, pk) in proj.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for m in 0..n {
                    acc += self.xvecs[(m, k)] * psi[base + m];
                }
                *pk = acc;
            }
            for (k, p) in proj.iter_mut().enumerate() {
                let pot = w_a * (self.mode.eta_a * self.xvals[k] - arg0).cos()
                    + w_b * (self.mode.eta_b * self.xvals[k] + self.zeta_b - arg0).cos();
                *p *= pot;
            }
            for m in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for (k, p) in proj.iter().enumerate() {
                    acc += self.xvecs[(m, k)] * *p;
                }
                // harmonic term ω_z a†a
                acc += self.omega_z * m as f64 * psi[base + m];
                out[base + m] = minus_i * acc;
            }
        }
    }
}

/// Dormand-Prince 5(4) adaptive integrator for ψ̇ = -iH(t)ψ.
///
/// Tracks the peak summed population of the top Fock level of each qubit
/// block as the truncation observable.
struct Rk45 {
    rtol: f64,
    atol: f64,
    peak_observable: f64,
}

const DP_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

impl Rk45 {
    fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, peak_observable: 0.0 }
    }

    fn integrate<F>(&mut self, deriv: F, mut y: Array1<C64>, t_end: f64) -> Result<Array1<C64>>
    where
        F: Fn(f64, &Array1<C64>, &mut Array1<C64>),
    {
        let dim = y.len();
        let dim_mot = dim / 4;
        let mut k: Vec<Array1<C64>> = (0..7).map(|_| Array1::zeros(dim)).collect();
        let mut t = 0.0f64;
        let mut h = t_end / 100.0;
        let mut stage: Array1<C64> = Array1::zeros(dim);
        let mut first = true;

        let top_population = |y: &Array1<C64>| -> f64 {
            (0..4).map(|s| y[s * dim_mot + dim_mot - 1].norm_sqr()).sum()
        };
        self.peak_observable = self.peak_observable.max(top_population(&y));

        let mut steps = 0usize;
        while t < t_end {
            steps += 1;
            if steps > 2_000_000 {
                return Err(Error::NonConvergence("oracle integrator step cap".into()));
            }
            if t + h > t_end {
                h = t_end - t;
            }
            if first {
                let (k0, rest) = k.split_first_mut().unwrap();
                deriv(t, &y, k0);
                let _ = rest;
                first = false;
            }
            for i in 0..6 {
                stage.assign(&y);
                for (j, aij) in DP_A[i].iter().enumerate() {
                    if *aij != 0.0 {
                        stage.scaled_add(C64::new(*aij * h, 0.0), &k[j]);
                    }
                }
                let (head, tail) = k.split_at_mut(i + 1);
                deriv(t + DP_C[i] * h, &stage, &mut tail[0]);
                let _ = head;
            }
            // 5th-order solution is the last stage input + b·k with b = A[5]
            let mut y5 = y.clone();
            for (j, bj) in DP_A[5].iter().enumerate() {
                if *bj != 0.0 {
                    y5.scaled_add(C64::new(*bj * h, 0.0), &k[j]);
                }
            }
            // embedded 4th-order estimate for the error
            let mut err_norm = 0.0f64;
            {
                let mut e;
                for idx in 0..dim {
                    let mut d4 = C64::new(0.0, 0.0);
                    for (j, bj) in DP_B4.iter().enumerate() {
                        if *bj != 0.0 {
                            d4 += *bj * k[j][idx];
                        }
                    }
                    let y4 = y[idx] + d4 * h;
                    e = (y5[idx] - y4).norm();
                    let scale = self.atol + self.rtol * y5[idx].norm().max(y[idx].norm());
                    err_norm = err_norm.max(e / scale);
                }
            }
            if err_norm <= 1.0 {
                t += h;
                y = y5;
                // FSAL: k7 = f(t, y) is DP_A[5]-weighted already evaluated at
                // stage 6; recompute cleanly for the next step
                let (k0, _) = k.split_first_mut().unwrap();
                deriv(t, &y, k0);
                self.peak_observable = self.peak_observable.max(top_population(&y));
            }
            let factor = if err_norm > 0.0 {
                (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            h *= factor;
            if h < t_end * 1e-14 {
                return Err(Error::NonConvergence("oracle integrator step underflow".into()));
            }
        }
        Ok(y)
    }
}
