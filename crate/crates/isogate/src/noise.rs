//! Measurement and environmental imperfections: readout confusion matrices,
//! multinomial shot sampling, photon-scattering depolarization, magnetic
//! field drift with an axial gradient, and the ion-order detect/reorder
//! procedure.
//!
//! All randomness flows through explicitly seeded generators; there is no
//! global RNG.

use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::crystal::IonOrder;
use crate::error::{Error, Result};
use crate::linalg::kron_real;
use crate::sequence::{QubitId, TwoQubitState};

/// Per-ion readout error map.
///
/// `eps_up` is the probability that an ion prepared ↑ is read as ↓;
/// `eps_down` the converse. As a column-stochastic matrix over (↓, ↑):
/// [[1-ε_down, ε_up], [ε_down, 1-ε_up]].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub eps_up: f64,
    pub eps_down: f64,
}

impl ConfusionMatrix {
    /// Split a state-averaged error ε̄ evenly over both states.
    pub fn symmetric(eps_bar: f64) -> Self {
        Self { eps_up: eps_bar, eps_down: eps_bar }
    }

    pub fn ideal() -> Self {
        Self { eps_up: 0.0, eps_down: 0.0 }
    }

    /// State-averaged readout error ε̄.
    pub fn average_error(&self) -> f64 {
        0.5 * (self.eps_up + self.eps_down)
    }

    pub fn validate(&self) -> Result<()> {
        for e in [self.eps_up, self.eps_down] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::InvalidParameter(
                    "confusion entries must be in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    /// 2×2 column-stochastic matrix, basis order (↓, ↑).
    pub fn matrix(&self) -> Array2<f64> {
        array![
            [1.0 - self.eps_down, self.eps_up],
            [self.eps_down, 1.0 - self.eps_up],
        ]
    }

    /// Inverse map; rejected unless both per-state error rates are < 0.5.
    pub fn inverse(&self) -> Result<Array2<f64>> {
        if self.eps_up >= 0.5 || self.eps_down >= 0.5 {
            return Err(Error::SingularConfusion);
        }
        let det = 1.0 - self.eps_up - self.eps_down;
        Ok(array![
            [(1.0 - self.eps_up) / det, -self.eps_up / det],
            [-self.eps_down / det, (1.0 - self.eps_down) / det],
        ])
    }
}

/// A fresh deterministic generator for a seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two-ion forward map C_a ⊗ C_b (4×4, basis order ↓↓, ↓↑, ↑↓, ↑↑).
pub fn two_ion_confusion(ca: &ConfusionMatrix, cb: &ConfusionMatrix) -> Array2<f64> {
    kron_real(&ca.matrix(), &cb.matrix())
}

/// Push true outcome populations through the readout confusion of both ions.
pub fn apply_confusion(
    true_populations: &[f64; 4],
    ca: &ConfusionMatrix,
    cb: &ConfusionMatrix,
) -> Result<[f64; 4]> {
    ca.validate()?;
    cb.validate()?;
    let m = two_ion_confusion(ca, cb);
    let mut out = [0.0; 4];
    for (i, oi) in out.iter_mut().enumerate() {
        for (j, pj) in true_populations.iter().enumerate() {
            *oi += m[(i, j)] * pj;
        }
    }
    Ok(out)
}

/// Outcome counts of one measurement setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShotSet {
    /// Counts over (↓↓, ↓↑, ↑↓, ↑↑).
    pub counts: [u64; 4],
    pub total: u64,
    pub seed: u64,
}

impl ShotSet {
    pub fn frequencies(&self) -> [f64; 4] {
        let n = self.total as f64;
        [
            self.counts[0] as f64 / n,
            self.counts[1] as f64 / n,
            self.counts[2] as f64 / n,
            self.counts[3] as f64 / n,
        ]
    }
}

/// Draw a multinomial sample of N shots from a 4-outcome distribution,
/// reproducibly for a fixed seed (chained binomials).
pub fn sample_shots(distribution: &[f64; 4], n: u64, seed: u64) -> Result<ShotSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("shot count must be > 0".into()));
    }
    let sum: f64 = distribution.iter().sum();
    if distribution.iter().any(|&p| p < -1e-12) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(
            "distribution must be a probability vector".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [0u64; 4];
    let mut remaining = n;
    let mut mass_left = 1.0f64;
    for k in 0..3 {
        if remaining == 0 {
            break;
        }
        let p = (distribution[k].max(0.0) / mass_left).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, p)
            .map_err(|e| Error::InvalidParameter(format!("binomial: {e}")))?
            .sample(&mut rng);
        counts[k] = draw;
        remaining -= draw;
        mass_left = (mass_left - distribution[k].max(0.0)).max(f64::MIN_POSITIVE);
    }
    counts[3] = remaining;
    Ok(ShotSet { counts, total: n, seed })
}

/// Photon-scattering error as per-qubit depolarization (Pauli twirl with
/// probability p per qubit), costing a Bell state exactly p of fidelity per
/// qubit to first order.
pub fn scattering_channel(
    state: &mut TwoQubitState,
    p_scat_a: f64,
    p_scat_b: f64,
) -> Result<()> {
    for p in [p_scat_a, p_scat_b] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(
                "scattering probability must be in [0, 1]".into(),
            ));
        }
    }
    state.depolarize(QubitId::A, p_scat_a);
    state.depolarize(QubitId::B, p_scat_b);
    Ok(())
}

/// Magnetic-field environment: a common Ornstein-Uhlenbeck drift plus a
/// static axial gradient that makes the field differ by `delta_b_tesla`
/// between the two crystal sites.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftModel {
    /// Quantization field (T), ≈ 0.2 mT.
    pub b0_tesla: f64,
    /// Field difference between the two ion sites (T), 0.18 μT.
    pub delta_b_tesla: f64,
    /// Qubit frequency sensitivity of species A (Hz/T).
    pub sensitivity_a_hz_per_tesla: f64,
    /// Same for species B.
    pub sensitivity_b_hz_per_tesla: f64,
    /// OU volatility of the common field (T/√s); 0 disables drift.
    pub volatility_tesla_per_sqrt_s: f64,
    /// OU relaxation time (s).
    pub correlation_time_s: f64,
    pub order: IonOrder,
    /// Probability that one melt/cool cycle flips the ion order.
    pub order_flip_probability: f64,
}

impl DriftModel {
    /// Reference defaults: Zeeman qubit at 28 GHz/T, hyperfine stretch qubit
    /// at 2.45 GHz/T, 0.18 μT site difference in a 0.2 mT field.
    pub fn experiment_defaults() -> Self {
        Self {
            b0_tesla: 2.0e-4,
            delta_b_tesla: 0.18e-6,
            sensitivity_a_hz_per_tesla: 27.99e9,
            sensitivity_b_hz_per_tesla: 2.45e9,
            volatility_tesla_per_sqrt_s: 0.0,
            correlation_time_s: 10.0,
            order: IonOrder::AB,
            order_flip_probability: 0.5,
        }
    }

    /// Field at each ion's site for a given order, relative to the common
    /// value: site 1 sits at -ΔB/2, site 2 at +ΔB/2.
    fn site_field_offsets(&self, order: IonOrder) -> (f64, f64) {
        match order {
            IonOrder::AB => (-self.delta_b_tesla / 2.0, self.delta_b_tesla / 2.0),
            IonOrder::BA => (self.delta_b_tesla / 2.0, -self.delta_b_tesla / 2.0),
        }
    }

    /// Qubit frequency offsets (Hz) from their nominal (common-field,
    /// gradient-free) values, for the given common-field offset and order.
    pub fn qubit_offsets(&self, common_offset_tesla: f64, order: IonOrder) -> (f64, f64) {
        let (da, db) = self.site_field_offsets(order);
        (
            self.sensitivity_a_hz_per_tesla * (common_offset_tesla + da),
            self.sensitivity_b_hz_per_tesla * (common_offset_tesla + db),
        )
    }

    /// Size of the order signature on qubit A: |f_A(AB) - f_A(BA)| (Hz);
    /// ≈ 5 kHz at the experiment's gradient and sensitivity.
    pub fn order_signature_hz(&self) -> f64 {
        self.sensitivity_a_hz_per_tesla * self.delta_b_tesla
    }
}

/// Mutable drift state carried across steps.
#[derive(Debug, Clone, Default)]
pub struct DriftState {
    /// Common-field offset from B0 (T).
    pub common_offset_tesla: f64,
}

/// Advance the OU common-field drift by dt and return the updated per-qubit
/// frequency offsets (Hz).
pub fn drift_step(
    model: &DriftModel,
    state: &mut DriftState,
    dt_s: f64,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    if model.volatility_tesla_per_sqrt_s > 0.0 {
        let tau = model.correlation_time_s;
        let decay = (-dt_s / tau).exp();
        let stationary_sd =
            model.volatility_tesla_per_sqrt_s * (tau / 2.0 * (1.0 - decay * decay)).sqrt();
        let xi: f64 = sample_standard_normal(rng);
        state.common_offset_tesla = state.common_offset_tesla * decay + stationary_sd * xi;
    }
    model.qubit_offsets(state.common_offset_tesla, model.order)
}

fn sample_standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller from two uniforms
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Infer the ion order from measured per-qubit frequency offsets by the
/// gradient signature, cancelling common drift.
pub fn detect_order(
    model: &DriftModel,
    measured_offset_a_hz: f64,
    measured_offset_b_hz: f64,
) -> IonOrder {
    // field difference seen by A minus by B: -ΔB for AB, +ΔB for BA
    let differential = measured_offset_a_hz / model.sensitivity_a_hz_per_tesla
        - measured_offset_b_hz / model.sensitivity_b_hz_per_tesla;
    if differential < 0.0 {
        IonOrder::AB
    } else {
        IonOrder::BA
    }
}

/// Outcome of the melt/cool reordering loop.
#[derive(Debug, Clone, Copy)]
pub struct ReorderOutcome {
    pub order: IonOrder,
    /// Melt/cool cycles performed (0 when the order was already correct).
    pub cycles: u64,
}

/// Randomly reorder the crystal until the target order is reached. Each
/// melt/cool cycle flips the order with the model's flip probability.
pub fn reorder(model: &DriftModel, current: IonOrder, target: IonOrder, seed: u64) -> ReorderOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = current;
    let mut cycles = 0u64;
    while order != target {
        cycles += 1;
        if rng.random::<f64>() < model.order_flip_probability {
            order = order.flipped();
        }
        if cycles > 10_000_000 {
            break; // flip probability of 0 would never terminate
        }
    }
    ReorderOutcome { order, cycles }
}

/// Probe pulse configuration for the slow carrier π-pulse frequency scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// π-pulse duration (s); ≈ 100 μs in the experiment.
    pub pulse_duration_s: f64,
    /// Half-width of the detuning scan (Hz).
    pub scan_halfwidth_hz: f64,
    pub scan_points: usize,
    pub shots_per_point: u64,
}

impl ProbeConfig {
    pub fn experiment_defaults() -> Self {
        Self {
            pulse_duration_s: 100e-6,
            scan_halfwidth_hz: 15_000.0,
            scan_points: 25,
            shots_per_point: 200,
        }
    }

    /// Fourier-limited linewidth ≈ 1/duration (Hz).
    pub fn fourier_width_hz(&self) -> f64 {
        1.0 / self.pulse_duration_s
    }
}

/// Result of one probe scan.
#[derive(Debug, Clone, Copy)]
pub struct ProbeResult {
    pub frequency_estimate_hz: f64,
    pub fourier_width_hz: f64,
    /// False when the best fit sits on the scan edge (estimate unreliable;
    /// callers keep the previous calibration).
    pub converged: bool,
}

/// Rabi π-pulse flip probability at detuning Δ from resonance.
fn rabi_lineshape(detuning_hz: f64, duration_s: f64) -> f64 {
    let omega = std::f64::consts::PI / duration_s; // rad/s, π pulse on resonance
    let delta = std::f64::consts::TAU * detuning_hz;
    let w = (omega * omega + delta * delta).sqrt();
    let s = (w * duration_s / 2.0).sin();
    (omega / w).powi(2) * s * s
}

/// Simulate a carrier π-pulse frequency scan around the LO and fit the line
/// center, estimating the qubit's frequency offset.
///
/// The fit is a weighted least-squares match of the sampled flip fractions
/// against the Rabi lineshape with free center and amplitude, minimized over
/// the center on a dense grid with parabolic refinement.
pub fn calibration_probe(
    true_offset_hz: f64,
    cfg: &ProbeConfig,
    seed: u64,
) -> Result<ProbeResult> {
    if cfg.pulse_duration_s <= 0.0 {
        return Err(Error::InvalidParameter("probe duration must be > 0".into()));
    }
    if cfg.scan_points < 5 {
        return Err(Error::InvalidParameter("probe scan needs >= 5 points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = cfg.scan_points;
    let mut scan = Vec::with_capacity(m);
    for k in 0..m {
        let x = -cfg.scan_halfwidth_hz
            + 2.0 * cfg.scan_halfwidth_hz * k as f64 / (m - 1) as f64;
        let p = rabi_lineshape(x - true_offset_hz, cfg.pulse_duration_s);
        let flips = Binomial::new(cfg.shots_per_point, p.clamp(0.0, 1.0))
            .map_err(|e| Error::InvalidParameter(format!("binomial: {e}")))?
            .sample(&mut rng);
        scan.push((x, flips as f64 / cfg.shots_per_point as f64));
    }

    let chi2 = |center: f64| -> f64 {
        // amplitude solved in closed form: min_A Σ (y - A·m)²
        let mut num = 0.0;
        let mut den = 0.0;
        for &(x, y) in &scan {
            let model = rabi_lineshape(x - center, cfg.pulse_duration_s);
            num += y * model;
            den += model * model;
        }
        let a = if den > 0.0 { num / den } else { 0.0 };
        scan.iter()
            .map(|&(x, y)| {
                let r = y - a * rabi_lineshape(x - center, cfg.pulse_duration_s);
                r * r
            })
            .sum()
    };

    let grid_n = 400;
    let mut best = (0.0, f64::INFINITY);
    for k in 0..=grid_n {
        let c = -cfg.scan_halfwidth_hz
            + 2.0 * cfg.scan_halfwidth_hz * k as f64 / grid_n as f64;
        let v = chi2(c);
        if v < best.1 {
            best = (c, v);
        }
    }
    let step = 2.0 * cfg.scan_halfwidth_hz / grid_n as f64;
    let on_edge = best.0.abs() >= cfg.scan_halfwidth_hz - step;
    // a line inside the window shows near-unity flips somewhere in the scan
    let peak = scan.iter().map(|&(_, y)| y).fold(0.0f64, f64::max);
    let line_visible = peak > 0.5;
    // parabolic refinement on the grid triple
    let (c0, _) = best;
    let (vm, v0, vp) = (chi2(c0 - step), chi2(c0), chi2(c0 + step));
    let denom = vm - 2.0 * v0 + vp;
    let refined = if denom.abs() > 1e-300 {
        c0 + 0.5 * step * (vm - vp) / denom
    } else {
        c0
    };
    Ok(ProbeResult {
        frequency_estimate_hz: refined,
        fourier_width_hz: cfg.fourier_width_hz(),
        converged: !on_edge && line_visible,
    })
}
