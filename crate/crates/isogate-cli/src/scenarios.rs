//! The six scenario runners. Each produces a CSV of scan data, a JSON
//! summary embedding the fully resolved config and its hash, and a
//! human-readable report.

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use isogate::analysis::chsh::{
    bootstrap_sigma_e, chsh_e, s_max, simulate_chsh, ChshResult, ChshSettings,
};
use isogate::analysis::tomography::{mle_tomography, simulate_tomography_data};
use isogate::analysis::{
    correct_frequencies, fidelity_from_parity, parity_scan_fit, ParityFit, ParityPoint,
};
use isogate::dynamics::{light_shift_amplitude_for_error, light_shift_phase, Envelope};
use isogate::error::{Error, Result};
use isogate::noise::{
    apply_confusion, calibration_probe, detect_order, drift_step, reorder, sample_shots,
    scattering_channel, DriftState,
};
use isogate::crystal::IonOrder;
use isogate::sequence::{
    bell_program, bell_program_with_analysis, run_sequence, GateContext, SequenceConfig,
    TwoQubitState,
};

use crate::config::{resolve_physics, NoiseConfig, ResolvedPhysics, Scenario, ScenarioKind};

/// Everything one scenario run produces.
pub struct RunArtifacts {
    pub csv: String,
    pub summary_json: String,
    pub report: String,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct SummaryEnvelope<'a, T: Serialize> {
    scenario: &'static str,
    seed: u64,
    config_hash_sha256: String,
    results: T,
    config: &'a Scenario,
}

fn config_hash(scenario: &Scenario) -> Result<String> {
    let bytes = serde_json::to_vec(scenario)
        .map_err(|e| Error::InvalidParameter(format!("serialize config: {e}")))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn finish<T: Serialize>(
    scenario: &Scenario,
    results: T,
    csv: String,
    report: String,
    warnings: Vec<String>,
) -> Result<RunArtifacts> {
    let envelope = SummaryEnvelope {
        scenario: scenario.kind.name(),
        seed: scenario.seed,
        config_hash_sha256: config_hash(scenario)?,
        results,
        config: scenario,
    };
    let summary_json = serde_json::to_string_pretty(&envelope)
        .map_err(|e| Error::InvalidParameter(format!("serialize summary: {e}")))?;
    Ok(RunArtifacts { csv, summary_json, report, warnings })
}

/// Run a scenario. The scenario is mutated in place as derived physics
/// values are resolved, so the emitted summary is fully explicit.
pub fn run_scenario(scenario: &mut Scenario) -> Result<RunArtifacts> {
    scenario.validate()?;
    let physics = resolve_physics(&mut scenario.physics)?;
    match scenario.kind.clone() {
        ScenarioKind::GateFidelity { parity_points, shots_per_point, population_shots } => {
            run_gate_fidelity(scenario, &physics, parity_points, shots_per_point, population_shots)
        }
        ScenarioKind::Tomography { shots_per_setting } => {
            run_tomography(scenario, &physics, shots_per_setting)
        }
        ScenarioKind::Chsh {
            shots_per_setting,
            theta_a_rad,
            theta_a_prime_rad,
            theta_b_rad,
            theta_b_prime_rad,
            bootstrap_replicates,
        } => {
            let settings = ChshSettings {
                theta_a: theta_a_rad,
                theta_a_prime: theta_a_prime_rad,
                theta_b: theta_b_rad,
                theta_b_prime: theta_b_prime_rad,
            };
            run_chsh(scenario, &physics, shots_per_setting, settings, bootstrap_replicates)
        }
        ScenarioKind::LightshiftSweep { ramp_times_us, target_square_error } => {
            run_lightshift_sweep(scenario, &physics, &ramp_times_us, target_square_error)
        }
        ScenarioKind::CalibrationDrift {
            probe,
            detection_trials,
            reorder_trials,
            drift_steps,
            drift_dt_s,
        } => run_calibration_drift(
            scenario,
            &probe,
            detection_trials,
            reorder_trials,
            drift_steps,
            drift_dt_s,
        ),
        ScenarioKind::ModeGeometry {} => run_mode_geometry(scenario, &physics),
    }
}

/// Bell-state preparation with the configured noise, optionally followed by
/// the analysis π/2 pair at phase φ.
fn noisy_bell_state(
    physics: &ResolvedPhysics,
    noise: &NoiseConfig,
    analysis_phi: Option<f64>,
) -> Result<TwoQubitState> {
    let gate = GateContext::new(
        physics.drive.clone(),
        physics.envelope,
        &physics.in_phase,
        &physics.alignment,
        physics.nbar,
    )?;
    let program = match analysis_phi {
        Some(phi) => bell_program_with_analysis(phi),
        None => bell_program(),
    };
    let config = SequenceConfig {
        lo_frequency_a_hz: physics.crystal.species_a.qubit_splitting_hz,
        lo_frequency_b_hz: physics.crystal.species_b.qubit_splitting_hz,
        prep_error_a: noise.prep_error_a,
        prep_error_b: noise.prep_error_b,
        ..Default::default()
    };
    let mut state = run_sequence(&program, Some(&gate), &config)?;
    scattering_channel(&mut state, noise.p_scat_a, noise.p_scat_b)?;
    Ok(state)
}

/// Standard error of w·f for multinomial frequencies f at N shots.
fn linear_sigma(freqs: &[f64; 4], weights: &[f64; 4], n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mean: f64 = freqs.iter().zip(weights).map(|(f, w)| f * w).sum();
    let second: f64 = freqs.iter().zip(weights).map(|(f, w)| f * w * w).sum();
    ((second - mean * mean).max(0.0) / n as f64).sqrt()
}

/// Measure outcome frequencies of a state through the readout chain:
/// confusion forward, optional shot sampling, optional inverse correction.
/// Returns (frequencies, odd-probability, σ_odd, raw counts).
fn measure_populations(
    state: &TwoQubitState,
    noise: &NoiseConfig,
    shots: u64,
    seed: u64,
) -> Result<([f64; 4], f64, f64, [u64; 4])> {
    let p_true = state.populations();
    let p_meas = apply_confusion(&p_true, &noise.confusion_a, &noise.confusion_b)?;
    let (freqs, counts) = if shots > 0 {
        let s = sample_shots(&p_meas, shots, seed)?;
        (s.frequencies(), s.counts)
    } else {
        (p_meas, [0; 4])
    };
    let odd_weights_raw = [0.0, 1.0, 1.0, 0.0];
    if noise.apply_readout_correction {
        let corrected = correct_frequencies(&freqs, &noise.confusion_a, &noise.confusion_b)?;
        // weights of the corrected odd probability as a functional of the
        // raw frequencies: rows 1 and 2 of the inverse map
        let inv = isogate::linalg::kron_real(
            &noise.confusion_a.inverse()?,
            &noise.confusion_b.inverse()?,
        );
        let mut w = [0.0; 4];
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = inv[(1, j)] + inv[(2, j)];
        }
        let sigma = linear_sigma(&freqs, &w, shots);
        Ok((corrected, corrected[1] + corrected[2], sigma, counts))
    } else {
        let sigma = linear_sigma(&freqs, &odd_weights_raw, shots);
        Ok((freqs, freqs[1] + freqs[2], sigma, counts))
    }
}

#[derive(Serialize)]
struct GateFidelityResults {
    fidelity: f64,
    fidelity_sigma: f64,
    parity_contrast: f64,
    parity_contrast_sigma: f64,
    parity_phase_rad: f64,
    parity_baseline: f64,
    p_down_down: f64,
    p_up_up: f64,
    bell_fidelity_true_state: f64,
    readout_corrected: bool,
}

/// One parity-scan point: phase, frequencies, odd probability with its
/// error, and the raw counts.
type ParityScanRow = (f64, [f64; 4], f64, f64, [u64; 4]);

fn run_gate_fidelity(
    scenario: &Scenario,
    physics: &ResolvedPhysics,
    parity_points: usize,
    shots_per_point: u64,
    population_shots: u64,
) -> Result<RunArtifacts> {
    let noise = &scenario.noise;
    let phis: Vec<f64> = (0..parity_points)
        .map(|k| std::f64::consts::PI * k as f64 / parity_points as f64)
        .collect();

    let scan: Result<Vec<ParityScanRow>> = phis
        .par_iter()
        .enumerate()
        .map(|(k, &phi)| {
            let state = noisy_bell_state(physics, noise, Some(phi))?;
            let (freqs, p_odd, sigma, counts) =
                measure_populations(&state, noise, shots_per_point, scenario.seed.wrapping_add(k as u64))?;
            Ok((phi, freqs, p_odd, sigma, counts))
        })
        .collect();
    let scan = scan?;

    let points: Vec<ParityPoint> = scan
        .iter()
        .map(|&(phi, _, p_odd, sigma, _)| ParityPoint { phi_rad: phi, p_odd, sigma })
        .collect();
    let fit: ParityFit = parity_scan_fit(&points)?;

    // populations without the analysis pulses
    let bare = noisy_bell_state(physics, noise, None)?;
    let (pops, _, _, _) = measure_populations(
        &bare,
        noise,
        population_shots,
        scenario.seed.wrapping_add(0xA001),
    )?;
    let pop_sigma = |p: f64| {
        if population_shots > 0 {
            (p.abs() * (1.0 - p.abs().min(1.0)) / population_shots as f64).sqrt()
        } else {
            0.0
        }
    };
    let (fidelity, fidelity_sigma) = fidelity_from_parity(
        (pops[0], pop_sigma(pops[0])),
        (pops[3], pop_sigma(pops[3])),
        (fit.contrast, fit.contrast_sigma),
    );
    let true_fidelity = bare.fidelity_to(&TwoQubitState::bell_phi_plus());

    let mut csv = String::from(
        "phi_rad,n_dd,n_du,n_ud,n_uu,p_dd,p_du,p_ud,p_uu,p_odd,p_odd_sigma\n",
    );
    for (phi, freqs, p_odd, sigma, counts) in &scan {
        csv.push_str(&format!(
            "{phi},{},{},{},{},{},{},{},{},{p_odd},{sigma}\n",
            counts[0], counts[1], counts[2], counts[3], freqs[0], freqs[1], freqs[2], freqs[3],
        ));
    }

    let report = format!(
        "Gate fidelity scenario\n\
         ----------------------\n\
         parity contrast C      = {:.6} ± {:.6}\n\
         fringe phase offset    = {:+.6} rad\n\
         fringe baseline        = {:+.6}\n\
         P(down,down)           = {:.6}\n\
         P(up,up)               = {:.6}\n\
         Bell fidelity estimate = {:.6} ± {:.6}\n\
         (true simulated state fidelity: {:.9})\n\
         readout corrected: {}\n",
        fit.contrast,
        fit.contrast_sigma,
        fit.phase_offset_rad,
        fit.baseline,
        pops[0],
        pops[3],
        fidelity,
        fidelity_sigma,
        true_fidelity,
        noise.apply_readout_correction,
    );

    let results = GateFidelityResults {
        fidelity,
        fidelity_sigma,
        parity_contrast: fit.contrast,
        parity_contrast_sigma: fit.contrast_sigma,
        parity_phase_rad: fit.phase_offset_rad,
        parity_baseline: fit.baseline,
        p_down_down: pops[0],
        p_up_up: pops[3],
        bell_fidelity_true_state: true_fidelity,
        readout_corrected: noise.apply_readout_correction,
    };
    finish(scenario, results, csv, report, Vec::new())
}

#[derive(Serialize)]
struct TomographyResults {
    fidelity: f64,
    log_likelihood: f64,
    iterations: usize,
    converged: bool,
    rho_real: Vec<Vec<f64>>,
    rho_imag: Vec<Vec<f64>>,
}

fn run_tomography(
    scenario: &Scenario,
    physics: &ResolvedPhysics,
    shots_per_setting: u64,
) -> Result<RunArtifacts> {
    let noise = &scenario.noise;
    let state = noisy_bell_state(physics, noise, None)?;
    let has_readout_error = noise.confusion_a.average_error() > 0.0
        || noise.confusion_b.average_error() > 0.0;
    let confusion = has_readout_error.then_some((&noise.confusion_a, &noise.confusion_b));
    let data =
        simulate_tomography_data(&state, shots_per_setting, confusion, scenario.seed)?;
    let folded = (has_readout_error && noise.apply_readout_correction)
        .then_some((&noise.confusion_a, &noise.confusion_b));
    let result = mle_tomography(&data, folded)?;

    let mut warnings = Vec::new();
    if !result.converged {
        warnings.push(format!(
            "tomography hit the iteration cap at {} iterations; reporting best-so-far",
            result.iterations
        ));
    }

    let mut csv =
        String::from("setting,basis_a,basis_b,n_dd,n_du,n_ud,n_uu\n");
    for (k, s) in data.iter().enumerate() {
        csv.push_str(&format!(
            "{k},{:?},{:?},{},{},{},{}\n",
            s.basis_a, s.basis_b, s.shots.counts[0], s.shots.counts[1], s.shots.counts[2],
            s.shots.counts[3],
        ));
    }

    let rho_real: Vec<Vec<f64>> =
        (0..4).map(|i| (0..4).map(|j| result.rho[(i, j)].re).collect()).collect();
    let rho_imag: Vec<Vec<f64>> =
        (0..4).map(|i| (0..4).map(|j| result.rho[(i, j)].im).collect()).collect();

    let mut report = String::from("Tomography scenario\n-------------------\n");
    report.push_str(&format!(
        "MLE fidelity to (|dd> + |uu>)/sqrt(2): {:.6}\n\
         log-likelihood: {:.3}   iterations: {}   converged: {}\n\n\
         Re(rho):\n",
        result.fidelity_phi_plus, result.log_likelihood, result.iterations, result.converged
    ));
    for row in &rho_real {
        report.push_str(&format!(
            "  {:+.4} {:+.4} {:+.4} {:+.4}\n",
            row[0], row[1], row[2], row[3]
        ));
    }
    report.push_str("Im(rho):\n");
    for row in &rho_imag {
        report.push_str(&format!(
            "  {:+.4} {:+.4} {:+.4} {:+.4}\n",
            row[0], row[1], row[2], row[3]
        ));
    }

    let results = TomographyResults {
        fidelity: result.fidelity_phi_plus,
        log_likelihood: result.log_likelihood,
        iterations: result.iterations,
        converged: result.converged,
        rho_real,
        rho_imag,
    };
    finish(scenario, results, csv, report, warnings)
}

#[derive(Serialize)]
struct ChshResults {
    correlations: Vec<ChshCorrelation>,
    s: f64,
    sigma_s: f64,
    s_max_ideal_bell: f64,
    violates_classical_bound: bool,
    sigma_e_note: String,
}

#[derive(Serialize)]
struct ChshCorrelation {
    theta_a_rad: f64,
    theta_b_rad: f64,
    e: f64,
    sigma_e_plugin: f64,
    sigma_e_bootstrap: Option<f64>,
}

fn run_chsh(
    scenario: &Scenario,
    physics: &ResolvedPhysics,
    shots_per_setting: u64,
    settings: ChshSettings,
    bootstrap_replicates: usize,
) -> Result<RunArtifacts> {
    let noise = &scenario.noise;
    let state = noisy_bell_state(physics, noise, None)?;
    let (shot_sets, result): (Vec<_>, ChshResult) = simulate_chsh(
        &state,
        &settings,
        &noise.confusion_a,
        &noise.confusion_b,
        shots_per_setting,
        scenario.seed,
    )?;
    let smax = s_max(&noise.confusion_a, &noise.confusion_b)?;

    let pairs = settings.pairs();
    let mut correlations = Vec::with_capacity(4);
    for (k, shots) in shot_sets.iter().enumerate() {
        let (e, sigma) = chsh_e(shots);
        let boot = if bootstrap_replicates > 0 {
            Some(bootstrap_sigma_e(
                shots,
                bootstrap_replicates,
                scenario.seed.wrapping_add(0xB00 + k as u64),
            )?)
        } else {
            None
        };
        correlations.push(ChshCorrelation {
            theta_a_rad: pairs[k].0,
            theta_b_rad: pairs[k].1,
            e,
            sigma_e_plugin: sigma,
            sigma_e_bootstrap: boot,
        });
    }

    let mut csv = String::from("setting,theta_a,theta_b,n_dd,n_du,n_ud,n_uu,E,sigma_E\n");
    for (k, shots) in shot_sets.iter().enumerate() {
        let (e, sigma) = chsh_e(shots);
        csv.push_str(&format!(
            "{k},{},{},{},{},{},{},{e},{sigma}\n",
            pairs[k].0,
            pairs[k].1,
            shots.counts[0],
            shots.counts[1],
            shots.counts[2],
            shots.counts[3],
        ));
    }

    let sigma_e_note = format!(
        "sigma_E is the plug-in estimate sqrt((1-E^2)/N) = {:.4} at N = {}; the \
         reference experiment quotes 0.007 at the same N without stating its \
         estimator. The discrepancy is reported, not fitted.",
        correlations[0].sigma_e_plugin, shots_per_setting
    );

    let mut report = String::from("CHSH scenario (readout uncorrected)\n");
    report.push_str("-----------------------------------\n");
    report.push_str("  theta_a   theta_b          E     sigma_E\n");
    for c in &correlations {
        report.push_str(&format!(
            "  {:7.4}   {:7.4}   {:+8.4}   {:\u{20}>7.4}\n",
            c.theta_a_rad, c.theta_b_rad, c.e, c.sigma_e_plugin
        ));
    }
    report.push_str(&format!(
        "\nS = |E1 + E2| + |E3 - E4| = {:.4} ± {:.4}\n\
         detection-limited maximum S_max (ideal Bell) = {:.4}\n\
         classical bound 2 {}\n\nNote: {}\n",
        result.s,
        result.sigma_s,
        smax,
        if result.s > 2.0 { "violated" } else { "not violated" },
        sigma_e_note,
    ));

    let results = ChshResults {
        correlations,
        s: result.s,
        sigma_s: result.sigma_s,
        s_max_ideal_bell: smax,
        violates_classical_bound: result.s > 2.0,
        sigma_e_note,
    };
    finish(scenario, results, csv, report, Vec::new())
}

#[derive(Serialize)]
struct LightshiftResults {
    calibrated_amplitude_hz: f64,
    square_pulse_error: f64,
    errors_by_ramp: Vec<(f64, f64, f64)>,
    error_at_one_microsecond: Option<f64>,
    reduction_factor_at_one_microsecond: Option<f64>,
}

fn run_lightshift_sweep(
    scenario: &Scenario,
    physics: &ResolvedPhysics,
    ramp_times_us: &[f64],
    target_square_error: f64,
) -> Result<RunArtifacts> {
    let square_env = physics.envelope;
    let amp = light_shift_amplitude_for_error(&physics.drive, &square_env, target_square_error)?;
    let mut drive = physics.drive.clone();
    drive.light_shift_a_hz = 0.0;
    drive.light_shift_b_hz = amp;
    let square_error = light_shift_phase(&drive, &square_env)?.average_gate_error;

    let area = square_env.area();
    let sweep: Result<Vec<(f64, f64, f64)>> = ramp_times_us
        .par_iter()
        .map(|&tau_us| {
            let tau = tau_us * 1e-6;
            let env = if tau == 0.0 {
                Envelope::square(area)
            } else {
                Envelope::shaped(area + tau, tau)
            };
            let a = light_shift_phase(&drive, &env)?;
            Ok((tau_us, a.average_gate_error, a.worst_gate_error))
        })
        .collect();
    let sweep = sweep?;

    let at_1us = sweep
        .iter()
        .find(|(t, _, _)| (t - 1.0).abs() < 1e-9)
        .map(|&(_, avg, _)| avg);
    let reduction = at_1us.map(|e| square_error / e.max(f64::MIN_POSITIVE));

    let mut csv = String::from("ramp_time_us,average_gate_error,worst_gate_error\n");
    for (t, avg, worst) in &sweep {
        csv.push_str(&format!("{t},{avg},{worst}\n"));
    }

    let mut report = String::from("Light-shift pulse-shaping sweep\n");
    report.push_str("-------------------------------\n");
    report.push_str(&format!(
        "calibrated oscillating amplitude on ion b: {amp:.1} Hz\n\
         square-pulse average gate error: {square_error:.4}\n\n\
         ramp (us)   avg error    worst error\n"
    ));
    for (t, avg, worst) in &sweep {
        report.push_str(&format!("  {t:7.3}   {avg:10.6}   {worst:10.6}\n"));
    }
    if let (Some(e), Some(r)) = (at_1us, reduction) {
        report.push_str(&format!(
            "\n1 us ramp: error {e:.6}, reduction factor {r:.1}x\n"
        ));
    }

    let results = LightshiftResults {
        calibrated_amplitude_hz: amp,
        square_pulse_error: square_error,
        errors_by_ramp: sweep,
        error_at_one_microsecond: at_1us,
        reduction_factor_at_one_microsecond: reduction,
    };
    finish(scenario, results, csv, report, Vec::new())
}

#[derive(Serialize)]
struct CalibrationDriftResults {
    order_signature_hz: f64,
    detection_trials: u64,
    detection_rate: f64,
    mean_reorder_cycles: f64,
    probe_fourier_width_hz: f64,
    unconverged_probes: u64,
}

fn run_calibration_drift(
    scenario: &Scenario,
    probe: &isogate::noise::ProbeConfig,
    detection_trials: u64,
    reorder_trials: u64,
    drift_steps: usize,
    drift_dt_s: f64,
) -> Result<RunArtifacts> {
    let model = scenario
        .noise
        .drift
        .clone()
        .ok_or_else(|| Error::InvalidParameter("calibration_drift needs a drift model".into()))?;

    // detection: crystal actually in the wrong order (BA) while the LOs are
    // calibrated for AB; the probe loop must notice via the ~5 kHz signature
    let (nominal_a, nominal_b) = model.qubit_offsets(0.0, IonOrder::AB);
    let detections: Result<Vec<(bool, bool)>> = (0..detection_trials)
        .into_par_iter()
        .map(|trial| {
            let (fa, fb) = model.qubit_offsets(0.0, IonOrder::BA);
            let ra = calibration_probe(
                fa - nominal_a,
                probe,
                scenario.seed.wrapping_add(2 * trial),
            )?;
            let rb = calibration_probe(
                fb - nominal_b,
                probe,
                scenario.seed.wrapping_add(2 * trial + 1),
            )?;
            let detected = detect_order(
                &model,
                nominal_a + ra.frequency_estimate_hz,
                nominal_b + rb.frequency_estimate_hz,
            );
            Ok((detected == IonOrder::BA, ra.converged && rb.converged))
        })
        .collect();
    let detections = detections?;
    let detection_rate =
        detections.iter().filter(|(hit, _)| *hit).count() as f64 / detection_trials as f64;
    let unconverged = detections.iter().filter(|(_, ok)| !ok).count() as u64;

    // reorder statistics from the wrong order
    let cycles: Vec<u64> = (0..reorder_trials)
        .into_par_iter()
        .map(|trial| {
            reorder(
                &model,
                IonOrder::BA,
                IonOrder::AB,
                scenario.seed.wrapping_add(0xC000 + trial),
            )
            .cycles
        })
        .collect();
    let mean_cycles = cycles.iter().sum::<u64>() as f64 / reorder_trials as f64;

    // OU drift demonstration trace
    let mut csv = String::from("t_s,common_field_offset_tesla,f_offset_a_hz,f_offset_b_hz\n");
    {
        let mut rng = isogate::noise::seeded_rng(scenario.seed.wrapping_add(0x18000));
        let mut state = DriftState::default();
        for k in 0..drift_steps {
            let (fa, fb) = drift_step(&model, &mut state, drift_dt_s, &mut rng);
            csv.push_str(&format!(
                "{},{},{fa},{fb}\n",
                k as f64 * drift_dt_s,
                state.common_offset_tesla
            ));
        }
    }

    let mut warnings = Vec::new();
    if unconverged > 0 {
        warnings.push(format!(
            "{unconverged} probe fits did not converge; previous calibration retained for those"
        ));
    }

    let report = format!(
        "Calibration and drift scenario\n\
         ------------------------------\n\
         order signature (qubit a): {:.1} Hz\n\
         probe Fourier width: {:.1} Hz\n\
         wrong-order detection rate over {} trials: {:.4}\n\
         mean melt/cool cycles to restore order ({} trials): {:.4}\n\
         unconverged probe fits: {}\n",
        model.order_signature_hz(),
        probe.fourier_width_hz(),
        detection_trials,
        detection_rate,
        reorder_trials,
        mean_cycles,
        unconverged,
    );

    let results = CalibrationDriftResults {
        order_signature_hz: model.order_signature_hz(),
        detection_trials,
        detection_rate,
        mean_reorder_cycles: mean_cycles,
        probe_fourier_width_hz: probe.fourier_width_hz(),
        unconverged_probes: unconverged,
    };
    finish(scenario, results, csv, report, warnings)
}

#[derive(Serialize)]
struct ModeGeometryResults {
    f_axial_reference_hz: f64,
    in_phase_frequency_hz: f64,
    out_of_phase_frequency_hz: f64,
    eigenvector_in_phase: (f64, f64),
    eta_a: f64,
    eta_b: f64,
    separation_m: f64,
    lattice_period_m: f64,
    separation_in_lattice_periods: f64,
    force_sign_at_separation: f64,
}

fn run_mode_geometry(scenario: &Scenario, physics: &ResolvedPhysics) -> Result<RunArtifacts> {
    let periods = physics.separation_m / physics.beam.lattice_period();
    let natural = isogate::crystal::standing_wave_alignment(physics.separation_m, &physics.beam)?;

    let mut csv = String::from(
        "mode,frequency_hz,b_a,b_b,eta_a,eta_b\n",
    );
    csv.push_str(&format!(
        "in_phase,{},{},{},{},{}\n",
        physics.in_phase.frequency_hz,
        physics.in_phase.b_a,
        physics.in_phase.b_b,
        physics.in_phase.eta_a,
        physics.in_phase.eta_b,
    ));
    csv.push_str(&format!(
        "out_of_phase,{},{},{},{},{}\n",
        physics.out_of_phase.frequency_hz,
        physics.out_of_phase.b_a,
        physics.out_of_phase.b_b,
        physics.out_of_phase.eta_a,
        physics.out_of_phase.eta_b,
    ));

    let report = format!(
        "Mode geometry scenario\n\
         ----------------------\n\
         single-ion reference frequency (species a): {:.4} MHz\n\
         in-phase mode:     {:.4} MHz, eigenvector ({:+.4}, {:+.4})\n\
         out-of-phase mode: {:.4} MHz\n\
         Lamb-Dicke parameters: eta_a = {:.4}, eta_b = {:.4}\n\
         ion separation: {:.3} um = {:.3} lattice periods\n\
         force alignment at separation: sign {:+.0}, residual {:.4} rad\n",
        physics.crystal.f_axial_reference_hz / 1e6,
        physics.in_phase.frequency_hz / 1e6,
        physics.in_phase.b_a,
        physics.in_phase.b_b,
        physics.out_of_phase.frequency_hz / 1e6,
        physics.in_phase.eta_a,
        physics.in_phase.eta_b,
        physics.separation_m * 1e6,
        periods,
        natural.force_sign,
        natural.residual_phase,
    );

    let results = ModeGeometryResults {
        f_axial_reference_hz: physics.crystal.f_axial_reference_hz,
        in_phase_frequency_hz: physics.in_phase.frequency_hz,
        out_of_phase_frequency_hz: physics.out_of_phase.frequency_hz,
        eigenvector_in_phase: (physics.in_phase.b_a, physics.in_phase.b_b),
        eta_a: physics.in_phase.eta_a,
        eta_b: physics.in_phase.eta_b,
        separation_m: physics.separation_m,
        lattice_period_m: physics.beam.lattice_period(),
        separation_in_lattice_periods: periods,
        force_sign_at_separation: natural.force_sign,
    };
    finish(scenario, results, csv, report, Vec::new())
}
