//! Scenario configuration schema and physics resolution.
//!
//! Configs are JSON with SI units named in the keys. Everything derived at
//! load time (reference trap frequency, Lamb-Dicke parameters, calibrated
//! couplings, difference frequency) is written back into the resolved
//! scenario so the emitted summary carries no hidden defaults.

use serde::{Deserialize, Serialize};

use isogate::crystal::{
    equilibrium_separation, lamb_dicke, reference_frequency_for_inphase, solve_axial_modes,
    standing_wave_alignment, BeamGeometry, MotionalMode, StandingWaveAlignment, TwoIonCrystal,
};
use isogate::dynamics::{calibrate_couplings, DriveConfig, Envelope};
use isogate::error::{Error, Result};
use isogate::noise::{ConfusionMatrix, DriftModel, ProbeConfig};

/// How the standing-wave alignment at the ion positions is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentMode {
    /// Exactly anti-aligned forces (half-integer separation), the gate's
    /// operating point.
    HalfInteger,
    /// Exactly aligned forces.
    Integer,
    /// Whatever the equilibrium separation actually gives.
    FromSeparation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhysicsConfig {
    pub crystal: TwoIonCrystal,
    /// When set, the crystal's reference frequency is solved so the in-phase
    /// mode lands here (Hz), and written back.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_inphase_hz: Option<f64>,
    pub beam: BeamGeometry,
    pub drive: DriveConfigJson,
    pub envelope: Envelope,
    pub alignment_mode: AlignmentMode,
    /// Thermal occupancy of the gate mode after cooling.
    pub nbar: f64,
}

/// Drive config as stored in scenario files; `difference_frequency_hz` and
/// the coupling scale may be derived.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriveConfigJson {
    pub raman_detuning_hz: f64,
    /// Derived as f_z + δ_g when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub difference_frequency_hz: Option<f64>,
    pub gate_detuning_hz: f64,
    pub couplings: isogate::dynamics::ForceCouplings,
    /// When set, all couplings are rescaled so the composed gate phase Φ
    /// equals this (rad); the resolved values are written back.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibrate_phi_rad: Option<f64>,
    pub optical_phase_rad: f64,
    pub light_shift_a_hz: f64,
    pub light_shift_b_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub confusion_a: ConfusionMatrix,
    pub confusion_b: ConfusionMatrix,
    /// Correct readout before analysis (gate-fidelity path); the CHSH
    /// scenario always analyzes uncorrected counts.
    pub apply_readout_correction: bool,
    pub prep_error_a: f64,
    pub prep_error_b: f64,
    pub p_scat_a: f64,
    pub p_scat_b: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftModel>,
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self {
            confusion_a: ConfusionMatrix::ideal(),
            confusion_b: ConfusionMatrix::ideal(),
            apply_readout_correction: false,
            prep_error_a: 0.0,
            prep_error_b: 0.0,
            p_scat_a: 0.0,
            p_scat_b: 0.0,
            drift: None,
        }
    }
}

/// Scenario-specific knobs, tagged by the scenario name.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Fig. 2-style run: parity scan + population measurement + fidelity.
    GateFidelity {
        parity_points: usize,
        /// 0 means analytic probabilities (infinite statistics).
        shots_per_point: u64,
        population_shots: u64,
    },
    /// Nine-setting tomography and MLE reconstruction.
    Tomography { shots_per_setting: u64 },
    /// Four-setting CHSH test with uncorrected readout.
    Chsh {
        shots_per_setting: u64,
        theta_a_rad: f64,
        theta_a_prime_rad: f64,
        theta_b_rad: f64,
        theta_b_prime_rad: f64,
        /// Bootstrap replicates for the σ_E cross-check (0 disables).
        bootstrap_replicates: usize,
    },
    /// Light-shift error vs pulse-shaping ramp time at fixed pulse area.
    LightshiftSweep {
        ramp_times_us: Vec<f64>,
        /// Square-pulse average gate error the amplitude is calibrated to.
        target_square_error: f64,
    },
    /// Probe-loop detection of the order signature plus reorder statistics.
    CalibrationDrift {
        probe: ProbeConfig,
        detection_trials: u64,
        reorder_trials: u64,
        /// OU drift demo trace length (steps of `drift_dt_s`).
        drift_steps: usize,
        drift_dt_s: f64,
    },
    /// Crystal geometry report: modes, Lamb-Dicke parameters, separation.
    ModeGeometry {},
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::GateFidelity { .. } => "gate_fidelity",
            ScenarioKind::Tomography { .. } => "tomography",
            ScenarioKind::Chsh { .. } => "chsh",
            ScenarioKind::LightshiftSweep { .. } => "lightshift_sweep",
            ScenarioKind::CalibrationDrift { .. } => "calibration_drift",
            ScenarioKind::ModeGeometry {} => "mode_geometry",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    /// Output directory; files are named `<name>.csv`, `<name>_summary.json`,
    /// `<name>_report.txt` inside it.
    pub out_dir: String,
    pub physics: PhysicsConfig,
    pub noise: NoiseConfig,
    #[serde(flatten)]
    pub kind: ScenarioKind,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.physics.crystal.validate()?;
        self.physics.beam.validate()?;
        self.physics.envelope.validate()?;
        self.noise.confusion_a.validate()?;
        self.noise.confusion_b.validate()?;
        if self.physics.nbar < 0.0 {
            return Err(Error::InvalidParameter("nbar must be >= 0".into()));
        }
        for p in [
            self.noise.prep_error_a,
            self.noise.prep_error_b,
            self.noise.p_scat_a,
            self.noise.p_scat_b,
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(
                    "error probabilities must be in [0, 1]".into(),
                ));
            }
        }
        match &self.kind {
            ScenarioKind::GateFidelity { parity_points, .. } => {
                if *parity_points < 5 {
                    return Err(Error::InvalidParameter(
                        "parity scan needs >= 5 points".into(),
                    ));
                }
            }
            ScenarioKind::Tomography { shots_per_setting } => {
                if *shots_per_setting < 100 {
                    return Err(Error::InvalidParameter(
                        "tomography needs >= 100 shots per setting".into(),
                    ));
                }
            }
            ScenarioKind::Chsh { shots_per_setting, .. } => {
                if *shots_per_setting == 0 {
                    return Err(Error::InvalidParameter("chsh needs shots".into()));
                }
            }
            ScenarioKind::LightshiftSweep { ramp_times_us, target_square_error } => {
                if ramp_times_us.is_empty() {
                    return Err(Error::InvalidParameter("empty ramp grid".into()));
                }
                if !(0.0..0.5).contains(target_square_error) {
                    return Err(Error::InvalidParameter(
                        "target square error must be in [0, 0.5)".into(),
                    ));
                }
            }
            ScenarioKind::CalibrationDrift { detection_trials, reorder_trials, .. } => {
                if *detection_trials == 0 || *reorder_trials == 0 {
                    return Err(Error::InvalidParameter("trial counts must be > 0".into()));
                }
            }
            ScenarioKind::ModeGeometry {} => {}
        }
        Ok(())
    }
}

/// Physics objects derived from a [`PhysicsConfig`].
#[derive(Debug, Clone)]
pub struct ResolvedPhysics {
    pub crystal: TwoIonCrystal,
    pub beam: BeamGeometry,
    pub in_phase: MotionalMode,
    pub out_of_phase: MotionalMode,
    pub separation_m: f64,
    pub alignment: StandingWaveAlignment,
    pub drive: DriveConfig,
    pub envelope: Envelope,
    pub nbar: f64,
}

/// Resolve the physics config: solve the trap, populate Lamb-Dicke
/// parameters, fix the alignment, derive δ, and calibrate couplings.
/// The input config is updated in place with every derived value.
pub fn resolve_physics(config: &mut PhysicsConfig) -> Result<ResolvedPhysics> {
    if let Some(target) = config.target_inphase_hz {
        config.crystal.f_axial_reference_hz =
            reference_frequency_for_inphase(&config.crystal, target)?;
    }
    let (mut in_phase, mut out_of_phase) = solve_axial_modes(&config.crystal)?;
    lamb_dicke(&mut in_phase, &config.beam, &config.crystal)?;
    lamb_dicke(&mut out_of_phase, &config.beam, &config.crystal)?;
    let separation_m = equilibrium_separation(&config.crystal)?;
    let natural = standing_wave_alignment(separation_m, &config.beam)?;
    let alignment = match config.alignment_mode {
        AlignmentMode::HalfInteger => StandingWaveAlignment {
            force_sign: -1.0,
            residual_phase: 0.0,
        },
        AlignmentMode::Integer => StandingWaveAlignment {
            force_sign: 1.0,
            residual_phase: 0.0,
        },
        AlignmentMode::FromSeparation => natural,
    };

    let difference = config
        .drive
        .difference_frequency_hz
        .unwrap_or(in_phase.frequency_hz + config.drive.gate_detuning_hz);
    config.drive.difference_frequency_hz = Some(difference);

    let mut drive = DriveConfig {
        raman_detuning_hz: config.drive.raman_detuning_hz,
        difference_frequency_hz: difference,
        gate_detuning_hz: config.drive.gate_detuning_hz,
        couplings: config.drive.couplings,
        optical_phase_rad: config.drive.optical_phase_rad,
        light_shift_a_hz: config.drive.light_shift_a_hz,
        light_shift_b_hz: config.drive.light_shift_b_hz,
    };
    drive.validate()?;
    if let Some(phi) = config.drive.calibrate_phi_rad {
        drive = calibrate_couplings(&drive, &config.envelope, &in_phase, &alignment, phi)?;
        config.drive.couplings = drive.couplings;
    }

    Ok(ResolvedPhysics {
        crystal: config.crystal.clone(),
        beam: config.beam.clone(),
        in_phase,
        out_of_phase,
        separation_m,
        alignment,
        drive,
        envelope: config.envelope,
        nbar: config.nbar,
    })
}
