//! Pulse programs over a two-qubit density matrix: state preparation, Ramsey
//! π/2 pairs, gate halves, spin-echo π pulses, and analysis rotations, with
//! per-qubit local-oscillator phase tracking.
//!
//! States are stored in each qubit's local-oscillator frame; a qubit detuned
//! from its LO accumulates Z phase between (and optionally during) pulses.
//! The gate drive's own phase is tracked separately at the difference
//! frequency δ and only matters for the light-shift error channel.

use ndarray::{array, Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::crystal::{MotionalMode, StandingWaveAlignment};
use crate::dynamics::{
    gate_half_channel, light_shift_accumulated_phase, DriveConfig, Envelope, GateChannel,
};
use crate::error::{Error, Result};
use crate::linalg::{dagger, eigh, fidelity_to_pure, hermiticity_defect, kron, trace};

/// Which qubit a single-qubit operation addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitId {
    A,
    B,
}

/// One primitive of a pulse program.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PulseOp {
    /// Optically pump both qubits to |↓↓⟩ (with configured leakage).
    Prepare,
    /// R(θ, φ) on one qubit. Duration only matters in finite-duration mode.
    Rotate {
        target: QubitId,
        theta_rad: f64,
        phase_rad: f64,
        #[serde(default)]
        duration_s: f64,
    },
    /// One half of the entangling gate, using the configured drive.
    GateHalf,
    /// Free evolution.
    Wait { duration_s: f64 },
    /// End of program; only valid as the final op.
    Measure,
}

/// Single-qubit rotation R(θ, φ) = cos(θ/2)·I − i·sin(θ/2)·(cos φ·X + sin φ·Y).
pub fn rotation_unitary(theta_rad: f64, phase_rad: f64) -> Array2<C64> {
    let c = (theta_rad / 2.0).cos();
    let s = (theta_rad / 2.0).sin();
    let off = -C64::i() * s;
    array![
        [C64::new(c, 0.0), off * C64::from_polar(1.0, -phase_rad)],
        [off * C64::from_polar(1.0, phase_rad), C64::new(c, 0.0)],
    ]
}

/// Embed a single-qubit unitary on the chosen qubit of the pair.
pub fn embed_qubit(target: QubitId, u: &Array2<C64>) -> Array2<C64> {
    let eye: Array2<C64> = Array2::eye(2);
    match target {
        QubitId::A => kron(u, &eye),
        QubitId::B => kron(&eye, u),
    }
}

/// Two-qubit state as a 4×4 density matrix, basis order (↓↓, ↓↑, ↑↓, ↑↑).
#[derive(Debug, Clone)]
pub struct TwoQubitState {
    rho: Array2<C64>,
}

impl TwoQubitState {
    /// |↓↓⟩⟨↓↓|.
    pub fn ground() -> Self {
        let mut rho = Array2::zeros((4, 4));
        rho[(0, 0)] = C64::new(1.0, 0.0);
        Self { rho }
    }

    pub fn from_pure(psi: &Array1<C64>) -> Self {
        let mut rho = Array2::zeros((4, 4));
        for i in 0..4 {
            for j in 0..4 {
                rho[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        Self { rho }
    }

    pub fn from_density(rho: Array2<C64>) -> Result<Self> {
        let state = Self { rho };
        state.validate()?;
        Ok(state)
    }

    /// The Bell state (|↓↓⟩ + |↑↑⟩)/√2 as a vector.
    pub fn bell_phi_plus() -> Array1<C64> {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        array![C64::new(r, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(r, 0.0)]
    }

    pub fn density(&self) -> &Array2<C64> {
        &self.rho
    }

    pub fn into_density(self) -> Array2<C64> {
        self.rho
    }

    /// Diagonal populations in basis order.
    pub fn populations(&self) -> [f64; 4] {
        let mut p = [0.0; 4];
        for (i, pi) in p.iter_mut().enumerate() {
            *pi = self.rho[(i, i)].re;
        }
        p
    }

    pub fn fidelity_to(&self, psi: &Array1<C64>) -> f64 {
        fidelity_to_pure(&self.rho, psi)
    }

    pub fn apply_unitary(&mut self, u: &Array2<C64>) {
        self.rho = u.dot(&self.rho).dot(&dagger(u));
    }

    /// Z phases e^{iφ} on the |↑⟩ level of each qubit.
    pub fn apply_z_phases(&mut self, phi_a: f64, phi_b: f64) {
        let phases = [
            C64::new(1.0, 0.0),
            C64::from_polar(1.0, phi_b),
            C64::from_polar(1.0, phi_a),
            C64::from_polar(1.0, phi_a + phi_b),
        ];
        for i in 0..4 {
            for j in 0..4 {
                self.rho[(i, j)] *= phases[i] * phases[j].conj();
            }
        }
    }

    /// Depolarizing channel with probability q on the chosen qubit.
    pub fn depolarize(&mut self, target: QubitId, q: f64) {
        let paulis = [
            array![
                [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
                [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
            ],
            array![
                [C64::new(0.0, 0.0), C64::new(0.0, -1.0)],
                [C64::new(0.0, 1.0), C64::new(0.0, 0.0)]
            ],
            array![
                [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
                [C64::new(0.0, 0.0), C64::new(-1.0, 0.0)]
            ],
        ];
        let mut mixed: Array2<C64> = Array2::zeros((4, 4));
        for p in &paulis {
            let u = embed_qubit(target, p);
            mixed += &u.dot(&self.rho).dot(&dagger(&u));
        }
        self.rho = self.rho.mapv(|z| z * (1.0 - q)) + mixed.mapv(|z| z * (q / 3.0));
    }

    /// Structural invariants: Hermitian and unit trace to 1e-12, eigenvalues
    /// above -1e-9.
    pub fn validate(&self) -> Result<()> {
        if hermiticity_defect(&self.rho) > 1e-12 {
            return Err(Error::InvalidParameter("density matrix not Hermitian".into()));
        }
        let tr = trace(&self.rho);
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::InvalidParameter("density matrix trace != 1".into()));
        }
        let (vals, _) = eigh(&self.rho);
        if vals.iter().any(|&v| v < -1e-9) {
            return Err(Error::InvalidParameter("density matrix not positive".into()));
        }
        Ok(())
    }
}

/// Everything a GateHalf op needs.
#[derive(Debug, Clone)]
pub struct GateContext {
    pub drive: DriveConfig,
    pub envelope: Envelope,
    channel: GateChannel,
}

impl GateContext {
    pub fn new(
        drive: DriveConfig,
        envelope: Envelope,
        mode: &MotionalMode,
        alignment: &StandingWaveAlignment,
        nbar: f64,
    ) -> Result<Self> {
        let channel = gate_half_channel(&drive, &envelope, mode, alignment, nbar)?;
        Ok(Self { drive, envelope, channel })
    }

    pub fn channel(&self) -> &GateChannel {
        &self.channel
    }
}

/// Environment of a sequence run (everything that is not the program).
#[derive(Debug, Clone, Default)]
pub struct SequenceConfig {
    /// Local-oscillator frequencies (Hz); pure bookkeeping carried by the
    /// phase tracker, since the state lives in the LO frames.
    pub lo_frequency_a_hz: f64,
    pub lo_frequency_b_hz: f64,
    /// Actual-minus-LO frequency of each qubit (Hz).
    pub qubit_detuning_a_hz: f64,
    pub qubit_detuning_b_hz: f64,
    /// Accumulate detuning phase across rotation durations too.
    pub finite_duration_rotations: bool,
    /// Per-qubit preparation leakage probability.
    pub prep_error_a: f64,
    pub prep_error_b: f64,
    /// Offset added to the gate drive phase for this run (the uncontrolled
    /// optical phase).
    pub gate_drive_phase_offset_rad: f64,
}

/// Per-qubit LO bookkeeping plus the gate-drive phase.
#[derive(Debug, Clone)]
pub struct PhaseTracker {
    pub lo_frequency_a_hz: f64,
    pub lo_frequency_b_hz: f64,
    pub accumulated_phase_a_rad: f64,
    pub accumulated_phase_b_rad: f64,
    pub gate_drive_phase_rad: f64,
    pub elapsed_s: f64,
}

impl PhaseTracker {
    pub fn new(lo_frequency_a_hz: f64, lo_frequency_b_hz: f64) -> Self {
        Self {
            lo_frequency_a_hz,
            lo_frequency_b_hz,
            accumulated_phase_a_rad: 0.0,
            accumulated_phase_b_rad: 0.0,
            gate_drive_phase_rad: 0.0,
            elapsed_s: 0.0,
        }
    }

    /// Advance all tracked phases by dt.
    pub fn advance(&mut self, dt: f64, gate_difference_hz: f64) {
        let tau = std::f64::consts::TAU;
        self.accumulated_phase_a_rad += tau * self.lo_frequency_a_hz * dt;
        self.accumulated_phase_b_rad += tau * self.lo_frequency_b_hz * dt;
        self.gate_drive_phase_rad += tau * gate_difference_hz * dt;
        self.elapsed_s += dt;
    }
}

/// Execute a pulse program.
///
/// The program must start with `Prepare`; `Measure` may only appear as the
/// final op; `GateHalf` requires a gate context.
pub fn run_sequence(
    program: &[PulseOp],
    gate: Option<&GateContext>,
    config: &SequenceConfig,
) -> Result<TwoQubitState> {
    if !matches!(program.first(), Some(PulseOp::Prepare)) {
        return Err(Error::InvalidProgram("program must start with Prepare".into()));
    }
    let mut state = TwoQubitState::ground();
    let mut tracker = PhaseTracker::new(config.lo_frequency_a_hz, config.lo_frequency_b_hz);
    let delta_hz = gate.map_or(0.0, |g| g.drive.difference_frequency_hz);
    let tau = std::f64::consts::TAU;

    for (k, op) in program.iter().enumerate() {
        match op {
            PulseOp::Prepare => {
                if k != 0 {
                    return Err(Error::InvalidProgram("Prepare only allowed first".into()));
                }
                state = TwoQubitState::ground();
                for (target, p) in
                    [(QubitId::A, config.prep_error_a), (QubitId::B, config.prep_error_b)]
                {
                    if p > 0.0 {
                        // leakage to the orthogonal state: a classical flip
                        let x = rotation_unitary(std::f64::consts::PI, 0.0);
                        let u = embed_qubit(target, &x);
                        let flipped = u.dot(state.density()).dot(&dagger(&u));
                        let rho = state.density().mapv(|z| z * (1.0 - p))
                            + flipped.mapv(|z| z * p);
                        state = TwoQubitState { rho };
                    }
                }
            }
            PulseOp::Rotate { target, theta_rad, phase_rad, duration_s } => {
                if config.finite_duration_rotations && *duration_s > 0.0 {
                    let dphi_a = tau * config.qubit_detuning_a_hz * duration_s;
                    let dphi_b = tau * config.qubit_detuning_b_hz * duration_s;
                    state.apply_z_phases(dphi_a, dphi_b);
                    tracker.advance(*duration_s, delta_hz);
                }
                let u = embed_qubit(*target, &rotation_unitary(*theta_rad, *phase_rad));
                state.apply_unitary(&u);
            }
            PulseOp::GateHalf => {
                let ctx = gate.ok_or_else(|| {
                    Error::InvalidProgram("GateHalf without a configured drive".into())
                })?;
                let duration = ctx.envelope.duration_s;
                // detuning phase commutes with the diagonal channel, so the
                // full-interval phase can be applied alongside it
                let dphi_a = tau * config.qubit_detuning_a_hz * duration;
                let dphi_b = tau * config.qubit_detuning_b_hz * duration;
                let rho = ctx.channel.apply(state.density());
                state = TwoQubitState { rho };
                state.apply_z_phases(dphi_a, dphi_b);
                // oscillating light shift, referenced to the running drive
                // phase plus the run's uncontrolled offset
                let phi0 = ctx.drive.optical_phase_rad
                    + config.gate_drive_phase_offset_rad
                    + tracker.gate_drive_phase_rad;
                let theta_a = light_shift_accumulated_phase(
                    ctx.drive.light_shift_a_hz,
                    &ctx.drive,
                    &ctx.envelope,
                    phi0,
                );
                let theta_b = light_shift_accumulated_phase(
                    ctx.drive.light_shift_b_hz,
                    &ctx.drive,
                    &ctx.envelope,
                    phi0,
                );
                if theta_a != 0.0 || theta_b != 0.0 {
                    state.apply_z_phases(theta_a, theta_b);
                }
                tracker.advance(duration, delta_hz);
            }
            PulseOp::Wait { duration_s } => {
                let dphi_a = tau * config.qubit_detuning_a_hz * duration_s;
                let dphi_b = tau * config.qubit_detuning_b_hz * duration_s;
                state.apply_z_phases(dphi_a, dphi_b);
                tracker.advance(*duration_s, delta_hz);
            }
            PulseOp::Measure => {
                if k + 1 != program.len() {
                    return Err(Error::InvalidProgram(
                        "Measure only allowed as the final op".into(),
                    ));
                }
            }
        }
    }
    Ok(state)
}

/// Phases of the Bell-preparation Ramsey pulses, fixed once by requiring
/// that the ideal sequence lands exactly on (|↓↓⟩ + |↑↑⟩)/√2.
///
/// Any choice with χ_a + χ_b = -π/2 for the opening pair and closing phases
/// (π - χ_a, χ_a - π/2) works; the symmetric member is used. The echo π
/// pulses stay at phase 0.
pub const BELL_OPENING_PHASE_A: f64 = -0.25 * std::f64::consts::PI;
pub const BELL_OPENING_PHASE_B: f64 = -0.25 * std::f64::consts::PI;
pub const BELL_CLOSING_PHASE_A: f64 = -0.75 * std::f64::consts::PI;
pub const BELL_CLOSING_PHASE_B: f64 = -0.75 * std::f64::consts::PI;

/// Same calibration for the echo-free variant (both halves back to back, no
/// π pulses), used by drift studies: χ_a + χ_b = +π/2, closing (χ_a, χ_b).
pub const BELL_NOECHO_OPENING_PHASE_A: f64 = 0.25 * std::f64::consts::PI;
pub const BELL_NOECHO_OPENING_PHASE_B: f64 = 0.25 * std::f64::consts::PI;
pub const BELL_NOECHO_CLOSING_PHASE_A: f64 = 0.25 * std::f64::consts::PI;
pub const BELL_NOECHO_CLOSING_PHASE_B: f64 = 0.25 * std::f64::consts::PI;

fn half_pi(target: QubitId, phase: f64) -> PulseOp {
    PulseOp::Rotate {
        target,
        theta_rad: std::f64::consts::FRAC_PI_2,
        phase_rad: phase,
        duration_s: 0.0,
    }
}

fn pi_pulse(target: QubitId, phase: f64) -> PulseOp {
    PulseOp::Rotate {
        target,
        theta_rad: std::f64::consts::PI,
        phase_rad: phase,
        duration_s: 0.0,
    }
}

/// The Bell-state preparation program: π/2 pair, gate half, echo π pair,
/// gate half, closing π/2 pair.
pub fn bell_program() -> Vec<PulseOp> {
    vec![
        PulseOp::Prepare,
        half_pi(QubitId::A, BELL_OPENING_PHASE_A),
        half_pi(QubitId::B, BELL_OPENING_PHASE_B),
        PulseOp::GateHalf,
        pi_pulse(QubitId::A, 0.0),
        pi_pulse(QubitId::B, 0.0),
        PulseOp::GateHalf,
        half_pi(QubitId::A, BELL_CLOSING_PHASE_A),
        half_pi(QubitId::B, BELL_CLOSING_PHASE_B),
    ]
}

/// Echo-free variant: both gate halves back to back, no π pulses.
pub fn bell_program_without_echo() -> Vec<PulseOp> {
    vec![
        PulseOp::Prepare,
        half_pi(QubitId::A, BELL_NOECHO_OPENING_PHASE_A),
        half_pi(QubitId::B, BELL_NOECHO_OPENING_PHASE_B),
        PulseOp::GateHalf,
        PulseOp::GateHalf,
        half_pi(QubitId::A, BELL_NOECHO_CLOSING_PHASE_A),
        half_pi(QubitId::B, BELL_NOECHO_CLOSING_PHASE_B),
    ]
}

/// Bell preparation followed by the analysis π/2 pair at phase φ (the parity
/// scan pulses) and a final Measure.
pub fn bell_program_with_analysis(phi_rad: f64) -> Vec<PulseOp> {
    let mut program = bell_program();
    program.push(half_pi(QubitId::A, phi_rad));
    program.push(half_pi(QubitId::B, phi_rad));
    program.push(PulseOp::Measure);
    program
}

/// Bell fidelity spread of a program under a set of gate-drive phase
/// offsets: (min, max) fidelity over the offsets.
pub fn gate_phase_independence_check(
    program: &[PulseOp],
    gate: &GateContext,
    config: &SequenceConfig,
    offsets_rad: &[f64],
) -> Result<(f64, f64)> {
    let bell = TwoQubitState::bell_phi_plus();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &off in offsets_rad {
        let mut c = config.clone();
        c.gate_drive_phase_offset_rad = off;
        let state = run_sequence(program, Some(gate), &c)?;
        let f = state.fidelity_to(&bell);
        lo = lo.min(f);
        hi = hi.max(f);
    }
    Ok((lo, hi))
}
