//! Two-ion crystal geometry: equilibrium separation, axial normal modes,
//! Lamb-Dicke parameters, and the standing-wave force alignment.
//!
//! The trap is parameterized by the single-ion axial frequency of species A
//! in the same potential; everything else (mixed-crystal mode frequencies,
//! separation, lattice alignment) is derived from it.

use ndarray::{array, Array2};
use serde::{Deserialize, Serialize};

use crate::constants::{self, AMU, HBAR};
use crate::error::{Error, Result};
use crate::linalg::eigh_real;

/// One ion species and its qubit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IonSpecies {
    /// Ion mass in atomic mass units.
    pub mass_amu: f64,
    /// Qubit splitting (Hz).
    pub qubit_splitting_hz: f64,
    pub label: String,
}

impl IonSpecies {
    pub fn new(mass_amu: f64, qubit_splitting_hz: f64, label: &str) -> Self {
        Self { mass_amu, qubit_splitting_hz, label: label.to_string() }
    }

    /// Mass in kg.
    pub fn mass_kg(&self) -> f64 {
        self.mass_amu * AMU
    }

    pub fn validate(&self) -> Result<()> {
        if self.mass_amu <= 0.0 {
            return Err(Error::InvalidParameter("ion mass must be > 0".into()));
        }
        if self.qubit_splitting_hz <= 0.0 {
            return Err(Error::InvalidParameter("qubit splitting must be > 0".into()));
        }
        Ok(())
    }
}

/// Spatial ordering of the two species along the trap axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IonOrder {
    /// Species A at the first site.
    AB,
    /// Species B at the first site.
    BA,
}

impl IonOrder {
    pub fn flipped(self) -> Self {
        match self {
            IonOrder::AB => IonOrder::BA,
            IonOrder::BA => IonOrder::AB,
        }
    }
}

/// A two-ion crystal in a common harmonic axial potential.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoIonCrystal {
    pub species_a: IonSpecies,
    pub species_b: IonSpecies,
    /// Single-ion axial frequency of species A in this trap (Hz).
    pub f_axial_reference_hz: f64,
    pub order: IonOrder,
}

impl TwoIonCrystal {
    pub fn validate(&self) -> Result<()> {
        self.species_a.validate()?;
        self.species_b.validate()?;
        if self.f_axial_reference_hz <= 0.0 {
            return Err(Error::InvalidParameter(
                "reference axial frequency must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// Axial spring constant k = m_a (2π f_ref)² (N/m), common to both ions.
    pub fn spring_constant(&self) -> f64 {
        let omega = 2.0 * std::f64::consts::PI * self.f_axial_reference_hz;
        self.species_a.mass_kg() * omega * omega
    }
}

/// One axial normal mode of the crystal.
///
/// The eigenvector (b_a, b_b) lives in mass-weighted coordinates and is
/// normalized so that b_a² + b_b² = 1. Lamb-Dicke parameters are filled in by
/// [`lamb_dicke`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MotionalMode {
    pub frequency_hz: f64,
    pub b_a: f64,
    pub b_b: f64,
    pub eta_a: f64,
    pub eta_b: f64,
}

/// Raman beam pair geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeamGeometry {
    /// Laser wavelength (m).
    pub wavelength_m: f64,
    /// Projection factor of the two-beam difference k-vector on the trap
    /// axis; √2 for perpendicular beams whose lattice k lies along the axis.
    pub half_angle_factor: f64,
}

impl BeamGeometry {
    /// Perpendicular beams at 397 nm, lattice k-vector along the trap axis.
    pub fn perpendicular_397() -> Self {
        Self { wavelength_m: 397e-9, half_angle_factor: std::f64::consts::SQRT_2 }
    }

    /// Effective lattice wavevector |Δk| (rad/m).
    pub fn k_effective(&self) -> f64 {
        self.half_angle_factor * 2.0 * std::f64::consts::PI / self.wavelength_m
    }

    /// Lattice period 2π/|Δk| (m).
    pub fn lattice_period(&self) -> f64 {
        self.wavelength_m / self.half_angle_factor
    }

    pub fn validate(&self) -> Result<()> {
        if self.wavelength_m <= 0.0 {
            return Err(Error::InvalidParameter("wavelength must be > 0".into()));
        }
        if !(self.half_angle_factor > 0.0 && self.half_angle_factor <= 2.0) {
            return Err(Error::InvalidParameter(
                "half-angle factor must be in (0, 2]".into(),
            ));
        }
        Ok(())
    }
}

/// Masses at the two crystal sites for the given ordering.
fn site_masses(crystal: &TwoIonCrystal) -> (f64, f64) {
    let ma = crystal.species_a.mass_kg();
    let mb = crystal.species_b.mass_kg();
    match crystal.order {
        IonOrder::AB => (ma, mb),
        IonOrder::BA => (mb, ma),
    }
}

/// Solve the axial normal modes of the crystal.
///
/// Linearizing trap + Coulomb forces about equilibrium gives a position-space
/// Hessian [[2k, -k], [-k, 2k]] (the Coulomb curvature at equilibrium equals
/// the trap spring constant k for equal charges). The mass-weighted 2×2
/// eigenproblem is solved numerically; modes are returned sorted ascending in
/// frequency (in-phase first), with eigenvector signs fixed so b_a > 0.
pub fn solve_axial_modes(crystal: &TwoIonCrystal) -> Result<(MotionalMode, MotionalMode)> {
    crystal.validate()?;
    let k = crystal.spring_constant();
    let (m1, m2) = site_masses(crystal);
    let hessian: Array2<f64> = array![
        [2.0 * k / m1, -k / (m1 * m2).sqrt()],
        [-k / (m1 * m2).sqrt(), 2.0 * k / m2],
    ];
    let (omega_sq, vecs) = eigh_real(&hessian);

    let mode = |col: usize| {
        let f = omega_sq[col].sqrt() / (2.0 * std::f64::consts::PI);
        let (b1, b2) = (vecs[(0, col)], vecs[(1, col)]);
        let (b_a, b_b) = match crystal.order {
            IonOrder::AB => (b1, b2),
            IonOrder::BA => (b2, b1),
        };
        let sign = if b_a < 0.0 { -1.0 } else { 1.0 };
        MotionalMode {
            frequency_hz: f,
            b_a: sign * b_a,
            b_b: sign * b_b,
            eta_a: 0.0,
            eta_b: 0.0,
        }
    };
    Ok((mode(0), mode(1)))
}

/// Equilibrium ion separation from Coulomb-trap force balance (m).
///
/// d³ = e²/(2πε₀k); independent of ion order and masses (equal charges see
/// the same axial spring constant).
pub fn equilibrium_separation(crystal: &TwoIonCrystal) -> Result<f64> {
    crystal.validate()?;
    let k = crystal.spring_constant();
    Ok((2.0 * constants::coulomb_e2() / k).cbrt())
}

/// Lamb-Dicke parameters η_j = k_eff · b_j · √(ħ / 2 m_j ω) for both ions,
/// populating the mode's fields.
pub fn lamb_dicke(
    mode: &mut MotionalMode,
    geom: &BeamGeometry,
    crystal: &TwoIonCrystal,
) -> Result<(f64, f64)> {
    geom.validate()?;
    crystal.validate()?;
    if mode.frequency_hz <= 0.0 {
        return Err(Error::InvalidParameter("mode frequency must be > 0".into()));
    }
    let omega = 2.0 * std::f64::consts::PI * mode.frequency_hz;
    let keff = geom.k_effective();
    let z0 = |m_kg: f64| (HBAR / (2.0 * m_kg * omega)).sqrt();
    mode.eta_a = (keff * mode.b_a * z0(crystal.species_a.mass_kg())).abs();
    mode.eta_b = (keff * mode.b_b * z0(crystal.species_b.mass_kg())).abs();
    Ok((mode.eta_a, mode.eta_b))
}

/// Relative force sign and phase mismatch of the two ions in the lattice.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StandingWaveAlignment {
    /// -1 when the separation sits at a half-integer number of lattice
    /// periods (forces anti-aligned for identical internal states), +1 at an
    /// integer number.
    pub force_sign: f64,
    /// Phase distance (rad) from the nearest integer/half-integer alignment
    /// point, in [0, π/2].
    pub residual_phase: f64,
}

/// Classify the ion separation against the lattice period.
pub fn standing_wave_alignment(
    separation_m: f64,
    geom: &BeamGeometry,
) -> Result<StandingWaveAlignment> {
    geom.validate()?;
    if separation_m <= 0.0 {
        return Err(Error::InvalidParameter("separation must be > 0".into()));
    }
    let periods = separation_m / geom.lattice_period();
    let frac = periods - periods.floor();
    let dist_half = (frac - 0.5).abs();
    let dist_int = frac.min(1.0 - frac);
    // ties go to the anti-aligned classification
    let (sign, dist) = if dist_half <= dist_int {
        (-1.0, dist_half)
    } else {
        (1.0, dist_int)
    };
    Ok(StandingWaveAlignment {
        force_sign: sign,
        residual_phase: 2.0 * std::f64::consts::PI * dist,
    })
}

/// Reference (single-ion species-A) axial frequency that puts the crystal's
/// in-phase mode at `target_inphase_hz`.
///
/// All mode frequencies scale linearly with the reference frequency, so the
/// root is found exactly from one probe solve.
pub fn reference_frequency_for_inphase(
    crystal: &TwoIonCrystal,
    target_inphase_hz: f64,
) -> Result<f64> {
    if target_inphase_hz <= 0.0 {
        return Err(Error::InvalidParameter("target frequency must be > 0".into()));
    }
    let mut probe = crystal.clone();
    probe.f_axial_reference_hz = 1.0e6;
    let (in_phase, _) = solve_axial_modes(&probe)?;
    Ok(target_inphase_hz / in_phase.frequency_hz * 1.0e6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn ca40() -> IonSpecies {
        IonSpecies::new(40.0, 5.4e6, "40Ca+")
    }

    fn ca43() -> IonSpecies {
        IonSpecies::new(43.0, 3.2e9, "43Ca+")
    }

    fn equal_mass_crystal(f_ref: f64) -> TwoIonCrystal {
        TwoIonCrystal {
            species_a: ca40(),
            species_b: ca40(),
            f_axial_reference_hz: f_ref,
            order: IonOrder::AB,
        }
    }

    fn reference_crystal() -> TwoIonCrystal {
        let mut crystal = TwoIonCrystal {
            species_a: ca40(),
            species_b: ca43(),
            f_axial_reference_hz: 2.0e6,
            order: IonOrder::AB,
        };
        crystal.f_axial_reference_hz =
            reference_frequency_for_inphase(&crystal, 2.0e6).unwrap();
        crystal
    }

    #[test]
    fn equal_masses_give_symmetric_modes() {
        let crystal = equal_mass_crystal(2.0e6);
        let (ip, op) = solve_axial_modes(&crystal).unwrap();
        assert_relative_eq!(ip.frequency_hz, 2.0e6, max_relative = 1e-12);
        assert_relative_eq!(op.frequency_hz, 2.0e6 * 3f64.sqrt(), max_relative = 1e-12);
        assert_abs_diff_eq!(ip.b_a, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(ip.b_b, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn mixed_crystal_inphase_eigenvector_weights_heavy_ion() {
        let crystal = reference_crystal();
        let (ip, _) = solve_axial_modes(&crystal).unwrap();
        assert_relative_eq!(ip.frequency_hz, 2.0e6, max_relative = 1e-9);
        assert!(ip.b_a > 0.0 && ip.b_b > 0.0);
        assert!(ip.b_b.abs() > ip.b_a.abs(), "heavier ion carries more weight");
        // eigen-residual against the mass-weighted Hessian, as an
        // implementation-independent check of the solve
        let k = crystal.spring_constant();
        let (m1, m2) = (crystal.species_a.mass_kg(), crystal.species_b.mass_kg());
        let omega_sq = (2.0 * std::f64::consts::PI * ip.frequency_hz).powi(2);
        let r1 = (2.0 * k / m1) * ip.b_a - k / (m1 * m2).sqrt() * ip.b_b - omega_sq * ip.b_a;
        let r2 = -k / (m1 * m2).sqrt() * ip.b_a + (2.0 * k / m2) * ip.b_b - omega_sq * ip.b_b;
        assert_abs_diff_eq!(r1 / omega_sq, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r2 / omega_sq, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn order_swap_relabels_eigenvector() {
        let mut crystal = reference_crystal();
        let (ip_ab, op_ab) = solve_axial_modes(&crystal).unwrap();
        crystal.order = IonOrder::BA;
        let (ip_ba, op_ba) = solve_axial_modes(&crystal).unwrap();
        assert_relative_eq!(ip_ab.frequency_hz, ip_ba.frequency_hz, max_relative = 1e-12);
        assert_relative_eq!(op_ab.frequency_hz, op_ba.frequency_hz, max_relative = 1e-12);
        assert_abs_diff_eq!(ip_ab.b_a, ip_ba.b_a, epsilon = 1e-12);
        assert_abs_diff_eq!(ip_ab.b_b, ip_ba.b_b, epsilon = 1e-12);
    }

    #[test]
    fn eigenvectors_mass_weighted_orthonormal() {
        for ratio in [0.5, 0.8, 1.0, 43.0 / 40.0, 1.5, 2.0] {
            let crystal = TwoIonCrystal {
                species_a: ca40(),
                species_b: IonSpecies::new(40.0 * ratio, 1.0e9, "X"),
                f_axial_reference_hz: 2.0e6,
                order: IonOrder::AB,
            };
            let (ip, op) = solve_axial_modes(&crystal).unwrap();
            assert_abs_diff_eq!(ip.b_a * ip.b_a + ip.b_b * ip.b_b, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(op.b_a * op.b_a + op.b_b * op.b_b, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(ip.b_a * op.b_a + ip.b_b * op.b_b, 0.0, epsilon = 1e-12);
            assert!(ip.frequency_hz < op.frequency_hz);
        }
    }

    #[test]
    fn separation_matches_reported_geometry() {
        // equal 40Ca ions at 2.00 MHz sit 3.5 μm apart
        let crystal = equal_mass_crystal(2.0e6);
        let d = equilibrium_separation(&crystal).unwrap();
        assert!((d - 3.5e-6).abs() / 3.5e-6 < 0.02, "d = {d:.3e}");
        // mixed crystal at the trap setting that gives f_z = 2.00 MHz
        let d_mixed = equilibrium_separation(&reference_crystal()).unwrap();
        assert!((d_mixed - 3.5e-6).abs() / 3.5e-6 < 0.02, "d = {d_mixed:.3e}");
    }

    #[test]
    fn separation_scales_as_frequency_to_minus_two_thirds() {
        let d1 = equilibrium_separation(&equal_mass_crystal(2.0e6)).unwrap();
        let d2 = equilibrium_separation(&equal_mass_crystal(2.0e6 * 2f64.powf(1.5))).unwrap();
        assert_relative_eq!(d2, d1 / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn lamb_dicke_reproduces_reported_values() {
        let crystal = reference_crystal();
        let geom = BeamGeometry::perpendicular_397();
        let (mut ip, _) = solve_axial_modes(&crystal).unwrap();
        let (eta_a, eta_b) = lamb_dicke(&mut ip, &geom, &crystal).unwrap();
        assert!((eta_a - 0.121).abs() < 0.005, "eta_40 = {eta_a}");
        assert!((eta_b - 0.126).abs() < 0.005, "eta_43 = {eta_b}");
    }

    #[test]
    fn lamb_dicke_symmetry_and_scaling() {
        let crystal = equal_mass_crystal(2.0e6);
        let geom = BeamGeometry::perpendicular_397();
        let (mut ip, _) = solve_axial_modes(&crystal).unwrap();
        let (eta_a, eta_b) = lamb_dicke(&mut ip, &geom, &crystal).unwrap();
        assert_relative_eq!(eta_a, eta_b, max_relative = 1e-12);

        // doubling the frequency at fixed eigenvector scales η by 1/√2
        let mut doubled = ip.clone();
        doubled.frequency_hz *= 2.0;
        let (eta_a2, _) = lamb_dicke(&mut doubled, &geom, &crystal).unwrap();
        assert_relative_eq!(eta_a2, eta_a / 2f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn standing_wave_alignment_cases() {
        let geom = BeamGeometry::perpendicular_397();
        let period = geom.lattice_period();

        let half = standing_wave_alignment(12.5 * period, &geom).unwrap();
        assert_eq!(half.force_sign, -1.0);
        assert_abs_diff_eq!(half.residual_phase, 0.0, epsilon = 1e-9);

        let full = standing_wave_alignment(12.0 * period, &geom).unwrap();
        assert_eq!(full.force_sign, 1.0);
        assert_abs_diff_eq!(full.residual_phase, 0.0, epsilon = 1e-9);

        let quarter = standing_wave_alignment(12.25 * period, &geom).unwrap();
        assert_abs_diff_eq!(
            quarter.residual_phase,
            std::f64::consts::FRAC_PI_2,
            epsilon = 1e-9
        );
    }

    #[test]
    fn separation_sits_near_half_integer_lattice_point() {
        let crystal = reference_crystal();
        let geom = BeamGeometry::perpendicular_397();
        let d = equilibrium_separation(&crystal).unwrap();
        let periods = d / geom.lattice_period();
        assert!((periods - 12.5).abs() / 12.5 < 0.01, "periods = {periods}");
    }
}
