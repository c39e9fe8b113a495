//! Analysis chain from measured counts: readout-error inversion, parity
//! fringe fitting, Bell-fidelity estimation, maximum-likelihood tomography
//! ([`tomography`]), and CHSH statistics ([`chsh`]).
//!
//! Two readout-handling paths exist, as in the experiment: corrected
//! (populations, parity, tomography) and uncorrected (the CHSH test, which
//! must not assume fair sampling).

pub mod chsh;
pub mod tomography;

use crate::error::{Error, Result};
use crate::linalg::kron_real;
use crate::noise::{ConfusionMatrix, ShotSet};

/// Parse shot sets from CSV text with columns `n_dd,n_du,n_ud,n_uu`
/// (selected by name from the header; extra columns are ignored).
pub fn shot_sets_from_csv(text: &str) -> Result<Vec<ShotSet>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidParameter("empty CSV".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let mut idx = [0usize; 4];
    for (k, name) in ["n_dd", "n_du", "n_ud", "n_uu"].iter().enumerate() {
        idx[k] = columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidParameter(format!("CSV missing column {name}")))?;
    }
    let mut out = Vec::new();
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let mut counts = [0u64; 4];
        for (k, &col) in idx.iter().enumerate() {
            let field = fields.get(col).ok_or_else(|| {
                Error::InvalidParameter(format!("CSV row {row} too short"))
            })?;
            counts[k] = field.parse().map_err(|e| {
                Error::InvalidParameter(format!("CSV row {row}, column {col}: {e}"))
            })?;
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidParameter(format!("CSV row {row} has zero counts")));
        }
        out.push(ShotSet { counts, total, seed: 0 });
    }
    Ok(out)
}

/// Invert the readout confusion on measured frequencies.
///
/// Applies (C_a ⊗ C_b)⁻¹; entries may come out slightly negative
/// (quasi-probabilities from statistical noise) and are deliberately not
/// clipped. The result is renormalized to sum exactly to 1.
pub fn correct_readout(
    shots: &ShotSet,
    ca: &ConfusionMatrix,
    cb: &ConfusionMatrix,
) -> Result<[f64; 4]> {
    correct_frequencies(&shots.frequencies(), ca, cb)
}

/// [`correct_readout`] acting on an already-computed frequency vector.
pub fn correct_frequencies(
    frequencies: &[f64; 4],
    ca: &ConfusionMatrix,
    cb: &ConfusionMatrix,
) -> Result<[f64; 4]> {
    let inv = kron_real(&ca.inverse()?, &cb.inverse()?);
    let mut out = [0.0; 4];
    for (i, oi) in out.iter_mut().enumerate() {
        for (j, fj) in frequencies.iter().enumerate() {
            *oi += inv[(i, j)] * fj;
        }
    }
    let sum: f64 = out.iter().sum();
    for oi in out.iter_mut() {
        *oi /= sum;
    }
    Ok(out)
}

/// One parity-scan sample: analysis phase, odd-outcome probability, and its
/// standard error.
#[derive(Debug, Clone, Copy)]
pub struct ParityPoint {
    pub phi_rad: f64,
    pub p_odd: f64,
    pub sigma: f64,
}

/// Weighted least-squares fit of the parity fringe
/// P_odd(φ) = ½(1 − C sin(2φ + φ₀)) + baseline.
#[derive(Debug, Clone, Copy)]
pub struct ParityFit {
    pub contrast: f64,
    pub contrast_sigma: f64,
    pub phase_offset_rad: f64,
    pub phase_sigma: f64,
    pub baseline: f64,
    pub baseline_sigma: f64,
}

/// Fit the parity fringe.
///
/// The model is linear in (baseline, u, v) with u sin 2φ + v cos 2φ =
/// −(C/2) sin(2φ + φ₀), so the fit is a 3-parameter weighted normal-equation
/// solve; C and φ₀ errors follow by the delta method.
pub fn parity_scan_fit(points: &[ParityPoint]) -> Result<ParityFit> {
    let mut distinct: Vec<f64> = Vec::new();
    for p in points {
        if !distinct.iter().any(|&x| (x - p.phi_rad).abs() < 1e-12) {
            distinct.push(p.phi_rad);
        }
    }
    if distinct.len() < 5 {
        return Err(Error::DegenerateFit(format!(
            "need >= 5 distinct phase points, got {}",
            distinct.len()
        )));
    }

    // normal equations for y - 1/2 = b + u sin2φ + v cos2φ
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for p in points {
        let w = if p.sigma > 0.0 { 1.0 / (p.sigma * p.sigma) } else { 1.0 };
        let x = [1.0, (2.0 * p.phi_rad).sin(), (2.0 * p.phi_rad).cos()];
        let y = p.p_odd - 0.5;
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += w * x[i] * x[j];
            }
            atb[i] += w * x[i] * y;
        }
    }
    let cov = invert3(&ata).ok_or_else(|| {
        Error::DegenerateFit("parity design matrix is singular (phases equal mod π)".into())
    })?;
    let mut beta = [0.0f64; 3];
    for i in 0..3 {
        for j in 0..3 {
            beta[i] += cov[i][j] * atb[j];
        }
    }
    let (b, u, v) = (beta[0], beta[1], beta[2]);
    let r = (u * u + v * v).sqrt();
    let contrast = 2.0 * r;
    let phase = (-v).atan2(-u);
    // delta method on C = 2√(u²+v²) and φ₀ = atan2(−v, −u)
    let (du, dv) = if r > 0.0 { (2.0 * u / r, 2.0 * v / r) } else { (2.0, 0.0) };
    let var_c = du * du * cov[1][1] + dv * dv * cov[2][2] + 2.0 * du * dv * cov[1][2];
    let (pu, pv) = if r > 0.0 { (v / (r * r), -u / (r * r)) } else { (0.0, 0.0) };
    let var_p = pu * pu * cov[1][1] + pv * pv * cov[2][2] + 2.0 * pu * pv * cov[1][2];
    Ok(ParityFit {
        contrast,
        contrast_sigma: var_c.max(0.0).sqrt(),
        phase_offset_rad: phase,
        phase_sigma: var_p.max(0.0).sqrt(),
        baseline: b,
        baseline_sigma: cov[0][0].max(0.0).sqrt(),
    })
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let scale = m.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
    if det.abs() < 1e-12 * scale.powi(3).max(1e-300) {
        return None;
    }
    let inv_det = 1.0 / det;
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b, c, d) = (
                m[(j + 1) % 3][(i + 1) % 3],
                m[(j + 1) % 3][(i + 2) % 3],
                m[(j + 2) % 3][(i + 1) % 3],
                m[(j + 2) % 3][(i + 2) % 3],
            );
            out[i][j] = (a * d - b * c) * inv_det;
        }
    }
    Some(out)
}

/// Bell fidelity from populations and parity contrast:
/// F = (P↓↓ + P↑↑)/2 + C/2, with linear error propagation.
pub fn fidelity_from_parity(
    p_down_down: (f64, f64),
    p_up_up: (f64, f64),
    contrast: (f64, f64),
) -> (f64, f64) {
    let f = (p_down_down.0 + p_up_up.0) / 2.0 + contrast.0 / 2.0;
    let var = (p_down_down.1 * p_down_down.1 + p_up_up.1 * p_up_up.1) / 4.0
        + contrast.1 * contrast.1 / 4.0;
    (f, var.sqrt())
}
