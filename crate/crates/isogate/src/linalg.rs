//! Small dense complex-matrix helpers used throughout the crate.
//!
//! Everything here targets the tiny matrices of a two-qubit experiment
//! (2×2, 4×4, and the qubit⊗Fock spaces of the oracle), so the eigensolver
//! is a plain cyclic Jacobi sweep rather than a LAPACK binding.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

/// Conjugate transpose.
pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[(i, j)];
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product of real matrices.
pub fn kron_real(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[(i, j)];
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Matrix trace.
pub fn trace(m: &Array2<C64>) -> C64 {
    m.diag().iter().sum()
}

/// Max absolute deviation from Hermiticity.
pub fn hermiticity_defect(m: &Array2<C64>) -> f64 {
    let md = dagger(m);
    (m - &md)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// ⟨ψ|ρ|ψ⟩ for a normalized pure state, returned as a real number.
pub fn fidelity_to_pure(rho: &Array2<C64>, psi: &Array1<C64>) -> f64 {
    let rp = rho.dot(psi);
    psi.iter()
        .zip(rp.iter())
        .map(|(a, b)| (a.conj() * b).re)
        .sum()
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// columns of a unitary matrix. Off-diagonal mass is driven below
/// `1e-14 · ‖A‖` (or 100 sweeps, which small Hermitian matrices never need).
pub fn eigh(a: &Array2<C64>) -> (Array1<f64>, Array2<C64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigh requires a square matrix");
    let mut m = a.clone();
    let mut v: Array2<C64> = Array2::eye(n);
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-14 * scale;

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[(p, q)].norm());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let g = m[(p, q)];
                if g.norm() <= tol * 1e-2 {
                    continue;
                }
                let alpha = m[(p, p)].re;
                let beta = m[(q, q)].re;
                let phase = g / g.norm();
                let tau = (alpha - beta) / (2.0 * g.norm());
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // U differs from the identity only in the (p,q) block:
                //   U_pp = c, U_pq = -s·phase, U_qp = s·conj(phase), U_qq = c
                let sp = C64::new(s, 0.0) * phase;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp * c + mkq * s * phase.conj();
                    m[(k, q)] = -mkp * sp + mkq * c;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = mpk * c + mqk * s * phase;
                    m[(q, k)] = -mpk * sp.conj() + mqk * c;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c + vkq * s * phase.conj();
                    v[(k, q)] = -vkp * sp + vkq * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.partial_cmp(&m[(j, j)].re).unwrap());
    let vals = Array1::from_iter(order.iter().map(|&i| m[(i, i)].re));
    let mut vecs = Array2::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        for k in 0..n {
            vecs[(k, col)] = v[(k, i)];
        }
    }
    (vals, vecs)
}

/// Eigendecomposition of a real symmetric matrix (thin wrapper over [`eigh`]).
pub fn eigh_real(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let ac = a.mapv(|x| C64::new(x, 0.0));
    let (vals, vecs) = eigh(&ac);
    // Rotate each column's global phase so the real representation is exact.
    let n = a.nrows();
    let mut out = Array2::zeros((n, n));
    for j in 0..n {
        let mut k0 = 0;
        let mut best = 0.0;
        for k in 0..n {
            if vecs[(k, j)].norm() > best {
                best = vecs[(k, j)].norm();
                k0 = k;
            }
        }
        let ph = vecs[(k0, j)] / vecs[(k0, j)].norm();
        for k in 0..n {
            out[(k, j)] = (vecs[(k, j)] * ph.conj()).re;
        }
    }
    (vals, out)
}
