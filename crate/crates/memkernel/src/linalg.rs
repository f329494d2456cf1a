//! Dense complex linear algebra primitives shared by all modules.
//!
//! Everything here targets the desk scale of the rest of the crate
//! (Hilbert dimension d ≤ ~16, superoperators up to ~256×256), so the
//! implementations favor robustness over asymptotic speed: LU with
//! partial pivoting, scaling-and-squaring Padé(13) matrix exponential,
//! and Jacobi eigenvalue sweeps on a real-symmetric embedding for
//! Hermitian spectra.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::MemKernelError;

pub type CMat = Array2<Complex64>;
pub type CVec = Array1<Complex64>;

/// Identity matrix of size n.
pub fn eye(n: usize) -> CMat {
    let mut m = CMat::zeros((n, n));
    for i in 0..n {
        m[[i, i]] = Complex64::new(1.0, 0.0);
    }
    m
}

/// Conjugate transpose.
pub fn dagger(a: &CMat) -> CMat {
    let mut out = CMat::zeros((a.ncols(), a.nrows()));
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out[[j, i]] = a[[i, j]].conj();
        }
    }
    out
}

/// Entrywise complex conjugate.
pub fn conj(a: &CMat) -> CMat {
    a.mapv(|z| z.conj())
}

/// Kronecker product a ⊗ b.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMat::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == Complex64::default() {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Frobenius norm.
pub fn fro_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry magnitude.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Induced 1-norm (max column sum of magnitudes).
pub fn one_norm(a: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = (0..a.nrows()).map(|i| a[[i, j]].norm()).sum();
        best = best.max(s);
    }
    best
}

pub fn trace(a: &CMat) -> Complex64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[[i, i]]).sum()
}

fn assert_square(a: &CMat) {
    assert_eq!(a.nrows(), a.ncols(), "square matrix required");
}

/// LU factorization with partial pivoting. Returns (combined LU, pivot rows).
fn lu_factor(a: &CMat) -> Result<(CMat, Vec<usize>), MemKernelError> {
    assert_square(a);
    let n = a.nrows();
    let mut lu = a.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = lu[[k, k]].norm();
        for i in (k + 1)..n {
            let v = lu[[i, k]].norm();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return Err(MemKernelError::SingularMatrix);
        }
        if p != k {
            piv.swap(p, k);
            for j in 0..n {
                let tmp = lu[[k, j]];
                lu[[k, j]] = lu[[p, j]];
                lu[[p, j]] = tmp;
            }
        }
        let pivot = lu[[k, k]];
        for i in (k + 1)..n {
            let m = lu[[i, k]] / pivot;
            lu[[i, k]] = m;
            for j in (k + 1)..n {
                let sub = m * lu[[k, j]];
                lu[[i, j]] -= sub;
            }
        }
    }
    Ok((lu, piv))
}

/// Solve A X = B for X with multiple right-hand sides.
pub fn solve(a: &CMat, b: &CMat) -> Result<CMat, MemKernelError> {
    let (lu, piv) = lu_factor(a)?;
    let n = a.nrows();
    let nrhs = b.ncols();
    let mut x = CMat::zeros((n, nrhs));
    for j in 0..nrhs {
        for i in 0..n {
            x[[i, j]] = b[[piv[i], j]];
        }
    }
    // forward substitution (unit lower triangle)
    for k in 0..n {
        for i in (k + 1)..n {
            let m = lu[[i, k]];
            for j in 0..nrhs {
                let sub = m * x[[k, j]];
                x[[i, j]] -= sub;
            }
        }
    }
    // back substitution
    for k in (0..n).rev() {
        let d = lu[[k, k]];
        for j in 0..nrhs {
            x[[k, j]] /= d;
        }
        for i in 0..k {
            let m = lu[[i, k]];
            for j in 0..nrhs {
                let sub = m * x[[k, j]];
                x[[i, j]] -= sub;
            }
        }
    }
    Ok(x)
}

/// Matrix inverse via LU.
pub fn inv(a: &CMat) -> Result<CMat, MemKernelError> {
    solve(a, &eye(a.nrows()))
}

/// Solve A x = b for a single vector right-hand side.
pub fn solve_vec(a: &CMat, b: &CVec) -> Result<CVec, MemKernelError> {
    let n = b.len();
    let bm = b.clone().into_shape_with_order((n, 1)).expect("shape");
    let x = solve(a, &bm)?;
    Ok(x.column(0).to_owned())
}

/// Matrix exponential exp(A) by scaling-and-squaring with Padé(13).
///
/// Coefficients and the θ₁₃ threshold follow Higham's revisited
/// scaling-and-squaring algorithm.
pub fn expm(a: &CMat) -> CMat {
    assert_square(a);
    let n = a.nrows();
    if n == 0 {
        return CMat::zeros((0, 0));
    }
    let norm = one_norm(a);
    let theta13 = 5.371_920_351_148_152_f64;
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let scale = Complex64::new((0.5f64).powi(s as i32), 0.0);
    let a_s = a.mapv(|z| z * scale);

    const B: [f64; 14] = [
        64_764_752_532_480_000.0,
        32_382_376_266_240_000.0,
        7_771_770_303_897_600.0,
        1_187_353_796_428_800.0,
        129_060_195_264_000.0,
        10_559_470_521_600.0,
        670_442_572_800.0,
        33_522_128_640.0,
        1_323_241_920.0,
        40_840_800.0,
        960_960.0,
        16_380.0,
        182.0,
        1.0,
    ];

    let id = eye(n);
    let a2 = a_s.dot(&a_s);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let c = |k: usize| Complex64::new(B[k], 0.0);
    let u_inner = &a6.mapv(|z| z * c(13)) + &a4.mapv(|z| z * c(11)) + &a2.mapv(|z| z * c(9));
    let u_rest =
        &a6.mapv(|z| z * c(7)) + &a4.mapv(|z| z * c(5)) + &a2.mapv(|z| z * c(3)) + &id.mapv(|z| z * c(1));
    let u = a_s.dot(&(a6.dot(&u_inner) + u_rest));

    let v_inner = &a6.mapv(|z| z * c(12)) + &a4.mapv(|z| z * c(10)) + &a2.mapv(|z| z * c(8));
    let v_rest =
        &a6.mapv(|z| z * c(6)) + &a4.mapv(|z| z * c(4)) + &a2.mapv(|z| z * c(2)) + &id.mapv(|z| z * c(0));
    let v = a6.dot(&v_inner) + v_rest;

    let num = &v + &u;
    let den = &v - &u;
    let mut r = solve(&den, &num).expect("Padé denominator singular");
    for _ in 0..s {
        r = r.dot(&r);
    }
    r
}

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// The Hermitian part (H + H†)/2 is taken first so that tiny
/// anti-Hermitian noise cannot leak complex parts into the spectrum.
/// Internally H = X + iY is embedded as the real symmetric matrix
/// [[X, −Y], [Y, X]] whose spectrum is that of H with doubled
/// multiplicities, and diagonalized by cyclic Jacobi sweeps.
pub fn hermitian_eigenvalues(h: &CMat) -> Vec<f64> {
    assert_square(h);
    let n = h.nrows();
    if n == 0 {
        return vec![];
    }
    let herm = (h + &dagger(h)).mapv(|z| z * Complex64::new(0.5, 0.0));
    let mut m = Array2::<f64>::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            let z = herm[[i, j]];
            m[[i, j]] = z.re;
            m[[i + n, j + n]] = z.re;
            m[[i, j + n]] = -z.im;
            m[[i + n, j]] = z.im;
        }
    }
    let mut vals = jacobi_symmetric_eigenvalues(&mut m);
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // spectrum is doubled; keep every other value
    (0..n).map(|k| vals[2 * k]).collect()
}

fn jacobi_symmetric_eigenvalues(a: &mut Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let tol = 1e-14 * scale;
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[[p, q]].abs();
            }
        }
        if off < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[[p, p]];
                let aqq = a[[q, q]];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[[i, i]]).collect()
}

/// Analytic eigendecomposition of a 2×2 Hermitian matrix.
/// Returns (eigenvalue, normalized eigenvector) pairs, ascending.
pub fn eig2_hermitian(h: &CMat) -> [(f64, CVec); 2] {
    assert_eq!(h.dim(), (2, 2));
    let a = h[[0, 0]].re;
    let d = h[[1, 1]].re;
    let b = (h[[0, 1]] + h[[1, 0]].conj()) * Complex64::new(0.5, 0.0);
    let tr = a + d;
    let disc = ((a - d) * (a - d) / 4.0 + b.norm_sqr()).sqrt();
    let lo = tr / 2.0 - disc;
    let hi = tr / 2.0 + disc;
    let vec_for = |lambda: f64| -> CVec {
        // (H - λ) v = 0
        let mut v = if b.norm() > 1e-300 {
            CVec::from(vec![b, Complex64::new(lambda - a, 0.0)])
        } else if (a - lambda).abs() <= (d - lambda).abs() {
            CVec::from(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])
        } else {
            CVec::from(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])
        };
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.mapv_inplace(|z| z / norm);
        }
        v
    };
    [(lo, vec_for(lo)), (hi, vec_for(hi))]
}
