//! Polynomial and rational-function utilities: characteristic polynomials,
//! Durand-Kerner root finding, and partial-fraction expansion with
//! repeated poles.
//!
//! Polynomials are coefficient vectors in ascending order. These back the
//! closed-form inversion of rational Laplace transforms (phase-type
//! waiting times), where kernels come out as a delta weight plus a sum of
//! t^k e^{zt} terms.

use num_complex::Complex64;

use crate::error::MemKernelError;
use crate::linalg::{self, CMat};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Evaluate a polynomial (ascending real coefficients) at complex u.
pub fn eval(p: &[f64], u: Complex64) -> Complex64 {
    let mut acc = c(0.0, 0.0);
    for &coef in p.iter().rev() {
        acc = acc * u + c(coef, 0.0);
    }
    acc
}

fn eval_c(p: &[Complex64], u: Complex64) -> Complex64 {
    let mut acc = c(0.0, 0.0);
    for &coef in p.iter().rev() {
        acc = acc * u + coef;
    }
    acc
}

/// Multiply two polynomials.
pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Drop trailing coefficients below `tol` relative to the largest one.
pub fn trim(p: &[f64], tol: f64) -> Vec<f64> {
    let scale = p.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let mut out: Vec<f64> = p.to_vec();
    while out.len() > 1 && out.last().unwrap().abs() < tol * scale {
        out.pop();
    }
    out
}

/// Degree after trimming tiny leading coefficients.
pub fn degree(p: &[f64]) -> usize {
    trim(p, 1e-12).len().saturating_sub(1)
}

/// Characteristic polynomial det(uI − A) of a real matrix, together with
/// the adjugate expansion adj(uI − A) = Σ_k u^{m−1−k} M_k
/// (Faddeev-LeVerrier).
pub fn char_poly_and_adjugate(a: &CMat) -> (Vec<f64>, Vec<CMat>) {
    let m = a.nrows();
    let mut coeffs = vec![0.0; m + 1]; // ascending
    coeffs[m] = 1.0;
    let mut mats: Vec<CMat> = Vec::with_capacity(m);
    let mut mk = linalg::eye(m);
    for k in 1..=m {
        mats.push(mk.clone());
        let am = a.dot(&mk);
        let ck = -linalg::trace(&am).re / k as f64;
        coeffs[m - k] = ck;
        mk = am + linalg::eye(m).mapv(|z| z * c(ck, 0.0));
    }
    (coeffs, mats)
}

/// All complex roots of a real-coefficient polynomial (Durand-Kerner).
pub fn roots(p: &[f64]) -> Vec<Complex64> {
    let p = trim(p, 1e-14);
    let n = p.len() - 1;
    if n == 0 {
        return vec![];
    }
    let lead = p[n];
    let monic: Vec<Complex64> = p.iter().map(|&x| c(x / lead, 0.0)).collect();
    // Cauchy bound for the root radius
    let radius = 1.0
        + monic[..n]
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
    let seed = c(0.4, 0.9);
    let mut zs: Vec<Complex64> = (0..n)
        .map(|k| seed.powu(k as u32 + 1) * c(radius, 0.0))
        .collect();
    for _ in 0..1000 {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let mut denom = c(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom *= zs[i] - zs[j];
                }
            }
            if denom.norm() < 1e-300 {
                continue;
            }
            let step = eval_c(&monic, zs[i]) / denom;
            zs[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 * radius.max(1.0) {
            break;
        }
    }
    zs
}

/// One exponential contribution coef · t^{power−1} e^{pole·t} / (power−1)!.
#[derive(Debug, Clone, Copy)]
pub struct ExpTerm {
    pub coef: Complex64,
    pub pole: Complex64,
    pub power: usize,
}

impl ExpTerm {
    pub fn eval(&self, t: f64) -> Complex64 {
        let mut fact = 1.0f64;
        for k in 1..self.power {
            fact *= k as f64;
        }
        self.coef * c(t.powi(self.power as i32 - 1) / fact, 0.0) * (self.pole * c(t, 0.0)).exp()
    }

    pub fn laplace(&self, u: Complex64) -> Complex64 {
        self.coef / (u - self.pole).powu(self.power as u32)
    }
}

/// Taylor coefficients of `p` around `z0` (synthetic division), length `order`.
fn taylor_at(p: &[f64], z0: Complex64, order: usize) -> Vec<Complex64> {
    let mut work: Vec<Complex64> = p.iter().map(|&x| c(x, 0.0)).collect();
    let mut out = Vec::with_capacity(order);
    for _ in 0..order {
        // divide by (u - z0): remainder is the next Taylor coefficient
        let mut rem = c(0.0, 0.0);
        for k in (0..work.len()).rev() {
            let tmp = work[k] + rem * z0;
            work[k] = rem;
            rem = tmp;
        }
        out.push(rem);
        if work.len() > 1 {
            work.pop();
        } else {
            work[0] = c(0.0, 0.0);
        }
    }
    out
}

/// Deflate a real polynomial by (u − z)^p, discarding the remainder.
fn deflate(p: &[f64], z: Complex64, mult: usize) -> Vec<Complex64> {
    let mut work: Vec<Complex64> = p.iter().map(|&x| c(x, 0.0)).collect();
    for _ in 0..mult {
        let mut rem = c(0.0, 0.0);
        for k in (0..work.len()).rev() {
            let tmp = work[k] + rem * z;
            work[k] = rem;
            rem = tmp;
        }
        if work.len() > 1 {
            work.pop();
        } else {
            work[0] = c(0.0, 0.0);
        }
    }
    work
}

fn taylor_of_complex(p: &[Complex64], z0: Complex64, order: usize) -> Vec<Complex64> {
    let mut work = p.to_vec();
    let mut out = Vec::with_capacity(order);
    for _ in 0..order {
        let mut rem = c(0.0, 0.0);
        for k in (0..work.len()).rev() {
            let tmp = work[k] + rem * z0;
            work[k] = rem;
            rem = tmp;
        }
        out.push(rem);
        if work.len() > 1 {
            work.pop();
        } else {
            work[0] = c(0.0, 0.0);
        }
    }
    out
}

fn derivative(p: &[Complex64]) -> Vec<Complex64> {
    if p.len() <= 1 {
        return vec![c(0.0, 0.0)];
    }
    (1..p.len()).map(|k| p[k] * c(k as f64, 0.0)).collect()
}

/// Newton-polish a p-fold root of a real polynomial by iterating on its
/// (p−1)-th derivative, where the root is simple.
fn polish_multiple_root(poly: &[f64], z0: Complex64, mult: usize) -> Complex64 {
    let mut d: Vec<Complex64> = poly.iter().map(|&x| c(x, 0.0)).collect();
    for _ in 0..mult.saturating_sub(1) {
        d = derivative(&d);
    }
    let dp = derivative(&d);
    let mut z = z0;
    for _ in 0..50 {
        let fv = eval_c(&d, z);
        let fpv = eval_c(&dp, z);
        if fpv.norm() < 1e-250 {
            break;
        }
        let step = fv / fpv;
        z -= step;
        if step.norm() < 1e-15 * z.norm().max(1.0) {
            break;
        }
    }
    z
}

/// Cluster approximate roots into (location, multiplicity) groups.
fn cluster_roots(zs: &[Complex64], tol: f64) -> Vec<(Complex64, usize)> {
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for &z in zs {
        if let Some((center, count)) = clusters
            .iter_mut()
            .find(|(center, _)| (*center - z).norm() < tol)
        {
            // running mean
            let n = *count as f64;
            *center = (*center * c(n, 0.0) + z) / c(n + 1.0, 0.0);
            *count += 1;
        } else {
            clusters.push((z, 1));
        }
    }
    clusters
}

/// Partial-fraction expansion of num/den (real ascending coefficients).
///
/// Returns the constant part (nonzero only when deg num = deg den; the
/// rational function must not be strictly improper) and the pole terms.
pub fn partial_fractions(num: &[f64], den: &[f64]) -> Result<(f64, Vec<ExpTerm>), MemKernelError> {
    let num = trim(num, 1e-13);
    let den = trim(den, 1e-13);
    let dn = num.len() - 1;
    let dd = den.len() - 1;
    if dn > dd {
        return Err(MemKernelError::InvalidArgument(
            "rational function is strictly improper".into(),
        ));
    }
    let lead = den[dd];
    let constant = if dn == dd { num[dn] / lead } else { 0.0 };
    // proper remainder: num − constant·den
    let mut proper = vec![0.0; dd + 1];
    for (i, &x) in num.iter().enumerate() {
        proper[i] += x;
    }
    for (i, &x) in den.iter().enumerate() {
        proper[i] -= constant * x;
    }
    let proper = trim(&proper, 1e-13);
    if proper.len() == 1 && proper[0].abs() < 1e-300 {
        return Ok((constant, vec![]));
    }

    let zs = roots(&den);
    let scale = zs.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    // Durand-Kerner only locates a p-fold root to O(ε^{1/p}); cluster
    // generously (poles closer than ~2% of the spectral radius count as
    // one multiple pole), then polish each center on the (p−1)-th
    // derivative where the root is simple.
    let mut clusters = cluster_roots(&zs, 2e-2 * scale);
    for (z, p) in clusters.iter_mut() {
        if *p > 1 {
            *z = polish_multiple_root(&den, *z, *p);
        }
    }

    let mut terms: Vec<ExpTerm> = Vec::new();
    let term_scale = {
        let ns = proper.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        ns.max(1e-300)
    };
    for &(z, p) in &clusters {
        let deflated = deflate(&den, z, p);
        let num_taylor = taylor_at(&proper, z, p);
        let den_taylor = taylor_of_complex(&deflated, z, p);
        // series division num_taylor / den_taylor to order p−1
        let d0 = den_taylor[0];
        if d0.norm() < 1e-200 {
            return Err(MemKernelError::SingularMatrix);
        }
        let mut h = vec![c(0.0, 0.0); p];
        for l in 0..p {
            let mut s = num_taylor[l];
            for j in 0..l {
                s -= h[j] * den_taylor[l - j];
            }
            h[l] = s / d0;
        }
        for (l, &hl) in h.iter().enumerate() {
            if hl.norm() > 1e-9 * term_scale {
                terms.push(ExpTerm {
                    coef: hl,
                    pole: z,
                    power: p - l,
                });
            }
        }
    }
    Ok((constant, terms))
}

/// Remove common roots of num and den (within tolerance) and rebuild both
/// polynomials. Keeps partial fractions well-conditioned when the two
/// share factors, e.g. k̂₁ with f₁ = f.
pub fn cancel_common_roots(num: &[f64], den: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let num = trim(num, 1e-13);
    let den = trim(den, 1e-13);
    if num.len() <= 1 || den.len() <= 1 {
        return (num, den);
    }
    let mut nroots = roots(&num);
    let mut droots = roots(&den);
    let scale = nroots
        .iter()
        .chain(droots.iter())
        .map(|z| z.norm())
        .fold(1.0f64, f64::max);
    let tol = 1e-7 * scale;
    let mut i = 0;
    while i < nroots.len() {
        if let Some(j) = droots.iter().position(|&z| (z - nroots[i]).norm() < tol) {
            nroots.remove(i);
            droots.remove(j);
        } else {
            i += 1;
        }
    }
    let rebuild = |rs: &[Complex64], lead: f64| -> Vec<f64> {
        let mut p = vec![c(1.0, 0.0)];
        for &r in rs {
            // multiply by (u − r)
            let mut q = vec![c(0.0, 0.0); p.len() + 1];
            for (k, &pk) in p.iter().enumerate() {
                q[k] -= pk * r;
                q[k + 1] += pk;
            }
            p = q;
        }
        p.iter().map(|z| z.re * lead).collect()
    };
    let nl = *num.last().unwrap();
    let dl = *den.last().unwrap();
    (rebuild(&nroots, nl), rebuild(&droots, dl))
}
