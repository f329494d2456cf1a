//! Waiting-time distributions, survival probabilities, scalar memory
//! kernels, sprinkling (renewal) densities, and sampling for ordinary and
//! modified renewal processes.
//!
//! Phase-type laws are the closed-form family: their Laplace transforms
//! are rational, so k̂(u) = f̂(u)/ĝ(u) and k̂₁(u) = f̂₁(u)/ĝ(u) invert
//! exactly into a delta weight plus complex-exponential terms via partial
//! fractions. Tabulated laws support density/survival/sampling but no
//! scalar kernel.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;

use crate::error::MemKernelError;
use crate::grid::Grid;
use crate::linalg::{self, CMat};
use crate::rational::{self, ExpTerm};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A waiting-time law with density f, survival g(t) = 1 − ∫₀ᵗ f.
#[derive(Debug, Clone)]
pub enum WaitingTimeDistribution {
    Exponential {
        rate: f64,
    },
    /// Initial phase vector α and m×m subgenerator A; f(t) = α e^{At} a
    /// with exit rates a = −A·1.
    PhaseType {
        alpha: Array1<f64>,
        subgen: Array2<f64>,
    },
    /// Density values on the uniform grid t = 0, step, 2·step, …
    Tabulated {
        step: f64,
        density: Vec<f64>,
        /// cumulative trapezoid of the density, same length
        cdf: Vec<f64>,
    },
}

use WaitingTimeDistribution as Wtd;

impl WaitingTimeDistribution {
    pub fn exponential(rate: f64) -> Result<Self, MemKernelError> {
        if rate <= 0.0 {
            return Err(MemKernelError::NegativeRate(rate));
        }
        Ok(Wtd::Exponential { rate })
    }

    /// Erlang-m: m exponential stages in series, each with the given rate.
    pub fn erlang(stages: usize, rate: f64) -> Result<Self, MemKernelError> {
        if rate <= 0.0 {
            return Err(MemKernelError::NegativeRate(rate));
        }
        if stages == 0 {
            return Err(MemKernelError::InvalidArgument("erlang needs ≥ 1 stage".into()));
        }
        let mut alpha = Array1::zeros(stages);
        alpha[0] = 1.0;
        let mut a = Array2::zeros((stages, stages));
        for i in 0..stages {
            a[[i, i]] = -rate;
            if i + 1 < stages {
                a[[i, i + 1]] = rate;
            }
        }
        Ok(Wtd::PhaseType { alpha, subgen: a })
    }

    /// Mixture of exponentials: weights must sum to 1.
    pub fn hyperexponential(components: &[(f64, f64)]) -> Result<Self, MemKernelError> {
        let wsum: f64 = components.iter().map(|(w, _)| w).sum();
        if (wsum - 1.0).abs() > 1e-10 {
            return Err(MemKernelError::InvalidArgument(
                "hyperexponential weights must sum to 1".into(),
            ));
        }
        let m = components.len();
        let mut alpha = Array1::zeros(m);
        let mut a = Array2::zeros((m, m));
        for (i, (w, rate)) in components.iter().enumerate() {
            if *rate <= 0.0 {
                return Err(MemKernelError::NegativeRate(*rate));
            }
            if *w < 0.0 {
                return Err(MemKernelError::InvalidArgument("negative mixture weight".into()));
            }
            alpha[i] = *w;
            a[[i, i]] = -rate;
        }
        Ok(Wtd::PhaseType { alpha, subgen: a })
    }

    pub fn phase_type(alpha: Array1<f64>, subgen: Array2<f64>) -> Result<Self, MemKernelError> {
        let m = alpha.len();
        if subgen.dim() != (m, m) || m == 0 {
            return Err(MemKernelError::InvalidDimension(
                "phase-type subgenerator shape mismatch".into(),
            ));
        }
        for i in 0..m {
            if subgen[[i, i]] > 0.0 {
                return Err(MemKernelError::InvalidArgument(
                    "subgenerator diagonal must be ≤ 0".into(),
                ));
            }
            let row_sum: f64 = (0..m).map(|j| subgen[[i, j]]).sum();
            if row_sum > 1e-10 {
                return Err(MemKernelError::InvalidArgument(
                    "subgenerator row sums must be ≤ 0".into(),
                ));
            }
            for j in 0..m {
                if i != j && subgen[[i, j]] < 0.0 {
                    return Err(MemKernelError::InvalidArgument(
                        "subgenerator off-diagonals must be ≥ 0".into(),
                    ));
                }
            }
        }
        if alpha.iter().any(|&x| x < 0.0) || (alpha.sum() - 1.0).abs() > 1e-10 {
            return Err(MemKernelError::InvalidArgument(
                "phase vector must be a probability vector".into(),
            ));
        }
        Ok(Wtd::PhaseType { alpha, subgen })
    }

    /// Density samples on a uniform grid starting at t = 0.
    pub fn tabulated(step: f64, density: Vec<f64>) -> Result<Self, MemKernelError> {
        if step <= 0.0 || density.len() < 2 {
            return Err(MemKernelError::InvalidArgument(
                "tabulated law needs a positive step and ≥ 2 samples".into(),
            ));
        }
        if density.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(MemKernelError::InvalidArgument(
                "tabulated density must be finite and nonnegative".into(),
            ));
        }
        let mut cdf = vec![0.0; density.len()];
        for i in 1..density.len() {
            cdf[i] = cdf[i - 1] + 0.5 * step * (density[i - 1] + density[i]);
        }
        Ok(Wtd::Tabulated { step, density, cdf })
    }

    /// Uniform law on [0, b], tabulated.
    pub fn uniform(b: f64, n_points: usize) -> Result<Self, MemKernelError> {
        let step = b / (n_points - 1) as f64;
        Self::tabulated(step, vec![1.0 / b; n_points])
    }

    /// Total mass missing from a tabulated law's truncated support.
    pub fn mass_defect(&self) -> f64 {
        match self {
            Wtd::Tabulated { cdf, .. } => (1.0 - cdf.last().unwrap()).max(0.0),
            _ => 0.0,
        }
    }

    pub fn density(&self, t: f64) -> Result<f64, MemKernelError> {
        if t < 0.0 {
            return Err(MemKernelError::InvalidArgument("density requires t ≥ 0".into()));
        }
        Ok(match self {
            Wtd::Exponential { rate } => rate * (-rate * t).exp(),
            Wtd::PhaseType { alpha, subgen } => {
                let e = ph_expm(subgen, t);
                let a_exit = exit_rates(subgen);
                let mut s = 0.0;
                for i in 0..alpha.len() {
                    for j in 0..alpha.len() {
                        s += alpha[i] * e[[i, j]].re * a_exit[j];
                    }
                }
                s.max(0.0)
            }
            Wtd::Tabulated { step, density, .. } => interp(density, *step, t),
        })
    }

    pub fn survival(&self, t: f64) -> Result<f64, MemKernelError> {
        if t < 0.0 {
            return Err(MemKernelError::InvalidArgument("survival requires t ≥ 0".into()));
        }
        Ok(match self {
            Wtd::Exponential { rate } => (-rate * t).exp(),
            Wtd::PhaseType { alpha, subgen } => {
                let e = ph_expm(subgen, t);
                let mut s = 0.0;
                for i in 0..alpha.len() {
                    for j in 0..alpha.len() {
                        s += alpha[i] * e[[i, j]].re;
                    }
                }
                s.clamp(0.0, 1.0)
            }
            Wtd::Tabulated { step, cdf, .. } => {
                let end = *step * (cdf.len() - 1) as f64;
                if t >= end {
                    (1.0 - cdf.last().unwrap()).max(0.0)
                } else {
                    (1.0 - interp(cdf, *step, t)).max(0.0)
                }
            }
        })
    }

    /// Mean waiting time ⟨τ⟩.
    pub fn mean(&self) -> Result<f64, MemKernelError> {
        Ok(match self {
            Wtd::Exponential { rate } => 1.0 / rate,
            Wtd::PhaseType { alpha, subgen } => {
                // α (−A)⁻¹ 𝟙
                let m = alpha.len();
                let neg_a = to_complex(subgen).mapv(|z| -z);
                let ones = linalg::CVec::from(vec![c(1.0, 0.0); m]);
                let x = linalg::solve_vec(&neg_a, &ones)?;
                (0..m).map(|i| alpha[i] * x[i].re).sum()
            }
            Wtd::Tabulated { step, density, .. } => {
                let mut s = 0.0;
                for i in 1..density.len() {
                    let t0 = *step * (i - 1) as f64;
                    let t1 = *step * i as f64;
                    s += 0.5 * *step * (t0 * density[i - 1] + t1 * density[i]);
                }
                s
            }
        })
    }

    /// Laplace transforms (f̂(u), ĝ(u)) for Re u > 0; ĝ = (1 − f̂)/u.
    pub fn laplace(&self, u: Complex64) -> Result<(Complex64, Complex64), MemKernelError> {
        if u.re <= 0.0 {
            return Err(MemKernelError::InvalidArgument(
                "Laplace transform requires Re u > 0".into(),
            ));
        }
        let f_hat = match self {
            Wtd::Exponential { rate } => c(*rate, 0.0) / (u + c(*rate, 0.0)),
            Wtd::PhaseType { alpha, subgen } => {
                // α (uI − A)⁻¹ a
                let m = alpha.len();
                let a = to_complex(subgen);
                let shifted = &linalg::eye(m).mapv(|z| z * u) - &a;
                let a_exit = exit_rates(subgen);
                let rhs = linalg::CVec::from(a_exit.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>());
                let x = linalg::solve_vec(&shifted, &rhs)?;
                (0..m).map(|i| c(alpha[i], 0.0) * x[i]).sum()
            }
            Wtd::Tabulated { step, density, .. } => {
                // composite trapezoid of f(t) e^{-ut}
                let mut s = c(0.0, 0.0);
                for i in 0..density.len() {
                    let t = *step * i as f64;
                    let w = if i == 0 || i == density.len() - 1 { 0.5 } else { 1.0 };
                    s += c(w * density[i], 0.0) * (-u * c(t, 0.0)).exp();
                }
                s * c(*step, 0.0)
            }
        };
        let g_hat = (c(1.0, 0.0) - f_hat) / u;
        Ok((f_hat, g_hat))
    }

    /// Draw one waiting time.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Wtd::Exponential { rate } => {
                let u: f64 = rng.gen::<f64>();
                -(1.0 - u).ln() / rate
            }
            Wtd::PhaseType { alpha, subgen } => {
                let m = alpha.len();
                // pick initial phase
                let mut u: f64 = rng.gen();
                let mut phase = None;
                for i in 0..m {
                    if u < alpha[i] {
                        phase = Some(i);
                        break;
                    }
                    u -= alpha[i];
                }
                let mut t = 0.0;
                let mut ph = match phase {
                    Some(p) => p,
                    None => return 0.0, // substochastic α: immediate absorption
                };
                loop {
                    let q = -subgen[[ph, ph]];
                    if q <= 0.0 {
                        return t; // absorbing phase; defensive
                    }
                    let draw: f64 = rng.gen();
                    t += -(1.0 - draw).ln() / q;
                    // choose next phase or absorb
                    let mut v: f64 = rng.gen::<f64>() * q;
                    let mut next = None;
                    for j in 0..m {
                        if j == ph {
                            continue;
                        }
                        if v < subgen[[ph, j]] {
                            next = Some(j);
                            break;
                        }
                        v -= subgen[[ph, j]];
                    }
                    match next {
                        Some(j) => ph = j,
                        None => return t,
                    }
                }
            }
            Wtd::Tabulated { step, cdf, .. } => {
                let total = *cdf.last().unwrap();
                let target = rng.gen::<f64>() * total;
                // invert the piecewise-linear CDF
                let idx = match cdf.binary_search_by(|x| x.partial_cmp(&target).unwrap()) {
                    Ok(i) => i,
                    Err(i) => i,
                };
                if idx == 0 {
                    return 0.0;
                }
                let i = idx.min(cdf.len() - 1);
                let c0 = cdf[i - 1];
                let c1 = cdf[i];
                let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
                *step * ((i - 1) as f64 + frac)
            }
        }
    }

    /// Rational Laplace transform f̂ = num/den (ascending real
    /// coefficients), available for exponential and phase-type laws.
    pub fn rational_transform(&self) -> Result<(Vec<f64>, Vec<f64>), MemKernelError> {
        match self {
            Wtd::Exponential { rate } => Ok((vec![*rate], vec![*rate, 1.0])),
            Wtd::PhaseType { alpha, subgen } => {
                let a = to_complex(subgen);
                let (den, adj) = rational::char_poly_and_adjugate(&a);
                let m = alpha.len();
                let a_exit = exit_rates(subgen);
                // num(u) = Σ_k u^{m−1−k} α M_k a
                let mut num = vec![0.0; m];
                for (k, mk) in adj.iter().enumerate() {
                    let mut s = 0.0;
                    for i in 0..m {
                        for j in 0..m {
                            s += alpha[i] * mk[[i, j]].re * a_exit[j];
                        }
                    }
                    num[m - 1 - k] = s;
                }
                Ok((rational::trim(&num, 1e-14), den))
            }
            Wtd::Tabulated { .. } => Err(MemKernelError::UnsupportedDistribution(
                "tabulated law has no rational Laplace transform".into(),
            )),
        }
    }
}

fn to_complex(a: &Array2<f64>) -> CMat {
    a.mapv(|x| c(x, 0.0))
}

fn exit_rates(subgen: &Array2<f64>) -> Vec<f64> {
    let m = subgen.nrows();
    (0..m)
        .map(|i| -(0..m).map(|j| subgen[[i, j]]).sum::<f64>())
        .collect()
}

fn ph_expm(subgen: &Array2<f64>, t: f64) -> CMat {
    linalg::expm(&to_complex(subgen).mapv(|z| z * c(t, 0.0)))
}

fn interp(values: &[f64], step: f64, t: f64) -> f64 {
    let end = step * (values.len() - 1) as f64;
    if t >= end {
        return 0.0;
    }
    let x = t / step;
    let i = x.floor() as usize;
    let frac = x - i as f64;
    values[i] * (1.0 - frac) + values[i + 1] * frac
}

/// Scalar memory kernel k(t) = delta_weight·δ(t) + Σ terms, with the
/// delta carried symbolically.
#[derive(Debug, Clone)]
pub struct ScalarKernel {
    pub delta_weight: f64,
    pub terms: Vec<ExpTerm>,
}

impl ScalarKernel {
    /// Smooth part at time t (the delta is never discretized).
    pub fn smooth(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| term.eval(t).re).sum()
    }

    pub fn laplace(&self, u: Complex64) -> Complex64 {
        c(self.delta_weight, 0.0) + self.terms.iter().map(|t| t.laplace(u)).sum::<Complex64>()
    }
}

/// Sample points used to verify partial-fraction expansions against the
/// defining transform ratio.
fn verification_points(scale: f64) -> Vec<Complex64> {
    (0..8)
        .map(|k| c(scale * (0.4 + 0.45 * k as f64), scale * (0.8 - 0.3 * k as f64)))
        .collect()
}

/// Build k(t) with k̂(u) = f̂(u)/ĝ(u) by partial fractions.
pub fn scalar_kernel(w: &WaitingTimeDistribution) -> Result<ScalarKernel, MemKernelError> {
    let (num, den) = w.rational_transform()?;
    // k̂ = u f̂ / (1 − f̂) = u·num / (den − num); f̂(0) = 1 makes the
    // denominator divisible by u, so k̂ = num / ((den − num)/u).
    let mut dmn = den.clone();
    for (i, &x) in num.iter().enumerate() {
        dmn[i] -= x;
    }
    if dmn[0].abs() > 1e-9 * den.iter().fold(0.0f64, |m, x| m.max(x.abs())) {
        return Err(MemKernelError::InvalidArgument(
            "waiting-time density is not normalized (f̂(0) ≠ 1)".into(),
        ));
    }
    let r: Vec<f64> = dmn[1..].to_vec();
    let (delta_weight, terms) = rational::partial_fractions(&num, &r)?;
    let kernel = ScalarKernel { delta_weight, terms };
    // verify against f̂/ĝ at sampled points in the right half-plane
    let scale = 1.0 / w.mean()?;
    for u in verification_points(scale) {
        let (f_hat, g_hat) = w.laplace(u)?;
        let reference = f_hat / g_hat;
        let got = kernel.laplace(u);
        if (got - reference).norm() > 1e-9 * (1.0 + reference.norm()) {
            return Err(MemKernelError::InvalidArgument(format!(
                "scalar kernel verification failed at u = {u}: {got} vs {reference}"
            )));
        }
    }
    Ok(kernel)
}

/// Ordinary or modified renewal process: base law f, optional first law f₁.
#[derive(Debug, Clone)]
pub struct RenewalSpec {
    pub base: WaitingTimeDistribution,
    pub first: Option<WaitingTimeDistribution>,
    pub stationary: bool,
}

impl RenewalSpec {
    pub fn ordinary(base: WaitingTimeDistribution) -> Self {
        Self {
            base,
            first: None,
            stationary: false,
        }
    }

    pub fn modified(base: WaitingTimeDistribution, first: WaitingTimeDistribution) -> Self {
        Self {
            base,
            first: Some(first),
            stationary: false,
        }
    }

    /// Modified process with the stationary first law f₁ = g/⟨τ⟩.
    pub fn stationary(base: WaitingTimeDistribution) -> Result<Self, MemKernelError> {
        let first = stationary_first(&base)?;
        Ok(Self {
            base,
            first: Some(first),
            stationary: true,
        })
    }

    pub fn first_distribution(&self) -> &WaitingTimeDistribution {
        self.first.as_ref().unwrap_or(&self.base)
    }

    pub fn is_modified(&self) -> bool {
        self.first.is_some()
    }
}

/// Build k₁(t) with k̂₁(u) = f̂₁(u)/ĝ(u) (first law over the base
/// survival transform).
pub fn scalar_kernel_first(spec: &RenewalSpec) -> Result<ScalarKernel, MemKernelError> {
    let (num, den) = spec.base.rational_transform()?;
    let (num1, den1) = spec.first_distribution().rational_transform()?;
    let mut dmn = den.clone();
    for (i, &x) in num.iter().enumerate() {
        dmn[i] -= x;
    }
    let r: Vec<f64> = dmn[1..].to_vec();
    // k̂₁ = f̂₁ / ĝ = (num1/den1) · u·den/(den − num) = num1·den / (den1·R)
    let full_num = rational::mul(&num1, &den);
    let full_den = rational::mul(&den1, &r);
    let (n2, d2) = rational::cancel_common_roots(&full_num, &full_den);
    let (delta_weight, terms) = rational::partial_fractions(&n2, &d2)?;
    let kernel = ScalarKernel { delta_weight, terms };
    let scale = 1.0 / spec.base.mean()?;
    for u in verification_points(scale) {
        let (f1_hat, _) = spec.first_distribution().laplace(u)?;
        let (_, g_hat) = spec.base.laplace(u)?;
        let reference = f1_hat / g_hat;
        let got = kernel.laplace(u);
        if (got - reference).norm() > 1e-9 * (1.0 + reference.norm()) {
            return Err(MemKernelError::InvalidArgument(format!(
                "first-interval kernel verification failed at u = {u}"
            )));
        }
    }
    Ok(kernel)
}

/// Stationary first waiting time f₁(t) = g(t)/⟨τ⟩.
pub fn stationary_first(
    w: &WaitingTimeDistribution,
) -> Result<WaitingTimeDistribution, MemKernelError> {
    let mean = w.mean()?;
    if !mean.is_finite() || mean <= 0.0 {
        return Err(MemKernelError::InfiniteMean);
    }
    match w {
        Wtd::Exponential { rate } => Ok(Wtd::Exponential { rate: *rate }),
        Wtd::PhaseType { alpha, subgen } => {
            // equilibrium phase-type: same subgenerator, initial vector
            // β = α(−A)⁻¹/⟨τ⟩ (then β e^{At} a = α e^{At} 𝟙 / ⟨τ⟩)
            let neg_a_t = to_complex(subgen).mapv(|z| -z).t().to_owned();
            let alpha_c = linalg::CVec::from(alpha.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>());
            // β solves (−A)ᵀ βᵀ = αᵀ  ⇔  β = α(−A)⁻¹
            let beta = linalg::solve_vec(&neg_a_t, &alpha_c)?;
            let beta_real = Array1::from(beta.iter().map(|z| z.re / mean).collect::<Vec<_>>());
            WaitingTimeDistribution::phase_type(beta_real, subgen.clone())
        }
        Wtd::Tabulated { step, density, .. } => {
            let n = density.len();
            let mut g = vec![0.0; n];
            let mut acc = 0.0;
            g[0] = 1.0;
            for i in 1..n {
                acc += 0.5 * step * (density[i - 1] + density[i]);
                g[i] = (1.0 - acc).max(0.0);
            }
            let f1: Vec<f64> = g.iter().map(|&x| x / mean).collect();
            WaitingTimeDistribution::tabulated(*step, f1)
        }
    }
}

/// Sprinkling densities on the grid: S solves S = f + f∗S, and, for
/// modified processes, S₁ solves S₁ = f₁ + f∗S₁ (trapezoid Volterra).
#[derive(Debug, Clone)]
pub struct Sprinkling {
    pub s: Vec<f64>,
    pub s1: Option<Vec<f64>>,
    /// max grid residual of the renewal equation(s)
    pub residual: f64,
}

pub fn sprinkling(spec: &RenewalSpec, grid: &Grid) -> Result<Sprinkling, MemKernelError> {
    let h = grid.step();
    let n = grid.len();
    let f: Vec<f64> = (0..n)
        .map(|i| spec.base.density(grid.time(i)))
        .collect::<Result<_, _>>()?;
    let solve = |inhom: &[f64]| -> Vec<f64> {
        let mut s = vec![0.0; n];
        s[0] = inhom[0];
        let denom = 1.0 - 0.5 * h * f[0];
        for i in 1..n {
            let mut conv = 0.5 * f[i] * s[0];
            for j in 1..i {
                conv += f[i - j] * s[j];
            }
            s[i] = (inhom[i] + h * conv) / denom;
        }
        s
    };
    let s = solve(&f);
    let s1 = if spec.is_modified() {
        let f1: Vec<f64> = (0..n)
            .map(|i| spec.first_distribution().density(grid.time(i)))
            .collect::<Result<_, _>>()?;
        Some(solve(&f1))
    } else {
        None
    };
    // residual of the trapezoid-discretized renewal equation
    let residual_of = |s: &[f64], inhom: &[f64]| -> f64 {
        let mut worst = 0.0f64;
        for i in 0..n {
            let mut conv = 0.0;
            if i > 0 {
                conv += 0.5 * f[i] * s[0] + 0.5 * f[0] * s[i];
                for j in 1..i {
                    conv += f[i - j] * s[j];
                }
            }
            worst = worst.max((s[i] - inhom[i] - h * conv).abs());
        }
        worst
    };
    let mut residual = residual_of(&s, &f);
    if let Some(ref s1v) = s1 {
        let f1: Vec<f64> = (0..n)
            .map(|i| spec.first_distribution().density(grid.time(i)))
            .collect::<Result<_, _>>()?;
        residual = residual.max(residual_of(s1v, &f1));
    }
    Ok(Sprinkling { s, s1, residual })
}
