//! CPTP propagators from truncated Neumann series of discrete
//! convolutions over map families.
//!
//! The R-ordered propagator puts the survival weight g𝓖 into the first
//! inter-jump interval, Φ_R = Σ_{n≥0} (f𝓕ℰ)^{∗n} ∗ (g𝓖); the L-ordered
//! one puts it into the last, Φ_L = Σ_{n≥0} (g𝓖) ∗ (ℰf𝓕)^{∗n}. The
//! modified (delayed) renewal propagator draws the first gap from a
//! distinct law f₁: Φ = g₁(t)e^{ℒt} + Σ_{n≥1} (g𝓖) ∗ (ℰf𝓕)^{∗(n−1)} ∗
//! (ℰf₁𝓕). Every series term is a convex combination of compositions of
//! CP maps, so each truncated sum is CP and the full sum is CPTP.
//!
//! Convolutions use the trapezoid rule on a shared uniform grid; the
//! series is truncated when the sup-over-grid Frobenius norm of the
//! latest term drops below `series_tol`.

use rayon::prelude::*;

use crate::error::MemKernelError;
use crate::grid::Grid;
use crate::linalg::{self, CMat};
use crate::liouville::SuperOperator;
use crate::renewal::RenewalSpec;

#[cfg(test)]
fn c(re: f64, im: f64) -> num_complex::Complex64 {
    num_complex::Complex64::new(re, im)
}

/// Time-dependent family of maps 𝓕(t) or 𝓖(t).
#[derive(Debug, Clone)]
pub enum MapFamily {
    /// 𝓕(t) = e^{ℒt} for a fixed generator.
    Semigroup { generator: SuperOperator },
    /// Arbitrary maps sampled on the propagation grid (no interpolation).
    Sampled { maps: Vec<SuperOperator> },
}

impl MapFamily {
    pub fn semigroup(generator: SuperOperator) -> Self {
        MapFamily::Semigroup { generator }
    }

    pub fn sampled(maps: Vec<SuperOperator>) -> Self {
        MapFamily::Sampled { maps }
    }

    pub fn is_semigroup(&self) -> bool {
        matches!(self, MapFamily::Semigroup { .. })
    }

    /// Generator, if this is a semigroup family.
    pub fn generator(&self) -> Option<&SuperOperator> {
        match self {
            MapFamily::Semigroup { generator } => Some(generator),
            MapFamily::Sampled { .. } => None,
        }
    }

    /// Raw superoperator matrices on the grid. Sampled families must
    /// share the propagation grid exactly.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<CMat>, MemKernelError> {
        match self {
            MapFamily::Semigroup { generator } => {
                let step_map = generator.expm(grid.step());
                let d2 = generator.dim() * generator.dim();
                let mut out = Vec::with_capacity(grid.len());
                let mut cur = linalg::eye(d2);
                for _ in 0..grid.len() {
                    out.push(cur.clone());
                    cur = step_map.matrix().dot(&cur);
                }
                Ok(out)
            }
            MapFamily::Sampled { maps } => {
                if maps.len() != grid.len() {
                    return Err(MemKernelError::InvalidDimension(format!(
                        "sampled family has {} maps but the grid has {} points",
                        maps.len(),
                        grid.len()
                    )));
                }
                Ok(maps.iter().map(|m| m.matrix().clone()).collect())
            }
        }
    }
}

/// Operator ordering of the memory kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    R,
    L,
    Modified,
}

/// Everything needed to build one propagator family.
#[derive(Debug, Clone)]
pub struct EvolutionConfig {
    pub dim: usize,
    pub channel: SuperOperator,
    pub family_f: MapFamily,
    pub family_g: MapFamily,
    pub renewal: RenewalSpec,
    pub ordering: Ordering,
    pub grid: Grid,
    pub series_tol: f64,
    pub max_order: usize,
}

impl EvolutionConfig {
    /// Validates the channel (must be CPTP) and, for sampled 𝓖 families,
    /// 𝓖(0) = 𝟙.
    pub fn new(
        dim: usize,
        channel: SuperOperator,
        family_f: MapFamily,
        family_g: MapFamily,
        renewal: RenewalSpec,
        ordering: Ordering,
        grid: Grid,
    ) -> Result<Self, MemKernelError> {
        if channel.dim() != dim {
            return Err(MemKernelError::InvalidDimension(
                "channel dimension mismatch".into(),
            ));
        }
        let diag = channel.is_cptp(1e-7);
        if !diag.passes() {
            return Err(MemKernelError::InvalidArgument(format!(
                "channel not CP/TP (min Choi eig {:.3e}, trace defect {:.3e})",
                diag.min_choi_eig, diag.trace_defect
            )));
        }
        if let MapFamily::Sampled { maps } = &family_g {
            if let Some(first) = maps.first() {
                let dev = linalg::max_abs(
                    &(first.matrix() - &linalg::eye(dim * dim)),
                );
                if dev > 1e-8 {
                    return Err(MemKernelError::InvalidArgument(
                        "sampled 𝓖 family must satisfy 𝓖(0) = 𝟙".into(),
                    ));
                }
            }
        }
        Ok(Self {
            dim,
            channel,
            family_f,
            family_g,
            renewal,
            ordering,
            grid,
            series_tol: 1e-10,
            max_order: 64,
        })
    }

    pub fn with_series_tol(mut self, tol: f64) -> Self {
        self.series_tol = tol;
        self
    }

    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = max_order;
        self
    }
}

/// Per-grid-point diagnostics of a propagator series.
#[derive(Debug, Clone, Copy)]
pub struct PointDiagnostics {
    pub trace_defect: f64,
    pub min_choi_eig: f64,
    /// highest series order that still contributed ≥ series_tol here
    pub truncation_order: usize,
    /// norm of the final series term at this point
    pub last_term_norm: f64,
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub grid: Grid,
    pub propagators: Vec<SuperOperator>,
    pub diagnostics: Vec<PointDiagnostics>,
    /// order at which the sup-grid term norm dropped below series_tol
    pub truncation_order: usize,
    /// whether that happened within max_order
    pub truncated: bool,
    pub flags: Vec<String>,
}

impl EvolutionResult {
    /// States Φ(t_i)ρ₀ as density-matrix arrays.
    pub fn states(&self, rho0: &CMat) -> Vec<CMat> {
        self.propagators.iter().map(|p| p.apply(rho0)).collect()
    }

    /// Sup over the grid of the entrywise distance to another result.
    pub fn max_deviation(&self, other: &EvolutionResult) -> f64 {
        self.propagators
            .iter()
            .zip(&other.propagators)
            .map(|(a, b)| linalg::max_abs(&(a.matrix() - b.matrix())))
            .fold(0.0, f64::max)
    }

    pub fn worst_trace_defect(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.trace_defect).fold(0.0, f64::max)
    }

    pub fn worst_choi_min(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.min_choi_eig)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Trapezoid discrete convolution of superoperator samples,
/// (X∗Y)_i = h(½X_iY_0 + Σ_{0<j<i} X_{i−j}Y_j + ½X_0Y_i).
fn convolve(h: f64, x: &[CMat], y: &[CMat]) -> Vec<CMat> {
    let d2 = x[0].nrows();
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            if i == 0 {
                return CMat::zeros((d2, d2));
            }
            let mut acc: CMat = x[i].dot(&y[0]) + x[0].dot(&y[i]);
            acc.mapv_inplace(|z| z * 0.5);
            for j in 1..i {
                acc += &x[i - j].dot(&y[j]);
            }
            acc.mapv_inplace(|z| z * h);
            acc
        })
        .collect()
}

/// Multiply each grid sample by a scalar weight.
fn weighted(weights: &[f64], mats: &[CMat]) -> Vec<CMat> {
    weights
        .iter()
        .zip(mats)
        .map(|(&w, m)| m.mapv(|z| z * w))
        .collect()
}

struct SeriesAccumulator {
    sum: Vec<CMat>,
    point_order: Vec<usize>,
    point_last_norm: Vec<f64>,
    tol: f64,
}

impl SeriesAccumulator {
    fn new(zeroth: Vec<CMat>, tol: f64) -> Self {
        let n = zeroth.len();
        Self {
            sum: zeroth,
            point_order: vec![0; n],
            point_last_norm: vec![0.0; n],
            tol,
        }
    }

    /// Add one series term; returns its sup-grid norm.
    fn push(&mut self, order: usize, term: &[CMat]) -> f64 {
        let mut worst = 0.0f64;
        for (i, t) in term.iter().enumerate() {
            self.sum[i] += t;
            let norm = linalg::fro_norm(t);
            self.point_last_norm[i] = norm;
            if norm >= self.tol {
                self.point_order[i] = order;
            }
            worst = worst.max(norm);
        }
        worst
    }
}

fn finish(
    cfg: &EvolutionConfig,
    acc: SeriesAccumulator,
    truncation_order: usize,
    truncated: bool,
    last_sup: f64,
) -> Result<EvolutionResult, MemKernelError> {
    let mut flags = Vec::new();
    if !truncated {
        flags.push(format!(
            "series not converged by order {}: sup term norm {:.3e} ≥ tol {:.1e}; \
             remainder bounded by the renewal counting tail",
            cfg.max_order, last_sup, cfg.series_tol
        ));
    }
    let dim = cfg.dim;
    let diag_raw: Vec<(SuperOperator, f64, f64)> = acc
        .sum
        .into_par_iter()
        .map(|m| {
            let sop = SuperOperator::new(dim, m)?;
            let d = sop.is_cptp(1e-7);
            Ok((sop, d.trace_defect, d.min_choi_eig))
        })
        .collect::<Result<_, MemKernelError>>()?;
    let mut propagators = Vec::with_capacity(diag_raw.len());
    let mut diagnostics = Vec::with_capacity(diag_raw.len());
    for (i, (sop, trace_defect, min_choi_eig)) in diag_raw.into_iter().enumerate() {
        propagators.push(sop);
        diagnostics.push(PointDiagnostics {
            trace_defect,
            min_choi_eig,
            truncation_order: acc.point_order[i],
            last_term_norm: acc.point_last_norm[i],
        });
    }
    Ok(EvolutionResult {
        grid: cfg.grid,
        propagators,
        diagnostics,
        truncation_order,
        truncated,
        flags,
    })
}

/// Dispatch on `cfg.ordering`.
pub fn propagate(cfg: &EvolutionConfig) -> Result<EvolutionResult, MemKernelError> {
    match cfg.ordering {
        Ordering::R => propagate_r(cfg),
        Ordering::L => propagate_l(cfg),
        Ordering::Modified => propagate_modified(cfg),
    }
}

fn densities(cfg: &EvolutionConfig) -> Result<(Vec<f64>, Vec<f64>), MemKernelError> {
    let grid = &cfg.grid;
    let f: Vec<f64> = (0..grid.len())
        .map(|i| cfg.renewal.base.density(grid.time(i)))
        .collect::<Result<_, _>>()?;
    let g: Vec<f64> = (0..grid.len())
        .map(|i| cfg.renewal.base.survival(grid.time(i)))
        .collect::<Result<_, _>>()?;
    Ok((f, g))
}

/// Φ_R(t) = Σ_{n≥0} (f𝓕ℰ)^{∗n} ∗ (g𝓖)(t).
pub fn propagate_r(cfg: &EvolutionConfig) -> Result<EvolutionResult, MemKernelError> {
    if cfg.ordering != Ordering::R {
        return Err(MemKernelError::InvalidArgument("config ordering is not R".into()));
    }
    let h = cfg.grid.step();
    let (f, g) = densities(cfg)?;
    let f_s = cfg.family_f.sample(&cfg.grid)?;
    let g_s = cfg.family_g.sample(&cfg.grid)?;
    let e = cfg.channel.matrix();
    // jump factor f(t)𝓕(t)ℰ, applied to the left of everything earlier
    let jump: Vec<CMat> = f_s
        .iter()
        .zip(&f)
        .map(|(m, &w)| m.dot(e).mapv(|z| z * w))
        .collect();
    let zeroth = weighted(&g, &g_s);
    let mut acc = SeriesAccumulator::new(zeroth.clone(), cfg.series_tol);
    let mut term = zeroth;
    let mut truncated = false;
    let mut truncation_order = cfg.max_order;
    let mut last_sup = f64::INFINITY;
    for order in 1..=cfg.max_order {
        term = convolve(h, &jump, &term);
        last_sup = acc.push(order, &term);
        if last_sup < cfg.series_tol {
            truncated = true;
            truncation_order = order;
            break;
        }
    }
    finish(cfg, acc, truncation_order, truncated, last_sup)
}

/// Φ_L(t) = Σ_{n≥0} (g𝓖) ∗ (ℰf𝓕)^{∗n}(t).
pub fn propagate_l(cfg: &EvolutionConfig) -> Result<EvolutionResult, MemKernelError> {
    if cfg.ordering != Ordering::L {
        return Err(MemKernelError::InvalidArgument("config ordering is not L".into()));
    }
    let h = cfg.grid.step();
    let (f, g) = densities(cfg)?;
    let f_s = cfg.family_f.sample(&cfg.grid)?;
    let g_s = cfg.family_g.sample(&cfg.grid)?;
    let e = cfg.channel.matrix();
    // jump factor ℰf(t)𝓕(t), applied to the right (earlier times)
    let jump: Vec<CMat> = f_s
        .iter()
        .zip(&f)
        .map(|(m, &w)| e.dot(m).mapv(|z| z * w))
        .collect();
    let zeroth = weighted(&g, &g_s);
    let mut acc = SeriesAccumulator::new(zeroth.clone(), cfg.series_tol);
    let mut term = zeroth;
    let mut truncated = false;
    let mut truncation_order = cfg.max_order;
    let mut last_sup = f64::INFINITY;
    for order in 1..=cfg.max_order {
        term = convolve(h, &term, &jump);
        last_sup = acc.push(order, &term);
        if last_sup < cfg.series_tol {
            truncated = true;
            truncation_order = order;
            break;
        }
    }
    finish(cfg, acc, truncation_order, truncated, last_sup)
}

/// Modified-renewal propagator g₁e^{ℒt} + Σ_{n≥1}
/// (g𝓖)∗(ℰf𝓕)^{∗(n−1)}∗(ℰf₁𝓕); requires semigroup families and a first
/// waiting-time law.
pub fn propagate_modified(cfg: &EvolutionConfig) -> Result<EvolutionResult, MemKernelError> {
    if cfg.ordering != Ordering::Modified {
        return Err(MemKernelError::InvalidArgument(
            "config ordering is not Modified".into(),
        ));
    }
    if !cfg.renewal.is_modified() {
        return Err(MemKernelError::MissingFirstDistribution);
    }
    if !cfg.family_f.is_semigroup() || !cfg.family_g.is_semigroup() {
        return Err(MemKernelError::InvalidArgument(
            "modified-renewal propagation requires semigroup families".into(),
        ));
    }
    let h = cfg.grid.step();
    let (f, g) = densities(cfg)?;
    let first = cfg.renewal.first_distribution();
    let f1: Vec<f64> = (0..cfg.grid.len())
        .map(|i| first.density(cfg.grid.time(i)))
        .collect::<Result<_, _>>()?;
    let g1: Vec<f64> = (0..cfg.grid.len())
        .map(|i| first.survival(cfg.grid.time(i)))
        .collect::<Result<_, _>>()?;
    let f_s = cfg.family_f.sample(&cfg.grid)?;
    let g_s = cfg.family_g.sample(&cfg.grid)?;
    let e = cfg.channel.matrix();
    let jump: Vec<CMat> = f_s
        .iter()
        .zip(&f)
        .map(|(m, &w)| e.dot(m).mapv(|z| z * w))
        .collect();
    let first_jump: Vec<CMat> = f_s
        .iter()
        .zip(&f1)
        .map(|(m, &w)| e.dot(m).mapv(|z| z * w))
        .collect();
    // zeroth term: no jump up to t, first gap still running
    let zeroth = weighted(&g1, &g_s);
    let survival_part = weighted(&g, &g_s);
    let mut acc = SeriesAccumulator::new(zeroth, cfg.series_tol);
    // u_n = (g𝓖)∗(ℰf𝓕)^{∗(n−1)}; term_n = u_n ∗ (ℰf₁𝓕)
    let mut u = survival_part;
    let mut truncated = false;
    let mut truncation_order = cfg.max_order;
    let mut last_sup = f64::INFINITY;
    for order in 1..=cfg.max_order {
        let term = convolve(h, &u, &first_jump);
        last_sup = acc.push(order, &term);
        if last_sup < cfg.series_tol {
            truncated = true;
            truncation_order = order;
            break;
        }
        u = convolve(h, &u, &jump);
    }
    finish(cfg, acc, truncation_order, truncated, last_sup)
}

/// Partial sum P(N(t) ≤ n_max) = p⁰(t) + Σ_{n=1}^{n_max} (g∗f^{∗(n−1)}∗f₁)(t)
/// for the renewal counting process, by scalar trapezoid quadrature on
/// `n_steps` intervals; tends to 1 as n_max grows.
pub fn exclusive_density_norm(
    renewal: &RenewalSpec,
    n_max: usize,
    t: f64,
    n_steps: usize,
) -> Result<f64, MemKernelError> {
    if t < 0.0 {
        return Err(MemKernelError::InvalidArgument("t must be ≥ 0".into()));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let grid = Grid::new(t, n_steps)?;
    let h = grid.step();
    let n = grid.len();
    let f: Vec<f64> = (0..n)
        .map(|i| renewal.base.density(grid.time(i)))
        .collect::<Result<_, _>>()?;
    let g: Vec<f64> = (0..n)
        .map(|i| renewal.base.survival(grid.time(i)))
        .collect::<Result<_, _>>()?;
    let first = renewal.first_distribution();
    let mut total = first.survival(t)?;
    if n_max == 0 {
        return Ok(total);
    }
    let conv_at_end = |x: &[f64], y: &[f64]| -> f64 {
        let i = n - 1;
        let mut acc = 0.5 * (x[i] * y[0] + x[0] * y[i]);
        for j in 1..i {
            acc += x[i - j] * y[j];
        }
        h * acc
    };
    let conv_full = |x: &[f64], y: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                if i == 0 {
                    return 0.0;
                }
                let mut acc = 0.5 * (x[i] * y[0] + x[0] * y[i]);
                for j in 1..i {
                    acc += x[i - j] * y[j];
                }
                h * acc
            })
            .collect()
    };
    // u_n = f^{∗(n−1)} ∗ f₁
    let mut u: Vec<f64> = (0..n)
        .map(|i| first.density(grid.time(i)))
        .collect::<Result<_, _>>()?;
    for _ in 1..=n_max {
        total += conv_at_end(&g, &u);
        u = conv_full(&f, &u);
    }
    Ok(total)
}

/// Sup-grid change of the propagators when the step is halved
/// (quadrature-error visibility); only meaningful for semigroup families.
pub fn richardson_defect(cfg: &EvolutionConfig) -> Result<f64, MemKernelError> {
    if !cfg.family_f.is_semigroup() || !cfg.family_g.is_semigroup() {
        return Err(MemKernelError::InvalidArgument(
            "Richardson check requires semigroup families (sampled maps cannot be refined)"
                .into(),
        ));
    }
    let coarse = propagate(cfg)?;
    let mut fine_cfg = cfg.clone();
    fine_cfg.grid = cfg.grid.refined();
    let fine = propagate(&fine_cfg)?;
    let mut worst = 0.0f64;
    for i in 0..coarse.grid.len() {
        let diff = coarse.propagators[i].matrix() - fine.propagators[2 * i].matrix();
        worst = worst.max(linalg::max_abs(&diff));
    }
    Ok(worst)
}
