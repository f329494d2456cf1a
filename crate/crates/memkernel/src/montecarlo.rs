//! Trajectory-level stochastic simulation: sample renewal jump times,
//! compose maps along each trajectory, average to reproduce the
//! deterministic propagators.
//!
//! Trajectories realize the exclusive probability densities with unit
//! importance weight. For the L ordering the sampled jump times are used
//! directly: earlier segments contribute ℰ𝓕(gap), the final segment
//! 𝓖(t − s_last). For the R ordering the integrand carries the survival
//! weight in the first interval; reflecting the jump times t_j ↦ t −
//! s_{n+1−j} maps the R integrand exactly onto the forward-sampled
//! ordinary renewal density, giving the attribution
//! 𝓕(s₁)ℰ𝓕(s₂−s₁)ℰ⋯ℰ𝓖(t−s_n) with 𝓖 innermost. Modified processes
//! draw the first gap from f₁ and otherwise follow the L attribution.
//!
//! Reproducibility: each trajectory runs on its own counter-based RNG
//! stream keyed by (seed, trajectory index), and aggregation is a
//! deterministic chunked reduction in trajectory order — results are
//! bit-identical for any worker count.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::MemKernelError;
use crate::linalg::{self, CMat, CVec};
use crate::liouville::{devectorize, vectorize};
use crate::series::{EvolutionConfig, MapFamily, Ordering};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// One sampled renewal trajectory evaluated at a single time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub jump_times: Vec<f64>,
    pub n_jumps: usize,
    pub final_state: CMat,
}

/// Ensemble mean with componentwise standard errors per grid point.
#[derive(Debug, Clone)]
pub struct EnsembleEstimate {
    pub mean_states: Vec<CMat>,
    /// per grid point, per matrix entry: σ/√n of the complex entry
    /// (combined real and imaginary variance)
    pub stderr: Vec<Array2<f64>>,
    pub n_trajectories: usize,
    pub seed: u64,
}

/// Apply a family map of duration `tau` to a vectorized state.
/// Semigroup families use exact matrix exponentials; sampled families
/// snap to the nearest grid point.
fn apply_family(
    family: &MapFamily,
    samples: &Option<Vec<CMat>>,
    cfg: &EvolutionConfig,
    tau: f64,
    v: &CVec,
) -> CVec {
    match family {
        MapFamily::Semigroup { generator } => generator.expm(tau).matrix().dot(v),
        MapFamily::Sampled { .. } => {
            let idx = cfg.grid.nearest_index(tau);
            samples.as_ref().unwrap()[idx].dot(v)
        }
    }
}

fn family_matrix(
    family: &MapFamily,
    samples: &Option<Vec<CMat>>,
    cfg: &EvolutionConfig,
    tau: f64,
) -> CMat {
    match family {
        MapFamily::Semigroup { generator } => generator.expm(tau).matrix().clone(),
        MapFamily::Sampled { .. } => {
            let idx = cfg.grid.nearest_index(tau);
            samples.as_ref().unwrap()[idx].clone()
        }
    }
}

/// Draw jump times in [0, t_max]; the modified process draws the first
/// gap from f₁.
fn sample_jump_times<R: Rng + ?Sized>(
    cfg: &EvolutionConfig,
    t_max: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut times = Vec::new();
    let first = if cfg.ordering == Ordering::Modified {
        cfg.renewal.first_distribution()
    } else {
        &cfg.renewal.base
    };
    let mut t = first.sample(rng);
    while t <= t_max {
        times.push(t);
        t += cfg.renewal.base.sample(rng);
    }
    times
}

struct TrajectoryEngine<'a> {
    cfg: &'a EvolutionConfig,
    f_samples: Option<Vec<CMat>>,
    g_samples: Option<Vec<CMat>>,
    step_g: Option<CMat>,
}

impl<'a> TrajectoryEngine<'a> {
    fn new(cfg: &'a EvolutionConfig) -> Result<Self, MemKernelError> {
        if cfg.ordering == Ordering::Modified && !cfg.renewal.is_modified() {
            return Err(MemKernelError::MissingFirstDistribution);
        }
        let f_samples = match &cfg.family_f {
            MapFamily::Sampled { .. } => Some(cfg.family_f.sample(&cfg.grid)?),
            MapFamily::Semigroup { .. } => None,
        };
        let (g_samples, step_g) = match &cfg.family_g {
            MapFamily::Sampled { .. } => (Some(cfg.family_g.sample(&cfg.grid)?), None),
            MapFamily::Semigroup { generator } => {
                (None, Some(generator.expm(cfg.grid.step()).matrix().clone()))
            }
        };
        Ok(Self {
            cfg,
            f_samples,
            g_samples,
            step_g,
        })
    }

    /// States Φ(t_i)ρ₀ along one trajectory at every grid point.
    fn states_on_grid<R: Rng + ?Sized>(&self, rho0_vec: &CVec, rng: &mut R) -> Vec<CVec> {
        let cfg = self.cfg;
        let grid = &cfg.grid;
        let jumps = sample_jump_times(cfg, grid.t_max(), rng);
        let e = cfg.channel.matrix();
        match cfg.ordering {
            Ordering::L | Ordering::Modified => {
                // prefix states v_k = [ℰ𝓕(gap_k)]⋯[ℰ𝓕(gap_1)] ρ₀
                let mut prefixes = Vec::with_capacity(jumps.len() + 1);
                prefixes.push(rho0_vec.clone());
                let mut prev_time = 0.0;
                for &s in &jumps {
                    let gap = s - prev_time;
                    let moved =
                        apply_family(&cfg.family_f, &self.f_samples, cfg, gap, prefixes.last().unwrap());
                    prefixes.push(e.dot(&moved));
                    prev_time = s;
                }
                // walk the grid applying 𝓖 on the open last segment
                let mut out = Vec::with_capacity(grid.len());
                let mut k = 0usize;
                let mut w = prefixes[0].clone();
                for i in 0..grid.len() {
                    let t = grid.time(i);
                    let mut jumped = false;
                    while k < jumps.len() && jumps[k] <= t {
                        k += 1;
                        jumped = true;
                    }
                    if i == 0 {
                        out.push(w.clone());
                        continue;
                    }
                    if jumped {
                        let tau = t - jumps[k - 1];
                        w = apply_family(&cfg.family_g, &self.g_samples, cfg, tau, &prefixes[k]);
                    } else if let Some(step) = &self.step_g {
                        w = step.dot(&w);
                    } else {
                        let last = if k == 0 { 0.0 } else { jumps[k - 1] };
                        w = apply_family(&cfg.family_g, &self.g_samples, cfg, t - last, &prefixes[k]);
                    }
                    out.push(w.clone());
                }
                out
            }
            Ordering::R => {
                // operator prefixes O_k = 𝓕(s₁)ℰ⋯𝓕(s_k−s_{k−1})ℰ; the
                // survival map acts innermost on the remainder interval
                let d2 = cfg.dim * cfg.dim;
                let mut ops: Vec<CMat> = Vec::with_capacity(jumps.len() + 1);
                ops.push(linalg::eye(d2));
                let mut prev_time = 0.0;
                for &s in &jumps {
                    let gap = s - prev_time;
                    let seg = family_matrix(&cfg.family_f, &self.f_samples, cfg, gap);
                    ops.push(ops.last().unwrap().dot(&seg).dot(e));
                    prev_time = s;
                }
                let mut out = Vec::with_capacity(grid.len());
                let mut k = 0usize;
                let mut inner = rho0_vec.clone();
                for i in 0..grid.len() {
                    let t = grid.time(i);
                    let mut jumped = false;
                    while k < jumps.len() && jumps[k] <= t {
                        k += 1;
                        jumped = true;
                    }
                    if i == 0 {
                        out.push(inner.clone());
                        continue;
                    }
                    if jumped {
                        let tau = t - jumps[k - 1];
                        inner = apply_family(&cfg.family_g, &self.g_samples, cfg, tau, rho0_vec);
                    } else if let Some(step) = &self.step_g {
                        inner = step.dot(&inner);
                    } else {
                        let last = if k == 0 { 0.0 } else { jumps[k - 1] };
                        inner =
                            apply_family(&cfg.family_g, &self.g_samples, cfg, t - last, rho0_vec);
                    }
                    out.push(ops[k].dot(&inner));
                }
                out
            }
        }
    }
}

/// Sample one trajectory and its state at time t.
pub fn sample_trajectory<R: Rng + ?Sized>(
    cfg: &EvolutionConfig,
    t: f64,
    rho0: &CMat,
    rng: &mut R,
) -> Result<Trajectory, MemKernelError> {
    let engine = TrajectoryEngine::new(cfg)?;
    let jumps = sample_jump_times(cfg, t, rng);
    // reuse the grid walker on a single evaluation time by composing
    // the maps directly
    let e = cfg.channel.matrix();
    let rho0_vec = vectorize(rho0);
    let state_vec = match cfg.ordering {
        Ordering::L | Ordering::Modified => {
            let mut v = rho0_vec;
            let mut prev = 0.0;
            for &s in &jumps {
                let moved = apply_family(&cfg.family_f, &engine.f_samples, cfg, s - prev, &v);
                v = e.dot(&moved);
                prev = s;
            }
            let last = jumps.last().copied().unwrap_or(0.0);
            apply_family(&cfg.family_g, &engine.g_samples, cfg, t - last, &v)
        }
        Ordering::R => {
            let last = jumps.last().copied().unwrap_or(0.0);
            let mut v = apply_family(&cfg.family_g, &engine.g_samples, cfg, t - last, &rho0_vec);
            let mut segments: Vec<f64> = Vec::with_capacity(jumps.len());
            let mut prev = 0.0;
            for &s in &jumps {
                segments.push(s - prev);
                prev = s;
            }
            for &gap in segments.iter().rev() {
                v = apply_family(&cfg.family_f, &engine.f_samples, cfg, gap, &e.dot(&v));
            }
            v
        }
    };
    Ok(Trajectory {
        n_jumps: jumps.len(),
        jump_times: jumps,
        final_state: devectorize(&state_vec),
    })
}

const CHUNK: usize = 256;

/// Ensemble average over `n_traj` seeded trajectories; bit-reproducible
/// for a given (seed, n_traj) regardless of thread count.
pub fn ensemble_average(
    cfg: &EvolutionConfig,
    n_traj: usize,
    seed: u64,
    rho0: &CMat,
) -> Result<EnsembleEstimate, MemKernelError> {
    if n_traj < 100 {
        return Err(MemKernelError::InvalidArgument(
            "at least 100 trajectories required".into(),
        ));
    }
    let engine = TrajectoryEngine::new(cfg)?;
    let rho0_vec = vectorize(rho0);
    let n_pts = cfg.grid.len();
    let d2 = cfg.dim * cfg.dim;
    // per-chunk partial sums, folded in chunk order for determinism
    let chunk_ids: Vec<usize> = (0..n_traj.div_ceil(CHUNK)).collect();
    let partials: Vec<(Vec<CVec>, Vec<Vec<f64>>)> = chunk_ids
        .par_iter()
        .map(|&chunk| {
            let lo = chunk * CHUNK;
            let hi = ((chunk + 1) * CHUNK).min(n_traj);
            let mut sum: Vec<CVec> = (0..n_pts).map(|_| CVec::zeros(d2)).collect();
            let mut sum_sq: Vec<Vec<f64>> = vec![vec![0.0; d2]; n_pts];
            for traj in lo..hi {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                rng.set_stream(traj as u64);
                let states = engine.states_on_grid(&rho0_vec, &mut rng);
                for (i, s) in states.iter().enumerate() {
                    sum[i] += s;
                    for (j, z) in s.iter().enumerate() {
                        sum_sq[i][j] += z.norm_sqr();
                    }
                }
            }
            (sum, sum_sq)
        })
        .collect();
    let mut sum: Vec<CVec> = (0..n_pts).map(|_| CVec::zeros(d2)).collect();
    let mut sum_sq: Vec<Vec<f64>> = vec![vec![0.0; d2]; n_pts];
    for (ps, pq) in partials {
        for i in 0..n_pts {
            sum[i] += &ps[i];
            for j in 0..d2 {
                sum_sq[i][j] += pq[i][j];
            }
        }
    }
    let nf = n_traj as f64;
    let mut mean_states = Vec::with_capacity(n_pts);
    let mut stderr = Vec::with_capacity(n_pts);
    for i in 0..n_pts {
        let mean_vec = sum[i].mapv(|z| z / c(nf, 0.0));
        let mut err = Array2::<f64>::zeros((cfg.dim, cfg.dim));
        for j in 0..d2 {
            let var = (sum_sq[i][j] / nf - mean_vec[j].norm_sqr()).max(0.0);
            // entry (row, col) of the devectorized state: j = row + d·col
            let row = j % cfg.dim;
            let col = j / cfg.dim;
            err[[row, col]] = (var / nf).sqrt();
        }
        mean_states.push(devectorize(&mean_vec));
        stderr.push(err);
    }
    Ok(EnsembleEstimate {
        mean_states,
        stderr,
        n_trajectories: n_traj,
        seed,
    })
}
