//! Classical discrete-state semi-Markov processes: sojourn times follow
//! per-state waiting-time laws, jumps follow a column-stochastic matrix
//! π (π[[n,k]] is the k→n probability).
//!
//! The transition-probability matrix T(t) solves the first-jump
//! (renewal) Volterra equation T(t) = diag(g_m(t)) + ∫₀ᵗ T(t−τ) C(τ) dτ
//! with C(τ)[[k,m]] = π[[k,m]] f_m(τ). This module is both the paper's
//! classical starting point and the commuting-limit oracle for the
//! quantum propagators: embedding π as the transition channel
//! ρ ↦ Σ π[[n,k]] ⟨k|ρ|k⟩ |n⟩⟨n| with trivial map families must
//! reproduce T(t) on the diagonal.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

use crate::error::MemKernelError;
use crate::grid::Grid;
use crate::linalg::{self, CMat};
use crate::liouville::{DensityMatrix, SuperOperator};
use crate::renewal::{RenewalSpec, WaitingTimeDistribution};
use crate::series::{self, EvolutionConfig, MapFamily, Ordering};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone)]
pub struct SemiMarkovSpec {
    n_states: usize,
    pi: Array2<f64>,
    wtds: Vec<WaitingTimeDistribution>,
    /// all states share one waiting-time law (required by the quantum
    /// embedding, which carries a single f)
    shared_wtd: bool,
}

impl SemiMarkovSpec {
    pub fn new(
        pi: Array2<f64>,
        wtds: Vec<WaitingTimeDistribution>,
    ) -> Result<Self, MemKernelError> {
        let n = pi.nrows();
        if pi.ncols() != n || n == 0 {
            return Err(MemKernelError::InvalidDimension(
                "π must be square and nonempty".into(),
            ));
        }
        if wtds.len() != n {
            return Err(MemKernelError::InvalidDimension(
                "one waiting-time law per state required".into(),
            ));
        }
        for k in 0..n {
            let mut col = 0.0;
            for row in 0..n {
                if pi[[row, k]] < 0.0 {
                    return Err(MemKernelError::InvalidArgument(
                        "π entries must be ≥ 0".into(),
                    ));
                }
                col += pi[[row, k]];
            }
            if (col - 1.0).abs() > 1e-12 {
                return Err(MemKernelError::InvalidArgument(format!(
                    "π column {k} sums to {col}, not 1"
                )));
            }
        }
        Ok(Self {
            n_states: n,
            pi,
            wtds,
            shared_wtd: false,
        })
    }

    /// All states share the same waiting-time law.
    pub fn with_shared_wtd(
        pi: Array2<f64>,
        wtd: WaitingTimeDistribution,
    ) -> Result<Self, MemKernelError> {
        let n = pi.nrows();
        let mut spec = Self::new(pi, vec![wtd; n])?;
        spec.shared_wtd = true;
        Ok(spec)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn pi(&self) -> &Array2<f64> {
        &self.pi
    }

    pub fn wtd(&self, state: usize) -> &WaitingTimeDistribution {
        &self.wtds[state]
    }

    /// Transition channel ρ ↦ Σ π[[n,k]] ⟨k|ρ|k⟩ |n⟩⟨n| (Kraus operators
    /// √π[[n,k]] |n⟩⟨k|).
    pub fn transition_channel(&self) -> SuperOperator {
        let n = self.n_states;
        let mut kraus = Vec::new();
        for k in 0..n {
            for row in 0..n {
                if self.pi[[row, k]] > 0.0 {
                    let mut op = CMat::zeros((n, n));
                    op[[row, k]] = c(self.pi[[row, k]].sqrt(), 0.0);
                    kraus.push(op);
                }
            }
        }
        SuperOperator::from_kraus(n, &kraus)
    }
}

#[derive(Debug, Clone)]
pub struct SemiMarkovSolution {
    pub grid: Grid,
    /// T(t_i); column m is the state distribution given start in m
    pub t_mats: Vec<Array2<f64>>,
    /// max grid residual of the discretized renewal equation
    pub residual: f64,
}

/// Solve the first-jump Volterra equation for T(t) on the grid
/// (trapezoid product integration).
pub fn solve_t(spec: &SemiMarkovSpec, grid: &Grid) -> Result<SemiMarkovSolution, MemKernelError> {
    let n = spec.n_states;
    let h = grid.step();
    let npts = grid.len();
    // C(τ)[[k,m]] = π[[k,m]] f_m(τ); inhomogeneity diag(g_m)
    let mut c_mats = Vec::with_capacity(npts);
    let mut g_diags = Vec::with_capacity(npts);
    for i in 0..npts {
        let t = grid.time(i);
        let mut cm = Array2::<f64>::zeros((n, n));
        let mut gd = Array2::<f64>::zeros((n, n));
        for m in 0..n {
            let f = spec.wtds[m].density(t)?;
            for k in 0..n {
                cm[[k, m]] = spec.pi[[k, m]] * f;
            }
            gd[[m, m]] = spec.wtds[m].survival(t)?;
        }
        c_mats.push(cm);
        g_diags.push(gd);
    }
    // T_i (𝟙 − h/2 C_0) = G_i + h(Σ_{0<j<i} T_{i−j} C_j + ½ T_0 C_i)
    let gate = Array2::<f64>::eye(n) - &c_mats[0].mapv(|x| 0.5 * h * x);
    let gate_inv = real_inv(&gate)?;
    let mut t_mats: Vec<Array2<f64>> = Vec::with_capacity(npts);
    t_mats.push(Array2::eye(n));
    for i in 1..npts {
        let mut rhs = g_diags[i].clone() + t_mats[0].dot(&c_mats[i]).mapv(|x| 0.5 * h * x);
        for j in 1..i {
            rhs = rhs + t_mats[i - j].dot(&c_mats[j]).mapv(|x| h * x);
        }
        t_mats.push(rhs.dot(&gate_inv));
    }
    let mut residual = 0.0f64;
    for i in 0..npts {
        let mut conv = Array2::<f64>::zeros((n, n));
        if i > 0 {
            conv = t_mats[i].dot(&c_mats[0]).mapv(|x| 0.5 * x)
                + t_mats[0].dot(&c_mats[i]).mapv(|x| 0.5 * x);
            for j in 1..i {
                conv = conv + t_mats[i - j].dot(&c_mats[j]);
            }
            conv.mapv_inplace(|x| x * h);
        }
        let defect = &t_mats[i] - &g_diags[i] - &conv;
        residual = residual.max(defect.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    }
    Ok(SemiMarkovSolution {
        grid: *grid,
        t_mats,
        residual,
    })
}

fn real_inv(a: &Array2<f64>) -> Result<Array2<f64>, MemKernelError> {
    let ac = a.mapv(|x| c(x, 0.0));
    Ok(linalg::inv(&ac)?.mapv(|z| z.re))
}

/// One state path: (arrival time, state), starting with (0, initial).
pub fn gillespie_sample<R: Rng + ?Sized>(
    spec: &SemiMarkovSpec,
    t_max: f64,
    initial: usize,
    rng: &mut R,
) -> Vec<(f64, usize)> {
    let mut path = vec![(0.0, initial)];
    let mut t = 0.0;
    let mut state = initial;
    loop {
        t += spec.wtds[state].sample(rng);
        if t > t_max {
            return path;
        }
        // draw next state from column `state` of π
        let mut u: f64 = rng.gen();
        let mut next = spec.n_states - 1;
        for row in 0..spec.n_states {
            if u < spec.pi[[row, state]] {
                next = row;
                break;
            }
            u -= spec.pi[[row, state]];
        }
        state = next;
        path.push((t, state));
    }
}

/// State occupied at time t along a path.
pub fn state_at(path: &[(f64, usize)], t: f64) -> usize {
    let mut cur = path[0].1;
    for &(s, st) in path {
        if s <= t {
            cur = st;
        } else {
            break;
        }
    }
    cur
}

/// Max deviation between the diagonal of the quantum R/L propagators
/// (transition channel, trivial map families, shared waiting time) and
/// the classical T(t) columns.
pub fn quantum_classical_embedding_check(
    spec: &SemiMarkovSpec,
    grid: &Grid,
) -> Result<f64, MemKernelError> {
    if !spec.shared_wtd {
        return Err(MemKernelError::UnsupportedDistribution(
            "the quantum embedding carries a single waiting-time law; \
             per-state laws are not supported"
                .into(),
        ));
    }
    let classical = solve_t(spec, grid)?;
    let dim = spec.n_states;
    let channel = spec.transition_channel();
    let identity_maps = || {
        MapFamily::sampled((0..grid.len()).map(|_| SuperOperator::identity(dim)).collect())
    };
    let mut worst = 0.0f64;
    for ordering in [Ordering::R, Ordering::L] {
        let cfg = EvolutionConfig::new(
            dim,
            channel.clone(),
            identity_maps(),
            identity_maps(),
            RenewalSpec::ordinary(spec.wtds[0].clone()),
            ordering,
            *grid,
        )?;
        let result = series::propagate(&cfg)?;
        for start in 0..dim {
            let rho0 = DensityMatrix::basis(dim, start);
            let states = result.states(rho0.matrix());
            for (i, s) in states.iter().enumerate() {
                for out in 0..dim {
                    let dev = (s[[out, out]].re - classical.t_mats[i][[out, start]]).abs();
                    worst = worst.max(dev.max(s[[out, out]].im.abs()));
                }
            }
        }
    }
    Ok(worst)
}
