//! JSON scenario schema and conversion into engine objects.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use memkernel::grid::Grid;
use memkernel::linalg::CMat;
use memkernel::liouville::{
    jc_collision_channel, DensityMatrix, LindbladSpec, SuperOperator,
};
use memkernel::renewal::{RenewalSpec, WaitingTimeDistribution};
use memkernel::series::{EvolutionConfig, MapFamily, Ordering};

use crate::CliError;

/// Complex matrix as row-major nested `[re, im]` pairs.
pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

pub fn to_cmat(m: &JsonMatrix) -> Result<CMat, CliError> {
    let rows = m.len();
    if rows == 0 {
        return Err(CliError::Config("empty matrix".into()));
    }
    let cols = m[0].len();
    if m.iter().any(|r| r.len() != cols) {
        return Err(CliError::Config("ragged matrix rows".into()));
    }
    let mut out = CMat::zeros((rows, cols));
    for (i, row) in m.iter().enumerate() {
        for (j, &[re, im]) in row.iter().enumerate() {
            out[[i, j]] = Complex64::new(re, im);
        }
    }
    Ok(out)
}

pub fn from_cmat(m: &CMat) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[[i, j]].re, m[[i, j]].im]).collect())
        .collect()
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelSpec {
    /// Conjugation by a Pauli matrix (dim 2 only).
    PauliConjugation { axis: String },
    /// Completely depolarizing channel ρ ↦ 𝟙/d.
    Depolarizing,
    /// Jaynes-Cummings collision with a fresh two-level atom; acts on the
    /// truncated field space. The leakage out of the truncation is reported.
    JcCollision {
        coupling: f64,
        tau_int: f64,
        field_dim: usize,
        atom_state: JsonMatrix,
    },
    /// Classical transition channel built from a column-stochastic matrix.
    Permutation { pi: Vec<Vec<f64>> },
    /// Channel given by its Kraus operators.
    CustomKraus { operators: Vec<JsonMatrix> },
    /// Channel given directly by its d²×d² superoperator matrix
    /// (column-stacking convention). Rejected unless CPTP.
    CustomSuperop { matrix: JsonMatrix },
}

impl ChannelSpec {
    pub fn build(&self, dim: usize) -> Result<SuperOperator, CliError> {
        match self {
            ChannelSpec::PauliConjugation { axis } => {
                if dim != 2 {
                    return Err(CliError::Config(
                        "pauli-conjugation channel requires dim = 2".into(),
                    ));
                }
                let p = match axis.as_str() {
                    "x" => memkernel::liouville::qubit::sigma_x(),
                    "y" => memkernel::liouville::qubit::sigma_y(),
                    "z" => memkernel::liouville::qubit::sigma_z(),
                    other => {
                        return Err(CliError::Config(format!(
                            "unknown Pauli axis '{other}' (expected x, y, or z)"
                        )))
                    }
                };
                Ok(SuperOperator::conjugation(&p, &p))
            }
            ChannelSpec::Depolarizing => Ok(SuperOperator::depolarizing(dim)),
            ChannelSpec::JcCollision {
                coupling,
                tau_int,
                field_dim,
                atom_state,
            } => {
                if *field_dim != dim {
                    return Err(CliError::Config(
                        "jc-collision field_dim must equal scenario dim".into(),
                    ));
                }
                let atom = to_cmat(atom_state)?;
                let (ch, _leak) = jc_collision_channel(*coupling, *tau_int, *field_dim, &atom)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                Ok(ch)
            }
            ChannelSpec::Permutation { pi } => {
                let n = pi.len();
                if n != dim || pi.iter().any(|r| r.len() != dim) {
                    return Err(CliError::Config(
                        "permutation matrix must be dim×dim".into(),
                    ));
                }
                for k in 0..n {
                    let col: f64 = (0..n).map(|i| pi[i][k]).sum();
                    if (col - 1.0).abs() > 1e-10 || pi.iter().any(|r| r[k] < 0.0) {
                        return Err(CliError::Config(
                            "permutation matrix columns must be nonnegative and sum to 1"
                                .into(),
                        ));
                    }
                }
                // Kraus operators √π[[n,k]] |n⟩⟨k| of the classical transition channel
                let mut kraus = Vec::new();
                for to in 0..n {
                    for from in 0..n {
                        if pi[to][from] > 0.0 {
                            let mut k = CMat::zeros((n, n));
                            k[[to, from]] = Complex64::new(pi[to][from].sqrt(), 0.0);
                            kraus.push(k);
                        }
                    }
                }
                Ok(SuperOperator::from_kraus(dim, &kraus))
            }
            ChannelSpec::CustomKraus { operators } => {
                let kraus: Vec<CMat> = operators
                    .iter()
                    .map(|m| to_cmat(m))
                    .collect::<Result<_, _>>()?;
                if kraus.iter().any(|k| k.dim() != (dim, dim)) {
                    return Err(CliError::Config(
                        "Kraus operators must be dim×dim".into(),
                    ));
                }
                Ok(SuperOperator::from_kraus(dim, &kraus))
            }
            ChannelSpec::CustomSuperop { matrix } => {
                let m = to_cmat(matrix)?;
                SuperOperator::new(dim, m).map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct JumpOpSpec {
    pub op: JsonMatrix,
    pub rate: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    /// Frozen dynamics: the family is the identity at every time.
    Identity,
    /// Semigroup generated by a Lindblad generator.
    Lindblad {
        #[serde(default)]
        hamiltonian: Option<JsonMatrix>,
        #[serde(default)]
        jump_ops: Vec<JumpOpSpec>,
    },
}

impl FamilySpec {
    pub fn build(&self, dim: usize) -> Result<MapFamily, CliError> {
        match self {
            FamilySpec::Identity => Ok(MapFamily::semigroup(SuperOperator::zero(dim))),
            FamilySpec::Lindblad {
                hamiltonian,
                jump_ops,
            } => {
                let h = match hamiltonian {
                    Some(m) => to_cmat(m)?,
                    None => CMat::zeros((dim, dim)),
                };
                let jumps: Vec<(CMat, f64)> = jump_ops
                    .iter()
                    .map(|j| Ok((to_cmat(&j.op)?, j.rate)))
                    .collect::<Result<_, CliError>>()?;
                let spec = LindbladSpec::new(h, jumps)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                Ok(MapFamily::semigroup(spec.generator()))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawSpec {
    Exponential { rate: f64 },
    Erlang { stages: usize, rate: f64 },
    Hyperexponential { components: Vec<(f64, f64)> },
    PhaseType { alpha: Vec<f64>, subgen: Vec<Vec<f64>> },
    Uniform { b: f64, n_points: usize },
    Tabulated { step: f64, density: Vec<f64> },
}

impl LawSpec {
    pub fn build(&self) -> Result<WaitingTimeDistribution, CliError> {
        let law = match self {
            LawSpec::Exponential { rate } => WaitingTimeDistribution::exponential(*rate),
            LawSpec::Erlang { stages, rate } => {
                WaitingTimeDistribution::erlang(*stages, *rate)
            }
            LawSpec::Hyperexponential { components } => {
                WaitingTimeDistribution::hyperexponential(components)
            }
            LawSpec::PhaseType { alpha, subgen } => {
                let m = alpha.len();
                if subgen.len() != m || subgen.iter().any(|r| r.len() != m) {
                    return Err(CliError::Config(
                        "phase-type subgenerator must be square and match alpha".into(),
                    ));
                }
                let mut a = Array2::<f64>::zeros((m, m));
                for (i, row) in subgen.iter().enumerate() {
                    for (j, &x) in row.iter().enumerate() {
                        a[[i, j]] = x;
                    }
                }
                WaitingTimeDistribution::phase_type(Array1::from_vec(alpha.clone()), a)
            }
            LawSpec::Uniform { b, n_points } => {
                WaitingTimeDistribution::uniform(*b, *n_points)
            }
            LawSpec::Tabulated { step, density } => {
                WaitingTimeDistribution::tabulated(*step, density.clone())
            }
        };
        law.map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RenewalMode {
    Ordinary,
    Stationary,
    Modified { first: LawSpec },
}

impl Default for RenewalMode {
    fn default() -> Self {
        RenewalMode::Ordinary
    }
}

impl RenewalMode {
    pub fn build(&self, base: WaitingTimeDistribution) -> Result<RenewalSpec, CliError> {
        match self {
            RenewalMode::Ordinary => Ok(RenewalSpec::ordinary(base)),
            RenewalMode::Stationary => {
                RenewalSpec::stationary(base).map_err(|e| CliError::Config(e.to_string()))
            }
            RenewalMode::Modified { first } => {
                Ok(RenewalSpec::modified(base, first.build()?))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Series,
    Volterra,
    Wform,
    MonteCarlo,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Series => "series",
            Method::Volterra => "volterra",
            Method::Wform => "wform",
            Method::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_max: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub trajectories: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub dim: usize,
    pub channel: ChannelSpec,
    pub family_f: FamilySpec,
    /// Defaults to `family_f` when omitted.
    #[serde(default)]
    pub family_g: Option<FamilySpec>,
    pub waiting_time: LawSpec,
    #[serde(default)]
    pub renewal: RenewalMode,
    pub ordering: String,
    pub grid: GridSpec,
    pub initial_state: JsonMatrix,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub monte_carlo: Option<MonteCarloSpec>,
    #[serde(default)]
    pub series_tol: Option<f64>,
    #[serde(default)]
    pub max_order: Option<usize>,
}

/// Everything `run`/`verify` need, assembled from a scenario file.
pub struct Prepared {
    pub scenario: Scenario,
    pub cfg: EvolutionConfig,
    pub rho0: CMat,
}

impl Scenario {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid scenario JSON: {e}")))
    }

    pub fn ordering(&self) -> Result<Ordering, CliError> {
        match self.ordering.as_str() {
            "R" => Ok(Ordering::R),
            "L" => Ok(Ordering::L),
            "Modified" => Ok(Ordering::Modified),
            other => Err(CliError::Config(format!(
                "unknown ordering '{other}' (expected R, L, or Modified)"
            ))),
        }
    }

    pub fn prepare(self) -> Result<Prepared, CliError> {
        if self.methods.is_empty() {
            return Err(CliError::Config("no method selected".into()));
        }
        if self.methods.contains(&Method::MonteCarlo) && self.monte_carlo.is_none() {
            return Err(CliError::Config(
                "monte-carlo method requires a monte_carlo block".into(),
            ));
        }
        if self.grid.n_steps == 0 || !(self.grid.t_max > 0.0) {
            return Err(CliError::Config(
                "grid needs t_max > 0 and n_steps > 0".into(),
            ));
        }
        let dim = self.dim;
        let channel = self.channel.build(dim)?;
        let family_f = self.family_f.build(dim)?;
        let family_g = match &self.family_g {
            Some(spec) => spec.build(dim)?,
            None => family_f.clone(),
        };
        let base = self.waiting_time.build()?;
        let renewal = self.renewal.build(base)?;
        let ordering = self.ordering()?;
        let delayed = !matches!(self.renewal, RenewalMode::Ordinary);
        if delayed != (ordering == Ordering::Modified) {
            return Err(CliError::Config(
                "stationary/modified renewal requires ordering 'Modified' and vice versa"
                    .into(),
            ));
        }
        let grid = Grid::new(self.grid.t_max, self.grid.n_steps)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let mut cfg = EvolutionConfig::new(
            dim, channel, family_f, family_g, renewal, ordering, grid,
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(tol) = self.series_tol {
            cfg = cfg.with_series_tol(tol);
        }
        if let Some(mo) = self.max_order {
            cfg = cfg.with_max_order(mo);
        }
        let rho0_mat = to_cmat(&self.initial_state)?;
        let rho0 = DensityMatrix::new(rho0_mat, 1e-8)
            .map_err(|e| CliError::Config(format!("initial_state: {e}")))?;
        Ok(Prepared {
            scenario: self,
            cfg,
            rho0: rho0.matrix().clone(),
        })
    }
}
