//! States, channels, and generators in Liouville (vectorized) representation.
//!
//! Convention: column stacking, vec(ρ)[i + d·j] = ρ\[i,j\], so the
//! conjugation map ρ ↦ A ρ B† lifts to (B̄ ⊗ A) acting on vec(ρ).
//! Complete positivity is certified through the Choi matrix; the
//! trace-preservation identity is checked as vec(𝟙)† S = vec(𝟙)†.

use num_complex::Complex64;

use crate::error::MemKernelError;
use crate::linalg::{self, CMat, CVec};

/// Default eigenvalue tolerance for positivity checks.
pub const POSITIVITY_TOL: f64 = 1e-8;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A d×d density matrix: Hermitian, unit trace, positive semidefinite
/// within tolerance.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    dim: usize,
    mat: CMat,
}

impl DensityMatrix {
    pub fn new(mat: CMat, tol: f64) -> Result<Self, MemKernelError> {
        let d = mat.nrows();
        if mat.ncols() != d || d == 0 {
            return Err(MemKernelError::InvalidDimension(
                "density matrix must be square and nonempty".into(),
            ));
        }
        let herm_defect = linalg::max_abs(&(&mat - &linalg::dagger(&mat)));
        if herm_defect > tol {
            return Err(MemKernelError::InvalidArgument(format!(
                "density matrix not Hermitian (defect {herm_defect:.2e})"
            )));
        }
        let tr = linalg::trace(&mat);
        if (tr - c(1.0, 0.0)).norm() > tol.max(1e-10) {
            return Err(MemKernelError::InvalidArgument(format!(
                "density matrix trace {} != 1",
                tr
            )));
        }
        let min_eig = linalg::hermitian_eigenvalues(&mat)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -tol {
            return Err(MemKernelError::InvalidArgument(format!(
                "density matrix has eigenvalue {min_eig:.2e} < -tol"
            )));
        }
        Ok(Self { dim: d, mat })
    }

    /// Pure state |ψ⟩⟨ψ| from a (not necessarily normalized) ket.
    pub fn pure(ket: &CVec) -> Self {
        let norm: f64 = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let d = ket.len();
        let mut mat = CMat::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                mat[[i, j]] = ket[i] * ket[j].conj() / c(norm * norm, 0.0);
            }
        }
        Self { dim: d, mat }
    }

    /// Basis projector |k⟩⟨k|.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut mat = CMat::zeros((dim, dim));
        mat[[k, k]] = c(1.0, 0.0);
        Self { dim, mat }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let mut mat = CMat::zeros((dim, dim));
        for i in 0..dim {
            mat[[i, i]] = c(1.0 / dim as f64, 0.0);
        }
        Self { dim, mat }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }
}

/// Column-stack a d×d matrix into a length-d² vector.
pub fn vectorize(rho: &CMat) -> CVec {
    let d = rho.nrows();
    let mut v = CVec::zeros(d * d);
    for j in 0..d {
        for i in 0..d {
            v[i + d * j] = rho[[i, j]];
        }
    }
    v
}

/// Inverse of [`vectorize`].
pub fn devectorize(v: &CVec) -> CMat {
    let d2 = v.len();
    let d = (d2 as f64).sqrt().round() as usize;
    assert_eq!(d * d, d2, "vector length must be a perfect square");
    let mut m = CMat::zeros((d, d));
    for j in 0..d {
        for i in 0..d {
            m[[i, j]] = v[i + d * j];
        }
    }
    m
}

/// Trace of the matrix a vectorized state represents.
pub fn vec_trace(v: &CVec) -> Complex64 {
    let d = (v.len() as f64).sqrt().round() as usize;
    (0..d).map(|i| v[i + d * i]).sum()
}

/// A d²×d² matrix acting on column-stacked states.
#[derive(Debug, Clone)]
pub struct SuperOperator {
    dim: usize,
    mat: CMat,
}

/// CP/TP diagnostics produced by [`SuperOperator::is_cptp`].
#[derive(Debug, Clone, Copy)]
pub struct CptpDiagnostics {
    pub min_choi_eig: f64,
    pub trace_defect: f64,
    pub hermiticity_defect: f64,
    pub cp: bool,
    pub tp: bool,
}

impl CptpDiagnostics {
    pub fn passes(&self) -> bool {
        self.cp && self.tp
    }
}

impl SuperOperator {
    pub fn new(dim: usize, mat: CMat) -> Result<Self, MemKernelError> {
        if mat.dim() != (dim * dim, dim * dim) {
            return Err(MemKernelError::InvalidDimension(format!(
                "superoperator for d={dim} must be {0}×{0}",
                dim * dim
            )));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(MemKernelError::NonFinite("superoperator entries".into()));
        }
        Ok(Self { dim, mat })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            mat: linalg::eye(dim * dim),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            mat: CMat::zeros((dim * dim, dim * dim)),
        }
    }

    /// Lift the conjugation ρ ↦ A ρ B†.
    pub fn conjugation(a: &CMat, b: &CMat) -> Self {
        let dim = a.nrows();
        Self {
            dim,
            mat: linalg::kron(&linalg::conj(b), a),
        }
    }

    /// Channel from a list of Kraus operators: ρ ↦ Σ K ρ K†.
    pub fn from_kraus(dim: usize, kraus: &[CMat]) -> Self {
        let mut mat = CMat::zeros((dim * dim, dim * dim));
        for k in kraus {
            mat = mat + linalg::kron(&linalg::conj(k), k);
        }
        Self { dim, mat }
    }

    /// Completely depolarizing channel ρ ↦ Tr(ρ)·𝟙/d.
    pub fn depolarizing(dim: usize) -> Self {
        let d = dim;
        let mut mat = CMat::zeros((d * d, d * d));
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    // output E_kk/d from input E_ij, weight δ_ij
                    if i == j {
                        mat[[k + d * k, i + d * j]] = c(1.0 / d as f64, 0.0);
                    }
                }
            }
        }
        Self { dim, mat }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn apply_vec(&self, v: &CVec) -> CVec {
        self.mat.dot(v)
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        devectorize(&self.mat.dot(&vectorize(rho)))
    }

    /// Composition self ∘ other (other acts first).
    pub fn compose(&self, other: &SuperOperator) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            mat: self.mat.dot(&other.mat),
        }
    }

    pub fn scale(&self, s: Complex64) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            mat: self.mat.mapv(|z| z * s),
        }
    }

    pub fn add(&self, other: &SuperOperator) -> SuperOperator {
        SuperOperator {
            dim: self.dim,
            mat: &self.mat + &other.mat,
        }
    }

    /// Semigroup element e^{S t}.
    pub fn expm(&self, t: f64) -> SuperOperator {
        assert!(t.is_finite(), "expm requires finite time");
        SuperOperator {
            dim: self.dim,
            mat: linalg::expm(&self.mat.mapv(|z| z * c(t, 0.0))),
        }
    }

    /// Choi matrix C[(i,k),(j,l)] = S(E_ij)[k,l].
    pub fn choi(&self) -> CMat {
        let d = self.dim;
        let mut choi = CMat::zeros((d * d, d * d));
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        choi[[i * d + k, j * d + l]] = self.mat[[k + d * l, i + d * j]];
                    }
                }
            }
        }
        choi
    }

    /// Max deviation of vec(𝟙)† S from vec(𝟙)†.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for col in 0..d * d {
            let mut s = c(0.0, 0.0);
            for i in 0..d {
                s += self.mat[[i + d * i, col]];
            }
            let target = if col % d == col / d { c(1.0, 0.0) } else { c(0.0, 0.0) };
            worst = worst.max((s - target).norm());
        }
        worst
    }

    pub fn is_cptp(&self, tol: f64) -> CptpDiagnostics {
        let choi = self.choi();
        let hermiticity_defect = linalg::max_abs(&(&choi - &linalg::dagger(&choi)));
        let min_choi_eig = linalg::hermitian_eigenvalues(&choi)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let trace_defect = self.trace_defect();
        CptpDiagnostics {
            min_choi_eig,
            trace_defect,
            hermiticity_defect,
            cp: min_choi_eig >= -tol && hermiticity_defect <= tol,
            tp: trace_defect <= tol,
        }
    }
}

/// Hamiltonian plus weighted jump operators defining a Lindblad generator.
#[derive(Debug, Clone)]
pub struct LindbladSpec {
    pub hamiltonian: CMat,
    pub jump_ops: Vec<(CMat, f64)>,
}

impl LindbladSpec {
    pub fn new(hamiltonian: CMat, jump_ops: Vec<(CMat, f64)>) -> Result<Self, MemKernelError> {
        let d = hamiltonian.nrows();
        if hamiltonian.ncols() != d {
            return Err(MemKernelError::InvalidDimension(
                "hamiltonian must be square".into(),
            ));
        }
        let defect = linalg::max_abs(&(&hamiltonian - &linalg::dagger(&hamiltonian)));
        if defect > 1e-10 {
            return Err(MemKernelError::InvalidArgument(format!(
                "hamiltonian not Hermitian (defect {defect:.2e})"
            )));
        }
        for (op, rate) in &jump_ops {
            if *rate < 0.0 {
                return Err(MemKernelError::NegativeRate(*rate));
            }
            if op.dim() != (d, d) {
                return Err(MemKernelError::InvalidDimension(
                    "jump operator dimension mismatch".into(),
                ));
            }
        }
        Ok(Self {
            hamiltonian,
            jump_ops,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// Build the Lindblad generator
    /// ℒρ = −i[H,ρ] + Σ γ (LρL† − ½{L†L, ρ}) as a superoperator.
    pub fn generator(&self) -> SuperOperator {
        let d = self.dim();
        let id = linalg::eye(d);
        let h = &self.hamiltonian;
        let ht = h.t().to_owned();
        // −i(𝟙⊗H − Hᵀ⊗𝟙)
        let mut mat = (&linalg::kron(&id, h) - &linalg::kron(&ht, &id)).mapv(|z| z * c(0.0, -1.0));
        for (l, rate) in &self.jump_ops {
            let ldag = linalg::dagger(l);
            let ldl = ldag.dot(l);
            let ldl_t = ldl.t().to_owned();
            let term = &linalg::kron(&linalg::conj(l), l)
                - &(&linalg::kron(&id, &ldl) + &linalg::kron(&ldl_t, &id)).mapv(|z| z * c(0.5, 0.0));
            mat = mat + term.mapv(|z| z * c(*rate, 0.0));
        }
        SuperOperator { dim: d, mat }
    }
}

/// Pauli matrices and common qubit operators.
pub mod qubit {
    use super::*;

    pub fn sigma_x() -> CMat {
        ndarray::array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]
    }

    pub fn sigma_y() -> CMat {
        ndarray::array![[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]]
    }

    pub fn sigma_z() -> CMat {
        ndarray::array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]
    }

    /// Lowering operator |0⟩⟨1| (decay from the excited state |1⟩).
    pub fn sigma_minus() -> CMat {
        ndarray::array![[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]
    }

    pub fn sigma_plus() -> CMat {
        ndarray::array![[c(0.0, 0.0), c(0.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]
    }
}

/// Annihilation operator on a Fock space truncated at `dim` levels.
pub fn annihilation(dim: usize) -> CMat {
    let mut a = CMat::zeros((dim, dim));
    for n in 1..dim {
        a[[n - 1, n]] = c((n as f64).sqrt(), 0.0);
    }
    a
}

/// Jaynes-Cummings collision channel on a truncated Fock space.
///
/// A two-level atom in state `atom_state` interacts resonantly with the
/// field mode for a time `tau_int` under H = g(σ₊ a + σ₋ a†); tracing
/// out the atom gives a CPTP channel on the field. The unitary is built
/// on the (field_dim + 1)-level space and the Kraus operators are then
/// truncated to field_dim; the returned `leakage` is the resulting
/// deviation of Σ K†K from 𝟙 on the truncated space.
pub fn jc_collision_channel(
    coupling: f64,
    tau_int: f64,
    field_dim: usize,
    atom_state: &CMat,
) -> Result<(SuperOperator, f64), MemKernelError> {
    if field_dim < 2 {
        return Err(MemKernelError::InvalidDimension(
            "field_dim must be at least 2".into(),
        ));
    }
    if atom_state.dim() != (2, 2) {
        return Err(MemKernelError::InvalidDimension(
            "atom_state must be 2×2".into(),
        ));
    }
    let rho_atom = DensityMatrix::new(atom_state.clone(), 1e-8)?;

    let ne = field_dim + 1; // extended field space
    let a = annihilation(ne);
    let adag = linalg::dagger(&a);
    let sp = qubit::sigma_plus();
    let sm = qubit::sigma_minus();
    // atom ⊗ field ordering
    let h = (&linalg::kron(&sp, &a) + &linalg::kron(&sm, &adag)).mapv(|z| z * c(coupling, 0.0));
    let u = linalg::expm(&h.mapv(|z| z * c(0.0, -tau_int)));

    let eig = linalg::eig2_hermitian(rho_atom.matrix());
    let mut kraus: Vec<CMat> = Vec::new();
    for (p, v) in eig.iter() {
        if *p <= 1e-14 {
            continue;
        }
        let w = p.sqrt();
        for m in 0..2usize {
            // ⟨m|_atom U |v⟩_atom, an ne×ne field operator
            let mut k_ext = CMat::zeros((ne, ne));
            for n in 0..ne {
                for np in 0..ne {
                    let mut s = c(0.0, 0.0);
                    for ap in 0..2usize {
                        s += u[[m * ne + n, ap * ne + np]] * v[ap];
                    }
                    k_ext[[n, np]] = s * c(w, 0.0);
                }
            }
            // truncate to field_dim
            let mut k = CMat::zeros((field_dim, field_dim));
            for n in 0..field_dim {
                for np in 0..field_dim {
                    k[[n, np]] = k_ext[[n, np]];
                }
            }
            kraus.push(k);
        }
    }
    let mut sum = CMat::zeros((field_dim, field_dim));
    for k in &kraus {
        sum = sum + linalg::dagger(k).dot(k);
    }
    let leakage = linalg::max_abs(&(&sum - &linalg::eye(field_dim)));
    Ok((SuperOperator::from_kraus(field_dim, &kraus), leakage))
}
