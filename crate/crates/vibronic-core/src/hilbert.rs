//! Composite qudit ⊗ bosonic-mode Hilbert space, states, and operators.
//!
//! Tensor-product ordering is fixed: the qudit factor comes first, then the
//! modes in declared order. A basis index decomposes as
//! `idx = ((qudit * n_max_1 + fock_1) * n_max_2 + fock_2) * ...`

use crate::error::{Error, Result};
use crate::linalg;
use crate::C64;
use ndarray::{Array1, Array2};

const HERMITICITY_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-10;

/// Composition of a d-level qudit with N truncated bosonic modes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpec {
    qudit_dim: usize,
    mode_truncations: Vec<usize>,
    has_reference: bool,
}

impl HilbertSpec {
    /// A qudit of dimension `qudit_dim` with the given Fock cutoffs.
    pub fn new(qudit_dim: usize, mode_truncations: Vec<usize>) -> Result<Self> {
        Self::build(qudit_dim, mode_truncations, false)
    }

    /// Like [`HilbertSpec::new`] but marking the last qudit level as the
    /// reference level used by the simplified measurement circuit.
    pub fn with_reference(qudit_dim: usize, mode_truncations: Vec<usize>) -> Result<Self> {
        Self::build(qudit_dim, mode_truncations, true)
    }

    fn build(qudit_dim: usize, mode_truncations: Vec<usize>, has_reference: bool) -> Result<Self> {
        if qudit_dim < 1 {
            return Err(Error::Domain("qudit dimension must be >= 1".into()));
        }
        if has_reference && qudit_dim < 2 {
            return Err(Error::Domain(
                "a reference level requires qudit dimension >= 2".into(),
            ));
        }
        if mode_truncations.iter().any(|&n| n < 1) {
            return Err(Error::Domain("mode truncations must be >= 1".into()));
        }
        Ok(Self {
            qudit_dim,
            mode_truncations,
            has_reference,
        })
    }

    pub fn qudit_dim(&self) -> usize {
        self.qudit_dim
    }

    pub fn num_modes(&self) -> usize {
        self.mode_truncations.len()
    }

    pub fn mode_truncations(&self) -> &[usize] {
        &self.mode_truncations
    }

    pub fn has_reference(&self) -> bool {
        self.has_reference
    }

    /// Dimension of the mode subspace, ∏ n_max_j.
    pub fn mode_space_dim(&self) -> usize {
        self.mode_truncations.iter().product()
    }

    /// Total composite dimension d · ∏ n_max_j.
    pub fn total_dim(&self) -> usize {
        self.qudit_dim * self.mode_space_dim()
    }

    /// The same mode content with one extra qudit level marked as |ref⟩.
    pub fn add_reference_level(&self) -> Self {
        Self {
            qudit_dim: self.qudit_dim + 1,
            mode_truncations: self.mode_truncations.clone(),
            has_reference: true,
        }
    }

    /// Index of the reference level, when present.
    pub fn reference_level(&self) -> Option<usize> {
        self.has_reference.then(|| self.qudit_dim - 1)
    }

    /// Flat basis index of |qudit⟩ ⊗ |fock_1 ... fock_N⟩.
    pub fn basis_index(&self, qudit: usize, fock: &[usize]) -> Result<usize> {
        if qudit >= self.qudit_dim || fock.len() != self.num_modes() {
            return Err(Error::Domain(format!(
                "basis label ({qudit}, {fock:?}) outside spec"
            )));
        }
        let mut idx = qudit;
        for (f, &nmax) in fock.iter().zip(&self.mode_truncations) {
            if *f >= nmax {
                return Err(Error::Domain(format!(
                    "Fock label {f} exceeds truncation {nmax}"
                )));
            }
            idx = idx * nmax + f;
        }
        Ok(idx)
    }
}

/// A complex matrix acting on a composite space.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    matrix: Array2<C64>,
    spec: HilbertSpec,
    hermitian_hint: bool,
}

impl OperatorMatrix {
    /// Wrap a matrix; when `hermitian_hint` is set the Hermiticity of the
    /// matrix is verified to 1e-10.
    pub fn new(spec: HilbertSpec, matrix: Array2<C64>, hermitian_hint: bool) -> Result<Self> {
        let d = spec.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, spec dimension is {}",
                matrix.nrows(),
                matrix.ncols(),
                d
            )));
        }
        if hermitian_hint {
            let dev = linalg::hermiticity_deviation(&matrix);
            let scale = linalg::max_abs(&matrix).max(1.0);
            if dev > HERMITICITY_TOL * scale {
                return Err(Error::NotHermitian { max_dev: dev });
            }
        }
        Ok(Self {
            matrix,
            spec,
            hermitian_hint,
        })
    }

    pub fn identity(spec: HilbertSpec) -> Self {
        let d = spec.total_dim();
        Self {
            matrix: Array2::eye(d),
            spec,
            hermitian_hint: true,
        }
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.matrix
    }

    pub fn spec(&self) -> &HilbertSpec {
        &self.spec
    }

    pub fn is_hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self {
            matrix: linalg::adjoint(&self.matrix),
            spec: self.spec.clone(),
            hermitian_hint: self.hermitian_hint,
        }
    }

    /// Matrix product `self · other`.
    pub fn dot(&self, other: &Self) -> Result<Self> {
        self.check_same_spec(other)?;
        Ok(Self {
            matrix: self.matrix.dot(&other.matrix),
            spec: self.spec.clone(),
            hermitian_hint: false,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_spec(other)?;
        Ok(Self {
            matrix: &self.matrix + &other.matrix,
            spec: self.spec.clone(),
            hermitian_hint: self.hermitian_hint && other.hermitian_hint,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_spec(other)?;
        Ok(Self {
            matrix: &self.matrix - &other.matrix,
            spec: self.spec.clone(),
            hermitian_hint: self.hermitian_hint && other.hermitian_hint,
        })
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            matrix: self.matrix.mapv(|z| z * factor),
            spec: self.spec.clone(),
            hermitian_hint: self.hermitian_hint && factor.im == 0.0,
        }
    }

    /// max |self - other| entry-wise.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        linalg::max_abs_diff(&self.matrix, &other.matrix)
    }

    /// Deviation from unitarity, max |U†U - 1|.
    pub fn unitarity_deviation(&self) -> f64 {
        let prod = linalg::adjoint(&self.matrix).dot(&self.matrix);
        let eye = Array2::<C64>::eye(self.dim());
        linalg::max_abs_diff(&prod, &eye)
    }

    fn check_same_spec(&self, other: &Self) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::DimensionMismatch(
                "operators act on different composite spaces".into(),
            ));
        }
        Ok(())
    }
}

/// State content: a normalised vector or a density matrix.
#[derive(Debug, Clone)]
pub enum StateData {
    Pure(Array1<C64>),
    Density(Array2<C64>),
}

/// Quantum state on a composite space.
#[derive(Debug, Clone)]
pub struct QuantumState {
    data: StateData,
    spec: HilbertSpec,
}

impl QuantumState {
    /// A pure state from amplitudes; the norm must be 1 within 1e-10.
    pub fn pure(spec: HilbertSpec, amplitudes: Array1<C64>) -> Result<Self> {
        if amplitudes.len() != spec.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "state length {} vs spec dimension {}",
                amplitudes.len(),
                spec.total_dim()
            )));
        }
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "pure-state norm {norm} deviates from 1 by more than {NORM_TOL:.0e}"
            )));
        }
        Ok(Self {
            data: StateData::Pure(amplitudes),
            spec,
        })
    }

    /// A density matrix; must be Hermitian with unit trace within 1e-10.
    /// Positivity is checked separately by [`QuantumState::min_eigenvalue`]
    /// since it requires a full diagonalisation.
    pub fn density(spec: HilbertSpec, matrix: Array2<C64>) -> Result<Self> {
        let d = spec.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "density is {}x{}, spec dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                d
            )));
        }
        let dev = linalg::hermiticity_deviation(&matrix);
        if dev > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix Hermiticity deviation {dev:.3e}"
            )));
        }
        let tr: C64 = (0..d).map(|i| matrix[(i, i)]).sum();
        if (tr.re - 1.0).abs() > HERMITICITY_TOL || tr.im.abs() > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!("density trace {tr}")));
        }
        Ok(Self {
            data: StateData::Density(matrix),
            spec,
        })
    }

    /// Basis state |qudit⟩ ⊗ |fock…⟩.
    pub fn basis_state(spec: HilbertSpec, qudit: usize, fock: &[usize]) -> Result<Self> {
        let idx = spec.basis_index(qudit, fock)?;
        let mut amps = Array1::<C64>::zeros(spec.total_dim());
        amps[idx] = C64::new(1.0, 0.0);
        Ok(Self {
            data: StateData::Pure(amps),
            spec,
        })
    }

    /// Everything in its ground level: |0⟩ ⊗ |0…0⟩.
    pub fn ground(spec: HilbertSpec) -> Self {
        let fock = vec![0usize; spec.num_modes()];
        Self::basis_state(spec, 0, &fock).expect("ground state labels are always valid")
    }

    pub fn spec(&self) -> &HilbertSpec {
        &self.spec
    }

    pub fn data(&self) -> &StateData {
        &self.data
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.data, StateData::Pure(_))
    }

    /// Density-matrix view of the state (outer product for pure states).
    pub fn to_density_matrix(&self) -> Array2<C64> {
        match &self.data {
            StateData::Pure(psi) => {
                let d = psi.len();
                let mut rho = Array2::<C64>::zeros((d, d));
                for i in 0..d {
                    for j in 0..d {
                        rho[(i, j)] = psi[i] * psi[j].conj();
                    }
                }
                rho
            }
            StateData::Density(rho) => rho.clone(),
        }
    }

    /// Apply an operator: U|ψ⟩ or UρU†. Intended for unitaries; the result
    /// is not re-validated.
    pub fn apply(&self, op: &OperatorMatrix) -> Result<Self> {
        if *op.spec() != self.spec {
            return Err(Error::DimensionMismatch(
                "operator and state specs differ".into(),
            ));
        }
        let data = match &self.data {
            StateData::Pure(psi) => StateData::Pure(op.matrix().dot(psi)),
            StateData::Density(rho) => {
                StateData::Density(op.matrix().dot(rho).dot(&linalg::adjoint(op.matrix())))
            }
        };
        Ok(Self {
            data,
            spec: self.spec.clone(),
        })
    }

    /// ⟨ψ|A|ψ⟩ or tr(Aρ).
    pub fn expectation(&self, op: &OperatorMatrix) -> Result<C64> {
        if *op.spec() != self.spec {
            return Err(Error::DimensionMismatch(
                "operator and state specs differ".into(),
            ));
        }
        let m = op.matrix();
        Ok(match &self.data {
            StateData::Pure(psi) => {
                let mpsi = m.dot(psi);
                psi.iter()
                    .zip(mpsi.iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum()
            }
            StateData::Density(rho) => {
                let d = rho.nrows();
                let mut tr = C64::new(0.0, 0.0);
                for i in 0..d {
                    for j in 0..d {
                        tr += m[(i, j)] * rho[(j, i)];
                    }
                }
                tr
            }
        })
    }

    /// ⟨self|other⟩ for pure states.
    pub fn overlap(&self, other: &Self) -> Result<C64> {
        match (&self.data, &other.data) {
            (StateData::Pure(a), StateData::Pure(b)) if a.len() == b.len() => {
                Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
            }
            _ => Err(Error::InvalidState(
                "overlap requires two pure states of equal dimension".into(),
            )),
        }
    }

    pub fn norm(&self) -> f64 {
        match &self.data {
            StateData::Pure(psi) => psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
            StateData::Density(rho) => (0..rho.nrows()).map(|i| rho[(i, i)].re).sum(),
        }
    }

    /// Smallest eigenvalue of the density matrix (0 is returned for pure
    /// states, which are positive by construction).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        match &self.data {
            StateData::Pure(_) => Ok(0.0),
            StateData::Density(rho) => {
                let (w, _) = linalg::eigh(rho)?;
                Ok(w[0])
            }
        }
    }

    /// Full invariant check: norm / Hermiticity+trace, and positivity to
    /// the stated tolerance for density matrices.
    pub fn validate(&self) -> Result<()> {
        match &self.data {
            StateData::Pure(_) => {
                let n = self.norm();
                if (n - 1.0).abs() > NORM_TOL {
                    return Err(Error::InvalidState(format!("norm {n}")));
                }
            }
            StateData::Density(rho) => {
                let dev = linalg::hermiticity_deviation(rho);
                if dev > HERMITICITY_TOL {
                    return Err(Error::InvalidState(format!("Hermiticity {dev:.3e}")));
                }
                let tr = self.norm();
                if (tr - 1.0).abs() > HERMITICITY_TOL {
                    return Err(Error::InvalidState(format!("trace {tr}")));
                }
                let min = self.min_eigenvalue()?;
                if min < -1e-9 {
                    return Err(Error::InvalidState(format!("eigenvalue {min:.3e}")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_dimensions() {
        let spec = HilbertSpec::new(2, vec![3, 4]).unwrap();
        assert_eq!(spec.total_dim(), 24);
        assert_eq!(spec.mode_space_dim(), 12);
        assert_eq!(spec.num_modes(), 2);
        assert!(!spec.has_reference());
    }

    #[test]
    fn reference_requires_two_levels() {
        assert!(HilbertSpec::with_reference(1, vec![2]).is_err());
        let spec = HilbertSpec::with_reference(3, vec![2]).unwrap();
        assert_eq!(spec.reference_level(), Some(2));
    }

    #[test]
    fn basis_index_orders_qudit_first() {
        let spec = HilbertSpec::new(2, vec![3, 2]).unwrap();
        assert_eq!(spec.basis_index(0, &[0, 0]).unwrap(), 0);
        assert_eq!(spec.basis_index(0, &[0, 1]).unwrap(), 1);
        assert_eq!(spec.basis_index(0, &[1, 0]).unwrap(), 2);
        assert_eq!(spec.basis_index(1, &[0, 0]).unwrap(), 6);
        assert!(spec.basis_index(0, &[3, 0]).is_err());
        assert!(spec.basis_index(2, &[0, 0]).is_err());
    }

    #[test]
    fn pure_state_norm_enforced() {
        let spec = HilbertSpec::new(1, vec![2]).unwrap();
        let bad = Array1::from(vec![C64::new(0.5, 0.0), C64::new(0.0, 0.0)]);
        assert!(QuantumState::pure(spec.clone(), bad).is_err());
        let good = Array1::from(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert!(QuantumState::pure(spec, good).is_ok());
    }

    #[test]
    fn density_invariants() {
        let spec = HilbertSpec::new(1, vec![2]).unwrap();
        let mut rho = Array2::<C64>::zeros((2, 2));
        rho[(0, 0)] = C64::new(0.5, 0.0);
        rho[(1, 1)] = C64::new(0.5, 0.0);
        let state = QuantumState::density(spec.clone(), rho).unwrap();
        state.validate().unwrap();

        let mut bad = Array2::<C64>::zeros((2, 2));
        bad[(0, 0)] = C64::new(0.7, 0.0);
        bad[(1, 1)] = C64::new(0.5, 0.0);
        assert!(QuantumState::density(spec, bad).is_err());
    }

    #[test]
    fn hermitian_hint_checked() {
        let spec = HilbertSpec::new(2, vec![]).unwrap();
        let mut m = Array2::<C64>::zeros((2, 2));
        m[(0, 1)] = C64::new(1.0, 0.0);
        assert!(OperatorMatrix::new(spec.clone(), m.clone(), true).is_err());
        assert!(OperatorMatrix::new(spec, m, false).is_ok());
    }
}
