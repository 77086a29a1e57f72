//! Elementary operators and gates on the composite space.
//!
//! All constructors embed the single-factor operator into the full space
//! with the fixed ordering (qudit first, then modes in declared order):
//!
//! - ladder operators â, â†, n̂ = â†â per mode,
//! - quadratures Q̂ = (â† + â)/√2 and P̂ = i(â† − â)/√2,
//! - qudit projectors |n⟩⟨m| and level-pair gates,
//! - displacement D(β) = exp(β â† − β* â) by exact exponentiation,
//! - thermal mode states.

use crate::error::{Error, Result};
use crate::hilbert::{HilbertSpec, OperatorMatrix, QuantumState};
use crate::linalg;
use crate::C64;
use ndarray::linalg::kron;
use ndarray::{Array1, Array2};

fn embed_mode_operator(spec: &HilbertSpec, mode_index: usize, small: &Array2<C64>) -> Array2<C64> {
    let mut out = Array2::<C64>::eye(spec.qudit_dim());
    for (j, &nmax) in spec.mode_truncations().iter().enumerate() {
        let factor = if j == mode_index {
            small.clone()
        } else {
            Array2::<C64>::eye(nmax)
        };
        out = kron(&out, &factor);
    }
    out
}

fn embed_qudit_operator(spec: &HilbertSpec, small: &Array2<C64>) -> Array2<C64> {
    let mut out = small.clone();
    for &nmax in spec.mode_truncations() {
        out = kron(&out, &Array2::<C64>::eye(nmax));
    }
    out
}

fn check_mode_index(spec: &HilbertSpec, mode_index: usize) -> Result<usize> {
    if mode_index >= spec.num_modes() {
        return Err(Error::Domain(format!(
            "mode index {mode_index} out of range (N = {})",
            spec.num_modes()
        )));
    }
    Ok(spec.mode_truncations()[mode_index])
}

/// Annihilation operator â_j on the composite space.
///
/// â|n⟩ = √n |n−1⟩ on the truncated mode; identity on every other factor.
pub fn annihilation(spec: &HilbertSpec, mode_index: usize) -> Result<OperatorMatrix> {
    let nmax = check_mode_index(spec, mode_index)?;
    let mut a = Array2::<C64>::zeros((nmax, nmax));
    for n in 1..nmax {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    OperatorMatrix::new(spec.clone(), embed_mode_operator(spec, mode_index, &a), false)
}

/// Creation operator â†_j.
pub fn creation(spec: &HilbertSpec, mode_index: usize) -> Result<OperatorMatrix> {
    Ok(annihilation(spec, mode_index)?.dagger())
}

/// Number operator n̂_j = â†_j â_j.
pub fn number_op(spec: &HilbertSpec, mode_index: usize) -> Result<OperatorMatrix> {
    let nmax = check_mode_index(spec, mode_index)?;
    let mut n = Array2::<C64>::zeros((nmax, nmax));
    for k in 0..nmax {
        n[(k, k)] = C64::new(k as f64, 0.0);
    }
    OperatorMatrix::new(spec.clone(), embed_mode_operator(spec, mode_index, &n), true)
}

/// Dimensionless position quadrature Q̂_j = (â†_j + â_j)/√2.
pub fn position_op(spec: &HilbertSpec, mode_index: usize) -> Result<OperatorMatrix> {
    let a = annihilation(spec, mode_index)?;
    let m = (linalg::adjoint(a.matrix()) + a.matrix()).mapv(|z| z / C64::new(2f64.sqrt(), 0.0));
    OperatorMatrix::new(spec.clone(), m, true)
}

/// Conjugate momentum P̂_j = i(â†_j − â_j)/√2.
pub fn momentum_op(spec: &HilbertSpec, mode_index: usize) -> Result<OperatorMatrix> {
    let a = annihilation(spec, mode_index)?;
    let m = (linalg::adjoint(a.matrix()) - a.matrix())
        .mapv(|z| z * C64::new(0.0, 1.0) / C64::new(2f64.sqrt(), 0.0));
    OperatorMatrix::new(spec.clone(), m, true)
}

/// Qudit transition projector |n⟩⟨m| ⊗ 1_modes.
pub fn qudit_projector(spec: &HilbertSpec, n: usize, m: usize) -> Result<OperatorMatrix> {
    let d = spec.qudit_dim();
    if n >= d || m >= d {
        return Err(Error::Domain(format!(
            "projector levels ({n},{m}) out of range for d = {d}"
        )));
    }
    let mut small = Array2::<C64>::zeros((d, d));
    small[(n, m)] = C64::new(1.0, 0.0);
    OperatorMatrix::new(spec.clone(), embed_qudit_operator(spec, &small), n == m)
}

/// Embed an arbitrary d×d electronic operator as op ⊗ 1_modes.
pub fn qudit_operator(spec: &HilbertSpec, small: &Array2<C64>) -> Result<OperatorMatrix> {
    let d = spec.qudit_dim();
    if small.nrows() != d || small.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "qudit operator is {}x{}, d = {}",
            small.nrows(),
            small.ncols(),
            d
        )));
    }
    OperatorMatrix::new(spec.clone(), embed_qudit_operator(spec, small), false)
}

fn pair_gate(spec: &HilbertSpec, la: usize, lb: usize, block: [[C64; 2]; 2]) -> Result<OperatorMatrix> {
    let d = spec.qudit_dim();
    if la >= d || lb >= d || la == lb {
        return Err(Error::Domain(format!(
            "level pair ({la},{lb}) invalid for d = {d}"
        )));
    }
    let mut small = Array2::<C64>::eye(d);
    small[(la, la)] = block[0][0];
    small[(la, lb)] = block[0][1];
    small[(lb, la)] = block[1][0];
    small[(lb, lb)] = block[1][1];
    OperatorMatrix::new(spec.clone(), embed_qudit_operator(spec, &small), false)
}

/// Hadamard on the qudit level pair (la, lb):
/// |la⟩ → (|la⟩+|lb⟩)/√2, |lb⟩ → (|la⟩−|lb⟩)/√2.
pub fn hadamard_pair(spec: &HilbertSpec, la: usize, lb: usize) -> Result<OperatorMatrix> {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    pair_gate(spec, la, lb, [[s, s], [s, -s]])
}

/// R_x(θ) = exp(−iθσ_x/2) on the level pair.
pub fn rx_pair(spec: &HilbertSpec, la: usize, lb: usize, theta: f64) -> Result<OperatorMatrix> {
    let c = C64::new((theta / 2.0).cos(), 0.0);
    let s = C64::new(0.0, -(theta / 2.0).sin());
    pair_gate(spec, la, lb, [[c, s], [s, c]])
}

/// R_y(θ) = exp(−iθσ_y/2) on the level pair.
pub fn ry_pair(spec: &HilbertSpec, la: usize, lb: usize, theta: f64) -> Result<OperatorMatrix> {
    let c = C64::new((theta / 2.0).cos(), 0.0);
    let s = C64::new((theta / 2.0).sin(), 0.0);
    pair_gate(spec, la, lb, [[c, -s], [s, c]])
}

/// σ_z on the level pair: |la⟩⟨la| − |lb⟩⟨lb|, zero elsewhere on the qudit.
pub fn sigma_z_pair(spec: &HilbertSpec, la: usize, lb: usize) -> Result<OperatorMatrix> {
    let d = spec.qudit_dim();
    if la >= d || lb >= d || la == lb {
        return Err(Error::Domain(format!(
            "level pair ({la},{lb}) invalid for d = {d}"
        )));
    }
    let mut small = Array2::<C64>::zeros((d, d));
    small[(la, la)] = C64::new(1.0, 0.0);
    small[(lb, lb)] = C64::new(-1.0, 0.0);
    OperatorMatrix::new(spec.clone(), embed_qudit_operator(spec, &small), true)
}

/// σ_x on the level pair: |la⟩⟨lb| + |lb⟩⟨la|.
pub fn sigma_x_pair(spec: &HilbertSpec, la: usize, lb: usize) -> Result<OperatorMatrix> {
    let d = spec.qudit_dim();
    if la >= d || lb >= d || la == lb {
        return Err(Error::Domain(format!(
            "level pair ({la},{lb}) invalid for d = {d}"
        )));
    }
    let mut small = Array2::<C64>::zeros((d, d));
    small[(la, lb)] = C64::new(1.0, 0.0);
    small[(lb, la)] = C64::new(1.0, 0.0);
    OperatorMatrix::new(spec.clone(), embed_qudit_operator(spec, &small), true)
}

/// Displacement D(β) = exp(β â†_j − β* â_j) by exact exponentiation of the
/// anti-Hermitian generator on the truncated space.
///
/// Warns when |β|² ≥ n_max/4; the coherent amplitude then sits too close to
/// the Fock cutoff for faithful displacement.
pub fn displacement_operator(
    spec: &HilbertSpec,
    mode_index: usize,
    beta: C64,
) -> Result<OperatorMatrix> {
    let nmax = check_mode_index(spec, mode_index)?;
    let mean_n = beta.norm_sqr();
    if mean_n >= nmax as f64 {
        return Err(Error::Truncation {
            context: format!("displacement |beta|^2 = {mean_n:.3} with n_max = {nmax}"),
            suggested: (4.0 * mean_n).ceil() as usize + 8,
        });
    }
    if mean_n >= nmax as f64 / 4.0 {
        log::warn!(
            "displacement |beta|^2 = {mean_n:.3} is above n_max/4 = {:.2}; truncation error may exceed tolerance",
            nmax as f64 / 4.0
        );
    }
    // generator G = beta a† - beta* a is anti-Hermitian; write G = iH with
    // H Hermitian and exponentiate spectrally: exp(G) = V exp(i w) V†.
    let mut g = Array2::<C64>::zeros((nmax, nmax));
    for n in 1..nmax {
        let root = C64::new((n as f64).sqrt(), 0.0);
        g[(n, n - 1)] = beta * root; // beta a† entry
        g[(n - 1, n)] = -beta.conj() * root; // -beta* a entry
    }
    let h = g.mapv(|z| z * C64::new(0.0, -1.0));
    let (w, v) = linalg::eigh(&h)?;
    let vh = linalg::adjoint(&v);
    let mut phased = Array2::<C64>::zeros((nmax, nmax));
    for (k, &wk) in w.iter().enumerate() {
        let ph = C64::from_polar(1.0, wk);
        for row in 0..nmax {
            phased[(row, k)] = v[(row, k)] * ph;
        }
    }
    let d_small = phased.dot(&vh);
    OperatorMatrix::new(
        spec.clone(),
        embed_mode_operator(spec, mode_index, &d_small),
        false,
    )
}

/// Thermal state of mode `mode_index` with mean occupation n̄, tensored
/// with the ground level of the qudit and of every other mode.
///
/// Errors when the Boltzmann tail beyond the cutoff exceeds 1e-8.
pub fn thermal_state(spec: &HilbertSpec, mode_index: usize, nbar: f64) -> Result<QuantumState> {
    let nmax = check_mode_index(spec, mode_index)?;
    if nbar < 0.0 {
        return Err(Error::Domain(format!("nbar = {nbar} must be >= 0")));
    }
    // tail mass beyond the cutoff: (nbar/(nbar+1))^nmax
    let ratio = nbar / (nbar + 1.0);
    let tail = ratio.powi(nmax as i32);
    if tail > 1e-8 {
        let suggested = (1e-8f64.ln() / ratio.ln()).ceil() as usize;
        return Err(Error::Truncation {
            context: format!("thermal tail {tail:.3e} for nbar = {nbar}, n_max = {nmax}"),
            suggested,
        });
    }
    let mut probs = Array1::<f64>::zeros(nmax);
    for k in 0..nmax {
        probs[k] = ratio.powi(k as i32) / (nbar + 1.0);
    }
    let total: f64 = probs.sum();
    probs.mapv_inplace(|p| p / total);

    let dim = spec.total_dim();
    let mut rho = Array2::<C64>::zeros((dim, dim));
    let mut fock = vec![0usize; spec.num_modes()];
    for k in 0..nmax {
        fock[mode_index] = k;
        let idx = spec.basis_index(0, &fock)?;
        rho[(idx, idx)] = C64::new(probs[k], 0.0);
    }
    QuantumState::density(spec.clone(), rho)
}

/// Unitary whose first column is the given normalised vector (a Householder
/// reflection), used to express state preparation as an operator.
pub fn state_preparation_unitary(spec: &HilbertSpec, target: &Array1<C64>) -> Result<OperatorMatrix> {
    let n = spec.total_dim();
    if target.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "target length {} vs dimension {}",
            target.len(),
            n
        )));
    }
    let norm: f64 = target.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!(
            "preparation target norm {norm}"
        )));
    }
    // Householder: U = (I - 2 v v† / |v|^2) * phase so that U e_0 = target
    let t0 = target[0];
    let phase = if t0.norm() > 0.0 {
        t0 / t0.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let mut v = target.mapv(|z| z / phase); // now v[0] real >= 0
    v[0] -= C64::new(1.0, 0.0);
    let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let mut u = Array2::<C64>::eye(n);
    if vnorm2 > 1e-30 {
        for i in 0..n {
            for j in 0..n {
                let upd = 2.0 * v[i] * v[j].conj() / vnorm2;
                u[(i, j)] -= upd;
            }
        }
    }
    // U e0 = e0 - 2 v v[0]/|v|^2 ... equals (target/phase); restore phase.
    u.mapv_inplace(|z| z * phase);
    OperatorMatrix::new(spec.clone(), u, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single_mode(nmax: usize) -> HilbertSpec {
        HilbertSpec::new(1, vec![nmax]).unwrap()
    }

    #[test]
    fn annihilation_defining_matrix() {
        // n_max = 2, no qudit factor: a = [[0,1],[0,0]]
        let spec = single_mode(2);
        let a = annihilation(&spec, 0).unwrap();
        assert_eq!(a.matrix()[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(a.matrix()[(0, 0)], C64::new(0.0, 0.0));
        assert_eq!(a.matrix()[(1, 0)], C64::new(0.0, 0.0));
        assert_eq!(a.matrix()[(1, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn number_operator_eigenvalue() {
        let spec = single_mode(4);
        let n = number_op(&spec, 0).unwrap();
        let fock1 = QuantumState::basis_state(spec, 0, &[1]).unwrap();
        let val = fock1.expectation(&n).unwrap();
        assert_abs_diff_eq!(val.re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn commutator_is_identity_below_cutoff() {
        // [a, a†] = 1 on Fock levels < n_max - 1 (n_max = 8)
        let spec = single_mode(8);
        let a = annihilation(&spec, 0).unwrap();
        let ad = a.dagger();
        let comm = a.dot(&ad).unwrap().sub(&ad.dot(&a).unwrap()).unwrap();
        for k in 0..7 {
            assert_abs_diff_eq!(comm.matrix()[(k, k)].re, 1.0, epsilon = 1e-13);
        }
        // the cutoff row carries the truncation artifact
        assert_abs_diff_eq!(comm.matrix()[(7, 7)].re, -7.0, epsilon = 1e-12);
    }

    #[test]
    fn mode_index_out_of_range() {
        let spec = single_mode(4);
        assert!(annihilation(&spec, 1).is_err());
    }

    #[test]
    fn projector_completeness() {
        let spec = HilbertSpec::new(2, vec![3]).unwrap();
        let p00 = qudit_projector(&spec, 0, 0).unwrap();
        let p11 = qudit_projector(&spec, 1, 1).unwrap();
        let sum = p00.add(&p11).unwrap();
        let eye = OperatorMatrix::identity(spec);
        assert!(sum.max_abs_diff(&eye) < 1e-15);
    }

    #[test]
    fn projector_moves_population() {
        // |0⟩⟨1| applied to |1⟩⊗|0⟩ gives |0⟩⊗|0⟩
        let spec = HilbertSpec::new(2, vec![2]).unwrap();
        let p01 = qudit_projector(&spec, 0, 1).unwrap();
        let s = QuantumState::basis_state(spec.clone(), 1, &[0]).unwrap();
        let moved = s.apply(&p01).unwrap();
        let expected = QuantumState::basis_state(spec, 0, &[0]).unwrap();
        let ov = expected.overlap(&moved).unwrap();
        assert_abs_diff_eq!(ov.re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sigma_z_traceless_for_qubit() {
        let spec = HilbertSpec::with_reference(2, vec![2]).unwrap();
        let sz = sigma_z_pair(&spec, 0, 1).unwrap();
        let tr: C64 = (0..sz.dim()).map(|i| sz.matrix()[(i, i)]).sum();
        assert_abs_diff_eq!(tr.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn displacement_identity_at_zero() {
        let spec = single_mode(8);
        let d = displacement_operator(&spec, 0, C64::new(0.0, 0.0)).unwrap();
        let eye = OperatorMatrix::identity(spec);
        assert!(d.max_abs_diff(&eye) < 1e-14);
    }

    #[test]
    fn displacement_coherent_occupation() {
        // D(beta)|0> has <n> = |beta|^2; beta = 0.858 from the bundled
        // single-mode preset, n_max = 32
        let spec = single_mode(32);
        let beta = C64::new(0.858, 0.0);
        let d = displacement_operator(&spec, 0, beta).unwrap();
        let vac = QuantumState::ground(spec.clone());
        let coherent = vac.apply(&d).unwrap();
        let n = number_op(&spec, 0).unwrap();
        let mean = coherent.expectation(&n).unwrap().re;
        assert_abs_diff_eq!(mean, beta.norm_sqr(), epsilon = 1e-6);
    }

    #[test]
    fn displacement_inverse_product() {
        let spec = single_mode(32);
        let b = C64::new(0.5, 0.0);
        let d = displacement_operator(&spec, 0, b).unwrap();
        let dinv = displacement_operator(&spec, 0, -b).unwrap();
        let prod = d.dot(&dinv).unwrap();
        let eye = OperatorMatrix::identity(spec);
        assert!(prod.max_abs_diff(&eye) < 1e-8);
    }

    #[test]
    fn displacement_unitary_and_truncation_error() {
        let spec = single_mode(32);
        let d = displacement_operator(&spec, 0, C64::new(0.858, 0.3)).unwrap();
        assert!(d.unitarity_deviation() < 1e-12);
        // hard failure when the coherent occupation exceeds the cutoff
        assert!(matches!(
            displacement_operator(&spec, 0, C64::new(6.0, 0.0)),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn thermal_state_limits() {
        let spec = single_mode(16);
        // nbar = 0 is the Fock ground state
        let cold = thermal_state(&spec, 0, 0.0).unwrap();
        let rho = cold.to_density_matrix();
        assert_abs_diff_eq!(rho[(0, 0)].re, 1.0, epsilon = 1e-14);

        // nbar = 0.061 gives p0 = 1/(1+nbar)
        let warm = thermal_state(&spec, 0, 0.061).unwrap();
        let rho = warm.to_density_matrix();
        assert_abs_diff_eq!(rho[(0, 0)].re, 1.0 / 1.061, epsilon = 1e-10);
        assert_abs_diff_eq!(warm.norm(), 1.0, epsilon = 1e-14);

        let n = number_op(&spec, 0).unwrap();
        assert_abs_diff_eq!(warm.expectation(&n).unwrap().re, 0.061, epsilon = 1e-6);
    }

    #[test]
    fn thermal_tail_guard() {
        let spec = single_mode(4);
        assert!(matches!(
            thermal_state(&spec, 0, 2.0),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn gates_are_unitary() {
        let spec = HilbertSpec::new(3, vec![2]).unwrap();
        for gate in [
            hadamard_pair(&spec, 0, 2).unwrap(),
            rx_pair(&spec, 0, 1, -std::f64::consts::FRAC_PI_2).unwrap(),
            ry_pair(&spec, 1, 2, 1.234).unwrap(),
        ] {
            assert!(gate.unitarity_deviation() < 1e-10);
        }
    }

    #[test]
    fn quadrature_commutator_on_vacuum() {
        // <0|[Q,P]|0> = i on the truncated space
        let spec = single_mode(12);
        let q = position_op(&spec, 0).unwrap();
        let p = momentum_op(&spec, 0).unwrap();
        let comm = q.dot(&p).unwrap().sub(&p.dot(&q).unwrap()).unwrap();
        let vac = QuantumState::ground(spec);
        let val = vac.expectation(&comm).unwrap();
        assert_abs_diff_eq!(val.im, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(val.re, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn disjoint_factors_commute() {
        let spec = HilbertSpec::new(2, vec![3, 3]).unwrap();
        let n0 = number_op(&spec, 0).unwrap();
        let q1 = position_op(&spec, 1).unwrap();
        let p01 = qudit_projector(&spec, 0, 1).unwrap();
        let pairs = [(&n0, &q1), (&n0, &p01), (&q1, &p01)];
        for (a, b) in pairs {
            let comm = a.dot(b).unwrap().sub(&b.dot(a).unwrap()).unwrap();
            assert!(linalg::max_abs(comm.matrix()) < 1e-12);
        }
    }

    #[test]
    fn preparation_unitary_hits_target() {
        let spec = HilbertSpec::new(1, vec![5]).unwrap();
        let mut t = Array1::<C64>::zeros(5);
        t[0] = C64::new(0.3, 0.1);
        t[2] = C64::new(-0.5, 0.4);
        t[4] = C64::new(0.2, 0.67);
        let norm: f64 = t.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        t.mapv_inplace(|z| z / norm);
        let u = state_preparation_unitary(&spec, &t).unwrap();
        assert!(u.unitarity_deviation() < 1e-12);
        let prepared = QuantumState::ground(spec).apply(&u).unwrap();
        let target_state = QuantumState::pure(prepared.spec().clone(), t).unwrap();
        let ov = target_state.overlap(&prepared).unwrap();
        assert_abs_diff_eq!(ov.norm(), 1.0, epsilon = 1e-12);
    }
}
