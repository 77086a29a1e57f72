//! Vibronic-coupling Hamiltonians and unit mapping.
//!
//! A quadratic vibronic-coupling (QVC) model consists of N harmonic modes
//! plus electronic-state-dependent expansion terms,
//!
//!   H = Σ_j ω_j (n̂_j + ½) + Σ_{n,m} Ĉ_{n,m} |n⟩⟨m|,
//!   Ĉ_{n,m} = c⁰_{n,m} + Σ_j c¹_{n,m,j} Q̂_j + Σ_{j,k} c²_{n,m,j,k} Q̂_j Q̂_k,
//!
//! with ħ = 1 and all coefficients in angular-frequency units. The module
//! also carries the bundled single-mode SO₂ photoelectron model, its
//! qubit-plus-reference reduction, and the molecular ↔ simulator frequency
//! scaling.

use crate::error::{Error, Result};
use crate::hilbert::{HilbertSpec, OperatorMatrix};
use crate::linalg;
use crate::operators;
use crate::C64;
use ndarray::{Array2, Array3, Array4};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const COEFF_HERMITICITY_TOL: f64 = 1e-10;

/// Quadratic vibronic-coupling model in angular-frequency units.
#[derive(Debug, Clone)]
pub struct QvcModel {
    num_states: usize,
    num_modes: usize,
    mode_freqs: Vec<f64>,
    c0: Array2<C64>,
    c1: Array3<C64>,
    c2: Array4<C64>,
    zero_point_included: bool,
}

impl QvcModel {
    /// Validates Hermiticity of the coefficient tensors in the electronic
    /// indices, symmetry of c² in the mode indices, and ω_j > 0.
    pub fn new(
        mode_freqs: Vec<f64>,
        c0: Array2<C64>,
        c1: Array3<C64>,
        c2: Array4<C64>,
        zero_point_included: bool,
    ) -> Result<Self> {
        let d = c0.nrows();
        let n = mode_freqs.len();
        if c0.ncols() != d {
            return Err(Error::DimensionMismatch("c0 must be d x d".into()));
        }
        if c1.shape() != [d, d, n] {
            return Err(Error::DimensionMismatch(format!(
                "c1 shape {:?}, expected [{d}, {d}, {n}]",
                c1.shape()
            )));
        }
        if c2.shape() != [d, d, n, n] {
            return Err(Error::DimensionMismatch(format!(
                "c2 shape {:?}, expected [{d}, {d}, {n}, {n}]",
                c2.shape()
            )));
        }
        if mode_freqs.iter().any(|&w| w <= 0.0) {
            return Err(Error::Domain("mode frequencies must be positive".into()));
        }
        let scale = c0
            .iter()
            .chain(c1.iter())
            .chain(c2.iter())
            .map(|z| z.norm())
            .fold(1.0f64, f64::max);
        for na in 0..d {
            for mb in 0..d {
                let dev0 = (c0[(na, mb)] - c0[(mb, na)].conj()).norm();
                if dev0 > COEFF_HERMITICITY_TOL * scale {
                    return Err(Error::NotHermitian { max_dev: dev0 });
                }
                for j in 0..n {
                    let dev1 = (c1[(na, mb, j)] - c1[(mb, na, j)].conj()).norm();
                    if dev1 > COEFF_HERMITICITY_TOL * scale {
                        return Err(Error::NotHermitian { max_dev: dev1 });
                    }
                    for k in 0..n {
                        let dev2 = (c2[(na, mb, j, k)] - c2[(mb, na, j, k)].conj()).norm();
                        if dev2 > COEFF_HERMITICITY_TOL * scale {
                            return Err(Error::NotHermitian { max_dev: dev2 });
                        }
                        let sym = (c2[(na, mb, j, k)] - c2[(na, mb, k, j)]).norm();
                        if sym > COEFF_HERMITICITY_TOL * scale {
                            return Err(Error::Domain(format!(
                                "c2 not symmetric in mode indices at ({na},{mb},{j},{k})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self {
            num_states: d,
            num_modes: n,
            mode_freqs,
            c0,
            c1,
            c2,
            zero_point_included,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn mode_freqs(&self) -> &[f64] {
        &self.mode_freqs
    }

    pub fn zero_point_included(&self) -> bool {
        self.zero_point_included
    }

    fn check_spec(&self, spec: &HilbertSpec) -> Result<()> {
        if spec.qudit_dim() != self.num_states || spec.num_modes() != self.num_modes {
            return Err(Error::DimensionMismatch(format!(
                "spec (d = {}, N = {}) does not match model (d = {}, N = {})",
                spec.qudit_dim(),
                spec.num_modes(),
                self.num_states,
                self.num_modes
            )));
        }
        Ok(())
    }

    /// Mode-only spec with the same truncations.
    fn mode_spec(&self, spec: &HilbertSpec) -> Result<HilbertSpec> {
        HilbertSpec::new(1, spec.mode_truncations().to_vec())
    }

    /// Free-oscillator part H₀ = Σ_j ω_j (n̂_j + ½·[zpe]) on the mode space.
    pub fn free_mode_hamiltonian(&self, spec: &HilbertSpec) -> Result<OperatorMatrix> {
        let mspec = self.mode_spec(spec)?;
        let dim = mspec.total_dim();
        let mut h = Array2::<C64>::zeros((dim, dim));
        for (j, &w) in self.mode_freqs.iter().enumerate() {
            let n = operators::number_op(&mspec, j)?;
            h = h + n.matrix().mapv(|z| z * w);
            if self.zero_point_included {
                for i in 0..dim {
                    h[(i, i)] += C64::new(0.5 * w, 0.0);
                }
            }
        }
        OperatorMatrix::new(mspec, h, true)
    }

    /// Expansion operator Ĉ_{n,m} on the mode space.
    pub fn expansion_block(&self, spec: &HilbertSpec, n: usize, m: usize) -> Result<Array2<C64>> {
        let mspec = self.mode_spec(spec)?;
        let dim = mspec.total_dim();
        let mut block = Array2::<C64>::zeros((dim, dim));
        let c0 = self.c0[(n, m)];
        if c0 != C64::new(0.0, 0.0) {
            for i in 0..dim {
                block[(i, i)] += c0;
            }
        }
        let q_ops: Vec<Array2<C64>> = (0..self.num_modes)
            .map(|j| operators::position_op(&mspec, j).map(|o| o.into_matrix()))
            .collect::<Result<_>>()?;
        for j in 0..self.num_modes {
            let c1 = self.c1[(n, m, j)];
            if c1 != C64::new(0.0, 0.0) {
                block = block + q_ops[j].mapv(|z| z * c1);
            }
            for k in 0..self.num_modes {
                let c2 = self.c2[(n, m, j, k)];
                if c2 != C64::new(0.0, 0.0) {
                    block = block + q_ops[j].dot(&q_ops[k]).mapv(|z| z * c2);
                }
            }
        }
        Ok(block)
    }

    /// Initial-electronic-state Hamiltonian H⁽⁰⁾ = H₀ + Ĉ_{0,0} on the modes.
    pub fn initial_state_hamiltonian(&self, spec: &HilbertSpec) -> Result<OperatorMatrix> {
        let free = self.free_mode_hamiltonian(spec)?;
        let block = self.expansion_block(spec, 0, 0)?;
        let m = free.matrix() + &block;
        OperatorMatrix::new(free.spec().clone(), m, true)
    }

    /// True when H⁽⁰⁾ = H₀ exactly: Ĉ₀,₀ = 0 and Ĉ_{n,0} = Ĉ_{0,n} = 0.
    pub fn initial_state_is_free(&self) -> bool {
        let zero = C64::new(0.0, 0.0);
        for n in 0..self.num_states {
            let decoupled = self.c0[(n, 0)] == zero
                && (0..self.num_modes).all(|j| self.c1[(n, 0, j)] == zero)
                && (0..self.num_modes)
                    .all(|j| (0..self.num_modes).all(|k| self.c2[(n, 0, j, k)] == zero));
            if !decoupled {
                return false;
            }
        }
        true
    }

    /// Assemble the full QVC Hamiltonian on the composite space.
    pub fn build_hamiltonian(&self, spec: &HilbertSpec) -> Result<OperatorMatrix> {
        self.check_spec(spec)?;
        if spec.has_reference() {
            return Err(Error::Domain(
                "build the molecular Hamiltonian on a spec without a reference level".into(),
            ));
        }
        let d = self.num_states;
        let mdim = spec.mode_space_dim();
        let free = self.free_mode_hamiltonian(spec)?;
        let mut h = Array2::<C64>::zeros((spec.total_dim(), spec.total_dim()));
        // free part replicated on every electronic diagonal block
        for n in 0..d {
            for (i, j) in ndarray::indices((mdim, mdim)) {
                h[(n * mdim + i, n * mdim + j)] = free.matrix()[(i, j)];
            }
        }
        for n in 0..d {
            for m in 0..d {
                let block = self.expansion_block(spec, n, m)?;
                for i in 0..mdim {
                    for j in 0..mdim {
                        h[(n * mdim + i, m * mdim + j)] += block[(i, j)];
                    }
                }
            }
        }
        OperatorMatrix::new(spec.clone(), h, true)
    }
}

/// Block-extend a molecular Hamiltonian with a reference level:
/// H′_ε = H ⊕ (H⁽⁰⁾ − ε) ⊗ |ref⟩⟨ref|.
///
/// `h` acts on the d-state composite space, `h0` on the modes only; the
/// result acts on the (d+1)-level space whose last level is |ref⟩.
pub fn expand_with_reference(
    h: &OperatorMatrix,
    h0: &OperatorMatrix,
    epsilon: f64,
) -> Result<OperatorMatrix> {
    let spec = h.spec();
    let mdim = spec.mode_space_dim();
    if h0.spec().qudit_dim() != 1 || h0.spec().mode_truncations() != spec.mode_truncations() {
        return Err(Error::DimensionMismatch(
            "h0 must act on the mode space of h".into(),
        ));
    }
    let new_spec = spec.add_reference_level();
    let dim = new_spec.total_dim();
    let old = spec.total_dim();
    let mut out = Array2::<C64>::zeros((dim, dim));
    for i in 0..old {
        for j in 0..old {
            out[(i, j)] = h.matrix()[(i, j)];
        }
    }
    for i in 0..mdim {
        for j in 0..mdim {
            out[(old + i, old + j)] = h0.matrix()[(i, j)];
        }
        out[(old + i, old + i)] -= C64::new(epsilon, 0.0);
    }
    OperatorMatrix::new(new_spec, out, true)
}

/// Single-mode SO₂ photoelectron model parameters (angular frequencies).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct So2Params {
    /// Bending-mode frequency on the ionic surface (rad/s).
    pub omega_b: f64,
    /// Dimensionless displacement between the neutral and ionic surfaces.
    pub alpha: f64,
    /// Vertical energy offset ΔE/ħ (rad/s); runs default to 0 with the
    /// spectrum axis restored in post-processing.
    pub delta_e: f64,
    /// Bending-mode frequency on the neutral surface (rad/s); stored for
    /// reference, unused by the single-surface model.
    pub omega_ground: f64,
}

impl So2Params {
    /// The bundled single-mode bending model: ω_b = 2π × 12.44 THz,
    /// α = 1.716, neutral-surface frequency 2π × 15.55 THz.
    pub fn single_mode_bend() -> Self {
        Self {
            omega_b: 2.0 * PI * 12.44e12,
            alpha: 1.716,
            delta_e: 0.0,
            omega_ground: 2.0 * PI * 15.55e12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega_b <= 0.0 {
            return Err(Error::Domain("omega_b must be positive".into()));
        }
        Ok(())
    }

    /// The equivalent QVC model: one mode at ω_b, c¹₀₀ = −√2 ω_b α (the
    /// ionic surface sits at +√2 α along Q), and a constant offset chosen so
    /// the ionic-surface minimum lies at zero energy (c⁰₀₀ = ω_b α²),
    /// matching the measurement convention of the hardware pulse sequence.
    pub fn to_qvc_min_referenced(&self) -> Result<QvcModel> {
        let c0 = Array2::from_elem((1, 1), C64::new(self.omega_b * self.alpha * self.alpha, 0.0));
        let c1 = Array3::from_elem(
            (1, 1, 1),
            C64::new(-(2f64.sqrt()) * self.omega_b * self.alpha, 0.0),
        );
        let c2 = Array4::zeros((1, 1, 1, 1));
        QvcModel::new(vec![self.omega_b], c0, c1, c2, false)
    }
}

/// Dimensionless scaling between molecular and simulator frequency scales:
/// ω_sim = F · ω_mol, t_mol = F · t_sim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitMap {
    pub scale_factor: f64,
    pub molecular_time_unit: String,
    pub simulator_time_unit: String,
}

impl UnitMap {
    pub fn new(scale_factor: f64) -> Result<Self> {
        if scale_factor <= 0.0 {
            return Err(Error::Domain("scale factor must be positive".into()));
        }
        Ok(Self {
            scale_factor,
            molecular_time_unit: "fs".into(),
            simulator_time_unit: "ms".into(),
        })
    }

    /// The trapped-ion scaling used by the bundled SO₂ preset.
    pub fn trapped_ion_default() -> Self {
        Self::new(1.37e-10).expect("positive scale factor")
    }

    /// Identity mapping (simulate directly on the molecular scale).
    pub fn identity() -> Self {
        Self {
            scale_factor: 1.0,
            molecular_time_unit: "s".into(),
            simulator_time_unit: "s".into(),
        }
    }

    pub fn to_simulator_freq(&self, omega_molecular: f64) -> f64 {
        omega_molecular * self.scale_factor
    }

    pub fn to_molecular_freq(&self, omega_simulator: f64) -> f64 {
        omega_simulator / self.scale_factor
    }

    pub fn to_molecular_time(&self, t_simulator: f64) -> f64 {
        t_simulator * self.scale_factor
    }

    pub fn to_simulator_time(&self, t_molecular: f64) -> f64 {
        t_molecular / self.scale_factor
    }
}

/// Simulator-frame drive parameters derived from a molecular model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SdfTuning {
    /// Bichromatic detuning δ = F ω_b (rad/s).
    pub delta: f64,
    /// Sideband strength Ω_S = F ω_b α / 2 (rad/s).
    pub omega_s: f64,
}

/// Map the molecular model onto simulator drive frequencies.
pub fn map_units(p: &So2Params, u: &UnitMap) -> SdfTuning {
    SdfTuning {
        delta: u.to_simulator_freq(p.omega_b),
        omega_s: u.to_simulator_freq(p.omega_b) * p.alpha / 2.0,
    }
}

/// The SO₂ Hamiltonian family used by the measurement sequence.
#[derive(Debug, Clone)]
pub struct So2Family {
    /// Two-level (ion ⊕ reference) form: (ω n̂ − √2 ω α Q̂ + ΔE)|0⟩⟨0| + ω n̂ |1⟩⟨1|.
    pub h_prime: OperatorMatrix,
    /// Spin-boson form implemented by the drive: ω n̂ + (ω α/√2) σ̂_x Q̂.
    pub h_dprime: OperatorMatrix,
    /// Initial coherent displacement −α/2 applied during state preparation.
    pub init_displacement: C64,
}

/// Build the SO₂ Hamiltonian pair on a qubit ⊗ single-mode space and verify
/// numerically that they are conjugate:
///
///   σ_z R_H D(−α/2) (H′ − ΔE|0⟩⟨0|) D†(−α/2) R_H σ_z
///     = H″ − (ωα²/4)·1 + (ωα²/2) σ_x.
///
/// The additive constants are energy-origin bookkeeping: the identity block
/// fixes the global zero and the σ_x term moves the origin of the |0⟩ branch
/// to the ionic-surface minimum, which is where the hardware convention puts
/// it. The σ_z conjugation is a relabeling of the σ_x eigenbasis.
pub fn build_so2_family(p: &So2Params, spec: &HilbertSpec) -> Result<So2Family> {
    p.validate()?;
    if spec.qudit_dim() != 2 || spec.num_modes() != 1 {
        return Err(Error::DimensionMismatch(
            "SO2 family requires a qubit with a single mode".into(),
        ));
    }
    let w = p.omega_b;
    let alpha = p.alpha;
    let nmax = spec.mode_truncations()[0];

    let nop = operators::number_op(spec, 0)?;
    let q = operators::position_op(spec, 0)?;
    let p00 = operators::qudit_projector(spec, 0, 0)?;
    let p11 = operators::qudit_projector(spec, 1, 1)?;
    let sx = operators::sigma_x_pair(spec, 0, 1)?;
    let sz = operators::sigma_z_pair(spec, 0, 1)?;

    // H' = (w n - sqrt2 w a Q + dE) P00 + w n P11
    let block0 = nop.matrix().mapv(|z| z * w)
        - q.matrix().mapv(|z| z * (2f64.sqrt() * w * alpha))
        + Array2::<C64>::eye(spec.total_dim()).mapv(|z| z * p.delta_e);
    let h_prime_m = p00.matrix().dot(&block0).dot(p00.matrix())
        + p11.matrix().dot(&nop.matrix().mapv(|z| z * w)).dot(p11.matrix());
    let h_prime = OperatorMatrix::new(spec.clone(), h_prime_m, true)?;

    // H'' = w n + (w a / sqrt2) sx Q
    let h_dprime_m =
        nop.matrix().mapv(|z| z * w) + sx.matrix().dot(q.matrix()).mapv(|z| z * (w * alpha / 2f64.sqrt()));
    let h_dprime = OperatorMatrix::new(spec.clone(), h_dprime_m, true)?;

    // conjugation identity on the low-energy subspace
    let rh = operators::hadamard_pair(spec, 0, 1)?;
    let disp = operators::displacement_operator(spec, 0, C64::new(-alpha / 2.0, 0.0))?;
    let de_term = p00.scaled(C64::new(p.delta_e, 0.0));
    let h_prime0 = h_prime.sub(&de_term)?;
    let lhs = rh
        .dot(&disp)?
        .dot(&h_prime0)?
        .dot(&disp.dagger())?
        .dot(&rh)?;
    let lhs = sz.dot(&lhs)?.dot(&sz)?;
    let shift = w * alpha * alpha;
    let rhs = h_dprime
        .sub(&OperatorMatrix::identity(spec.clone()).scaled(C64::new(shift / 4.0, 0.0)))?
        .add(&sx.scaled(C64::new(shift / 2.0, 0.0)))?;
    let low = (nmax / 4).max(2).min(16);
    let mut dev: f64 = 0.0;
    for qi in 0..2 {
        for qj in 0..2 {
            for i in 0..low {
                for j in 0..low {
                    let r = qi * nmax + i;
                    let c = qj * nmax + j;
                    dev = dev.max((lhs.matrix()[(r, c)] - rhs.matrix()[(r, c)]).norm());
                }
            }
        }
    }
    let scale = w * (1.0 + alpha * alpha);
    if dev > 1e-6 * scale {
        return Err(Error::Truncation {
            context: format!(
                "SO2 conjugation identity deviates by {dev:.3e} on the lowest {low} Fock levels"
            ),
            suggested: nmax * 2,
        });
    }

    Ok(So2Family {
        h_prime,
        h_dprime,
        init_displacement: C64::new(-alpha / 2.0, 0.0),
    })
}

/// On-disk molecular model. Frequencies and coefficients are plain numbers
/// in Hz (cycles, not angular); complex coefficients may be written as
/// `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoleculeFile {
    pub name: Option<String>,
    pub states: usize,
    pub modes: Vec<ModeEntry>,
    /// d × d constant term (Hz).
    pub c0: Vec<Vec<JsonComplex>>,
    /// d × d × N linear term (Hz).
    pub c1: Vec<Vec<Vec<JsonComplex>>>,
    /// d × d × N × N quadratic term (Hz); omitted means zero.
    #[serde(default)]
    pub c2: Option<Vec<Vec<Vec<Vec<JsonComplex>>>>>,
    /// Vertical electronic offset (Hz) restored on the spectrum axis.
    #[serde(default)]
    pub delta_e_hz: f64,
    /// Optional d × d electronic dipole matrix (dimensionless weights).
    /// Defaults to full transfer |1⟩⟨0| + h.c. for d ≥ 2 and identity for d = 1.
    #[serde(default)]
    pub dipole: Option<Vec<Vec<JsonComplex>>>,
}

/// One bosonic mode of the molecule file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeEntry {
    pub omega_hz: f64,
}

/// JSON scalar that is either a real number or an `[re, im]` pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonComplex {
    Real(f64),
    Pair([f64; 2]),
}

impl From<JsonComplex> for C64 {
    fn from(v: JsonComplex) -> Self {
        match v {
            JsonComplex::Real(r) => C64::new(r, 0.0),
            JsonComplex::Pair([re, im]) => C64::new(re, im),
        }
    }
}

impl MoleculeFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("molecule file parse error: {e}")))
    }

    /// Convert to the internal angular-frequency model plus the axis offset
    /// ΔE/ħ (rad/s) and the electronic dipole matrix.
    pub fn to_model(&self) -> Result<(QvcModel, f64, Array2<C64>)> {
        let d = self.states;
        let n = self.modes.len();
        if d < 1 {
            return Err(Error::Config("molecule must have at least one state".into()));
        }
        let freqs: Vec<f64> = self.modes.iter().map(|m| 2.0 * PI * m.omega_hz).collect();
        let mut c0 = Array2::<C64>::zeros((d, d));
        let mut c1 = Array3::<C64>::zeros((d, d, n));
        let mut c2 = Array4::<C64>::zeros((d, d, n, n));
        let scale = C64::new(2.0 * PI, 0.0);
        if self.c0.len() != d || self.c0.iter().any(|r| r.len() != d) {
            return Err(Error::Config("c0 must be a d x d table".into()));
        }
        for i in 0..d {
            for j in 0..d {
                c0[(i, j)] = C64::from(self.c0[i][j]) * scale;
            }
        }
        if self.c1.len() != d
            || self
                .c1
                .iter()
                .any(|r| r.len() != d || r.iter().any(|v| v.len() != n))
        {
            return Err(Error::Config("c1 must be a d x d x N table".into()));
        }
        for i in 0..d {
            for j in 0..d {
                for k in 0..n {
                    c1[(i, j, k)] = C64::from(self.c1[i][j][k]) * scale;
                }
            }
        }
        if let Some(raw) = &self.c2 {
            if raw.len() != d {
                return Err(Error::Config("c2 must be a d x d x N x N table".into()));
            }
            for i in 0..d {
                for j in 0..d {
                    for k in 0..n {
                        for l in 0..n {
                            c2[(i, j, k, l)] = C64::from(raw[i][j][k][l]) * scale;
                        }
                    }
                }
            }
        }
        let model = QvcModel::new(freqs, c0, c1, c2, false)?;
        let mut mu = Array2::<C64>::zeros((d, d));
        match &self.dipole {
            Some(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::Config("dipole must be a d x d table".into()));
                }
                for i in 0..d {
                    for j in 0..d {
                        mu[(i, j)] = C64::from(rows[i][j]);
                    }
                }
            }
            None if d >= 2 => {
                mu[(1, 0)] = C64::new(1.0, 0.0);
                mu[(0, 1)] = C64::new(1.0, 0.0);
            }
            None => {
                mu[(0, 0)] = C64::new(1.0, 0.0);
            }
        }
        Ok((model, 2.0 * PI * self.delta_e_hz, mu))
    }
}
