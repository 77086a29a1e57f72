//! Time evolution: exact unitary propagation, Lindblad master-equation
//! integration with the trapped-ion noise model, and first-order Trotter
//! stepping.
//!
//! The master equation integrated here is
//!
//!   ∂ρ/∂t = −i[H(t), ρ] + γ_h 𝒟[â†]ρ + (2/τ_d) 𝒟[n̂]ρ,
//!   𝒟[L]ρ = LρL† − ½{L†L, ρ},
//!
//! with an optional linear frequency drift folded into H(t) by the caller
//! (H(t) = H + d_δ n̂ t). Integration is fixed-step RK4 with the step chosen
//! as min(grid spacing, 1/(50 · max angular frequency)); Hermiticity is
//! enforced by symmetrisation after every step. The right-hand side is
//! evaluated through a sparse scan of H and index maps for the jump
//! operators, so a step costs O(nnz(H)·D + D²).

use crate::error::{Error, Result};
use crate::hilbert::{HilbertSpec, OperatorMatrix, QuantumState, StateData};
use crate::linalg;
use crate::operators;
use crate::C64;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

/// Noise model of the simulator hardware.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Motional heating rate γ_h (1/s), jump operator â†.
    pub gamma_h: f64,
    /// Pure motional dephasing lifetime τ_d (s); `f64::INFINITY` disables it.
    pub tau_d: f64,
    /// Linear frequency drift d_δ (rad/s per s) applied as d_δ·n̂·t.
    pub d_delta: f64,
    /// Initial thermal occupation n̄ of the encoded mode.
    pub nbar: f64,
    /// Symmetric readout bit-flip probability, in [0, 0.5).
    pub readout_error: f64,
}

impl NoiseSpec {
    /// All channels off.
    pub fn none() -> Self {
        Self {
            gamma_h: 0.0,
            tau_d: f64::INFINITY,
            d_delta: 0.0,
            nbar: 0.0,
            readout_error: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma_h < 0.0 {
            return Err(Error::Domain(format!(
                "heating rate gamma_h = {} must be >= 0",
                self.gamma_h
            )));
        }
        if !(self.tau_d > 0.0) {
            return Err(Error::Domain(format!(
                "dephasing lifetime tau_d = {} must be positive (or infinite)",
                self.tau_d
            )));
        }
        if self.nbar < 0.0 {
            return Err(Error::Domain(format!("nbar = {} must be >= 0", self.nbar)));
        }
        if !(0.0..0.5).contains(&self.readout_error) {
            return Err(Error::Domain(format!(
                "readout error {} must lie in [0, 0.5)",
                self.readout_error
            )));
        }
        Ok(())
    }

    /// Dephasing rate 1/τ_d, zero when the lifetime is infinite.
    pub fn dephasing_rate(&self) -> f64 {
        if self.tau_d.is_finite() {
            1.0 / self.tau_d
        } else {
            0.0
        }
    }

    /// True when the dynamical channels vanish (readout error and thermal
    /// initial occupation are handled elsewhere).
    pub fn is_closed(&self) -> bool {
        self.gamma_h == 0.0 && self.dephasing_rate() == 0.0 && self.d_delta == 0.0
    }
}

/// Propagation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Exact,
    Lindblad,
    Trotter { slices_per_step: usize },
}

/// Time grid plus evolution convention.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropagationPlan {
    /// Strictly increasing times starting at 0 (s).
    pub t_grid: Vec<f64>,
    pub method: Method,
    /// +1 evolves with e^{−iHt}, −1 with e^{+iHt}.
    pub direction_sign: i8,
}

impl PropagationPlan {
    pub fn new(t_grid: Vec<f64>, method: Method) -> Result<Self> {
        let plan = Self {
            t_grid,
            method,
            direction_sign: 1,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Uniform grid of `points` times covering [0, t_max].
    pub fn uniform(t_max: f64, points: usize, method: Method) -> Result<Self> {
        if points < 2 || t_max <= 0.0 {
            return Err(Error::Domain(
                "uniform plan needs t_max > 0 and at least two points".into(),
            ));
        }
        let dt = t_max / (points - 1) as f64;
        Self::new((0..points).map(|k| k as f64 * dt).collect(), method)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() {
            return Err(Error::Domain("empty time grid".into()));
        }
        if self.t_grid[0] != 0.0 {
            return Err(Error::Domain("time grid must start at 0".into()));
        }
        if self.t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("time grid must be strictly increasing".into()));
        }
        if self.direction_sign != 1 && self.direction_sign != -1 {
            return Err(Error::Domain("direction sign must be +1 or -1".into()));
        }
        Ok(())
    }
}

/// Cached spectral decomposition of a Hermitian Hamiltonian, providing
/// e^{−i·sign·H·t} at any t.
#[derive(Debug, Clone)]
pub struct SpectralPropagator {
    eigvals: Array1<f64>,
    eigvecs: Array2<C64>,
    spec: HilbertSpec,
}

impl SpectralPropagator {
    pub fn new(h: &OperatorMatrix) -> Result<Self> {
        let dev = linalg::hermiticity_deviation(h.matrix());
        let scale = linalg::max_abs(h.matrix()).max(1.0);
        if dev > 1e-10 * scale {
            return Err(Error::NotHermitian { max_dev: dev });
        }
        let (eigvals, eigvecs) = linalg::eigh(h.matrix())?;
        Ok(Self {
            eigvals,
            eigvecs,
            spec: h.spec().clone(),
        })
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigvals
    }

    pub fn spec(&self) -> &HilbertSpec {
        &self.spec
    }

    /// Apply e^{−i·sign·H·t} to a raw vector.
    pub fn evolve_vec(&self, psi: &Array1<C64>, t: f64, sign: f64) -> Array1<C64> {
        let n = psi.len();
        let mut coeffs = Array1::<C64>::zeros(n);
        for k in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..n {
                acc += self.eigvecs[(i, k)].conj() * psi[i];
            }
            coeffs[k] = acc * C64::from_polar(1.0, -sign * self.eigvals[k] * t);
        }
        let mut out = Array1::<C64>::zeros(n);
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += self.eigvecs[(i, k)] * coeffs[k];
            }
            out[i] = acc;
        }
        out
    }

    /// Full propagator matrix e^{−i·sign·H·t}.
    pub fn unitary(&self, t: f64, sign: f64) -> OperatorMatrix {
        let n = self.eigvals.len();
        let mut phased = Array2::<C64>::zeros((n, n));
        for k in 0..n {
            let ph = C64::from_polar(1.0, -sign * self.eigvals[k] * t);
            for i in 0..n {
                phased[(i, k)] = self.eigvecs[(i, k)] * ph;
            }
        }
        let u = phased.dot(&linalg::adjoint(&self.eigvecs));
        OperatorMatrix::new(self.spec.clone(), u, false).expect("propagator shape")
    }

    /// Evolve a state (pure vector or density matrix).
    pub fn evolve_state(&self, state: &QuantumState, t: f64, sign: f64) -> Result<QuantumState> {
        if state.spec() != &self.spec {
            return Err(Error::DimensionMismatch(
                "state spec does not match propagator".into(),
            ));
        }
        match state.data() {
            StateData::Pure(psi) => {
                let out = self.evolve_vec(psi, t, sign);
                Ok(QuantumState::pure(self.spec.clone(), out)?)
            }
            StateData::Density(_) => {
                let u = self.unitary(t, sign);
                state.apply(&u)
            }
        }
    }
}

/// One-shot unitary evolution e^{−i·sign·H·t}; builds (and discards) the
/// spectral decomposition. Use [`SpectralPropagator`] to amortise it.
pub fn evolve_unitary(
    h: &OperatorMatrix,
    state: &QuantumState,
    t: f64,
    sign: f64,
) -> Result<QuantumState> {
    SpectralPropagator::new(h)?.evolve_state(state, t, sign)
}

/// Hamiltonian drive passed to the Lindblad integrator. The drift channel
/// d_δ·n̂·t from the [`NoiseSpec`] is added by the integrator itself, on top
/// of whichever drive is supplied here.
pub enum HamiltonianDrive<'a> {
    /// Time-independent H.
    Static(&'a OperatorMatrix),
    /// Arbitrary H(t); re-scanned at every RK stage.
    TimeDependent(&'a dyn Fn(f64) -> Array2<C64>),
}

impl<'a> HamiltonianDrive<'a> {
    fn dim(&self) -> Option<usize> {
        match self {
            Self::Static(h) => Some(h.dim()),
            Self::TimeDependent(_) => None,
        }
    }

    fn inf_norm_at(&self, t: f64) -> f64 {
        let mat;
        let m: &Array2<C64> = match self {
            Self::Static(h) => h.matrix(),
            Self::TimeDependent(f) => {
                mat = f(t);
                &mat
            }
        };
        let n = m.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += m[(i, j)].norm();
            }
            worst = worst.max(row);
        }
        worst
    }
}

/// Options for [`evolve_lindblad_with`].
#[derive(Debug, Clone, Default)]
pub struct LindbladOptions {
    /// Override the automatic step size (s).
    pub step_override: Option<f64>,
    /// Mode carrying the heating/dephasing channels (default 0).
    pub mode_index: usize,
}

struct SparseMat {
    entries: Vec<(usize, usize, C64)>,
}

impl SparseMat {
    fn scan(m: &Array2<C64>) -> Self {
        let n = m.nrows();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if v != C64::new(0.0, 0.0) {
                    entries.push((i, j, v));
                }
            }
        }
        Self { entries }
    }
}

struct LindbladEngine {
    dim: usize,
    gamma_h: f64,
    drift_rate: f64,
    /// composite-space diagonal of the drift operator (n̂ by default)
    drift_diag: Vec<f64>,
    /// jump map of â†: column index -> (row index, weight)
    heat_map: Vec<Option<(usize, f64)>>,
    /// static element-wise decay: −(γ/2)(m_i+m_j) − (1/τ_d)(n_i−n_j)²
    static_coeff: Vec<f64>,
    /// n_i − n_j for the drift phase
    dn: Vec<f64>,
}

impl LindbladEngine {
    fn new(spec: &HilbertSpec, noise: &NoiseSpec, mode_index: usize) -> Result<Self> {
        let dim = spec.total_dim();
        let a_dag = operators::creation(spec, mode_index)?;
        let n_op = operators::number_op(spec, mode_index)?;
        let mut heat_map: Vec<Option<(usize, f64)>> = vec![None; dim];
        for ((i, j), v) in a_dag.matrix().indexed_iter() {
            if v.norm() > 0.0 {
                heat_map[j] = Some((i, v.re));
            }
        }
        let n_diag: Vec<f64> = (0..dim).map(|i| n_op.matrix()[(i, i)].re).collect();
        let m_diag: Vec<f64> = (0..dim)
            .map(|j| heat_map[j].map_or(0.0, |(_, w)| w * w))
            .collect();
        let gamma = noise.gamma_h;
        let deph = noise.dephasing_rate();
        let mut static_coeff = vec![0.0f64; dim * dim];
        let mut dn = vec![0.0f64; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let idx = i * dim + j;
                let diff = n_diag[i] - n_diag[j];
                static_coeff[idx] = -0.5 * gamma * (m_diag[i] + m_diag[j]) - deph * diff * diff;
                dn[idx] = diff;
            }
        }
        Ok(Self {
            dim,
            gamma_h: gamma,
            drift_rate: noise.d_delta,
            drift_diag: n_diag,
            heat_map,
            static_coeff,
            dn,
        })
    }

    /// out = −i[H(t),ρ] + dissipators(ρ), with H given as sparse entries of
    /// the static part; the drift acts through the diagonal phase term.
    fn rhs(&self, h_static: &SparseMat, t: f64, rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        out.fill(C64::new(0.0, 0.0));
        // sparse commutator
        for &(r, c, v) in &h_static.entries {
            let miv = C64::new(0.0, -1.0) * v;
            let (row_r, row_c) = (r * d, c * d);
            for j in 0..d {
                out[row_r + j] += miv * rho[row_c + j];
            }
            let piv = C64::new(0.0, 1.0) * v;
            for i in 0..d {
                out[i * d + c] += piv * rho[i * d + r];
            }
        }
        // element-wise static decay and drift phase
        let drift = self.drift_rate * t;
        for i in 0..d {
            let base = i * d;
            for j in 0..d {
                let idx = base + j;
                let coeff = C64::new(self.static_coeff[idx], -drift * self.dn[idx]);
                out[idx] += coeff * rho[idx];
            }
        }
        // heating gather: (a†ρa)_{u(i),u(j)} += w_i w_j ρ_{ij}
        if self.gamma_h > 0.0 {
            for i in 0..d {
                let Some((ui, wi)) = self.heat_map[i] else {
                    continue;
                };
                for j in 0..d {
                    if let Some((uj, wj)) = self.heat_map[j] {
                        out[ui * d + uj] += C64::new(self.gamma_h * wi * wj, 0.0) * rho[i * d + j];
                    }
                }
            }
        }
    }
}

/// Integrate the master equation and return the state at every grid time.
///
/// `t_grid` must be non-decreasing with `t_grid[0] >= 0`; integration always
/// starts from t = 0. A pure initial state is promoted to a density matrix.
pub fn evolve_lindblad(
    drive: &HamiltonianDrive,
    rho0: &QuantumState,
    noise: &NoiseSpec,
    t_grid: &[f64],
) -> Result<Vec<QuantumState>> {
    evolve_lindblad_with(drive, rho0, noise, t_grid, &LindbladOptions::default())
}

pub fn evolve_lindblad_with(
    drive: &HamiltonianDrive,
    rho0: &QuantumState,
    noise: &NoiseSpec,
    t_grid: &[f64],
    opts: &LindbladOptions,
) -> Result<Vec<QuantumState>> {
    noise.validate()?;
    if t_grid.is_empty() {
        return Err(Error::Domain("empty time grid".into()));
    }
    if t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("time grid must be non-decreasing from 0".into()));
    }
    let spec = rho0.spec().clone();
    let dim = spec.total_dim();
    if let Some(hdim) = drive.dim() {
        if hdim != dim {
            return Err(Error::DimensionMismatch(
                "drive dimension does not match state".into(),
            ));
        }
    }

    let engine = LindbladEngine::new(&spec, noise, opts.mode_index)?;

    // step selection: 1/(50 · max angular frequency) capped by grid spacing
    let t_end = *t_grid.last().unwrap();
    let h_norm = drive
        .inf_norm_at(0.0)
        .max(drive.inf_norm_at(0.5 * t_end))
        .max(drive.inf_norm_at(t_end));
    let nmax = spec.mode_truncations().get(opts.mode_index).copied().unwrap_or(1) as f64;
    let dissipator_norm = noise.gamma_h * (nmax + 1.0)
        + noise.dephasing_rate() * nmax * nmax
        + noise.d_delta.abs() * t_end * nmax;
    let omega_max = (h_norm + dissipator_norm).max(1e-12);
    let grid_dt = t_grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min)
        .min(t_end.max(f64::MIN_POSITIVE));
    let step = opts
        .step_override
        .unwrap_or_else(|| (1.0 / (50.0 * omega_max)).min(grid_dt));

    let mut rho_flat: Vec<C64> = rho0.to_density_matrix().iter().copied().collect();
    let mut k1 = vec![C64::new(0.0, 0.0); dim * dim];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();

    let static_drive = match drive {
        HamiltonianDrive::Static(h) => Some(SparseMat::scan(h.matrix())),
        HamiltonianDrive::TimeDependent(_) => None,
    };

    let mut outputs = Vec::with_capacity(t_grid.len());
    let mut t_now = 0.0f64;
    for &t_target in t_grid {
        let span = t_target - t_now;
        if span > 0.0 {
            let n_sub = (span / step).ceil().max(1.0) as usize;
            let h = span / n_sub as f64;
            for _ in 0..n_sub {
                match &static_drive {
                    Some(sp) => {
                        engine.rhs(sp, t_now, &rho_flat, &mut k1);
                        add_scaled(&rho_flat, &k1, 0.5 * h, &mut tmp);
                        engine.rhs(sp, t_now + 0.5 * h, &tmp, &mut k2);
                        add_scaled(&rho_flat, &k2, 0.5 * h, &mut tmp);
                        engine.rhs(sp, t_now + 0.5 * h, &tmp, &mut k3);
                        add_scaled(&rho_flat, &k3, h, &mut tmp);
                        engine.rhs(sp, t_now + h, &tmp, &mut k4);
                    }
                    None => {
                        let f = match drive {
                            HamiltonianDrive::TimeDependent(f) => f,
                            _ => unreachable!(),
                        };
                        let sp1 = SparseMat::scan(&f(t_now));
                        engine.rhs(&sp1, t_now, &rho_flat, &mut k1);
                        add_scaled(&rho_flat, &k1, 0.5 * h, &mut tmp);
                        let sp_mid = SparseMat::scan(&f(t_now + 0.5 * h));
                        engine.rhs(&sp_mid, t_now + 0.5 * h, &tmp, &mut k2);
                        add_scaled(&rho_flat, &k2, 0.5 * h, &mut tmp);
                        engine.rhs(&sp_mid, t_now + 0.5 * h, &tmp, &mut k3);
                        add_scaled(&rho_flat, &k3, h, &mut tmp);
                        let sp_end = SparseMat::scan(&f(t_now + h));
                        engine.rhs(&sp_end, t_now + h, &tmp, &mut k4);
                    }
                }
                for idx in 0..rho_flat.len() {
                    rho_flat[idx] +=
                        (k1[idx] + 2.0 * k2[idx] + 2.0 * k3[idx] + k4[idx]) * (h / 6.0);
                }
                symmetrize(&mut rho_flat, dim);
                t_now += h;
            }
            t_now = t_target; // absorb accumulated roundoff
        }
        let trace: f64 = (0..dim).map(|i| rho_flat[i * dim + i].re).sum();
        if (trace - 1.0).abs() > 1e-6 {
            return Err(Error::Instability(format!(
                "trace drifted to {trace:.9} at t = {t_target:.3e}; reduce the step size \
                 (current step {step:.3e} s)"
            )));
        }
        let rho = Array2::from_shape_vec((dim, dim), rho_flat.clone())
            .expect("density buffer shape");
        // renormalise the residual trace error before revalidating
        outputs.push(QuantumState::density(spec.clone(), rho).map_err(|e| {
            Error::Instability(format!("state invariant violated at t = {t_target:.3e}: {e}"))
        })?);
    }
    Ok(outputs)
}

fn add_scaled(base: &[C64], k: &[C64], factor: f64, out: &mut [C64]) {
    for i in 0..base.len() {
        out[i] = base[i] + k[i] * factor;
    }
}

fn symmetrize(rho: &mut [C64], dim: usize) {
    for i in 0..dim {
        for j in 0..i {
            let a = rho[i * dim + j];
            let b = rho[j * dim + i];
            let avg = 0.5 * (a + b.conj());
            rho[i * dim + j] = avg;
            rho[j * dim + i] = avg.conj();
        }
        rho[i * dim + i] = C64::new(rho[i * dim + i].re, 0.0);
    }
}

/// Fixed-step RK4 integration of i ψ' = H(t) ψ from `t0` to `t1`.
pub fn evolve_schrodinger_td(
    h_of_t: &dyn Fn(f64) -> Array2<C64>,
    psi0: &Array1<C64>,
    t0: f64,
    t1: f64,
    max_step: f64,
) -> Result<Array1<C64>> {
    if t1 < t0 || max_step <= 0.0 {
        return Err(Error::Domain("invalid integration window".into()));
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(psi0.clone());
    }
    let n_steps = (span / max_step).ceil().max(1.0) as usize;
    let h = span / n_steps as f64;
    let mi = C64::new(0.0, -1.0);
    let mut psi = psi0.clone();
    let mut t = t0;
    for _ in 0..n_steps {
        let k1 = h_of_t(t).dot(&psi).mapv(|z| z * mi);
        let mid = h_of_t(t + 0.5 * h);
        let k2 = mid.dot(&(&psi + &k1.mapv(|z| z * (0.5 * h)))).mapv(|z| z * mi);
        let k3 = mid.dot(&(&psi + &k2.mapv(|z| z * (0.5 * h)))).mapv(|z| z * mi);
        let k4 = h_of_t(t + h)
            .dot(&(&psi + &k3.mapv(|z| z * h)))
            .mapv(|z| z * mi);
        psi = &psi
            + &(k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * (h / 6.0));
        t += h;
    }
    Ok(psi)
}

/// First-order Trotter step: apply (∏_k e^{−i H_k dt/slices})^slices.
pub fn trotter_step(
    terms: &[OperatorMatrix],
    state: &QuantumState,
    dt: f64,
    slices: usize,
) -> Result<QuantumState> {
    if terms.is_empty() {
        return Err(Error::Domain("trotter_step needs at least one term".into()));
    }
    if slices == 0 {
        return Err(Error::Domain("slices must be >= 1".into()));
    }
    let props: Vec<SpectralPropagator> = terms
        .iter()
        .map(SpectralPropagator::new)
        .collect::<Result<_>>()?;
    let sub_dt = dt / slices as f64;
    let mut current = state.clone();
    for _ in 0..slices {
        for p in &props {
            current = p.evolve_state(&current, sub_dt, 1.0)?;
        }
    }
    Ok(current)
}
