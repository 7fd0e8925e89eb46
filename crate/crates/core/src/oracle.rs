//! Brute-force master-equation reference for the driven optomechanical cavity.
//!
//! The Hamiltonian
//! `H = -Delta0 c^dag c + omega_m b^dag b + g0 (b^dag + b) c^dag c + i E (c^dag - c)`
//! is built on a truncated photon (x) phonon Fock space and the Lindblad
//! equation is solved for its steady state. Collapse operators are
//! `sqrt(2 kappa) c` (the field decays at `kappa`, the photon number at
//! `2 kappa`), `sqrt(gamma (N+1)) b` and `sqrt(gamma N) b^dag`.
//!
//! Nothing here uses the sideband series or the delay integrals.

use std::collections::BTreeMap;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Largest Hilbert-space dimension accepted by the Hamiltonian builder.
const MAX_BASIS: usize = 1_000_000;
/// Above this Hilbert-space dimension `Auto` switches to time integration.
const NULLSPACE_MAX_DIM: usize = 10_000;
/// Spectral shift of the inverse iteration in units of omega_m.
const INVERSE_SHIFT: f64 = 1e-9;
const HERMITICITY_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-8;
const DEGENERACY_TOL: f64 = 1e-6;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Fock-space cutoffs and the leakage gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSpec {
    /// Highest photon number kept (at least 2).
    pub n_photon_max: usize,
    /// Highest phonon number kept (at least 4).
    pub n_phonon_max: usize,
    /// Largest population allowed in the top photon or phonon level.
    pub leakage_tol: f64,
}

impl TruncationSpec {
    pub fn new(n_photon_max: usize, n_phonon_max: usize) -> Self {
        TruncationSpec {
            n_photon_max,
            n_phonon_max,
            leakage_tol: 1e-6,
        }
    }

    /// Four photons and `ceil(16 eta^2 + 10 + 4 sqrt(N) eta)` phonons.
    pub fn for_params(params: &SystemParams) -> Self {
        let eta = params.eta();
        let nb = (16.0 * eta * eta + 10.0 + 4.0 * params.nbar().sqrt() * eta).ceil() as usize;
        Self::new(4, nb)
    }

    pub fn with_leakage_tol(mut self, tol: f64) -> Self {
        self.leakage_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_photon_max < 2 {
            return Err(Error::invalid("n_photon_max", "must be >= 2"));
        }
        if self.n_phonon_max < 4 {
            return Err(Error::invalid("n_phonon_max", "must be >= 4"));
        }
        if !(self.leakage_tol > 0.0) {
            return Err(Error::invalid("leakage_tol", "must be > 0"));
        }
        Ok(())
    }

    pub fn photon_dim(&self) -> usize {
        self.n_photon_max + 1
    }

    pub fn phonon_dim(&self) -> usize {
        self.n_phonon_max + 1
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.photon_dim() * self.phonon_dim()
    }

    /// Basis index of `|n_photon, n_phonon>`.
    pub fn index(&self, n_photon: usize, n_phonon: usize) -> usize {
        n_photon * self.phonon_dim() + n_phonon
    }
}

/// Compressed sparse row matrix of complex entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl SparseMatrix {
    /// Square matrix from `(row, col, value)` entries; duplicates are summed
    /// and exact zeros dropped.
    pub fn from_triplets(n: usize, entries: impl IntoIterator<Item = (usize, usize, Complex64)>) -> Self {
        let mut entries: Vec<_> = entries.into_iter().collect();
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(entries.len());
        for (r, col, v) in entries {
            assert!(r < n && col < n, "entry ({r}, {col}) outside {n}x{n}");
            if last == Some((r, col)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                rows.push(r);
                col_idx.push(col);
                values.push(v);
                last = Some((r, col));
            }
        }
        let mut kept_cols = Vec::with_capacity(col_idx.len());
        let mut kept_vals = Vec::with_capacity(values.len());
        for ((r, col), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v != ZERO {
                row_ptr[r + 1] += 1;
                kept_cols.push(col);
                kept_vals.push(v);
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            n,
            row_ptr,
            col_idx: kept_cols,
            values: kept_vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[range.clone()].binary_search(&col) {
            Ok(k) => self.values[range.start + k],
            Err(_) => ZERO,
        }
    }

    /// `(row, col, value)` over the stored entries in row order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.n).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.n, self.entries().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        SparseMatrix {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    pub fn matmul(&self, other: &SparseMatrix) -> Self {
        let mut out = Vec::new();
        for r in 0..self.n {
            let mut row: BTreeMap<usize, Complex64> = BTreeMap::new();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let mid = self.col_idx[k];
                for l in other.row_ptr[mid]..other.row_ptr[mid + 1] {
                    *row.entry(other.col_idx[l]).or_insert(ZERO) += self.values[k] * other.values[l];
                }
            }
            out.extend(row.into_iter().map(|(col, v)| (r, col, v)));
        }
        Self::from_triplets(self.n, out)
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut m = vec![vec![ZERO; self.n]; self.n];
        for (r, c, v) in self.entries() {
            m[r][c] = v;
        }
        m
    }
}

fn check_size(trunc: &TruncationSpec) -> Result<usize> {
    trunc.validate()?;
    let d = trunc.dim();
    if d > MAX_BASIS {
        return Err(Error::Size(d));
    }
    Ok(d)
}

/// Hamiltonian matrix in rad/s on the product basis `|n_photon, n_phonon>`.
pub fn build_hamiltonian(params: &SystemParams, trunc: &TruncationSpec) -> Result<SparseMatrix> {
    params.validate()?;
    let d = check_size(trunc)?;
    Ok(hamiltonian_scaled(params, trunc, 1.0, d))
}

fn hamiltonian_scaled(params: &SystemParams, trunc: &TruncationSpec, unit: f64, d: usize) -> SparseMatrix {
    let (delta0, w, g0, e) = (
        params.detuning0 / unit,
        params.omega_m / unit,
        params.g0 / unit,
        params.drive / unit,
    );
    let mut entries = Vec::new();
    for nc in 0..trunc.photon_dim() {
        for nb in 0..trunc.phonon_dim() {
            let i = trunc.index(nc, nb);
            entries.push((i, i, c(-delta0 * nc as f64 + w * nb as f64, 0.0)));
            if nb + 1 < trunc.phonon_dim() && nc > 0 {
                let j = trunc.index(nc, nb + 1);
                let v = c(g0 * nc as f64 * ((nb + 1) as f64).sqrt(), 0.0);
                entries.push((j, i, v));
                entries.push((i, j, v));
            }
            if nc + 1 < trunc.photon_dim() && e != 0.0 {
                let j = trunc.index(nc + 1, nb);
                let amp = e * ((nc + 1) as f64).sqrt();
                entries.push((j, i, c(0.0, amp)));
                entries.push((i, j, c(0.0, -amp)));
            }
        }
    }
    SparseMatrix::from_triplets(d, entries)
}

fn photon_lowering(trunc: &TruncationSpec, d: usize) -> SparseMatrix {
    let mut entries = Vec::new();
    for nc in 1..trunc.photon_dim() {
        for nb in 0..trunc.phonon_dim() {
            entries.push((trunc.index(nc - 1, nb), trunc.index(nc, nb), c((nc as f64).sqrt(), 0.0)));
        }
    }
    SparseMatrix::from_triplets(d, entries)
}

fn phonon_lowering(trunc: &TruncationSpec, d: usize) -> SparseMatrix {
    let mut entries = Vec::new();
    for nc in 0..trunc.photon_dim() {
        for nb in 1..trunc.phonon_dim() {
            entries.push((trunc.index(nc, nb - 1), trunc.index(nc, nb), c((nb as f64).sqrt(), 0.0)));
        }
    }
    SparseMatrix::from_triplets(d, entries)
}

/// Density matrix on the truncated product space, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    trunc: TruncationSpec,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    fn from_vec(trunc: TruncationSpec, data: Vec<Complex64>) -> Self {
        DensityMatrix { trunc, data }
    }

    /// Pure product state `|n_photon, n_phonon><n_photon, n_phonon|`.
    pub fn fock(trunc: &TruncationSpec, n_photon: usize, n_phonon: usize) -> Self {
        let d = trunc.dim();
        let mut data = vec![ZERO; d * d];
        let i = trunc.index(n_photon, n_phonon);
        data[i * d + i] = c(1.0, 0.0);
        Self::from_vec(*trunc, data)
    }

    /// Photon vacuum times a truncated thermal phonon state of occupation `nbar`.
    pub fn vacuum_thermal(trunc: &TruncationSpec, nbar: f64) -> Self {
        let d = trunc.dim();
        let mut data = vec![ZERO; d * d];
        let ratio = if nbar > 0.0 { nbar / (nbar + 1.0) } else { 0.0 };
        let weights: Vec<f64> = (0..trunc.phonon_dim()).map(|k| ratio.powi(k as i32)).collect();
        let norm: f64 = weights.iter().sum();
        for (k, w) in weights.iter().enumerate() {
            let i = trunc.index(0, k);
            data[i * d + i] = c(w / norm, 0.0);
        }
        Self::from_vec(*trunc, data)
    }

    pub fn dim(&self) -> usize {
        self.trunc.dim()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim() + col]
    }

    pub fn trace(&self) -> Complex64 {
        let d = self.dim();
        (0..d).map(|i| self.data[i * d + i]).sum()
    }

    fn population(&self, nc: usize, nb: usize) -> f64 {
        let i = self.trunc.index(nc, nb);
        self.data[i * self.dim() + i].re
    }

    /// Marginal photon-number distribution.
    pub fn photon_distribution(&self) -> Vec<f64> {
        (0..self.trunc.photon_dim())
            .map(|nc| (0..self.trunc.phonon_dim()).map(|nb| self.population(nc, nb)).sum())
            .collect()
    }

    /// Marginal phonon-number distribution.
    pub fn phonon_distribution(&self) -> Vec<f64> {
        (0..self.trunc.phonon_dim())
            .map(|nb| (0..self.trunc.photon_dim()).map(|nc| self.population(nc, nb)).sum())
            .collect()
    }

    /// `<c^dag c>`.
    pub fn mean_photon(&self) -> f64 {
        self.photon_distribution().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// `<c^dag c^dag c c>`.
    pub fn two_photon_moment(&self) -> f64 {
        self.photon_distribution()
            .iter()
            .enumerate()
            .map(|(n, p)| (n * n.saturating_sub(1)) as f64 * p)
            .sum()
    }

    /// `<b^dag b>`.
    pub fn mean_phonon(&self) -> f64 {
        self.phonon_distribution().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Population of the highest photon or phonon level, whichever is larger.
    pub fn leakage(&self) -> f64 {
        let top_photon = *self.photon_distribution().last().expect("non-empty");
        let top_phonon = *self.phonon_distribution().last().expect("non-empty");
        top_photon.max(top_phonon)
    }

    /// `max |rho - rho^dag|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.data[i * d + j] - self.data[j * d + i].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let d = self.dim();
        let m = Mat::<Complex64>::from_fn(d, d, |i, j| 0.5 * (self.get(i, j) + self.get(j, i).conj()));
        let eig = m
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Solver(format!("eigenvalue solver failed: {e:?}")))?;
        Ok(eig.into_iter().fold(f64::INFINITY, f64::min))
    }
}

/// Steady-state solver choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyStateMethod {
    /// Shifted inverse iteration on the vectorized Liouvillian.
    Nullspace,
    /// Propagation from vacuum (x) thermal until `|d rho/dt| < 1e-12 |rho|`.
    TimeIntegration,
    /// Nullspace up to Hilbert dimension 10^4, time integration above.
    Auto,
}

/// Steady-state observables and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateResult {
    pub mean_photon: f64,
    pub two_photon_moment: f64,
    pub g2: f64,
    pub mean_phonon: f64,
    pub trace_defect: f64,
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
    pub leakage: f64,
    /// `Nullspace` or `TimeIntegration`, never `Auto`.
    pub method: SteadyStateMethod,
}

impl SteadyStateResult {
    /// Photon number normalized to the resonant empty-cavity value `E^2/kappa^2`.
    pub fn normalized_photon_number(&self, params: &SystemParams) -> f64 {
        self.mean_photon * params.kappa * params.kappa / (params.drive * params.drive)
    }
}

/// Error controls for the Dormand-Prince propagator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Cap on accepted plus rejected steps per call.
    pub max_steps: usize,
}

impl Default for EvolutionSpec {
    fn default() -> Self {
        EvolutionSpec {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            max_steps: 2_000_000,
        }
    }
}

/// Lindblad generator for one parameter set, in units where omega_m = 1.
#[derive(Debug, Clone)]
pub struct LindbladSystem {
    params: SystemParams,
    trunc: TruncationSpec,
    liouvillian: SparseMatrix,
}

impl LindbladSystem {
    /// Cavity loss plus thermal mechanical damping.
    pub fn new(params: &SystemParams, trunc: &TruncationSpec) -> Result<Self> {
        params.validate()?;
        let d = check_size(trunc)?;
        let w = params.omega_m;
        let h = hamiltonian_scaled(params, trunc, w, d);
        let mut collapse = vec![photon_lowering(trunc, d).scaled(c((2.0 * params.kappa / w).sqrt(), 0.0))];
        let gamma = params.gamma() / w;
        let nbar = params.nbar();
        if gamma > 0.0 {
            let b = phonon_lowering(trunc, d);
            collapse.push(b.scaled(c((gamma * (nbar + 1.0)).sqrt(), 0.0)));
            if nbar > 0.0 {
                collapse.push(b.adjoint().scaled(c((gamma * nbar).sqrt(), 0.0)));
            }
        }
        Ok(Self::assemble(params, trunc, &h, &collapse))
    }

    /// Hamiltonian dynamics only, without any dissipator.
    pub fn closed(params: &SystemParams, trunc: &TruncationSpec) -> Result<Self> {
        params.validate()?;
        let d = check_size(trunc)?;
        let h = hamiltonian_scaled(params, trunc, params.omega_m, d);
        Ok(Self::assemble(params, trunc, &h, &[]))
    }

    fn assemble(params: &SystemParams, trunc: &TruncationSpec, h: &SparseMatrix, collapse: &[SparseMatrix]) -> Self {
        let d = trunc.dim();
        // H_eff = H - (i/2) sum C^dag C
        let mut heff: Vec<(usize, usize, Complex64)> = h.entries().collect();
        for op in collapse {
            let cdc = op.adjoint().matmul(op);
            heff.extend(cdc.entries().map(|(r, col, v)| (r, col, v * c(0.0, -0.5))));
        }
        let heff = SparseMatrix::from_triplets(d, heff);
        let mut entries = Vec::with_capacity(2 * heff.nnz() * d);
        // -i H_eff rho
        for (i, k, v) in heff.entries() {
            let a = v * c(0.0, -1.0);
            for j in 0..d {
                entries.push((i * d + j, k * d + j, a));
            }
        }
        // rho (i H_eff^dag): (rho B)_ij = sum_k rho_ik B_kj with B_kj = i conj(Heff_jk)
        for (j, k, v) in heff.entries() {
            let b = v.conj() * c(0.0, 1.0);
            for i in 0..d {
                entries.push((i * d + j, i * d + k, b));
            }
        }
        // C rho C^dag
        for op in collapse {
            for (i, k, ci) in op.entries() {
                for (j, l, cj) in op.entries() {
                    entries.push((i * d + j, k * d + l, ci * cj.conj()));
                }
            }
        }
        LindbladSystem {
            params: *params,
            trunc: *trunc,
            liouvillian: SparseMatrix::from_triplets(d * d, entries),
        }
    }

    /// Vectorized generator acting on row-major `rho`, in units of omega_m.
    pub fn liouvillian(&self) -> &SparseMatrix {
        &self.liouvillian
    }

    pub fn truncation(&self) -> &TruncationSpec {
        &self.trunc
    }

    fn residual(&self, rho: &[Complex64]) -> f64 {
        let mut out = vec![ZERO; rho.len()];
        self.liouvillian.mul_vec(rho, &mut out);
        out.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Steady state and its observables; fails if the truncation leaks.
    pub fn steady_state(&self, method: SteadyStateMethod) -> Result<(DensityMatrix, SteadyStateResult)> {
        let method = match method {
            SteadyStateMethod::Auto if self.trunc.dim() > NULLSPACE_MAX_DIM => SteadyStateMethod::TimeIntegration,
            SteadyStateMethod::Auto => SteadyStateMethod::Nullspace,
            m => m,
        };
        let rho = match method {
            SteadyStateMethod::Nullspace => self.nullspace()?,
            _ => self.relax(&EvolutionSpec { rel_tol: 1e-12, abs_tol: 1e-15, ..EvolutionSpec::default() })?,
        };
        let trace = rho.trace();
        let hermiticity_defect = rho.hermiticity_defect();
        if hermiticity_defect > HERMITICITY_TOL {
            return Err(Error::Solver(format!("steady state not Hermitian (defect {hermiticity_defect:e})")));
        }
        let min_eigenvalue = rho.min_eigenvalue()?;
        if min_eigenvalue < -POSITIVITY_TOL {
            return Err(Error::Solver(format!("steady state not positive (eigenvalue {min_eigenvalue:e})")));
        }
        let leakage = rho.leakage();
        if leakage > self.trunc.leakage_tol {
            return Err(Error::Leakage {
                leakage,
                tolerance: self.trunc.leakage_tol,
            });
        }
        let mean_photon = rho.mean_photon();
        let two_photon_moment = rho.two_photon_moment();
        let result = SteadyStateResult {
            mean_photon,
            two_photon_moment,
            g2: two_photon_moment / (mean_photon * mean_photon),
            mean_phonon: rho.mean_phonon(),
            trace_defect: (trace - 1.0).norm(),
            hermiticity_defect,
            min_eigenvalue,
            leakage,
            method,
        };
        Ok((rho, result))
    }

    fn nullspace(&self) -> Result<DensityMatrix> {
        let d = self.trunc.dim();
        let n = d * d;
        let mut triplets: Vec<Triplet<usize, usize, Complex64>> = self
            .liouvillian
            .entries()
            .map(|(r, col, v)| Triplet::new(r, col, v))
            .collect();
        triplets.extend((0..n).map(|i| Triplet::new(i, i, c(-INVERSE_SHIFT, 0.0))));
        let m = SparseColMat::<usize, Complex64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::Solver(format!("sparse assembly failed: {e:?}")))?;
        let lu = m
            .sp_lu()
            .map_err(|e| Error::Solver(format!("sparse LU failed: {e:?}")))?;

        let iterate = |start: Vec<Complex64>| -> Result<Vec<Complex64>> {
            let mut x = Col::<Complex64>::from_fn(n, |i| start[i]);
            let mut prev = normalized_by_trace(&x, d)?;
            for _ in 0..12 {
                x = lu.solve(&x);
                let scale = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
                if !(scale.is_finite() && scale > 0.0) {
                    return Err(Error::Solver("inverse iteration produced a non-finite vector".into()));
                }
                x = Col::from_fn(n, |i| x[i] / scale);
                let next = normalized_by_trace(&x, d)?;
                let change = next.iter().zip(&prev).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                prev = next;
                if change < 1e-14 {
                    break;
                }
            }
            Ok(prev)
        };
        // Two unrelated starting states; a unique steady state attracts both.
        let mut identity = vec![ZERO; n];
        for i in 0..d {
            identity[i * d + i] = c(1.0 / d as f64, 0.0);
        }
        let mut skewed = vec![ZERO; n];
        let mut norm = 0.0;
        for i in 0..d {
            let w = 1.0 / (1.0 + i as f64);
            skewed[i * d + i] = c(w, 0.0);
            norm += w;
        }
        skewed.iter_mut().for_each(|v| *v /= norm);
        let a = iterate(identity)?;
        let b = iterate(skewed)?;
        let gap = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        if gap > DEGENERACY_TOL {
            return Err(Error::Solver(format!(
                "steady state not unique: starting states converge {gap:e} apart"
            )));
        }
        Ok(DensityMatrix::from_vec(self.trunc, a))
    }

    fn relax(&self, spec: &EvolutionSpec) -> Result<DensityMatrix> {
        let mut rho = DensityMatrix::vacuum_thermal(&self.trunc, self.params.nbar());
        let chunk = 10.0;
        let max_time = 1e6;
        let mut t = 0.0;
        let mut h = 1e-2;
        loop {
            h = self.propagate(&mut rho.data, chunk, h, spec)?;
            t += chunk;
            let size = rho.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let residual = self.residual(&rho.data);
            if residual < 1e-12 * size {
                return Ok(rho);
            }
            if t >= max_time {
                return Err(Error::Convergence {
                    context: "steady state by time integration".into(),
                    estimate: size,
                    error: residual,
                    subdivisions: (t / chunk) as usize,
                });
            }
        }
    }

    /// Propagates `rho` to each time in `times` (seconds, non-decreasing,
    /// starting from zero).
    pub fn evolve(&self, rho0: &DensityMatrix, times: &[f64], spec: &EvolutionSpec) -> Result<Vec<DensityMatrix>> {
        if rho0.trunc != self.trunc {
            return Err(Error::invalid("rho0", "truncation does not match the system"));
        }
        let mut state = rho0.data.clone();
        let mut now = 0.0;
        let mut h = 1e-2;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let target = t * self.params.omega_m;
            if !(target >= now) || !target.is_finite() {
                return Err(Error::domain("evolution times must be finite and non-decreasing from 0"));
            }
            if target > now {
                h = self.propagate(&mut state, target - now, h, spec)?;
                now = target;
            }
            out.push(DensityMatrix::from_vec(self.trunc, state.clone()));
        }
        Ok(out)
    }

    /// Dormand-Prince 5(4) over a span of scaled time; returns the last step size.
    fn propagate(&self, y: &mut [Complex64], span: f64, h0: f64, spec: &EvolutionSpec) -> Result<f64> {
        const A: [[f64; 6]; 6] = [
            [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
            [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
            [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
        ];
        const E: [f64; 7] = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];
        let n = y.len();
        let mut k = vec![vec![ZERO; n]; 7];
        let mut stage = vec![ZERO; n];
        let mut next = vec![ZERO; n];
        let l = &self.liouvillian;
        let mut t = 0.0;
        let mut h = h0.min(span);
        let mut steps = 0;
        l.mul_vec(y, &mut k[0]);
        while t < span {
            if steps >= spec.max_steps {
                return Err(Error::Convergence {
                    context: "time integration step budget".into(),
                    estimate: t,
                    error: span - t,
                    subdivisions: steps,
                });
            }
            steps += 1;
            let last = t + h >= span;
            let h_step = if last { span - t } else { h };
            for s in 0..6 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, a) in A[s].iter().enumerate().take(s + 1) {
                        if *a != 0.0 {
                            acc += k[j][i] * (h_step * a);
                        }
                    }
                    stage[i] = acc;
                }
                let (head, tail) = k.split_at_mut(s + 1);
                l.mul_vec(&stage, &mut tail[0]);
                let _ = head;
            }
            // Stage six is the fifth-order solution; k[6] is its derivative.
            next.copy_from_slice(&stage);
            let mut err = 0.0f64;
            for i in 0..n {
                let mut e = ZERO;
                for (j, w) in E.iter().enumerate() {
                    if *w != 0.0 {
                        e += k[j][i] * *w;
                    }
                }
                let scale = spec.abs_tol + spec.rel_tol * y[i].norm().max(next[i].norm());
                err = err.max((e * h_step).norm() / scale);
            }
            if !err.is_finite() {
                return Err(Error::Solver("time integration produced non-finite values".into()));
            }
            if err <= 1.0 {
                t = if last { span } else { t + h_step };
                y.copy_from_slice(&next);
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !last || err > 1.0 {
                h = h_step * factor;
            }
        }
        Ok(h)
    }
}

fn normalized_by_trace(x: &Col<Complex64>, d: usize) -> Result<Vec<Complex64>> {
    let trace: Complex64 = (0..d).map(|i| x[i * d + i]).sum();
    if trace.norm() < 1e-300 {
        return Err(Error::Solver("steady-state candidate has zero trace".into()));
    }
    let mut v: Vec<Complex64> = x.iter().map(|v| v / trace).collect();
    // Remove the rounding-level anti-Hermitian part.
    for i in 0..d {
        for j in i..d {
            let a = v[i * d + j];
            let b = v[j * d + i];
            let avg = 0.5 * (a + b.conj());
            v[i * d + j] = avg;
            v[j * d + i] = avg.conj();
        }
    }
    Ok(v)
}

/// Steady state for one parameter set; requires a nonzero drive.
pub fn steady_state(params: &SystemParams, trunc: &TruncationSpec, method: SteadyStateMethod) -> Result<SteadyStateResult> {
    if !(params.drive > 0.0) {
        return Err(Error::invalid("drive", "steady state needs a nonzero drive"));
    }
    let system = LindbladSystem::new(params, trunc)?;
    system.steady_state(method).map(|(_, r)| r)
}

/// Zero-drive limit of `g2` and of the normalized photon number from a
/// linear fit in `E^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakDriveResult {
    pub g2: f64,
    pub g2_slope: f64,
    /// Extrapolated `<c^dag c> kappa^2 / E^2`.
    pub spectrum: f64,
    pub spectrum_slope: f64,
    /// `(drive, result)` for every run, in input order.
    pub runs: Vec<(f64, SteadyStateResult)>,
    pub warnings: Vec<String>,
}

impl WeakDriveResult {
    pub fn max_leakage(&self) -> f64 {
        self.runs.iter().map(|(_, r)| r.leakage).fold(0.0, f64::max)
    }
}

/// Least-squares line `y = a + b x`, with the largest residual.
fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let worst = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).abs())
        .fold(0.0, f64::max);
    (intercept, slope, worst)
}

/// Runs the steady state at each drive and extrapolates to zero drive.
///
/// Needs at least two distinct drives, each at most `0.1 kappa`.
pub fn weak_drive_extrapolation(params: &SystemParams, trunc: &TruncationSpec, drives: &[f64]) -> Result<WeakDriveResult> {
    params.validate()?;
    if drives.len() < 2 {
        return Err(Error::invalid("drives", "need at least two drive amplitudes"));
    }
    for &e in drives {
        if !(e > 0.0 && e <= 0.1 * params.kappa) {
            return Err(Error::invalid("drives", format!("drive {e} outside (0, 0.1 kappa]")));
        }
    }
    let mut runs = Vec::with_capacity(drives.len());
    for &e in drives {
        let p = params.with_drive(e);
        runs.push((e, steady_state(&p, trunc, SteadyStateMethod::Auto)?));
    }
    let x: Vec<f64> = drives.iter().map(|e| e * e).collect();
    let g2: Vec<f64> = runs.iter().map(|(_, r)| r.g2).collect();
    let s: Vec<f64> = runs
        .iter()
        .map(|(e, r)| r.normalized_photon_number(&params.with_drive(*e)))
        .collect();
    let (g2_0, g2_slope, g2_resid) = fit_line(&x, &g2);
    let (s_0, s_slope, s_resid) = fit_line(&x, &s);
    let mut warnings = Vec::new();
    if g2_resid > 1e-3 * g2_0.abs() {
        warnings.push(format!("g2 deviates from a line in E^2 by {g2_resid:e}"));
    }
    if s_resid > 1e-3 * s_0.abs() {
        warnings.push(format!("photon number deviates from a line in E^2 by {s_resid:e}"));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let steps: Vec<f64> = order.windows(2).map(|w| g2[w[1]] - g2[w[0]]).collect();
    if steps.iter().any(|d| *d > 0.0) && steps.iter().any(|d| *d < 0.0) {
        warnings.push("g2 is not monotone in the drive amplitude".into());
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(WeakDriveResult {
        g2: g2_0,
        g2_slope,
        spectrum: s_0,
        spectrum_slope: s_slope,
        runs,
        warnings,
    })
}
