//! Dressed-basis master equation and its two steady-state solvers.
//!
//! Density matrices on the M retained levels are vectorized by stacking
//! columns: vec(ρ)[i + M·j] = ρ[i, j]. With that convention
//! vec(AρB) = (Bᵀ ⊗ A)·vec(ρ).

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::dense::{matmul_slices, matvec_into, SparseRows};
use crate::dressed::DressedBasis;
use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::operator::{eig_hermitian_matrix, kron, max_norm, CMatrix, LuFactor, I, ONE, ZERO};

/// Superoperators of one driven, damped system.
#[derive(Clone, Debug)]
pub struct LiouvillianSet {
    /// Undriven generator: coherent part plus dissipators.
    pub l0: CMatrix,
    /// −i[V, ·], so the full generator is L₀ + Ω cos(ω_d t) L_V.
    pub lv: CMatrix,
    /// Drive operator V on the retained levels.
    pub drive: CMatrix,
    pub omega_d: f64,
    pub drive_amplitude: f64,
    pub levels: usize,
    /// X⁻X⁺ on the retained levels.
    pub photon_number: CMatrix,
    /// Largest retained transition frequency.
    pub max_gap: f64,
}

/// D[O]: ρ ↦ OρO† − ½{O†O, ρ}.
pub fn dissipator_matrix(o: &CMatrix) -> CMatrix {
    let m = o.nrows();
    let id = CMatrix::identity(m, m);
    let odo = o.adjoint() * o;
    let half = Complex64::new(0.5, 0.0);
    kron(&o.map(|z| z.conj()), o) - (kron(&id, &odo) + kron(&odo.transpose(), &id)) * half
}

/// −i(H⊗ − ⊗H) for vectorized ρ.
fn commutator_matrix(h: &CMatrix) -> CMatrix {
    let m = h.nrows();
    let id = CMatrix::identity(m, m);
    (kron(&id, h) - kron(&h.transpose(), &id)) * (-I)
}

pub fn build_liouvillian(basis: &DressedBasis, p: &SystemParams) -> Result<LiouvillianSet> {
    let m = basis.level_cut;
    let h = CMatrix::from_fn(m, m, |r, c| {
        if r == c {
            Complex64::new(basis.energies[r] - basis.energies[0], 0.0)
        } else {
            ZERO
        }
    });
    let mut l0 = commutator_matrix(&h);
    if p.kappa != 0.0 {
        l0 += dissipator_matrix(&basis.x_plus) * Complex64::new(p.kappa, 0.0);
    }
    if p.gamma_sigma != 0.0 {
        for d in &basis.d_plus {
            l0 += dissipator_matrix(d) * Complex64::new(p.gamma_sigma, 0.0);
        }
    }
    Ok(LiouvillianSet {
        l0,
        lv: commutator_matrix(&basis.drive),
        drive: basis.drive.clone(),
        omega_d: p.omega_d,
        drive_amplitude: p.drive_amplitude,
        levels: m,
        photon_number: basis.photon_number(),
        max_gap: basis.max_gap(),
    })
}

impl LiouvillianSet {
    pub fn dim(&self) -> usize {
        self.levels * self.levels
    }

    /// out[:, c] ← scale · (−i)(V X_c − X_c V) for each column c of `cols`,
    /// where X_c is column c reshaped to M×M. Costs O(M³) per column instead
    /// of O(M⁴) for the dense L_V.
    fn apply_drive(&self, cols: &[Complex64], scale: Complex64, out: &mut [Complex64]) {
        let m = self.levels;
        let nn = m * m;
        let ncols = cols.len() / nn;
        let v = self.drive.as_slice();
        // V·[X_1 X_2 …] in one product
        matmul_slices(m, m, m * ncols, v, cols, out);
        let mut xv = vec![ZERO; nn];
        let f = -I * scale;
        for c in 0..ncols {
            let x = &cols[c * nn..(c + 1) * nn];
            matmul_slices(m, m, m, x, v, &mut xv);
            for (o, s) in out[c * nn..(c + 1) * nn].iter_mut().zip(&xv) {
                *o = (*o - s) * f;
            }
        }
    }

    fn drive_matrix_product(&self, x: &CMatrix, scale: Complex64) -> CMatrix {
        let mut out = CMatrix::zeros(x.nrows(), x.ncols());
        self.apply_drive(x.as_slice(), scale, out.as_mut_slice());
        out
    }

    /// ⟨X⁻X⁺⟩ for a density matrix on the retained levels.
    pub fn photon_expectation(&self, rho: &CMatrix) -> f64 {
        self.photon_number.component_mul(&rho.transpose()).sum().re
    }
}

pub const DEFAULT_HARMONICS: usize = 3;
pub const MAX_HARMONICS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FloquetOptions {
    /// Starting harmonic cutoff K.
    pub harmonics: usize,
    pub max_harmonics: usize,
    /// Largest allowed change of ρ₀ between cutoffs K and K + 1.
    pub shift_tol: f64,
    /// When ‖ρ_K‖ is below this, the shift estimate is skipped.
    pub tail_tol: f64,
    /// Bound on the max-norm residual of the harmonic-balance equations.
    pub residual_tol: f64,
}

impl Default for FloquetOptions {
    fn default() -> Self {
        Self {
            harmonics: DEFAULT_HARMONICS,
            max_harmonics: MAX_HARMONICS,
            shift_tol: 1e-8,
            tail_tol: 1e-10,
            residual_tol: 1e-8,
        }
    }
}

/// Periodic steady state ρ(t) = Σₖ ρₖ e^{ikω_d t}, |k| ≤ K.
#[derive(Clone, Debug)]
pub struct FloquetSteadyState {
    harmonics: Vec<CMatrix>,
    cutoff: usize,
    /// Max-norm residual of the truncated harmonic-balance equations.
    pub residual: f64,
}

impl FloquetSteadyState {
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// ρₖ for −K ≤ k ≤ K.
    pub fn rho(&self, k: i64) -> &CMatrix {
        assert!(k.unsigned_abs() as usize <= self.cutoff, "harmonic {k} out of range");
        &self.harmonics[(k + self.cutoff as i64) as usize]
    }

    /// Time average over one drive period, ρ₀.
    pub fn period_average(&self) -> &CMatrix {
        self.rho(0)
    }

    /// ρ(t) reconstructed from the harmonics.
    pub fn at_time(&self, t: f64, omega_d: f64) -> CMatrix {
        let mut out = self.rho(0).clone();
        for k in 1..=self.cutoff as i64 {
            let phase = Complex64::from_polar(1.0, k as f64 * omega_d * t);
            out += self.rho(k) * phase + self.rho(-k) * phase.conj();
        }
        out
    }
}

/// Steady state with automatic harmonic escalation: K grows until the
/// estimated shift of ρ₀ from adding harmonic K + 1 is below `shift_tol`.
pub fn floquet_steady_state(l: &LiouvillianSet, opts: &FloquetOptions) -> Result<FloquetSteadyState> {
    let mut k = opts.harmonics.max(1);
    loop {
        let elim = eliminate(l, k)?;
        let done = l.drive_amplitude == 0.0
            || max_norm(elim.state.rho(k as i64)) <= opts.tail_tol
            || truncation_shift(l, &elim)? <= opts.shift_tol;
        if done {
            return check_residual(l, elim.state, opts.residual_tol);
        }
        if k >= opts.max_harmonics {
            return Err(Error::StateCheck(format!(
                "harmonic series not converged at K = {k}"
            )));
        }
        k += 1;
    }
}

/// Harmonic balance at a fixed cutoff K.
pub fn floquet_fixed(l: &LiouvillianSet, k_max: usize, residual_tol: f64) -> Result<FloquetSteadyState> {
    check_residual(l, eliminate(l, k_max)?.state, residual_tol)
}

fn check_residual(
    l: &LiouvillianSet,
    mut state: FloquetSteadyState,
    residual_tol: f64,
) -> Result<FloquetSteadyState> {
    state.residual = harmonic_residual(l, &state);
    if !(state.residual <= residual_tol) {
        return Err(Error::Residual {
            residual: state.residual,
            tolerance: residual_tol,
        });
    }
    Ok(state)
}

struct Elimination {
    state: FloquetSteadyState,
    /// Factorized reduced blocks S_1..S_K.
    blocks: Vec<LuFactor>,
    /// S₀ with its first row replaced by the trace functional.
    s0: LuFactor,
}

/// Block elimination from |k| = K downwards. Only the k > 0 chain is
/// factorized; the k < 0 chain follows from ρ₋ₖ = ρₖ†.
fn eliminate(l: &LiouvillianSet, k_max: usize) -> Result<Elimination> {
    let m = l.levels;
    let n = l.dim();
    let g = Complex64::new(0.5 * l.drive_amplitude, 0.0);
    let driven = l.drive_amplitude != 0.0 && k_max > 0;
    if driven && !(l.omega_d > 0.0) {
        return Err(Error::param("omega_d", "must be > 0 when the drive is on"));
    }

    // T_k with ρ_k = T_k ρ_{k−1}, stored for k = 1..K
    let mut transfer: Vec<CMatrix> = Vec::new();
    let mut blocks: Vec<LuFactor> = Vec::new();
    if driven {
        let neg_glv = &l.lv * (-g);
        for k in (1..=k_max).rev() {
            let mut s = shifted_l0(l, k);
            if let Some(t) = transfer.last() {
                s += l.drive_matrix_product(t, g);
            }
            let lu = LuFactor::new(s)?;
            transfer.push(lu.solve_mat(&neg_glv)?);
            blocks.push(lu);
        }
        transfer.reverse();
        blocks.reverse();
    }

    let mut s0 = l.l0.clone();
    if let Some(t1) = transfer.first() {
        // T₋₁[(ij),(lk)] = conj T₁[(ji),(kl)]
        let swap = |a: usize| (a % m) * m + a / m;
        let t_minus = CMatrix::from_fn(n, n, |r, c| t1[(swap(r), swap(c))].conj());
        s0 += l.drive_matrix_product(&(t1 + t_minus), g);
    }
    for c in 0..n {
        s0[(0, c)] = ZERO;
    }
    for i in 0..m {
        s0[(0, i + m * i)] = ONE;
    }
    let s0 = LuFactor::new(s0)?;
    let mut rhs = CMatrix::zeros(n, 1);
    rhs[(0, 0)] = ONE;
    s0.solve_in_place(&mut rhs)?;
    let rho0 = CMatrix::from_column_slice(m, m, rhs.as_slice());
    let rho0 = (&rho0 + rho0.adjoint()) * Complex64::new(0.5, 0.0);

    let mut positive = vec![rho0];
    for t in &transfer {
        let prev = positive.last().unwrap();
        let mut out = vec![ZERO; n];
        matvec_into(t, prev.as_slice(), &mut out);
        positive.push(CMatrix::from_column_slice(m, m, &out));
    }
    let k_eff = positive.len() - 1;
    let mut harmonics: Vec<CMatrix> = positive[1..].iter().rev().map(|r| r.adjoint()).collect();
    harmonics.extend(positive);

    Ok(Elimination {
        state: FloquetSteadyState {
            harmonics,
            cutoff: k_eff,
            residual: f64::NAN,
        },
        blocks,
        s0,
    })
}

fn shifted_l0(l: &LiouvillianSet, k: usize) -> CMatrix {
    let mut s = l.l0.clone();
    let shift = Complex64::new(0.0, k as f64 * l.omega_d);
    for i in 0..l.dim() {
        s[(i, i)] -= shift;
    }
    s
}

/// Estimated max-norm change of ρ₀ when the cutoff goes from K to K + 1.
pub fn truncation_shift_estimate(l: &LiouvillianSet, k_max: usize) -> Result<f64> {
    truncation_shift(l, &eliminate(l, k_max)?)
}

/// First-order change of ρ₀ when harmonic K + 1 joins the expansion.
///
/// ρ_{K+1} ≈ −(L₀ − i(K+1)ω)⁻¹ g L_V ρ_K enters row K as the source
/// f_K = g L_V ρ_{K+1}; eliminating down gives f_{k−1} = −g L_V S_k⁻¹ f_k,
/// and S₀ δρ₀ = −(f₁ + f₁†) with the trace row held at zero.
fn truncation_shift(l: &LiouvillianSet, elim: &Elimination) -> Result<f64> {
    let m = l.levels;
    let k_max = elim.state.cutoff;
    let g = Complex64::new(0.5 * l.drive_amplitude, 0.0);
    let next = LuFactor::new(shifted_l0(l, k_max + 1))?;

    let as_col = |x: &CMatrix| CMatrix::from_column_slice(m * m, 1, x.as_slice());
    let as_sq = |x: &CMatrix| CMatrix::from_column_slice(m, m, x.as_slice());

    let mut rho_next = l.drive_matrix_product(&as_col(elim.state.rho(k_max as i64)), -g);
    next.solve_in_place(&mut rho_next)?;
    let mut f = l.drive_matrix_product(&rho_next, g);
    for lu in elim.blocks.iter().rev() {
        lu.solve_in_place(&mut f)?;
        f = l.drive_matrix_product(&f, -g);
    }
    let f_sq = as_sq(&f);
    let mut rhs = as_col(&(&f_sq + f_sq.adjoint())) * Complex64::new(-1.0, 0.0);
    rhs[(0, 0)] = ZERO;
    elim.s0.solve_in_place(&mut rhs)?;
    Ok(max_norm(&rhs))
}

/// max |(L₀ − ikω)ρₖ + g L_V(ρₖ₋₁ + ρₖ₊₁)| over all k, with ρ beyond ±K = 0.
pub fn harmonic_residual(l: &LiouvillianSet, state: &FloquetSteadyState) -> f64 {
    let n = l.dim();
    let g = Complex64::new(0.5 * l.drive_amplitude, 0.0);
    let kk = state.cutoff as i64;
    let mut worst = 0.0_f64;
    let mut buf = vec![ZERO; n];
    for k in -kk..=kk {
        let rho = state.rho(k);
        matvec_into(&l.l0, rho.as_slice(), &mut buf);
        let shift = Complex64::new(0.0, k as f64 * l.omega_d);
        let mut r = CMatrix::from_column_slice(l.levels, l.levels, &buf) - rho * shift;
        let mut neighbours = CMatrix::zeros(l.levels, l.levels);
        if k > -kk {
            neighbours += state.rho(k - 1);
        }
        if k < kk {
            neighbours += state.rho(k + 1);
        }
        r += l.drive_matrix_product(&neighbours, g);
        worst = worst.max(max_norm(&r));
    }
    worst
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeDomainOptions {
    /// Upper bound on the step; the actual step divides the drive period.
    pub max_dt: Option<f64>,
    /// Give up after this much simulated time.
    pub t_max: f64,
    /// Relative change of the period-averaged ⟨X⁻X⁺⟩ that counts as steady.
    pub rel_tol: f64,
    /// Record ⟨X⁻X⁺⟩ every this many steps (0 disables).
    pub sample_stride: usize,
}

impl Default for TimeDomainOptions {
    fn default() -> Self {
        Self {
            max_dt: None,
            t_max: 2.0e5,
            rel_tol: 1e-8,
            sample_stride: 0,
        }
    }
}

pub const TRACE_DRIFT_TOL: f64 = 1e-8;
/// Liouvillian entries at or below this fraction of the largest one are
/// round-off from the eigensolver and are skipped by the time stepper.
const SPARSE_DROP: f64 = 1e-14;
pub const NEGATIVITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct TimeDomainResult {
    /// ρ averaged over the last drive period.
    pub period_average: CMatrix,
    /// Time at which the steadiness test passed.
    pub t_converged: f64,
    pub dt: f64,
    pub steps_per_period: usize,
    /// Relative change of the period-averaged ⟨X⁻X⁺⟩ in the last period.
    pub last_delta: f64,
    /// (t, ⟨X⁻X⁺⟩) samples.
    pub samples: Vec<(f64, f64)>,
}

impl TimeDomainResult {
    pub fn samples_csv(&self) -> String {
        let mut out = String::from("t,photon_number\n");
        for (t, v) in &self.samples {
            let _ = writeln!(out, "{t:.17e},{v:.17e}");
        }
        out
    }
}

/// Fixed-step RK4 from the dressed ground state until the period-averaged
/// photon number stops changing.
pub fn evolve_time_domain(l: &LiouvillianSet, opts: &TimeDomainOptions) -> Result<TimeDomainResult> {
    let m = l.levels;
    let n = l.dim();
    let period = if l.omega_d > 0.0 {
        std::f64::consts::TAU / l.omega_d
    } else {
        std::f64::consts::TAU
    };
    let fastest = if l.max_gap > 0.0 {
        std::f64::consts::TAU / l.max_gap
    } else {
        period
    };
    let mut dt_bound = period.min(fastest) / 40.0;
    if let Some(cap) = opts.max_dt {
        dt_bound = dt_bound.min(cap);
    }
    let steps_per_period = (period / dt_bound).ceil() as usize;
    let dt = period / steps_per_period as f64;

    let amp = l.drive_amplitude;
    let w = l.omega_d;
    let l0 = SparseRows::from_dense(&l.l0, SPARSE_DROP);
    let lv = SparseRows::from_dense(&l.lv, SPARSE_DROP);
    log::debug!("time domain: {} + {} stored entries of {}", l0.nnz(), lv.nnz(), n * n);
    let deriv = |t: f64, y: &[Complex64], out: &mut [Complex64]| {
        out.fill(ZERO);
        l0.mul_add(y, ONE, out);
        if amp != 0.0 {
            lv.mul_add(y, Complex64::new(amp * (w * t).cos(), 0.0), out);
        }
    };

    let mut y = vec![ZERO; n];
    y[0] = ONE;
    let (mut k1, mut k2, mut k3, mut k4) =
        (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
    let mut tmp = vec![ZERO; n];
    let diag: Vec<usize> = (0..m).map(|i| i + m * i).collect();

    let mut samples = Vec::new();
    let mut t = 0.0;
    let mut step = 0usize;
    let mut prev_avg: Option<f64> = None;
    let mut last_delta = f64::INFINITY;
    let h = Complex64::new(dt, 0.0);
    let half = Complex64::new(0.5 * dt, 0.0);
    let sixth = Complex64::new(dt / 6.0, 0.0);

    loop {
        let mut acc = vec![ZERO; n];
        for _ in 0..steps_per_period {
            for (a, v) in acc.iter_mut().zip(&y) {
                *a += v;
            }
            if opts.sample_stride > 0 && step % opts.sample_stride == 0 {
                let rho = CMatrix::from_column_slice(m, m, &y);
                samples.push((t, l.photon_expectation(&rho)));
            }
            deriv(t, &y, &mut k1);
            for i in 0..n {
                tmp[i] = y[i] + half * k1[i];
            }
            deriv(t + 0.5 * dt, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = y[i] + half * k2[i];
            }
            deriv(t + 0.5 * dt, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = y[i] + h * k3[i];
            }
            deriv(t + dt, &tmp, &mut k4);
            for i in 0..n {
                y[i] += sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            step += 1;
            t = step as f64 * dt;
        }

        let trace: Complex64 = diag.iter().map(|&i| y[i]).sum();
        if (trace - ONE).norm() > TRACE_DRIFT_TOL {
            return Err(Error::StateCheck(format!(
                "trace drifted to {trace} at t = {t}"
            )));
        }

        let scale = Complex64::new(1.0 / steps_per_period as f64, 0.0);
        let avg = CMatrix::from_iterator(m, m, acc.into_iter().map(|z| z * scale));
        let avg = (&avg + avg.adjoint()) * Complex64::new(0.5, 0.0);
        let photons = l.photon_expectation(&avg);
        if let Some(prev) = prev_avg {
            last_delta = if photons == prev {
                0.0
            } else {
                (photons - prev).abs() / photons.abs().max(f64::MIN_POSITIVE)
            };
            if last_delta < opts.rel_tol {
                let lowest = eig_hermitian_matrix(&avg)?.values[0];
                if lowest < -NEGATIVITY_TOL {
                    return Err(Error::StateCheck(format!(
                        "period-averaged state has eigenvalue {lowest:.3e}"
                    )));
                }
                return Ok(TimeDomainResult {
                    period_average: avg,
                    t_converged: t,
                    dt,
                    steps_per_period,
                    last_delta,
                    samples,
                });
            }
        }
        prev_avg = Some(photons);
        if t >= opts.t_max {
            return Err(Error::NotConverged {
                t_end: t,
                last_delta,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dressed::diagonalize;
    use crate::model::LevelCut;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

    fn small(n_qubits: usize, theta: f64) -> SystemParams {
        SystemParams {
            n_qubits,
            lambda: 0.1,
            theta,
            n_max: 5,
            level_cut: LevelCut::Levels(12),
            ..SystemParams::default()
        }
    }

    fn set(p: &SystemParams) -> LiouvillianSet {
        build_liouvillian(&diagonalize(p).unwrap(), p).unwrap()
    }

    #[test]
    fn trace_is_preserved_by_both_generators() {
        let l = set(&small(2, FRAC_PI_6));
        let m = l.levels;
        for mat in [&l.l0, &l.lv] {
            for c in 0..l.dim() {
                let s: Complex64 = (0..m).map(|i| mat[(i + m * i, c)]).sum();
                assert!(s.norm() < 1e-13, "{s}");
            }
        }
    }

    #[test]
    fn structured_drive_matches_dense() {
        let l = set(&small(2, FRAC_PI_6));
        let x = CMatrix::from_fn(l.dim(), 3, |r, c| Complex64::new(r as f64 * 0.1, c as f64 - 0.3));
        let g = Complex64::new(0.7, 0.0);
        let diff = max_norm(&(l.drive_matrix_product(&x, g) - &l.lv * &x * g));
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn dissipator_matches_direct_action() {
        let o = CMatrix::from_fn(3, 3, |r, c| Complex64::new((r * 3 + c) as f64, r as f64 - c as f64));
        let rho = CMatrix::from_fn(3, 3, |r, c| Complex64::new(1.0 + r as f64, c as f64));
        let direct = &o * &rho * o.adjoint()
            - (o.adjoint() * &o * &rho + &rho * o.adjoint() * &o) * Complex64::new(0.5, 0.0);
        let vec = dissipator_matrix(&o) * CMatrix::from_column_slice(9, 1, rho.as_slice());
        let diff = max_norm(&(CMatrix::from_column_slice(3, 3, vec.as_slice()) - direct));
        assert!(diff < 1e-12);
    }

    #[test]
    fn undriven_steady_state_is_dressed_ground_state() {
        let p = SystemParams {
            drive_amplitude: 0.0,
            ..small(2, FRAC_PI_6)
        };
        let st = floquet_steady_state(&set(&p), &FloquetOptions::default()).unwrap();
        let rho = st.period_average();
        let mut expected = CMatrix::zeros(rho.nrows(), rho.ncols());
        expected[(0, 0)] = ONE;
        assert!(max_norm(&(rho - expected)) < 1e-12);
    }

    #[test]
    fn floquet_state_is_physical() {
        let p = SystemParams {
            omega_d: 0.86,
            drive_amplitude: 0.01,
            ..small(2, FRAC_PI_2)
        };
        let l = set(&p);
        let st = floquet_steady_state(&l, &FloquetOptions::default()).unwrap();
        let rho = st.period_average();
        assert!((rho.trace() - ONE).norm() < 1e-12);
        assert!(crate::operator::hermitian_defect(rho) < 1e-12);
        assert!(eig_hermitian_matrix(rho).unwrap().values[0] > -1e-10);
        assert!(st.residual < 1e-10);
        assert!(max_norm(&(st.rho(-1) - st.rho(1).adjoint())) == 0.0);
    }

    #[test]
    fn shift_estimate_tracks_actual_cutoff_change() {
        let p = SystemParams {
            omega_d: 0.853,
            drive_amplitude: 0.02,
            ..small(2, FRAC_PI_2)
        };
        let l = set(&p);
        for k in [1, 2] {
            let est = truncation_shift_estimate(&l, k).unwrap();
            let lo = floquet_fixed(&l, k, 1.0).unwrap();
            let hi = floquet_fixed(&l, k + 1, 1.0).unwrap();
            let actual = max_norm(&(hi.rho(0) - lo.rho(0)));
            assert!(actual > 0.0);
            assert!((est / actual - 1.0).abs() < 0.5, "K = {k}: {est:e} vs {actual:e}");
        }
    }

    #[test]
    fn time_domain_agrees_with_floquet_on_small_system() {
        let p = SystemParams {
            n_qubits: 1,
            omega_d: 0.9,
            drive_amplitude: 0.01,
            kappa: 0.05,
            gamma_sigma: 0.05,
            ..small(1, FRAC_PI_2)
        };
        let l = set(&p);
        let fl = floquet_steady_state(&l, &FloquetOptions::default()).unwrap();
        let td = evolve_time_domain(&l, &TimeDomainOptions::default()).unwrap();
        let a = l.photon_expectation(fl.period_average());
        let b = l.photon_expectation(&td.period_average);
        assert!((a - b).abs() <= 1e-6 * a.abs(), "{a} vs {b}");
    }
}
