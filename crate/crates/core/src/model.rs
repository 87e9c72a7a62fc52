//! Resonator–qubit Hamiltonians, the drive operator and the parity operator.
//!
//! All frequencies are in units of the qubit transition frequency, which is
//! pinned to 1.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{
    annihilation, embed, qubit_lowering, sigma_x, sigma_z, CMatrix, QuantumOperator,
};

/// Smallest number of dressed levels an explicit cut may keep.
pub const MIN_LEVEL_CUT: usize = 12;

/// How many dressed levels enter the master equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LevelCut {
    /// Every level of the truncated space.
    All,
    /// 12 levels for one qubit, 16 for two (or all, if fewer exist).
    Auto,
    Levels(usize),
}

impl LevelCut {
    pub fn resolve(self, n_qubits: usize, space_dim: usize) -> usize {
        match self {
            LevelCut::All => space_dim,
            LevelCut::Auto => {
                let keep = if n_qubits >= 2 { 16 } else { 12 };
                keep.min(space_dim)
            }
            LevelCut::Levels(m) => m.min(space_dim),
        }
    }
}

impl std::fmt::Display for LevelCut {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LevelCut::All => write!(f, "all"),
            LevelCut::Auto => write!(f, "auto"),
            LevelCut::Levels(m) => write!(f, "{m}"),
        }
    }
}

/// Physical and numerical knobs of one resonator–qubit system.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    /// Resonator frequency.
    pub omega_c: f64,
    /// Qubit transition frequency; defines the unit and must be 1.
    pub omega_sigma: f64,
    /// Resonator–qubit coupling rate.
    pub lambda: f64,
    /// Mixing angle between longitudinal and transverse coupling, in (0, π/2].
    pub theta: f64,
    pub n_qubits: usize,
    /// Drive amplitude Ω.
    pub drive_amplitude: f64,
    /// Drive frequency.
    pub omega_d: f64,
    /// Cavity damping rate.
    pub kappa: f64,
    /// Qubit damping rate.
    pub gamma_sigma: f64,
    /// Photon-number truncation.
    pub n_max: usize,
    pub level_cut: LevelCut,
    /// Build H₀ without the λ·cosθ·(a + a†)·σ_z term.
    pub drop_sigma_z_coupling: bool,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            omega_c: 1.0,
            omega_sigma: 1.0,
            lambda: 0.1,
            theta: FRAC_PI_2,
            n_qubits: 2,
            drive_amplitude: 1e-3,
            omega_d: 1.0,
            kappa: 0.01,
            gamma_sigma: 0.01,
            n_max: 10,
            level_cut: LevelCut::Auto,
            drop_sigma_z_coupling: false,
        }
    }
}

impl SystemParams {
    pub fn with_qubits(&self, n_qubits: usize) -> Self {
        Self {
            n_qubits,
            ..self.clone()
        }
    }

    /// Subsystem dimensions: photon first, then one 2 per qubit.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.n_max + 1];
        dims.extend(std::iter::repeat(2).take(self.n_qubits));
        dims
    }

    pub fn space_dim(&self) -> usize {
        (self.n_max + 1) << self.n_qubits
    }

    pub fn levels(&self) -> usize {
        self.level_cut.resolve(self.n_qubits, self.space_dim())
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("omega_c", self.omega_c),
            ("lambda", self.lambda),
            ("Omega", self.drive_amplitude),
            ("kappa", self.kappa),
            ("gamma_sigma", self.gamma_sigma),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if self.omega_sigma != 1.0 {
            return Err(Error::param(
                "omega_sigma",
                "the qubit frequency defines the unit and must be 1",
            ));
        }
        if !self.omega_d.is_finite() || self.omega_d < 0.0 {
            return Err(Error::param("omega_d", "must be finite and >= 0"));
        }
        if self.drive_amplitude > 0.0 && self.omega_d <= 0.0 {
            return Err(Error::param("omega_d", "must be > 0 when the drive is on"));
        }
        if !(self.theta > 0.0 && self.theta <= FRAC_PI_2 * (1.0 + 1e-12)) {
            return Err(Error::param("theta", format!("must lie in (0, pi/2], got {}", self.theta)));
        }
        if !(1..=2).contains(&self.n_qubits) {
            return Err(Error::param("n_qubits", "only 1 or 2 qubits are supported"));
        }
        if self.n_max < 4 {
            return Err(Error::param("n_max", format!("must be >= 4, got {}", self.n_max)));
        }
        if let LevelCut::Levels(m) = self.level_cut {
            let dim = self.space_dim();
            if m > dim {
                return Err(Error::param(
                    "level_cut",
                    format!("{m} exceeds the space dimension {dim}"),
                ));
            }
            if m < MIN_LEVEL_CUT.min(dim) {
                return Err(Error::param(
                    "level_cut",
                    format!("must keep at least {MIN_LEVEL_CUT} levels, got {m}"),
                ));
            }
        }
        Ok(())
    }
}

/// Bare operators lifted to the composite space of a parameter set.
pub struct CompositeOperators {
    pub dims: Vec<usize>,
    pub a: QuantumOperator,
    pub sigma_minus: Vec<QuantumOperator>,
}

impl CompositeOperators {
    pub fn new(p: &SystemParams) -> Result<Self> {
        if !(1..=2).contains(&p.n_qubits) {
            return Err(Error::param("n_qubits", "only 1 or 2 qubits are supported"));
        }
        let dims = p.dims();
        let a = embed(&annihilation(p.n_max)?, 0, &dims)?;
        let sigma_minus = (0..p.n_qubits)
            .map(|j| embed(&qubit_lowering(), j + 1, &dims))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dims,
            a,
            sigma_minus,
        })
    }

    /// a + a†
    pub fn cavity_quadrature(&self) -> QuantumOperator {
        &self.a + &self.a.dagger()
    }

    /// σ⁻ⱼ + σ⁺ⱼ
    pub fn qubit_quadrature(&self, j: usize) -> QuantumOperator {
        &self.sigma_minus[j] + &self.sigma_minus[j].dagger()
    }

    pub fn sigma_z(&self, j: usize) -> Result<QuantumOperator> {
        embed(&sigma_z(), j + 1, &self.dims)
    }

    pub fn sigma_x(&self, j: usize) -> Result<QuantumOperator> {
        embed(&sigma_x(), j + 1, &self.dims)
    }
}

/// H₀ = ω_c a†a + ω_σ Σⱼ σ⁺ⱼσ⁻ⱼ + λ(a + a†) Σⱼ (cosθ σ_zʲ − sinθ σ_xʲ).
pub fn build_h0(p: &SystemParams) -> Result<QuantumOperator> {
    let ops = CompositeOperators::new(p)?;
    build_h0_from(p, &ops)
}

pub(crate) fn build_h0_from(p: &SystemParams, ops: &CompositeOperators) -> Result<QuantumOperator> {
    let number = &ops.a.dagger() * &ops.a;
    let mut h = number.scale(p.omega_c);
    let quad = ops.cavity_quadrature();
    let (sin, cos) = p.theta.sin_cos();
    let longitudinal = if p.drop_sigma_z_coupling { 0.0 } else { cos };
    for j in 0..p.n_qubits {
        let lo = &ops.sigma_minus[j];
        h = &h + &(&lo.dagger() * lo).scale(p.omega_sigma);
        let mix = &ops.sigma_z(j)?.scale(longitudinal) - &ops.sigma_x(j)?.scale(sin);
        h = &h + &(&quad * &mix).scale(p.lambda);
    }
    Ok(h)
}

/// V = Σⱼ (σ⁻ⱼ + σ⁺ⱼ); the drive is Ω·cos(ω_d t)·V.
pub fn build_drive_operator(p: &SystemParams) -> Result<QuantumOperator> {
    let ops = CompositeOperators::new(p)?;
    Ok(drive_from(&ops))
}

pub(crate) fn drive_from(ops: &CompositeOperators) -> QuantumOperator {
    (0..ops.sigma_minus.len())
        .map(|j| ops.qubit_quadrature(j))
        .reduce(|acc, v| &acc + &v)
        .expect("at least one qubit")
}

/// Π = exp[iπ(a†a + Σⱼ σ⁺ⱼσ⁻ⱼ)], diagonal with entries ±1.
pub fn parity_operator(p: &SystemParams) -> Result<QuantumOperator> {
    if !(1..=2).contains(&p.n_qubits) {
        return Err(Error::param("n_qubits", "only 1 or 2 qubits are supported"));
    }
    let dims = p.dims();
    let side = p.space_dim();
    let mut m = CMatrix::zeros(side, side);
    for idx in 0..side {
        let photons = idx >> p.n_qubits;
        let excited = (idx & ((1 << p.n_qubits) - 1)).count_ones() as usize;
        let sign = if (photons + excited) % 2 == 0 { 1.0 } else { -1.0 };
        m[(idx, idx)] = Complex64::new(sign, 0.0);
    }
    QuantumOperator::new(m, dims)
}

/// ‖[H₀, Π]‖_max / ‖H₀‖_max.
pub fn parity_defect(p: &SystemParams) -> Result<f64> {
    let h = build_h0(p)?;
    let parity = parity_operator(p)?;
    let scale = h.max_norm();
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(h.commutator(&parity).max_norm() / scale)
}
