//! Dressed eigenbasis of H₀ and the positive-frequency operators built on it.

use std::fmt::Write as _;

use crate::dense::matmul;
use crate::error::{Error, Result};
use crate::model::{build_h0_from, drive_from, CompositeOperators, SystemParams};
use crate::operator::{eig_hermitian, ket_index, CMatrix, QubitState, ZERO};

/// Energy gap below which two dressed levels count as degenerate.
pub const DEFAULT_DEG_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct DressedBasis {
    /// All eigenvalues of H₀, ascending.
    pub energies: Vec<f64>,
    /// Eigenvectors of H₀ as columns, bare basis.
    pub states: CMatrix,
    /// Number of retained levels M.
    pub level_cut: usize,
    /// X⁺ (M×M): ⟨φₙ|(a + a†)|φₘ⟩ for E_m > E_n, zero otherwise.
    pub x_plus: CMatrix,
    /// D⁺ⱼ (M×M), one per qubit, same rule with σ_x of qubit j.
    pub d_plus: Vec<CMatrix>,
    /// Drive operator V projected on the retained levels.
    pub drive: CMatrix,
    pub deg_tol: f64,
}

pub fn diagonalize(p: &SystemParams) -> Result<DressedBasis> {
    diagonalize_with_tol(p, DEFAULT_DEG_TOL)
}

pub fn diagonalize_with_tol(p: &SystemParams, deg_tol: f64) -> Result<DressedBasis> {
    let ops = CompositeOperators::new(p)?;
    let h = build_h0_from(p, &ops)?;
    let eig = eig_hermitian(&h)?;
    let m = p.levels();
    if m == 0 || m > eig.values.len() {
        return Err(Error::param("level_cut", format!("cannot keep {m} levels")));
    }
    let kept = eig.vectors.columns(0, m).into_owned();
    let project = |op: &CMatrix| matmul(&kept.adjoint(), &matmul(op, &kept));

    let energies = eig.values;
    let positive = |full: CMatrix| {
        CMatrix::from_fn(m, m, |r, c| {
            if energies[c] > energies[r] + deg_tol {
                full[(r, c)]
            } else {
                ZERO
            }
        })
    };

    let x_plus = positive(project(ops.cavity_quadrature().matrix()));
    let d_plus = (0..p.n_qubits)
        .map(|j| Ok(positive(project(ops.sigma_x(j)?.matrix()))))
        .collect::<Result<Vec<_>>>()?;
    let drive = project(drive_from(&ops).matrix());

    Ok(DressedBasis {
        energies,
        states: eig.vectors,
        level_cut: m,
        x_plus,
        d_plus,
        drive,
        deg_tol,
    })
}

impl DressedBasis {
    pub fn n_qubits(&self) -> usize {
        self.d_plus.len()
    }

    /// E_m − E_n.
    pub fn gap(&self, n: usize, m: usize) -> f64 {
        self.energies[m] - self.energies[n]
    }

    /// Largest transition frequency among retained levels.
    pub fn max_gap(&self) -> f64 {
        self.gap(0, self.level_cut - 1)
    }

    /// X⁻X⁺ on the retained levels, the photon-number observable.
    pub fn photon_number(&self) -> CMatrix {
        matmul(&self.x_plus.adjoint(), &self.x_plus)
    }
}

/// Populations of the two bright single-excitation states in the dressed
/// levels φ₁ and φ₃.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BrightStateOverlap {
    /// |⟨ψ₋|φ₁⟩|² with ψ₋ = (|e,g,0⟩ + |g,e,0⟩)/2 + |g,g,1⟩/√2.
    pub lower: f64,
    /// |⟨ψ₊|φ₃⟩|² with ψ₊ = (|e,g,0⟩ + |g,e,0⟩)/2 − |g,g,1⟩/√2.
    pub upper: f64,
}

/// Compare φ₁ and φ₃ with the approximate bright states of the resonant
/// two-qubit system. Fails on a degenerate first-excited manifold.
pub fn overlap_with_reference_kets(basis: &DressedBasis) -> Result<BrightStateOverlap> {
    if basis.n_qubits() != 2 {
        return Err(Error::param("n_qubits", "bright-state overlap needs 2 qubits"));
    }
    if basis.energies.len() < 4 {
        return Err(Error::param("n_max", "space too small"));
    }
    for (a, b) in [(1, 2), (2, 3)] {
        if basis.gap(a, b).abs() <= basis.deg_tol {
            return Err(Error::Degenerate(format!(
                "levels {a} and {b} are split by only {:.3e}",
                basis.gap(a, b)
            )));
        }
    }
    use QubitState::{Excited as E, Ground as G};
    let eg0 = ket_index(&[E, G], 0);
    let ge0 = ket_index(&[G, E], 0);
    let gg1 = ket_index(&[G, G], 1);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let overlap = |level: usize, sign: f64| {
        let v = basis.states.column(level);
        (v[eg0] * 0.5 + v[ge0] * 0.5 + v[gg1] * (sign * s)).norm_sqr()
    };
    Ok(BrightStateOverlap {
        lower: overlap(1, 1.0),
        upper: overlap(3, -1.0),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub n: usize,
    pub m: usize,
    /// E_m − E_n
    pub freq: f64,
    pub abs_x: f64,
    /// |⟨φₙ|σ_xʲ|φₘ⟩| per qubit.
    pub abs_d: Vec<f64>,
}

/// Non-degenerate transitions n < m among the retained levels.
pub fn transition_table(basis: &DressedBasis) -> Vec<Transition> {
    let m_cut = basis.level_cut;
    let mut rows = Vec::with_capacity(m_cut * (m_cut - 1) / 2);
    for n in 0..m_cut {
        for m in n + 1..m_cut {
            let freq = basis.gap(n, m);
            if freq <= basis.deg_tol {
                continue;
            }
            rows.push(Transition {
                n,
                m,
                freq,
                abs_x: basis.x_plus[(n, m)].norm(),
                abs_d: basis.d_plus.iter().map(|d| d[(n, m)].norm()).collect(),
            });
        }
    }
    rows
}

/// CSV with columns n,m,freq,abs_x,abs_d1,abs_d2; abs_d2 is empty for a
/// single qubit.
pub fn transition_csv(rows: &[Transition]) -> String {
    let mut out = String::from("n,m,freq,abs_x,abs_d1,abs_d2\n");
    for r in rows {
        let d1 = r.abs_d.first().map(|v| format!("{v:.17e}")).unwrap_or_default();
        let d2 = r.abs_d.get(1).map(|v| format!("{v:.17e}")).unwrap_or_default();
        let _ = writeln!(out, "{},{},{:.17e},{:.17e},{d1},{d2}", r.n, r.m, r.freq, r.abs_x);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LevelCut;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

    fn params(n_qubits: usize, lambda: f64, theta: f64) -> SystemParams {
        SystemParams {
            n_qubits,
            lambda,
            theta,
            ..SystemParams::default()
        }
    }

    #[test]
    fn resonant_pair_single_excitation_energies() {
        // Tavis–Cummings-like manifold to leading order: 1 ∓ √2 λ and 1
        let lambda = 0.01;
        let b = diagonalize(&params(2, lambda, FRAC_PI_2)).unwrap();
        let s2 = 2f64.sqrt() * lambda;
        let e0 = b.energies[0];
        assert_abs_diff_eq!(b.gap(0, 1), 1.0 - s2, epsilon = 5e-4);
        assert_abs_diff_eq!(b.gap(0, 2), 1.0, epsilon = 5e-4);
        assert_abs_diff_eq!(b.gap(0, 3), 1.0 + s2, epsilon = 5e-4);
        assert!(e0 < 0.0);
    }

    #[test]
    fn operators_are_strictly_upper_in_energy() {
        let b = diagonalize(&params(2, 0.2, FRAC_PI_6)).unwrap();
        for r in 0..b.level_cut {
            for c in 0..b.level_cut {
                if b.energies[c] <= b.energies[r] + b.deg_tol {
                    assert_eq!(b.x_plus[(r, c)], ZERO);
                    assert_eq!(b.d_plus[0][(r, c)], ZERO);
                }
            }
        }
        assert!(b.x_plus[(0, 1)].norm() > 0.0);
        assert!(crate::operator::hermitian_defect(&b.drive) < 1e-12);
    }

    #[test]
    fn bright_states_dominate_at_moderate_coupling() {
        let b = diagonalize(&params(2, 0.05, FRAC_PI_2)).unwrap();
        let o = overlap_with_reference_kets(&b).unwrap();
        assert!(o.lower > 0.98, "{o:?}");
        assert!(o.upper > 0.98, "{o:?}");
    }

    #[test]
    fn bright_state_overlap_rejects_degenerate_manifold() {
        let b = diagonalize(&params(2, 0.0, FRAC_PI_2)).unwrap();
        assert!(matches!(overlap_with_reference_kets(&b), Err(Error::Degenerate(_))));
    }

    #[test]
    fn transition_table_counts_and_csv() {
        let p = SystemParams {
            level_cut: LevelCut::Levels(12),
            ..params(1, 0.1, FRAC_PI_6)
        };
        let b = diagonalize(&p).unwrap();
        let rows = transition_table(&b);
        assert_eq!(rows.len(), 12 * 11 / 2);
        let csv = transition_csv(&rows);
        assert_eq!(csv.lines().count(), rows.len() + 1);
        assert!(csv.lines().nth(1).unwrap().ends_with(','));
    }
}
