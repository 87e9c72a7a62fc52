//! Photon flux, the radiance witness and extremum search on sampled curves.

use std::fmt;

use crate::dressed::diagonalize;
use crate::error::{Error, Result};
use crate::master_equation::{build_liouvillian, floquet_steady_state, FloquetOptions, LiouvillianSet};
use crate::model::SystemParams;
use crate::operator::CMatrix;

/// One-qubit photon numbers below this leave the witness undefined.
pub const FLUX_FLOOR: f64 = 1e-14;
/// |R| at or below this counts as uncorrelated emission.
pub const CLASS_TOL: f64 = 1e-6;
/// Negative photon numbers down to −this are rounding noise and clamp to 0.
pub const NEGATIVE_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-8;

/// ⟨X⁻X⁺⟩ of a density matrix on the retained levels.
pub fn photon_number(l: &LiouvillianSet, rho: &CMatrix) -> Result<f64> {
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
        return Err(Error::StateCheck(format!("trace {tr} is not 1")));
    }
    let n = l.photon_expectation(rho);
    if n < -NEGATIVE_TOL {
        return Err(Error::StateCheck(format!("negative photon number {n:.3e}")));
    }
    if n < 0.0 {
        log::warn!("clamping photon number {n:.3e} to zero");
        return Ok(0.0);
    }
    Ok(n)
}

/// Emitted photon flux κ⟨X⁻X⁺⟩.
pub fn photon_flux(l: &LiouvillianSet, rho: &CMatrix, kappa: f64) -> Result<f64> {
    Ok(kappa * photon_number(l, rho)?)
}

/// R = (n₂ − 2n₁) / (2n₁), from two- and one-qubit photon numbers (or fluxes).
pub fn radiance_witness(n2: f64, n1: f64) -> Result<f64> {
    if !(n1 >= FLUX_FLOOR) {
        return Err(Error::UndefinedWitness(n1));
    }
    Ok((n2 - 2.0 * n1) / (2.0 * n1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RadianceClass {
    Subradiance,
    Uncorrelated,
    Superradiance,
    Hyperradiance,
}

impl fmt::Display for RadianceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RadianceClass::Subradiance => "subradiance",
            RadianceClass::Uncorrelated => "uncorrelated",
            RadianceClass::Superradiance => "superradiance",
            RadianceClass::Hyperradiance => "hyperradiance",
        })
    }
}

pub fn classify(r: f64) -> RadianceClass {
    if r.abs() <= CLASS_TOL {
        RadianceClass::Uncorrelated
    } else if r < 0.0 {
        RadianceClass::Subradiance
    } else if r <= 1.0 {
        RadianceClass::Superradiance
    } else {
        RadianceClass::Hyperradiance
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiancePoint {
    pub omega_d: f64,
    /// One-qubit ⟨X⁻X⁺⟩.
    pub n1: f64,
    /// Two-qubit ⟨X⁻X⁺⟩.
    pub n2: f64,
    /// Witness, NaN where undefined.
    pub r: f64,
    pub class: Option<RadianceClass>,
    /// Larger of the two steady-state residuals.
    pub residual: f64,
}

impl RadiancePoint {
    pub fn new(omega_d: f64, n1: f64, n2: f64, residual: f64) -> Self {
        let (r, class) = match radiance_witness(n2, n1) {
            Ok(r) => (r, Some(classify(r))),
            Err(_) => (f64::NAN, None),
        };
        Self {
            omega_d,
            n1,
            n2,
            r,
            class,
            residual,
        }
    }
}

/// Steady-state photon number and the harmonic-balance residual behind it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyValue {
    pub photons: f64,
    pub residual: f64,
    pub harmonics: usize,
}

/// Steady-state photon number of one system across drive frequencies. The
/// dressed basis and Liouvillian are built once; only ω_d changes.
pub struct SpectrumSolver {
    set: LiouvillianSet,
    pub options: FloquetOptions,
}

impl SpectrumSolver {
    pub fn new(p: &SystemParams) -> Result<Self> {
        p.validate()?;
        let basis = diagonalize(p)?;
        Ok(Self {
            set: build_liouvillian(&basis, p)?,
            options: FloquetOptions::default(),
        })
    }

    pub fn liouvillian(&self) -> &LiouvillianSet {
        &self.set
    }

    /// The Liouvillian with the drive frequency set to `omega_d`.
    pub fn liouvillian_at(&self, omega_d: f64) -> LiouvillianSet {
        LiouvillianSet {
            omega_d,
            ..self.set.clone()
        }
    }

    pub fn steady(&self, omega_d: f64) -> Result<SteadyValue> {
        let set = self.liouvillian_at(omega_d);
        let st = floquet_steady_state(&set, &self.options)?;
        Ok(SteadyValue {
            photons: photon_number(&set, st.period_average())?,
            residual: st.residual,
            harmonics: st.cutoff(),
        })
    }

    pub fn photon_number_at(&self, omega_d: f64) -> Result<f64> {
        Ok(self.steady(omega_d)?.photons)
    }
}

/// One- and two-qubit solvers sharing every parameter except the qubit count.
pub struct RadianceSolver {
    pub one: SpectrumSolver,
    pub two: SpectrumSolver,
}

impl RadianceSolver {
    pub fn new(p: &SystemParams) -> Result<Self> {
        Ok(Self {
            one: SpectrumSolver::new(&p.with_qubits(1))?,
            two: SpectrumSolver::new(&p.with_qubits(2))?,
        })
    }

    pub fn point(&self, omega_d: f64) -> Result<RadiancePoint> {
        let a = self.one.steady(omega_d)?;
        let b = self.two.steady(omega_d)?;
        Ok(RadiancePoint::new(omega_d, a.photons, b.photons, a.residual.max(b.residual)))
    }

    /// R at one frequency, NaN where undefined.
    pub fn witness(&self, omega_d: f64) -> Result<f64> {
        Ok(self.point(omega_d)?.r)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumPoint {
    pub omega_d: f64,
    /// Steady-state ⟨X⁻X⁺⟩, or the failure message for this point.
    pub value: std::result::Result<f64, String>,
}

/// Excitation spectrum ⟨X⁻X⁺⟩(ω_d). Failed points are flagged, not dropped.
pub fn excitation_spectrum(p: &SystemParams, grid: &[f64]) -> Result<Vec<SpectrumPoint>> {
    let solver = SpectrumSolver::new(p)?;
    Ok(grid
        .iter()
        .map(|&w| SpectrumPoint {
            omega_d: w,
            value: solver.photon_number_at(w).map_err(|e| e.to_string()),
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtremumKind {
    Maximum,
    Minimum,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremum {
    pub kind: ExtremumKind,
    /// Grid index of the sampled extremum.
    pub index: usize,
    /// Position after parabolic refinement.
    pub x: f64,
    pub y: f64,
    pub prominence: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PeakList {
    /// All kept extrema, ordered along x.
    pub extrema: Vec<Extremum>,
}

impl ExtremumKind {
    pub fn label(self) -> &'static str {
        match self {
            ExtremumKind::Maximum => "peak",
            ExtremumKind::Minimum => "deep",
        }
    }
}

impl PeakList {
    pub fn maxima(&self) -> impl Iterator<Item = &Extremum> {
        self.extrema.iter().filter(|e| e.kind == ExtremumKind::Maximum)
    }

    pub fn minima(&self) -> impl Iterator<Item = &Extremum> {
        self.extrema.iter().filter(|e| e.kind == ExtremumKind::Minimum)
    }
}

/// 10⁻³ of the finite range of `ys`.
pub fn default_prominence_floor(ys: &[f64]) -> f64 {
    let (lo, hi) = ys
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi > lo {
        1e-3 * (hi - lo)
    } else {
        0.0
    }
}

/// Interior local extrema of a sampled curve whose topographic prominence
/// reaches `floor`. Non-finite samples are skipped. `xs` must increase.
pub fn find_extrema(xs: &[f64], ys: &[f64], floor: f64) -> Result<PeakList> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .unzip();
    if x.is_empty() {
        return Err(Error::param("curve", "no finite samples"));
    }
    if x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("grid", "abscissae must be strictly increasing"));
    }
    let original: Vec<usize> = xs
        .iter()
        .zip(ys)
        .enumerate()
        .filter(|(_, (a, b))| a.is_finite() && b.is_finite())
        .map(|(i, _)| i)
        .collect();

    let mut found = Vec::new();
    for kind in [ExtremumKind::Maximum, ExtremumKind::Minimum] {
        let s = if kind == ExtremumKind::Maximum { 1.0 } else { -1.0 };
        let v: Vec<f64> = y.iter().map(|t| s * t).collect();
        let n = v.len();
        let mut i = 1;
        while i + 1 < n {
            if v[i] > v[i - 1] {
                // walk across a plateau
                let mut j = i;
                while j + 1 < n && v[j + 1] == v[i] {
                    j += 1;
                }
                if j + 1 < n && v[j + 1] < v[i] {
                    let peak = (i + j) / 2;
                    let prom = prominence(&v, i, j);
                    if prom >= floor {
                        let (rx, ry) = refine(&x, &v, peak);
                        found.push(Extremum {
                            kind,
                            index: original[peak],
                            x: rx,
                            y: s * ry,
                            prominence: prom,
                        });
                    }
                }
                i = j + 1;
            } else {
                i += 1;
            }
        }
    }
    found.sort_by(|a, b| a.x.total_cmp(&b.x));

    // prominence filtering keeps kinds alternating; merge defensively anyway
    let mut extrema: Vec<Extremum> = Vec::with_capacity(found.len());
    for e in found {
        match extrema.last_mut() {
            Some(last) if last.kind == e.kind => {
                if e.prominence > last.prominence {
                    *last = e;
                }
            }
            _ => extrema.push(e),
        }
    }
    Ok(PeakList { extrema })
}

/// Height of the plateau v[i..=j] above the higher of its two bases.
fn prominence(v: &[f64], i: usize, j: usize) -> f64 {
    let top = v[i];
    let mut left = top;
    let mut k = i;
    while k > 0 {
        k -= 1;
        if v[k] > top {
            break;
        }
        left = left.min(v[k]);
    }
    let mut right = top;
    let mut k = j;
    while k + 1 < v.len() {
        k += 1;
        if v[k] > top {
            break;
        }
        right = right.min(v[k]);
    }
    top - left.max(right)
}

/// Vertex of the parabola through the three samples around `i`.
fn refine(x: &[f64], v: &[f64], i: usize) -> (f64, f64) {
    let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
    let (y0, y1, y2) = (v[i - 1], v[i], v[i + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if !(a < 0.0) {
        return (x1, y1);
    }
    let b = d01 - a * (x0 + x1);
    let xv = (-b / (2.0 * a)).clamp(x0, x2);
    let yv = y0 + d01 * (xv - x0) + a * (xv - x0) * (xv - x1);
    (xv, yv.max(y1))
}

/// Golden-section search for the extremum of `f` inside [lo, hi], stopping
/// when the bracket is narrower than `tol`. Returns the best (x, f(x)) seen;
/// NaN values never win.
pub fn refine_extremum<F>(mut f: F, lo: f64, hi: f64, kind: ExtremumKind, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) {
        return Err(Error::param("bracket", format!("empty interval [{lo}, {hi}]")));
    }
    let sign = if kind == ExtremumKind::Maximum { 1.0 } else { -1.0 };
    let mut score = |x: f64| -> Result<f64> {
        let v = f(x)?;
        Ok(if v.is_nan() { f64::NEG_INFINITY } else { sign * v })
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = score(c)?;
    let mut fd = score(d)?;
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = score(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = score(d)?;
        }
    }
    let (x, v) = if fc >= fd { (c, fc) } else { (d, fd) };
    Ok((x, sign * v))
}
