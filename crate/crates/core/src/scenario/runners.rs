use std::collections::BTreeSet;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{build_h0, LevelCut, SystemParams};
use crate::observables::{
    default_prominence_floor, find_extrema, refine_extremum, ExtremumKind, RadianceClass,
    RadiancePoint, RadianceSolver, SpectrumSolver, SteadyValue,
};
use crate::operator::eig_hermitian;

use super::cache::PointCache;
use super::table::{Cell, Table};
use super::{ConvergenceReport, RunContext, Scenario, SweepResult, SweepSpec, R_CONVERGENCE_TOL, TIMESTAMP_KEY};

/// Drive-frequency windows of the detuning report.
pub const TAU_WINDOWS: [(&str, f64, f64); 2] = [("tau1", 0.875, 0.917), ("tau2", 1.12, 1.178)];

/// Relative photon-number change allowed by the excitation-spectrum check.
const PHOTON_CONVERGENCE_TOL: f64 = 1e-4;
/// Absolute energy change allowed by the energy-spectrum check.
const ENERGY_CONVERGENCE_TOL: f64 = 1e-4;

pub fn run(spec: &SweepSpec, ctx: &RunContext) -> Result<SweepResult> {
    spec.validate()?;
    match spec.scenario {
        Scenario::EnergySpectrum => run_energy_spectrum(spec, ctx),
        Scenario::RadianceVsDrive => run_radiance_vs_drive(spec, ctx),
        Scenario::DetuningSweep => run_detuning_sweep(spec, ctx),
        Scenario::PeakMap => run_peak_map(spec, ctx),
        Scenario::ExcitationSpectrum => run_excitation_spectrum(spec, ctx),
        Scenario::ParityCompare => run_parity_compare(spec, ctx),
    }
}

/// n_max + 4 and four more retained levels.
pub fn escalated(p: &SystemParams) -> SystemParams {
    let mut hi = SystemParams {
        n_max: p.n_max + 4,
        ..p.clone()
    };
    hi.level_cut = match p.level_cut {
        LevelCut::All => LevelCut::All,
        _ => LevelCut::Levels((p.levels() + 4).min(hi.space_dim())),
    };
    hi
}

/// Steady states of one system along a drive grid, through the cache.
fn photon_curve(
    p: &SystemParams,
    grid: &[f64],
    ctx: &RunContext,
) -> Result<Vec<std::result::Result<SteadyValue, String>>> {
    let at = |w: f64| SystemParams {
        omega_d: w,
        ..p.clone()
    };
    let keys: Vec<Option<String>> = grid
        .iter()
        .map(|&w| ctx.cache.as_ref().map(|_| PointCache::key(&at(w), &ctx.floquet)))
        .collect();
    let mut out: Vec<Option<std::result::Result<SteadyValue, String>>> = keys
        .iter()
        .map(|k| {
            let (c, k) = (ctx.cache.as_ref()?, k.as_ref()?);
            c.get(k).map(Ok)
        })
        .collect();
    let misses: Vec<usize> = (0..grid.len()).filter(|&i| out[i].is_none()).collect();
    if !misses.is_empty() {
        let mut solver = SpectrumSolver::new(&at(grid[misses[0]]))?;
        solver.options = ctx.floquet;
        let solved: Vec<_> = misses
            .par_iter()
            .map(|&i| solver.steady(grid[i]).map_err(|e| e.to_string()))
            .collect();
        for (&i, value) in misses.iter().zip(solved) {
            if let (Some(cache), Some(key), Ok(v)) = (&ctx.cache, &keys[i], &value) {
                if let Err(e) = cache.put(key, v) {
                    log::warn!("cache write failed: {e}");
                }
            }
            out[i] = Some(value);
        }
    }
    Ok(out.into_iter().map(|v| v.expect("filled")).collect())
}

/// A radiance point, or the reason it could not be computed.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub point: RadiancePoint,
    pub flag: Option<String>,
}

fn combine(w: f64, a: std::result::Result<SteadyValue, String>, b: std::result::Result<SteadyValue, String>) -> CurvePoint {
    match (a, b) {
        (Ok(a), Ok(b)) => {
            let point = RadiancePoint::new(w, a.photons, b.photons, a.residual.max(b.residual));
            let flag = point
                .class
                .is_none()
                .then(|| format!("witness undefined: one-qubit photon number {:.3e}", point.n1));
            CurvePoint { point, flag }
        }
        (a, b) => {
            let msg = [a.err(), b.err()].into_iter().flatten().collect::<Vec<_>>().join("; ");
            CurvePoint {
                point: RadiancePoint {
                    omega_d: w,
                    n1: f64::NAN,
                    n2: f64::NAN,
                    r: f64::NAN,
                    class: None,
                    residual: f64::NAN,
                },
                flag: Some(msg),
            }
        }
    }
}

fn radiance_curve_split(
    p1: &SystemParams,
    p2: &SystemParams,
    grid: &[f64],
    ctx: &RunContext,
) -> Result<Vec<CurvePoint>> {
    let one = photon_curve(p1, grid, ctx)?;
    let two = photon_curve(p2, grid, ctx)?;
    Ok(grid
        .iter()
        .zip(one.into_iter().zip(two))
        .map(|(&w, (a, b))| combine(w, a, b))
        .collect())
}

/// R(ω_d) of the one- and two-qubit versions of `p`.
pub fn radiance_curve(p: &SystemParams, grid: &[f64], ctx: &RunContext) -> Result<Vec<CurvePoint>> {
    radiance_curve_split(&p.with_qubits(1), &p.with_qubits(2), grid, ctx)
}

/// Evenly spread indices into `0..len`, at most `count` of them.
fn subsample(len: usize, count: usize) -> Vec<usize> {
    if count == 0 || len == 0 {
        return Vec::new();
    }
    if count >= len {
        return (0..len).collect();
    }
    if count == 1 {
        return vec![len / 2];
    }
    let mut idx: Vec<usize> = (0..count).map(|i| i * (len - 1) / (count - 1)).collect();
    idx.dedup();
    idx
}

/// Re-solve R at a subsample of grid points with a larger truncation and
/// return (points checked, largest |ΔR|).
fn radiance_truncation_change(
    p: &SystemParams,
    curve: &[CurvePoint],
    count: usize,
    ctx: &RunContext,
) -> Result<(usize, f64)> {
    let ok: Vec<&CurvePoint> = curve.iter().filter(|c| c.flag.is_none()).collect();
    let picked: Vec<&CurvePoint> = subsample(ok.len(), count).into_iter().map(|i| ok[i]).collect();
    if picked.is_empty() {
        return Ok((0, 0.0));
    }
    let grid: Vec<f64> = picked.iter().map(|c| c.point.omega_d).collect();
    let hi = radiance_curve_split(&escalated(&p.with_qubits(1)), &escalated(&p.with_qubits(2)), &grid, ctx)?;
    let mut worst = 0.0_f64;
    for (lo, hi) in picked.iter().zip(&hi) {
        let d = (hi.point.r - lo.point.r).abs();
        worst = if d.is_nan() { f64::NAN } else { worst.max(d) };
        if worst.is_nan() {
            break;
        }
    }
    Ok((picked.len(), worst))
}

fn class_label(c: Option<RadianceClass>) -> String {
    c.map(|c| c.to_string()).unwrap_or_default()
}

fn flag_label(f: &Option<String>) -> String {
    f.clone().unwrap_or_default()
}

struct Collector {
    flagged: Vec<String>,
    max_residual: f64,
}

impl Collector {
    fn new() -> Self {
        Self {
            flagged: Vec::new(),
            max_residual: 0.0,
        }
    }

    fn note(&mut self, context: &str, c: &CurvePoint) {
        if let Some(f) = &c.flag {
            self.flagged.push(format!("{context}, omega_d = {}: {f}", c.point.omega_d));
        } else if c.point.residual > self.max_residual {
            self.max_residual = c.point.residual;
        }
    }

    fn note_value(&mut self, context: &str, w: f64, v: &std::result::Result<SteadyValue, String>) {
        match v {
            Ok(v) => self.max_residual = self.max_residual.max(v.residual),
            Err(e) => self.flagged.push(format!("{context}, omega_d = {w}: {e}")),
        }
    }
}

fn provenance(spec: &SweepSpec, ctx: &RunContext, col: &Collector, conv: Option<&ConvergenceReport>) -> Vec<(String, String)> {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let b = &spec.base;
    let mut out = vec![
        (TIMESTAMP_KEY.to_string(), stamp.to_string()),
        ("code_version".into(), format!("usc-radiance {}", env!("CARGO_PKG_VERSION"))),
        ("scenario".into(), spec.scenario.name().into()),
        (
            "base".into(),
            format!(
                "omega_c={} omega_sigma={} lambda={} theta={} Omega={} kappa={} gamma_sigma={} drop_sigma_z_coupling={}",
                b.omega_c, b.omega_sigma, b.lambda, b.theta, b.drive_amplitude, b.kappa, b.gamma_sigma, b.drop_sigma_z_coupling
            ),
        ),
        (
            "truncation".into(),
            format!(
                "n_max={} level_cut={} (1 qubit: {} levels, 2 qubits: {} levels)",
                b.n_max,
                b.level_cut,
                b.with_qubits(1).levels(),
                b.with_qubits(2).levels()
            ),
        ),
    ];
    let axis = |a: &super::Axis| format!("{} in [{}, {}], {} points", a.name, a.min, a.max, a.points);
    out.push(("axis1".into(), axis(&spec.axis1)));
    if let Some(a2) = &spec.axis2 {
        out.push(("axis2".into(), axis(a2)));
    }
    if spec.scenario == Scenario::PeakMap {
        out.push(("scan".into(), axis(&spec.scan)));
        if spec.axis1.name == "Omega" {
            out.push(("fixed_lambda".into(), format!("{}", b.lambda)));
        }
    }
    let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    out.push(("thetas".into(), list(&spec.thetas)));
    out.push(("lambdas".into(), list(&spec.lambda_values())));
    let f = &ctx.floquet;
    out.push((
        "floquet".into(),
        format!(
            "harmonics={} max_harmonics={} shift_tol={:e} tail_tol={:e} residual_tol={:e}",
            f.harmonics, f.max_harmonics, f.shift_tol, f.tail_tol, f.residual_tol
        ),
    ));
    out.push(("max_residual".into(), format!("{:e}", col.max_residual)));
    out.push(("flagged_points".into(), col.flagged.len().to_string()));
    match conv {
        Some(c) => out.push((
            "truncation_check".into(),
            format!(
                "{} max change {:e} over {} points at n_max+4, levels+4 (tolerance {:e}): {}",
                c.quantity,
                c.max_change,
                c.samples,
                c.tolerance,
                if c.passed() { "pass" } else { "FAIL" }
            ),
        )),
        None => out.push(("truncation_check".into(), "skipped".into())),
    }
    out
}

fn finish(spec: &SweepSpec, ctx: &RunContext, tables: Vec<Table>, col: Collector, conv: Option<ConvergenceReport>) -> SweepResult {
    let provenance = provenance(spec, ctx, &col, conv.as_ref());
    SweepResult {
        spec: spec.clone(),
        tables,
        provenance,
        flagged: col.flagged,
        max_residual: col.max_residual,
        convergence: conv,
    }
}

fn params_for(spec: &SweepSpec, theta: f64, lambda: f64) -> SystemParams {
    SystemParams {
        theta,
        lambda,
        ..spec.base.clone()
    }
}

fn r_report() -> ConvergenceReport {
    ConvergenceReport {
        quantity: "R".into(),
        samples: 0,
        max_change: 0.0,
        tolerance: R_CONVERGENCE_TOL,
    }
}

fn lowest_energies(p: &SystemParams, count: usize) -> Result<Vec<f64>> {
    let mut e = eig_hermitian(&build_h0(p)?)?.values;
    e.truncate(count);
    Ok(e)
}

pub fn run_energy_spectrum(spec: &SweepSpec, ctx: &RunContext) -> Result<SweepResult> {
    let mut table = Table::new("energy_spectrum", &["theta", "n_qubits", "lambda", "level", "energy"]);
    let lambdas = spec.axis1.values();
    let mut conv = ConvergenceReport {
        quantity: "energy".into(),
        samples: 0,
        max_change: 0.0,
        tolerance: ENERGY_CONVERGENCE_TOL,
    };
    for &theta in &spec.thetas {
        for nq in [1, 2] {
            let at = |lambda: f64| SystemParams {
                n_qubits: nq,
                ..params_for(spec, theta, lambda)
            };
            let energies: Vec<Vec<f64>> = lambdas
                .par_iter()
                .map(|&l| lowest_energies(&at(l), spec.levels))
                .collect::<Result<_>>()?;
            for (&lambda, levels) in lambdas.iter().zip(&energies) {
                for (k, &e) in levels.iter().enumerate() {
                    table.push(vec![theta.into(), nq.into(), lambda.into(), k.into(), e.into()]);
                }
            }
            for i in subsample(lambdas.len(), spec.convergence_points) {
                let hi = lowest_energies(&escalated(&at(lambdas[i])), spec.levels)?;
                let d = hi
                    .iter()
                    .zip(&energies[i])
                    .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
                conv.merge(1, d);
            }
        }
    }
    let conv = (spec.convergence_points > 0).then_some(conv);
    Ok(finish(spec, ctx, vec![table], Collector::new(), conv))
}

const RADIANCE_COLUMNS: [&str; 7] = ["omega_d", "n1", "n2", "R", "class", "residual", "flag"];

fn radiance_cells(c: &CurvePoint) -> Vec<Cell> {
    let p = &c.point;
    vec![
        p.omega_d.into(),
        p.n1.into(),
        p.n2.into(),
        p.r.into(),
        class_label(p.class).into(),
        p.residual.into(),
        flag_label(&c.flag).into(),
    ]
}

pub fn run_radiance_vs_drive(spec: &SweepSpec, ctx: &RunContext) -> Result<SweepResult> {
    let mut header = vec!["theta", "lambda"];
    header.extend(RADIANCE_COLUMNS);
    let mut table = Table::new("radiance", &header);
    let grid = spec.axis1.values();
    let mut col = Collector::new();
    let mut conv = r_report();
    for &theta in &spec.thetas {
        for lambda in spec.lambda_values() {
            let p = params_for(spec, theta, lambda);
            let curve = radiance_curve(&p, &grid, ctx)?;
            for c in &curve {
                col.note(&format!("theta = {theta}, lambda = {lambda}"), c);
                let mut row: Vec<Cell> = vec![theta.into(), lambda.into()];
                row.extend(radiance_cells(c));
                table.push(row);
            }
            let (n, d) = radiance_truncation_change(&p, &curve, spec.convergence_points, ctx)?;
            conv.merge(n, d);
        }
    }
    let conv = (spec.convergence_points > 0).then_some(conv);
    Ok(finish(spec, ctx, vec![table], col, conv))
}

pub fn run_detuning_sweep(spec: &SweepSpec, ctx: &RunContext) -> Result<SweepResult> {
    let mut header = vec!["omega_c", "detuning"];
    header.extend(RADIANCE_COLUMNS);
    let mut table = Table::new("detuning", &header);
    let mut windows = Table::new("detuning_windows", &["omega_c", "detuning", "window", "lo", "hi", "points", "classes"]);
    let grid = spec.axis1.values();
    let omega_cs = spec.axis2.as_ref().ok_or_else(|| Error::config("axis2", "missing"))?.values();
    let mut col = Collector::new();
    let mut conv = r_report();
    for wc in omega_cs {
        let p = SystemParams {
            omega_c: wc,
            ..spec.base.clone()
        };
        let detuning = wc - p.omega_sigma;
        let curve = radiance_curve(&p, &grid, ctx)?;
        for c in &curve {
            col.note(&format!("omega_c = {wc}"), c);
            let mut row: Vec<Cell> = vec![wc.into(), detuning.into()];
            row.extend(radiance_cells(c));
            table.push(row);
        }
        for (name, lo, hi) in TAU_WINDOWS {
            let inside: Vec<&CurvePoint> = curve
                .iter()
                .filter(|c| c.point.omega_d > lo && c.point.omega_d < hi)
                .collect();
            let classes: BTreeSet<String> = inside
                .iter()
                .filter_map(|c| c.point.class)
                .map(|c| format!("{}:{}", c as u8, c))
                .collect();
            let labels: Vec<&str> = classes.iter().map(|s| s.split_once(':').unwrap().1).collect();
            windows.push(vec![
                wc.into(),
                detuning.into(),
                name.into(),
                lo.into(),
                hi.into(),
                inside.len().into(),
                labels.join(";").into(),
            ]);
        }
        let (n, d) = radiance_truncation_change(&p, &curve, spec.convergence_points, ctx)?;
        conv.merge(n, d);
    }
    let conv = (spec.convergence_points > 0).then_some(conv);
    Ok(finish(spec, ctx, vec![table, windows], col, conv))
}

/// Left and right hyperradiance peaks and the overall maximum of R(ω_d).
#[derive(Clone, Debug, PartialEq)]
pub struct PeakSummary {
    /// (ω_d, R) of the prominent maximum nearest the two-qubit E₁ − E₀.
    pub lp: Option<(f64, f64)>,
    /// (ω_d, R) of the prominent maximum nearest the two-qubit E₃ − E₀.
    pub rp: Option<(f64, f64)>,
    /// (ω_d, R) of the largest R found.
    pub max: (f64, f64),
    pub residual: f64,
    pub flags: Vec<String>,
}

/// Scan R on `grid`, then refine the relevant maxima by golden-section search
/// within one grid step on either side.
pub fn peak_summary(p: &SystemParams, grid: &[f64], ctx: &RunContext) -> Result<PeakSummary> {
    let curve = radiance_curve(p, grid, ctx)?;
    let flags: Vec<String> = curve.iter().filter_map(|c| c.flag.clone()).collect();
    let residual = curve
        .iter()
        .filter(|c| c.flag.is_none())
        .fold(0.0_f64, |acc, c| acc.max(c.point.residual));
    let rs: Vec<f64> = curve.iter().map(|c| c.point.r).collect();
    let peaks = find_extrema(grid, &rs, default_prominence_floor(&rs))?;

    let e = eig_hermitian(&build_h0(&p.with_qubits(2))?)?.values;
    let (g1, g3) = (e[1] - e[0], e[3] - e[0]);
    let nearest = |target: f64| {
        peaks
            .maxima()
            .min_by(|a, b| (a.x - target).abs().total_cmp(&(b.x - target).abs()))
            .map(|m| m.index)
    };

    let mut solver = RadianceSolver::new(&SystemParams {
        omega_d: grid[0],
        ..p.clone()
    })?;
    solver.one.options = ctx.floquet;
    solver.two.options = ctx.floquet;
    let step = grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let refine = |i: usize| -> Result<(f64, f64)> {
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 1).min(grid.len() - 1)];
        let (x, v) = refine_extremum(|w| solver.witness(w), lo, hi, ExtremumKind::Maximum, step * 1e-3)?;
        // never report less than the sampled value
        Ok(if v >= rs[i] { (x, v) } else { (grid[i], rs[i]) })
    };

    let lp_i = nearest(g1);
    let rp_i = nearest(g3).filter(|&i| Some(i) != lp_i || (grid[i] - g3).abs() < (grid[i] - g1).abs());
    let lp_i = lp_i.filter(|&i| Some(i) != rp_i);
    let lp = lp_i.map(refine).transpose()?;
    let rp = rp_i.map(refine).transpose()?;

    let grid_best = rs
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::StateCheck("no finite R on the scan grid".into()))?;
    let mut max = (grid[grid_best], rs[grid_best]);
    if Some(grid_best) != lp_i && Some(grid_best) != rp_i && grid_best > 0 && grid_best + 1 < grid.len() {
        max = refine(grid_best)?;
    }
    for cand in [lp, rp].into_iter().flatten() {
        if cand.1 > max.1 {
            max = cand;
        }
    }
    Ok(PeakSummary {
        lp,
        rp,
        max,
        residual,
        flags,
    })
}

pub fn run_peak_map(spec: &SweepSpec, ctx: &RunContext) -> Result<SweepResult> {
    let mut table = Table::new(
        "peak_map",
        &["theta", "lambda", "Omega", "lp", "rp", "r_max", "omega_at_max", "omega_lp", "omega_rp", "residual", "flag"],
    );
    let scan = spec.scan.values();
    let mut points: Vec<(f64, f64)> = Vec::new();
    if spec.axis1.name == "Omega" {
        points.extend(spec.axis1.values().into_iter().map(|o| (spec.base.lambda, o)));
    } else {
        let omegas = spec
            .axis2
            .as_ref()
            .map(|a| a.values())
            .unwrap_or_else(|| vec![spec.base.drive_amplitude]);
        for l in spec.axis1.values() {
            for &o in &omegas {
                points.push((l, o));
            }
        }
    }
    let mut col = Collector::new();
    let mut conv = r_report();
    let check_at: BTreeSet<usize> = subsample(points.len(), spec.convergence_points).into_iter().collect();
    for &theta in &spec.thetas {
        for (i, &(lambda, omega)) in points.iter().enumerate() {
            let p = SystemParams {
                drive_amplitude: omega,
                ..params_for(spec, theta, lambda)
            };
            let s = peak_summary(&p, &scan, ctx)?;
            let context = format!("theta = {theta}, lambda = {lambda}, Omega = {omega}");
            for f in &s.flags {
                col.flagged.push(format!("{context}: {f}"));
            }
            col.max_residual = col.max_residual.max(s.residual);
            let pick = |v: Option<(f64, f64)>, k: usize| v.map(|t| if k == 0 { t.0 } else { t.1 }).unwrap_or(f64::NAN);
            let mut flag = s.flags.join("; ");
            if s.lp.is_none() || s.rp.is_none() {
                if !flag.is_empty() {
                    flag.push_str("; ");
                }
                flag.push_str("peak not resolved on the scan grid");
            }
            table.push(vec![
                theta.into(),
                lambda.into(),
                omega.into(),
                pick(s.lp, 1).into(),
                pick(s.rp, 1).into(),
                s.max.1.into(),
                s.max.0.into(),
                pick(s.lp, 0).into(),
                pick(s.rp, 0).into(),
                s.residual.into(),
                flag.into(),
            ]);
            if check_at.contains(&i) && spec.convergence_points > 0 {
                let targets: Vec<(f64, f64)> = [s.lp, s.rp].into_iter().flatten().collect();
                let grid: Vec<f64> = targets.iter().map(|t| t.0).collect();
                let mut sorted: Vec<(f64, f64)> = targets.clone();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                let grid_sorted: Vec<f64> = sorted.iter().map(|t| t.0).collect();
                if !grid.is_empty() {
                    let hi = radiance_curve_split(
                        &escalated(&p.with_qubits(1)),
                        &escalated(&p.with_qubits(2)),
                        &grid_sorted,
                        ctx,
                    )?;
                    let d = sorted
                        .iter()
                        .zip(&hi)
                        .fold(0.0_f64, |acc, (lo, h)| acc.max((h.point.r - lo.1).abs()));
                    conv.merge(sorted.len(), d);
                }
            }
        }
    }
    let conv = (spec.convergence_points > 0).then_some(conv);
    Ok(finish(spec, ctx, vec![table], col, conv))
}

pub fn run_excitation_spectrum(spec: &SweepSpec, ctx: &RunContext) -> Result<SweepResult> {
    let mut table = Table::new(
        "excitation",
        &["theta", "n_qubits", "lambda", "omega_d", "flux", "residual", "flag"],
    );
    let mut peaks_table = Table::new(
        "excitation_peaks",
        &["theta", "n_qubits", "lambda", "peak_omega", "peak_value", "prominence"],
    );
    let grid = spec.axis1.values();
    let mut col = Collector::new();
    let mut conv = ConvergenceReport {
        quantity: "relative photon number".into(),
        samples: 0,
        max_change: 0.0,
        tolerance: PHOTON_CONVERGENCE_TOL,
    };
    for &theta in &spec.thetas {
        for nq in [1, 2] {
            for lambda in spec.lambda_values() {
                let p = SystemParams {
                    n_qubits: nq,
                    ..params_for(spec, theta, lambda)
                };
                let values = photon_curve(&p, &grid, ctx)?;
                let context = format!("theta = {theta}, n_qubits = {nq}, lambda = {lambda}");
                let mut flux = Vec::with_capacity(grid.len());
                for (&w, v) in grid.iter().zip(&values) {
                    col.note_value(&context, w, v);
                    let (f, r, flag) = match v {
                        Ok(v) => (p.kappa * v.photons, v.residual, String::new()),
                        Err(e) => (f64::NAN, f64::NAN, e.clone()),
                    };
                    flux.push(f);
                    table.push(vec![theta.into(), nq.into(), lambda.into(), w.into(), f.into(), r.into(), flag.into()]);
                }
                if flux.iter().any(|f| f.is_finite()) {
                    let found = find_extrema(&grid, &flux, default_prominence_floor(&flux))?;
                    for m in found.maxima() {
                        peaks_table.push(vec![
                            theta.into(),
                            nq.into(),
                            lambda.into(),
                            m.x.into(),
                            m.y.into(),
                            m.prominence.into(),
                        ]);
                    }
                }
                let ok: Vec<usize> = (0..grid.len()).filter(|&i| values[i].is_ok()).collect();
                let picked: Vec<usize> = subsample(ok.len(), spec.convergence_points).into_iter().map(|i| ok[i]).collect();
                if !picked.is_empty() {
                    let sub: Vec<f64> = picked.iter().map(|&i| grid[i]).collect();
                    let hi = photon_curve(&escalated(&p), &sub, ctx)?;
                    let mut worst = 0.0_f64;
                    for (&i, h) in picked.iter().zip(&hi) {
                        let lo = values[i].as_ref().expect("ok").photons;
                        let d = match h {
                            Ok(h) => (h.photons - lo).abs() / lo.abs().max(f64::MIN_POSITIVE),
                            Err(_) => f64::NAN,
                        };
                        worst = if d.is_nan() || worst.is_nan() { f64::NAN } else { worst.max(d) };
                    }
                    conv.merge(picked.len(), worst);
                }
            }
        }
    }
    let conv = (spec.convergence_points > 0).then_some(conv);
    Ok(finish(spec, ctx, vec![table, peaks_table], col, conv))
}

pub fn run_parity_compare(spec: &SweepSpec, ctx: &RunContext) -> Result<SweepResult> {
    let mut table = Table::new(
        "parity",
        &[
            "theta", "lambda", "omega_d", "r_full", "r_dropped", "n1_full", "n2_full", "n1_dropped", "n2_dropped", "residual", "flag",
        ],
    );
    let mut summary = Table::new(
        "parity_summary",
        &["theta", "lambda", "max_abs_deviation", "max_abs_r_full", "scaled_deviation", "max_pointwise_relative"],
    );
    let grid = spec.axis1.values();
    let mut col = Collector::new();
    let mut conv = r_report();
    for &theta in &spec.thetas {
        for lambda in spec.lambda_values() {
            let full = params_for(spec, theta, lambda);
            let dropped = SystemParams {
                drop_sigma_z_coupling: true,
                ..full.clone()
            };
            let a = radiance_curve(&full, &grid, ctx)?;
            let b = radiance_curve(&dropped, &grid, ctx)?;
            let context = format!("theta = {theta}, lambda = {lambda}");
            let mut dev = 0.0_f64;
            let mut scale = 0.0_f64;
            let mut rel = 0.0_f64;
            for (x, y) in a.iter().zip(&b) {
                col.note(&format!("{context}, full model"), x);
                col.note(&format!("{context}, sigma_z term dropped"), y);
                let flag = [x.flag.clone(), y.flag.clone()].into_iter().flatten().collect::<Vec<_>>().join("; ");
                let (p, q) = (&x.point, &y.point);
                table.push(vec![
                    theta.into(),
                    lambda.into(),
                    p.omega_d.into(),
                    p.r.into(),
                    q.r.into(),
                    p.n1.into(),
                    p.n2.into(),
                    q.n1.into(),
                    q.n2.into(),
                    p.residual.max(q.residual).into(),
                    flag.into(),
                ]);
                if p.r.is_finite() && q.r.is_finite() {
                    let d = (p.r - q.r).abs();
                    dev = dev.max(d);
                    scale = scale.max(p.r.abs());
                    if p.r != 0.0 {
                        rel = rel.max(d / p.r.abs());
                    }
                }
            }
            let scaled = if scale > 0.0 { dev / scale } else { f64::NAN };
            summary.push(vec![theta.into(), lambda.into(), dev.into(), scale.into(), scaled.into(), rel.into()]);
            let (n, d) = radiance_truncation_change(&full, &a, spec.convergence_points, ctx)?;
            conv.merge(n, d);
        }
    }
    let conv = (spec.convergence_points > 0).then_some(conv);
    Ok(finish(spec, ctx, vec![table, summary], col, conv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsample_spreads_indices() {
        assert_eq!(subsample(701, 5), vec![0, 175, 350, 525, 700]);
        assert_eq!(subsample(3, 5), vec![0, 1, 2]);
        assert!(subsample(10, 0).is_empty());
        assert_eq!(subsample(10, 1), vec![5]);
    }

    #[test]
    fn escalation_grows_both_truncations() {
        let p = SystemParams::default();
        let hi = escalated(&p);
        assert_eq!(hi.n_max, p.n_max + 4);
        assert_eq!(hi.levels(), p.levels() + 4);
        let one = escalated(&p.with_qubits(1));
        assert_eq!(one.levels(), 16);
    }
}
