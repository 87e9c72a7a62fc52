use num_complex::Complex64;
use proptest::prelude::*;

use usc_radiance::master_equation::{build_liouvillian, dissipator_matrix};
use usc_radiance::model::{build_h0, parity_defect};
use usc_radiance::observables::{classify, find_extrema, radiance_witness, RadianceClass, CLASS_TOL};
use usc_radiance::operator::{eig_hermitian_matrix, hermitian_defect, max_norm};
use usc_radiance::scenario::config::parse_number;
use usc_radiance::scenario::table::format_float;
use usc_radiance::{diagonalize, CMatrix, LevelCut, SystemParams};

fn complex_matrix(n: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n)
        .prop_map(move |v| CMatrix::from_iterator(n, n, v.into_iter().map(|(a, b)| Complex64::new(a, b))))
}

fn small_system() -> impl Strategy<Value = SystemParams> {
    (1usize..=2, 0.0..0.3f64, 0.05..std::f64::consts::FRAC_PI_2, 0.8..1.2f64, 0.0..0.05f64, 0.0..0.05f64).prop_map(
        |(nq, lambda, theta, wc, kappa, gamma)| SystemParams {
            n_qubits: nq,
            lambda,
            theta,
            omega_c: wc,
            kappa,
            gamma_sigma: gamma,
            n_max: 5,
            level_cut: LevelCut::All,
            ..SystemParams::default()
        },
    )
}

/// Trace functional of a column-stacked M×M matrix applied to L: row vector
/// Σᵢ L[(i + M i), :].
fn trace_row(l: &CMatrix, m: usize) -> f64 {
    let mut worst = 0.0_f64;
    for col in 0..l.ncols() {
        let s: Complex64 = (0..m).map(|i| l[(i + m * i, col)]).sum();
        worst = worst.max(s.norm());
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn classification_is_total_and_ordered(r in -1e3..1e3f64) {
        let c = classify(r);
        let expect = if r.abs() <= CLASS_TOL {
            RadianceClass::Uncorrelated
        } else if r < 0.0 {
            RadianceClass::Subradiance
        } else if r <= 1.0 {
            RadianceClass::Superradiance
        } else {
            RadianceClass::Hyperradiance
        };
        prop_assert_eq!(c, expect);
    }

    #[test]
    fn witness_is_scale_free(n1 in 1e-10..1.0f64, ratio in 0.0..10.0f64, scale in 1e-3..1e3f64) {
        let n2 = ratio * n1;
        let r = radiance_witness(n2, n1).unwrap();
        prop_assert!((r - (ratio / 2.0 - 1.0)).abs() <= 1e-12 * (1.0 + r.abs()));
        let rs = radiance_witness(scale * n2, scale * n1).unwrap();
        prop_assert!((r - rs).abs() <= 1e-12 * (1.0 + r.abs()));
        prop_assert!(r >= -1.0);
    }

    #[test]
    fn dissipator_preserves_trace(o in complex_matrix(4)) {
        prop_assert!(trace_row(&dissipator_matrix(&o), 4) < 1e-12);
    }

    #[test]
    fn liouvillian_preserves_trace(p in small_system()) {
        let basis = diagonalize(&p).unwrap();
        let l = build_liouvillian(&basis, &p).unwrap();
        prop_assert!(trace_row(&l.l0, l.levels) < 1e-12);
        prop_assert!(trace_row(&l.lv, l.levels) < 1e-12);
    }

    #[test]
    fn hamiltonian_is_hermitian_and_parity_conserved_at_right_angle(p in small_system()) {
        prop_assert!(build_h0(&p).unwrap().hermitian_defect() < 1e-14);
        let right = SystemParams { theta: std::f64::consts::FRAC_PI_2, ..p };
        prop_assert!(parity_defect(&right).unwrap() < 1e-14);
    }

    #[test]
    fn ground_state_is_dark(p in small_system()) {
        let basis = diagonalize(&p).unwrap();
        let col = |m: &CMatrix| m.column(0).iter().fold(0.0_f64, |a, z| a.max(z.norm()));
        prop_assert_eq!(col(&basis.x_plus), 0.0);
        for d in &basis.d_plus {
            prop_assert_eq!(col(d), 0.0);
        }
    }

    #[test]
    fn eigendecomposition_reconstructs(a in complex_matrix(6)) {
        let h = (&a + a.adjoint()).scale(0.5);
        let eig = eig_hermitian_matrix(&h).unwrap();
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(max_norm(&(eig.reconstruct() - &h)) < 1e-12);
        let u = &eig.vectors;
        prop_assert!(max_norm(&(u.adjoint() * u - CMatrix::identity(6, 6))) < 1e-12);
        prop_assert!(hermitian_defect(&h) == 0.0);
    }

    #[test]
    fn floats_survive_csv(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn pi_fractions_parse(num in 1i32..8, den in 1i32..12) {
        let text = format!("{num}*pi/{den}");
        let v = parse_number(&text).unwrap();
        prop_assert!((v - num as f64 * std::f64::consts::PI / den as f64).abs() < 1e-15);
    }

    #[test]
    fn single_bump_has_one_maximum(centre in 0.3..0.7f64, width in 0.02..0.1f64) {
        let xs: Vec<f64> = (0..201).map(|i| i as f64 / 200.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 / (1.0 + ((x - centre) / width).powi(2))).collect();
        let found = find_extrema(&xs, &ys, 1e-3).unwrap();
        let maxima: Vec<_> = found.maxima().collect();
        prop_assert_eq!(maxima.len(), 1);
        prop_assert!((maxima[0].x - centre).abs() < 0.005 / 10.0 + 1e-3 * width);
        prop_assert_eq!(found.minima().count(), 0);
    }
}

#[test]
fn classification_boundaries() {
    assert_eq!(classify(CLASS_TOL), RadianceClass::Uncorrelated);
    assert_eq!(classify(-CLASS_TOL), RadianceClass::Uncorrelated);
    assert_eq!(classify(-CLASS_TOL * 1.0001), RadianceClass::Subradiance);
    assert_eq!(classify(1.0), RadianceClass::Superradiance);
    assert_eq!(classify(1.0 + f64::EPSILON), RadianceClass::Hyperradiance);
    assert_eq!(classify(-1.0), RadianceClass::Subradiance);
    assert!(radiance_witness(1.0, 0.0).is_err());
    assert!(radiance_witness(1.0, 1e-15).is_err());
    assert!(radiance_witness(1.0, f64::NAN).is_err());
}
