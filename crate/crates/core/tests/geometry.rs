use std::f64::consts::PI;

use wegnerflow::expm::expm_antihermitian;
use wegnerflow::geometry::{
    arc_length, case_classify, christoffel, fs_metric, generator_consistency,
    generator_relation_residual, geodesic_residual, sandwiched_ode_residual, variational_gradient,
    xi_residual, CaseLabel, CoordinateTrajectory, GeodesicOptions, ParametrizedFamily,
    VariationalOptions,
};
use wegnerflow::models::{
    build_gho, build_jc, build_spin, coordinate_projection, displacement_family, jc_family,
    spin_family, squeeze_family, GhoSpec, JcSpec, ModelFamily, SpinSpec,
};
use wegnerflow::operator::{band_split, CMatrix, CVector};
use wegnerflow::{
    AntiHermitianOperator, FlowConfig, FlowTrajectory, GeneratorChoice, HermitianOperator,
    Sampling, C64,
};

fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect()
}

fn curve(mf: &ModelFamily, l: &[f64], f: impl Fn(f64) -> Vec<f64>) -> CoordinateTrajectory {
    let alpha = l.iter().map(|&t| f(t)).collect();
    CoordinateTrajectory::from_curve(mf.family.coord_names().to_vec(), l.to_vec(), alpha).unwrap()
}

fn flow(h: &HermitianOperator, dl: f64, l_max: f64) -> FlowTrajectory {
    let cfg = FlowConfig {
        l_max,
        stop_offdiag: 1e-24,
        sampling: Sampling::Uniform { dl },
        track_unitary: true,
        ..Default::default()
    };
    wegnerflow::flow::integrate_flow(h, GeneratorChoice::Wegner, &cfg).unwrap()
}

fn spin_half(chi: f64) -> (ModelFamily, FlowTrajectory) {
    let h = build_spin(&SpinSpec {
        s: 0.5,
        b_field: [chi.sin(), 0.0, chi.cos()],
    })
    .unwrap();
    (spin_family(0.5, 0.5).unwrap(), flow(&h, 1e-3, 8.0))
}

fn squeeze(n: usize, n_max: usize) -> (ModelFamily, FlowTrajectory) {
    let h = build_gho(&GhoSpec {
        omega: 1.0,
        lambda: C64::new(0.2, 0.0),
        mu: C64::new(0.0, 0.0),
        nu: 0.0,
        n_max,
    })
    .unwrap();
    (squeeze_family(n, n_max).unwrap(), flow(&h, 0.002, 2.0))
}

#[test]
fn displacement_metric_is_half_identity() {
    let mf = displacement_family(30).unwrap();
    for alpha in [[0.0, 0.0], [0.4, -0.3], [-0.2, 0.6]] {
        let g = fs_metric(&mf.family, &alpha).unwrap().g;
        assert!(
            (g[(0, 0)] - 0.5).abs() < 1e-6 && (g[(1, 1)] - 0.5).abs() < 1e-6,
            "{g}"
        );
        assert!(g[(0, 1)].abs() < 1e-6);
    }
}

#[test]
fn squeeze_metric_at_r_point_three() {
    let mf = squeeze_family(0, 60).unwrap();
    let g = fs_metric(&mf.family, &[0.3, 0.7]).unwrap().g;
    assert!((g[(0, 0)] - 0.5).abs() < 1e-6, "{g}");
    assert!(
        (g[(1, 1)] - 0.5 * 0.6f64.sinh().powi(2)).abs() < 1e-6,
        "{g}"
    );
    assert!(g[(0, 1)].abs() < 1e-6);
}

#[test]
fn spin_half_metric_is_quarter_sphere() {
    let mf = spin_family(0.5, 0.5).unwrap();
    for theta in [0.3, 1.0, 2.2] {
        let g = fs_metric(&mf.family, &[theta, 0.9]).unwrap().g;
        assert!((g[(0, 0)] - 0.25).abs() < 1e-6, "{g}");
        assert!((g[(1, 1)] - 0.25 * theta.sin().powi(2)).abs() < 1e-6, "{g}");
    }
}

#[test]
fn euclidean_christoffel_vanishes() {
    let mf = displacement_family(30).unwrap();
    let c = christoffel(&mf.family, &[0.2, -0.1]).unwrap();
    let worst = c.second.iter().map(|m| m.abs().max()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn sphere_christoffel() {
    let mf = spin_family(0.5, 0.5).unwrap();
    let theta = 0.8;
    let c = christoffel(&mf.family, &[theta, 0.4]).unwrap();
    assert!((c.second[0][(1, 1)] + theta.sin() * theta.cos()).abs() < 1e-5);
    assert!((c.second[1][(0, 1)] - 1.0 / theta.tan()).abs() < 1e-5);
    assert!((c.second[1][(1, 0)] - 1.0 / theta.tan()).abs() < 1e-5);
    assert!(c.second[0][(0, 0)].abs() < 1e-6);
}

#[test]
fn lobachevsky_christoffel() {
    let mf = squeeze_family(0, 60).unwrap();
    let r = 0.25;
    let c = christoffel(&mf.family, &[r, 0.3]).unwrap();
    let expected = -2.0 * (2.0 * r).sinh() * (2.0 * r).cosh();
    assert!(
        (c.second[0][(1, 1)] - expected).abs() < 1e-5,
        "{} vs {expected}",
        c.second[0][(1, 1)]
    );
}

#[test]
fn straight_line_is_euclidean_geodesic() {
    let mf = displacement_family(30).unwrap();
    let l = grid(0.0, 1.0, 200);
    let traj = curve(&mf, &l, |t| vec![-0.3 + 0.5 * t, 0.2 - 0.3 * t]);
    let r = geodesic_residual(&traj, &mf.family, &GeodesicOptions::default()).unwrap();
    assert!(r.max_abs() < 1e-6, "{}", r.max_abs());
    let v = variational_gradient(&traj, &mf.family, &VariationalOptions::default()).unwrap();
    assert!(v.max_abs() < 1e-6, "{}", v.max_abs());
}

#[test]
fn meridian_is_sphere_geodesic() {
    let mf = spin_family(0.5, 0.5).unwrap();
    let l = grid(0.0, 2.5, 250);
    let traj = curve(&mf, &l, |t| vec![0.2 + t, 0.3]);
    let r = geodesic_residual(&traj, &mf.family, &GeodesicOptions::default()).unwrap();
    assert!(r.index.len() >= 200);
    assert!(r.max_abs() < 1e-4, "{}", r.max_abs());
}

#[test]
fn latitude_circle_is_not_a_geodesic() {
    let mf = spin_family(0.5, 0.5).unwrap();
    let theta = PI / 4.0;
    let l = grid(0.0, 2.0, 400);
    let traj = curve(&mf, &l, |t| vec![theta, t]);
    let r = geodesic_residual(&traj, &mf.family, &GeodesicOptions::default()).unwrap();
    // phi' = 2 / sin(theta) with respect to arc length
    let expected = theta.sin() * theta.cos() * (2.0 / theta.sin()).powi(2);
    for res in &r.residual {
        assert!((res[0].abs() - expected).abs() < 1e-3 * expected, "{res:?}");
        assert!(res[1].abs() < 1e-6);
    }
    let v = variational_gradient(&traj, &mf.family, &VariationalOptions::default()).unwrap();
    assert!(v.max_abs() > 1e-2);
    // the length grows when the nodes move toward the equator
    assert!(
        v.gradient.iter().all(|g| g[0] > 1e-2),
        "{:?}",
        &v.gradient[..3]
    );
}

#[test]
fn arc_lengths() {
    let disp = displacement_family(30).unwrap();
    let traj = curve(&disp, &grid(0.0, 1.0, 50), |t| vec![t, 0.0]);
    let a = arc_length(&traj, &disp.family).unwrap();
    assert!((a.total - 0.5f64.sqrt()).abs() < 1e-6, "{}", a.total);

    let sphere = spin_family(0.5, 0.5).unwrap();
    let theta_f = 1.3;
    let traj = curve(&sphere, &grid(0.0, theta_f, 400), |t| vec![t, 0.0]);
    let a = arc_length(&traj, &sphere.family).unwrap();
    assert!((a.total - theta_f / 2.0).abs() < 1e-6, "{}", a.total);

    // the same meridian, reparametrized by l^2
    let l = grid(0.0, 1.0, 2000);
    let lin = curve(&sphere, &l, |t| vec![0.1 + 1.2 * t, 0.5 * t]);
    let sq = curve(&sphere, &l, |t| vec![0.1 + 1.2 * t * t, 0.5 * t * t]);
    let (a, b) = (
        arc_length(&lin, &sphere.family).unwrap(),
        arc_length(&sq, &sphere.family).unwrap(),
    );
    assert!(
        (a.total - b.total).abs() < 1e-6,
        "{} vs {}",
        a.total,
        b.total
    );
}

#[test]
fn spin_flow_identities() {
    let (mf, traj) = spin_half(1.0);
    let p = coordinate_projection(&traj, &mf).unwrap();
    assert!(p.max_residual() < 1e-8);
    let x = xi_residual(&mf.family, &p.traj, &traj, mf.base_index).unwrap();
    assert!(x.max_relative() < 1e-5, "{}", x.max_relative());
    let (_, mismatch) = generator_consistency(&mf.family, &p.traj, &traj, None).unwrap();
    let worst = mismatch.iter().fold(0.0f64, |a, &b| a.max(b));
    assert!(worst < 1e-6, "{worst}");
    let v = variational_gradient(&p.traj, &mf.family, &VariationalOptions::default()).unwrap();
    assert!(v.max_abs() < 5e-4, "{}", v.max_abs());
}

#[test]
fn spin_projection_is_a_meridian() {
    let chi = 1.1;
    let (mf, traj) = spin_half(chi);
    let p = coordinate_projection(&traj, &mf).unwrap();
    let theta = p.traj.component(0);
    let phi = p.traj.component(1);
    assert!(theta.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(
        (theta.last().unwrap() - chi).abs() < 1e-3,
        "{}",
        theta.last().unwrap()
    );
    for (&t, &f) in theta.iter().zip(&phi).skip(1) {
        if t > 1e-3 {
            assert!(
                (f.rem_euclid(PI)).min(PI - f.rem_euclid(PI)) < 1e-6,
                "phi = {f}"
            );
        }
    }
}

#[test]
fn squeeze_flow_identities() {
    let (mf, traj) = squeeze(0, 30);
    let p = coordinate_projection(&traj, &mf).unwrap();
    let phi: Vec<f64> = p.traj.component(1).into_iter().skip(5).collect();
    assert!(
        phi.iter().all(|f| (f - phi[0]).abs() < 1e-8),
        "phi not constant"
    );
    let x = xi_residual(&mf.family, &p.traj, &traj, mf.base_index).unwrap();
    assert!(x.max_relative() < 1e-5, "{}", x.max_relative());
    let (_, mismatch) =
        generator_consistency(&mf.family, &p.traj, &traj, Some(mf.base_index)).unwrap();
    let worst = mismatch.iter().fold(0.0f64, |a, &b| a.max(b));
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn detuned_jc_sector_identities() {
    let spec = JcSpec {
        omega0: 1.5,
        omega: 1.0,
        kappa: 0.5,
        n_max: 4,
    };
    let traj = flow(&build_jc(&spec).unwrap(), 0.01, 10.0);
    let mf = jc_family(4, 0).unwrap();
    let p = coordinate_projection(&traj, &mf).unwrap();
    let x = xi_residual(&mf.family, &p.traj, &traj, mf.base_index).unwrap();
    assert!(x.max_relative() < 1e-5, "{}", x.max_relative());
}

#[test]
fn resonant_jc_sector_does_not_move() {
    let spec = JcSpec {
        omega0: 1.0,
        omega: 1.0,
        kappa: 0.5,
        n_max: 4,
    };
    let traj = flow(&build_jc(&spec).unwrap(), 0.01, 10.0);
    assert_eq!(traj.stop_reason, wegnerflow::StopReason::Stalled);
    assert_eq!(traj.samples.len(), 1);
}

#[test]
fn generator_relation_on_spin_curve() {
    let mf = spin_family(0.5, 0.5).unwrap();
    let l = grid(0.0, 1.0, 200);
    let traj = curve(&mf, &l, |t| {
        vec![0.4 + 0.8 * t + 0.2 * t * t, 0.3 * (2.0 * t).sin()]
    });
    let r = generator_relation_residual(&mf.family, &traj, 1e-4, 5).unwrap();
    assert!(r.max_abs() < 1e-4, "{}", r.max_abs());
}

#[test]
fn generator_relation_on_abelian_family() {
    let k = AntiHermitianOperator::new(
        CMatrix::from_row_slice(
            3,
            3,
            &[
                C64::new(0.0, 0.3),
                C64::new(0.5, 0.2),
                C64::new(0.0, 0.0),
                C64::new(-0.5, 0.2),
                C64::new(0.0, -0.1),
                C64::new(0.1, 0.0),
                C64::new(0.0, 0.0),
                C64::new(-0.1, 0.0),
                C64::new(0.0, 0.4),
            ],
        ),
        1e-14,
    )
    .unwrap();
    let mut base = CVector::zeros(3);
    base[0] = C64::new(1.0, 0.0);
    let km = k.matrix().clone();
    let fam = ParametrizedFamily::new("abelian", &["t"], base, move |a: &[f64]| {
        expm_antihermitian(&AntiHermitianOperator::new(&km * C64::new(a[0], 0.0), 1e-12).unwrap())
            .unwrap()
    })
    .unwrap();
    let l = grid(0.0, 1.0, 100);
    let alpha = l.iter().map(|&t| vec![t + 0.5 * t * t]).collect();
    let traj = CoordinateTrajectory::from_curve(vec!["t".into()], l, alpha).unwrap();
    let r = generator_relation_residual(&fam, &traj, 1e-4, 1).unwrap();
    assert!(r.max_abs() < 1e-6, "{}", r.max_abs());
}

#[test]
fn case_labels() {
    let h = build_gho(&GhoSpec {
        omega: 1.0,
        lambda: C64::new(0.2, 0.0),
        mu: C64::new(0.0, 0.0),
        nu: 0.0,
        n_max: 20,
    })
    .unwrap();
    let bd = band_split(&h);
    for n in 2..18 {
        let v = case_classify(&bd, n, 2).unwrap();
        assert_eq!(v.label, CaseLabel::C);
        assert_eq!(v.gap, Some(0.0));
    }
    let shifted = HermitianOperator::from_real_diagonal(&vec![0.3; 21]);
    let h =
        wegnerflow::operator::validate_hermitian(&(h.matrix() + shifted.matrix()), 1e-14).unwrap();
    let bd = band_split(&h);
    for n in 2..18 {
        let v = case_classify(&bd, n, 2).unwrap();
        assert_eq!(v.label, CaseLabel::C);
        assert!(v.gap.unwrap() < 1e-14);
    }
    let jc = JcSpec {
        omega0: 1.0,
        omega: 1.0,
        kappa: 0.5,
        n_max: 4,
    };
    let bd = band_split(&build_jc(&jc).unwrap());
    for n in 0..4 {
        let e = wegnerflow::models::jc_index(4, true, n);
        assert_eq!(case_classify(&bd, e, 4).unwrap().label, CaseLabel::B);
    }
    assert_eq!(
        case_classify(&bd, wegnerflow::models::jc_index(4, false, 0), 4)
            .unwrap()
            .label,
        CaseLabel::A
    );
}

#[test]
fn sandwiched_squeeze_and_spin() {
    // higher rows feel the truncation edge within this l range
    let (_, sq) = squeeze(0, 30);
    let s = sandwiched_ode_residual(&sq, 0, 2).unwrap();
    assert!(s.max_residual() < 1e-6, "{}", s.max_residual());
    assert!(s.max_phase_drift() < 1e-8);
    let h = build_spin(&SpinSpec {
        s: 0.5,
        b_field: [0.6, -0.3, 0.8],
    })
    .unwrap();
    let sp = flow(&h, 1e-3, 5.0);
    let s = sandwiched_ode_residual(&sp, 0, 1).unwrap();
    assert!(s.max_residual() < 1e-6, "{}", s.max_residual());
    assert!(s.max_phase_drift() < 1e-8);
}
