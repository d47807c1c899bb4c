use wegnerflow::flow::{decay_identity_residual, integrate_flow, wegner_generator};
use wegnerflow::models::{build_gho, build_spin, spin_family, squeeze_family, GhoSpec, SpinSpec};
use wegnerflow::operator::{max_abs, CMatrix};
use wegnerflow::{FlowConfig, GeneratorChoice, HermitianOperator, Sampling, C64};

fn annihilation(n_max: usize) -> CMatrix {
    let mut a = CMatrix::zeros(n_max + 1, n_max + 1);
    for n in 0..n_max {
        a[(n, n + 1)] = C64::new(((n + 1) as f64).sqrt(), 0.0);
    }
    a
}

fn real_symmetric(rows: &[&[f64]]) -> HermitianOperator {
    let d = rows.len();
    let m = CMatrix::from_fn(d, d, |i, j| C64::new(rows[i][j], 0.0));
    wegnerflow::operator::validate_hermitian(&m, 0.0).unwrap()
}

#[test]
fn wegner_generator_of_squeeze_form() {
    let (omega, lambda, n_max) = (1.3, C64::from_polar(0.2, 0.7), 12);
    let h = build_gho(&GhoSpec {
        omega,
        lambda,
        mu: C64::new(0.0, 0.0),
        nu: 0.0,
        n_max,
    })
    .unwrap();
    let a = annihilation(n_max);
    let ad = a.adjoint();
    let expected = (&ad * &ad * lambda - &a * &a * lambda.conj()) * C64::new(2.0 * omega, 0.0);
    let eta = wegner_generator(&h);
    let rows = n_max - 1;
    let diff = (eta.matrix() - expected).rows(0, rows).into_owned();
    assert!(max_abs(&diff) < 1e-12, "{}", max_abs(&diff));
}

#[test]
fn tracked_unitary_conjugates_the_start() {
    let h0 = real_symmetric(&[&[1.0, 0.5], &[0.5, 0.0]]);
    let cfg = FlowConfig {
        l_max: 5.0,
        sampling: Sampling::Uniform { dl: 0.05 },
        track_unitary: true,
        ..Default::default()
    };
    let traj = integrate_flow(&h0, GeneratorChoice::Wegner, &cfg).unwrap();
    for s in &traj.samples {
        let u = s.u.as_ref().unwrap();
        let conj = u * h0.matrix() * u.adjoint();
        assert!(max_abs(&(conj - s.h.matrix())) <= 1e-8, "l = {}", s.l);
        let defect = u.adjoint() * u - CMatrix::identity(2, 2);
        assert!(max_abs(&defect) <= 1e-8);
    }
    let diag = traj.last().h.diagonal();
    let r = 2f64.sqrt() / 2.0;
    assert!((diag[0] - (0.5 + r)).abs() < 1e-8 && (diag[1] - (0.5 - r)).abs() < 1e-8);
}

#[test]
fn diagonal_start_keeps_identity_unitary() {
    let h0 = HermitianOperator::from_real_diagonal(&[0.3, -1.0, 2.0]);
    let cfg = FlowConfig {
        track_unitary: true,
        ..Default::default()
    };
    let traj = integrate_flow(&h0, GeneratorChoice::Wegner, &cfg).unwrap();
    for s in &traj.samples {
        assert_eq!(s.u.as_ref().unwrap(), &CMatrix::identity(3, 3));
    }
}

#[test]
fn spin_half_decay_identity() {
    let h = build_spin(&SpinSpec {
        s: 0.5,
        b_field: [0.6, -0.3, 0.8],
    })
    .unwrap();
    let cfg = FlowConfig {
        l_max: 10.0,
        stop_offdiag: 0.0,
        sampling: Sampling::Uniform { dl: 1e-3 },
        ..Default::default()
    };
    let traj = integrate_flow(&h, GeneratorChoice::Wegner, &cfg).unwrap();
    let d = decay_identity_residual(&traj, GeneratorChoice::Wegner).unwrap();
    assert!(d.max_relative() <= 1e-6, "{}", d.max_relative());
}

#[test]
fn squeeze_family_bogoliubov_transform() {
    let n_max = 60;
    let mf = squeeze_family(0, n_max).unwrap();
    let a = annihilation(n_max);
    // the truncated exponential is only faithful well below the cutoff
    let rows = 10;
    for (r, phi) in [(0.2f64, 0.4f64), (0.5, -1.1)] {
        let u = mf.family.unitary_at(&[r, phi]).unwrap();
        let got = u.adjoint() * &a * &u;
        let expected =
            &a * C64::new(r.cosh(), 0.0) + a.adjoint() * C64::from_polar(r.sinh(), -2.0 * phi);
        let diff = (got - expected).view((0, 0), (rows, rows)).into_owned();
        assert!(max_abs(&diff) < 1e-8, "r = {r}: {}", max_abs(&diff));
    }
}

#[test]
fn spin_half_bloch_vector() {
    let mf = spin_family(0.5, 0.5).unwrap();
    for (theta, phi) in [(0.3f64, 0.0f64), (1.2, 2.0), (2.8, -0.7)] {
        let psi = mf.family.state_at(&[theta, phi]).unwrap();
        let (up, down) = (psi[0], psi[1]);
        let x = 2.0 * (up.conj() * down).re;
        let y = 2.0 * (up.conj() * down).im;
        let z = up.norm_sqr() - down.norm_sqr();
        let expected = [
            theta.sin() * phi.cos(),
            theta.sin() * phi.sin(),
            theta.cos(),
        ];
        for (g, e) in [x, y, z].iter().zip(expected) {
            assert!(
                (g - e).abs() < 1e-12,
                "({theta}, {phi}): {:?} vs {expected:?}",
                [x, y, z]
            );
        }
    }
}
