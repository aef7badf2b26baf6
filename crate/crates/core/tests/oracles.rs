//! Independent reference computations for the model and spectral layers.

use faer::{Mat, Side};
use fluxlab_core::experiments::{ground_state, total_number};
use fluxlab_core::model::{build_full, build_hop, flux_energy, gamma_ops, FluxConvention, ModelParams};
use fluxlab_core::sectors::{block, Sector};
use fluxlab_core::spectral::{diagonalize, log_sum_exp_neg, DiagOptions, VectorPolicy};
use fluxlab_core::transforms::{build_unitary, verify_identity, IdentityKind, UnitaryLabel};
use fluxlab_core::{Complex, Exec, FockOperator, GaugeField, Lattice, SitePhases};
use std::sync::Arc;

fn lat2() -> Arc<Lattice> {
    Arc::new(Lattice::new(2, 1).unwrap())
}

fn dense(op: &FockOperator) -> Mat<Complex> {
    let n = op.dim();
    let mut m = Mat::<Complex>::zeros(n, n);
    for (r, c, v) in op.entries() {
        m[(r, c)] += v;
    }
    m
}

fn sorted_eigs(m: &Mat<Complex>) -> Vec<f64> {
    let mut v = m.self_adjoint_eigenvalues(Side::Lower).unwrap();
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn one_particle_hopping_matches_doubled_ring_cosines() {
    // side-2 rings with both bonds present: eps(k) = 2 kappa (cos k1 + cos k2), k in {0, pi}
    let lat = lat2();
    let kappa = 0.7;
    let h = build_hop(&lat, &GaugeField::zero(&lat), kappa);
    let b = block(&h, Sector { n_up: 1, n_dn: 0 });
    let got = sorted_eigs(&b.matrix);
    let mut want: Vec<f64> = [0.0, std::f64::consts::PI]
        .iter()
        .flat_map(|&k1| [0.0, std::f64::consts::PI].map(move |k2| 2.0 * kappa * (f64::cos(k1) + f64::cos(k2))))
        .collect();
    want.sort_by(f64::total_cmp);
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12, "{got:?} vs {want:?}");
    }
}

#[test]
fn sector_log_z_matches_full_dense_spectrum() {
    let lat = lat2();
    let tilde = GaugeField::random(&lat, 21);
    let bundle = build_full(&lat, &ModelParams::default(), &tilde);
    let full = sorted_eigs(&dense(&bundle.fermionic));
    for symmetry in [false, true] {
        let spec = diagonalize(
            &lat,
            &bundle,
            DiagOptions {
                exec: Exec::Parallel,
                symmetry,
                vectors: VectorPolicy::None,
            },
        )
        .unwrap();
        let mine = spec.fermionic_eigenvalues();
        let err = mine.iter().zip(&full).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-11, "symmetry={symmetry}: {err:e}");
        for beta in [0.5, 2.0, 8.0, 40.0] {
            let e0 = full[0];
            let naive = -beta * e0 + full.iter().map(|e| (-beta * (e - e0)).exp()).sum::<f64>().ln();
            assert!((spec.log_z_fermionic(beta) - naive).abs() < 1e-12 * naive.abs().max(1.0));
            assert!(
                (spec.log_z(beta) - (spec.log_z_fermionic(beta) - beta * bundle.classical_shift)).abs() < 1e-12
            );
        }
    }
}

#[test]
fn log_sum_exp_handles_large_beta() {
    let v = [1000.0, 1000.0, 1001.0];
    let z = log_sum_exp_neg(v.iter().copied(), 40.0);
    let want = -40.0 * 1000.0 + (2.0 + (-40.0f64).exp()).ln();
    assert!((z - want).abs() < 1e-9);
}

#[test]
fn partition_function_decreases_with_beta_for_positive_spectrum() {
    let lat = lat2();
    let spec = diagonalize(
        &lat,
        &build_full(&lat, &ModelParams::default(), &GaugeField::random(&lat, 2)),
        DiagOptions::eigenvalues_only(Exec::Parallel),
    )
    .unwrap();
    let e0 = spec.e0_fermionic();
    // shift so the spectrum is nonnegative: log Z' = log Z + beta e0
    let mut last = f64::INFINITY;
    for beta in [0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
        let z = spec.log_z_fermionic(beta) + beta * e0;
        assert!(z <= last + 1e-12);
        last = z;
    }
    assert!(last >= (spec.degeneracy as f64).ln() - 1e-9);
}

#[test]
fn spectrum_is_pure_gauge_invariant() {
    let lat = lat2();
    let p = ModelParams::new(0.8, 1.3, 1.0, 2.0).unwrap();
    let tilde = GaugeField::random(&lat, 9);
    let base = diagonalize(&lat, &build_full(&lat, &p, &tilde), DiagOptions::eigenvalues_only(Exec::Parallel)).unwrap();
    for k in 0..5 {
        let shifted = tilde
            .add(&GaugeField::pure_gauge(&lat, &SitePhases::random(&lat, 40, k)))
            .unwrap();
        let s = diagonalize(&lat, &build_full(&lat, &p, &shifted), DiagOptions::eigenvalues_only(Exec::Parallel)).unwrap();
        let err = s
            .eigenvalues()
            .iter()
            .zip(base.eigenvalues())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "{err:e}");
        assert!((s.log_z(2.0) - base.log_z(2.0)).abs() <= 1e-10);
    }
}

#[test]
fn phase_unitary_implements_gauge_shift() {
    let lat = lat2();
    let a = GaugeField::random(&lat, 14);
    let phi = SitePhases::random(&lat, 15, 0);
    let u = build_unitary(&lat, UnitaryLabel::Phase, Some(&phi)).unwrap();
    let shifted = a.add(&GaugeField::pure_gauge(&lat, &phi)).unwrap();
    let back = u.conjugate(&build_hop(&lat, &shifted, 1.0)).unwrap();
    assert!(back.max_abs_diff(&build_hop(&lat, &a, 1.0)).unwrap() < 1e-12);
}

#[test]
fn thermal_expectations() {
    let lat = lat2();
    let spec = diagonalize(
        &lat,
        &build_full(&lat, &ModelParams::default(), &GaugeField::zero(&lat)),
        DiagOptions {
            exec: Exec::Parallel,
            symmetry: true,
            vectors: VectorPolicy::All,
        },
    )
    .unwrap();
    let n = total_number(&lat);
    // particle-hole symmetric: the thermal filling is exactly one per site
    for beta in [0.5, 2.0, 8.0] {
        let v = spec.thermal_expectation(&n, beta).unwrap();
        assert!((v.re - lat.n_sites() as f64).abs() < 1e-10, "beta {beta}: {}", v.re);
        assert!(v.im.abs() < 1e-12);
    }
    // infinite temperature: Tr(O) / dim
    let (g1, _) = gamma_ops(&lat, 0);
    let obs = g1.mul(&g1).unwrap();
    let t = spec.thermal_expectation(&obs, 1e-9).unwrap();
    assert!((t.re - obs.trace().re / spec.dim() as f64).abs() < 1e-6);

    // gapped ground state: beta = 40 agrees with the ground average
    let ground = ground_state(&lat, &ModelParams::default(), &GaugeField::zero(&lat), Exec::Parallel).unwrap();
    let evs = spec.eigenvalues();
    let gap = evs[spec.degeneracy] - evs[0];
    assert!(gap > 0.5, "gap {gap}");
    let g = ground.ground_expectation(&obs).unwrap();
    let th40 = spec.thermal_expectation(&obs, 40.0).unwrap();
    let th20 = spec.thermal_expectation(&obs, 20.0).unwrap();
    assert!((g.re - th40.re).abs() < 1e-6);
    assert!((g.re - th40.re).abs() <= (g.re - th20.re).abs() + 1e-15);
}

#[test]
fn flux_energy_of_pi_flux_and_zero() {
    for d in [2, 3] {
        let lat = Arc::new(Lattice::new(d, 1).unwrap());
        let np = lat.n_plaquettes() as f64;
        let pi = GaugeField::pi_flux(&lat);
        assert!((flux_energy(&pi, 1.5, FluxConvention::Original) + 1.5 * np).abs() < 1e-12);
        assert!((flux_energy(&GaugeField::zero(&lat), 1.5, FluxConvention::Barred) + 1.5 * np).abs() < 1e-12);
    }
}

#[test]
fn identity_checks_are_sensitive() {
    // the check compares against a nontrivial right-hand side: dropping the
    // conjugation must be caught
    let lat = lat2();
    let p = ModelParams::default();
    let tilde = GaugeField::random(&lat, 3);
    let u = build_unitary(&lat, UnitaryLabel::OddHalfPi, None).unwrap();
    let h = fluxlab_core::model::build_barred_hop(&lat, &tilde, 1.0);
    assert!(u.conjugate(&h).unwrap().max_abs_diff(&h).unwrap() > 0.1);
    let u1 = build_unitary(&lat, UnitaryLabel::U1Tilde, None).unwrap();
    assert!(u1.conjugate(&h).unwrap().max_abs_diff(&h).unwrap() > 0.1);
    for kind in IdentityKind::ALL {
        assert!(verify_identity(&lat, &p, &tilde, kind).unwrap().pass);
    }
}
