use slab_hybrid::sn::{double_gauss_legendre, source_iteration, IterationControl};
use slab_hybrid::{run_histories, CaptureMode, ClosureSet, Mesh1D, RunConfig, SlabProblem};

fn fine_reference(p: &SlabProblem, target: &Mesh1D) -> (Vec<f64>, ClosureSet) {
    let fine = target.refined(256);
    let s = source_iteration(
        p,
        &fine,
        &double_gauss_legendre(256).unwrap(),
        IterationControl::default(),
    )
    .unwrap();
    (s.restrict(&s.phi, target), s.oracle_closures(target))
}

fn check_within_sigma(
    p: &SlabProblem,
    cells: usize,
    capture: CaptureMode,
    histories: u64,
    seed: u64,
) {
    let m = Mesh1D::uniform(p, cells).unwrap();
    let (phi_ex, oracle) = fine_reference(p, &m);
    let cfg = RunConfig {
        histories,
        rng_seed: seed,
        capture_mode: capture,
        ..RunConfig::default()
    };
    let t = run_histories(p, &m, &cfg).unwrap();
    assert_eq!(t.histories(), histories);
    assert_eq!(t.anomalous_histories(), 0);
    let c = ClosureSet::from_tallies(&t, &m, None);
    for i in 0..cells {
        let sigma = c.phi_rel_err[i] * c.phi_mc[i];
        let z = (c.phi_mc[i] - phi_ex[i]) / sigma;
        assert!(
            z.abs() < 5.0,
            "{capture} cell {i}: phi {} vs {} (z = {z:.2})",
            c.phi_mc[i],
            phi_ex[i]
        );
        let se = c.eddington_rel_err[i] * c.eddington[i];
        let ze = (c.eddington[i] - oracle.eddington[i]) / se;
        assert!(
            ze.abs() < 5.0,
            "{capture} cell {i}: E {} vs {} (z = {ze:.2})",
            c.eddington[i],
            oracle.eddington[i]
        );
    }
}

#[test]
fn benchmark_flux_and_eddington_agree_with_sn() {
    let p = SlabProblem::benchmark();
    check_within_sigma(&p, 8, CaptureMode::Implicit, 200_000, 3);
    check_within_sigma(&p, 8, CaptureMode::Analog, 200_000, 4);
}

#[test]
fn heterogeneous_slab_agrees_with_sn() {
    let p = SlabProblem::new(
        2.0,
        vec![
            slab_hybrid::problem::MaterialRegion {
                x_left: 0.0,
                x_right: 1.0,
                sigma_t: 1.0,
                sigma_s: 0.5,
                q: 1.0,
            },
            slab_hybrid::problem::MaterialRegion {
                x_left: 1.0,
                x_right: 2.0,
                sigma_t: 2.0,
                sigma_s: 1.8,
                q: 0.0,
            },
        ],
    )
    .unwrap();
    check_within_sigma(&p, 8, CaptureMode::Implicit, 200_000, 5);
}

#[test]
fn mc_boundary_factors_agree_with_sn() {
    let p = SlabProblem::benchmark();
    let m = Mesh1D::uniform(&p, 4).unwrap();
    let (_, oracle) = fine_reference(&p, &m);
    let cfg = RunConfig {
        histories: 400_000,
        rng_seed: 9,
        ..RunConfig::default()
    };
    let c = ClosureSet::from_tallies(&run_histories(&p, &m, &cfg).unwrap(), &m, None);
    for (mc, sn) in [(c.left, oracle.left), (c.right, oracle.right)] {
        assert!((mc.c - sn.c).abs() / sn.c < 0.01, "C {} vs {}", mc.c, sn.c);
        assert!((mc.e - sn.e).abs() / sn.e < 0.01, "E {} vs {}", mc.e, sn.e);
        assert!(
            (mc.phi - sn.phi).abs() / sn.phi < 0.02,
            "phi {} vs {}",
            mc.phi,
            sn.phi
        );
    }
}
