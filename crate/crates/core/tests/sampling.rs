mod common;

use nalgebra::{DMatrix, DVector};

use common::{band_of, instance};
use netsample::dynamics::ModelKind;
use netsample::sampling::{
    joint_recover, plan_bandlimited, recover_snapshot, time_cutoff_bandlimited,
    time_cutoff_upperbound, SampleRecord, MIN_RANK_CERTIFICATE,
};
use netsample::spectral::{band_frequency_set, gft, igft, SpectralBasis};

fn band_signal(basis: &SpectralBasis, indices: &[usize], seed: u64) -> DVector<f64> {
    let mut c = gft(
        basis,
        &DVector::from_fn(basis.n(), |i, _| ((i as u64 * 7919 + seed) as f64).sin()),
    )
    .unwrap();
    for j in 0..basis.n() {
        if !indices.contains(&j) {
            c[j] = 0.0.into();
        }
    }
    igft(basis, &c).unwrap()
}

#[test]
fn plans_certify_and_recover_snapshots() {
    for seed in 0..40u64 {
        let inst = instance(ModelKind::Pd, 30, 0.3, seed * 31);
        let band = band_of(&inst.basis, 3 + (seed as usize % 8));
        let eq = inst.stable.equilibrium.clone();
        let plan = plan_bandlimited(&inst.basis, band.clone(), None, 1.0, 1e-3, eq).unwrap();
        assert!(plan.rank_certificate > MIN_RANK_CERTIFICATE);
        assert_eq!(plan.nodes.len(), band.len());
        let y = band_signal(&inst.basis, &band.indices, seed);
        let y_s = DVector::from_fn(plan.nodes.len(), |c, _| y[plan.nodes[c]]);
        let rec = recover_snapshot(&plan.phi, &y_s).unwrap();
        assert!((rec - &y).norm() < 1e-10 * y.norm(), "seed {seed}");
    }
}

#[test]
#[allow(clippy::needless_range_loop)]
fn cutoff_is_monotone_in_epsilon_and_norm() {
    let inst = instance(ModelKind::Mak, 20, 0.3, 5);
    let band = band_of(&inst.basis, 1);
    let grid = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
    let mut table = [[0.0; 5]; 5];
    for (a, &eps) in grid.iter().enumerate() {
        for (b, &norm) in grid.iter().enumerate() {
            table[a][b] = time_cutoff_bandlimited(&inst.basis, &band, norm * 10.0, eps)
                .unwrap()
                .value;
        }
    }
    for a in 0..5 {
        for b in 0..4 {
            assert!(table[a][b + 1] >= table[a][b]);
            assert!(table[b + 1][a] <= table[b][a]);
        }
    }
}

// The closed-form bound applies while the band stays inside the disk |lambda| < L.
#[test]
fn cutoff_stays_below_its_upper_bound() {
    for seed in 0..20 {
        let inst = instance(ModelKind::Pd, 20, 0.3, seed * 3);
        let l = inst.basis.lambda_max();
        for frac in [0.1, 0.3, 0.6, 0.9] {
            let band = band_frequency_set(&inst.basis, frac * l).unwrap();
            if band.is_empty() {
                continue;
            }
            for ratio in [10.0, 1e3] {
                let c = time_cutoff_bandlimited(&inst.basis, &band, ratio, 1.0).unwrap();
                if let Ok(bound) = time_cutoff_upperbound(frac * l, l, ratio, 1.0) {
                    assert!(
                        c.value <= bound * (1.0 + 1e-12),
                        "seed {seed}: {} > {bound}",
                        c.value
                    );
                }
            }
        }
    }
}

#[test]
fn recovery_at_sample_instants_is_phi_times_samples() {
    let inst = instance(ModelKind::Pd, 25, 0.3, 77);
    let band = band_of(&inst.basis, 4);
    let plan = plan_bandlimited(
        &inst.basis,
        band,
        Some(6),
        1.0,
        1e-3,
        inst.stable.equilibrium.clone(),
    )
    .unwrap();
    for k in [5usize, 40, 300] {
        let values = DMatrix::from_fn(k, 6, |r, c| ((r * 6 + c) as f64 * 0.37).sin());
        let record = SampleRecord::new(2.5, plan.nodes.clone(), values.clone()).unwrap();
        let times = record.times();
        let y = joint_recover(&plan, &record, &times).unwrap();
        let expected = &values * plan.phi.transpose();
        assert!((y - expected).amax() < 1e-12, "K = {k}");
    }
}

#[test]
fn node_order_of_a_record_must_match_the_plan() {
    let inst = instance(ModelKind::Pd, 12, 0.4, 8);
    let band = band_of(&inst.basis, 2);
    let plan = plan_bandlimited(
        &inst.basis,
        band,
        Some(3),
        1.0,
        1e-3,
        inst.stable.equilibrium.clone(),
    )
    .unwrap();
    let mut nodes = plan.nodes.clone();
    nodes.reverse();
    let record = SampleRecord::new(1.0, nodes, DMatrix::zeros(4, 3)).unwrap();
    assert!(joint_recover(&plan, &record, &[0.5]).is_err());
}
