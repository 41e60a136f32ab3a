//! Fixtures shared by the benchmarks.

use netsample::dynamics::{sample_stable_model, ModelKind, ParameterRanges, StableInstance};
use netsample::graph::{generate_network, Network};
use netsample::spectral::{
    band_frequency_set, bandwidth_for_modes, decompose, jacobian, BandSpec, LinearOperator,
    SpectralBasis,
};

pub struct Fixture {
    pub net: Network,
    pub stable: StableInstance,
    pub op: LinearOperator,
    pub basis: SpectralBasis,
    pub band: BandSpec,
}

/// First stable, diagonalizable instance at or after `seed` whose `modes`
/// smoothest modes form a band (one more if a conjugate pair would split).
pub fn fixture(kind: ModelKind, n: usize, p: f64, modes: usize, seed: u64) -> Fixture {
    for s in seed..seed + 1000 {
        let Ok(net) = generate_network(n, p, s) else {
            continue;
        };
        let Ok(stable) = sample_stable_model(kind, &net, &ParameterRanges::default(), s) else {
            continue;
        };
        let op = jacobian(&stable.model, &net, &stable.equilibrium).expect("jacobian");
        let Ok(basis) = decompose(&op) else { continue };
        let Ok(omega) =
            bandwidth_for_modes(&basis, modes).or_else(|_| bandwidth_for_modes(&basis, modes + 1))
        else {
            continue;
        };
        let band = band_frequency_set(&basis, omega).expect("band");
        return Fixture {
            net,
            stable,
            op,
            basis,
            band,
        };
    }
    panic!("no fixture near seed {seed}");
}
