#![allow(dead_code)]

use netsample::dynamics::{sample_stable_model, ModelKind, ParameterRanges, StableInstance};
use netsample::graph::{generate_network, Network};
use netsample::spectral::{decompose, jacobian, LinearOperator, SpectralBasis};

pub struct Instance {
    pub net: Network,
    pub stable: StableInstance,
    pub op: LinearOperator,
    pub basis: SpectralBasis,
    pub seed: u64,
}

/// A stable random instance with a well-conditioned eigenbasis, searching
/// seeds upward from `seed`.
pub fn instance(kind: ModelKind, n: usize, p: f64, seed: u64) -> Instance {
    for s in seed..seed + 1000 {
        let net = generate_network(n, p, s).unwrap();
        let Ok(stable) = sample_stable_model(kind, &net, &ParameterRanges::default(), s) else {
            continue;
        };
        let op = jacobian(&stable.model, &net, &stable.equilibrium).unwrap();
        match decompose(&op) {
            Ok(basis) if basis.condition() < 1e4 => {
                return Instance {
                    net,
                    stable,
                    op,
                    basis,
                    seed: s,
                }
            }
            _ => continue,
        }
    }
    panic!("no well-conditioned instance near seed {seed}");
}

/// The band of the smoothest `k` modes, or `k + 1` when `k` would split a
/// conjugate pair.
pub fn band_of(basis: &SpectralBasis, k: usize) -> netsample::spectral::BandSpec {
    let omega = netsample::spectral::bandwidth_for_modes(basis, k)
        .or_else(|_| netsample::spectral::bandwidth_for_modes(basis, k + 1))
        .unwrap();
    netsample::spectral::band_frequency_set(basis, omega).unwrap()
}
