//! Fixed sampling sets, reconstruction operators, cutoffs and joint recovery.

mod cutoff;
mod recovery;
mod selection;

pub use cutoff::{
    analytic_fourier, time_cutoff_arbitrary, time_cutoff_bandlimited, time_cutoff_upperbound,
    TimeCutoff,
};
pub use recovery::{
    interpolate, interpolate_direct, interpolate_fft, joint_recover, joint_recover_state,
    sinc_reconstruct, PhiFactors, SampleRecord, SNAP_TOLERANCE,
};
pub use selection::{
    band_columns, brute_force_selection, certify, greedy_order, reconstruction_matrix,
    recover_snapshot, select_sampling_set, Selection, MIN_RANK_CERTIFICATE,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_observed, substeps_for, DynamicsModel};
use crate::error::{Error, Result};
use crate::graph::Network;
use crate::spectral::{gft, igft_complex, BandSpec, SpectralBasis};

/// Everything needed to sample a network and recover it: the node set, the
/// band it certifies, `Phi`, and the time-domain cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PlanFile", try_from = "PlanFile")]
pub struct SamplingPlan {
    pub nodes: Vec<usize>,
    pub band: BandSpec,
    /// `n x |S|`.
    pub phi: DMatrix<f64>,
    pub omega_c: f64,
    pub cutoff: TimeCutoff,
    /// Recommended sampling frequency `Omega_c / pi`.
    pub fs: f64,
    pub epsilon: f64,
    pub rank_certificate: f64,
    /// `|S| < |band|`: snapshots cannot be recovered exactly.
    pub undersampled: bool,
    /// `x_inf`, added back for state-domain output.
    pub equilibrium: DVector<f64>,
    pub model: Option<DynamicsModel>,
}

impl SamplingPlan {
    /// Builds `Phi` for a selection and assembles the plan.
    pub fn build(
        basis: &SpectralBasis,
        band: BandSpec,
        selection: Selection,
        omega_c: f64,
        cutoff: TimeCutoff,
        epsilon: f64,
        equilibrium: DVector<f64>,
    ) -> Result<Self> {
        Error::check_len(basis.n(), equilibrium.len())?;
        let phi = reconstruction_matrix(basis, &selection.nodes, &band)?;
        if cutoff.clamped {
            log::warn!(
                "epsilon exceeds ||y0|| / max decay rate; time cutoff clamped to {}",
                cutoff.value
            );
        }
        Ok(SamplingPlan {
            undersampled: selection.nodes.len() < band.len(),
            nodes: selection.nodes,
            band,
            phi,
            omega_c,
            fs: cutoff.sampling_frequency(),
            cutoff,
            epsilon,
            rank_certificate: selection.certificate,
            equilibrium,
            model: None,
        })
    }

    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    pub fn time_cutoff(&self) -> f64 {
        self.cutoff.value
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    nodes: Vec<usize>,
    band: Vec<usize>,
    omega: Option<f64>,
    omega_c: f64,
    #[serde(rename = "Omega_c")]
    time_cutoff: f64,
    #[serde(rename = "F_s")]
    fs: f64,
    epsilon: f64,
    rank_certificate: f64,
    clamped: bool,
    undersampled: bool,
    equilibrium: Vec<f64>,
    model: Option<DynamicsModel>,
    phi: Vec<Vec<f64>>,
}

impl From<SamplingPlan> for PlanFile {
    fn from(p: SamplingPlan) -> Self {
        PlanFile {
            band: p.band.indices,
            omega: p.band.omega,
            phi: p
                .phi
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            nodes: p.nodes,
            omega_c: p.omega_c,
            time_cutoff: p.cutoff.value,
            fs: p.fs,
            epsilon: p.epsilon,
            rank_certificate: p.rank_certificate,
            clamped: p.cutoff.clamped,
            undersampled: p.undersampled,
            equilibrium: p.equilibrium.iter().copied().collect(),
            model: p.model,
        }
    }
}

impl TryFrom<PlanFile> for SamplingPlan {
    type Error = Error;

    fn try_from(f: PlanFile) -> Result<Self> {
        let n = f.equilibrium.len();
        let s = f.nodes.len();
        if f.phi.len() != n || f.phi.iter().any(|r| r.len() != s) {
            return Err(Error::format("plan", format!("phi must be {n} x {s}")));
        }
        if let Some(&i) = f.nodes.iter().find(|&&i| i >= n) {
            return Err(Error::format(
                "plan",
                format!("node {i} out of range for n = {n}"),
            ));
        }
        if !(f.fs > 0.0) {
            return Err(Error::format(
                "plan",
                format!("F_s must be > 0, got {}", f.fs),
            ));
        }
        let phi = DMatrix::from_fn(n, s, |i, j| f.phi[i][j]);
        Ok(SamplingPlan {
            nodes: f.nodes,
            band: BandSpec {
                omega: f.omega,
                indices: f.band,
            },
            phi,
            omega_c: f.omega_c,
            cutoff: TimeCutoff {
                value: f.time_cutoff,
                clamped: f.clamped,
            },
            fs: f.fs,
            epsilon: f.epsilon,
            rank_certificate: f.rank_certificate,
            undersampled: f.undersampled,
            equilibrium: DVector::from_vec(f.equilibrium),
            model: f.model,
        })
    }
}

/// A non-bandlimited initial state reduced to its largest graph-frequency
/// components.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Kept modes; `omega` is `None` since they are chosen by amplitude.
    pub band: BandSpec,
    /// GFT of `y0` with every dropped coefficient set to zero.
    pub coefficients: DVector<Complex64>,
    /// `||Gamma c_dropped||_2`, the truncation error of the snapshot.
    pub dropped_norm: f64,
}

/// Keeps the `budget` largest `|gft(y0)_j|` (ties to the lower index).
///
/// Conjugate pairs are kept or dropped together: a pair that no longer fits
/// is skipped in favour of the next real mode, so at most `budget - 1` modes
/// survive when only pairs remain.
pub fn arbitrary_init_projection(
    basis: &SpectralBasis,
    y0: &DVector<f64>,
    budget: usize,
) -> Result<Projection> {
    let n = basis.n();
    if budget == 0 || budget > n {
        return Err(Error::Parameter(format!(
            "mode budget must be in 1..={n}, got {budget}"
        )));
    }
    let coeffs = gft(basis, y0)?;
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&a, &b| {
        coeffs[b]
            .norm()
            .total_cmp(&coeffs[a].norm())
            .then(a.cmp(&b))
    });
    let mut keep = vec![false; n];
    let mut kept = 0;
    for &j in &ranked {
        if keep[j] || kept == budget {
            continue;
        }
        let partner = basis.partner(j);
        let cost = if partner == j { 1 } else { 2 };
        if kept + cost <= budget {
            keep[j] = true;
            keep[partner] = true;
            kept += cost;
        }
    }
    let indices: Vec<usize> = (0..n).filter(|&j| keep[j]).collect();
    if indices.is_empty() || coeffs.iter().all(|c| c.norm() == 0.0) {
        return Err(Error::Degenerate("no mode of y0 fits the budget".into()));
    }
    let zero = Complex64::new(0.0, 0.0);
    let kept_coeffs = DVector::from_fn(n, |j, _| if keep[j] { coeffs[j] } else { zero });
    let dropped = DVector::from_fn(n, |j, _| if keep[j] { zero } else { coeffs[j] });
    let dropped_norm = igft_complex(basis, &dropped)?.norm();
    Ok(Projection {
        band: BandSpec {
            omega: None,
            indices,
        },
        coefficients: kept_coeffs,
        dropped_norm,
    })
}

/// Integrates from `x0` and records `x_i(k / fs) - x_inf_i` for `i` in
/// `nodes`, `k = 0..=floor(fs horizon)`.
#[allow(clippy::too_many_arguments)]
pub fn sample_nodes(
    model: &DynamicsModel,
    net: &Network,
    x0: &DVector<f64>,
    equilibrium: &DVector<f64>,
    nodes: &[usize],
    fs: f64,
    horizon: f64,
    lambda_max: f64,
) -> Result<SampleRecord> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::Parameter(format!(
            "sampling frequency must be > 0, got {fs}"
        )));
    }
    Error::check_len(net.n(), equilibrium.len())?;
    if let Some(&i) = nodes.iter().find(|&&i| i >= net.n()) {
        return Err(Error::Parameter(format!(
            "node {i} out of range for n = {}",
            net.n()
        )));
    }
    let step = 1.0 / fs;
    let count = (horizon / step * (1.0 + 1e-12)).floor() as usize + 1;
    let mut values = DMatrix::zeros(count, nodes.len());
    let substeps = substeps_for(step, lambda_max);
    integrate_observed(model, net, x0, step, horizon, substeps, |k, _, x| {
        for (c, &i) in nodes.iter().enumerate() {
            values[(k, c)] = x[i] - equilibrium[i];
        }
    })?;
    SampleRecord::new(fs, nodes.to_vec(), values)
}

/// Plan for a bandlimited deviation of norm `y0_norm`: the `size` greedy
/// nodes (default `|band|`) and the band's time cutoff.
pub fn plan_bandlimited(
    basis: &SpectralBasis,
    band: BandSpec,
    size: Option<usize>,
    y0_norm: f64,
    epsilon: f64,
    equilibrium: DVector<f64>,
) -> Result<SamplingPlan> {
    if band.is_empty() {
        return Err(Error::InfeasibleBand(format!(
            "no graph frequency lies within omega = {}",
            band.omega.unwrap_or(0.0)
        )));
    }
    let omega_c = match band.omega {
        Some(w) => w,
        None => band_edge(basis, &band.indices),
    };
    let selection = select_sampling_set(basis, &band, size.unwrap_or(band.len()))?;
    let cutoff = time_cutoff_bandlimited(basis, &band, y0_norm, epsilon)?;
    SamplingPlan::build(
        basis,
        band,
        selection,
        omega_c,
        cutoff,
        epsilon,
        equilibrium,
    )
}

/// Plan for an arbitrary deviation: project `y0` onto its `budget` largest
/// modes, select nodes for them, and bound time over the whole spectrum.
pub fn plan_arbitrary(
    basis: &SpectralBasis,
    y0: &DVector<f64>,
    budget: usize,
    epsilon: f64,
    equilibrium: DVector<f64>,
) -> Result<(SamplingPlan, Projection)> {
    let projection = arbitrary_init_projection(basis, y0, budget)?;
    let selection = select_sampling_set(basis, &projection.band, budget)?;
    let cutoff = time_cutoff_arbitrary(basis, y0.norm(), epsilon)?;
    let omega_c = band_edge(basis, &(0..basis.n()).collect::<Vec<_>>());
    let plan = SamplingPlan::build(
        basis,
        projection.band.clone(),
        selection,
        omega_c,
        cutoff,
        epsilon,
        equilibrium,
    )?;
    Ok((plan, projection))
}

// Smallest strict bandwidth containing `indices`.
fn band_edge(basis: &SpectralBasis, indices: &[usize]) -> f64 {
    let d = indices
        .iter()
        .map(|&j| basis.distance(j))
        .fold(0.0, f64::max);
    d + (4.0 * f64::EPSILON * d).max(1e-12)
}
