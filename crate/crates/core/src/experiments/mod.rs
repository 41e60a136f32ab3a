//! RMSE sweeps over sampling frequency and sample-set size.
//!
//! [`Experiment::prepare`] builds everything a sweep shares: the network, a
//! stable model, its linearization and eigenbasis, the initial deviation, the
//! cutoffs and the ground-truth trajectory on the evaluation grid. Cells then
//! only sample, recover and score.

mod config;
mod output;

pub use config::{InitConfig, InitKind, ModelConfig, NetworkConfig, SamplingConfig, SweepConfig};
pub use output::{write_plot_data, write_sweep_csv, SWEEP_CSV_HEADER};

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    integrate_with_substeps, sample_stable_model, stable_instance, substeps_for, DynamicsModel,
    ModelKind, StableInstance, Trajectory,
};
use crate::error::{Error, Result};
use crate::graph::{generate_network, Network};
use crate::sampling::{
    arbitrary_init_projection, certify, greedy_order, interpolate, sample_nodes,
    time_cutoff_arbitrary, time_cutoff_bandlimited, PhiFactors, SamplingPlan, Selection,
    TimeCutoff, MIN_RANK_CERTIFICATE,
};
use crate::spectral::{
    band_frequency_set, bandwidth_for_modes, decompose, jacobian, make_arbitrary_init,
    make_bandlimited_init, support_bandwidth, BandSpec, LinearOperator, SpectralBasis,
    DEFAULT_SUPPORT_TOLERANCE,
};

/// Decay factor `||y(T)|| / ||y(0)||` targeted by the default horizon.
const HORIZON_DECAY: f64 = 1e-10;

/// Evaluation rows recovered at a time while scoring.
const SCORE_BLOCK: usize = 2048;

/// `sqrt((dt / (N T)) sum_k ||x_hat_k - x_k||^2)` over a uniform grid of `K`
/// rows with `T = K dt`, i.e. the root mean square over all entries.
pub fn rmse(reference: &Trajectory, recovered: &DMatrix<f64>) -> Result<f64> {
    if reference.states.shape() != recovered.shape() {
        return Err(Error::Grid(format!(
            "recovered matrix is {:?}, reference trajectory is {:?}",
            recovered.shape(),
            reference.states.shape()
        )));
    }
    check_uniform(reference)?;
    let sum: f64 = reference
        .states
        .iter()
        .zip(recovered.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum / reference.states.len() as f64).sqrt())
}

fn check_uniform(reference: &Trajectory) -> Result<()> {
    if reference.is_empty() || reference.n() == 0 {
        return Err(Error::Grid("empty trajectory".into()));
    }
    if let [t0, t1, ..] = reference.times[..] {
        let dt = t1 - t0;
        for (k, &t) in reference.times.iter().enumerate() {
            if (t - t0 - k as f64 * dt).abs() > 1e-9 * dt * (k as f64).max(1.0) {
                return Err(Error::Grid(format!(
                    "reference grid is not uniform at row {k}"
                )));
            }
        }
    }
    Ok(())
}

/// Independent seed streams derived from a run seed: `1` draws the model,
/// `2` the initial deviation.
pub fn stream(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Outcome of one `(F_s, |S|)` cell. Failed cells carry the reason and a NaN RMSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub fs_multiple: f64,
    pub fs: f64,
    pub size: usize,
    pub benchmark: bool,
    pub rmse: f64,
    pub omega_c: f64,
    pub time_cutoff: f64,
    pub rank_certificate: f64,
    pub clamped: bool,
    pub undersampled: bool,
    pub failure: Option<String>,
    pub wall_time: f64,
}

impl CellResult {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Instance-level facts shared by every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub seed: u64,
    pub n: usize,
    pub model: DynamicsModel,
    pub lambda_max: f64,
    pub basis_condition: f64,
    pub y0_norm: f64,
    pub epsilon: f64,
    pub omega_c: f64,
    pub band_size: usize,
    pub time_cutoff: f64,
    pub clamped: bool,
    pub horizon: f64,
    pub eval_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub meta: SweepMeta,
    /// F_s-major, sizes ascending within each F_s; the benchmark is the `|S| = N` cell.
    pub cells: Vec<CellResult>,
}

impl SweepResult {
    pub fn cell(&self, fs_multiple: f64, size: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.fs_multiple == fs_multiple && c.size == size)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.failed()).count()
    }
}

/// A prepared instance: everything except the per-cell sampling.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: SweepConfig,
    network: Network,
    instance: StableInstance,
    operator: LinearOperator,
    basis: SpectralBasis,
    y0: DVector<f64>,
    epsilon: f64,
    band: BandSpec,
    omega_c: f64,
    cutoff: TimeCutoff,
    horizon: f64,
    eval_step: f64,
    truth: Trajectory,
}

impl Experiment {
    pub fn prepare(config: &SweepConfig) -> Result<Self> {
        config.validate()?;
        let network = generate_network(
            config.network.n,
            config.network.edge_probability,
            config.seed,
        )?;
        let instance = stable_model(&config.model, &network, stream(config.seed, 1))?;
        let operator = jacobian(&instance.model, &network, &instance.equilibrium)?;
        let basis = decompose(&operator)?;

        let y0 = make_init(
            &config.init,
            &basis,
            &instance.equilibrium,
            stream(config.seed, 2),
        )?;
        let y0_norm = y0.norm();
        let epsilon = config
            .sampling
            .epsilon
            .unwrap_or(config.sampling.epsilon_relative * y0_norm);

        let (omega_c, support) = support_bandwidth(&basis, &y0, DEFAULT_SUPPORT_TOLERANCE)?;
        let (band, cutoff) = match config.init.kind {
            InitKind::Bandlimited => {
                let band = band_frequency_set(&basis, omega_c)?;
                debug_assert!(support.iter().all(|&j| band.contains(j)));
                let cutoff = time_cutoff_bandlimited(&basis, &band, y0_norm, epsilon)?;
                (band, cutoff)
            }
            InitKind::Arbitrary => (
                BandSpec {
                    omega: None,
                    indices: (0..basis.n()).collect(),
                },
                time_cutoff_arbitrary(&basis, y0_norm, epsilon)?,
            ),
        };
        if cutoff.clamped {
            log::warn!("time cutoff clamped: epsilon is large relative to ||y0||");
        }
        if !(cutoff.value > 0.0) {
            return Err(Error::Degenerate(
                "time cutoff is zero; sampling frequency undefined".into(),
            ));
        }

        let eval_step = config
            .sampling
            .eval_step
            .unwrap_or(PI / (4.0 * cutoff.value));
        let horizon_guess = match config.sampling.horizon {
            Some(t) => t,
            None => {
                let slowest = band
                    .indices
                    .iter()
                    .map(|&j| basis.eigenvalue(j).re)
                    .fold(f64::NEG_INFINITY, f64::max);
                if !(slowest < 0.0) {
                    return Err(Error::Unstable { max_real: slowest });
                }
                (1.0 / HORIZON_DECAY).ln() / -slowest
            }
        };
        let steps = (horizon_guess / eval_step).ceil().max(1.0) as usize;
        let horizon = steps as f64 * eval_step;

        let x0 = &instance.equilibrium + &y0;
        let substeps = substeps_for(eval_step, basis.lambda_max());
        let full =
            integrate_with_substeps(&instance.model, &network, &x0, eval_step, horizon, substeps)?;
        // Keep [0, T): K rows with T = K dt.
        let rows = steps.min(full.len());
        let truth = Trajectory::new(
            full.times[..rows].to_vec(),
            full.states.rows(0, rows).into_owned(),
            full.meta.clone(),
        )?;

        Ok(Experiment {
            config: config.clone(),
            network,
            instance,
            operator,
            basis,
            y0,
            epsilon,
            band,
            omega_c,
            cutoff,
            horizon,
            eval_step,
            truth,
        })
    }

    pub fn config(&self) -> &SweepConfig {
        &self.config
    }

    /// The config with every default and random draw made explicit.
    pub fn resolved_config(&self) -> SweepConfig {
        let mut c = self.config.clone();
        let (f, b, r) = self.instance.model.parameters();
        c.model.decay = Some(b);
        c.model.coupling = Some(r);
        c.model.influx = match self.instance.model.kind() {
            ModelKind::Mak => Some(f),
            ModelKind::Pd => None,
        };
        c.sampling.epsilon = Some(self.epsilon);
        c.sampling.horizon = Some(self.horizon);
        c.sampling.eval_step = Some(self.eval_step);
        c
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn model(&self) -> &DynamicsModel {
        &self.instance.model
    }

    pub fn equilibrium(&self) -> &DVector<f64> {
        &self.instance.equilibrium
    }

    pub fn operator(&self) -> &LinearOperator {
        &self.operator
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn y0(&self) -> &DVector<f64> {
        &self.y0
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `N_{omega_c}` for a bandlimited init, all modes otherwise.
    pub fn band(&self) -> &BandSpec {
        &self.band
    }

    pub fn omega_c(&self) -> f64 {
        self.omega_c
    }

    pub fn cutoff(&self) -> TimeCutoff {
        self.cutoff
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn eval_step(&self) -> f64 {
        self.eval_step
    }

    pub fn truth(&self) -> &Trajectory {
        &self.truth
    }

    pub fn meta(&self) -> SweepMeta {
        SweepMeta {
            seed: self.config.seed,
            n: self.network.n(),
            model: self.instance.model,
            lambda_max: self.basis.lambda_max(),
            basis_condition: self.basis.condition(),
            y0_norm: self.y0.norm(),
            epsilon: self.epsilon,
            omega_c: self.omega_c,
            band_size: self.band.len(),
            time_cutoff: self.cutoff.value,
            clamped: self.cutoff.clamped,
            horizon: self.horizon,
            eval_step: self.eval_step,
        }
    }

    fn plan_from(&self, band: BandSpec, nodes: Vec<usize>) -> Result<SamplingPlan> {
        let certificate = certify(&self.basis, &band, &nodes)?;
        if !(certificate > MIN_RANK_CERTIFICATE) {
            return Err(Error::InfeasibleBand(format!(
                "{}-node greedy set is rank deficient (certificate {certificate:e})",
                nodes.len()
            )));
        }
        let selection = Selection { nodes, certificate };
        let mut plan = SamplingPlan::build(
            &self.basis,
            band,
            selection,
            self.omega_c,
            self.cutoff,
            self.epsilon,
            self.instance.equilibrium.clone(),
        )?;
        plan.model = Some(self.instance.model);
        Ok(plan)
    }

    /// Plans for each size, sharing one greedy run in the bandlimited case.
    pub fn plans(&self, sizes: &[usize]) -> Vec<Result<SamplingPlan>> {
        match self.config.init.kind {
            InitKind::Bandlimited => {
                let largest = sizes.iter().copied().max().unwrap_or(0);
                match greedy_order(&self.basis, &self.band, largest) {
                    Ok(order) => sizes
                        .iter()
                        .map(|&s| self.plan_from(self.band.clone(), order[..s].to_vec()))
                        .collect(),
                    Err(e) => {
                        let msg = e.to_string();
                        sizes
                            .iter()
                            .map(|_| Err(Error::InfeasibleBand(msg.clone())))
                            .collect()
                    }
                }
            }
            InitKind::Arbitrary => sizes
                .iter()
                .map(|&s| {
                    let projection = arbitrary_init_projection(&self.basis, &self.y0, s)?;
                    let order = greedy_order(&self.basis, &projection.band, s)?;
                    self.plan_from(projection.band, order)
                })
                .collect(),
        }
    }

    pub fn plan(&self, size: usize) -> Result<SamplingPlan> {
        self.plans(&[size])
            .pop()
            .expect("one size in, one plan out")
    }

    /// Deviation samples `y(k / fs)` of every node in `nodes`, `k = 0..=fs T`.
    pub fn sample(&self, fs: f64, nodes: &[usize]) -> Result<DMatrix<f64>> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::Parameter(format!(
                "sampling frequency must be > 0, got {fs}"
            )));
        }
        let x0 = &self.instance.equilibrium + &self.y0;
        let record = sample_nodes(
            &self.instance.model,
            &self.network,
            &x0,
            &self.instance.equilibrium,
            nodes,
            fs,
            self.horizon.max(1.0 / fs),
            self.basis.lambda_max(),
        )?;
        Ok(record.values)
    }

    /// Recovers the state on the evaluation grid from deviation samples of
    /// `plan.nodes` (`samples` columns follow `plan.nodes`) and scores it.
    pub fn score(&self, plan: &SamplingPlan, fs: f64, samples: &DMatrix<f64>) -> Result<f64> {
        Error::check_len(plan.nodes.len(), samples.ncols())?;
        Error::check_len(self.network.n(), plan.n())?;
        check_uniform(&self.truth)?;
        let factors = PhiFactors::new(&plan.phi);
        let z = interpolate(&factors.reduce(samples), fs, &self.truth.times)?;
        // Same value as `rmse` on the full recovery, without holding a K x n copy.
        let left_t = factors.left().transpose();
        let eq = self.instance.equilibrium.transpose();
        let mut sum = 0.0;
        for start in (0..z.nrows()).step_by(SCORE_BLOCK) {
            let rows = SCORE_BLOCK.min(z.nrows() - start);
            let mut block = z.rows(start, rows) * &left_t;
            for mut row in block.row_iter_mut() {
                row += &eq;
            }
            let truth = self.truth.states.rows(start, rows);
            sum += block
                .iter()
                .zip(truth.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        Ok((sum / self.truth.states.len() as f64).sqrt())
    }

    fn cell_from(
        &self,
        fs_multiple: f64,
        size: usize,
        plan: &Result<SamplingPlan>,
        samples: impl FnOnce(&SamplingPlan) -> std::result::Result<DMatrix<f64>, String>,
    ) -> CellResult {
        let start = Instant::now();
        let fs = fs_multiple * self.cutoff.sampling_frequency();
        let mut cell = CellResult {
            fs_multiple,
            fs,
            size,
            benchmark: size == self.network.n(),
            rmse: f64::NAN,
            omega_c: self.omega_c,
            time_cutoff: self.cutoff.value,
            rank_certificate: f64::NAN,
            clamped: self.cutoff.clamped,
            undersampled: false,
            failure: None,
            wall_time: 0.0,
        };
        let outcome = plan.as_ref().map_err(|e| e.to_string()).and_then(|plan| {
            cell.rank_certificate = plan.rank_certificate;
            cell.undersampled = plan.undersampled;
            let samples = samples(plan)?;
            self.score(plan, fs, &samples).map_err(|e| e.to_string())
        });
        match outcome {
            Ok(v) => cell.rmse = v,
            Err(msg) => {
                log::warn!("cell F_s = {fs_multiple} Omega_c/pi, |S| = {size} failed: {msg}");
                cell.failure = Some(msg);
            }
        }
        cell.wall_time = start.elapsed().as_secs_f64();
        cell
    }

    /// One cell: sample at `fs_multiple * Omega_c / pi` on the plan for `size`
    /// nodes, recover on the evaluation grid, and score against the truth.
    pub fn run_cell(&self, fs_multiple: f64, size: usize) -> CellResult {
        let plan = self.plan(size);
        let fs = fs_multiple * self.cutoff.sampling_frequency();
        self.cell_from(fs_multiple, size, &plan, |p| {
            self.sample(fs, &p.nodes).map_err(|e| e.to_string())
        })
    }

    /// The configured grid plus the `|S| = N` benchmark column.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = self.config.sampling.sample_sizes.clone();
        if self.config.sampling.benchmark && !sizes.contains(&self.network.n()) {
            sizes.push(self.network.n());
        }
        sizes
    }

    /// Every cell, F_s-major. Sampling is integrated once per frequency and
    /// shared by the sizes; cells within a frequency run on the rayon pool.
    pub fn run_sweep(&self) -> SweepResult {
        let sizes = self.sizes();
        let plans = self.plans(&sizes);
        let mut union: Vec<usize> = plans
            .iter()
            .flatten()
            .flat_map(|p| p.nodes.iter().copied())
            .collect();
        union.sort_unstable();
        union.dedup();
        let mut column_of = vec![usize::MAX; self.network.n()];
        for (c, &i) in union.iter().enumerate() {
            column_of[i] = c;
        }

        let mut cells = Vec::with_capacity(sizes.len() * self.config.sampling.fs_multiples.len());
        for &multiple in &self.config.sampling.fs_multiples {
            let fs = multiple * self.cutoff.sampling_frequency();
            let shared = self.sample(fs, &union).map_err(|e| e.to_string());
            let row: Vec<CellResult> = sizes
                .par_iter()
                .zip(plans.par_iter())
                .map(|(&size, plan)| {
                    self.cell_from(multiple, size, plan, |p| {
                        let cols: Vec<usize> = p.nodes.iter().map(|&i| column_of[i]).collect();
                        shared
                            .as_ref()
                            .map(|all| all.select_columns(&cols))
                            .map_err(Clone::clone)
                    })
                })
                .collect();
            cells.extend(row);
        }
        SweepResult {
            meta: self.meta(),
            cells,
        }
    }
}

/// The configured model if all its parameters are given, otherwise a stable
/// draw from `config.ranges` seeded by `seed`.
pub fn stable_model(config: &ModelConfig, net: &Network, seed: u64) -> Result<StableInstance> {
    let fixed = match (config.kind, config.influx, config.decay, config.coupling) {
        (ModelKind::Pd, None, Some(b), Some(r)) => Some(DynamicsModel::pd(b, r)?),
        (ModelKind::Mak, Some(f), Some(b), Some(r)) => Some(DynamicsModel::mak(f, b, r)?),
        (_, None, None, None) => None,
        _ => {
            return Err(Error::Parameter(
                "give all model parameters for the kind (pd: decay, coupling; mak: influx, decay, coupling) or none".into(),
            ))
        }
    };
    match fixed {
        Some(model) => stable_instance(model, net),
        None => sample_stable_model(config.kind, net, &config.ranges, seed),
    }
}

/// The initial deviation `y(0)` described by `init`.
pub fn make_init(
    init: &InitConfig,
    basis: &SpectralBasis,
    equilibrium: &DVector<f64>,
    seed: u64,
) -> Result<DVector<f64>> {
    init.validate(basis.n())?;
    Error::check_len(basis.n(), equilibrium.len())?;
    let amplitude = if init.relative_amplitude {
        let scale = equilibrium.norm();
        if scale == 0.0 {
            return Err(Error::Parameter(
                "relative amplitude needs a nonzero equilibrium".into(),
            ));
        }
        init.amplitude * scale
    } else {
        init.amplitude
    };
    match init.kind {
        InitKind::Bandlimited => {
            let omega = match (init.omega, init.modes) {
                (Some(w), _) => w,
                (None, Some(m)) => bandwidth_for_modes(basis, m)?,
                (None, None) => unreachable!("validated"),
            };
            make_bandlimited_init(basis, omega, amplitude, seed)
        }
        InitKind::Arbitrary => make_arbitrary_init(basis.n(), amplitude, seed),
    }
}

/// `run_cell` on a freshly prepared instance.
pub fn run_cell(config: &SweepConfig, fs_multiple: f64, size: usize) -> Result<CellResult> {
    Ok(Experiment::prepare(config)?.run_cell(fs_multiple, size))
}

/// Prepares the instance and runs the full grid on the current rayon pool.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    Ok(Experiment::prepare(config)?.run_sweep())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::TrajectoryMeta;

    fn grid(k: usize, n: usize, dt: f64, value: f64) -> Trajectory {
        let meta = TrajectoryMeta {
            model: None,
            seed: None,
            step: dt,
        };
        Trajectory::new(
            (0..k).map(|i| i as f64 * dt).collect(),
            DMatrix::from_element(k, n, value),
            meta,
        )
        .unwrap()
    }

    #[test]
    fn rmse_identity_offset_and_spike() {
        let reference = grid(40, 5, 0.25, 1.0);
        assert_eq!(rmse(&reference, &reference.states).unwrap(), 0.0);
        let shifted = reference.states.add_scalar(0.3);
        assert!((rmse(&reference, &shifted).unwrap() - 0.3).abs() < 1e-15);
        let mut spike = reference.states.clone();
        spike[(7, 2)] += 2.0;
        // |err| sqrt(dt / (N T)) with T = 40 dt
        let want = 2.0 * (0.25f64 / (5.0 * 40.0 * 0.25)).sqrt();
        assert!((rmse(&reference, &spike).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn rmse_is_symmetric_and_checks_shape() {
        let a = grid(10, 3, 0.1, 1.0);
        let b = grid(10, 3, 0.1, -0.5);
        assert_eq!(rmse(&a, &b.states).unwrap(), rmse(&b, &a.states).unwrap());
        assert!(matches!(
            rmse(&a, &DMatrix::zeros(9, 3)),
            Err(Error::Grid(_))
        ));
    }

    #[test]
    fn seed_streams_differ() {
        assert_ne!(stream(1, 1), stream(1, 2));
        assert_ne!(stream(1, 1), stream(2, 1));
        assert_eq!(stream(5, 3), stream(5, 3));
    }
}
