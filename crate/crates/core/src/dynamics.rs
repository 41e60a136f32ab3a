//! Networked ODE models, a fixed-step RK4 integrator, equilibrium search and
//! spectral stability certification.
//!
//! Both models have the form `dx_n/dt = f_n(x_n) + sum_m a[n][m] g(x_n, x_m)`:
//!
//! * PD (population dynamics): `dx_n/dt = -B x_n + R sum_m a[n][m] x_m`
//! * MAK (mass-action kinetics): `dx_n/dt = F - B x_n + R sum_m a[n][m] x_n x_m`

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Network;
use crate::linalg;

/// Magnitude beyond which an integrated state is treated as blown up.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Tolerance on `max Re(lambda)` for the stability certificate.
pub const STABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Pd,
    Mak,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pd" => Ok(ModelKind::Pd),
            "mak" => Ok(ModelKind::Mak),
            other => Err(Error::Parameter(format!("unknown model kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DynamicsModel {
    Pd {
        #[serde(alias = "b")]
        decay: f64,
        #[serde(alias = "r")]
        coupling: f64,
    },
    Mak {
        #[serde(alias = "f")]
        influx: f64,
        #[serde(alias = "b")]
        decay: f64,
        #[serde(alias = "r")]
        coupling: f64,
    },
}

impl DynamicsModel {
    pub fn pd(decay: f64, coupling: f64) -> Result<Self> {
        DynamicsModel::Pd { decay, coupling }.validated()
    }

    pub fn mak(influx: f64, decay: f64, coupling: f64) -> Result<Self> {
        DynamicsModel::Mak {
            influx,
            decay,
            coupling,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        let (influx, decay, coupling) = self.parameters();
        if !(influx.is_finite() && decay.is_finite() && coupling.is_finite()) {
            return Err(Error::Parameter("model parameters must be finite".into()));
        }
        if decay <= 0.0 {
            return Err(Error::Parameter(format!(
                "decay rate B must be > 0, got {decay}"
            )));
        }
        if influx < 0.0 {
            return Err(Error::Parameter(format!(
                "influx F must be >= 0, got {influx}"
            )));
        }
        Ok(self)
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            DynamicsModel::Pd { .. } => ModelKind::Pd,
            DynamicsModel::Mak { .. } => ModelKind::Mak,
        }
    }

    /// `(F, B, R)`, with `F = 0` for PD.
    pub fn parameters(&self) -> (f64, f64, f64) {
        match *self {
            DynamicsModel::Pd { decay, coupling } => (0.0, decay, coupling),
            DynamicsModel::Mak {
                influx,
                decay,
                coupling,
            } => (influx, decay, coupling),
        }
    }

    fn with_coupling(self, r: f64) -> Self {
        match self {
            DynamicsModel::Pd { decay, .. } => DynamicsModel::Pd { decay, coupling: r },
            DynamicsModel::Mak { influx, decay, .. } => DynamicsModel::Mak {
                influx,
                decay,
                coupling: r,
            },
        }
    }

    /// Writes `dx/dt` at `x` into `out`. Lengths are not checked.
    pub fn derivative_into(&self, net: &Network, x: &[f64], out: &mut [f64]) {
        match *self {
            DynamicsModel::Pd { decay, coupling } => {
                for (node, o) in out.iter_mut().enumerate() {
                    let inflow: f64 = net.incoming(node).iter().map(|&(m, w)| w * x[m]).sum();
                    *o = -decay * x[node] + coupling * inflow;
                }
            }
            DynamicsModel::Mak {
                influx,
                decay,
                coupling,
            } => {
                for (node, o) in out.iter_mut().enumerate() {
                    let inflow: f64 = net.incoming(node).iter().map(|&(m, w)| w * x[m]).sum();
                    *o = influx - decay * x[node] + coupling * x[node] * inflow;
                }
            }
        }
    }

    /// Analytic Jacobian of the vector field at `x`.
    pub fn jacobian_matrix(&self, net: &Network, x: &[f64]) -> DMatrix<f64> {
        let n = net.n();
        let (_, decay, coupling) = self.parameters();
        let mut a = DMatrix::zeros(n, n);
        for node in 0..n {
            match self {
                DynamicsModel::Pd { .. } => {
                    for &(m, w) in net.incoming(node) {
                        a[(node, m)] = coupling * w;
                    }
                    a[(node, node)] = -decay;
                }
                DynamicsModel::Mak { .. } => {
                    let mut inflow = 0.0;
                    for &(m, w) in net.incoming(node) {
                        a[(node, m)] = coupling * w * x[node];
                        inflow += w * x[m];
                    }
                    a[(node, node)] = -decay + coupling * inflow;
                }
            }
        }
        a
    }

    /// Starting point for the equilibrium search: the uncoupled fixed point.
    pub fn uncoupled_equilibrium(&self, n: usize) -> DVector<f64> {
        let (influx, decay, _) = self.parameters();
        DVector::from_element(n, influx / decay)
    }
}

pub fn derivative(model: &DynamicsModel, net: &Network, x: &DVector<f64>) -> Result<DVector<f64>> {
    Error::check_len(net.n(), x.len())?;
    let mut out = DVector::zeros(x.len());
    model.derivative_into(net, x.as_slice(), out.as_mut_slice());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub model: Option<DynamicsModel>,
    pub seed: Option<u64>,
    pub step: f64,
}

/// States `x(t_k)` on a time grid; row `k` of `states` is the state at `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: DMatrix<f64>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: DMatrix<f64>, meta: TrajectoryMeta) -> Result<Self> {
        Error::check_len(times.len(), states.nrows())?;
        if times.first().is_some_and(|&t| t != 0.0) {
            return Err(Error::Grid(format!(
                "trajectory must start at t = 0, got {}",
                times[0]
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid(
                "trajectory times must be strictly increasing".into(),
            ));
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter(
                "trajectory contains non-finite states".into(),
            ));
        }
        Ok(Trajectory {
            times,
            states,
            meta,
        })
    }

    pub fn n(&self) -> usize {
        self.states.ncols()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> DVector<f64> {
        self.states.row(k).transpose()
    }

    pub fn final_state(&self) -> DVector<f64> {
        self.state(self.len() - 1)
    }
}

/// Classical RK4 stepper that reuses its stage buffers.
struct Rk4<'a> {
    model: &'a DynamicsModel,
    net: &'a Network,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl<'a> Rk4<'a> {
    fn new(model: &'a DynamicsModel, net: &'a Network) -> Self {
        let n = net.n();
        Rk4 {
            model,
            net,
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn step(&mut self, x: &mut [f64], h: f64) {
        let (model, net) = (self.model, self.net);
        model.derivative_into(net, x, &mut self.k1);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        model.derivative_into(net, &self.tmp, &mut self.k2);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        model.derivative_into(net, &self.tmp, &mut self.k3);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        model.derivative_into(net, &self.tmp, &mut self.k4);
        for i in 0..x.len() {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn output_count(step: f64, horizon: f64) -> Result<usize> {
    if !(step > 0.0 && step.is_finite()) || !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Parameter(format!(
            "step and horizon must be positive and finite (step = {step}, horizon = {horizon})"
        )));
    }
    if step > horizon {
        return Err(Error::Parameter(format!(
            "step {step} exceeds horizon {horizon}"
        )));
    }
    Ok((horizon / step * (1.0 + 1e-12)).floor() as usize + 1)
}

/// Integrates from `x0` with RK4, taking `substeps` internal steps per output
/// interval, and hands every output state (including `t = 0`) to `observe`.
pub fn integrate_observed(
    model: &DynamicsModel,
    net: &Network,
    x0: &DVector<f64>,
    step: f64,
    horizon: f64,
    substeps: usize,
    mut observe: impl FnMut(usize, f64, &[f64]),
) -> Result<usize> {
    Error::check_len(net.n(), x0.len())?;
    let count = output_count(step, horizon)?;
    let substeps = substeps.max(1);
    let h = step / substeps as f64;
    let mut x = x0.as_slice().to_vec();
    let mut rk = Rk4::new(model, net);
    observe(0, 0.0, &x);
    for k in 1..count {
        for _ in 0..substeps {
            rk.step(&mut x, h);
        }
        let t = k as f64 * step;
        if x.iter().any(|v| !(v.abs() <= DIVERGENCE_LIMIT)) {
            return Err(Error::Divergence {
                time: t,
                limit: DIVERGENCE_LIMIT,
            });
        }
        observe(k, t, &x);
    }
    Ok(count)
}

/// Fixed-step RK4 trajectory on `0, step, 2 step, ..., <= horizon`.
pub fn integrate(
    model: &DynamicsModel,
    net: &Network,
    x0: &DVector<f64>,
    step: f64,
    horizon: f64,
) -> Result<Trajectory> {
    integrate_with_substeps(model, net, x0, step, horizon, 1)
}

/// RK4 substeps per output step so that `h |lambda|_max <= 0.05`.
pub fn substeps_for(step: f64, lambda_max: f64) -> usize {
    (step * lambda_max / 0.05).ceil().max(1.0) as usize
}

pub fn integrate_with_substeps(
    model: &DynamicsModel,
    net: &Network,
    x0: &DVector<f64>,
    step: f64,
    horizon: f64,
    substeps: usize,
) -> Result<Trajectory> {
    let count = output_count(step, horizon)?;
    let n = net.n();
    let mut states = DMatrix::zeros(count, n);
    let mut times = Vec::with_capacity(count);
    integrate_observed(model, net, x0, step, horizon, substeps, |k, t, x| {
        times.push(t);
        for (i, &v) in x.iter().enumerate() {
            states[(k, i)] = v;
        }
    })?;
    Trajectory::new(
        times,
        states,
        TrajectoryMeta {
            model: Some(*model),
            seed: None,
            step,
        },
    )
}

#[derive(Debug, Clone, Copy)]
pub struct EquilibriumOptions {
    /// Give up if the flow has not settled after this much model time.
    pub max_time: f64,
    pub max_newton_iterations: usize,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            max_time: 1e5,
            max_newton_iterations: 50,
        }
    }
}

fn gershgorin_radius(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn find_equilibrium(
    model: &DynamicsModel,
    net: &Network,
    x0: &DVector<f64>,
) -> Result<DVector<f64>> {
    find_equilibrium_with(model, net, x0, EquilibriumOptions::default())
}

/// Integrates until `||f(x)||_2 < 1e-10 n`, then polishes with Newton until
/// `||f(x)||_inf < 1e-13`.
pub fn find_equilibrium_with(
    model: &DynamicsModel,
    net: &Network,
    x0: &DVector<f64>,
    options: EquilibriumOptions,
) -> Result<DVector<f64>> {
    let n = net.n();
    Error::check_len(n, x0.len())?;
    let mut x = x0.as_slice().to_vec();
    let mut f = vec![0.0; n];
    let settle_tol = 1e-10 * n as f64;
    let mut t = 0.0;
    let mut rk = Rk4::new(model, net);
    loop {
        model.derivative_into(net, &x, &mut f);
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::NonConvergence(format!("flow diverged near t = {t}")));
        }
        if norm < settle_tol {
            break;
        }
        if t > options.max_time {
            return Err(Error::NonConvergence(format!(
                "||f(x)||_2 = {norm:e} after t = {t}; the system may not be Lyapunov stable"
            )));
        }
        let radius = gershgorin_radius(&model.jacobian_matrix(net, &x)).max(1e-3);
        let h = (0.1 / radius).min(1.0);
        for _ in 0..200 {
            rk.step(&mut x, h);
        }
        t += 200.0 * h;
        if x.iter().any(|v| !(v.abs() <= DIVERGENCE_LIMIT)) {
            return Err(Error::Divergence {
                time: t,
                limit: DIVERGENCE_LIMIT,
            });
        }
    }

    let mut xv = DVector::from_vec(x);
    for _ in 0..options.max_newton_iterations {
        let fv = derivative(model, net, &xv)?;
        if fv.amax() < 1e-13 {
            return Ok(xv);
        }
        let jac = model.jacobian_matrix(net, xv.as_slice());
        let delta = jac.lu().solve(&fv).ok_or_else(|| {
            Error::NonConvergence("singular Jacobian during Newton refinement".into())
        })?;
        xv -= delta;
    }
    let residual = derivative(model, net, &xv)?.amax();
    if residual < 1e-13 {
        Ok(xv)
    } else {
        Err(Error::NonConvergence(format!(
            "Newton refinement stalled at ||f(x)||_inf = {residual:e}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub equilibrium: Vec<f64>,
    pub max_real_eigenvalue: f64,
    pub stable: bool,
    pub spectral_margin: f64,
}

/// Spectral certificate: stable iff every Jacobian eigenvalue has real part
/// `<= STABILITY_TOLERANCE`.
pub fn check_stability(
    model: &DynamicsModel,
    net: &Network,
    equilibrium: &DVector<f64>,
) -> Result<StabilityReport> {
    Error::check_len(net.n(), equilibrium.len())?;
    let jac = model.jacobian_matrix(net, equilibrium.as_slice());
    let max_real = linalg::eigenvalues(&jac)?
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let stable = max_real <= STABILITY_TOLERANCE;
    if stable && max_real.abs() <= STABILITY_TOLERANCE {
        log::warn!("equilibrium is marginally stable (max Re(lambda) = {max_real:e})");
    }
    Ok(StabilityReport {
        equilibrium: equilibrium.as_slice().to_vec(),
        max_real_eigenvalue: max_real,
        stable,
        spectral_margin: -max_real,
    })
}

/// Ranges for randomly configured model parameters.
///
/// `coupling` is relative: the drawn `u` is turned into `R` by dividing out
/// the decay rate and the adjacency spectral radius, so `u < 1` keeps PD
/// stable regardless of network density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterRanges {
    pub influx: (f64, f64),
    pub decay: (f64, f64),
    pub coupling: (f64, f64),
}

impl Default for ParameterRanges {
    fn default() -> Self {
        ParameterRanges {
            influx: (0.5, 1.5),
            decay: (1.0, 2.0),
            coupling: (0.3, 0.7),
        }
    }
}

/// A model instance that passed the stability gate, with its equilibrium.
#[derive(Debug, Clone)]
pub struct StableInstance {
    pub model: DynamicsModel,
    pub equilibrium: DVector<f64>,
    pub report: StabilityReport,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Locates the equilibrium of `model` and certifies it.
pub fn stable_instance(model: DynamicsModel, net: &Network) -> Result<StableInstance> {
    let start = model.uncoupled_equilibrium(net.n());
    let equilibrium = find_equilibrium(&model, net, &start)?;
    let report = check_stability(&model, net, &equilibrium)?;
    if !report.stable {
        return Err(Error::Unstable {
            max_real: report.max_real_eigenvalue,
        });
    }
    Ok(StableInstance {
        model,
        equilibrium,
        report,
    })
}

/// Draws parameters uniformly from `ranges`, halving the coupling until the
/// instance has a stable equilibrium.
pub fn sample_stable_model(
    kind: ModelKind,
    net: &Network,
    ranges: &ParameterRanges,
    seed: u64,
) -> Result<StableInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let decay = uniform(&mut rng, ranges.decay);
    let influx = uniform(&mut rng, ranges.influx);
    let u = uniform(&mut rng, ranges.coupling);
    let radius = linalg::eigenvalues(net.adjacency())?
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let (model, coupling) = match kind {
        ModelKind::Pd => (DynamicsModel::pd(decay, 0.0)?, u * decay / radius),
        // x ~ F/B at the uncoupled point, so R x rho / B ~ u
        ModelKind::Mak => (
            DynamicsModel::mak(influx, decay, 0.0)?,
            u * decay * decay / (radius * influx.max(1e-12)),
        ),
    };
    let mut coupling = coupling;
    let mut last_err = None;
    for _ in 0..40 {
        match stable_instance(model.with_coupling(coupling), net) {
            Ok(instance) => return Ok(instance),
            Err(e) => last_err = Some(e),
        }
        coupling *= 0.5;
    }
    Err(last_err.unwrap_or_else(|| Error::NonConvergence("no stable parameter draw".into())))
}
