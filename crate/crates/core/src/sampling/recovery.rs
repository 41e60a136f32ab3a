//! Sinc interpolation in time and joint time-graph recovery
//! `y_hat(t) = Phi Y_S Psi(t)`.
//!
//! With `u = F_s t`, the truncated Shannon series is
//! `sum_k y_k sinc(u - k) = sin(pi u) / pi * sum_k (-1)^k y_k / (u - k)`.
//! Points within [`SNAP_TOLERANCE`] of an integer `u` return the sample itself.
//! When the evaluation grid is uniform with `F_s dt = p / q` (small `q`), each
//! of the `q` phases is a discrete convolution with a fixed kernel and is done
//! by FFT.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

use super::SamplingPlan;

/// Distance in units of the sample spacing under which a time is on-grid.
pub const SNAP_TOLERANCE: f64 = 1e-9;

const MAX_PHASES: i64 = 64;

/// Samples `y_S(k / F_s)`, `k = 0..K`, of the deviation `y = x - x_inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub fs: f64,
    pub nodes: Vec<usize>,
    /// Row `k` holds the samples at `t = k / fs`, one column per node.
    pub values: DMatrix<f64>,
}

impl SampleRecord {
    pub fn new(fs: f64, nodes: Vec<usize>, values: DMatrix<f64>) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::Parameter(format!(
                "sampling frequency must be > 0, got {fs}"
            )));
        }
        Error::check_len(nodes.len(), values.ncols())?;
        if values.nrows() == 0 {
            return Err(Error::Grid("sample record is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter(
                "sample record has non-finite values".into(),
            ));
        }
        Ok(SampleRecord { fs, nodes, values })
    }

    /// Builds a record from explicit times, which must be `k / fs` for
    /// `fs = 1 / t_1` (within `1e-9` of the spacing).
    pub fn from_times(times: &[f64], nodes: Vec<usize>, values: DMatrix<f64>) -> Result<Self> {
        Error::check_len(times.len(), values.nrows())?;
        let fs = match times {
            [] => return Err(Error::Grid("sample record is empty".into())),
            [t0, ..] if *t0 != 0.0 => {
                return Err(Error::Grid(format!(
                    "samples must start at t = 0, got {t0}"
                )))
            }
            [_] => 1.0,
            [_, t1, ..] if *t1 > 0.0 => 1.0 / t1,
            _ => return Err(Error::Grid("sample times must increase".into())),
        };
        for (k, &t) in times.iter().enumerate() {
            if (t * fs - k as f64).abs() > 1e-9 * (k as f64).max(1.0) {
                return Err(Error::Grid(format!(
                    "sample {k} at t = {t} is off the uniform grid k / {fs}"
                )));
            }
        }
        SampleRecord::new(fs, nodes, values)
    }

    /// Picks the `nodes` columns of a trajectory taken at step `1 / fs`,
    /// shifted by `-equilibrium`.
    pub fn from_trajectory(
        traj: &Trajectory,
        nodes: &[usize],
        equilibrium: &DVector<f64>,
    ) -> Result<Self> {
        Error::check_len(traj.n(), equilibrium.len())?;
        if let Some(&i) = nodes.iter().find(|&&i| i >= traj.n()) {
            return Err(Error::Parameter(format!("node {i} out of range")));
        }
        let values = DMatrix::from_fn(traj.len(), nodes.len(), |k, c| {
            traj.states[(k, nodes[c])] - equilibrium[nodes[c]]
        });
        SampleRecord::from_times(&traj.times, nodes.to_vec(), values)
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| k as f64 / self.fs).collect()
    }
}

/// Truncated Shannon reconstruction of one sampled series at time `t`.
pub fn sinc_reconstruct(samples: &[f64], fs: f64, t: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Grid("no samples to interpolate".into()));
    }
    let values = DMatrix::from_column_slice(samples.len(), 1, samples);
    Ok(interpolate_direct(&values, fs, &[t])?[(0, 0)])
}

fn check_interpolation(values: &DMatrix<f64>, fs: f64, times: &[f64]) -> Result<()> {
    if values.nrows() == 0 {
        return Err(Error::Grid("no samples to interpolate".into()));
    }
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::Parameter(format!(
            "sampling frequency must be > 0, got {fs}"
        )));
    }
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return Err(Error::Parameter(format!(
            "evaluation time {t} is not finite"
        )));
    }
    Ok(())
}

/// Sinc interpolation of every column of `values` (rows on `k / fs`) at
/// `times`, one output row per time, by direct summation.
pub fn interpolate_direct(values: &DMatrix<f64>, fs: f64, times: &[f64]) -> Result<DMatrix<f64>> {
    check_interpolation(values, fs, times)?;
    let (count, channels) = values.shape();
    let mut out = DMatrix::zeros(times.len(), channels);
    let mut weights = vec![0.0; count];
    for (m, &t) in times.iter().enumerate() {
        let u = fs * t;
        let nearest = u.round();
        if (u - nearest).abs() <= SNAP_TOLERANCE {
            if nearest >= 0.0 && nearest < count as f64 {
                out.row_mut(m).copy_from(&values.row(nearest as usize));
            }
            continue;
        }
        // sin(pi u) from the fractional part keeps full accuracy for large u.
        let floor = u.floor();
        let sign = if floor.rem_euclid(2.0) == 0.0 {
            1.0
        } else {
            -1.0
        };
        let scale = sign * (PI * (u - floor)).sin() / PI;
        for (k, w) in weights.iter_mut().enumerate() {
            let alt = if k % 2 == 0 { 1.0 } else { -1.0 };
            *w = scale * alt / (u - k as f64);
        }
        for c in 0..channels {
            let column = values.column(c);
            out[(m, c)] = weights.iter().zip(column.iter()).map(|(w, v)| w * v).sum();
        }
    }
    Ok(out)
}

/// `times = t0 + m dt` with `fs dt = p / q` and `fs t0 = n0 / q`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RationalGrid {
    n0: i64,
    p: i64,
    q: i64,
}

fn rational_grid(fs: f64, times: &[f64]) -> Option<RationalGrid> {
    let (&t0, &t1) = (times.first()?, times.get(1)?);
    let m_max = (times.len() - 1) as f64;
    let dt = (times[times.len() - 1] - t0) / m_max;
    if !(dt > 0.0) || (t1 - t0 - dt).abs() > 1e-9 * dt {
        return None;
    }
    let ratio = fs * dt;
    let u0 = fs * t0;
    for q in 1..=MAX_PHASES {
        let p = (ratio * q as f64).round();
        let n0 = (u0 * q as f64).round();
        // the rational model must hold to the snap tolerance over the whole grid
        if p < 1.0
            || (ratio - p / q as f64).abs() * m_max > 0.1 * SNAP_TOLERANCE
            || (u0 - n0 / q as f64).abs() > 0.1 * SNAP_TOLERANCE
        {
            continue;
        }
        let grid = RationalGrid {
            n0: n0 as i64,
            p: p as i64,
            q,
        };
        let uniform = times.iter().enumerate().all(|(m, &t)| {
            let u = (grid.n0 + m as i64 * grid.p) as f64 / q as f64;
            (fs * t - u).abs() <= SNAP_TOLERANCE
        });
        return uniform.then_some(grid);
    }
    None
}

/// Per-phase FFT convolution on a rational grid. Phase 0 copies samples.
fn interpolate_rational(values: &DMatrix<f64>, grid: RationalGrid, m_count: usize) -> DMatrix<f64> {
    let (count, channels) = values.shape();
    let k = count as i64;
    let q = grid.q;
    let mut out = DMatrix::zeros(m_count, channels);
    let position = |m: usize| {
        let a = grid.n0 + m as i64 * grid.p;
        (a.div_euclid(q), a.rem_euclid(q))
    };
    let mut r_range = (i64::MAX, i64::MIN);
    for m in 0..m_count {
        let (r, phase) = position(m);
        if phase == 0 {
            if (0..k).contains(&r) {
                out.row_mut(m).copy_from(&values.row(r as usize));
            }
        } else {
            r_range = (r_range.0.min(r), r_range.1.max(r));
        }
    }
    if r_range.0 > r_range.1 {
        return out;
    }
    // c_phase[r] = sum_k y_k h_phase[r - k], h_phase[j] = sinc(j + phase / q)
    let j_min = r_range.0 - (k - 1);
    let kernel_len = (r_range.1 - j_min + 1) as usize;
    let size = (count + kernel_len - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);

    let spectra: Vec<Vec<Complex64>> = (0..channels)
        .map(|c| {
            let mut buf = vec![Complex64::new(0.0, 0.0); size];
            for (i, v) in values.column(c).iter().enumerate() {
                buf[i].re = *v;
            }
            forward.process(&mut buf);
            buf
        })
        .collect();

    let mut rows_by_phase: Vec<Vec<(usize, i64)>> = vec![Vec::new(); q as usize];
    for m in 0..m_count {
        let (r, phase) = position(m);
        if phase != 0 {
            rows_by_phase[phase as usize].push((m, r));
        }
    }
    let norm = 1.0 / size as f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for (phase, rows) in rows_by_phase.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let shift = phase as f64 / q as f64;
        let amplitude = (PI * shift).sin() / PI;
        let mut kernel = vec![Complex64::new(0.0, 0.0); size];
        for (i, h) in kernel.iter_mut().take(kernel_len).enumerate() {
            let j = j_min + i as i64;
            let alt = if j.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            h.re = alt * amplitude / (j as f64 + shift);
        }
        forward.process(&mut kernel);
        for (c, spectrum) in spectra.iter().enumerate() {
            for ((b, s), h) in buf.iter_mut().zip(spectrum).zip(&kernel) {
                *b = s * h;
            }
            inverse.process(&mut buf);
            for &(m, r) in rows {
                out[(m, c)] = buf[(r - j_min) as usize].re * norm;
            }
        }
    }
    out
}

/// Sinc interpolation of every column of `values`; picks the FFT path on
/// rational uniform grids when that is cheaper than direct summation.
pub fn interpolate(values: &DMatrix<f64>, fs: f64, times: &[f64]) -> Result<DMatrix<f64>> {
    check_interpolation(values, fs, times)?;
    let direct_cost = times.len().saturating_mul(values.nrows());
    if direct_cost > 1 << 20 {
        if let Some(grid) = rational_grid(fs, times) {
            return Ok(interpolate_rational(values, grid, times.len()));
        }
    }
    interpolate_direct(values, fs, times)
}

/// Forces the FFT path; `None` when `times` is not a rational uniform grid.
pub fn interpolate_fft(
    values: &DMatrix<f64>,
    fs: f64,
    times: &[f64],
) -> Result<Option<DMatrix<f64>>> {
    check_interpolation(values, fs, times)?;
    Ok(rational_grid(fs, times).map(|grid| interpolate_rational(values, grid, times.len())))
}

/// `Phi = left * right` with as few inner channels as `Phi` has rank, so time
/// interpolation runs on `rank(Phi)` series instead of `|S|`.
#[derive(Debug, Clone)]
pub struct PhiFactors {
    left: DMatrix<f64>,
    right: DMatrix<f64>,
}

impl PhiFactors {
    pub fn new(phi: &DMatrix<f64>) -> Self {
        let (n, s) = phi.shape();
        if s <= 1 || n == 0 {
            return PhiFactors {
                left: phi.clone(),
                right: DMatrix::identity(s, s),
            };
        }
        let svd = phi.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&v| v > 1e-13 * smax)
            .count();
        if rank >= s {
            return PhiFactors {
                left: phi.clone(),
                right: DMatrix::identity(s, s),
            };
        }
        let u = svd.u.expect("requested");
        let v_t = svd.v_t.expect("requested");
        let mut left = DMatrix::zeros(n, rank);
        let mut right = DMatrix::zeros(rank, s);
        for (col, (i, _)) in svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 1e-13 * smax)
            .enumerate()
        {
            left.set_column(col, &(u.column(i) * svd.singular_values[i]));
            right.set_row(col, &v_t.row(i));
        }
        PhiFactors { left, right }
    }

    pub fn channels(&self) -> usize {
        self.right.nrows()
    }

    /// Time series of the inner channels, `Y_S right^T`.
    pub fn reduce(&self, y_s: &DMatrix<f64>) -> DMatrix<f64> {
        y_s * self.right.transpose()
    }

    pub fn left(&self) -> &DMatrix<f64> {
        &self.left
    }
}

fn check_record(plan: &SamplingPlan, record: &SampleRecord) -> Result<()> {
    if plan.nodes != record.nodes {
        return Err(Error::Grid(format!(
            "record samples nodes {:?} but the plan expects {:?}",
            record.nodes, plan.nodes
        )));
    }
    Ok(())
}

/// Joint recovery in the deviation domain: row `m` is `y_hat(eval_times[m])`.
pub fn joint_recover(
    plan: &SamplingPlan,
    record: &SampleRecord,
    eval_times: &[f64],
) -> Result<DMatrix<f64>> {
    check_record(plan, record)?;
    let factors = PhiFactors::new(&plan.phi);
    let z = interpolate(&factors.reduce(&record.values), record.fs, eval_times)?;
    Ok(z * factors.left().transpose())
}

/// Joint recovery of the state `x_hat = x_inf + y_hat`.
pub fn joint_recover_state(
    plan: &SamplingPlan,
    record: &SampleRecord,
    eval_times: &[f64],
) -> Result<DMatrix<f64>> {
    let mut x = joint_recover(plan, record, eval_times)?;
    Error::check_len(x.ncols(), plan.equilibrium.len())?;
    for mut row in x.row_iter_mut() {
        for (v, e) in row.iter_mut().zip(plan.equilibrium.iter()) {
            *v += e;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn damped(t: f64) -> f64 {
        (-0.3 * t).exp() * (1.7 * t).cos() + 0.5 * (-0.8 * t).exp()
    }

    #[test]
    fn on_grid_returns_samples() {
        let s = [1.0, -2.0, 3.5, 0.25];
        for (k, &v) in s.iter().enumerate() {
            assert_eq!(sinc_reconstruct(&s, 2.0, k as f64 / 2.0).unwrap(), v);
        }
        assert_eq!(sinc_reconstruct(&s, 2.0, 10.0).unwrap(), 0.0);
        assert!(sinc_reconstruct(&[], 1.0, 0.3).is_err());
    }

    #[test]
    fn zero_samples_give_zero() {
        assert_eq!(sinc_reconstruct(&[0.0; 7], 3.0, 0.77).unwrap(), 0.0);
    }

    #[test]
    fn single_sample_is_a_sinc() {
        let u: f64 = 0.3;
        let want = (PI * u).sin() / (PI * u);
        assert!((sinc_reconstruct(&[1.0], 1.0, u).unwrap() - want).abs() < 1e-15);
        let far = 1e6 + 0.5;
        let want = (PI * far).sin() / (PI * far);
        assert!((sinc_reconstruct(&[1.0], 1.0, far).unwrap() - want).abs() < 1e-18);
    }

    #[test]
    fn damped_signal_midpoints() {
        // |Y(Omega)| ~ 1 / Omega; a cutoff near 200 rad/s keeps the tail tiny
        let omega_c = 200.0;
        let fs = 4.0 * omega_c / PI;
        let horizon = 60.0;
        let count = (horizon * fs) as usize;
        let samples: Vec<f64> = (0..count).map(|k| damped(k as f64 / fs)).collect();
        let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for &t in &[5.0 + 0.5 / fs, 12.3, 20.0 + 0.25 / fs, 30.0 + 0.5 / fs] {
            let err = (sinc_reconstruct(&samples, fs, t).unwrap() - damped(t)).abs();
            assert!(err < 1e-3 * peak, "t = {t}: {err}");
        }
    }

    #[test]
    fn fft_path_matches_direct() {
        let fs = 3.0;
        let count = 200;
        let values = DMatrix::from_fn(count, 3, |k, c| damped(k as f64 / fs + c as f64));
        for (p, q) in [(1, 4), (3, 8), (5, 3), (2, 1)] {
            let dt = p as f64 / q as f64 / fs;
            let times: Vec<f64> = (0..260).map(|m| m as f64 * dt).collect();
            let fast = interpolate_fft(&values, fs, &times)
                .unwrap()
                .expect("rational grid");
            let slow = interpolate_direct(&values, fs, &times).unwrap();
            assert!((fast - slow).amax() < 1e-12, "p/q = {p}/{q}");
        }
        let irrational: Vec<f64> = (0..50).map(|m| m as f64 * 0.1 * 2f64.sqrt()).collect();
        assert!(interpolate_fft(&values, fs, &irrational).unwrap().is_none());
    }

    #[test]
    fn fft_path_with_offset_start() {
        let fs = 2.0;
        let values = DMatrix::from_fn(64, 1, |k, _| damped(k as f64 / fs));
        let times: Vec<f64> = (0..80).map(|m| 0.125 + m as f64 * 0.25).collect();
        let fast = interpolate_fft(&values, fs, &times).unwrap().unwrap();
        let slow = interpolate_direct(&values, fs, &times).unwrap();
        assert!((fast - slow).amax() < 1e-12);
    }

    #[test]
    fn record_grid_checks() {
        let v = DMatrix::zeros(3, 1);
        let r = SampleRecord::from_times(&[0.0, 0.5, 1.0], vec![4], v.clone()).unwrap();
        assert_eq!(r.fs, 2.0);
        assert_eq!(r.times(), vec![0.0, 0.5, 1.0]);
        assert!(matches!(
            SampleRecord::from_times(&[0.0, 0.5, 1.2], vec![4], v.clone()),
            Err(Error::Grid(_))
        ));
        assert!(matches!(
            SampleRecord::from_times(&[0.1, 0.5, 1.0], vec![4], v),
            Err(Error::Grid(_))
        ));
        assert!(matches!(
            SampleRecord::new(1.0, vec![0], DMatrix::zeros(0, 1)),
            Err(Error::Grid(_))
        ));
    }

    #[test]
    fn factors_reproduce_phi() {
        let phi = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        let f = PhiFactors::new(&phi);
        assert_eq!(f.channels(), 2);
        assert!((f.left() * &f.right - &phi).amax() < 1e-13);
        let full = PhiFactors::new(&DMatrix::identity(3, 3));
        assert_eq!(full.channels(), 3);
    }
}
