//! Time-domain cutoff frequencies and the closed-form Fourier transform of a
//! node signal.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{BandSpec, SpectralBasis};

/// Cutoff `Omega_c` in rad/s. `clamped` is set when `||y0|| / epsilon` is
/// smaller than the largest decay rate, so the square-root term was taken as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeCutoff {
    pub value: f64,
    pub clamped: bool,
}

impl TimeCutoff {
    /// Nyquist-type sampling frequency `Omega_c / pi` in Hz.
    pub fn sampling_frequency(&self) -> f64 {
        self.value / std::f64::consts::PI
    }
}

fn check_scales(y0_norm: f64, epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Parameter(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    if !(y0_norm >= 0.0 && y0_norm.is_finite()) {
        return Err(Error::Parameter(format!(
            "||y0|| must be finite and >= 0, got {y0_norm}"
        )));
    }
    Ok(())
}

fn cutoff_over(values: impl Iterator<Item = Complex64>, y0_norm: f64, epsilon: f64) -> TimeCutoff {
    let (mut max_imag, mut min_real) = (0.0f64, f64::INFINITY);
    for l in values {
        max_imag = max_imag.max(l.im.abs());
        min_real = min_real.min(l.re);
    }
    let ratio = y0_norm / epsilon;
    let radicand = ratio * ratio - min_real * min_real;
    TimeCutoff {
        value: max_imag + radicand.max(0.0).sqrt(),
        clamped: radicand < 0.0,
    }
}

/// `Omega_c = max|Im lambda| + sqrt(||y0||^2 / eps^2 - (min Re lambda)^2)` over
/// the band, the frequency past which every node spectrum stays below `epsilon`.
pub fn time_cutoff_bandlimited(
    basis: &SpectralBasis,
    band: &BandSpec,
    y0_norm: f64,
    epsilon: f64,
) -> Result<TimeCutoff> {
    check_scales(y0_norm, epsilon)?;
    if band.is_empty() {
        return Err(Error::Parameter("time cutoff needs a nonempty band".into()));
    }
    if let Some(&j) = band.indices.iter().find(|&&j| j >= basis.n()) {
        return Err(Error::Parameter(format!("band index {j} out of range")));
    }
    Ok(cutoff_over(
        band.indices.iter().map(|&j| basis.eigenvalue(j)),
        y0_norm,
        epsilon,
    ))
}

/// The same cutoff over the whole spectrum, valid for any initial state.
pub fn time_cutoff_arbitrary(
    basis: &SpectralBasis,
    y0_norm: f64,
    epsilon: f64,
) -> Result<TimeCutoff> {
    check_scales(y0_norm, epsilon)?;
    Ok(cutoff_over(
        basis.eigenvalues().iter().copied(),
        y0_norm,
        epsilon,
    ))
}

/// Geometric bound on the cutoff from the graph bandwidth alone:
/// `min(sqrt(w^2 - L^2), w sqrt(4 L^2 - w^2) / (2 L)) + ||y0|| / eps`, where a
/// branch with a negative radicand is dropped.
pub fn time_cutoff_upperbound(
    omega_c: f64,
    lambda_max: f64,
    y0_norm: f64,
    epsilon: f64,
) -> Result<f64> {
    check_scales(y0_norm, epsilon)?;
    if !(lambda_max > 0.0) || !(omega_c >= 0.0) {
        return Err(Error::Domain(format!(
            "bound needs |lambda|_max > 0 and omega_c >= 0 (got {lambda_max}, {omega_c})"
        )));
    }
    let l = lambda_max;
    let first = (omega_c >= l).then(|| (omega_c * omega_c - l * l).sqrt());
    let second = (omega_c <= 2.0 * l)
        .then(|| omega_c * (4.0 * l * l - omega_c * omega_c).sqrt() / (2.0 * l));
    let geometric = match (first, second) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => unreachable!("one of omega_c >= L, omega_c <= 2L always holds"),
    };
    Ok(geometric + y0_norm / epsilon)
}

/// `Y_n(Omega) = sum_j gamma_{n,j} c_j / (-Re lambda_j + i (Omega - Im lambda_j))`,
/// the Fourier transform of `y_n(t) = sum_j gamma_{n,j} c_j e^{lambda_j t}` on `t >= 0`.
pub fn analytic_fourier(
    basis: &SpectralBasis,
    coeffs: &DVector<Complex64>,
    band: &BandSpec,
    node: usize,
    omega: f64,
) -> Result<Complex64> {
    Error::check_len(basis.n(), coeffs.len())?;
    if node >= basis.n() {
        return Err(Error::Parameter(format!("node {node} out of range")));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for &j in &band.indices {
        let l = basis.eigenvalue(j);
        if l.re >= 0.0 {
            return Err(Error::DivergentTransform {
                index: j,
                real: l.re,
            });
        }
        sum += basis.basis()[(node, j)] * coeffs[j] / Complex64::new(-l.re, omega - l.im);
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{decompose, LinearOperator};
    use nalgebra::DMatrix;

    fn basis(a: DMatrix<f64>) -> SpectralBasis {
        let n = a.nrows();
        decompose(&LinearOperator::new(a, DVector::zeros(n)).unwrap()).unwrap()
    }

    fn all(b: &SpectralBasis) -> BandSpec {
        BandSpec {
            omega: None,
            indices: (0..b.n()).collect(),
        }
    }

    #[test]
    fn single_real_mode_cutoff() {
        let b = basis(DMatrix::from_element(1, 1, -1.0));
        let c = time_cutoff_bandlimited(&b, &all(&b), 1.0, 0.1).unwrap();
        assert!((c.value - 99f64.sqrt()).abs() < 1e-12);
        assert!(!c.clamped);
        assert_eq!(time_cutoff_arbitrary(&b, 1.0, 0.1).unwrap(), c);
    }

    #[test]
    fn clamp_when_epsilon_is_large() {
        // eigenvalues -1 +- 2i: max|Im| = 2, min Re = -1
        let b = basis(DMatrix::from_row_slice(2, 2, &[-1.0, -2.0, 2.0, -1.0]));
        let c = time_cutoff_bandlimited(&b, &all(&b), 1.0, 2.0).unwrap();
        assert!(c.clamped);
        assert!((c.value - 2.0).abs() < 1e-12);
        let c = time_cutoff_bandlimited(&b, &all(&b), 1.0, 0.1).unwrap();
        assert!((c.value - (2.0 + 99f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn cutoff_uses_band_eigenvalues_only() {
        let b = basis(DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -5.0])));
        let slow = BandSpec {
            omega: None,
            indices: vec![(0..2).find(|&j| b.eigenvalue(j).re > -2.0).unwrap()],
        };
        let c = time_cutoff_bandlimited(&b, &slow, 1.0, 0.1).unwrap();
        assert!((c.value - 99f64.sqrt()).abs() < 1e-12);
        let full = time_cutoff_arbitrary(&b, 1.0, 0.1).unwrap();
        assert!((full.value - 75f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cutoff_parameter_checks() {
        let b = basis(DMatrix::from_element(1, 1, -1.0));
        assert!(time_cutoff_bandlimited(
            &b,
            &BandSpec {
                omega: None,
                indices: vec![]
            },
            1.0,
            0.1
        )
        .is_err());
        assert!(time_cutoff_bandlimited(&b, &all(&b), 1.0, 0.0).is_err());
        assert!(time_cutoff_arbitrary(&b, -1.0, 0.1).is_err());
    }

    #[test]
    fn upper_bound_branches() {
        // omega_c = L: first branch is 0
        assert!((time_cutoff_upperbound(1.0, 1.0, 1.0, 0.1).unwrap() - 10.0).abs() < 1e-12);
        // omega_c = 2L: second branch is 0 and the minimum takes it
        assert!((time_cutoff_upperbound(2.0, 1.0, 1.0, 0.1).unwrap() - 10.0).abs() < 1e-12);
        // omega_c < L: only the second branch applies
        let w: f64 = 0.5;
        let want = w * (4.0 - w * w).sqrt() / 2.0 + 10.0;
        assert!((time_cutoff_upperbound(w, 1.0, 1.0, 0.1).unwrap() - want).abs() < 1e-12);
        // omega_c > 2L: only the first branch applies
        assert!(
            (time_cutoff_upperbound(3.0, 1.0, 1.0, 0.1).unwrap() - (8f64.sqrt() + 10.0)).abs()
                < 1e-12
        );
        assert!(matches!(
            time_cutoff_upperbound(1.0, 0.0, 1.0, 0.1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn fourier_of_single_decay() {
        let b = basis(DMatrix::from_element(1, 1, -1.0));
        let c = DVector::from_element(1, Complex64::new(1.0, 0.0));
        let y = analytic_fourier(&b, &c, &all(&b), 0, 0.0).unwrap();
        assert!((y - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let far = analytic_fourier(&b, &c, &all(&b), 0, 1e8).unwrap();
        assert!(far.norm() < 1e-7);
    }

    #[test]
    fn fourier_rejects_growing_modes() {
        let b = basis(DMatrix::from_element(1, 1, 0.5));
        let c = DVector::from_element(1, Complex64::new(1.0, 0.0));
        assert!(matches!(
            analytic_fourier(&b, &c, &all(&b), 0, 1.0),
            Err(Error::DivergentTransform { index: 0, .. })
        ));
    }
}
