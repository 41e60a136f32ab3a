//! Greedy choice of the sampling node set and the snapshot reconstruction
//! operator `Phi = Gamma_{V,N} pinv(Gamma_{S,N})`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::spectral::{real_part_checked, BandSpec, SpectralBasis};

/// Smallest admissible `sigma_min(Gamma_{S,N})`.
pub const MIN_RANK_CERTIFICATE: f64 = 1e-9;

/// Candidates within this relative margin of the best are treated as ties.
const TIE_TOLERANCE: f64 = 1e-12;

/// A node set together with `sigma_min(Gamma_{S,N})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub nodes: Vec<usize>,
    pub certificate: f64,
}

/// `Gamma_{V,N}`: the eigenvector columns listed in `band`.
pub fn band_columns(basis: &SpectralBasis, band: &BandSpec) -> Result<DMatrix<Complex64>> {
    let n = basis.n();
    if let Some(&j) = band.indices.iter().find(|&&j| j >= n) {
        return Err(Error::Parameter(format!(
            "band index {j} out of range for n = {n}"
        )));
    }
    Ok(basis.basis().select_columns(&band.indices))
}

fn check_nodes(nodes: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in nodes {
        if i >= n {
            return Err(Error::Parameter(format!(
                "node {i} out of range for n = {n}"
            )));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::Parameter(format!("node {i} listed twice")));
        }
    }
    Ok(())
}

/// `sigma_min(Gamma_{S,N})`, over the `min(|S|, |N|)` singular values.
pub fn certify(basis: &SpectralBasis, band: &BandSpec, nodes: &[usize]) -> Result<f64> {
    check_nodes(nodes, basis.n())?;
    if nodes.is_empty() || band.is_empty() {
        return Ok(0.0);
    }
    let gamma = band_columns(basis, band)?.select_rows(nodes);
    linalg::smallest_singular_value(&gamma)
}

// Smallest eigenvalue of diag(d) + z z^H, d ascending.
fn rank_one_min(d: &[f64], z: impl Fn(usize) -> f64) -> f64 {
    let k = d.len();
    let znorm: f64 = (0..k).map(&z).sum();
    let mut lo = d[0];
    let mut hi = d[0] + znorm;
    if k > 1 {
        hi = hi.min(d[1]);
    }
    let f = |mu: f64| 1.0 + (0..k).map(|i| z(i) / (d[i] - mu)).sum::<f64>();
    bisect(&mut lo, &mut hi, |mu| f(mu) < 0.0);
    hi.max(0.0)
}

// Smallest eigenvalue of [[diag(d), w], [w^H, c]], d ascending.
fn bordered_min(d: &[f64], w: impl Fn(usize) -> f64, c: f64) -> f64 {
    let s = d.len();
    if s == 0 {
        return c;
    }
    if d[0] <= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = d[0].min(c);
    let g = |mu: f64| c - mu - (0..s).map(|i| w(i) / (d[i] - mu)).sum::<f64>();
    bisect(&mut lo, &mut hi, |mu| g(mu) > 0.0);
    lo.max(0.0)
}

// Shrinks [lo, hi] keeping `below(lo)` true and `below(hi)` false.
fn bisect(lo: &mut f64, hi: &mut f64, below: impl Fn(f64) -> bool) {
    for _ in 0..200 {
        let mid = 0.5 * (*lo + *hi);
        if mid <= *lo || mid >= *hi || *hi - *lo <= 1e-16 * hi.abs() {
            break;
        }
        if below(mid) {
            *lo = mid;
        } else {
            *hi = mid;
        }
    }
}

/// Greedy row order: each step adds the node maximizing the smallest singular
/// value of the grown `Gamma_{S,N}`, lowest index on ties.
///
/// A prefix of the order of length `s` is exactly the greedy selection of size
/// `s`, so one call serves every smaller size.
pub fn greedy_order(basis: &SpectralBasis, band: &BandSpec, size: usize) -> Result<Vec<usize>> {
    let n = basis.n();
    if band.is_empty() {
        return Err(Error::Parameter(
            "cannot select samples for an empty band".into(),
        ));
    }
    if size == 0 || size > n {
        return Err(Error::Parameter(format!(
            "sample size must be in 1..={n}, got {size}"
        )));
    }
    let gamma = band_columns(basis, band)?;
    let k = gamma.ncols();
    let row_norms: Vec<f64> = (0..n)
        .map(|i| gamma.row(i).iter().map(|c| c.norm_sqr()).sum())
        .collect();
    let gamma_h = gamma.adjoint();
    let mut chosen: Vec<usize> = Vec::with_capacity(size);
    let mut taken = vec![false; n];

    while chosen.len() < size {
        let s = chosen.len();
        let gs = gamma.select_rows(&chosen);
        let scores: Vec<f64> = if s == 0 {
            row_norms.clone()
        } else if s < k {
            // Row Gram G_S G_S^H bordered by the candidate row.
            let (d, u) = linalg::hermitian_eigen(&(&gs * gs.adjoint()))?;
            let w = u.adjoint() * (&gs * &gamma_h);
            (0..n)
                .map(|i| bordered_min(&d, |r| w[(r, i)].norm_sqr(), row_norms[i]))
                .collect()
        } else {
            // Column Gram G_S^H G_S plus the candidate's rank-one term.
            let (d, v) = linalg::hermitian_eigen(&(gs.adjoint() * &gs))?;
            let z = v.adjoint() * &gamma_h;
            (0..n)
                .map(|i| rank_one_min(&d, |r| z[(r, i)].norm_sqr()))
                .collect()
        };
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| !taken[i]) {
            let score = scores[i].max(0.0).sqrt();
            match best {
                Some((_, b)) if score <= b * (1.0 + TIE_TOLERANCE) => {}
                _ => best = Some((i, score)),
            }
        }
        let (i, _) = best.expect("size <= n leaves a candidate");
        taken[i] = true;
        chosen.push(i);
    }
    Ok(chosen)
}

/// Greedy sampling set of `size` nodes for `band`, certified by a full SVD.
///
/// `size < |band|` is accepted (the set can then only reach row rank `size`);
/// callers that need exact recovery check `size >= |band|`.
pub fn select_sampling_set(
    basis: &SpectralBasis,
    band: &BandSpec,
    size: usize,
) -> Result<Selection> {
    let nodes = greedy_order(basis, band, size)?;
    let certificate = certify(basis, band, &nodes)?;
    if !(certificate > MIN_RANK_CERTIFICATE) {
        return Err(Error::InfeasibleBand(format!(
            "no {size}-node set reaches rank {} (best certificate {certificate:e})",
            size.min(band.len())
        )));
    }
    Ok(Selection { nodes, certificate })
}

/// Exhaustive search for the subset of `size` nodes with the largest
/// certificate. Exponential; meant for small `n` as a reference.
pub fn brute_force_selection(
    basis: &SpectralBasis,
    band: &BandSpec,
    size: usize,
) -> Result<Option<Selection>> {
    let n = basis.n();
    if n > 20 {
        return Err(Error::Parameter(format!(
            "exhaustive selection refused for n = {n} > 20"
        )));
    }
    if size == 0 || size > n {
        return Err(Error::Parameter(format!(
            "sample size must be in 1..={n}, got {size}"
        )));
    }
    let mut best: Option<Selection> = None;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != size {
            continue;
        }
        let nodes: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let certificate = certify(basis, band, &nodes)?;
        if best.as_ref().is_none_or(|b| certificate > b.certificate) {
            best = Some(Selection { nodes, certificate });
        }
    }
    Ok(best.filter(|b| b.certificate > MIN_RANK_CERTIFICATE))
}

/// `Phi = Gamma_{V,N} pinv(Gamma_{S,N})`, an `n x |S|` real matrix.
pub fn reconstruction_matrix(
    basis: &SpectralBasis,
    nodes: &[usize],
    band: &BandSpec,
) -> Result<DMatrix<f64>> {
    let certificate = certify(basis, band, nodes)?;
    if !(certificate > MIN_RANK_CERTIFICATE) {
        return Err(Error::InfeasibleBand(format!(
            "Gamma_SN is rank deficient (certificate {certificate:e})"
        )));
    }
    let gamma = band_columns(basis, band)?;
    let pinv = linalg::pseudoinverse(&gamma.select_rows(nodes))?;
    let phi = &gamma * &pinv;
    // Scale of the summed products, so cancellation is not read as asymmetry.
    let terms = gamma.map(|g| g.norm()) * pinv.map(|g| g.norm());
    let flat = DVector::from_iterator(phi.len(), phi.iter().copied());
    let real = real_part_checked(&flat, 1e-9, terms.norm())?;
    Ok(DMatrix::from_iterator(
        phi.nrows(),
        phi.ncols(),
        real.iter().copied(),
    ))
}

pub fn recover_snapshot(phi: &DMatrix<f64>, y_s: &DVector<f64>) -> Result<DVector<f64>> {
    Error::check_len(phi.ncols(), y_s.len())?;
    Ok(phi * y_s)
}
