//! Single-block deterministic MCD: two initial estimators, concentration
//! steps, the consistency-scaled raw estimate, and reweighting.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, LocationScatter};
use crate::matrix::{canonical_order, DataMatrix};
use crate::scale::{mad, median};
use crate::special::{chi2_cdf, chi2_quantile};

/// Maximum number of C-steps per start.
pub const MAX_CSTEPS: usize = 100;

/// Chi-square probability defining inliers in the reweighting step.
pub const REWEIGHT_QUANTILE: f64 = 0.975;

/// Relative eigenvalue floor used to repair initial scatter estimates.
const START_EIGEN_FLOOR: f64 = 1e-8;

/// Sorted, distinct row indices into a data matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HSubset {
    indices: Vec<usize>,
}

impl HSubset {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidData("subset contains duplicate rows".into()));
        }
        if indices.last().is_some_and(|&i| i >= n) {
            return Err(Error::InvalidData(format!(
                "subset index out of range for {n} rows"
            )));
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn h(&self) -> usize {
        self.indices.len()
    }
}

/// Raw MCD estimate from one h-subset.
#[derive(Debug, Clone)]
pub struct RawEstimate {
    /// Location and `c_alpha`-scaled scatter.
    pub loc_scat: LocationScatter,
    pub subset: HSubset,
    /// ln of the determinant of the plain (unscaled) h-subset covariance.
    pub log_det_uncorrected: f64,
    pub c_alpha: f64,
}

impl RawEstimate {
    pub fn det_uncorrected(&self) -> f64 {
        self.log_det_uncorrected.exp()
    }
}

/// Subset size for trimming fraction `frac`: max(⌊(n+p+1)/2⌋, ⌊frac·n⌋), below n.
pub fn h_from_fraction(n: usize, p: usize, frac: f64) -> Result<usize> {
    if !(0.5..1.0).contains(&frac) {
        return Err(Error::DomainError(format!(
            "h fraction {frac} outside [0.5, 1)"
        )));
    }
    if n <= p + 1 {
        return Err(Error::TooFewObservations { n, p });
    }
    let h = (n + p).div_ceil(2).max((frac * n as f64).floor() as usize);
    Ok(h.min(n - 1))
}

/// c = q / F_{χ²_{p+2}}(χ²_{p,q}) for retained fraction q; 1 when nothing is trimmed.
pub fn consistency_factor_for_fraction(frac: f64, p: usize) -> f64 {
    if frac >= 1.0 {
        return 1.0;
    }
    let q = chi2_quantile(p as u32, frac).expect("fraction in (0, 1)");
    frac / chi2_cdf((p + 2) as f64, q)
}

pub fn consistency_factor(h: usize, n: usize, p: usize) -> f64 {
    consistency_factor_for_fraction(h as f64 / n as f64, p)
}

/// Mean and centered scatter (Σ (x−μ)(x−μ)ᵀ) of the listed rows, accumulated in list order.
pub(crate) fn subset_moments(
    z: &DataMatrix,
    rows: impl Iterator<Item = usize> + Clone,
) -> (usize, DVector<f64>, DMatrix<f64>) {
    let p = z.n_cols();
    let mut mean = DVector::<f64>::zeros(p);
    let mut count = 0usize;
    for i in rows.clone() {
        for (m, v) in mean.iter_mut().zip(z.row(i)) {
            *m += v;
        }
        count += 1;
    }
    mean /= count as f64;
    let mut scatter = DMatrix::<f64>::zeros(p, p);
    let mut d = vec![0.0; p];
    for i in rows {
        for ((dj, v), m) in d.iter_mut().zip(z.row(i)).zip(mean.iter()) {
            *dj = v - m;
        }
        for j in 0..p {
            for k in 0..=j {
                scatter[(j, k)] += d[j] * d[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            scatter[(k, j)] = scatter[(j, k)];
        }
    }
    (count, mean, scatter)
}

/// Mean and `c_alpha/(h−1)`-scaled covariance of the subset rows.
pub fn raw_from_subset(z: &DataMatrix, subset: &HSubset) -> Result<RawEstimate> {
    let (n, p, h) = (z.n_rows(), z.n_cols(), subset.h());
    if h <= p {
        return Err(Error::NotPositiveDefinite { pivot: h });
    }
    let c_alpha = consistency_factor(h, n, p);
    raw_with_factor(z, subset, c_alpha)
}

fn raw_with_factor(z: &DataMatrix, subset: &HSubset, c_alpha: f64) -> Result<RawEstimate> {
    let p = z.n_cols();
    let h = subset.h();
    let (_, mean, scatter) = subset_moments(z, subset.indices().iter().copied());
    let sigma = scatter * (c_alpha / (h - 1) as f64);
    let loc_scat = LocationScatter::new(mean, sigma)?;
    let log_det_uncorrected = loc_scat.log_det() - p as f64 * c_alpha.ln();
    Ok(RawEstimate {
        loc_scat,
        subset: subset.clone(),
        log_det_uncorrected,
        c_alpha,
    })
}

/// Indices of the `h` rows closest to `ls`; ties at rank h go to the lower index.
pub fn closest_rows(z: &DataMatrix, ls: &LocationScatter, h: usize) -> Vec<usize> {
    let mut dist: Vec<(f64, usize)> = z
        .rows()
        .enumerate()
        .map(|(i, r)| (ls.mahalanobis_sq(r), i))
        .collect();
    let h = h.min(dist.len());
    if h < dist.len() {
        dist.select_nth_unstable_by(h, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }
    let mut idx: Vec<usize> = dist[..h].iter().map(|&(_, i)| i).collect();
    idx.sort_unstable();
    idx
}

/// One concentration step: refit on the h rows closest to the current fit.
pub fn c_step(z: &DataMatrix, current: &RawEstimate) -> Result<RawEstimate> {
    let idx = closest_rows(z, &current.loc_scat, current.subset.h());
    let subset = HSubset { indices: idx };
    if subset == current.subset {
        return Ok(current.clone());
    }
    raw_with_factor(z, &subset, current.c_alpha)
}

/// Iterates C-steps from `initial` until the subset is a fixed point or
/// [`MAX_CSTEPS`] is reached. Returns the final estimate and the sequence of
/// ln det_uncorrected values visited.
pub fn concentrate(z: &DataMatrix, initial: HSubset) -> Result<(RawEstimate, Vec<f64>)> {
    let mut est = raw_from_subset(z, &initial)?;
    let mut trace = vec![est.log_det_uncorrected];
    for _ in 0..MAX_CSTEPS {
        let next = c_step(z, &est)?;
        if next.subset == est.subset {
            break;
        }
        trace.push(next.log_det_uncorrected);
        est = next;
    }
    Ok((est, trace))
}

/// Scatter start from a shape matrix: eigenvectors of `shape`, eigenvalues
/// replaced by squared MADs of the projected data, location from the
/// coordinate-wise median of the projections.
fn start_from_shape(
    z: &DataMatrix,
    shape: DMatrix<f64>,
    name: &'static str,
) -> Result<LocationScatter> {
    let p = z.n_cols();
    if shape.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateStart(name));
    }
    let eig = SymmetricEigen::new(shape);
    let e = eig.eigenvectors;
    let mut centers = DVector::<f64>::zeros(p);
    let mut lambdas = vec![0.0; p];
    for j in 0..p {
        let col = e.column(j);
        let mut proj: Vec<f64> = z
            .rows()
            .map(|r| r.iter().zip(col.iter()).map(|(a, b)| a * b).sum())
            .collect();
        let med = median(&mut proj);
        let s = mad(proj.into_iter(), med);
        centers[j] = med;
        lambdas[j] = s * s;
    }
    let largest = lambdas.iter().copied().fold(0.0_f64, f64::max);
    if !(largest > 0.0 && largest.is_finite()) {
        return Err(Error::DegenerateStart(name));
    }
    for l in lambdas.iter_mut() {
        *l = l.max(START_EIGEN_FLOOR * largest);
    }
    let mu = &e * centers;
    let mut sigma = &e * DMatrix::from_diagonal(&DVector::from_vec(lambdas)) * e.transpose();
    symmetrize(&mut sigma);
    LocationScatter::new(mu, sigma).map_err(|_| Error::DegenerateStart(name))
}

/// Spatial-sign covariance around the coordinate-wise median.
fn spatial_sign_shape(z: &DataMatrix, order: &[usize]) -> DMatrix<f64> {
    let p = z.n_cols();
    let offset: Vec<f64> = (0..p)
        .map(|j| median(&mut z.column(j).collect::<Vec<_>>()))
        .collect();
    let mut k = DMatrix::<f64>::zeros(p, p);
    let mut s = vec![0.0; p];
    for &i in order {
        let r = z.row(i);
        let mut norm2 = 0.0;
        for j in 0..p {
            s[j] = r[j] - offset[j];
            norm2 += s[j] * s[j];
        }
        if norm2 == 0.0 {
            continue;
        }
        for j in 0..p {
            for l in 0..=j {
                k[(j, l)] += s[j] * s[l] / norm2;
            }
        }
    }
    for j in 0..p {
        for l in 0..j {
            k[(l, j)] = k[(j, l)];
        }
    }
    k / z.n_rows() as f64
}

/// Pearson correlation of the entry-wise hyperbolic tangent.
fn tanh_correlation_shape(z: &DataMatrix, order: &[usize]) -> DMatrix<f64> {
    let y = z.map_entries(|_, v| v.tanh());
    let (_, _, scatter) = subset_moments(&y, order.iter().copied());
    let p = z.n_cols();
    DMatrix::from_fn(p, p, |j, k| {
        scatter[(j, k)] / (scatter[(j, j)] * scatter[(k, k)]).sqrt()
    })
}

fn start_candidates(z: &DataMatrix) -> [Result<LocationScatter>; 2] {
    // Shapes are computed on median/MAD-standardized columns and mapped back
    // with the column MADs, so both starts are equivariant under column scaling.
    let p = z.n_cols();
    let mut center = Vec::with_capacity(p);
    let mut scale = Vec::with_capacity(p);
    for j in 0..p {
        let mut col: Vec<f64> = z.column(j).collect();
        let med = median(&mut col);
        center.push(med);
        scale.push(mad(col.into_iter(), med));
    }
    if scale.iter().any(|s| !(*s > 0.0)) {
        return [
            Err(Error::DegenerateStart("spatial-sign")),
            Err(Error::DegenerateStart("tanh-correlation")),
        ];
    }
    let u = z.map_entries(|j, v| (v - center[j]) / scale[j]);
    let order = canonical_order(&u);
    let back = |ls: LocationScatter, name| -> Result<LocationScatter> {
        let mu = DVector::from_fn(p, |j, _| center[j] + scale[j] * ls.mu()[j]);
        let mut sigma = DMatrix::from_fn(p, p, |j, k| scale[j] * ls.sigma()[(j, k)] * scale[k]);
        symmetrize(&mut sigma);
        LocationScatter::new(mu, sigma).map_err(|_| Error::DegenerateStart(name))
    };
    [
        start_from_shape(&u, spatial_sign_shape(&u, &order), "spatial-sign")
            .and_then(|ls| back(ls, "spatial-sign")),
        start_from_shape(&u, tanh_correlation_shape(&u, &order), "tanh-correlation")
            .and_then(|ls| back(ls, "tanh-correlation")),
    ]
}

/// The two deterministic initial estimators: spatial-sign covariance (start A)
/// and hyperbolic-tangent correlation (start B).
pub fn initial_starts(z: &DataMatrix) -> Result<Vec<LocationScatter>> {
    let [a, b] = start_candidates(z);
    Ok(vec![a?, b?])
}

/// Result of [`detmcd_block_detailed`].
#[derive(Debug, Clone)]
pub struct DetMcdFit {
    pub estimate: RawEstimate,
    /// ln det_uncorrected along the C-step path of each start (None if the start failed).
    pub traces: [Option<Vec<f64>>; 2],
    /// 0 for start A, 1 for start B.
    pub chosen_start: usize,
}

pub fn detmcd_block(z: &DataMatrix, h: usize) -> Result<RawEstimate> {
    detmcd_block_detailed(z, h).map(|f| f.estimate)
}

/// Runs C-steps to convergence from both starts and keeps the lower determinant.
///
/// Rows are processed in canonical (lexicographic) order, so the estimate is
/// bit-identical under any permutation of `z`.
pub fn detmcd_block_detailed(z: &DataMatrix, h: usize) -> Result<DetMcdFit> {
    let (n, p) = (z.n_rows(), z.n_cols());
    if n <= 2 * p {
        return Err(Error::TooFewObservations { n, p });
    }
    if h <= p || h > n {
        return Err(Error::DomainError(format!(
            "subset size {h} must lie in ({p}, {n}]"
        )));
    }
    let order = canonical_order(z);
    let zc = z.select_rows(&order);

    let mut best: Option<(RawEstimate, usize)> = None;
    let mut traces: [Option<Vec<f64>>; 2] = [None, None];
    for (k, start) in start_candidates(&zc).into_iter().enumerate() {
        let Ok(start) = start else { continue };
        let initial = HSubset {
            indices: closest_rows(&zc, &start, h),
        };
        let Ok((est, trace)) = concentrate(&zc, initial) else {
            continue;
        };
        traces[k] = Some(trace);
        let better = match &best {
            None => true,
            Some((b, _)) => est.log_det_uncorrected < b.log_det_uncorrected,
        };
        if better {
            best = Some((est, k));
        }
    }
    let (mut estimate, chosen_start) = best.ok_or(Error::AllStartsDegenerate)?;
    let mut mapped: Vec<usize> = estimate.subset.indices.iter().map(|&i| order[i]).collect();
    mapped.sort_unstable();
    estimate.subset = HSubset { indices: mapped };
    Ok(DetMcdFit {
        estimate,
        traces,
        chosen_start,
    })
}

/// Reweighting: inliers are rows with RD² ≤ χ²_{p,0.975} under `raw`; returns
/// their mean and consistency-scaled covariance, plus the inlier flags.
pub fn reweight(z: &DataMatrix, raw: &LocationScatter) -> Result<(LocationScatter, Vec<bool>)> {
    let p = z.n_cols();
    if raw.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: raw.dim(),
        });
    }
    let cutoff = chi2_quantile(p as u32, REWEIGHT_QUANTILE)?;
    let weights: Vec<bool> = z.rows().map(|r| raw.mahalanobis_sq(r) <= cutoff).collect();
    let count = weights.iter().filter(|&&w| w).count();
    if count <= p {
        return Err(Error::TooFewInliers { count, p });
    }
    let inliers = canonical_order(z).into_iter().filter(|&i| weights[i]);
    let (m, mean, scatter) = subset_moments(z, inliers);
    let c = consistency_factor_for_fraction(REWEIGHT_QUANTILE, p);
    let ls = LocationScatter::new(mean, scatter * (c / (m - 1) as f64))?;
    Ok((ls, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{mvn_sample, Rng};

    fn std_normal(n: usize, p: usize, seed: u64) -> DataMatrix {
        let ls = LocationScatter::new(DVector::zeros(p), DMatrix::identity(p, p)).unwrap();
        mvn_sample(&mut Rng::new(seed), &ls, n).unwrap()
    }

    #[test]
    fn h_rule_examples() {
        assert_eq!(h_from_fraction(100, 5, 0.5).unwrap(), 53);
        assert_eq!(h_from_fraction(100, 5, 0.75).unwrap(), 75);
        assert!(matches!(
            h_from_fraction(6, 5, 0.5),
            Err(Error::TooFewObservations { .. })
        ));
        assert_eq!(h_from_fraction(7, 5, 0.5).unwrap(), 6);
        assert!(h_from_fraction(100, 5, 1.0).is_err());
    }

    #[test]
    fn consistency_factor_edges() {
        assert_eq!(consistency_factor(50, 50, 3), 1.0);
        let mut prev = f64::INFINITY;
        for k in 50..100 {
            let c = consistency_factor(k, 100, 5);
            assert!(c < prev && c > 1.0);
            prev = c;
        }
    }

    #[test]
    fn consistency_factor_monte_carlo() {
        // Trim N(0, I₅) to the half closest to the true center; the factor
        // should bring the average retained variance back to 1.
        let (n, p) = (100_000, 5);
        let x = std_normal(n, p, 77);
        let truth = LocationScatter::new(DVector::zeros(p), DMatrix::identity(p, p)).unwrap();
        let h = n / 2;
        let idx = closest_rows(&x, &truth, h);
        let (_, _, scatter) = subset_moments(&x, idx.iter().copied());
        let avg_var = scatter.trace() / (p as f64 * (h - 1) as f64);
        let c = consistency_factor(h, n, p);
        assert!((c * avg_var - 1.0).abs() < 0.02, "c·var = {}", c * avg_var);
    }

    #[test]
    fn full_subset_is_classical() {
        let x = std_normal(30, 3, 1);
        let all = HSubset::new((0..30).collect(), 30).unwrap();
        let raw = raw_from_subset(&x, &all).unwrap();
        assert_eq!(raw.c_alpha, 1.0);
        let n = 30.0;
        for j in 0..3 {
            let m = x.column(j).sum::<f64>() / n;
            assert!((raw.loc_scat.mu()[j] - m).abs() < 1e-14);
            let v = x.column(j).map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
            assert!((raw.loc_scat.sigma()[(j, j)] - v).abs() < 1e-13);
        }
    }

    #[test]
    fn unit_square_corners() {
        let x = DataMatrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let raw = raw_from_subset(&x, &HSubset::new(vec![0, 1, 2, 3], 4).unwrap()).unwrap();
        assert_eq!(raw.loc_scat.mu().as_slice(), &[0.5, 0.5]);
        let s = raw.loc_scat.sigma();
        assert!((s[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert!(s[(0, 1)].abs() < 1e-15);
        assert!((raw.det_uncorrected() - 1.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn collinear_subset_rejected() {
        let x = DataMatrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [5.0, 1.0]]).unwrap();
        let h = HSubset::new(vec![0, 1, 2], 4).unwrap();
        assert!(matches!(
            raw_from_subset(&x, &h),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn cstep_fixed_point_with_outlier() {
        let x = DataMatrix::from_rows(&[[0.0, 0.0], [1.0, 0.2], [0.3, 1.0], [50.0, 50.0]]).unwrap();
        let start = raw_from_subset(&x, &HSubset::new(vec![0, 1, 2], 4).unwrap()).unwrap();
        let next = c_step(&x, &start).unwrap();
        assert_eq!(next.subset, start.subset);
    }

    #[test]
    fn cstep_ties_prefer_low_index() {
        // Rows 2 and 3 sit at equal distance from the fit on rows {0, 1, 4}.
        let x = DataMatrix::from_rows(&[
            [0.0, 1.0],
            [0.0, -1.0],
            [3.0, 0.0],
            [-3.0, 0.0],
            [0.5, 0.0],
            [1.0, 0.3],
        ])
        .unwrap();
        let ls = LocationScatter::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let idx = closest_rows(&x, &ls, 5);
        assert_eq!(idx, vec![0, 1, 2, 4, 5]);
    }

    #[test]
    fn cstep_determinant_monotone() {
        for seed in 0..20 {
            let x = std_normal(60, 3, 100 + seed);
            let mut rng = Rng::new(seed);
            let start = HSubset::new(rng.choose_indices(60, 35), 60).unwrap();
            let mut est = raw_from_subset(&x, &start).unwrap();
            for _ in 0..10 {
                let next = c_step(&x, &est).unwrap();
                assert!(next.log_det_uncorrected <= est.log_det_uncorrected + 1e-12);
                est = next;
            }
        }
    }

    #[test]
    fn starts_on_spherical_data() {
        let x = std_normal(100_000, 3, 9);
        for s in initial_starts(&x).unwrap() {
            let diff = s.sigma() - DMatrix::<f64>::identity(3, 3);
            let op_norm = diff.symmetric_eigenvalues().amax();
            assert!(op_norm < 0.05, "operator norm {op_norm}");
        }
    }

    #[test]
    fn starts_follow_mad_rescaling() {
        let x = std_normal(20_000, 3, 10);
        let y = x.map_entries(|j, v| if j == 1 { 10.0 * v } else { v });
        for s in initial_starts(&y).unwrap() {
            let v = s.sigma();
            assert!((v[(1, 1)] / 100.0 - 1.0).abs() < 0.1);
            assert!((v[(0, 0)] - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn starts_permutation_invariant() {
        let x = std_normal(300, 4, 3);
        let mut perm: Vec<usize> = (0..300).collect();
        Rng::new(1).shuffle(&mut perm);
        let y = x.select_rows(&perm);
        let (a, b) = (initial_starts(&x).unwrap(), initial_starts(&y).unwrap());
        for (s, t) in a.iter().zip(&b) {
            assert_eq!(s.mu(), t.mu());
            assert_eq!(s.sigma(), t.sigma());
        }
    }

    #[test]
    fn planted_outliers_excluded() {
        let x = std_normal(20, 2, 21);
        let outliers = [0usize, 3, 7, 11, 15, 18];
        let y = x.map_entries(|_, v| v);
        let mut rows: Vec<Vec<f64>> = y.rows().map(|r| r.to_vec()).collect();
        for &i in &outliers {
            rows[i][0] += 20.0;
            rows[i][1] += 20.0;
        }
        let y = DataMatrix::from_rows(&rows).unwrap();
        let h = h_from_fraction(20, 2, 0.5).unwrap();
        let raw = detmcd_block(&y, h).unwrap();
        assert!(raw.subset.indices().iter().all(|i| !outliers.contains(i)));
    }

    #[test]
    fn clean_large_sample_location() {
        let x = std_normal(10_000, 3, 4);
        let h = h_from_fraction(10_000, 3, 0.5).unwrap();
        let raw = detmcd_block(&x, h).unwrap();
        assert!(raw.loc_scat.mu().amax() < 0.05);
    }

    #[test]
    fn block_estimate_permutation_invariant() {
        let x = std_normal(200, 3, 8);
        let mut perm: Vec<usize> = (0..200).collect();
        Rng::new(2).shuffle(&mut perm);
        let y = x.select_rows(&perm);
        let a = detmcd_block(&x, 110).unwrap();
        let b = detmcd_block(&y, 110).unwrap();
        assert_eq!(a.loc_scat.mu(), b.loc_scat.mu());
        assert_eq!(a.loc_scat.sigma(), b.loc_scat.sigma());
        let mapped: Vec<usize> = {
            let mut m: Vec<usize> = b.subset.indices().iter().map(|&i| perm[i]).collect();
            m.sort_unstable();
            m
        };
        assert_eq!(mapped, a.subset.indices());
    }

    #[test]
    fn reweight_without_trimming() {
        let x =
            DataMatrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.4]])
                .unwrap();
        let wide = LocationScatter::new(
            DVector::from_vec(vec![0.5, 0.5]),
            DMatrix::identity(2, 2) * 100.0,
        )
        .unwrap();
        let (ls, w) = reweight(&x, &wide).unwrap();
        assert!(w.iter().all(|&b| b));
        let all = HSubset::new((0..5).collect(), 5).unwrap();
        let classical = raw_from_subset(&x, &all).unwrap();
        let c = consistency_factor_for_fraction(REWEIGHT_QUANTILE, 2);
        assert!((ls.sigma() - classical.loc_scat.sigma() * c).amax() < 1e-14);
        assert!((ls.mu() - classical.loc_scat.mu()).amax() < 1e-15);
    }

    #[test]
    fn reweight_tail_fraction() {
        let x = std_normal(100_000, 5, 31);
        let truth = LocationScatter::new(DVector::zeros(5), DMatrix::identity(5, 5)).unwrap();
        let (_, w) = reweight(&x, &truth).unwrap();
        let frac_out = w.iter().filter(|&&b| !b).count() as f64 / 1e5;
        assert!((frac_out - 0.025).abs() < 0.005, "{frac_out}");
    }

    #[test]
    fn reweight_drops_gross_outlier() {
        let x = std_normal(2_000, 3, 44);
        let mut rows: Vec<Vec<f64>> = x.rows().map(|r| r.to_vec()).collect();
        rows.push(vec![100.0, 100.0, 100.0]);
        let y = DataMatrix::from_rows(&rows).unwrap();
        let truth = LocationScatter::new(DVector::zeros(3), DMatrix::identity(3, 3)).unwrap();
        let (clean, _) = reweight(&x, &truth).unwrap();
        let (dirty, w) = reweight(&y, &truth).unwrap();
        assert!(!w[2_000]);
        assert!((clean.mu() - dirty.mu()).amax() < 1e-3);
        assert!((clean.sigma() - dirty.sigma()).amax() < 1e-3);
    }

    #[test]
    fn too_few_inliers() {
        let x =
            DataMatrix::from_rows(&[[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]]).unwrap();
        let tight = LocationScatter::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            reweight(&x, &tight),
            Err(Error::TooFewInliers { count: 1, p: 2 })
        ));
    }
}
