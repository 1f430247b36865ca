//! Synthetic dataset generation, target-label construction, label flipping,
//! and geometric statistics of the sample.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

/// Pairwise distances below this threshold count as duplicate rows.
pub const DUPLICATE_ROW_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("n and d must both be at least 1 (got n={n}, d={d})")]
    EmptyDims { n: usize, d: usize },
    #[error("covariance factor must be a symmetric {d}x{d} matrix")]
    BadCovarianceShape { d: usize },
    #[error("covariance factor is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("target vector has length {got}, expected {expected}")]
    TargetDimension { expected: usize, got: usize },
    #[error("unknown link name `{0}` (expected identity, tanh, or scaled-arctan)")]
    UnknownLink(String),
    #[error("dataset has no labels")]
    MissingLabels,
    #[error("labels are not binary-coded as +/-1 (offending value {0})")]
    NonBinaryLabels(f64),
    #[error("flip ratio {0} outside [0, 1]")]
    RatioOutOfRange(f64),
    #[error("separation distance needs at least 2 rows")]
    TooFewRows,
    #[error("duplicate rows detected (pairwise distance {0:.3e} below tolerance)")]
    DuplicateRows(f64),
    #[error("csv parse error: {0}")]
    Csv(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Entry distribution for the i.i.d. generator, each scaled to unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryDist {
    #[default]
    Gaussian,
    Rademacher,
    Uniform,
}

/// How input rows are drawn.
#[derive(Debug, Clone)]
pub enum DataKind {
    /// Rows uniform on the unit sphere in `R^d`.
    UniformSphere,
    /// Rows `x_i = z_i Sigma^{-1}` with i.i.d. unit-variance entries of
    /// `z_i`, so the entries of `X Sigma` are i.i.d. `Sigma = None` means
    /// the identity.
    IidEntries {
        sigma: Option<DMatrix<f64>>,
        entries: EntryDist,
    },
}

#[derive(Debug, Clone)]
pub struct DataSpec {
    pub kind: DataKind,
    pub n: usize,
    pub d: usize,
    /// Rescale each row to norm at most 1 after generation.
    pub normalize: bool,
}

impl DataSpec {
    pub fn uniform_sphere(n: usize, d: usize) -> Self {
        DataSpec {
            kind: DataKind::UniformSphere,
            n,
            d,
            normalize: false,
        }
    }

    pub fn iid_entries(
        n: usize,
        d: usize,
        sigma: Option<DMatrix<f64>>,
        entries: EntryDist,
        normalize: bool,
    ) -> Self {
        DataSpec {
            kind: DataKind::IidEntries { sigma, entries },
            n,
            d,
            normalize,
        }
    }
}

/// Link functions for label construction; all are Lipschitz with `phi(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Link {
    Identity,
    Tanh,
    ScaledArctan,
}

impl Link {
    pub fn parse(name: &str) -> Result<Self, DataError> {
        match name {
            "identity" => Ok(Link::Identity),
            "tanh" => Ok(Link::Tanh),
            "scaled-arctan" => Ok(Link::ScaledArctan),
            other => Err(DataError::UnknownLink(other.to_string())),
        }
    }

    pub fn apply(self, t: f64) -> f64 {
        match self {
            Link::Identity => t,
            Link::Tanh => t.tanh(),
            Link::ScaledArctan => t.atan() * std::f64::consts::FRAC_2_PI,
        }
    }
}

/// Target function for label construction.
#[derive(Debug, Clone)]
pub enum Target {
    Linear { w_star: DVector<f64> },
    LipschitzLink { link: Link, w_star: DVector<f64> },
    /// Binary +/-1 labels `sign(x . w_star)`; the form the flip operation expects.
    SignLinear { w_star: DVector<f64> },
}

/// A sample: inputs as rows of `x`, optional labels `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: Option<DVector<f64>>,
    pub seed: u64,
    pub covariance_factor: Option<DMatrix<f64>>,
    /// `‖w*‖` recorded by [`label`], used downstream in bound composition.
    pub target_norm: Option<f64>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn labels(&self) -> Result<&DVector<f64>, DataError> {
        self.y.as_ref().ok_or(DataError::MissingLabels)
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }
}

fn sample_entry(dist: EntryDist, rng: &mut ChaCha8Rng) -> f64 {
    match dist {
        EntryDist::Gaussian => rng.sample(StandardNormal),
        EntryDist::Rademacher => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
        // Uniform on [-sqrt(3), sqrt(3)] has unit variance.
        EntryDist::Uniform => (rng.random::<f64>() * 2.0 - 1.0) * 3.0f64.sqrt(),
    }
}

/// Draws the input matrix per the spec; `Y` is left unset.
///
/// Generation is a pure function of `(spec, seed)`: the same pair reproduces
/// the matrix bit-exactly.
pub fn generate(spec: &DataSpec, seed: u64) -> Result<Dataset, DataError> {
    if spec.n == 0 || spec.d == 0 {
        return Err(DataError::EmptyDims {
            n: spec.n,
            d: spec.d,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, d) = (spec.n, spec.d);
    let mut x = DMatrix::zeros(n, d);
    let mut covariance_factor = None;

    match &spec.kind {
        DataKind::UniformSphere => {
            for i in 0..n {
                let mut row = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let norm = row.norm();
                row /= norm;
                x.row_mut(i).copy_from(&row.transpose());
            }
        }
        DataKind::IidEntries { sigma, entries } => {
            for i in 0..n {
                for j in 0..d {
                    x[(i, j)] = sample_entry(*entries, &mut rng);
                }
            }
            if let Some(sigma) = sigma {
                if sigma.nrows() != d || sigma.ncols() != d || !is_symmetric(sigma, 1e-12) {
                    return Err(DataError::BadCovarianceShape { d });
                }
                let chol = sigma
                    .clone()
                    .cholesky()
                    .ok_or(DataError::NotPositiveDefinite)?;
                // x_i^T = z_i^T Sigma^{-1}: solve Sigma m = z row-wise via X Sigma^{-1} = (Sigma^{-1} X^T)^T.
                let solved = chol.solve(&x.transpose());
                x = solved.transpose();
                covariance_factor = Some(sigma.clone());
            }
        }
    }

    if spec.normalize {
        for i in 0..n {
            let norm = x.row(i).norm();
            if norm > 1.0 {
                let scaled = x.row(i) / norm;
                x.row_mut(i).copy_from(&scaled);
            }
        }
    }

    Ok(Dataset {
        x,
        y: None,
        seed,
        covariance_factor,
        target_norm: None,
    })
}

pub(crate) fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Attaches labels `y_i = g(x_i)` and records `‖w*‖`.
pub fn label(ds: &Dataset, target: &Target) -> Result<Dataset, DataError> {
    let (w_star, f): (&DVector<f64>, Box<dyn Fn(f64) -> f64>) = match target {
        Target::Linear { w_star } => (w_star, Box::new(|t| t)),
        Target::LipschitzLink { link, w_star } => {
            let link = *link;
            (w_star, Box::new(move |t| link.apply(t)))
        }
        Target::SignLinear { w_star } => (w_star, Box::new(|t: f64| if t < 0.0 { -1.0 } else { 1.0 })),
    };
    if w_star.len() != ds.d() {
        return Err(DataError::TargetDimension {
            expected: ds.d(),
            got: w_star.len(),
        });
    }
    let y = DVector::from_fn(ds.n(), |i, _| f(ds.x.row(i).transpose().dot(w_star)));
    Ok(Dataset {
        x: ds.x.clone(),
        y: Some(y),
        seed: ds.seed,
        covariance_factor: ds.covariance_factor.clone(),
        target_norm: Some(w_star.norm()),
    })
}

/// Negates exactly `floor(ratio * n)` labels, chosen uniformly without
/// replacement. Labels must be binary-coded as +/-1.
pub fn flip_labels(ds: &Dataset, ratio: f64, seed: u64) -> Result<Dataset, DataError> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(DataError::RatioOutOfRange(ratio));
    }
    let y = ds.labels()?;
    for &v in y.iter() {
        if v != 1.0 && v != -1.0 {
            return Err(DataError::NonBinaryLabels(v));
        }
    }
    let n = ds.n();
    let count = (ratio * n as f64).floor() as usize;
    let mut flipped = y.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for idx in index_sample(&mut rng, n, count.min(n)) {
        flipped[idx] = -flipped[idx];
    }
    Ok(Dataset {
        x: ds.x.clone(),
        y: Some(flipped),
        seed: ds.seed,
        covariance_factor: ds.covariance_factor.clone(),
        target_norm: ds.target_norm,
    })
}

/// Half the minimum pairwise distance between input rows.
pub fn separation_distance(ds: &Dataset) -> Result<f64, DataError> {
    let n = ds.n();
    if n < 2 {
        return Err(DataError::TooFewRows);
    }
    let mut min_dist = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = (ds.x.row(i) - ds.x.row(j)).norm();
            if dist < min_dist {
                min_dist = dist;
            }
        }
    }
    if min_dist < DUPLICATE_ROW_TOL {
        return Err(DataError::DuplicateRows(min_dist));
    }
    Ok(0.5 * min_dist)
}

/// Writes `header x1,...,xd[,y]` followed by one row per sample with
/// 17-significant-digit decimal floats, enough to round-trip f64 exactly.
pub fn write_csv<W: Write>(ds: &Dataset, mut out: W) -> Result<(), DataError> {
    let d = ds.d();
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    if ds.y.is_some() {
        header.push("y".to_string());
    }
    writeln!(out, "{}", header.join(","))?;
    for i in 0..ds.n() {
        let mut fields: Vec<String> = (0..d).map(|j| format!("{:.16e}", ds.x[(i, j)])).collect();
        if let Some(y) = &ds.y {
            fields.push(format!("{:.16e}", y[i]));
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Parses the CSV format produced by [`write_csv`]. Seed and covariance
/// metadata are not part of the format and come back empty.
pub fn read_csv<R: BufRead>(input: R) -> Result<Dataset, DataError> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| DataError::Csv("empty file".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    let has_y = cols.last() == Some(&"y");
    let d = if has_y { cols.len() - 1 } else { cols.len() };
    if d == 0 {
        return Err(DataError::Csv("no feature columns".into()));
    }
    let mut rows: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut n = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        let expected = d + usize::from(has_y);
        if fields.len() != expected {
            return Err(DataError::Csv(format!(
                "row {n} has {} fields, expected {expected}",
                fields.len()
            )));
        }
        for &f in &fields[..d] {
            rows.push(
                f.parse::<f64>()
                    .map_err(|e| DataError::Csv(format!("row {n}: {e}")))?,
            );
        }
        if has_y {
            ys.push(
                fields[d]
                    .parse::<f64>()
                    .map_err(|e| DataError::Csv(format!("row {n}: {e}")))?,
            );
        }
        n += 1;
    }
    Ok(Dataset {
        x: DMatrix::from_row_slice(n, d, &rows),
        y: if has_y {
            Some(DVector::from_vec(ys))
        } else {
            None
        },
        seed: 0,
        covariance_factor: None,
        target_norm: None,
    })
}

/// Deterministic unit vector from a seed, scaled to the requested norm.
pub fn seeded_direction(d: usize, norm: f64, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let len = v.norm();
    v *= norm / len;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_rows_have_unit_norm() {
        let ds = generate(&DataSpec::uniform_sphere(100, 200), 7).unwrap();
        for i in 0..100 {
            assert!((ds.x.row(i).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = DataSpec::uniform_sphere(20, 5);
        let a = generate(&spec, 42).unwrap();
        let b = generate(&spec, 42).unwrap();
        assert_eq!(a.x, b.x);
        let c = generate(&spec, 43).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn gaussian_rows_normalize_to_unit_ball() {
        let spec = DataSpec::iid_entries(50, 100, None, EntryDist::Gaussian, true);
        let ds = generate(&spec, 1).unwrap();
        for i in 0..50 {
            assert!(ds.x.row(i).norm() <= 1.0 + 1e-12);
        }
        // Unnormalized row norms concentrate near sqrt(d).
        let raw = generate(
            &DataSpec::iid_entries(50, 100, None, EntryDist::Gaussian, false),
            1,
        )
        .unwrap();
        let mean_norm: f64 = (0..50).map(|i| raw.x.row(i).norm()).sum::<f64>() / 50.0;
        assert!((mean_norm - 10.0).abs() < 1.0);
    }

    #[test]
    fn entry_dists_have_unit_variance_scale() {
        for dist in [EntryDist::Gaussian, EntryDist::Rademacher, EntryDist::Uniform] {
            let spec = DataSpec::iid_entries(200, 50, None, dist, false);
            let ds = generate(&spec, 3).unwrap();
            let var: f64 =
                ds.x.iter().map(|v| v * v).sum::<f64>() / (ds.x.len() as f64);
            assert!((var - 1.0).abs() < 0.05, "{dist:?}: var {var}");
        }
    }

    #[test]
    fn sigma_must_be_positive_definite() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]); // eigenvalues 3, -1
        let spec = DataSpec::iid_entries(4, 2, Some(sigma), EntryDist::Gaussian, false);
        assert!(matches!(
            generate(&spec, 0),
            Err(DataError::NotPositiveDefinite)
        ));
    }

    #[test]
    fn x_sigma_recovers_iid_entries() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let spec = DataSpec::iid_entries(6, 2, Some(sigma.clone()), EntryDist::Gaussian, false);
        let ds = generate(&spec, 9).unwrap();
        let raw = generate(
            &DataSpec::iid_entries(6, 2, None, EntryDist::Gaussian, false),
            9,
        )
        .unwrap();
        let recovered = &ds.x * &sigma;
        assert_relative_eq!(recovered, raw.x, epsilon = 1e-12);
    }

    #[test]
    fn linear_label_first_coordinate() {
        let mut ds = generate(&DataSpec::uniform_sphere(5, 4), 2).unwrap();
        ds.x[(0, 0)] = 0.3;
        let w_star = DVector::from_fn(4, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let labeled = label(&ds, &Target::Linear { w_star }).unwrap();
        assert_relative_eq!(labeled.y.as_ref().unwrap()[0], 0.3, epsilon = 1e-15);
        assert_eq!(labeled.target_norm, Some(1.0));
    }

    #[test]
    fn zero_target_gives_zero_labels() {
        let ds = generate(&DataSpec::uniform_sphere(10, 3), 4).unwrap();
        let labeled = label(
            &ds,
            &Target::Linear {
                w_star: DVector::zeros(3),
            },
        )
        .unwrap();
        assert_eq!(labeled.y.unwrap().norm(), 0.0);
        assert_eq!(labeled.target_norm, Some(0.0));
    }

    #[test]
    fn labels_satisfy_norm_inequality() {
        // ‖Y‖ <= c* sqrt(lambda_max(X X^T)) for Lipschitz links with phi(0)=0.
        let ds = generate(&DataSpec::uniform_sphere(30, 12), 11).unwrap();
        for link in [Link::Identity, Link::Tanh, Link::ScaledArctan] {
            let w_star = seeded_direction(12, 0.8, 5);
            let labeled = label(&ds, &Target::LipschitzLink { link, w_star }).unwrap();
            let gram = &ds.x * ds.x.transpose();
            let (_, lmax) = crate::spectra::gram_extremes(&gram).unwrap();
            let c_star = labeled.target_norm.unwrap();
            assert!(labeled.y.unwrap().norm() <= c_star * lmax.sqrt() + 1e-12);
        }
    }

    #[test]
    fn unknown_link_rejected() {
        assert!(matches!(
            Link::parse("relu"),
            Err(DataError::UnknownLink(_))
        ));
    }

    #[test]
    fn flip_counts_are_exact() {
        let ds = generate(&DataSpec::uniform_sphere(10, 3), 8).unwrap();
        let labeled = label(
            &ds,
            &Target::SignLinear {
                w_star: seeded_direction(3, 1.0, 1),
            },
        )
        .unwrap();
        let same = flip_labels(&labeled, 0.0, 5).unwrap();
        assert_eq!(same.y, labeled.y);
        let all = flip_labels(&labeled, 1.0, 5).unwrap();
        assert_eq!(
            all.y.unwrap(),
            -labeled.y.clone().unwrap()
        );
        let half = flip_labels(&labeled, 0.5, 5).unwrap();
        let n_changed = half
            .y
            .unwrap()
            .iter()
            .zip(labeled.y.as_ref().unwrap().iter())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(n_changed, 5);
    }

    #[test]
    fn flip_rejects_non_binary() {
        let ds = generate(&DataSpec::uniform_sphere(4, 2), 1).unwrap();
        let labeled = label(
            &ds,
            &Target::Linear {
                w_star: seeded_direction(2, 1.0, 2),
            },
        )
        .unwrap();
        assert!(matches!(
            flip_labels(&labeled, 0.5, 0),
            Err(DataError::NonBinaryLabels(_))
        ));
    }

    #[test]
    fn separation_distance_examples() {
        let two = Dataset {
            x: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            y: None,
            seed: 0,
            covariance_factor: None,
            target_norm: None,
        };
        assert_eq!(separation_distance(&two).unwrap(), 0.5);

        let three = Dataset {
            x: DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 3.0, 4.0, 0.0, 1.0]),
            y: None,
            seed: 0,
            covariance_factor: None,
            target_norm: None,
        };
        assert_eq!(separation_distance(&three).unwrap(), 0.5);

        for n in [3usize, 7, 20] {
            let grid = Dataset {
                x: DMatrix::from_fn(n, 1, |i, _| i as f64),
                y: None,
                seed: 0,
                covariance_factor: None,
                target_norm: None,
            };
            assert_eq!(separation_distance(&grid).unwrap(), 0.5);
        }
    }

    #[test]
    fn duplicates_rejected() {
        let dup = Dataset {
            x: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]),
            y: None,
            seed: 0,
            covariance_factor: None,
            target_norm: None,
        };
        assert!(matches!(
            separation_distance(&dup),
            Err(DataError::DuplicateRows(_))
        ));
    }

    #[test]
    fn csv_round_trips_bit_exactly() {
        let ds = generate(&DataSpec::uniform_sphere(7, 3), 13).unwrap();
        let labeled = label(
            &ds,
            &Target::LipschitzLink {
                link: Link::Tanh,
                w_star: seeded_direction(3, 1.0, 4),
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&labeled, &mut buf).unwrap();
        let back = read_csv(&buf[..]).unwrap();
        assert_eq!(back.x, labeled.x);
        assert_eq!(back.y, labeled.y);
    }

    #[test]
    fn sphere_gram_top_eigenvalue_stays_bounded() {
        // Report-style sanity: lambda_max(X X^T) stays well below n at a
        // fixed aspect ratio n/d = 1/2 as n grows.
        for (n, d) in [(25usize, 50usize), (50, 100), (100, 200)] {
            let ds = generate(&DataSpec::uniform_sphere(n, d), 17).unwrap();
            let gram = &ds.x * ds.x.transpose();
            let (_, lmax) = crate::spectra::gram_extremes(&gram).unwrap();
            let envelope = 2.0 * (1.0 + (n as f64 / d as f64).sqrt()).powi(2);
            assert!(lmax <= envelope, "n={n}: lambda_max {lmax} vs {envelope}");
        }
    }
}
