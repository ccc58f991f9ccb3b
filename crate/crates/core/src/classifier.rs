//! Per-view recognition chain: constant-feature removal, PCA, multi-class
//! LDA and a shared-covariance Gaussian (Bayes' rule) decision, with a kNN
//! alternative for comparison.
//!
//! Samples are passed as matrices with one sample per row.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::codec::{Decoder, Encoder};
use crate::error::{GtsError, Result};

pub const DEFAULT_VARIANCE_TARGET: f64 = 0.99;

/// Relative size of the ridge added to scatter matrices.
const RIDGE: f64 = 1e-6;

/// Eigenvalues below this fraction of the largest are treated as zero.
const EIGEN_FLOOR: f64 = 1e-12;

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order. Eigenvector signs are fixed so the largest-magnitude
/// entry of each is positive.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = eig.eigenvectors.select_columns(&order);
    fix_signs(&mut vectors);
    (values, vectors)
}

fn fix_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if !col.is_empty() && col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

fn column_means(samples: &DMatrix<f64>) -> DVector<f64> {
    let n = samples.nrows() as f64;
    DVector::from_iterator(
        samples.ncols(),
        samples.column_iter().map(|c| c.sum() / n),
    )
}

fn centered(samples: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut xc = samples.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    xc
}

/// Principal components of a sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: DVector<f64>,
    /// Columns are the retained components, by descending variance.
    pub basis: DMatrix<f64>,
    /// Variance of every component found, descending (including those not
    /// retained).
    pub eigenvalues: Vec<f64>,
}

impl Pca {
    pub fn components(&self) -> usize {
        self.basis.ncols()
    }

    pub fn total_variance(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn retained_ratio(&self) -> f64 {
        let kept: f64 = self.eigenvalues[..self.components()].iter().sum();
        kept / self.total_variance()
    }

    pub fn transform(&self, samples: &DMatrix<f64>) -> DMatrix<f64> {
        centered(samples, &self.mean) * &self.basis
    }

    pub fn transform_one(&self, x: &[f64]) -> DVector<f64> {
        let xc = DVector::from_iterator(x.len(), x.iter().zip(self.mean.iter()).map(|(a, m)| a - m));
        self.basis.tr_mul(&xc)
    }
}

/// Fits PCA and keeps the fewest leading components whose variance fraction
/// reaches `variance_target`. Uses the n x n Gram matrix when there are
/// fewer samples than dimensions.
pub fn pca_fit(samples: &DMatrix<f64>, variance_target: f64) -> Result<Pca> {
    let (n, d) = samples.shape();
    if n < 2 {
        return Err(GtsError::InvalidInput(format!("PCA needs at least 2 samples, got {n}")));
    }
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(GtsError::InvalidInput(format!(
            "variance target {variance_target} outside (0, 1]"
        )));
    }
    let mean = column_means(samples);
    let xc = centered(samples, &mean);
    let scale = 1.0 / (n as f64 - 1.0);

    let (mut eigenvalues, directions) = if n <= d {
        let gram = &xc * xc.transpose();
        let (values, vectors) = sorted_eigen(gram);
        let floor = values.first().copied().unwrap_or(0.0).max(0.0) * EIGEN_FLOOR;
        let usable = values.iter().take_while(|&&v| v > floor).count();
        let mut dirs = DMatrix::zeros(d, usable);
        for i in 0..usable {
            let u = xc.tr_mul(&vectors.column(i)) / values[i].sqrt();
            dirs.set_column(i, &u);
        }
        fix_signs(&mut dirs);
        (values.into_iter().map(|v| v * scale).collect::<Vec<_>>(), dirs)
    } else {
        let cov = xc.tr_mul(&xc) * scale;
        let (values, vectors) = sorted_eigen(cov);
        let floor = values.first().copied().unwrap_or(0.0).max(0.0) * EIGEN_FLOOR;
        let usable = values.iter().take_while(|&&v| v > floor).count();
        (values, vectors.columns(0, usable).into_owned())
    };
    for v in eigenvalues.iter_mut() {
        *v = v.max(0.0);
    }

    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 || directions.ncols() == 0 {
        return Err(GtsError::DegenerateData("total variance is zero".into()));
    }
    let mut k = 0;
    let mut cumulative = 0.0;
    while k < directions.ncols() {
        cumulative += eigenvalues[k];
        k += 1;
        if cumulative / total >= variance_target * (1.0 - 1e-12) {
            break;
        }
    }
    Ok(Pca {
        mean,
        basis: directions.columns(0, k).into_owned(),
        eigenvalues,
    })
}

fn class_index(labels: &[u32]) -> BTreeMap<u32, Vec<usize>> {
    let mut classes: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    classes
}

fn class_means(samples: &DMatrix<f64>, classes: &BTreeMap<u32, Vec<usize>>) -> DMatrix<f64> {
    let mut means = DMatrix::zeros(classes.len(), samples.ncols());
    for (row, members) in classes.values().enumerate() {
        for &i in members {
            let mut r = means.row_mut(row);
            r += samples.row(i);
        }
        let mut r = means.row_mut(row);
        r /= members.len() as f64;
    }
    means
}

fn within_scatter(
    samples: &DMatrix<f64>,
    classes: &BTreeMap<u32, Vec<usize>>,
    means: &DMatrix<f64>,
) -> DMatrix<f64> {
    let mut deviations = samples.clone();
    for (row, members) in classes.values().enumerate() {
        for &i in members {
            let mut r = deviations.row_mut(i);
            r -= means.row(row);
        }
    }
    deviations.tr_mul(&deviations)
}

fn ridge(m: &DMatrix<f64>) -> f64 {
    RIDGE * m.trace() / m.nrows() as f64
}

/// Fisher projection for multiple classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Lda {
    /// Input dimension x output dimension.
    pub projection: DMatrix<f64>,
    /// Generalized eigenvalues of the retained directions.
    pub eigenvalues: Vec<f64>,
    /// Set when the between-class scatter vanishes (all class means equal).
    pub degenerate: bool,
}

impl Lda {
    pub fn transform(&self, samples: &DMatrix<f64>) -> DMatrix<f64> {
        samples * &self.projection
    }

    pub fn transform_one(&self, x: &DVector<f64>) -> DVector<f64> {
        self.projection.tr_mul(x)
    }

    pub fn output_dim(&self) -> usize {
        self.projection.ncols()
    }
}

fn check_labels(samples: &DMatrix<f64>, labels: &[u32], min_per_class: usize) -> Result<BTreeMap<u32, Vec<usize>>> {
    if samples.nrows() != labels.len() {
        return Err(GtsError::LengthMismatch(samples.nrows(), labels.len()));
    }
    let classes = class_index(labels);
    if classes.len() < 2 {
        return Err(GtsError::InvalidInput(format!(
            "need at least 2 classes, got {}",
            classes.len()
        )));
    }
    if let Some((label, members)) = classes.iter().find(|(_, m)| m.len() < min_per_class) {
        return Err(GtsError::InvalidInput(format!(
            "class {label} has {} samples, need {min_per_class}",
            members.len()
        )));
    }
    Ok(classes)
}

/// Solves `Sb w = lambda (Sw + eps I) w` and keeps the top `C - 1` directions
/// (bounded by the input dimension).
pub fn lda_fit(samples: &DMatrix<f64>, labels: &[u32]) -> Result<Lda> {
    let classes = check_labels(samples, labels, 2)?;
    let dim = samples.ncols();
    let means = class_means(samples, &classes);
    let overall = column_means(samples);

    let mut sw = within_scatter(samples, &classes, &means);
    let mut sb = DMatrix::zeros(dim, dim);
    for (row, members) in classes.values().enumerate() {
        let diff = means.row(row).transpose() - &overall;
        sb += (&diff * diff.transpose()) * members.len() as f64;
    }

    let eps = ridge(&sw);
    if !(eps > 0.0) {
        return Err(GtsError::SingularScatter);
    }
    for i in 0..dim {
        sw[(i, i)] += eps;
    }
    let chol = Cholesky::new(sw).ok_or(GtsError::SingularScatter)?;
    let l = chol.l();
    // M = L^-1 Sb L^-T
    let left = l
        .solve_lower_triangular(&sb)
        .ok_or(GtsError::SingularScatter)?;
    let m = l
        .solve_lower_triangular(&left.transpose())
        .ok_or(GtsError::SingularScatter)?;
    let m = (&m + m.transpose()) * 0.5;
    let (values, vectors) = sorted_eigen(m);

    let out_dim = (classes.len() - 1).min(dim);
    let top = vectors.columns(0, out_dim).into_owned();
    let mut projection = l
        .transpose()
        .solve_upper_triangular(&top)
        .ok_or(GtsError::SingularScatter)?;
    fix_signs(&mut projection);

    let eigenvalues: Vec<f64> = values[..out_dim].to_vec();
    let degenerate = eigenvalues.first().is_none_or(|&v| v <= 1e-9);
    Ok(Lda {
        projection,
        eigenvalues,
        degenerate,
    })
}

/// Gaussian class-conditional model with a shared covariance and uniform
/// priors. Prediction picks the class with the smallest Mahalanobis distance,
/// the lower label on ties.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBayes {
    pub labels: Vec<u32>,
    /// One row per class, ordered as `labels`.
    pub means: DMatrix<f64>,
    pub precision: DMatrix<f64>,
}

pub fn bayes_fit(samples: &DMatrix<f64>, labels: &[u32]) -> Result<GaussianBayes> {
    let classes = check_labels(samples, labels, 1)?;
    let (n, dim) = samples.shape();
    let means = class_means(samples, &classes);
    let dof = if n > classes.len() { n - classes.len() } else { n };
    let mut cov = within_scatter(samples, &classes, &means) / dof as f64;

    // Ridge relative to the spread of the whole sample; within-class
    // covariance can collapse when LDA directions null it out.
    let total = {
        let overall = column_means(samples);
        let xc = centered(samples, &overall);
        xc.tr_mul(&xc) / (n as f64 - 1.0).max(1.0)
    };
    let mut eps = ridge(&total).max(ridge(&cov));
    if !(eps > 0.0) {
        eps = 1.0;
    }
    for i in 0..dim {
        cov[(i, i)] += eps;
    }
    let precision = Cholesky::new(cov)
        .ok_or(GtsError::SingularScatter)?
        .inverse();
    Ok(GaussianBayes {
        labels: classes.keys().copied().collect(),
        means,
        precision,
    })
}

impl GaussianBayes {
    pub fn mahalanobis_sq(&self, class: usize, x: &DVector<f64>) -> f64 {
        let diff = x - self.means.row(class).transpose();
        (diff.transpose() * &self.precision * &diff)[(0, 0)]
    }

    pub fn predict(&self, x: &DVector<f64>) -> u32 {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..self.labels.len() {
            let d = self.mahalanobis_sq(c, x);
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        self.labels[best]
    }

    /// Posterior probability per class, ordered as `labels`.
    pub fn posteriors(&self, x: &DVector<f64>) -> Vec<f64> {
        let d: Vec<f64> = (0..self.labels.len())
            .map(|c| -0.5 * self.mahalanobis_sq(c, x))
            .collect();
        let max = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = d.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|v| v / z).collect()
    }
}

/// Majority vote among the `k` nearest gallery points (Euclidean). Vote ties
/// go to the label with the nearest member, then to the lower label.
pub fn knn_predict(gallery: &DMatrix<f64>, labels: &[u32], x: &[f64], k: usize) -> Result<u32> {
    if gallery.nrows() == 0 {
        return Err(GtsError::EmptyGallery);
    }
    if k == 0 {
        return Err(GtsError::InvalidInput("k must be at least 1".into()));
    }
    if gallery.nrows() != labels.len() {
        return Err(GtsError::LengthMismatch(gallery.nrows(), labels.len()));
    }
    if gallery.ncols() != x.len() {
        return Err(GtsError::InvalidInput(format!(
            "query has {} features, gallery {}",
            x.len(),
            gallery.ncols()
        )));
    }
    let mut dist: Vec<(f64, u32)> = gallery
        .row_iter()
        .zip(labels)
        .map(|(row, &l)| {
            let d = row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            (d, l)
        })
        .collect();
    dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    // label -> (votes, nearest distance)
    let mut tally: BTreeMap<u32, (usize, f64)> = BTreeMap::new();
    for &(d, l) in dist.iter().take(k) {
        let e = tally.entry(l).or_insert((0, d));
        e.0 += 1;
    }
    let (label, _) = tally
        .into_iter()
        .min_by(|(la, (va, da)), (lb, (vb, db))| {
            vb.cmp(va)
                .then(da.partial_cmp(db).unwrap())
                .then(la.cmp(lb))
        })
        .expect("k >= 1 and gallery nonempty");
    Ok(label)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Bayes,
    Knn(usize),
}

/// A fitted per-view model.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub input_dim: usize,
    /// Input coordinates that vary across the gallery.
    pub feature_index: Vec<u32>,
    pub pca: Pca,
    pub lda: Lda,
    pub bayes: GaussianBayes,
    pub decision: Decision,
    /// Gallery in LDA space, for kNN.
    pub gallery: DMatrix<f64>,
    pub gallery_labels: Vec<u32>,
}

impl ClassifierModel {
    pub fn fit(
        samples: &DMatrix<f64>,
        labels: &[u32],
        variance_target: f64,
        decision: Decision,
    ) -> Result<Self> {
        if samples.nrows() != labels.len() {
            return Err(GtsError::LengthMismatch(samples.nrows(), labels.len()));
        }
        if samples.nrows() < 2 {
            return Err(GtsError::InvalidInput("need at least 2 gallery samples".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(GtsError::InvalidInput("non-finite feature".into()));
        }
        let feature_index: Vec<u32> = samples
            .column_iter()
            .enumerate()
            .filter(|(_, c)| c.iter().any(|&v| v != c[0]))
            .map(|(j, _)| j as u32)
            .collect();
        if feature_index.is_empty() {
            return Err(GtsError::DegenerateData("every feature is constant".into()));
        }
        let cols: Vec<usize> = feature_index.iter().map(|&j| j as usize).collect();
        let reduced = samples.select_columns(&cols);
        let pca = pca_fit(&reduced, variance_target)?;
        let pcs = pca.transform(&reduced);
        let lda = lda_fit(&pcs, labels)?;
        let projected = lda.transform(&pcs);
        let bayes = bayes_fit(&projected, labels)?;
        Ok(ClassifierModel {
            input_dim: samples.ncols(),
            feature_index,
            pca,
            lda,
            bayes,
            decision,
            gallery: projected,
            gallery_labels: labels.to_vec(),
        })
    }

    pub fn project(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.input_dim {
            return Err(GtsError::InvalidInput(format!(
                "expected {} features, got {}",
                self.input_dim,
                x.len()
            )));
        }
        let reduced: Vec<f64> = self.feature_index.iter().map(|&j| x[j as usize]).collect();
        Ok(self.lda.transform_one(&self.pca.transform_one(&reduced)))
    }

    pub fn predict(&self, x: &[f64]) -> Result<u32> {
        let z = self.project(x)?;
        match self.decision {
            Decision::Bayes => Ok(self.bayes.predict(&z)),
            Decision::Knn(k) => knn_predict(&self.gallery, &self.gallery_labels, z.as_slice(), k),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new(MODEL_MAGIC, MODEL_VERSION);
        match self.decision {
            Decision::Bayes => {
                e.u8(0);
                e.u64(0);
            }
            Decision::Knn(k) => {
                e.u8(1);
                e.u64(k as u64);
            }
        }
        e.u64(self.input_dim as u64);
        e.u32s(&self.feature_index);
        e.vector(&self.pca.mean);
        e.matrix(&self.pca.basis);
        e.f64s(&self.pca.eigenvalues);
        e.matrix(&self.lda.projection);
        e.f64s(&self.lda.eigenvalues);
        e.u8(u8::from(self.lda.degenerate));
        e.u32s(&self.bayes.labels);
        e.matrix(&self.bayes.means);
        e.matrix(&self.bayes.precision);
        e.matrix(&self.gallery);
        e.u32s(&self.gallery_labels);
        e.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(bytes, MODEL_MAGIC, MODEL_VERSION)?;
        let decision = match (d.u8()?, d.u64()?) {
            (0, _) => Decision::Bayes,
            (1, k) => Decision::Knn(k as usize),
            (tag, _) => return Err(GtsError::Format(format!("unknown decision tag {tag}"))),
        };
        let input_dim = d.u64()? as usize;
        let feature_index = d.u32s()?;
        let pca = Pca {
            mean: d.vector()?,
            basis: d.matrix()?,
            eigenvalues: d.f64s()?,
        };
        let lda = Lda {
            projection: d.matrix()?,
            eigenvalues: d.f64s()?,
            degenerate: d.u8()? != 0,
        };
        let bayes = GaussianBayes {
            labels: d.u32s()?,
            means: d.matrix()?,
            precision: d.matrix()?,
        };
        let gallery = d.matrix()?;
        let gallery_labels = d.u32s()?;
        d.finish()?;
        Ok(ClassifierModel {
            input_dim,
            feature_index,
            pca,
            lda,
            bayes,
            decision,
            gallery,
            gallery_labels,
        })
    }
}

const MODEL_MAGIC: &[u8; 4] = b"GTSM";
const MODEL_VERSION: u32 = 1;
