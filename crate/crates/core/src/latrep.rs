//! Representation reading: contrastive direction sets, their mean pattern,
//! dispersion, and a PCA projection for visualization.
//!
//! Rows are opaque per-sample vectors; picking the final-token state is the
//! extractor's job.

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::scalar::{l2_norm, Scalar};
use crate::tensor_store::{ActivationMatrix, Role};

/// Row-aligned differences `positive[i] - negative[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet<T> {
    matrix: ActivationMatrix<T>,
}

impl<T: Scalar> DirectionSet<T> {
    /// Wraps a matrix already holding direction rows (e.g. read from disk).
    pub fn from_matrix(mut matrix: ActivationMatrix<T>) -> Result<Self> {
        match matrix.role {
            None | Some(Role::Direction) => {}
            Some(other) => {
                return Err(Error::RoleMismatch {
                    expected: Role::Direction.to_string(),
                    found: other.to_string(),
                })
            }
        }
        matrix.role = Some(Role::Direction);
        matrix.vector = false;
        Ok(DirectionSet { matrix })
    }

    /// Builds a direction set from raw rows, e.g. from a generator.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::from_matrix(ActivationMatrix::from_rows(rows)?)
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn d(&self) -> usize {
        self.matrix.d()
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.matrix.row(i)
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.matrix.rows()
    }

    pub fn layer(&self) -> Option<u32> {
        self.matrix.layer
    }

    pub fn source_tag(&self) -> &str {
        &self.matrix.source_tag
    }

    pub fn matrix(&self) -> &ActivationMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> ActivationMatrix<T> {
        self.matrix
    }

    /// Applies `f` to every row, keeping tags.
    pub fn map_rows<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[T]) -> Result<Vec<T>>,
    {
        let rows = self.rows().map(&mut f).collect::<Result<Vec<_>>>()?;
        let mut m = ActivationMatrix::from_rows(&rows)?;
        m.inherit_tags(&self.matrix);
        m.role = Some(Role::Direction);
        Ok(DirectionSet { matrix: m })
    }
}

/// A single aggregated d-vector with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternVector<T> {
    pub values: Vec<T>,
    pub layer: Option<u32>,
    pub source_tag: String,
}

impl<T: Scalar> PatternVector<T> {
    pub fn norm(&self) -> T {
        l2_norm(&self.values)
    }
}

fn check_role(m: &ActivationMatrix<impl Scalar>, want: Role) -> Result<()> {
    match m.role {
        Some(r) if r != want => Err(Error::RoleMismatch {
            expected: want.to_string(),
            found: r.to_string(),
        }),
        _ => Ok(()),
    }
}

/// `rows[i] = pos.rows[i] - neg.rows[i]`.
///
/// Untagged inputs are accepted; tagged ones must be positive/negative and
/// agree on the layer.
pub fn direction_set<T: Scalar>(
    pos: &ActivationMatrix<T>,
    neg: &ActivationMatrix<T>,
) -> Result<DirectionSet<T>> {
    if pos.shape() != neg.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", pos.n(), pos.d()),
            found: format!("{}x{}", neg.n(), neg.d()),
        });
    }
    check_role(pos, Role::Positive)?;
    check_role(neg, Role::Negative)?;
    if pos.layer != neg.layer {
        return Err(Error::LayerMismatch(pos.layer, neg.layer));
    }
    let data = pos
        .data()
        .iter()
        .zip(neg.data())
        .map(|(&a, &b)| a - b)
        .collect();
    let mut m = ActivationMatrix::new(pos.n(), pos.d(), data)?;
    m.inherit_tags(pos);
    m.role = Some(Role::Direction);
    Ok(DirectionSet { matrix: m })
}

fn column_mean<T: Scalar>(dirs: &DirectionSet<T>) -> Vec<T> {
    let mut mean = vec![T::zero(); dirs.d()];
    for row in dirs.rows() {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    let inv_n = T::one() / T::from_usize_lossy(dirs.n());
    mean.iter_mut().for_each(|m| *m *= inv_n);
    mean
}

/// `(1/n) sum u_i`.
pub fn mean_pattern<T: Scalar>(dirs: &DirectionSet<T>) -> PatternVector<T> {
    PatternVector {
        values: column_mean(dirs),
        layer: dirs.layer(),
        source_tag: dirs.source_tag().to_string(),
    }
}

/// Mean of `u_i - u_0`. Centering against the first row keeps identical
/// rows at exactly zero deviation.
fn shifted_mean<T: Scalar>(dirs: &DirectionSet<T>) -> Vec<T> {
    let anchor = dirs.row(0);
    let mut mean = vec![T::zero(); dirs.d()];
    for row in dirs.rows() {
        for ((m, &x), &a) in mean.iter_mut().zip(row).zip(anchor) {
            *m += x - a;
        }
    }
    let inv_n = T::one() / T::from_usize_lossy(dirs.n());
    mean.iter_mut().for_each(|m| *m *= inv_n);
    mean
}

fn for_each_deviation<T: Scalar>(dirs: &DirectionSet<T>, mut f: impl FnMut(&[T])) {
    let anchor = dirs.row(0);
    let shift = shifted_mean(dirs);
    let mut dev = vec![T::zero(); dirs.d()];
    for row in dirs.rows() {
        for (((o, &x), &a), &m) in dev.iter_mut().zip(row).zip(anchor).zip(&shift) {
            *o = (x - a) - m;
        }
        f(&dev);
    }
}

/// Dispersion `(1/n) sum ||u_i - mean||^2`, i.e. the trace of the
/// `1/n`-normalized sample covariance.
pub fn covariance_trace<T: Scalar>(dirs: &DirectionSet<T>) -> T {
    let mut total = T::zero();
    for_each_deviation(dirs, |dev| total += dev.iter().map(|&x| x * x).sum::<T>());
    total / T::from_usize_lossy(dirs.n())
}

/// Top principal components of a direction set.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel<T> {
    pub mean: Vec<T>,
    /// `m` orthonormal rows, by descending explained variance.
    pub components: Vec<Vec<T>>,
    pub explained_variance: Vec<T>,
}

impl<T: Scalar> PcaModel<T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn project_row(&self, row: &[T]) -> Vec<T> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(row.iter().zip(&self.mean))
                    .map(|(&ci, (&x, &m))| ci * (x - m))
                    .sum()
            })
            .collect()
    }
}

/// Fits `m` components from the eigendecomposition of the `1/n` covariance.
///
/// Each component is signed so that its largest-magnitude entry is
/// nonnegative (first such index on ties).
pub fn pca_fit<T: Scalar>(dirs: &DirectionSet<T>, m: usize) -> Result<PcaModel<T>> {
    let (n, d) = (dirs.n(), dirs.d());
    if n < 2 {
        return Err(Error::OutOfRange {
            what: "sample count n",
            value: n,
            min: 2,
            max: usize::MAX,
        });
    }
    let max_m = n.min(d);
    if m == 0 || m > max_m {
        return Err(Error::OutOfRange {
            what: "component count m",
            value: m,
            min: 1,
            max: max_m,
        });
    }
    let mean = column_mean(dirs);
    let mut cov = vec![T::zero(); d * d];
    for_each_deviation(dirs, |dev| {
        for i in 0..d {
            let ci = dev[i];
            if ci == T::zero() {
                continue;
            }
            for j in i..d {
                cov[i * d + j] += ci * dev[j];
            }
        }
    });
    let inv_n = T::one() / T::from_usize_lossy(n);
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] * inv_n;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }

    let eig = symmetric_eigen(&cov, d);
    let components = eig
        .vectors
        .into_iter()
        .take(m)
        .map(|mut c| {
            let mut best = 0;
            for (i, x) in c.iter().enumerate() {
                if x.abs() > c[best].abs() {
                    best = i;
                }
            }
            if c[best] < T::zero() {
                c.iter_mut().for_each(|x| *x = -*x);
            }
            c
        })
        .collect();
    let explained_variance = eig
        .values
        .into_iter()
        .take(m)
        .map(|v| v.max(T::zero()))
        .collect();
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

/// `n x m` projections onto the model's components.
pub fn pca_project<T: Scalar>(
    model: &PcaModel<T>,
    matrix: &ActivationMatrix<T>,
) -> Result<ActivationMatrix<T>> {
    if matrix.d() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: matrix.d(),
        });
    }
    let data: Vec<T> = matrix.rows().flat_map(|r| model.project_row(r)).collect();
    let mut out = ActivationMatrix::new(matrix.n(), model.n_components(), data)?;
    out.inherit_tags(matrix);
    out.role = matrix.role;
    Ok(out)
}
