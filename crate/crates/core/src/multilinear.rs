//! Finite-dimensional exterior algebra: wedge volumes, Gram orthogonalization,
//! volume expansion factors and d-dimensional traces.
//!
//! Every computation that is weighted by a non-Euclidean inner product
//! `<x, y>_V = x^T V y` is reduced to the Euclidean case through the
//! congruence `L -> U L U^{-1}` with `U = V^{1/2}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative slack for treating a Gram determinant as zero.
pub const TOL_PSD: f64 = 1e-10;
/// Relative pivot below which a frame direction counts as dependent.
pub const TOL_RANK: f64 = 1e-12;

/// A square real matrix acting on the ambient coordinate space.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    m: DMatrix<f64>,
}

impl DenseOperator {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument("operator dimension must be positive".into()));
        }
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("operator has non-finite entries".into()));
        }
        Ok(Self { m })
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: DMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: DMatrix::zeros(dim, dim) }
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        Self { m: DMatrix::identity(dim, dim) * c }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self { m: DMatrix::from_diagonal(&DVector::from_column_slice(diag)) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    /// Euclidean adjoint.
    pub fn adjoint(&self) -> Self {
        Self { m: self.m.transpose() }
    }

    /// `(L + L^T) / 2`.
    pub fn symmetric_part(&self) -> Self {
        Self { m: symmetrize(&self.m) }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &DenseOperator) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self { m: &self.m * &other.m })
    }

    pub fn add(&self, other: &DenseOperator) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self { m: &self.m + &other.m })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { m: &self.m * c }
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        singular_values_desc(&self.m).first().copied().unwrap_or(0.0)
    }
}

/// An ordered list of `d` vectors in an ambient space, stored as columns.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFrame {
    vectors: DMatrix<f64>,
}

impl VectorFrame {
    pub fn new(vectors: DMatrix<f64>) -> Result<Self> {
        let (n, d) = vectors.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidArgument("frame must have positive ambient dimension and size".into()));
        }
        if d > n {
            return Err(Error::InvalidArgument(format!(
                "frame of {d} vectors does not fit in dimension {n}"
            )));
        }
        if vectors.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("frame has non-finite entries".into()));
        }
        Ok(Self { vectors })
    }

    pub fn from_columns(columns: &[DVector<f64>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidArgument("empty frame".into()));
        }
        let n = columns[0].len();
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
        }
        Self::new(DMatrix::from_columns(columns))
    }

    /// The first `d` canonical basis vectors of `R^n`.
    pub fn canonical(ambient_dim: usize, d: usize) -> Result<Self> {
        let mut m = DMatrix::zeros(ambient_dim, d);
        for i in 0..d.min(ambient_dim) {
            m[(i, i)] = 1.0;
        }
        Self::new(m)
    }

    pub fn ambient_dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// Number of vectors `d`.
    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.ncols() == 0
    }

    pub fn column(&self, i: usize) -> DVector<f64> {
        self.vectors.column(i).into_owned()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.vectors
    }
}

/// Pairwise inner products `(<φ_i, φ_j>)_{ij}` of a frame.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix(DMatrix<f64>);

impl GramMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn determinant(&self) -> f64 {
        self.0.clone().determinant()
    }

    /// Smallest eigenvalue; PSD up to roundoff for any real frame.
    pub fn min_eigenvalue(&self) -> f64 {
        symmetric_eigenvalues_desc(&self.0).last().copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug)]
pub struct WeightedForm {
    v: DMatrix<f64>,
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
    min_eig: f64,
    max_eig: f64,
}

/// A symmetric positive-definite bilinear form on the coordinate space.
#[derive(Clone, Debug)]
pub enum InnerProduct {
    Identity(usize),
    Weighted(WeightedForm),
}

impl InnerProduct {
    pub fn identity(dim: usize) -> Self {
        InnerProduct::Identity(dim)
    }

    /// Builds `<x, y> = x^T V y`. `V` must be symmetric and positive definite.
    pub fn weighted(v: DMatrix<f64>) -> Result<Self> {
        if v.nrows() != v.ncols() {
            return Err(Error::DimensionMismatch { expected: v.nrows(), found: v.ncols() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("form has non-finite entries".into()));
        }
        let scale = v.amax().max(f64::MIN_POSITIVE);
        let asym = (&v - v.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::InvalidArgument(format!("form is not symmetric (asymmetry {asym:e})")));
        }
        let v = symmetrize(&v);
        let eig = SymmetricEigen::new(v.clone());
        let min_eig = eig.eigenvalues.min();
        let max_eig = eig.eigenvalues.max();
        if min_eig <= 0.0 {
            return Err(Error::NotPositiveDefinite { context: "inner product".into(), min_eigenvalue: min_eig });
        }
        let q = &eig.eigenvectors;
        let sqrt = q * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * q.transpose();
        let inv_sqrt = q * DMatrix::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x.sqrt())) * q.transpose();
        Ok(InnerProduct::Weighted(WeightedForm { v, sqrt, inv_sqrt, min_eig, max_eig }))
    }

    pub fn dim(&self) -> usize {
        match self {
            InnerProduct::Identity(n) => *n,
            InnerProduct::Weighted(w) => w.v.nrows(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, InnerProduct::Identity(_))
    }

    /// Dense matrix of the form.
    pub fn matrix(&self) -> DMatrix<f64> {
        match self {
            InnerProduct::Identity(n) => DMatrix::identity(*n, *n),
            InnerProduct::Weighted(w) => w.v.clone(),
        }
    }

    /// `V x`.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            InnerProduct::Identity(_) => x.clone(),
            InnerProduct::Weighted(w) => &w.v * x,
        }
    }

    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        match self {
            InnerProduct::Identity(_) => x.dot(y),
            InnerProduct::Weighted(w) => x.dot(&(&w.v * y)),
        }
    }

    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    /// `(λ_min, λ_max)` of the form relative to the Euclidean one.
    pub fn extreme_eigenvalues(&self) -> (f64, f64) {
        match self {
            InnerProduct::Identity(_) => (1.0, 1.0),
            InnerProduct::Weighted(w) => (w.min_eig, w.max_eig),
        }
    }

    /// `V^{1/2}`.
    pub fn sqrt_matrix(&self) -> DMatrix<f64> {
        match self {
            InnerProduct::Identity(n) => DMatrix::identity(*n, *n),
            InnerProduct::Weighted(w) => w.sqrt.clone(),
        }
    }

    /// `V^{-1/2}`.
    pub fn inv_sqrt_matrix(&self) -> DMatrix<f64> {
        match self {
            InnerProduct::Identity(n) => DMatrix::identity(*n, *n),
            InnerProduct::Weighted(w) => w.inv_sqrt.clone(),
        }
    }

    /// `U L U^{-1}` with `U = V^{1/2}`: the Euclidean representative of `L`.
    pub fn congruence(&self, l: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            InnerProduct::Identity(_) => l.clone(),
            InnerProduct::Weighted(w) => &w.sqrt * l * &w.inv_sqrt,
        }
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix in nonincreasing order.
pub fn symmetric_eigenvalues_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

pub fn singular_values_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn gram(frame: &VectorFrame, form: &InnerProduct) -> Result<GramMatrix> {
    check_dim(form.dim(), frame.ambient_dim())?;
    let phi = frame.matrix();
    let g = phi.transpose() * form.apply(phi);
    Ok(GramMatrix(symmetrize(&g)))
}

/// Volume of the parallelepiped spanned by the frame: `sqrt(det gram)`.
pub fn wedge_norm(frame: &VectorFrame, form: &InnerProduct) -> Result<f64> {
    let g = gram(frame, form)?;
    let det = g.determinant();
    // Scale-free zero test: compare against the product of the squared lengths.
    let lengths: f64 = (0..g.0.nrows()).map(|i| g.0[(i, i)].max(0.0)).product();
    if det <= TOL_PSD * lengths {
        return Ok(0.0);
    }
    Ok(det.sqrt())
}

/// Result of [`gram_orthogonalize`].
#[derive(Clone, Debug)]
pub struct Orthogonalized {
    pub frame: VectorFrame,
    /// Indices whose residual fell below [`TOL_RANK`]; they were replaced by zero.
    pub dependent: Vec<usize>,
}

/// Gram orthogonalization without normalization.
///
/// Output vectors are pairwise orthogonal under `form`, span the same flag of
/// subspaces, leave the wedge product unchanged and are never longer than the
/// corresponding inputs.
pub fn gram_orthogonalize(frame: &VectorFrame, form: &InnerProduct) -> Result<Orthogonalized> {
    check_dim(form.dim(), frame.ambient_dim())?;
    let d = frame.len();
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(d);
    let mut dependent = Vec::new();
    for i in 0..d {
        let original = frame.column(i);
        let original_norm = form.norm(&original);
        let mut v = original.clone();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for q in out.iter() {
                let qq = form.inner(q, q);
                if qq > 0.0 {
                    let coef = form.inner(&v, q) / qq;
                    v.axpy(-coef, q, 1.0);
                }
            }
        }
        let residual = form.norm(&v);
        if residual <= TOL_RANK * original_norm || original_norm == 0.0 {
            dependent.push(i);
            v.fill(0.0);
        }
        out.push(v);
    }
    Ok(Orthogonalized { frame: VectorFrame { vectors: DMatrix::from_columns(&out) }, dependent })
}

/// Orthonormalizes the frame under `form`. Returns the orthonormal frame and
/// the lengths of the orthogonalized vectors (the diagonal of the `R` factor).
pub fn orthonormalize(frame: &VectorFrame, form: &InnerProduct) -> Result<(VectorFrame, Vec<f64>)> {
    let orth = gram_orthogonalize(frame, form)?;
    if !orth.dependent.is_empty() {
        return Err(Error::DegenerateFrame { wedge_norm: 0.0 });
    }
    let mut m = orth.frame.vectors;
    let mut lengths = Vec::with_capacity(m.ncols());
    for j in 0..m.ncols() {
        let col = m.column(j).into_owned();
        let len = form.norm(&col);
        m.column_mut(j).scale_mut(1.0 / len);
        lengths.push(len);
    }
    Ok((VectorFrame { vectors: m }, lengths))
}

/// Maximal expansion factor of d-dimensional volumes under `L`, measured in
/// `form`: the product of the `d` largest singular values of `U L U^{-1}`.
pub fn omega_d(l: &DenseOperator, d: usize, form: &InnerProduct) -> Result<f64> {
    check_dim(form.dim(), l.dim())?;
    if d == 0 || d > l.dim() {
        return Err(Error::InvalidArgument(format!("d = {d} must lie in 1..={}", l.dim())));
    }
    let sv = singular_values_desc(&form.congruence(l.matrix()));
    Ok(sv[..d].iter().product())
}

/// `Λ^d L` on a decomposable element: applies `L` to every vector of the frame.
pub fn lambda_d_apply(l: &DenseOperator, frame: &VectorFrame) -> Result<VectorFrame> {
    check_dim(l.dim(), frame.ambient_dim())?;
    Ok(VectorFrame { vectors: l.matrix() * frame.matrix() })
}

fn check_nondegenerate(frame: &VectorFrame, form: &InnerProduct) -> Result<()> {
    let w = wedge_norm(frame, form)?;
    let lengths: f64 = (0..frame.len()).map(|i| form.norm(&frame.column(i))).product();
    if w <= TOL_RANK * lengths || w == 0.0 {
        return Err(Error::DegenerateFrame { wedge_norm: w });
    }
    Ok(())
}

/// `(L_d(φ_1∧…∧φ_d), φ_1∧…∧φ_d) / ‖φ_1∧…∧φ_d‖²`, evaluated through the
/// derivation-style expansion `Σ_i φ_1∧…∧(Lφ_i)∧…∧φ_d`: each summand is the
/// Gram determinant with row `i` replaced by `<Lφ_i, φ_j>`.
pub fn trace_form(l: &DenseOperator, frame: &VectorFrame, form: &InnerProduct) -> Result<f64> {
    check_dim(l.dim(), frame.ambient_dim())?;
    check_nondegenerate(frame, form)?;
    let g = gram(frame, form)?.0;
    let phi = frame.matrix();
    // mixed[i][j] = <L φ_i, φ_j>
    let mixed = (l.matrix() * phi).transpose() * form.apply(phi);
    let det_g = g.clone().determinant();
    let mut total = 0.0;
    for i in 0..frame.len() {
        let mut gi = g.clone();
        gi.row_mut(i).copy_from(&mixed.row(i));
        total += gi.determinant();
    }
    Ok(total / det_g)
}

/// `Tr(Q L Q)` from an orthonormal basis of the span of the frame.
pub fn projected_trace(l: &DenseOperator, frame: &VectorFrame, form: &InnerProduct) -> Result<f64> {
    check_dim(l.dim(), frame.ambient_dim())?;
    check_nondegenerate(frame, form)?;
    let (basis, _) = orthonormalize(frame, form)?;
    let psi = basis.matrix();
    let lpsi = l.matrix() * psi;
    let vpsi = form.apply(psi);
    Ok((0..psi.ncols()).map(|i| lpsi.column(i).dot(&vpsi.column(i))).sum())
}

/// Eigenvalues `μ_1 ≥ μ_2 ≥ …` of the part of `L` that is symmetric with
/// respect to `form`. In finite dimension they realize the min-max values.
pub fn mu_spectrum(l: &DenseOperator, form: &InnerProduct) -> Result<Vec<f64>> {
    check_dim(form.dim(), l.dim())?;
    Ok(symmetric_eigenvalues_desc(&form.congruence(l.matrix())))
}

/// d-dimensional trace: sum of the `d` largest values of [`mu_spectrum`].
pub fn trace_d(l: &DenseOperator, d: usize, form: &InnerProduct) -> Result<f64> {
    if d == 0 || d > l.dim() {
        return Err(Error::InvalidArgument(format!("d = {d} must lie in 1..={}", l.dim())));
    }
    Ok(mu_spectrum(l, form)?[..d].iter().sum())
}

/// Running sums `Tr_1, Tr_2, …, Tr_dim` from one eigensolve.
pub fn trace_d_all(l: &DenseOperator, form: &InnerProduct) -> Result<Vec<f64>> {
    let mu = mu_spectrum(l, form)?;
    Ok(mu
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn frame(cols: &[&[f64]]) -> VectorFrame {
        let cols: Vec<DVector<f64>> = cols.iter().map(|c| DVector::from_column_slice(c)).collect();
        VectorFrame::from_columns(&cols).unwrap()
    }

    #[test]
    fn gram_of_orthonormal_pair_is_identity() {
        let g = gram(&frame(&[&[1.0, 0.0], &[0.0, 1.0]]), &InnerProduct::identity(2)).unwrap();
        assert_eq!(g.matrix(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn gram_of_sheared_pair() {
        let g = gram(&frame(&[&[1.0, 0.0], &[1.0, 1.0]]), &InnerProduct::identity(2)).unwrap();
        assert_eq!(g.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn repeated_vector_gives_singular_gram() {
        let g = gram(&frame(&[&[0.3, -1.2, 2.0], &[0.3, -1.2, 2.0]]), &InnerProduct::identity(3)).unwrap();
        assert_abs_diff_eq!(g.determinant(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gram_rejects_dimension_mismatch() {
        let err = gram(&frame(&[&[1.0, 0.0]]), &InnerProduct::identity(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn wedge_norm_examples() {
        let id = InnerProduct::identity(2);
        assert_abs_diff_eq!(wedge_norm(&frame(&[&[1.0, 0.0], &[0.0, 1.0]]), &id).unwrap(), 1.0);
        assert_abs_diff_eq!(wedge_norm(&frame(&[&[1.0, 0.0], &[1.0, 1.0]]), &id).unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(wedge_norm(&frame(&[&[1.0, 0.0], &[2.0, 0.0]]), &id).unwrap(), 0.0);
    }

    #[test]
    fn orthogonalize_examples() {
        let id = InnerProduct::identity(2);
        let out = gram_orthogonalize(&frame(&[&[1.0, 0.0], &[1.0, 1.0]]), &id).unwrap();
        assert!(out.dependent.is_empty());
        assert_abs_diff_eq!(out.frame.matrix()[(0, 1)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.frame.matrix()[(1, 1)], 1.0, epsilon = 1e-15);

        let same = frame(&[&[2.0, 0.0], &[0.0, 3.0]]);
        let out = gram_orthogonalize(&same, &id).unwrap();
        assert_eq!(out.frame.matrix(), same.matrix());

        let out = gram_orthogonalize(&frame(&[&[1.0, 0.0], &[1.0, 0.0]]), &id).unwrap();
        assert_eq!(out.dependent, vec![1]);
        assert_eq!(out.frame.column(0), DVector::from_column_slice(&[1.0, 0.0]));
        assert_eq!(out.frame.column(1), DVector::zeros(2));
    }

    #[test]
    fn omega_examples() {
        let id3 = InnerProduct::identity(3);
        let l = DenseOperator::from_diagonal(&[2.0, 1.0, 0.5]);
        assert_abs_diff_eq!(omega_d(&l, 2, &id3).unwrap(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(omega_d(&l, 3, &id3).unwrap(), 1.0, epsilon = 1e-14);
        for d in 1..=3 {
            assert_abs_diff_eq!(omega_d(&DenseOperator::identity(3), d, &id3).unwrap(), 1.0, epsilon = 1e-14);
        }
        assert!(omega_d(&l, 4, &id3).is_err());
        assert!(omega_d(&l, 0, &id3).is_err());
    }

    #[test]
    fn lambda_d_apply_examples() {
        let f = frame(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let id = InnerProduct::identity(2);
        assert_eq!(lambda_d_apply(&DenseOperator::identity(2), &f).unwrap(), f);
        let scaled = lambda_d_apply(&DenseOperator::from_diagonal(&[2.0, 3.0]), &f).unwrap();
        assert_abs_diff_eq!(wedge_norm(&scaled, &id).unwrap(), 6.0, epsilon = 1e-13);
        let zero = lambda_d_apply(&DenseOperator::zeros(2), &f).unwrap();
        assert_eq!(wedge_norm(&zero, &id).unwrap(), 0.0);
        assert!(lambda_d_apply(&DenseOperator::identity(3), &f).is_err());
    }

    #[test]
    fn trace_form_examples() {
        let id = InnerProduct::identity(3);
        let f = frame(&[&[1.0, 2.0, 0.0], &[0.0, 1.0, -1.0]]);
        let c = 1.7;
        assert_abs_diff_eq!(
            trace_form(&DenseOperator::scaled_identity(3, c), &f, &id).unwrap(),
            2.0 * c,
            epsilon = 1e-13
        );
        let l = DenseOperator::from_diagonal(&[3.0, 1.0, -1.0]);
        let e12 = VectorFrame::canonical(3, 2).unwrap();
        assert_abs_diff_eq!(trace_form(&l, &e12, &id).unwrap(), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn trace_form_refuses_degenerate_frames() {
        let id = InnerProduct::identity(2);
        let err = trace_form(&DenseOperator::identity(2), &frame(&[&[1.0, 1.0], &[2.0, 2.0]]), &id).unwrap_err();
        assert!(matches!(err, Error::DegenerateFrame { .. }));
    }

    #[test]
    fn mu_spectrum_and_trace_d_examples() {
        let id = InnerProduct::identity(3);
        let l = DenseOperator::from_diagonal(&[-1.0, 3.0, 1.0]);
        let mu = mu_spectrum(&l, &id).unwrap();
        assert_abs_diff_eq!(mu[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mu[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mu[2], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(trace_d(&l, 2, &id).unwrap(), 4.0, epsilon = 1e-14);
        assert!(mu_spectrum(&DenseOperator::identity(4), &InnerProduct::identity(4))
            .unwrap()
            .iter()
            .all(|&m| (m - 1.0).abs() < 1e-14));
        let gamma = 0.3;
        for d in 1..=3 {
            assert_abs_diff_eq!(
                trace_d(&DenseOperator::scaled_identity(3, -gamma), d, &id).unwrap(),
                -gamma * d as f64,
                epsilon = 1e-14
            );
        }
        assert!(trace_d(&l, 4, &id).is_err());
    }

    #[test]
    fn weighted_form_rejects_indefinite_matrices() {
        let v = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(InnerProduct::weighted(v), Err(Error::NotPositiveDefinite { .. })));
        let v = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(InnerProduct::weighted(v).is_err());
    }

    #[test]
    fn weighted_form_congruence_preserves_norms() {
        let v = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let form = InnerProduct::weighted(v.clone()).unwrap();
        let x = DVector::from_column_slice(&[0.3, -1.1]);
        let InnerProduct::Weighted(w) = &form else { unreachable!() };
        let ux = &w.sqrt * &x;
        assert_abs_diff_eq!(ux.norm_squared(), x.dot(&(&v * &x)), epsilon = 1e-14);
    }
}
