//! Linear algebra for SO(n) and SE(n).
//!
//! Group elements are pairs `(A, a)` of a rotation and a translation, algebra
//! elements are pairs `(Z, z)` of a skew matrix and a vector. The group law is
//! `(A2, a2)(A1, a1) = (A2 A1, A2 a1 + a2)`.
//!
//! Exponentials use closed forms for `n <= 3` and diagonal Padé with
//! scaling and squaring otherwise. The translation part of the SE(n)
//! exponential, `∫₀ᵗ e^{sX} w ds`, is evaluated as `t φ₁(tX) w` where
//! `φ₁(Y) = Σ Yᵏ/(k+1)!`, so singular `X` never has to be inverted.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Largest tolerated `‖AᵀA − I‖∞` before a rotation is re-orthonormalized.
pub const ORTHO_DRIFT_TOL: f64 = 1e-9;

/// Construction of a group element rejects matrices further than this from SO(n).
const ORTHO_REJECT_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not a rotation (orthogonality defect {defect:.3e}, det {det:.6})")]
    NotRotation { defect: f64, det: f64 },
}

fn check_dim(expected: usize, got: usize) -> Result<(), LieError> {
    if expected == got {
        Ok(())
    } else {
        Err(LieError::DimensionMismatch { expected, got })
    }
}

/// An element of 𝔰𝔬(n). Antisymmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix(DMatrix<f64>);

impl SkewMatrix {
    pub fn zeros(n: usize) -> Self {
        SkewMatrix(DMatrix::zeros(n, n))
    }

    /// Builds `(M − Mᵀ)/2`.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self, LieError> {
        if !m.is_square() {
            return Err(LieError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let t = m.transpose();
        Ok(SkewMatrix((m - t) * 0.5))
    }

    /// Antisymmetrizes a matrix known to be square.
    pub(crate) fn from_square(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SkewMatrix((m - t) * 0.5)
    }

    /// The generator `e_i ∧ e_j`.
    pub fn generator(n: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(n, n);
        if i != j {
            m[(j, i)] = 1.0;
            m[(i, j)] = -1.0;
        }
        SkewMatrix(m)
    }

    /// Number of independent entries, `n(n−1)/2`.
    pub fn coord_len(n: usize) -> usize {
        n * n.saturating_sub(1) / 2
    }

    /// Upper-triangular entries `Z[i][j]`, `i < j`, in row-major order.
    pub fn to_coords(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(Self::coord_len(n));
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn from_coords(n: usize, coords: &[f64]) -> Result<Self, LieError> {
        check_dim(Self::coord_len(n), coords.len())?;
        let mut m = DMatrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                m[(i, j)] = coords[k];
                m[(j, i)] = -coords[k];
                k += 1;
            }
        }
        Ok(SkewMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.0 * v
    }

    /// `ZW − WZ`.
    pub fn commutator(&self, other: &SkewMatrix) -> SkewMatrix {
        SkewMatrix::from_square(&self.0 * &other.0 - &other.0 * &self.0)
    }

    /// `Tr(Z Wᵀ)`.
    pub fn trace_inner(&self, other: &SkewMatrix) -> f64 {
        self.0.component_mul(&other.0).sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, s: f64) -> SkewMatrix {
        SkewMatrix(&self.0 * s)
    }
}

impl Add for &SkewMatrix {
    type Output = SkewMatrix;
    fn add(self, rhs: &SkewMatrix) -> SkewMatrix {
        SkewMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &SkewMatrix {
    type Output = SkewMatrix;
    fn sub(self, rhs: &SkewMatrix) -> SkewMatrix {
        SkewMatrix(&self.0 - &rhs.0)
    }
}

impl Neg for &SkewMatrix {
    type Output = SkewMatrix;
    fn neg(self) -> SkewMatrix {
        SkewMatrix(-&self.0)
    }
}

/// `(a ∧ b)_{ij} = a_j b_i − a_i b_j`.
pub fn wedge(a: &DVector<f64>, b: &DVector<f64>) -> Result<SkewMatrix, LieError> {
    check_dim(a.len(), b.len())?;
    Ok(SkewMatrix(b * a.transpose() - a * b.transpose()))
}

/// Wedge product for vectors already known to share a dimension.
pub(crate) fn wedge_unchecked(a: &DVector<f64>, b: &DVector<f64>) -> SkewMatrix {
    SkewMatrix(b * a.transpose() - a * b.transpose())
}

/// `Ad_A Z = A Z A⁻¹` for an orthogonal `A`.
pub fn adjoint(a: &DMatrix<f64>, z: &SkewMatrix) -> SkewMatrix {
    SkewMatrix::from_square(a * &z.0 * a.transpose())
}

/// `‖AᵀA − I‖∞` (max absolute entry).
pub fn orthogonality_defect(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    (a.transpose() * a - DMatrix::identity(n, n)).amax()
}

/// Nearest rotation in the Frobenius sense (polar factor), with `det = +1`.
pub fn orthonormalize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let mut u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = &u * &v_t;
    if r.determinant() < 0.0 {
        let last = u.ncols() - 1;
        u.column_mut(last).neg_mut();
        r = &u * &v_t;
    }
    r
}

/// A rigid placement `(A, a)`, `x ↦ A x + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanElement {
    rotation: DMatrix<f64>,
    translation: DVector<f64>,
}

impl EuclideanElement {
    pub fn identity(n: usize) -> Self {
        EuclideanElement {
            rotation: DMatrix::identity(n, n),
            translation: DVector::zeros(n),
        }
    }

    /// Validates `A ∈ SO(n)` (re-orthonormalizing small drift).
    pub fn new(rotation: DMatrix<f64>, translation: DVector<f64>) -> Result<Self, LieError> {
        if !rotation.is_square() {
            return Err(LieError::NotSquare {
                rows: rotation.nrows(),
                cols: rotation.ncols(),
            });
        }
        check_dim(rotation.nrows(), translation.len())?;
        let defect = orthogonality_defect(&rotation);
        let det = rotation.determinant();
        if defect > ORTHO_REJECT_TOL || det <= 0.0 {
            return Err(LieError::NotRotation { defect, det });
        }
        Ok(EuclideanElement {
            rotation,
            translation,
        }
        .renormalized())
    }

    pub fn from_translation(a: DVector<f64>) -> Self {
        let n = a.len();
        EuclideanElement {
            rotation: DMatrix::identity(n, n),
            translation: a,
        }
    }

    pub(crate) fn from_parts_unchecked(rotation: DMatrix<f64>, translation: DVector<f64>) -> Self {
        EuclideanElement {
            rotation,
            translation,
        }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &DVector<f64> {
        &self.translation
    }

    /// Image of a point: `A b + a`.
    pub fn act(&self, b: &DVector<f64>) -> DVector<f64> {
        &self.rotation * b + &self.translation
    }

    /// `self · rhs`.
    pub fn compose(&self, rhs: &EuclideanElement) -> EuclideanElement {
        EuclideanElement {
            rotation: &self.rotation * &rhs.rotation,
            translation: &self.rotation * &rhs.translation + &self.translation,
        }
    }

    pub fn inverse(&self) -> EuclideanElement {
        let at = self.rotation.transpose();
        let t = -(&at * &self.translation);
        EuclideanElement {
            rotation: at,
            translation: t,
        }
    }

    pub fn orthogonality_defect(&self) -> f64 {
        orthogonality_defect(&self.rotation)
    }

    /// Replaces the rotation by its polar factor when drift exceeds [`ORTHO_DRIFT_TOL`].
    pub fn renormalized(mut self) -> Self {
        if orthogonality_defect(&self.rotation) > ORTHO_DRIFT_TOL {
            self.rotation = orthonormalize(&self.rotation);
        }
        self
    }

    /// Max-entry distance to another element (rotation and translation).
    pub fn distance(&self, other: &EuclideanElement) -> f64 {
        (&self.rotation - &other.rotation)
            .amax()
            .max((&self.translation - &other.translation).amax())
    }
}

/// `(A2 A1, A2 a1 + a2)`.
pub fn group_mul(
    g2: &EuclideanElement,
    g1: &EuclideanElement,
) -> Result<EuclideanElement, LieError> {
    check_dim(g2.dim(), g1.dim())?;
    Ok(g2.compose(g1))
}

pub fn group_inv(g: &EuclideanElement) -> EuclideanElement {
    g.inverse()
}

/// A left-translated velocity `(Z, z) ∈ 𝔰𝔢(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraVector {
    pub angular: SkewMatrix,
    pub linear: DVector<f64>,
}

impl AlgebraVector {
    pub fn new(angular: SkewMatrix, linear: DVector<f64>) -> Result<Self, LieError> {
        check_dim(angular.dim(), linear.len())?;
        Ok(AlgebraVector { angular, linear })
    }

    pub fn zeros(n: usize) -> Self {
        AlgebraVector {
            angular: SkewMatrix::zeros(n),
            linear: DVector::zeros(n),
        }
    }

    pub fn translation(z: DVector<f64>) -> Self {
        let n = z.len();
        AlgebraVector {
            angular: SkewMatrix::zeros(n),
            linear: z,
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    /// `n(n+1)/2`.
    pub fn coord_len(n: usize) -> usize {
        SkewMatrix::coord_len(n) + n
    }

    /// Skew coordinates followed by the linear part.
    pub fn to_coords(&self) -> Vec<f64> {
        let mut c = self.angular.to_coords();
        c.extend(self.linear.iter());
        c
    }

    pub fn from_coords(n: usize, coords: &[f64]) -> Result<Self, LieError> {
        check_dim(Self::coord_len(n), coords.len())?;
        let k = SkewMatrix::coord_len(n);
        Ok(AlgebraVector {
            angular: SkewMatrix::from_coords(n, &coords[..k])?,
            linear: DVector::from_column_slice(&coords[k..]),
        })
    }

    /// `[(X,x),(Y,y)] = (XY − YX, Xy − Yx)`.
    pub fn bracket(&self, other: &AlgebraVector) -> AlgebraVector {
        AlgebraVector {
            angular: self.angular.commutator(&other.angular),
            linear: self.angular.apply(&other.linear) - other.angular.apply(&self.linear),
        }
    }

    /// `Tr(Z Wᵀ) + z·w`.
    pub fn trace_inner(&self, other: &AlgebraVector) -> f64 {
        self.angular.trace_inner(&other.angular) + self.linear.dot(&other.linear)
    }

    pub fn scale(&self, s: f64) -> AlgebraVector {
        AlgebraVector {
            angular: self.angular.scale(s),
            linear: &self.linear * s,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.angular.as_matrix().amax().max(self.linear.amax())
    }
}

impl Add for &AlgebraVector {
    type Output = AlgebraVector;
    fn add(self, rhs: &AlgebraVector) -> AlgebraVector {
        AlgebraVector {
            angular: &self.angular + &rhs.angular,
            linear: &self.linear + &rhs.linear,
        }
    }
}

impl Sub for &AlgebraVector {
    type Output = AlgebraVector;
    fn sub(self, rhs: &AlgebraVector) -> AlgebraVector {
        AlgebraVector {
            angular: &self.angular - &rhs.angular,
            linear: &self.linear - &rhs.linear,
        }
    }
}

impl Mul<f64> for &AlgebraVector {
    type Output = AlgebraVector;
    fn mul(self, s: f64) -> AlgebraVector {
        self.scale(s)
    }
}

/// `Ad_g (W, w) = (A W Aᵀ, A w − (A W Aᵀ) a)`.
pub fn group_adjoint(g: &EuclideanElement, u: &AlgebraVector) -> AlgebraVector {
    let w = adjoint(g.rotation(), &u.angular);
    let lin = g.rotation() * &u.linear - w.apply(g.translation());
    AlgebraVector {
        angular: w,
        linear: lin,
    }
}

// -- exponentials -------------------------------------------------------------

const PADE6: [f64; 7] = [
    1.0,
    1.0 / 2.0,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn squaring_steps(m: &DMatrix<f64>) -> u32 {
    let norm = one_norm(m);
    if norm <= 0.5 {
        0
    } else {
        (norm / 0.5).log2().ceil() as u32
    }
}

/// Diagonal [6/6] Padé approximant, accurate for `‖Y‖₁ ≤ 1/2`.
fn pade_exp(y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = y.nrows();
    let mut num = DMatrix::identity(n, n) * PADE6[0];
    let mut den = num.clone();
    let mut pow = DMatrix::identity(n, n);
    for (k, c) in PADE6.iter().enumerate().skip(1) {
        pow = &pow * y;
        num += &pow * *c;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        den += &pow * (sign * c);
    }
    den.lu().solve(&num).expect("Padé denominator is nonsingular")
}

/// `φ₁(Y) = Σ Yᵏ/(k+1)!` truncated for `‖Y‖₁ ≤ 1/2`.
fn phi1_series(y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = y.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=18 {
        term = &term * y / ((k + 1) as f64);
        sum += &term;
    }
    sum
}

/// Matrix exponential of an arbitrary square matrix by scaling and squaring.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let s = squaring_steps(m);
    let y = m / 2f64.powi(s as i32);
    let mut e = pade_exp(&y);
    for _ in 0..s {
        e = &e * &e;
    }
    e
}

/// `(e^M, φ₁(M))` jointly, using `φ₁(2Y) = ½(I + e^Y) φ₁(Y)`.
fn expm_phi1(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let s = squaring_steps(m);
    let y = m / 2f64.powi(s as i32);
    let mut e = pade_exp(&y);
    let mut p = phi1_series(&y);
    let id = DMatrix::<f64>::identity(n, n);
    for _ in 0..s {
        p = (&id + &e) * &p * 0.5;
        e = &e * &e;
    }
    (e, p)
}

fn so3_axis(z: &DMatrix<f64>) -> (f64, f64, f64) {
    (z[(2, 1)], z[(0, 2)], z[(1, 0)])
}

/// `(sin θ/θ, (1−cos θ)/θ²)` with series near zero.
fn rodrigues_coeffs(theta: f64) -> (f64, f64) {
    if theta < 1e-4 {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    }
}

/// Rotation `e^X`.
pub fn so_exp(x: &SkewMatrix) -> DMatrix<f64> {
    let n = x.dim();
    let m = x.as_matrix();
    match n {
        0 => DMatrix::zeros(0, 0),
        1 => DMatrix::identity(1, 1),
        2 => {
            let th = m[(1, 0)];
            let (s, c) = th.sin_cos();
            DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
        }
        3 => {
            let (wx, wy, wz) = so3_axis(m);
            let theta = (wx * wx + wy * wy + wz * wz).sqrt();
            let (a, b) = rodrigues_coeffs(theta);
            DMatrix::identity(3, 3) + m * a + (m * m) * b
        }
        _ => expm(m),
    }
}

/// `∫₀¹ e^{sY} ds` for skew `Y`.
fn integrated_exp(y: &SkewMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = y.dim();
    let m = y.as_matrix();
    match n {
        1 => (DMatrix::identity(1, 1), DMatrix::identity(1, 1)),
        2 => {
            let th = m[(1, 0)];
            let (s, c) = th.sin_cos();
            let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
            let (p, q) = if th.abs() < 1e-4 {
                let t2 = th * th;
                (1.0 - t2 / 6.0 + t2 * t2 / 120.0, th / 2.0 - th * t2 / 24.0)
            } else {
                (s / th, (1.0 - c) / th)
            };
            // p I + q J
            let v = DMatrix::from_row_slice(2, 2, &[p, -q, q, p]);
            (rot, v)
        }
        3 => {
            let (wx, wy, wz) = so3_axis(m);
            let theta = (wx * wx + wy * wy + wz * wz).sqrt();
            let (a, b) = rodrigues_coeffs(theta);
            let c = if theta < 1e-4 {
                let t2 = theta * theta;
                1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
            } else {
                (theta - theta.sin()) / (theta * theta * theta)
            };
            let m2 = m * m;
            let rot = DMatrix::identity(3, 3) + m * a + &m2 * b;
            let v = DMatrix::identity(3, 3) + m * b + m2 * c;
            (rot, v)
        }
        _ => expm_phi1(m),
    }
}

/// One-parameter subgroup `exp(t (X, w)) = (e^{tX}, ∫₀ᵗ e^{sX} w ds)`.
pub fn se_exp(x: &SkewMatrix, w: &DVector<f64>, t: f64) -> Result<EuclideanElement, LieError> {
    check_dim(x.dim(), w.len())?;
    let y = x.scale(t);
    let (rot, v) = integrated_exp(&y);
    Ok(EuclideanElement::from_parts_unchecked(rot, v * w * t))
}

/// `exp` of an algebra element scaled by `t`.
pub fn exp_algebra(xi: &AlgebraVector, t: f64) -> EuclideanElement {
    let y = xi.angular.scale(t);
    let (rot, v) = integrated_exp(&y);
    EuclideanElement::from_parts_unchecked(rot, v * &xi.linear * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rvec(rng: &mut impl Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn rskew(rng: &mut impl Rng, n: usize, scale: f64) -> SkewMatrix {
        SkewMatrix::from_square(DMatrix::from_fn(n, n, |_, _| {
            rng.random_range(-scale..scale)
        }))
    }

    /// Taylor series on `M / 2^s` followed by squaring; independent of the Padé path.
    fn taylor_expm(m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = m.nrows();
        let s = (m.norm() / 0.1).log2().ceil().max(0.0) as i32;
        let y = m / 2f64.powi(s);
        let mut term = DMatrix::identity(n, n);
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &y / k as f64;
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn wedge_of_basis_vectors_in_plane_is_j() {
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let e2 = DVector::from_vec(vec![0.0, 1.0]);
        let j = wedge(&e1, &e2).unwrap();
        assert_eq!(
            j.as_matrix(),
            &DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
        );
    }

    #[test]
    fn wedge_self_is_zero_and_rejects_mismatch() {
        let a = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        assert_eq!(wedge(&a, &a).unwrap().norm(), 0.0);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(
            wedge(&a, &b),
            Err(LieError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn wedge_action_matches_dot_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (a, b, u) = (rvec(&mut rng, 4), rvec(&mut rng, 4), rvec(&mut rng, 4));
            let lhs = wedge(&a, &b).unwrap().apply(&u);
            let rhs = &b * a.dot(&u) - &a * b.dot(&u);
            assert!((lhs - rhs).amax() < 1e-14);
        }
    }

    #[test]
    fn wedge_trace_pairing_follows_entrywise_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let v: Vec<DVector<f64>> = (0..4).map(|_| rvec(&mut rng, 4)).collect();
            let ab = wedge(&v[0], &v[1]).unwrap();
            let cd = wedge(&v[2], &v[3]).unwrap();
            let entrywise = 2.0 * (v[0].dot(&v[2]) * v[1].dot(&v[3]) - v[0].dot(&v[3]) * v[1].dot(&v[2]));
            assert!((ab.trace_inner(&cd) - entrywise).abs() < 1e-13);
        }
        // the one-term identity (a·c)(b·d) is off by the factor 2 and the cross term
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let e2 = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let j = wedge(&e1, &e2).unwrap();
        assert_eq!(j.trace_inner(&j), 2.0);
        assert_eq!(j.trace_inner(&wedge(&e2, &e1).unwrap()), -2.0);
    }

    #[test]
    fn group_product_examples() {
        let n = 2;
        let g = EuclideanElement::new(
            so_exp(&SkewMatrix::generator(2, 0, 1).scale(0.7)),
            DVector::from_vec(vec![1.0, -2.0]),
        )
        .unwrap();
        let id = EuclideanElement::identity(n);
        assert!(group_mul(&g, &id).unwrap().distance(&g) < 1e-15);
        assert!(group_mul(&g, &g.inverse()).unwrap().distance(&id) < 1e-15);

        let quarter = EuclideanElement::from_parts_unchecked(
            so_exp(&SkewMatrix::generator(2, 0, 1).scale(std::f64::consts::FRAC_PI_2)),
            DVector::zeros(2),
        );
        let shift = EuclideanElement::from_translation(DVector::from_vec(vec![1.0, 0.0]));
        let p = group_mul(&quarter, &shift).unwrap();
        assert!((p.translation() - DVector::from_vec(vec![0.0, 1.0])).amax() < 1e-15);
        assert!((p.rotation() - quarter.rotation()).amax() < 1e-15);
    }

    #[test]
    fn inverse_examples() {
        let a = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let g = EuclideanElement::from_translation(a.clone());
        assert_eq!(g.inverse().translation(), &(-a));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = EuclideanElement::new(so_exp(&rskew(&mut rng, 3, 2.0)), rvec(&mut rng, 3)).unwrap();
        assert!(g.inverse().inverse().distance(&g) < 1e-15);
    }

    #[test]
    fn new_rejects_reflections() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            EuclideanElement::new(r, DVector::zeros(2)),
            Err(LieError::NotRotation { .. })
        ));
    }

    #[test]
    fn so_exp_plane_rotation_formula() {
        let theta: f64 = 0.83;
        let a = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![0.0, 0.6, 0.8, 0.0]);
        let w = wedge(&a, &b).unwrap();
        let expected = DMatrix::<f64>::identity(4, 4) * theta.cos() + w.as_matrix() * theta.sin();
        let r = so_exp(&w.scale(theta));
        // on span{a,b}
        for v in [&a, &b] {
            assert!((&r * v - &expected * v).amax() < 1e-14);
        }
        // identity on the complement
        let c = DVector::from_vec(vec![0.0, 0.8, -0.6, 0.0]);
        assert!((&r * &c - &c).amax() < 1e-14);
    }

    #[test]
    fn so_exp_rodrigues_quarter_turn() {
        let x = SkewMatrix::generator(3, 0, 1).scale(std::f64::consts::FRAC_PI_2);
        let r = so_exp(&x);
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert!((&r * e1 - DVector::from_vec(vec![0.0, 1.0, 0.0])).amax() < 1e-15);
        assert_eq!(so_exp(&SkewMatrix::zeros(3)), DMatrix::identity(3, 3));
    }

    #[test]
    fn so_exp_matches_taylor_oracle_all_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=6 {
            for _ in 0..20 {
                let x = rskew(&mut rng, n, 3.0);
                let r = so_exp(&x);
                assert!((&r - taylor_expm(x.as_matrix())).amax() < 1e-11, "n={n}");
                assert!(orthogonality_defect(&r) < 1e-12);
            }
        }
    }

    #[test]
    fn se_exp_special_cases() {
        let w = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let g = se_exp(&SkewMatrix::zeros(3), &w, 2.0).unwrap();
        assert!((g.translation() - &w * 2.0).amax() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = rskew(&mut rng, 3, 1.0);
        let g = se_exp(&x, &DVector::zeros(3), 1.3).unwrap();
        assert_eq!(g.translation().amax(), 0.0);
        assert!((g.rotation() - so_exp(&x.scale(1.3))).amax() < 1e-15);
    }

    #[test]
    fn se_exp_matches_homogeneous_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 3, 4, 5] {
            for _ in 0..40 {
                let x = rskew(&mut rng, n, 2.0);
                let w = rvec(&mut rng, n);
                let t = rng.random_range(-2.0..2.0);
                let g = se_exp(&x, &w, t).unwrap();
                let mut h = DMatrix::zeros(n + 1, n + 1);
                h.view_mut((0, 0), (n, n)).copy_from(&(x.as_matrix() * t));
                h.view_mut((0, n), (n, 1)).copy_from(&(&w * t));
                let e = taylor_expm(&h);
                assert!((e.view((0, 0), (n, n)) - g.rotation()).amax() < 1e-10);
                assert!((e.view((0, n), (n, 1)) - g.translation()).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn se_exp_small_angle_branch_is_continuous() {
        for n in [2usize, 3] {
            let x = SkewMatrix::generator(n, 0, 1);
            let w = DVector::from_fn(n, |i, _| 1.0 + i as f64);
            let below = se_exp(&x, &w, 0.99e-4).unwrap();
            let above = se_exp(&x, &w, 1.01e-4).unwrap();
            assert!(below.distance(&above) < 1e-5);
        }
    }

    #[test]
    fn adjoint_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let z = rskew(&mut rng, 4, 1.0);
        assert!((adjoint(&DMatrix::identity(4, 4), &z).as_matrix() - z.as_matrix()).amax() < 1e-15);
        let a = so_exp(&rskew(&mut rng, 4, 2.0));
        let (u, v) = (rvec(&mut rng, 4), rvec(&mut rng, 4));
        let lhs = adjoint(&a, &wedge(&u, &v).unwrap());
        let rhs = wedge(&(&a * &u), &(&a * &v)).unwrap();
        assert!((lhs.as_matrix() - rhs.as_matrix()).amax() < 1e-14);
        let az = adjoint(&a, &z);
        assert!((az.trace_inner(&az) - z.trace_inner(&z)).abs() < 1e-13);
    }

    #[test]
    fn coordinates_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let xi = AlgebraVector::new(rskew(&mut rng, 4, 1.0), rvec(&mut rng, 4)).unwrap();
        let back = AlgebraVector::from_coords(4, &xi.to_coords()).unwrap();
        assert_eq!(back, xi);
    }

    #[test]
    fn orthonormalize_repairs_drift() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let r = so_exp(&rskew(&mut rng, 3, 2.0));
        let noisy = &r + DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1e-7..1e-7));
        let g = EuclideanElement::new(noisy, DVector::zeros(3)).unwrap();
        assert!(g.orthogonality_defect() < 1e-14);
        assert!((g.rotation() - r).amax() < 1e-6);
    }
}
