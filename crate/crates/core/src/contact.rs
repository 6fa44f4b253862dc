//! Two bodies in contact: adapted frames, the kinematic subspaces of the
//! tangent space at a boundary configuration, and strict collision maps.
//!
//! Tangent vectors at `q` are pairs of left-trivialized velocities. In
//! coordinates a pair is the concatenation of the two [`AlgebraVector`]
//! coordinate vectors, and the kinetic metric is block diagonal.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::lie::{self, AlgebraVector, EuclideanElement, SkewMatrix};
use crate::mechanics::{self, MechanicsError, RigidBody, TangentPair};

/// Tolerance for subspace membership, orthonormality and the strictness checks.
pub const SUBSPACE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContactError {
    #[error("normal vector is not unit length (norm {0})")]
    NonUnitNormal(f64),
    #[error("sign must be +1 or -1, got {0}")]
    BadSign(f64),
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("contact points do not coincide in space (distance {0:.3e})")]
    ContactMismatch(f64),
    #[error("world normals are not opposite (residual {0:.3e})")]
    NormalMismatch(f64),
    #[error("{subspace}: expected dimension {expected}, null space has dimension {got}")]
    RankDeficiency { subspace: &'static str, expected: usize, got: usize },
    #[error("roughness rank {k} out of range 0..={max}")]
    RankOutOfRange { k: usize, max: usize },
    #[error("roughness vector {index} leaves the impulse subspace (residual {residual:.3e})")]
    RoughnessOutsideImpulse { index: usize, residual: f64 },
    #[error("roughness vector {index} is not orthogonal to the unit normal (inner product {inner:.3e})")]
    RoughnessNotNormalOrthogonal { index: usize, inner: f64 },
    #[error("roughness basis is not orthonormal (Gram residual {0:.3e})")]
    RoughnessNotOrthonormal(f64),
    #[error("rough direction {index} is not tangent to the contact plane")]
    DirectionNotTangent { index: usize },
    #[error("rough directions are linearly dependent")]
    DependentDirections,
    #[error("shape operators must be {expected}x{expected}, got {rows}x{cols}")]
    ShapeDimension { expected: usize, rows: usize, cols: usize },
    #[error(transparent)]
    Mechanics(#[from] MechanicsError),
    #[error(transparent)]
    Lie(#[from] lie::LieError),
}

/// Rotation `σ` with `σ eₙ = sign·ν`.
///
/// The remaining columns come from Gram–Schmidt over `e₁, …, eₙ` in index
/// order, skipping the basis vector most parallel to `ν`. If the result has
/// determinant −1 the first column is negated.
pub fn adapted_frame(nu: &DVector<f64>, sign: f64) -> Result<DMatrix<f64>, ContactError> {
    let n = nu.len();
    if n < 2 {
        return Err(ContactError::DimensionTooSmall(n));
    }
    if (nu.norm() - 1.0).abs() > 1e-9 {
        return Err(ContactError::NonUnitNormal(nu.norm()));
    }
    if sign != 1.0 && sign != -1.0 {
        return Err(ContactError::BadSign(sign));
    }
    let last = nu / nu.norm() * sign;
    let skip = nu.iamax();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
    for i in (0..n).filter(|&i| i != skip) {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        for _ in 0..2 {
            v -= &last * last.dot(&v);
            for c in &cols {
                v -= c * c.dot(&v);
            }
        }
        let norm = v.norm();
        cols.push(v / norm);
    }
    cols.push(last);
    let mut sigma = DMatrix::from_columns(&cols);
    if sigma.determinant() < 0.0 {
        sigma.column_mut(0).neg_mut();
    }
    Ok(sigma)
}

/// A boundary configuration: the two bodies touch at `gⱼ(bⱼ)` with outward normals `νⱼ`.
#[derive(Debug, Clone)]
pub struct ContactConfiguration {
    pub g1: EuclideanElement,
    pub g2: EuclideanElement,
    pub b1: DVector<f64>,
    pub b2: DVector<f64>,
    pub nu1: DVector<f64>,
    pub nu2: DVector<f64>,
    /// `σ₁ eₙ = ν₁`
    pub sigma1: DMatrix<f64>,
    /// `σ₂ eₙ = −ν₂`
    pub sigma2: DMatrix<f64>,
    pub shape1: Option<DMatrix<f64>>,
    pub shape2: Option<DMatrix<f64>>,
}

impl ContactConfiguration {
    /// Validates the contact and derives frames with `A₁σ₁ = A₂σ₂`.
    pub fn new(
        g1: EuclideanElement,
        g2: EuclideanElement,
        b1: DVector<f64>,
        b2: DVector<f64>,
        nu1: DVector<f64>,
        nu2: DVector<f64>,
    ) -> Result<Self, ContactError> {
        let n = g1.dim();
        for v in [g2.dim(), b1.len(), b2.len(), nu1.len(), nu2.len()] {
            if v != n {
                return Err(lie::LieError::DimensionMismatch { expected: n, got: v }.into());
            }
        }
        for nu in [&nu1, &nu2] {
            if (nu.norm() - 1.0).abs() > 1e-9 {
                return Err(ContactError::NonUnitNormal(nu.norm()));
            }
        }
        let gap = (g1.act(&b1) - g2.act(&b2)).norm();
        if gap > 1e-9 {
            return Err(ContactError::ContactMismatch(gap));
        }
        let world1 = g1.rotation() * &nu1;
        let world2 = g2.rotation() * &nu2;
        let mismatch = (&world1 + &world2).norm();
        if mismatch > 1e-9 {
            return Err(ContactError::NormalMismatch(mismatch));
        }
        let sigma1 = adapted_frame(&nu1, 1.0)?;
        let sigma2 = g2.rotation().transpose() * g1.rotation() * &sigma1;
        Ok(ContactConfiguration { g1, g2, b1, b2, nu1, nu2, sigma1, sigma2, shape1: None, shape2: None })
    }

    /// Attaches shape operators expressed in the adapted frames.
    pub fn with_shape_operators(mut self, s1: DMatrix<f64>, s2: DMatrix<f64>) -> Self {
        self.shape1 = Some(s1);
        self.shape2 = Some(s2);
        self
    }

    /// A generic configuration: random placement of body 1, random contact
    /// points and normals, and a random relative twist about the normal.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self, ContactError> {
        if n < 2 {
            return Err(ContactError::DimensionTooSmall(n));
        }
        let a1 = random_rotation(n, rng);
        let t1 = random_vector(n, rng) * 2.0;
        let b1 = random_vector(n, rng);
        let b2 = random_vector(n, rng);
        let nu1 = random_unit(n, rng);
        let nu2 = random_unit(n, rng);
        let sigma1 = adapted_frame(&nu1, 1.0)?;
        // twist about eₙ
        let mut h = DMatrix::identity(n, n);
        let sub = random_rotation(n - 1, rng);
        h.view_mut((0, 0), (n - 1, n - 1)).copy_from(&sub);
        let sigma2 = adapted_frame(&nu2, -1.0)? * h;
        let a2 = lie::orthonormalize(&(&a1 * &sigma1 * sigma2.transpose()));
        let g1 = EuclideanElement::new(a1, t1)?;
        let t2 = g1.act(&b1) - &a2 * &b2;
        let g2 = EuclideanElement::new(a2, t2)?;
        Self::new(g1, g2, b1, b2, nu1, nu2)
    }

    pub fn dim(&self) -> usize {
        self.g1.dim()
    }

    /// World normal `A₁ν₁`, pointing from body 1 towards body 2.
    pub fn world_normal(&self) -> DVector<f64> {
        self.g1.rotation() * &self.nu1
    }

    /// World adapted frame `A₁σ₁`; its first `n − 1` columns span the contact plane.
    pub fn world_frame(&self) -> DMatrix<f64> {
        self.g1.rotation() * &self.sigma1
    }

    pub fn contact_point(&self) -> DVector<f64> {
        self.g1.act(&self.b1)
    }

    /// Velocity of the material point `bⱼ` of body `j` in its own frame.
    fn point_velocities(&self, v: &TangentPair) -> [DVector<f64>; 2] {
        [
            v[0].angular.apply(&self.b1) + &v[0].linear,
            v[1].angular.apply(&self.b2) + &v[1].linear,
        ]
    }
}

pub(crate) fn random_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

pub(crate) fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = random_vector(n, rng);
        let norm = v.norm();
        if norm > 0.1 && norm <= 1.0 {
            return v / norm;
        }
    }
}

pub(crate) fn random_rotation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    if n <= 1 {
        return DMatrix::identity(n, n);
    }
    let x = SkewMatrix::from_square(DMatrix::from_fn(n, n, |_, _| rng.random_range(-3.0..3.0)));
    lie::so_exp(&x)
}

pub fn pair_coord_len(n: usize) -> usize {
    2 * AlgebraVector::coord_len(n)
}

pub fn pair_to_coords(v: &TangentPair) -> DVector<f64> {
    let mut c = v[0].to_coords();
    c.extend(v[1].to_coords());
    DVector::from_vec(c)
}

pub fn pair_from_coords(n: usize, c: &[f64]) -> Result<TangentPair, lie::LieError> {
    let d = AlgebraVector::coord_len(n);
    if c.len() != 2 * d {
        return Err(lie::LieError::DimensionMismatch { expected: 2 * d, got: c.len() });
    }
    Ok([AlgebraVector::from_coords(n, &c[..d])?, AlgebraVector::from_coords(n, &c[d..])?])
}

/// Kinetic metric of a body pair as a Gram matrix in pair coordinates.
#[derive(Debug, Clone)]
pub struct SystemMetric {
    gram: DMatrix<f64>,
}

impl SystemMetric {
    pub fn new(bodies: [&RigidBody; 2]) -> Self {
        let g1 = bodies[0].metric_matrix();
        let g2 = bodies[1].metric_matrix();
        let d = g1.nrows();
        let mut gram = DMatrix::zeros(2 * d, 2 * d);
        gram.view_mut((0, 0), (d, d)).copy_from(&g1);
        gram.view_mut((d, d), (d, d)).copy_from(&g2);
        SystemMetric { gram }
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (u.transpose() * &self.gram * v)[0]
    }

    pub fn norm(&self, u: &DVector<f64>) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }

    /// Gram–Schmidt (two passes) of the columns of `m`, dropping numerically dependent ones.
    pub fn orthonormalize(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out: Vec<DVector<f64>> = Vec::new();
        for col in m.column_iter() {
            let mut v = col.into_owned();
            let scale = self.norm(&v);
            if scale == 0.0 {
                continue;
            }
            for _ in 0..2 {
                for q in &out {
                    let c = self.inner(q, &v);
                    v -= q * c;
                }
            }
            let norm = self.norm(&v);
            if norm > 1e-10 * scale {
                out.push(v / norm);
            }
        }
        if out.is_empty() {
            DMatrix::zeros(m.nrows(), 0)
        } else {
            DMatrix::from_columns(&out)
        }
    }
}

/// A basis of a subspace of `T_qM`, stored as coordinate columns.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    n: usize,
    coords: DMatrix<f64>,
    orthonormal: bool,
}

impl SubspaceBasis {
    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    pub fn vectors(&self) -> Vec<TangentPair> {
        self.coords
            .column_iter()
            .map(|c| pair_from_coords(self.n, c.as_slice()).expect("coordinate length"))
            .collect()
    }

    pub fn orthonormalized(&self, metric: &SystemMetric) -> SubspaceBasis {
        SubspaceBasis { n: self.n, coords: metric.orthonormalize(&self.coords), orthonormal: true }
    }

    /// Metric norm of `v − P v` where `P` is the orthogonal projection onto this subspace.
    pub fn residual(&self, metric: &SystemMetric, v: &DVector<f64>) -> f64 {
        let basis = if self.orthonormal { self.coords.clone() } else { metric.orthonormalize(&self.coords) };
        let mut r = v.clone();
        for q in basis.column_iter() {
            let q = q.into_owned();
            r -= &q * metric.inner(&q, v);
        }
        metric.norm(&r)
    }
}

/// Linear relations between the two velocities at a contact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Relation {
    /// tangency to the boundary of `M`
    Tangent,
    /// equal world velocities of the contact points
    NonSlip,
    /// equal angular velocity components within the contact plane
    NoTwist,
    /// equal world angular velocities
    Diagonal,
}

fn relation_values(q: &ContactConfiguration, rel: Relation, v: &TangentPair) -> Vec<f64> {
    let n = q.dim();
    let (a1, a2) = (q.g1.rotation(), q.g2.rotation());
    match rel {
        Relation::Tangent => {
            let [p1, p2] = q.point_velocities(v);
            vec![q.nu1.dot(&p1) + q.nu2.dot(&p2)]
        }
        Relation::NonSlip => {
            let [p1, p2] = q.point_velocities(v);
            (a1 * p1 - a2 * p2).as_slice().to_vec()
        }
        Relation::NoTwist => {
            let frame = q.world_frame();
            let t = frame.columns(0, n - 1);
            let diff = lie::adjoint(a1, &v[0].angular).into_matrix() - lie::adjoint(a2, &v[1].angular).into_matrix();
            let m = t.transpose() * diff * t;
            let mut out = Vec::new();
            for i in 0..n - 1 {
                for j in i + 1..n - 1 {
                    out.push(m[(i, j)]);
                }
            }
            out
        }
        Relation::Diagonal => {
            let diff = &lie::adjoint(a1, &v[0].angular) - &lie::adjoint(a2, &v[1].angular);
            diff.to_coords()
        }
    }
}

fn relation_matrix(q: &ContactConfiguration, rels: &[Relation]) -> DMatrix<f64> {
    let n = q.dim();
    let len = pair_coord_len(n);
    let mut columns = Vec::with_capacity(len);
    for k in 0..len {
        let mut c = vec![0.0; len];
        c[k] = 1.0;
        let v = pair_from_coords(n, &c).expect("coordinate length");
        let col: Vec<f64> = rels.iter().flat_map(|&r| relation_values(q, r, &v)).collect();
        columns.push(DVector::from_vec(col));
    }
    DMatrix::from_columns(&columns)
}

/// Null space via SVD with the rank cut at `1e−9·σ_max`.
fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = m.ncols();
    let mut padded = DMatrix::zeros(m.nrows().max(cols), cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max();
    let cut = 1e-9 * smax.max(f64::MIN_POSITIVE);
    let rows: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s < cut)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    if rows.is_empty() {
        DMatrix::zeros(cols, 0)
    } else {
        DMatrix::from_columns(&rows)
    }
}

fn relation_subspace(
    q: &ContactConfiguration,
    rels: &[Relation],
    name: &'static str,
    expected: usize,
) -> Result<SubspaceBasis, ContactError> {
    let ns = null_space(&relation_matrix(q, rels));
    if ns.ncols() != expected {
        return Err(ContactError::RankDeficiency { subspace: name, expected, got: ns.ncols() });
    }
    Ok(SubspaceBasis { n: q.dim(), coords: ns, orthonormal: false })
}

/// `dim 𝔰𝔢(n) = n(n+1)/2`.
pub fn algebra_dim(n: usize) -> usize {
    AlgebraVector::coord_len(n)
}

/// `T_q(∂M)`: vectors satisfying the tangency relation alone.
pub fn subspace_boundary_tangent(q: &ContactConfiguration) -> Result<SubspaceBasis, ContactError> {
    let n = q.dim();
    relation_subspace(q, &[Relation::Tangent], "boundary tangent", 2 * algebra_dim(n) - 1)
}

/// Non-slipping subspace 𝔖: equal world velocities at the contact point.
pub fn subspace_nonslip(q: &ContactConfiguration) -> Result<SubspaceBasis, ContactError> {
    let n = q.dim();
    relation_subspace(q, &[Relation::NonSlip], "non-slipping", 2 * algebra_dim(n) - n)
}

/// Rolling subspace ℜ: non-slipping and non-twisting.
pub fn subspace_rolling(q: &ContactConfiguration) -> Result<SubspaceBasis, ContactError> {
    let n = q.dim();
    let twist = (n - 1) * (n - 2) / 2;
    relation_subspace(q, &[Relation::NonSlip, Relation::NoTwist], "rolling", 2 * algebra_dim(n) - n - twist)
}

/// Diagonal subspace 𝔇: simultaneous rigid motions of both bodies.
pub fn subspace_diag(q: &ContactConfiguration) -> Result<SubspaceBasis, ContactError> {
    let n = q.dim();
    relation_subspace(
        q,
        &[Relation::NonSlip, Relation::NoTwist, Relation::Diagonal],
        "diagonal",
        algebra_dim(n),
    )
}

/// Tangent pair produced by the world impulse direction `t` applied to body 2
/// (and `−t` to body 1), up to a common factor.
fn impulse_vector(
    q: &ContactConfiguration,
    bodies: [&RigidBody; 2],
    world: &DVector<f64>,
) -> Result<TangentPair, ContactError> {
    let u2 = q.g2.rotation().transpose() * world;
    let u1 = q.g1.rotation().transpose() * world * (-bodies[1].mass() / bodies[0].mass());
    let z1 = bodies[0].inertia().inverse(&lie::wedge_unchecked(&q.b1, &u1))?;
    let z2 = bodies[1].inertia().inverse(&lie::wedge_unchecked(&q.b2, &u2))?;
    Ok([AlgebraVector { angular: z1, linear: u1 }, AlgebraVector { angular: z2, linear: u2 }])
}

/// Impulse subspace 𝔠, spanned by `u₂ = eₖ`, `u₁ = −(m₂/m₁) A₁ᵀA₂u₂`.
pub fn subspace_impulse(q: &ContactConfiguration, bodies: [&RigidBody; 2]) -> Result<SubspaceBasis, ContactError> {
    let n = q.dim();
    let mut cols = Vec::with_capacity(n);
    for k in 0..n {
        let mut e = DVector::zeros(n);
        e[k] = 1.0;
        let world = q.g2.rotation() * e;
        cols.push(pair_to_coords(&impulse_vector(q, bodies, &world)?));
    }
    Ok(SubspaceBasis { n, coords: DMatrix::from_columns(&cols), orthonormal: false })
}

/// Unit normal 𝕟 to `∂M` at `q`, pointing into `M`.
pub fn unit_normal(q: &ContactConfiguration, bodies: [&RigidBody; 2]) -> Result<TangentPair, ContactError> {
    let (m1, m2) = (bodies[0].mass(), bodies[1].mass());
    let z1 = bodies[0].inertia().inverse(&lie::wedge_unchecked(&q.b1, &q.nu1))?;
    let z2 = bodies[1].inertia().inverse(&lie::wedge_unchecked(&q.b2, &q.nu2))?;
    let raw = [
        AlgebraVector { angular: z1, linear: q.nu1.clone() }.scale(m2 / m1),
        AlgebraVector { angular: z2, linear: q.nu2.clone() },
    ];
    let norm2 = mechanics::kinetic_inner(bodies, &raw, &raw);
    assert!(norm2 > 0.0, "normal has zero kinetic norm");
    // separating direction: body 2 moves along A₁ν₁, i.e. z₂ = −ν₂; ⟨ξ_sep, raw⟩ = −m₂ < 0
    let c = -1.0 / norm2.sqrt();
    Ok([raw[0].scale(c), raw[1].scale(c)])
}

/// Precomputed metric, subspaces and normal for one configuration.
#[derive(Debug, Clone)]
pub struct ContactGeometry {
    pub config: ContactConfiguration,
    metric: SystemMetric,
    nonslip: SubspaceBasis,
    impulse: SubspaceBasis,
    impulse_raw: DMatrix<f64>,
    normal: DVector<f64>,
    impulse_perp: DMatrix<f64>,
}

impl ContactGeometry {
    pub fn new(q: ContactConfiguration, bodies: [&RigidBody; 2]) -> Result<Self, ContactError> {
        let metric = SystemMetric::new(bodies);
        let nonslip = subspace_nonslip(&q)?.orthonormalized(&metric);
        let raw = subspace_impulse(&q, bodies)?;
        let impulse = raw.orthonormalized(&metric);
        let normal = pair_to_coords(&unit_normal(&q, bodies)?);
        let mut stacked = DMatrix::zeros(normal.len(), impulse.dim() + 1);
        stacked.set_column(0, &normal);
        stacked.view_mut((0, 1), (normal.len(), impulse.dim())).copy_from(impulse.coords());
        let ortho = metric.orthonormalize(&stacked);
        let impulse_perp = ortho.columns(1, ortho.ncols() - 1).into_owned();
        Ok(ContactGeometry {
            config: q,
            metric,
            nonslip,
            impulse,
            impulse_raw: raw.coords,
            normal,
            impulse_perp,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    pub fn metric(&self) -> &SystemMetric {
        &self.metric
    }

    pub fn nonslip(&self) -> &SubspaceBasis {
        &self.nonslip
    }

    pub fn impulse(&self) -> &SubspaceBasis {
        &self.impulse
    }

    pub fn normal_coords(&self) -> &DVector<f64> {
        &self.normal
    }

    pub fn normal(&self) -> TangentPair {
        pair_from_coords(self.dim(), self.normal.as_slice()).expect("coordinate length")
    }

    /// Orthonormal basis of 𝔠 ⊖ ℝ𝕟.
    pub fn impulse_perp(&self) -> &DMatrix<f64> {
        &self.impulse_perp
    }

    pub fn specular_map(&self) -> CollisionMap {
        self.map_from_coords(DMatrix::zeros(self.normal.len(), 0))
    }

    pub fn completely_rough_map(&self) -> CollisionMap {
        self.map_from_coords(self.impulse_perp.clone())
    }

    /// Roughness spanned by the impulse vectors of world directions in the contact plane.
    pub fn map_from_world_tangents(&self, dirs: &[DVector<f64>]) -> Result<CollisionMap, ContactError> {
        let n = self.dim();
        if dirs.len() > n - 1 {
            return Err(ContactError::RankOutOfRange { k: dirs.len(), max: n - 1 });
        }
        let normal = self.config.world_normal();
        let mut cols = Vec::with_capacity(dirs.len() + 1);
        cols.push(self.normal.clone());
        for (index, d) in dirs.iter().enumerate() {
            if d.len() != n || d.dot(&normal).abs() > 1e-9 * d.norm().max(1.0) || d.norm() == 0.0 {
                return Err(ContactError::DirectionNotTangent { index });
            }
        }
        for d in dirs {
            cols.push(self.impulse_coords_for_world(d));
        }
        let ortho = self.metric.orthonormalize(&DMatrix::from_columns(&cols));
        if ortho.ncols() != dirs.len() + 1 {
            return Err(ContactError::DependentDirections);
        }
        Ok(self.map_from_coords(ortho.columns(1, dirs.len()).into_owned()))
    }

    /// Impulse vector for a world direction; column `k` of the raw basis belongs to `A₂eₖ`.
    fn impulse_coords_for_world(&self, world: &DVector<f64>) -> DVector<f64> {
        &self.impulse_raw * (self.config.g2.rotation().transpose() * world)
    }

    /// Random roughness subspace of rank `k` inside 𝔠 ⊖ ℝ𝕟.
    pub fn random_map<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<CollisionMap, ContactError> {
        let n = self.dim();
        if k > n - 1 {
            return Err(ContactError::RankOutOfRange { k, max: n - 1 });
        }
        let mix = DMatrix::from_fn(n - 1, k, |_, _| rng.random_range(-1.0..1.0));
        let basis = self.metric.orthonormalize(&(&self.impulse_perp * mix));
        if basis.ncols() != k {
            return self.random_map(k, rng);
        }
        Ok(self.map_from_coords(basis))
    }

    /// Builds `C = I − 2 Σ rᵢ rᵢᵀ G` over `r ∈ {𝕟} ∪ roughness`, after validating the roughness basis.
    pub fn build_collision_map(&self, roughness: &[TangentPair]) -> Result<CollisionMap, ContactError> {
        let n = self.dim();
        if roughness.len() > n - 1 {
            return Err(ContactError::RankOutOfRange { k: roughness.len(), max: n - 1 });
        }
        let cols: Vec<DVector<f64>> = roughness.iter().map(pair_to_coords).collect();
        for (index, c) in cols.iter().enumerate() {
            let residual = self.impulse.residual(&self.metric, c);
            if residual > SUBSPACE_TOL {
                return Err(ContactError::RoughnessOutsideImpulse { index, residual });
            }
            let inner = self.metric.inner(c, &self.normal);
            if inner.abs() > SUBSPACE_TOL {
                return Err(ContactError::RoughnessNotNormalOrthogonal { index, inner });
            }
        }
        let coords = if cols.is_empty() {
            DMatrix::zeros(self.normal.len(), 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        let gram = coords.transpose() * self.metric.gram() * &coords;
        let residual = (&gram - DMatrix::identity(gram.nrows(), gram.ncols())).amax();
        if residual > SUBSPACE_TOL {
            return Err(ContactError::RoughnessNotOrthonormal(residual));
        }
        Ok(self.map_from_coords(coords))
    }

    fn map_from_coords(&self, roughness: DMatrix<f64>) -> CollisionMap {
        let len = self.normal.len();
        let g = self.metric.gram();
        let mut matrix = DMatrix::identity(len, len);
        matrix -= &self.normal * (self.normal.transpose() * g) * 2.0;
        for r in roughness.column_iter() {
            matrix -= r * (r.transpose() * g) * 2.0;
        }
        CollisionMap { n: self.dim(), normal: self.normal.clone(), roughness, matrix }
    }
}

/// A strict collision map at a fixed configuration.
#[derive(Debug, Clone)]
pub struct CollisionMap {
    n: usize,
    normal: DVector<f64>,
    roughness: DMatrix<f64>,
    matrix: DMatrix<f64>,
}

impl CollisionMap {
    pub fn rank(&self) -> usize {
        self.roughness.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn normal_coords(&self) -> &DVector<f64> {
        &self.normal
    }

    pub fn roughness_basis(&self) -> Vec<TangentPair> {
        self.roughness
            .column_iter()
            .map(|c| pair_from_coords(self.n, c.as_slice()).expect("coordinate length"))
            .collect()
    }

    pub fn apply_coords(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }

    pub fn apply(&self, v: &TangentPair) -> TangentPair {
        let c = self.apply_coords(&pair_to_coords(v));
        pair_from_coords(self.n, c.as_slice()).expect("coordinate length")
    }
}

/// Builds a collision map from scratch (see [`ContactGeometry::build_collision_map`]).
pub fn build_collision_map(
    q: &ContactConfiguration,
    bodies: [&RigidBody; 2],
    roughness: &[TangentPair],
) -> Result<CollisionMap, ContactError> {
    ContactGeometry::new(q.clone(), bodies)?.build_collision_map(roughness)
}

/// Residuals of the strictness conditions; each check passes below [`SUBSPACE_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct StrictnessReport {
    pub isometry: f64,
    pub involution: f64,
    pub fixes_nonslip: f64,
    pub impulse: f64,
    pub momentum: f64,
    pub fixes_diagonal: f64,
}

impl StrictnessReport {
    pub fn checks(&self) -> [(&'static str, f64, bool); 6] {
        let t = SUBSPACE_TOL;
        [
            ("isometry", self.isometry, self.isometry < t),
            ("involution", self.involution, self.involution < t),
            ("fixes_nonslip", self.fixes_nonslip, self.fixes_nonslip < t),
            ("impulse", self.impulse, self.impulse < t),
            ("momentum", self.momentum, self.momentum < t),
            ("fixes_diagonal", self.fixes_diagonal, self.fixes_diagonal < t),
        ]
    }

    pub fn passes(&self) -> bool {
        self.checks().iter().all(|c| c.2)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks().iter().map(|c| c.1).fold(0.0, f64::max)
    }

    /// Componentwise maximum, for aggregating over many configurations.
    pub fn merge(&self, other: &StrictnessReport) -> StrictnessReport {
        StrictnessReport {
            isometry: self.isometry.max(other.isometry),
            involution: self.involution.max(other.involution),
            fixes_nonslip: self.fixes_nonslip.max(other.fixes_nonslip),
            impulse: self.impulse.max(other.impulse),
            momentum: self.momentum.max(other.momentum),
            fixes_diagonal: self.fixes_diagonal.max(other.fixes_diagonal),
        }
    }

    pub fn zero() -> StrictnessReport {
        StrictnessReport { isometry: 0.0, involution: 0.0, fixes_nonslip: 0.0, impulse: 0.0, momentum: 0.0, fixes_diagonal: 0.0 }
    }
}

/// Checks any linear map of `T_qM` (given in pair coordinates) against the strictness conditions,
/// using `samples` random unit vectors.
pub fn verify_strict_matrix<R: Rng + ?Sized>(
    c: &DMatrix<f64>,
    geom: &ContactGeometry,
    bodies: [&RigidBody; 2],
    samples: usize,
    rng: &mut R,
) -> Result<StrictnessReport, ContactError> {
    let metric = geom.metric();
    let len = c.nrows();
    let n = geom.dim();
    let q = &geom.config;
    let placements = [q.g1.clone(), q.g2.clone()];
    let mut report = StrictnessReport::zero();

    let unit = |rng: &mut R| {
        let v = DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0));
        let norm = metric.norm(&v);
        v / norm
    };
    let vectors: Vec<DVector<f64>> = (0..samples.max(2)).map(|_| unit(rng)).collect();
    for (i, u) in vectors.iter().enumerate() {
        let cu = c * u;
        let v = &vectors[(i + 1) % vectors.len()];
        let cv = c * v;
        report.isometry = report
            .isometry
            .max((metric.inner(&cu, &cv) - metric.inner(u, v)).abs())
            .max((metric.inner(&cu, &cu) - metric.inner(u, u)).abs());
        report.involution = report.involution.max(metric.norm(&(c * &cu - u)));
        report.impulse = report.impulse.max(geom.impulse().residual(metric, &(&cu - u)));
        let before = mechanics::system_momentum(bodies, &placements, &pair_from_coords(n, u.as_slice())?);
        let after = mechanics::system_momentum(bodies, &placements, &pair_from_coords(n, cu.as_slice())?);
        report.momentum = report.momentum.max((&after - &before).max_abs());
    }
    for s in geom.nonslip().coords().column_iter() {
        let s = s.into_owned();
        report.fixes_nonslip = report.fixes_nonslip.max(metric.norm(&(c * &s - &s)) / metric.norm(&s));
    }
    let diag = subspace_diag(q)?.orthonormalized(metric);
    for s in diag.coords().column_iter() {
        let s = s.into_owned();
        report.fixes_diagonal = report.fixes_diagonal.max(metric.norm(&(c * &s - &s)));
    }
    Ok(report)
}

pub fn verify_strict<R: Rng + ?Sized>(
    map: &CollisionMap,
    geom: &ContactGeometry,
    bodies: [&RigidBody; 2],
    samples: usize,
    rng: &mut R,
) -> Result<StrictnessReport, ContactError> {
    verify_strict_matrix(map.matrix(), geom, bodies, samples, rng)
}

/// Random body with a symmetric positive definite inertia matrix.
pub fn random_body<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RigidBody {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let l = &m * m.transpose() + DMatrix::identity(n, n) * 0.2;
    RigidBody::with_inertia(rng.random_range(0.5..3.0), l).expect("positive mass")
}

/// Strictness of random collision maps over `trials` random configurations and bodies.
/// `k = None` draws the roughness rank uniformly from `0..n`.
pub fn strictness_suite<R: Rng + ?Sized>(
    n: usize,
    k: Option<usize>,
    trials: usize,
    rng: &mut R,
) -> Result<StrictnessReport, ContactError> {
    if let Some(k) = k {
        if k + 1 > n {
            return Err(ContactError::RankOutOfRange { k, max: n - 1 });
        }
    }
    let mut total = StrictnessReport::zero();
    for _ in 0..trials {
        let b1 = random_body(n, rng);
        let b2 = random_body(n, rng);
        let q = ContactConfiguration::random(n, rng)?;
        let geom = ContactGeometry::new(q, [&b1, &b2])?;
        let rank = k.unwrap_or_else(|| rng.random_range(0..n));
        let basis = geom.random_map(rank, rng)?.roughness_basis();
        let map = build_collision_map(&geom.config, [&b1, &b2], &basis)?;
        total = total.merge(&verify_strict(&map, &geom, [&b1, &b2], 4, rng)?);
    }
    Ok(total)
}

/// Residuals of the decomposition `T_qM = 𝔖 ⊕ (𝔠 ⊖ ℝ𝕟) ⊕ ℝ𝕟`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalityReport {
    pub dims_ok: bool,
    /// Largest |⟨s, c⟩| over orthonormal bases of 𝔖 and 𝔠.
    pub cross_inner: f64,
    /// Residual of 𝕟 outside 𝔠.
    pub normal_membership: f64,
    /// Smallest singular value of the concatenated orthonormal bases.
    pub min_singular_value: f64,
}

impl OrthogonalityReport {
    pub fn passes(&self) -> bool {
        self.dims_ok && self.cross_inner < SUBSPACE_TOL && self.normal_membership < SUBSPACE_TOL && self.min_singular_value > 1e-6
    }
}

pub fn orthogonality_suite<R: Rng + ?Sized>(
    n: usize,
    trials: usize,
    rng: &mut R,
) -> Result<OrthogonalityReport, ContactError> {
    let d = algebra_dim(n);
    let mut out = OrthogonalityReport {
        dims_ok: true,
        cross_inner: 0.0,
        normal_membership: 0.0,
        min_singular_value: f64::INFINITY,
    };
    for _ in 0..trials {
        let b1 = random_body(n, rng);
        let b2 = random_body(n, rng);
        let q = ContactConfiguration::random(n, rng)?;
        let geom = ContactGeometry::new(q, [&b1, &b2])?;
        let m = geom.metric();
        out.dims_ok &= geom.nonslip().dim() == 2 * d - n && geom.impulse().dim() == n;
        let s = geom.nonslip().coords();
        let c = geom.impulse().coords();
        out.cross_inner = out.cross_inner.max((s.transpose() * m.gram() * c).amax());
        out.normal_membership = out.normal_membership.max(geom.impulse().residual(m, geom.normal_coords()));
        let mut all = DMatrix::zeros(2 * d, 2 * d);
        all.view_mut((0, 0), (2 * d, s.ncols())).copy_from(s);
        all.view_mut((0, s.ncols()), (2 * d, n - 1)).copy_from(geom.impulse_perp());
        all.set_column(2 * d - 1, geom.normal_coords());
        // orthonormal in the metric, so the Gram-weighted singular values are all 1
        let chol = m.gram().clone().cholesky().expect("metric is positive definite");
        let sv = (chol.l().transpose() * all).singular_values();
        out.min_singular_value = out.min_singular_value.min(sv.min());
    }
    Ok(out)
}

/// Dimension `k(n − k − 1)` of the manifold of strict collision maps of roughness rank `k`.
pub fn grassmannian_dim(n: usize, k: usize) -> Result<usize, ContactError> {
    if n < 1 || k + 1 > n {
        return Err(ContactError::RankOutOfRange { k, max: n.saturating_sub(1) });
    }
    Ok(k * (n - k - 1))
}

/// Regularity of a contact from the shape operators: smallest singular value of
/// `S₁ + S₂` and its condition number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularity {
    pub regular: bool,
    pub min_singular_value: f64,
    pub condition_number: f64,
}

pub fn regularity_check(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Result<Regularity, ContactError> {
    let m = s1.nrows();
    for s in [s1, s2] {
        if s.nrows() != m || s.ncols() != m {
            return Err(ContactError::ShapeDimension { expected: m, rows: s.nrows(), cols: s.ncols() });
        }
    }
    if m == 0 {
        return Ok(Regularity { regular: true, min_singular_value: f64::INFINITY, condition_number: 1.0 });
    }
    let sv = (s1 + s2).singular_values();
    let smin = sv.min();
    let smax = sv.max();
    Ok(Regularity {
        regular: smin > 1e-9,
        min_singular_value: smin,
        condition_number: if smin > 0.0 { smax / smin } else { f64::INFINITY },
    })
}
