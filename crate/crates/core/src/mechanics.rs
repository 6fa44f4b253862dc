//! Mass distributions and the kinetic-energy metric on SE(n).
//!
//! A body carries its mass `m` and inertia matrix `L` (second moments of the
//! mass measure divided by `m`). The metric on a left-translated velocity is
//! `m [½ Tr(𝓛(Zu) Zvᵀ) + zu·zv]` with `𝓛(Z) = LZ + ZL`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::lie::{self, AlgebraVector, EuclideanElement, SkewMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanicsError {
    #[error("inertia operator is singular: eigenvalues {i} and {j} sum to {sum:.3e}")]
    SingularInertia { i: usize, j: usize, sum: f64 },
    #[error("total mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("weights must be nonnegative (weight {index} is {value})")]
    NegativeWeight { index: usize, value: f64 },
    #[error("{points} points but {weights} weights")]
    WeightCountMismatch { points: usize, weights: usize },
    #[error("no sample points given")]
    NoPoints,
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("flight time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error(transparent)]
    Lie(#[from] lie::LieError),
}

/// Inertia parameter `λ` of a uniform ball of radius `R` in ℝⁿ, `L = λI`.
pub fn ball_inertia(radius: f64, n: usize) -> f64 {
    radius * radius / (n as f64 + 2.0)
}

/// The operator `𝓛(Z) = LZ + ZL` on 𝔰𝔬(n), with its inverse through the eigenbasis of `L`.
#[derive(Debug, Clone)]
pub struct InertiaOperator {
    matrix: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    scalar: Option<f64>,
}

impl InertiaOperator {
    pub fn new(l: DMatrix<f64>) -> Self {
        let n = l.nrows();
        let sym = (&l + l.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        let first = sym[(0, 0)];
        let is_scalar = (&sym - DMatrix::identity(n, n) * first).amax() <= 1e-15 * first.abs().max(1.0);
        InertiaOperator {
            matrix: sym,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
            scalar: is_scalar.then_some(first),
        }
    }

    pub fn scalar(lambda: f64, n: usize) -> Self {
        InertiaOperator {
            matrix: DMatrix::identity(n, n) * lambda,
            eigenvalues: DVector::from_element(n, lambda),
            eigenvectors: DMatrix::identity(n, n),
            scalar: Some(lambda),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// `Some(λ)` when `L = λI`.
    pub fn scalar_value(&self) -> Option<f64> {
        self.scalar
    }

    /// Number of eigenvalues above `1e-12 · max(1, λ_max)`.
    pub fn rank(&self) -> usize {
        let tol = 1e-12 * self.eigenvalues.amax().max(1.0);
        self.eigenvalues.iter().filter(|&&l| l > tol).count()
    }

    pub fn apply(&self, z: &SkewMatrix) -> SkewMatrix {
        let m = z.as_matrix();
        SkewMatrix::from_square(&self.matrix * m + m * &self.matrix)
    }

    /// Solves `LW + WL = Z`; component `(i,j)` in the eigenbasis divides by `λᵢ + λⱼ`.
    pub fn inverse(&self, z: &SkewMatrix) -> Result<SkewMatrix, MechanicsError> {
        let n = self.dim();
        let tol = 1e-12 * self.eigenvalues.amax().max(1.0);
        if let Some(l) = self.scalar {
            if 2.0 * l <= tol {
                return Err(MechanicsError::SingularInertia { i: 0, j: 1, sum: 2.0 * l });
            }
            return Ok(z.scale(0.5 / l));
        }
        let u = &self.eigenvectors;
        let mut w = u.transpose() * z.as_matrix() * u;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    w[(i, j)] = 0.0;
                    continue;
                }
                let sum = self.eigenvalues[i] + self.eigenvalues[j];
                if sum <= tol {
                    return Err(MechanicsError::SingularInertia { i: i.min(j), j: i.max(j), sum });
                }
                w[(i, j)] /= sum;
            }
        }
        Ok(SkewMatrix::from_square(u * w * u.transpose()))
    }

    /// The tensor `B` defined by `⟨B(u,v), w⟩ = ⟨[v,w], u⟩` for the metric of this inertia.
    ///
    /// With `X = [L Z₁, Z₂] + ½ z₁∧z₂`, `B = (𝓛⁻¹(X − Xᵀ), −Z₂ z₁)`. The skew
    /// projection matters only for non-scalar `L`; for `L = λI` and `u = v`
    /// this reduces to `(0, −Zz)`.
    pub fn b_tensor(
        &self,
        u: &AlgebraVector,
        v: &AlgebraVector,
    ) -> Result<AlgebraVector, MechanicsError> {
        let n = self.dim();
        if u.dim() != n || v.dim() != n {
            return Err(lie::LieError::DimensionMismatch { expected: n, got: u.dim().max(v.dim()) }.into());
        }
        let z1 = u.angular.as_matrix();
        let z2 = v.angular.as_matrix();
        let lz1 = &self.matrix * z1;
        let mut x = &lz1 * z2 - z2 * &lz1;
        x += lie::wedge_unchecked(&u.linear, &v.linear).as_matrix() * 0.5;
        // antisymmetrizing X − Xᵀ leaves it unchanged
        let angular = self.inverse(&SkewMatrix::from_square(&x - x.transpose()))?;
        let linear = -(v.angular.apply(&u.linear));
        Ok(AlgebraVector { angular, linear })
    }
}

/// How the mass of a body is described.
#[derive(Debug, Clone, PartialEq)]
pub enum BodyShape {
    Ball { radius: f64 },
    PointSampled { points: Vec<DVector<f64>>, weights: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct RigidBody {
    mass: f64,
    shape: BodyShape,
    inertia: InertiaOperator,
}

impl RigidBody {
    /// Uniform ball; `L = R²/(n+2) I`.
    pub fn ball(mass: f64, radius: f64, n: usize) -> Result<Self, MechanicsError> {
        Self::ball_with_inertia(mass, radius, n, ball_inertia(radius, n))
    }

    /// Rotationally symmetric ball with a given `λ` (e.g. a shell).
    pub fn ball_with_inertia(
        mass: f64,
        radius: f64,
        n: usize,
        lambda: f64,
    ) -> Result<Self, MechanicsError> {
        if mass <= 0.0 || !mass.is_finite() {
            return Err(MechanicsError::NonPositiveMass(mass));
        }
        if radius <= 0.0 || !radius.is_finite() {
            return Err(MechanicsError::NonPositiveRadius(radius));
        }
        Ok(RigidBody {
            mass,
            shape: BodyShape::Ball { radius },
            inertia: InertiaOperator::scalar(lambda, n),
        })
    }

    /// Arbitrary mass and inertia matrix (no geometric descriptor).
    pub fn with_inertia(mass: f64, l: DMatrix<f64>) -> Result<Self, MechanicsError> {
        if mass <= 0.0 || !mass.is_finite() {
            return Err(MechanicsError::NonPositiveMass(mass));
        }
        Ok(RigidBody {
            mass,
            shape: BodyShape::PointSampled { points: Vec::new(), weights: Vec::new() },
            inertia: InertiaOperator::new(l),
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn dim(&self) -> usize {
        self.inertia.dim()
    }

    pub fn shape(&self) -> &BodyShape {
        &self.shape
    }

    pub fn inertia(&self) -> &InertiaOperator {
        &self.inertia
    }

    pub fn inertia_matrix(&self) -> &DMatrix<f64> {
        self.inertia.matrix()
    }

    /// `𝓛` is invertible iff `rank L ≥ n − 1`.
    pub fn has_invertible_inertia(&self) -> bool {
        self.inertia.rank() + 1 >= self.dim()
    }

    /// `m [½ Tr(𝓛(Zu) Zvᵀ) + zu·zv]`.
    pub fn inner(&self, u: &AlgebraVector, v: &AlgebraVector) -> f64 {
        let lz = self.inertia.apply(&u.angular);
        self.mass * (0.5 * lz.trace_inner(&v.angular) + u.linear.dot(&v.linear))
    }

    pub fn energy(&self, xi: &AlgebraVector) -> f64 {
        0.5 * self.inner(xi, xi)
    }

    /// Gram matrix of the metric in the coordinates of [`AlgebraVector::to_coords`].
    pub fn metric_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let d = AlgebraVector::coord_len(n);
        let basis: Vec<AlgebraVector> = (0..d)
            .map(|k| {
                let mut c = vec![0.0; d];
                c[k] = 1.0;
                AlgebraVector::from_coords(n, &c).expect("coordinate length")
            })
            .collect();
        DMatrix::from_fn(d, d, |i, j| self.inner(&basis[i], &basis[j]))
    }
}

/// Builds a body from weighted sample points, recentering at the center of mass.
pub fn inertia_from_samples(
    points: &[DVector<f64>],
    weights: &[f64],
) -> Result<RigidBody, MechanicsError> {
    if points.is_empty() {
        return Err(MechanicsError::NoPoints);
    }
    if points.len() != weights.len() {
        return Err(MechanicsError::WeightCountMismatch {
            points: points.len(),
            weights: weights.len(),
        });
    }
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| **w < 0.0) {
        return Err(MechanicsError::NegativeWeight { index, value });
    }
    let n = points[0].len();
    for p in points {
        if p.len() != n {
            return Err(lie::LieError::DimensionMismatch { expected: n, got: p.len() }.into());
        }
    }
    let mass: f64 = weights.iter().sum();
    if mass <= 0.0 {
        return Err(MechanicsError::NonPositiveMass(mass));
    }
    let center = points
        .iter()
        .zip(weights)
        .fold(DVector::zeros(n), |acc, (p, w)| acc + p * *w)
        / mass;
    let points: Vec<DVector<f64>> = if center.norm() > 1e-9 {
        points.iter().map(|p| p - &center).collect()
    } else {
        points.to_vec()
    };
    let l = points
        .iter()
        .zip(weights)
        .fold(DMatrix::zeros(n, n), |acc, (p, w)| acc + p * p.transpose() * *w)
        / mass;
    Ok(RigidBody {
        mass,
        shape: BodyShape::PointSampled { points, weights: weights.to_vec() },
        inertia: InertiaOperator::new(l),
    })
}

/// Velocities of the two bodies, left-translated to 𝔤 × 𝔤.
pub type TangentPair = [AlgebraVector; 2];

/// Configuration and velocity of both bodies.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub placements: [EuclideanElement; 2],
    pub velocities: TangentPair,
}

/// `Σⱼ mⱼ [½ Tr(𝓛ⱼ(Zᵘⱼ) Zᵛⱼᵀ) + zᵘⱼ·zᵛⱼ]`.
pub fn kinetic_inner(bodies: [&RigidBody; 2], u: &TangentPair, v: &TangentPair) -> f64 {
    bodies[0].inner(&u[0], &v[0]) + bodies[1].inner(&u[1], &v[1])
}

/// Momentum of one body as an algebra element, paired through `Tr(ZWᵀ) + z·w`:
/// `m (½(Ad_A 𝓛(Z) + x_c ∧ v_c), v_c)` with `x_c = a`, `v_c = A z`.
pub fn momentum_map(body: &RigidBody, g: &EuclideanElement, xi: &AlgebraVector) -> AlgebraVector {
    let vc = g.rotation() * &xi.linear;
    let ad = lie::adjoint(g.rotation(), &body.inertia().apply(&xi.angular));
    let xw = lie::wedge_unchecked(g.translation(), &vc);
    AlgebraVector {
        angular: (&ad + &xw).scale(0.5 * body.mass()),
        linear: vc * body.mass(),
    }
}

/// Total momentum of both bodies.
pub fn system_momentum(bodies: [&RigidBody; 2], q: &[EuclideanElement; 2], v: &TangentPair) -> AlgebraVector {
    &momentum_map(bodies[0], &q[0], &v[0]) + &momentum_map(bodies[1], &q[1], &v[1])
}

/// Closed-form free flight of a body with scalar inertia:
/// `A' = A e^{τZ}`, `a' = a + τ A z`, `Z⁻ = Z`, `z⁻ = e^{−τZ} z`.
pub fn free_flight(
    g: &EuclideanElement,
    xi: &AlgebraVector,
    tau: f64,
) -> Result<(EuclideanElement, AlgebraVector), MechanicsError> {
    if tau < 0.0 {
        return Err(MechanicsError::NegativeTime(tau));
    }
    let e = lie::so_exp(&xi.angular.scale(tau));
    let rotation = g.rotation() * &e;
    let translation = g.translation() + g.rotation() * &xi.linear * tau;
    let linear = e.transpose() * &xi.linear;
    let g_next = EuclideanElement::from_parts_unchecked(rotation, translation).renormalized();
    Ok((g_next, AlgebraVector { angular: xi.angular.clone(), linear }))
}

#[derive(Debug, Clone)]
pub struct GeodesicSample {
    pub t: f64,
    pub placement: EuclideanElement,
    pub velocity: AlgebraVector,
}

/// `Ω̇ = ξ + ½[Ω, ξ] + (1/12)[Ω, [Ω, ξ]]`, the truncated inverse differential of exp.
fn dexp_inv(omega: &AlgebraVector, xi: &AlgebraVector) -> AlgebraVector {
    let c1 = omega.bracket(xi);
    let c2 = omega.bracket(&c1);
    &(xi + &c1.scale(0.5)) + &c2.scale(1.0 / 12.0)
}

/// Integrates the geodesic equation `ξ̇ = B(ξ, ξ)`, `ġ = g ξ` for a general inertia.
///
/// Fourth-order Runge–Kutta–Munthe-Kaas: each step integrates `(ξ, Ω)` with
/// classical RK4 from `Ω = 0` and sets `g ← g exp(Ω)`.
pub fn geodesic_integrate(
    inertia: &InertiaOperator,
    g0: &EuclideanElement,
    xi0: &AlgebraVector,
    duration: f64,
    dt: f64,
) -> Result<Vec<GeodesicSample>, MechanicsError> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(MechanicsError::NonPositiveStep(dt));
    }
    if duration < 0.0 {
        return Err(MechanicsError::NegativeTime(duration));
    }
    let steps = (duration / dt).round().max(1.0) as usize;
    let h = duration / steps as f64;
    let n = xi0.dim();
    let mut out = Vec::with_capacity(steps + 1);
    let mut g = g0.clone();
    let mut xi = xi0.clone();
    out.push(GeodesicSample { t: 0.0, placement: g.clone(), velocity: xi.clone() });

    let rhs = |x: &AlgebraVector, om: &AlgebraVector| -> Result<(AlgebraVector, AlgebraVector), MechanicsError> {
        Ok((inertia.b_tensor(x, x)?, dexp_inv(om, x)))
    };

    for k in 1..=steps {
        let om0 = AlgebraVector::zeros(n);
        let (k1x, k1o) = rhs(&xi, &om0)?;
        let (k2x, k2o) = rhs(&(&xi + &k1x.scale(h / 2.0)), &k1o.scale(h / 2.0))?;
        let (k3x, k3o) = rhs(&(&xi + &k2x.scale(h / 2.0)), &k2o.scale(h / 2.0))?;
        let (k4x, k4o) = rhs(&(&xi + &k3x.scale(h)), &k3o.scale(h))?;
        let dx = &(&k1x + &k2x.scale(2.0)) + &(&k3x.scale(2.0) + &k4x);
        let dom = &(&k1o + &k2o.scale(2.0)) + &(&k3o.scale(2.0) + &k4o);
        xi = &xi + &dx.scale(h / 6.0);
        let omega = dom.scale(h / 6.0);
        g = g.compose(&lie::exp_algebra(&omega, 1.0)).renormalized();
        out.push(GeodesicSample { t: k as f64 * h, placement: g.clone(), velocity: xi.clone() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rvec(rng: &mut impl Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn rskew(rng: &mut impl Rng, n: usize) -> SkewMatrix {
        SkewMatrix::from_square(DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)))
    }

    fn ralg(rng: &mut impl Rng, n: usize) -> AlgebraVector {
        AlgebraVector::new(rskew(rng, n), rvec(rng, n)).unwrap()
    }

    fn rspd(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &m * m.transpose() + DMatrix::identity(n, n) * 0.1
    }

    fn rgroup(rng: &mut impl Rng, n: usize) -> EuclideanElement {
        EuclideanElement::new(lie::so_exp(&rskew(rng, n).scale(3.0)), rvec(rng, n) * 3.0).unwrap()
    }

    #[test]
    fn ball_inertia_values() {
        assert_eq!(ball_inertia(1.0, 2), 0.25);
        assert!((ball_inertia(1.0, 3) - 0.2).abs() < 1e-16);
        assert_eq!(ball_inertia(2.0, 2), 1.0);
    }

    #[test]
    fn four_point_cross_inertia() {
        let pts = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
            .iter()
            .map(|p| DVector::from_column_slice(p))
            .collect::<Vec<_>>();
        let body = inertia_from_samples(&pts, &[1.0; 4]).unwrap();
        assert_eq!(body.mass(), 4.0);
        assert!((body.inertia_matrix() - DMatrix::identity(2, 2) * 0.5).amax() < 1e-15);
    }

    #[test]
    fn single_point_is_flagged_singular() {
        let body = inertia_from_samples(&[DVector::zeros(3)], &[2.0]).unwrap();
        assert_eq!(body.inertia_matrix().amax(), 0.0);
        assert!(!body.has_invertible_inertia());
        let err = body.inertia().inverse(&SkewMatrix::generator(3, 0, 1)).unwrap_err();
        assert!(matches!(err, MechanicsError::SingularInertia { .. }));
    }

    #[test]
    fn samples_error_paths() {
        let p = vec![DVector::from_vec(vec![1.0, 0.0])];
        assert_eq!(inertia_from_samples(&p, &[0.0]).unwrap_err(), MechanicsError::NonPositiveMass(0.0));
        assert!(matches!(inertia_from_samples(&p, &[1.0, 2.0]), Err(MechanicsError::WeightCountMismatch { .. })));
        assert!(matches!(inertia_from_samples(&[], &[]), Err(MechanicsError::NoPoints)));
    }

    #[test]
    fn off_center_samples_are_recentered() {
        let pts: Vec<_> = [[2.0, 1.0], [4.0, 1.0]].iter().map(|p| DVector::from_column_slice(p)).collect();
        let body = inertia_from_samples(&pts, &[1.0, 1.0]).unwrap();
        let l = body.inertia_matrix();
        assert!((l[(0, 0)] - 1.0).abs() < 1e-15 && l[(1, 1)].abs() < 1e-15);
        // all mass on a line in the plane: rank 1 = n - 1, still invertible
        assert!(body.has_invertible_inertia());
    }

    #[test]
    fn monte_carlo_disc_converges_to_ball_inertia() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pts = Vec::new();
        while pts.len() < 200_000 {
            let p = rvec(&mut rng, 2);
            if p.norm() <= 1.0 {
                pts.push(p);
            }
        }
        let w = vec![1.0; pts.len()];
        let body = inertia_from_samples(&pts, &w).unwrap();
        // standard error of E[x²] for the unit disc is ~ 0.2/sqrt(N)
        assert!((body.inertia_matrix() - DMatrix::identity(2, 2) * ball_inertia(1.0, 2)).amax() < 3e-3);
    }

    #[test]
    fn inertia_operator_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = rskew(&mut rng, 3);
        let op = InertiaOperator::scalar(0.3, 3);
        assert!((op.apply(&z).as_matrix() - z.as_matrix() * 0.6).amax() < 1e-15);
        assert!((op.inverse(&z).unwrap().as_matrix() - z.as_matrix() / 0.6).amax() < 1e-15);

        let diag = InertiaOperator::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])));
        let j = SkewMatrix::generator(2, 0, 1);
        assert!((diag.apply(&j).as_matrix() - j.as_matrix() * 3.0).amax() < 1e-15);

        for n in 2..=5 {
            let op = InertiaOperator::new(rspd(&mut rng, n));
            let z = rskew(&mut rng, n);
            let back = op.inverse(&op.apply(&z)).unwrap();
            assert!((back.as_matrix() - z.as_matrix()).amax() < 1e-11);
        }
    }

    #[test]
    fn rank_n_minus_one_inertia_is_invertible() {
        let l = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 2.0]));
        let op = InertiaOperator::new(l);
        let z = SkewMatrix::generator(3, 0, 1);
        let w = op.inverse(&z).unwrap();
        assert!((op.apply(&w).as_matrix() - z.as_matrix()).amax() < 1e-14);
        let rank1 = InertiaOperator::new(DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 1.0])));
        assert!(matches!(rank1.inverse(&z), Err(MechanicsError::SingularInertia { i: 0, j: 1, .. })));
    }

    #[test]
    fn kinetic_energy_of_spinning_disc() {
        let (m, r, w) = (2.0, 0.7, 1.3);
        let body = RigidBody::ball(m, r, 2).unwrap();
        let xi = AlgebraVector::new(SkewMatrix::generator(2, 0, 1).scale(w), DVector::zeros(2)).unwrap();
        let expected = m * r * r * w * w / 2.0;
        assert!((body.inner(&xi, &xi) - expected).abs() < 1e-14);
        // x0 = Rθ/√2 makes the metric Euclidean: m (ẋ0)² · 2 / 2 ...
        let v0 = r * w / 2f64.sqrt();
        assert!((body.inner(&xi, &xi) - m * v0 * v0).abs() < 1e-14);
        let z = DVector::from_vec(vec![0.4, -1.1]);
        let tr = AlgebraVector::translation(z.clone());
        assert!((body.inner(&tr, &tr) - m * z.norm_squared()).abs() < 1e-14);
    }

    #[test]
    fn metric_matrix_agrees_with_inner() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let body = RigidBody::with_inertia(1.7, rspd(&mut rng, 3)).unwrap();
        let g = body.metric_matrix();
        let (u, v) = (ralg(&mut rng, 3), ralg(&mut rng, 3));
        let cu = DVector::from_vec(u.to_coords());
        let cv = DVector::from_vec(v.to_coords());
        assert!(((cu.transpose() * &g * cv)[0] - body.inner(&u, &v)).abs() < 1e-13);
    }

    #[test]
    fn momentum_map_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let body = RigidBody::with_inertia(1.5, rspd(&mut rng, 3)).unwrap();
        let g = rgroup(&mut rng, 3);
        let xi = ralg(&mut rng, 3);
        let p = momentum_map(&body, &g, &xi);
        let e1 = AlgebraVector::translation(DVector::from_vec(vec![1.0, 0.0, 0.0]));
        let vc = g.rotation() * &xi.linear;
        assert!((p.trace_inner(&e1) - body.mass() * vc[0]).abs() < 1e-13);

        let z = rskew(&mut rng, 3);
        let p0 = momentum_map(&body, &EuclideanElement::identity(3), &AlgebraVector::new(z.clone(), DVector::zeros(3)).unwrap());
        let expected = body.inertia().apply(&z).scale(0.5 * body.mass());
        assert!((p0.angular.as_matrix() - expected.as_matrix()).amax() < 1e-14);
        assert_eq!(p0.linear.amax(), 0.0);
    }

    #[test]
    fn momentum_map_pairs_like_metric_with_adjoint_generator() {
        // P(g, ξ)(u) = ⟨ξ, Ad_{g⁻¹} u⟩
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in 2..=4 {
            let body = RigidBody::with_inertia(0.8, rspd(&mut rng, n)).unwrap();
            let g = rgroup(&mut rng, n);
            let xi = ralg(&mut rng, n);
            let u = ralg(&mut rng, n);
            let lhs = momentum_map(&body, &g, &xi).trace_inner(&u);
            let rhs = body.inner(&xi, &lie::group_adjoint(&g.inverse(), &u));
            assert!((lhs - rhs).abs() < 1e-12, "n={n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn b_tensor_scalar_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let op = InertiaOperator::scalar(0.4, 3);
        let xi = ralg(&mut rng, 3);
        let b = op.b_tensor(&xi, &xi).unwrap();
        assert!(b.angular.norm() < 1e-15);
        assert!((b.linear + xi.angular.apply(&xi.linear)).amax() < 1e-15);
    }

    #[test]
    fn b_tensor_pure_translations() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let op = InertiaOperator::new(rspd(&mut rng, 3));
        let (z1, z2) = (rvec(&mut rng, 3), rvec(&mut rng, 3));
        let b = op
            .b_tensor(&AlgebraVector::translation(z1.clone()), &AlgebraVector::translation(z2.clone()))
            .unwrap();
        let expected = op.inverse(&lie::wedge(&z1, &z2).unwrap()).unwrap();
        assert!((b.angular.as_matrix() - expected.as_matrix()).amax() < 1e-13);
        assert_eq!(b.linear.amax(), 0.0);
    }

    #[test]
    fn b_tensor_defining_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 2..=5 {
            let body = RigidBody::with_inertia(1.3, rspd(&mut rng, n)).unwrap();
            for _ in 0..20 {
                let (u, v, w) = (ralg(&mut rng, n), ralg(&mut rng, n), ralg(&mut rng, n));
                let lhs = body.inner(&body.inertia().b_tensor(&u, &v).unwrap(), &w);
                let rhs = body.inner(&v.bracket(&w), &u);
                assert!((lhs - rhs).abs() < 1e-11 * (1.0 + rhs.abs()), "n={n}");
            }
        }
    }

    #[test]
    fn free_flight_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let body = RigidBody::ball(1.0, 0.5, 3).unwrap();
        let g = rgroup(&mut rng, 3);
        let xi = ralg(&mut rng, 3);
        let (g0, x0) = free_flight(&g, &xi, 0.0).unwrap();
        assert!(g0.distance(&g) < 1e-15 && (&x0 - &xi).max_abs() < 1e-15);

        let tr = AlgebraVector::translation(rvec(&mut rng, 3));
        let (g1, _) = free_flight(&g, &tr, 2.0).unwrap();
        let expected = g.translation() + g.rotation() * &tr.linear * 2.0;
        assert!((g1.translation() - expected).amax() < 1e-14);

        let (_, x2) = free_flight(&g, &xi, 3.7).unwrap();
        assert!((body.energy(&x2) - body.energy(&xi)).abs() < 1e-12);
        assert!(free_flight(&g, &xi, -1.0).is_err());
    }

    #[test]
    fn free_flight_conserves_momentum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let body = RigidBody::ball(2.0, 0.5, 3).unwrap();
        let g = rgroup(&mut rng, 3);
        let xi = ralg(&mut rng, 3);
        let p0 = momentum_map(&body, &g, &xi);
        for tau in [0.1, 1.0, 7.5] {
            let (g1, x1) = free_flight(&g, &xi, tau).unwrap();
            assert!((&momentum_map(&body, &g1, &x1) - &p0).max_abs() < 1e-9);
        }
    }

    #[test]
    fn geodesic_integrator_matches_closed_form_at_fourth_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let op = InertiaOperator::scalar(0.2, 3);
        let g = rgroup(&mut rng, 3);
        let xi = ralg(&mut rng, 3).scale(2.0);
        let err = |h: f64| {
            let traj = geodesic_integrate(&op, &g, &xi, h, h).unwrap();
            let last = traj.last().unwrap();
            let (ge, xe) = free_flight(&g, &xi, h).unwrap();
            last.placement.distance(&ge).max((&last.velocity - &xe).max_abs())
        };
        let (e1, e2) = (err(0.1), err(0.05));
        // local error O(h⁵): halving h shrinks it by ~32
        assert!(e1 / e2 > 20.0, "ratio {}", e1 / e2);
        assert!(e1 < 1e-5);
    }

    #[test]
    fn geodesic_conserves_energy_and_momentum_for_general_inertia() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let body = RigidBody::with_inertia(1.0, rspd(&mut rng, 3)).unwrap();
        let g = rgroup(&mut rng, 3);
        let xi = ralg(&mut rng, 3);
        let traj = geodesic_integrate(body.inertia(), &g, &xi, 10.0, 1e-3).unwrap();
        let e0 = body.energy(&xi);
        let p0 = momentum_map(&body, &g, &xi);
        for s in traj.iter().step_by(500) {
            assert!((body.energy(&s.velocity) - e0).abs() < 1e-8);
            assert!((&momentum_map(&body, &s.placement, &s.velocity) - &p0).max_abs() < 1e-8);
        }
        assert!(geodesic_integrate(body.inertia(), &g, &xi, 1.0, 0.0).is_err());
    }
}
