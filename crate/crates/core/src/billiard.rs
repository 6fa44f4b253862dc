//! A rigid ball moving in a fixed table, with collisions given by a field of
//! strict collision maps.
//!
//! Between collisions the ball moves freely. At a collision the velocity of
//! the contact point is split by an involution `𝒯` of the contact tangent
//! plane: directions where `𝒯 = −1` are rough, the rest slide without
//! friction.

use std::f64::consts::SQRT_2;
use std::fmt::Write as _;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::contact::{adapted_frame, ContactError};
use crate::lie::{self, AlgebraVector, EuclideanElement, SkewMatrix};
use crate::mechanics::{self, MechanicsError};

/// Relative tolerance on the normal speed below which an impact counts as grazing.
pub const GRAZING_TOL: f64 = 1e-12;
/// Distance within which an impact counts as hitting a junction of two faces.
pub const CORNER_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BilliardError {
    #[error("no further collision: the ball escapes the table")]
    NoCollision,
    #[error("grazing impact: normal speed {normal_speed:.3e} at speed {speed:.3e}")]
    Grazing { normal_speed: f64, speed: f64 },
    #[error("impact within {distance:.3e} of the junction of faces {face} and {other}")]
    CornerHit { face: usize, other: usize, distance: f64 },
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("invalid roughness: {0}")]
    InvalidRoughness(String),
    #[error("invalid boundary condition: {0}")]
    InvalidBoundaryCondition(String),
    #[error("tangent map is not an involution of the contact plane (residual {0:.3e})")]
    NotInvolution(f64),
    #[error("contact point at distance {distance} from the center, radius {radius}")]
    ContactDistance { distance: f64, radius: f64 },
    #[error("state has dimension {got}, table needs {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("center velocity is zero")]
    ZeroVelocity,
    #[error("ball parameters must be positive (radius {radius}, inertia {lambda})")]
    InvalidBall { radius: f64, lambda: f64 },
    #[error(transparent)]
    Contact(#[from] ContactError),
    #[error(transparent)]
    Mechanics(#[from] MechanicsError),
    #[error(transparent)]
    Lie(#[from] lie::LieError),
}

/// Ball with rotationally symmetric mass distribution, `L = λI`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub radius: f64,
    pub lambda: f64,
    pub mass: f64,
}

impl Ball {
    /// Uniform ball in ℝⁿ with unit mass.
    pub fn uniform(radius: f64, n: usize) -> Self {
        Ball { radius, lambda: mechanics::ball_inertia(radius, n), mass: 1.0 }
    }

    pub fn validate(&self) -> Result<(), BilliardError> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if ok(self.radius) && ok(self.lambda) && ok(self.mass) {
            Ok(())
        } else {
            Err(BilliardError::InvalidBall { radius: self.radius, lambda: self.lambda })
        }
    }

    /// `α = 1/(1 + R²/2λ)`.
    pub fn alpha(&self) -> f64 {
        1.0 / (1.0 + self.radius * self.radius / (2.0 * self.lambda))
    }

    /// `m [½ λ Tr(ZZᵀ) + ½|z|²]`.
    pub fn energy(&self, xi: &AlgebraVector) -> f64 {
        let zz = xi.angular.trace_inner(&xi.angular);
        self.mass * (0.5 * self.lambda * zz + 0.5 * xi.linear.norm_squared())
    }
}

/// Fixed billiard tables. The table occupies the region the ball moves in.
#[derive(Debug, Clone, PartialEq)]
pub enum Table {
    /// Ball of the given radius centered at the origin, any dimension.
    Circle { radius: f64 },
    /// Planar wedge with apex at the origin, opening along `+x`.
    Wedge { half_angle: f64 },
    /// Planar strip `0 ≤ y ≤ width`.
    Strip { width: f64 },
    /// Slab `0 ≤ z ≤ gap` in ℝ³.
    Plates { gap: f64 },
    /// Box `[0, s₁] × … × [0, sₙ]`.
    Box { sides: Vec<f64> },
}

/// Flat face of a polyhedral table: `{x : ν·(x − p) ≥ 0}` with inward normal `ν`.
#[derive(Debug, Clone)]
struct Face {
    point: DVector<f64>,
    normal: DVector<f64>,
}

/// Impact found by [`next_collision`].
#[derive(Debug, Clone, PartialEq)]
pub struct Collision {
    pub tau: f64,
    /// Point of the table boundary touched by the ball.
    pub point: DVector<f64>,
    /// Inward normal of the table at `point`.
    pub normal: DVector<f64>,
    pub face: usize,
}

impl Table {
    /// Dimension required by the table, `None` for the circle.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Table::Circle { .. } => None,
            Table::Wedge { .. } | Table::Strip { .. } => Some(2),
            Table::Plates { .. } => Some(3),
            Table::Box { sides } => Some(sides.len()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Table::Circle { .. } => "circle",
            Table::Wedge { .. } => "wedge",
            Table::Strip { .. } => "strip",
            Table::Plates { .. } => "plates3d",
            Table::Box { .. } => "box",
        }
    }

    pub fn validate(&self, ball: &Ball) -> Result<(), BilliardError> {
        let bad = |m: String| Err(BilliardError::InvalidTable(m));
        match self {
            Table::Circle { radius } if !(*radius > ball.radius) => {
                bad(format!("circle radius {radius} must exceed ball radius {}", ball.radius))
            }
            Table::Wedge { half_angle } if !(*half_angle > 0.0 && *half_angle < std::f64::consts::FRAC_PI_2) => {
                bad(format!("wedge half-angle {half_angle} outside (0, π/2)"))
            }
            Table::Strip { width: w } | Table::Plates { gap: w } if !(*w > 2.0 * ball.radius) => {
                bad(format!("gap {w} must exceed the ball diameter {}", 2.0 * ball.radius))
            }
            Table::Box { sides } if sides.len() < 2 => bad("box needs at least two sides".into()),
            Table::Box { sides } if sides.iter().any(|s| !(*s > 2.0 * ball.radius)) => {
                bad(format!("box sides {sides:?} must exceed the ball diameter"))
            }
            _ => Ok(()),
        }
    }

    fn faces(&self) -> Vec<Face> {
        let e = |n: usize, i: usize, s: f64| {
            let mut v = DVector::zeros(n);
            v[i] = s;
            v
        };
        match self {
            Table::Circle { .. } => Vec::new(),
            Table::Wedge { half_angle: t } => {
                let (s, c) = t.sin_cos();
                vec![
                    Face { point: DVector::zeros(2), normal: DVector::from_vec(vec![s, c]) },
                    Face { point: DVector::zeros(2), normal: DVector::from_vec(vec![s, -c]) },
                ]
            }
            Table::Strip { width: w } | Table::Plates { gap: w } => {
                let n = self.dim().unwrap_or(2);
                vec![
                    Face { point: DVector::zeros(n), normal: e(n, n - 1, 1.0) },
                    Face { point: e(n, n - 1, *w), normal: e(n, n - 1, -1.0) },
                ]
            }
            Table::Box { sides } => {
                let n = sides.len();
                (0..n)
                    .flat_map(|i| {
                        [
                            Face { point: DVector::zeros(n), normal: e(n, i, 1.0) },
                            Face { point: e(n, i, sides[i]), normal: e(n, i, -1.0) },
                        ]
                    })
                    .collect()
            }
        }
    }

    /// Inward unit normal at a boundary point of the given face.
    pub fn normal_at(&self, point: &DVector<f64>, face: usize) -> DVector<f64> {
        match self {
            Table::Circle { .. } => -point / point.norm(),
            _ => self.faces()[face].normal.clone(),
        }
    }

    /// Whether a center position keeps the ball inside the table (with slack `tol`).
    pub fn contains_center(&self, a: &DVector<f64>, radius: f64, tol: f64) -> bool {
        match self {
            Table::Circle { radius: r } => a.norm() <= r - radius + tol,
            _ => self.faces().iter().all(|f| f.normal.dot(&(a - &f.point)) >= radius - tol),
        }
    }
}

/// Next impact of a ball of radius `radius` whose center moves along `a + τ v`.
pub fn next_collision(
    table: &Table,
    a: &DVector<f64>,
    v: &DVector<f64>,
    radius: f64,
) -> Result<Collision, BilliardError> {
    let n = a.len();
    if let Some(d) = table.dim() {
        if d != n {
            return Err(BilliardError::DimensionMismatch { expected: d, got: n });
        }
    }
    let speed = v.norm();
    if speed == 0.0 {
        return Err(BilliardError::ZeroVelocity);
    }
    let tau_min = 1e-9 * radius / speed;
    let collision = match table {
        Table::Circle { radius: r } => {
            let rho = r - radius;
            let vv = speed * speed;
            let av = a.dot(v);
            let c = a.norm_squared() - rho * rho;
            let disc = (av * av - vv * c).max(0.0);
            // positive root of |a + τv|² = ρ², in cancellation-free form
            let tau = if av > 0.0 { -c / (av + disc.sqrt()) } else { (disc.sqrt() - av) / vv };
            if !(tau > tau_min) {
                return Err(BilliardError::NoCollision);
            }
            let center = a + v * tau;
            let point = &center * (r / center.norm());
            let normal = -&point / *r;
            Collision { tau, point, normal, face: 0 }
        }
        _ => {
            let faces = table.faces();
            let mut best: Option<(f64, usize)> = None;
            for (i, f) in faces.iter().enumerate() {
                let vn = f.normal.dot(v);
                if vn >= 0.0 {
                    continue;
                }
                let gap = f.normal.dot(&(a - &f.point)) - radius;
                let tau = gap / -vn;
                if tau > tau_min && best.is_none_or(|(t, _)| tau < t) {
                    best = Some((tau, i));
                }
            }
            let (tau, face) = best.ok_or(BilliardError::NoCollision)?;
            let center = a + v * tau;
            for (other, f) in faces.iter().enumerate() {
                if other == face {
                    continue;
                }
                let distance = f.normal.dot(&(&center - &f.point)) - radius;
                if distance < CORNER_TOL {
                    return Err(BilliardError::CornerHit { face, other, distance });
                }
            }
            let normal = faces[face].normal.clone();
            let point = &center - &normal * radius;
            Collision { tau, point, normal, face }
        }
    };
    let vn = collision.normal.dot(v);
    if vn.abs() < GRAZING_TOL * speed {
        return Err(BilliardError::Grazing { normal_speed: vn.abs(), speed });
    }
    Ok(collision)
}

/// Contact point in the reference configuration, `b∘ = g'⁻¹(b')`.
pub fn reference_contact(
    g: &EuclideanElement,
    b: &DVector<f64>,
    radius: f64,
) -> Result<DVector<f64>, BilliardError> {
    let distance = (b - g.translation()).norm();
    if (distance - radius).abs() > 1e-9 * radius.max(1.0) {
        return Err(BilliardError::ContactDistance { distance, radius });
    }
    Ok(g.inverse().act(b))
}

/// Choice of rough directions in the contact tangent plane.
#[derive(Debug, Clone, PartialEq)]
pub enum Roughness {
    /// `𝒯 = I`
    Smooth,
    /// `𝒯 = −I`
    Full,
    /// The first `k` tangent vectors of the adapted frame of the table normal.
    Rank(usize),
    /// Angles in the contact plane against the adapted frame (ℝ³ only).
    Angles(Vec<f64>),
    /// Directions given by coordinates in the tangent part of the adapted frame.
    Tangent(Vec<DVector<f64>>),
}

impl Roughness {
    /// Rough directions in world coordinates at a contact with inward table normal `normal`.
    pub fn world_directions(&self, normal: &DVector<f64>) -> Result<Vec<DVector<f64>>, BilliardError> {
        let n = normal.len();
        let frame = || adapted_frame(normal, 1.0);
        let coeffs: Vec<DVector<f64>> = match self {
            Roughness::Smooth => return Ok(Vec::new()),
            Roughness::Full => (0..n - 1).map(|i| unit(n - 1, i)).collect(),
            Roughness::Rank(k) => {
                if *k > n - 1 {
                    return Err(BilliardError::InvalidRoughness(format!("rank {k} exceeds {}", n - 1)));
                }
                (0..*k).map(|i| unit(n - 1, i)).collect()
            }
            Roughness::Angles(angles) => {
                if n != 3 {
                    return Err(BilliardError::InvalidRoughness(format!(
                        "angle directions need dimension 3, got {n}"
                    )));
                }
                angles.iter().map(|t| DVector::from_vec(vec![t.cos(), t.sin()])).collect()
            }
            Roughness::Tangent(v) => {
                if v.iter().any(|c| c.len() != n - 1) {
                    return Err(BilliardError::InvalidRoughness(format!(
                        "tangent directions need {} coordinates",
                        n - 1
                    )));
                }
                v.clone()
            }
        };
        let f = frame()?;
        let t = f.columns(0, n - 1);
        Ok(coeffs.iter().map(|c| t * c).collect())
    }
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

/// Assignment of roughness to collisions.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCondition {
    Constant(Roughness),
    /// Rough where `b∘·axis > 0` on the ball surface, smooth elsewhere.
    Hemisphere { axis: DVector<f64>, rough: Roughness },
    /// Independent draw at every collision.
    Random(Vec<(Roughness, f64)>),
    /// One condition per table face.
    PerFace(Vec<BoundaryCondition>),
}

impl BoundaryCondition {
    pub fn specular() -> Self {
        BoundaryCondition::Constant(Roughness::Smooth)
    }

    pub fn rough() -> Self {
        BoundaryCondition::Constant(Roughness::Full)
    }

    pub fn validate(&self) -> Result<(), BilliardError> {
        match self {
            BoundaryCondition::Random(choices) => {
                if choices.is_empty() || choices.iter().any(|(_, p)| !(*p >= 0.0)) {
                    return Err(BilliardError::InvalidBoundaryCondition("probabilities must be nonnegative".into()));
                }
                let total: f64 = choices.iter().map(|c| c.1).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(BilliardError::InvalidBoundaryCondition(format!(
                        "probabilities sum to {total}, not 1"
                    )));
                }
                Ok(())
            }
            BoundaryCondition::PerFace(list) => list.iter().try_for_each(|b| b.validate()),
            BoundaryCondition::Hemisphere { axis, .. } if axis.norm() == 0.0 => {
                Err(BilliardError::InvalidBoundaryCondition("hemisphere axis is zero".into()))
            }
            _ => Ok(()),
        }
    }

    /// Whether the field of collision maps varies randomly between collisions.
    pub fn is_random(&self) -> bool {
        match self {
            BoundaryCondition::Random(c) => c.len() > 1,
            BoundaryCondition::PerFace(list) => list.iter().any(|b| b.is_random()),
            _ => false,
        }
    }

    /// Roughness for a collision on `face` at body-frame contact point `b_ref`.
    pub fn select<R: Rng + ?Sized>(
        &self,
        face: usize,
        b_ref: &DVector<f64>,
        rng: &mut R,
    ) -> Result<Roughness, BilliardError> {
        match self {
            BoundaryCondition::Constant(r) => Ok(r.clone()),
            BoundaryCondition::Hemisphere { axis, rough } => {
                if axis.len() != b_ref.len() {
                    return Err(BilliardError::DimensionMismatch { expected: b_ref.len(), got: axis.len() });
                }
                Ok(if b_ref.dot(axis) > 0.0 { rough.clone() } else { Roughness::Smooth })
            }
            BoundaryCondition::Random(choices) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (r, p) in choices {
                    acc += p;
                    if u < acc {
                        return Ok(r.clone());
                    }
                }
                Ok(choices.last().map(|c| c.0.clone()).unwrap_or(Roughness::Smooth))
            }
            BoundaryCondition::PerFace(list) => {
                let bc = list.get(face).ok_or_else(|| {
                    BilliardError::InvalidBoundaryCondition(format!("no condition for face {face}"))
                })?;
                bc.select(face, b_ref, rng)
            }
        }
    }
}

/// `𝒯 = I − 2P_D` for the span `D` of the given directions.
pub fn tangent_involution(directions: &[DVector<f64>], n: usize) -> Result<DMatrix<f64>, BilliardError> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for d in directions {
        let mut v = d.clone();
        for _ in 0..2 {
            for q in &basis {
                v -= q * q.dot(&v);
            }
        }
        let norm = v.norm();
        if norm <= 1e-12 * d.norm().max(1e-300) {
            return Err(BilliardError::InvalidRoughness("rough directions are linearly dependent".into()));
        }
        basis.push(v / norm);
    }
    let mut t = DMatrix::identity(n, n);
    for q in &basis {
        t -= q * q.transpose() * 2.0;
    }
    Ok(t)
}

/// The collision update in the body frame.
///
/// `Z' = Z⁻ − (α/2λ) b∘ ∧ (I − 𝒯)V⁻`, `z' = z⁻ − α(I − 𝒯)V⁻ − 2Π∘^⊥ z⁻`,
/// with `V⁻ = Π∘(Z⁻ b∘ + z⁻)` and `α = 1/(1 + R²/2λ)`.
pub fn collide(
    xi: &AlgebraVector,
    b_ref: &DVector<f64>,
    tangent_map: &DMatrix<f64>,
    ball: &Ball,
) -> Result<AlgebraVector, BilliardError> {
    let n = xi.dim();
    if b_ref.len() != n || tangent_map.nrows() != n || tangent_map.ncols() != n {
        return Err(BilliardError::DimensionMismatch { expected: n, got: b_ref.len() });
    }
    let nu = b_ref / b_ref.norm();
    let perp = &nu * nu.transpose();
    let proj = DMatrix::identity(n, n) - &perp;
    let on_plane = tangent_map * &proj;
    let residual = (&on_plane * &on_plane - &proj).amax().max((&perp * &on_plane).amax());
    if residual > 1e-9 {
        return Err(BilliardError::NotInvolution(residual));
    }
    let v = &proj * (xi.angular.apply(b_ref) + &xi.linear);
    let w = &v - tangent_map * &v;
    let alpha = ball.alpha();
    let angular = &xi.angular - &lie::wedge_unchecked(b_ref, &w).scale(alpha / (2.0 * ball.lambda));
    let linear = &xi.linear - &w * alpha - &perp * &xi.linear * 2.0;
    Ok(AlgebraVector { angular, linear })
}

/// Completely rough collision of a uniform disc in coordinates `x₀ = Rθ/√2`:
/// `v₀⁺ = −⅓v₀⁻ + (2√2/3) v⁻·Jν`, `v⁺ = [(2√2/3)v₀⁻ + ⅓ v⁻·Jν] Jν − (v⁻·ν)ν`.
pub fn collide_2d(v0: f64, v: &DVector<f64>, nu: &DVector<f64>) -> Result<(f64, DVector<f64>), BilliardError> {
    if nu.len() != 2 || v.len() != 2 {
        return Err(BilliardError::DimensionMismatch { expected: 2, got: nu.len().max(v.len()) });
    }
    if (nu.norm() - 1.0).abs() > 1e-9 {
        return Err(ContactError::NonUnitNormal(nu.norm()).into());
    }
    let jnu = DVector::from_vec(vec![-nu[1], nu[0]]);
    let vt = v.dot(&jnu);
    let c = 2.0 * SQRT_2 / 3.0;
    let v0_plus = -v0 / 3.0 + c * vt;
    let v_plus = &jnu * (c * v0 + vt / 3.0) - nu * v.dot(nu);
    Ok((v0_plus, v_plus))
}

/// Scaled angular velocity `v₀ = Rθ̇/√2` of a planar ball with `Z = θ̇ J`.
pub fn scaled_spin_2d(z: &SkewMatrix, radius: f64) -> f64 {
    z.as_matrix()[(1, 0)] * radius / SQRT_2
}

/// Inverse of [`scaled_spin_2d`].
pub fn spin_from_scaled_2d(v0: f64, radius: f64) -> SkewMatrix {
    SkewMatrix::generator(2, 0, 1).scale(v0 * SQRT_2 / radius)
}

/// Post-collision (or initial) state of the ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BilliardState {
    pub g: EuclideanElement,
    /// Body-frame velocity `(Z, z)`.
    pub xi: AlgebraVector,
    /// Last contact point on the table, if any.
    pub contact: Option<DVector<f64>>,
    pub face: Option<usize>,
    pub t: f64,
}

impl BilliardState {
    pub fn new(g: EuclideanElement, xi: AlgebraVector) -> Self {
        BilliardState { g, xi, contact: None, face: None, t: 0.0 }
    }

    /// Ball at rest orientation at `center`, moving with world center velocity `v` and body spin `spin`.
    pub fn from_center(center: DVector<f64>, v: DVector<f64>, spin: SkewMatrix) -> Result<Self, BilliardError> {
        let g = EuclideanElement::from_translation(center);
        Ok(Self::new(g, AlgebraVector::new(spin, v)?))
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn center(&self) -> &DVector<f64> {
        self.g.translation()
    }

    /// World velocity of the center, `A z`.
    pub fn center_velocity(&self) -> DVector<f64> {
        self.g.rotation() * &self.xi.linear
    }
}

/// Result of one billiard step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: BilliardState,
    pub tau: f64,
    pub rough_rank: usize,
}

/// One step: fly to the next impact, then apply the collision map chosen by `bc`.
pub fn step<R: Rng + ?Sized>(
    state: &BilliardState,
    table: &Table,
    ball: &Ball,
    bc: &BoundaryCondition,
    rng: &mut R,
) -> Result<StepOutcome, BilliardError> {
    let hit = next_collision(table, state.center(), &state.center_velocity(), ball.radius)?;
    let (g, xi_minus) = mechanics::free_flight(&state.g, &state.xi, hit.tau)?;
    reference_contact(&g, &hit.point, ball.radius)?;
    // b' − a' = −Rν exactly; subtracting far-out coordinates would lose digits
    let b_ref = g.rotation().transpose() * (&hit.normal * -ball.radius);
    let roughness = bc.select(hit.face, &b_ref, rng)?;
    let world = roughness.world_directions(&hit.normal)?;
    let rough_rank = world.len();
    let body: Vec<DVector<f64>> = world.iter().map(|d| g.rotation().transpose() * d).collect();
    let t = tangent_involution(&body, state.dim())?;
    let xi = collide(&xi_minus, &b_ref, &t, ball)?;
    Ok(StepOutcome {
        state: BilliardState { g, xi, contact: Some(hit.point), face: Some(hit.face), t: state.t + hit.tau },
        tau: hit.tau,
        rough_rank,
    })
}

/// A simulated orbit. `states[0]` is the initial state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<BilliardState>,
    pub taus: Vec<f64>,
    pub rough_ranks: Vec<usize>,
    /// Reason the simulation stopped before the requested number of steps.
    pub termination: Option<BilliardError>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.taus.len()
    }

    pub fn energies(&self, ball: &Ball) -> Vec<f64> {
        self.states.iter().map(|s| ball.energy(&s.xi)).collect()
    }

    /// Largest relative deviation of the energy from its initial value.
    pub fn energy_drift(&self, ball: &Ball) -> f64 {
        let e = self.energies(ball);
        let e0 = e[0];
        e.iter().map(|x| (x - e0).abs() / e0.abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
    }

    pub fn centers(&self) -> Vec<DVector<f64>> {
        self.states.iter().map(|s| s.center().clone()).collect()
    }

    /// CSV with one row per collision, giving the post-collision state.
    pub fn write_csv<W: Write>(&self, ball: &Ball, mut out: W) -> io::Result<()> {
        let n = self.states.first().map(|s| s.dim()).unwrap_or(2);
        let axes = ["x", "y", "z", "w"];
        let name = |i: usize| axes.get(i).map(|s| s.to_string()).unwrap_or_else(|| format!("x{i}"));
        let mut header = String::from("step,t,tau");
        for p in ["b", "a", "v"] {
            for i in 0..n {
                let _ = write!(header, ",{p}{}", name(i));
            }
        }
        if n == 2 {
            header.push_str(",v0");
        } else {
            for i in 0..n {
                for j in i + 1..n {
                    let _ = write!(header, ",omega{}{}", i + 1, j + 1);
                }
            }
        }
        header.push_str(",energy,rough_rank");
        writeln!(out, "{header}")?;
        for (k, s) in self.states.iter().enumerate().skip(1) {
            let mut row = format!("{k},{:.16e},{:.16e}", s.t, self.taus[k - 1]);
            let nan = DVector::from_element(n, f64::NAN);
            let b = s.contact.as_ref().unwrap_or(&nan);
            for x in b.iter().chain(s.center().iter()).chain(s.center_velocity().iter()) {
                let _ = write!(row, ",{x:.16e}");
            }
            if n == 2 {
                let _ = write!(row, ",{:.16e}", scaled_spin_2d(&s.xi.angular, ball.radius));
            } else {
                for w in s.xi.angular.to_coords() {
                    let _ = write!(row, ",{w:.16e}");
                }
            }
            let _ = write!(row, ",{:.16e},{}", ball.energy(&s.xi), self.rough_ranks[k - 1]);
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    /// SVG polyline of the center projected on coordinates `axes`.
    pub fn write_svg<W: Write>(&self, axes: (usize, usize), out: W) -> io::Result<()> {
        let pts: Vec<(f64, f64)> = self.states.iter().map(|s| (s.center()[axes.0], s.center()[axes.1])).collect();
        write_polyline_svg(&pts, out)
    }
}

/// Writes points as a single SVG polyline scaled into a 600×600 viewport.
pub fn write_polyline_svg<W: Write>(pts: &[(f64, f64)], mut out: W) -> io::Result<()> {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let size = 600.0;
    let margin = 10.0;
    let scale = (size - 2.0 * margin) / span;
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#)?;
    let mut s = String::new();
    for &(x, y) in pts {
        let _ = write!(s, "{:.3},{:.3} ", margin + (x - x0) * scale, size - margin - (y - y0) * scale);
    }
    writeln!(out, r#"<polyline fill="none" stroke="black" stroke-width="0.5" points="{}"/>"#, s.trim_end())?;
    writeln!(out, "</svg>")
}

/// Runs up to `steps` collisions. Errors end the run and are recorded in the trajectory.
pub fn simulate<R: Rng + ?Sized>(
    initial: &BilliardState,
    table: &Table,
    ball: &Ball,
    bc: &BoundaryCondition,
    steps: usize,
    rng: &mut R,
) -> Result<Trajectory, BilliardError> {
    ball.validate()?;
    table.validate(ball)?;
    bc.validate()?;
    if let Some(d) = table.dim() {
        if d != initial.dim() {
            return Err(BilliardError::DimensionMismatch { expected: d, got: initial.dim() });
        }
    }
    let mut traj = Trajectory {
        states: Vec::with_capacity(steps + 1),
        taus: Vec::with_capacity(steps),
        rough_ranks: Vec::with_capacity(steps),
        termination: None,
    };
    traj.states.push(initial.clone());
    for _ in 0..steps {
        let current = traj.states.last().expect("nonempty");
        match step(current, table, ball, bc, rng) {
            Ok(o) => {
                traj.states.push(o.state);
                traj.taus.push(o.tau);
                traj.rough_ranks.push(o.rough_rank);
            }
            Err(e) => {
                traj.termination = Some(e);
                break;
            }
        }
    }
    Ok(traj)
}

/// ChaCha8 generator for stream `stream` of a seed; streams are independent.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn random_xi(n: usize, rng: &mut impl Rng) -> AlgebraVector {
        let z = SkewMatrix::from_matrix(DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        AlgebraVector::new(z, DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))).unwrap()
    }

    fn random_rotation(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let z = SkewMatrix::from_matrix(DMatrix::from_fn(n, n, |_, _| rng.random_range(-3.0..3.0))).unwrap();
        lie::so_exp(&z)
    }

    #[test]
    fn alpha_for_uniform_balls() {
        for n in 2..=5 {
            let b = Ball::uniform(0.7, n);
            assert!((b.alpha() - 2.0 / (n as f64 + 4.0)).abs() < 1e-15);
        }
        assert!((Ball::uniform(1.0, 2).alpha() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn circle_next_collision() {
        let t = Table::Circle { radius: 2.0 };
        let c = next_collision(&t, &v(&[0.0, 0.0]), &v(&[1.0, 0.0]), 1.0).unwrap();
        assert!((c.tau - 1.0).abs() < 1e-15);
        assert!((c.point - v(&[2.0, 0.0])).amax() < 1e-15);
        assert!((c.normal - v(&[-1.0, 0.0])).amax() < 1e-15);
        // from the boundary, moving inward along a chord
        let c2 = next_collision(&t, &v(&[1.0, 0.0]), &v(&[-1.0, 1.0]), 1.0).unwrap();
        assert!((c2.tau - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strip_flight_time() {
        let t = Table::Strip { width: 3.0 };
        let c = next_collision(&t, &v(&[0.0, 0.5]), &v(&[0.3, 2.0]), 0.5).unwrap();
        assert!((c.tau - 1.0).abs() < 1e-15);
        assert_eq!(c.face, 1);
        assert!((c.point - v(&[0.3, 3.0])).amax() < 1e-15);
    }

    #[test]
    fn wedge_escape_and_corner() {
        let t = Table::Wedge { half_angle: 0.4 };
        assert_eq!(next_collision(&t, &v(&[5.0, 0.0]), &v(&[1.0, 0.0]), 0.5), Err(BilliardError::NoCollision));
        let apex = 0.5 / 0.4f64.sin();
        let err = next_collision(&t, &v(&[apex + 3.0, 0.0]), &v(&[-1.0, 0.0]), 0.5).unwrap_err();
        assert!(matches!(err, BilliardError::CornerHit { .. }));
    }

    #[test]
    fn box_faces_and_grazing() {
        let t = Table::Box { sides: vec![4.0, 2.0] };
        let c = next_collision(&t, &v(&[1.0, 1.0]), &v(&[-1.0, 0.1]), 0.5).unwrap();
        assert_eq!(c.face, 0);
        assert!((c.tau - 0.5).abs() < 1e-15);
        let err = next_collision(&t, &v(&[1.0, 1.0]), &v(&[1.0, 0.0]), 0.5).unwrap();
        assert_eq!(err.face, 1);
        let corner = next_collision(&t, &v(&[1.5, 1.5]), &v(&[-1.0, 0.0]), 0.5).unwrap_err();
        assert!(matches!(corner, BilliardError::CornerHit { .. }));
        let circle = Table::Circle { radius: 2.0 };
        let graze = next_collision(&circle, &v(&[0.0, 1.0]), &v(&[1.0, 0.0]), 1.0).unwrap_err();
        assert!(matches!(graze, BilliardError::NoCollision | BilliardError::Grazing { .. }));
    }

    #[test]
    fn reference_contact_examples() {
        let r = 0.7;
        let b = reference_contact(&EuclideanElement::identity(3), &v(&[0.0, 0.0, r]), r).unwrap();
        assert!((b - v(&[0.0, 0.0, r])).amax() < 1e-15);
        let mut rng = stream_rng(1, 0);
        for n in 2..=4 {
            let g = EuclideanElement::new(random_rotation(n, &mut rng), DVector::from_fn(n, |_, _| rng.random())).unwrap();
            let nu = crate::contact::random_unit(n, &mut rng);
            let point = g.translation() - &nu * r;
            let b = reference_contact(&g, &point, r).unwrap();
            assert!((b.norm() - r).abs() < 1e-12);
            assert!((g.rotation() * (&b / r) + &nu).amax() < 1e-10);
        }
        assert!(reference_contact(&EuclideanElement::identity(2), &v(&[2.0, 0.0]), 1.0).is_err());
    }

    #[test]
    fn specular_collide_only_flips_normal() {
        let mut rng = stream_rng(2, 0);
        let ball = Ball::uniform(0.5, 3);
        let xi = random_xi(3, &mut rng);
        let b = v(&[0.0, 0.0, -0.5]);
        let out = collide(&xi, &b, &DMatrix::identity(3, 3), &ball).unwrap();
        assert_eq!(out.angular, xi.angular);
        let expected = v(&[xi.linear[0], xi.linear[1], -xi.linear[2]]);
        assert!((out.linear - expected).amax() < 1e-15);
    }

    #[test]
    fn collide_conserves_energy_and_is_reversible() {
        let mut rng = stream_rng(3, 0);
        for n in 2..=4 {
            let ball = Ball { radius: 0.6, lambda: 0.11, mass: 1.3 };
            for _ in 0..50 {
                let xi = random_xi(n, &mut rng);
                let b = crate::contact::random_unit(n, &mut rng) * ball.radius;
                let k = rng.random_range(0..n);
                let dirs: Vec<DVector<f64>> = (0..k)
                    .map(|_| {
                        let d = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                        &d - &b * (b.dot(&d) / b.norm_squared())
                    })
                    .collect();
                let t = tangent_involution(&dirs, n).unwrap();
                let out = collide(&xi, &b, &t, &ball).unwrap();
                assert!((ball.energy(&out) - ball.energy(&xi)).abs() < 1e-12);
                let back = collide(&out.scale(-1.0), &b, &t, &ball).unwrap();
                assert!((&back + &xi).max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn collide_rejects_non_involution() {
        let ball = Ball::uniform(1.0, 2);
        let xi = AlgebraVector::zeros(2);
        let err = collide(&xi, &v(&[0.0, 1.0]), &(DMatrix::identity(2, 2) * 0.5), &ball).unwrap_err();
        assert!(matches!(err, BilliardError::NotInvolution(_)));
    }

    #[test]
    fn collide_2d_examples() {
        let nu = v(&[0.6, 0.8]);
        let (v0, vp) = collide_2d(0.0, &(-&nu), &nu).unwrap();
        assert!(v0.abs() < 1e-15 && (vp - &nu).amax() < 1e-15);
    }

    #[test]
    fn collide_2d_matches_general_collide() {
        let mut rng = stream_rng(4, 0);
        let r = 0.8;
        let ball = Ball::uniform(r, 2);
        for _ in 0..1000 {
            let a = random_rotation(2, &mut rng);
            let nu = crate::contact::random_unit(2, &mut rng);
            let xi = random_xi(2, &mut rng);
            // table normal ν at b', body contact point b∘ with A b∘ = −Rν
            let b_ref = a.transpose() * (-&nu * r);
            let out = collide(&xi, &b_ref, &(-DMatrix::identity(2, 2)), &ball).unwrap();
            let (v0, vw) = collide_2d(scaled_spin_2d(&xi.angular, r), &(&a * &xi.linear), &nu).unwrap();
            assert!((scaled_spin_2d(&out.angular, r) - v0).abs() < 1e-12);
            assert!((&a * &out.linear - vw).amax() < 1e-12);
        }
    }

    #[test]
    fn collide_2d_tetrahedral_angle() {
        let nu = v(&[0.0, 1.0]);
        let jnu = v(&[-1.0, 0.0]);
        // columns: images of e0, Jν, ν in (v0, v·Jν, v·ν) coordinates
        let mut m = DMatrix::zeros(3, 3);
        for (k, (v0, vel)) in [(1.0, DVector::zeros(2)), (0.0, jnu.clone()), (0.0, nu.clone())].into_iter().enumerate() {
            let (a, b) = collide_2d(v0, &vel, &nu).unwrap();
            m[(0, k)] = a;
            m[(1, k)] = b.dot(&jnu);
            m[(2, k)] = b.dot(&nu);
        }
        assert!((m[(0, 0)] + 1.0 / 3.0).abs() < 1e-15);
        assert!((m[(0, 1)] - 2.0 * SQRT_2 / 3.0).abs() < 1e-15);
        // undo the two reflections; what remains is a rotation by β in the (e0, Jν) plane
        let rot = &m * DMatrix::from_diagonal(&v(&[-1.0, 1.0, -1.0]));
        let cos_beta = (rot[(0, 0)] + rot[(1, 1)]) / 2.0;
        assert!((cos_beta - 1.0 / 3.0).abs() < 1e-15);
        assert!((rot[(0, 0)] - rot[(1, 1)]).abs() < 1e-15 && (rot[(0, 1)] + rot[(1, 0)]).abs() < 1e-15);
        assert!((rot[(1, 0)].abs() - 2.0 * SQRT_2 / 3.0).abs() < 1e-15);
        assert!((rot[(2, 2)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn roughness_directions() {
        let up = v(&[0.0, 0.0, 1.0]);
        let d = Roughness::Angles(vec![0.0, FRAC_PI_2]).world_directions(&up).unwrap();
        assert!((&d[0] - v(&[1.0, 0.0, 0.0])).amax() < 1e-15);
        assert!((&d[1] - v(&[0.0, 1.0, 0.0])).amax() < 1e-15);
        let down = -&up;
        let d = Roughness::Angles(vec![0.0]).world_directions(&down).unwrap();
        assert!((d[0].abs() - v(&[1.0, 0.0, 0.0])).amax() < 1e-15);
        assert_eq!(Roughness::Full.world_directions(&v(&[0.0, 1.0])).unwrap().len(), 1);
        assert!(Roughness::Rank(3).world_directions(&up).is_err());
        assert!(Roughness::Angles(vec![0.0]).world_directions(&v(&[0.0, 1.0])).is_err());
        assert!(tangent_involution(&[v(&[1.0, 0.0, 0.0]), v(&[2.0, 0.0, 0.0])], 3).is_err());
    }

    #[test]
    fn random_bc_validation() {
        let bad = BoundaryCondition::Random(vec![(Roughness::Smooth, 0.3), (Roughness::Full, 0.3)]);
        assert!(bad.validate().is_err());
        let good = BoundaryCondition::Random(vec![(Roughness::Smooth, 0.5), (Roughness::Full, 0.5)]);
        assert!(good.validate().is_ok() && good.is_random());
    }

    #[test]
    fn specular_circle_keeps_chord_angle() {
        let table = Table::Circle { radius: 2.0 };
        let ball = Ball::uniform(0.5, 2);
        let s = BilliardState::from_center(v(&[0.3, -0.2]), v(&[0.7, 0.4]), SkewMatrix::zeros(2)).unwrap();
        let traj = simulate(&s, &table, &ball, &BoundaryCondition::specular(), 200, &mut stream_rng(0, 0)).unwrap();
        assert!(traj.termination.is_none());
        let angles: Vec<f64> = traj.states[1..]
            .iter()
            .map(|st| {
                let a = st.center();
                (a.dot(&st.center_velocity()) / (a.norm() * st.center_velocity().norm())).acos()
            })
            .collect();
        for w in angles.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn simulate_is_deterministic_and_one_step_matches() {
        let table = Table::Plates { gap: 3.0 };
        let ball = Ball::uniform(0.5, 3);
        let bc = BoundaryCondition::Random(vec![
            (Roughness::Angles(vec![0.0]), 1.0 / 3.0),
            (Roughness::Angles(vec![FRAC_PI_3]), 1.0 / 3.0),
            (Roughness::Angles(vec![2.0 * FRAC_PI_3]), 1.0 / 3.0),
        ]);
        let s = BilliardState::from_center(v(&[0.0, 0.0, 1.0]), v(&[0.3, 0.1, 1.0]), SkewMatrix::generator(3, 0, 1)).unwrap();
        let a = simulate(&s, &table, &ball, &bc, 300, &mut stream_rng(9, 1)).unwrap();
        let b = simulate(&s, &table, &ball, &bc, 300, &mut stream_rng(9, 1)).unwrap();
        assert_eq!(a.states, b.states);
        let one = simulate(&s, &table, &ball, &bc, 1, &mut stream_rng(9, 1)).unwrap();
        let st = step(&s, &table, &ball, &bc, &mut stream_rng(9, 1)).unwrap();
        assert_eq!(one.states[1], st.state);
        assert!(a.energy_drift(&ball) < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let table = Table::Circle { radius: 2.0 };
        let ball = Ball::uniform(0.5, 2);
        let s = BilliardState::from_center(v(&[0.0, 0.0]), v(&[1.0, 0.3]), SkewMatrix::zeros(2)).unwrap();
        let traj = simulate(&s, &table, &ball, &BoundaryCondition::rough(), 5, &mut stream_rng(0, 0)).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&ball, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,t,tau,bx,by,ax,ay,vx,vy,v0,energy,rough_rank");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("1,"));
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 12 && l.ends_with(",1")));
        let mut svg = Vec::new();
        traj.write_svg((0, 1), &mut svg).unwrap();
        assert!(String::from_utf8(svg).unwrap().contains("<polyline"));
    }
}
