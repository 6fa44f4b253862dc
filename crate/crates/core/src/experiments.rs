//! Ensemble and single-orbit experiments: return-angle statistics, circle
//! caustics, boundedness between plates and diffusion in a strip.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::billiard::{
    self, stream_rng, Ball, BilliardError, BilliardState, BoundaryCondition, Roughness, Table, Trajectory,
};
use crate::contact::adapted_frame;
use crate::lie::{AlgebraVector, EuclideanElement, SkewMatrix};

/// Kolmogorov–Smirnov distance between the empirical distribution of `samples` and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// CDF `sin²φ` of the density `sin 2φ` on `[0, π/2]`.
pub fn sin2_cdf(phi: f64) -> f64 {
    phi.clamp(0.0, FRAC_PI_2).sin().powi(2)
}

/// Uniform bins on `[lo, hi]`; values outside are clamped into the end bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize, data: &[f64]) -> Self {
        let mut counts = vec![0u64; bins];
        let width = (hi - lo) / bins as f64;
        for &x in data {
            let k = (((x - lo) / width).floor().max(0.0) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Histogram { lo, hi, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    /// `bin_lo,bin_hi,count,density` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,count,density\n");
        let w = self.bin_width();
        let total = self.total().max(1) as f64;
        for (k, c) in self.counts.iter().enumerate() {
            let lo = self.lo + k as f64 * w;
            let _ = writeln!(s, "{:.16e},{:.16e},{},{:.16e}", lo, lo + w, c, *c as f64 / (total * w));
        }
        s
    }

    /// Bars of the empirical density with an overlaid reference density curve.
    pub fn write_svg<W: Write>(&self, reference: impl Fn(f64) -> f64, mut out: W) -> io::Result<()> {
        let (wpx, hpx, m) = (600.0, 400.0, 20.0);
        let w = self.bin_width();
        let total = self.total().max(1) as f64;
        let dens: Vec<f64> = self.counts.iter().map(|c| *c as f64 / (total * w)).collect();
        let refs: Vec<f64> = (0..=200).map(|i| reference(self.lo + (self.hi - self.lo) * i as f64 / 200.0)).collect();
        let ymax = dens.iter().chain(refs.iter()).cloned().fold(1e-12, f64::max) * 1.05;
        let sx = (wpx - 2.0 * m) / (self.hi - self.lo);
        let sy = (hpx - 2.0 * m) / ymax;
        writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{wpx}" height="{hpx}">"#)?;
        for (k, d) in dens.iter().enumerate() {
            let x = m + k as f64 * w * sx;
            writeln!(
                out,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="lightgray" stroke="gray"/>"#,
                x,
                hpx - m - d * sy,
                w * sx,
                d * sy
            )?;
        }
        let mut pts = String::new();
        for (i, r) in refs.iter().enumerate() {
            let x = m + (self.hi - self.lo) * i as f64 / 200.0 * sx;
            let _ = write!(pts, "{:.3},{:.3} ", x, hpx - m - r * sy);
        }
        writeln!(out, r#"<polyline fill="none" stroke="black" points="{}"/>"#, pts.trim_end())?;
        writeln!(out, "</svg>")
    }
}

/// Machine-readable result of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub stats: Vec<(String, f64)>,
    pub histogram: Option<Histogram>,
    pub pass: Option<bool>,
}

impl ExperimentReport {
    pub fn new(name: &str) -> Self {
        ExperimentReport { name: name.to_string(), stats: Vec::new(), histogram: None, pass: None }
    }

    pub fn push(&mut self, key: &str, value: f64) {
        self.stats.push((key.to_string(), value));
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.stats.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    /// `key=value` lines, floats with 17 significant digits.
    pub fn to_key_value(&self) -> String {
        let mut s = format!("experiment={}\n", self.name);
        for (k, v) in &self.stats {
            let _ = writeln!(s, "{k}={v:.16e}");
        }
        if let Some(p) = self.pass {
            let _ = writeln!(s, "pass={p}");
        }
        s
    }
}

/// Launch face of a box table for measure sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct LaunchFace {
    pub sides: Vec<f64>,
    /// Face index `2i` is `xᵢ = 0`, `2i + 1` is `xᵢ = sᵢ`.
    pub face: usize,
}

impl LaunchFace {
    fn axis(&self) -> usize {
        self.face / 2
    }

    fn inward_normal(&self) -> DVector<f64> {
        let n = self.sides.len();
        let mut v = DVector::zeros(n);
        v[self.axis()] = if self.face.is_multiple_of(2) { 1.0 } else { -1.0 };
        v
    }
}

/// Distribution of launch angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleSampler {
    /// Density proportional to `cos φ` w.r.t. the area measure on the hemisphere.
    Cosine,
    /// `φ` uniform on `[0, π/2]` (a deliberately wrong sampler).
    UniformAngle,
}

/// A point of the launch face together with a unit velocity in the
/// Euclidean velocity coordinates `(√(2λ) Z_ij, z)` of the configuration space.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSample {
    pub center: DVector<f64>,
    /// Unit vector, spin coordinates first, then the center velocity.
    pub direction: DVector<f64>,
    pub phi: f64,
}

/// Polar angle for a hemisphere in `dof` dimensions with density `cos φ`.
///
/// `dof = 2`: `φ = arcsin(2u − 1)` (signed); otherwise `φ = arcsin(u^{1/(dof−1)})`.
pub fn sample_polar_angle(dof: usize, u: f64) -> f64 {
    if dof <= 2 {
        (2.0 * u - 1.0).asin()
    } else {
        u.powf(1.0 / (dof as f64 - 1.0)).asin()
    }
}

/// Samples launch states on a face of a box: uniform position (ball fully inside),
/// direction with density `cos φ` against the inward normal of the configuration space.
pub fn sample_billiard_measure<R: Rng + ?Sized>(
    face: &LaunchFace,
    ball: &Ball,
    spin: bool,
    sampler: AngleSampler,
    count: usize,
    rng: &mut R,
) -> Vec<MeasureSample> {
    (0..count).map(|_| sample_one(face, ball, spin, sampler, rng)).collect()
}

fn sample_one<R: Rng + ?Sized>(
    face: &LaunchFace,
    ball: &Ball,
    spin: bool,
    sampler: AngleSampler,
    rng: &mut R,
) -> MeasureSample {
    let n = face.sides.len();
    let spin_dim = if spin { n * (n - 1) / 2 } else { 0 };
    let dof = n + spin_dim;
    let axis = face.axis();
    let mut center = DVector::zeros(n);
    for i in 0..n {
        center[i] = if i == axis {
            if face.face.is_multiple_of(2) { ball.radius } else { face.sides[i] - ball.radius }
        } else {
            rng.random_range(ball.radius..face.sides[i] - ball.radius)
        };
    }
    let u: f64 = rng.random();
    let phi = match sampler {
        AngleSampler::Cosine => sample_polar_angle(dof, u),
        AngleSampler::UniformAngle => {
            if dof <= 2 {
                (u - 0.5) * PI
            } else {
                u * FRAC_PI_2
            }
        }
    };
    // tangent direction in the (dof − 1)-dimensional boundary of the configuration space
    let tangent = if dof <= 2 {
        DVector::from_element(1, 1.0)
    } else {
        loop {
            let t = DVector::from_fn(dof - 1, |_, _| rng.random_range(-1.0..1.0));
            let norm = t.norm();
            if norm > 1e-3 && norm <= 1.0 {
                break t / norm;
            }
        }
    };
    let normal = face.inward_normal();
    let mut direction = DVector::zeros(dof);
    // tangent coordinates: spin first, then the positional axes other than `axis`
    let mut slots: Vec<usize> = (0..spin_dim).collect();
    slots.extend((0..n).filter(|&i| i != axis).map(|i| spin_dim + i));
    for (c, &slot) in tangent.iter().zip(&slots) {
        direction[slot] = c * phi.sin();
    }
    direction[spin_dim + axis] = normal[axis] * phi.cos();
    MeasureSample { center, direction, phi: phi.abs() }
}

/// Builds a billiard state from a measure sample with kinetic energy `energy`.
pub fn state_from_sample(sample: &MeasureSample, ball: &Ball, energy: f64) -> BilliardState {
    let n = sample.center.len();
    let spin_dim = sample.direction.len() - n;
    let speed = (2.0 * energy / ball.mass).sqrt();
    let w = &sample.direction * speed;
    let scale = (2.0 * ball.lambda).sqrt();
    let spin = if spin_dim > 0 {
        let coords: Vec<f64> = w.rows(0, spin_dim).iter().map(|x| x / scale).collect();
        SkewMatrix::from_coords(n, &coords).expect("spin coordinates")
    } else {
        SkewMatrix::zeros(n)
    };
    let xi = AlgebraVector { angular: spin, linear: w.rows(spin_dim, n).into_owned() };
    BilliardState::new(EuclideanElement::from_translation(sample.center.clone()), xi)
}

/// Euclidean velocity `(√(2λ) Z, A z)` of a ball in configuration space, spin first.
pub fn configuration_velocity(state: &BilliardState, ball: &Ball, spin: bool) -> DVector<f64> {
    let v = state.center_velocity();
    if !spin {
        return v;
    }
    let mut c: Vec<f64> = state.xi.angular.to_coords().iter().map(|x| x * (2.0 * ball.lambda).sqrt()).collect();
    c.extend(v.iter());
    DVector::from_vec(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnAngleConfig {
    pub face: LaunchFace,
    pub ball: Ball,
    pub bc: BoundaryCondition,
    pub sampler: AngleSampler,
    /// Whether the spin coordinates are part of the sampled velocity.
    pub spin: bool,
    pub count: usize,
    pub seed: u64,
    pub step_cap: usize,
    pub bins: usize,
}

impl ReturnAngleConfig {
    /// Rough uniform disc of radius 0.2 in the rectangle `[0, 1] × [0, 20]`, launched from `x = 0`.
    pub fn rough_rectangle(count: usize, seed: u64) -> Self {
        ReturnAngleConfig {
            face: LaunchFace { sides: vec![1.0, 20.0], face: 0 },
            ball: Ball::uniform(0.2, 2),
            bc: BoundaryCondition::rough(),
            sampler: AngleSampler::Cosine,
            spin: true,
            count,
            seed,
            step_cap: 10_000,
            bins: 50,
        }
    }
}

enum ReturnOutcome {
    Angle(f64, f64),
    Dropped,
    Failed,
}

/// Launches `count` samples from one face and records the angle of the
/// post-collision velocity with the face normal at the first return.
pub fn return_angle_experiment(cfg: &ReturnAngleConfig) -> Result<ExperimentReport, BilliardError> {
    let table = Table::Box { sides: cfg.face.sides.clone() };
    cfg.ball.validate()?;
    table.validate(&cfg.ball)?;
    cfg.bc.validate()?;
    let normal = cfg.face.inward_normal();
    let n = normal.len();
    let outcomes: Vec<ReturnOutcome> = (0..cfg.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, i as u64);
            let sample = sample_one(&cfg.face, &cfg.ball, cfg.spin, cfg.sampler, &mut rng);
            let state0 = state_from_sample(&sample, &cfg.ball, 0.5);
            let e0 = cfg.ball.energy(&state0.xi);
            let mut state = state0;
            for _ in 0..cfg.step_cap {
                match billiard::step(&state, &table, &cfg.ball, &cfg.bc, &mut rng) {
                    Ok(o) => {
                        state = o.state;
                        if state.face == Some(cfg.face.face) {
                            let w = configuration_velocity(&state, &cfg.ball, cfg.spin);
                            let spin_dim = w.len() - n;
                            let cos = w.rows(spin_dim, n).dot(&normal) / w.norm();
                            let drift = (cfg.ball.energy(&state.xi) - e0).abs() / e0;
                            return ReturnOutcome::Angle(cos.clamp(-1.0, 1.0).acos(), drift);
                        }
                    }
                    Err(_) => return ReturnOutcome::Failed,
                }
            }
            ReturnOutcome::Dropped
        })
        .collect();
    let mut angles = Vec::with_capacity(cfg.count);
    let (mut dropped, mut failed, mut drift) = (0usize, 0usize, 0.0f64);
    for o in outcomes {
        match o {
            ReturnOutcome::Angle(a, d) => {
                angles.push(a);
                drift = drift.max(d);
            }
            ReturnOutcome::Dropped => dropped += 1,
            ReturnOutcome::Failed => failed += 1,
        }
    }
    let ks = ks_statistic(&angles, sin2_cdf);
    let mut report = ExperimentReport::new("return-angle");
    report.push("count", cfg.count as f64);
    report.push("returned", angles.len() as f64);
    report.push("dropped_fraction", (dropped + failed) as f64 / cfg.count.max(1) as f64);
    report.push("failed", failed as f64);
    report.push("ks", ks);
    report.push("ks_threshold", 0.01);
    report.push("energy_drift", drift);
    report.histogram = Some(Histogram::new(0.0, FRAC_PI_2, cfg.bins, &angles));
    report.pass = Some(ks < 0.01 && ((dropped + failed) as f64) < 1e-3 * cfg.count as f64 && drift < 1e-9);
    Ok(report)
}

/// Vertex angles, chord midpoint radii and tangency residuals of a circle orbit.
pub fn caustic_analysis(traj: &Trajectory) -> Result<ExperimentReport, BilliardError> {
    // collision points of the center, skipping the initial (interior) state
    let pts: Vec<DVector<f64>> = traj.states[1..].iter().map(|s| s.center().clone()).collect();
    if pts.len() < 3 {
        return Err(BilliardError::InvalidTable("caustic analysis needs at least three collisions".into()));
    }
    let mut vertex = Vec::new();
    for w in pts.windows(3) {
        let (u, v) = (&w[0] - &w[1], &w[2] - &w[1]);
        vertex.push((u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos());
    }
    let mut mids = [Vec::new(), Vec::new()];
    let mut line_dist = [Vec::new(), Vec::new()];
    for (k, w) in pts.windows(2).enumerate() {
        let m = (&w[0] + &w[1]) / 2.0;
        let d = &w[1] - &w[0];
        let foot = &w[0] - &d * (w[0].dot(&d) / d.norm_squared());
        mids[k % 2].push(m.norm());
        line_dist[k % 2].push(foot.norm());
    }
    let spread = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if v.is_empty() { 0.0 } else { hi - lo }
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let radii = [mean(&mids[0]), mean(&mids[1])];
    let mut tangency = 0.0f64;
    for p in 0..2 {
        for (m, l) in mids[p].iter().zip(&line_dist[p]) {
            tangency = tangency.max((l - radii[p]).abs()).max((m - l).abs());
        }
    }
    let mut report = ExperimentReport::new("caustics");
    report.push("collisions", pts.len() as f64);
    report.push("vertex_angle_mean", mean(&vertex));
    report.push("vertex_angle_spread", spread(&vertex));
    report.push("radius_even", radii[0]);
    report.push("radius_odd", radii[1]);
    report.push("radius_even_spread", spread(&mids[0]));
    report.push("radius_odd_spread", spread(&mids[1]));
    report.push("tangency_residual", tangency);
    report.pass = Some(
        spread(&vertex) < 1e-9 && spread(&mids[0]) < 1e-9 && spread(&mids[1]) < 1e-9 && tangency < 1e-7,
    );
    Ok(report)
}

/// Maximum excursion of the projected center from its start, over the first and second half.
pub fn boundedness_report(traj: &Trajectory, axes: &[usize]) -> ExperimentReport {
    let centers = traj.centers();
    let start = &centers[0];
    let excursion: Vec<f64> = centers
        .iter()
        .map(|c| axes.iter().map(|&i| (c[i] - start[i]).powi(2)).sum::<f64>().sqrt())
        .collect();
    let half = excursion.len() / 2;
    let first = excursion[..half.max(1)].iter().cloned().fold(0.0, f64::max);
    let second = excursion[half..].iter().cloned().fold(0.0, f64::max);
    let mut report = ExperimentReport::new("bounded");
    report.push("steps", traj.steps() as f64);
    report.push("excursion_first_half", first);
    report.push("excursion_second_half", second);
    report.push("excursion", first.max(second));
    let bounded = second <= first * 1.05;
    report.push("bounded", if bounded { 1.0 } else { 0.0 });
    report.pass = Some(bounded);
    report
}

/// Longitudinal coordinate of the center at each collision.
pub fn longitudinal_trace(traj: &Trajectory, axis: usize) -> Vec<f64> {
    traj.states.iter().map(|s| s.center()[axis]).collect()
}

/// Log-spaced lags from `lo` to `hi` without repeats.
fn log_lags(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1).max(1) as f64;
            ((lo as f64).ln() * (1.0 - t) + (hi as f64).ln() * t).exp().round() as usize
        })
        .collect();
    out.dedup();
    out
}

/// Time- and ensemble-averaged mean-square displacement at the given lags.
pub fn mean_square_displacement(traces: &[Vec<f64>], lags: &[usize]) -> Vec<f64> {
    lags.iter()
        .map(|&k| {
            let (mut sum, mut cnt) = (0.0, 0usize);
            for x in traces {
                for j in 0..x.len().saturating_sub(k) {
                    sum += (x[j + k] - x[j]).powi(2);
                    cnt += 1;
                }
            }
            sum / cnt.max(1) as f64
        })
        .collect()
}

/// Least-squares slope of `log MSD` against `log lag` over lags `10 … N/10`.
pub fn msd_exponent(traces: &[Vec<f64>]) -> f64 {
    let len = traces.iter().map(|t| t.len()).min().unwrap_or(0);
    let hi = (len / 10).max(11);
    let lags = log_lags(10, hi, 25);
    let msd = mean_square_displacement(traces, &lags);
    let xs: Vec<f64> = lags.iter().map(|&k| (k as f64).ln()).collect();
    let ys: Vec<f64> = msd.iter().map(|m| m.max(f64::MIN_POSITIVE).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct StripConfig {
    pub width: f64,
    pub ball: Ball,
    pub bc: BoundaryCondition,
    pub seeds: usize,
    pub steps: usize,
    pub seed: u64,
}

impl StripConfig {
    /// Disc of radius 0.5 in a strip of width 3, each collision rough or smooth with probability ½.
    pub fn random_strip(seeds: usize, steps: usize, seed: u64) -> Self {
        StripConfig {
            width: 3.0,
            ball: Ball::uniform(0.5, 2),
            bc: BoundaryCondition::Random(vec![(Roughness::Smooth, 0.5), (Roughness::Full, 0.5)]),
            seeds,
            steps,
            seed,
        }
    }

    /// Initial state for trajectory `i`: random direction and spin at unit energy scale.
    pub fn initial_state(&self, i: usize) -> BilliardState {
        let mut rng = stream_rng(self.seed ^ 0x5eed, i as u64);
        let angle: f64 = rng.random_range(0.2..PI - 0.2);
        let v = DVector::from_vec(vec![angle.cos(), angle.sin()]);
        let spin = SkewMatrix::generator(2, 0, 1).scale(rng.random_range(-1.0..1.0) / self.ball.radius);
        let center = DVector::from_vec(vec![0.0, self.width / 2.0]);
        BilliardState::from_center(center, v, spin).expect("planar state")
    }
}

/// Ensemble of strip orbits; reports the MSD growth exponent and flight-time constancy.
pub fn strip_experiment(cfg: &StripConfig) -> Result<(ExperimentReport, Vec<Vec<f64>>), BilliardError> {
    let table = Table::Strip { width: cfg.width };
    let runs: Vec<Result<Trajectory, BilliardError>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, i as u64);
            billiard::simulate(&cfg.initial_state(i), &table, &cfg.ball, &cfg.bc, cfg.steps, &mut rng)
        })
        .collect();
    let mut traces = Vec::with_capacity(cfg.seeds);
    let (mut flight, mut flight_drift, mut drift, mut terminated) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    for r in runs {
        let t = r?;
        if t.termination.is_some() {
            terminated += 1;
        }
        flight = flight.max(flight_time_spread(&t));
        flight_drift = flight_drift.max(flight_time_drift(&t));
        drift = drift.max(t.energy_drift(&cfg.ball));
        traces.push(longitudinal_trace(&t, 0));
    }
    let mut report = ExperimentReport::new("strip");
    report.push("seeds", cfg.seeds as f64);
    report.push("steps", cfg.steps as f64);
    report.push("terminated", terminated as f64);
    report.push("flight_time_spread", flight);
    report.push("flight_time_drift", flight_drift);
    report.push("energy_drift", drift);
    if cfg.bc.is_random() {
        let alpha = msd_exponent(&traces);
        report.push("msd_exponent", alpha);
        report.pass = Some((0.8..=1.2).contains(&alpha) && terminated == 0);
    }
    Ok((report, traces))
}

/// Largest difference between successive flight times, skipping the first flight
/// (which starts away from the wall).
pub fn flight_time_spread(traj: &Trajectory) -> f64 {
    traj.taus.iter().skip(1).collect::<Vec<_>>().windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
}

/// Largest deviation of any flight time from the second one, relative to it.
pub fn flight_time_drift(traj: &Trajectory) -> f64 {
    if traj.taus.len() < 2 {
        return 0.0;
    }
    let t0 = traj.taus[1];
    traj.taus[1..].iter().map(|t| (t - t0).abs() / t0).fold(0.0, f64::max)
}

/// A rough wedge orbit that stays within radius 4.2 of the apex for at least 10⁴ collisions.
pub fn trapped_wedge_orbit() -> (Table, Ball, BilliardState) {
    let angle: f64 = 1.712_736_284_458_042_3;
    let state = BilliardState::from_center(
        DVector::from_vec(vec![3.545_083_913_077_086, 0.0]),
        DVector::from_vec(vec![angle.cos(), angle.sin()]),
        SkewMatrix::generator(2, 0, 1).scale(-1.252_569_234_787_968),
    )
    .expect("planar state");
    (Table::Wedge { half_angle: 0.4 }, Ball::uniform(0.5, 2), state)
}

/// Minimum distance in (center, center velocity) between the state after the
/// first collision and any later post-collision state.
pub fn recurrence_distance(traj: &Trajectory) -> f64 {
    if traj.states.len() < 3 {
        return f64::INFINITY;
    }
    let s0 = &traj.states[1];
    traj.states[2..]
        .iter()
        .map(|s| (s.center() - s0.center()).norm() + (s.center_velocity() - s0.center_velocity()).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Compares the rough subspaces selected by `bc` at `points` boundary points,
/// expressed in the parallel frame of the table (the adapted frame of the normal).
pub fn parallelism_check<R: Rng + ?Sized>(
    table: &Table,
    ball: &Ball,
    bc: &BoundaryCondition,
    points: usize,
    rng: &mut R,
) -> Result<ExperimentReport, BilliardError> {
    let n = table.dim().unwrap_or(2);
    let mut projectors: Vec<DMatrix<f64>> = Vec::with_capacity(points);
    for _ in 0..points.max(2) {
        let (point, face) = random_boundary_point(table, ball, rng);
        let normal = table.normal_at(&point, face);
        // random orientation: only the hemisphere condition looks at it
        let b_ref = crate::contact::random_unit(n, rng) * ball.radius;
        let roughness = bc.select(face, &b_ref, rng)?;
        let world = roughness.world_directions(&normal)?;
        let frame = adapted_frame(&normal, 1.0)?;
        let tangent = frame.columns(0, n - 1).into_owned();
        let coords: Vec<DVector<f64>> = world.iter().map(|d| tangent.transpose() * d).collect();
        let t = billiard::tangent_involution(&coords, n - 1)?;
        projectors.push((DMatrix::identity(n - 1, n - 1) - t) / 2.0);
    }
    let deviation = projectors.iter().map(|p| (p - &projectors[0]).norm()).fold(0.0, f64::max);
    let mut report = ExperimentReport::new("parallelism");
    report.push("points", projectors.len() as f64);
    report.push("max_deviation", deviation);
    let parallel = deviation < 1e-9;
    report.push("parallel", if parallel { 1.0 } else { 0.0 });
    report.pass = Some(parallel);
    Ok(report)
}

fn random_boundary_point<R: Rng + ?Sized>(table: &Table, ball: &Ball, rng: &mut R) -> (DVector<f64>, usize) {
    match table {
        Table::Circle { radius } => {
            let t: f64 = rng.random_range(0.0..2.0 * PI);
            (DVector::from_vec(vec![radius * t.cos(), radius * t.sin()]), 0)
        }
        Table::Wedge { half_angle } => {
            let s: f64 = rng.random_range(0.1..10.0);
            let face = rng.random_range(0..2);
            let sign = if face == 0 { -1.0 } else { 1.0 };
            (DVector::from_vec(vec![s * half_angle.cos(), sign * s * half_angle.sin()]), face)
        }
        Table::Strip { width } | Table::Plates { gap: width } => {
            let n = table.dim().unwrap_or(2);
            let face = rng.random_range(0..2);
            let mut p = DVector::from_fn(n, |_, _| rng.random_range(-10.0..10.0));
            p[n - 1] = if face == 0 { 0.0 } else { *width };
            (p, face)
        }
        Table::Box { sides } => {
            let n = sides.len();
            let face = rng.random_range(0..2 * n);
            let mut p = DVector::from_fn(n, |i, _| rng.random_range(ball.radius..sides[i] - ball.radius));
            p[face / 2] = if face % 2 == 0 { 0.0 } else { sides[face / 2] };
            (p, face)
        }
    }
}
