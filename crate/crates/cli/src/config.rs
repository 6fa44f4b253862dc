//! Flat `key=value` run configuration.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are ignored.
//! Lists are comma separated. Keys:
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `n` | dimension, 2 to 4 | 2, or the table's dimension |
//! | `table` | `circle`, `wedge`, `strip`, `plates3d`, `box` | `circle` |
//! | `r` | circle radius, wedge half-angle, strip width or plate gap | 2, 0.4, 3, 2 |
//! | `sides` | box side lengths | `1,20` in the plane, `2,…` otherwise |
//! | `R` | ball radius | 0.5 |
//! | `lambda` | inertia coefficient | `R²/(n+2)` |
//! | `mass` | ball mass | 1 |
//! | `rough` | boundary condition, see [`RoughSpec`] | `full` |
//! | `steps` | collisions to simulate | 1000 |
//! | `seed` | RNG seed | [`DEFAULT_SEED`] |
//! | `count` | launched samples / strip seeds | 100000 |
//! | `trials` | random configurations for `verify` | 500 |
//! | `k` | roughness rank for `verify strict` | random per trial |
//! | `sampler` | `cosine` or `uniform` launch angles | `cosine` |
//! | `bins` | histogram bins | 50 |
//! | `center`, `velocity`, `spin` | initial center, center velocity, spin coordinates | table dependent |
//! | `out`, `svg` | output paths | none |

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DVector;
use roughbill::{BoundaryCondition, Roughness, SkewMatrix, Table};

pub const DEFAULT_SEED: u64 = 20_240_601;

const KEYS: &[&str] = &[
    "n", "table", "r", "sides", "R", "lambda", "mass", "rough", "steps", "seed", "count", "trials", "k",
    "sampler", "bins", "center", "velocity", "spin", "out", "svg",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Circle,
    Wedge,
    Strip,
    Plates,
    Box,
}

impl TableKind {
    fn fixed_dim(self) -> Option<usize> {
        match self {
            TableKind::Wedge | TableKind::Strip => Some(2),
            TableKind::Plates => Some(3),
            _ => None,
        }
    }

    fn default_size(self) -> f64 {
        match self {
            TableKind::Circle | TableKind::Plates => 2.0,
            TableKind::Wedge => 0.4,
            TableKind::Strip => 3.0,
            TableKind::Box => 0.0,
        }
    }
}

impl fmt::Display for TableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableKind::Circle => "circle",
            TableKind::Wedge => "wedge",
            TableKind::Strip => "strip",
            TableKind::Plates => "plates3d",
            TableKind::Box => "box",
        })
    }
}

impl FromStr for TableKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "circle" => TableKind::Circle,
            "wedge" => TableKind::Wedge,
            "strip" => TableKind::Strip,
            "plates3d" | "plates" => TableKind::Plates,
            "box" | "rectangle" => TableKind::Box,
            _ => return Err(format!("unknown table `{s}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    Cosine,
    Uniform,
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampler::Cosine => "cosine",
            Sampler::Uniform => "uniform",
        })
    }
}

impl FromStr for Sampler {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cosine" => Ok(Sampler::Cosine),
            "uniform" => Ok(Sampler::Uniform),
            _ => Err(format!("unknown sampler `{s}`")),
        }
    }
}

/// Boundary condition as written on the command line.
///
/// * `none`, `full`
/// * `rank:k` or `rank:k:a1:…:ak` (angles in the contact plane, ℝ³ only)
/// * `random:cond@w,cond@w,…` with relative weights
/// * `hemisphere:x;y[;z…]`, rough where the ball's body point faces the axis
/// * `faces:cond/cond/…`, one condition per table face
#[derive(Debug, Clone, PartialEq)]
pub enum RoughSpec {
    None,
    Full,
    Rank { k: usize, angles: Vec<f64> },
    Random(Vec<(RoughSpec, f64)>),
    Hemisphere(Vec<f64>),
    Faces(Vec<RoughSpec>),
}

impl RoughSpec {
    fn roughness(&self) -> Result<Roughness, String> {
        match self {
            RoughSpec::None => Ok(Roughness::Smooth),
            RoughSpec::Full => Ok(Roughness::Full),
            RoughSpec::Rank { k, angles } if angles.is_empty() => Ok(Roughness::Rank(*k)),
            RoughSpec::Rank { angles, .. } => Ok(Roughness::Angles(angles.clone())),
            other => Err(format!("`{other}` cannot be nested here")),
        }
    }

    pub fn to_boundary_condition(&self) -> Result<BoundaryCondition, String> {
        Ok(match self {
            RoughSpec::Random(list) => {
                let total: f64 = list.iter().map(|c| c.1).sum();
                let choices = list
                    .iter()
                    .map(|(s, w)| Ok((s.roughness()?, w / total)))
                    .collect::<Result<Vec<_>, String>>()?;
                BoundaryCondition::Random(choices)
            }
            RoughSpec::Hemisphere(axis) => BoundaryCondition::Hemisphere {
                axis: DVector::from_column_slice(axis),
                rough: Roughness::Full,
            },
            RoughSpec::Faces(list) => {
                BoundaryCondition::PerFace(list.iter().map(|s| s.to_boundary_condition()).collect::<Result<_, _>>()?)
            }
            other => BoundaryCondition::Constant(other.roughness()?),
        })
    }

    fn check(&self, n: usize, faces: usize, errors: &mut Vec<String>) {
        match self {
            RoughSpec::None | RoughSpec::Full => {}
            RoughSpec::Rank { k, angles } => {
                if *k > n - 1 {
                    errors.push(format!("rough: rank {k} out of range 0..={} for n = {n}", n - 1));
                }
                if !angles.is_empty() {
                    if n != 3 {
                        errors.push("rough: rank angles need n = 3".into());
                    }
                    if angles.len() != *k {
                        errors.push(format!("rough: rank {k} needs {k} angles, got {}", angles.len()));
                    }
                }
            }
            RoughSpec::Random(list) => {
                if list.iter().any(|c| !(c.1 >= 0.0 && c.1.is_finite())) || list.iter().map(|c| c.1).sum::<f64>() <= 0.0
                {
                    errors.push("rough: random weights must be nonnegative with positive sum".into());
                }
                for (s, _) in list {
                    s.check(n, faces, errors);
                }
            }
            RoughSpec::Hemisphere(axis) => {
                if axis.len() != n {
                    errors.push(format!("rough: hemisphere axis has {} components, n = {n}", axis.len()));
                } else if axis.iter().all(|x| *x == 0.0) {
                    errors.push("rough: hemisphere axis is zero".into());
                }
            }
            RoughSpec::Faces(list) => {
                if list.len() != faces {
                    errors.push(format!("rough: table has {faces} faces, got {} conditions", list.len()));
                }
                for s in list {
                    s.check(n, faces, errors);
                }
            }
        }
    }
}

fn join(v: &[f64], sep: &str) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(sep)
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl fmt::Display for RoughSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoughSpec::None => f.write_str("none"),
            RoughSpec::Full => f.write_str("full"),
            RoughSpec::Rank { k, angles } if angles.is_empty() => write!(f, "rank:{k}"),
            RoughSpec::Rank { k, angles } => write!(f, "rank:{k}:{}", join(angles, ":")),
            RoughSpec::Random(list) => {
                let parts: Vec<String> = list.iter().map(|(s, w)| format!("{s}@{}", fmt_f64(*w))).collect();
                write!(f, "random:{}", parts.join(","))
            }
            RoughSpec::Hemisphere(axis) => write!(f, "hemisphere:{}", join(axis, ";")),
            RoughSpec::Faces(list) => {
                let parts: Vec<String> = list.iter().map(|s| s.to_string()).collect();
                write!(f, "faces:{}", parts.join("/"))
            }
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

fn parse_list(s: &str, sep: char) -> Result<Vec<f64>, String> {
    s.split(sep).map(parse_f64).collect()
}

impl FromStr for RoughSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        match head {
            "none" | "smooth" => Ok(RoughSpec::None),
            "full" | "rough" => Ok(RoughSpec::Full),
            "rank" => {
                let mut parts = rest.split(':');
                let k = parts
                    .next()
                    .and_then(|k| k.trim().parse::<usize>().ok())
                    .ok_or_else(|| format!("`{s}`: rank needs an integer"))?;
                let angles = parts.map(parse_f64).collect::<Result<Vec<_>, _>>()?;
                Ok(RoughSpec::Rank { k, angles })
            }
            "random" => {
                let list = rest
                    .split(',')
                    .map(|item| {
                        let (cond, w) = item.rsplit_once('@').ok_or_else(|| format!("`{item}`: expected condition@weight"))?;
                        let cond: RoughSpec = cond.parse()?;
                        if matches!(cond, RoughSpec::Random(_) | RoughSpec::Faces(_) | RoughSpec::Hemisphere(_)) {
                            return Err(format!("`{item}`: random choices must be none, full or rank"));
                        }
                        Ok((cond, parse_f64(w)?))
                    })
                    .collect::<Result<Vec<_>, String>>()?;
                Ok(RoughSpec::Random(list))
            }
            "hemisphere" => Ok(RoughSpec::Hemisphere(parse_list(rest, ';')?)),
            "faces" => {
                let list = rest.split('/').map(|p| p.parse()).collect::<Result<Vec<RoughSpec>, _>>()?;
                if list.iter().any(|s| matches!(s, RoughSpec::Faces(_))) {
                    return Err(format!("`{s}`: faces cannot nest"));
                }
                Ok(RoughSpec::Faces(list))
            }
            _ => Err(format!("unknown boundary condition `{s}`")),
        }
    }
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub table: TableKind,
    /// Table size; unused for boxes.
    pub r: f64,
    pub sides: Vec<f64>,
    pub radius: f64,
    pub lambda: f64,
    pub mass: f64,
    pub rough: RoughSpec,
    pub steps: usize,
    pub seed: u64,
    pub count: usize,
    pub trials: usize,
    pub k: Option<usize>,
    pub sampler: Sampler,
    pub bins: usize,
    pub center: Option<Vec<f64>>,
    pub velocity: Option<Vec<f64>>,
    pub spin: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid configuration:\n  {}", .0.join("\n  "))]
pub struct ConfigErrors(pub Vec<String>);

/// Splits `key=value` lines into a map. Later keys override earlier ones.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigErrors> {
    let mut map = BTreeMap::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => errors.push(format!("line {}: expected key=value, got `{line}`", i + 1)),
        }
    }
    if errors.is_empty() { Ok(map) } else { Err(ConfigErrors(errors)) }
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    RunConfig::from_pairs(&parse_pairs(text)?)
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_pairs(&BTreeMap::new()).expect("defaults are valid")
    }
}

impl RunConfig {
    /// Builds a configuration from key/value pairs, filling defaults and collecting every error.
    pub fn from_pairs(map: &BTreeMap<String, String>) -> Result<RunConfig, ConfigErrors> {
        let mut errors: Vec<String> = map
            .keys()
            .filter(|k| !KEYS.contains(&k.as_str()))
            .map(|k| format!("unknown key `{k}`"))
            .collect();
        let get = |key: &str| map.get(key).map(|s| s.as_str());

        fn field<T>(errors: &mut Vec<String>, key: &str, v: Option<&str>, parse: impl Fn(&str) -> Result<T, String>) -> Option<T> {
            let v = v?;
            match parse(v) {
                Ok(x) => Some(x),
                Err(e) => {
                    errors.push(format!("{key}: {e}"));
                    None
                }
            }
        }
        let int = |s: &str| s.trim().parse::<usize>().map_err(|_| format!("`{s}` is not a nonnegative integer"));

        let table = field(&mut errors, "table", get("table"), |s| s.parse::<TableKind>()).unwrap_or(TableKind::Circle);
        let sides_given = field(&mut errors, "sides", get("sides"), |s| parse_list(s, ','));
        let n_given = field(&mut errors, "n", get("n"), int);
        let n = n_given
            .or(table.fixed_dim())
            .or(sides_given.as_ref().filter(|_| table == TableKind::Box).map(|s| s.len()))
            .unwrap_or(2);
        if !(2..=4).contains(&n) {
            errors.push(format!("n: {n} out of range 2..=4"));
        }
        if let Some(d) = table.fixed_dim() {
            if n != d {
                errors.push(format!("n: table {table} needs n = {d}, got {n}"));
            }
        }
        let n = n.clamp(2, 4);
        let r = field(&mut errors, "r", get("r"), parse_f64).unwrap_or(table.default_size());
        let sides = sides_given.unwrap_or_else(|| if n == 2 { vec![1.0, 20.0] } else { vec![2.0; n] });
        let radius = field(&mut errors, "R", get("R"), parse_f64).unwrap_or(0.5);
        let lambda = field(&mut errors, "lambda", get("lambda"), parse_f64).unwrap_or(radius * radius / (n as f64 + 2.0));
        let mass = field(&mut errors, "mass", get("mass"), parse_f64).unwrap_or(1.0);
        let rough = field(&mut errors, "rough", get("rough"), |s| s.parse::<RoughSpec>()).unwrap_or(RoughSpec::Full);
        let steps = field(&mut errors, "steps", get("steps"), int).unwrap_or(1000);
        let seed = field(&mut errors, "seed", get("seed"), |s| {
            s.trim().parse::<u64>().map_err(|_| format!("`{s}` is not a nonnegative integer"))
        })
        .unwrap_or(DEFAULT_SEED);
        let count = field(&mut errors, "count", get("count"), int).unwrap_or(100_000);
        let trials = field(&mut errors, "trials", get("trials"), int).unwrap_or(500);
        let k = field(&mut errors, "k", get("k"), |s| if s == "random" { Ok(None) } else { int(s).map(Some) }).flatten();
        let sampler = field(&mut errors, "sampler", get("sampler"), |s| s.parse::<Sampler>()).unwrap_or(Sampler::Cosine);
        let bins = field(&mut errors, "bins", get("bins"), int).unwrap_or(50);
        let center = field(&mut errors, "center", get("center"), |s| parse_list(s, ','));
        let velocity = field(&mut errors, "velocity", get("velocity"), |s| parse_list(s, ','));
        let spin = field(&mut errors, "spin", get("spin"), |s| parse_list(s, ','));
        let out = get("out").map(PathBuf::from);
        let svg = get("svg").map(PathBuf::from);

        let positive = |errors: &mut Vec<String>, key: &str, x: f64| {
            if !(x > 0.0 && x.is_finite()) {
                errors.push(format!("{key}: must be positive, got {x}"));
            }
        };
        positive(&mut errors, "R", radius);
        positive(&mut errors, "lambda", lambda);
        positive(&mut errors, "mass", mass);
        match table {
            TableKind::Box => {
                if sides.len() != n {
                    errors.push(format!("sides: {} values for n = {n}", sides.len()));
                }
                for s in &sides {
                    if !(*s > 2.0 * radius && s.is_finite()) {
                        errors.push(format!("sides: {s} leaves no room for a ball of radius {radius}"));
                    }
                }
            }
            TableKind::Wedge => {
                if !(r > 0.0 && r < FRAC_PI_2) {
                    errors.push(format!("r: wedge half-angle {r} outside (0, π/2)"));
                }
            }
            TableKind::Circle => {
                if !(r > radius && r.is_finite()) {
                    errors.push(format!("r: table radius {r} must exceed the ball radius {radius}"));
                }
            }
            TableKind::Strip | TableKind::Plates => {
                if !(r > 2.0 * radius && r.is_finite()) {
                    errors.push(format!("r: width {r} must exceed the ball diameter {}", 2.0 * radius));
                }
            }
        }
        if let Some(k) = k {
            if k > n - 1 {
                errors.push(format!("k: {k} out of range 0..={} for n = {n}", n - 1));
            }
        }
        let faces = match table {
            TableKind::Circle => 1,
            TableKind::Box => 2 * n,
            _ => 2,
        };
        rough.check(n, faces, &mut errors);
        if count == 0 {
            errors.push("count: must be positive".into());
        }
        if bins == 0 {
            errors.push("bins: must be positive".into());
        }
        for (key, v, len) in [("center", &center, n), ("velocity", &velocity, n), ("spin", &spin, n * (n - 1) / 2)] {
            if let Some(v) = v {
                if v.len() != len {
                    errors.push(format!("{key}: {} values, n = {n} needs {len}", v.len()));
                }
            }
        }
        if let Some(v) = &velocity {
            if v.iter().all(|x| *x == 0.0) {
                errors.push("velocity: must be nonzero".into());
            }
        }
        if !errors.is_empty() {
            return Err(ConfigErrors(errors));
        }
        Ok(RunConfig {
            n,
            table,
            r,
            sides,
            radius,
            lambda,
            mass,
            rough,
            steps,
            seed,
            count,
            trials,
            k,
            sampler,
            bins,
            center,
            velocity,
            spin,
            out,
            svg,
        })
    }

    /// Serializes every field; [`parse_config`] of the result gives back `self`.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        put("n", self.n.to_string());
        put("table", self.table.to_string());
        put("r", fmt_f64(self.r));
        put("sides", join(&self.sides, ","));
        put("R", fmt_f64(self.radius));
        put("lambda", fmt_f64(self.lambda));
        put("mass", fmt_f64(self.mass));
        put("rough", self.rough.to_string());
        put("steps", self.steps.to_string());
        put("seed", self.seed.to_string());
        put("count", self.count.to_string());
        put("trials", self.trials.to_string());
        put("k", self.k.map_or("random".to_string(), |k| k.to_string()));
        put("sampler", self.sampler.to_string());
        put("bins", self.bins.to_string());
        for (k, v) in [("center", &self.center), ("velocity", &self.velocity), ("spin", &self.spin)] {
            if let Some(v) = v {
                put(k, join(v, ","));
            }
        }
        for (k, v) in [("out", &self.out), ("svg", &self.svg)] {
            if let Some(p) = v {
                put(k, p.display().to_string());
            }
        }
        s
    }

    pub fn ball(&self) -> roughbill::Ball {
        roughbill::Ball { radius: self.radius, lambda: self.lambda, mass: self.mass }
    }

    pub fn build_table(&self) -> Table {
        match self.table {
            TableKind::Circle => Table::Circle { radius: self.r },
            TableKind::Wedge => Table::Wedge { half_angle: self.r },
            TableKind::Strip => Table::Strip { width: self.r },
            TableKind::Plates => Table::Plates { gap: self.r },
            TableKind::Box => Table::Box { sides: self.sides.clone() },
        }
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        self.rough.to_boundary_condition().expect("validated")
    }

    /// Initial center, center velocity and spin: given values, else a table-dependent default.
    pub fn initial_data(&self) -> (DVector<f64>, DVector<f64>, SkewMatrix) {
        let n = self.n;
        let e = |i: usize| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 });
        let trapped = roughbill::experiments::trapped_wedge_orbit().2;
        let default_center = match self.table {
            TableKind::Circle => e(0) * (0.3 * (self.r - self.radius)) + e(1) * (0.1 * (self.r - self.radius)),
            TableKind::Wedge => {
                let x = trapped.center()[0].max(self.radius / self.r.sin() + 1.0);
                e(0) * x
            }
            TableKind::Strip | TableKind::Plates => e(n - 1) * (self.r / 2.0),
            TableKind::Box => DVector::from_fn(n, |i, _| self.sides[i] / 2.0) + e(0) * (0.1 * (self.sides[0] / 2.0 - self.radius)),
        };
        let default_velocity = match self.table {
            TableKind::Wedge => trapped.center_velocity(),
            TableKind::Plates => DVector::from_vec(vec![0.4, 0.3, 1.0]),
            _ => DVector::from_fn(n, |i, _| [0.6, 0.8, 0.3, 0.2][i]),
        };
        let default_spin = match self.table {
            TableKind::Wedge => trapped.xi.angular.to_coords(),
            _ => {
                let mut c = vec![0.0; n * (n - 1) / 2];
                c[0] = 0.5;
                c
            }
        };
        let center = self.center.clone().map(DVector::from_vec).unwrap_or(default_center);
        let velocity = self.velocity.clone().map(DVector::from_vec).unwrap_or(default_velocity);
        let spin = SkewMatrix::from_coords(n, self.spin.as_deref().unwrap_or(&default_spin)).expect("validated length");
        (center, velocity, spin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rough_specs_round_trip() {
        for s in ["none", "full", "rank:1", "rank:2:0.5:1.5", "random:none@1,full@3", "hemisphere:0;1", "faces:full/none/rank:1"] {
            let parsed: RoughSpec = s.parse().unwrap();
            assert_eq!(parsed.to_string().parse::<RoughSpec>().unwrap(), parsed, "{s}");
        }
        assert!("rank".parse::<RoughSpec>().is_err());
        assert!("random:random:none@1@1".parse::<RoughSpec>().is_err());
        assert!("bogus".parse::<RoughSpec>().is_err());
    }

    #[test]
    fn random_weights_normalize() {
        let bc = "random:none@1,full@3".parse::<RoughSpec>().unwrap().to_boundary_condition().unwrap();
        assert_eq!(bc, BoundaryCondition::Random(vec![(Roughness::Smooth, 0.25), (Roughness::Full, 0.75)]));
    }
}
