//! JSON scenario files: strict schema, validation with field paths, and the
//! normalized provenance block that every output carries.
//!
//! Loading resolves every default and `"auto"` value. The resolved file
//! ([`Scenario::provenance`]) loads back to an equal scenario.

use crate::dynamics::{validate_stability, DynamicalSystem, GaussianComponent, LinearDs, LpvDs};
use crate::geometry::Obstacle;
use crate::modulation::BlendRule;
use crate::sim::{IntegrationSettings, MotionScript, Target, Waypoint};
use crate::strategy::{AttractorGate, PairSelection, Scene, StrategyConfig, Theta2Policy, DEFAULT_SPEED_CHANGE_CAP};
use crate::{Error, Matrix, Result, Vector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Sample count per axis when estimating the DS speed range for `c = "auto"`.
pub const AUTO_C_SAMPLES: usize = 41;
/// Fraction of the sampled maximum DS speed used for `c = "auto"`.
pub const AUTO_C_FRACTION: f64 = 0.05;
/// Soft-term gate radius around the attractor, in multiples of `eps_conv`.
pub const ATTRACTOR_GATE_FACTOR: f64 = 10.0;

/// The literal string `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Auto;

impl Serialize for Auto {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str("auto")
    }
}

impl<'de> Deserialize<'de> for Auto {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "auto" {
            Ok(Auto)
        } else {
            Err(serde::de::Error::custom(format!("expected a number or \"auto\", got {s:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CSpec {
    Value(f64),
    Auto(Auto),
}

impl Default for CSpec {
    fn default() -> Self {
        CSpec::Auto(Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetadataSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub notes: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DsKind {
    Linear,
    Lpv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub prior: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// DS parameter record; matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsSpec {
    pub kind: DsKind,
    pub attractor: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<ComponentSpec>>,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<f64>>>,
    /// Replace each `b_k` by `-A_k ξ*` before validation.
    #[serde(default, skip_serializing_if = "is_false")]
    pub reproject_offsets: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsFileRef {
    pub file: String,
}

/// Inline DS record or a reference to a DS file (relative to the scenario).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum DsSource {
    Inline(DsSpec),
    File(DsFileRef),
}

impl<'de> Deserialize<'de> for DsSource {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = serde_json::Value::deserialize(d)?;
        let is_ref = v.as_object().is_some_and(|o| o.contains_key("file"));
        if is_ref {
            DsFileRef::deserialize(v).map(DsSource::File).map_err(D::Error::custom)
        } else {
            DsSpec::deserialize(v).map(DsSource::Inline).map_err(D::Error::custom)
        }
    }
}

fn default_exponent() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub center: Vec<f64>,
    pub hard_semi_axes: Vec<f64>,
    pub soft_ratio: f64,
    #[serde(default)]
    pub orientation_rad: f64,
    #[serde(default = "default_exponent")]
    pub exponent: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safety_factor: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear_velocity: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular_velocity: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    #[serde(default)]
    pub c: CSpec,
    #[serde(default)]
    pub theta2_policy: Theta2Policy,
    #[serde(default)]
    pub intersection_pairs: PairSelection,
    #[serde(default = "one")]
    pub sgn_zero_value: f64,
    #[serde(default)]
    pub blend: BlendRule,
    #[serde(default = "yes")]
    pub soft_speedup: bool,
    #[serde(default = "yes")]
    pub intersection_slowdown: bool,
    /// `null` disables the cap.
    #[serde(default = "default_cap")]
    pub speed_change_cap: Option<f64>,
}

fn default_cap() -> Option<f64> {
    Some(DEFAULT_SPEED_CHANGE_CAP)
}

impl Default for StrategySpec {
    fn default() -> Self {
        StrategySpec {
            c: CSpec::default(),
            theta2_policy: Theta2Policy::default(),
            intersection_pairs: PairSelection::Auto,
            sgn_zero_value: 1.0,
            blend: BlendRule::default(),
            soft_speedup: true,
            intersection_slowdown: true,
            speed_change_cap: default_cap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

fn default_dt() -> f64 {
    IntegrationSettings::default().dt
}

fn default_max_steps() -> usize {
    IntegrationSettings::default().max_steps
}

fn default_eps() -> f64 {
    IntegrationSettings::default().eps_conv
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSpec {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_eps")]
    pub eps_conv: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
}

impl Default for IntegrationSpec {
    fn default() -> Self {
        IntegrationSpec {
            dt: default_dt(),
            max_steps: default_max_steps(),
            eps_conv: default_eps(),
            target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartsSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointSpec {
    pub t: f64,
    pub center: Vec<f64>,
    #[serde(default)]
    pub orientation_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionScriptSpec {
    pub obstacle: usize,
    pub waypoints: Vec<WaypointSpec>,
}

/// On-disk scenario layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub metadata: MetadataSpec,
    pub ds: DsSource,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub strategy: StrategySpec,
    #[serde(default)]
    pub integration: IntegrationSpec,
    #[serde(default)]
    pub starts: StartsSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub motion_scripts: Vec<MotionScriptSpec>,
}

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub metadata: MetadataSpec,
    pub scene: Scene,
    pub settings: IntegrationSettings,
    pub starts: Vec<Vector>,
    pub scripts: Vec<MotionScript>,
    /// Normalized file: DS inlined, defaults and `"auto"` values resolved.
    pub provenance: ScenarioFile,
}

fn parse_json<T: DeserializeOwned>(text: &str, prefix: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix.is_empty(), inner == ".") {
            (true, _) => inner,
            (false, true) => prefix.to_string(),
            (false, false) => format!("{prefix}.{inner}"),
        };
        Error::scenario(path, e.into_inner().to_string())
    })
}

fn read(path: &Path, field: &str) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::scenario(field, format!("cannot read {}: {e}", path.display())))
}

/// Loads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let (raw, base) = load_raw(path)?;
    Scenario::resolve(raw, &base)
}

/// Parses and resolves scenario JSON held in memory; DS file references are not allowed.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let raw: ScenarioFile = parse_json(text, "")?;
    if matches!(raw.ds, DsSource::File(_)) {
        return Err(Error::scenario("ds.file", "file references need a scenario path"));
    }
    Scenario::resolve(raw, Path::new(""))
}

/// Parses a scenario file without resolving it; returns the file and its directory.
pub fn load_raw(path: impl AsRef<Path>) -> Result<(ScenarioFile, PathBuf)> {
    let path = path.as_ref();
    let text = read(path, "scenario")?;
    let raw = parse_json(&text, "")?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((raw, base))
}

/// Loads a standalone DS parameter file.
pub fn load_ds_spec(path: impl AsRef<Path>) -> Result<DsSpec> {
    let text = read(path.as_ref(), "ds")?;
    parse_json(&text, "")
}

fn vec_at(values: &[f64], path: &str, dim: Option<usize>) -> Result<Vector> {
    if let Some(d) = dim {
        if values.len() != d {
            return Err(Error::scenario(path, format!("expected {d} entries, got {}", values.len())));
        }
    }
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::scenario(path, "entries must be finite and non-empty"));
    }
    Ok(crate::vector(values))
}

fn matrix_at(rows: &[Vec<f64>], path: &str, d: usize) -> Result<Matrix> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::scenario(path, format!("expected a {d}x{d} row-major matrix")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::scenario(path, "entries must be finite"));
    }
    Ok(Matrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn prefixed(prefix: &str, e: Error) -> Error {
    match e {
        Error::Scenario { path, message } => Error::scenario(format!("{prefix}.{path}"), message),
        other => Error::scenario(prefix, other.to_string()),
    }
}

/// Builds a DS from its record; errors carry paths under `prefix`.
pub fn build_ds(spec: &DsSpec, prefix: &str) -> Result<DynamicalSystem> {
    let attractor = vec_at(&spec.attractor, &format!("{prefix}.attractor"), None)?;
    let d = attractor.len();
    match spec.kind {
        DsKind::Linear => {
            let rows = spec
                .gain_matrix
                .as_ref()
                .ok_or_else(|| Error::scenario(format!("{prefix}.gain_matrix"), "required for kind \"linear\""))?;
            if spec.components.is_some() || spec.p.is_some() {
                return Err(Error::scenario(
                    format!("{prefix}.components"),
                    "components and P are only valid for kind \"lpv\"",
                ));
            }
            let a = matrix_at(rows, &format!("{prefix}.gain_matrix"), d)?;
            LinearDs::new(a, attractor)
                .map(DynamicalSystem::Linear)
                .map_err(|e| prefixed(prefix, e))
        }
        DsKind::Lpv => {
            let comps = spec
                .components
                .as_ref()
                .ok_or_else(|| Error::scenario(format!("{prefix}.components"), "required for kind \"lpv\""))?;
            let p_rows = spec
                .p
                .as_ref()
                .ok_or_else(|| Error::scenario(format!("{prefix}.P"), "required for kind \"lpv\""))?;
            if spec.gain_matrix.is_some() {
                return Err(Error::scenario(
                    format!("{prefix}.gain_matrix"),
                    "only valid for kind \"linear\"",
                ));
            }
            let mut components = Vec::with_capacity(comps.len());
            for (k, c) in comps.iter().enumerate() {
                let at = format!("{prefix}.components[{k}]");
                let comp = GaussianComponent::new(
                    c.prior,
                    vec_at(&c.mean, &format!("{at}.mean"), Some(d))?,
                    matrix_at(&c.covariance, &format!("{at}.covariance"), d)?,
                    matrix_at(&c.a, &format!("{at}.A"), d)?,
                    vec_at(&c.b, &format!("{at}.b"), Some(d))?,
                )
                .map_err(|e| prefixed(&at, e))?;
                components.push(comp);
            }
            let p = matrix_at(p_rows, &format!("{prefix}.P"), d)?;
            let mut lpv = LpvDs::new(components, p, attractor).map_err(|e| prefixed(prefix, e))?;
            if spec.reproject_offsets {
                lpv.reproject_offsets();
            }
            Ok(DynamicalSystem::Lpv(lpv))
        }
    }
}

fn build_obstacle(spec: &ObstacleSpec, i: usize, d: usize) -> Result<Obstacle> {
    let at = format!("obstacles[{i}]");
    let center = vec_at(&spec.center, &format!("{at}.center"), Some(d))?;
    let axes = vec_at(&spec.hard_semi_axes, &format!("{at}.hard_semi_axes"), Some(d))?;
    let opt = |v: &Option<Vec<f64>>, name: &str| -> Result<Option<Vector>> {
        v.as_ref()
            .map(|v| vec_at(v, &format!("{at}.{name}"), Some(d)))
            .transpose()
    };
    let obs = Obstacle {
        safety_factor: opt(&spec.safety_factor, "safety_factor")?.unwrap_or_else(|| Vector::from_element(d, 1.0)),
        linear_velocity: opt(&spec.linear_velocity, "linear_velocity")?.unwrap_or_else(|| Vector::zeros(d)),
        reference_point: opt(&spec.reference_point, "reference_point")?,
        center,
        hard_semi_axes: axes,
        soft_ratio: spec.soft_ratio,
        orientation: spec.orientation_rad,
        exponent: spec.exponent,
        angular_velocity: spec.angular_velocity.unwrap_or(0.0),
    };
    obs.validate().map_err(|e| prefixed(&at, e))?;
    Ok(obs)
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    })
}

/// Row-major grid points (x varies fastest).
pub fn grid_points(min: &[f64; 2], max: &[f64; 2], counts: [usize; 2]) -> Vec<Vector> {
    let xs: Vec<f64> = linspace(min[0], max[0], counts[0]).collect();
    linspace(min[1], max[1], counts[1])
        .flat_map(|y| xs.iter().map(move |&x| crate::vector(&[x, y])))
        .collect()
}

fn grid_from_spec(g: &GridSpec) -> Result<Vec<Vector>> {
    if g.min.len() != 2 || g.max.len() != 2 || g.counts.len() != 2 {
        return Err(Error::scenario("starts.grid", "min, max and counts must have 2 entries"));
    }
    if g.counts.iter().any(|&c| c == 0) {
        return Err(Error::scenario("starts.grid.counts", "counts must be >= 1"));
    }
    if g.min.iter().chain(&g.max).any(|v| !v.is_finite()) || g.min[0] > g.max[0] || g.min[1] > g.max[1] {
        return Err(Error::scenario("starts.grid", "min must not exceed max"));
    }
    Ok(grid_points(&[g.min[0], g.min[1]], &[g.max[0], g.max[1]], [g.counts[0], g.counts[1]]))
}

/// Axis-aligned box holding the starts, attractor, target, and every soft shell.
pub fn scenario_box(
    starts: &[Vector],
    attractor: &Vector,
    target: Option<&Target>,
    obstacles: &[Obstacle],
) -> ([f64; 2], [f64; 2]) {
    let mut lo = [attractor[0], attractor[1]];
    let mut hi = lo;
    let mut grow = |x: f64, y: f64| {
        lo = [lo[0].min(x), lo[1].min(y)];
        hi = [hi[0].max(x), hi[1].max(y)];
    };
    for s in starts {
        grow(s[0], s[1]);
    }
    if let Some(t) = target {
        grow(t.center[0] - t.radius, t.center[1] - t.radius);
        grow(t.center[0] + t.radius, t.center[1] + t.radius);
    }
    for o in obstacles {
        let reach = o.soft_ratio * o.hard_semi_axes.iter().zip(o.safety_factor.iter()).map(|(a, e)| a * e.max(1.0)).fold(0.0, f64::max);
        grow(o.center[0] - reach, o.center[1] - reach);
        grow(o.center[0] + reach, o.center[1] + reach);
    }
    for k in 0..2 {
        if hi[k] - lo[k] < 1e-9 {
            lo[k] -= 1.0;
            hi[k] += 1.0;
        }
    }
    (lo, hi)
}

/// `AUTO_C_FRACTION` of the largest DS speed on an `AUTO_C_SAMPLES²` grid over the box.
pub fn auto_c(ds: &DynamicalSystem, lo: &[f64; 2], hi: &[f64; 2]) -> Result<f64> {
    let mut max_speed: f64 = 0.0;
    for x in grid_points(lo, hi, [AUTO_C_SAMPLES, AUTO_C_SAMPLES]) {
        max_speed = max_speed.max(ds.eval(&x)?.norm());
    }
    Ok(AUTO_C_FRACTION * max_speed)
}

impl Scenario {
    /// Validates a parsed file and resolves defaults; `base` anchors relative DS paths.
    pub fn resolve(raw: ScenarioFile, base: &Path) -> Result<Scenario> {
        let ds_spec = match &raw.ds {
            DsSource::Inline(spec) => spec.clone(),
            DsSource::File(r) => {
                let path = base.join(&r.file);
                let text = read(&path, "ds.file")?;
                parse_json(&text, "ds")?
            }
        };
        let ds = build_ds(&ds_spec, "ds")?;
        let report = validate_stability(&ds);
        if !report.pass {
            return Err(Error::scenario("ds", format!("stability check failed: {report}")));
        }
        let d = ds.dim();
        if d != 2 {
            return Err(Error::scenario("ds.attractor", format!("scenarios are planar; got dimension {d}")));
        }

        let obstacles = raw
            .obstacles
            .iter()
            .enumerate()
            .map(|(i, o)| build_obstacle(o, i, d))
            .collect::<Result<Vec<_>>>()?;

        let ispec = &raw.integration;
        let target = ispec
            .target
            .as_ref()
            .map(|t| {
                Ok::<_, Error>(Target {
                    center: vec_at(&t.center, "integration.target.center", Some(d))?,
                    radius: t.radius,
                })
            })
            .transpose()?;
        let settings = IntegrationSettings {
            dt: ispec.dt,
            max_steps: ispec.max_steps,
            eps_conv: ispec.eps_conv,
            target,
        };
        settings.validate()?;

        let mut starts = Vec::new();
        for (i, p) in raw.starts.points.iter().enumerate() {
            starts.push(vec_at(p, &format!("starts.points[{i}]"), Some(d))?);
        }
        if let Some(g) = &raw.starts.grid {
            starts.extend(grid_from_spec(g)?);
        }

        let mut scripts = Vec::with_capacity(raw.motion_scripts.len());
        for (j, m) in raw.motion_scripts.iter().enumerate() {
            let at = format!("motion_scripts[{j}]");
            if m.obstacle >= obstacles.len() {
                return Err(Error::scenario(
                    format!("{at}.obstacle"),
                    format!("index {} out of range for {} obstacles", m.obstacle, obstacles.len()),
                ));
            }
            if scripts.iter().any(|s: &MotionScript| s.obstacle == m.obstacle) {
                return Err(Error::scenario(format!("{at}.obstacle"), "obstacle already has a script"));
            }
            let waypoints = m
                .waypoints
                .iter()
                .map(|w| Waypoint {
                    t: w.t,
                    center: crate::vector(&w.center),
                    orientation: w.orientation_rad,
                })
                .collect::<Vec<_>>();
            for (i, w) in waypoints.iter().enumerate() {
                if w.center.len() != d {
                    return Err(Error::scenario(
                        format!("{at}.waypoints[{i}].center"),
                        format!("expected {d} entries, got {}", w.center.len()),
                    ));
                }
            }
            scripts.push(MotionScript::new(m.obstacle, waypoints).map_err(|e| prefixed(&at, e))?);
        }

        let sspec = &raw.strategy;
        let c = match sspec.c {
            CSpec::Value(c) => c,
            CSpec::Auto(_) => {
                let (lo, hi) = scenario_box(&starts, ds.attractor(), settings.target.as_ref(), &obstacles);
                auto_c(&ds, &lo, &hi)?
            }
        };
        let strategy = StrategyConfig {
            c,
            theta2_policy: sspec.theta2_policy,
            sgn_zero_value: sspec.sgn_zero_value,
            intersection_pairs: sspec.intersection_pairs.clone(),
            blend: sspec.blend,
            soft_speedup: sspec.soft_speedup,
            intersection_slowdown: sspec.intersection_slowdown,
            speed_change_cap: sspec.speed_change_cap,
            attractor_gate: Some(AttractorGate {
                center: ds.attractor().clone(),
                radius: ATTRACTOR_GATE_FACTOR * settings.eps_conv,
            }),
        };
        let scene = Scene::new(ds, obstacles, strategy)?;

        let mut provenance = raw.clone();
        provenance.ds = DsSource::Inline(ds_spec);
        provenance.strategy.c = CSpec::Value(scene.strategy.c);
        provenance.strategy.intersection_pairs = PairSelection::Explicit(scene.pairs.clone());
        for o in &mut provenance.obstacles {
            let d = o.center.len();
            o.reference_point.get_or_insert_with(|| o.center.clone());
            o.safety_factor.get_or_insert_with(|| vec![1.0; d]);
            o.linear_velocity.get_or_insert_with(|| vec![0.0; d]);
            o.angular_velocity.get_or_insert(0.0);
        }
        // An explicit center reference point is the same obstacle as an absent one.
        let mut scene = scene;
        for o in &mut scene.obstacles {
            if o.reference_point.as_ref() == Some(&o.center) {
                o.reference_point = None;
            }
        }

        Ok(Scenario {
            metadata: raw.metadata,
            scene,
            settings,
            starts,
            scripts,
            provenance,
        })
    }

    pub fn provenance_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.provenance).expect("scenario file serializes")
    }

    /// Hex SHA-256 of the compact provenance JSON.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.provenance).expect("scenario file serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Defaults the loader filled in, for output headers.
    pub fn resolved_defaults(&self) -> serde_json::Value {
        let s = &self.scene.strategy;
        serde_json::json!({
            "c": s.c,
            "theta2_policy": s.theta2_policy,
            "sgn_zero_value": s.sgn_zero_value,
            "blend": s.blend,
            "speed_change_cap": s.speed_change_cap,
            "intersection_pairs": self.scene.pairs,
            "attractor_gate_radius": s.attractor_gate.as_ref().map(|g| g.radius),
            "dt": self.settings.dt,
            "max_steps": self.settings.max_steps,
            "eps_conv": self.settings.eps_conv,
        })
    }
}
