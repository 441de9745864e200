use std::path::{Path, PathBuf};

use lipsmooth::{FunctionOracle, ManifoldModel, Point, Region, Tolerance};
use serde::Deserialize;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub manifold: ManifoldSpec,
    #[serde(default)]
    pub region: RegionSpec,
    pub function: Option<FunctionSpec>,
    pub tolerance: Option<ToleranceSpec>,
    #[serde(default)]
    pub run: RunSpec,
    pub bump: Option<BumpSpec>,
    pub dgz: Option<DgzSpec>,
    pub bench: Option<BenchSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldSpec {
    Euclidean { lo: Vec<f64>, hi: Vec<f64> },
    Sphere { dim: usize, #[serde(default = "one")] radius: f64 },
    FlatTorus { periods: Vec<f64> },
    PoincareDisk { dim: usize, #[serde(default = "one")] scale: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    #[default]
    Whole,
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant { value: f64 },
    DistanceToPoint { point: Vec<f64>, lipschitz: Option<f64> },
    DistanceToSet { points: Vec<Vec<f64>>, lipschitz: Option<f64> },
    Ramp { center: Vec<f64>, offset: f64, slope: f64, lo: f64, hi: f64, lipschitz: Option<f64> },
    PiecewiseLinear { center: Vec<f64>, knots: Vec<[f64; 2]>, lipschitz: Option<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ToleranceSpec {
    Constant { eps: f64 },
    Radial { center: Vec<f64>, near: f64, far: f64, radius: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub r: Option<f64>,
    pub resolution: Option<u32>,
    #[serde(default)]
    pub seed: u64,
    pub cover_samples: Option<usize>,
    pub max_radius: Option<f64>,
    pub coverage_margin: Option<f64>,
    #[serde(default)]
    pub value_oscillation: bool,
    pub verification_samples: Option<usize>,
    pub local_pairs: Option<usize>,
    pub global_pairs: Option<usize>,
    #[serde(default = "visual_default")]
    pub visual_samples: usize,
    pub out: Option<PathBuf>,
}

fn visual_default() -> usize {
    2000
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            r: None,
            resolution: None,
            seed: 0,
            cover_samples: None,
            max_radius: None,
            coverage_margin: None,
            value_oscillation: false,
            verification_samples: None,
            local_pairs: None,
            global_pairs: None,
            visual_samples: visual_default(),
            out: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: Vec<f64>,
    pub delta: f64,
    #[serde(default = "r_default")]
    pub radius_constant: f64,
    #[serde(default = "bump_eps_default")]
    pub eps: f64,
    #[serde(default = "bump_samples_default")]
    pub samples: usize,
}

fn r_default() -> f64 {
    1.2
}

fn bump_eps_default() -> f64 {
    0.25
}

fn bump_samples_default() -> usize {
    4000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgzSpec {
    pub delta: f64,
    pub eta: Option<f64>,
    pub max_iter: Option<usize>,
    pub radius0: Option<f64>,
    pub radius_constant: Option<f64>,
    #[serde(default = "dgz_samples_default")]
    pub samples: usize,
}

fn dgz_samples_default() -> usize {
    801
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    #[serde(default = "bench_nodes_default")]
    pub nodes: usize,
    #[serde(default = "bench_dim_default")]
    pub dim: usize,
    #[serde(default = "bench_reps_default")]
    pub reps: usize,
    #[serde(default = "bench_brute_default")]
    pub bruteforce_nodes: usize,
}

fn bench_nodes_default() -> usize {
    1 << 20
}
fn bench_dim_default() -> usize {
    1
}
fn bench_reps_default() -> usize {
    5
}
fn bench_brute_default() -> usize {
    1 << 14
}

fn point(v: &[f64]) -> Result<Point, ConfigError> {
    if v.is_empty() || v.len() > lipsmooth::manifold::MAX_AMBIENT {
        return Err(ConfigError(format!("point {v:?} has an unsupported length")));
    }
    Ok(Point::new(v))
}

fn err<E: std::fmt::Display>(e: E) -> ConfigError {
    ConfigError(e.to_string())
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;
        cfg.model()?;
        cfg.region()?;
        if let Some(r) = cfg.run.r {
            if !(r > 0.0) {
                return Err(ConfigError(format!("run.r must be positive, got {r}")));
            }
        }
        Ok(cfg)
    }

    pub fn model(&self) -> Result<ManifoldModel, ConfigError> {
        match &self.manifold {
            ManifoldSpec::Euclidean { lo, hi } => ManifoldModel::euclidean(lo.clone(), hi.clone()),
            ManifoldSpec::Sphere { dim, radius } => ManifoldModel::sphere(*dim, *radius),
            ManifoldSpec::FlatTorus { periods } => ManifoldModel::flat_torus(periods.clone()),
            ManifoldSpec::PoincareDisk { dim, scale } => ManifoldModel::poincare_disk(*dim, *scale),
        }
        .map_err(err)
    }

    pub fn region(&self) -> Result<Region, ConfigError> {
        let region = match &self.region {
            RegionSpec::Whole => Region::Whole,
            RegionSpec::Ball { center, radius } => Region::Ball { center: point(center)?, radius: *radius },
            RegionSpec::Box { lo, hi } => Region::Box { lo: lo.clone(), hi: hi.clone() },
        };
        region.validate(&self.model()?).map_err(err)?;
        Ok(region)
    }

    pub fn function(&self) -> Result<FunctionOracle, ConfigError> {
        let spec = self.function.as_ref().ok_or_else(|| ConfigError("missing [function] block".into()))?;
        let (f, k) = match spec {
            FunctionSpec::Constant { value } => (FunctionOracle::constant(*value), None),
            FunctionSpec::DistanceToPoint { point: p, lipschitz } => (FunctionOracle::distance_to_point(point(p)?), *lipschitz),
            FunctionSpec::DistanceToSet { points, lipschitz } => {
                let pts = points.iter().map(|p| point(p)).collect::<Result<Vec<_>, _>>()?;
                (FunctionOracle::distance_to_set(pts).map_err(err)?, *lipschitz)
            }
            FunctionSpec::Ramp { center, offset, slope, lo, hi, lipschitz } => {
                (FunctionOracle::ramp(point(center)?, *offset, *slope, *lo, *hi).map_err(err)?, *lipschitz)
            }
            FunctionSpec::PiecewiseLinear { center, knots, lipschitz } => {
                let knots = knots.iter().map(|k| (k[0], k[1])).collect();
                (FunctionOracle::piecewise_linear(point(center)?, knots).map_err(err)?, *lipschitz)
            }
        };
        let f = match k {
            Some(k) if !(k >= 0.0) => return Err(ConfigError(format!("declared Lipschitz constant must be >= 0, got {k}"))),
            Some(k) => f.with_lipschitz(k),
            None => f,
        };
        f.validate(&self.model()?).map_err(err)?;
        Ok(f)
    }

    pub fn tolerance(&self) -> Result<Tolerance, ConfigError> {
        let spec = self.tolerance.as_ref().ok_or_else(|| ConfigError("missing [tolerance] block".into()))?;
        let t = match spec {
            ToleranceSpec::Constant { eps } => Tolerance::Constant(*eps),
            ToleranceSpec::Radial { center, near, far, radius } => {
                Tolerance::Radial { center: point(center)?, near: *near, far: *far, radius: *radius }
            }
        };
        t.validate(&self.model()?).map_err(err)?;
        Ok(t)
    }

    pub fn slack(&self) -> Result<f64, ConfigError> {
        self.run.r.ok_or_else(|| ConfigError("missing run.r".into()))
    }
}
