//! Point clouds: CSV ingestion and the synthetic settings used throughout the
//! simulations.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::points::Points;

/// Interior/exterior side of a closed surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Interior,
    Exterior,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Interior => "interior",
            Side::Exterior => "exterior",
        }
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "interior" | "int" => Ok(Side::Interior),
            "exterior" | "ext" => Ok(Side::Exterior),
            other => Err(Error::invalid(format!("unknown side label {other:?}"))),
        }
    }
}

/// Observed points with optional per-point tags.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Points,
    pub slice: Option<Vec<i64>>,
    pub truth: Option<Vec<Option<Side>>>,
}

impl PointCloud {
    pub fn new(points: Points) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("a point cloud needs at least one point"));
        }
        Ok(Self {
            points,
            slice: None,
            truth: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// The last column is an integer slice id.
    pub slice_column: bool,
}

/// Reads a comma-separated file with one point per row. Blank lines and lines
/// starting with `#` are ignored.
pub fn load_point_cloud(path: impl AsRef<Path>, opts: LoadOptions) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)?;
    parse_point_cloud(&text, opts)
}

pub fn parse_point_cloud(text: &str, opts: LoadOptions) -> Result<PointCloud> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut data = Vec::new();
    let mut slices = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Format(format!(
                    "line {line} has {} fields, earlier rows have {w}",
                    record.len()
                )))
            }
            _ => {}
        }
        let ncoord = if opts.slice_column {
            record.len().checked_sub(1).filter(|&n| n > 0).ok_or_else(|| {
                Error::Format(format!("line {line}: slice column requested but row has one field"))
            })?
        } else {
            record.len()
        };
        for field in record.iter().take(ncoord) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite coordinate {field:?}"),
                });
            }
            data.push(v);
        }
        if opts.slice_column {
            let field = &record[ncoord];
            let id = field
                .parse::<i64>()
                .or_else(|_| {
                    field
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.fract() == 0.0 && v.abs() < 9e15)
                        .map(|v| v as i64)
                        .ok_or(())
                })
                .map_err(|_| Error::Parse {
                    line,
                    msg: format!("slice id is not an integer: {field:?}"),
                })?;
            slices.push(id);
        }
    }
    let Some(width) = width else {
        return Err(Error::Format("no data rows".into()));
    };
    let dim = if opts.slice_column { width - 1 } else { width };
    let mut cloud = PointCloud::new(Points::new(dim, data)?)?;
    if opts.slice_column {
        cloud.slice = Some(slices);
    }
    Ok(cloud)
}

/// The simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Setting {
    Fig3aLike,
    Fig3b,
    Fig3c,
    Fig3d,
    Fig4a,
    Fig4b,
    Fig4Surface,
    PunchedSphere,
    PunchedSphereNoiseless,
    GlueParabola2d,
    GlueParaboloid3d,
    CircleWithOutliers,
}

/// Number of outliers in [`Setting::CircleWithOutliers`].
pub const OUTLIERS: usize = 10;

impl Setting {
    pub const ALL: [Setting; 12] = [
        Setting::Fig3aLike,
        Setting::Fig3b,
        Setting::Fig3c,
        Setting::Fig3d,
        Setting::Fig4a,
        Setting::Fig4b,
        Setting::Fig4Surface,
        Setting::PunchedSphere,
        Setting::PunchedSphereNoiseless,
        Setting::GlueParabola2d,
        Setting::GlueParaboloid3d,
        Setting::CircleWithOutliers,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Setting::Fig3aLike => "fig3a-like",
            Setting::Fig3b => "fig3b",
            Setting::Fig3c => "fig3c",
            Setting::Fig3d => "fig3d",
            Setting::Fig4a => "fig4a",
            Setting::Fig4b => "fig4b",
            Setting::Fig4Surface => "fig4-surface",
            Setting::PunchedSphere => "punched-sphere",
            Setting::PunchedSphereNoiseless => "punched-sphere-noiseless",
            Setting::GlueParabola2d => "glue-parabola-2d",
            Setting::GlueParaboloid3d => "glue-paraboloid-3d",
            Setting::CircleWithOutliers => "circle-with-outliers",
        }
    }

    /// Intrinsic dimension of the latent manifold.
    pub fn intrinsic_dim(self) -> usize {
        match self {
            Setting::Fig4Surface
            | Setting::PunchedSphere
            | Setting::PunchedSphereNoiseless
            | Setting::GlueParaboloid3d => 2,
            _ => 1,
        }
    }

    pub fn ambient_dim(self) -> usize {
        match self {
            Setting::Fig3aLike
            | Setting::Fig3b
            | Setting::Fig3c
            | Setting::Fig3d
            | Setting::GlueParabola2d
            | Setting::CircleWithOutliers => 2,
            _ => 3,
        }
    }

    /// Per-coordinate noise standard deviation.
    pub fn noise_sd(self) -> f64 {
        match self {
            Setting::Fig3aLike => 0.075,
            Setting::Fig3b => 0.2,
            Setting::Fig3c | Setting::Fig4a => 0.1,
            Setting::Fig3d => 0.15,
            Setting::Fig4b
            | Setting::Fig4Surface
            | Setting::PunchedSphere
            | Setting::CircleWithOutliers => 0.05,
            Setting::PunchedSphereNoiseless => 0.0,
            Setting::GlueParabola2d => 1.0,
            Setting::GlueParaboloid3d => 0.2,
        }
    }

    /// Draws the latent parameter `τ` (length `d`).
    fn draw_tau(self, rng: &mut ChaCha8Rng, tau: &mut [f64]) {
        match self {
            Setting::Fig3aLike => tau[0] = rng.random_range(0.0..PI / 2.0),
            Setting::Fig3b => tau[0] = rng.random_range(-3.0 * PI..3.0 * PI),
            Setting::Fig3c | Setting::CircleWithOutliers => tau[0] = rng.random_range(0.0..1.5 * PI),
            Setting::Fig3d => tau[0] = StandardNormal.sample(rng),
            Setting::Fig4a => tau[0] = rng.random_range(-1.0..1.0),
            Setting::Fig4b => tau[0] = rng.random_range(PI / 2.0..6.0 * PI),
            Setting::Fig4Surface => {
                tau[0] = rng.random_range(-1.0..1.0);
                tau[1] = rng.random_range(-1.0..1.0);
            }
            Setting::PunchedSphere | Setting::PunchedSphereNoiseless => {
                tau[0] = rng.random_range(PI / 4.0..3.0 * PI / 4.0);
                tau[1] = rng.random_range(0.0..2.0 * PI);
            }
            Setting::GlueParabola2d => tau[0] = rng.random_range(1.0..4.0),
            Setting::GlueParaboloid3d => {
                tau[0] = rng.random_range(2.0..4.0);
                tau[1] = rng.random_range(2.0..6.0);
            }
        }
    }

    /// The latent manifold point `T(τ)`.
    pub fn latent_point(self, tau: &[f64], out: &mut [f64]) {
        let t = tau[0];
        match self {
            Setting::Fig3aLike => {
                let r = 1.0 + 0.2 * (3.0 * t).cos();
                out[0] = r * t.cos();
                out[1] = r * t.sin();
            }
            Setting::Fig3b => {
                out[0] = t;
                out[1] = t.sin();
            }
            Setting::Fig3c | Setting::CircleWithOutliers => {
                out[0] = t.cos();
                out[1] = t.sin();
            }
            Setting::Fig3d => {
                out[0] = t;
                out[1] = t.cos();
            }
            Setting::Fig4a => {
                out[0] = t;
                out[1] = t * t;
                out[2] = t * t * t;
            }
            Setting::Fig4b => {
                out[0] = t;
                out[1] = t.cos();
                out[2] = t.sin();
            }
            Setting::Fig4Surface => {
                let (a, b) = (tau[0], tau[1]);
                let q = a * a + b * b;
                let r3 = 3f64.sqrt();
                out[0] = a;
                out[1] = 0.5 * (b + r3 * q);
                out[2] = 0.5 * (q - r3);
            }
            Setting::PunchedSphere | Setting::PunchedSphereNoiseless => {
                let (a, b) = (tau[0], tau[1]);
                out[0] = a.sin() * b.cos();
                out[1] = a.sin() * b.sin();
                out[2] = a.cos();
            }
            Setting::GlueParabola2d => {
                out[0] = t;
                out[1] = t * t;
            }
            Setting::GlueParaboloid3d => {
                let (a, b) = (tau[0], tau[1]);
                out[0] = a;
                out[1] = b;
                out[2] = a * a + b * b;
            }
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Setting::ALL.iter().map(|g| g.name()).collect();
                Error::invalid(format!("unknown setting {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub setting: Setting,
    pub n: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(setting: Setting, n: usize, seed: u64) -> Self {
        Self { setting, n, seed }
    }
}

/// Latent parameters and noiseless positions behind a generated cloud.
/// Outliers have `NaN` parameters and the origin as their latent point.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    pub d: usize,
    /// Row-major `n × d`.
    pub tau: Vec<f64>,
    /// Row-major `n × D`.
    pub clean: Vec<f64>,
}

const CHUNK: usize = 1024;

pub fn generate(spec: GeneratorSpec) -> Result<PointCloud> {
    generate_with_latent(spec).map(|(cloud, _)| cloud)
}

/// Generation with the latent draws exposed, for checking the samplers.
#[doc(hidden)]
pub fn generate_with_latent(spec: GeneratorSpec) -> Result<(PointCloud, Latent)> {
    let setting = spec.setting;
    let n = spec.n;
    let outliers = if setting == Setting::CircleWithOutliers {
        OUTLIERS
    } else {
        0
    };
    if n <= outliers {
        return Err(Error::invalid(format!(
            "{setting} needs more than {outliers} points, got {n}"
        )));
    }
    let (d, dim) = (setting.intrinsic_dim(), setting.ambient_dim());
    let sd = setting.noise_sd();
    let noise = Normal::new(0.0, sd.max(f64::MIN_POSITIVE)).expect("valid sd");
    let on_manifold = n - outliers;
    let chunks: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            // one counter-based stream per chunk keeps the output independent
            // of how chunks are scheduled
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(c as u64);
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut pts = Vec::with_capacity((hi - lo) * dim);
            let mut taus = Vec::with_capacity((hi - lo) * d);
            let mut clean = Vec::with_capacity((hi - lo) * dim);
            let mut tau = vec![0.0; d];
            let mut p = vec![0.0; dim];
            for i in lo..hi {
                if i < on_manifold {
                    setting.draw_tau(&mut rng, &mut tau);
                    setting.latent_point(&tau, &mut p);
                    taus.extend_from_slice(&tau);
                } else {
                    p.iter_mut().for_each(|v| *v = 0.0);
                    taus.extend(std::iter::repeat_n(f64::NAN, d));
                }
                clean.extend_from_slice(&p);
                for v in &p {
                    let e = if sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    pts.push(v + e);
                }
            }
            (pts, taus, clean)
        })
        .collect();
    let mut data = Vec::with_capacity(n * dim);
    let mut tau = Vec::with_capacity(n * d);
    let mut clean = Vec::with_capacity(n * dim);
    for (p, t, c) in chunks {
        data.extend(p);
        tau.extend(t);
        clean.extend(c);
    }
    let cloud = PointCloud::new(Points::new(dim, data)?)?;
    Ok((cloud, Latent { d, tau, clean }))
}

/// True labels for the unit sphere centered at the origin.
pub fn sphere_truth(grid: &Points) -> Vec<Side> {
    grid.rows()
        .map(|r| {
            if r.iter().map(|v| v * v).sum::<f64>() < 1.0 {
                Side::Interior
            } else {
                Side::Exterior
            }
        })
        .collect()
}
