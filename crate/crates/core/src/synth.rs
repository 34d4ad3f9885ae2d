//! Synthetic two-class scenes. Positive points carry label 1, negative
//! points label 2.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};

pub const POSITIVE: u32 = 1;
pub const NEGATIVE: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    BoxOnPlane,
    TwoPlanes,
    TwoCylinders,
}

impl SceneKind {
    pub const ALL: [SceneKind; 3] = [SceneKind::BoxOnPlane, SceneKind::TwoPlanes, SceneKind::TwoCylinders];

    pub fn name(&self) -> &'static str {
        match self {
            SceneKind::BoxOnPlane => "box_on_plane",
            SceneKind::TwoPlanes => "two_planes",
            SceneKind::TwoCylinders => "two_cylinders",
        }
    }
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SceneKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown synthetic scene {s:?}")))
    }
}

/// Scene dimensions in meters. Grid densities are points per side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub box_side: f64,
    pub box_grid: usize,
    pub plane_side: f64,
    pub plane_grid: usize,
    pub clearance: f64,
    pub planes_side: f64,
    pub planes_grid: usize,
    pub separation: f64,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub height: f64,
    pub cylinder_points: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            box_side: 2.0,
            box_grid: 21,
            plane_side: 10.0,
            plane_grid: 61,
            clearance: 0.5,
            planes_side: 4.0,
            planes_grid: 61,
            separation: 1.0,
            inner_radius: 1.0,
            outer_radius: 2.0,
            height: 4.0,
            cylinder_points: 4000,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("box side", self.box_side),
            ("plane side", self.plane_side),
            ("planes side", self.planes_side),
            ("separation", self.separation),
            ("inner radius", self.inner_radius),
            ("height", self.height),
        ];
        for (name, v) in lengths {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.clearance >= 0.0 && self.clearance.is_finite()) {
            return Err(Error::Domain(format!("clearance must be non-negative, got {}", self.clearance)));
        }
        if !(self.outer_radius > self.inner_radius && self.outer_radius.is_finite()) {
            return Err(Error::Domain("outer radius must exceed the inner radius".into()));
        }
        if self.box_grid < 2 || self.plane_grid < 2 || self.planes_grid < 2 || self.cylinder_points == 0 {
            return Err(Error::Domain("grid densities must be at least 2 and point counts positive".into()));
        }
        Ok(())
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> + Clone {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// Horizontal square grid centered on the z axis.
fn square(side: f64, n: usize, z: f64) -> Vec<Vec3> {
    let h = side / 2.0;
    linspace(-h, h, n)
        .flat_map(|y| linspace(-h, h, n).map(move |x| Vec3::new(x, y, z)))
        .collect()
}

/// Surface of an axis-aligned cube `[-h, h]² × [z0, z0 + side]` sampled on
/// an `n`-per-edge lattice, each lattice point once.
fn cube_surface(side: f64, n: usize, z0: f64) -> Vec<Vec3> {
    let h = side / 2.0;
    let mut out = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                if [i, j, k].iter().any(|&c| c == 0 || c == n - 1) {
                    let t = |c: usize| c as f64 / (n - 1) as f64;
                    out.push(Vec3::new(-h + side * t(i), -h + side * t(j), z0 + side * t(k)));
                }
            }
        }
    }
    out
}

fn labelled(pos: Vec<Vec3>, neg: Vec<Vec3>) -> Result<PointCloud> {
    let labels = std::iter::repeat_n(POSITIVE, pos.len())
        .chain(std::iter::repeat_n(NEGATIVE, neg.len()))
        .collect();
    PointCloud::new(pos.into_iter().chain(neg).collect())?.with_semantic_labels(labels)
}

/// Builds `kind` from `params`; `seed` drives the cylinder sampling.
pub fn generate(kind: SceneKind, params: &SynthParams, seed: u64) -> Result<PointCloud> {
    params.validate()?;
    match kind {
        SceneKind::BoxOnPlane => {
            let plane = square(params.plane_side, params.plane_grid, 0.0);
            let cube = cube_surface(params.box_side, params.box_grid, params.clearance);
            labelled(cube, plane)
        }
        SceneKind::TwoPlanes => {
            let top = square(params.planes_side, params.planes_grid, 0.0);
            let bottom = square(params.planes_side, params.planes_grid, -params.separation);
            labelled(top, bottom)
        }
        SceneKind::TwoCylinders => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = params.cylinder_points;
            let h = params.height / 2.0;
            let (r1, r2) = (params.inner_radius, params.outer_radius);
            let inner = (0..n)
                .map(|_| {
                    // Area-uniform disc sample.
                    let r = r1 * rng.random::<f64>().sqrt();
                    let a = rng.random_range(-PI..PI);
                    Vec3::new(r * a.cos(), r * a.sin(), rng.random_range(-h..=h))
                })
                .collect();
            let outer = (0..n)
                .map(|_| {
                    let a = rng.random_range(-PI..PI);
                    Vec3::new(r2 * a.cos(), r2 * a.sin(), rng.random_range(-h..=h))
                })
                .collect();
            labelled(inner, outer)
        }
    }
}
