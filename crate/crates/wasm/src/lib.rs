//! Bindings behind `www/index.html`: orbit a synthetic scene, score the
//! current view, sweep the whole grid, and plot dotted-tunnel ID against
//! its bounds.
//!
//! Every export has a plain Rust twin returning `fittsview_core::Result` so
//! the logic is testable off the browser.

use fittsview_core::fitts::{dotted_tunnel_bounds, id_dotted_tunnel, upper_bound_holds, DottedTunnelParams};
use fittsview_core::geometry::project_masked;
use fittsview_core::lasso::estimate_lasso_id;
use fittsview_core::optimizer::{evaluate_grid, orbit_frame, select_best, CandidateScore, SearchConfig};
use fittsview_core::synth::{generate, SceneKind, SynthParams, POSITIVE};
use fittsview_core::{Difficulty, Error, PointCloud, Result, Vec3, Viewpoint, Viewport};
use wasm_bindgen::prelude::*;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Scenes small enough to sweep interactively.
fn demo_params() -> SynthParams {
    SynthParams {
        box_grid: 11,
        plane_grid: 41,
        planes_grid: 31,
        cylinder_points: 1500,
        ..SynthParams::default()
    }
}

/// Lasso estimate at one view.
#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    /// NaN when infeasible.
    pub difficulty: f64,
    /// Empty when feasible.
    pub reason: String,
    pub interior_negatives: u32,
}

#[wasm_bindgen]
pub struct Scene {
    cloud: PointCloud,
    mask: Vec<bool>,
    target: Vec3,
    distance: f64,
    config: SearchConfig,
    scores: Option<Vec<CandidateScore>>,
}

impl Scene {
    pub fn try_new(kind: &str, seed: u64) -> Result<Scene> {
        let cloud = generate(kind.parse::<SceneKind>()?, &demo_params(), seed)?;
        let labels = cloud.semantic_labels().expect("synthetic scenes are labelled");
        let mask: Vec<bool> = labels.iter().map(|&l| l == POSITIVE).collect();
        let positive: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        let config = SearchConfig::default();
        let (target, distance) = orbit_frame(&cloud, &positive, config.min_distance)?;
        Ok(Scene {
            cloud,
            mask,
            target,
            distance,
            config,
            scores: None,
        })
    }

    pub fn try_set_view(&mut self, width: f64, height: f64, dot_radius: f64, weight: f64) -> Result<()> {
        let mut config = self.config;
        config.viewport = Viewport {
            width_px: width,
            height_px: height,
            dot_radius_px: dot_radius,
            ..config.viewport
        };
        config.weight = weight;
        config.validate()?;
        if config != self.config {
            self.config = config;
            self.scores = None;
        }
        Ok(())
    }

    fn viewpoint(&self, alpha: f64, beta: f64) -> Result<Viewpoint> {
        Viewpoint::new(self.target, alpha, beta, self.distance)
    }

    pub fn try_score(&self, alpha: f64, beta: f64) -> Result<Score> {
        let vp = self.viewpoint(alpha, beta)?;
        let scene = project_masked(self.cloud.points(), &vp, &self.config.viewport, &self.mask);
        let est = estimate_lasso_id(&scene, self.config.weight);
        Ok(match est.difficulty {
            Difficulty::Finite(v) => Score {
                difficulty: v,
                reason: String::new(),
                interior_negatives: 0,
            },
            Difficulty::Infeasible(why) => Score {
                difficulty: f64::NAN,
                reason: why.as_str().into(),
                interior_negatives: est.interior_negatives.min(u32::MAX as usize) as u32,
            },
        })
    }

    fn grid(&mut self) -> Result<&[CandidateScore]> {
        if self.scores.is_none() {
            let positive: Vec<usize> = (0..self.mask.len()).filter(|&i| self.mask[i]).collect();
            self.scores = Some(evaluate_grid(&self.cloud, &positive, &self.config)?);
        }
        Ok(self.scores.as_deref().unwrap_or_default())
    }

    pub fn try_landscape(&mut self) -> Result<Vec<f64>> {
        Ok(self
            .grid()?
            .iter()
            .map(|s| s.estimate.difficulty.value().unwrap_or(f64::NAN))
            .collect())
    }

    pub fn try_best(&mut self) -> Result<Vec<f64>> {
        let scores = self.grid()?;
        let i = select_best(scores).ok_or_else(|| Error::Domain("empty viewpoint grid".into()))?;
        let s = &scores[i];
        Ok(vec![
            s.viewpoint.alpha(),
            s.viewpoint.beta(),
            s.estimate.difficulty.value().unwrap_or(f64::NAN),
        ])
    }
}

#[wasm_bindgen]
impl Scene {
    /// `kind` is box_on_plane, two_planes or two_cylinders.
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, seed: u64) -> std::result::Result<Scene, JsError> {
        Scene::try_new(kind, seed).map_err(js)
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    /// 1 for the target, 2 for everything else.
    pub fn labels(&self) -> Vec<u32> {
        self.cloud.semantic_labels().map(<[u32]>::to_vec).unwrap_or_default()
    }

    /// Viewport size, dot radius in pixels and gap weight.
    pub fn set_view(&mut self, width: f64, height: f64, dot_radius: f64, weight: f64) -> std::result::Result<(), JsError> {
        self.try_set_view(width, height, dot_radius, weight).map_err(js)
    }

    /// Pixel positions as x0, y0, x1, y1, ...; NaN behind the camera.
    pub fn project(&self, alpha: f64, beta: f64) -> std::result::Result<Vec<f32>, JsError> {
        let vp = self.viewpoint(alpha, beta).map_err(js)?;
        let scene = project_masked(self.cloud.points(), &vp, &self.config.viewport, &self.mask);
        Ok(scene.positions().iter().flat_map(|p| [p.x as f32, p.y as f32]).collect())
    }

    pub fn score(&self, alpha: f64, beta: f64) -> std::result::Result<Score, JsError> {
        self.try_score(alpha, beta).map_err(js)
    }

    /// Number of alphas and betas in the grid.
    pub fn grid_shape(&self) -> Vec<u32> {
        let g = self.config.grid;
        let n = |v: Result<Vec<f64>>| v.map_or(0, |v| v.len() as u32);
        vec![n(g.alphas()), n(g.betas())]
    }

    /// Difficulty of every grid view, beta-major, NaN where infeasible.
    pub fn landscape(&mut self) -> std::result::Result<Vec<f64>, JsError> {
        self.try_landscape().map_err(js)
    }

    /// `[alpha, beta, difficulty]` of the recommended view.
    pub fn best(&mut self) -> std::result::Result<Vec<f64>, JsError> {
        self.try_best().map_err(js)
    }
}

/// Rows of `[D, ID, lower, upper, upper_holds]` for `samples` total lengths
/// from the tightest packing of the dots up to `max_total`.
pub fn tunnel_sweep(gaps: u32, clearance: f64, radius: f64, weight: f64, max_total: f64, samples: u32) -> Result<Vec<f64>> {
    let min_total = 2.0 * radius * (gaps as f64 + 1.0);
    if !(max_total > min_total) {
        return Err(Error::Domain(format!("total length must exceed {min_total}")));
    }
    if samples < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    let mut out = Vec::with_capacity(5 * samples as usize);
    for i in 0..samples {
        let d = min_total + (max_total - min_total) * i as f64 / (samples - 1) as f64;
        let p = DottedTunnelParams::with_total_length(gaps, clearance, radius, d, weight)?;
        let b = dotted_tunnel_bounds(&p);
        out.extend([d, id_dotted_tunnel(&p), b.lower, b.upper, f64::from(u8::from(upper_bound_holds(&p)))]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn dotted_tunnel_sweep(
    gaps: u32,
    clearance: f64,
    radius: f64,
    weight: f64,
    max_total: f64,
    samples: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    tunnel_sweep(gaps, clearance, radius, weight, max_total, samples).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fittsview_core::optimizer::grid_search_viewpoint;
    use std::f64::consts::{LN_2, PI};

    #[test]
    fn sweep_stays_within_bounds() {
        let rows = tunnel_sweep(4, 1.5, 1.0, LN_2, 60.0, 50).unwrap();
        assert_eq!(rows.len(), 250);
        for r in rows.chunks_exact(5) {
            assert!(r[2] <= r[1] + 1e-12 && r[1] <= r[3] + 1e-12, "{r:?}");
            assert_eq!(r[4], 1.0);
        }
        assert!(tunnel_sweep(4, 1.5, 1.0, 1.0, 5.0, 10).is_err());
    }

    #[test]
    fn best_matches_grid_search() {
        let mut s = Scene::try_new("two_planes", 0).unwrap();
        let land = s.try_landscape().unwrap();
        assert_eq!(land.len(), 312);
        let best = s.try_best().unwrap();
        let positive: Vec<usize> = (0..s.mask.len()).filter(|&i| s.mask[i]).collect();
        let r = grid_search_viewpoint(&s.cloud, &positive, &s.config).unwrap();
        assert_eq!((best[0], best[1]), (r.viewpoint.alpha(), r.viewpoint.beta()));
        assert_eq!(best[2], r.difficulty.value().unwrap());
        assert_eq!(s.try_score(best[0], best[1]).unwrap().difficulty, best[2]);
    }

    #[test]
    fn view_changes_reset_the_grid() {
        let mut s = Scene::try_new("box_on_plane", 1).unwrap();
        assert!(!s.is_empty());
        assert!(s.labels().contains(&POSITIVE));
        s.try_landscape().unwrap();
        s.try_set_view(1280.0, 720.0, 3.0, 0.5).unwrap();
        assert!(s.scores.is_none());
        assert!(s.try_set_view(1280.0, 720.0, -1.0, 0.5).is_err());
        let below = s.try_score(0.0, PI).unwrap();
        assert_eq!(below.reason, "interior-negative");
        assert!(below.difficulty.is_nan());
        assert!(Scene::try_new("teapot", 0).is_err());
    }
}
