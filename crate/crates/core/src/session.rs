//! Labeling sessions: working labels, lasso edits, reviewed recommendations
//! and their on-disk form.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::cluster::UNLABELED;
use crate::error::{Error, Result};
use crate::geometry::{project_masked, Aabb, PointCloud, Vec2, Vec3, Viewpoint, Viewport};
use crate::hull::polygon_contains;
use crate::io::{labels_to_le_bytes, write_atomic};
use crate::optimizer::{ViewpointRecommendation, DEFAULT_STRIDE, DISTANCE_FACTOR};

/// Relative target offset (fraction of the camera distance) under which a
/// camera counts as showing a recommendation.
pub const TARGET_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LassoMode {
    Label,
    Erase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoRequest {
    pub viewpoint: Viewpoint,
    pub polygon: Vec<[f64; 2]>,
    pub category: u32,
    pub mode: LassoMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edit {
    pub seq: u64,
    pub timestamp_ms: u64,
    pub request: LassoRequest,
    /// Points inside the polygon, ascending.
    pub selected: Vec<usize>,
    pub changed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewState {
    Pending,
    /// Ticked by a lasso edit made from the recommended view.
    Edited,
    /// Ticked explicitly by the annotator.
    Marked,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoOutcome {
    pub seq: u64,
    pub selected: usize,
    pub changed: usize,
    /// Recommendations ticked by this edit.
    pub checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSession {
    pub id: String,
    pub dataset: String,
    pub viewport: Viewport,
    pub categories: BTreeSet<u32>,
    /// Angular tolerance for matching the active view to a recommendation.
    pub check_tolerance: f64,
    initial_labels: Vec<u32>,
    labels: Vec<u32>,
    edits: Vec<Edit>,
    recommendations: Vec<ViewpointRecommendation>,
    review: BTreeMap<u32, ReviewState>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Checks the polygon has at least three distinct finite vertices.
pub fn validate_polygon(polygon: &[[f64; 2]]) -> Result<Vec<Vec2>> {
    if polygon.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Domain("polygon vertices must be finite".into()));
    }
    let verts: Vec<Vec2> = polygon.iter().map(|&[x, y]| Vec2::new(x, y)).collect();
    let mut distinct: Vec<[u64; 2]> = polygon.iter().map(|&[x, y]| [x.to_bits(), y.to_bits()]).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::DegeneratePolygon(distinct.len()));
    }
    Ok(verts)
}

/// Indices of points in front of the camera whose projection lies inside
/// or on `polygon`.
pub fn select_points(points: &[Vec3], vp: &Viewpoint, viewport: &Viewport, polygon: &[Vec2]) -> Vec<usize> {
    let scene = project_masked(points, vp, viewport, &vec![false; points.len()]);
    scene
        .positions()
        .iter()
        .zip(scene.behind_camera())
        .enumerate()
        .filter(|(_, (p, &behind))| !behind && polygon_contains(polygon, **p))
        .map(|(i, _)| i)
        .collect()
}

fn apply_selection(labels: &mut [u32], selected: &[usize], category: u32, mode: LassoMode) -> usize {
    let mut changed = 0;
    for &i in selected {
        let new = match mode {
            LassoMode::Label => category,
            LassoMode::Erase if labels[i] == category => UNLABELED,
            LassoMode::Erase => continue,
        };
        if labels[i] != new {
            labels[i] = new;
            changed += 1;
        }
    }
    changed
}

/// Top-down view of the whole cloud from `1.5 ×` its bounding diagonal.
pub fn overview_viewpoint(cloud: &PointCloud, min_distance: f64) -> Result<Viewpoint> {
    let bb: Aabb = cloud.bounds().ok_or_else(|| Error::InvalidInput("overview of an empty cloud".into()))?;
    Viewpoint::new(bb.center(), 0.0, 0.0, (DISTANCE_FACTOR * bb.diagonal()).max(min_distance))
}

impl LabelSession {
    /// `categories` lists the ids the session accepts besides unlabeled.
    pub fn new(
        id: impl Into<String>,
        dataset: impl Into<String>,
        viewport: Viewport,
        categories: BTreeSet<u32>,
        initial_labels: Vec<u32>,
    ) -> Result<Self> {
        viewport.validate()?;
        if let Some(&bad) = initial_labels.iter().find(|&&l| l != UNLABELED && !categories.contains(&l)) {
            return Err(Error::UnknownCategory(bad));
        }
        Ok(Self {
            id: id.into(),
            dataset: dataset.into(),
            viewport,
            categories,
            check_tolerance: DEFAULT_STRIDE,
            labels: initial_labels.clone(),
            initial_labels,
            edits: Vec::new(),
            recommendations: Vec::new(),
            review: BTreeMap::new(),
        })
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn initial_labels(&self) -> &[u32] {
        &self.initial_labels
    }

    pub fn edits(&self) -> &[Edit] {
        &self.edits
    }

    /// Installs the recommendation list; every entry starts pending.
    pub fn set_recommendations(&mut self, recs: Vec<ViewpointRecommendation>) {
        self.review = recs.iter().map(|r| (r.instance_id, ReviewState::Pending)).collect();
        self.recommendations = recs;
    }

    pub fn has_recommendations(&self) -> bool {
        !self.review.is_empty() || !self.recommendations.is_empty()
    }

    /// Recommendations with their current checked flags.
    pub fn recommendations(&self) -> Vec<ViewpointRecommendation> {
        self.recommendations
            .iter()
            .map(|r| ViewpointRecommendation {
                checked: self.is_checked(r.instance_id),
                ..r.clone()
            })
            .collect()
    }

    pub fn review_state(&self, id: u32) -> Option<ReviewState> {
        self.review.get(&id).copied()
    }

    pub fn is_checked(&self, id: u32) -> bool {
        self.review.get(&id).is_some_and(|s| *s != ReviewState::Pending)
    }

    pub fn checked(&self) -> BTreeSet<u32> {
        self.review.iter().filter(|(_, s)| **s != ReviewState::Pending).map(|(&id, _)| id).collect()
    }

    pub fn mark_checked(&mut self, id: u32) -> Result<()> {
        let state = self
            .review
            .get_mut(&id)
            .ok_or_else(|| Error::NotFound(format!("recommendation {id}")))?;
        if *state == ReviewState::Pending {
            *state = ReviewState::Marked;
        }
        Ok(())
    }

    /// Whether the camera `vp` shows the recommended view: same target up to
    /// [`TARGET_TOLERANCE`] of the distance, view directions within
    /// `check_tolerance`.
    pub fn matches_recommendation(&self, vp: &Viewpoint, rec: &ViewpointRecommendation) -> bool {
        let r = &rec.viewpoint;
        let cos = vp.direction().dot(&r.direction()).clamp(-1.0, 1.0);
        (vp.target() - r.target()).norm() <= TARGET_TOLERANCE * r.distance()
            && cos.acos() <= self.check_tolerance + 1e-12
    }

    /// Labels or erases the points inside `req.polygon` as seen from
    /// `req.viewpoint`. `points` must be the session's cloud.
    pub fn apply_lasso(&mut self, points: &[Vec3], req: LassoRequest) -> Result<LassoOutcome> {
        if points.len() != self.labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} points for a session over {}",
                points.len(),
                self.labels.len()
            )));
        }
        if req.category == UNLABELED || !self.categories.contains(&req.category) {
            return Err(Error::UnknownCategory(req.category));
        }
        let polygon = validate_polygon(&req.polygon)?;
        let selected = select_points(points, &req.viewpoint, &self.viewport, &polygon);
        let changed = apply_selection(&mut self.labels, &selected, req.category, req.mode);

        let hits: Vec<u32> = self
            .recommendations
            .iter()
            .filter(|r| self.matches_recommendation(&req.viewpoint, r))
            .map(|r| r.instance_id)
            .collect();
        let mut checked = 0;
        for id in hits {
            if let Some(state) = self.review.get_mut(&id) {
                if *state == ReviewState::Pending {
                    *state = ReviewState::Edited;
                    checked += 1;
                }
            }
        }
        let seq = self.edits.len() as u64 + 1;
        let outcome = LassoOutcome {
            seq,
            selected: selected.len(),
            changed,
            checked,
        };
        self.edits.push(Edit {
            seq,
            timestamp_ms: now_ms(),
            request: req,
            selected,
            changed,
        });
        Ok(outcome)
    }

    /// Labels obtained by replaying the edit log over the initial labels.
    pub fn replay(&self) -> Vec<u32> {
        let mut labels = self.initial_labels.clone();
        for e in &self.edits {
            apply_selection(&mut labels, &e.selected, e.request.category, e.request.mode);
        }
        labels
    }

    fn check_invariants(&self) -> Result<()> {
        if self.initial_labels.len() != self.labels.len() {
            return Err(Error::Integrity("label arrays differ in length".into()));
        }
        if self.replay() != self.labels {
            return Err(Error::Integrity("edit log does not reproduce the working labels".into()));
        }
        let issued: BTreeSet<u32> = self.recommendations.iter().map(|r| r.instance_id).collect();
        if !self.review.keys().all(|id| issued.contains(id)) {
            return Err(Error::Integrity("review state for a recommendation never issued".into()));
        }
        Ok(())
    }
}

/// On-disk form of a session: labels as base64 packed little-endian `u32`.
#[derive(Serialize, Deserialize)]
struct StoredSession {
    id: String,
    dataset: String,
    viewport: Viewport,
    categories: BTreeSet<u32>,
    check_tolerance: f64,
    point_count: usize,
    initial_labels: String,
    labels: String,
    edits: Vec<Edit>,
    recommendations: Vec<ViewpointRecommendation>,
    review: BTreeMap<u32, ReviewState>,
}

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    version: u32,
    checksum: String,
    session: &'a RawValue,
}

#[derive(Deserialize)]
struct EnvelopeIn<'a> {
    version: u32,
    checksum: String,
    #[serde(borrow)]
    session: &'a RawValue,
}

const FORMAT_VERSION: u32 = 1;

fn decode_labels(s: &str, n: usize) -> Result<Vec<u32>> {
    let bytes = BASE64
        .decode(s)
        .map_err(|e| Error::Integrity(format!("label data is not base64: {e}")))?;
    if bytes.len() != 4 * n {
        return Err(Error::Integrity(format!("{} label bytes for {n} points", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4-byte label")))
        .collect())
}

/// Serializes `session` with a SHA-256 checksum over the session body.
pub fn encode_session(session: &LabelSession) -> Result<String> {
    let stored = StoredSession {
        id: session.id.clone(),
        dataset: session.dataset.clone(),
        viewport: session.viewport,
        categories: session.categories.clone(),
        check_tolerance: session.check_tolerance,
        point_count: session.labels.len(),
        initial_labels: BASE64.encode(labels_to_le_bytes(&session.initial_labels)),
        labels: BASE64.encode(labels_to_le_bytes(&session.labels)),
        edits: session.edits.clone(),
        recommendations: session.recommendations.clone(),
        review: session.review.clone(),
    };
    let body = serde_json::to_string(&stored)?;
    let raw = RawValue::from_string(body)?;
    let checksum = hex::encode(Sha256::digest(raw.get().as_bytes()));
    Ok(serde_json::to_string(&EnvelopeOut {
        version: FORMAT_VERSION,
        checksum,
        session: &raw,
    })?)
}

/// Parses and verifies a session produced by [`encode_session`].
pub fn decode_session(text: &str) -> Result<LabelSession> {
    let env: EnvelopeIn =
        serde_json::from_str(text).map_err(|e| Error::Integrity(format!("unreadable session file: {e}")))?;
    if env.version != FORMAT_VERSION {
        return Err(Error::Integrity(format!("unsupported session format {}", env.version)));
    }
    let actual = hex::encode(Sha256::digest(env.session.get().as_bytes()));
    if actual != env.checksum {
        return Err(Error::Integrity("checksum mismatch".into()));
    }
    let s: StoredSession = serde_json::from_str(env.session.get())
        .map_err(|e| Error::Integrity(format!("malformed session body: {e}")))?;
    let session = LabelSession {
        initial_labels: decode_labels(&s.initial_labels, s.point_count)?,
        labels: decode_labels(&s.labels, s.point_count)?,
        id: s.id,
        dataset: s.dataset,
        viewport: s.viewport,
        categories: s.categories,
        check_tolerance: s.check_tolerance,
        edits: s.edits,
        recommendations: s.recommendations,
        review: s.review,
    };
    session.check_invariants()?;
    Ok(session)
}

/// Directory of `<id>.json` session files.
#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

impl SessionStore {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn path_for(&self, id: &str) -> Result<PathBuf> {
        let ok = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !ok {
            return Err(Error::InvalidInput(format!("invalid session id {id:?}")));
        }
        Ok(self.dir.join(format!("{id}.json")))
    }

    pub fn save(&self, session: &LabelSession) -> Result<()> {
        save_session(&self.path_for(&session.id)?, session)
    }

    pub fn load(&self, id: &str) -> Result<LabelSession> {
        let path = self.path_for(id)?;
        if !path.exists() {
            return Err(Error::NotFound(format!("session {id}")));
        }
        load_session(&path)
    }
}

pub fn save_session(path: &Path, session: &LabelSession) -> Result<()> {
    write_atomic(path, encode_session(session)?.as_bytes())
}

pub fn load_session(path: &Path) -> Result<LabelSession> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_session(&text)
}
