//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Reference values are computed here from first principles and
//! never through the routine under test.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::{LN_2, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fittsview_core::cluster::{adaptive_dbscan, estimate_angular_resolution, DbscanParams, Instance, InstanceSet};
use fittsview_core::fitts::{
    dotted_tunnel_bounds, id_curved_tunnel, id_dotted_tunnel, id_general_tunnel, DottedTunnelParams, WidthProfile,
};
use fittsview_core::geometry::Camera;
use fittsview_core::io::labels_to_le_bytes;
use fittsview_core::lasso::{estimate_lasso_id, Difficulty, LassoCostEstimate};
use fittsview_core::metrics::miou;
use fittsview_core::optimizer::{
    evaluate_grid, grid_search_viewpoint, orbit_frame, recommend_all, select_best, CandidateScore, GridSpec,
    RecommendPolicy, SearchConfig,
};
use fittsview_core::session::{decode_session, encode_session, LabelSession, LassoMode, LassoRequest};
use fittsview_core::synth::{generate, SceneKind, SynthParams, POSITIVE};
use fittsview_core::{PointCloud, ProjectedScene, Vec2, Vec3, Viewpoint, Viewport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// Fitts-model criteria

/// `∫₀^{2r} dt / w(t)` after `t = r(1 − cos φ)`, which removes the square
/// root endpoint singularity: `∫₀^π r sin φ / (W + 2r − 2r sin φ) dφ`,
/// integrated with composite 5-point Gauss-Legendre.
fn curved_oracle(r: f64, w: f64) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WT: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let f = |phi: f64| r * phi.sin() / (w + 2.0 * r - 2.0 * r * phi.sin());
    let panels = 4000;
    let h = PI / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (x, wt) in X.iter().zip(WT) {
            sum += wt * f(mid + 0.5 * h * x);
        }
    }
    sum * 0.5 * h
}

fn closed_form_vs_quadrature() -> Outcome {
    let grid = [0.25, 0.5, 1.0, 2.0, 4.0];
    let start = Instant::now();
    let mut worst_lib = 0.0f64;
    for &r in &grid {
        for &w in &grid {
            let closed = id_curved_tunnel(r, w).map_err(|e| e.to_string())?;
            let profile = WidthProfile::function(2.0 * r, move |t| {
                let h = (r * r - (r - t) * (r - t)).max(0.0);
                w + 2.0 * r - 2.0 * h.sqrt()
            })
            .map_err(|e| e.to_string())?;
            let quad = id_general_tunnel(&profile).map_err(|e| e.to_string())?;
            worst_lib = worst_lib.max(((closed - quad) / quad).abs());
        }
    }
    let elapsed = start.elapsed();
    let mut worst_oracle = 0.0f64;
    for &r in &grid {
        for &w in &grid {
            let closed = id_curved_tunnel(r, w).map_err(|e| e.to_string())?;
            let oracle = curved_oracle(r, w);
            worst_oracle = worst_oracle.max(((closed - oracle) / oracle).abs());
        }
    }
    ensure(worst_lib < 1e-7, || format!("adaptive quadrature rel err {worst_lib:.2e} >= 1e-7"))?;
    ensure(worst_oracle < 1e-7, || format!("Gauss-Legendre rel err {worst_oracle:.2e} >= 1e-7"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("25 quadratures took {elapsed:?}"))?;
    Ok(format!(
        "25 (r, W) pairs, max rel err {worst_lib:.1e} (adaptive), {worst_oracle:.1e} (Gauss-Legendre), {elapsed:.2?}"
    ))
}

/// `(k+1)·ID₁ + m·k·log2(d/(W+2r) + 1)`, written out from scratch.
fn dotted_oracle(k: f64, w: f64, r: f64, d: f64, m: f64) -> f64 {
    let x = 2.0 * r / (w + 2.0 * r);
    let id1 = (PI / 2.0 + x.asin()) / (1.0 - x * x).sqrt() - PI / 2.0;
    (k + 1.0) * id1 + m * k * (d / (w + 2.0 * r) + 1.0).log2()
}

fn bound_sandwich() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a4d);
    let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (rng.random_range(lo.ln()..hi.ln())).exp();
    let mut violations = 0;
    let mut max_oracle_diff = 0.0f64;
    for _ in 0..1000 {
        let k = rng.random_range(1..=200u32);
        let w = log_uniform(&mut rng, 0.05, 20.0);
        let r = log_uniform(&mut rng, 1e-4, 5.0);
        let d = if rng.random_bool(0.1) { 0.0 } else { log_uniform(&mut rng, 1e-3, 50.0) };
        // The upper bound D/W needs m <= ln 2 · (W + 2r)/W; ln 2 is the
        // weight that is valid for every W and r.
        let m = rng.random_range(0.01..=LN_2);
        let p = DottedTunnelParams::new(k, w, r, d, m).map_err(|e| e.to_string())?;
        let id = id_dotted_tunnel(&p);
        let kf = k as f64;
        let total = 2.0 * r * (kf + 1.0) + d * kf;
        let lower = m * kf * ((total - 2.0 * r * (kf + 1.0)) / (kf * (w + 2.0 * r)) + 1.0).log2();
        let upper = total / w;
        let b = dotted_tunnel_bounds(&p);
        max_oracle_diff = max_oracle_diff
            .max(((id - dotted_oracle(kf, w, r, d, m)) / id.max(1e-300)).abs())
            .max(((b.upper - upper) / upper).abs());
        let slack = 1e-12 * id.abs().max(1.0);
        if !(lower <= id + slack && id <= upper + slack) {
            violations += 1;
        }
    }
    ensure(violations == 0, || format!("{violations} of 1000 sets outside [lower, D/W]"))?;
    ensure(max_oracle_diff < 1e-12, || format!("library vs formula differ by {max_oracle_diff:.2e}"))?;
    Ok("1000 random sets with m in (0, ln 2], 0 violations".into())
}

fn monotonicity() -> Outcome {
    let mut violations = 0;
    let mut sweeps = 0;
    let mut points = 0;
    for total in [1.0f64, 4.0, 16.0] {
        for r in [1e-3f64, 1e-2] {
            for w in [0.1, 0.5, 1.0, 2.0, 8.0] {
                for m in [0.1, 0.5, LN_2] {
                    let mut prev: Option<(f64, f64)> = None;
                    // Fewer gaps means longer gaps: walk k downwards so d grows.
                    let k_max = ((total - 2.0 * r) / (2.0 * r)).floor() as u32;
                    for k in (1..=k_max).rev() {
                        let Ok(p) = DottedTunnelParams::with_total_length(k, w, r, total, m) else {
                            continue;
                        };
                        let id = id_dotted_tunnel(&p);
                        if let Some((d0, id0)) = prev {
                            if p.gap_length() > d0 && id > id0 * (1.0 + 1e-12) {
                                violations += 1;
                            }
                        }
                        prev = Some((p.gap_length(), id));
                        points += 1;
                    }
                    sweeps += 1;
                }
            }
        }
    }
    ensure(violations == 0, || format!("{violations} increases over {points} sweep points"))?;
    Ok(format!("{sweeps} sweeps, {points} points over D in {{1,4,16}}, r in {{1e-3,1e-2}}, m <= ln 2, 0 violations"))
}

fn limits() -> Outcome {
    let mut worst_dense = 0.0f64;
    let k = 1000u32;
    for r in [1e-3, 1e-4, 1e-5] {
        for w in [0.5, 1.0, 2.0] {
            let p = DottedTunnelParams::new(k, w, r, 0.0, 1.0).map_err(|e| e.to_string())?;
            let target = p.total_length() / w;
            worst_dense = worst_dense.max(((id_dotted_tunnel(&p) - target) / target).abs());
        }
    }
    let mut worst_sparse = 0.0f64;
    for k in [1u32, 10, 100] {
        for total in [1.0, 4.0, 16.0] {
            for w in [0.5, 1.0, 2.0] {
                for m in [0.5, 1.0] {
                    let p = DottedTunnelParams::with_total_length(k, w, 1e-6, total, m).map_err(|e| e.to_string())?;
                    let kf = k as f64;
                    let target = m * kf * (total / (kf * w) + 1.0).log2();
                    worst_sparse = worst_sparse.max((id_dotted_tunnel(&p) - target).abs());
                }
            }
        }
    }
    ensure(worst_dense < 5e-3, || format!("d = 0 limit off by {:.3}%", 100.0 * worst_dense))?;
    ensure(worst_sparse < 1e-3, || format!("r -> 0 limit off by {worst_sparse:.2e}"))?;
    Ok(format!(
        "d = 0, k = 1000: max rel err {:.3}% vs D/W; r = 1e-6: max abs err {worst_sparse:.1e} vs mk log2(D/(kW)+1)",
        100.0 * worst_dense
    ))
}

// ---------------------------------------------------------------------------
// Viewpoint search criteria

fn grid_contract() -> Outcome {
    let grid = GridSpec::default();
    let a = grid.candidates().map_err(|e| e.to_string())?;
    let b = grid.candidates().map_err(|e| e.to_string())?;
    let mut expected = Vec::new();
    for i in 0..=12 {
        let beta = if i == 12 { PI } else { i as f64 * (PI / 12.0) };
        for j in 1..=24 {
            let alpha = if j == 24 { PI } else { -PI + j as f64 * (PI / 12.0) };
            expected.push((alpha, beta));
        }
    }
    ensure(a.len() == 312, || format!("{} candidates", a.len()))?;
    let bits = |v: &[(f64, f64)]| v.iter().map(|(x, y)| (x.to_bits(), y.to_bits())).collect::<Vec<_>>();
    ensure(bits(&a) == bits(&b), || "candidate order differs between runs".into())?;
    ensure(bits(&a) == bits(&expected), || "candidates are not beta-major with alpha ascending".into())?;

    let cloud = generate(SceneKind::TwoPlanes, &SynthParams::default(), 0).map_err(|e| e.to_string())?;
    let pos = positives(&cloud);
    let scores = evaluate_grid(&cloud, &pos, &SearchConfig::default()).map_err(|e| e.to_string())?;
    ensure(scores.len() == 312, || format!("search scored {} candidates", scores.len()))?;
    let order_ok = scores.iter().zip(&a).all(|(s, &(al, be))| s.viewpoint.alpha() == al && s.viewpoint.beta() == be);
    ensure(order_ok, || "search did not follow the canonical order".into())?;
    Ok("24 alpha x 13 beta = 312 candidates, bit-identical order across runs and in the search".into())
}

fn positives(cloud: &PointCloud) -> Vec<usize> {
    let labels = cloud.semantic_labels().expect("synthetic labels");
    (0..cloud.len()).filter(|&i| labels[i] == POSITIVE).collect()
}

/// Axis-aligned extents (width, height) of the projected positives.
fn projected_extent(cloud: &PointCloud, positive: &[usize], vp: &Viewpoint, viewport: &Viewport) -> (f64, f64) {
    let cam = Camera::new(vp, viewport);
    let mut lo = Vec2::repeat(f64::INFINITY);
    let mut hi = Vec2::repeat(f64::NEG_INFINITY);
    for &i in positive {
        if let Some(p) = cam.project(&cloud.points()[i]) {
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
    }
    (hi.x - lo.x, hi.y - lo.y)
}

fn synthetic_scenes() -> Outcome {
    let config = SearchConfig::default();
    let params = SynthParams::default();
    let start = Instant::now();
    let mut notes = Vec::new();
    for kind in SceneKind::ALL {
        let cloud = generate(kind, &params, 7).map_err(|e| e.to_string())?;
        ensure(cloud.len() <= 10_000, || {
            format!("{} has {} points", kind.name(), cloud.len())
        })?;
        let pos = positives(&cloud);
        let res = grid_search_viewpoint(&cloud, &pos, &config).map_err(|e| e.to_string())?;
        ensure(res.feasible, || format!("{}: chosen view is {}", kind.name(), res.difficulty))?;
        let (a, b) = (res.viewpoint.alpha(), res.viewpoint.beta());
        match kind {
            SceneKind::TwoCylinders => {
                let off_axis = b.min(PI - b);
                ensure(off_axis <= PI / 12.0 + 1e-12, || {
                    format!("two_cylinders: view is {off_axis:.3} rad off the axis")
                })?;
            }
            SceneKind::TwoPlanes => {
                let chosen = projected_extent(&cloud, &pos, &res.viewpoint, &config.viewport);
                let face_on = Viewpoint::new(res.viewpoint.target(), 0.0, 0.0, res.viewpoint.distance())
                    .map_err(|e| e.to_string())?;
                let face = projected_extent(&cloud, &pos, &face_on, &config.viewport);
                let ratio = chosen.0.min(chosen.1) / face.0.min(face.1);
                ensure(ratio <= 0.10, || format!("two_planes: minor extent ratio {ratio:.3}"))?;
                notes.push(format!("planes minor extent {:.1}%", 100.0 * ratio));
            }
            SceneKind::BoxOnPlane => {}
        }
        notes.push(format!("{} (a={a:.3}, b={b:.3}, ID={})", kind.name(), res.difficulty));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("three searches took {elapsed:?}"))?;
    Ok(format!("{}; {elapsed:.1?}", notes.join(", ")))
}

fn scale_and_argmin_invariance() -> Outcome {
    let config = SearchConfig::default();
    let params = SynthParams::default();
    let mut checks = 0;
    for kind in SceneKind::ALL {
        let cloud = generate(kind, &params, 11).map_err(|e| e.to_string())?;
        let pos = positives(&cloud);
        let base = grid_search_viewpoint(&cloud, &pos, &config).map_err(|e| e.to_string())?;
        // Factors keep 1.5 d_diag above the 1 m distance floor.
        for s in [0.5, 3.7, 16.0, 0.26] {
            let scaled = PointCloud::new(cloud.points().iter().map(|p| p * s).collect())
                .map_err(|e| e.to_string())?;
            let res = grid_search_viewpoint(&scaled, &pos, &config).map_err(|e| e.to_string())?;
            ensure(
                res.viewpoint.alpha() == base.viewpoint.alpha() && res.viewpoint.beta() == base.viewpoint.beta(),
                || {
                    format!(
                        "{} scaled by {s}: ({:.3}, {:.3}) vs ({:.3}, {:.3})",
                        kind.name(),
                        res.viewpoint.alpha(),
                        res.viewpoint.beta(),
                        base.viewpoint.alpha(),
                        base.viewpoint.beta()
                    )
                },
            )?;
            checks += 1;
        }
        let scores = evaluate_grid(&cloud, &pos, &config).map_err(|e| e.to_string())?;
        let best = select_best(&scores);
        for c in [1e-6, 0.3, 7.0, 1e5] {
            let mult: Vec<CandidateScore> = scores
                .iter()
                .map(|s| CandidateScore {
                    viewpoint: s.viewpoint,
                    estimate: LassoCostEstimate {
                        difficulty: match s.estimate.difficulty {
                            Difficulty::Finite(v) => Difficulty::Finite(v * c),
                            other => other,
                        },
                        ..s.estimate.clone()
                    },
                })
                .collect();
            ensure(select_best(&mult) == best, || format!("{}: argmin moved under x{c}", kind.name()))?;
            checks += 1;
        }
    }
    Ok(format!("{checks} scale / multiplier checks on 3 scenes, argmin unchanged"))
}

// ---------------------------------------------------------------------------
// Clustering

/// Textbook DBSCAN over brute-force neighbour lists with per-point radii.
fn dbscan_oracle(points: &[Vec3], theta: f64, min_pts: usize, factor: f64) -> Vec<Option<usize>> {
    let n = points.len();
    let nbrs: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let eps = factor * points[i].norm() * theta;
            (0..n).filter(|&j| (points[i] - points[j]).norm() <= eps).collect()
        })
        .collect();
    let core: Vec<bool> = nbrs.iter().map(|v| v.len() >= min_pts).collect();
    let mut label = vec![None; n];
    let mut next = 0;
    for s in 0..n {
        if label[s].is_some() || !core[s] {
            continue;
        }
        label[s] = Some(next);
        let mut queue = VecDeque::from([s]);
        while let Some(q) = queue.pop_front() {
            for &x in &nbrs[q] {
                if label[x].is_none() {
                    label[x] = Some(next);
                    if core[x] {
                        queue.push_back(x);
                    }
                }
            }
        }
        next += 1;
    }
    label
}

/// Same partition up to renaming of cluster ids.
fn same_partition(a: &[Option<usize>], b: &[Option<usize>]) -> bool {
    let mut fwd = BTreeMap::new();
    let mut back = BTreeMap::new();
    a.iter().zip(b).all(|(x, y)| match (x, y) {
        (None, None) => true,
        (Some(x), Some(y)) => *fwd.entry(*x).or_insert(*y) == *y && *back.entry(*y).or_insert(*x) == *x,
        _ => false,
    })
}

fn clustering_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut clusters_seen = 0;
    let mut noise_seen = 0;
    for scene in 0..50 {
        let n = rng.random_range(40..=500);
        let blobs = rng.random_range(1..=6);
        let centers: Vec<Vec3> = (0..blobs)
            .map(|_| {
                let range = rng.random_range(3.0..40.0);
                let az = rng.random_range(-PI..PI);
                Vec3::new(range * az.cos(), range * az.sin(), rng.random_range(-2.0..2.0))
            })
            .collect();
        let points: Vec<Vec3> = (0..n)
            .map(|i| {
                if i % 9 == 0 {
                    // sprinkle of background noise
                    Vec3::new(rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0), rng.random_range(-3.0..3.0))
                } else {
                    let c = centers[rng.random_range(0..blobs)];
                    let spread = rng.random_range(0.1..1.5);
                    c + Vec3::new(
                        rng.random_range(-spread..spread),
                        rng.random_range(-spread..spread),
                        rng.random_range(-spread..spread),
                    )
                }
            })
            .collect();
        let theta = rng.random_range(1e-4..3e-3);
        let min_pts = rng.random_range(2..=12);
        let factor = if scene % 5 == 0 { rng.random_range(20.0..200.0) } else { 100.0 };
        let params = DbscanParams {
            theta,
            min_pts,
            eps_factor: factor,
        };
        let got = adaptive_dbscan(&points, &params).map_err(|e| e.to_string())?;
        let want = dbscan_oracle(&points, theta, min_pts, factor);
        ensure(same_partition(&got, &want), || format!("scene {scene} (n = {n}) partition differs from the oracle"))?;
        clusters_seen += want.iter().flatten().collect::<BTreeSet<_>>().len();
        noise_seen += want.iter().filter(|l| l.is_none()).count();
    }

    // Synthetic scan: rings at several ranges, true angular step 0.004 rad.
    let step = 0.004;
    let mut ring = Vec::new();
    for (z, range) in [(-1.5, 8.0), (-0.5, 15.0), (0.5, 25.0)] {
        let count = (2.0 * PI / step).round() as usize;
        for i in 0..count {
            let a = i as f64 * step;
            ring.push(Vec3::new(range * a.cos(), range * a.sin(), z));
        }
    }
    let cloud = PointCloud::new(ring).map_err(|e| e.to_string())?;
    let theta = estimate_angular_resolution(&cloud).map_err(|e| e.to_string())?.theta;
    let rel = (theta - step).abs() / step;
    ensure(rel < 0.01, || format!("ring theta {theta} vs {step}: {:.2}% off", 100.0 * rel))?;
    Ok(format!(
        "50 scenes match the brute-force oracle ({clusters_seen} clusters, {noise_seen} noise points); ring theta off by {:.4}%",
        100.0 * rel
    ))
}

// ---------------------------------------------------------------------------
// Metrics

fn miou_criterion() -> Outcome {
    let truth = [1u32, 1, 1, 1, 1, 2, 2, 2, 2, 2];
    let mut pred = truth;
    pred[0] = 2;
    let hand = miou(&pred, &truth, Some(&[1, 2])).map_err(|e| e.to_string())?.miou;
    let exact = miou(&truth, &truth, Some(&[1, 2])).map_err(|e| e.to_string())?.miou;
    ensure((hand - 0.8167).abs() <= 1e-4, || format!("hand case gives {hand}"))?;
    ensure(exact == 1.0, || format!("pred = truth gives {exact}"))?;
    Ok(format!("hand case {hand:.4}, identity {exact}"))
}

// ---------------------------------------------------------------------------
// Complexity

fn lasso_scene(n: usize, seed: u64) -> ProjectedScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pos = n / 10;
    let pos: Vec<Vec2> = (0..n_pos)
        .map(|_| {
            let a = rng.random_range(-PI..PI);
            let r = 200.0 * rng.random::<f64>().sqrt();
            Vec2::new(960.0 + r * a.cos(), 540.0 + r * a.sin())
        })
        .collect();
    let neg: Vec<Vec2> = (0..n - n_pos)
        .map(|_| {
            let a = rng.random_range(-PI..PI);
            let r = rng.random_range(215.0..900.0);
            Vec2::new(960.0 + r * a.cos(), 540.0 + r * a.sin())
        })
        .collect();
    ProjectedScene::planar(&pos, &neg, 2.0).expect("valid scene")
}

fn time_estimate(scene: &ProjectedScene) -> f64 {
    let mut reps = 0u32;
    let start = Instant::now();
    while start.elapsed() < Duration::from_millis(300) || reps < 5 {
        std::hint::black_box(estimate_lasso_id(std::hint::black_box(scene), 1.0));
        reps += 1;
    }
    start.elapsed().as_secs_f64() / reps as f64
}

/// 20 box-shaped instances on a ground plane, `total` points overall.
fn city_block(total: usize, seed: u64) -> (PointCloud, InstanceSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(total);
    let mut instances = Vec::new();
    let per_box = 1000;
    for b in 0..20 {
        let cx = -40.0 + 20.0 * (b % 5) as f64 + rng.random_range(-3.0..3.0);
        let cy = -30.0 + 20.0 * (b / 5) as f64 + rng.random_range(-3.0..3.0);
        let (sx, sy, sz) = (rng.random_range(1.5..4.5), rng.random_range(1.5..2.5), rng.random_range(1.2..2.0));
        let start = points.len();
        for _ in 0..per_box {
            // Uniform sample on the box's side and top faces.
            let face = rng.random_range(0..5);
            let (u, v) = (rng.random::<f64>(), rng.random::<f64>());
            let p = match face {
                0 => Vec3::new(-sx / 2.0 + u * sx, -sy / 2.0, v * sz),
                1 => Vec3::new(-sx / 2.0 + u * sx, sy / 2.0, v * sz),
                2 => Vec3::new(-sx / 2.0, -sy / 2.0 + u * sy, v * sz),
                3 => Vec3::new(sx / 2.0, -sy / 2.0 + u * sy, v * sz),
                _ => Vec3::new(-sx / 2.0 + u * sx, -sy / 2.0 + v * sy, sz),
            };
            points.push(Vec3::new(cx, cy, 0.2) + p);
        }
        instances.push(Instance {
            category: 1,
            id: b + 1,
            points: (start..points.len()).collect(),
        });
    }
    let ground = total - points.len();
    let side = (ground as f64).sqrt().ceil() as usize;
    for k in 0..ground {
        let (i, j) = (k % side, k / side);
        points.push(Vec3::new(
            -55.0 + 110.0 * i as f64 / side as f64,
            -45.0 + 90.0 * j as f64 / side as f64,
            0.0,
        ));
    }
    let ground_start = 20 * per_box;
    instances.push(Instance {
        category: 2,
        id: 21,
        points: (ground_start..total).collect(),
    });
    (
        PointCloud::new(points).expect("finite"),
        InstanceSet {
            instances,
            noise: Vec::new(),
        },
    )
}

fn run_recommend(cloud: &PointCloud, set: &InstanceSet, threads: usize) -> Result<(Duration, usize), String> {
    let policy = RecommendPolicy {
        size_cutoff: 0.2,
        excluded_categories: BTreeSet::from([2]),
    };
    let job = || {
        let start = Instant::now();
        recommend_all(cloud, set, &SearchConfig::default(), &policy).map(|r| (start.elapsed(), r.len()))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())?;
    pool.install(job).map_err(|e| e.to_string())
}

fn complexity() -> Outcome {
    let t1 = time_estimate(&lasso_scene(1000, 1));
    let t8 = time_estimate(&lasso_scene(8000, 1));
    let growth = t8 / t1;
    ensure(growth <= 64.0, || format!("1k -> 8k runtime grew {growth:.1}x (> 64x)"))?;

    let (cloud, set) = city_block(100_000, 3);
    let (single, n1) = run_recommend(&cloud, &set, 1)?;
    ensure(n1 == 20, || format!("{n1} recommendations instead of 20"))?;
    ensure(single < Duration::from_secs(600), || format!("single-threaded run took {single:?}"))?;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let (parallel, _) = run_recommend(&cloud, &set, threads)?;
    ensure(parallel < Duration::from_secs(120), || {
        format!("parallel run on {threads} threads took {parallel:?}")
    })?;
    Ok(format!(
        "estimate 1k -> 8k grew {growth:.1}x; 100k points x 20 instances: {single:.1?} on 1 thread, {parallel:.1?} on {threads}"
    ))
}

// ---------------------------------------------------------------------------
// Sessions

fn session_integrity() -> Outcome {
    let mut total_edits = 0;
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let cloud = generate(SceneKind::BoxOnPlane, &SynthParams::default(), seed).map_err(|e| e.to_string())?;
        let pos = positives(&cloud);
        let (target, distance) = orbit_frame(&cloud, &pos, 1.0).map_err(|e| e.to_string())?;
        let categories = BTreeSet::from([1, 2, 3]);
        let initial: Vec<u32> = (0..cloud.len()).map(|_| rng.random_range(0..=3)).collect();
        let mut session = LabelSession::new(format!("fuzz{seed}"), "box", Viewport::default(), categories, initial)
            .map_err(|e| e.to_string())?;
        let mut edits = 0;
        while edits < 1000 {
            let vp = Viewpoint::new(
                target,
                rng.random_range(-PI..PI),
                rng.random_range(0.0..PI),
                distance * rng.random_range(0.3..3.0),
            )
            .map_err(|e| e.to_string())?;
            let nv = rng.random_range(3..9);
            let (cx, cy) = (rng.random_range(0.0..1920.0), rng.random_range(0.0..1080.0));
            let polygon: Vec<[f64; 2]> = (0..nv)
                .map(|_| [cx + rng.random_range(-600.0..600.0), cy + rng.random_range(-400.0..400.0)])
                .collect();
            let req = LassoRequest {
                viewpoint: vp,
                polygon,
                category: rng.random_range(1..=3),
                mode: if rng.random_bool(0.3) { LassoMode::Erase } else { LassoMode::Label },
            };
            session.apply_lasso(cloud.points(), req).map_err(|e| e.to_string())?;
            edits += 1;
            if edits % 100 == 0 {
                let text = encode_session(&session).map_err(|e| e.to_string())?;
                let back = decode_session(&text).map_err(|e| e.to_string())?;
                ensure(back == session, || format!("seed {seed}: round trip differs after {edits} edits"))?;
                ensure(labels_to_le_bytes(back.labels()) == labels_to_le_bytes(session.labels()), || {
                    "labels not byte-exact".into()
                })?;
                ensure(back.replay() == session.labels(), || format!("seed {seed}: replay differs after {edits} edits"))?;
            }
        }
        total_edits += edits;
    }
    Ok(format!("3 sessions, {total_edits} fuzzed edits: round trip, replay and label bytes all exact"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("closed-form curved tunnel vs quadrature", closed_form_vs_quadrature),
        ("dotted tunnel bound sandwich", bound_sandwich),
        ("dotted tunnel monotonicity in d", monotonicity),
        ("dotted tunnel limits", limits),
        ("grid contract", grid_contract),
        ("synthetic scene behaviour", synthetic_scenes),
        ("scale and argmin invariance", scale_and_argmin_invariance),
        ("clustering oracle and angular resolution", clustering_oracle),
        ("mIoU", miou_criterion),
        ("complexity", complexity),
        ("session integrity", session_integrity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
