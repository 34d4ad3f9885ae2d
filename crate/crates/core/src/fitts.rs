//! Index-of-difficulty models for pointing, goal passing and tunnel steering,
//! and the dotted tunnel built from rendered point dots.
//!
//! All IDs are dimensionless and only ever used for ranking; the regression
//! constants `a`, `b` of `T = a + b·ID` are never estimated here.

use std::f64::consts::{FRAC_PI_2, LN_2};

use crate::error::{Error, Result};

fn check_width(width: f64) -> Result<()> {
    if width > 0.0 && !width.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain(format!("width must be positive, got {width}")))
    }
}

fn check_distance(distance: f64) -> Result<()> {
    if distance >= 0.0 && distance.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("distance must be non-negative, got {distance}")))
    }
}

/// Pointing: `log2(D/W + 1)`.
pub fn id_pointing(distance: f64, width: f64) -> Result<f64> {
    id_goal_passing(distance, width)
}

/// Goal passing: `log2(D/W + 1)` bits.
pub fn id_goal_passing(distance: f64, width: f64) -> Result<f64> {
    check_distance(distance)?;
    check_width(width)?;
    Ok((distance / width).ln_1p() / LN_2)
}

/// Fixed-width tunnel: `D/W`.
pub fn id_fixed_tunnel(distance: f64, width: f64) -> Result<f64> {
    check_distance(distance)?;
    check_width(width)?;
    Ok(distance / width)
}

/// Steering past a single dot of radius `r` with wall clearance `W`:
/// the closed form of `∫₀^{2r} dt / (W + 2r − 2√(r² − (r − t)²))`.
///
/// Accepts `W = +∞` (no obstacle), for which the ID is 0.
pub fn id_curved_tunnel(r: f64, w: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("dot radius must be positive, got {r}")));
    }
    check_width(w)?;
    Ok(curved_tunnel_unchecked(r, w))
}

#[inline]
pub(crate) fn curved_tunnel_unchecked(r: f64, w: f64) -> f64 {
    let ratio = 2.0 * r / (w + 2.0 * r);
    debug_assert!((0.0..1.0).contains(&ratio));
    (FRAC_PI_2 + ratio.asin()) / (1.0 - ratio * ratio).sqrt() - FRAC_PI_2
}

/// Width of the channel left beside a dot of radius `r` at arc position `t`.
pub fn curved_tunnel_width(r: f64, w: f64, t: f64) -> f64 {
    let h = (r * r - (r - t) * (r - t)).max(0.0);
    w + 2.0 * r - 2.0 * h.sqrt()
}

/// Tunnel width as a function of arc position.
pub enum WidthProfile {
    /// Sampled `(s, W)` pairs, linearly interpolated. `s` starts at 0 and is
    /// strictly increasing.
    Sampled(Vec<(f64, f64)>),
    /// Analytic width on `[0, length]`.
    Function {
        length: f64,
        width: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for WidthProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WidthProfile::Sampled(s) => f.debug_tuple("Sampled").field(s).finish(),
            WidthProfile::Function { length, .. } => {
                f.debug_struct("Function").field("length", length).finish_non_exhaustive()
            }
        }
    }
}

impl WidthProfile {
    pub fn sampled(samples: Vec<(f64, f64)>) -> Result<Self> {
        let Some(&(s0, _)) = samples.first() else {
            return Err(Error::Domain("width profile needs at least one sample".into()));
        };
        if s0 != 0.0 {
            return Err(Error::Domain("width profile must start at s = 0".into()));
        }
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0) || !w[1].0.is_finite()) {
            return Err(Error::Domain("sample positions must be strictly increasing".into()));
        }
        if let Some((s, w)) = samples.iter().find(|(_, w)| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Domain(format!("non-positive width {w} at s = {s}")));
        }
        Ok(WidthProfile::Sampled(samples))
    }

    pub fn constant(length: f64, width: f64) -> Result<Self> {
        check_distance(length)?;
        Self::sampled(if length > 0.0 {
            vec![(0.0, width), (length, width)]
        } else {
            vec![(0.0, width)]
        })
    }

    pub fn function(length: f64, width: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        check_distance(length)?;
        Ok(WidthProfile::Function {
            length,
            width: Box::new(width),
        })
    }

    pub fn total_length(&self) -> f64 {
        match self {
            WidthProfile::Sampled(s) => s.last().map_or(0.0, |p| p.0),
            WidthProfile::Function { length, .. } => *length,
        }
    }

    pub fn width_at(&self, s: f64) -> f64 {
        match self {
            WidthProfile::Function { width, .. } => width(s),
            WidthProfile::Sampled(samples) => {
                let i = samples.partition_point(|p| p.0 <= s);
                if i == 0 {
                    return samples[0].1;
                }
                if i == samples.len() {
                    return samples[i - 1].1;
                }
                let (s0, w0) = samples[i - 1];
                let (s1, w1) = samples[i];
                w0 + (w1 - w0) * (s - s0) / (s1 - s0)
            }
        }
    }
}

/// Relative tolerance of the steering-law quadrature.
pub const QUADRATURE_REL_TOL: f64 = 1e-9;

/// General tunnel: `∫ ds / W(s)` over the profile, by adaptive Simpson.
pub fn id_general_tunnel(profile: &WidthProfile) -> Result<f64> {
    let length = profile.total_length();
    match profile {
        WidthProfile::Sampled(samples) => samples
            .windows(2)
            .map(|w| integrate_reciprocal(|s| profile.width_at(s), w[0].0, w[1].0))
            .sum(),
        WidthProfile::Function { width, .. } => integrate_reciprocal(width, 0.0, length),
    }
}

fn integrate_reciprocal(width: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    let mut bad = None;
    let value = adaptive_simpson(
        |s| {
            let w = width(s);
            if !(w > 0.0 && w.is_finite()) {
                bad.get_or_insert((s, w));
            }
            1.0 / w
        },
        a,
        b,
        QUADRATURE_REL_TOL,
    );
    match bad {
        Some((s, w)) => Err(Error::Domain(format!("non-positive width {w} at s = {s}"))),
        None => Ok(value),
    }
}

const SIMPSON_MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` on `[a, b]` to relative tolerance
/// `rel_tol` (measured against a coarse first estimate).
pub fn adaptive_simpson(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // Seed the absolute tolerance from a 64-panel composite rule so a lucky
    // coarse estimate cannot loosen it.
    let panels = 64;
    let h = (b - a) / panels as f64;
    let coarse: f64 = (0..panels)
        .map(|i| {
            let x0 = a + i as f64 * h;
            h / 6.0 * (f(x0) + 4.0 * f(x0 + 0.5 * h) + f(x0 + h))
        })
        .sum();
    let tol = rel_tol * coarse.abs().max(f64::MIN_POSITIVE);
    simpson_step(&mut f, a, b, fa, fm, fb, whole, tol, SIMPSON_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Parameters of a straight tunnel walled by `k + 1` dots of radius `r`
/// separated by `k` gaps of length `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DottedTunnelParams {
    gaps: u32,
    wall_clearance: f64,
    dot_radius: f64,
    gap_length: f64,
    weight: f64,
}

impl DottedTunnelParams {
    pub fn new(gaps: u32, wall_clearance: f64, dot_radius: f64, gap_length: f64, weight: f64) -> Result<Self> {
        if gaps == 0 {
            return Err(Error::Domain("a dotted tunnel needs at least one gap".into()));
        }
        if !(wall_clearance > 0.0 && wall_clearance.is_finite()) {
            return Err(Error::Domain(format!("wall clearance must be positive, got {wall_clearance}")));
        }
        if !(dot_radius > 0.0 && dot_radius.is_finite()) {
            return Err(Error::Domain(format!("dot radius must be positive, got {dot_radius}")));
        }
        check_distance(gap_length)?;
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::Domain(format!("gap weight must be positive, got {weight}")));
        }
        Ok(Self {
            gaps,
            wall_clearance,
            dot_radius,
            gap_length,
            weight,
        })
    }

    /// Tunnel with a fixed total length `D = 2r(k+1) + dk`, solving for `d`.
    pub fn with_total_length(gaps: u32, wall_clearance: f64, dot_radius: f64, total: f64, weight: f64) -> Result<Self> {
        if gaps == 0 {
            return Err(Error::Domain("a dotted tunnel needs at least one gap".into()));
        }
        let k = gaps as f64;
        let d = (total - 2.0 * dot_radius * (k + 1.0)) / k;
        if d < 0.0 {
            return Err(Error::Domain(format!(
                "{} dots of radius {dot_radius} do not fit in length {total}",
                gaps + 1
            )));
        }
        Self::new(gaps, wall_clearance, dot_radius, d.max(0.0), weight)
    }

    pub fn gaps(&self) -> u32 {
        self.gaps
    }

    pub fn wall_clearance(&self) -> f64 {
        self.wall_clearance
    }

    pub fn dot_radius(&self) -> f64 {
        self.dot_radius
    }

    pub fn gap_length(&self) -> f64 {
        self.gap_length
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// `D = 2r(k+1) + dk`.
    pub fn total_length(&self) -> f64 {
        let k = self.gaps as f64;
        2.0 * self.dot_radius * (k + 1.0) + self.gap_length * k
    }
}

/// `(k+1)·ID₁ + m·k·log2(d/(W+2r) + 1)`.
pub fn id_dotted_tunnel(p: &DottedTunnelParams) -> f64 {
    let k = p.gaps as f64;
    (k + 1.0) * curved_tunnel_unchecked(p.dot_radius, p.wall_clearance) + p.weight * k * gap_term(p)
}

fn gap_term(p: &DottedTunnelParams) -> f64 {
    (p.gap_length / (p.wall_clearance + 2.0 * p.dot_radius)).ln_1p() / LN_2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunnelBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Lower bound `m·k·log2((D − 2r(k+1)) / (k(W+2r)) + 1)` and upper bound
/// `D/W` of the dotted-tunnel ID.
///
/// The upper bound only holds while `m ≤ ln 2·(W+2r)/W`; see
/// [`upper_bound_holds`].
pub fn dotted_tunnel_bounds(p: &DottedTunnelParams) -> TunnelBounds {
    let k = p.gaps as f64;
    let d_total = p.total_length();
    let open = (d_total - 2.0 * p.dot_radius * (k + 1.0)).max(0.0);
    let lower = p.weight * k * (open / (k * (p.wall_clearance + 2.0 * p.dot_radius))).ln_1p() / LN_2;
    TunnelBounds {
        lower,
        upper: d_total / p.wall_clearance,
    }
}

/// Whether the gap weight is small enough for `ID ≤ D/W` to be guaranteed:
/// `m·log2(1 + x) ≤ x·(W+2r)/W` must hold for every `x ≥ 0`, i.e.
/// `m ≤ ln 2·(W+2r)/W`.
pub fn upper_bound_holds(p: &DottedTunnelParams) -> bool {
    p.weight <= LN_2 * (p.wall_clearance + 2.0 * p.dot_radius) / p.wall_clearance
}
