use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::Args;
use fittsview_core::pipeline::PipelineConfig;
use fittsview_core::synth::SynthParams;
use serde::Deserialize;

/// Bad flags, config or paths: exits with code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

/// Contents of the TOML file named by `--config` or `FITTSVIEW_CONFIG`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub pipeline: PipelineConfig,
    pub synth: SynthParams,
    pub serve: ServeFile,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeFile {
    pub host: String,
    pub port: u16,
    pub manifests: Vec<PathBuf>,
    pub store_dir: Option<PathBuf>,
}

impl Default for ServeFile {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            manifests: Vec::new(),
            store_dir: None,
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| input_error(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| input_error(format!("config {}: {e}", path.display())))?;
        // Relative manifest and store paths follow the config file.
        let base = path.parent().unwrap_or(Path::new(""));
        for m in &mut cfg.serve.manifests {
            if m.is_relative() {
                *m = base.join(&*m);
            }
        }
        if let Some(d) = cfg.serve.store_dir.as_mut().filter(|d| d.is_relative()) {
            *d = base.join(&*d);
        }
        Ok(cfg)
    }
}

/// Angles in radians, or as `pi`, `pi/N`, `K*pi/N`, `-pi/N`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim().to_ascii_lowercase();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let (sign, t) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, t.as_str()),
    };
    let (num, den) = t.split_once('/').unwrap_or((t, "1"));
    let k = match num.strip_suffix("pi").map(|k| k.trim_end_matches('*')) {
        Some("") => 1.0,
        Some(k) => k.parse::<f64>().map_err(|_| format!("bad angle {s:?}"))?,
        None => return Err(format!("bad angle {s:?}")),
    };
    let den: f64 = den.parse().map_err(|_| format!("bad angle {s:?}"))?;
    Ok(sign * k * PI / den)
}

fn parse_viewport(s: &str) -> Result<(f64, f64), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("viewport must look like 1920x1080, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("viewport {s:?}: {e}"));
    Ok((parse(w)?, parse(h)?))
}

/// Pipeline flags shared by every command; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Tuning {
    /// Gap weight m.
    #[arg(long, global = true)]
    pub m: Option<f64>,
    /// Longitude stride, radians or e.g. pi/12.
    #[arg(long, global = true, value_parser = parse_angle)]
    pub alpha_stride: Option<f64>,
    /// Polar stride, radians or e.g. pi/12.
    #[arg(long, global = true, value_parser = parse_angle)]
    pub beta_stride: Option<f64>,
    /// Viewport size in pixels, WxH.
    #[arg(long, global = true, value_parser = parse_viewport, value_name = "WxH")]
    pub viewport: Option<(f64, f64)>,
    /// Rendered point radius in pixels.
    #[arg(long, global = true)]
    pub dot_radius: Option<f64>,
    #[arg(long, global = true)]
    pub min_pts: Option<usize>,
    #[arg(long, global = true)]
    pub eps_factor: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Skip instances holding more than this fraction of the cloud.
    #[arg(long, global = true)]
    pub size_cutoff: Option<f64>,
    /// Category never recommended; repeat for several.
    #[arg(long = "exclude-category", global = true, value_name = "ID")]
    pub exclude_category: Vec<u32>,
    /// Downsample larger clouds to this many points.
    #[arg(long, global = true)]
    pub max_points: Option<usize>,
}

impl Tuning {
    /// Flags over `base`, validated.
    pub fn apply(&self, base: &PipelineConfig) -> anyhow::Result<PipelineConfig> {
        let mut c = base.clone();
        if let Some(v) = self.m {
            c.m = v;
        }
        if let Some(v) = self.alpha_stride {
            c.alpha_stride = v;
        }
        if let Some(v) = self.beta_stride {
            c.beta_stride = v;
        }
        if let Some((w, h)) = self.viewport {
            c.viewport.width_px = w;
            c.viewport.height_px = h;
        }
        if let Some(v) = self.dot_radius {
            c.viewport.dot_radius_px = v;
        }
        if let Some(v) = self.min_pts {
            c.min_pts = v;
        }
        if let Some(v) = self.eps_factor {
            c.eps_factor = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.size_cutoff {
            c.size_cutoff = v;
        }
        if !self.exclude_category.is_empty() {
            c.excluded_categories = Some(self.exclude_category.iter().copied().collect::<BTreeSet<_>>());
        }
        if self.max_points.is_some() {
            c.max_points = self.max_points;
        }
        c.validate()?;
        Ok(c)
    }
}
