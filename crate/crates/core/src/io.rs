//! Dataset manifests, point and label files, downsampling.
//!
//! Point files are either KITTI-style binary (little-endian `f32` records of
//! `x, y, z, intensity`) or CSV with `x, y, z` columns and an optional
//! header line. Label files hold one `u32` per point: ASCII, one per line,
//! for `.txt` and `.csv` paths, packed little-endian otherwise.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};

const RECORD_BYTES: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CloudFormat {
    #[default]
    Bin,
    Csv,
}

/// JSON description of one dataset. Relative paths resolve against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub cloud_path: PathBuf,
    #[serde(default)]
    pub format: CloudFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_label_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_label_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_label_path: Option<PathBuf>,
    #[serde(default)]
    pub categories: BTreeMap<u32, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular_resolution: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_categories: Option<BTreeSet<u32>>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if let Some(theta) = m.angular_resolution {
            if !(theta > 0.0 && theta.is_finite()) {
                return Err(Error::Domain(format!("manifest angular resolution must be positive, got {theta}")));
            }
        }
        Ok(m)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Category id for a name in the category table.
    pub fn category_id(&self, name: &str) -> Option<u32> {
        self.categories.iter().find(|(_, n)| n.as_str() == name).map(|(&id, _)| id)
    }

    /// Background categories from the manifest, else every category named
    /// "ground".
    pub fn background(&self) -> BTreeSet<u32> {
        self.background_categories
            .clone()
            .unwrap_or_else(|| self.category_id("ground").into_iter().collect())
    }
}

/// A loaded dataset: points with their semantic and instance labels, plus
/// ground truth for evaluation.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub cloud: PointCloud,
    pub ground_truth: Option<Vec<u32>>,
}

/// Loads the cloud and every label file the manifest names.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<Dataset> {
    let cloud_path = manifest.resolve(&manifest.cloud_path);
    let mut cloud = match manifest.format {
        CloudFormat::Bin => read_points_bin(&cloud_path)?,
        CloudFormat::Csv => read_points_csv(&cloud_path)?,
    };
    let n = cloud.len();
    if let Some(p) = &manifest.semantic_label_path {
        cloud = cloud.with_semantic_labels(read_labels(&manifest.resolve(p), n)?)?;
    }
    if let Some(p) = &manifest.instance_label_path {
        cloud = cloud.with_instance_labels(read_labels(&manifest.resolve(p), n)?)?;
    }
    let ground_truth = match &manifest.ground_truth_label_path {
        Some(p) => Some(read_labels(&manifest.resolve(p), n)?),
        None => None,
    };
    Ok(Dataset {
        manifest: manifest.clone(),
        cloud,
        ground_truth,
    })
}

pub fn load_cloud(manifest: &DatasetManifest) -> Result<PointCloud> {
    Ok(load_dataset(manifest)?.cloud)
}

fn check_finite(path: &Path, points: &[Vec3]) -> Result<()> {
    match points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
        Some(index) => Err(Error::NonFinite {
            path: path.to_path_buf(),
            index,
        }),
        None => Ok(()),
    }
}

/// Reads `x, y, z, intensity` float records; intensity is dropped.
pub fn read_points_bin(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() as u64 % RECORD_BYTES != 0 {
        return Err(Error::RecordSize {
            path: path.to_path_buf(),
            size: bytes.len() as u64,
            record: RECORD_BYTES,
        });
    }
    let points: Vec<Vec3> = bytes
        .chunks_exact(RECORD_BYTES as usize)
        .map(|r| {
            let f = |i: usize| f32::from_le_bytes(r[4 * i..4 * i + 4].try_into().expect("4-byte field")) as f64;
            Vec3::new(f(0), f(1), f(2))
        })
        .collect();
    check_finite(path, &points)?;
    PointCloud::new(points)
}

/// Writes binary records with the given intensities (zeros when `None`).
pub fn write_points_bin(path: &Path, points: &[Vec3], intensity: Option<&[f32]>) -> Result<()> {
    let mut out = Vec::with_capacity(points.len() * RECORD_BYTES as usize);
    for (i, p) in points.iter().enumerate() {
        for c in p.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        out.extend_from_slice(&intensity.map_or(0.0, |v| v[i]).to_le_bytes());
    }
    write_atomic(path, &out)
}

/// Reads the first three columns of a CSV file. A first row that does not
/// parse as numbers is taken as a header.
pub fn read_points_csv(path: &Path) -> Result<PointCloud> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut points = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(row + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().take(3).map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) if v.len() == 3 => {
                let p = Vec3::new(v[0], v[1], v[2]);
                if !p.iter().all(|c| c.is_finite()) {
                    return Err(Error::NonFinite {
                        path: path.to_path_buf(),
                        index: points.len(),
                    });
                }
                points.push(p);
            }
            Err(_) if row == 0 => continue,
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: "expected three numeric columns x,y,z".into(),
                })
            }
        }
    }
    PointCloud::new(points)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

pub fn write_points_csv(path: &Path, points: &[Vec3]) -> Result<()> {
    let mut out = String::from("x,y,z\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.x, p.y, p.z));
    }
    write_atomic(path, out.as_bytes())
}

fn is_ascii_label_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("txt" | "csv")
    )
}

/// Reads a label file and checks it has `expected` entries.
pub fn read_labels(path: &Path, expected: usize) -> Result<Vec<u32>> {
    let labels = read_label_file(path)?;
    if labels.len() != expected {
        return Err(Error::LabelCount {
            path: path.to_path_buf(),
            labels: labels.len(),
            points: expected,
        });
    }
    Ok(labels)
}

/// Reads every label in a file without a count check.
pub fn read_label_file(path: &Path) -> Result<Vec<u32>> {
    Ok(if is_ascii_label_path(path) {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim().parse::<u32>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() % 4 != 0 {
            return Err(Error::RecordSize {
                path: path.to_path_buf(),
                size: bytes.len() as u64,
                record: 4,
            });
        }
        bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4-byte label")))
            .collect()
    })
}

pub fn write_labels(path: &Path, labels: &[u32]) -> Result<()> {
    if is_ascii_label_path(path) {
        let mut out = String::with_capacity(labels.len() * 3);
        for l in labels {
            out.push_str(&l.to_string());
            out.push('\n');
        }
        write_atomic(path, out.as_bytes())
    } else {
        write_atomic(path, &labels_to_le_bytes(labels))
    }
}

pub fn labels_to_le_bytes(labels: &[u32]) -> Vec<u8> {
    labels.iter().flat_map(|l| l.to_le_bytes()).collect()
}

/// Writes to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::InvalidInput(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

/// Uniform sample of `target` points without replacement, kept in original
/// order. Clouds already small enough are returned unchanged.
pub fn downsample(cloud: &PointCloud, target: usize, seed: u64) -> Result<(PointCloud, Vec<usize>)> {
    if target == 0 {
        return Err(Error::Domain("downsample target must be at least 1".into()));
    }
    if cloud.len() <= target {
        return Ok((cloud.clone(), (0..cloud.len()).collect()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, cloud.len(), target).into_vec();
    idx.sort_unstable();
    Ok((cloud.subset(&idx), idx))
}
