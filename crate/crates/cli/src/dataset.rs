//! Locating images, feature files and ground truth on disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use vanishkit::geometry::Point2;
use vanishkit::raster::GrayImage;
use vanishkit::synthgen::{read_ground_truth, CameraParams};

pub const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

pub fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// One detection input.
#[derive(Debug, Clone)]
pub enum Item {
    Image {
        id: String,
        path: PathBuf,
    },
    /// A directory holding `features.csv` and possibly `image.png`, `camera.json`, `gt.txt`.
    Instance {
        id: String,
        dir: PathBuf,
    },
}

impl Item {
    pub fn id(&self) -> &str {
        match self {
            Item::Image { id, .. } | Item::Instance { id, .. } => id,
        }
    }
}

/// Images directly inside `dir` and instance subdirectories, sorted by id.
pub fn discover(dir: &Path) -> Result<Vec<Item>> {
    let mut items = BTreeMap::new();
    let entries = std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    for entry in entries {
        let path = entry.with_context(|| format!("reading {}", dir.display()))?.path();
        let item = if path.is_dir() {
            if path.join("features.csv").is_file() || path.join("image.png").is_file() {
                Item::Instance { id: name(&path), dir: path }
            } else {
                continue;
            }
        } else if is_image(&path) {
            Item::Image { id: stem(&path), path }
        } else {
            continue;
        };
        if let Some(prev) = items.insert(item.id().to_string(), item) {
            bail!("two inputs share the id {:?}", prev.id());
        }
    }
    Ok(items.into_values().collect())
}

/// Width and height for an instance directory: `camera.json`, then `image.png`.
pub fn instance_size(dir: &Path) -> Result<Option<(usize, usize)>> {
    let cam = dir.join("camera.json");
    if cam.is_file() {
        let c = CameraParams::<f64>::load_json(&cam)?;
        return Ok(Some((c.width.round() as usize, c.height.round() as usize)));
    }
    let img = dir.join("image.png");
    if img.is_file() {
        return Ok(Some(GrayImage::dimensions(&img).with_context(|| format!("reading {}", img.display()))?));
    }
    Ok(None)
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub vp: Point2<f64>,
    pub size: Option<(usize, usize)>,
}

/// Ground truth under `dir`: `<id>.txt` files and `<id>/gt.txt` instance directories.
///
/// Image size comes from `<id>/camera.json`, `<id>/image.png` or an image `<id>.<ext>` beside
/// the text file.
pub fn load_ground_truth(dir: &Path) -> Result<BTreeMap<String, GroundTruth>> {
    let mut out = BTreeMap::new();
    let entries = std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    for entry in entries {
        let path = entry.with_context(|| format!("reading {}", dir.display()))?.path();
        let (id, gt) = if path.is_dir() && path.join("gt.txt").is_file() {
            let vp = read_ground_truth(path.join("gt.txt"))?;
            (name(&path), GroundTruth { vp, size: instance_size(&path)? })
        } else if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            let id = stem(&path);
            let vp = read_ground_truth(&path)?;
            let mut size = None;
            for ext in IMAGE_EXTENSIONS {
                let img = dir.join(format!("{id}.{ext}"));
                if img.is_file() {
                    size = Some(GrayImage::dimensions(&img).with_context(|| format!("reading {}", img.display()))?);
                    break;
                }
            }
            (id, GroundTruth { vp, size })
        } else {
            continue;
        };
        if out.insert(id.clone(), gt).is_some() {
            bail!("ground truth for {id:?} found twice");
        }
    }
    if out.is_empty() {
        bail!("no ground truth found in {}", dir.display());
    }
    Ok(out)
}
