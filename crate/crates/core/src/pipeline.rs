//! End-to-end detection: features, visual words, progressions, implicit lines, explicit
//! segments and weighted RANSAC.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::clustering::{build_distance_matrix, cut_dendrogram, single_linkage, CutPolicy};
use crate::error::{Error, Result};
use crate::features::{extract_features, Feature, FeatureParams};
use crate::geometry::{OrientedLine, Point2};
use crate::linefit::{build_pool, detect_segments, fit_oriented_line, LineSegment, SegmentParams};
use crate::ransac::{self, RansacConfig};
use crate::raster::GrayImage;
use crate::scalar::Scalar;
use crate::selection::{forward_select, SelectionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplicitSource {
    /// Detect segments in the input image.
    Builtin,
    /// Use segments supplied with the input.
    File,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub explicit_lines: ExplicitSource,
    pub features: FeatureParams,
    pub cluster: CutPolicy,
    pub selection: SelectionConfig,
    pub segments: SegmentParams,
    pub ransac: RansacConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            explicit_lines: ExplicitSource::Builtin,
            features: FeatureParams::default(),
            cluster: CutPolicy::default(),
            selection: SelectionConfig::default(),
            segments: SegmentParams::default(),
            ransac: RansacConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.cluster.validate()?;
        self.selection.validate()?;
        self.ransac.validate()?;
        if !(self.segments.min_length >= 0.0 && self.segments.gradient_threshold >= 0.0) {
            return Err(Error::Config("segment min_length and gradient_threshold must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// What the pipeline runs on.
#[derive(Debug, Clone)]
pub enum PipelineInput<'a, T> {
    Image(&'a GrayImage),
    /// Precomputed features on an image of the given width and height.
    Features {
        features: &'a [Feature<T>],
        width: usize,
        height: usize,
    },
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub extract: f64,
    pub cluster: f64,
    pub select: f64,
    pub fit: f64,
    pub segments: f64,
    pub ransac: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutput<T> {
    pub image_id: String,
    /// Finite vanishing point, or `None` when detection failed or the estimate is at infinity.
    pub vp: Option<Point2<T>>,
    pub n_features: usize,
    pub n_groups: usize,
    pub n_implicit: usize,
    pub n_explicit: usize,
    pub n_inliers: usize,
    /// `stage: reason` when no vanishing point was produced.
    pub failure: Option<String>,
    pub timings: StageTimings,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Implicit lines from precomputed features.
pub fn implicit_lines<T: Scalar>(
    features: &[Feature<T>],
    config: &PipelineConfig,
    timings: &mut StageTimings,
) -> (Vec<OrientedLine<T>>, usize) {
    if features.len() < 3 {
        return (Vec::new(), 0);
    }
    let t = Instant::now();
    let groups = match build_distance_matrix(features) {
        Ok(dm) => cut_dendrogram(&single_linkage(&dm), &config.cluster),
        Err(_) => Vec::new(),
    };
    timings.cluster = ms(t);
    let t = Instant::now();
    let subsets: Vec<_> = groups.iter().flat_map(|g| forward_select(features, g, &config.selection)).collect();
    timings.select = ms(t);
    let t = Instant::now();
    let lines = subsets.iter().filter_map(|s| fit_oriented_line(s, features).ok()).collect();
    timings.fit = ms(t);
    (lines, groups.len())
}

/// Runs every stage. A stage that leaves too few lines yields `vp = None` rather than an error;
/// only invalid configuration and malformed input are errors.
pub fn detect_pipeline<T: Scalar>(
    image_id: &str,
    input: PipelineInput<'_, T>,
    segments: Option<&[LineSegment<T>]>,
    config: &PipelineConfig,
) -> Result<DetectionOutput<T>> {
    config.validate()?;
    let start = Instant::now();
    let mut timings = StageTimings::default();
    let mut out = DetectionOutput {
        image_id: image_id.to_string(),
        vp: None,
        n_features: 0,
        n_groups: 0,
        n_implicit: 0,
        n_explicit: 0,
        n_inliers: 0,
        failure: None,
        timings,
    };

    let (owned, image, (width, height)) = match input {
        PipelineInput::Image(img) => {
            let t = Instant::now();
            let f = match extract_features::<T>(img, &config.features) {
                Ok(f) => f,
                Err(Error::ImageTooSmall { .. }) => Vec::new(),
                Err(e) => return Err(e),
            };
            timings.extract = ms(t);
            (Some(f), Some(img), (img.width(), img.height()))
        }
        PipelineInput::Features { width, height, .. } => (None, None, (width, height)),
    };
    let features: &[Feature<T>] = match (&owned, &input) {
        (Some(f), _) => f,
        (None, PipelineInput::Features { features, .. }) => features,
        (None, PipelineInput::Image(_)) => unreachable!("image input always extracts"),
    };
    out.n_features = features.len();

    let (implicit, n_groups) = implicit_lines(features, config, &mut timings);
    out.n_groups = n_groups;

    let t = Instant::now();
    let explicit: Vec<LineSegment<T>> = match (segments, config.explicit_lines, image) {
        (Some(s), _, _) => s.to_vec(),
        (None, ExplicitSource::Builtin, Some(img)) => detect_segments(img, &config.segments),
        _ => Vec::new(),
    };
    timings.segments = ms(t);
    out.n_implicit = implicit.len();
    out.n_explicit = explicit.len();

    let finish = |mut out: DetectionOutput<T>, mut timings: StageTimings| {
        timings.total = ms(start);
        out.timings = timings;
        Ok(out)
    };

    let pool = match build_pool(implicit, &explicit) {
        Ok(p) => p,
        Err(e @ Error::InsufficientLines) => {
            out.failure = Some(format!("pool: {e}"));
            return finish(out, timings);
        }
        Err(e) => return Err(e),
    };

    let mut rc = config.ransac.clone();
    rc.seed = config.seed;
    if width > 0 && height > 0 {
        rc.image_size = Some((width as f64, height as f64));
    }
    let t = Instant::now();
    let result = ransac::run(&pool, &rc);
    timings.ransac = ms(t);
    match result {
        Ok(r) => {
            out.n_inliers = r.inliers.len();
            match r.vp.to_point() {
                Some(p) if p.is_finite() => out.vp = Some(p),
                _ => out.failure = Some("ransac: vanishing point at infinity".into()),
            }
        }
        Err(e @ (Error::InsufficientLines | Error::WeightCollapse | Error::NoVanishingPoint)) => {
            out.failure = Some(format!("ransac: {e}"));
        }
        Err(e) => return Err(e),
    }
    finish(out, timings)
}
