use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use vanishkit::eval::{
    auc_at, curve, curves_svg, default_grid, median_error, predictions_csv, read_predictions, significance, stress_csv,
    stress_test, write_curve, write_results, EvalRecord, Prediction, StressInstance,
};
use vanishkit::features::load_features;
use vanishkit::geometry::{angular_error, VpEstimate};
use vanishkit::linefit::load_segments;
use vanishkit::pipeline::{detect_pipeline, DetectionOutput, PipelineConfig, PipelineInput};
use vanishkit::raster::GrayImage;
use vanishkit::synthgen::{read_ground_truth, synthesize, write_instance, NoiseConfig, SceneConfig};

use crate::dataset::{discover, instance_size, is_image, load_ground_truth, GroundTruth, Item};
use crate::{BenchArgs, CmdResult, CompareArgs, DetectArgs, EvalArgs, Failure, StressArgs, SynthArgs};

pub const SEED_ENV: &str = "VANISHKIT_SEED";

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

/// `--seed`, then `VANISHKIT_SEED`.
fn resolve_seed(arg: Option<u64>) -> Result<Option<u64>, Failure> {
    if arg.is_some() {
        return Ok(arg);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => match v.trim().parse() {
            Ok(s) => Ok(Some(s)),
            Err(_) => usage(format!("{SEED_ENV} must be an unsigned integer, got {v:?}")),
        },
        Err(_) => Ok(None),
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<PipelineConfig, Failure> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = resolve_seed(seed)? {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    if jobs == Some(0) {
        return usage("--jobs must be at least 1");
    }
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build()?)
}

fn parse_size(s: Option<&str>) -> Result<Option<(usize, usize)>, Failure> {
    let Some(s) = s else { return Ok(None) };
    let parsed = s
        .split_once(['x', 'X'])
        .and_then(|(w, h)| Some((w.trim().parse().ok()?, h.trim().parse().ok()?)))
        .filter(|(w, h): &(usize, usize)| *w > 0 && *h > 0);
    match parsed {
        Some(v) => Ok(Some(v)),
        None => usage(format!("--size expects WIDTHxHEIGHT, got {s:?}")),
    }
}

fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn detect_item(item: &Item, cfg: &PipelineConfig, use_images: bool) -> anyhow::Result<DetectionOutput<f64>> {
    match item {
        Item::Image { id, path } => {
            let img = GrayImage::open(path).with_context(|| format!("decoding {}", path.display()))?;
            Ok(detect_pipeline(id, PipelineInput::Image(&img), None, cfg)?)
        }
        Item::Instance { id, dir } => {
            let seg_path = dir.join("segments.csv");
            let segments = if seg_path.is_file() { Some(load_segments::<f64>(&seg_path)?) } else { None };
            let features_path = dir.join("features.csv");
            if features_path.is_file() && !(use_images && dir.join("image.png").is_file()) {
                let features = load_features::<f64>(&features_path)?;
                let (width, height) = instance_size(dir)?
                    .ok_or_else(|| anyhow!("{}: no camera.json or image.png to size the image", dir.display()))?;
                let input = PipelineInput::Features { features: &features, width, height };
                Ok(detect_pipeline(id, input, segments.as_deref(), cfg)?)
            } else {
                let path = dir.join("image.png");
                let img = GrayImage::open(&path).with_context(|| format!("decoding {}", path.display()))?;
                Ok(detect_pipeline(id, PipelineInput::Image(&img), segments.as_deref(), cfg)?)
            }
        }
    }
}

fn single_input(args: &DetectArgs, cfg: &PipelineConfig) -> anyhow::Result<DetectionOutput<f64>> {
    let path = &args.input;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let segments = match &args.segments {
        Some(p) => Some(load_segments::<f64>(p)?),
        None => None,
    };
    match &args.features {
        Some(fp) => {
            let features = load_features::<f64>(fp)?;
            let (width, height) = GrayImage::dimensions(path).with_context(|| format!("reading {}", path.display()))?;
            let input = PipelineInput::Features { features: &features, width, height };
            Ok(detect_pipeline(&id, input, segments.as_deref(), cfg)?)
        }
        None => {
            let img = GrayImage::open(path).with_context(|| format!("decoding {}", path.display()))?;
            Ok(detect_pipeline(&id, PipelineInput::Image(&img), segments.as_deref(), cfg)?)
        }
    }
}

fn timings_csv(outputs: &[DetectionOutput<f64>]) -> String {
    let mut s = String::from("imageId,totalMs,extractMs,clusterMs,selectMs,fitMs,segmentsMs,ransacMs\n");
    for o in outputs {
        let t = &o.timings;
        let _ = writeln!(
            s,
            "{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}",
            o.image_id, t.total, t.extract, t.cluster, t.select, t.fit, t.segments, t.ransac
        );
    }
    s
}

pub fn detect(args: DetectArgs) -> CmdResult {
    let cfg = load_config(args.config.as_deref(), args.seed)?;
    let input = &args.input;
    let is_instance = input.is_dir() && (input.join("features.csv").is_file() || input.join("image.png").is_file());
    let outputs: Vec<DetectionOutput<f64>> = if input.is_dir() && !is_instance {
        if args.features.is_some() || args.segments.is_some() {
            return usage("--features and --segments apply to a single image, not a directory");
        }
        let items = discover(input)?;
        if items.is_empty() {
            return Err(anyhow!("no images or instance directories in {}", input.display()).into());
        }
        let pool = thread_pool(args.jobs)?;
        pool.install(|| {
            items
                .par_iter()
                .map(|it| detect_item(it, &cfg, args.use_images).with_context(|| format!("image {}", it.id())))
                .collect::<anyhow::Result<Vec<_>>>()
        })?
    } else if is_instance {
        if args.features.is_some() || args.segments.is_some() {
            return usage("--features and --segments apply to a single image, not an instance directory");
        }
        let id = input.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        vec![detect_item(&Item::Instance { id, dir: input.clone() }, &cfg, args.use_images)?]
    } else if input.is_file() {
        if !is_image(input) {
            return Err(anyhow!("{} is not a PNG or JPEG image", input.display()).into());
        }
        vec![single_input(&args, &cfg)?]
    } else {
        return Err(anyhow!("{} does not exist", input.display()).into());
    };

    let preds: Vec<Prediction> =
        outputs.iter().map(|o| Prediction { image_id: o.image_id.clone(), vp: o.vp }).collect();
    emit(&predictions_csv(&preds), args.out.as_deref())?;
    if let Some(p) = &args.timings {
        emit(&timings_csv(&outputs), Some(p))?;
    }
    for o in &outputs {
        if let Some(f) = &o.failure {
            eprintln!("{}: no vanishing point ({f})", o.image_id);
        }
    }
    let found = outputs.iter().filter(|o| o.vp.is_some()).count();
    eprintln!("detected {found}/{} vanishing points", outputs.len());
    Ok(())
}

pub fn synth(args: SynthArgs) -> CmdResult {
    if args.scenes == 0 {
        return usage("--scenes must be at least 1");
    }
    for (name, v) in
        [("--noise", args.noise), ("--size-jitter", args.size_jitter), ("--descriptor-noise", args.descriptor_noise)]
    {
        if !(v.is_finite() && v >= 0.0) {
            return usage(format!("{name} must be a nonnegative number"));
        }
    }
    let seed = resolve_seed(args.seed)?.unwrap_or(0);
    let scene_cfg: SceneConfig = match &args.scene_config {
        Some(p) => SceneConfig::load(p)?,
        None => SceneConfig::default(),
    };
    let noise =
        NoiseConfig { pos_sigma: args.noise, size_jitter: args.size_jitter, descriptor_sigma: args.descriptor_noise };
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let pool = thread_pool(args.jobs)?;
    pool.install(|| {
        (0..args.scenes).into_par_iter().try_for_each(|i| -> anyhow::Result<()> {
            let inst = synthesize::<f64>(&scene_cfg, &noise, seed, i as u64).with_context(|| format!("scene {i}"))?;
            write_instance(&inst, args.out.join(format!("scene_{i:04}")), args.render)?;
            Ok(())
        })
    })?;
    eprintln!("wrote {} scenes to {}", args.scenes, args.out.display());
    Ok(())
}

fn read_timings(path: &Path) -> anyhow::Result<BTreeMap<String, f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let (Some(id), Some(total)) = (cols.next(), cols.next()) else {
            return Err(anyhow!("{}:{}: expected imageId,totalMs", path.display(), i + 1));
        };
        let total: f64 =
            total.trim().parse().map_err(|_| anyhow!("{}:{}: invalid runtime {total:?}", path.display(), i + 1))?;
        out.insert(id.trim().to_string(), total);
    }
    Ok(out)
}

fn score(
    preds: &[Prediction],
    gts: &BTreeMap<String, GroundTruth>,
    size: Option<(usize, usize)>,
    timings: &BTreeMap<String, f64>,
) -> anyhow::Result<Vec<EvalRecord>> {
    let by_id: BTreeMap<&str, &Prediction> = preds.iter().map(|p| (p.image_id.as_str(), p)).collect();
    for id in by_id.keys() {
        if !gts.contains_key(*id) {
            eprintln!("warning: prediction for {id:?} has no ground truth");
        }
    }
    gts.iter()
        .map(|(id, gt)| {
            let (w, h) = gt.size.or(size).ok_or_else(|| anyhow!("image size unknown for {id:?}; pass --size WxH"))?;
            let error_deg = match by_id.get(id.as_str()).and_then(|p| p.vp) {
                Some(vp) => {
                    Some(angular_error(&VpEstimate::finite(vp), &VpEstimate::finite(gt.vp), w as f64, h as f64, None)?)
                }
                None => None,
            };
            Ok(EvalRecord { image_id: id.clone(), error_deg, runtime_ms: timings.get(id).copied().unwrap_or(0.0) })
        })
        .collect()
}

fn summary(records: &[EvalRecord]) -> anyhow::Result<Vec<(String, f64)>> {
    let c = curve(records, &default_grid())?;
    let mut rows = Vec::new();
    for t in [2.0, 5.0, 10.0] {
        rows.push((format!("AA@{t}"), auc_at(&c, t)?));
    }
    rows.push(("median".to_string(), median_error(records)?));
    Ok(rows)
}

pub fn eval(args: EvalArgs) -> CmdResult {
    let size = parse_size(args.size.as_deref())?;
    let preds = read_predictions(&args.pred)?;
    let gts = load_ground_truth(&args.gt)?;
    let timings = match &args.timings {
        Some(p) => read_timings(p)?,
        None => BTreeMap::new(),
    };
    let records = score(&preds, &gts, size, &timings)?;
    let detected = records.iter().filter(|r| r.error_deg.is_some()).count();
    let mut out = format!("images\t{}\ndetected\t{detected}\n", records.len());
    for (name, v) in summary(&records)? {
        let _ = writeln!(out, "{name}\t{v:.4}");
    }
    print!("{out}");
    let c = curve(&records, &default_grid())?;
    if let Some(p) = &args.curve {
        write_curve(&c, p)?;
    }
    if let Some(p) = &args.plot {
        let name = args.pred.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        std::fs::write(p, curves_svg(&[(name, c)])).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &args.results {
        write_results(&records, p)?;
    }
    Ok(())
}

pub fn compare(args: CompareArgs) -> CmdResult {
    let size = parse_size(args.size.as_deref())?;
    let gts = load_ground_truth(&args.gt)?;
    let none = BTreeMap::new();
    let a = score(&read_predictions(&args.pred_a)?, &gts, size, &none)?;
    let b = score(&read_predictions(&args.pred_b)?, &gts, size, &none)?;
    let (sa, sb) = (summary(&a)?, summary(&b)?);
    let mut out = String::from("metric\tA\tB\n");
    for ((name, va), (_, vb)) in sa.iter().zip(&sb) {
        let _ = writeln!(out, "{name}\t{va:.4}\t{vb:.4}");
    }
    let p = significance(&a, &b)?;
    let _ = writeln!(out, "p-value\t{p:.6}");
    print!("{out}");
    Ok(())
}

fn load_stress_instances(dir: &Path) -> anyhow::Result<Vec<(String, StressInstance)>> {
    let mut out = Vec::new();
    for item in discover(dir)? {
        let Item::Instance { id, dir: d } = item else { continue };
        let (fp, gp) = (d.join("features.csv"), d.join("gt.txt"));
        if !(fp.is_file() && gp.is_file()) {
            continue;
        }
        let (width, height) =
            instance_size(&d)?.ok_or_else(|| anyhow!("{}: no camera.json or image.png", d.display()))?;
        out.push((id, StressInstance { features: load_features(&fp)?, gt: read_ground_truth(&gp)?, width, height }));
    }
    if out.is_empty() {
        return Err(anyhow!("no instances with features.csv and gt.txt in {}", dir.display()));
    }
    Ok(out)
}

pub fn stress(args: StressArgs) -> CmdResult {
    if args.sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return usage("--sigmas must be nonnegative");
    }
    if args.scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return usage("--scales must be positive");
    }
    let cfg = load_config(args.config.as_deref(), args.seed)?;
    let instances: Vec<StressInstance> = load_stress_instances(&args.dataset)?.into_iter().map(|(_, i)| i).collect();
    let detector = |features: &[vanishkit::features::Feature<f64>], width: usize, height: usize| {
        let input = PipelineInput::Features { features, width, height };
        detect_pipeline("stress", input, None, &cfg).ok().and_then(|o| o.vp)
    };
    let rows = stress_test(&instances, &args.sigmas, &args.scales, &args.thresholds, cfg.seed, &detector)?;
    emit(&stress_csv(&rows), args.out.as_deref())?;
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn bench(args: BenchArgs) -> CmdResult {
    let cfg = load_config(args.config.as_deref(), args.seed)?;
    let items = discover(&args.dataset)?;
    if items.is_empty() {
        return Err(anyhow!("no images or instance directories in {}", args.dataset.display()).into());
    }
    let start = Instant::now();
    let mut outputs = Vec::with_capacity(items.len());
    for it in &items {
        outputs.push(detect_item(it, &cfg, args.use_images).with_context(|| format!("image {}", it.id()))?);
    }
    let wall = start.elapsed().as_secs_f64();
    let stage = |f: fn(&DetectionOutput<f64>) -> f64| median(outputs.iter().map(f).collect());
    let mut out = format!("images\t{}\n", outputs.len());
    let _ = writeln!(out, "median_ms\t{:.3}", stage(|o| o.timings.total));
    for (name, f) in [
        ("extract_ms", (|o: &DetectionOutput<f64>| o.timings.extract) as fn(&DetectionOutput<f64>) -> f64),
        ("cluster_ms", |o| o.timings.cluster),
        ("select_ms", |o| o.timings.select),
        ("fit_ms", |o| o.timings.fit),
        ("segments_ms", |o| o.timings.segments),
        ("ransac_ms", |o| o.timings.ransac),
    ] {
        let _ = writeln!(out, "{name}\t{:.3}", stage(f));
    }
    let _ = writeln!(out, "total_s\t{wall:.3}");
    print!("{out}");
    Ok(())
}
