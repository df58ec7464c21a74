//! Stage orchestration over an output directory.
//!
//! Layout under `paths.out_dir`:
//! `frames/frame_NNNN/{scene.toml, adc.bin, bev.prm, camera.ppm, depth.ppm, bev.svg}`,
//! `gts.csv`, `model.prm`, `loss_log.csv`, `detections.csv`, `report.toml`,
//! `eval_report.toml` and one `manifest_<mode>.json` per run.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use super::config::PipelineConfig;
use super::depth::expand_depth_channels;
use super::figures::bev_figure_svg;
use super::render::{encode_ppm, render_scene_image};
use super::sample::{fusion_input, radar_ra_input, scene_depth};
use super::write_atomic;
use crate::detect::{
    model_forward, outputs_to_detections, read_detections, toy_train, write_detections, write_loss_log, Box3D,
    Detection, ModelParams, TrainSample, SEDAN_CLASS,
};
use crate::dsp::{adc_to_points_rd_dbf, adc_to_points_spectrum, adc_to_spectrum};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalFrame, EvalReport};
use crate::fusion::{fusion_forward, load_checkpoint, save_checkpoint};
use crate::sim::{generate_random_scene, AdcCube, SceneFrame};

/// Radar processing branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Angle FFTs to a 4D spectrum, then CFAR on it.
    Spectrum,
    /// CFAR on the range-Doppler map, then beamforming per detection.
    RdDbf,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Spectrum => "spectrum",
            Branch::RdDbf => "rd-dbf",
        }
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectrum" => Ok(Branch::Spectrum),
            "rd-dbf" => Ok(Branch::RdDbf),
            _ => Err(Error::Config(format!(
                "unknown branch {s:?}, expected spectrum or rd-dbf"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    /// Random scenes and their ADC cubes.
    Simulate,
    /// Point cloud of one ADC cube, written next to it.
    Process {
        adc: PathBuf,
        branch: Branch,
    },
    /// BEV features of every simulated frame.
    Fuse,
    /// Overfits the simulated frames and evaluates on them.
    TrainToy {
        steps: Option<usize>,
    },
    Eval {
        dets: PathBuf,
        gts: PathBuf,
    },
    /// Camera, depth and BEV figures per frame.
    Render,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Process { .. } => "process",
            Mode::Fuse => "fuse",
            Mode::TrainToy { .. } => "train-toy",
            Mode::Eval { .. } => "eval",
            Mode::Render => "render",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub mode: String,
    pub version: String,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub timings_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
}

/// Bookkeeping of one run; written files are removed if the run fails.
struct Run {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    timings: BTreeMap<String, f64>,
}

impl Run {
    fn write(&mut self, path: PathBuf, bytes: &[u8]) -> Result<()> {
        write_atomic(&path, bytes)?;
        self.outputs.push(path);
        Ok(())
    }

    fn track(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f(self);
        *self.timings.entry(stage.to_string()).or_default() += t.elapsed().as_secs_f64() * 1e3;
        out
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        self.inputs.push(path.to_path_buf());
        Ok(())
    }
}

pub fn frame_dir(out: &Path, frame_id: u64) -> PathBuf {
    out.join("frames").join(format!("frame_{frame_id:04}"))
}

/// Runs one stage. Inputs come from earlier stages under the output
/// directory; a failure removes everything this run wrote.
pub fn run_pipeline(cfg: &PipelineConfig, mode: &Mode) -> Result<RunSummary> {
    cfg.validate()?;
    let mut run = Run {
        inputs: vec![],
        outputs: vec![],
        timings: BTreeMap::new(),
    };
    let started = Instant::now();
    let result = match mode {
        Mode::Simulate => simulate(cfg, &mut run),
        Mode::Process { adc, branch } => process(cfg, adc, *branch, &mut run),
        Mode::Fuse => fuse(cfg, &mut run),
        Mode::TrainToy { steps } => train(cfg, *steps, &mut run),
        Mode::Eval { dets, gts } => eval(cfg, dets, gts, &mut run),
        Mode::Render => render(cfg, &mut run),
    };
    let finish = |run: &mut Run| -> Result<PathBuf> {
        run.timings
            .insert("total".into(), started.elapsed().as_secs_f64() * 1e3);
        let manifest = Manifest {
            mode: mode.name().into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seeds: BTreeMap::from([("scene".into(), cfg.seeds.scene), ("model".into(), cfg.seeds.model)]),
            inputs: run.inputs.clone(),
            outputs: run.outputs.clone(),
            timings_ms: run.timings.clone(),
        };
        let path = cfg.paths.out_dir.join(format!("manifest_{}.json", mode.name()));
        run.write(path.clone(), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        Ok(path)
    };
    match result.and_then(|()| finish(&mut run)) {
        Ok(manifest) => Ok(RunSummary {
            outputs: run.outputs,
            manifest,
        }),
        Err(e) => {
            for p in &run.outputs {
                let _ = std::fs::remove_file(p);
            }
            log::error!("{} failed: {e}", mode.name());
            Err(e)
        }
    }
}

fn gts_as_detections(scenes: &[SceneFrame]) -> Vec<Detection> {
    scenes
        .iter()
        .flat_map(|s| {
            s.boxes.iter().map(|b| Detection {
                frame_id: s.frame_id,
                class_id: SEDAN_CLASS,
                score: 1.0,
                bbox: *b,
            })
        })
        .collect()
}

fn simulate(cfg: &PipelineConfig, run: &mut Run) -> Result<()> {
    let out = &cfg.paths.out_dir;
    let mut scenes = Vec::new();
    for i in 0..cfg.scene.n_frames {
        let mut scene = run.time("scene", |_| {
            generate_random_scene(
                cfg.scene.objects_per_frame,
                &cfg.scene.sector,
                cfg.seeds.scene.wrapping_add(i as u64),
            )
        })?;
        scene.frame_id = i as u64;
        let adc = run.time("synthesize", |_| crate::sim::synthesize_adc(&scene, &cfg.radar))?;
        let dir = frame_dir(out, scene.frame_id);
        run.write(dir.join("scene.toml"), scene.to_toml()?.as_bytes())?;
        adc.write(&dir.join("adc.bin"))?;
        run.track(dir.join("adc.bin"));
        log::info!(
            "frame {i}: {} objects, {} scatterers",
            scene.boxes.len(),
            scene.scatterers.len()
        );
        scenes.push(scene);
    }
    write_detections(&gts_as_detections(&scenes), &out.join("gts.csv"))?;
    run.track(out.join("gts.csv"));
    Ok(())
}

fn process(cfg: &PipelineConfig, adc_path: &Path, branch: Branch, run: &mut Run) -> Result<()> {
    run.input(adc_path)?;
    let adc = AdcCube::read(adc_path, &cfg.radar)?;
    let cloud = run.time(branch.as_str(), |_| match branch {
        Branch::Spectrum => adc_to_points_spectrum(&adc, &cfg.chain),
        Branch::RdDbf => adc_to_points_rd_dbf(&adc, &cfg.chain),
    })?;
    let path = adc_path.with_file_name(format!("points_{}.csv", branch.as_str()));
    cloud.write(&path)?;
    run.track(path);
    log::info!("{} points", cloud.len());
    Ok(())
}

/// Scenes and ADC cubes written by `simulate`, in frame order.
fn load_frames(cfg: &PipelineConfig, run: &mut Run) -> Result<Vec<(SceneFrame, AdcCube)>> {
    let root = cfg.paths.out_dir.join("frames");
    if !root.is_dir() {
        return Err(Error::MissingInput(root));
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(&root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Empty("simulated frames"));
    }
    dirs.iter()
        .map(|d| {
            let (sp, ap) = (d.join("scene.toml"), d.join("adc.bin"));
            run.input(&sp)?;
            run.input(&ap)?;
            Ok((SceneFrame::read(&sp)?, AdcCube::read(&ap, &cfg.radar)?))
        })
        .collect()
}

fn load_samples(cfg: &PipelineConfig, run: &mut Run) -> Result<Vec<TrainSample>> {
    let frames = load_frames(cfg, run)?;
    run.time("inputs", |_| {
        frames
            .iter()
            .map(|(scene, adc)| {
                Ok(TrainSample {
                    frame_id: scene.frame_id,
                    input: fusion_input(scene, adc, cfg)?,
                    gts: scene.boxes.clone(),
                })
            })
            .collect()
    })
}

/// Trained parameters if present, else the seeded initialization.
fn model_params(cfg: &PipelineConfig, run: &mut Run) -> Result<ModelParams> {
    let mut p = ModelParams::init(&cfg.model, cfg.seeds.model);
    let path = cfg.paths.out_dir.join("model.prm");
    if path.exists() {
        run.input(&path)?;
        load_checkpoint(&mut p, &path)?;
    }
    Ok(p)
}

fn fuse(cfg: &PipelineConfig, run: &mut Run) -> Result<()> {
    let samples = load_samples(cfg, run)?;
    let p = model_params(cfg, run)?;
    for s in &samples {
        let (bev, _) = run.time("fusion", |_| {
            fusion_forward(&cfg.model.fusion, &cfg.calib, cfg.r_max_m(), &p.fusion, &s.input)
        })?;
        let path = frame_dir(&cfg.paths.out_dir, s.frame_id).join("bev.prm");
        save_checkpoint(&bev.levels, &path)?;
        run.track(path);
    }
    Ok(())
}

/// Every query of every sample as a scored detection.
pub fn predict_samples(cfg: &PipelineConfig, p: &ModelParams, samples: &[TrainSample]) -> Result<Vec<Detection>> {
    let ctx = cfg.model_context();
    let mut dets = Vec::new();
    for s in samples {
        let (out, _) = model_forward(&ctx, p, &s.input)?;
        dets.extend(outputs_to_detections(&out, s.frame_id)?);
    }
    Ok(dets)
}

/// Pairs detections with ground truth per frame id, over the union of ids.
pub fn group_frames(dets: &[Detection], gts: &[Detection]) -> Vec<EvalFrame> {
    let ids: BTreeSet<u64> = dets.iter().chain(gts).map(|d| d.frame_id).collect();
    ids.into_iter()
        .map(|id| EvalFrame {
            detections: dets.iter().filter(|d| d.frame_id == id).cloned().collect(),
            ground_truth: gts
                .iter()
                .filter(|d| d.frame_id == id)
                .map(|d| d.bbox)
                .collect::<Vec<Box3D>>(),
        })
        .collect()
}

fn train(cfg: &PipelineConfig, steps: Option<usize>, run: &mut Run) -> Result<()> {
    let out = cfg.paths.out_dir.clone();
    let samples = load_samples(cfg, run)?;
    let mut hyper = cfg.train;
    if let Some(n) = steps {
        hyper.steps = n;
    }
    let mut p = ModelParams::init(&cfg.model, cfg.seeds.model);
    let ctx = cfg.model_context();
    let log = run.time("train", |_| toy_train(&ctx, &mut p, &samples, &cfg.loss, &hyper))?;
    log::info!(
        "loss {:.4} -> {:.4} over {} steps",
        log[0],
        log[log.len() - 1],
        hyper.steps
    );
    save_checkpoint(&p, &out.join("model.prm"))?;
    run.track(out.join("model.prm"));
    write_loss_log(&log, &out.join("loss_log.csv"))?;
    run.track(out.join("loss_log.csv"));
    let dets = run.time("predict", |_| predict_samples(cfg, &p, &samples))?;
    write_detections(&dets, &out.join("detections.csv"))?;
    run.track(out.join("detections.csv"));
    let gts: Vec<Detection> = samples
        .iter()
        .flat_map(|s| {
            s.gts.iter().map(|b| Detection {
                frame_id: s.frame_id,
                class_id: SEDAN_CLASS,
                score: 1.0,
                bbox: *b,
            })
        })
        .collect();
    let report = evaluate(&group_frames(&dets, &gts), &cfg.eval)?;
    run.write(out.join("report.toml"), report.to_toml()?.as_bytes())
}

fn eval(cfg: &PipelineConfig, dets_path: &Path, gts_path: &Path, run: &mut Run) -> Result<()> {
    run.input(dets_path)?;
    run.input(gts_path)?;
    let dets = read_detections(dets_path)?;
    let gts = read_detections(gts_path)?;
    let report: EvalReport = run.time("evaluate", |_| evaluate(&group_frames(&dets, &gts), &cfg.eval))?;
    run.write(cfg.paths.out_dir.join("eval_report.toml"), report.to_toml()?.as_bytes())
}

fn render(cfg: &PipelineConfig, run: &mut Run) -> Result<()> {
    let frames = load_frames(cfg, run)?;
    let det_path = cfg.paths.out_dir.join("detections.csv");
    let dets = if det_path.exists() {
        run.input(&det_path)?;
        read_detections(&det_path)?
    } else {
        Vec::new()
    };
    let f = &cfg.model.fusion;
    for (scene, adc) in &frames {
        let dir = frame_dir(&cfg.paths.out_dir, scene.frame_id);
        let rgb = render_scene_image(scene, &cfg.calib);
        run.write(dir.join("camera.ppm"), &encode_ppm(&rgb))?;
        let depth = scene_depth(scene, cfg)?;
        run.write(
            dir.join("depth.ppm"),
            &encode_ppm(&expand_depth_channels(&depth.normalized(cfg.r_max_m()))),
        )?;
        let ra = radar_ra_input(&adc_to_spectrum(adc, &cfg.chain)?, f.ra_rows, f.ra_cols)?;
        let mine: Vec<Detection> = dets.iter().filter(|d| d.frame_id == scene.frame_id).cloned().collect();
        run.write(
            dir.join("bev.svg"),
            bev_figure_svg(&ra, cfg.r_max_m(), &scene.boxes, &mine).as_bytes(),
        )?;
    }
    Ok(())
}
