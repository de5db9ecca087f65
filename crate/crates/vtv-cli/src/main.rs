//! `vtv` — command-line pipeline for masked visuo-tactile video
//! preprocessing: synthetic fixtures, dense flow, keyframe mask sampling,
//! flow-guided mask propagation, tubelet tokenization, leakage audits,
//! force-field upsampling, and QA dataset generation.

mod config;
mod report;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use config::PipelineConfig;
use report::ReportBuilder;
use vtv_core::flow::{bidirectional_flow_set, compose_to_keyframe, write_flo};
use vtv_core::keyframe::{gaussian_mask, sample_points, select_keyframe, MaskMap};
use vtv_core::model::{
    load_video, save_png_frame, save_video, Frame, VideoLayout, VideoMeta, VideoSequence,
};
use vtv_core::propagate::{binarize_tokens, leakage, propagate_mask, tube_mask};
use vtv_core::qa::{
    self, dataset_header, default_test_mix, default_train_mix, generate_pairs,
    load_annotations, split_disjoint, synthetic_annotations, validate_distribution,
    AnnotationTable, DistributionSpec,
};
use vtv_core::synth::{synth_sequence, InteractionSpec};
use vtv_core::tacforce::{spline_interpolate_field, ForceField};
use vtv_core::tensorfile::TensorFile;

#[derive(Parser)]
#[command(name = "vtv", version, about = "visuo-tactile video preprocessing pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config file plus override flags shared by the pipeline-stage commands.
#[derive(Args, Clone)]
struct ConfigOpts {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Top-level seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Additional key=value overrides (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigOpts {
    fn resolve(&self) -> Result<PipelineConfig, config::ConfigError> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_file(p)?,
            None => PipelineConfig::default(),
        };
        cfg.apply_overrides(&self.set)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Clone)]
struct StageIo {
    /// Fixture corpus directory (as produced by `vtv synth`).
    #[arg(long)]
    fixtures: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    cfg: ConfigOpts,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic fixture corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 9)]
        frames: usize,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value_t = 2)]
        slides: usize,
        #[arg(long, default_value_t = 2)]
        rotates: usize,
        #[arg(long, default_value_t = 2)]
        presses: usize,
        /// Slide pixels/frame, rotate degrees/frame, press radius px.
        #[arg(long, default_value_t = 4.0)]
        amplitude: f64,
    },
    /// Estimate the bidirectional flow set toward each fixture's keyframe.
    Flow(StageIo),
    /// Sample points and build the Gaussian keyframe mask.
    Mask(StageIo),
    /// Warp the keyframe mask to every frame along composed flow.
    Propagate(StageIo),
    /// Binarize propagated masks into a tubelet token mask.
    Tokenize(StageIo),
    /// Audit information leakage of flow-guided vs tube masking.
    Leakage(StageIo),
    /// Full per-video chain: flow → mask → propagate → tokenize → leakage.
    Pipeline(StageIo),
    /// Upsample a force-field tensor with natural cubic splines.
    Interp {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        target_h: usize,
        #[arg(long)]
        target_w: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate templated QA datasets from annotated videos.
    Qagen {
        /// Number of pairs for a single dataset.
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output JSONL file (single-dataset mode).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use a synthetic annotation table with this many objects.
        #[arg(long)]
        synthetic: Option<usize>,
        /// Manifest JSON (with --annotations) instead of --synthetic.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Annotation list JSON.
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Task mix: `train` or `test`.
        #[arg(long, default_value = "train")]
        mix: String,
        /// Emit three disjoint splits `STAGE2,STAGE3,TEST` instead.
        #[arg(long)]
        split: Option<String>,
        /// Number of objects held out for the test split.
        #[arg(long, default_value_t = 0)]
        held_out: usize,
        /// Output directory for split mode.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Validate an annotation table against the reference distribution.
    Stats {
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        synthetic: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct FixtureEntry {
    name: String,
    kind: String,
    video: String,
    frames: usize,
    h: usize,
    w: usize,
    amplitude: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct FixtureIndex {
    schema_version: u32,
    seed: u64,
    fixtures: Vec<FixtureEntry>,
}

const FIXTURE_INDEX: &str = "fixtures.json";

/// Expand the top-level seed into a per-video seed: first eight bytes
/// (little-endian) of SHA-256(seed_le || name).
fn expand_seed(top: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(top.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

fn main() {
    if let Ok(threads) = std::env::var("VTV_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        let record = serde_json::json!({
            "error": {
                "kind": error_kind(&e),
                "message": format!("{e:#}"),
            }
        });
        eprintln!("{record}");
        std::process::exit(1);
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    if e.downcast_ref::<config::ConfigError>().is_some() {
        "config"
    } else if e.downcast_ref::<qa::QaError>().is_some() {
        "qa"
    } else if e.downcast_ref::<std::io::Error>().is_some() {
        "io"
    } else {
        "pipeline"
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth {
            out,
            seed,
            frames,
            size,
            slides,
            rotates,
            presses,
            amplitude,
        } => cmd_synth(&out, seed, frames, size, slides, rotates, presses, amplitude),
        Command::Flow(io) => run_stages(&io, "flow", &[Stage::Flow]),
        Command::Mask(io) => run_stages(&io, "mask", &[Stage::Mask]),
        Command::Propagate(io) => run_stages(&io, "propagate", &[Stage::Propagate]),
        Command::Tokenize(io) => run_stages(&io, "tokenize", &[Stage::Tokenize]),
        Command::Leakage(io) => run_stages(&io, "leakage", &[Stage::Leakage]),
        Command::Pipeline(io) => run_stages(
            &io,
            "pipeline",
            &[
                Stage::Flow,
                Stage::Mask,
                Stage::Propagate,
                Stage::Tokenize,
                Stage::Leakage,
            ],
        ),
        Command::Interp {
            input,
            target_h,
            target_w,
            out,
        } => cmd_interp(&input, target_h, target_w, &out),
        Command::Qagen {
            count,
            seed,
            out,
            synthetic,
            manifest,
            annotations,
            mix,
            split,
            held_out,
            out_dir,
        } => cmd_qagen(
            count, seed, out, synthetic, manifest, annotations, &mix, split, held_out, out_dir,
        ),
        Command::Stats {
            annotations,
            synthetic,
            seed,
            tolerance,
            out,
        } => cmd_stats(annotations, synthetic, seed, tolerance, out),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    out: &Path,
    seed: u64,
    frames: usize,
    size: usize,
    slides: usize,
    rotates: usize,
    presses: usize,
    amplitude: f64,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let mut report = ReportBuilder::new("synth", out, {
        let mut p = std::collections::BTreeMap::new();
        p.insert("seed".into(), seed.to_string());
        p.insert("frames".into(), frames.to_string());
        p.insert("size".into(), size.to_string());
        p.insert("amplitude".into(), amplitude.to_string());
        p
    });
    let mut specs: Vec<(String, InteractionSpec)> = Vec::new();
    for i in 0..slides {
        let s = expand_seed(seed, &format!("slide{i}"));
        specs.push((
            format!("slide_{i:02}"),
            InteractionSpec::slide(amplitude, frames, s),
        ));
    }
    for i in 0..rotates {
        let s = expand_seed(seed, &format!("rotate{i}"));
        specs.push((
            format!("rotate_{i:02}"),
            InteractionSpec::rotate((amplitude / 2.0).min(2.0), frames, s),
        ));
    }
    for i in 0..presses {
        let s = expand_seed(seed, &format!("press{i}"));
        specs.push((
            format!("press_{i:02}"),
            InteractionSpec::press(amplitude * 5.0, frames, s),
        ));
    }
    let mut index = FixtureIndex {
        schema_version: 1,
        seed,
        fixtures: Vec::new(),
    };
    for (name, spec) in &specs {
        let (video, gt_flows) =
            synth_sequence(spec, size, size).map_err(|e| anyhow::anyhow!(e.to_string()))?;
        let dir = out.join(name);
        std::fs::create_dir_all(dir.join("gt_flow"))?;
        let video_path = dir.join("video.vtf");
        save_video(&video, &video_path, VideoLayout::TensorFile)?;
        report.add_output(&video_path)?;
        for f in &gt_flows {
            let p = dir
                .join("gt_flow")
                .join(format!("flow_{:05}_{:05}.flo", f.src_index, f.dst_index));
            write_flo(f, &p)?;
            report.add_output(&p)?;
        }
        index.fixtures.push(FixtureEntry {
            name: name.clone(),
            kind: format!("{:?}", spec.kind).to_lowercase(),
            video: format!("{name}/video.vtf"),
            frames: video.len(),
            h: video.h(),
            w: video.w(),
            amplitude: spec.amplitude,
        });
    }
    let index_path = out.join(FIXTURE_INDEX);
    let mut bytes = serde_json::to_vec_pretty(&index)?;
    bytes.push(b'\n');
    std::fs::write(&index_path, bytes)?;
    report.add_output(&index_path)?;
    report.finish()?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Stage {
    Flow,
    Mask,
    Propagate,
    Tokenize,
    Leakage,
}

/// Per-fixture artifact bundle produced by the stage chain.
struct FixtureOutputs {
    files: Vec<PathBuf>,
    leakage_row: Option<String>,
}

fn run_stages(io: &StageIo, command: &str, stages: &[Stage]) -> Result<()> {
    let cfg = io.cfg.resolve()?;
    let index: FixtureIndex = serde_json::from_str(
        &std::fs::read_to_string(io.fixtures.join(FIXTURE_INDEX))
            .with_context(|| format!("no fixture index in {}", io.fixtures.display()))?,
    )?;
    std::fs::create_dir_all(&io.out)?;
    let mut report = ReportBuilder::new(command, &io.out, cfg.as_parameters());

    let results: Vec<Result<FixtureOutputs>> = index
        .fixtures
        .par_iter()
        .map(|fx| process_fixture(fx, &io.fixtures, &io.out, &cfg, stages))
        .collect();
    report.mark_stage("fixtures");

    let mut rows = Vec::new();
    for (fx, res) in index.fixtures.iter().zip(results) {
        let outputs =
            res.with_context(|| format!("while processing fixture `{}`", fx.name))?;
        for f in &outputs.files {
            report.add_output(f)?;
        }
        if let Some(row) = outputs.leakage_row {
            rows.push(row);
        }
    }
    if stages.contains(&Stage::Leakage) {
        rows.sort();
        let csv_path = io.out.join("leakage.csv");
        let mut csv =
            String::from("fixture,kind,flow_guided_leak,tube_leak,masked_total\n");
        for r in rows {
            csv.push_str(&r);
            csv.push('\n');
        }
        std::fs::write(&csv_path, csv)?;
        report.add_output(&csv_path)?;
    }
    report.finish()?;
    Ok(())
}

fn process_fixture(
    fx: &FixtureEntry,
    fixtures_dir: &Path,
    out: &Path,
    cfg: &PipelineConfig,
    stages: &[Stage],
) -> Result<FixtureOutputs> {
    let video = load_video(
        fixtures_dir.join(&fx.video),
        VideoLayout::TensorFile,
        &VideoMeta::default(),
    )?;
    let dir = out.join(&fx.name);
    std::fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    let mut leakage_row = None;

    let k = select_keyframe(&video, cfg.keyframe_strategy())?;
    let provider = cfg.flow_provider();
    let video_seed = expand_seed(cfg.seed, &fx.name);

    // Later stages recompute their prerequisites in memory, so each
    // command is self-contained and the pipeline equals their composition.
    let needs_flow = stages
        .iter()
        .any(|s| matches!(s, Stage::Flow | Stage::Propagate | Stage::Tokenize | Stage::Leakage));
    let flow_set = if needs_flow {
        Some(bidirectional_flow_set(&video, k, &provider)?)
    } else {
        None
    };
    if stages.contains(&Stage::Flow) {
        let fdir = dir.join("flow");
        std::fs::create_dir_all(&fdir)?;
        let set = flow_set.as_ref().expect("computed above");
        for f in set.forward.iter().chain(&set.backward) {
            let p = fdir.join(format!("flow_{:05}_{:05}.flo", f.src_index, f.dst_index));
            write_flo(f, &p)?;
            files.push(p);
        }
    }

    let sampling = cfg.sampling(video_seed);
    let points = sample_points(video.h(), video.w(), &sampling)?;
    let kf_mask = gaussian_mask(video.h(), video.w(), &points, sampling.lambda);
    let kf_mask = MaskMap {
        frame_index: k,
        ..kf_mask
    };
    if stages.contains(&Stage::Mask) {
        let pgm = dir.join("keyframe_mask.pgm");
        kf_mask.save_pgm(&pgm)?;
        files.push(pgm);
        let vtf = dir.join("keyframe_mask.vtf");
        kf_mask.to_tensor().save(&vtf)?;
        files.push(vtf);
        let meta = dir.join("keyframe_mask.json");
        let mut bytes = serde_json::to_vec_pretty(&serde_json::json!({
            "keyframe": k,
            "points": points.len(),
            "video_seed": video_seed,
            "lambda": sampling.lambda,
        }))?;
        bytes.push(b'\n');
        std::fs::write(&meta, bytes)?;
        files.push(meta);
        let overlay = dir.join("overlay.png");
        save_overlay(&video, k, &kf_mask, &overlay)?;
        files.push(overlay);
    }

    let needs_masks = stages
        .iter()
        .any(|s| matches!(s, Stage::Propagate | Stage::Tokenize | Stage::Leakage));
    let masks = if needs_masks {
        let mappings = compose_to_keyframe(flow_set.as_ref().expect("computed above"));
        Some(propagate_mask(&kf_mask, &mappings)?)
    } else {
        None
    };
    if stages.contains(&Stage::Propagate) {
        let masks = masks.as_ref().expect("computed above");
        let mut data = Vec::with_capacity(masks.len() * video.h() * video.w());
        for m in masks {
            data.extend(m.values.data().iter().copied());
        }
        let p = dir.join("masks.vtf");
        TensorFile::F32 {
            shape: vec![masks.len(), video.h(), video.w()],
            data,
        }
        .save(&p)?;
        files.push(p);
    }

    let needs_tokens = stages
        .iter()
        .any(|s| matches!(s, Stage::Tokenize | Stage::Leakage));
    let token = if needs_tokens {
        Some(binarize_tokens(
            masks.as_ref().expect("computed above"),
            cfg.geometry(),
            cfg.tokens_rho,
        )?)
    } else {
        None
    };
    if stages.contains(&Stage::Tokenize) {
        let token = token.as_ref().expect("computed above");
        let p = dir.join("token_mask.vtf");
        token.to_tensor().save(&p)?;
        files.push(p);
        let sidecar = dir.join("token_mask.json");
        let mut bytes =
            serde_json::to_vec_pretty(&token.sidecar(cfg.geometry(), cfg.tokens_rho))?;
        bytes.push(b'\n');
        std::fs::write(&sidecar, bytes)?;
        files.push(sidecar);
    }

    if stages.contains(&Stage::Leakage) {
        let token = token.as_ref().expect("computed above");
        let flow_leak = leakage(&video, token, cfg.geometry(), cfg.leakage_tau, cfg.leakage_window)?;
        let tube = tube_mask(
            cfg.geometry(),
            video.len(),
            video.h(),
            video.w(),
            cfg.tokens_rho,
            video_seed,
        )?;
        let tube_leak = leakage(&video, &tube, cfg.geometry(), cfg.leakage_tau, cfg.leakage_window)?;
        let p = dir.join("leakage.json");
        let mut bytes = serde_json::to_vec_pretty(&serde_json::json!({
            "flow_guided": flow_leak,
            "tube": tube_leak,
        }))?;
        bytes.push(b'\n');
        std::fs::write(&p, bytes)?;
        files.push(p);
        leakage_row = Some(format!(
            "{},{},{:.6},{:.6},{}",
            fx.name, fx.kind, flow_leak.leak_fraction, tube_leak.leak_fraction,
            flow_leak.masked_total
        ));
    }

    Ok(FixtureOutputs { files, leakage_row })
}

/// Keyframe luma with the mask blended in red.
fn save_overlay(
    video: &VideoSequence,
    k: usize,
    mask: &MaskMap,
    path: &Path,
) -> Result<()> {
    let luma = video.frame(k).to_luma();
    let (h, w) = (luma.h(), luma.w());
    let mut data = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            let g = luma.get(x, y);
            let m = mask.values.get(x, y);
            data.push((g + 0.6 * m).min(1.0));
            data.push(g * (1.0 - 0.5 * m));
            data.push(g * (1.0 - 0.5 * m));
        }
    }
    save_png_frame(&Frame::new(h, w, 3, data), path)?;
    Ok(())
}

fn cmd_interp(input: &Path, target_h: usize, target_w: usize, out: &Path) -> Result<()> {
    let tensor = TensorFile::load(input)?;
    let field = ForceField::from_tensor(&tensor)
        .ok_or_else(|| anyhow::anyhow!("{} is not an (H, W, 3) f32 tensor", input.display()))?;
    let up = spline_interpolate_field(&field, target_h, target_w)?;
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    up.to_tensor().save(out)?;
    Ok(())
}

fn build_table(
    synthetic: Option<usize>,
    manifest: Option<PathBuf>,
    annotations: Option<PathBuf>,
    seed: u64,
) -> Result<AnnotationTable> {
    match (synthetic, manifest, annotations) {
        (Some(n), None, None) => {
            let anns = synthetic_annotations(n, &DistributionSpec::reference(), seed);
            let entries = anns
                .iter()
                .flat_map(|a| {
                    (0..5).map(move |r| vtv_core::model::ManifestEntry {
                        video: format!("videos/{}_{r}.vtf", a.object_id),
                        object_id: a.object_id.clone(),
                        region_id: r,
                        sensor: vtv_core::model::SensorKind::GelSightMini,
                        interaction: vtv_core::model::InteractionKind::Press,
                        annotation: a.object_id.clone(),
                    })
                })
                .collect();
            Ok(load_annotations(
                &vtv_core::model::Manifest::new(entries),
                &anns,
            )?)
        }
        (None, Some(m), Some(a)) => {
            let manifest = vtv_core::model::Manifest::load(&m)?;
            let anns: Vec<vtv_core::model::TactileAnnotation> =
                serde_json::from_str(&std::fs::read_to_string(&a)?)?;
            Ok(load_annotations(&manifest, &anns)?)
        }
        _ => bail!("use either --synthetic N or both --manifest and --annotations"),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_qagen(
    count: usize,
    seed: u64,
    out: Option<PathBuf>,
    synthetic: Option<usize>,
    manifest: Option<PathBuf>,
    annotations: Option<PathBuf>,
    mix_name: &str,
    split: Option<String>,
    held_out: usize,
    out_dir: Option<PathBuf>,
) -> Result<()> {
    let table = build_table(synthetic, manifest, annotations, seed)?;
    if let Some(split) = split {
        let parts: Vec<usize> = split
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<_, _>>()
            .context("--split expects STAGE2,STAGE3,TEST counts")?;
        if parts.len() != 3 {
            bail!("--split expects exactly three comma-separated counts");
        }
        let dir = out_dir.context("--out-dir is required with --split")?;
        std::fs::create_dir_all(&dir)?;
        let held: BTreeSet<String> =
            table.object_ids().into_iter().take(held_out).collect();
        let datasets = split_disjoint(&table, parts[0], parts[1], parts[2], seed, &held)?;
        let mut report = ReportBuilder::new("qagen", &dir, {
            let mut p = std::collections::BTreeMap::new();
            p.insert("seed".into(), seed.to_string());
            p.insert("split".into(), split.clone());
            p.insert("held_out".into(), held_out.to_string());
            p
        });
        let train_mix = default_train_mix();
        let test_mix = default_test_mix();
        for (name, pairs, n, s, mix) in [
            ("stage2.jsonl", &datasets.stage2, parts[0], datasets.seeds.0, &train_mix),
            ("stage3.jsonl", &datasets.stage3, parts[1], datasets.seeds.1, &train_mix),
            ("test.jsonl", &datasets.test, parts[2], datasets.seeds.2, &test_mix),
        ] {
            let path = dir.join(name);
            qa::write_jsonl(&path, &dataset_header(s, n, mix), pairs)?;
            report.add_output(&path)?;
        }
        report.finish()?;
        return Ok(());
    }
    let out = out.context("--out is required without --split")?;
    let mix = match mix_name {
        "train" => default_train_mix(),
        "test" => default_test_mix(),
        other => bail!("unknown mix `{other}`: expected `train` or `test`"),
    };
    let pairs = generate_pairs(&table, &mix, count, seed, "qa-")?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    qa::write_jsonl(&out, &dataset_header(seed, count, &mix), &pairs)?;
    Ok(())
}

fn cmd_stats(
    annotations: Option<PathBuf>,
    synthetic: Option<usize>,
    seed: u64,
    tolerance: f64,
    out: Option<PathBuf>,
) -> Result<()> {
    let anns: Vec<vtv_core::model::TactileAnnotation> = match (annotations, synthetic) {
        (Some(path), None) => serde_json::from_str(&std::fs::read_to_string(&path)?)?,
        (None, Some(n)) => synthetic_annotations(n, &DistributionSpec::reference(), seed),
        _ => bail!("use either --annotations FILE or --synthetic N"),
    };
    let report = validate_distribution(&anns, &DistributionSpec::reference(), tolerance)?;
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    match out {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::Write::write_all(&mut std::io::stdout(), &bytes)?,
    }
    Ok(())
}
