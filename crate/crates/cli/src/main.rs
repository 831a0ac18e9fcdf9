use std::path::{Component, Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use sogfit::energy::{image_gradients_with, Observations};
use sogfit::evaluation::{
    body_circumferences, body_height, joint_error, joint_positions, overlap_report, render_silhouette, MeasurePlanes, ScenarioConfig,
    SyntheticScene,
};
use sogfit::io::{actor, cameras, config, fit, heatmaps, images, manifest, obj, poses, shape_file};
use sogfit::optimizer::{solve_stage1, solve_stage2, FitResult, SolverConfig, TraceRow};
use sogfit::raycast::{render_visibility, CameraModel};
use sogfit::scene::{pose_gaussians, ActorModel, PoseVector};
use sogfit::shape::{build_from_meshes, default_shape_space, skin_actor, ShapeSpace, DEFAULT_SHAPE_DIM};
use sogfit::{Error, Exec, Result};

#[derive(Parser, Debug)]
#[command(
    name = "sogfit",
    version,
    about = "Marker-less body shape and motion capture with a sum-of-Gaussians model"
)]
struct Cli {
    /// Seed for every random draw (overrides config files).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 picks the machine default.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Write the per-iteration energy breakdown as CSV next to the outputs.
    #[arg(long, global = true)]
    trace: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StageArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum What {
    Visibility,
    Contour,
    Silhouette,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Metric {
    Joints,
    Overlap,
    Circumference,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Register a reference actor to body meshes and build the shape space.
    BuildModel {
        meshes: Vec<PathBuf>,
        /// Reference actor (TOML) placed in the first mesh's rest pose.
        #[arg(long)]
        reference: PathBuf,
        /// Reference surface; defaults to the first mesh.
        #[arg(long)]
        reference_mesh: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SHAPE_DIM)]
        dim: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Fit pose and shape to a project.
    Fit {
        manifest: PathBuf,
        #[arg(long)]
        shape_space: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        stage: StageArg,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Stage-1 result for `--stage 2`; defaults to `<output>/fit.toml`.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Diagnostic images of a posed model.
    Render {
        model: PathBuf,
        poses: PathBuf,
        cameras: PathBuf,
        #[arg(long, value_enum)]
        what: What,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Estimate Gaussian colours from the project images.
    Colorize {
        manifest: PathBuf,
        fit: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Skin the reference surface to a fitted frame.
    ExportMesh {
        fit: PathBuf,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        /// Export the rest pose instead of a frame.
        #[arg(long)]
        rest: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Generate a synthetic project with ground truth.
    Synth {
        scenario: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compare a fit with ground truth.
    Eval {
        fit: PathBuf,
        truth: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "joints,overlap,circumference")]
        metrics: Vec<Metric>,
        /// Cameras for the overlap metric.
        #[arg(long)]
        cameras: Option<PathBuf>,
        /// Subtract the first-frame offset before measuring joint error.
        #[arg(long)]
        compensate: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_input_error() {
        3
    } else {
        4
    }
}

fn run(cli: Cli) -> Result<()> {
    let exec = setup_threads(cli.threads)?;
    match cli.command {
        Command::BuildModel {
            meshes,
            reference,
            reference_mesh,
            dim,
            output,
        } => build_model(&meshes, &reference, reference_mesh.as_deref(), dim, &output, exec),
        Command::Fit {
            manifest,
            shape_space,
            stage,
            config,
            init,
            output,
        } => run_fit(
            &manifest,
            &shape_space,
            stage,
            config.as_deref(),
            init.as_deref(),
            &output,
            cli.trace,
            exec,
        ),
        Command::Render {
            model,
            poses,
            cameras,
            what,
            frame,
            tau,
            output,
        } => render(&model, &poses, &cameras, what, frame, tau, &output, exec),
        Command::Colorize { manifest, fit, output } => colorize(&manifest, &fit, &output, exec),
        Command::ExportMesh { fit, frame, rest, output } => export_mesh(&fit, frame, rest, &output),
        Command::Synth { scenario, output } => synth(scenario.as_deref(), cli.seed, &output, exec),
        Command::Eval {
            fit,
            truth,
            metrics,
            cameras,
            compensate,
            output,
        } => eval(&fit, &truth, &metrics, cameras.as_deref(), compensate, &output, exec),
    }
}

#[cfg(feature = "parallel")]
fn setup_threads(threads: usize) -> Result<Exec> {
    if threads == 1 {
        return Ok(Exec::Sequential);
    }
    if threads > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {threads} threads: {e}")))?;
    }
    Ok(Exec::Parallel)
}

#[cfg(not(feature = "parallel"))]
fn setup_threads(threads: usize) -> Result<Exec> {
    if threads > 1 {
        log::warn!("built without the parallel feature; --threads {threads} ignored");
    }
    Ok(Exec::Sequential)
}

/// `target` relative to directory `base`, both given relative to the same
/// working directory or both absolute.
fn relative_to(target: &Path, base: &Path) -> PathBuf {
    fn norm(p: &Path) -> Vec<Component<'_>> {
        p.components().filter(|c| *c != Component::CurDir).collect()
    }
    let t = norm(target);
    let b = norm(base);
    if target.is_absolute() != base.is_absolute() || b.contains(&Component::ParentDir) {
        return std::path::absolute(target).unwrap_or_else(|_| target.to_path_buf());
    }
    let common = t.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let mut out = PathBuf::new();
    for _ in common..b.len() {
        out.push("..");
    }
    for c in &t[common..] {
        out.push(c.as_os_str());
    }
    out
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

fn build_model(meshes: &[PathBuf], reference: &Path, reference_mesh: Option<&Path>, dim: usize, output: &Path, exec: Exec) -> Result<()> {
    if meshes.is_empty() {
        return Err(Error::InvalidArgument("build-model needs at least one mesh".into()));
    }
    let actor = actor::load_actor(reference)?;
    let ref_mesh = obj::load_obj(reference_mesh.unwrap_or(&meshes[0]))?;
    let instances = meshes.iter().map(obj::load_obj).collect::<Result<Vec<_>>>()?;
    let space = build_from_meshes(&actor, &ref_mesh, &instances, dim, exec)?;
    shape_file::save_shape_space(&space, output)?;
    info!("shape space with {} coefficients written to {}", space.dim(), output.display());
    Ok(())
}

fn solver_config(path: Option<&Path>) -> Result<SolverConfig> {
    let cfg = match path {
        Some(p) => config::load_solver_config(p)?,
        None => SolverConfig::default(),
    };
    Ok(cfg)
}

fn load_images(m: &manifest::ProjectManifest) -> Result<Vec<Vec<sogfit::energy::RgbImage>>> {
    (0..m.cameras.len())
        .map(|c| (0..m.frames).map(|t| images::load_rgb(m.image_path(c, t))).collect())
        .collect()
}

fn write_fit(out: &Path, stage: &str, shape_space: &Path, result: &FitResult, space: &ShapeSpace, trace: bool) -> Result<()> {
    let model = result.model(space)?;
    poses::save_poses(&result.poses, out.join("poses.csv"))?;
    actor::save_actor(&model, out.join("model.toml"))?;
    let file = fit::FitFile::new(
        stage,
        path_string(&relative_to(shape_space, out)),
        "poses.csv".into(),
        "model.toml".into(),
        result.s.clone(),
    );
    fit::save_fit(&file, out.join("fit.toml"))?;
    if trace {
        let mut csv = String::from(TraceRow::CSV_HEADER);
        csv.push('\n');
        for row in &result.trace {
            csv.push_str(&row.to_csv());
            csv.push('\n');
        }
        std::fs::write(out.join("trace.csv"), csv).map_err(|e| Error::Io {
            path: out.join("trace.csv"),
            source: e,
        })?;
    }
    Ok(())
}

fn load_fit_result(path: &Path) -> Result<(fit::FitRecord, ShapeSpace, FitResult)> {
    let rec = fit::load_fit(path)?;
    let space = shape_file::load_shape_space(rec.shape_space_path())?;
    if rec.file.shape.len() != space.dim() {
        return Err(Error::InvalidArgument(format!(
            "{}: {} shape coefficients for a {}-dimensional shape space",
            path.display(),
            rec.file.shape.len(),
            space.dim()
        )));
    }
    let poses = poses::load_poses(rec.poses_path(), space.template.skeleton.pose_dim())?;
    let result = FitResult {
        poses,
        s: rec.file.shape.clone(),
        trace: Vec::new(),
    };
    Ok((rec, space, result))
}

#[allow(clippy::too_many_arguments)]
fn run_fit(
    manifest_path: &Path,
    shape_space: &Path,
    stage: StageArg,
    config_path: Option<&Path>,
    init: Option<&Path>,
    output: &Path,
    trace: bool,
    exec: Exec,
) -> Result<()> {
    let cfg = solver_config(config_path)?;
    let m = manifest::load_manifest(manifest_path)?;
    let space = shape_file::load_shape_space(shape_space)?;
    // a stage-2 run must find its initialization before any heavy loading
    let start = if stage == StageArg::Two {
        let p = init.map(Path::to_path_buf).unwrap_or_else(|| output.join("fit.toml"));
        if !p.exists() {
            return Err(Error::MissingInput(format!(
                "stage 2 needs a stage-1 result, but {} does not exist (run `fit --stage 1` first)",
                p.display()
            )));
        }
        let (_, s2, r) = load_fit_result(&p)?;
        if s2.dim() != space.dim() {
            return Err(Error::InvalidArgument("stage-1 result uses a different shape space".into()));
        }
        if r.poses.len() != m.frames {
            return Err(Error::InvalidArgument(format!(
                "stage-1 result has {} frames, project has {}",
                r.poses.len(),
                m.frames
            )));
        }
        Some(r)
    } else {
        None
    };
    let mut obs = Observations {
        cameras: m.cameras.clone(),
        ..Default::default()
    };
    let result = match start {
        Some(init) => {
            obs.contour = contour_targets(&m, &cfg)?;
            solve_stage2(&space, &obs, &init, &cfg, exec)?
        }
        None => {
            let index = m
                .heatmap_index()
                .ok_or_else(|| Error::MissingInput(format!("{} lists no heat maps for stage 1", m.path.display())))?;
            obs.heat = heatmaps::load_heatmaps(index)?;
            if obs.heat.num_cameras() != m.cameras.len() {
                return Err(Error::InvalidArgument(format!(
                    "heat maps cover {} cameras, project has {}",
                    obs.heat.num_cameras(),
                    m.cameras.len()
                )));
            }
            let init = solve_stage1(&space, &obs, &cfg, exec)?;
            if stage == StageArg::Both {
                obs.contour = contour_targets(&m, &cfg)?;
                solve_stage2(&space, &obs, &init, &cfg, exec)?
            } else {
                init
            }
        }
    };
    let label = match stage {
        StageArg::One => "1",
        StageArg::Two => "2",
        StageArg::Both => "both",
    };
    write_fit(output, label, shape_space, &result, &space, trace)?;
    info!("fit written to {}", output.join("fit.toml").display());
    Ok(())
}

fn contour_targets(m: &manifest::ProjectManifest, cfg: &SolverConfig) -> Result<Vec<Vec<sogfit::energy::GradientImage>>> {
    let imgs = load_images(m)?;
    Ok(imgs
        .iter()
        .map(|per_cam| {
            per_cam
                .iter()
                .map(|i| image_gradients_with(i, cfg.energy.sobel_sigma, cfg.energy.delta_high))
                .collect()
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn render(
    model_path: &Path,
    poses_path: &Path,
    cameras_path: &Path,
    what: What,
    frame: usize,
    tau: f64,
    output: &Path,
    exec: Exec,
) -> Result<()> {
    let model = actor::load_actor(model_path)?;
    let seq = poses::load_poses(poses_path, model.skeleton.pose_dim())?;
    let pose = seq
        .get(frame)
        .ok_or_else(|| Error::InvalidArgument(format!("frame {frame} out of range (0..{})", seq.len())))?;
    let cams = cameras::load_cameras(cameras_path)?;
    let g = pose_gaussians(&model, &PoseVector(pose.clone()))?;
    std::fs::create_dir_all(output).map_err(|e| Error::Io {
        path: output.to_path_buf(),
        source: e,
    })?;
    for cam in &cams {
        match what {
            What::Visibility => {
                let v = render_visibility(cam, &g, exec);
                images::save_gray_png(
                    &v.background,
                    cam.width,
                    cam.height,
                    1.0,
                    output.join(format!("{}_visibility.png", cam.name)),
                )?;
            }
            What::Contour => {
                let v = render_visibility(cam, &g, exec);
                let mag = v.grad_magnitude();
                let max = mag.iter().cloned().fold(0.0, f64::max);
                images::save_gray_png(&mag, cam.width, cam.height, max, output.join(format!("{}_contour.png", cam.name)))?;
            }
            What::Silhouette => {
                let mask = render_silhouette(cam, &g, tau, exec)?;
                images::save_mask_pgm(&mask, output.join(format!("{}_silhouette.pgm", cam.name)))?;
            }
        }
    }
    Ok(())
}

fn colorize(manifest_path: &Path, fit_path: &Path, output: &Path, exec: Exec) -> Result<()> {
    let m = manifest::load_manifest(manifest_path)?;
    let (_, space, result) = load_fit_result(fit_path)?;
    if result.poses.len() != m.frames {
        return Err(Error::InvalidArgument(format!(
            "fit has {} frames, project has {}",
            result.poses.len(),
            m.frames
        )));
    }
    let model = result.model(&space)?;
    let imgs = load_images(&m)?;
    let (colored, _) = sogfit::appearance::colorize(&model, &result.poses, &m.cameras, &imgs, exec)?;
    actor::save_actor(&colored, output)
}

fn export_mesh(fit_path: &Path, frame: usize, rest: bool, output: &Path) -> Result<()> {
    let (_, space, result) = load_fit_result(fit_path)?;
    let model = result.model(&space)?;
    let pose = if rest {
        PoseVector::zeros(model.skeleton.pose_dim())
    } else {
        PoseVector(
            result
                .poses
                .get(frame)
                .ok_or_else(|| Error::InvalidArgument(format!("frame {frame} out of range (0..{})", result.poses.len())))?
                .clone(),
        )
    };
    let mesh = skin_actor(&space, &model, &pose)?;
    obj::save_obj(&mesh, output)
}

fn synth(scenario: Option<&Path>, seed: Option<u64>, output: &Path, exec: Exec) -> Result<()> {
    let mut cfg = match scenario {
        Some(p) => config::load_scenario(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let space = default_shape_space(cfg.database_size, cfg.seed, exec)?;
    let scene = SyntheticScene::generate(&cfg, &space, exec)?;
    let rgb = scene.render_images(exec)?;

    let space_path = output.join("shape_space.sogshape");
    shape_file::save_shape_space(&space, &space_path)?;
    cameras::save_cameras(&scene.obs.cameras, output.join("cameras.toml"))?;
    config::save_toml(&cfg, output.join("scenario.toml"))?;
    let mut image_names = Vec::new();
    for (c, per_cam) in rgb.iter().enumerate() {
        let mut names = Vec::new();
        for (t, img) in per_cam.iter().enumerate() {
            let name = format!("images/c{c}/f{t:04}.png");
            images::save_rgb_png(img, output.join(&name))?;
            names.push(name);
        }
        image_names.push(names);
    }
    heatmaps::save_heatmaps(&scene.obs.heat, output.join("heatmaps"))?;
    let m = manifest::ProjectManifest {
        path: output.join("project.toml"),
        cameras_file: "cameras.toml".into(),
        cameras: scene.obs.cameras.clone(),
        frames: cfg.frames,
        images: image_names,
        heatmaps: Some("heatmaps/index.toml".into()),
        output: "fit".into(),
    };
    manifest::save_manifest(&m, &m.path)?;

    let truth = output.join("truth");
    for (c, per_cam) in scene.silhouettes.iter().enumerate() {
        for (t, mask) in per_cam.iter().enumerate() {
            images::save_mask_pgm(mask, truth.join(format!("silhouettes/c{c}/f{t:04}.pgm")))?;
        }
    }
    let result = FitResult {
        poses: scene.poses.clone(),
        s: scene.s.clone(),
        trace: Vec::new(),
    };
    write_fit(&truth, "truth", &space_path, &result, &space, false)?;
    info!("synthetic project written to {}", output.display());
    Ok(())
}

fn silhouettes(model: &ActorModel, poses: &[Vec<f64>], cams: &[CameraModel], exec: Exec) -> Result<Vec<Vec<sogfit::evaluation::Mask>>> {
    cams.iter()
        .map(|cam| {
            poses
                .iter()
                .map(|p| render_silhouette(cam, &pose_gaussians(model, &PoseVector(p.clone()))?, 0.5, exec))
                .collect()
        })
        .collect()
}

fn eval(
    fit_path: &Path,
    truth_path: &Path,
    metrics: &[Metric],
    cameras_path: Option<&Path>,
    compensate: bool,
    output: &Path,
    exec: Exec,
) -> Result<()> {
    let (_, space, est) = load_fit_result(fit_path)?;
    let (_, truth_space, truth) = load_fit_result(truth_path)?;
    if est.poses.len() != truth.poses.len() {
        return Err(Error::InvalidArgument(format!(
            "fit has {} frames, ground truth has {}",
            est.poses.len(),
            truth.poses.len()
        )));
    }
    let est_model = est.model(&space)?;
    let truth_model = truth.model(&truth_space)?;
    let mut rows: Vec<(String, f64)> = Vec::new();
    if metrics.contains(&Metric::Joints) {
        let a = joint_positions(&est_model, &est.poses)?;
        let b = joint_positions(&truth_model, &truth.poses)?;
        let err = joint_error(&a, &b, compensate)?;
        let mean = err.iter().sum::<f64>() / err.len() as f64;
        rows.push(("joint_error_mm".into(), mean));
        rows.push(("joint_error_max_mm".into(), err.iter().cloned().fold(0.0, f64::max)));
        rows.push((
            "joint_error_pct_body_height".into(),
            100.0 * mean / 1000.0 / body_height(&truth_model),
        ));
        let (mut sq, mut n) = (0.0, 0usize);
        for (p, q) in est.poses.iter().zip(&truth.poses) {
            for k in sogfit::scene::ROOT_DOFS..p.len() {
                sq += (p[k] - q[k]).powi(2);
                n += 1;
            }
        }
        rows.push(("joint_angle_rms_deg".into(), (sq / n.max(1) as f64).sqrt().to_degrees()));
    }
    if metrics.contains(&Metric::Overlap) {
        let cam_path = cameras_path.ok_or_else(|| Error::MissingInput("the overlap metric needs --cameras".into()))?;
        let cams = cameras::load_cameras(cam_path)?;
        let pred = silhouettes(&est_model, &est.poses, &cams, exec)?;
        let reference = silhouettes(&truth_model, &truth.poses, &cams, exec)?;
        let pairs: Vec<_> = pred.into_iter().flatten().zip(reference.into_iter().flatten()).collect();
        let report = overlap_report(&pairs)?;
        rows.push(("precision".into(), report.precision));
        rows.push(("recall".into(), report.recall));
    }
    if metrics.contains(&Metric::Circumference) {
        let planes = MeasurePlanes::default();
        let rest_est = skin_actor(&space, &est_model, &PoseVector::zeros(est_model.skeleton.pose_dim()))?;
        let rest_truth = skin_actor(&truth_space, &truth_model, &PoseVector::zeros(truth_model.skeleton.pose_dim()))?;
        let a = body_circumferences(&rest_est, body_height(&est_model), &planes)?;
        let b = body_circumferences(&rest_truth, body_height(&truth_model), &planes)?;
        for (k, name) in ["chest", "waist", "hip"].iter().enumerate() {
            rows.push((format!("{name}_cm"), a[k]));
            rows.push((format!("{name}_truth_cm"), b[k]));
            rows.push((format!("{name}_error_cm"), (a[k] - b[k]).abs()));
        }
    }
    let mut csv = String::from("metric,value\n");
    for (k, v) in rows {
        csv.push_str(&format!("{k},{v:?}\n"));
    }
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(output, &csv).map_err(|e| Error::Io {
        path: output.to_path_buf(),
        source: e,
    })?;
    print!("{csv}");
    Ok(())
}
