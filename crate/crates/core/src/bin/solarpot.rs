//! `solarpot` — rooftop solar potential pipeline.
//!
//! Exit codes: 0 success, 1 per-feature error fraction above the configured
//! threshold, 2 input/config error.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use solarpot::ingest::{self, RunConfig};
use solarpot::pipeline;
use solarpot::pitch::{ForestParams, PitchModel};
use solarpot::roofs::{AzimuthOptions, Building, RoofObject, RoofSection};
use solarpot::shading::{DemRaster, SpatialIndex};
use solarpot::solar::WeatherSeries;
use solarpot::{Error, Result};

#[derive(Parser)]
#[command(name = "solarpot", version, about = "Rooftop solar potential engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Input sections file; defaults to the config's sections path.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Output file; stage-specific default next to the input.
    #[arg(long = "out")]
    output: Option<PathBuf>,
    /// Worker threads (0 = all cores); overrides the config.
    #[arg(long)]
    workers: Option<usize>,
    /// RNG seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: regularize, azimuth, pitch, pack, shade, pvout, report.
    Run(Common),
    /// Regularize section geometry against building footprints.
    Regularize(Common),
    /// Fill missing section azimuths from geometry.
    Azimuth(Common),
    /// Pitch model training and prediction.
    Pitch {
        #[command(subcommand)]
        action: PitchAction,
    },
    /// Pack panels on each section.
    Pack(Common),
    /// Compute horizon masks and sky-view factors.
    Shade(Common),
    /// Annual specific yield per section.
    Pvout(Common),
    /// Assemble the report, or evaluate the potential formula directly.
    Potential {
        /// Run configuration (JSON); required for report assembly.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Input sections file; defaults to the config's sections path.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Output report file; defaults to the config's report path.
        #[arg(long = "out")]
        output: Option<PathBuf>,
        /// Module count for the direct formula.
        #[arg(long)]
        modules: Option<f64>,
        /// Module nameplate power (Wp) for the direct formula.
        #[arg(long)]
        power_wp: Option<f64>,
        /// Specific yield (kWh/kWp/yr) for the direct formula.
        #[arg(long)]
        pvout: Option<f64>,
    },
    /// Sum report potentials over a regular planar grid.
    Aggregate(Common),
}

#[derive(Subcommand)]
enum PitchAction {
    /// Train the pitch model from the configured training CSV.
    Train(Common),
    /// Fill missing section pitches using the trained model.
    Predict(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    input: Option<PathBuf>,
    output: Option<PathBuf>,
}

impl Ctx {
    fn new(common: &Common) -> Result<Ctx> {
        let mut cfg = RunConfig::load(&common.config)?;
        if let Some(w) = common.workers {
            cfg.workers = w;
        }
        if let Some(s) = common.seed {
            cfg.seed = s;
        }
        Ok(Ctx { cfg, input: common.input.clone(), output: common.output.clone() })
    }

    fn sections_in(&self) -> PathBuf {
        self.input.clone().unwrap_or_else(|| PathBuf::from(&self.cfg.paths.sections))
    }

    fn out_or(&self, default: &str) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from(default))
    }

    /// Thread pool honoring the worker count; stages run inside it.
    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.workers)
            .build()
            .map_err(|e| Error::State(format!("thread pool: {e}")))
    }

    fn load_buildings(&self) -> Result<(Vec<Building>, Option<ingest::Projection>)> {
        ingest::load_buildings(Path::new(&self.cfg.paths.buildings), None)
    }

    fn load_sections(
        &self,
        path: &Path,
        proj: Option<&ingest::Projection>,
        buildings: Option<&[Building]>,
    ) -> Result<Vec<RoofSection>> {
        let ids: Option<HashSet<String>> =
            buildings.map(|bs| bs.iter().map(|b| b.id.clone()).collect());
        let (sections, _) = ingest::load_sections(path, proj, ids.as_ref())?;
        Ok(sections)
    }

    fn load_objects(
        &self,
        proj: Option<&ingest::Projection>,
        sections: &[RoofSection],
    ) -> Result<Vec<RoofObject>> {
        match &self.cfg.paths.objects {
            None => Ok(vec![]),
            Some(p) => {
                let ids: HashSet<String> = sections.iter().map(|s| s.id.clone()).collect();
                let (objects, _) = ingest::load_objects(Path::new(p), proj, Some(&ids))?;
                Ok(objects)
            }
        }
    }

    fn load_weather(&self) -> Result<WeatherSeries> {
        ingest::load_weather(
            Path::new(&self.cfg.paths.weather),
            self.cfg.site.latitude_deg,
            self.cfg.site.longitude_deg,
        )
    }

    fn load_dem(&self) -> Result<Option<DemRaster>> {
        match &self.cfg.paths.dem {
            None => Ok(None),
            Some(p) => Ok(Some(ingest::load_dem(Path::new(p))?)),
        }
    }

    fn load_pitch_model(&self) -> Result<Option<PitchModel>> {
        match &self.cfg.paths.pitch_model {
            None => Ok(None),
            Some(p) if Path::new(p).exists() => Ok(Some(PitchModel::load(Path::new(p))?)),
            Some(_) => Ok(None),
        }
    }

    fn azimuth_opts(&self) -> AzimuthOptions {
        AzimuthOptions {
            flat_roof_azimuth_deg: self.cfg.shading.flat_roof_azimuth_deg,
            northern_hemisphere: self.cfg.site.latitude_deg >= 0.0,
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run(c) => cmd_run(&Ctx::new(&c)?),
        Command::Regularize(c) => cmd_regularize(&Ctx::new(&c)?),
        Command::Azimuth(c) => cmd_azimuth(&Ctx::new(&c)?),
        Command::Pitch { action } => match action {
            PitchAction::Train(c) => cmd_pitch_train(&Ctx::new(&c)?),
            PitchAction::Predict(c) => cmd_pitch_predict(&Ctx::new(&c)?),
        },
        Command::Pack(c) => cmd_pack(&Ctx::new(&c)?),
        Command::Shade(c) => cmd_shade(&Ctx::new(&c)?),
        Command::Pvout(c) => cmd_pvout(&Ctx::new(&c)?),
        Command::Potential { config, input, output, modules, power_wp, pvout } => {
            if let (Some(n), Some(p), Some(y)) = (modules, power_wp, pvout) {
                let v = pipeline::potential_kwh_per_year(n, p, y)?;
                println!("{v}");
                return Ok(ExitCode::SUCCESS);
            }
            let config = config.ok_or_else(|| {
                Error::Argument(
                    "potential needs either --config or all of --modules/--power-wp/--pvout".into(),
                )
            })?;
            let cfg = RunConfig::load(&config)?;
            cmd_potential(&Ctx { cfg, input, output })
        }
        Command::Aggregate(c) => cmd_aggregate(&Ctx::new(&c)?),
    }
}

fn cmd_run(ctx: &Ctx) -> Result<ExitCode> {
    let mut cfg = ctx.cfg.clone();
    if let Some(p) = &ctx.input {
        cfg.paths.sections = p.display().to_string();
    }
    if let Some(p) = &ctx.output {
        cfg.paths.report_out = p.display().to_string();
    }
    let out = pipeline::execute_run(&cfg)?;
    let n_errors = out.report["totals"]["n_errors"].as_u64().unwrap_or(0);
    if n_errors > 0 {
        eprintln!("warning: {n_errors} section(s) failed");
    }
    if out.error_fraction > cfg.error_threshold {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

/// Shared shape of the per-stage commands: load sections, transform, save.
fn stage_command(
    ctx: &Ctx,
    default_out: &str,
    needs_buildings: bool,
    f: impl FnOnce(&Ctx, &mut Vec<RoofSection>, &[Building]) -> Result<()> + Send,
) -> Result<ExitCode> {
    let (buildings, proj) = if needs_buildings {
        ctx.load_buildings()?
    } else {
        (vec![], None)
    };
    let refs = needs_buildings.then_some(buildings.as_slice());
    let mut sections = ctx.load_sections(&ctx.sections_in(), proj.as_ref(), refs)?;
    ctx.pool()?.install(|| f(ctx, &mut sections, &buildings))?;
    ingest::save_sections(&ctx.out_or(default_out), &sections)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_regularize(ctx: &Ctx) -> Result<ExitCode> {
    stage_command(ctx, "sections_regularized.geojson", true, |_, sections, buildings| {
        pipeline::stage_regularize(buildings, sections);
        Ok(())
    })
}

fn cmd_azimuth(ctx: &Ctx) -> Result<ExitCode> {
    stage_command(ctx, "sections_azimuth.geojson", false, |ctx, sections, _| {
        pipeline::stage_azimuth(sections, &ctx.azimuth_opts());
        Ok(())
    })
}

fn cmd_pitch_train(ctx: &Ctx) -> Result<ExitCode> {
    let training = ctx.cfg.paths.training.as_ref().ok_or_else(|| {
        Error::Argument("config has no paths.training CSV for pitch training".into())
    })?;
    let model_out = ctx
        .output
        .clone()
        .or_else(|| ctx.cfg.paths.pitch_model.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::Argument("no --out or paths.pitch_model for the model".into()))?;
    let rows = solarpot::pitch::load_training_csv(Path::new(training))?;
    let params = ForestParams { seed: ctx.cfg.seed, ..ForestParams::default() };
    let model = ctx.pool()?.install(|| PitchModel::train(&rows, &params))?;
    model.save(&model_out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_pitch_predict(ctx: &Ctx) -> Result<ExitCode> {
    let model = ctx.load_pitch_model()?;
    stage_command(ctx, "sections_pitch.geojson", false, |ctx, sections, _| {
        pipeline::stage_pitch(sections, model.as_ref(), ctx.cfg.site.latitude_deg);
        Ok(())
    })
}

fn cmd_pack(ctx: &Ctx) -> Result<ExitCode> {
    stage_command(ctx, "sections_packed.geojson", false, |ctx, sections, _| {
        let objects = ctx.load_objects(None, sections)?;
        pipeline::stage_pack(sections, &objects, &ctx.cfg.panel);
        Ok(())
    })
}

fn cmd_shade(ctx: &Ctx) -> Result<ExitCode> {
    stage_command(ctx, "sections_shaded.geojson", true, |ctx, sections, buildings| {
        let dem = ctx.load_dem()?;
        let index = SpatialIndex::build(buildings.to_vec());
        pipeline::stage_shade(sections, buildings, &index, dem.as_ref(), &ctx.cfg.shading);
        Ok(())
    })
}

fn cmd_pvout(ctx: &Ctx) -> Result<ExitCode> {
    stage_command(ctx, "sections_pvout.geojson", false, |ctx, sections, _| {
        let weather = ctx.load_weather()?;
        pipeline::stage_pvout(sections, &weather, &ctx.cfg.pv);
        Ok(())
    })
}

fn cmd_potential(ctx: &Ctx) -> Result<ExitCode> {
    let (sections, _) = ingest::load_sections(&ctx.sections_in(), None, None)?;
    let report = pipeline::assemble_report(&sections, &ctx.cfg.panel)?;
    let out = ctx.out_or(&ctx.cfg.paths.report_out.clone());
    pipeline::write_json(&out, &report)?;
    if pipeline::report_error_fraction(&report) > ctx.cfg.error_threshold {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_aggregate(ctx: &Ctx) -> Result<ExitCode> {
    let input = ctx.input.clone().unwrap_or_else(|| PathBuf::from(&ctx.cfg.paths.report_out));
    let text = std::fs::read_to_string(&input)
        .map_err(|e| Error::io(input.display().to_string(), e))?;
    let report: serde_json::Value = serde_json::from_str(&text)?;
    let cells = pipeline::aggregate_report(&report, ctx.cfg.aggregate_cell_m)?;
    pipeline::write_json(&ctx.out_or("aggregate.geojson"), &cells)?;
    Ok(ExitCode::SUCCESS)
}
