//! Subcommands and the cache files they share.
//!
//! Every cache file carries its generating parameters and their hash in the
//! header. A cache whose hash does not match the current configuration is
//! rebuilt, unless `--no-build` forbids new propagation runs.

use std::path::{Path, PathBuf};

use lensmimo::channel::{PowerProfile, ProfileTable};
use lensmimo::feedback::{fit_gaussian_model, gaussian_profile, Codebook, GaussianModel};
use lensmimo::io::{
    param_hash, profile_params, read_codebook, read_gaussian_model, read_profiles, render_codebook,
    render_comparison, render_gaussian_model, render_intensity, render_profiles, render_sim_result,
    write_text, Params,
};
use lensmimo::linklevel::{
    build_codebooks, run_monte_carlo_with, scenario_profiles, ProfileSource, Quantizer,
    ScenarioConfig, ScenarioProfiles, SimResult,
};
use lensmimo::waveoptics::find_focal_peak;
use lensmimo::{Error, Result};

use crate::config::{Config, LensMode};

pub const PROFILE_CACHE: &str = "power_profiles.csv";
pub const GAUSSIAN_CACHE: &str = "gaussian_model.csv";

/// Where a run reads and writes, and how it may treat stale caches.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub no_build: bool,
}

fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

/// Parameters that determine the swept profile table.
fn sweep_params(cfg: &Config) -> Result<Params> {
    let mut p = profile_params(&cfg.lens_system()?);
    p.extend([
        kv("sweep_start", cfg.sweep.start),
        kv("sweep_stop", cfg.sweep.stop),
        kv("sweep_step", cfg.sweep.step),
    ]);
    Ok(p)
}

fn write_reported(path: &Path, text: &str) -> Result<()> {
    write_text(path, text)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Writes the effective configuration next to the results.
pub fn echo_config(run: &RunManifest, cfg: &Config) -> Result<()> {
    let text = cfg.to_toml();
    log::info!(
        "effective configuration from {}:\n{text}",
        run.config_path.display()
    );
    if let Some(seed) = run.seed {
        log::info!("seed {seed} from the command line replaces the scenario seed");
    }
    write_text(&run.out_dir.join("effective_config.toml"), &text)
}

fn build_profiles(run: &RunManifest, cfg: &Config) -> Result<Vec<PowerProfile>> {
    let angles = cfg.sweep_angles();
    log::info!("propagating {} angles", angles.len());
    let profiles = cfg.lens_system()?.profiles(&angles, 1)?;
    write_reported(
        &run.cache_dir.join(PROFILE_CACHE),
        &render_profiles(&sweep_params(cfg)?, &profiles),
    )?;
    Ok(profiles)
}

/// Swept profiles from the cache, rebuilt when missing or stale.
fn cached_profiles(run: &RunManifest, cfg: &Config) -> Result<Vec<PowerProfile>> {
    let path = run.cache_dir.join(PROFILE_CACHE);
    let problem = match read_profiles(&path) {
        Ok((table, profiles)) if table.matches(&sweep_params(cfg)?) => return Ok(profiles),
        Ok(_) => "was built with different parameters".to_string(),
        Err(Error::Io { .. }) => "does not exist".to_string(),
        Err(e) => format!("is unreadable ({e})"),
    };
    if run.no_build {
        return Err(Error::Config(format!(
            "power-profile cache {} {problem}; run `lensmimo lens-profile` with this configuration first",
            path.display()
        )));
    }
    log::info!(
        "power-profile cache {} {problem}, rebuilding",
        path.display()
    );
    build_profiles(run, cfg)
}

/// Gaussian model from the cache, refitted from the profiles when missing or stale.
fn cached_gaussian(
    run: &RunManifest,
    cfg: &Config,
    profiles: &[PowerProfile],
) -> Result<GaussianModel> {
    let path = run.cache_dir.join(GAUSSIAN_CACHE);
    let params = sweep_params(cfg)?;
    if let Ok((table, model)) = read_gaussian_model(&path) {
        if table.params.starts_with(&params)
            && table.hash.as_deref() == Some(param_hash(&table.params).as_str())
        {
            return Ok(model);
        }
    }
    fit_and_store(run, cfg, profiles).map(|(model, _)| model)
}

fn fit_and_store(
    run: &RunManifest,
    cfg: &Config,
    profiles: &[PowerProfile],
) -> Result<(GaussianModel, String)> {
    let model = fit_gaussian_model(profiles, cfg.lens.distance)?;
    let text = render_gaussian_model(&sweep_params(cfg)?, &model);
    write_reported(&run.cache_dir.join(GAUSSIAN_CACHE), &text)?;
    Ok((model, text))
}

pub fn cmd_lens_profile(run: &RunManifest, cfg: &Config) -> Result<()> {
    let profiles = build_profiles(run, cfg)?;
    println!(
        "{} profiles for {} antennas in {}",
        profiles.len(),
        cfg.array.antennas,
        run.cache_dir.join(PROFILE_CACHE).display()
    );
    Ok(())
}

pub fn cmd_bpm_field(run: &RunManifest, cfg: &Config) -> Result<()> {
    let sys = cfg.lens_system()?;
    let history = sys.history(cfg.bpm.aod, cfg.bpm.steps)?;
    let mut params = profile_params(&sys);
    params.extend([kv("aod_deg", cfg.bpm.aod), kv("steps", cfg.bpm.steps)]);
    write_reported(
        &run.out_dir.join("bpm_field.csv"),
        &render_intensity(&params, &history),
    )?;

    if history.edge_flagged() {
        log::warn!(
            "up to {:.3}% of the intensity reached the window edge; widen the window",
            100.0 * history.max_edge_fraction()
        );
    }
    let mut report = String::new();
    for (k, v) in &params {
        report.push_str(&format!("# {k} = {v}\n"));
    }
    report.push_str(
        "status,peak_distance,gain,column,sample,max_drift,max_edge_fraction,edge_flagged\n",
    );
    let tail = format!(
        "{},{},{}",
        history.max_drift(),
        history.max_edge_fraction(),
        history.edge_flagged()
    );
    match find_focal_peak(&history) {
        Ok(peak) => {
            report.push_str(&format!(
                "ok,{},{},{},{},{tail}\n",
                peak.distance, peak.gain, peak.column, peak.sample
            ));
            println!(
                "focal peak at {} wavelengths, intensity gain {:.4}",
                peak.distance, peak.gain
            );
        }
        Err(e @ Error::RangeTooShort { .. }) => {
            log::warn!("{e}; increase [bpm] steps");
            report.push_str(&format!("range_too_short,,,,,{tail}\n"));
            println!("no focal peak inside the propagated range: {e}");
        }
        Err(e) => return Err(e),
    }
    write_reported(&run.out_dir.join("bpm_peak.csv"), &report)
}

pub fn cmd_fit_gaussian(run: &RunManifest, cfg: &Config) -> Result<()> {
    let profiles = cached_profiles(run, cfg)?;
    let (model, text) = fit_and_store(run, cfg, &profiles)?;
    write_reported(&run.out_dir.join("gaussian_fit.csv"), &text)?;
    if model.poor_fits() > 0 {
        log::warn!(
            "{} of {} angles fitted poorly and were left out",
            model.poor_fits(),
            model.nodes().len()
        );
    }
    let (lo, hi) = model.range();
    println!(
        "Gaussian model over [{lo}, {hi}] deg from {} angles",
        model.nodes().len()
    );
    Ok(())
}

/// Profiles for one lens run, read from the swept table.
fn lens_profiles(
    run: &RunManifest,
    cfg: &Config,
    scenario: &ScenarioConfig,
    table: &ProfileTable,
) -> Result<ScenarioProfiles> {
    let channel: Vec<PowerProfile> = scenario
        .user_angles
        .iter()
        .map(|&a| table.lookup(a).cloned())
        .collect::<Result<_>>()?;
    let codebook = match scenario.quantizer {
        Quantizer::Mvcq(ProfileSource::SubBpm(stride)) => {
            cfg.lens_system()?.profiles(&scenario.user_angles, stride)?
        }
        Quantizer::Mvcq(ProfileSource::Gaussian) => {
            let model = cached_gaussian(run, cfg, table.profiles())?;
            let array = cfg.lens_system()?.array;
            scenario
                .user_angles
                .iter()
                .map(|&a| gaussian_profile(a, &model, &array))
                .collect::<Result<_>>()?
        }
        _ => channel.clone(),
    };
    Ok(ScenarioProfiles { channel, codebook })
}

fn codebook_params(cfg: &Config, scenario: &ScenarioConfig, k: usize) -> Result<Params> {
    let mut p = vec![
        kv("antennas", scenario.antennas),
        kv("spacing", scenario.spacing),
        kv("sigma_theta", scenario.sigma_theta),
        kv("bits", scenario.bits),
        kv("seed", scenario.seed),
        kv("quantizer", scenario.quantizer),
        kv("user", k),
        kv("angle", scenario.user_angles[k]),
        kv("lens", scenario.lens.is_some()),
    ];
    if scenario.lens.is_some() && matches!(scenario.quantizer, Quantizer::Mvcq(_)) {
        p.extend(sweep_params(cfg)?);
    }
    Ok(p)
}

/// Per-user codebooks, reused from the cache when their parameters match.
fn codebooks(
    run: &RunManifest,
    cfg: &Config,
    scenario: &ScenarioConfig,
    profiles: &ScenarioProfiles,
) -> Result<Vec<Codebook>> {
    if scenario.quantizer == Quantizer::FullCsi {
        return Ok(Vec::new());
    }
    let keys: Vec<Params> = (0..scenario.users())
        .map(|k| codebook_params(cfg, scenario, k))
        .collect::<Result<_>>()?;
    let paths: Vec<PathBuf> = keys
        .iter()
        .map(|p| {
            run.cache_dir
                .join("codebooks")
                .join(format!("codebook_{}.csv", &param_hash(p)[..16]))
        })
        .collect();
    let cached: Option<Vec<Codebook>> = keys
        .iter()
        .zip(&paths)
        .map(|(key, path)| {
            let (table, c) = read_codebook(path).ok()?;
            let valid = table.params.starts_with(key)
                && table.hash.as_deref() == Some(param_hash(&table.params).as_str());
            valid.then_some(c)
        })
        .collect();
    if let Some(c) = cached {
        return Ok(c);
    }
    let built = build_codebooks(scenario, profiles)?;
    for ((key, path), c) in keys.iter().zip(&paths).zip(&built) {
        write_text(path, &render_codebook(key, c))?;
    }
    Ok(built)
}

pub fn output_name(scenario: &ScenarioConfig, mode: LensMode) -> String {
    let suffix = match mode {
        LensMode::Lens => "",
        LensMode::NoLens => "_no-lens",
    };
    format!(
        "{}_{}{suffix}.csv",
        scenario.precoder,
        scenario.quantizer.label()
    )
}

pub fn cmd_simulate(run: &RunManifest, cfg: &Config) -> Result<()> {
    let modes = cfg.lens_modes();
    let table = if modes.contains(&LensMode::Lens) {
        Some(ProfileTable::new(
            cached_profiles(run, cfg)?,
            ProfileTable::DEFAULT_MAX_GAP_DEG,
        )?)
    } else {
        None
    };
    let mut runs: Vec<(String, SimResult)> = Vec::new();
    for &mode in &modes {
        for precoder in cfg.precoders() {
            for quantizer in cfg.quantizers() {
                let scenario = cfg.scenario(precoder, quantizer, mode)?;
                let profiles = match &table {
                    Some(t) if mode == LensMode::Lens => lens_profiles(run, cfg, &scenario, t)?,
                    _ => scenario_profiles(&scenario)?,
                };
                let books = codebooks(run, cfg, &scenario, &profiles)?;
                let label = format!("{precoder}-{}-{}", quantizer.label(), mode.name());
                log::info!(
                    "running {label}: {} trials x {} SNR points",
                    scenario.trials,
                    scenario.snr_db.len()
                );
                let result = run_monte_carlo_with(&scenario, &profiles, &books)?;
                write_reported(
                    &run.out_dir.join(output_name(&scenario, mode)),
                    &render_sim_result(&result),
                )?;
                runs.push((label, result));
            }
        }
    }
    let shared: Params = runs[0]
        .1
        .config
        .metadata()
        .into_iter()
        .filter(|(k, _)| !matches!(k.as_str(), "precoder" | "quantizer" | "lens"))
        .collect();
    write_reported(
        &run.out_dir.join("comparison.csv"),
        &render_comparison(&shared, &runs)?,
    )?;
    println!("{} runs written to {}", runs.len(), run.out_dir.display());
    Ok(())
}
