//! Scenario files.
//!
//! A scenario is a TOML document with one table per concern. Only the array
//! size and the user angles are required; everything else has a default.
//! Unknown keys are rejected so typos never fall back silently to defaults.
//!
//! ```toml
//! [array]
//! antennas = 64
//!
//! [users]
//! angles = [-12.0, -7.0, 10.0, 0.0]
//! ```

use std::path::Path;

use lensmimo::linklevel::{LensSetup, PrecoderKind, Quantizer, ScenarioConfig};
use lensmimo::waveoptics::{ArraySpec, LensSpec, LensSystem, PropagationGrid};
use lensmimo::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    array: Option<RawArray>,
    users: Option<RawUsers>,
    #[serde(default)]
    lens: RawLens,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    bpm: RawBpm,
    #[serde(default)]
    simulation: RawSimulation,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArray {
    antennas: Option<usize>,
    spacing: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUsers {
    count: Option<usize>,
    angles: Option<Vec<f64>>,
    sigma_theta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLens {
    focal_length: Option<f64>,
    aperture: Option<f64>,
    permittivity: Option<f64>,
    distance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dx: Option<f64>,
    dz: Option<f64>,
    window: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    start: Option<f64>,
    stop: Option<f64>,
    step: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBpm {
    aod: Option<f64>,
    steps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    precoders: Option<Vec<String>>,
    quantizers: Option<Vec<String>>,
    lens_modes: Option<Vec<String>>,
    bits: Option<u32>,
    snr_db: Option<Vec<f64>>,
    trials: Option<usize>,
    seed: Option<u64>,
}

/// Every setting after defaults, in the form it is echoed back.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub array: ArraySection,
    pub users: UsersSection,
    pub lens: LensSection,
    pub grid: GridSection,
    pub sweep: SweepSection,
    pub bpm: BpmSection,
    pub simulation: SimulationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArraySection {
    pub antennas: usize,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UsersSection {
    pub count: usize,
    pub angles: Vec<f64>,
    pub sigma_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LensSection {
    pub focal_length: f64,
    pub aperture: f64,
    pub permittivity: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSection {
    pub dx: f64,
    pub dz: f64,
    pub window: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSection {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BpmSection {
    pub aod: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSection {
    pub precoders: Vec<String>,
    pub quantizers: Vec<String>,
    pub lens_modes: Vec<String>,
    pub bits: u32,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

/// Whether a run places the lens in front of the array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LensMode {
    Lens,
    NoLens,
}

impl LensMode {
    pub fn name(self) -> &'static str {
        match self {
            LensMode::Lens => "lens",
            LensMode::NoLens => "no-lens",
        }
    }
}

/// 1-based line of `key` inside `[section]`, if it appears literally.
fn line_of(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = name.trim().to_string();
        } else if current == section
            && t.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        {
            return i + 1;
        }
    }
    0
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn parse_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config_str(path, &text)
}

pub fn parse_config_str(path: &Path, text: &str) -> Result<Config> {
    let at = |line: usize, msg: String| Error::Config(format!("{}:{line}: {msg}", path.display()));
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        at(
            e.span().map_or(0, |s| line_of_offset(text, s.start)),
            e.message().to_string(),
        )
    })?;
    let fail = |section: &str, key: &str, msg: String| {
        at(
            line_of(text, section, key),
            format!("{section}.{key}: {msg}"),
        )
    };

    let array = raw
        .array
        .ok_or_else(|| fail("array", "antennas", "missing [array] table".into()))?;
    let antennas = array
        .antennas
        .ok_or_else(|| fail("array", "antennas", "required".into()))?;
    if antennas == 0 {
        return Err(fail("array", "antennas", "must be at least 1".into()));
    }
    let spacing = array.spacing.unwrap_or(0.5);
    if !(spacing > 0.0) {
        return Err(fail(
            "array",
            "spacing",
            format!("must be positive, got {spacing}"),
        ));
    }

    let users = raw
        .users
        .ok_or_else(|| fail("users", "angles", "missing [users] table".into()))?;
    let angles = users
        .angles
        .ok_or_else(|| fail("users", "angles", "required".into()))?;
    if angles.is_empty() {
        return Err(fail("users", "angles", "needs at least one angle".into()));
    }
    if let Some(a) = angles.iter().find(|a| !(a.abs() < 90.0)) {
        return Err(fail(
            "users",
            "angles",
            format!("angle {a} must lie strictly between -90 and 90"),
        ));
    }
    let count = users.count.unwrap_or(angles.len());
    if count != angles.len() {
        return Err(fail(
            "users",
            "count",
            format!("{count} users but {} angles", angles.len()),
        ));
    }
    if count > antennas {
        return Err(fail(
            "users",
            "count",
            format!("{count} users exceed {antennas} antennas"),
        ));
    }
    let sigma_theta = users.sigma_theta.unwrap_or(5.0);
    if !(sigma_theta > 0.0) {
        return Err(fail(
            "users",
            "sigma_theta",
            format!("must be positive, got {sigma_theta}"),
        ));
    }

    let lens = LensSection {
        focal_length: raw.lens.focal_length.unwrap_or(40.0),
        aperture: raw.lens.aperture.unwrap_or(20.0),
        permittivity: raw.lens.permittivity.unwrap_or(2.4),
        distance: raw.lens.distance.unwrap_or(25.0),
    };
    let grid = GridSection {
        dx: raw.grid.dx.unwrap_or(0.3125),
        dz: raw.grid.dz.unwrap_or(1.0),
        window: raw.grid.window.unwrap_or(80.0),
    };
    let sweep = SweepSection {
        start: raw.sweep.start.unwrap_or(-30.0),
        stop: raw.sweep.stop.unwrap_or(30.0),
        step: raw.sweep.step.unwrap_or(0.5),
    };
    if !(sweep.step > 0.0 && sweep.stop >= sweep.start && sweep.start > -90.0 && sweep.stop < 90.0)
    {
        return Err(fail("sweep", "step", format!("invalid sweep {sweep:?}")));
    }
    let bpm = BpmSection {
        aod: raw.bpm.aod.unwrap_or(0.0),
        steps: raw.bpm.steps.unwrap_or(80),
    };
    if bpm.steps == 0 {
        return Err(fail("bpm", "steps", "must be at least 1".into()));
    }

    let strings = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let s = raw.simulation;
    let simulation = SimulationSection {
        precoders: s.precoders.unwrap_or_else(|| strings(&["zf", "mrt"])),
        quantizers: s.quantizers.unwrap_or_else(|| strings(&["rvq", "mvcq"])),
        lens_modes: s.lens_modes.unwrap_or_else(|| strings(&["lens"])),
        bits: s.bits.unwrap_or(6),
        snr_db: s
            .snr_db
            .unwrap_or_else(|| (0..=6).map(|i| 5.0 * i as f64).collect()),
        trials: s.trials.unwrap_or(1000),
        seed: s.seed.unwrap_or(1),
    };
    for p in &simulation.precoders {
        p.parse::<PrecoderKind>()
            .map_err(|e| fail("simulation", "precoders", e.to_string()))?;
    }
    for q in &simulation.quantizers {
        q.parse::<Quantizer>()
            .map_err(|e| fail("simulation", "quantizers", e.to_string()))?;
    }
    for m in &simulation.lens_modes {
        if m != "lens" && m != "no-lens" {
            return Err(fail(
                "simulation",
                "lens_modes",
                format!("unknown mode '{m}' (expected lens or no-lens)"),
            ));
        }
    }
    for (key, empty) in [
        ("precoders", simulation.precoders.is_empty()),
        ("quantizers", simulation.quantizers.is_empty()),
        ("lens_modes", simulation.lens_modes.is_empty()),
        ("snr_db", simulation.snr_db.is_empty()),
    ] {
        if empty {
            return Err(fail("simulation", key, "must not be empty".into()));
        }
    }
    if simulation.trials == 0 {
        return Err(fail("simulation", "trials", "must be at least 1".into()));
    }
    if !(1..=lensmimo::feedback::MAX_BITS).contains(&simulation.bits) {
        return Err(fail(
            "simulation",
            "bits",
            format!(
                "must lie in 1..={}, got {}",
                lensmimo::feedback::MAX_BITS,
                simulation.bits
            ),
        ));
    }

    let cfg = Config {
        array: ArraySection { antennas, spacing },
        users: UsersSection {
            count,
            angles,
            sigma_theta,
        },
        lens,
        grid,
        sweep,
        bpm,
        simulation,
    };
    // Surface geometry problems here rather than midway through a run.
    cfg.lens_system()?;
    Ok(cfg)
}

impl Config {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn lens(&self) -> Result<LensSpec> {
        LensSpec::from_permittivity(
            self.lens.focal_length,
            self.lens.aperture,
            self.lens.permittivity,
        )
    }

    pub fn grid(&self) -> Result<PropagationGrid> {
        PropagationGrid::new(self.grid.dx, self.grid.dz, self.grid.window)
    }

    pub fn lens_system(&self) -> Result<LensSystem> {
        LensSystem::new(
            self.lens()?,
            self.grid()?,
            ArraySpec::new(self.array.antennas, self.array.spacing, self.lens.distance)?,
        )
    }

    /// Swept angles, computed from integer multiples of the step so they land exactly on the grid.
    pub fn sweep_angles(&self) -> Vec<f64> {
        let s = &self.sweep;
        let n = ((s.stop - s.start) / s.step + 1e-9).floor() as usize;
        (0..=n).map(|i| s.start + i as f64 * s.step).collect()
    }

    pub fn precoders(&self) -> Vec<PrecoderKind> {
        self.simulation
            .precoders
            .iter()
            .map(|p| p.parse().expect("validated"))
            .collect()
    }

    pub fn quantizers(&self) -> Vec<Quantizer> {
        self.simulation
            .quantizers
            .iter()
            .map(|q| q.parse().expect("validated"))
            .collect()
    }

    pub fn lens_modes(&self) -> Vec<LensMode> {
        self.simulation
            .lens_modes
            .iter()
            .map(|m| {
                if m == "lens" {
                    LensMode::Lens
                } else {
                    LensMode::NoLens
                }
            })
            .collect()
    }

    pub fn scenario(
        &self,
        precoder: PrecoderKind,
        quantizer: Quantizer,
        mode: LensMode,
    ) -> Result<ScenarioConfig> {
        let lens = match mode {
            LensMode::Lens => Some(LensSetup {
                lens: self.lens()?,
                grid: self.grid()?,
                distance: self.lens.distance,
            }),
            LensMode::NoLens => None,
        };
        Ok(ScenarioConfig {
            antennas: self.array.antennas,
            spacing: self.array.spacing,
            user_angles: self.users.angles.clone(),
            sigma_theta: self.users.sigma_theta,
            lens,
            precoder,
            quantizer,
            bits: self.simulation.bits,
            snr_db: self.simulation.snr_db.clone(),
            trials: self.simulation.trials,
            seed: self.simulation.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Config> {
        parse_config_str(Path::new("scenario.toml"), text)
    }

    const MINIMAL: &str = "[array]\nantennas = 64\n\n[users]\ncount = 2\nangles = [-15.0, 15.0]\n";

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.array.spacing, 0.5);
        assert_eq!(c.users.sigma_theta, 5.0);
        assert_eq!(c.lens.distance, 25.0);
        assert_eq!(c.lens.focal_length, 40.0);
        assert_eq!(c.lens.permittivity, 2.4);
        assert_eq!(c.simulation.trials, 1000);
        assert_eq!(c.sweep_angles().len(), 121);
        assert_eq!(c.sweep_angles()[60], 0.0);
    }

    #[test]
    fn echoed_config_parses_back_to_itself() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn more_users_than_antennas_is_rejected() {
        let e = parse("[array]\nantennas = 2\n[users]\nangles = [1.0, 2.0, 3.0]\n").unwrap_err();
        assert!(e.to_string().contains("exceed"), "{e}");
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse(&format!("{MINIMAL}\n[lens]\nfocal_lenght = 30.0\n")).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("focal_lenght"), "{msg}");
        assert!(msg.contains("scenario.toml:9:"), "{msg}");
        assert_eq!(e.category(), lensmimo::ErrorCategory::Config);
    }

    #[test]
    fn count_must_match_angles() {
        let e = parse("[array]\nantennas = 8\n[users]\ncount = 3\nangles = [0.0]\n").unwrap_err();
        assert!(
            e.to_string().contains("scenario.toml:4: users.count"),
            "{e}"
        );
    }

    #[test]
    fn bad_quantizer_is_rejected() {
        let e = parse(&format!(
            "{MINIMAL}[simulation]\nquantizers = [\"mvcq:foo\"]\n"
        ))
        .unwrap_err();
        assert!(e.to_string().contains("simulation.quantizers"), "{e}");
    }

    #[test]
    fn coarse_grid_is_rejected_up_front() {
        let e = parse(&format!("{MINIMAL}[grid]\ndx = 1.0\n")).unwrap_err();
        assert_eq!(e.category(), lensmimo::ErrorCategory::Config);
    }
}
