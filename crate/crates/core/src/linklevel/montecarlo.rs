//! Seeded Monte-Carlo estimation of the ergodic sum rate.
//!
//! Trial `t` at SNR point `s` draws its channels from its own substream
//! addressed by `(seed, s, t)`, and results are reduced in trial order, so a
//! run is bit-identical for any number of worker threads. Codebooks are drawn
//! once per run from per-user substreams and shared by all trials.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::{mrt_precoder, received_sinr, sum_rate, zf_precoder};
use crate::channel::{apply_lens, correlation_matrix, draw_channel, PowerProfile, UserConfig};
use crate::error::{Error, Result};
use crate::feedback::{
    correlate_codebook, fit_gaussian_model, gaussian_profile, generate_mvcq, generate_rvq,
    quantize, Codebook,
};
use crate::rng::{substream, Domain};
use crate::summation::{sum, Neumaier};
use crate::waveoptics::{ArraySpec, LensSpec, LensSystem, PropagationGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecoderKind {
    Zf,
    Mrt,
}

impl fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrecoderKind::Zf => "zf",
            PrecoderKind::Mrt => "mrt",
        })
    }
}

impl FromStr for PrecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zf" => Ok(PrecoderKind::Zf),
            "mrt" => Ok(PrecoderKind::Mrt),
            _ => Err(Error::Config(format!(
                "unknown precoder '{s}' (expected zf or mrt)"
            ))),
        }
    }
}

/// Where MVCQ codebooks take their power profiles from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileSource {
    /// Full-resolution propagation.
    Bpm,
    /// Interpolated one-Gaussian model.
    Gaussian,
    /// Propagation with steps of `stride·dz`.
    SubBpm(usize),
}

impl fmt::Display for ProfileSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileSource::Bpm => f.write_str("bpm"),
            ProfileSource::Gaussian => f.write_str("gaussian"),
            ProfileSource::SubBpm(s) => write!(f, "sub-bpm:{s}"),
        }
    }
}

impl FromStr for ProfileSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bpm" => Ok(ProfileSource::Bpm),
            "gaussian" => Ok(ProfileSource::Gaussian),
            _ => {
                let stride = s
                    .strip_prefix("sub-bpm:")
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "unknown profile source '{s}' (expected bpm, gaussian or sub-bpm:<stride>)"
                        ))
                    })?;
                Ok(ProfileSource::SubBpm(stride))
            }
        }
    }
}

/// How users report their channel to the base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantizer {
    /// The base station knows the true channel.
    FullCsi,
    /// Random codebook coloured by each user's correlation.
    Rvq,
    /// Isotropic random codebook.
    RvqIid,
    /// Correlated codebook weighted by the lens power profile.
    Mvcq(ProfileSource),
}

impl fmt::Display for Quantizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantizer::FullCsi => f.write_str("full-csi"),
            Quantizer::Rvq => f.write_str("rvq"),
            Quantizer::RvqIid => f.write_str("rvq-iid"),
            Quantizer::Mvcq(ProfileSource::Bpm) => f.write_str("mvcq"),
            Quantizer::Mvcq(src) => write!(f, "mvcq:{src}"),
        }
    }
}

impl FromStr for Quantizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-csi" => Ok(Quantizer::FullCsi),
            "rvq" => Ok(Quantizer::Rvq),
            "rvq-iid" => Ok(Quantizer::RvqIid),
            "mvcq" => Ok(Quantizer::Mvcq(ProfileSource::Bpm)),
            _ => match s.strip_prefix("mvcq:") {
                Some(src) => Ok(Quantizer::Mvcq(src.parse()?)),
                None => Err(Error::Config(format!(
                    "unknown quantizer '{s}' (expected full-csi, rvq, rvq-iid, mvcq or mvcq:<source>)"
                ))),
            },
        }
    }
}

impl Quantizer {
    /// File-name friendly label.
    pub fn label(&self) -> String {
        self.to_string().replace(':', "-")
    }
}

/// Lens in front of the array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensSetup {
    pub lens: LensSpec,
    pub grid: PropagationGrid,
    /// Lens-to-array distance.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub antennas: usize,
    pub spacing: f64,
    pub user_angles: Vec<f64>,
    pub sigma_theta: f64,
    pub lens: Option<LensSetup>,
    pub precoder: PrecoderKind,
    pub quantizer: Quantizer,
    pub bits: u32,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

/// Angles swept when fitting the Gaussian profile model.
fn gaussian_sweep() -> Vec<f64> {
    (0..=120).map(|i| -30.0 + 0.5 * i as f64).collect()
}

impl ScenarioConfig {
    pub fn users(&self) -> usize {
        self.user_angles.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.users();
        if k == 0 {
            return Err(Error::Config("scenario needs at least one user".into()));
        }
        if k > self.antennas {
            return Err(Error::Config(format!(
                "{k} users exceed {} antennas",
                self.antennas
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Config("SNR grid is empty".into()));
        }
        for &a in &self.user_angles {
            UserConfig::new(a, self.sigma_theta)?;
        }
        if !(self.spacing > 0.0) {
            return Err(Error::Config(format!(
                "antenna spacing must be positive, got {}",
                self.spacing
            )));
        }
        if let Some(sys) = self.lens_system()? {
            if let Quantizer::Mvcq(ProfileSource::SubBpm(s)) = self.quantizer {
                let step = s as f64 * sys.grid.dz();
                if sys.array.lens_distance < step {
                    return Err(Error::Config(format!(
                        "sub-BPM step {step} exceeds the lens distance {}",
                        sys.array.lens_distance
                    )));
                }
            }
        }
        if self.quantizer != Quantizer::FullCsi {
            crate::feedback::generate_rvq(1, self.bits, &mut substream(0, Domain::Misc, 0, 0))?;
        }
        Ok(())
    }

    pub fn lens_system(&self) -> Result<Option<LensSystem>> {
        self.lens
            .map(|l| {
                LensSystem::new(
                    l.lens,
                    l.grid,
                    ArraySpec::new(self.antennas, self.spacing, l.distance)?,
                )
            })
            .transpose()
    }

    /// Every effective parameter as key/value pairs, in a fixed order.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = vec![
            ("antennas".to_string(), self.antennas.to_string()),
            ("users".to_string(), self.users().to_string()),
            ("spacing".to_string(), self.spacing.to_string()),
            ("user_angles".to_string(), join(&self.user_angles)),
            ("sigma_theta".to_string(), self.sigma_theta.to_string()),
            ("lens".to_string(), self.lens.is_some().to_string()),
        ];
        if let Some(l) = &self.lens {
            out.extend([
                (
                    "focal_length".to_string(),
                    l.lens.focal_length().to_string(),
                ),
                ("aperture".to_string(), l.lens.aperture().to_string()),
                (
                    "permittivity".to_string(),
                    l.lens.permittivity().to_string(),
                ),
                ("lens_distance".to_string(), l.distance.to_string()),
                ("dx".to_string(), l.grid.dx().to_string()),
                ("dz".to_string(), l.grid.dz().to_string()),
                ("window".to_string(), l.grid.window().to_string()),
            ]);
        }
        out.extend([
            ("precoder".to_string(), self.precoder.to_string()),
            ("quantizer".to_string(), self.quantizer.to_string()),
            ("bits".to_string(), self.bits.to_string()),
            ("snr_db".to_string(), join(&self.snr_db)),
            ("trials".to_string(), self.trials.to_string()),
            ("seed".to_string(), self.seed.to_string()),
        ]);
        out
    }
}

/// Power profiles for each user: the true channel's and the one the codebook assumes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioProfiles {
    pub channel: Vec<PowerProfile>,
    pub codebook: Vec<PowerProfile>,
}

/// Computes every profile a scenario needs by propagating through its lens.
pub fn scenario_profiles(cfg: &ScenarioConfig) -> Result<ScenarioProfiles> {
    cfg.validate()?;
    let Some(sys) = cfg.lens_system()? else {
        let ones: Vec<PowerProfile> = cfg
            .user_angles
            .iter()
            .map(|&a| PowerProfile::ones(cfg.antennas, a))
            .collect();
        return Ok(ScenarioProfiles {
            channel: ones.clone(),
            codebook: ones,
        });
    };
    let channel = sys.profiles(&cfg.user_angles, 1)?;
    let codebook = match cfg.quantizer {
        Quantizer::Mvcq(ProfileSource::SubBpm(s)) => sys.profiles(&cfg.user_angles, s)?,
        Quantizer::Mvcq(ProfileSource::Gaussian) => {
            let sweep = sys.profiles(&gaussian_sweep(), 1)?;
            let model = fit_gaussian_model(&sweep, sys.array.lens_distance)?;
            cfg.user_angles
                .iter()
                .map(|&a| gaussian_profile(a, &model, &sys.array))
                .collect::<Result<_>>()?
        }
        _ => channel.clone(),
    };
    Ok(ScenarioProfiles { channel, codebook })
}

fn correlation_factors(cfg: &ScenarioConfig) -> Result<Vec<DMatrix<Complex64>>> {
    cfg.user_angles
        .iter()
        .map(|&a| {
            let user = UserConfig::new(a, cfg.sigma_theta)?;
            correlation_matrix(&user, cfg.antennas, cfg.spacing)?.sqrt()
        })
        .collect()
}

/// One codebook per user, or none under full CSI.
pub fn build_codebooks(cfg: &ScenarioConfig, profiles: &ScenarioProfiles) -> Result<Vec<Codebook>> {
    cfg.validate()?;
    if cfg.quantizer == Quantizer::FullCsi {
        return Ok(Vec::new());
    }
    let factors = correlation_factors(cfg)?;
    (0..cfg.users())
        .map(|k| {
            let mut rng = substream(cfg.seed, Domain::Codebook, k as u32, 0);
            let base = generate_rvq(cfg.antennas, cfg.bits, &mut rng)?;
            match cfg.quantizer {
                Quantizer::RvqIid => Ok(base),
                Quantizer::Rvq => correlate_codebook(&base, &factors[k]),
                Quantizer::Mvcq(_) => generate_mvcq(
                    &correlate_codebook(&base, &factors[k])?,
                    &profiles.codebook[k],
                ),
                Quantizer::FullCsi => unreachable!(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrPoint {
    pub snr_db: f64,
    pub mean_sum_rate: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub points: Vec<SnrPoint>,
    pub config: ScenarioConfig,
}

impl SimResult {
    pub fn at(&self, snr_db: f64) -> Option<&SnrPoint> {
        self.points.iter().find(|p| p.snr_db == snr_db)
    }
}

/// Runs a scenario end to end, computing profiles and codebooks first.
pub fn run_monte_carlo(cfg: &ScenarioConfig) -> Result<SimResult> {
    let profiles = scenario_profiles(cfg)?;
    let codebooks = build_codebooks(cfg, &profiles)?;
    run_monte_carlo_with(cfg, &profiles, &codebooks)
}

/// Runs a scenario with precomputed profiles and codebooks.
pub fn run_monte_carlo_with(
    cfg: &ScenarioConfig,
    profiles: &ScenarioProfiles,
    codebooks: &[Codebook],
) -> Result<SimResult> {
    cfg.validate()?;
    let k = cfg.users();
    if profiles.channel.len() != k || profiles.channel.iter().any(|p| p.len() != cfg.antennas) {
        return Err(Error::Config(format!(
            "expected {k} channel profiles of length {}",
            cfg.antennas
        )));
    }
    let quantized = cfg.quantizer != Quantizer::FullCsi;
    if quantized && (codebooks.len() != k || codebooks.iter().any(|c| c.antennas() != cfg.antennas))
    {
        return Err(Error::Config(format!(
            "expected {k} codebooks with {} antennas",
            cfg.antennas
        )));
    }
    let factors = correlation_factors(cfg)?;
    let lens = cfg.lens.is_some();

    let trial = |snr_index: usize, t: usize, p_t: f64| -> Result<f64> {
        let mut rng = substream(cfg.seed, Domain::Channel, snr_index as u32, t as u32);
        let mut h_true = DMatrix::<Complex64>::zeros(k, cfg.antennas);
        let mut h_hat = DMatrix::<Complex64>::zeros(k, cfg.antennas);
        for u in 0..k {
            let h = draw_channel(&factors[u], &mut rng);
            let h: DVector<Complex64> = if lens {
                apply_lens(&h, &profiles.channel[u])?
            } else {
                h
            };
            h_true.set_row(u, &h.transpose());
            let estimate = if quantized {
                quantize(&h, &codebooks[u])?.direction
            } else {
                h
            };
            h_hat.set_row(u, &estimate.transpose());
        }
        let precoder = match cfg.precoder {
            PrecoderKind::Zf => zf_precoder(&h_hat)?,
            PrecoderKind::Mrt => mrt_precoder(&h_hat)?,
        };
        Ok(sum_rate(&received_sinr(
            &h_true,
            precoder.normalized(),
            p_t,
        )?))
    };

    let mut points = Vec::with_capacity(cfg.snr_db.len());
    for (s, &snr) in cfg.snr_db.iter().enumerate() {
        let p_t = 10f64.powf(snr / 10.0);
        let rates = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                trial(s, t, p_t).map_err(|e| Error::Trial {
                    snr_index: s,
                    trial: t,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let n = rates.len() as f64;
        let mean = sum(rates.iter().copied()) / n;
        let stderr = if rates.len() > 1 {
            let mut acc = Neumaier::default();
            for r in &rates {
                acc.add((r - mean) * (r - mean));
            }
            (acc.total() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        log::debug!(
            "{} {} at {snr} dB: {mean:.4} +- {stderr:.4}",
            cfg.precoder,
            cfg.quantizer
        );
        points.push(SnrPoint {
            snr_db: snr,
            mean_sum_rate: mean,
            stderr,
            trials: rates.len(),
        });
    }
    Ok(SimResult {
        points,
        config: cfg.clone(),
    })
}
