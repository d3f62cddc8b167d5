//! From fields to per-antenna power profiles.

use rayon::prelude::*;

use super::bpm::{lens_phase_profile, propagate, ComplexField, FieldHistory, Propagator};
use super::{ArraySpec, LensSpec, PropagationGrid};
use crate::channel::PowerProfile;
use crate::error::{Error, Result};

/// Sampled intensity scaled to a fixed total.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDensity {
    pub values: Vec<f64>,
    pub z: f64,
}

impl PowerDensity {
    fn from_intensity(raw: Vec<f64>, z: f64, target_sum: f64) -> Result<Self> {
        if !(target_sum > 0.0 && target_sum.is_finite()) {
            return Err(Error::Domain(format!(
                "target sum must be positive, got {target_sum}"
            )));
        }
        let total = crate::summation::sum(raw.iter().copied());
        if !(total > 0.0) {
            return Err(Error::Degenerate(format!(
                "field at z={z} carries no intensity"
            )));
        }
        let c = target_sum / total;
        Ok(Self {
            values: raw.into_iter().map(|v| v * c).collect(),
            z,
        })
    }
}

/// `c·|u|²` with `c` chosen so the samples sum to `target_sum`.
pub fn intensity(u: &ComplexField, target_sum: f64) -> Result<PowerDensity> {
    PowerDensity::from_intensity(
        u.samples.iter().map(|c| c.norm_sqr()).collect(),
        u.z,
        target_sum,
    )
}

/// Bins a power density into `M` antenna cells spanning the aperture.
///
/// Each bin is `⌊D·N/(W·M)⌋` samples wide and the `M` bins sit symmetrically
/// about the optical axis. A sample owns the cell `[i−½, i+½]`, so when a bin
/// edge falls on a sample that sample's power is split between the two bins.
/// Power outside the bins is dropped and the result rescaled to sum `M`.
pub fn extract_power_profile(
    p: &PowerDensity,
    grid: &PropagationGrid,
    array: &ArraySpec,
    aperture: f64,
    angle_deg: f64,
) -> Result<PowerProfile> {
    let ns = grid.ns();
    let m = array.num_antennas;
    if p.values.len() != ns {
        return Err(Error::Config(format!(
            "power density has {} samples, grid expects {ns}",
            p.values.len()
        )));
    }
    array.check_fits(grid)?;
    let width = (aperture * ns as f64 / (grid.window() * m as f64) + 1e-9).floor();
    if width < 1.0 {
        return Err(Error::Resolution {
            aperture,
            ns,
            window: grid.window(),
            antennas: m,
        });
    }
    let start = grid.center() as f64 - 0.5 * m as f64 * width;
    let end = start + m as f64 * width;
    if start < -0.5 || end > ns as f64 - 0.5 {
        return Err(Error::Config(format!(
            "{m} bins of {width} samples do not fit in {ns} samples"
        )));
    }
    let mut bins = Vec::with_capacity(m);
    for j in 0..m {
        let lo = start + j as f64 * width;
        let hi = lo + width;
        let first = (lo - 0.5).ceil().max(0.0) as usize;
        let last = ((hi + 0.5).floor() as usize).min(ns - 1);
        let mut acc = 0.0;
        for i in first..=last {
            let c = i as f64;
            let overlap = (hi.min(c + 0.5) - lo.max(c - 0.5)).max(0.0);
            acc += overlap * p.values[i];
        }
        bins.push(acc);
    }
    let total = crate::summation::sum(bins.iter().copied());
    if !(total > 0.0) {
        return Err(Error::Degenerate(format!(
            "no power reaches the array at angle {angle_deg} deg"
        )));
    }
    let scale = m as f64 / total;
    PowerProfile::new(bins.into_iter().map(|a| a * scale).collect(), angle_deg)
}

/// Power profile at the array plane using steps of `stride·dz`.
///
/// When the array distance is not a whole number of steps, the intensity is
/// interpolated linearly between the two planes around it.
pub fn profile_at(
    lens: &LensSpec,
    grid: &PropagationGrid,
    array: &ArraySpec,
    aod_deg: f64,
    stride: usize,
) -> Result<PowerProfile> {
    if stride == 0 {
        return Err(Error::Config("stride must be at least 1".into()));
    }
    let step = stride as f64 * grid.dz();
    let ell = array.lens_distance;
    let ratio = ell / step;
    if ratio < 1.0 - 1e-9 {
        return Err(Error::Config(format!(
            "array distance {ell} is shorter than one step of {step}"
        )));
    }
    let mut whole = (ratio + 1e-9).floor();
    let mut frac = ratio - whole;
    if frac < 1e-9 {
        frac = 0.0;
    }
    if whole < 1.0 {
        whole = 1.0;
        frac = 0.0;
    }
    let u0 = lens_phase_profile(lens, grid, aod_deg.to_radians())?;
    let prop = Propagator::with_step(grid, step);
    let target = u0.total_intensity();
    let mut u = u0.samples;
    for _ in 0..whole as usize {
        prop.advance(&mut u, target);
    }
    let mut raw: Vec<f64> = u.iter().map(|c| c.norm_sqr()).collect();
    if frac > 0.0 {
        prop.advance(&mut u, target);
        for (r, c) in raw.iter_mut().zip(&u) {
            *r = (1.0 - frac) * *r + frac * c.norm_sqr();
        }
    }
    let density = PowerDensity::from_intensity(raw, ell, array.num_antennas as f64)?;
    extract_power_profile(&density, grid, array, lens.aperture(), aod_deg)
}

/// Lens, sampling grid and receive array taken together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensSystem {
    pub lens: LensSpec,
    pub grid: PropagationGrid,
    pub array: ArraySpec,
}

impl LensSystem {
    pub fn new(lens: LensSpec, grid: PropagationGrid, array: ArraySpec) -> Result<Self> {
        grid.check_aperture(lens.aperture())?;
        array.check_fits(&grid)?;
        let ns = grid.ns();
        let m = array.num_antennas;
        if (lens.aperture() * ns as f64 / (grid.window() * m as f64) + 1e-9).floor() < 1.0 {
            return Err(Error::Resolution {
                aperture: lens.aperture(),
                ns,
                window: grid.window(),
                antennas: m,
            });
        }
        Ok(Self { lens, grid, array })
    }

    /// Full-resolution profile for a plane wave arriving at `aod_deg`.
    pub fn profile(&self, aod_deg: f64) -> Result<PowerProfile> {
        self.profile_with_stride(aod_deg, 1)
    }

    pub fn profile_with_stride(&self, aod_deg: f64, stride: usize) -> Result<PowerProfile> {
        profile_at(&self.lens, &self.grid, &self.array, aod_deg, stride)
    }

    /// Profiles for many angles, computed in parallel and returned in input order.
    pub fn profiles(&self, angles_deg: &[f64], stride: usize) -> Result<Vec<PowerProfile>> {
        angles_deg
            .par_iter()
            .map(|&a| self.profile_with_stride(a, stride))
            .collect()
    }

    /// Every plane from the lens to `steps·dz`.
    pub fn history(&self, aod_deg: f64, steps: usize) -> Result<FieldHistory> {
        propagate(
            &lens_phase_profile(&self.lens, &self.grid, aod_deg.to_radians())?,
            steps,
        )
    }
}
