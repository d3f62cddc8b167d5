//! Scalar-wave beam propagation through a thin dielectric lens.
//!
//! Lengths are in units of the wavelength unless a grid says otherwise. The
//! transverse axis is sampled at `x_m = m·dx` for `m ∈ [−N/2, N/2)`, so the
//! sample at index `N/2` sits on the optical axis.

mod bpm;
mod geometry;
mod profile;

pub use bpm::{
    bpm_step, find_focal_peak, lens_phase_profile, propagate, ComplexField, FieldHistory,
    FocalPeak, Propagator,
};
pub use geometry::{hyperbolic_contour, lens_thickness, LensSpec};
pub use profile::{extract_power_profile, intensity, profile_at, LensSystem, PowerDensity};

use crate::error::{Error, Result};

/// Transverse and axial sampling of the propagation window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationGrid {
    wavelength: f64,
    dx: f64,
    dz: f64,
    window: f64,
    ns: usize,
}

impl PropagationGrid {
    /// Grid with unit wavelength.
    pub fn new(dx: f64, dz: f64, window: f64) -> Result<Self> {
        Self::with_wavelength(1.0, dx, dz, window)
    }

    pub fn with_wavelength(wavelength: f64, dx: f64, dz: f64, window: f64) -> Result<Self> {
        for (name, v) in [
            ("wavelength", wavelength),
            ("dx", dx),
            ("dz", dz),
            ("window", window),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        let ratio = window / dx;
        let ns = ratio.round();
        if (ratio - ns).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Config(format!(
                "window {window} is not an integer multiple of dx {dx}"
            )));
        }
        let ns = ns as usize;
        if ns < 2 || !ns.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "sample count window/dx = {ns} must be even and at least 2"
            )));
        }
        Ok(Self {
            wavelength,
            dx,
            dz,
            window,
            ns,
        })
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn ns(&self) -> usize {
        self.ns
    }

    pub fn kappa(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// Index of the on-axis sample.
    pub fn center(&self) -> usize {
        self.ns / 2
    }

    /// Transverse coordinate of sample `i`.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.dx
    }

    /// Same grid with a different axial step.
    pub fn with_dz(&self, dz: f64) -> Result<Self> {
        Self::with_wavelength(self.wavelength, self.dx, dz, self.window)
    }

    /// Rejects apertures that leave less than half the window as guard band.
    pub fn check_aperture(&self, aperture: f64) -> Result<()> {
        if aperture > self.window {
            return Err(Error::Config(format!(
                "aperture {aperture} is wider than the grid window {}",
                self.window
            )));
        }
        if 2.0 * aperture > self.window + 1e-9 {
            return Err(Error::Config(format!(
                "window {} must be at least twice the aperture {aperture} to keep FFT wraparound out of the field",
                self.window
            )));
        }
        Ok(())
    }
}

/// Receive array behind the lens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArraySpec {
    pub num_antennas: usize,
    pub spacing: f64,
    pub lens_distance: f64,
}

impl ArraySpec {
    pub fn new(num_antennas: usize, spacing: f64, lens_distance: f64) -> Result<Self> {
        if num_antennas == 0 {
            return Err(Error::Config("array needs at least one antenna".into()));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Config(format!(
                "antenna spacing must be positive, got {spacing}"
            )));
        }
        if !(lens_distance > 0.0 && lens_distance.is_finite()) {
            return Err(Error::Config(format!(
                "lens-to-array distance must be positive, got {lens_distance}"
            )));
        }
        Ok(Self {
            num_antennas,
            spacing,
            lens_distance,
        })
    }

    pub fn span(&self) -> f64 {
        (self.num_antennas as f64 - 1.0) * self.spacing
    }

    pub fn check_fits(&self, grid: &PropagationGrid) -> Result<()> {
        if self.span() > grid.window() {
            return Err(Error::Config(format!(
                "array span {} exceeds the grid window {}",
                self.span(),
                grid.window()
            )));
        }
        Ok(())
    }
}
