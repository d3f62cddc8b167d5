//! Hyperbolic plano-convex lens geometry.
//!
//! The curved face is the hyperbola that brings a plane wave to a point focus
//! at distance `f`. With `x1` measured along the axis from the focus side,
//! its half-height is `y1² = (n²−1)(x1−f)² + 2(n−1)(x1−f)f`, which is the same
//! curve as `y1² = A(x1−B)² − C`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensSpec {
    focal_length: f64,
    aperture: f64,
    refractive_index: f64,
    surface_radii: Option<(f64, f64)>,
}

impl LensSpec {
    pub fn new(focal_length: f64, aperture: f64, refractive_index: f64) -> Result<Self> {
        if !(refractive_index > 1.0 && refractive_index.is_finite()) {
            return Err(Error::Domain(format!(
                "refractive index must exceed 1, got {refractive_index}"
            )));
        }
        if !(focal_length > 0.0 && focal_length.is_finite()) {
            return Err(Error::Domain(format!(
                "focal length must be positive, got {focal_length}"
            )));
        }
        if !(aperture > 0.0 && aperture.is_finite()) {
            return Err(Error::Domain(format!(
                "aperture must be positive, got {aperture}"
            )));
        }
        Ok(Self {
            focal_length,
            aperture,
            refractive_index,
            surface_radii: None,
        })
    }

    /// Lens whose index follows from a relative permittivity, `n = √εr`.
    pub fn from_permittivity(focal_length: f64, aperture: f64, permittivity: f64) -> Result<Self> {
        Self::new(focal_length, aperture, permittivity.sqrt())
    }

    /// Attaches classical surface radii; they must satisfy the lensmaker relation.
    pub fn with_surface_radii(mut self, r1: f64, r2: f64) -> Result<Self> {
        let inv_f = (self.refractive_index - 1.0) * (1.0 / r1 - 1.0 / r2);
        let target = 1.0 / self.focal_length;
        if !inv_f.is_finite() || (inv_f - target).abs() > 1e-9 * target {
            return Err(Error::Domain(format!(
                "radii R1={r1}, R2={r2} give 1/f={inv_f}, expected {target}"
            )));
        }
        self.surface_radii = Some((r1, r2));
        Ok(self)
    }

    pub fn focal_length(&self) -> f64 {
        self.focal_length
    }

    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    pub fn refractive_index(&self) -> f64 {
        self.refractive_index
    }

    pub fn permittivity(&self) -> f64 {
        self.refractive_index * self.refractive_index
    }

    pub fn surface_radii(&self) -> Option<(f64, f64)> {
        self.surface_radii
    }

    pub fn thickness(&self) -> f64 {
        lens_thickness(self.focal_length, self.aperture, self.refractive_index)
            .expect("validated lens parameters")
    }

    pub fn contour_a(&self) -> f64 {
        let n = self.refractive_index;
        n * n - 1.0
    }

    pub fn contour_b(&self) -> f64 {
        let n = self.refractive_index;
        n * self.focal_length / (n + 1.0)
    }

    pub fn contour_c(&self) -> f64 {
        let n = self.refractive_index;
        (n - 1.0) / (n + 1.0) * self.focal_length * self.focal_length
    }
}

/// Centre thickness of a hyperbolic lens of focal length `f` and aperture `d`.
///
/// Evaluated as `d² / (4(n−1)(√(f² + (n+1)d²/(4(n−1))) + f))`, which equals
/// `(√(f² + (n+1)d²/(4(n−1))) − f)/(n+1)` without the cancellation.
pub fn lens_thickness(f: f64, d: f64, n: f64) -> Result<f64> {
    if !(n > 1.0) || !(f > 0.0) || !(d >= 0.0) {
        return Err(Error::Domain(format!(
            "lens thickness needs n > 1, f > 0, D >= 0 (got n={n}, f={f}, D={d})"
        )));
    }
    let root = (f * f + (n + 1.0) * d * d / (4.0 * (n - 1.0))).sqrt();
    let t = d * d / (4.0 * (n - 1.0) * (root + f));
    if !t.is_finite() {
        return Err(Error::Domain(format!(
            "non-finite lens thickness for n={n}, f={f}, D={d}"
        )));
    }
    Ok(t)
}

/// Half-height `y1` of the lens contour at axial coordinate `x1`.
pub fn hyperbolic_contour(lens: &LensSpec, x1: f64) -> Result<f64> {
    let n = lens.refractive_index;
    let f = lens.focal_length;
    let s = x1 - f;
    let radicand = (n * n - 1.0) * s * s + 2.0 * (n - 1.0) * s * f;
    if radicand < 0.0 {
        // Round-off right at the vertex is not a domain violation.
        let scale = (n * n - 1.0) * s * s + 2.0 * (n - 1.0) * s.abs() * f;
        if radicand >= -1e-12 * scale {
            return Ok(0.0);
        }
        return Err(Error::Domain(format!(
            "x1={x1} lies outside the contour (radicand {radicand})"
        )));
    }
    Ok(radicand.sqrt())
}
