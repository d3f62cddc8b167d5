//! Split-step Fresnel propagation.
//!
//! One step multiplies the field spectrum by the Fresnel transfer function
//! `exp(jκΔz)·exp(−jπλΔz·fx²)`, the continuous Fourier transform of the
//! quadratic-phase impulse response `exp(jκx²/(2Δz))`. Sampling that chirp
//! directly and taking its DFT aliases badly once `Δx` approaches the
//! wavelength, while the closed form is exact for every band-limited field.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{LensSpec, PropagationGrid};
use crate::error::{Error, Result};

/// Intensity fraction in the outer tenth of each window side above which a
/// run is flagged for wraparound.
const EDGE_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub samples: Vec<Complex64>,
    /// Distance behind the lens exit plane.
    pub z: f64,
    pub grid: PropagationGrid,
}

impl ComplexField {
    pub fn new(samples: Vec<Complex64>, z: f64, grid: PropagationGrid) -> Result<Self> {
        if samples.len() != grid.ns() {
            return Err(Error::Config(format!(
                "field has {} samples, grid expects {}",
                samples.len(),
                grid.ns()
            )));
        }
        Ok(Self { samples, z, grid })
    }

    pub fn total_intensity(&self) -> f64 {
        total_intensity(&self.samples)
    }
}

fn total_intensity(u: &[Complex64]) -> f64 {
    crate::summation::sum(u.iter().map(|c| c.norm_sqr()))
}

/// Fraction of the intensity in the outer 10% of the window on either side.
fn edge_fraction(u: &[Complex64], grid: &PropagationGrid) -> f64 {
    let total = total_intensity(u);
    if total == 0.0 {
        return 0.0;
    }
    let limit = 0.4 * grid.window();
    let edge: f64 = u
        .iter()
        .enumerate()
        .filter(|(i, _)| grid.x(*i).abs() >= limit)
        .map(|(_, c)| c.norm_sqr())
        .sum();
    edge / total
}

/// Field just behind a thin lens illuminated by a plane wave arriving at `aod` radians.
///
/// Samples outside the aperture are zero. Inside it the amplitude is one, so
/// intensities downstream read directly as gains over the incident level.
pub fn lens_phase_profile(
    lens: &LensSpec,
    grid: &PropagationGrid,
    aod: f64,
) -> Result<ComplexField> {
    if !(aod.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Domain(format!(
            "angle of departure {aod} rad must lie in (-pi/2, pi/2)"
        )));
    }
    grid.check_aperture(lens.aperture())?;
    let kappa = grid.kappa();
    let f = lens.focal_length();
    let half = 0.5 * lens.aperture() + 1e-9 * grid.dx();
    let tilt = aod.sin();
    let samples = (0..grid.ns())
        .map(|i| {
            let x = grid.x(i);
            if x.abs() > half {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(1.0, -kappa * x * x / (2.0 * f) - kappa * x * tilt)
            }
        })
        .collect();
    ComplexField::new(samples, 0.0, *grid)
}

/// Reusable single-step propagator for a fixed grid and step length.
#[derive(Clone)]
pub struct Propagator {
    grid: PropagationGrid,
    step: f64,
    transfer: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator")
            .field("grid", &self.grid)
            .field("step", &self.step)
            .finish_non_exhaustive()
    }
}

/// Outcome of one step before renormalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    /// Relative change of total intensity that renormalization removed.
    pub drift: f64,
    pub edge_fraction: f64,
}

impl Propagator {
    /// Propagator advancing by the grid's `dz`.
    pub fn new(grid: &PropagationGrid) -> Self {
        Self::with_step(grid, grid.dz())
    }

    pub fn with_step(grid: &PropagationGrid, step: f64) -> Self {
        let ns = grid.ns();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(ns);
        let ifft = planner.plan_fft_inverse(ns);
        let kappa = grid.kappa();
        let lambda = grid.wavelength();
        let df = 1.0 / (ns as f64 * grid.dx());
        // The inverse transform is unnormalized; fold 1/N into the kernel.
        let scale = Complex64::from_polar(1.0 / ns as f64, kappa * step);
        let transfer = (0..ns)
            .map(|k| {
                let fx = if k < ns / 2 {
                    k as f64
                } else {
                    k as f64 - ns as f64
                } * df;
                scale * Complex64::from_polar(1.0, -std::f64::consts::PI * lambda * step * fx * fx)
            })
            .collect();
        Self {
            grid: *grid,
            step,
            transfer,
            fft,
            ifft,
        }
    }

    pub fn step_length(&self) -> f64 {
        self.step
    }

    pub fn grid(&self) -> &PropagationGrid {
        &self.grid
    }

    /// Advances `samples` in place and rescales them to total intensity `target`.
    pub fn advance(&self, samples: &mut [Complex64], target: f64) -> StepStats {
        self.fft.process(samples);
        for (s, h) in samples.iter_mut().zip(&self.transfer) {
            *s *= h;
        }
        self.ifft.process(samples);
        let total = total_intensity(samples);
        let drift = (total / target - 1.0).abs();
        if total > 0.0 {
            let c = (target / total).sqrt();
            for s in samples.iter_mut() {
                *s *= c;
            }
        }
        log::trace!(
            "bpm step {}: pre-normalization drift {drift:.3e}",
            self.step
        );
        if drift > 0.05 {
            log::warn!("bpm step drift {drift:.3e} exceeds 5%");
        }
        StepStats {
            drift,
            edge_fraction: edge_fraction(samples, &self.grid),
        }
    }

    pub fn step(&self, u: &ComplexField) -> ComplexField {
        let mut samples = u.samples.clone();
        self.advance(&mut samples, u.total_intensity());
        ComplexField {
            samples,
            z: u.z + self.step,
            grid: u.grid,
        }
    }
}

/// One propagation step of length `dz`, conserving total intensity.
pub fn bpm_step(u: &ComplexField) -> ComplexField {
    Propagator::new(&u.grid).step(u)
}

/// Fields at `z0, z0 + s, …, z0 + n·s` for a fixed step `s`.
#[derive(Debug, Clone)]
pub struct FieldHistory {
    grid: PropagationGrid,
    step: f64,
    z0: f64,
    columns: Vec<Vec<Complex64>>,
    stats: Vec<StepStats>,
    reference_level: f64,
}

impl FieldHistory {
    pub fn grid(&self) -> &PropagationGrid {
        &self.grid
    }

    pub fn step_length(&self) -> f64 {
        self.step
    }

    /// Number of steps taken; there are `steps() + 1` columns.
    pub fn steps(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn z(&self, n: usize) -> f64 {
        self.z0 + n as f64 * self.step
    }

    pub fn column(&self, n: usize) -> &[Complex64] {
        &self.columns[n]
    }

    pub fn field(&self, n: usize) -> ComplexField {
        ComplexField {
            samples: self.columns[n].clone(),
            z: self.z(n),
            grid: self.grid,
        }
    }

    pub fn intensity_column(&self, n: usize) -> Vec<f64> {
        self.columns[n].iter().map(|c| c.norm_sqr()).collect()
    }

    /// Peak intensity of the input field, the level gains are quoted against.
    pub fn reference_level(&self) -> f64 {
        self.reference_level
    }

    /// Per-step statistics; entry `n` describes the step into column `n + 1`.
    pub fn step_stats(&self) -> &[StepStats] {
        &self.stats
    }

    pub fn max_drift(&self) -> f64 {
        self.stats.iter().map(|s| s.drift).fold(0.0, f64::max)
    }

    pub fn max_edge_fraction(&self) -> f64 {
        self.stats
            .iter()
            .map(|s| s.edge_fraction)
            .fold(0.0, f64::max)
    }

    /// True when wraparound energy reached the window guard band.
    pub fn edge_flagged(&self) -> bool {
        self.max_edge_fraction() > EDGE_LIMIT
    }
}

/// Applies `steps` grid steps to `u0` and keeps every intermediate field.
pub fn propagate(u0: &ComplexField, steps: usize) -> Result<FieldHistory> {
    propagate_with(&Propagator::new(&u0.grid), u0, steps)
}

pub fn propagate_with(prop: &Propagator, u0: &ComplexField, steps: usize) -> Result<FieldHistory> {
    if prop.grid != u0.grid {
        return Err(Error::Config(
            "propagator and field use different grids".into(),
        ));
    }
    let target = u0.total_intensity();
    if !(target > 0.0) {
        return Err(Error::Degenerate(
            "cannot propagate an all-zero field".into(),
        ));
    }
    let mut columns = Vec::with_capacity(steps + 1);
    let mut stats = Vec::with_capacity(steps);
    let mut current = u0.samples.clone();
    columns.push(current.clone());
    for _ in 0..steps {
        stats.push(prop.advance(&mut current, target));
        columns.push(current.clone());
    }
    let history = FieldHistory {
        grid: u0.grid,
        step: prop.step,
        z0: u0.z,
        columns,
        stats,
        reference_level: u0.samples.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max),
    };
    log::debug!(
        "propagated {steps} steps of {}: max drift {:.3e}, max edge fraction {:.3e}",
        prop.step,
        history.max_drift(),
        history.max_edge_fraction()
    );
    if history.edge_flagged() {
        log::warn!(
            "edge intensity fraction {:.3e} exceeds {EDGE_LIMIT}; widen the window",
            history.max_edge_fraction()
        );
    }
    Ok(history)
}

/// Location and strength of the brightest sample in a history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalPeak {
    pub distance: f64,
    /// Peak intensity over the incident level.
    pub gain: f64,
    pub column: usize,
    pub sample: usize,
}

/// Global intensity maximum over the history; ties go to the smaller `z`.
pub fn find_focal_peak(history: &FieldHistory) -> Result<FocalPeak> {
    let mut best = (0usize, 0usize, f64::NEG_INFINITY);
    for (n, col) in history.columns.iter().enumerate() {
        for (i, c) in col.iter().enumerate() {
            let v = c.norm_sqr();
            if v > best.2 {
                best = (n, i, v);
            }
        }
    }
    let (column, sample, peak) = best;
    if history.steps() > 0 && column == history.steps() {
        return Err(Error::RangeTooShort {
            z: history.z(column),
        });
    }
    Ok(FocalPeak {
        distance: history.z(column),
        gain: peak / history.reference_level,
        column,
        sample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lens() -> LensSpec {
        LensSpec::from_permittivity(40.0, 20.0, 2.4).unwrap()
    }

    fn grid() -> PropagationGrid {
        PropagationGrid::new(0.3125, 1.0, 80.0).unwrap()
    }

    #[test]
    fn lens_field_is_even_at_normal_incidence() {
        let g = grid();
        let u = lens_phase_profile(&lens(), &g, 0.0).unwrap();
        let c = g.center();
        assert_eq!(u.samples[c], Complex64::new(1.0, 0.0));
        for m in 1..c {
            assert_eq!(u.samples[c + m], u.samples[c - m]);
        }
        // 20λ aperture at 0.3125λ spacing: 64 + 1 samples inside.
        let inside = u.samples.iter().filter(|s| s.norm_sqr() > 0.0).count();
        assert_eq!(inside, 65);
    }

    #[test]
    fn oblique_phase_adds_linear_tilt() {
        let g = grid();
        let l = lens();
        let aod = 15f64.to_radians();
        let u = lens_phase_profile(&l, &g, aod).unwrap();
        let u0 = lens_phase_profile(&l, &g, 0.0).unwrap();
        let c = g.center();
        let expected = -g.kappa() * g.dx() * aod.sin();
        for i in c - 20..c + 20 {
            let d_tilt = (u.samples[i + 1] / u.samples[i]).arg();
            let d_plain = (u0.samples[i + 1] / u0.samples[i]).arg();
            let diff = (Complex64::from_polar(1.0, d_tilt - d_plain - expected)).arg();
            assert!(diff.abs() < 1e-9, "sample {i}: {diff}");
        }
    }

    #[test]
    fn lens_field_rejects_bad_inputs() {
        let g = grid();
        assert!(lens_phase_profile(&lens(), &g, std::f64::consts::FRAC_PI_2).is_err());
        let wide = LensSpec::from_permittivity(40.0, 90.0, 2.4).unwrap();
        assert!(matches!(
            lens_phase_profile(&wide, &g, 0.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn step_conserves_intensity() {
        let u = lens_phase_profile(&lens(), &grid(), 0.2).unwrap();
        let v = bpm_step(&u);
        let rel = (v.total_intensity() / u.total_intensity() - 1.0).abs();
        assert!(rel < 1e-12);
        assert_eq!(v.z, 1.0);
    }

    #[test]
    fn transfer_function_is_unitary() {
        let u = lens_phase_profile(&lens(), &grid(), 0.1).unwrap();
        let h = propagate(&u, 40).unwrap();
        assert!(h.max_drift() < 1e-12, "{}", h.max_drift());
    }

    #[test]
    fn plane_wave_keeps_its_shape() {
        let g = grid();
        let u = ComplexField::new(vec![Complex64::new(0.6, 0.8); g.ns()], 0.0, g).unwrap();
        let h = propagate(&u, 10).unwrap();
        let last = h.intensity_column(10);
        for (i, v) in last.iter().enumerate() {
            if g.x(i).abs() < 0.4 * g.window() {
                assert!((v - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn two_half_steps_equal_one_full_step() {
        let g = grid();
        let u = lens_phase_profile(&lens(), &g, 0.05).unwrap();
        let fine = propagate(&u, 10).unwrap();
        let coarse = propagate_with(&Propagator::with_step(&g, 2.0), &u, 5).unwrap();
        let a = fine.intensity_column(10);
        let b = coarse.intensity_column(5);
        let rms =
            (a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt();
        assert!(rms < 1e-10, "{rms}");
        assert_eq!(fine.z(10), coarse.z(5));
    }

    #[test]
    fn zero_steps_returns_input() {
        let u = lens_phase_profile(&lens(), &grid(), 0.0).unwrap();
        let h = propagate(&u, 0).unwrap();
        assert_eq!(h.steps(), 0);
        assert_eq!(h.column(0), &u.samples[..]);
    }

    #[test]
    fn normal_incidence_history_is_symmetric() {
        let g = grid();
        let h = propagate(&lens_phase_profile(&lens(), &g, 0.0).unwrap(), 60).unwrap();
        let c = g.center();
        for n in 0..=h.steps() {
            let p = h.intensity_column(n);
            for m in 1..c {
                assert!(
                    (p[c + m] - p[c - m]).abs() <= 1e-9 * p[c].max(1.0),
                    "z={n} m={m}"
                );
            }
        }
    }

    #[test]
    fn peak_arrives_before_geometric_focus() {
        let g = PropagationGrid::new(1.0, 1.0, 80.0).unwrap();
        let h = propagate(&lens_phase_profile(&lens(), &g, 0.0).unwrap(), 80).unwrap();
        let peak = find_focal_peak(&h).unwrap();
        assert!(peak.distance < 40.0, "{peak:?}");
        assert!(peak.gain > 1.0);
        assert_eq!(peak.sample, g.center());
    }

    #[test]
    fn short_range_is_reported() {
        let g = PropagationGrid::new(1.0, 1.0, 80.0).unwrap();
        let short = LensSpec::from_permittivity(20.0, 20.0, 2.4).unwrap();
        let h = propagate(&lens_phase_profile(&short, &g, 0.0).unwrap(), 10).unwrap();
        assert!(matches!(
            find_focal_peak(&h),
            Err(Error::RangeTooShort { .. })
        ));
    }

    #[test]
    fn zero_field_cannot_propagate() {
        let g = grid();
        let u = ComplexField::new(vec![Complex64::new(0.0, 0.0); g.ns()], 0.0, g).unwrap();
        assert!(matches!(propagate(&u, 3), Err(Error::Degenerate(_))));
    }
}
