//! Propagation checks against independent references.

use lensmimo::waveoptics::{
    lens_phase_profile, propagate, ArraySpec, ComplexField, LensSpec, LensSystem, PropagationGrid,
    Propagator,
};
use lensmimo::Complex64;
use proptest::prelude::*;

fn default_system(ell: f64) -> LensSystem {
    LensSystem::new(
        LensSpec::from_permittivity(40.0, 20.0, 2.4).unwrap(),
        PropagationGrid::new(0.3125, 1.0, 80.0).unwrap(),
        ArraySpec::new(64, 0.5, ell).unwrap(),
    )
    .unwrap()
}

/// Direct Fresnel convolution with the sampled quadratic-phase kernel,
/// valid where the chirp is resolved by the grid.
fn direct_fresnel(u: &[Complex64], grid: &PropagationGrid, z: f64) -> Vec<Complex64> {
    let kappa = grid.kappa();
    (0..u.len())
        .map(|i| {
            let xi = grid.x(i);
            u.iter()
                .enumerate()
                .map(|(j, &uj)| {
                    let d = xi - grid.x(j);
                    uj * Complex64::from_polar(1.0, kappa * d * d / (2.0 * z))
                })
                .sum()
        })
        .collect()
}

#[test]
fn split_step_matches_direct_convolution_where_chirp_is_resolved() {
    let z = 3.0;
    let grid = PropagationGrid::new(0.05, z, 40.0).unwrap();
    let samples: Vec<Complex64> = (0..grid.ns())
        .map(|i| {
            let x = grid.x(i);
            Complex64::from_polar((-(x / 2.0).powi(2)).exp(), 0.4 * x)
        })
        .collect();
    let u0 = ComplexField::new(samples, 0.0, grid).unwrap();
    let target = u0.total_intensity();

    let mut split = u0.samples.clone();
    Propagator::new(&grid).advance(&mut split, target);
    let mut direct = direct_fresnel(&u0.samples, &grid, z);
    let scale = (target / direct.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt();
    // Align the global phase, which the two routes define differently.
    let overlap: Complex64 = direct.iter().zip(&split).map(|(a, b)| a.conj() * b).sum();
    let phase = overlap / overlap.norm();
    for d in &mut direct {
        *d *= scale * phase;
    }
    let err: f64 = split
        .iter()
        .zip(&direct)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    assert!(err / target.sqrt() < 1e-8, "relative error {err:e}");
}

#[test]
fn gaussian_beam_spreads_at_the_analytic_rate() {
    let grid = PropagationGrid::new(0.1, 1.0, 100.0).unwrap();
    let w0 = 3.0;
    let samples: Vec<Complex64> = (0..grid.ns())
        .map(|i| Complex64::new((-(grid.x(i) / w0).powi(2)).exp(), 0.0))
        .collect();
    let h = propagate(&ComplexField::new(samples, 0.0, grid).unwrap(), 40).unwrap();
    let rayleigh = std::f64::consts::PI * w0 * w0;
    for n in [10, 20, 40] {
        let p = h.intensity_column(n);
        let total: f64 = p.iter().sum();
        let second: f64 = p
            .iter()
            .enumerate()
            .map(|(i, v)| v * grid.x(i).powi(2))
            .sum::<f64>()
            / total;
        // Intensity exp(-2x²/w²) has second moment w²/4.
        let z = h.z(n);
        let expected = w0 * w0 * (1.0 + (z / rayleigh).powi(2)) / 4.0;
        assert!(
            (second / expected - 1.0).abs() < 1e-6,
            "z={z}: {second} vs {expected}"
        );
    }
}

#[test]
fn mirrored_angle_gives_mirrored_profile() {
    let sys = default_system(25.0);
    for aod in [3.0, 11.5, 24.0] {
        let plus = sys.profile(aod).unwrap();
        let minus = sys.profile(-aod).unwrap();
        for (a, b) in plus.values().iter().zip(minus.values().iter().rev()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn normal_incidence_focuses_onto_central_antennas() {
    let sys = default_system(25.0);
    let p = sys.profile(0.0).unwrap();
    let centre: f64 = p.values()[24..40].iter().sum();
    assert!(centre > 0.5 * 64.0, "central quarter holds {centre}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn propagation_conserves_intensity(f in 15.0f64..60.0, aod in -40.0f64..40.0, steps in 1usize..40) {
        let grid = PropagationGrid::new(0.5, 1.0, 80.0).unwrap();
        let lens = LensSpec::from_permittivity(f, 20.0, 2.4).unwrap();
        let u0 = lens_phase_profile(&lens, &grid, aod.to_radians()).unwrap();
        let h = propagate(&u0, steps).unwrap();
        let target = u0.total_intensity();
        for n in 0..=steps {
            let total: f64 = h.intensity_column(n).iter().sum();
            prop_assert!((total / target - 1.0).abs() < 1e-9);
        }
        prop_assert!(h.max_drift() < 1e-9);
    }

    #[test]
    fn profiles_are_nonnegative_and_sum_to_array_size(aod in -30.0f64..30.0, ell in 10.0f64..45.0) {
        let sys = default_system(ell);
        let p = sys.profile(aod).unwrap();
        prop_assert!(p.values().iter().all(|&v| v >= 0.0));
        prop_assert!((p.values().iter().sum::<f64>() - 64.0).abs() < 1e-6);
    }
}
