//! Spatially correlated downlink channels and lens power modulation.
//!
//! A user at angle `θ` with Laplacian angular spread `σ` sees the channel
//! `h = S·h_iid`, where `S` is the Hermitian square root of the transmit
//! correlation matrix and `h_iid` is i.i.d. unit-variance complex normal.
//! Behind a lens the channel becomes `√a(θ) ∘ h` for the power profile `a`.
//! Angles are in degrees at the API and radians internally.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::complex_normal;

/// Per-antenna power factors for one angle of departure, summing to `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    values: Vec<f64>,
    angle_deg: f64,
}

impl PowerProfile {
    /// Accepts nonnegative values whose sum is `M` to within `1e-6`.
    pub fn new(values: Vec<f64>, angle_deg: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain(
                "power profile must have at least one entry".into(),
            ));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::Domain(format!("power profile entry {i} is {v}")));
        }
        let m = values.len() as f64;
        let sum = crate::summation::sum(values.iter().copied());
        if (sum - m).abs() > 1e-6 * m {
            return Err(Error::Domain(format!(
                "power profile sums to {sum}, expected {m}"
            )));
        }
        Ok(Self { values, angle_deg })
    }

    /// Rescales nonnegative values to sum `M`.
    pub fn normalized(values: Vec<f64>, angle_deg: f64) -> Result<Self> {
        let sum = crate::summation::sum(values.iter().copied());
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::Degenerate(format!(
                "cannot normalize profile with sum {sum}"
            )));
        }
        let scale = values.len() as f64 / sum;
        Self::new(values.into_iter().map(|v| v * scale).collect(), angle_deg)
    }

    /// The lensless profile.
    pub fn ones(m: usize, angle_deg: f64) -> Self {
        Self {
            values: vec![1.0; m],
            angle_deg,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn angle_deg(&self) -> f64 {
        self.angle_deg
    }

    pub fn sqrt_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|a| a.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserConfig {
    pub angle_deg: f64,
    pub spread_deg: f64,
}

impl UserConfig {
    pub fn new(angle_deg: f64, spread_deg: f64) -> Result<Self> {
        if !(spread_deg > 0.0 && spread_deg.is_finite()) {
            return Err(Error::Domain(format!(
                "angle spread must be positive, got {spread_deg}"
            )));
        }
        if !angle_deg.is_finite() || angle_deg.abs() >= 90.0 {
            return Err(Error::Domain(format!(
                "user angle {angle_deg} deg is outside (-90, 90)"
            )));
        }
        Ok(Self {
            angle_deg,
            spread_deg,
        })
    }
}

/// Normalizer of the Laplacian density truncated to `[−π, π)`.
pub fn laplacian_beta(sigma: f64) -> f64 {
    1.0 / (1.0 - (-std::f64::consts::SQRT_2 * std::f64::consts::PI / sigma).exp())
}

/// Truncated Laplacian angular density at `offset` radians for spread `sigma` radians.
pub fn laplacian_pas(offset: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!(
            "angle spread must be positive, got {sigma}"
        )));
    }
    let pi = std::f64::consts::PI;
    if !(-pi..pi).contains(&offset) {
        return Ok(0.0);
    }
    let s2 = std::f64::consts::SQRT_2;
    Ok(laplacian_beta(sigma) / (s2 * sigma) * (-(s2 * offset / sigma).abs()).exp())
}

/// Transmit correlation matrix of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub entries: DMatrix<Complex64>,
    pub user: UserConfig,
    pub spacing: f64,
}

impl CorrelationMatrix {
    pub fn sqrt(&self) -> Result<DMatrix<Complex64>> {
        matrix_sqrt(&self.entries)
    }
}

/// Small-spread closed form of the Laplacian correlation, scaled to unit
/// diagonal and projected onto the positive semidefinite cone.
pub fn correlation_matrix(user: &UserConfig, m: usize, spacing: f64) -> Result<CorrelationMatrix> {
    if m == 0 {
        return Err(Error::Domain("correlation matrix needs M >= 1".into()));
    }
    if !(spacing >= 0.0 && spacing.is_finite()) {
        return Err(Error::Domain(format!(
            "antenna spacing must be nonnegative, got {spacing}"
        )));
    }
    let theta = user.angle_deg.to_radians();
    let sigma = user.spread_deg.to_radians();
    let kd = 2.0 * std::f64::consts::PI * spacing;
    // The common β factor drops out once the diagonal is scaled to one.
    let coef = |lag: f64| {
        let w = kd * lag * theta.cos();
        Complex64::from_polar(1.0, kd * lag * theta.sin()) / (1.0 + 0.5 * sigma * sigma * w * w)
    };
    let mut r = DMatrix::from_fn(m, m, |i, j| coef(i as f64 - j as f64));
    r = (&r + r.adjoint()) * Complex64::new(0.5, 0.0);

    let eig = r.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l < 0.0) {
        let clamped = eig.eigenvalues.map(|l| l.max(0.0));
        let v = &eig.eigenvectors;
        let mut psd =
            v * DMatrix::from_diagonal(&clamped.map(|l| Complex64::new(l, 0.0))) * v.adjoint();
        let d: Vec<f64> = (0..m).map(|i| psd[(i, i)].re.sqrt()).collect();
        for i in 0..m {
            for j in 0..m {
                psd[(i, j)] /= d[i] * d[j];
            }
        }
        r = (&psd + psd.adjoint()) * Complex64::new(0.5, 0.0);
    }
    for i in 0..m {
        r[(i, i)] = Complex64::new(1.0, 0.0);
    }
    Ok(CorrelationMatrix {
        entries: r,
        user: *user,
        spacing,
    })
}

/// Hermitian square root through the eigendecomposition, with negative
/// eigenvalues clamped to zero.
pub fn matrix_sqrt(r: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if !r.is_square() {
        return Err(Error::Domain(format!(
            "matrix_sqrt needs a square matrix, got {}x{}",
            r.nrows(),
            r.ncols()
        )));
    }
    let scale = r.norm().max(f64::MIN_POSITIVE);
    let asym = (r - r.adjoint()).norm();
    if asym > 1e-10 * scale {
        return Err(Error::Domain(format!(
            "matrix is not Hermitian (asymmetry {asym:.3e})"
        )));
    }
    let eig = r.clone().symmetric_eigen();
    // Eigenvalues at round-off level are numerically zero.
    let floor = eig.eigenvalues.max().max(0.0) * r.nrows() as f64 * f64::EPSILON;
    let roots = eig
        .eigenvalues
        .map(|l| Complex64::new(if l > floor { l.sqrt() } else { 0.0 }, 0.0));
    let v = &eig.eigenvectors;
    let s = v * DMatrix::from_diagonal(&roots) * v.adjoint();
    Ok((&s + s.adjoint()) * Complex64::new(0.5, 0.0))
}

/// One channel realization `S·h_iid`.
pub fn draw_channel<R: Rng + ?Sized>(s: &DMatrix<Complex64>, rng: &mut R) -> DVector<Complex64> {
    let iid = DVector::from_fn(s.ncols(), |_, _| complex_normal(rng));
    s * iid
}

/// `√a ∘ h`.
pub fn apply_lens(h: &DVector<Complex64>, a: &PowerProfile) -> Result<DVector<Complex64>> {
    if h.len() != a.len() {
        return Err(Error::Domain(format!(
            "channel length {} does not match profile length {}",
            h.len(),
            a.len()
        )));
    }
    Ok(DVector::from_iterator(
        h.len(),
        h.iter().zip(a.sqrt_values()).map(|(x, s)| x * s),
    ))
}

/// `Ψ_jk = √a_jᵀ√a_k / M` for every pair of users.
pub fn power_correlation_matrix(profiles: &[PowerProfile]) -> Result<DMatrix<f64>> {
    let k = profiles.len();
    let Some(first) = profiles.first() else {
        return Ok(DMatrix::zeros(0, 0));
    };
    let m = first.len();
    if profiles.iter().any(|p| p.len() != m) {
        return Err(Error::Domain(
            "power profiles have different lengths".into(),
        ));
    }
    let roots: Vec<Vec<f64>> = profiles.iter().map(|p| p.sqrt_values().collect()).collect();
    Ok(DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            // Equality case of Cauchy–Schwarz for profiles summing to M.
            1.0
        } else {
            let dot: f64 = roots[i].iter().zip(&roots[j]).map(|(x, y)| x * y).sum();
            (dot / m as f64).min(1.0)
        }
    }))
}

/// `K×M` downlink channel, one user per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub rows: DMatrix<Complex64>,
    pub lens_applied: bool,
}

impl ChannelMatrix {
    pub fn from_rows(rows: &[DVector<Complex64>], lens_applied: bool) -> Result<Self> {
        let k = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Domain("channel rows have different lengths".into()));
        }
        Ok(Self {
            rows: DMatrix::from_fn(k, m, |i, j| rows[i][j]),
            lens_applied,
        })
    }

    pub fn users(&self) -> usize {
        self.rows.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.rows.ncols()
    }
}

/// Precomputed profiles indexed by angle, looked up by nearest angle.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    profiles: Vec<PowerProfile>,
    max_gap_deg: f64,
}

impl ProfileTable {
    pub const DEFAULT_MAX_GAP_DEG: f64 = 0.5;

    pub fn new(profiles: Vec<PowerProfile>, max_gap_deg: f64) -> Result<Self> {
        if let Some(first) = profiles.first() {
            if profiles.iter().any(|p| p.len() != first.len()) {
                return Err(Error::Domain(
                    "cached profiles have different lengths".into(),
                ));
            }
        }
        Ok(Self {
            profiles,
            max_gap_deg,
        })
    }

    pub fn profiles(&self) -> &[PowerProfile] {
        &self.profiles
    }

    /// Nearest cached profile; the earlier entry wins an exact tie.
    pub fn lookup(&self, angle_deg: f64) -> Result<&PowerProfile> {
        let best = self
            .profiles
            .iter()
            .min_by(|a, b| {
                (a.angle_deg - angle_deg)
                    .abs()
                    .total_cmp(&(b.angle_deg - angle_deg).abs())
            })
            .ok_or_else(|| Error::Config("profile table is empty".into()))?;
        let gap = (best.angle_deg - angle_deg).abs();
        if gap > self.max_gap_deg + 1e-9 {
            return Err(Error::ProfileLookup {
                angle: angle_deg,
                nearest: best.angle_deg,
                max_gap: self.max_gap_deg,
            });
        }
        Ok(best)
    }
}
