//! Multi-user downlink precoding and ergodic sum rate.
//!
//! The received signal of user `k` is `y_k = √P · h̃_kᵀ Σ_j g_j s_j + n_k`
//! with unit noise variance, so `P` in dB is the SNR axis. Channels are used
//! without conjugation, which makes matched filtering `f_k = conj(ĥ_k)`.

mod montecarlo;

pub use montecarlo::{
    build_codebooks, run_monte_carlo, run_monte_carlo_with, scenario_profiles, LensSetup,
    PrecoderKind, ProfileSource, Quantizer, ScenarioConfig, ScenarioProfiles, SimResult, SnrPoint,
};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest condition number of the estimated channel accepted by ZF.
pub const MAX_CONDITION: f64 = 1e12;

/// Precoder columns before and after power normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    columns: DMatrix<Complex64>,
    normalized: DMatrix<Complex64>,
}

impl Precoder {
    /// Normalizes `f_k` into `g_k = f_k/(√K‖f_k‖)`.
    pub fn from_columns(columns: DMatrix<Complex64>) -> Result<Self> {
        let k = columns.ncols();
        let mut normalized = columns.clone();
        for (j, mut c) in normalized.column_iter_mut().enumerate() {
            let n = c.norm();
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::Degenerate(format!(
                    "precoder column {j} has norm {n}"
                )));
            }
            c.unscale_mut(n * (k as f64).sqrt());
        }
        Ok(Self {
            columns,
            normalized,
        })
    }

    /// Unnormalized `M×K` matrix `F`.
    pub fn columns(&self) -> &DMatrix<Complex64> {
        &self.columns
    }

    /// `M×K` matrix `G` with unit total transmit power.
    pub fn normalized(&self) -> &DMatrix<Complex64> {
        &self.normalized
    }
}

fn most_collinear_pair(h: &DMatrix<Complex64>) -> (usize, usize) {
    let k = h.nrows();
    let norms: Vec<f64> = h.row_iter().map(|r| r.norm()).collect();
    let mut best = ((0, 0), f64::NEG_INFINITY);
    for i in 0..k {
        for j in i + 1..k {
            let c = if norms[i] > 0.0 && norms[j] > 0.0 {
                h.row(i).dotc(&h.row(j)).norm() / (norms[i] * norms[j])
            } else {
                f64::INFINITY
            };
            if c > best.1 {
                best = ((i, j), c);
            }
        }
    }
    best.0
}

/// Zero forcing with the right pseudo-inverse, `F = Ĥᴴ(ĤĤᴴ)⁻¹`, so that `Ĥ F = I`.
pub fn zf_precoder(h_hat: &DMatrix<Complex64>) -> Result<Precoder> {
    let (k, m) = h_hat.shape();
    if k == 0 || k > m {
        return Err(Error::Domain(format!(
            "zero forcing needs 1 <= K <= M, got K={k}, M={m}"
        )));
    }
    let svd = h_hat.clone().svd(true, true);
    let sv = &svd.singular_values;
    let cond = if sv.min() > 0.0 {
        sv.max() / sv.min()
    } else {
        f64::INFINITY
    };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned {
            cond,
            users: most_collinear_pair(h_hat),
        });
    }
    // Right pseudo-inverse V·Σ⁻¹·Uᴴ of Ĥ = U·Σ·Vᴴ.
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^H");
    let inv = DMatrix::from_diagonal(&sv.map(|s| Complex64::new(1.0 / s, 0.0)));
    Precoder::from_columns(v_t.adjoint() * inv * u.adjoint())
}

/// Maximum ratio transmission, `f_k = conj(ĥ_k)`.
pub fn mrt_precoder(h_hat: &DMatrix<Complex64>) -> Result<Precoder> {
    if let Some(k) = h_hat.row_iter().position(|r| !(r.norm() > 0.0)) {
        return Err(Error::Degenerate(format!(
            "channel estimate of user {k} is zero"
        )));
    }
    Precoder::from_columns(h_hat.transpose().map(|c| c.conj()))
}

/// Exact SINR of every user for true channels `h_tilde` (`K×M`) and normalized precoder `g` (`M×K`).
pub fn received_sinr(
    h_tilde: &DMatrix<Complex64>,
    g: &DMatrix<Complex64>,
    p_t: f64,
) -> Result<Vec<f64>> {
    let k = h_tilde.nrows();
    if g.nrows() != h_tilde.ncols() || g.ncols() != k {
        return Err(Error::Domain(format!(
            "channel is {}x{} but precoder is {}x{}",
            k,
            h_tilde.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    let x = h_tilde * g;
    Ok((0..k)
        .map(|i| {
            let signal = p_t * x[(i, i)].norm_sqr();
            let interference: f64 = (0..k)
                .filter(|&j| j != i)
                .map(|j| p_t * x[(i, j)].norm_sqr())
                .sum();
            signal / (interference + 1.0)
        })
        .collect())
}

/// `Σ log2(1 + SINR_k)` in bps/Hz.
pub fn sum_rate(sinrs: &[f64]) -> f64 {
    sinrs.iter().map(|s| (1.0 + s).log2()).sum()
}
