//! Limited-feedback channel quantization.
//!
//! Users pick the codeword that best matches their channel direction and feed
//! back its index. Three codebook families are built here from one isotropic
//! base codebook `W`: plain random vector quantization (`W` itself), the
//! correlated codebook `S·W` that follows the user's spatial correlation, and
//! the multi-variance codebook `√a ∘ (S·W)` that also follows the lens power
//! profile. Every column is scaled to unit norm.

mod gaussian;

pub use gaussian::{
    fit_gaussian, fit_gaussian_model, gaussian_profile, GaussianFit, GaussianModel, GaussianNode,
    GaussianProfileParams,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{ChannelMatrix, PowerProfile};
use crate::error::{Error, Result};
use crate::rng::complex_normal;
use crate::waveoptics::{profile_at, ArraySpec, LensSpec, PropagationGrid};

pub const MAX_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodebookKind {
    Rvq,
    RvqCorrelated,
    Mvcq,
}

impl CodebookKind {
    pub fn name(self) -> &'static str {
        match self {
            CodebookKind::Rvq => "rvq",
            CodebookKind::RvqCorrelated => "rvq_correlated",
            CodebookKind::Mvcq => "mvcq",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "rvq" => Some(CodebookKind::Rvq),
            "rvq_correlated" => Some(CodebookKind::RvqCorrelated),
            "mvcq" => Some(CodebookKind::Mvcq),
            _ => None,
        }
    }
}

/// `M × 2^B` matrix of unit-norm codewords.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    vectors: DMatrix<Complex64>,
    bits: u32,
    kind: CodebookKind,
    user_angle: Option<f64>,
}

impl Codebook {
    /// Wraps existing codewords, checking shape and unit norms.
    pub fn from_vectors(
        vectors: DMatrix<Complex64>,
        bits: u32,
        kind: CodebookKind,
        user_angle: Option<f64>,
    ) -> Result<Self> {
        check_bits(bits)?;
        if vectors.ncols() != 1 << bits {
            return Err(Error::Domain(format!(
                "{} codewords given for a {bits}-bit codebook",
                vectors.ncols()
            )));
        }
        for (j, c) in vectors.column_iter().enumerate() {
            let n = c.norm();
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!("codeword {j} has norm {n}")));
            }
        }
        Ok(Self {
            vectors,
            bits,
            kind,
            user_angle,
        })
    }

    pub fn vectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn kind(&self) -> CodebookKind {
        self.kind
    }

    pub fn user_angle(&self) -> Option<f64> {
        self.user_angle
    }

    pub fn antennas(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn size(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn codeword(&self, j: usize) -> DVector<Complex64> {
        self.vectors.column(j).into_owned()
    }
}

fn check_bits(bits: u32) -> Result<()> {
    if !(1..=MAX_BITS).contains(&bits) {
        return Err(Error::Domain(format!(
            "codebook bits must be in 1..={MAX_BITS}, got {bits}"
        )));
    }
    Ok(())
}

fn normalize_columns(mut v: DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    for (j, mut c) in v.column_iter_mut().enumerate() {
        let n = c.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Degenerate(format!("codeword {j} has norm {n}")));
        }
        c.unscale_mut(n);
    }
    Ok(v)
}

/// `2^B` i.i.d. isotropic unit vectors in `C^M`.
pub fn generate_rvq<R: Rng + ?Sized>(m: usize, bits: u32, rng: &mut R) -> Result<Codebook> {
    check_bits(bits)?;
    if m == 0 {
        return Err(Error::Domain("codebook needs M >= 1".into()));
    }
    let n = 1usize << bits;
    // Column-major fill: codeword j consumes draws j·M .. (j+1)·M.
    let mut raw = DMatrix::<Complex64>::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            raw[(i, j)] = complex_normal(rng);
        }
    }
    Ok(Codebook {
        vectors: normalize_columns(raw)?,
        bits,
        kind: CodebookKind::Rvq,
        user_angle: None,
    })
}

/// Colours every codeword with the correlation factor, `w′ = S·w`.
///
/// With `h = S·h_iid` the coloured codewords have the same covariance as the
/// channel they quantize.
pub fn correlate_codebook(w: &Codebook, s: &DMatrix<Complex64>) -> Result<Codebook> {
    if s.nrows() != s.ncols() || s.ncols() != w.antennas() {
        return Err(Error::Domain(format!(
            "correlation factor is {}x{}, codebook has {} antennas",
            s.nrows(),
            s.ncols(),
            w.antennas()
        )));
    }
    Ok(Codebook {
        vectors: normalize_columns(s * &w.vectors)?,
        bits: w.bits,
        kind: CodebookKind::RvqCorrelated,
        user_angle: w.user_angle,
    })
}

/// Weights every codeword by the square-rooted power profile, `w″ = √a ∘ w′`.
pub fn generate_mvcq(w_corr: &Codebook, a: &PowerProfile) -> Result<Codebook> {
    if a.len() != w_corr.antennas() {
        return Err(Error::Domain(format!(
            "profile has {} entries, codebook has {} antennas",
            a.len(),
            w_corr.antennas()
        )));
    }
    let roots: Vec<f64> = a.sqrt_values().collect();
    let mut v = w_corr.vectors.clone();
    for mut c in v.column_iter_mut() {
        for (x, r) in c.iter_mut().zip(&roots) {
            *x *= *r;
        }
    }
    Ok(Codebook {
        vectors: normalize_columns(v)?,
        bits: w_corr.bits,
        kind: CodebookKind::Mvcq,
        user_angle: Some(a.angle_deg()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationResult {
    /// Zero-based codeword index.
    pub index: usize,
    pub direction: DVector<Complex64>,
    /// `|h*·c|` of the selected codeword.
    pub correlation: f64,
}

/// Codeword maximizing `|h*·c_j|`; the lowest index wins ties.
pub fn quantize(h: &DVector<Complex64>, c: &Codebook) -> Result<QuantizationResult> {
    if h.len() != c.antennas() {
        return Err(Error::Domain(format!(
            "channel length {} does not match codebook dimension {}",
            h.len(),
            c.antennas()
        )));
    }
    if !(h.norm() > 0.0) {
        return Err(Error::Degenerate("cannot quantize a zero channel".into()));
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for (j, col) in c.vectors.column_iter().enumerate() {
        let v = col.dotc(h).norm_sqr();
        if v > best.1 {
            best = (j, v);
        }
    }
    Ok(QuantizationResult {
        index: best.0,
        direction: c.codeword(best.0),
        correlation: best.1.sqrt(),
    })
}

/// Profile at the array from BPM steps of `stride·dz`.
pub fn sub_bpm_profile(
    lens: &LensSpec,
    grid: &PropagationGrid,
    array: &ArraySpec,
    stride: usize,
    aod_deg: f64,
) -> Result<PowerProfile> {
    profile_at(lens, grid, array, aod_deg, stride)
}

/// SINR estimate from the lensless channel and the power correlation matrix.
///
/// `h` is the channel without lens modulation and `f` the unnormalized `M×K`
/// precoder. Each cross term `|h_kᵀ f_j|²/‖f_j‖²` is weighted by `Ψ_kj`.
pub fn approx_sinr(
    psi: &DMatrix<f64>,
    h: &ChannelMatrix,
    f: &DMatrix<Complex64>,
    p_t: f64,
) -> Result<Vec<f64>> {
    let k = h.users();
    if psi.shape() != (k, k) || f.ncols() != k || f.nrows() != h.antennas() {
        return Err(Error::Domain(format!(
            "inconsistent dimensions: Psi {:?}, H {}x{}, F {}x{}",
            psi.shape(),
            k,
            h.antennas(),
            f.nrows(),
            f.ncols()
        )));
    }
    let norms: Vec<f64> = f.column_iter().map(|c| c.norm()).collect();
    let x = &h.rows * f;
    let per_user = p_t / k as f64;
    Ok((0..k)
        .map(|i| {
            let gain = |j: usize| {
                if norms[j] > 0.0 {
                    x[(i, j)].norm_sqr() / (norms[j] * norms[j])
                } else {
                    0.0
                }
            };
            let signal = per_user * psi[(i, i)] * gain(i);
            let interference: f64 = (0..k)
                .filter(|&j| j != i)
                .map(|j| per_user * psi[(i, j)] * gain(j))
                .sum();
            signal / (interference + 1.0)
        })
        .collect())
}
