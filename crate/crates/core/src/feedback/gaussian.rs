//! One-Gaussian approximation of power profiles.
//!
//! A profile is modelled as `p·exp(−((y − q)/r)²)` over the antenna
//! coordinate `y = m − (M−1)/2`, so `y = 0` is the array centre. Each angle is
//! fitted by Levenberg–Marquardt and the parameters are interpolated across
//! angle with natural cubic splines through the well-fitted angles.

use nalgebra::{Matrix3, Vector3};

use crate::channel::PowerProfile;
use crate::error::{Error, Result};
use crate::waveoptics::ArraySpec;

/// A fit is poor when its RMS residual exceeds this fraction of the peak.
const POOR_FIT_RATIO: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianProfileParams {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl GaussianProfileParams {
    pub fn eval(&self, y: f64) -> f64 {
        let u = (y - self.q) / self.r;
        self.p * (-u * u).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub params: GaussianProfileParams,
    pub rms_residual: f64,
    pub poor: bool,
}

fn antenna_coordinate(m: usize, count: usize) -> f64 {
    m as f64 - 0.5 * (count as f64 - 1.0)
}

fn residuals(values: &[f64], g: &GaussianProfileParams) -> Vec<f64> {
    let n = values.len();
    values
        .iter()
        .enumerate()
        .map(|(m, a)| g.eval(antenna_coordinate(m, n)) - a)
        .collect()
}

fn cost(values: &[f64], g: &GaussianProfileParams) -> f64 {
    residuals(values, g).iter().map(|r| r * r).sum()
}

/// Least-squares one-Gaussian fit of a single profile.
pub fn fit_gaussian(values: &[f64]) -> Result<GaussianFit> {
    let n = values.len();
    if n < 3 {
        return Err(Error::Domain(format!(
            "need at least 3 samples to fit a Gaussian, got {n}"
        )));
    }
    let (imax, &peak) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    if !(peak > 0.0) {
        return Err(Error::Degenerate(
            "cannot fit a Gaussian to a zero profile".into(),
        ));
    }
    let area: f64 = values.iter().sum();
    let mut g = GaussianProfileParams {
        p: peak,
        q: antenna_coordinate(imax, n),
        r: (area / (peak * std::f64::consts::PI.sqrt())).max(0.5),
    };
    let mut c = cost(values, &g);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (m, a) in values.iter().enumerate() {
            let u = (antenna_coordinate(m, n) - g.q) / g.r;
            let e = (-u * u).exp();
            let res = g.p * e - a;
            let jac = Vector3::new(e, 2.0 * g.p * e * u / g.r, 2.0 * g.p * e * u * u / g.r);
            jtj += jac * jac.transpose();
            jtr += jac * res;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut lhs = jtj;
            for i in 0..3 {
                lhs[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(delta) = lhs.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = GaussianProfileParams {
                p: g.p + delta[0],
                q: g.q + delta[1],
                r: g.r + delta[2],
            };
            let tc = if trial.r.abs() > 1e-9 {
                cost(values, &trial)
            } else {
                f64::INFINITY
            };
            if tc < c {
                let converged = c - tc <= 1e-15 * c.max(1e-300) || delta.norm() < 1e-14;
                g = trial;
                c = tc;
                lambda = (lambda * 0.1).max(1e-12);
                improved = !converged;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    g.r = g.r.abs();
    // A centre beyond the array leaves only the tail sampled, and amplitude
    // and width then trade off without bound.
    let rms_residual = (c / n as f64).sqrt();
    Ok(GaussianFit {
        params: g,
        rms_residual,
        poor: rms_residual > POOR_FIT_RATIO * peak || g.q.abs() > 0.5 * (n as f64 - 1.0),
    })
}

/// Natural cubic spline through `(x_i, y_i)` with increasing `x`.
#[derive(Debug, Clone, PartialEq)]
struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    second: Vec<f64>,
}

impl NaturalSpline {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut second = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second derivatives.
            let mut diag = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let lower = h0;
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
                if i > 1 {
                    let w = lower / diag[i - 1];
                    diag[i] -= w * upper[i - 1];
                    rhs[i] -= w * rhs[i - 1];
                }
            }
            for i in (1..n - 1).rev() {
                second[i] = (rhs[i] - upper[i] * second[i + 1]) / diag[i];
            }
        }
        Self { x, y, second }
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if n == 1 {
            return self.y[0];
        }
        let i = self.x.partition_point(|&v| v <= t).clamp(1, n - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h
                / 6.0
    }
}

/// Per-angle fit outcome kept in the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianNode {
    pub angle_deg: f64,
    pub fit: GaussianFit,
}

/// Gaussian parameters as smooth functions of angle, for one lens and array distance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    antennas: usize,
    lens_distance: f64,
    nodes: Vec<GaussianNode>,
    p: NaturalSpline,
    q: NaturalSpline,
    r: NaturalSpline,
}

impl GaussianModel {
    /// Builds the interpolants from already fitted nodes.
    pub fn from_nodes(
        antennas: usize,
        lens_distance: f64,
        mut nodes: Vec<GaussianNode>,
    ) -> Result<Self> {
        nodes.sort_by(|a, b| a.angle_deg.total_cmp(&b.angle_deg));
        if nodes.windows(2).any(|w| w[0].angle_deg == w[1].angle_deg) {
            return Err(Error::Config("duplicate angles in Gaussian fit".into()));
        }
        let good: Vec<&GaussianNode> = nodes.iter().filter(|n| !n.fit.poor).collect();
        if good.len() < 2 {
            return Err(Error::Degenerate(format!(
                "only {} of {} angles have a usable Gaussian fit",
                good.len(),
                nodes.len()
            )));
        }
        let xs: Vec<f64> = good.iter().map(|n| n.angle_deg).collect();
        let spline = |f: fn(&GaussianProfileParams) -> f64| {
            NaturalSpline::new(xs.clone(), good.iter().map(|n| f(&n.fit.params)).collect())
        };
        Ok(Self {
            antennas,
            lens_distance,
            p: spline(|g| g.p),
            q: spline(|g| g.q),
            r: spline(|g| g.r),
            nodes,
        })
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn lens_distance(&self) -> f64 {
        self.lens_distance
    }

    pub fn nodes(&self) -> &[GaussianNode] {
        &self.nodes
    }

    /// Angular range covered by well-fitted nodes.
    pub fn range(&self) -> (f64, f64) {
        (self.p.x[0], *self.p.x.last().expect("non-empty"))
    }

    pub fn poor_fits(&self) -> usize {
        self.nodes.iter().filter(|n| n.fit.poor).count()
    }

    pub fn params_at(&self, theta_deg: f64) -> Result<GaussianProfileParams> {
        let (lo, hi) = self.range();
        if !(lo - 1e-9..=hi + 1e-9).contains(&theta_deg) {
            return Err(Error::MissingFit(format!(
                "angle {theta_deg} deg is outside the fitted range [{lo}, {hi}]"
            )));
        }
        Ok(GaussianProfileParams {
            p: self.p.eval(theta_deg),
            q: self.q.eval(theta_deg),
            r: self.r.eval(theta_deg),
        })
    }
}

/// Fits every profile and interpolates the parameters across angle.
pub fn fit_gaussian_model(profiles: &[PowerProfile], lens_distance: f64) -> Result<GaussianModel> {
    if profiles.len() < 5 {
        return Err(Error::Config(format!(
            "Gaussian model needs at least 5 angles, got {}",
            profiles.len()
        )));
    }
    let m = profiles[0].len();
    if profiles.iter().any(|p| p.len() != m) {
        return Err(Error::Domain("profiles have different lengths".into()));
    }
    let nodes = profiles
        .iter()
        .map(|p| {
            let fit = fit_gaussian(p.values())?;
            if fit.poor {
                log::warn!(
                    "poor Gaussian fit at {} deg: RMS residual {:.3} vs peak {:.3}, centre {:.2}",
                    p.angle_deg(),
                    fit.rms_residual,
                    p.values().iter().fold(0.0f64, |a, &b| a.max(b)),
                    fit.params.q
                );
            }
            Ok(GaussianNode {
                angle_deg: p.angle_deg(),
                fit,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    GaussianModel::from_nodes(m, lens_distance, nodes)
}

/// Profile predicted by the Gaussian model, scaled to sum `M`.
pub fn gaussian_profile(
    theta_deg: f64,
    model: &GaussianModel,
    array: &ArraySpec,
) -> Result<PowerProfile> {
    if model.antennas != array.num_antennas {
        return Err(Error::MissingFit(format!(
            "model was fitted for {} antennas, array has {}",
            model.antennas, array.num_antennas
        )));
    }
    if (model.lens_distance - array.lens_distance).abs() > 1e-9 * array.lens_distance {
        return Err(Error::MissingFit(format!(
            "model was fitted at distance {}, array sits at {}",
            model.lens_distance, array.lens_distance
        )));
    }
    let g = model.params_at(theta_deg)?;
    if !(g.p > 0.0 && g.r > 0.0) {
        return Err(Error::Degenerate(format!(
            "interpolated Gaussian at {theta_deg} deg has p={}, r={}",
            g.p, g.r
        )));
    }
    let m = array.num_antennas;
    PowerProfile::normalized(
        (0..m).map(|i| g.eval(antenna_coordinate(i, m))).collect(),
        theta_deg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_values(g: GaussianProfileParams, m: usize) -> Vec<f64> {
        (0..m).map(|i| g.eval(antenna_coordinate(i, m))).collect()
    }

    #[test]
    fn exact_gaussian_is_recovered() {
        for &g in &[
            GaussianProfileParams {
                p: 3.2,
                q: -4.3,
                r: 2.7,
            },
            GaussianProfileParams {
                p: 0.9,
                q: 11.0,
                r: 6.5,
            },
            GaussianProfileParams {
                p: 8.0,
                q: 0.2,
                r: 1.3,
            },
        ] {
            let fit = fit_gaussian(&gaussian_values(g, 64)).unwrap();
            assert!(!fit.poor);
            assert!((fit.params.p - g.p).abs() < 1e-6, "{fit:?}");
            assert!((fit.params.q - g.q).abs() < 1e-6, "{fit:?}");
            assert!((fit.params.r - g.r).abs() < 1e-6, "{fit:?}");
        }
    }

    #[test]
    fn bimodal_profile_is_flagged() {
        let hump = |c: f64| GaussianProfileParams {
            p: 5.0,
            q: c,
            r: 4.0,
        };
        let v: Vec<f64> = gaussian_values(hump(-18.0), 64)
            .iter()
            .zip(gaussian_values(hump(18.0), 64))
            .map(|(a, b)| a + b)
            .collect();
        assert!(fit_gaussian(&v).unwrap().poor);
    }

    #[test]
    fn centre_beyond_the_array_is_flagged() {
        let edge = gaussian_values(
            GaussianProfileParams {
                p: 40.0,
                q: 45.0,
                r: 9.0,
            },
            64,
        );
        let fit = fit_gaussian(&edge).unwrap();
        assert!(fit.rms_residual < 1e-6);
        assert!(fit.poor);
    }

    #[test]
    fn spline_interpolates_and_is_exact_on_lines() {
        let s = NaturalSpline::new(vec![0.0, 1.0, 3.0, 4.0], vec![1.0, 3.0, 7.0, 9.0]);
        for &t in &[0.0, 0.5, 1.0, 2.2, 3.9, 4.0] {
            assert!((s.eval(t) - (1.0 + 2.0 * t)).abs() < 1e-12);
        }
        let s = NaturalSpline::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]);
        assert!((s.eval(1.0) - 1.0).abs() < 1e-15);
        assert!(s.eval(0.5) > 0.5);
    }

    fn synthetic_model() -> GaussianModel {
        let profiles: Vec<PowerProfile> = (-6..=6)
            .map(|i| {
                let theta = 5.0 * i as f64;
                let g = GaussianProfileParams {
                    p: 4.0 - 0.002 * theta * theta,
                    q: -0.6 * theta,
                    r: 3.0 + 0.001 * theta * theta,
                };
                PowerProfile::normalized(gaussian_values(g, 64), theta).unwrap()
            })
            .collect();
        fit_gaussian_model(&profiles, 25.0).unwrap()
    }

    #[test]
    fn model_is_symmetric_on_axis() {
        let model = synthetic_model();
        let arr = ArraySpec::new(64, 0.5, 25.0).unwrap();
        let prof = gaussian_profile(0.0, &model, &arr).unwrap();
        assert!(model.params_at(0.0).unwrap().q.abs() < 1e-6);
        let a = prof.values();
        for m in 0..32 {
            assert!((a[m] - a[63 - m]).abs() < 1e-6);
        }
        assert!((a.iter().sum::<f64>() - 64.0).abs() < 1e-9);
        let g = model.params_at(12.5).unwrap();
        assert!((g.q + 7.5).abs() < 1e-3, "{g:?}");
    }

    #[test]
    fn mismatched_configuration_is_a_missing_fit() {
        let model = synthetic_model();
        let other_m = ArraySpec::new(32, 0.5, 25.0).unwrap();
        let other_l = ArraySpec::new(64, 0.5, 30.0).unwrap();
        let arr = ArraySpec::new(64, 0.5, 25.0).unwrap();
        assert!(matches!(
            gaussian_profile(0.0, &model, &other_m),
            Err(Error::MissingFit(_))
        ));
        assert!(matches!(
            gaussian_profile(0.0, &model, &other_l),
            Err(Error::MissingFit(_))
        ));
        assert!(matches!(
            gaussian_profile(31.0, &model, &arr),
            Err(Error::MissingFit(_))
        ));
    }

    #[test]
    fn too_few_angles_rejected() {
        let ps: Vec<PowerProfile> = (0..4).map(|i| PowerProfile::ones(8, i as f64)).collect();
        assert!(matches!(
            fit_gaussian_model(&ps, 25.0),
            Err(Error::Config(_))
        ));
    }
}
