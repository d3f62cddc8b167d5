//! Plain-text formats for caches and results.
//!
//! Every file opens with `# key = value` lines holding the parameters that
//! produced it, followed by one CSV table. Floats are written with Rust's
//! shortest round-trip formatting, so reading a file back gives the exact
//! values that were written. Caches also carry a SHA-256 `param_hash` over
//! their parameters so a stale cache can be spotted without comparing every
//! key.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::channel::PowerProfile;
use crate::error::{Error, Result};
use crate::feedback::{
    Codebook, CodebookKind, GaussianFit, GaussianModel, GaussianNode, GaussianProfileParams,
};
use crate::linklevel::SimResult;
use crate::waveoptics::{FieldHistory, LensSystem};

pub type Params = Vec<(String, String)>;

pub const HASH_KEY: &str = "param_hash";

/// Hex SHA-256 over `key=value` lines.
pub fn param_hash(params: &[(String, String)]) -> String {
    let mut h = Sha256::new();
    for (k, v) in params {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Cache key of a profile table.
pub fn profile_params(sys: &LensSystem) -> Params {
    [
        ("focal_length", sys.lens.focal_length()),
        ("aperture", sys.lens.aperture()),
        ("permittivity", sys.lens.permittivity()),
        ("lens_distance", sys.array.lens_distance),
        ("antennas", sys.array.num_antennas as f64),
        ("spacing", sys.array.spacing),
        ("dx", sys.grid.dx()),
        ("dz", sys.grid.dz()),
        ("window", sys.grid.window()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

fn header(title: &str, params: &[(String, String)], with_hash: bool) -> String {
    let mut s = format!("# {title}\n");
    for (k, v) in params {
        writeln!(s, "# {k} = {v}").unwrap();
    }
    if with_hash {
        writeln!(s, "# {HASH_KEY} = {}", param_hash(params)).unwrap();
    }
    s
}

/// A file split into its header parameters and data rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub path: PathBuf,
    pub params: Params,
    pub hash: Option<String>,
    pub columns: Vec<String>,
    /// Data rows with their 1-based line numbers.
    pub rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut params = Vec::new();
        let mut hash = None;
        let mut columns = None;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once(" = ") {
                    let (k, v) = (k.trim().to_string(), v.trim().to_string());
                    if k == HASH_KEY {
                        hash = Some(v);
                    } else {
                        params.push((k, v));
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
            if columns.is_none() {
                columns = Some(cells);
            } else {
                rows.push((line_no, cells));
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            params,
            hash,
            columns: columns.ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: "no column header".into(),
            })?,
            rows,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            msg: msg.into(),
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.param(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| self.err(0, format!("missing or invalid header key '{key}'")))
    }

    fn floats(&self, line: usize, cells: &[String]) -> Result<Vec<f64>> {
        cells
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| self.err(line, format!("'{c}' is not a number")))
            })
            .collect()
    }

    /// True when the stored hash matches both the stored parameters and `expected`.
    pub fn matches(&self, expected: &[(String, String)]) -> bool {
        let want = param_hash(expected);
        self.hash.as_deref() == Some(want.as_str()) && param_hash(&self.params) == want
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn render_profiles(params: &[(String, String)], profiles: &[PowerProfile]) -> String {
    let mut s = header("power profiles", params, true);
    let m = profiles.first().map_or(0, |p| p.len());
    s.push_str("aod_deg");
    for i in 1..=m {
        write!(s, ",a_{i}").unwrap();
    }
    s.push('\n');
    for p in profiles {
        write!(s, "{}", p.angle_deg()).unwrap();
        for v in p.values() {
            write!(s, ",{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn read_profiles(path: &Path) -> Result<(Table, Vec<PowerProfile>)> {
    let table = Table::read(path)?;
    let m = table.columns.len().saturating_sub(1);
    let mut profiles = Vec::with_capacity(table.rows.len());
    for (line, cells) in &table.rows {
        if cells.len() != m + 1 {
            return Err(table.err(
                *line,
                format!("expected {} columns, found {}", m + 1, cells.len()),
            ));
        }
        let v = table.floats(*line, cells)?;
        profiles.push(
            PowerProfile::new(v[1..].to_vec(), v[0])
                .map_err(|e| table.err(*line, e.to_string()))?,
        );
    }
    Ok((table, profiles))
}

pub fn render_codebook(params: &[(String, String)], c: &Codebook) -> String {
    let mut all = params.to_vec();
    all.extend([
        ("kind".to_string(), c.kind().name().to_string()),
        ("bits".to_string(), c.bits().to_string()),
        ("antennas".to_string(), c.antennas().to_string()),
        (
            "user_angle".to_string(),
            c.user_angle().map_or("none".to_string(), |a| a.to_string()),
        ),
    ]);
    let mut s = header(
        "codebook, one row per antenna, re/im pairs per codeword",
        &all,
        true,
    );
    let cols: Vec<String> = (1..=c.size()).map(|j| format!("re_{j},im_{j}")).collect();
    s.push_str(&cols.join(","));
    s.push('\n');
    for row in c.vectors().row_iter() {
        let cells: Vec<String> = row.iter().map(|z| format!("{},{}", z.re, z.im)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn read_codebook(path: &Path) -> Result<(Table, Codebook)> {
    let table = Table::read(path)?;
    let bits: u32 = table.required("bits")?;
    let m: usize = table.required("antennas")?;
    let kind = table
        .param("kind")
        .and_then(CodebookKind::from_name)
        .ok_or_else(|| table.err(0, "missing or invalid header key 'kind'"))?;
    let angle = match table.param("user_angle") {
        Some("none") | None => None,
        Some(v) => Some(v.parse().map_err(|_| table.err(0, "invalid user_angle"))?),
    };
    let n = 1usize << bits.min(crate::feedback::MAX_BITS);
    if table.rows.len() != m {
        return Err(table.err(0, format!("expected {m} rows, found {}", table.rows.len())));
    }
    let mut v = DMatrix::<Complex64>::zeros(m, n);
    for (i, (line, cells)) in table.rows.iter().enumerate() {
        if cells.len() != 2 * n {
            return Err(table.err(
                *line,
                format!("expected {} values, found {}", 2 * n, cells.len()),
            ));
        }
        let x = table.floats(*line, cells)?;
        for j in 0..n {
            v[(i, j)] = Complex64::new(x[2 * j], x[2 * j + 1]);
        }
    }
    let c =
        Codebook::from_vectors(v, bits, kind, angle).map_err(|e| table.err(0, e.to_string()))?;
    Ok((table, c))
}

pub fn render_gaussian_model(params: &[(String, String)], model: &GaussianModel) -> String {
    let mut all = params.to_vec();
    all.extend([
        ("antennas".to_string(), model.antennas().to_string()),
        (
            "lens_distance".to_string(),
            model.lens_distance().to_string(),
        ),
    ]);
    let mut s = header(
        "one-Gaussian fit per angle, y = antenna index from array centre",
        &all,
        true,
    );
    s.push_str("aod_deg,p,q,r,rms_residual,poor\n");
    for n in model.nodes() {
        let g = n.fit.params;
        writeln!(
            s,
            "{},{},{},{},{},{}",
            n.angle_deg, g.p, g.q, g.r, n.fit.rms_residual, n.fit.poor
        )
        .unwrap();
    }
    s
}

pub fn read_gaussian_model(path: &Path) -> Result<(Table, GaussianModel)> {
    let table = Table::read(path)?;
    let m: usize = table.required("antennas")?;
    let ell: f64 = table.required("lens_distance")?;
    let mut nodes = Vec::with_capacity(table.rows.len());
    for (line, cells) in &table.rows {
        if cells.len() != 6 {
            return Err(table.err(*line, format!("expected 6 columns, found {}", cells.len())));
        }
        let x = table.floats(*line, &cells[..5])?;
        let poor = cells[5]
            .parse::<bool>()
            .map_err(|_| table.err(*line, format!("'{}' is not true/false", cells[5])))?;
        nodes.push(GaussianNode {
            angle_deg: x[0],
            fit: GaussianFit {
                params: GaussianProfileParams {
                    p: x[1],
                    q: x[2],
                    r: x[3],
                },
                rms_residual: x[4],
                poor,
            },
        });
    }
    let model =
        GaussianModel::from_nodes(m, ell, nodes).map_err(|e| table.err(0, e.to_string()))?;
    Ok((table, model))
}

/// Intensity history, one row per transverse sample and one column per plane.
pub fn render_intensity(params: &[(String, String)], history: &FieldHistory) -> String {
    let grid = history.grid();
    let mut all = params.to_vec();
    all.extend([
        ("rows".to_string(), grid.ns().to_string()),
        ("columns".to_string(), (history.steps() + 1).to_string()),
        ("dx".to_string(), grid.dx().to_string()),
        ("step".to_string(), history.step_length().to_string()),
    ]);
    let mut s = header(
        "intensity |u|^2, rows = transverse samples, columns = planes",
        &all,
        false,
    );
    s.push('x');
    for n in 0..=history.steps() {
        write!(s, ",z={}", history.z(n)).unwrap();
    }
    s.push('\n');
    let cols: Vec<Vec<f64>> = (0..=history.steps())
        .map(|n| history.intensity_column(n))
        .collect();
    for i in 0..grid.ns() {
        write!(s, "{}", grid.x(i)).unwrap();
        for c in &cols {
            write!(s, ",{}", c[i]).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn render_sim_result(r: &SimResult) -> String {
    let mut s = header("ergodic sum rate", &r.config.metadata(), false);
    s.push_str("snr_db,mean_sum_rate,stderr,trials\n");
    for p in &r.points {
        writeln!(
            s,
            "{},{},{},{}",
            p.snr_db, p.mean_sum_rate, p.stderr, p.trials
        )
        .unwrap();
    }
    s
}

/// Side-by-side mean and standard error of several runs over a shared SNR grid.
pub fn render_comparison(
    params: &[(String, String)],
    runs: &[(String, SimResult)],
) -> Result<String> {
    let Some((_, first)) = runs.first() else {
        return Err(Error::Config("nothing to compare".into()));
    };
    let snr: Vec<f64> = first.points.iter().map(|p| p.snr_db).collect();
    for (label, r) in runs {
        if r.points.iter().map(|p| p.snr_db).ne(snr.iter().copied()) {
            return Err(Error::Config(format!(
                "run '{label}' uses a different SNR grid"
            )));
        }
    }
    let mut s = header("sum rate comparison (bps/Hz)", params, false);
    s.push_str("snr_db");
    for (label, _) in runs {
        write!(s, ",{label},{label}_stderr").unwrap();
    }
    s.push('\n');
    for (i, x) in snr.iter().enumerate() {
        write!(s, "{x}").unwrap();
        for (_, r) in runs {
            write!(s, ",{},{}", r.points[i].mean_sum_rate, r.points[i].stderr).unwrap();
        }
        s.push('\n');
    }
    Ok(s)
}
