//! Smoothing, splitting, metrics and CSV persistence for current trajectories.

use std::fmt;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulation::{IdentificationRun, Trajectory, PLANT_COLUMNS};

/// Squared-exponential GP smoother settings. Unset fields take data-driven
/// defaults per channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    /// Kernel length scale in seconds; default `10·dt`.
    pub length_scale: Option<f64>,
    /// Default: sample variance of the channel.
    pub signal_variance: Option<f64>,
    /// Absolute noise variance; overrides `noise_ratio` when set.
    pub noise_variance: Option<f64>,
    /// Noise variance as a fraction of the sample variance.
    pub noise_ratio: f64,
    /// Diagonal jitter relative to the signal variance.
    pub jitter: f64,
    /// Trajectories longer than this are smoothed in windows.
    pub window_threshold: usize,
    pub window: usize,
    pub overlap: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            length_scale: None,
            signal_variance: None,
            noise_variance: None,
            noise_ratio: 1e-2,
            jitter: 1e-9,
            window_threshold: 2000,
            window: 500,
            overlap: 50,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut issues = Vec::new();
        let mut positive = |name: &str, v: Option<f64>| {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    issues.push(format!("gp.{name} must be positive (got {v})"));
                }
            }
        };
        positive("length_scale", self.length_scale);
        positive("signal_variance", self.signal_variance);
        positive("jitter", Some(self.jitter));
        if let Some(v) = self.noise_variance {
            if !(v.is_finite() && v >= 0.0) {
                issues.push(format!("gp.noise_variance must be non-negative (got {v})"));
            }
        }
        if !(self.noise_ratio.is_finite() && self.noise_ratio >= 0.0) {
            issues.push(format!("gp.noise_ratio must be non-negative (got {})", self.noise_ratio));
        }
        if self.window < 2 || self.overlap >= self.window {
            issues.push(format!(
                "gp.window ({}) must be at least 2 and exceed gp.overlap ({})",
                self.window, self.overlap
            ));
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

/// Posterior mean at the training inputs for zero-mean data `y`.
fn gp_posterior_mean(y: &[f64], dt: f64, ell: f64, sf2: f64, sn2: f64, jitter: f64) -> Result<Vec<f64>> {
    let n = y.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        let d = (i as f64 - j as f64) * dt / ell;
        sf2 * (-0.5 * d * d).exp()
    });
    let mut ky = k.clone();
    for i in 0..n {
        ky[(i, i)] += sn2 + jitter * sf2;
    }
    let chol = ky.cholesky().ok_or(Error::NotPositiveDefinite { jitter })?;
    let alpha = chol.solve(&DVector::from_column_slice(y));
    Ok((k * alpha).iter().copied().collect())
}

fn smooth_channel(y: &[f64], dt: f64, cfg: &GpConfig) -> Result<Vec<f64>> {
    let var = variance(y);
    if var == 0.0 && cfg.signal_variance.is_none() {
        return Ok(y.to_vec());
    }
    let m = mean(y);
    let centered: Vec<f64> = y.iter().map(|v| v - m).collect();
    let ell = cfg.length_scale.unwrap_or(10.0 * dt);
    let sf2 = cfg.signal_variance.unwrap_or(var);
    let sn2 = cfg.noise_variance.unwrap_or(cfg.noise_ratio * var);

    let n = y.len();
    let out = if n <= cfg.window_threshold {
        gp_posterior_mean(&centered, dt, ell, sf2, sn2, cfg.jitter)?
    } else {
        let mut acc = vec![0.0; n];
        let mut wsum = vec![0.0; n];
        let stride = cfg.window - cfg.overlap;
        let mut start = 0;
        loop {
            let end = (start + cfg.window).min(n);
            let s = end.saturating_sub(cfg.window);
            let part = gp_posterior_mean(&centered[s..end], dt, ell, sf2, sn2, cfg.jitter)?;
            let ramp = (cfg.overlap + 1) as f64;
            for (off, v) in part.into_iter().enumerate() {
                let i = s + off;
                let up = if s == 0 { 1.0 } else { (off + 1) as f64 / ramp };
                let down = if end == n { 1.0 } else { (end - i) as f64 / ramp };
                let w = up.min(down).min(1.0);
                acc[i] += w * v;
                wsum[i] += w;
            }
            if end == n {
                break;
            }
            start += stride;
        }
        acc.iter().zip(&wsum).map(|(a, w)| a / w).collect()
    };
    Ok(out.into_iter().map(|v| v + m).collect())
}

/// GP posterior mean at the sample times, each channel independently.
pub fn gp_smooth(traj: &Trajectory, cfg: &GpConfig) -> Result<Trajectory> {
    if traj.len() < 2 {
        return Err(Error::invalid("traj", "smoothing needs at least two samples"));
    }
    cfg.validate().map_err(Error::Config)?;
    let mut samples = traj.samples.clone();
    for c in 0..traj.dim() {
        let sm = smooth_channel(&traj.channel(c), traj.dt, cfg)?;
        for (s, v) in samples.iter_mut().zip(sm) {
            s[c] = v;
        }
    }
    Ok(Trajectory {
        t0: traj.t0,
        dt: traj.dt,
        samples,
    })
}

/// First `n_train` samples for training, the rest as prediction ground truth.
pub fn split_train_predict(traj: &Trajectory, n_train: usize) -> Result<(Trajectory, Trajectory)> {
    if n_train == 0 || n_train >= traj.len() {
        return Err(Error::invalid(
            "n_train",
            format!("must be in 1..{} (got {n_train})", traj.len()),
        ));
    }
    Ok((traj.slice(0..n_train), traj.slice(n_train..traj.len())))
}

/// Joins consecutive trajectories sharing a time base.
pub fn concat(a: &Trajectory, b: &Trajectory) -> Result<Trajectory> {
    if a.dim() != b.dim() {
        return Err(Error::dim("concat", "trajectories have different widths"));
    }
    let expected = a.t0 + a.dt * a.len() as f64;
    if (a.dt - b.dt).abs() > 1e-12 * a.dt.abs().max(1e-300) || (b.t0 - expected).abs() > 1e-9 * a.dt.max(1e-300) {
        return Err(Error::invalid("concat", "time bases are not contiguous"));
    }
    let mut samples = a.samples.clone();
    samples.extend(b.samples.iter().cloned());
    Ok(Trajectory {
        t0: a.t0,
        dt: a.dt,
        samples,
    })
}

/// MAE, RMSE and R² of one channel; `r2` is `None` when the truth is constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    pub r2: Option<f64>,
}

impl Metrics {
    pub fn of(pred: &[f64], truth: &[f64]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::dim(
                "metrics",
                format!("prediction has {} samples, truth has {}", pred.len(), truth.len()),
            ));
        }
        if truth.is_empty() {
            return Err(Error::invalid("metrics", "no samples"));
        }
        let (ss_res, ss_tot, abs) = sums(pred, truth);
        Ok(Self::from_sums(ss_res, ss_tot, abs, truth.len()))
    }

    fn from_sums(ss_res: f64, ss_tot: f64, abs: f64, n: usize) -> Self {
        Self {
            mae: abs / n as f64,
            rmse: (ss_res / n as f64).sqrt(),
            r2: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
        }
    }

    pub fn r2_text(&self) -> String {
        self.r2.map_or_else(|| "undefined".to_string(), |r| format!("{r:.6}"))
    }
}

fn sums(pred: &[f64], truth: &[f64]) -> (f64, f64, f64) {
    let m = mean(truth);
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut abs = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        let r = p - t;
        ss_res += r * r;
        abs += r.abs();
        ss_tot += (t - m) * (t - m);
    }
    (ss_res, ss_tot, abs)
}

/// Per-channel metrics plus a pooled summary. The pooled R² sums residual
/// and total squares over channels, each about its own mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub samples: usize,
    pub channels: Vec<(String, Metrics)>,
    pub pooled: Metrics,
    /// Largest per-channel peak-to-peak range of the truth.
    pub truth_range: f64,
}

pub fn compute_metrics(pred: &Trajectory, truth: &Trajectory) -> Result<MetricsReport> {
    if pred.len() != truth.len() {
        return Err(Error::dim(
            "metrics",
            format!("prediction has {} samples, truth has {}", pred.len(), truth.len()),
        ));
    }
    let dim = pred.dim().min(truth.dim());
    if dim == 0 {
        return Err(Error::dim("metrics", "no channels"));
    }
    if pred.len() > 1 && (pred.dt - truth.dt).abs() > 1e-6 * truth.dt.max(1e-300) {
        return Err(Error::invalid("metrics", "prediction and truth have different time steps"));
    }
    let mut channels = Vec::with_capacity(dim);
    let (mut res, mut tot, mut abs) = (0.0, 0.0, 0.0);
    let mut range: f64 = 0.0;
    for c in 0..dim {
        let (p, t) = (pred.channel(c), truth.channel(c));
        let (r, s, a) = sums(&p, &t);
        res += r;
        tot += s;
        abs += a;
        let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        range = range.max(hi - lo);
        let name = PLANT_COLUMNS.get(c).map_or_else(|| format!("x{c}"), |s| s.to_string());
        channels.push((name, Metrics::from_sums(r, s, a, t.len())));
    }
    Ok(MetricsReport {
        samples: pred.len(),
        channels,
        pooled: Metrics::from_sums(res, tot, abs, pred.len() * dim),
        truth_range: range,
    })
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "channel,samples,mae,rmse,r2";

    /// One CSV row per channel and a final `pooled` row.
    pub fn csv_rows(&self) -> Vec<String> {
        let row = |name: &str, m: &Metrics| {
            format!(
                "{name},{},{:?},{:?},{}",
                self.samples,
                m.mae,
                m.rmse,
                m.r2.map_or_else(|| "undefined".to_string(), |r| format!("{r:?}"))
            )
        };
        let mut rows: Vec<String> = self.channels.iter().map(|(n, m)| row(n, m)).collect();
        rows.push(row("pooled", &self.pooled));
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in self.csv_rows() {
            s.push_str(&r);
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8} {:>14} {:>14} {:>10}", "channel", "MAE", "RMSE", "R2")?;
        for (name, m) in self.channels.iter().map(|(n, m)| (n.as_str(), m)).chain([("pooled", &self.pooled)]) {
            writeln!(f, "{:<8} {:>14.6e} {:>14.6e} {:>10}", name, m.mae, m.rmse, m.r2_text())?;
        }
        write!(f, "samples: {}", self.samples)
    }
}

/// How currents are scaled before training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    None,
    /// Center per channel, one scale for both.
    Common,
    /// Center and scale each channel by its own statistics.
    PerChannel,
}

/// Shifts currents by a per-channel center and divides by a per-channel scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalizer {
    pub center: Vector2<f64>,
    pub scale: Vector2<f64>,
}

impl Normalizer {
    pub fn identity() -> Self {
        Self {
            center: Vector2::zeros(),
            scale: Vector2::repeat(1.0),
        }
    }

    /// Centers at the channel means. `Common` divides both channels by their
    /// pooled RMS deviation; a zero deviation falls back to 1.
    pub fn fit(traj: &Trajectory, mode: Normalization) -> Self {
        let (a, b) = (traj.channel(0), traj.channel(1));
        let nonzero = |s: f64| if s > 0.0 { s } else { 1.0 };
        let scale = match mode {
            Normalization::None => return Self::identity(),
            Normalization::Common => Vector2::repeat(nonzero((0.5 * (variance(&a) + variance(&b))).sqrt())),
            Normalization::PerChannel => Vector2::new(nonzero(variance(&a).sqrt()), nonzero(variance(&b).sqrt())),
        };
        Self {
            center: Vector2::new(mean(&a), mean(&b)),
            scale,
        }
    }

    pub fn forward(&self, x: &Vector2<f64>) -> Vector2<f64> {
        (x - self.center).component_div(&self.scale)
    }

    pub fn inverse(&self, x: &Vector2<f64>) -> Vector2<f64> {
        x.component_mul(&self.scale) + self.center
    }

    /// Applies to the first two columns and drops the rest.
    pub fn apply(&self, traj: &Trajectory) -> Trajectory {
        self.map(traj, |x| self.forward(x))
    }

    pub fn invert(&self, traj: &Trajectory) -> Trajectory {
        self.map(traj, |x| self.inverse(x))
    }

    fn map(&self, traj: &Trajectory, f: impl Fn(&Vector2<f64>) -> Vector2<f64>) -> Trajectory {
        Trajectory {
            t0: traj.t0,
            dt: traj.dt,
            samples: (0..traj.len())
                .map(|k| {
                    let v = f(&traj.vec2(k));
                    vec![v[0], v[1]]
                })
                .collect(),
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes a header and rows of already-formatted fields.
pub fn write_table(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut put = |line: &str| -> std::io::Result<()> {
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")
    };
    put(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        put(&r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn csv_header(dim: usize) -> Result<String> {
    if !(dim == 2 || dim == PLANT_COLUMNS.len()) {
        return Err(Error::dim(
            "csv",
            format!("trajectories with {dim} columns have no CSV schema (expected 2 or 5)"),
        ));
    }
    let mut h = String::from("t");
    for c in &PLANT_COLUMNS[..dim] {
        h.push(',');
        h.push_str(c);
    }
    Ok(h)
}

pub fn trajectory_csv(traj: &Trajectory) -> Result<String> {
    let mut s = csv_header(traj.dim())?;
    s.push('\n');
    for (k, row) in traj.samples.iter().enumerate() {
        s.push_str(&format!("{:?}", traj.time(k)));
        for v in row {
            s.push_str(&format!(",{v:?}"));
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn write_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let text = trajectory_csv(traj)?;
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn parse_csv(text: &str, path: &str) -> Result<Trajectory> {
    let perr = |line: usize, detail: String| Error::Parse {
        path: path.to_string(),
        line,
        detail,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (_, header) = lines.next().ok_or_else(|| perr(1, "empty file; a header row is required".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let expected: Vec<&str> = std::iter::once("t").chain(PLANT_COLUMNS).collect();
    for (i, want) in expected.iter().take(3).enumerate() {
        match cols.get(i) {
            Some(c) if c == want => {}
            Some(c) => return Err(perr(1, format!("expected column `{want}`, found `{c}`"))),
            None => return Err(perr(1, format!("missing column `{want}`"))),
        }
    }
    if cols.len() > 3 {
        for (i, want) in expected.iter().enumerate().skip(3) {
            match cols.get(i) {
                Some(c) if c == want => {}
                Some(c) => return Err(perr(1, format!("expected column `{want}`, found `{c}`"))),
                None => return Err(perr(1, format!("missing column `{want}`"))),
            }
        }
        if cols.len() > expected.len() {
            return Err(perr(1, format!("unexpected extra column `{}`", cols[expected.len()])));
        }
    }
    let width = cols.len();

    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            let missing = cols.get(fields.len()).copied().unwrap_or("?");
            return Err(perr(
                ln,
                if fields.len() < width {
                    format!("{} fields, expected {width} (missing `{missing}`)", fields.len())
                } else {
                    format!("{} fields, expected {width}", fields.len())
                },
            ));
        }
        let mut vals = Vec::with_capacity(width);
        for (f, name) in fields.iter().zip(&cols) {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| perr(ln, format!("column `{name}`: cannot parse `{}`", f.trim())))?;
            if !v.is_finite() {
                return Err(perr(ln, format!("column `{name}`: non-finite value")));
            }
            vals.push(v);
        }
        times.push(vals[0]);
        samples.push(vals[1..].to_vec());
    }
    if samples.is_empty() {
        return Err(perr(2, "no data rows".into()));
    }
    let n = times.len();
    let t0 = times[0];
    let dt = if n > 1 { (times[n - 1] - t0) / (n - 1) as f64 } else { 0.0 };
    if n > 1 {
        if !(dt > 0.0) {
            return Err(perr(3, "time column must increase".into()));
        }
        for (k, t) in times.iter().enumerate() {
            if (t - (t0 + dt * k as f64)).abs() > 1e-6 * dt {
                return Err(perr(k + 2, format!("non-uniform time step at t = {t}")));
            }
        }
    }
    Ok(Trajectory { t0, dt, samples })
}

pub fn read_csv(path: &Path) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_csv(&text, &path.display().to_string())
}

pub fn write_error_history(run: &IdentificationRun, path: &Path) -> Result<()> {
    let rows = run.times.iter().zip(&run.error_norm).map(|(t, e)| format!("{t:?},{e:?}"));
    write_table(path, "t,e_norm", rows)
}

/// `t,V,Vdot`; only teacher-known runs carry these.
pub fn write_lyapunov_history(run: &IdentificationRun, path: &Path) -> Result<()> {
    let (Some(v), Some(vd)) = (&run.lyapunov, &run.lyapunov_rate) else {
        return Err(Error::MissingTeacher("the Lyapunov history needs a teacher-known run"));
    };
    let rows = (0..run.times.len()).map(|k| format!("{:?},{:?},{:?}", run.times[k], v[k], vd[k]));
    write_table(path, "t,V,Vdot", rows)
}

pub fn write_metrics(report: &MetricsReport, path: &Path) -> Result<()> {
    write_table(path, MetricsReport::CSV_HEADER, report.csv_rows())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn traj1(v: Vec<f64>, dt: f64) -> Trajectory {
        Trajectory::new(0.0, dt, v.into_iter().map(|x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn metrics_hand_example() {
        let m = Metrics::of(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((m.mae - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.rmse - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(m.r2.unwrap().abs() < 1e-15);

        let perfect = Metrics::of(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(perfect, Metrics { mae: 0.0, rmse: 0.0, r2: Some(1.0) });

        let flat = Metrics::of(&[1.0, 2.0], &[5.0, 5.0]).unwrap();
        assert_eq!(flat.r2, None);
        assert_eq!(flat.r2_text(), "undefined");
        assert!(Metrics::of(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn pooled_metrics_sum_channel_squares() {
        let truth = Trajectory::new(0.0, 1.0, vec![vec![1.0, 10.0], vec![2.0, 30.0], vec![3.0, 20.0]]).unwrap();
        let pred = Trajectory::new(0.0, 1.0, vec![vec![2.0, 10.0], vec![2.0, 30.0], vec![2.0, 20.0]]).unwrap();
        let rep = compute_metrics(&pred, &truth).unwrap();
        assert_eq!(rep.channels[0].0, "i_d");
        assert!(rep.channels[0].1.r2.unwrap().abs() < 1e-15);
        assert_eq!(rep.channels[1].1.r2, Some(1.0));
        // SS_res = 2, SS_tot = 2 + 200.
        assert!((rep.pooled.r2.unwrap() - (1.0 - 2.0 / 202.0)).abs() < 1e-15);
        assert!((rep.truth_range - 20.0).abs() < 1e-15);
        assert!(rep.to_csv().lines().nth(3).unwrap().starts_with("pooled,3,"));
    }

    #[test]
    fn split_examples() {
        let t = traj1((0..400).map(f64::from).collect(), 1e-3);
        let (a, b) = split_train_predict(&t, 300).unwrap();
        assert_eq!((a.len(), b.len()), (300, 100));
        assert!((b.t0 - 0.3).abs() < 1e-12);
        let (_, one) = split_train_predict(&t, 399).unwrap();
        assert_eq!(one.len(), 1);
        assert!(split_train_predict(&t, 0).is_err());
        assert!(split_train_predict(&t, 400).is_err());
        assert_eq!(concat(&a, &b).unwrap(), t);
    }

    #[test]
    fn gp_constant_and_interpolation() {
        let c = gp_smooth(&traj1(vec![3.5; 50], 1e-3), &GpConfig::default()).unwrap();
        assert!(c.samples.iter().all(|s| (s[0] - 3.5).abs() < 1e-6));

        let y: Vec<f64> = (0..40).map(|k| (k as f64 * 0.3).sin() + 0.1 * k as f64).collect();
        let cfg = GpConfig {
            length_scale: Some(2e-3),
            noise_variance: Some(0.0),
            ..Default::default()
        };
        let s = gp_smooth(&traj1(y.clone(), 1e-3), &cfg).unwrap();
        for (a, b) in s.channel(0).iter().zip(&y) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn gp_denoises_sine() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let clean: Vec<f64> = (0..1000).map(|k| (2.0 * std::f64::consts::PI * 10.0 * k as f64 * 1e-3).sin()).collect();
        let noisy: Vec<f64> = clean.iter().map(|c| c + noise.sample(&mut rng)).collect();
        let s = gp_smooth(&traj1(noisy.clone(), 1e-3), &GpConfig::default()).unwrap();
        let rmse = |a: &[f64]| Metrics::of(a, &clean).unwrap().rmse;
        assert!(rmse(&s.channel(0)) <= 0.5 * rmse(&noisy), "{} vs {}", rmse(&s.channel(0)), rmse(&noisy));
    }

    #[test]
    fn gp_windowed_matches_shape() {
        let y: Vec<f64> = (0..2600).map(|k| (k as f64 * 0.01).sin()).collect();
        let s = gp_smooth(&traj1(y.clone(), 1e-4), &GpConfig::default()).unwrap();
        assert_eq!(s.len(), y.len());
        let err = Metrics::of(&s.channel(0), &y).unwrap();
        assert!(err.rmse < 1e-2, "{err:?}");
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let t = Trajectory::new(0.1, 1e-3, vec![vec![0.1, -2.5e-7], vec![1.0 / 3.0, 1e300]]).unwrap();
        let text = trajectory_csv(&t).unwrap();
        assert!(text.starts_with("t,i_d,i_q\n"));
        let back = parse_csv(&text, "mem").unwrap();
        assert_eq!(back.samples, t.samples);
        assert!((back.dt - t.dt).abs() < 1e-15);

        let e = parse_csv("t,i_d\n0,1\n", "x.csv").unwrap_err().to_string();
        assert!(e.contains("i_q"), "{e}");
        let e = parse_csv("t,i_d,i_q\n0,1,2\n0.001,1\n", "x.csv").unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("i_q"), "{e}");
        let e = parse_csv("t,i_d,i_q\n0,1,abc\n", "x.csv").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        assert!(parse_csv("t,i_d,i_q,omega_m\n0,1,2,3\n", "x").is_err());
    }

    #[test]
    fn normalizer_round_trip() {
        let t = Trajectory::new(0.0, 1.0, vec![vec![1.0, 4.0], vec![3.0, 8.0]]).unwrap();
        for mode in [Normalization::None, Normalization::Common, Normalization::PerChannel] {
            let n = Normalizer::fit(&t, mode);
            let back = n.invert(&n.apply(&t));
            for (a, b) in back.samples.iter().zip(&t.samples) {
                assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
            }
        }
        let n = Normalizer::fit(&t, Normalization::PerChannel);
        assert_eq!(n.center, Vector2::new(2.0, 6.0));
        assert_eq!(n.scale, Vector2::new(1.0, 2.0));
        let c = Normalizer::fit(&t, Normalization::Common);
        assert!((c.scale[0] - 2.5f64.sqrt()).abs() < 1e-15);
    }
}
