//! Two-branch differential neural network
//!
//! ```text
//! ẋ = a0·x + a1ᵀ·f1(s1·x) + a2ᵀ·f2(s2·x),   x ∈ ℝ²
//! ```
//!
//! The same weight type serves the ideal ("teacher") network and the
//! trainable identifier. Activations act elementwise, so each branch has as
//! many hidden units as pre-activations (`z == r`).
//!
//! Lipschitz constants are stored squared: the activation bound used by the
//! learning-law analysis is `‖f(c1) − f(c2)‖² ≤ L·‖c1 − c2‖²`, so the value
//! for the logistic sigmoid is `0.25² = 0.0625`, not `0.25`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Tanh,
    Sigmoid,
    Identity,
}

impl ActivationKind {
    #[inline]
    pub fn value(self, v: f64) -> f64 {
        match self {
            ActivationKind::Tanh => v.tanh(),
            ActivationKind::Sigmoid => sigmoid(v),
            ActivationKind::Identity => v,
        }
    }

    #[inline]
    pub fn derivative(self, v: f64) -> f64 {
        match self {
            ActivationKind::Tanh => {
                let t = v.tanh();
                1.0 - t * t
            }
            ActivationKind::Sigmoid => {
                let s = sigmoid(v);
                s * (1.0 - s)
            }
            ActivationKind::Identity => 1.0,
        }
    }

    /// Supremum of |f'|.
    pub fn lipschitz(self) -> f64 {
        match self {
            ActivationKind::Tanh | ActivationKind::Identity => 1.0,
            ActivationKind::Sigmoid => 0.25,
        }
    }

    /// Squared-norm constant `L_f` used in β.
    pub fn lipschitz_sq(self) -> f64 {
        let l = self.lipschitz();
        l * l
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Tanh => "tanh",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Identity => "identity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(ActivationKind::Tanh),
            "sigmoid" => Some(ActivationKind::Sigmoid),
            "identity" => Some(ActivationKind::Identity),
            _ => None,
        }
    }

    pub fn apply(self, v: &DVector<f64>) -> DVector<f64> {
        v.map(|x| self.value(x))
    }
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Diagonal Jacobian `D_f` of an elementwise activation at `v`.
pub fn activation_jacobian(kind: ActivationKind, v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(&v.map(|x| kind.derivative(x)))
}

/// Grid estimate of `max |f'(v)|²` over `[lo, hi]`.
pub fn estimate_lipschitz(kind: ActivationKind, lo: f64, hi: f64, grid_n: usize) -> Result<f64> {
    if grid_n < 2 {
        return Err(Error::invalid("grid_n", "need at least two grid points"));
    }
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(Error::invalid("box", format!("empty interval [{lo}, {hi}]")));
    }
    let step = (hi - lo) / (grid_n - 1) as f64;
    Ok((0..grid_n)
        .map(|k| {
            let d = kind.derivative(lo + step * k as f64);
            d * d
        })
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DnnWeights {
    pub a0: Matrix2<f64>,
    /// z×2
    pub a1: DMatrix<f64>,
    /// z×2
    pub a2: DMatrix<f64>,
    /// r×2
    pub s1: DMatrix<f64>,
    /// r×2
    pub s2: DMatrix<f64>,
    pub act1: ActivationKind,
    pub act2: ActivationKind,
}

impl DnnWeights {
    /// All-zero nonlinear weights of width `hidden`.
    pub fn zeros(a0: Matrix2<f64>, hidden: usize, act1: ActivationKind, act2: ActivationKind) -> Self {
        Self {
            a0,
            a1: DMatrix::zeros(hidden, 2),
            a2: DMatrix::zeros(hidden, 2),
            s1: DMatrix::zeros(hidden, 2),
            s2: DMatrix::zeros(hidden, 2),
            act1,
            act2,
        }
    }

    pub fn hidden(&self) -> usize {
        self.a1.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let z = self.a1.nrows();
        if z == 0 {
            return Err(Error::dim("a1", "needs at least one row"));
        }
        for (name, m) in [("a1", &self.a1), ("a2", &self.a2), ("s1", &self.s1), ("s2", &self.s2)] {
            if m.ncols() != 2 {
                return Err(Error::dim(name, format!("expected 2 columns, found {}", m.ncols())));
            }
            if m.nrows() != z {
                return Err(Error::dim(
                    name,
                    format!("expected {z} rows to match a1 (elementwise activations need z = r), found {}", m.nrows()),
                ));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { component: name });
            }
        }
        if self.a0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { component: "a0" });
        }
        Ok(())
    }

    pub fn branch(&self, i: usize) -> Branch<'_> {
        match i {
            0 => Branch { a: &self.a1, s: &self.s1, act: self.act1 },
            1 => Branch { a: &self.a2, s: &self.s2, act: self.act2 },
            _ => panic!("branch index {i} out of range"),
        }
    }

    /// Eigenvalues of a0 when real, as `(min, max)`.
    pub fn a0_real_eigenvalues(&self) -> Result<(f64, f64)> {
        real_eigenvalues(&self.a0)
    }
}

/// Borrowed view of one nonlinear branch.
#[derive(Clone, Copy, Debug)]
pub struct Branch<'a> {
    pub a: &'a DMatrix<f64>,
    pub s: &'a DMatrix<f64>,
    pub act: ActivationKind,
}

impl Branch<'_> {
    /// `aᵀ·f(s·x)`
    pub fn output(&self, x: &Vector2<f64>) -> Vector2<f64> {
        let z = self.a.nrows();
        let mut out = Vector2::zeros();
        for j in 0..z {
            let pre = self.s[(j, 0)] * x[0] + self.s[(j, 1)] * x[1];
            let f = self.act.value(pre);
            out[0] += self.a[(j, 0)] * f;
            out[1] += self.a[(j, 1)] * f;
        }
        out
    }

    pub fn pre_activation(&self, x: &Vector2<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.s.nrows(),
            (0..self.s.nrows()).map(|j| self.s[(j, 0)] * x[0] + self.s[(j, 1)] * x[1]),
        )
    }
}

/// `a0·x + a1ᵀ·f1(s1·x) + a2ᵀ·f2(s2·x)`
pub fn dnn_derivative(x: &Vector2<f64>, w: &DnnWeights) -> Result<Vector2<f64>> {
    w.validate()?;
    Ok(rate_unchecked(x, w))
}

#[inline]
pub(crate) fn rate_unchecked(x: &Vector2<f64>, w: &DnnWeights) -> Vector2<f64> {
    w.a0 * x + w.branch(0).output(x) + w.branch(1).output(x)
}

/// Squared spectral-norm bounds of the nonlinear weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightBounds {
    pub a1_bar: f64,
    pub a2_bar: f64,
    pub s1_bar: f64,
    pub s2_bar: f64,
}

impl WeightBounds {
    /// ℓ = ā1 + ā2
    pub fn ell(&self) -> f64 {
        self.a1_bar + self.a2_bar
    }

    /// β = L1·s̄1 + L2·s̄2, with squared Lipschitz constants.
    pub fn beta(&self, act1: ActivationKind, act2: ActivationKind) -> f64 {
        act1.lipschitz_sq() * self.s1_bar + act2.lipschitz_sq() * self.s2_bar
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut issues = Vec::new();
        for (name, v) in [
            ("a1_bar", self.a1_bar),
            ("a2_bar", self.a2_bar),
            ("s1_bar", self.s1_bar),
            ("s2_bar", self.s2_bar),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                issues.push(format!("bounds.{name} must be non-negative (got {v})"));
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }
}

pub fn spectral_norm_sq(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let s = m.clone().singular_values().max();
    s * s
}

pub fn weight_norm_bounds(w: &DnnWeights) -> WeightBounds {
    WeightBounds {
        a1_bar: spectral_norm_sq(&w.a1),
        a2_bar: spectral_norm_sq(&w.a2),
        s1_bar: spectral_norm_sq(&w.s1),
        s2_bar: spectral_norm_sq(&w.s2),
    }
}

/// Real eigenvalues `(min, max)` of a 2×2 matrix, or an error carrying the
/// (negative) discriminant of the characteristic polynomial.
pub fn real_eigenvalues(m: &Matrix2<f64>) -> Result<(f64, f64)> {
    let tr = m.trace();
    let det = m.determinant();
    let disc = tr * tr - 4.0 * det;
    let scale = tr * tr + 4.0 * det.abs();
    let disc = if disc < 0.0 && disc.abs() <= 1e-14 * scale { 0.0 } else { disc };
    if disc < 0.0 {
        return Err(Error::ComplexSpectrum { discriminant: disc });
    }
    let root = disc.sqrt();
    Ok(((tr - root) / 2.0, (tr + root) / 2.0))
}

/// A saved identifier: weights plus the optional state and data scaling
/// needed to resume prediction in physical units.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub weights: DnnWeights,
    /// Identifier state at the end of training, in model coordinates.
    pub x_hat: Option<Vector2<f64>>,
    /// Per-channel offset subtracted before scaling.
    pub center: Option<Vector2<f64>>,
    /// Per-channel divisor applied after centering.
    pub scale: Option<Vector2<f64>>,
}

impl ModelFile {
    pub fn new(weights: DnnWeights) -> Self {
        Self {
            weights,
            x_hat: None,
            center: None,
            scale: None,
        }
    }

    /// Line-oriented text: `act1 <kind>`, `act2 <kind>`, then one record per
    /// matrix as `name rows cols v00 v01 ...` in row-major order.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# pmsm-dnn model v1\n");
        let w = &self.weights;
        let _ = writeln!(out, "act1 {}", w.act1.name());
        let _ = writeln!(out, "act2 {}", w.act2.name());
        write_matrix(&mut out, "a0", 2, 2, w.a0.transpose().iter().copied());
        for (name, m) in [("a1", &w.a1), ("a2", &w.a2), ("s1", &w.s1), ("s2", &w.s2)] {
            write_matrix(&mut out, name, m.nrows(), m.ncols(), m.transpose().iter().copied());
        }
        if let Some(x) = &self.x_hat {
            write_matrix(&mut out, "x_hat", 2, 1, x.iter().copied());
        }
        if let Some(c) = &self.center {
            write_matrix(&mut out, "center", 2, 1, c.iter().copied());
        }
        if let Some(s) = &self.scale {
            write_matrix(&mut out, "scale", 2, 1, s.iter().copied());
        }
        out
    }

    pub fn from_text(text: &str, path: &str) -> Result<Self> {
        let mut act1 = None;
        let mut act2 = None;
        let mut mats: std::collections::BTreeMap<String, DMatrix<f64>> = Default::default();
        let mut offset = 0usize;
        for (idx, raw) in text.split_inclusive('\n').enumerate() {
            let line_no = idx + 1;
            let line_offset = offset;
            offset += raw.len();
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |detail: String| Error::Parse {
                path: path.to_string(),
                line: line_no,
                detail: format!("{detail} (byte offset {line_offset})"),
            };
            let mut toks = line.split_whitespace();
            let key = toks.next().unwrap_or_default();
            match key {
                "act1" | "act2" => {
                    let name = toks.next().ok_or_else(|| err(format!("{key} needs an activation name")))?;
                    let kind = ActivationKind::from_name(name)
                        .ok_or_else(|| err(format!("unknown activation `{name}`")))?;
                    if let Some(extra) = toks.next() {
                        return Err(err(format!("{key}: unexpected `{extra}`")));
                    }
                    if key == "act1" {
                        act1 = Some(kind);
                    } else {
                        act2 = Some(kind);
                    }
                }
                "a0" | "a1" | "a2" | "s1" | "s2" | "x_hat" | "center" | "scale" => {
                    let mut dim = |what: &str| -> Result<usize> {
                        let tok = toks.next().ok_or_else(|| err(format!("{key}: missing {what}")))?;
                        tok.parse::<usize>()
                            .map_err(|_| err(format!("{key}: bad {what} `{tok}`")))
                    };
                    let rows = dim("row count")?;
                    let cols = dim("column count")?;
                    let values = toks
                        .map(|t| match t.parse::<f64>() {
                            Ok(v) if v.is_finite() => Ok(v),
                            _ => Err(err(format!("{key}: bad number `{t}`"))),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    if values.len() != rows * cols {
                        return Err(err(format!(
                            "{key}: expected {} values for {rows}x{cols}, found {}",
                            rows * cols,
                            values.len()
                        )));
                    }
                    mats.insert(key.to_string(), DMatrix::from_row_slice(rows, cols, &values));
                }
                other => return Err(err(format!("unknown record `{other}`"))),
            }
        }
        let missing = |what: &str| Error::Parse {
            path: path.to_string(),
            line: 0,
            detail: format!("missing record `{what}`"),
        };
        let mut take = |name: &'static str| mats.remove(name).ok_or_else(|| missing(name));
        let a0m = take("a0")?;
        if a0m.shape() != (2, 2) {
            return Err(Error::dim("a0", format!("expected 2x2, found {:?}", a0m.shape())));
        }
        let weights = DnnWeights {
            a0: Matrix2::new(a0m[(0, 0)], a0m[(0, 1)], a0m[(1, 0)], a0m[(1, 1)]),
            a1: take("a1")?,
            a2: take("a2")?,
            s1: take("s1")?,
            s2: take("s2")?,
            act1: act1.ok_or_else(|| missing("act1"))?,
            act2: act2.ok_or_else(|| missing("act2"))?,
        };
        weights.validate()?;
        let vec2 = |m: DMatrix<f64>, name: &'static str| -> Result<Vector2<f64>> {
            if m.len() != 2 {
                return Err(Error::dim(name, format!("expected 2 values, found {}", m.len())));
            }
            Ok(Vector2::new(m[0], m[1]))
        };
        let x_hat = mats.remove("x_hat").map(|m| vec2(m, "x_hat")).transpose()?;
        let center = mats.remove("center").map(|m| vec2(m, "center")).transpose()?;
        let scale = mats.remove("scale").map(|m| vec2(m, "scale")).transpose()?;
        Ok(Self {
            weights,
            x_hat,
            center,
            scale,
        })
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text, &path.display().to_string())
    }
}

fn write_matrix(out: &mut String, name: &str, rows: usize, cols: usize, values: impl Iterator<Item = f64>) {
    let _ = write!(out, "{name} {rows} {cols}");
    for v in values {
        let _ = write!(out, " {v:?}");
    }
    out.push('\n');
}
