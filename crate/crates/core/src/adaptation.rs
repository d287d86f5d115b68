//! Weight learning laws, the Lyapunov function used to certify them, and the
//! feasibility solver for the design scalar `p`.
//!
//! For each branch `i` the laws are
//!
//! ```text
//! ȧ_i =  c_i·p·D_i·s̃_i·x̂·eᵀ − c_i·p·f_i(s_i·x̂)·eᵀ
//! ṡ_i = −d_i·p·D_iᵀ·a_i·e·x̂ᵀ
//! ```
//!
//! with `e = x̂ − x`, `s̃_i = s_i − s_i*` and `D_i` the activation Jacobian at
//! the identifier's own pre-activation `s_i·x̂`.
//!
//! `s̃_i` needs the ideal weights, which only exist when the target is a known
//! teacher network. Against a real plant the first term is dropped
//! ([`LearningMode::CertaintyEquivalence`]); results carry the mode so the
//! two variants are never confused.

use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::dnn::{rate_unchecked, real_eigenvalues, Branch, DnnWeights};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearningMode {
    /// Exact laws with `s̃_i` from known ideal weights.
    TeacherKnown,
    /// `s̃_i` term set to zero; the only variant usable on measured data.
    CertaintyEquivalence,
}

impl LearningMode {
    pub fn label(self) -> &'static str {
        match self {
            LearningMode::TeacherKnown => "teacher-known",
            LearningMode::CertaintyEquivalence => "certainty-equivalence",
        }
    }
}

impl fmt::Display for LearningMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptGains {
    pub p: f64,
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
    /// Descent margin `C` in `V̇ ≤ −C‖e‖²`.
    pub margin: f64,
}

impl AdaptGains {
    pub fn c(&self, i: usize) -> f64 {
        [self.c1, self.c2][i]
    }

    pub fn d(&self, i: usize) -> f64 {
        [self.d1, self.d2][i]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p", self.p),
            ("c1", self.c1),
            ("c2", self.c2),
            ("d1", self.d1),
            ("d2", self.d2),
            ("margin", self.margin),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be strictly positive (got {v})")));
            }
        }
        Ok(())
    }
}

/// Solution of `p²ℓ + 2pη + β + C ≤ 0` over `p > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub ell: f64,
    pub beta: f64,
    pub eta: f64,
    pub margin: f64,
    /// `4η² − 4ℓ(β + C)` as computed, before the degeneracy snap.
    pub discriminant: f64,
    /// Set when the discriminant was treated as exactly zero.
    pub degenerate: bool,
    /// Admissible `[p_lo, p_hi]`; `None` when infeasible.
    pub interval: Option<(f64, f64)>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.interval.is_some()
    }

    /// Value of the scalar condition at `p`; feasible points give ≤ 0.
    pub fn condition(&self, p: f64) -> f64 {
        scalar_condition(p, self.ell, self.eta, self.beta, self.margin)
    }

    /// Midpoint of the admissible interval.
    pub fn selected_p(&self) -> Option<f64> {
        self.interval.map(|(lo, hi)| 0.5 * (lo + hi))
    }

    pub fn contains(&self, p: f64) -> bool {
        self.interval.is_some_and(|(lo, hi)| p >= lo && p <= hi)
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14} {:>14}", "quantity", "value")?;
        writeln!(f, "{:<14} {:>14}", "ell", sig6(self.ell))?;
        writeln!(f, "{:<14} {:>14}", "beta", sig6(self.beta))?;
        writeln!(f, "{:<14} {:>14}", "eta", sig6(self.eta))?;
        writeln!(f, "{:<14} {:>14}", "C", sig6(self.margin))?;
        writeln!(f, "{:<14} {:>14}", "discriminant", sig6(self.discriminant))?;
        match self.interval {
            Some((lo, hi)) if lo == hi => {
                writeln!(f, "{:<14} {:>14}", "p (single)", sig6(lo))?;
            }
            Some((lo, hi)) => {
                writeln!(f, "{:<14} {:>14}", "p_lo", sig6(lo))?;
                writeln!(f, "{:<14} {:>14}", "p_hi", sig6(hi))?;
                writeln!(f, "{:<14} {:>14}", "p (selected)", sig6(0.5 * (lo + hi)))?;
            }
            None => {
                writeln!(f, "{:<14} {:>14}", "status", "infeasible")?;
                writeln!(
                    f,
                    "no p > 0 satisfies p^2*{} + 2p*({}) + {} + {} <= 0",
                    sig6(self.ell),
                    sig6(self.eta),
                    sig6(self.beta),
                    sig6(self.margin)
                )?;
            }
        }
        Ok(())
    }
}

/// Six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

pub fn scalar_condition(p: f64, ell: f64, eta: f64, beta: f64, margin: f64) -> f64 {
    p * p * ell + 2.0 * p * eta + beta + margin
}

pub fn feasible_p_interval(ell: f64, eta: f64, beta: f64, margin: f64) -> Result<FeasibilityReport> {
    for (name, v) in [("ell", ell), ("beta", beta), ("C", margin)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(name, format!("must be strictly positive (got {v})")));
        }
    }
    if !eta.is_finite() {
        return Err(Error::NonFinite { component: "eta" });
    }
    let quad = 4.0 * eta * eta;
    let lin = 4.0 * ell * (beta + margin);
    let discriminant = quad - lin;
    let degenerate = discriminant.abs() < 1e-12 * quad.max(lin);

    let interval = if degenerate {
        (eta < 0.0).then(|| {
            let p = -eta / ell;
            (p, p)
        })
    } else if discriminant > 0.0 {
        let root = discriminant.sqrt();
        // Stable pair: the product of the roots is (β + C)/ℓ.
        let q = -0.5 * (2.0 * eta + eta.signum() * root);
        let (r1, r2) = (q / ell, (beta + margin) / q);
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        (hi > 0.0).then_some((lo.max(0.0), hi))
    } else {
        None
    };

    Ok(FeasibilityReport {
        ell,
        beta,
        eta,
        margin,
        discriminant,
        degenerate,
        interval,
    })
}

/// Negative-semidefiniteness of `p²ℓ·I + 2p·a0 + (β + C)·I`, tested on the
/// matrix itself through its trace and determinant.
///
/// Both eigenvalues of the matrix are real when `a0`'s are, so
/// `tr ≤ 0 ∧ det ≥ 0` is the eigenvalue test. For a non-normal `a0` this is
/// weaker than `yᵀ·M·y ≤ 0`; the default `a0` is diagonal.
pub fn check_matrix_inequality(p: f64, a0: &Matrix2<f64>, ell: f64, beta: f64, margin: f64) -> Result<bool> {
    real_eigenvalues(a0)?;
    let m = Matrix2::identity() * (p * p * ell + beta + margin) + a0 * (2.0 * p);
    let scale = (p * p * ell + beta + margin).abs() + 2.0 * p * a0.abs().max();
    let tol = 1e-12 * scale;
    let tr = m.trace();
    let det = m.determinant();
    Ok(tr <= tol && det >= -tol * (tr.abs() + tol))
}

/// Trainable state of the identifier; `weights.a0` is never modified.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentifierState {
    pub x_hat: Vector2<f64>,
    pub weights: DnnWeights,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightErrors {
    pub a_tilde: [DMatrix<f64>; 2],
    pub s_tilde: [DMatrix<f64>; 2],
}

impl WeightErrors {
    pub fn between(current: &DnnWeights, teacher: &DnnWeights) -> Self {
        Self {
            a_tilde: [&current.a1 - &teacher.a1, &current.a2 - &teacher.a2],
            s_tilde: [&current.s1 - &teacher.s1, &current.s2 - &teacher.s2],
        }
    }
}

/// Identification error and, in teacher-known runs, the weight errors.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorState {
    pub e: Vector2<f64>,
    pub weights: Option<WeightErrors>,
}

impl ErrorState {
    pub fn teacher_known(x: &Vector2<f64>, id: &IdentifierState, teacher: &DnnWeights) -> Self {
        Self {
            e: id.x_hat - x,
            weights: Some(WeightErrors::between(&id.weights, teacher)),
        }
    }

    pub fn plant(x: &Vector2<f64>, x_hat: &Vector2<f64>) -> Self {
        Self { e: x_hat - x, weights: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightRates {
    pub a: [DMatrix<f64>; 2],
    pub s: [DMatrix<f64>; 2],
}

impl WeightRates {
    pub fn zeros(hidden: usize) -> Self {
        let z = || DMatrix::zeros(hidden, 2);
        Self {
            a: [z(), z()],
            s: [z(), z()],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().chain(self.s.iter()).all(|m| m.iter().all(|v| *v == 0.0))
    }
}

pub fn learning_law_rates(
    id: &IdentifierState,
    e: &Vector2<f64>,
    mode: LearningMode,
    teacher_s: Option<[&DMatrix<f64>; 2]>,
    gains: &AdaptGains,
) -> Result<WeightRates> {
    id.weights.validate()?;
    let z = id.weights.hidden();
    let s_tilde = match (mode, teacher_s) {
        (LearningMode::TeacherKnown, None) => {
            return Err(Error::MissingTeacher(
                "teacher-known learning needs the ideal s1*, s2*",
            ))
        }
        (LearningMode::TeacherKnown, Some(ts)) => {
            for (name, t) in [("s1*", ts[0]), ("s2*", ts[1])] {
                if t.shape() != (z, 2) {
                    return Err(Error::dim(name, format!("expected {z}x2, found {:?}", t.shape())));
                }
            }
            Some([&id.weights.s1 - ts[0], &id.weights.s2 - ts[1]])
        }
        (LearningMode::CertaintyEquivalence, _) => None,
    };
    let mut rates = WeightRates::zeros(z);
    for i in 0..2 {
        let st = s_tilde.as_ref().map(|s| &s[i]);
        let (ra, rs) = {
            let WeightRates { a, s } = &mut rates;
            (&mut a[i], &mut s[i])
        };
        branch_rates(
            id.weights.branch(i),
            st,
            &id.x_hat,
            e,
            gains.c(i) * gains.p,
            gains.d(i) * gains.p,
            ra.as_mut_slice(),
            rs.as_mut_slice(),
        );
    }
    Ok(rates)
}

/// Rates of one branch written into column-major `z×2` buffers.
/// `cp = c_i·p`, `dp = d_i·p`.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn branch_rates(
    br: Branch<'_>,
    s_tilde: Option<&DMatrix<f64>>,
    x_hat: &Vector2<f64>,
    e: &Vector2<f64>,
    cp: f64,
    dp: f64,
    a_rate: &mut [f64],
    s_rate: &mut [f64],
) {
    let z = br.a.nrows();
    for j in 0..z {
        let pre = br.s[(j, 0)] * x_hat[0] + br.s[(j, 1)] * x_hat[1];
        let f = br.act.value(pre);
        let d = br.act.derivative(pre);
        let mut coeff = -f;
        if let Some(st) = s_tilde {
            coeff += d * (st[(j, 0)] * x_hat[0] + st[(j, 1)] * x_hat[1]);
        }
        let ae = br.a[(j, 0)] * e[0] + br.a[(j, 1)] * e[1];
        for k in 0..2 {
            a_rate[j + k * z] = cp * coeff * e[k];
            s_rate[j + k * z] = -dp * d * ae * x_hat[k];
        }
    }
}

/// `ė = dnn(x̂; identifier) − dnn(x; teacher)`.
pub fn error_derivative(
    x: &Vector2<f64>,
    x_hat: &Vector2<f64>,
    teacher: &DnnWeights,
    id: &DnnWeights,
) -> Result<Vector2<f64>> {
    if teacher.a0 != id.a0 {
        return Err(Error::A0Mismatch);
    }
    teacher.validate()?;
    id.validate()?;
    Ok(rate_unchecked(x_hat, id) - rate_unchecked(x, teacher))
}

/// The same quantity regrouped as
/// `a0·e + Σ [ãᵀf(s·x̂) + a*ᵀ(f(s·x̂) − f(s*·x̂)) + a*ᵀ(f(s*·x̂) − f(s*·x))]`.
pub fn error_derivative_expanded(
    x: &Vector2<f64>,
    x_hat: &Vector2<f64>,
    teacher: &DnnWeights,
    id: &DnnWeights,
) -> Result<Vector2<f64>> {
    if teacher.a0 != id.a0 {
        return Err(Error::A0Mismatch);
    }
    teacher.validate()?;
    id.validate()?;
    let e = x_hat - x;
    let mut out = id.a0 * e;
    for i in 0..2 {
        let b = id.branch(i);
        let t = teacher.branch(i);
        let xh = DVector::from_column_slice(x_hat.as_slice());
        let xv = DVector::from_column_slice(x.as_slice());
        let f_id = b.act.apply(&(b.s * &xh));
        let f_star_hat = t.act.apply(&(t.s * &xh));
        let f_star = t.act.apply(&(t.s * &xv));
        let a_tilde = b.a - t.a;
        let term = a_tilde.transpose() * &f_id
            + t.a.transpose() * (&f_id - &f_star_hat)
            + t.a.transpose() * (&f_star_hat - &f_star);
        out += Vector2::new(term[0], term[1]);
    }
    Ok(out)
}

fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `V = p·eᵀe + Σ tr(ãᵢᵀãᵢ)/cᵢ + Σ tr(s̃ⱼᵀs̃ⱼ)/dⱼ`
pub fn lyapunov_value(err: &ErrorState, gains: &AdaptGains) -> Result<f64> {
    let w = err
        .weights
        .as_ref()
        .ok_or(Error::MissingTeacher("the Lyapunov function needs weight errors"))?;
    let mut v = gains.p * err.e.norm_squared();
    for i in 0..2 {
        v += w.a_tilde[i].norm_squared() / gains.c(i);
        v += w.s_tilde[i].norm_squared() / gains.d(i);
    }
    Ok(v)
}

/// Exact `V̇ = 2p·eᵀė + 2Σ tr(ãᵢᵀȧᵢ)/cᵢ + 2Σ tr(s̃ⱼᵀṡⱼ)/dⱼ`.
pub fn lyapunov_rate(
    err: &ErrorState,
    e_dot: &Vector2<f64>,
    rates: &WeightRates,
    gains: &AdaptGains,
) -> Result<f64> {
    let w = err
        .weights
        .as_ref()
        .ok_or(Error::MissingTeacher("the Lyapunov rate needs weight errors"))?;
    let mut v = 2.0 * gains.p * err.e.dot(e_dot);
    for i in 0..2 {
        v += 2.0 * frob_dot(&w.a_tilde[i], &rates.a[i]) / gains.c(i);
        v += 2.0 * frob_dot(&w.s_tilde[i], &rates.s[i]) / gains.d(i);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnn::ActivationKind;
    use nalgebra::dmatrix;

    fn unit_gains() -> AdaptGains {
        AdaptGains {
            p: 1.0,
            c1: 1.0,
            c2: 1.0,
            d1: 1.0,
            d2: 1.0,
            margin: 1.0,
        }
    }

    fn small_net(a0: Matrix2<f64>) -> DnnWeights {
        DnnWeights {
            a0,
            a1: dmatrix![0.3, -0.2; 0.1, 0.5],
            a2: dmatrix![-0.4, 0.2; 0.7, 0.1],
            s1: dmatrix![1.1, -0.3; 0.2, 0.9],
            s2: dmatrix![-0.5, 0.8; 0.6, 0.4],
            act1: ActivationKind::Tanh,
            act2: ActivationKind::Sigmoid,
        }
    }

    #[test]
    fn zero_error_gives_zero_rates() {
        let w = small_net(-Matrix2::identity());
        let id = IdentifierState {
            x_hat: Vector2::new(0.4, -1.0),
            weights: w.clone(),
        };
        let mut t = w.clone();
        t.s1[(0, 0)] += 0.3;
        let r = learning_law_rates(&id, &Vector2::zeros(), LearningMode::TeacherKnown, Some([&t.s1, &t.s2]), &unit_gains()).unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn zero_c_freezes_output_weights() {
        let w = small_net(-Matrix2::identity());
        let id = IdentifierState {
            x_hat: Vector2::new(0.4, -1.0),
            weights: w,
        };
        let gains = AdaptGains {
            c1: 0.0,
            c2: 0.0,
            ..unit_gains()
        };
        let r = learning_law_rates(&id, &Vector2::new(0.3, 0.2), LearningMode::CertaintyEquivalence, None, &gains).unwrap();
        assert!(r.a.iter().all(|m| m.iter().all(|v| *v == 0.0)));
        assert!(r.s.iter().any(|m| m.iter().any(|v| *v != 0.0)));
    }

    #[test]
    fn identity_activation_hand_case() {
        // D = I, s1 = s1* = I, x̂ = (1, 0), e = (0, 1), a1 = I, p = c1 = d1 = 1:
        //   ȧ1 = −(s1·x̂)·eᵀ = −[1,0]ᵀ[0,1] = [[0,−1],[0,0]]
        //   ṡ1 = −Dᵀ·a1·e·x̂ᵀ = −[0,1]ᵀ[1,0] = [[0,0],[−1,0]]
        let i2 = DMatrix::<f64>::identity(2, 2);
        let w = DnnWeights {
            a0: -Matrix2::identity(),
            a1: i2.clone(),
            a2: DMatrix::zeros(2, 2),
            s1: i2.clone(),
            s2: DMatrix::zeros(2, 2),
            act1: ActivationKind::Identity,
            act2: ActivationKind::Identity,
        };
        let id = IdentifierState {
            x_hat: Vector2::new(1.0, 0.0),
            weights: w.clone(),
        };
        let r = learning_law_rates(&id, &Vector2::new(0.0, 1.0), LearningMode::TeacherKnown, Some([&w.s1, &w.s2]), &unit_gains()).unwrap();
        assert_eq!(r.a[0], dmatrix![0.0, -1.0; 0.0, 0.0]);
        assert_eq!(r.s[0], dmatrix![0.0, 0.0; -1.0, 0.0]);
        assert_eq!(r.a[1], DMatrix::zeros(2, 2));
        assert_eq!(r.s[1], DMatrix::zeros(2, 2));
    }

    #[test]
    fn teacher_mode_needs_teacher() {
        let id = IdentifierState {
            x_hat: Vector2::zeros(),
            weights: small_net(-Matrix2::identity()),
        };
        assert!(matches!(
            learning_law_rates(&id, &Vector2::new(1.0, 0.0), LearningMode::TeacherKnown, None, &unit_gains()),
            Err(Error::MissingTeacher(_))
        ));
    }

    #[test]
    fn rates_match_matrix_formula() {
        // Vectorized branch_rates against a direct nalgebra evaluation of the laws.
        let w = small_net(-Matrix2::identity() * 3.0);
        let mut t = w.clone();
        t.s1 *= 0.8;
        t.s2[(1, 0)] -= 0.25;
        let x_hat = Vector2::new(0.7, -0.45);
        let e = Vector2::new(0.12, -0.3);
        let gains = AdaptGains {
            p: 1.7,
            c1: 2.0,
            c2: 3.0,
            d1: 0.5,
            d2: 4.0,
            margin: 1.0,
        };
        let id = IdentifierState { x_hat, weights: w.clone() };
        let r = learning_law_rates(&id, &e, LearningMode::TeacherKnown, Some([&t.s1, &t.s2]), &gains).unwrap();
        let xh = DMatrix::from_column_slice(2, 1, x_hat.as_slice());
        let em = DMatrix::from_column_slice(2, 1, e.as_slice());
        for i in 0..2 {
            let b = w.branch(i);
            let pre = b.s * &xh;
            let f = pre.map(|v| b.act.value(v));
            let dm = DMatrix::from_diagonal(&pre.column(0).map(|v| b.act.derivative(v)));
            let st = b.s - t.branch(i).s;
            let a_dot = (&dm * &st * &xh * em.transpose() - &f * em.transpose()) * (gains.c(i) * gains.p);
            let s_dot = -(dm.transpose() * b.a * &em * xh.transpose()) * (gains.d(i) * gains.p);
            assert!((&r.a[i] - a_dot).abs().max() < 1e-14);
            assert!((&r.s[i] - s_dot).abs().max() < 1e-14);
        }
    }

    #[test]
    fn error_derivative_cases() {
        let w = small_net(-Matrix2::identity());
        let x = Vector2::new(0.3, -0.7);
        assert_eq!(error_derivative(&x, &x, &w, &w).unwrap(), Vector2::zeros());

        let lin = DnnWeights::zeros(Matrix2::new(-2.0, 0.5, 0.0, -1.0), 2, ActivationKind::Tanh, ActivationKind::Tanh);
        let xh = Vector2::new(1.0, 2.0);
        let ed = error_derivative(&x, &xh, &lin, &lin).unwrap();
        let expect = lin.a0 * (xh - x);
        assert!((ed - expect).norm() < 1e-15);

        let mut other = w.clone();
        other.a0[(0, 1)] = 0.1;
        assert!(matches!(error_derivative(&x, &xh, &w, &other), Err(Error::A0Mismatch)));
    }

    #[test]
    fn expanded_error_dynamics_agree() {
        let teacher = small_net(Matrix2::new(-2.0, 0.3, 0.1, -1.5));
        let mut id = teacher.clone();
        id.a1 += dmatrix![0.05, -0.02; 0.01, 0.03];
        id.s2 -= dmatrix![0.1, 0.0; -0.04, 0.2];
        let x = Vector2::new(0.45, -0.8);
        let xh = Vector2::new(0.5, -0.6);
        let direct = error_derivative(&x, &xh, &teacher, &id).unwrap();
        let grouped = error_derivative_expanded(&x, &xh, &teacher, &id).unwrap();
        assert!((direct - grouped).amax() < 1e-14, "{direct} vs {grouped}");
    }

    #[test]
    fn lyapunov_examples() {
        let z = || DMatrix::<f64>::zeros(2, 2);
        let zero = ErrorState {
            e: Vector2::zeros(),
            weights: Some(WeightErrors {
                a_tilde: [z(), z()],
                s_tilde: [z(), z()],
            }),
        };
        assert_eq!(lyapunov_value(&zero, &unit_gains()).unwrap(), 0.0);
        let one = ErrorState {
            e: Vector2::new(1.0, 0.0),
            ..zero.clone()
        };
        assert_eq!(lyapunov_value(&one, &unit_gains()).unwrap(), 1.0);
        let six = ErrorState {
            e: Vector2::new(1.0, 1.0),
            weights: Some(WeightErrors {
                a_tilde: [DMatrix::identity(2, 2), z()],
                s_tilde: [z(), z()],
            }),
        };
        let gains = AdaptGains { p: 2.0, ..unit_gains() };
        assert_eq!(lyapunov_value(&six, &gains).unwrap(), 6.0);
        assert!(lyapunov_value(&ErrorState::plant(&Vector2::zeros(), &Vector2::zeros()), &gains).is_err());
    }

    #[test]
    fn interval_examples() {
        let r = feasible_p_interval(1.0, -2.0, 1.0, 1.0).unwrap();
        assert!((r.discriminant - 8.0).abs() < 1e-12);
        let (lo, hi) = r.interval.unwrap();
        assert!((lo - (2.0 - 2f64.sqrt())).abs() < 1e-12);
        assert!((hi - (2.0 + 2f64.sqrt())).abs() < 1e-12);
        // grid oracle
        let mut k = 1;
        while k <= 50_000 {
            let p = k as f64 * 1e-4;
            let ok = scalar_condition(p, 1.0, -2.0, 1.0, 1.0) <= 0.0;
            if (p - lo).abs() > 1e-4 && (p - hi).abs() > 1e-4 {
                assert_eq!(ok, r.contains(p), "p = {p}");
            }
            k += 1;
        }

        let inf = feasible_p_interval(1.0, 0.0, 1.0, 1.0).unwrap();
        assert!(!inf.is_feasible());
        assert!(inf.discriminant < 0.0);

        let sq = feasible_p_interval(1.0, -1.0, 0.5, 0.5).unwrap();
        assert!(sq.degenerate);
        assert_eq!(sq.interval, Some((1.0, 1.0)));

        let pos = feasible_p_interval(1.0, 3.0, 1.0, 1.0).unwrap();
        assert!(!pos.is_feasible());

        assert!(feasible_p_interval(0.0, -1.0, 1.0, 1.0).is_err());
        assert!(feasible_p_interval(1.0, -1.0, -1.0, 1.0).is_err());
        assert!(feasible_p_interval(1.0, -1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn interval_points_satisfy_condition() {
        let r = feasible_p_interval(0.37, -11.0, 2.5, 1.0).unwrap();
        let (lo, hi) = r.interval.unwrap();
        for k in 0..=100 {
            let p = lo + (hi - lo) * k as f64 / 100.0;
            assert!(r.condition(p) <= 1e-12 * (p * p * r.ell + 2.0 * p * r.eta.abs() + 3.5));
        }
        assert!(r.condition(lo * 0.99) > 0.0);
        assert!(r.condition(hi * 1.01) > 0.0);
    }

    #[test]
    fn matrix_inequality_examples() {
        let a0 = Matrix2::new(-2.0, 0.0, 0.0, -2.0);
        assert!(check_matrix_inequality(2.0, &a0, 1.0, 1.0, 1.0).unwrap());
        assert!(!check_matrix_inequality(0.1, &a0, 1.0, 1.0, 1.0).unwrap());
        let rot = Matrix2::new(0.0, -1.0, 1.0, 0.0);
        assert!(matches!(
            check_matrix_inequality(1.0, &rot, 1.0, 1.0, 1.0),
            Err(Error::ComplexSpectrum { .. })
        ));
    }

    #[test]
    fn report_formatting() {
        let r = feasible_p_interval(1.0, -2.0, 1.0, 1.0).unwrap();
        let text = r.to_string();
        assert!(text.contains("0.585786"), "{text}");
        assert!(text.contains("3.41421"), "{text}");
        let inf = feasible_p_interval(1.0, 0.0, 1.0, 1.0).unwrap().to_string();
        assert!(inf.contains("infeasible") && inf.contains("<= 0"), "{inf}");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(0.00123456789), "0.00123457");
        assert_eq!(sig6(-2.5e-7), "-2.50000e-7");
    }
}
