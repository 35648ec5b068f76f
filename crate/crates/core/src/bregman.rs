//! Binary-entropy Bregman geometry on `[0,1]^m`.
//!
//! With `F(p) = sum_i p_i ln p_i + (1 - p_i) ln(1 - p_i)` the divergence
//! `D_F(p || q)` is a sum of per-coordinate binary KL terms, and
//! `D_F(0 || q)` evaluated at `q_i = sigma(z_i)` equals the unscaled logistic
//! loss `sum_i ln(1 + exp(-z_i))`. The `objective` function computes both
//! sides independently and refuses to return if they disagree.
//!
//! The logistic risk on a dataset carries an extra factor `a/m` with
//! `a = 1/ln 2`; the two objectives differ only by that positive constant.

use crate::error::{Error, Result};
use crate::model::{MarginMatrix, VoteWeights};

/// Values closer than this to 0 or 1 are clamped before taking logs.
pub const BOUNDARY_CLAMP: f64 = 1e-300;

/// Relative tolerance of the built-in `D_F(0||q)` vs logistic-sum check.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

/// `sigma(z) = 1 / (1 + e^z)`; decreasing in `z`.
pub fn sigma(z: f64) -> f64 {
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// A point of `[0,1]^m`. The complement `1 - q_i` is kept alongside each
/// coordinate so that values near 1 keep full relative precision.
#[derive(Clone, Debug, PartialEq)]
pub struct QVector {
    q: Vec<f64>,
    complement: Vec<f64>,
}

impl QVector {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if let Some(bad) = q.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::input(format!("q coordinate {bad} is outside [0,1]")));
        }
        let complement = q.iter().map(|v| 1.0 - v).collect();
        Ok(QVector { q, complement })
    }

    pub fn zeros(m: usize) -> Self {
        QVector {
            q: vec![0.0; m],
            complement: vec![1.0; m],
        }
    }

    /// The reference point `q0 = (1/2, ..., 1/2)`.
    pub fn half(m: usize) -> Self {
        QVector {
            q: vec![0.5; m],
            complement: vec![0.5; m],
        }
    }

    /// `q_i = sigma(z_i)`, with the complement computed as `sigma(-z_i)`.
    pub fn from_margins(z: &[f64]) -> Self {
        QVector {
            q: z.iter().map(|&zi| sigma(zi)).collect(),
            complement: z.iter().map(|&zi| sigma(-zi)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn complements(&self) -> &[f64] {
        &self.complement
    }

    pub fn sum(&self) -> f64 {
        self.q.iter().sum()
    }

    /// `ln q_i` and `ln(1 - q_i)`, each taken from whichever of `q_i`,
    /// `1 - q_i` is the smaller (and therefore exactly represented) value.
    fn logs(&self, i: usize, clamped: &mut usize) -> (f64, f64) {
        let (mut q, mut c) = (self.q[i], self.complement[i]);
        if q > 0.0 && q < BOUNDARY_CLAMP {
            q = BOUNDARY_CLAMP;
            *clamped += 1;
        }
        if c > 0.0 && c < BOUNDARY_CLAMP {
            c = BOUNDARY_CLAMP;
            *clamped += 1;
        }
        if q < 0.5 {
            (q.ln(), (-q).ln_1p())
        } else {
            ((-c).ln_1p(), c.ln())
        }
    }
}

/// What to do when `q_i` sits exactly on a boundary the `p` term needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    /// Return `+inf`.
    #[default]
    Infinite,
    /// Return a numeric error.
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Divergence {
    pub value: f64,
    /// Number of near-boundary coordinates that were clamped.
    pub clamped: usize,
}

/// `D_F(p || q) = sum_i p_i ln(p_i/q_i) + (1-p_i) ln((1-p_i)/(1-q_i))`,
/// using `0 ln 0 = 0`.
pub fn bregman_div(p: &QVector, q: &QVector) -> Result<f64> {
    bregman_div_report(p, q, BoundaryPolicy::Infinite).map(|d| d.value)
}

pub fn bregman_div_report(p: &QVector, q: &QVector, policy: BoundaryPolicy) -> Result<Divergence> {
    if p.len() != q.len() {
        return Err(Error::input(format!(
            "divergence between vectors of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    let mut clamped = 0;
    let mut value = 0.0;
    for i in 0..p.len() {
        let (pi, pc) = (p.q[i], p.complement[i]);
        let boundary = (pi > 0.0 && q.q[i] == 0.0) || (pc > 0.0 && q.complement[i] == 0.0);
        if boundary {
            match policy {
                BoundaryPolicy::Infinite => {
                    return Ok(Divergence {
                        value: f64::INFINITY,
                        clamped,
                    })
                }
                BoundaryPolicy::Error => {
                    return Err(Error::numeric(format!(
                        "coordinate {i}: q = {} is on the boundary while p = {pi}",
                        q.q[i]
                    )))
                }
            }
        }
        let (ln_q, ln_qc) = q.logs(i, &mut clamped);
        let mut dummy = 0;
        let (ln_p, ln_pc) = p.logs(i, &mut dummy);
        if pi > 0.0 {
            value += pi * (ln_p - ln_q);
        }
        if pc > 0.0 {
            value += pc * (ln_pc - ln_qc);
        }
    }
    Ok(Divergence { value, clamped })
}

/// `F(p) = sum_i p_i ln p_i + (1 - p_i) ln(1 - p_i)`.
pub fn entropy_potential(p: &QVector) -> f64 {
    let mut dummy = 0;
    (0..p.len())
        .map(|i| {
            let (lp, lc) = p.logs(i, &mut dummy);
            let a = if p.q[i] > 0.0 { p.q[i] * lp } else { 0.0 };
            let b = if p.complement[i] > 0.0 {
                p.complement[i] * lc
            } else {
                0.0
            };
            a + b
        })
        .sum()
}

/// `L_F(q, r)_i = q_i e^{-r_i} / (1 - q_i + q_i e^{-r_i})`.
pub fn legendre_update(q: &QVector, r: &[f64]) -> Result<QVector> {
    if q.len() != r.len() {
        return Err(Error::input(format!(
            "legendre update of a length-{} vector by a length-{} vector",
            q.len(),
            r.len()
        )));
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::input("legendre update direction is not finite"));
    }
    let mut out_q = Vec::with_capacity(q.len());
    let mut out_c = Vec::with_capacity(q.len());
    for ((&qi, &ci), &ri) in q.q.iter().zip(&q.complement).zip(r) {
        if ri == 0.0 || qi == 0.0 || ci == 0.0 {
            out_q.push(qi);
            out_c.push(ci);
        } else if ri > 0.0 {
            let e = (-ri).exp();
            let den = ci + qi * e;
            out_q.push(qi * e / den);
            out_c.push(ci / den);
        } else {
            let e = ri.exp();
            let den = ci * e + qi;
            out_q.push(qi / den);
            out_c.push(ci * e / den);
        }
    }
    Ok(QVector {
        q: out_q,
        complement: out_c,
    })
}

/// `q_i = sigma(sum_v rho_v sum_j pi_{v,j} (M_v)_{ij})`.
pub fn q_from_weights(m: &MarginMatrix, w: &VoteWeights) -> Result<QVector> {
    Ok(QVector::from_margins(&m.margins(w)?))
}

/// Unscaled logistic loss `sum_i ln(1 + exp(-z_i))`, cross-checked against
/// `D_F(0 || q_from_weights(m, w))`.
pub fn objective(m: &MarginMatrix, w: &VoteWeights) -> Result<f64> {
    let z = m.margins(w)?;
    objective_from_margins(&z)
}

pub(crate) fn objective_from_margins(z: &[f64]) -> Result<f64> {
    let direct: f64 = z.iter().map(|&zi| softplus(-zi)).sum();
    let q = QVector::from_margins(z);
    let via_divergence = bregman_div(&QVector::zeros(z.len()), &q)?;
    let scale = direct.abs().max(via_divergence.abs());
    if !direct.is_finite() || (direct - via_divergence).abs() > IDENTITY_TOLERANCE * scale {
        return Err(Error::numeric(format!(
            "D_F(0||q) = {via_divergence} disagrees with the logistic sum {direct}"
        )));
    }
    Ok(direct)
}
