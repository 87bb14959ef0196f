use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::likelihood::inverse2;
use crate::track::Track;

/// Position estimate fused from one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedEstimate {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
    /// CI weight per member, in member order.
    pub weights: Vec<f64>,
    /// Track indices of the source cluster, if known.
    pub members: Vec<usize>,
}

impl FusedEstimate {
    pub fn with_members(mut self, members: Vec<usize>) -> Self {
        self.members = members;
        self
    }
}

/// Fast covariance intersection on the position blocks.
///
/// With `I_t = P_t^-1` and `I = sum_t I_t`, the weights are
///
/// ```text
/// w_t = (|I| - |I - I_t| + |I_t|) / (n |I| + sum_j (|I_j| - |I - I_j|))
/// ```
///
/// which are non-negative and sum to one. The fused information is
/// `sum_t w_t I_t` and the fused mean `P sum_t w_t I_t x_t`.
pub fn fuse_ci(members: &[&Track]) -> Result<FusedEstimate> {
    let first = members.first().ok_or(Error::Empty("cluster"))?;
    if members.len() == 1 {
        return Ok(FusedEstimate {
            mean: first.position(),
            cov: first.position_cov(),
            weights: vec![1.0],
            members: Vec::new(),
        });
    }
    let infos: Vec<Matrix2<f64>> = members
        .iter()
        .map(|t| inverse2(&t.position_cov()).ok_or(Error::NotPositiveDefinite))
        .collect::<Result<_>>()?;
    let total: Matrix2<f64> = infos.iter().sum();
    let det_total = total.determinant();
    let raw: Vec<f64> = infos
        .iter()
        .map(|i| det_total - (total - i).determinant() + i.determinant())
        .collect();
    // equals n |I| + sum_j (|I_j| - |I - I_j|)
    let norm: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|r| (r / norm).max(0.0)).collect();

    let mut info = Matrix2::zeros();
    let mut info_mean = Vector2::zeros();
    for ((t, i), w) in members.iter().zip(&infos).zip(&weights) {
        info += i * *w;
        info_mean += i * t.position() * *w;
    }
    let cov = inverse2(&info).ok_or(Error::NotPositiveDefinite)?;
    let cov = (cov + cov.transpose()) * 0.5;
    Ok(FusedEstimate {
        mean: cov * info_mean,
        cov,
        weights,
        members: Vec::new(),
    })
}
