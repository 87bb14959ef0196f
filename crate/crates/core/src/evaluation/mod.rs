//! Fusion of associated tracks and GOSPA scoring against ground truth.

mod fusion;
mod gospa;

pub use fusion::{fuse_ci, FusedEstimate};
pub use gospa::{gospa, GospaParams, GospaRecord, GospaResult};

use nalgebra::Vector2;

use crate::association::{clusters_of, JointAssociation};
use crate::error::{Error, Result};
use crate::track::Track;

/// Fuses every cluster of `assoc` with [`fuse_ci`].
pub fn fuse_association(assoc: &JointAssociation, tracks: &[Track]) -> Result<Vec<FusedEstimate>> {
    if assoc.len() != tracks.len() {
        return Err(Error::Malformed(format!(
            "association has {} labels for {} tracks",
            assoc.len(),
            tracks.len()
        )));
    }
    clusters_of(assoc)
        .iter()
        .map(|c| {
            let members: Vec<&Track> = c.members.iter().map(|&m| &tracks[m]).collect();
            fuse_ci(&members).map(|f| f.with_members(c.members.clone()))
        })
        .collect()
}

/// Fuses each cluster and scores the fused positions against `truths`.
pub fn evaluate_association(
    assoc: &JointAssociation,
    tracks: &[Track],
    truths: &[Vector2<f64>],
    params: &GospaParams,
) -> Result<GospaResult> {
    let fused = fuse_association(assoc, tracks)?;
    let estimates: Vec<Vector2<f64>> = fused.iter().map(|f| f.mean).collect();
    Ok(gospa(&estimates, truths, params))
}
