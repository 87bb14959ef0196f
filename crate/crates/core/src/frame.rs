//! Scenario frames and their line-oriented JSON stream format.
//!
//! One frame per line:
//!
//! ```json
//! {"time":15.0,"tracks":[{"sensor":1,"state":[..],"covariance":[[..]],...}],
//!  "sensors":[{"id":1,"position":[x,y],"range":85.0}],
//!  "truths":[{"object_id":3,"position":[x,y],"is_vru":false}]}
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::track::{SensorId, SensorInfo, Track};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub object_id: u64,
    pub position: [f64; 2],
    #[serde(default)]
    pub is_vru: bool,
}

/// Tracks, sensors and ground truth of one association step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFrame {
    #[serde(default)]
    pub time: f64,
    pub tracks: Vec<Track>,
    pub sensors: Vec<SensorInfo>,
    #[serde(default)]
    pub truths: Vec<GroundTruth>,
}

impl ScenarioFrame {
    /// Checks that every track refers to a listed sensor.
    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.tracks.iter().enumerate() {
            if !self.sensors.iter().any(|s| s.id == t.sensor()) {
                return Err(Error::UnknownSensor {
                    track: i,
                    sensor: t.sensor(),
                });
            }
        }
        for s in &self.sensors {
            if let Some(r) = s.range {
                if !(r > 0.0) {
                    return Err(Error::InvalidRange(s.id));
                }
            }
        }
        Ok(())
    }

    pub fn truth_positions(&self) -> Vec<[f64; 2]> {
        self.truths.iter().map(|g| g.position).collect()
    }

    /// Number of tracks per sensor, keyed by sensor id.
    pub fn tracks_per_sensor(&self) -> BTreeMap<SensorId, usize> {
        let mut m = BTreeMap::new();
        for t in &self.tracks {
            *m.entry(t.sensor()).or_insert(0) += 1;
        }
        m
    }
}

pub fn write_frames<W: Write>(mut w: W, frames: &[ScenarioFrame]) -> Result<()> {
    for f in frames {
        serde_json::to_writer(&mut w, f)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a frame stream; blank lines are skipped.
pub fn read_frames<R: BufRead>(r: R) -> Result<Vec<ScenarioFrame>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let frame: ScenarioFrame = serde_json::from_str(&line)?;
        frame.validate()?;
        out.push(frame);
    }
    Ok(out)
}
