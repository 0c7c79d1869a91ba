//! Merge-road geometry and its partition into sensing segments.
//!
//! The mainline is a straight road `[0, mainline_length]`. A single-lane ramp
//! of length `ramp_length` ends at `merge_position`; its last
//! `merge_lane_length` metres run alongside mainline lane 0 and are where ramp
//! vehicles change onto the mainline. Mainline segments are numbered from
//! upstream; the ramp owns one extra segment with the last index.

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

/// Allowed mainline segment lengths, m.
pub const SEGMENT_LENGTH_RANGE: (f64, f64) = (90.0, 110.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Road {
    Mainline,
    Ramp,
}

impl Road {
    pub fn as_str(self) -> &'static str {
        match self {
            Road::Mainline => "mainline",
            Road::Ramp => "ramp",
        }
    }
}

impl std::str::FromStr for Road {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mainline" => Ok(Road::Mainline),
            "ramp" => Ok(Road::Ramp),
            other => Err(Error::Config(format!("unknown road '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub is_ramp: bool,
    pub is_controlled: bool,
}

impl SegmentSpec {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadNetwork {
    pub mainline_length: f64,
    pub mainline_lanes: usize,
    pub ramp_length: f64,
    pub merge_position: f64,
    pub merge_lane_length: f64,
    pub segments: Vec<SegmentSpec>,
    pub speed_limit_mainline: f64,
    pub speed_limit_ramp: f64,
    /// Indices of controlled segments, upstream first.
    controlled: Vec<usize>,
    /// Mainline boundaries: `boundaries[i]` is the start of segment `i`.
    boundaries: Vec<f64>,
}

/// Splits `[start, end]` into the number of equal pieces closest to `target`.
fn split(start: f64, end: f64, target: f64) -> Vec<f64> {
    let n = ((end - start) / target).round().max(1.0) as usize;
    let width = (end - start) / n as f64;
    (0..n).map(|i| start + width * i as f64).collect()
}

pub fn build_merge_network(cfg: &ScenarioConfig) -> Result<RoadNetwork> {
    cfg.validate()?;
    let g = &cfg.geometry;
    let num_control = cfg.control.num_control_segments;

    // Segment boundaries are aligned so that the merge point is a boundary.
    let mut boundaries = split(0.0, g.merge_position, g.segment_length);
    let upstream = boundaries.len();
    boundaries.extend(split(g.merge_position, g.mainline_length, g.segment_length));
    if upstream < num_control {
        return Err(Error::Config(format!(
            "merge at {} m leaves {upstream} upstream segments, fewer than the {num_control} controlled",
            g.merge_position
        )));
    }

    let mut segments = Vec::with_capacity(boundaries.len() + 1);
    for (i, &start) in boundaries.iter().enumerate() {
        let end = boundaries.get(i + 1).copied().unwrap_or(g.mainline_length);
        let len = end - start;
        if len < SEGMENT_LENGTH_RANGE.0 - 1e-9 || len > SEGMENT_LENGTH_RANGE.1 + 1e-9 {
            return Err(Error::Config(format!("segment {i} would be {len:.1} m long, outside [90, 110] m")));
        }
        segments.push(SegmentSpec {
            index: i,
            start,
            end,
            is_ramp: false,
            is_controlled: i + num_control >= upstream && i < upstream,
        });
    }
    let controlled = (upstream - num_control..upstream).collect();
    segments.push(SegmentSpec {
        index: segments.len(),
        start: 0.0,
        end: g.ramp_length,
        is_ramp: true,
        is_controlled: false,
    });

    Ok(RoadNetwork {
        mainline_length: g.mainline_length,
        mainline_lanes: g.mainline_lanes,
        ramp_length: g.ramp_length,
        merge_position: g.merge_position,
        merge_lane_length: g.merge_lane_length,
        segments,
        speed_limit_mainline: g.speed_limit_mainline,
        speed_limit_ramp: g.speed_limit_ramp,
        controlled,
        boundaries,
    })
}

impl RoadNetwork {
    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn num_mainline_segments(&self) -> usize {
        self.boundaries.len()
    }

    pub fn ramp_segment(&self) -> usize {
        self.segments.len() - 1
    }

    pub fn controlled_segments(&self) -> &[usize] {
        &self.controlled
    }

    pub fn lanes(&self, road: Road) -> usize {
        match road {
            Road::Mainline => self.mainline_lanes,
            Road::Ramp => 1,
        }
    }

    pub fn length(&self, road: Road) -> f64 {
        match road {
            Road::Mainline => self.mainline_length,
            Road::Ramp => self.ramp_length,
        }
    }

    pub fn speed_limit(&self, road: Road) -> f64 {
        match road {
            Road::Mainline => self.speed_limit_mainline,
            Road::Ramp => self.speed_limit_ramp,
        }
    }

    /// Ramp position where the merge lane (alongside mainline lane 0) begins.
    pub fn merge_lane_start(&self) -> f64 {
        self.ramp_length - self.merge_lane_length
    }

    /// Mainline coordinate abreast of ramp position `r`.
    pub fn ramp_to_mainline(&self, r: f64) -> f64 {
        self.merge_position - self.ramp_length + r
    }

    /// Segment containing `x`. Boundary points belong to the downstream
    /// segment; the mainline end belongs to the last segment.
    pub fn segment_of(&self, x: f64, on_ramp: bool) -> Result<usize> {
        let road = if on_ramp { Road::Ramp } else { Road::Mainline };
        let length = self.length(road);
        if !(0.0..=length).contains(&x) {
            return Err(Error::OutOfRange { x, road: road.as_str(), length });
        }
        if on_ramp {
            return Ok(self.ramp_segment());
        }
        Ok(self.boundaries.partition_point(|&b| b <= x) - 1)
    }

    /// Position of `segment` among the controlled segments, if controlled.
    pub fn control_slot(&self, segment: usize) -> Option<usize> {
        self.controlled.iter().position(|&s| s == segment)
    }
}
