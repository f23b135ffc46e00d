//! Reference schedules for the relative pendulum rate and the proportional
//! torque law that tracks them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::SimState;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    /// `offset + value * (t - t_start)`
    Ramp,
    /// `value`
    Constant,
}

/// One piece of a reference schedule, active on `[t_start, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment<T> {
    pub t_start: T,
    /// `None` only on the final segment: it then extends forever.
    #[serde(default)]
    pub t_end: Option<T>,
    pub kind: SegmentKind,
    /// Constant level (rad/s) or ramp slope (rad/s^2).
    pub value: T,
    /// Ramp level at `t_start`; ignored for constants.
    #[serde(default)]
    pub offset: T,
}

impl<T: Scalar> Segment<T> {
    pub fn ramp(t_start: T, t_end: Option<T>, slope: T) -> Self {
        Self {
            t_start,
            t_end,
            kind: SegmentKind::Ramp,
            value: slope,
            offset: T::zero(),
        }
    }

    pub fn constant(t_start: T, t_end: Option<T>, value: T) -> Self {
        Self {
            t_start,
            t_end,
            kind: SegmentKind::Constant,
            value,
            offset: T::zero(),
        }
    }

    #[inline]
    fn at(&self, t: T) -> T {
        match self.kind {
            SegmentKind::Constant => self.value,
            SegmentKind::Ramp => self.offset + self.value * (t - self.t_start),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("reference profile has no segments")]
    Empty,
    #[error("first segment must start at t = 0 (starts at {0})")]
    BadStart(f64),
    #[error("segment {index} is empty or reversed ({t_start} .. {t_end})")]
    Reversed { index: usize, t_start: f64, t_end: f64 },
    #[error("segment {index} does not start where segment {} ends", index - 1)]
    Gap { index: usize },
    #[error("only the final segment may be open-ended (segment {0})")]
    OpenInterior(usize),
    #[error("segment {0} has a non-finite field")]
    NonFinite(usize),
}

/// Piecewise-affine schedule of the relative rate `psi_dot_ref(t)`.
///
/// Evaluation is right-continuous at segment boundaries. Past the end of a
/// closed final segment the last value is held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de> + Default")
)]
pub struct ReferenceProfile<T> {
    pub segments: Vec<Segment<T>>,
}

impl<T: Scalar> ReferenceProfile<T> {
    pub fn new(segments: Vec<Segment<T>>) -> Result<Self, ProfileError> {
        let profile = Self { segments };
        profile.validate()?;
        Ok(profile)
    }

    /// `psi_dot_ref = 0` for all time.
    pub fn zero() -> Self {
        Self {
            segments: vec![Segment::constant(T::zero(), None, T::zero())],
        }
    }

    /// Linear ramp, short counter-swing, then a large spike to jump in place.
    pub fn vertical() -> Self {
        let l = T::lit;
        Self {
            segments: vec![
                Segment::ramp(l(0.0), Some(l(5.0)), l(-2.0)),
                Segment::constant(l(5.0), Some(l(5.2)), l(-40.0)),
                Segment::constant(l(5.2), None, l(200.0)),
            ],
        }
    }

    /// Steeper ramp, then a spike in the rolling direction.
    pub fn horizontal() -> Self {
        let l = T::lit;
        Self {
            segments: vec![
                Segment::ramp(l(0.0), Some(l(3.75)), l(-6.22)),
                Segment::constant(l(3.75), Some(l(4.75)), l(-150.0)),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let first = self.segments.first().ok_or(ProfileError::Empty)?;
        if first.t_start != T::zero() {
            return Err(ProfileError::BadStart(first.t_start.to_f64_lossy()));
        }
        let last = self.segments.len() - 1;
        for (index, seg) in self.segments.iter().enumerate() {
            let finite = seg.t_start.is_finite()
                && seg.value.is_finite()
                && seg.offset.is_finite()
                && seg.t_end.is_none_or(|e| e.is_finite());
            if !finite {
                return Err(ProfileError::NonFinite(index));
            }
            match seg.t_end {
                None if index != last => return Err(ProfileError::OpenInterior(index)),
                Some(end) if end <= seg.t_start => {
                    return Err(ProfileError::Reversed {
                        index,
                        t_start: seg.t_start.to_f64_lossy(),
                        t_end: end.to_f64_lossy(),
                    })
                }
                _ => {}
            }
            if index > 0 && self.segments[index - 1].t_end != Some(seg.t_start) {
                return Err(ProfileError::Gap { index });
            }
        }
        Ok(())
    }

    /// Index of the segment governing time `t` (right-continuous).
    pub fn segment_at(&self, t: T) -> usize {
        self.segments
            .partition_point(|s| s.t_start <= t)
            .saturating_sub(1)
    }

    /// Evaluates segment `index` at `t`, holding the final value past the end
    /// of a closed last segment. Used by the integrator to keep every stage of
    /// a step on one branch.
    pub fn eval_segment(&self, index: usize, t: T) -> T {
        let seg = &self.segments[index];
        let t = match seg.t_end {
            Some(end) if index + 1 == self.segments.len() && t > end => end,
            _ => t,
        };
        seg.at(t)
    }

    pub fn eval(&self, t: T) -> T {
        self.eval_segment(self.segment_at(t), t)
    }

    /// Times at which the schedule switches branch, in increasing order.
    pub fn breakpoints(&self) -> impl Iterator<Item = T> + '_ {
        self.segments
            .iter()
            .skip(1)
            .map(|s| s.t_start)
            .chain(self.segments.last().and_then(|s| s.t_end))
    }

    /// First breakpoint strictly after `t`.
    pub fn next_breakpoint(&self, t: T) -> Option<T> {
        self.breakpoints().find(|&b| b > t)
    }
}

/// The two built-in schedules, keyed `"vertical"` and `"horizontal"`.
pub fn builtin_profiles<T: Scalar>() -> BTreeMap<&'static str, ReferenceProfile<T>> {
    BTreeMap::from([
        ("vertical", ReferenceProfile::vertical()),
        ("horizontal", ReferenceProfile::horizontal()),
    ])
}

/// Proportional tracking of the relative pendulum rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig<T> {
    /// N m s/rad
    pub kp: T,
    pub tau_max: T,
    pub saturation_enabled: bool,
}

impl<T: Scalar> Default for ControllerConfig<T> {
    fn default() -> Self {
        Self {
            kp: T::lit(0.03),
            tau_max: T::lit(0.376),
            saturation_enabled: false,
        }
    }
}

impl<T: Scalar> ControllerConfig<T> {
    /// Returns the name of the first invalid field.
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.kp.is_finite() && self.kp > T::zero()) {
            return Err("kp");
        }
        if !(self.tau_max.is_finite() && self.tau_max > T::zero()) {
            return Err("tau_max");
        }
        Ok(())
    }
}

/// Motor torque for tracking `psi_dot_ref`; `+tau` acts on the pendulum and
/// `-tau` on the hoop.
pub fn control_torque<T: Scalar>(cfg: &ControllerConfig<T>, psi_dot_ref: T, state: &SimState<T>) -> T {
    let raw = cfg.kp * (psi_dot_ref - state.psi_dot());
    if cfg.saturation_enabled {
        raw.max(-cfg.tau_max).min(cfg.tau_max)
    } else {
        raw
    }
}
