use crate::error::{Error, Result};
use crate::seed;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One scripted piece of a trip.
///
/// JSON uses an external `type` tag, e.g. `{"type": "straight", "duration": 8,
/// "speed": 12}`, `{"type": "left_turn", "radius": 10}`, `{"type": "lane_change",
/// "to_left": true}`, `{"type": "u_turn"}`, `{"type": "stop", "duration": 3}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Segment {
    /// Drive straight for `duration` seconds, easing to `speed` m/s.
    Straight {
        duration: f64,
        speed: f64,
    },
    LeftTurn {
        radius: f64,
    },
    RightTurn {
        radius: f64,
    },
    LaneChange {
        #[serde(default)]
        to_left: bool,
    },
    UTurn {
        #[serde(default = "default_u_turn_radius")]
        radius: f64,
    },
    /// Brake to a standstill, then wait `duration` seconds.
    Stop {
        duration: f64,
    },
}

fn default_u_turn_radius() -> f64 {
    DEFAULT_U_TURN_RADIUS
}

pub const DEFAULT_U_TURN_RADIUS: f64 = 6.0;

/// `{"segments": [...]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteScript {
    pub segments: Vec<Segment>,
}

impl RouteScript {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let route = Self { segments };
        route.validate()?;
        Ok(route)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidParameter("route has no segments".into()));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            let ok = match *seg {
                Segment::Straight { duration, speed } => duration > 0.0 && speed >= 0.0 && speed.is_finite(),
                Segment::LeftTurn { radius } | Segment::RightTurn { radius } | Segment::UTurn { radius } => {
                    radius > 0.0 && radius.is_finite()
                }
                Segment::LaneChange { .. } => true,
                Segment::Stop { duration } => duration > 0.0 && duration.is_finite(),
            };
            if !ok {
                return Err(Error::InvalidParameter(format!("segment {i} has a non-positive duration or radius")));
            }
        }
        Ok(())
    }

    pub fn turn_count(&self) -> usize {
        self.segments.iter().filter(|s| matches!(s, Segment::LeftTurn { .. } | Segment::RightTurn { .. })).count()
    }
}

/// Recipe for random routes: every left or right turn is preceded by a
/// straight approach and may be mixed with distractor maneuvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteMix {
    pub turns: usize,
    pub left_radius: (f64, f64),
    pub right_radius: (f64, f64),
    pub cruise_speed: (f64, f64),
    pub approach_speed: (f64, f64),
    pub straight_duration: (f64, f64),
    pub lane_change_prob: f64,
    pub u_turn_prob: f64,
    pub stop_prob: f64,
}

impl Default for RouteMix {
    fn default() -> Self {
        Self {
            turns: 10,
            left_radius: (8.0, 16.0),
            right_radius: (8.0, 16.0),
            cruise_speed: (9.0, 14.0),
            approach_speed: (8.0, 12.0),
            straight_duration: (5.0, 9.0),
            lane_change_prob: 0.0,
            u_turn_prob: 0.0,
            stop_prob: 0.0,
        }
    }
}

impl RouteMix {
    pub fn with_distractors(self) -> Self {
        Self { lane_change_prob: 0.4, u_turn_prob: 0.15, stop_prob: 0.25, ..self }
    }
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Random route; left and right turns are equally likely.
pub fn random_route(mix: &RouteMix, root_seed: u64) -> RouteScript {
    let mut rng = seed::rng(seed::derive(root_seed, "route"));
    let mut segments = Vec::new();
    for _ in 0..mix.turns {
        let cruise = uniform(&mut rng, mix.cruise_speed);
        segments.push(Segment::Straight { duration: uniform(&mut rng, mix.straight_duration), speed: cruise });
        if rng.random_bool(mix.lane_change_prob) {
            segments.push(Segment::LaneChange { to_left: rng.random_bool(0.5) });
            segments.push(Segment::Straight { duration: uniform(&mut rng, mix.straight_duration), speed: cruise });
        }
        if rng.random_bool(mix.stop_prob) {
            segments.push(Segment::Stop { duration: uniform(&mut rng, (1.0, 4.0)) });
        }
        if rng.random_bool(mix.u_turn_prob) {
            segments.push(Segment::Straight {
                duration: uniform(&mut rng, mix.straight_duration),
                speed: uniform(&mut rng, mix.approach_speed),
            });
            segments.push(Segment::UTurn { radius: DEFAULT_U_TURN_RADIUS });
        }
        let approach = uniform(&mut rng, mix.approach_speed);
        segments.push(Segment::Straight { duration: uniform(&mut rng, mix.straight_duration), speed: approach });
        segments.push(if rng.random_bool(0.5) {
            Segment::LeftTurn { radius: uniform(&mut rng, mix.left_radius) }
        } else {
            Segment::RightTurn { radius: uniform(&mut rng, mix.right_radius) }
        });
    }
    segments.push(Segment::Straight {
        duration: uniform(&mut rng, mix.straight_duration),
        speed: uniform(&mut rng, mix.cruise_speed),
    });
    RouteScript { segments }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn route_json_round_trip() {
        let route = RouteScript::new(vec![
            Segment::Straight { duration: 5.0, speed: 10.0 },
            Segment::LeftTurn { radius: 9.0 },
            Segment::LaneChange { to_left: true },
            Segment::UTurn { radius: 6.0 },
            Segment::Stop { duration: 2.0 },
        ])
        .unwrap();
        let text = serde_json::to_string(&route).unwrap();
        assert!(text.contains(r#""type":"left_turn""#));
        assert_eq!(serde_json::from_str::<RouteScript>(&text).unwrap(), route);
        let short: RouteScript =
            serde_json::from_str(r#"{"segments":[{"type":"u_turn"},{"type":"lane_change"}]}"#).unwrap();
        assert_eq!(short.segments[0], Segment::UTurn { radius: DEFAULT_U_TURN_RADIUS });
    }

    #[test]
    fn rejects_empty_and_nonpositive() {
        assert!(RouteScript::new(vec![]).is_err());
        assert!(RouteScript::new(vec![Segment::Straight { duration: 0.0, speed: 5.0 }]).is_err());
        assert!(RouteScript::new(vec![Segment::RightTurn { radius: -1.0 }]).is_err());
    }

    #[test]
    fn random_route_counts_turns() {
        let mix = RouteMix { turns: 7, ..RouteMix::default() }.with_distractors();
        let route = random_route(&mix, 3);
        assert_eq!(route.turn_count(), 7);
        route.validate().unwrap();
        assert_eq!(route, random_route(&mix, 3));
    }
}
