use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::trajectory::Position;

/// The closed set of reference tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scenario {
    CrossroadsLeft,
    CrossroadsRight,
    CrossroadsMid,
    Winding0,
    Winding1,
    Winding2,
    Loop,
    PauseThenGo,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::CrossroadsLeft,
        Scenario::CrossroadsRight,
        Scenario::CrossroadsMid,
        Scenario::Winding0,
        Scenario::Winding1,
        Scenario::Winding2,
        Scenario::Loop,
        Scenario::PauseThenGo,
    ];

    pub const CROSSROADS: [Scenario; 3] = [
        Scenario::CrossroadsLeft,
        Scenario::CrossroadsRight,
        Scenario::CrossroadsMid,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::CrossroadsLeft => "crossroads-left",
            Scenario::CrossroadsRight => "crossroads-right",
            Scenario::CrossroadsMid => "crossroads-mid",
            Scenario::Winding0 => "winding-0",
            Scenario::Winding1 => "winding-1",
            Scenario::Winding2 => "winding-2",
            Scenario::Loop => "loop",
            Scenario::PauseThenGo => "pause-then-go",
        }
    }

    pub(crate) fn plan(&self) -> Plan {
        use Scenario::*;
        let p = Position::planar;
        match self {
            CrossroadsLeft | CrossroadsRight | CrossroadsMid => {
                let branch = match self {
                    CrossroadsLeft => vec![p(32.0, 14.0), p(34.0, 34.0)],
                    CrossroadsRight => vec![p(32.0, -14.0), p(34.0, -34.0)],
                    _ => vec![p(44.0, 0.0), p(62.0, 0.0)],
                };
                let mut waypoints = vec![p(24.0, 0.0)];
                waypoints.extend(branch);
                Plan {
                    start: p(0.0, 0.0),
                    hold_steps: 0,
                    waypoints,
                    cruise: 0.6,
                    boost_beyond: None,
                }
            }
            Winding0 => Plan {
                start: p(-70.0, -60.0),
                hold_steps: 0,
                waypoints: vec![
                    p(-55.0, -60.0),
                    p(-48.0, -48.0),
                    p(-56.0, -36.0),
                    p(-44.0, -28.0),
                    p(-30.0, -34.0),
                    p(-24.0, -20.0),
                ],
                cruise: 0.6,
                boost_beyond: None,
            },
            Winding1 => Plan {
                start: p(-70.0, 40.0),
                hold_steps: 0,
                waypoints: vec![
                    p(-58.0, 52.0),
                    p(-46.0, 44.0),
                    p(-40.0, 58.0),
                    p(-26.0, 62.0),
                    p(-20.0, 48.0),
                ],
                cruise: 0.6,
                boost_beyond: None,
            },
            Winding2 => Plan {
                start: p(55.0, 70.0),
                hold_steps: 0,
                waypoints: vec![
                    p(75.0, 70.0),
                    p(80.0, 55.0),
                    p(62.0, 48.0),
                    p(66.0, 32.0),
                    p(84.0, 28.0),
                ],
                cruise: 0.75,
                boost_beyond: Some(9.0),
            },
            Loop => {
                let o = p(-40.0, 70.0);
                Plan {
                    start: o,
                    hold_steps: 0,
                    waypoints: LOOP_WAYPOINTS.iter().map(|&[x, y]| o + p(x, y)).collect(),
                    cruise: LOOP_CRUISE,
                    boost_beyond: None,
                }
            }
            PauseThenGo => Plan {
                start: p(50.0, -60.0),
                hold_steps: PAUSE_STEPS,
                waypoints: vec![p(62.0, -52.0), p(74.0, -62.0), p(82.0, -48.0)],
                cruise: 0.6,
                boost_beyond: None,
            },
        }
    }
}

/// Steps the pause-then-go expert holds still before moving.
pub const PAUSE_STEPS: usize = 25;

// Chosen by random search so the descending leg passes within 0.01 of a sample
// on the first leg (see CALIBRATION.md).
pub(crate) const LOOP_WAYPOINTS: [[f64; 2]; 5] = [
    [18.791044449134922, 0.0],
    [18.791044449134922, 12.403583602409347],
    [10.798846428524385, 12.403583602409347],
    [10.798846428524385, -12.0],
    [10.798846428524385, -24.0],
];
pub(crate) const LOOP_CRUISE: f64 = 0.5696111872927032;

/// Script for the expert controller.
#[derive(Clone, Debug)]
pub(crate) struct Plan {
    pub start: Position,
    pub hold_steps: usize,
    pub waypoints: Vec<Position>,
    pub cruise: f64,
    /// Hold boost while the current waypoint is farther than this.
    pub boost_beyond: Option<f64>,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

impl TryFrom<String> for Scenario {
    type Error = Error;
    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

impl From<Scenario> for String {
    fn from(s: Scenario) -> String {
        s.name().to_string()
    }
}
