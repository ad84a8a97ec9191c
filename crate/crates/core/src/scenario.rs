//! Experiment description: layout, cell, users, roads and arrival laws.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::{BsLayout, FadingProcess, Point, PropagationModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellBounds {
    pub min: Point,
    pub max: Point,
}

impl CellBounds {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// A straight road crossing the cell. Mobile users enter at `entry` and
/// advance one segment of length `segment_length` per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub entry: Point,
    pub direction: Point,
    pub segment_count: usize,
    pub segment_length: f64,
    /// Per-slot arrival probability. With `max_arrivals > 1` the count is
    /// Binomial(`max_arrivals`, `arrival_prob`).
    pub arrival_prob: f64,
    #[serde(default = "one")]
    pub max_arrivals: u32,
}

fn one() -> u32 {
    1
}

impl Road {
    pub fn segment_centers(&self) -> Vec<Point> {
        (0..self.segment_count)
            .map(|k| {
                let along = self.segment_length * (k as f64 + 0.5);
                Point::new(
                    self.entry.x + self.direction.x * along,
                    self.entry.y + self.direction.y * along,
                )
            })
            .collect()
    }

    /// Probability mass function of the per-slot arrival count.
    pub fn arrival_pmf(&self) -> Vec<f64> {
        binomial_pmf(self.max_arrivals, self.arrival_prob)
    }
}

fn binomial_pmf(n: u32, p: f64) -> Vec<f64> {
    let mut pmf = Vec::with_capacity(n as usize + 1);
    let mut coeff = 1.0;
    for k in 0..=n {
        if k > 0 {
            coeff *= f64::from(n - k + 1) / f64::from(k);
        }
        pmf.push(coeff * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32));
    }
    pmf
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub layout: BsLayout,
    pub propagation: PropagationModel,
    pub cell: CellBounds,
    pub static_users: Vec<Point>,
    pub roads: Vec<Road>,
    pub slot_seconds: f64,
    pub velocity: f64,
    /// `None` means no fading: every realised rate equals its mean.
    #[serde(default)]
    pub fading: Option<FadingProcess>,
}

const GEOMETRY_TOL: f64 = 1e-9;

impl Scenario {
    /// The single-cell study: a 21x21 grid of unit-power stations 100 m
    /// apart, the 100 m x 100 m cell around the origin, six static users and
    /// the `y = 10` road crossed in ten 10 m slots.
    pub fn table1(theta: f64) -> Scenario {
        let static_users = [
            (20.0, 20.0),
            (20.0, -20.0),
            (-40.0, 20.0),
            (20.0, -40.0),
            (-40.0, -40.0),
            (-40.0, 40.0),
        ]
        .into_iter()
        .map(|(x, y)| Point::new(x, y))
        .collect();
        Scenario {
            schema_version: SCHEMA_VERSION,
            layout: BsLayout::square_grid(10, 100.0),
            propagation: PropagationModel::new(4.0),
            cell: CellBounds {
                min: Point::new(-50.0, -50.0),
                max: Point::new(50.0, 50.0),
            },
            static_users,
            roads: vec![Road {
                entry: Point::new(-50.0, 10.0),
                direction: Point::new(1.0, 0.0),
                segment_count: 10,
                segment_length: 10.0,
                arrival_prob: theta,
                max_arrivals: 1,
            }],
            slot_seconds: 0.5,
            velocity: 20.0,
            fading: None,
        }
    }

    pub fn with_arrival_prob(mut self, theta: f64) -> Scenario {
        for road in &mut self.roads {
            road.arrival_prob = theta;
        }
        self
    }

    pub fn with_fading(mut self, fading: Option<FadingProcess>) -> Scenario {
        self.fading = fading;
        self
    }

    pub fn fading_process(&self) -> FadingProcess {
        self.fading.clone().unwrap_or_else(FadingProcess::constant)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", self.schema_version),
            ));
        }
        self.layout.validate()?;
        self.propagation.validate()?;
        if !(self.cell.min.x < self.cell.max.x && self.cell.min.y < self.cell.max.y) {
            return Err(Error::invalid("cell", "min must be below max"));
        }
        if !(self.slot_seconds.is_finite() && self.slot_seconds > 0.0) {
            return Err(Error::invalid("slot_seconds", "must be > 0"));
        }
        if !(self.velocity.is_finite() && self.velocity > 0.0) {
            return Err(Error::invalid("velocity", "must be > 0"));
        }
        if self.static_users.is_empty() {
            return Err(Error::invalid(
                "static_users",
                "at least one static user is required",
            ));
        }
        for (j, &p) in self.static_users.iter().enumerate() {
            if !self.cell.contains(p) {
                return Err(Error::invalid(
                    format!("static_users[{j}]"),
                    "outside the cell",
                ));
            }
        }
        let step = self.velocity * self.slot_seconds;
        for (i, road) in self.roads.iter().enumerate() {
            let field = |name: &str| format!("roads[{i}].{name}");
            if !(0.0..=1.0).contains(&road.arrival_prob) {
                return Err(Error::invalid(field("arrival_prob"), "must lie in [0, 1]"));
            }
            if road.max_arrivals == 0 {
                return Err(Error::invalid(field("max_arrivals"), "must be >= 1"));
            }
            if road.segment_count == 0 {
                return Err(Error::invalid(field("segment_count"), "must be >= 1"));
            }
            if (road.segment_length - step).abs() > GEOMETRY_TOL * step.max(1.0) {
                return Err(Error::invalid(
                    field("segment_length"),
                    format!(
                        "{} does not equal velocity * slot_seconds = {step}",
                        road.segment_length
                    ),
                ));
            }
            let norm = road.direction.x.hypot(road.direction.y);
            if (norm - 1.0).abs() > GEOMETRY_TOL {
                return Err(Error::invalid(field("direction"), "must be a unit vector"));
            }
            if road
                .segment_centers()
                .iter()
                .any(|&c| !self.cell.contains(c))
            {
                return Err(Error::invalid(
                    field("entry"),
                    "segment centres leave the cell",
                ));
            }
        }
        if let Some(fading) = &self.fading {
            fading.validate_ergodic()?;
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Scenario> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario> {
        Scenario::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json_string()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}
