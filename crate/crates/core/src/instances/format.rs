//! JSON documents for instances and solutions.
//!
//! The instance document either carries explicit travel data
//! (`truck_metric = "matrix"`, `drone_metric = "map"`) or declares the
//! benchmark metrics (`"manhattan"` / `"euclidean"`), in which case the
//! travel times are computed from the coordinates and speeds:
//! `truck = manhattan / truck_speed` and
//! `drone = 2 * euclidean / (truck_speed * drone_speed_factor)`
//! (a round trip at the drone speed). When both coordinates and
//! explicit data are present, the explicit data wins.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, Point, Solution, TimeMatrix};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointDoc<T> {
    pub x: T,
    pub y: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomerDoc<T> {
    pub id: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<T>,
    pub eligible: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruckMetric {
    Manhattan,
    Matrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DroneMetric {
    Euclidean,
    Map,
}

/// On-disk instance schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc<T> {
    pub name: String,
    pub depot: PointDoc<T>,
    pub customers: Vec<CustomerDoc<T>>,
    pub truck_metric: TruckMetric,
    pub drone_metric: DroneMetric,
    pub truck_speed: T,
    pub drone_speed_factor: T,
    pub n_drones: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truck_time: Option<Vec<Vec<T>>>,
    /// Keyed by customer id (JSON object keys are strings).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drone_time: Option<BTreeMap<String, T>>,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("document is not valid instance JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("customer entry {index} has id {found}, expected {expected} (ids must be 1..=n in order)")]
    BadCustomerId {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("field {field}: {message}")]
    Field { field: String, message: String },
    #[error("customer {id}: coordinates required by the declared metric are missing")]
    MissingCoords { id: usize },
    #[error("drone_time references unknown or ineligible customer {key:?}")]
    BadDroneTimeKey { key: String },
    #[error("instance is inconsistent: {0}")]
    Inconsistent(#[from] crate::instance::InstanceError),
}

impl<T: Scalar> InstanceDoc<T> {
    /// Validates the document and builds the in-memory instance.
    pub fn to_instance(&self) -> Result<Instance<T>, ParseError> {
        let n = self.customers.len();
        for (index, c) in self.customers.iter().enumerate() {
            if c.id != index + 1 {
                return Err(ParseError::BadCustomerId {
                    index,
                    found: c.id,
                    expected: index + 1,
                });
            }
        }
        if !self.truck_speed.is_finite() || self.truck_speed <= T::zero() {
            return Err(ParseError::Field {
                field: "truck_speed".into(),
                message: "must be finite and positive".into(),
            });
        }
        if !self.drone_speed_factor.is_finite() || self.drone_speed_factor <= T::zero() {
            return Err(ParseError::Field {
                field: "drone_speed_factor".into(),
                message: "must be finite and positive".into(),
            });
        }

        let coords: Option<Vec<Point<T>>> = {
            let mut pts = vec![Point {
                x: self.depot.x,
                y: self.depot.y,
            }];
            let mut complete = true;
            for c in &self.customers {
                match (c.x, c.y) {
                    (Some(x), Some(y)) => pts.push(Point { x, y }),
                    _ => {
                        complete = false;
                        break;
                    }
                }
            }
            complete.then_some(pts)
        };

        let eligible: BTreeSet<usize> = self
            .customers
            .iter()
            .filter(|c| c.eligible)
            .map(|c| c.id)
            .collect();

        let truck_time = match self.truck_metric {
            TruckMetric::Matrix => {
                let rows = self.truck_time.clone().ok_or_else(|| ParseError::Field {
                    field: "truck_time".into(),
                    message: "required when truck_metric is \"matrix\"".into(),
                })?;
                if rows.len() != n + 1 {
                    return Err(ParseError::Field {
                        field: "truck_time".into(),
                        message: format!("has {} rows, expected {}", rows.len(), n + 1),
                    });
                }
                TimeMatrix::from_rows(rows)?
            }
            TruckMetric::Manhattan => {
                let pts = coords.as_ref().ok_or(ParseError::MissingCoords {
                    id: self
                        .customers
                        .iter()
                        .find(|c| c.x.is_none() || c.y.is_none())
                        .map(|c| c.id)
                        .unwrap_or(0),
                })?;
                let mut rows = vec![vec![T::zero(); n + 1]; n + 1];
                for i in 0..=n {
                    for j in 0..=n {
                        if i != j {
                            rows[i][j] = pts[i].manhattan(pts[j]) / self.truck_speed;
                        }
                    }
                }
                TimeMatrix::from_rows(rows)?
            }
        };

        let drone_time: BTreeMap<usize, T> = match self.drone_metric {
            DroneMetric::Map => {
                let map = self.drone_time.clone().ok_or_else(|| ParseError::Field {
                    field: "drone_time".into(),
                    message: "required when drone_metric is \"map\"".into(),
                })?;
                let mut out = BTreeMap::new();
                for (key, t) in map {
                    let id: usize = key
                        .parse()
                        .map_err(|_| ParseError::BadDroneTimeKey { key: key.clone() })?;
                    if id == 0 || id > n || !eligible.contains(&id) {
                        return Err(ParseError::BadDroneTimeKey { key });
                    }
                    if !t.is_finite() || t < T::zero() {
                        return Err(ParseError::Field {
                            field: format!("drone_time.{id}"),
                            message: "negative or non-finite time".into(),
                        });
                    }
                    out.insert(id, t);
                }
                out
            }
            DroneMetric::Euclidean => {
                let pts = coords.as_ref().ok_or(ParseError::MissingCoords {
                    id: self
                        .customers
                        .iter()
                        .find(|c| c.x.is_none() || c.y.is_none())
                        .map(|c| c.id)
                        .unwrap_or(0),
                })?;
                let two = T::from_f64_lossy(2.0);
                let speed = self.truck_speed * self.drone_speed_factor;
                eligible
                    .iter()
                    .map(|&id| (id, two * pts[0].euclidean(pts[id]) / speed))
                    .collect()
            }
        };

        Ok(Instance::new(
            self.name.clone(),
            coords,
            eligible,
            truck_time,
            drone_time,
            self.n_drones,
        )?)
    }

    /// Document with explicit matrices, losing nothing an instance
    /// holds.
    pub fn from_instance(instance: &Instance<T>) -> Self {
        let n = instance.n();
        let coords = instance.coords();
        let depot = coords
            .map(|c| PointDoc {
                x: c[0].x,
                y: c[0].y,
            })
            .unwrap_or(PointDoc {
                x: T::zero(),
                y: T::zero(),
            });
        let customers = (1..=n)
            .map(|id| CustomerDoc {
                id,
                x: coords.map(|c| c[id].x),
                y: coords.map(|c| c[id].y),
                eligible: instance.is_eligible(id),
            })
            .collect();
        InstanceDoc {
            name: instance.name().to_string(),
            depot,
            customers,
            truck_metric: TruckMetric::Matrix,
            drone_metric: DroneMetric::Map,
            truck_speed: T::one(),
            drone_speed_factor: T::one(),
            n_drones: instance.n_drones(),
            truck_time: Some(instance.truck_matrix().to_rows()),
            drone_time: Some(
                instance
                    .drone_times()
                    .iter()
                    .map(|(&id, &t)| (id.to_string(), t))
                    .collect(),
            ),
        }
    }
}

/// Parses an instance document; syntax errors carry serde's line and
/// column, semantic errors name the offending field or customer.
pub fn parse_instance<T: Scalar>(text: &str) -> Result<Instance<T>, ParseError> {
    parse_instance_doc(text).and_then(|doc| doc.to_instance())
}

pub fn parse_instance_doc<T: Scalar>(text: &str) -> Result<InstanceDoc<T>, ParseError> {
    Ok(serde_json::from_str(text)?)
}

pub fn write_instance<T: Scalar>(doc: &InstanceDoc<T>) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("document serializes");
    s.push('\n');
    s
}

/// On-disk solution schema: per-drone customer lists plus the makespan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionDoc<T> {
    pub instance: String,
    pub truck_tour: Vec<usize>,
    pub drones: Vec<Vec<usize>>,
    pub alpha: T,
}

impl<T: Scalar> SolutionDoc<T> {
    pub fn from_solution(
        instance_name: &str,
        n_drones: usize,
        solution: &Solution,
        alpha: T,
    ) -> Self {
        let mut drones = vec![Vec::new(); n_drones];
        for (&c, &k) in &solution.drone_assign {
            drones[k].push(c);
        }
        SolutionDoc {
            instance: instance_name.to_string(),
            truck_tour: solution.truck_tour.clone(),
            drones,
            alpha,
        }
    }

    pub fn to_solution(&self) -> Solution {
        let mut drone_assign = BTreeMap::new();
        for (k, list) in self.drones.iter().enumerate() {
            for &c in list {
                drone_assign.insert(c, k);
            }
        }
        Solution {
            truck_tour: self.truck_tour.clone(),
            drone_assign,
        }
    }
}

pub fn parse_solution<T: Scalar>(text: &str) -> Result<SolutionDoc<T>, ParseError> {
    Ok(serde_json::from_str(text)?)
}

pub fn write_solution<T: Scalar>(doc: &SolutionDoc<T>) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("document serializes");
    s.push('\n');
    s
}
