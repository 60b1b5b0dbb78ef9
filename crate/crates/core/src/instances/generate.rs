//! The two benchmark-family generators.
//!
//! Both are pure functions of their spec (the seed included): draws
//! come from a ChaCha8 stream in a fixed order, subsets are taken by a
//! partial Fisher–Yates shuffle, and all remaining arithmetic is
//! deterministic, so regenerating with the same spec reproduces the
//! same document byte for byte.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::format::{CustomerDoc, DroneMetric, InstanceDoc, PointDoc, TruckMetric};
use super::tsplib::TsplibFile;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("percentage {value} is outside [0, 100]")]
    BadPercent { value: u32 },
    #[error("weight-ineligible fraction {value} is outside [0, 1]")]
    BadFraction { value: f64 },
    #[error("speed and endurance must be positive and finite")]
    BadRates,
    #[error("requesting {pct}% of customers in drone range with zero range is infeasible")]
    ZeroRange { pct: u32 },
    #[error("could not place a customer {kind} the drone range (region too tight)")]
    Placement { kind: &'static str },
}

/// Depot placement for the TSPLIB-derived family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DepotMode {
    /// Arithmetic centroid of the customers.
    Center,
    /// Minimum corner of the customer bounding box.
    Corner,
}

impl DepotMode {
    /// Benchmark table code: 1 = center, 2 = corner.
    pub fn code(self) -> u8 {
        match self {
            DepotMode::Center => 1,
            DepotMode::Corner => 2,
        }
    }
}

/// Derivation parameters for one TSPLIB-based instance.
#[derive(Clone, Debug)]
pub struct GenSpecTsplib<T> {
    pub source: TsplibFile<T>,
    /// Share of drone-eligible customers, 0..=100.
    pub eligible_pct: u32,
    /// Drone speed as a factor of the truck speed; the benchmark range
    /// is 1..=5 but any positive factor is accepted.
    pub drone_speed_factor: T,
    pub n_drones: usize,
    pub depot_mode: DepotMode,
    pub seed: u64,
}

/// `k` distinct values from `1..=n` by partial Fisher–Yates, in the
/// order drawn.
fn sample_distinct(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (1..=n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

fn round_to_decimals(v: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (v * scale).round() / scale
}

/// Turns TSPLIB coordinates into a PDSTSP instance document.
///
/// Every node becomes a customer (renumbered 1..=n in file order); a
/// new depot is added at the customer centroid or at the bounding-box
/// minimum corner, rounded to the file's coordinate precision. The
/// truck metric is Manhattan on the raw coordinates at unit speed, the
/// drone metric is the Euclidean round trip at `drone_speed_factor`
/// times the truck speed. Eligibility picks `floor(pct * n / 100)`
/// customers by a seeded uniform draw without replacement.
pub fn derive_pdstsp<T: Scalar>(spec: &GenSpecTsplib<T>) -> Result<InstanceDoc<T>, GenError> {
    if spec.eligible_pct > 100 {
        return Err(GenError::BadPercent {
            value: spec.eligible_pct,
        });
    }
    let n = spec.source.nodes.len();
    let xs: Vec<f64> = spec
        .source
        .nodes
        .iter()
        .map(|p| p.x.to_f64().unwrap())
        .collect();
    let ys: Vec<f64> = spec
        .source
        .nodes
        .iter()
        .map(|p| p.y.to_f64().unwrap())
        .collect();
    let (dx, dy) = match spec.depot_mode {
        DepotMode::Center => (
            xs.iter().sum::<f64>() / n as f64,
            ys.iter().sum::<f64>() / n as f64,
        ),
        DepotMode::Corner => (
            xs.iter().copied().fold(f64::INFINITY, f64::min),
            ys.iter().copied().fold(f64::INFINITY, f64::min),
        ),
    };
    let decimals = spec.source.coord_decimals;
    let depot = PointDoc {
        x: T::from_f64_lossy(round_to_decimals(dx, decimals)),
        y: T::from_f64_lossy(round_to_decimals(dy, decimals)),
    };

    let k = n * spec.eligible_pct as usize / 100;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let eligible: BTreeSet<usize> = sample_distinct(&mut rng, n, k).into_iter().collect();

    let customers = spec
        .source
        .nodes
        .iter()
        .enumerate()
        .map(|(idx, node)| CustomerDoc {
            id: idx + 1,
            x: Some(node.x),
            y: Some(node.y),
            eligible: eligible.contains(&(idx + 1)),
        })
        .collect();

    let src = spec
        .source
        .name
        .clone()
        .unwrap_or_else(|| format!("tsplib{n}"));
    Ok(InstanceDoc {
        name: format!(
            "{src}_el{}_sp{}_u{}_dp{}",
            spec.eligible_pct,
            spec.drone_speed_factor,
            spec.n_drones,
            spec.depot_mode.code()
        ),
        depot,
        customers,
        truck_metric: TruckMetric::Manhattan,
        drone_metric: DroneMetric::Euclidean,
        truck_speed: T::one(),
        drone_speed_factor: spec.drone_speed_factor,
        n_drones: spec.n_drones,
        truck_time: None,
        drone_time: None,
    })
}

/// Depot placement for the coordinate-drawn family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MurrayDepot {
    /// Center of the customer region.
    Center,
    /// Middle of the region's left edge.
    Edge,
    /// Origin of the coordinate axes.
    Origin,
}

impl MurrayDepot {
    pub fn code(self) -> &'static str {
        match self {
            MurrayDepot::Center => "center",
            MurrayDepot::Edge => "edge",
            MurrayDepot::Origin => "origin",
        }
    }
}

/// Parameters for the coordinate-drawn family. Coordinates live in a
/// square region of `REGION_MILES` a side; times are minutes, speeds
/// miles per hour.
#[derive(Clone, Debug)]
pub struct GenSpecMurrayChu<T> {
    pub n_customers: usize,
    pub depot_mode: MurrayDepot,
    /// Share of customers placed within drone range, 0..=100.
    pub pct_in_drone_range: u32,
    /// Drone flight endurance in minutes.
    pub endurance: T,
    /// Common truck and drone speed in miles per hour.
    pub speed: T,
    /// Fraction of in-range customers excluded for parcel weight.
    pub pct_weight_ineligible: T,
    pub n_drones: usize,
    pub seed: u64,
}

pub const REGION_MILES: f64 = 20.0;

impl<T: Scalar> GenSpecMurrayChu<T> {
    /// Benchmark defaults: 30-minute endurance, 25 mph, 15% of the
    /// in-range customers weight-excluded, one drone.
    pub fn new(
        n_customers: usize,
        depot_mode: MurrayDepot,
        pct_in_drone_range: u32,
        seed: u64,
    ) -> Self {
        Self {
            n_customers,
            depot_mode,
            pct_in_drone_range,
            endurance: T::from_f64_lossy(30.0),
            speed: T::from_f64_lossy(25.0),
            pct_weight_ineligible: T::from_f64_lossy(0.15),
            n_drones: 1,
            seed,
        }
    }
}

/// Draws an instance with exactly `floor(pct * n / 100)` customers
/// inside the drone's round-trip range and the rest outside it. Of the
/// in-range customers, a seeded `pct_weight_ineligible` fraction
/// (rounded) is excluded for parcel weight; eligibility is the in-range
/// set minus the excluded ones. Deterministic per seed.
pub fn gen_murray_chu<T: Scalar>(spec: &GenSpecMurrayChu<T>) -> Result<InstanceDoc<T>, GenError> {
    if spec.pct_in_drone_range > 100 {
        return Err(GenError::BadPercent {
            value: spec.pct_in_drone_range,
        });
    }
    let frac = spec.pct_weight_ineligible.to_f64().unwrap();
    if !(0.0..=1.0).contains(&frac) {
        return Err(GenError::BadFraction { value: frac });
    }
    let endurance = spec.endurance.to_f64().unwrap();
    let speed = spec.speed.to_f64().unwrap();
    if !(endurance >= 0.0 && endurance.is_finite() && speed > 0.0 && speed.is_finite()) {
        return Err(GenError::BadRates);
    }

    let n = spec.n_customers;
    let k_in = n * spec.pct_in_drone_range as usize / 100;
    // Round trip 2d at `speed` mph in minutes: 120 d / speed <= endurance.
    let range = endurance * speed / 120.0;
    if k_in > 0 && range <= 0.0 {
        return Err(GenError::ZeroRange {
            pct: spec.pct_in_drone_range,
        });
    }

    let l = REGION_MILES;
    let (dx, dy) = match spec.depot_mode {
        MurrayDepot::Center => (l / 2.0, l / 2.0),
        MurrayDepot::Edge => (0.0, l / 2.0),
        MurrayDepot::Origin => (0.0, 0.0),
    };
    let corner_dist = [(0.0, 0.0), (l, 0.0), (0.0, l), (l, l)]
        .iter()
        .map(|&(x, y)| ((x - dx).powi(2) + (y - dy).powi(2)).sqrt())
        .fold(0.0f64, f64::max);
    if n > k_in && range >= corner_dist {
        return Err(GenError::Placement { kind: "outside" });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let in_range: BTreeSet<usize> = sample_distinct(&mut rng, n, k_in).into_iter().collect();

    const MAX_ATTEMPTS: u32 = 100_000;
    let mut coords = Vec::with_capacity(n);
    for id in 1..=n {
        let inside = in_range.contains(&id);
        let mut placed = None;
        for _ in 0..MAX_ATTEMPTS {
            let (x, y) = if inside {
                // Uniform in the disk around the depot, clipped to the
                // region by rejection.
                let r = range * rng.random::<f64>().sqrt();
                let theta = TAU * rng.random::<f64>();
                (dx + r * theta.cos(), dy + r * theta.sin())
            } else {
                (l * rng.random::<f64>(), l * rng.random::<f64>())
            };
            if !(0.0..=l).contains(&x) || !(0.0..=l).contains(&y) {
                continue;
            }
            let dist = ((x - dx).powi(2) + (y - dy).powi(2)).sqrt();
            if inside == (dist <= range) {
                placed = Some((x, y));
                break;
            }
        }
        let (x, y) = placed.ok_or(GenError::Placement {
            kind: if inside { "inside" } else { "outside" },
        })?;
        coords.push((x, y));
    }

    let in_range_sorted: Vec<usize> = in_range.iter().copied().collect();
    let excluded_count = (frac * k_in as f64).round() as usize;
    let excluded: BTreeSet<usize> = sample_distinct(&mut rng, k_in.max(1), excluded_count.min(k_in))
        .into_iter()
        .map(|i| in_range_sorted[i - 1])
        .collect();

    let customers = (1..=n)
        .map(|id| CustomerDoc {
            id,
            x: Some(T::from_f64_lossy(coords[id - 1].0)),
            y: Some(T::from_f64_lossy(coords[id - 1].1)),
            eligible: in_range.contains(&id) && !excluded.contains(&id),
        })
        .collect();

    Ok(InstanceDoc {
        name: format!(
            "mc_n{n}_{}_rng{}_u{}_seed{}",
            spec.depot_mode.code(),
            spec.pct_in_drone_range,
            spec.n_drones,
            spec.seed
        ),
        depot: PointDoc {
            x: T::from_f64_lossy(dx),
            y: T::from_f64_lossy(dy),
        },
        customers,
        truck_metric: TruckMetric::Manhattan,
        drone_metric: DroneMetric::Euclidean,
        // Distance per minute, so all travel times come out in minutes.
        truck_speed: spec.speed / T::from_f64_lossy(60.0),
        drone_speed_factor: T::one(),
        n_drones: spec.n_drones,
        truck_time: None,
        drone_time: None,
    })
}
