//! Grid-based divergences between real and fake sample densities, and the
//! per-epoch metrics series.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::f64::consts::LN_2;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::viz::DensityGrid;

/// Substitute mass for empty fake cells under real mass.
pub const KL_EPSILON: f64 = 1e-6;
/// Maximum number of points kept in a [`MetricsHistory`].
pub const HISTORY_CAP: usize = 10_000;

fn check_pair(p: &DensityGrid, q: &DensityGrid) -> Result<()> {
    if p.resolution != q.resolution || p.mass.len() != q.mass.len() {
        return Err(Error::contract(format!(
            "density grids differ in resolution ({} vs {})",
            p.resolution, q.resolution
        )));
    }
    Ok(())
}

/// `KL(p || q)` in nats.
///
/// Fake cells that are empty where `p` has mass are raised to
/// [`KL_EPSILON`] and `q` is renormalized. If more than half of the cells
/// carrying real mass are empty on the fake side, returns `+inf`.
pub fn kl_divergence(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    check_pair(p, q)?;
    let support = p.mass.iter().filter(|&&m| m > 0.0).count();
    let missing = p
        .mass
        .iter()
        .zip(&q.mass)
        .filter(|(&pm, &qm)| pm > 0.0 && qm == 0.0)
        .count();
    if 2 * missing > support {
        return Ok(f64::INFINITY);
    }
    let q_adj: Vec<f64> = if missing == 0 {
        q.mass.clone()
    } else {
        let raised: Vec<f64> = p
            .mass
            .iter()
            .zip(&q.mass)
            .map(|(&pm, &qm)| if pm > 0.0 && qm == 0.0 { KL_EPSILON } else { qm })
            .collect();
        let total: f64 = raised.iter().sum();
        raised.into_iter().map(|v| v / total).collect()
    };
    Ok(relative_entropy(&p.mass, &q_adj))
}

/// `sum p ln(p / q)` over cells with `p > 0`.
fn relative_entropy(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pm, _)| pm > 0.0)
        .map(|(&pm, &qm)| pm * (pm / qm).ln())
        .sum()
}

/// Jensen-Shannon divergence in nats, bounded by `ln 2`.
pub fn js_divergence(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    check_pair(p, q)?;
    let m: Vec<f64> = p.mass.iter().zip(&q.mass).map(|(a, b)| 0.5 * (a + b)).collect();
    let js = 0.5 * relative_entropy(&p.mass, &m) + 0.5 * relative_entropy(&q.mass, &m);
    Ok(js.clamp(0.0, LN_2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsPoint {
    pub epoch: u64,
    pub d_loss: f64,
    pub g_loss: f64,
    /// `+inf` when the fake distribution misses most of the real support.
    #[serde(with = "extended_float")]
    pub kl: f64,
    pub js: f64,
}

/// JSON has no infinities; `+inf`, `-inf`, and NaN travel as strings.
mod extended_float {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("invalid float {other:?}"))),
            },
        }
    }
}

/// Bounded append-only series of metrics with strictly increasing epochs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsHistory {
    points: VecDeque<MetricsPoint>,
}

impl MetricsHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, point: MetricsPoint) -> Result<()> {
        if let Some(last) = self.points.back() {
            if point.epoch <= last.epoch {
                return Err(Error::contract(format!(
                    "metrics epoch {} does not follow {}",
                    point.epoch, last.epoch
                )));
            }
        }
        if self.points.len() == HISTORY_CAP {
            self.points.pop_front();
        }
        self.points.push_back(point);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&MetricsPoint> {
        self.points.back()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MetricsPoint> {
        self.points.iter()
    }

    pub fn clear(&mut self) {
        self.points.clear();
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(out, "{}", csv_row(p));
        }
        out
    }
}

pub const CSV_HEADER: &str = "epoch,d_loss,g_loss,kl,js";

/// One CSV line (without newline). Floats use the shortest round-trip form.
pub fn csv_row(p: &MetricsPoint) -> String {
    format!("{},{},{},{},{}", p.epoch, p.d_loss, p.g_loss, p.kl, p.js)
}
