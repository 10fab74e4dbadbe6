//! Depth completion error metrics and LiDAR range statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DepthGrid;
use crate::model::{inverse_depth, PointCloud, DEFAULT_INVERSE_DEPTH_FLOOR};

/// Errors over the pixels where ground truth is valid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(rename = "rmse_mm")]
    pub rmse: f64,
    #[serde(rename = "mae_mm")]
    pub mae: f64,
    #[serde(rename = "irmse_per_km")]
    pub irmse: f64,
    #[serde(rename = "imae_per_km")]
    pub imae: f64,
    #[serde(rename = "valid_pixels")]
    pub valid_pixel_count: usize,
}

/// Metrics plus the number of ground-truth pixels the prediction left empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub report: MetricReport,
    pub pred_invalid_pixels: usize,
}

/// Pairwise summation; result is independent of how the slice was produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Evaluates `pred` against `gt`. A prediction hole at a valid ground-truth
/// pixel is scored as a depth at the inverse-depth floor.
pub fn evaluate(pred: &DepthGrid, gt: &DepthGrid) -> Result<Evaluation> {
    if pred.dims() != gt.dims() {
        return Err(Error::DimensionMismatch {
            expected: gt.dims(),
            found: pred.dims(),
        });
    }
    let floor = DEFAULT_INVERSE_DEPTH_FLOOR;
    let mut abs_mm = Vec::new();
    let mut sq_mm = Vec::new();
    let mut abs_inv = Vec::new();
    let mut sq_inv = Vec::new();
    let mut holes = 0;
    for (&p, &g) in pred.values().iter().zip(gt.values()) {
        if g <= 0.0 {
            continue;
        }
        let p = if p > 0.0 {
            p
        } else {
            holes += 1;
            floor
        };
        let e = (p - g) * 1000.0;
        let ei = inverse_depth(p, floor) - inverse_depth(g, floor);
        abs_mm.push(e.abs());
        sq_mm.push(e * e);
        abs_inv.push(ei.abs());
        sq_inv.push(ei * ei);
    }
    let n = abs_mm.len();
    if n == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    let mean = |v: &[f64]| pairwise_sum(v) / n as f64;
    Ok(Evaluation {
        report: MetricReport {
            rmse: mean(&sq_mm).sqrt(),
            mae: mean(&abs_mm),
            irmse: mean(&sq_inv).sqrt(),
            imae: mean(&abs_inv),
            valid_pixel_count: n,
        },
        pred_invalid_pixels: holes,
    })
}

pub fn compute_metrics(pred: &DepthGrid, gt: &DepthGrid) -> Result<MetricReport> {
    Ok(evaluate(pred, gt)?.report)
}

/// Default histogram edges: 0-80 m in 5 m bins.
pub fn default_range_edges() -> Vec<f64> {
    (0..=16).map(|i| i as f64 * 5.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeHistogram {
    pub edges: Vec<f64>,
    /// One count per `[edges[i], edges[i+1])` followed by the overflow bin
    /// `[edges.last(), inf)`.
    pub counts: Vec<u64>,
    /// Points closer than the first edge.
    pub underflow: u64,
    pub total: u64,
    pub mean_range: f64,
    pub fraction_within_20m: f64,
    #[serde(skip)]
    range_sum: f64,
    #[serde(skip)]
    within_20m: u64,
}

impl RangeHistogram {
    pub fn empty(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput(
                "histogram edges must be strictly increasing (>= 2)".into(),
            ));
        }
        let bins = edges.len();
        Ok(RangeHistogram {
            edges,
            counts: vec![0; bins],
            underflow: 0,
            total: 0,
            mean_range: 0.0,
            fraction_within_20m: 0.0,
            range_sum: 0.0,
            within_20m: 0,
        })
    }

    fn add(&mut self, range: f64) {
        let last = *self.edges.last().expect("validated");
        if range < self.edges[0] {
            self.underflow += 1;
        } else if range >= last {
            *self.counts.last_mut().expect("validated") += 1;
        } else {
            // first edge strictly greater than range, minus one
            let bin = self.edges.partition_point(|&e| e <= range) - 1;
            self.counts[bin] += 1;
        }
        self.total += 1;
        self.range_sum += range;
        if range < 20.0 {
            self.within_20m += 1;
        }
    }

    fn finish(&mut self) {
        if self.total > 0 {
            self.mean_range = self.range_sum / self.total as f64;
            self.fraction_within_20m = self.within_20m as f64 / self.total as f64;
        } else {
            self.mean_range = 0.0;
            self.fraction_within_20m = 0.0;
        }
    }

    /// Accumulates another histogram with identical edges.
    pub fn merge(&mut self, other: &RangeHistogram) -> Result<()> {
        if self.edges != other.edges {
            return Err(Error::InvalidInput(
                "cannot merge histograms with different edges".into(),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.total += other.total;
        self.range_sum += other.range_sum;
        self.within_20m += other.within_20m;
        self.finish();
        Ok(())
    }
}

pub fn range_histogram(cloud: &PointCloud, edges: &[f64]) -> Result<RangeHistogram> {
    let mut hist = RangeHistogram::empty(edges.to_vec())?;
    for p in cloud.points() {
        hist.add(p.range());
    }
    hist.finish();
    Ok(hist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub severity_level: u8,
    pub mean_range: f64,
    pub fraction_within_20m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub rows: Vec<TrendRow>,
    /// Mean range never increases with severity.
    pub monotone_degradation: bool,
}

pub fn compare_weather_trend(hists: &BTreeMap<u8, RangeHistogram>) -> TrendReport {
    let rows: Vec<TrendRow> = hists
        .iter()
        .map(|(&severity_level, h)| TrendRow {
            severity_level,
            mean_range: h.mean_range,
            fraction_within_20m: h.fraction_within_20m,
        })
        .collect();
    let monotone_degradation = rows.windows(2).all(|w| w[1].mean_range <= w[0].mean_range);
    TrendReport {
        rows,
        monotone_degradation,
    }
}
