//! Nondominated-set maintenance and front analytics. All objectives are minimized.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::hwcost::{check_constraints, power_density, ConstraintLimits};
use crate::mobo::TrialRecord;

/// `a` dominates `b`: no worse everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "objective vectors of length {} and {} are not comparable",
            a.len(),
            b.len()
        )));
    }
    Ok(dominates_unchecked(a, b))
}

#[inline]
pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

#[inline]
fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Indices (ascending) of points no other point dominates. Equal points are all kept.
///
/// Points are visited in lexicographic order; anything that dominates a point precedes it in
/// that order, and by transitivity some kept point dominates every rejected one.
pub fn nondominated_filter<P: AsRef<[f64]>>(points: &[P]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| lexicographic(points[i].as_ref(), points[j].as_ref()).then(i.cmp(&j)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let p = points[i].as_ref();
        if !kept.iter().any(|&k| dominates_unchecked(points[k].as_ref(), p)) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

/// Nondomination rank of each point (0 = first front), fast nondominated sorting.
pub fn nondomination_ranks<P: AsRef<[f64]>>(points: &[P]) -> Vec<usize> {
    let n = points.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (points[i].as_ref(), points[j].as_ref());
            if dominates_unchecked(a, b) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates_unchecked(b, a) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut ranks = vec![0usize; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    let mut rank = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            ranks[i] = rank;
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        rank += 1;
        current = next;
    }
    ranks
}

/// Exact hypervolume dominated by `front` and bounded by `reference`.
pub fn hypervolume<P: AsRef<[f64]>>(front: &[P], reference: &[f64]) -> Result<f64> {
    let m = reference.len();
    if m == 0 {
        return Err(domain("reference point must have at least one objective"));
    }
    for (index, p) in front.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != m {
            return Err(Error::Shape(format!(
                "point {index} has {} objectives, reference has {m}",
                p.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) || p.iter().zip(reference).any(|(x, r)| x > r) {
            return Err(Error::BeyondReference { index });
        }
    }
    let pts: Vec<Vec<f64>> = front.iter().map(|p| p.as_ref().to_vec()).collect();
    Ok(hv_recursive(pts, reference))
}

fn hv_recursive(mut pts: Vec<Vec<f64>>, reference: &[f64]) -> f64 {
    let m = reference.len();
    if pts.is_empty() {
        return 0.0;
    }
    match m {
        1 => reference[0] - pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        2 => {
            pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
            let mut area = 0.0;
            let mut floor = reference[1];
            for p in &pts {
                if p[1] < floor {
                    area += (reference[0] - p[0]) * (floor - p[1]);
                    floor = p[1];
                }
            }
            area
        }
        _ => {
            // Sweep the last objective; each slab's cross-section is an (m-1)-dimensional volume.
            pts.sort_by(|a, b| a[m - 1].total_cmp(&b[m - 1]));
            let sub_ref = &reference[..m - 1];
            let mut slice: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
            let mut total = 0.0;
            for i in 0..pts.len() {
                let p = &pts[i][..m - 1];
                if !slice.iter().any(|q| weakly_dominates(q, p)) {
                    slice.retain(|q| !weakly_dominates(p, q));
                    slice.push(p.to_vec());
                }
                let next = pts.get(i + 1).map_or(reference[m - 1], |q| q[m - 1]);
                let height = next - pts[i][m - 1];
                if height > 0.0 {
                    total += height * hv_recursive(slice.clone(), sub_ref);
                }
            }
            total
        }
    }
}

/// Volume dominated by `point` and by none of `front`.
pub fn hypervolume_contribution<P: AsRef<[f64]>>(point: &[f64], front: &[P], reference: &[f64]) -> f64 {
    let own: f64 = point.iter().zip(reference).map(|(p, r)| (r - p).max(0.0)).product();
    if own == 0.0 {
        return 0.0;
    }
    let limited: Vec<Vec<f64>> = front
        .iter()
        .map(|q| q.as_ref().iter().zip(point).map(|(a, b)| a.max(*b)).collect())
        .collect();
    (own - hv_recursive(limited, reference)).max(0.0)
}

/// Componentwise maximum inflated by 1% of its magnitude.
pub fn reference_point<P: AsRef<[f64]>>(points: &[P]) -> Option<Vec<f64>> {
    let first = points.first()?.as_ref();
    let mut worst = first.to_vec();
    for p in points {
        for (w, v) in worst.iter_mut().zip(p.as_ref()) {
            *w = w.max(*v);
        }
    }
    Some(worst.into_iter().map(|w| w + 0.01 * w.abs().max(f64::MIN_POSITIVE)).collect())
}

/// Hypervolume after each successive point; `None` entries (failed trials) repeat the previous value.
///
/// Built from nonnegative exclusive contributions, so the curve never decreases.
pub fn hypervolume_curve(points: &[Option<&[f64]>], reference: &[f64]) -> Result<Vec<f64>> {
    let mut front: Vec<Vec<f64>> = Vec::new();
    let mut hv = 0.0;
    let mut curve = Vec::with_capacity(points.len());
    for (index, p) in points.iter().enumerate() {
        if let Some(p) = p {
            if p.len() != reference.len() {
                return Err(Error::Shape(format!("point {index} has the wrong number of objectives")));
            }
            if p.iter().zip(reference.iter()).any(|(x, r)| !(x <= r)) {
                return Err(Error::BeyondReference { index });
            }
            if !front.iter().any(|q| weakly_dominates(q, p)) {
                hv += hypervolume_contribution(p, &front, reference);
                front.retain(|q| !dominates_unchecked(p, q));
                front.push(p.to_vec());
            }
        }
        curve.push(hv);
    }
    Ok(curve)
}

/// Schott spacing on per-dimension min-max normalized objectives with L1 nearest-neighbor distances.
pub fn spacing<P: AsRef<[f64]>>(front: &[P]) -> Result<f64> {
    let n = front.len();
    if n < 2 {
        return Err(domain(format!("spacing needs at least two points, got {n}")));
    }
    let m = front[0].as_ref().len();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for p in front {
        let p = p.as_ref();
        if p.len() != m {
            return Err(Error::Shape("front points disagree on objective count".into()));
        }
        for k in 0..m {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let norm: Vec<Vec<f64>> = front
        .iter()
        .map(|p| {
            p.as_ref()
                .iter()
                .enumerate()
                .map(|(k, v)| if hi[k] > lo[k] { (v - lo[k]) / (hi[k] - lo[k]) } else { 0.0 })
                .collect()
        })
        .collect();
    let nearest: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| norm[i].iter().zip(&norm[j]).map(|(a, b)| (a - b).abs()).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mean = nearest.iter().sum::<f64>() / n as f64;
    let var = nearest.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(var.sqrt())
}

/// Front size and per-objective extent (max - min).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diversity {
    pub size: usize,
    pub extent: Vec<f64>,
}

pub fn diversity<P: AsRef<[f64]>>(front: &[P]) -> Diversity {
    let m = front.first().map_or(0, |p| p.as_ref().len());
    let extent = (0..m)
        .map(|k| {
            let (lo, hi) = front.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                let v = p.as_ref()[k];
                (lo.min(v), hi.max(v))
            });
            hi - lo
        })
        .collect();
    Diversity { size: front.len(), extent }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub trial_index: usize,
    pub objectives: Vec<f64>,
}

/// Mutually nondominated set of trials with the reference point that bounds it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    pub entries: Vec<ArchiveEntry>,
    pub reference_point: Vec<f64>,
}

impl ParetoArchive {
    pub fn new(reference_point: Vec<f64>) -> Self {
        ParetoArchive { entries: Vec::new(), reference_point }
    }

    /// Adds the point unless an archived point dominates it, evicting what it dominates.
    /// Duplicated objective vectors are all kept.
    pub fn insert(&mut self, trial_index: usize, objectives: Vec<f64>) -> bool {
        if self.entries.iter().any(|e| dominates_unchecked(&e.objectives, &objectives)) {
            return false;
        }
        self.entries.retain(|e| !dominates_unchecked(&objectives, &e.objectives));
        for (r, v) in self.reference_point.iter_mut().zip(&objectives) {
            if *v > *r {
                *r = *v;
            }
        }
        self.entries.push(ArchiveEntry { trial_index, objectives });
        true
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn points(&self) -> Vec<&[f64]> {
        self.entries.iter().map(|e| e.objectives.as_slice()).collect()
    }

    pub fn hypervolume(&self) -> Result<f64> {
        hypervolume(&self.points(), &self.reference_point)
    }

    pub fn trial_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self.entries.iter().map(|e| e.trial_index).collect();
        idx.sort_unstable();
        idx
    }
}

/// Completed trials with their objective vectors.
pub fn completed_points(trials: &[TrialRecord]) -> Vec<(usize, &[f64])> {
    trials
        .iter()
        .filter(|t| t.is_completed())
        .map(|t| (t.trial_index, t.objectives.as_slice()))
        .collect()
}

/// Pareto archive of all completed trials.
pub fn pareto_front(trials: &[TrialRecord]) -> ParetoArchive {
    archive_of(trials, |_| true)
}

/// Trials that meet every limit, reduced to their nondominated subset.
pub fn constrained_front(trials: &[TrialRecord], limits: &ConstraintLimits) -> ParetoArchive {
    archive_of(trials, |t| is_feasible(t, limits))
}

pub fn is_feasible(trial: &TrialRecord, limits: &ConstraintLimits) -> bool {
    match trial.metrics.as_ref() {
        Some(m) if trial.is_completed() => m
            .hardware
            .as_ref()
            .is_some_and(|hw| check_constraints(hw, m.val_mse, limits).all()),
        _ => false,
    }
}

fn archive_of(trials: &[TrialRecord], keep: impl Fn(&TrialRecord) -> bool) -> ParetoArchive {
    let all = completed_points(trials);
    let reference = reference_point(&all.iter().map(|(_, p)| *p).collect::<Vec<_>>()).unwrap_or_default();
    let selected: Vec<&TrialRecord> = trials.iter().filter(|t| t.is_completed() && keep(t)).collect();
    let points: Vec<&[f64]> = selected.iter().map(|t| t.objectives.as_slice()).collect();
    let entries = nondominated_filter(&points)
        .into_iter()
        .map(|i| ArchiveEntry { trial_index: selected[i].trial_index, objectives: points[i].to_vec() })
        .collect();
    ParetoArchive { entries, reference_point: reference }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedMetrics {
    /// Baseline MSE over model MSE.
    pub eta: f64,
    /// Reciprocal of the combinational delay, Hz.
    pub f_max_hz: f64,
    /// Area as a fraction of the area limit.
    pub area_utilization: f64,
    pub power_density_w_per_cm2: f64,
}

pub fn derived_metrics(record: &TrialRecord, baseline_mse: f64, limits: &ConstraintLimits) -> Result<DerivedMetrics> {
    let m = record
        .metrics
        .as_ref()
        .ok_or_else(|| domain(format!("trial {} has no metrics", record.trial_index)))?;
    let hw = m
        .hardware
        .as_ref()
        .ok_or_else(|| domain(format!("trial {} has no hardware report", record.trial_index)))?;
    if !(m.val_mse > 0.0) {
        return Err(domain(format!("eta needs a positive validation MSE, got {}", m.val_mse)));
    }
    if !(hw.delay_ps > 0.0) {
        return Err(domain(format!("f_max needs a positive delay, got {}", hw.delay_ps)));
    }
    if !(limits.max_area_um2 > 0.0) {
        return Err(domain("area limit must be positive"));
    }
    Ok(DerivedMetrics {
        eta: baseline_mse / m.val_mse,
        f_max_hz: 1.0 / (hw.delay_ps * 1e-12),
        area_utilization: hw.area_um2 / limits.max_area_um2,
        power_density_w_per_cm2: power_density(hw)?,
    })
}
