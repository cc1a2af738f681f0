//! Global view descriptor: three normalised histograms. The first two
//! (normal-to-viewpoint angle and distance to centroid) discriminate views;
//! the third (direction of normals within the image plane) recovers camera roll
//! by circular correlation.

use super::{PerceptionError, PointCloud, ViewTemplate};
use crate::se3::Vec3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const NORMAL_BINS: usize = 45;
pub const CENTROID_BINS: usize = 64;
pub const ROLL_BINS: usize = 90;

/// Normals whose image-plane projection is shorter than this carry no roll
/// information and are left out of the roll histogram.
const MIN_ROLL_PROJECTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Descriptor {
    pub normal_angle_hist: Vec<f64>,
    pub centroid_dist_hist: Vec<f64>,
    pub roll_hist: Vec<f64>,
}

/// Descriptor of a cloud expressed in a camera frame (x right, y down, z
/// forward). `viewpoint` is the sensor position in that frame, normally the origin.
pub fn compute_descriptor(cloud: &PointCloud, viewpoint: &Vec3) -> Result<Descriptor, PerceptionError> {
    if cloud.is_empty() {
        return Err(PerceptionError::EmptyCloud);
    }
    let normals = cloud.normals.as_ref().ok_or(PerceptionError::MissingNormals)?;
    let mut na = vec![0.0; NORMAL_BINS];
    let mut cd = vec![0.0; CENTROID_BINS];
    let mut rh = vec![0.0; ROLL_BINS];

    for (p, n) in cloud.points.iter().zip(normals) {
        let to_view = viewpoint - p;
        let a = n.angle(&to_view);
        na[bin(a / PI, NORMAL_BINS)] += 1.0;
        let proj = n.x.hypot(n.y);
        if proj >= MIN_ROLL_PROJECTION {
            let r = n.y.atan2(n.x);
            rh[bin((r + PI) / (2.0 * PI), ROLL_BINS)] += 1.0;
        }
    }
    let c = cloud.centroid();
    let dists: Vec<f64> = cloud.points.iter().map(|p| (p - c).norm()).collect();
    let dmax = dists.iter().copied().fold(0.0, f64::max);
    for d in dists {
        let x = if dmax > 0.0 { d / dmax } else { 0.0 };
        cd[bin(x, CENTROID_BINS)] += 1.0;
    }
    normalize(&mut na);
    normalize(&mut cd);
    if rh.iter().sum::<f64>() == 0.0 {
        rh.fill(1.0);
    }
    normalize(&mut rh);
    Ok(Descriptor {
        normal_angle_hist: na,
        centroid_dist_hist: cd,
        roll_hist: rh,
    })
}

fn bin(unit: f64, n: usize) -> usize {
    ((unit * n as f64).floor() as isize).clamp(0, n as isize - 1) as usize
}

fn normalize(h: &mut [f64]) {
    let s: f64 = h.iter().sum();
    if s > 0.0 {
        for v in h {
            *v /= s;
        }
    }
}

/// L1 distance over the view-discriminating histograms.
pub fn descriptor_distance(a: &Descriptor, b: &Descriptor) -> f64 {
    let l1 = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>();
    l1(&a.normal_angle_hist, &b.normal_angle_hist) + l1(&a.centroid_dist_hist, &b.centroid_dist_hist)
}

/// Circular cross-correlation of roll histograms. Returns `(shift, score)`
/// for the local maxima, best first (smallest shift on ties). A shift of `k`
/// bins means the query is the template rotated by `+k * 2pi / ROLL_BINS`
/// about the optical axis.
pub fn roll_peaks(query: &Descriptor, template: &Descriptor) -> Vec<(usize, f64)> {
    let n = ROLL_BINS;
    let score: Vec<f64> = (0..n)
        .map(|k| {
            (0..n)
                .map(|b| query.roll_hist[b] * template.roll_hist[(b + n - k) % n])
                .sum()
        })
        .collect();
    let mut peaks: Vec<(usize, f64)> = (0..n)
        .filter(|&k| score[k] >= score[(k + n - 1) % n] && score[k] >= score[(k + 1) % n])
        .map(|k| (k, score[k]))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    peaks
}

/// Roll angle for a histogram shift, in `(-pi, pi]`.
pub fn shift_to_angle(k: usize) -> f64 {
    crate::se3::wrap_angle(k as f64 * 2.0 * PI / ROLL_BINS as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchCandidate {
    pub template: usize,
    pub distance: f64,
    /// Roll estimates, best correlation first.
    pub rolls: Vec<f64>,
}

/// The `k` closest templates, ties broken by template index.
pub fn match_templates(d: &Descriptor, library: &[ViewTemplate], k: usize) -> Vec<MatchCandidate> {
    let mut ranked: Vec<(usize, f64)> = library
        .iter()
        .enumerate()
        .map(|(i, t)| (i, descriptor_distance(d, &t.descriptor)))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    ranked
        .into_iter()
        .take(k)
        .map(|(i, dist)| MatchCandidate {
            template: i,
            distance: dist,
            rolls: roll_peaks(d, &library[i].descriptor)
                .into_iter()
                .map(|(s, _)| shift_to_angle(s))
                .collect(),
        })
        .collect()
}
