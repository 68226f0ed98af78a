//! Lattice-point counting in dilated bodies and norm balls of SL2(Z).
//!
//! Two counters share a report format: exact integer-point counts of a dilated
//! euclidean body, and exact counts of integer SL2 matrices inside a Frobenius
//! norm ball.  Reports pair each count with a reference volume (closed-form or
//! Monte Carlo) so the count/volume ratio and its doubling behaviour can be
//! inspected on a grid of scales.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certifier::{ball_oracle, SetOracle};
use crate::error::{Error, Result};
use crate::group::{builtin_group, GroupElement, GroupKind};
use crate::rng::{accumulate, index_rng, WeightedSums};

/// Largest euclidean dimension the box scan will enumerate.
pub const MAX_COUNT_DIM: usize = 4;
/// Cap on T * circumradius; beyond this the scan box is unreasonably large.
pub const MAX_SCALED_RADIUS: f64 = 1.0e4;
/// Cap on the Frobenius bound for the SL2(Z) scan.
pub const MAX_SL2_BOUND: f64 = 500.0;

/// Membership of a lattice point, with a small band around the boundary so
/// points that lie exactly on the boundary are kept despite rounding.
fn body_contains(body: &SetOracle, el: &GroupElement) -> bool {
    match &body.signed_distance {
        Some(sd) => sd(el) <= 1e-9,
        None => (body.member)(el),
    }
}

fn scan_axis(
    body: &SetOracle,
    el: &mut GroupElement,
    axis: usize,
    n: usize,
    limit: i64,
    inv_t: f64,
) -> u64 {
    let mut total = 0;
    for x in -limit..=limit {
        el.mat.set(axis, n, x as f64 * inv_t);
        if axis + 1 == n {
            if body_contains(body, el) {
                total += 1;
            }
        } else {
            total += scan_axis(body, el, axis + 1, n, limit, inv_t);
        }
    }
    total
}

/// Exact number of integer points in the dilate T * body.
///
/// The body must live in a euclidean group of dimension at most
/// `MAX_COUNT_DIM`, and the scan box T * circumradius must stay under
/// `MAX_SCALED_RADIUS`.
pub fn count_integer_points(body: &SetOracle, t: f64) -> Result<u64> {
    let n = match body.group.kind {
        GroupKind::Euclidean(n) => n,
        _ => {
            return Err(Error::GroupMismatch(format!(
                "integer-point counting needs a euclidean body, got {}",
                body.group.name
            )))
        }
    };
    if n == 0 || n > MAX_COUNT_DIM {
        return Err(Error::InvalidInput(format!(
            "integer-point counting supports dimensions 1..={MAX_COUNT_DIM}, got {n}"
        )));
    }
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::NonpositiveInput(format!("dilation T must be positive, got {t}")));
    }
    if !body.bounding_radius.is_finite() {
        return Err(Error::ScaleTooLarge(format!(
            "body '{}' has no finite circumradius",
            body.name
        )));
    }
    let reach = t * body.bounding_radius;
    if reach > MAX_SCALED_RADIUS {
        return Err(Error::ScaleTooLarge(format!(
            "T * circumradius = {reach:.3e} exceeds the cap {MAX_SCALED_RADIUS:.1e}"
        )));
    }

    let limit = reach.floor() as i64;
    let inv_t = 1.0 / t;
    let body_ref = &*body;
    let total: u64 = (-limit..=limit)
        .into_par_iter()
        .map(|x0| {
            let mut el = body_ref.group.identity();
            el.mat.set(0, n, x0 as f64 * inv_t);
            if n == 1 {
                u64::from(body_contains(body_ref, &el))
            } else {
                scan_axis(body_ref, &mut el, 1, n, limit, inv_t)
            }
        })
        .sum();
    Ok(total)
}

/// Exact number of gamma in SL2(Z) with Frobenius norm at most `bound`.
///
/// Scans (a, b, c) with a^2 + b^2 + c^2 inside the ball and recovers d from
/// the determinant equation; the a = 0 face is the pair bc = -1 with d free.
pub fn count_sl2z_norm_ball(bound: f64) -> Result<u64> {
    if !bound.is_finite() || bound <= 0.0 {
        return Err(Error::NonpositiveInput(format!("norm bound must be positive, got {bound}")));
    }
    if bound > MAX_SL2_BOUND {
        return Err(Error::ScaleTooLarge(format!(
            "norm bound {bound} exceeds the cap {MAX_SL2_BOUND}"
        )));
    }
    let b2 = bound * bound;
    let mut total = 0u64;

    // a = 0 forces bc = -1, so b and c are a unit pair and d is free.
    if b2 >= 2.0 {
        let d_max = (b2 - 2.0).sqrt().floor() as i64;
        total += 2 * (2 * d_max as u64 + 1);
    }

    // a > 0; the a < 0 half is its image under gamma -> -gamma.
    let a_max = bound.floor() as i64;
    let positive: u64 = (1..=a_max)
        .into_par_iter()
        .map(|a| {
            let mut count = 0u64;
            let rem_a = b2 - (a * a) as f64;
            let b_max = if rem_a >= 0.0 { rem_a.sqrt().floor() as i64 } else { -1 };
            for b in -b_max..=b_max {
                let rem_b = rem_a - (b * b) as f64;
                let c_max = if rem_b >= 0.0 { rem_b.sqrt().floor() as i64 } else { -1 };
                for c in -c_max..=c_max {
                    let num = 1 + b * c;
                    if num.rem_euclid(a) != 0 {
                        continue;
                    }
                    let d = num / a;
                    let norm2 = a * a + b * b + c * c + d * d;
                    if norm2 as f64 <= b2 {
                        count += 1;
                    }
                }
            }
            count
        })
        .sum();
    total += 2 * positive;
    Ok(total)
}

/// Haar volume of the Frobenius ball { g in SL2(R) : ||g||_F <= t } in the
/// Iwasawa coordinates used by the group model (density e^s ds dx dtheta).
pub fn sl2_frobenius_ball_volume(t: f64) -> f64 {
    if !(t * t > 2.0) {
        return 0.0;
    }
    let disc = (t * t * t * t - 4.0).sqrt();
    let s_hi = (t * t + disc) / 2.0;
    let s_lo = (t * t - disc) / 2.0;
    let u_lo = -s_hi.ln();
    let u_hi = -s_lo.ln();
    let radicand = |u: f64| t * t * (-u).exp() - (-2.0 * u).exp() - 1.0;
    let f = |u: f64| u.exp() * radicand(u).max(0.0).sqrt();

    // Simpson on a fine fixed grid; the integrand vanishes at both endpoints.
    let panels = 4000;
    let h = (u_hi - u_lo) / panels as f64;
    let mut acc = f(u_lo) + f(u_hi);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(u_lo + i as f64 * h);
    }
    let integral = acc * h / 3.0;
    2.0 * std::f64::consts::PI * 2.0 * integral
}

/// Monte Carlo estimate of the same Haar volume, with its standard error.
pub fn sl2_frobenius_ball_volume_mc(t: f64, n_samples: usize, seed: u64) -> (f64, f64) {
    if !(t * t > 2.0) || n_samples == 0 {
        return (0.0, 0.0);
    }
    let disc = (t * t * t * t - 4.0).sqrt();
    let u_lo = -((t * t + disc) / 2.0).ln();
    let u_hi = -((t * t - disc) / 2.0).ln();
    let x_max = (t * t * t * t / 4.0 - 1.0).max(0.0).sqrt();
    let box_measure = (u_hi - u_lo) * 2.0 * x_max * 2.0 * std::f64::consts::PI;
    let sums = accumulate(n_samples, seed, WeightedSums::default(), |acc, rng| {
        let u = rng.gen_range(u_lo..u_hi);
        let x = rng.gen_range(-x_max..x_max);
        let radicand = t * t * (-u).exp() - (-2.0 * u).exp() - 1.0;
        let w = if x * x <= radicand { u.exp() } else { 0.0 };
        acc.push(w);
    });
    sums.estimate(box_measure)
}

/// Monte Carlo estimate of the volume of the undilated body, with standard
/// error, by sampling its bounding box.
pub fn euclidean_body_volume_mc(
    body: &SetOracle,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let n = match body.group.kind {
        GroupKind::Euclidean(n) => n,
        _ => {
            return Err(Error::GroupMismatch(format!(
                "volume sampling needs a euclidean body, got {}",
                body.group.name
            )))
        }
    };
    let r = body.bounding_radius;
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "body '{}' needs a positive finite circumradius for box sampling",
            body.name
        )));
    }
    if n_samples == 0 {
        return Err(Error::NonpositiveInput("volume sampling needs n_samples > 0".into()));
    }
    let group = Arc::clone(&body.group);
    let member = Arc::clone(&body.member);
    let sums = accumulate(n_samples, seed, WeightedSums::default(), move |acc, rng| {
        let coords: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..r)).collect();
        let el = group.exp_coords(&coords).expect("euclidean chart is total");
        acc.push(if member(&el) { 1.0 } else { 0.0 });
    });
    Ok(sums.estimate((2.0 * r).powi(n as i32)))
}

/// Which family of counts a report covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountKind {
    IntegerPoints,
    Sl2zBall,
}

impl CountKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CountKind::IntegerPoints => "integer_points",
            CountKind::Sl2zBall => "sl2z_ball",
        }
    }
}

impl FromStr for CountKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "integer_points" => Ok(CountKind::IntegerPoints),
            "sl2z_ball" => Ok(CountKind::Sl2zBall),
            other => Err(Error::InvalidInput(format!(
                "unknown count kind '{other}' (expected integer_points or sl2z_ball)"
            ))),
        }
    }
}

impl fmt::Display for CountKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the reference volumes in a report are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeReference {
    Analytic,
    MonteCarloVolume,
}

impl VolumeReference {
    pub fn as_str(self) -> &'static str {
        match self {
            VolumeReference::Analytic => "analytic",
            VolumeReference::MonteCarloVolume => "monte_carlo_volume",
        }
    }
}

impl FromStr for VolumeReference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(VolumeReference::Analytic),
            "monte_carlo_volume" => Ok(VolumeReference::MonteCarloVolume),
            other => Err(Error::InvalidInput(format!(
                "unknown volume reference '{other}' (expected analytic or monte_carlo_volume)"
            ))),
        }
    }
}

impl fmt::Display for VolumeReference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Counts over a grid of scales, with reference volumes and derived ratios.
///
/// `ratios[i]` is `counts[i] / reference_volumes[i]` (absent at zero volume);
/// `doubling_ratios[i]` is `counts[j] / counts[i]` for the grid entry with
/// `T_grid[j] = 2 * T_grid[i]`, absent when the doubled scale is not on the
/// grid or the base count is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub kind: String,
    pub reference: String,
    #[serde(rename = "T_grid")]
    pub t_grid: Vec<f64>,
    pub counts: Vec<u64>,
    pub reference_volumes: Vec<f64>,
    pub ratios: Vec<Option<f64>>,
    pub doubling_ratios: Vec<Option<f64>>,
}

impl CountReport {
    /// CSV rendering with columns T, count, volume, ratio, doubling; absent
    /// ratios render as empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("T,count,volume,ratio,doubling\n");
        for i in 0..self.t_grid.len() {
            let ratio = self.ratios[i].map(|r| r.to_string()).unwrap_or_default();
            let doubling = self.doubling_ratios[i].map(|r| r.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.t_grid[i], self.counts[i], self.reference_volumes[i], ratio, doubling
            ));
        }
        out
    }
}

fn validated_grid(t_grid: &[f64]) -> Result<Vec<f64>> {
    for &t in t_grid {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::NonpositiveInput(format!(
                "grid scales must be positive, got {t}"
            )));
        }
    }
    let mut grid = t_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("grid entries are finite"));
    grid.dedup();
    Ok(grid)
}

fn assemble_report(
    kind: CountKind,
    reference: VolumeReference,
    grid: Vec<f64>,
    counts: Vec<u64>,
    volumes: Vec<f64>,
) -> CountReport {
    let ratios = counts
        .iter()
        .zip(&volumes)
        .map(|(&c, &v)| if v > 1e-12 { Some(c as f64 / v) } else { None })
        .collect();
    let doubling_ratios = (0..grid.len())
        .map(|i| {
            if counts[i] == 0 {
                return None;
            }
            let target = 2.0 * grid[i];
            let tol = 1e-9 * target.max(1.0);
            grid.iter()
                .position(|&t| (t - target).abs() <= tol)
                .map(|j| counts[j] as f64 / counts[i] as f64)
        })
        .collect();
    CountReport {
        kind: kind.as_str().to_string(),
        reference: reference.as_str().to_string(),
        t_grid: grid,
        counts,
        reference_volumes: volumes,
        ratios,
        doubling_ratios,
    }
}

/// Count report for an explicit euclidean body.
///
/// The analytic reference is the dilation growth T^n, so the ratio column
/// estimates the body's volume (the leading count coefficient for a
/// unit-covolume lattice).  The Monte Carlo reference instead estimates the
/// absolute volume of T * body from `mc_samples` box samples, so the ratio
/// tends to 1.
pub fn counting_report_for_body(
    body: &SetOracle,
    t_grid: &[f64],
    reference: VolumeReference,
    mc_samples: usize,
    seed: u64,
) -> Result<CountReport> {
    let n = match body.group.kind {
        GroupKind::Euclidean(n) => n,
        _ => {
            return Err(Error::GroupMismatch(format!(
                "integer-point counting needs a euclidean body, got {}",
                body.group.name
            )))
        }
    };
    let grid = validated_grid(t_grid)?;
    if grid.is_empty() {
        return Ok(assemble_report(
            CountKind::IntegerPoints,
            reference,
            grid,
            Vec::new(),
            Vec::new(),
        ));
    }
    let base_volume = match reference {
        VolumeReference::Analytic => 1.0,
        VolumeReference::MonteCarloVolume => euclidean_body_volume_mc(body, mc_samples, seed)?.0,
    };
    let counts = grid.iter().map(|&t| count_integer_points(body, t)).collect::<Result<Vec<_>>>()?;
    let volumes = grid.iter().map(|&t| base_volume * t.powi(n as i32)).collect();
    Ok(assemble_report(CountKind::IntegerPoints, reference, grid, counts, volumes))
}

/// Count report for one of the built-in families.
///
/// `integer_points` counts lattice points in dilates of the unit disk;
/// `sl2z_ball` counts SL2(Z) matrices in Frobenius norm balls.
pub fn counting_report(
    kind: CountKind,
    t_grid: &[f64],
    reference: VolumeReference,
    mc_samples: usize,
    seed: u64,
) -> Result<CountReport> {
    match kind {
        CountKind::IntegerPoints => {
            let group = builtin_group("R2")?;
            let disk = ball_oracle(&group, 1.0)?;
            counting_report_for_body(&disk, t_grid, reference, mc_samples, seed)
        }
        CountKind::Sl2zBall => {
            let grid = validated_grid(t_grid)?;
            let counts = grid.iter().map(|&t| count_sl2z_norm_ball(t)).collect::<Result<Vec<_>>>()?;
            let volumes = grid
                .iter()
                .enumerate()
                .map(|(i, &t)| match reference {
                    VolumeReference::Analytic => sl2_frobenius_ball_volume(t),
                    VolumeReference::MonteCarloVolume => {
                        let mut rng = index_rng(seed, 0xC0_0000 + i as u64);
                        let sub = rng.gen::<u64>();
                        sl2_frobenius_ball_volume_mc(t, mc_samples, sub).0
                    }
                })
                .collect();
            Ok(assemble_report(CountKind::Sl2zBall, reference, grid, counts, volumes))
        }
    }
}
