//! Measure-ratio certification of well-rounded sets: Monte Carlo estimation
//! of the two-sided fattening mu(B^{(+eps)}) and erosion mu(B^{(-eps)}),
//! boundary-tube volumes, and the fitted Lipschitz constant.
//!
//! Two evaluation modes share one sampling contract. In euclidean groups with
//! a signed distance the fattening is exactly B + B_{2eps}, so membership is
//! the threshold test sd <= +-2eps. Everywhere else membership is decided by
//! sampling perturbation pairs (u, v) from the coordinate ball: the plus side
//! asks whether some pair pulls the point into B, the minus side whether all
//! pairs keep it there. Plus and minus runs with the same seed consume the
//! same window points and the same pair stream, so their difference is free
//! of independent-sampling noise and the plus >= minus sandwich holds for
//! every individual sample, not just in expectation.

use crate::error::{Error, Result};
use crate::group::{
    ball_sample, builtin_group, haar_sample_window, window_ad_bound, CoordinateBall,
    GroupElement, GroupKind, GroupModel,
};
use crate::rng::{accumulate, Mergeable, WeightedSums, DEFAULT_SEED};
use num::rational::BigRational;
use num::Signed;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

pub const DEFAULT_EPS_GRID: [f64; 3] = [0.01, 0.02, 0.05];
pub const PERT_STUDY_GRID: [usize; 3] = [8, 32, 128];
/// Fixed probe seed for the window adjoint bound used by the margin guard.
const WINDOW_PROBE_SEED: u64 = 0x5EED;

// ---------------------------------------------------------------------------
// set oracles

/// Measurable subset of a group, described by a membership predicate, an
/// optional signed distance in the chart metric (negative inside), and a
/// chart-ball radius certifying that the set stays inside the Haar window.
#[derive(Clone)]
pub struct SetOracle {
    pub group: Arc<GroupModel>,
    pub name: String,
    pub member: Arc<dyn Fn(&GroupElement) -> bool + Send + Sync>,
    pub signed_distance: Option<Arc<dyn Fn(&GroupElement) -> f64 + Send + Sync>>,
    pub bounding_radius: f64,
}

impl fmt::Debug for SetOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SetOracle")
            .field("group", &self.group.name)
            .field("name", &self.name)
            .field("bounding_radius", &self.bounding_radius)
            .field("has_signed_distance", &self.signed_distance.is_some())
            .finish()
    }
}

/// Chart ball of the given radius around the identity.
pub fn ball_oracle(group: &Arc<GroupModel>, radius: f64) -> Result<SetOracle> {
    if !(radius > 0.0) {
        return Err(Error::NonpositiveInput(format!("ball radius {}", radius)));
    }
    let g1 = group.clone();
    let g2 = group.clone();
    Ok(SetOracle {
        group: group.clone(),
        name: format!("ball:{}", radius),
        member: Arc::new(move |el| {
            g1.log_coords(&el.mat)
                .map(|c| g1.chart_norm(&c) <= radius)
                .unwrap_or(false)
        }),
        signed_distance: Some(Arc::new(move |el| {
            g2.log_coords(&el.mat)
                .map(|c| g2.chart_norm(&c) - radius)
                .unwrap_or(f64::INFINITY)
        })),
        bounding_radius: radius,
    })
}

/// Axis-aligned box in a euclidean group, given by center and half-widths.
pub fn box_oracle(
    group: &Arc<GroupModel>,
    center: Vec<f64>,
    half_widths: Vec<f64>,
) -> Result<SetOracle> {
    let n = match group.kind {
        GroupKind::Euclidean(n) => n,
        _ => {
            return Err(Error::InvalidInput(format!(
                "box oracle requires a euclidean group, got {}",
                group.name
            )))
        }
    };
    if center.len() != n || half_widths.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "box in {} needs {} coordinates",
            group.name, n
        )));
    }
    if half_widths.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::NonpositiveInput("box half-widths".into()));
    }
    let bounding: f64 = center
        .iter()
        .zip(&half_widths)
        .map(|(c, h)| (c.abs() + h) * (c.abs() + h))
        .sum::<f64>()
        .sqrt();
    let g1 = group.clone();
    let (c1, h1) = (center.clone(), half_widths.clone());
    let g2 = group.clone();
    let (c2, h2) = (center.clone(), half_widths.clone());
    Ok(SetOracle {
        group: group.clone(),
        name: format!("box:{:?}@{:?}", half_widths, center),
        member: Arc::new(move |el| {
            let coords = g1.log_coords(&el.mat).expect("euclidean chart is global");
            coords
                .iter()
                .zip(&c1)
                .zip(&h1)
                .all(|((x, c), h)| (x - c).abs() <= *h)
        }),
        signed_distance: Some(Arc::new(move |el| {
            let coords = g2.log_coords(&el.mat).expect("euclidean chart is global");
            // exact Euclidean signed distance to a box
            let q: Vec<f64> = coords
                .iter()
                .zip(&c2)
                .zip(&h2)
                .map(|((x, c), h)| (x - c).abs() - h)
                .collect();
            let outside: f64 = q.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>().sqrt();
            let inside = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max).min(0.0);
            outside + inside
        })),
        bounding_radius: bounding,
    })
}

/// Convex polygon in euclidean(2), vertices in counterclockwise order.
pub fn polygon_oracle(group: &Arc<GroupModel>, vertices: Vec<[f64; 2]>) -> Result<SetOracle> {
    match group.kind {
        GroupKind::Euclidean(2) => {}
        _ => {
            return Err(Error::InvalidInput(format!(
                "polygon oracle requires euclidean(2), got {}",
                group.name
            )))
        }
    }
    let k = vertices.len();
    if k < 3 {
        return Err(Error::InvalidInput("polygon needs at least 3 vertices".into()));
    }
    let cross = |a: [f64; 2], b: [f64; 2]| a[0] * b[1] - a[1] * b[0];
    let mut area2 = 0.0;
    for i in 0..k {
        let p = vertices[i];
        let q = vertices[(i + 1) % k];
        let r = vertices[(i + 2) % k];
        let e1 = [q[0] - p[0], q[1] - p[1]];
        let e2 = [r[0] - q[0], r[1] - q[1]];
        if cross(e1, e2) < -1e-12 {
            return Err(Error::InvalidInput(
                "polygon must be convex with counterclockwise vertices".into(),
            ));
        }
        area2 += cross(p, q);
    }
    if area2 <= 1e-12 {
        return Err(Error::InvalidInput("polygon is degenerate".into()));
    }
    let bounding = vertices
        .iter()
        .map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt())
        .fold(0.0f64, f64::max);
    let g1 = group.clone();
    let verts1 = vertices.clone();
    let g2 = group.clone();
    let verts2 = vertices.clone();
    let inside_test = move |p: [f64; 2], verts: &[[f64; 2]]| -> bool {
        let k = verts.len();
        (0..k).all(|i| {
            let a = verts[i];
            let b = verts[(i + 1) % k];
            let e = [b[0] - a[0], b[1] - a[1]];
            let w = [p[0] - a[0], p[1] - a[1]];
            e[0] * w[1] - e[1] * w[0] >= -1e-12
        })
    };
    let inside1 = inside_test.clone();
    let inside2 = inside_test;
    Ok(SetOracle {
        group: group.clone(),
        name: format!("polygon:{}", k),
        member: Arc::new(move |el| {
            let c = g1.log_coords(&el.mat).expect("euclidean chart is global");
            inside1([c[0], c[1]], &verts1)
        }),
        signed_distance: Some(Arc::new(move |el| {
            let c = g2.log_coords(&el.mat).expect("euclidean chart is global");
            let p = [c[0], c[1]];
            let mut dist = f64::INFINITY;
            for i in 0..verts2.len() {
                let a = verts2[i];
                let b = verts2[(i + 1) % verts2.len()];
                let e = [b[0] - a[0], b[1] - a[1]];
                let w = [p[0] - a[0], p[1] - a[1]];
                let len2 = e[0] * e[0] + e[1] * e[1];
                let t = ((w[0] * e[0] + w[1] * e[1]) / len2).clamp(0.0, 1.0);
                let d = [w[0] - t * e[0], w[1] - t * e[1]];
                dist = dist.min((d[0] * d[0] + d[1] * d[1]).sqrt());
            }
            if inside2(p, &verts2) {
                -dist
            } else {
                dist
            }
        })),
        bounding_radius: bounding,
    })
}

/// The empty set.
pub fn empty_oracle(group: &Arc<GroupModel>) -> SetOracle {
    SetOracle {
        group: group.clone(),
        name: "empty".into(),
        member: Arc::new(|_| false),
        signed_distance: Some(Arc::new(|_| f64::INFINITY)),
        bounding_radius: 0.0,
    }
}

/// The whole Haar window. Useful as the trivial erosion reference; its
/// fattening necessarily exits the window, so plus-estimates reject it.
pub fn window_oracle(group: &Arc<GroupModel>) -> Result<SetOracle> {
    let w = group
        .haar_window
        .as_ref()
        .ok_or_else(|| Error::NoWindow(group.name.clone()))?;
    Ok(SetOracle {
        group: group.clone(),
        name: "window".into(),
        member: Arc::new(|_| true),
        signed_distance: Some(Arc::new(|_| f64::NEG_INFINITY)),
        bounding_radius: w.inradius_chart,
    })
}

/// Intersection of two oracles over the same group. The signed distance max
/// is exact inside and a lower bound outside, so it is only attached when
/// both parts carry one and the caller opts in to the approximation.
pub fn intersection_oracle(a: &SetOracle, b: &SetOracle) -> Result<SetOracle> {
    if a.group.name != b.group.name {
        return Err(Error::GroupMismatch(format!("{} vs {}", a.group.name, b.group.name)));
    }
    let ma = a.member.clone();
    let mb = b.member.clone();
    let sd = match (&a.signed_distance, &b.signed_distance) {
        (Some(da), Some(db)) => {
            let (da, db) = (da.clone(), db.clone());
            // max of signed distances: exact for membership thresholds at 0,
            // conservative (too small) outside corners
            Some(Arc::new(move |el: &GroupElement| da(el).max(db(el)))
                as Arc<dyn Fn(&GroupElement) -> f64 + Send + Sync>)
        }
        _ => None,
    };
    Ok(SetOracle {
        group: a.group.clone(),
        name: format!("({})&({})", a.name, b.name),
        member: Arc::new(move |el| ma(el) && mb(el)),
        signed_distance: sd,
        bounding_radius: a.bounding_radius.min(b.bounding_radius),
    })
}

/// Radius of the fiber disk of the shipped fibered family at base point z.
pub fn fibered_disk_radius(z: f64) -> f64 {
    1.0 + 0.1 * z.sin()
}

/// The shipped fibered family as one set in the product group R1xR2: base
/// interval |z| <= 1, fiber over z a disk of radius 1 + 0.1 sin z.
pub fn fibered_disk_oracle() -> Result<SetOracle> {
    let group = builtin_group("R1xR2")?;
    let g1 = group.clone();
    Ok(SetOracle {
        group: group.clone(),
        name: "fibered-disk".into(),
        member: Arc::new(move |el| {
            let c = g1.log_coords(&el.mat).expect("euclidean charts are global");
            let (z, x, y) = (c[0], c[1], c[2]);
            let r = fibered_disk_radius(z);
            z.abs() <= 1.0 && x * x + y * y <= r * r
        }),
        signed_distance: None,
        // chart norm on the product is the sup of component norms
        bounding_radius: 1.1,
    })
}

/// Parse a named oracle: "disk", "ball:R", "square", "square:H",
/// "box:h1,h2,...", "polygon:x1,y1;x2,y2;...", "window", "empty", "fibered".
pub fn named_oracle(group: &Arc<GroupModel>, spec: &str) -> Result<SetOracle> {
    let (head, arg) = match spec.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (spec, None),
    };
    let parse_f64 = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("bad number '{}' in set spec", s)))
    };
    match head {
        "disk" | "ball" => {
            let r = match arg {
                Some(a) => parse_f64(a)?,
                None => 1.0,
            };
            ball_oracle(group, r)
        }
        "square" => {
            let h = match arg {
                Some(a) => parse_f64(a)?,
                None => 1.0,
            };
            let n = match group.kind {
                GroupKind::Euclidean(n) => n,
                _ => {
                    return Err(Error::InvalidInput(
                        "square oracle requires a euclidean group".into(),
                    ))
                }
            };
            box_oracle(group, vec![0.0; n], vec![h; n])
        }
        "box" => {
            let a = arg.ok_or_else(|| Error::InvalidInput("box needs half-widths".into()))?;
            let hw: Result<Vec<f64>> = a.split(',').map(parse_f64).collect();
            let hw = hw?;
            let n = hw.len();
            box_oracle(group, vec![0.0; n], hw)
        }
        "polygon" => {
            let a = arg.ok_or_else(|| Error::InvalidInput("polygon needs vertices".into()))?;
            let mut verts = Vec::new();
            for pair in a.split(';') {
                let (x, y) = pair
                    .split_once(',')
                    .ok_or_else(|| Error::InvalidInput(format!("bad vertex '{}'", pair)))?;
                verts.push([parse_f64(x)?, parse_f64(y)?]);
            }
            polygon_oracle(group, verts)
        }
        "window" => window_oracle(group),
        "empty" => Ok(empty_oracle(group)),
        "fibered" => {
            let oracle = fibered_disk_oracle()?;
            if oracle.group.name != group.name {
                return Err(Error::GroupMismatch(format!(
                    "the fibered set lives in {}, not {}",
                    oracle.group.name, group.name
                )));
            }
            Ok(oracle)
        }
        _ => Err(Error::InvalidInput(format!("unknown set spec '{}'", spec))),
    }
}

// ---------------------------------------------------------------------------
// estimates

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    Auto,
    Sampled,
    Exact,
}

fn exact_mode_available(oracle: &SetOracle) -> bool {
    matches!(oracle.group.kind, GroupKind::Euclidean(_)) && oracle.signed_distance.is_some()
}

fn resolve_mode(oracle: &SetOracle, choice: ModeChoice) -> Result<bool> {
    match choice {
        ModeChoice::Auto => Ok(exact_mode_available(oracle)),
        ModeChoice::Sampled => Ok(false),
        ModeChoice::Exact => {
            if exact_mode_available(oracle) {
                Ok(true)
            } else {
                Err(Error::InvalidInput(format!(
                    "exact mode needs a euclidean group and a signed distance; '{}' in {} has neither or only one",
                    oracle.name, oracle.group.name
                )))
            }
        }
    }
}

fn validate_eps(group: &GroupModel, eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {}", eps)));
    }
    if eps > group.epsilon_chart() {
        return Err(Error::EpsilonTooLarge(format!(
            "epsilon {} exceeds the chart radius {} of {}",
            eps,
            group.epsilon_chart(),
            group.name
        )));
    }
    Ok(())
}

/// Fattened sets must stay inside the window: the oracle's bounding radius
/// plus the conjugation-inflated perturbation reach may not exceed the
/// window inradius.
fn window_margin_check(oracle: &SetOracle, eps: f64) -> Result<()> {
    let w = oracle
        .group
        .haar_window
        .as_ref()
        .ok_or_else(|| Error::NoWindow(oracle.group.name.clone()))?;
    if w.inradius_chart.is_infinite() {
        return Ok(());
    }
    let ad = window_ad_bound(&oracle.group, WINDOW_PROBE_SEED);
    let reach = oracle.bounding_radius + 2.0 * eps * (1.0 + ad);
    if reach > w.inradius_chart {
        return Err(Error::WindowTooSmall(format!(
            "set '{}' fattened by eps {} reaches {:.4} in chart coordinates but the window inradius is {:.4}",
            oracle.name, eps, reach, w.inradius_chart
        )));
    }
    Ok(())
}

fn decide_sampled(
    oracle: &SetOracle,
    g: &GroupElement,
    ball: &CoordinateBall,
    n_pert: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
    side: Side,
) -> bool {
    for _ in 0..n_pert {
        let u = ball_sample(ball, rng);
        let v = ball_sample(ball, rng);
        let moved = u.inv().mul(g).mul(&v.inv());
        let inside = (oracle.member)(&moved);
        match side {
            Side::Plus => {
                if inside {
                    return true;
                }
            }
            Side::Minus => {
                if !inside {
                    return false;
                }
            }
        }
    }
    side == Side::Minus
}

fn estimate_side(
    oracle: &SetOracle,
    eps: f64,
    n_points: usize,
    n_pert: usize,
    seed: u64,
    side: Side,
    exact: bool,
) -> Result<Estimate> {
    validate_eps(&oracle.group, eps)?;
    if n_points == 0 {
        return Err(Error::InvalidInput("need at least one sample point".into()));
    }
    if !exact && n_pert == 0 {
        return Err(Error::InvalidInput("sampled mode needs at least one perturbation pair".into()));
    }
    let window = oracle
        .group
        .haar_window
        .as_ref()
        .ok_or_else(|| Error::NoWindow(oracle.group.name.clone()))?;
    if side == Side::Plus {
        window_margin_check(oracle, eps)?;
    }
    let ball = if exact {
        None
    } else {
        Some(CoordinateBall::new(oracle.group.clone(), eps)?)
    };
    let group = oracle.group.clone();
    let sums = accumulate(n_points, seed, WeightedSums::default(), |acc, rng| {
        let (g, w) = haar_sample_window(&group, rng).expect("window presence checked above");
        let inside = match (&oracle.signed_distance, exact) {
            (Some(sd), true) => {
                let d = sd(&g);
                match side {
                    Side::Plus => d <= 2.0 * eps,
                    Side::Minus => d <= -2.0 * eps,
                }
            }
            _ => decide_sampled(oracle, &g, ball.as_ref().expect("sampled mode"), n_pert, rng, side),
        };
        acc.push(if inside { w } else { 0.0 });
    });
    let (value, stderr) = sums.estimate(window.proposal_volume);
    Ok(Estimate { value, stderr })
}

/// Volume of the two-sided eps-fattening O_eps B O_eps.
pub fn estimate_plus(
    oracle: &SetOracle,
    eps: f64,
    n_points: usize,
    n_pert: usize,
    seed: u64,
) -> Result<Estimate> {
    estimate_side(oracle, eps, n_points, n_pert, seed, Side::Plus, exact_mode_available(oracle))
}

/// Volume of the two-sided eps-erosion, the intersection of all uBv.
pub fn estimate_minus(
    oracle: &SetOracle,
    eps: f64,
    n_points: usize,
    n_pert: usize,
    seed: u64,
) -> Result<Estimate> {
    estimate_side(oracle, eps, n_points, n_pert, seed, Side::Minus, exact_mode_available(oracle))
}

/// Plain volume of B itself, sharing the window point stream of the
/// plus/minus estimators for pointwise comparability.
pub fn estimate_member(oracle: &SetOracle, n_points: usize, seed: u64) -> Result<Estimate> {
    if n_points == 0 {
        return Err(Error::InvalidInput("need at least one sample point".into()));
    }
    let window = oracle
        .group
        .haar_window
        .as_ref()
        .ok_or_else(|| Error::NoWindow(oracle.group.name.clone()))?;
    let group = oracle.group.clone();
    let sums = accumulate(n_points, seed, WeightedSums::default(), |acc, rng| {
        let (g, w) = haar_sample_window(&group, rng).expect("window presence checked above");
        acc.push(if (oracle.member)(&g) { w } else { 0.0 });
    });
    let (value, stderr) = sums.estimate(window.proposal_volume);
    Ok(Estimate { value, stderr })
}

/// Volume of the boundary tube B^{(+eps)} \ B^{(-eps)}: the difference of the
/// two estimates with combined standard error.
pub fn boundary_tube(
    oracle: &SetOracle,
    eps: f64,
    n_points: usize,
    n_pert: usize,
    seed: u64,
) -> Result<Estimate> {
    let exact = exact_mode_available(oracle);
    let plus = estimate_side(oracle, eps, n_points, n_pert, seed, Side::Plus, exact)?;
    let minus = estimate_side(oracle, eps, n_points, n_pert, seed, Side::Minus, exact)?;
    Ok(Estimate {
        value: plus.value - minus.value,
        stderr: (plus.stderr * plus.stderr + minus.stderr * minus.stderr).sqrt(),
    })
}

#[derive(Clone, Default)]
struct TubeCounts {
    agree: usize,
    band: usize,
    disagree: usize,
}

impl Mergeable for TubeCounts {
    fn merge(&mut self, other: Self) {
        self.agree += other.agree;
        self.band += other.band;
        self.disagree += other.disagree;
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TubeAgreement {
    pub total: usize,
    pub agreements: usize,
    pub band_excluded: usize,
    pub disagreements: usize,
}

/// Pointwise check of the tube identity in exact euclidean mode: for every
/// window sample, indicator(plus) - indicator(minus) must equal
/// indicator(|sd| <= 2 eps), excluding a 1e-9 band around the thresholds.
pub fn tube_pointwise_check(
    oracle: &SetOracle,
    eps: f64,
    n_points: usize,
    seed: u64,
) -> Result<TubeAgreement> {
    validate_eps(&oracle.group, eps)?;
    if !exact_mode_available(oracle) {
        return Err(Error::InvalidInput(
            "the pointwise tube identity needs exact euclidean mode".into(),
        ));
    }
    window_margin_check(oracle, eps)?;
    let sd = oracle.signed_distance.clone().expect("checked above");
    let group = oracle.group.clone();
    let counts = accumulate(n_points, seed, TubeCounts::default(), move |acc, rng| {
        let (g, _) = haar_sample_window(&group, rng).expect("window presence checked above");
        let d = sd(&g);
        let plus = d <= 2.0 * eps;
        let minus = d <= -2.0 * eps;
        let tube = d.abs() <= 2.0 * eps;
        let lhs = (plus as i32) - (minus as i32);
        if lhs == tube as i32 {
            acc.agree += 1;
        } else if (d.abs() - 2.0 * eps).abs() <= 1e-9 {
            acc.band += 1;
        } else {
            acc.disagree += 1;
        }
    });
    Ok(TubeAgreement {
        total: n_points,
        agreements: counts.agree,
        band_excluded: counts.band,
        disagreements: counts.disagree,
    })
}

// ---------------------------------------------------------------------------
// fitting

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitRow {
    pub eps: f64,
    pub vol_plus: Estimate,
    pub vol_minus: Estimate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitResult {
    pub fitted_c: f64,
    pub fitted_c_stderr: f64,
    pub per_eps_slopes: Vec<f64>,
    pub max_slope: f64,
    pub fit_method: String,
}

/// Fit the Lipschitz constant from (eps, vol_plus, vol_minus) rows. The
/// reported constant is the ratio slope at the smallest epsilon, where the
/// O(eps^2) curvature of the exact ratio contributes least; the per-epsilon
/// slopes and their maximum are carried alongside so the uniform-bound view
/// stays available. The stderr treats plus and minus as independent, which
/// overstates the error when both sides share a sample stream.
pub fn fit_lipschitz(rows: &[FitRow]) -> Result<FitResult> {
    if rows.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "fitting needs at least 2 grid points, got {}",
            rows.len()
        )));
    }
    let mut sorted: Vec<&FitRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.eps.partial_cmp(&b.eps).expect("finite grid"));
    for row in &sorted {
        if row.vol_minus.value <= 2.0 * row.vol_minus.stderr {
            return Err(Error::DegenerateMinus(format!(
                "vol_minus at eps {} is {} +- {}, indistinguishable from zero",
                row.eps, row.vol_minus.value, row.vol_minus.stderr
            )));
        }
    }
    let slopes: Vec<f64> = sorted
        .iter()
        .map(|r| (r.vol_plus.value / r.vol_minus.value - 1.0) / r.eps)
        .collect();
    let first = sorted[0];
    let ratio = first.vol_plus.value / first.vol_minus.value;
    let rel_p = first.vol_plus.stderr / first.vol_plus.value.max(f64::MIN_POSITIVE);
    let rel_m = first.vol_minus.stderr / first.vol_minus.value;
    let ratio_stderr = ratio * (rel_p * rel_p + rel_m * rel_m).sqrt();
    Ok(FitResult {
        fitted_c: slopes[0].max(0.0),
        fitted_c_stderr: ratio_stderr / first.eps,
        max_slope: slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        per_eps_slopes: slopes,
        fit_method: "slope_at_smallest_eps".into(),
    })
}

// ---------------------------------------------------------------------------
// the full report

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleCounts {
    pub n_points: usize,
    pub n_pert: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PertStudyRow {
    pub n_pert: usize,
    pub vol_plus: Vec<Estimate>,
    pub vol_minus: Vec<Estimate>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WrReport {
    pub group: String,
    pub set: String,
    pub mode: String,
    pub bias: String,
    pub epsilons: Vec<f64>,
    #[serde(rename = "T_values")]
    pub t_values: Vec<f64>,
    pub vol_plus: Vec<Estimate>,
    pub vol_minus: Vec<Estimate>,
    pub ratios: Vec<f64>,
    pub ratio_stderrs: Vec<f64>,
    #[serde(rename = "fitted_C")]
    pub fitted_c: f64,
    #[serde(rename = "fitted_C_stderr")]
    pub fitted_c_stderr: f64,
    pub fit_method: String,
    pub per_eps_slopes: Vec<f64>,
    pub max_slope: f64,
    pub sample_counts: SampleCounts,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pert_study: Option<Vec<PertStudyRow>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertifyParams {
    pub epsilons: Vec<f64>,
    pub n_points: usize,
    pub n_pert: usize,
    pub seed: u64,
    pub mode: ModeChoice,
    pub pert_study: bool,
}

impl Default for CertifyParams {
    fn default() -> Self {
        CertifyParams {
            epsilons: DEFAULT_EPS_GRID.to_vec(),
            n_points: 20_000,
            n_pert: 32,
            seed: DEFAULT_SEED,
            mode: ModeChoice::Auto,
            pert_study: false,
        }
    }
}

/// Run the full certification pipeline: estimates on the epsilon grid,
/// per-cell ratios, and the fitted Lipschitz constant.
pub fn certify(oracle: &SetOracle, params: &CertifyParams) -> Result<WrReport> {
    let mut eps_grid = params.epsilons.clone();
    if eps_grid.is_empty() {
        return Err(Error::InvalidInput("epsilon grid is empty".into()));
    }
    for &e in &eps_grid {
        validate_eps(&oracle.group, e)?;
    }
    eps_grid.sort_by(|a, b| a.partial_cmp(b).expect("validated finite above"));
    eps_grid.dedup();
    let exact = resolve_mode(oracle, params.mode)?;
    let mut vol_plus = Vec::new();
    let mut vol_minus = Vec::new();
    let mut rows = Vec::new();
    for &eps in &eps_grid {
        let p = estimate_side(oracle, eps, params.n_points, params.n_pert, params.seed, Side::Plus, exact)?;
        let m = estimate_side(oracle, eps, params.n_points, params.n_pert, params.seed, Side::Minus, exact)?;
        rows.push(FitRow { eps, vol_plus: p, vol_minus: m });
        vol_plus.push(p);
        vol_minus.push(m);
    }
    let fit = fit_lipschitz(&rows)?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.vol_plus.value / r.vol_minus.value).collect();
    let ratio_stderrs: Vec<f64> = rows
        .iter()
        .map(|r| {
            let ratio = r.vol_plus.value / r.vol_minus.value;
            let rel_p = r.vol_plus.stderr / r.vol_plus.value.max(f64::MIN_POSITIVE);
            let rel_m = r.vol_minus.stderr / r.vol_minus.value;
            ratio * (rel_p * rel_p + rel_m * rel_m).sqrt()
        })
        .collect();
    let pert_study = if !exact && params.pert_study {
        let mut study = Vec::new();
        for &np in &PERT_STUDY_GRID {
            let mut sp = Vec::new();
            let mut sm = Vec::new();
            for &eps in &eps_grid {
                sp.push(estimate_side(oracle, eps, params.n_points, np, params.seed, Side::Plus, false)?);
                sm.push(estimate_side(oracle, eps, params.n_points, np, params.seed, Side::Minus, false)?);
            }
            study.push(PertStudyRow { n_pert: np, vol_plus: sp, vol_minus: sm });
        }
        Some(study)
    } else {
        None
    };
    Ok(WrReport {
        group: oracle.group.name.clone(),
        set: oracle.name.clone(),
        mode: if exact { "exact_euclidean".into() } else { "sampled".into() },
        bias: if exact {
            "none: membership by exact threshold on the signed distance".into()
        } else {
            "plus under-covers and minus over-covers: finite perturbation sample".into()
        },
        epsilons: eps_grid,
        t_values: vec![1.0],
        vol_plus,
        vol_minus,
        ratios,
        ratio_stderrs,
        fitted_c: fit.fitted_c,
        fitted_c_stderr: fit.fitted_c_stderr,
        fit_method: fit.fit_method,
        per_eps_slopes: fit.per_eps_slopes,
        max_slope: fit.max_slope,
        sample_counts: SampleCounts {
            n_points: params.n_points,
            n_pert: if exact { 0 } else { params.n_pert },
        },
        seed: params.seed,
        pert_study,
    })
}

// ---------------------------------------------------------------------------
// exact constants

fn require_positive(x: &BigRational, what: &str) -> Result<()> {
    if x.is_positive() {
        Ok(())
    } else {
        Err(Error::NonpositiveInput(format!("{} must be positive, got {}", what, x)))
    }
}

/// Lipschitz constant and validity radius of a single set from its tube
/// constant c and volume: C = 2c/mu, eps0 = mu/(2c).
pub fn single_set_constant(c: &BigRational, mu_b: &BigRational) -> Result<(BigRational, BigRational)> {
    require_positive(c, "tube constant c")?;
    require_positive(mu_b, "volume mu(B)")?;
    let two = BigRational::from_integer(2.into());
    let big_c = &two * c / mu_b;
    let eps0 = big_c.recip();
    Ok((big_c, eps0))
}

/// Lipschitz constants of intersection and union:
/// 2 max{C, C'} (mu + mu') / mu(meet or join).
pub fn combine_sets(
    c: &BigRational,
    c_prime: &BigRational,
    mu: &BigRational,
    mu_prime: &BigRational,
    mu_meet: &BigRational,
    mu_join: &BigRational,
) -> Result<(BigRational, BigRational)> {
    require_positive(c, "C")?;
    require_positive(c_prime, "C'")?;
    require_positive(mu, "mu(B)")?;
    require_positive(mu_prime, "mu(B')")?;
    if !mu_meet.is_positive() {
        return Err(Error::EmptyIntersection(format!("mu(meet) = {}", mu_meet)));
    }
    require_positive(mu_join, "mu(join)")?;
    let two = BigRational::from_integer(2.into());
    let cmax = if c >= c_prime { c.clone() } else { c_prime.clone() };
    let numerator = two * cmax * (mu + mu_prime);
    Ok((&numerator / mu_meet, &numerator / mu_join))
}

/// Exact rational from a float (floats are dyadic rationals).
pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x)
        .ok_or_else(|| Error::InvalidInput(format!("{} has no rational value", x)))
}

pub fn single_set_constant_f64(c: f64, mu_b: f64) -> Result<(f64, f64)> {
    let (big_c, eps0) = single_set_constant(&rational_from_f64(c)?, &rational_from_f64(mu_b)?)?;
    Ok((rational_to_f64(&big_c), rational_to_f64(&eps0)))
}

pub fn rational_to_f64(x: &BigRational) -> f64 {
    use num::ToPrimitive;
    x.to_f64().expect("rational magnitudes stay in f64 range here")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn r2() -> Arc<GroupModel> {
        builtin_group("R2").unwrap()
    }

    fn within(est: &Estimate, target: f64, k: f64) -> bool {
        (est.value - target).abs() <= k * est.stderr.max(1e-12)
    }

    #[test]
    fn empty_set_estimates_are_zero() {
        let o = empty_oracle(&r2());
        let p = estimate_plus(&o, 0.05, 5_000, 8, 1).unwrap();
        assert_eq!(p.value, 0.0);
        assert_eq!(p.stderr, 0.0);
    }

    #[test]
    fn disk_exact_estimates_match_analytic_areas() {
        let o = ball_oracle(&r2(), 1.0).unwrap();
        let eps = 0.05;
        let p = estimate_plus(&o, eps, 50_000, 0, 2).unwrap();
        let m = estimate_minus(&o, eps, 50_000, 0, 2).unwrap();
        let want_p = PI * 1.1 * 1.1;
        let want_m = PI * 0.9 * 0.9;
        assert!(within(&p, want_p, 3.0), "plus {:?} vs {}", p, want_p);
        assert!(within(&m, want_m, 3.0), "minus {:?} vs {}", m, want_m);
    }

    #[test]
    fn square_plus_matches_minkowski_area() {
        let o = named_oracle(&r2(), "square").unwrap(); // side 2
        let eps = 0.05;
        let p = estimate_plus(&o, eps, 80_000, 0, 3).unwrap();
        // Minkowski sum with a disk of radius 2 eps
        let want = 4.0 + 8.0 * (2.0 * eps) + PI * (2.0 * eps) * (2.0 * eps);
        assert!(within(&p, want, 3.0), "plus {:?} vs {}", p, want);
    }

    #[test]
    fn erosion_is_empty_once_2eps_swallows_the_radius() {
        let o = ball_oracle(&r2(), 1.0).unwrap();
        let m = estimate_minus(&o, 0.6, 5_000, 0, 4).unwrap();
        assert_eq!(m.value, 0.0);
    }

    #[test]
    fn whole_window_erosion_returns_window_volume() {
        let o = window_oracle(&r2()).unwrap();
        let m = estimate_minus(&o, 0.01, 2_000, 8, 5).unwrap();
        assert_eq!(m.value, 16.0);
        // the sampled route agrees: all perturbed points stay members
        let ms = estimate_side(&o, 0.01, 2_000, 8, 5, Side::Minus, false).unwrap();
        assert_eq!(ms.value, 16.0);
    }

    #[test]
    fn window_fattening_is_rejected_by_the_margin_guard() {
        let o = window_oracle(&r2()).unwrap();
        assert!(matches!(
            estimate_plus(&o, 0.01, 1_000, 8, 6),
            Err(Error::WindowTooSmall(_))
        ));
        let big = ball_oracle(&r2(), 1.9).unwrap();
        assert!(matches!(
            estimate_plus(&big, 0.05, 1_000, 8, 6),
            Err(Error::WindowTooSmall(_))
        ));
    }

    #[test]
    fn tube_of_disk_is_the_annulus_area() {
        let o = ball_oracle(&r2(), 1.0).unwrap();
        let t = boundary_tube(&o, 0.05, 80_000, 0, 7).unwrap();
        let want = PI * (1.1f64.powi(2) - 0.9f64.powi(2));
        assert!(within(&t, want, 3.0), "tube {:?} vs {}", t, want);
    }

    #[test]
    fn tube_of_unit_square_matches_expansion() {
        let o = box_oracle(&r2(), vec![0.0, 0.0], vec![0.5, 0.5]).unwrap();
        let eps = 0.01;
        let t = boundary_tube(&o, eps, 80_000, 0, 8).unwrap();
        let r = 2.0 * eps;
        let outer = 1.0 + 4.0 * r + PI * r * r;
        let inner = (1.0 - 2.0 * r) * (1.0 - 2.0 * r);
        assert!(within(&t, outer - inner, 3.0), "tube {:?} vs {}", t, outer - inner);
    }

    #[test]
    fn tube_identity_holds_pointwise() {
        let o = named_oracle(&r2(), "square").unwrap();
        let agree = tube_pointwise_check(&o, 0.05, 10_000, 9).unwrap();
        assert_eq!(agree.disagreements, 0);
        assert_eq!(agree.agreements + agree.band_excluded, agree.total);
    }

    #[test]
    fn estimates_are_monotone_and_sandwich_the_set() {
        let o = ball_oracle(&r2(), 1.0).unwrap();
        let n = 20_000;
        let seed = 10;
        let raw = estimate_member(&o, n, seed).unwrap();
        let mut last_plus = 0.0;
        let mut last_minus = f64::INFINITY;
        for &eps in &[0.01, 0.02, 0.05] {
            let p = estimate_plus(&o, eps, n, 0, seed).unwrap();
            let m = estimate_minus(&o, eps, n, 0, seed).unwrap();
            // same seed, same window points: these hold exactly, not just
            // within noise
            assert!(p.value >= last_plus);
            assert!(m.value <= last_minus);
            assert!(m.value <= raw.value && raw.value <= p.value);
            last_plus = p.value;
            last_minus = m.value;
        }
    }

    #[test]
    fn sampled_mode_brackets_exact_mode_pointwise() {
        let o = ball_oracle(&r2(), 1.0).unwrap();
        let (eps, n, np, seed) = (0.05, 10_000, 16, 11);
        let p_exact = estimate_side(&o, eps, n, np, seed, Side::Plus, true).unwrap();
        let p_sampled = estimate_side(&o, eps, n, np, seed, Side::Plus, false).unwrap();
        let m_exact = estimate_side(&o, eps, n, np, seed, Side::Minus, true).unwrap();
        let m_sampled = estimate_side(&o, eps, n, np, seed, Side::Minus, false).unwrap();
        // finite perturbation sampling under-covers the fattening and
        // over-covers the erosion, sample by sample
        assert!(p_sampled.value <= p_exact.value);
        assert!(m_sampled.value >= m_exact.value);
    }

    #[test]
    fn more_perturbation_pairs_tighten_sampled_estimates() {
        let o = ball_oracle(&r2(), 1.0).unwrap();
        let (eps, n, seed) = (0.05, 5_000, 12);
        let mut prev_p = 0.0;
        let mut prev_m = f64::INFINITY;
        for &np in &PERT_STUDY_GRID {
            let p = estimate_side(&o, eps, n, np, seed, Side::Plus, false).unwrap();
            let m = estimate_side(&o, eps, n, np, seed, Side::Minus, false).unwrap();
            // pair draws are a prefix of the longer run, so growth is pointwise
            assert!(p.value >= prev_p, "plus not monotone in N_pert");
            assert!(m.value <= prev_m, "minus not monotone in N_pert");
            prev_p = p.value;
            prev_m = m.value;
        }
    }

    #[test]
    fn fit_recovers_synthetic_slopes() {
        let tight = |v: f64| Estimate { value: v, stderr: 1e-9 };
        let rows: Vec<FitRow> = [0.01, 0.02, 0.05]
            .iter()
            .map(|&eps| FitRow {
                eps,
                vol_plus: tight(1.0 + 3.0 * eps),
                vol_minus: tight(1.0),
            })
            .collect();
        let fit = fit_lipschitz(&rows).unwrap();
        assert!((fit.fitted_c - 3.0).abs() < 1e-6);
        assert!((fit.max_slope - 3.0).abs() < 1e-6);
        let flat: Vec<FitRow> = [0.01, 0.02]
            .iter()
            .map(|&eps| FitRow { eps, vol_plus: tight(1.0), vol_minus: tight(1.0) })
            .collect();
        assert_eq!(fit_lipschitz(&flat).unwrap().fitted_c, 0.0);
    }

    #[test]
    fn fit_rejects_degenerate_minus() {
        let rows = vec![
            FitRow {
                eps: 0.01,
                vol_plus: Estimate { value: 1.0, stderr: 0.001 },
                vol_minus: Estimate { value: 0.001, stderr: 0.01 },
            },
            FitRow {
                eps: 0.02,
                vol_plus: Estimate { value: 1.0, stderr: 0.001 },
                vol_minus: Estimate { value: 1.0, stderr: 0.001 },
            },
        ];
        assert!(matches!(fit_lipschitz(&rows), Err(Error::DegenerateMinus(_))));
        assert!(matches!(
            fit_lipschitz(&rows[..1]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn disk_certificate_lands_near_eight() {
        let o = ball_oracle(&r2(), 1.0).unwrap();
        let params = CertifyParams { n_points: 60_000, seed: 13, ..Default::default() };
        let report = certify(&o, &params).unwrap();
        assert_eq!(report.mode, "exact_euclidean");
        assert!(
            (report.fitted_c - 8.0).abs() <= 0.15 * 8.0,
            "fitted_C = {}",
            report.fitted_c
        );
        // the uniform max-slope view sits above the small-eps slope
        assert!(report.max_slope >= report.fitted_c);
        for i in 0..report.epsilons.len() {
            assert!(report.ratios[i] >= 1.0);
            assert!(report.vol_plus[i].value >= report.vol_minus[i].value);
        }
    }

    #[test]
    fn certify_is_deterministic() {
        let o = ball_oracle(&r2(), 1.0).unwrap();
        let params = CertifyParams { n_points: 5_000, seed: 14, ..Default::default() };
        let a = serde_json::to_string(&certify(&o, &params).unwrap()).unwrap();
        let b = serde_json::to_string(&certify(&o, &params).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_mode_refused_without_signed_distance_or_euclidean_group() {
        let sl2 = builtin_group("SL2").unwrap();
        let o = ball_oracle(&sl2, 0.3).unwrap();
        let params = CertifyParams { mode: ModeChoice::Exact, ..Default::default() };
        assert!(matches!(certify(&o, &params), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn sampled_certificate_for_chart_ball_in_so2() {
        let so2 = builtin_group("SO2").unwrap();
        let o = ball_oracle(&so2, 0.3).unwrap();
        let params = CertifyParams {
            epsilons: vec![0.02, 0.05],
            n_points: 4_000,
            n_pert: 32,
            seed: 15,
            mode: ModeChoice::Auto,
            pert_study: true,
        };
        let report = certify(&o, &params).unwrap();
        assert_eq!(report.mode, "sampled");
        assert!(report.fitted_c >= 0.0);
        let study = report.pert_study.as_ref().unwrap();
        assert_eq!(study.len(), PERT_STUDY_GRID.len());
        // richer perturbation sampling widens plus and shrinks minus
        for w in study.windows(2) {
            for i in 0..report.epsilons.len() {
                assert!(w[1].vol_plus[i].value >= w[0].vol_plus[i].value);
                assert!(w[1].vol_minus[i].value <= w[0].vol_minus[i].value);
            }
        }
    }

    #[test]
    fn single_set_formula_instantiations() {
        let q = |n: i64, d: i64| {
            BigRational::new(n.into(), d.into())
        };
        let (c, eps0) = single_set_constant(&q(1, 1), &q(2, 1)).unwrap();
        assert_eq!(c, q(1, 1));
        assert_eq!(eps0, q(1, 1));
        let (c, eps0) = single_set_constant(&q(1, 1), &q(1, 1)).unwrap();
        assert_eq!(c, q(2, 1));
        assert_eq!(eps0, q(1, 2));
        assert!(matches!(
            single_set_constant(&q(0, 1), &q(1, 1)),
            Err(Error::NonpositiveInput(_))
        ));
    }

    #[test]
    fn combined_set_formula_instantiations() {
        let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        let one = q(1, 1);
        let (meet, join) = combine_sets(&one, &one, &one, &one, &q(1, 2), &q(3, 2)).unwrap();
        assert_eq!(meet, q(8, 1));
        assert_eq!(join, q(8, 3));
        // identical sets: everything collapses to 4C
        let (meet, join) = combine_sets(&q(3, 1), &q(3, 1), &one, &one, &one, &one).unwrap();
        assert_eq!(meet, q(12, 1));
        assert_eq!(join, q(12, 1));
        assert!(matches!(
            combine_sets(&one, &one, &one, &one, &q(0, 1), &one),
            Err(Error::EmptyIntersection(_))
        ));
    }

    #[test]
    fn intersection_of_shifted_squares_respects_combined_bound() {
        let g = r2();
        let a = box_oracle(&g, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let b = box_oracle(&g, vec![1.0, 0.0], vec![1.0, 1.0]).unwrap();
        let params = CertifyParams { n_points: 40_000, seed: 16, ..Default::default() };
        let ca = certify(&a, &params).unwrap().fitted_c;
        // the [0,1] x [-1,1] overlap is a box with an exact signed distance
        let meet = box_oracle(&g, vec![0.5, 0.0], vec![0.5, 1.0]).unwrap();
        let c_meet = certify(&meet, &params).unwrap().fitted_c;
        // measures: 4, 4, 2, 6
        let (bound, _) = combine_sets(
            &rational_from_f64(ca).unwrap(),
            &rational_from_f64(ca).unwrap(),
            &rational_from_f64(4.0).unwrap(),
            &rational_from_f64(4.0).unwrap(),
            &rational_from_f64(2.0).unwrap(),
            &rational_from_f64(6.0).unwrap(),
        )
        .unwrap();
        assert!(
            c_meet <= rational_to_f64(&bound),
            "fitted {} vs bound {}",
            c_meet,
            rational_to_f64(&bound)
        );
        // the intersection oracle itself agrees with the explicit box
        let both = intersection_oracle(&a, &b).unwrap();
        let va = estimate_member(&both, 20_000, 17).unwrap();
        let vb = estimate_member(&meet, 20_000, 17).unwrap();
        assert_eq!(va.value, vb.value);
    }

    #[test]
    fn oracle_sign_conventions_agree_with_membership() {
        let g = r2();
        for oracle in [
            ball_oracle(&g, 1.0).unwrap(),
            box_oracle(&g, vec![0.2, -0.1], vec![0.7, 1.2]).unwrap(),
            polygon_oracle(&g, vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]).unwrap(),
        ] {
            let sd = oracle.signed_distance.clone().unwrap();
            let group = oracle.group.clone();
            let checks = accumulate(5_000, 18, WeightedSums::default(), |acc, rng| {
                let (el, _) = haar_sample_window(&group, rng).unwrap();
                let d = sd(&el);
                if d.abs() > 1e-9 {
                    let agree = (d < 0.0) == (oracle.member)(&el);
                    acc.push(if agree { 0.0 } else { 1.0 });
                }
            });
            assert_eq!(checks.sum, 0.0, "sign mismatch for {}", oracle.name);
        }
    }

    #[test]
    fn polygon_rejects_nonconvex_input() {
        let g = r2();
        let bad = vec![[0.0, 0.0], [2.0, 0.0], [1.0, 0.2], [0.0, 2.0]];
        assert!(polygon_oracle(&g, bad).is_err());
    }

    #[test]
    fn fibered_oracle_membership_profile() {
        let o = fibered_disk_oracle().unwrap();
        assert_eq!(o.group.name, "R1xR2");
        let id = o.group.identity();
        assert!((o.member)(&id));
        // outside the base interval
        let far = o.group.exp_coords(&[1.5, 0.0, 0.0]).unwrap();
        assert!(!(o.member)(&far));
        // radius varies with the base point: at z = -pi/2 the fiber is lean
        let lean = o.group.exp_coords(&[-1.0, 0.95, 0.0]).unwrap();
        let wide = o.group.exp_coords(&[1.0, 0.95, 0.0]).unwrap();
        assert!(!(o.member)(&lean), "radius at z=-1 is {}", fibered_disk_radius(-1.0));
        assert!((o.member)(&wide), "radius at z=1 is {}", fibered_disk_radius(1.0));
    }

    #[test]
    fn named_oracle_parses_the_documented_forms() {
        let g = r2();
        assert!(named_oracle(&g, "disk").is_ok());
        assert!(named_oracle(&g, "ball:0.5").is_ok());
        assert!(named_oracle(&g, "square:0.5").is_ok());
        assert!(named_oracle(&g, "box:0.5,1.5").is_ok());
        assert!(named_oracle(&g, "polygon:1,0;0,1;-1,0;0,-1").is_ok());
        assert!(named_oracle(&g, "window").is_ok());
        assert!(named_oracle(&g, "empty").is_ok());
        assert!(named_oracle(&g, "gibberish").is_err());
        let prod = builtin_group("R1xR2").unwrap();
        assert!(named_oracle(&prod, "fibered").is_ok());
        assert!(matches!(named_oracle(&g, "fibered"), Err(Error::GroupMismatch(_))));
    }
}
