//! Certificate algebra for well-rounded families: exact rational rules for
//! pullbacks, products, compositions, dilations, and fibered constructions,
//! plus sampling verifiers for the properties those rules assume (local
//! Lipschitz moduli, measure preservation, the four fibered-family
//! conditions).
//!
//! Constants are kept as exact rationals end to end. Every rule writes a
//! provenance line into the certificate so a construction can be replayed
//! and compared for equality.

use crate::certifier::{
    ball_oracle, estimate_member, estimate_minus, estimate_plus, rational_from_f64,
    rational_to_f64, single_set_constant, SetOracle,
};
use crate::error::{Error, Result};
use crate::group::{
    ball_sample, builtin_group, haar_sample_window, ad_operator_norm, product, CoordinateBall,
    GroupElement, GroupKind, GroupModel,
};
use crate::matrix::{kan_decompose, Matrix};
use crate::rng::{accumulate, index_rng, Mergeable};
use num::rational::BigRational;
use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::fmt;
use std::sync::Arc;

/// Shorthand rational constructor.
pub fn q(numer: i64, denom: i64) -> BigRational {
    BigRational::new(numer.into(), denom.into())
}

fn rat(x: &BigRational) -> String {
    x.to_string()
}

// ---------------------------------------------------------------------------
// certificates

/// A well-roundedness certificate: the Lipschitz constant C, the scale
/// threshold T0, and the epsilon range (0, eps0) on which the ratio bound
/// 1 + C*eps is claimed. The provenance lists the rules that built it.
#[derive(Clone, Debug, PartialEq)]
pub struct WrCertificate {
    pub c: BigRational,
    pub t0: BigRational,
    pub eps0: BigRational,
    pub provenance: Vec<String>,
}

impl WrCertificate {
    pub fn new(c: BigRational, t0: BigRational, eps0: BigRational, label: &str) -> Result<Self> {
        if !c.is_positive() {
            return Err(Error::NonpositiveInput(format!("certificate C = {}", c)));
        }
        if !eps0.is_positive() {
            return Err(Error::NonpositiveInput(format!("certificate eps0 = {}", eps0)));
        }
        Ok(WrCertificate { c, t0, eps0, provenance: vec![label.to_string()] })
    }

    pub fn c_f64(&self) -> f64 {
        rational_to_f64(&self.c)
    }

    pub fn eps0_f64(&self) -> f64 {
        rational_to_f64(&self.eps0)
    }

    pub fn summary(&self) -> CertificateSummary {
        CertificateSummary {
            c: rat(&self.c),
            c_approx: rational_to_f64(&self.c),
            t0: rat(&self.t0),
            t0_approx: rational_to_f64(&self.t0),
            eps0: rat(&self.eps0),
            eps0_approx: rational_to_f64(&self.eps0),
            provenance: self.provenance.clone(),
        }
    }
}

/// Serializable view of a certificate: exact fractions plus f64 previews.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub c: String,
    pub c_approx: f64,
    pub t0: String,
    pub t0_approx: f64,
    pub eps0: String,
    pub eps0_approx: f64,
    pub provenance: Vec<String>,
}

/// Pull a certificate back along a map with modulus bound F:
/// C' = F * max(C, 1), T0 unchanged, eps0' = 1/C'.
pub fn pullback_certificate(cert: &WrCertificate, f: &BigRational) -> Result<WrCertificate> {
    if !f.is_positive() {
        return Err(Error::NonpositiveF(format!("modulus bound F = {}", f)));
    }
    let one = BigRational::one();
    let clamped = if cert.c >= one { cert.c.clone() } else { one };
    let c_new = f * &clamped;
    let mut provenance = cert.provenance.clone();
    provenance.push(format!("pullback(F={}) : C {} -> {}", rat(f), rat(&cert.c), rat(&c_new)));
    Ok(WrCertificate { eps0: c_new.recip(), c: c_new, t0: cert.t0.clone(), provenance })
}

/// Certificate for a product family: T0 is the max of the inputs, C comes
/// from left-folding the pairwise rule C_pair = 3*max(C1, C2) and then
/// pulling back by F.
pub fn product_certificate(certs: &[WrCertificate], f: &BigRational) -> Result<WrCertificate> {
    let first = certs.first().ok_or(Error::EmptyList)?;
    let mut provenance: Vec<String> = Vec::new();
    for (i, cert) in certs.iter().enumerate() {
        for line in &cert.provenance {
            provenance.push(format!("factor[{}] {}", i, line));
        }
    }
    let mut c_fold = first.c.clone();
    let mut t0 = first.t0.clone();
    let three = q(3, 1);
    for cert in &certs[1..] {
        let pair_max = if cert.c > c_fold { cert.c.clone() } else { c_fold.clone() };
        c_fold = &three * &pair_max;
        if cert.t0 > t0 {
            t0 = cert.t0.clone();
        }
        provenance.push(format!("product fold: C = 3*max -> {}", rat(&c_fold)));
    }
    let folded = WrCertificate { c: c_fold, t0, eps0: BigRational::one(), provenance };
    pullback_certificate(&folded, f)
}

// ---------------------------------------------------------------------------
// roundomorphisms

/// Outcome of the empirical measure-preservation test attached to a map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureFlag {
    pub checked: bool,
    pub detail: String,
}

impl MeasureFlag {
    pub fn unchecked(detail: &str) -> Self {
        MeasureFlag { checked: false, detail: detail.to_string() }
    }
}

/// A map between group models together with a claimed local Lipschitz
/// modulus f(g): perturbations of size eps around g land within f(g)*eps
/// around the image.
#[derive(Clone)]
pub struct Roundomorphism {
    pub source: Arc<GroupModel>,
    pub target: Arc<GroupModel>,
    pub name: String,
    pub map: Arc<dyn Fn(&GroupElement) -> Result<GroupElement> + Send + Sync>,
    pub modulus: Arc<dyn Fn(&GroupElement) -> f64 + Send + Sync>,
    pub measure_preserving_checked: MeasureFlag,
}

impl fmt::Debug for Roundomorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Roundomorphism")
            .field("name", &self.name)
            .field("source", &self.source.name)
            .field("target", &self.target.name)
            .field("measure_preserving_checked", &self.measure_preserving_checked)
            .finish()
    }
}

pub fn identity_roundomorphism(group: &Arc<GroupModel>) -> Roundomorphism {
    Roundomorphism {
        source: group.clone(),
        target: group.clone(),
        name: format!("id[{}]", group.name),
        map: Arc::new(|g: &GroupElement| Ok(g.clone())),
        modulus: Arc::new(|_| 1.0),
        measure_preserving_checked: MeasureFlag { checked: true, detail: "identity".into() },
    }
}

/// Linear map on a euclidean group, acting on chart coordinates. The modulus
/// is the operator norm of the matrix; the measure flag records |det|.
pub fn linear_roundomorphism(group: &Arc<GroupModel>, a: Matrix, name: &str) -> Result<Roundomorphism> {
    let n = match group.kind {
        GroupKind::Euclidean(n) => n,
        _ => {
            return Err(Error::InvalidInput(format!(
                "linear maps act on euclidean groups, not {}",
                group.name
            )))
        }
    };
    if a.rows != n || a.cols != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, group dimension is {}",
            a.rows, a.cols, n
        )));
    }
    let norm = a.op_norm();
    let det = a.det();
    let g_map = group.clone();
    let a_map = a.clone();
    Ok(Roundomorphism {
        source: group.clone(),
        target: group.clone(),
        name: name.to_string(),
        map: Arc::new(move |g: &GroupElement| {
            let x = g_map.log_coords(&g.mat)?;
            let y: Vec<f64> = (0..a_map.rows)
                .map(|i| (0..a_map.cols).map(|j| a_map.get(i, j) * x[j]).sum())
                .collect();
            g_map.exp_coords(&y)
        }),
        modulus: Arc::new(move |_| norm),
        measure_preserving_checked: MeasureFlag::unchecked(&format!("|det| = {}", det.abs())),
    })
}

/// One-dimensional map given by a plain function on the chart coordinate,
/// with a caller-claimed constant modulus.
pub fn pointwise_r1_map(
    group: &Arc<GroupModel>,
    f: fn(f64) -> f64,
    modulus: f64,
    name: &str,
) -> Result<Roundomorphism> {
    match group.kind {
        GroupKind::Euclidean(1) => {}
        _ => return Err(Error::InvalidInput("pointwise maps act on euclidean(1)".into())),
    }
    let g_map = group.clone();
    Ok(Roundomorphism {
        source: group.clone(),
        target: group.clone(),
        name: name.to_string(),
        map: Arc::new(move |g: &GroupElement| {
            let x = g_map.log_coords(&g.mat)?;
            g_map.exp_coords(&[f(x[0])])
        }),
        modulus: Arc::new(move |_| modulus),
        measure_preserving_checked: MeasureFlag::unchecked("pointwise map"),
    })
}

/// The KAN factorization of SL(2, R) as a map into the product group
/// SO2 x A2 x N2, embedding the three factors block-diagonally. The modulus
/// grows with the adjoint norm; the shipped bound 8*(1 + |Ad_g|)^2 is a
/// generous envelope corroborated by `verify_local_lipschitz` on window
/// compacta.
pub fn iwasawa_roundomorphism() -> Result<Roundomorphism> {
    let source = builtin_group("SL2")?;
    let target = builtin_group("SO2xA2xN2")?;
    let target_map = target.clone();
    Ok(Roundomorphism {
        source,
        target: target.clone(),
        name: "iwasawa[SL2]".into(),
        map: Arc::new(move |g: &GroupElement| {
            let kan = kan_decompose(&g.mat)?;
            let mut mat = Matrix::zeros(6, 6);
            for i in 0..2 {
                for j in 0..2 {
                    mat.set(i, j, kan.k.get(i, j));
                    mat.set(4 + i, 4 + j, kan.n.get(i, j));
                }
                mat.set(2 + i, 2 + i, kan.a[i]);
            }
            Ok(GroupElement { group: target_map.clone(), mat })
        }),
        modulus: Arc::new(|g: &GroupElement| {
            let ad = ad_operator_norm(g);
            8.0 * (1.0 + ad) * (1.0 + ad)
        }),
        measure_preserving_checked: MeasureFlag::unchecked(
            "factor coordinates reweight the volume element",
        ),
    })
}

/// Compose two roundomorphisms: the modulus multiplies through the first map,
/// f(g) = f2(r1(g)) * f1(g).
pub fn compose_roundomorphisms(r1: &Roundomorphism, r2: &Roundomorphism) -> Result<Roundomorphism> {
    if r1.target.name != r2.source.name {
        return Err(Error::GroupMismatch(format!(
            "cannot compose: first map lands in {}, second expects {}",
            r1.target.name, r2.source.name
        )));
    }
    let map1 = r1.map.clone();
    let map2 = r2.map.clone();
    let mod1 = r1.modulus.clone();
    let mod2 = r2.modulus.clone();
    let map1_for_mod = r1.map.clone();
    let checked = r1.measure_preserving_checked.checked && r2.measure_preserving_checked.checked;
    Ok(Roundomorphism {
        source: r1.source.clone(),
        target: r2.target.clone(),
        name: format!("{} . {}", r2.name, r1.name),
        map: Arc::new(move |g: &GroupElement| map2(&map1(g)?)),
        modulus: Arc::new(move |g: &GroupElement| {
            let mid = match map1_for_mod(g) {
                Ok(m) => m,
                Err(_) => return f64::INFINITY,
            };
            mod2(&mid) * mod1(g)
        }),
        measure_preserving_checked: MeasureFlag {
            checked,
            detail: format!(
                "{} ; {}",
                r1.measure_preserving_checked.detail, r2.measure_preserving_checked.detail
            ),
        },
    })
}

// ---------------------------------------------------------------------------
// local Lipschitz verification

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub map: String,
    pub tested_points: usize,
    pub pair_checks: usize,
    pub worst_ratio: f64,
    pub worst_witness: String,
    pub slack: f64,
    pub passed: bool,
}

/// Split h = u' * t * v' along the one-parameter family
/// u'(s) = exp(s * log(h t^-1)), v'(s) = t^-1 u'(s)^-1 h, choosing s by a
/// refined grid search on |log u'| + |log v'| with a small max-norm
/// tie-break. Returns the max of the two norms at the chosen split, an
/// upper bound on the optimal decomposition cost.
fn best_split(target: &Arc<GroupModel>, h: &GroupElement, t: &GroupElement) -> Option<f64> {
    let t_inv = t.inv();
    let l = target.log_coords(&h.mat.mul(&t_inv.mat)).ok()?;
    let cost_at = |s: f64| -> Option<(f64, f64)> {
        let lu: Vec<f64> = l.iter().map(|x| s * x).collect();
        let u = target.exp_coords(&lu).ok()?;
        let v = t_inv.mul(&u.inv()).mul(h);
        let nu = target.chart_norm(&lu);
        let nv = target.chart_norm(&target.log_coords(&v.mat).ok()?);
        Some((nu + nv + 1e-6 * nu.max(nv), nu.max(nv)))
    };
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut best: Option<(f64, f64)> = None;
    for _ in 0..3 {
        let mut best_s = lo;
        for k in 0..=10 {
            let s = lo + (hi - lo) * (k as f64) / 10.0;
            if let Some((cost, maxn)) = cost_at(s) {
                if best.map_or(true, |(c, _)| cost < c) {
                    best = Some((cost, maxn));
                    best_s = s;
                }
            }
        }
        let span = (hi - lo) / 10.0;
        lo = (best_s - span).max(0.0);
        hi = (best_s + span).min(1.0);
    }
    best.map(|(_, maxn)| maxn)
}

/// Check the claimed modulus on test elements: perturb each g on both sides
/// by chart balls of radius eps, map through r, and verify the image moves
/// by at most f(g)*eps*(1+slack). Deterministic boundary probes along every
/// chart axis run alongside the sampled pairs. The worst observed ratio and
/// its witness are reported; ratios above 1+slack fail the report.
pub fn verify_local_lipschitz(
    r: &Roundomorphism,
    test_elements: &[GroupElement],
    eps_grid: &[f64],
    n_pert: usize,
    slack: f64,
    seed: u64,
) -> Result<LipschitzReport> {
    if test_elements.is_empty() || eps_grid.is_empty() {
        return Err(Error::InvalidInput("need test elements and an epsilon grid".into()));
    }
    let chart = r.target.epsilon_chart();
    for g in test_elements {
        let fg = (r.modulus)(g);
        if !(fg > 0.0) {
            return Err(Error::NonpositiveF(format!("modulus {} at a test point", fg)));
        }
        for &eps in eps_grid {
            if eps * fg > chart {
                return Err(Error::ChartOverflow(format!(
                    "eps {} times modulus {:.4} exceeds the chart radius {} of {}",
                    eps, fg, chart, r.target.name
                )));
            }
        }
    }
    let dim = r.source.dim();
    let mut worst_ratio = 0.0f64;
    let mut worst_witness = String::from("none");
    let mut pair_checks = 0usize;
    let mut stream = 0u64;
    for (gi, g) in test_elements.iter().enumerate() {
        let fg = (r.modulus)(g);
        let rg = (r.map)(g)?;
        for &eps in eps_grid {
            let ball = CoordinateBall::new(r.source.clone(), eps)?;
            let mut pairs: Vec<(GroupElement, GroupElement)> = Vec::new();
            for axis in 0..dim {
                for sign in [1.0, -1.0] {
                    let mut coords = vec![0.0; dim];
                    coords[axis] = sign * eps;
                    let u = r.source.exp_coords(&coords)?;
                    pairs.push((u.clone(), u));
                }
            }
            let mut rng = index_rng(seed, stream);
            stream += 1;
            for _ in 0..n_pert {
                pairs.push((ball_sample(&ball, &mut rng), ball_sample(&ball, &mut rng)));
            }
            for (u, v) in pairs {
                let h = (r.map)(&u.mul(g).mul(&v))?;
                pair_checks += 1;
                let ratio = match best_split(&r.target, &h, &rg) {
                    Some(maxn) => maxn / (fg * eps),
                    None => f64::INFINITY,
                };
                if ratio > worst_ratio {
                    worst_ratio = ratio;
                    worst_witness = format!(
                        "test element {} at eps {}: image moved {:.3e} of the allowance",
                        gi, eps, ratio
                    );
                }
            }
        }
    }
    Ok(LipschitzReport {
        map: r.name.clone(),
        tested_points: test_elements.len(),
        pair_checks,
        worst_ratio,
        worst_witness,
        slack,
        passed: worst_ratio <= 1.0 + slack,
    })
}

// ---------------------------------------------------------------------------
// measure preservation

#[derive(Clone, Default)]
struct Hist {
    cells: Vec<f64>,
    landed: f64,
    landed_sq: f64,
    total: f64,
}

impl Mergeable for Hist {
    fn merge(&mut self, other: Self) {
        if self.cells.is_empty() {
            self.cells = other.cells;
        } else {
            for (a, b) in self.cells.iter_mut().zip(&other.cells) {
                *a += b;
            }
        }
        self.landed += other.landed;
        self.landed_sq += other.landed_sq;
        self.total += other.total;
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureCheckReport {
    pub map: String,
    pub cells: usize,
    pub n_samples: usize,
    pub coverage: f64,
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
    pub passed: bool,
}

fn haar_flat_in_chart(group: &GroupModel) -> bool {
    match &group.kind {
        GroupKind::Euclidean(_) | GroupKind::DiagonalA(_) | GroupKind::UnipotentN(_) => true,
        GroupKind::SpecialOrthogonal(m) => *m <= 2,
        GroupKind::SpecialLinear2 => false,
        GroupKind::Product(parts) => parts.iter().all(|p| haar_flat_in_chart(p)),
    }
}

/// Chi-square test of measure preservation: push window-Haar samples through
/// the map and compare cell counts over a fixed grid of chart boxes in
/// [-1, 1]^d against the flat Haar prediction, conditioning on the grid.
/// Only meaningful for targets whose Haar measure is flat in chart
/// coordinates; other targets are rejected.
pub fn measure_preservation_check(
    r: &Roundomorphism,
    n_samples: usize,
    bins_per_axis: usize,
    seed: u64,
) -> Result<MeasureCheckReport> {
    if !haar_flat_in_chart(&r.target) {
        return Err(Error::InvalidInput(format!(
            "chi-square binning needs a chart-flat Haar measure; {} does not qualify",
            r.target.name
        )));
    }
    let d = r.target.dim();
    let k = bins_per_axis.pow(d as u32);
    if bins_per_axis < 2 || k > 256 {
        return Err(Error::InvalidInput(format!(
            "{} bins per axis over dimension {} gives an unusable grid",
            bins_per_axis, d
        )));
    }
    let source = r.source.clone();
    let target = r.target.clone();
    let map = r.map.clone();
    let init = Hist { cells: vec![0.0; k], ..Hist::default() };
    let hist = accumulate(n_samples, seed, init, move |acc, rng| {
        let (g, w) = haar_sample_window(&source, rng).expect("source window required");
        acc.total += w;
        let y = match map(&g) {
            Ok(y) => y,
            Err(_) => return,
        };
        let coords = match target.log_coords(&y.mat) {
            Ok(c) => c,
            Err(_) => return,
        };
        let mut cell = 0usize;
        for &c in &coords {
            if !(-1.0..1.0).contains(&c) {
                return;
            }
            let idx = (((c + 1.0) / 2.0) * bins_per_axis as f64) as usize;
            cell = cell * bins_per_axis + idx.min(bins_per_axis - 1);
        }
        acc.cells[cell] += w;
        acc.landed += w;
        acc.landed_sq += w * w;
    });
    if hist.landed <= 0.0 {
        return Err(Error::InvalidInput("no samples landed in the test grid".into()));
    }
    let n_eff = hist.landed * hist.landed / hist.landed_sq;
    let expected = n_eff / k as f64;
    let chi2: f64 = hist
        .cells
        .iter()
        .map(|&cw| {
            let observed = cw / hist.landed * n_eff;
            (observed - expected) * (observed - expected) / expected
        })
        .sum();
    let dof = k - 1;
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| Error::InvalidInput(format!("chi-square dof: {}", e)))?;
    let p_value = 1.0 - dist.cdf(chi2);
    Ok(MeasureCheckReport {
        map: r.name.clone(),
        cells: k,
        n_samples,
        coverage: hist.landed / hist.total,
        chi2,
        dof,
        p_value,
        passed: p_value > 0.01,
    })
}

// ---------------------------------------------------------------------------
// fibered families

/// Exact constant for a fibered family: fibers with Lipschitz data
/// (C_D, 1/C_D), base set with constant C_E, fiber-group additivity constant
/// c, and fiber volumes pinched between V_min and V_max. The family constant
/// is C_B = 6 (V_max/V_min) C_E + 3 C with C = C_D c (1 + C_D), valid for
/// eps below 1/(C + C_E).
pub fn fibered_constant(
    c_d: &BigRational,
    c_e: &BigRational,
    c: &BigRational,
    v_min: &BigRational,
    v_max: &BigRational,
) -> Result<WrCertificate> {
    let one = BigRational::one();
    if c_d < &one {
        return Err(Error::ParameterOutOfRange(format!("C_D = {} must be >= 1", c_d)));
    }
    if c < &one {
        return Err(Error::ParameterOutOfRange(format!("additivity c = {} must be >= 1", c)));
    }
    if c_e.is_negative() {
        return Err(Error::ParameterOutOfRange(format!("C_E = {} must be >= 0", c_e)));
    }
    if !v_min.is_positive() || v_max < v_min {
        return Err(Error::ParameterOutOfRange(format!(
            "need 0 < V_min <= V_max, got {} and {}",
            v_min, v_max
        )));
    }
    let big_c = c_d * c * (&one + c_d);
    let c_b = q(6, 1) * (v_max / v_min) * c_e + q(3, 1) * &big_c;
    let eps0 = (&big_c + c_e).recip();
    Ok(WrCertificate {
        provenance: vec![format!(
            "fibered(C_D={}, C_E={}, c={}, V_max/V_min={}) : C={}, C_B={}",
            rat(c_d),
            rat(c_e),
            rat(c),
            rat(&(v_max / v_min)),
            rat(&big_c),
            rat(&c_b)
        )],
        c: c_b,
        t0: BigRational::zero(),
        eps0,
    })
}

/// Constant for a family of dilation-controlled sets in R^n bounded by a
/// ball of radius R: 16^(n+1) R C, exactly.
pub fn blc_from_dilation(c: &BigRational, r: &BigRational, n: u32) -> Result<BigRational> {
    if c < &BigRational::one() {
        return Err(Error::ParameterOutOfRange(format!("dilation constant C = {} must be >= 1", c)));
    }
    if !r.is_positive() {
        return Err(Error::ParameterOutOfRange(format!("radius R = {} must be positive", r)));
    }
    if n == 0 {
        return Err(Error::ParameterOutOfRange("dimension n must be >= 1".into()));
    }
    let mut pow = BigRational::one();
    for _ in 0..=n {
        pow *= q(16, 1);
    }
    Ok(pow * r * c)
}

/// Single-set certificate implied by a dilation constant C on a convex body
/// in R^n: the boundary tube per unit volume is at most 4 n C (3/2)^(n-1)
/// per unit of eps while 4 C eps <= 1, and the volume cancels from the
/// resulting ratio constant.
pub fn dilation_lwr_certificate(c_dil: &BigRational, n: u32) -> Result<WrCertificate> {
    if c_dil < &BigRational::one() {
        return Err(Error::ParameterOutOfRange(format!(
            "dilation constant C = {} must be >= 1",
            c_dil
        )));
    }
    if n == 0 {
        return Err(Error::ParameterOutOfRange("dimension n must be >= 1".into()));
    }
    let mut growth = BigRational::one();
    for _ in 1..n {
        growth *= q(3, 2);
    }
    let c_tube = q(4, 1) * q(n as i64, 1) * c_dil * &growth;
    let (c_lwr, eps0_tube) = single_set_constant(&c_tube, &BigRational::one())?;
    let eps_cap = (q(4, 1) * c_dil).recip();
    let eps0 = if eps0_tube < eps_cap { eps0_tube } else { eps_cap };
    Ok(WrCertificate {
        provenance: vec![format!(
            "dilation(C={}, n={}) : tube/volume {} per eps, C={}",
            rat(c_dil),
            n,
            rat(&c_tube),
            rat(&c_lwr)
        )],
        c: c_lwr,
        t0: BigRational::zero(),
        eps0,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DilationReport {
    pub set: String,
    pub alpha: f64,
    pub c_dilation: f64,
    pub tested: usize,
    pub worst_margin: f64,
    pub blc_constant: String,
    pub certificate: CertificateSummary,
}

/// Verify the dilation property of a convex body containing the origin:
/// every member x moved by eps in any direction stays inside the body
/// scaled by 1 + eps/alpha, where alpha is the inradius at the origin.
/// Returns C = 1/alpha with the implied certificates.
pub fn convex_dilation_check(
    body: &SetOracle,
    alpha: Option<f64>,
    eps_grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<DilationReport> {
    let n = match body.group.kind {
        GroupKind::Euclidean(n) => n,
        _ => return Err(Error::InvalidInput("dilation checks run in euclidean groups".into())),
    };
    let sd = body
        .signed_distance
        .clone()
        .ok_or_else(|| Error::InvalidInput("dilation check needs a signed distance".into()))?;
    let alpha = match alpha {
        Some(a) => a,
        None => -sd(&body.group.identity()),
    };
    if !(alpha > 1e-9) {
        return Err(Error::NotStarShaped(format!(
            "origin is not interior: inradius estimate {}",
            alpha
        )));
    }
    if eps_grid.is_empty() || n_samples == 0 {
        return Err(Error::InvalidInput("need an epsilon grid and samples".into()));
    }
    let group = body.group.clone();
    let mut tested = 0usize;
    let mut worst_margin = f64::NEG_INFINITY;
    let mut witness = None;
    for i in 0..n_samples {
        let mut rng = index_rng(seed, i as u64);
        let (g, _) = haar_sample_window(&group, &mut rng)?;
        if !(body.member)(&g) {
            continue;
        }
        let x = group.log_coords(&g.mat)?;
        let dir = crate::group::unit_direction(n, &mut rng);
        for &eps in eps_grid {
            let scale = 1.0 + eps / alpha;
            let moved: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| (xi + eps * di) / scale).collect();
            let inside = sd(&group.exp_coords(&moved)?);
            tested += 1;
            if inside > worst_margin {
                worst_margin = inside;
                witness = Some((x.clone(), eps));
            }
        }
    }
    if tested == 0 {
        return Err(Error::InvalidInput(format!(
            "no window sample landed in '{}'",
            body.name
        )));
    }
    if worst_margin > 1e-9 {
        let (x, eps) = witness.expect("worst_margin was updated");
        return Err(Error::NotStarShaped(format!(
            "point {:?} moved by eps {} leaves the dilated body by {:.3e}",
            x, eps, worst_margin
        )));
    }
    let c_dilation = 1.0 / alpha;
    let c_rat = rational_from_f64(c_dilation.max(1.0))?;
    let r_rat = rational_from_f64(body.bounding_radius)?;
    let blc = blc_from_dilation(&c_rat, &r_rat, n as u32)?;
    let cert = dilation_lwr_certificate(&c_rat, n as u32)?;
    Ok(DilationReport {
        set: body.name.clone(),
        alpha,
        c_dilation,
        tested,
        worst_margin,
        blc_constant: rat(&blc),
        certificate: cert.summary(),
    })
}

// ---------------------------------------------------------------------------
// fibered family checks

/// A family of fiber sets indexed by a base set: fibers vary Lipschitz-ly
/// with constant C_D, keep volume at least V_min, and stay inside a chart
/// ball of radius bound_radius in the fiber group.
#[derive(Clone)]
pub struct BlcFamily {
    pub name: String,
    pub base_group: Arc<GroupModel>,
    pub fiber_group: Arc<GroupModel>,
    pub base_set: SetOracle,
    pub fiber: Arc<dyn Fn(&[f64]) -> Result<SetOracle> + Send + Sync>,
    pub c_d: f64,
    pub v_min: f64,
    pub bound_radius: f64,
}

impl fmt::Debug for BlcFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlcFamily")
            .field("name", &self.name)
            .field("base_group", &self.base_group.name)
            .field("fiber_group", &self.fiber_group.name)
            .field("c_d", &self.c_d)
            .field("v_min", &self.v_min)
            .field("bound_radius", &self.bound_radius)
            .finish()
    }
}

/// Disk fibers over the interval |z| <= 1 with a caller-supplied radius
/// profile.
pub fn disk_radius_family(
    radius_fn: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    c_d: f64,
    v_min: f64,
    bound_radius: f64,
    name: &str,
) -> Result<BlcFamily> {
    let base_group = builtin_group("R1")?;
    let fiber_group = builtin_group("R2")?;
    let base_set = ball_oracle(&base_group, 1.0)?;
    let fg = fiber_group.clone();
    let rf = radius_fn.clone();
    Ok(BlcFamily {
        name: name.to_string(),
        base_group,
        fiber_group,
        base_set,
        fiber: Arc::new(move |z: &[f64]| ball_oracle(&fg, rf(z[0]))),
        c_d,
        v_min,
        bound_radius,
    })
}

/// The shipped example family: fiber disks of radius 1 + 0.1 sin z over the
/// interval |z| <= 1.
pub fn shipped_fibered_family() -> Result<BlcFamily> {
    disk_radius_family(
        Arc::new(crate::certifier::fibered_disk_radius),
        20.0,
        0.81 * std::f64::consts::PI,
        1.1,
        "sine-disk",
    )
}

/// Exact certificate for the shipped family. The volume bounds enter only
/// through their ratio, so the common factor pi cancels and the arithmetic
/// stays rational: radius bounds 9/10 and 11/10 give squared-volume
/// surrogates 81/100 and 121/100.
pub fn shipped_family_certificate() -> Result<WrCertificate> {
    fibered_constant(&q(20, 1), &q(9, 2), &q(1, 1), &q(81, 100), &q(121, 100))
}

/// Total space {(z, x) : z in the base set, x in the fiber over z} as a
/// single set oracle on the product group, so a fiber family can be fed to
/// the certifier directly.
pub fn family_total_oracle(family: &BlcFamily) -> Result<SetOracle> {
    let group = product(vec![family.base_group.clone(), family.fiber_group.clone()])?;
    let d_base = family.base_group.dim();
    let base_group = family.base_group.clone();
    let fiber_group = family.fiber_group.clone();
    let base_member = family.base_set.member.clone();
    let fiber = family.fiber.clone();
    let total_group = group.clone();
    let member = Arc::new(move |el: &GroupElement| {
        let coords = match total_group.log_coords(&el.mat) {
            Ok(c) => c,
            Err(_) => return false,
        };
        let z = &coords[..d_base];
        let zel = match base_group.exp_coords(z) {
            Ok(e) => e,
            Err(_) => return false,
        };
        if !base_member(&zel) {
            return false;
        }
        let fiber_set = match fiber(z) {
            Ok(s) => s,
            Err(_) => return false,
        };
        let xel = match fiber_group.exp_coords(&coords[d_base..]) {
            Ok(e) => e,
            Err(_) => return false,
        };
        (fiber_set.member)(&xel)
    });
    Ok(SetOracle {
        group,
        name: format!("{}-total", family.name),
        member,
        signed_distance: None,
        bounding_radius: family.base_set.bounding_radius.max(family.bound_radius),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionReport {
    pub index: u8,
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_witness: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlcReport {
    pub family: String,
    #[serde(rename = "C_D")]
    pub c_d: f64,
    #[serde(rename = "V_min")]
    pub v_min: f64,
    pub bound_radius: f64,
    pub epsilons: Vec<f64>,
    pub base_points: usize,
    pub conditions: Vec<ConditionReport>,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct BlcCheckParams {
    pub epsilons: Vec<f64>,
    pub n_base: usize,
    pub n_fiber: usize,
    pub n_pert: usize,
    pub seed: u64,
}

impl Default for BlcCheckParams {
    fn default() -> Self {
        BlcCheckParams {
            epsilons: vec![0.01, 0.05],
            n_base: 8,
            n_fiber: 20_000,
            n_pert: 8,
            seed: crate::rng::DEFAULT_SEED,
        }
    }
}

fn subseed(seed: u64, a: u64, b: u64) -> u64 {
    seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Sample base points inside the base set, deterministically in the seed.
fn sample_base_points(family: &BlcFamily, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut points = Vec::with_capacity(n);
    let mut attempts = 0u64;
    while points.len() < n {
        let mut rng = index_rng(seed, 0xBA5E_0000 + attempts);
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::InvalidInput(
                "base set too small to sample within the window".into(),
            ));
        }
        let (g, _) = haar_sample_window(&family.base_group, &mut rng)?;
        if (family.base_set.member)(&g) {
            points.push(family.base_group.log_coords(&g.mat)?);
        }
    }
    Ok(points)
}

/// Report-only audit of the four fibered-family conditions: per-fiber
/// Lipschitz ratios against 1 + C_D eps, fiber stability under base
/// perturbations, the volume floor, and the common bounding ball.
pub fn blc_check(family: &BlcFamily, params: &BlcCheckParams) -> Result<BlcReport> {
    let eps_valid: Vec<f64> = params
        .epsilons
        .iter()
        .copied()
        .filter(|&e| e > 0.0 && e <= 1.0 / family.c_d + 1e-12)
        .collect();
    if eps_valid.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no epsilon in the grid lies in the valid range (0, {}]",
            1.0 / family.c_d
        )));
    }
    let zs = sample_base_points(family, params.n_base, params.seed)?;

    // condition 1: each fiber is well rounded with constant C_D
    let mut cond1 = ConditionReport {
        index: 1,
        name: "fiber ratio within 1 + C_D eps".into(),
        passed: true,
        checks: 0,
        worst_witness: None,
    };
    let mut worst_margin = f64::INFINITY;
    for (i, z) in zs.iter().enumerate() {
        let oracle = (family.fiber)(z)?;
        let seed_z = subseed(params.seed, 1, i as u64);
        for &eps in &eps_valid {
            cond1.checks += 1;
            let plus = estimate_plus(&oracle, eps, params.n_fiber, params.n_pert, seed_z)?;
            let minus = estimate_minus(&oracle, eps, params.n_fiber, params.n_pert, seed_z)?;
            if minus.value <= 2.0 * minus.stderr {
                cond1.passed = false;
                cond1.worst_witness = Some(format!(
                    "z = {:?}, eps = {}: erosion volume {:.3e} indistinguishable from zero",
                    z, eps, minus.value
                ));
                continue;
            }
            let ratio = plus.value / minus.value;
            let rel_p = plus.stderr / plus.value.max(f64::MIN_POSITIVE);
            let rel_m = minus.stderr / minus.value;
            let stderr = ratio * (rel_p * rel_p + rel_m * rel_m).sqrt();
            let allowed = 1.0 + family.c_d * eps + 3.0 * stderr;
            let margin = allowed - ratio;
            if margin < worst_margin {
                worst_margin = margin;
                cond1.worst_witness = Some(format!(
                    "z = {:?}, eps = {}: ratio {:.4} vs allowed {:.4}",
                    z, eps, ratio, allowed
                ));
            }
            if margin < 0.0 {
                cond1.passed = false;
            }
        }
    }

    // condition 2: base perturbations move fibers by at most C_D eps
    let mut cond2 = ConditionReport {
        index: 2,
        name: "fiber stability under base perturbation".into(),
        passed: true,
        checks: 0,
        worst_witness: None,
    };
    let mut worst_violation = 0.0f64;
    for (i, z) in zs.iter().enumerate() {
        let d_z = (family.fiber)(z)?;
        let sd_z = d_z.signed_distance.clone().ok_or_else(|| {
            Error::InvalidInput("condition 2 needs fibers with signed distances".into())
        })?;
        let z_el = family.base_group.exp_coords(z)?;
        for (ei, &eps) in eps_valid.iter().enumerate() {
            let ball = CoordinateBall::new(family.base_group.clone(), eps)?;
            let delta = 2.0 * family.c_d * eps;
            for p in 0..params.n_pert {
                let mut rng = index_rng(subseed(params.seed, 2, i as u64), (ei * 1000 + p) as u64);
                let u = ball_sample(&ball, &mut rng);
                let v = ball_sample(&ball, &mut rng);
                let z_prime = family.base_group.log_coords(&u.mul(&z_el).mul(&v).mat)?;
                let d_zp = (family.fiber)(&z_prime)?;
                let fiber_pts = params.n_fiber.min(4_000);
                let sd_z_arc = sd_z.clone();
                let member_zp = d_zp.member.clone();
                let fiber_group = family.fiber_group.clone();
                let viol = accumulate(
                    fiber_pts,
                    subseed(params.seed, 3, (i * 100 + p) as u64),
                    crate::rng::MaxTracker::default(),
                    move |acc, rng2| {
                        let (x, _) = haar_sample_window(&fiber_group, rng2)
                            .expect("fiber window required");
                        let d = sd_z_arc(&x);
                        let inside_prime = member_zp(&x);
                        // erosion of the z-fiber must sit inside the z'-fiber
                        if d <= -delta && !inside_prime {
                            acc.push(-d - delta + 1e-15);
                        }
                        // the z'-fiber must sit inside the fattened z-fiber
                        if inside_prime && d > delta {
                            acc.push(d - delta);
                        }
                    },
                );
                cond2.checks += 1;
                if viol.max > worst_violation {
                    worst_violation = viol.max;
                    cond2.worst_witness = Some(format!(
                        "z = {:?}, eps = {}: inclusion violated by {:.3e}",
                        z, eps, viol.max
                    ));
                }
            }
        }
    }
    if worst_violation > 1e-9 {
        cond2.passed = false;
    }

    // condition 3: fiber volumes stay above V_min
    let mut cond3 = ConditionReport {
        index: 3,
        name: "fiber volume floor".into(),
        passed: true,
        checks: 0,
        worst_witness: None,
    };
    let mut worst_volume_margin = f64::INFINITY;
    for (i, z) in zs.iter().enumerate() {
        let d_z = (family.fiber)(z)?;
        let est = estimate_member(&d_z, params.n_fiber, subseed(params.seed, 4, i as u64))?;
        cond3.checks += 1;
        let margin = est.value + 3.0 * est.stderr - family.v_min;
        if margin < worst_volume_margin {
            worst_volume_margin = margin;
            cond3.worst_witness = Some(format!(
                "z = {:?}: volume {:.4} +- {:.4} vs floor {:.4}",
                z, est.value, est.stderr, family.v_min
            ));
        }
        if margin < 0.0 {
            cond3.passed = false;
        }
    }

    // condition 4: fibers stay inside the bounding ball
    let mut cond4 = ConditionReport {
        index: 4,
        name: "fibers inside the bounding ball".into(),
        passed: true,
        checks: 0,
        worst_witness: None,
    };
    let mut worst_excess = 0.0f64;
    for (i, z) in zs.iter().enumerate() {
        let d_z = (family.fiber)(z)?;
        if d_z.bounding_radius > family.bound_radius + 1e-9 {
            cond4.passed = false;
            cond4.worst_witness = Some(format!(
                "z = {:?}: declared bounding radius {} exceeds {}",
                z, d_z.bounding_radius, family.bound_radius
            ));
        }
        let member = d_z.member.clone();
        let fiber_group = family.fiber_group.clone();
        let bound = family.bound_radius;
        let excess = accumulate(
            params.n_fiber.min(8_000),
            subseed(params.seed, 5, i as u64),
            crate::rng::MaxTracker::default(),
            move |acc, rng| {
                let (x, _) = haar_sample_window(&fiber_group, rng).expect("fiber window required");
                if member(&x) {
                    let norm = fiber_group
                        .chart_norm(&fiber_group.log_coords(&x.mat).expect("chart is global"));
                    if norm > bound {
                        acc.push(norm - bound);
                    }
                }
            },
        );
        cond4.checks += 1;
        if excess.max > worst_excess {
            worst_excess = excess.max;
            cond4.worst_witness = Some(format!(
                "z = {:?}: member point {:.3e} beyond the bounding radius",
                z, excess.max
            ));
        }
    }
    if worst_excess > 1e-9 {
        cond4.passed = false;
    }

    let conditions = vec![cond1, cond2, cond3, cond4];
    let passed = conditions.iter().all(|c| c.passed);
    Ok(BlcReport {
        family: family.name.clone(),
        c_d: family.c_d,
        v_min: family.v_min,
        bound_radius: family.bound_radius,
        epsilons: eps_valid,
        base_points: zs.len(),
        conditions,
        passed,
    })
}
