//! Matrix Lie group models: multiplication, exp/log charts, coordinate balls
//! O_eps = exp(B_eps), windowed Haar sampling, and adjoint operator norms.
//!
//! The Lie algebra basis of every model is orthonormal for the Frobenius
//! inner product, so chart coordinates are Frobenius inner products and the
//! chart norm is the plain Euclidean norm of the coordinate vector. Product
//! groups use the sup of the component chart norms, which makes the
//! coordinate ball of a product exactly the product of the component balls
//! at the same epsilon.

use crate::error::{Error, Result};
use crate::matrix::{kan_decompose, matrix_exp, matrix_log, Matrix};
use crate::rng::{accumulate, MaxTracker, Mergeable};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

/// Radius on which the generic near-identity log chart is trusted; kinds with
/// a globally exact chart (translations, positive diagonals, unitriangular)
/// advertise an unbounded radius instead.
pub const EPSILON_CHART: f64 = 0.5;

/// Group membership tolerance for defining constraints (det = 1, k^T k = I, ...).
pub const CONSTRAINT_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub enum GroupKind {
    /// R^n as translations, embedded in (n+1)x(n+1) affine matrices.
    Euclidean(usize),
    /// Positive diagonal matrices of determinant 1.
    DiagonalA(usize),
    /// Upper unitriangular matrices.
    UnipotentN(usize),
    /// Special orthogonal group SO(m).
    SpecialOrthogonal(usize),
    /// SL(2, R).
    SpecialLinear2,
    /// Direct product, embedded block-diagonally.
    Product(Vec<Arc<GroupModel>>),
}

/// Bounded proposal region for Haar sampling, described in the coordinates
/// native to the group kind (translations, log-diagonal, entries, Iwasawa).
#[derive(Clone, Debug)]
pub struct HaarWindow {
    pub description: String,
    /// Total proposal mass: estimates are (proposal_volume) * mean(weight * indicator).
    pub proposal_volume: f64,
    /// Smallest half-width of the window in chart-like coordinates; used as a
    /// conservative guard that fattened oracles stay inside the window.
    pub inradius_chart: f64,
}

#[derive(Clone, Debug)]
pub struct GroupModel {
    pub name: String,
    pub ambient_dim: usize,
    pub lie_basis: Vec<Matrix>,
    pub haar_window: Option<HaarWindow>,
    pub is_abelian: bool,
    pub kind: GroupKind,
}

#[derive(Clone, Debug)]
pub struct GroupElement {
    pub group: Arc<GroupModel>,
    pub mat: Matrix,
}

#[derive(Clone, Debug)]
pub struct CoordinateBall {
    pub group: Arc<GroupModel>,
    pub epsilon: f64,
}

impl CoordinateBall {
    pub fn new(group: Arc<GroupModel>, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidInput("epsilon must be nonnegative".into()));
        }
        if epsilon > group.epsilon_chart() {
            return Err(Error::EpsilonTooLarge(format!(
                "epsilon {} exceeds the chart radius {} of {}",
                epsilon,
                group.epsilon_chart(),
                group.name
            )));
        }
        Ok(CoordinateBall { group, epsilon })
    }
}

/// Outcome of the sampled additivity check O_eps O_delta <= O_{c(eps+delta)}.
#[derive(Clone, Debug)]
pub struct AdditivityEstimate {
    pub c: f64,
    pub samples: usize,
    /// true when the value is forced by commutativity rather than sampled
    pub exact: bool,
}

// ---------------------------------------------------------------------------
// construction

/// Build a group model from a short name: "R2", "A3", "N2", "SO3", "SL2",
/// or a product joined with 'x' such as "R1xSO2". Long names like
/// "euclidean(2)" are accepted too.
pub fn builtin_group(name: &str) -> Result<Arc<GroupModel>> {
    let trimmed = name.trim();
    if trimmed.contains('x') {
        let parts: Vec<&str> = trimmed.split('x').collect();
        let mut comps = Vec::with_capacity(parts.len());
        for p in parts {
            comps.push(atom_group(p)?);
        }
        return product(comps);
    }
    atom_group(trimmed)
}

fn atom_group(name: &str) -> Result<Arc<GroupModel>> {
    let t = name.trim();
    let parse_arg = |s: &str| -> Option<usize> {
        s.strip_suffix(')').and_then(|x| x.parse().ok())
    };
    if let Some(rest) = t.strip_prefix("euclidean(") {
        return euclidean(parse_arg(rest).ok_or_else(|| Error::UnknownGroup(t.into()))?);
    }
    if let Some(rest) = t.strip_prefix("diagonal_A(") {
        return diagonal_a(parse_arg(rest).ok_or_else(|| Error::UnknownGroup(t.into()))?);
    }
    if let Some(rest) = t.strip_prefix("unipotent_N(") {
        return unipotent_n(parse_arg(rest).ok_or_else(|| Error::UnknownGroup(t.into()))?);
    }
    if let Some(rest) = t.strip_prefix("special_orthogonal(") {
        return special_orthogonal(parse_arg(rest).ok_or_else(|| Error::UnknownGroup(t.into()))?);
    }
    if t == "special_linear(2)" || t == "SL2" {
        return special_linear2();
    }
    let (prefix, digits): (&str, &str) = if let Some(d) = t.strip_prefix("SO") {
        ("SO", d)
    } else if let Some(d) = t.strip_prefix("R") {
        ("R", d)
    } else if let Some(d) = t.strip_prefix("A") {
        ("A", d)
    } else if let Some(d) = t.strip_prefix("N") {
        ("N", d)
    } else {
        return Err(Error::UnknownGroup(t.into()));
    };
    let m: usize = digits.parse().map_err(|_| Error::UnknownGroup(t.into()))?;
    match prefix {
        "R" => euclidean(m),
        "A" => diagonal_a(m),
        "N" => unipotent_n(m),
        "SO" => special_orthogonal(m),
        _ => Err(Error::UnknownGroup(t.into())),
    }
}

pub fn euclidean(n: usize) -> Result<Arc<GroupModel>> {
    if n == 0 || n > 8 {
        return Err(Error::UnknownGroup(format!("euclidean({})", n)));
    }
    let ambient = n + 1;
    let lie_basis: Vec<Matrix> = (0..n)
        .map(|i| {
            let mut z = Matrix::zeros(ambient, ambient);
            z.set(i, n, 1.0);
            z
        })
        .collect();
    Ok(Arc::new(GroupModel {
        name: format!("R{}", n),
        ambient_dim: ambient,
        lie_basis,
        haar_window: Some(HaarWindow {
            description: format!("translation box [-2,2]^{}", n),
            proposal_volume: 4.0f64.powi(n as i32),
            inradius_chart: 2.0,
        }),
        is_abelian: true,
        kind: GroupKind::Euclidean(n),
    }))
}

pub fn diagonal_a(m: usize) -> Result<Arc<GroupModel>> {
    if m < 2 || m > 8 {
        return Err(Error::UnknownGroup(format!("diagonal_A({})", m)));
    }
    // orthonormalize diag(e_i - e_{i+1}) under the Frobenius inner product
    let mut raw: Vec<Vec<f64>> = Vec::new();
    for i in 0..(m - 1) {
        let mut v = vec![0.0; m];
        v[i] = 1.0;
        v[i + 1] = -1.0;
        raw.push(v);
    }
    let mut ortho: Vec<Vec<f64>> = Vec::new();
    for mut v in raw {
        for u in &ortho {
            let c: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= c * ui;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        ortho.push(v);
    }
    let lie_basis: Vec<Matrix> = ortho
        .iter()
        .map(|v| Matrix::from_fn(m, m, |i, j| if i == j { v[i] } else { 0.0 }))
        .collect();
    let d = m - 1;
    Ok(Arc::new(GroupModel {
        name: format!("A{}", m),
        ambient_dim: m,
        lie_basis,
        haar_window: Some(HaarWindow {
            description: format!("log-coordinate box [-1,1]^{}", d),
            proposal_volume: 2.0f64.powi(d as i32),
            inradius_chart: 1.0,
        }),
        is_abelian: true,
        kind: GroupKind::DiagonalA(m),
    }))
}

pub fn unipotent_n(m: usize) -> Result<Arc<GroupModel>> {
    if m < 2 || m > 8 {
        return Err(Error::UnknownGroup(format!("unipotent_N({})", m)));
    }
    let mut lie_basis = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let mut z = Matrix::zeros(m, m);
            z.set(i, j, 1.0);
            lie_basis.push(z);
        }
    }
    let d = lie_basis.len();
    Ok(Arc::new(GroupModel {
        name: format!("N{}", m),
        ambient_dim: m,
        lie_basis,
        haar_window: Some(HaarWindow {
            description: format!("entry box [-1,1]^{}", d),
            proposal_volume: 2.0f64.powi(d as i32),
            inradius_chart: 1.0,
        }),
        is_abelian: m <= 2,
        kind: GroupKind::UnipotentN(m),
    }))
}

pub fn special_orthogonal(m: usize) -> Result<Arc<GroupModel>> {
    if m < 2 || m > 8 {
        return Err(Error::UnknownGroup(format!("special_orthogonal({})", m)));
    }
    let mut lie_basis = Vec::new();
    let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
    for i in 0..m {
        for j in (i + 1)..m {
            let mut z = Matrix::zeros(m, m);
            z.set(i, j, inv_sqrt2);
            z.set(j, i, -inv_sqrt2);
            lie_basis.push(z);
        }
    }
    Ok(Arc::new(GroupModel {
        name: format!("SO{}", m),
        ambient_dim: m,
        lie_basis,
        haar_window: Some(HaarWindow {
            description: "full group, exact Haar via orthogonalized Gaussians".into(),
            proposal_volume: 1.0,
            inradius_chart: f64::INFINITY,
        }),
        is_abelian: m <= 2,
        kind: GroupKind::SpecialOrthogonal(m),
    }))
}

pub fn special_linear2() -> Result<Arc<GroupModel>> {
    let h = Matrix::new(2, 2, vec![1.0, 0.0, 0.0, -1.0])?.scale(1.0 / 2.0f64.sqrt());
    let e = Matrix::new(2, 2, vec![0.0, 1.0, 0.0, 0.0])?;
    let f = Matrix::new(2, 2, vec![0.0, 0.0, 1.0, 0.0])?;
    Ok(Arc::new(GroupModel {
        name: "SL2".into(),
        ambient_dim: 2,
        lie_basis: vec![h, e, f],
        haar_window: Some(HaarWindow {
            description: "Iwasawa box theta in [0,2pi), t in [-1,1], x in [-1,1], density e^t".into(),
            proposal_volume: 2.0 * PI * 2.0 * 2.0,
            inradius_chart: 1.0,
        }),
        is_abelian: false,
        kind: GroupKind::SpecialLinear2,
    }))
}

pub fn product(components: Vec<Arc<GroupModel>>) -> Result<Arc<GroupModel>> {
    if components.is_empty() {
        return Err(Error::UnknownGroup("empty product".into()));
    }
    if components.len() == 1 {
        return Ok(components.into_iter().next().unwrap());
    }
    let ambient: usize = components.iter().map(|c| c.ambient_dim).sum();
    let mut lie_basis = Vec::new();
    let mut offset = 0;
    for comp in &components {
        for z in &comp.lie_basis {
            let mut big = Matrix::zeros(ambient, ambient);
            for i in 0..comp.ambient_dim {
                for j in 0..comp.ambient_dim {
                    big.set(offset + i, offset + j, z.get(i, j));
                }
            }
            lie_basis.push(big);
        }
        offset += comp.ambient_dim;
    }
    let window = if components.iter().all(|c| c.haar_window.is_some()) {
        let vol: f64 = components
            .iter()
            .map(|c| c.haar_window.as_ref().unwrap().proposal_volume)
            .product();
        let inr = components
            .iter()
            .map(|c| c.haar_window.as_ref().unwrap().inradius_chart)
            .fold(f64::INFINITY, f64::min);
        Some(HaarWindow {
            description: "product of component windows".into(),
            proposal_volume: vol,
            inradius_chart: inr,
        })
    } else {
        None
    };
    let name = components.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join("x");
    Ok(Arc::new(GroupModel {
        name,
        ambient_dim: ambient,
        lie_basis,
        haar_window: window,
        is_abelian: components.iter().all(|c| c.is_abelian),
        kind: GroupKind::Product(components),
    }))
}

// ---------------------------------------------------------------------------
// elements and charts

impl GroupModel {
    pub fn dim(&self) -> usize {
        self.lie_basis.len()
    }

    pub fn epsilon_chart(&self) -> f64 {
        match &self.kind {
            GroupKind::Euclidean(_) | GroupKind::DiagonalA(_) | GroupKind::UnipotentN(_) => {
                f64::INFINITY
            }
            GroupKind::SpecialOrthogonal(_) | GroupKind::SpecialLinear2 => EPSILON_CHART,
            GroupKind::Product(comps) => comps
                .iter()
                .map(|c| c.epsilon_chart())
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn identity(self: &Arc<Self>) -> GroupElement {
        GroupElement { group: self.clone(), mat: Matrix::identity(self.ambient_dim) }
    }

    /// Validate the defining constraints of the group within CONSTRAINT_TOL.
    pub fn contains(&self, mat: &Matrix) -> bool {
        if mat.rows != self.ambient_dim || mat.cols != self.ambient_dim {
            return false;
        }
        match &self.kind {
            GroupKind::Euclidean(n) => {
                let n = *n;
                for i in 0..=n {
                    for j in 0..=n {
                        let want = if i == j { 1.0 } else { 0.0 };
                        if j == n && i < n {
                            continue; // translation entries are free
                        }
                        if (mat.get(i, j) - want).abs() > CONSTRAINT_TOL {
                            return false;
                        }
                    }
                }
                true
            }
            GroupKind::DiagonalA(m) => {
                let m = *m;
                let mut det = 1.0;
                for i in 0..m {
                    for j in 0..m {
                        if i != j && mat.get(i, j).abs() > CONSTRAINT_TOL {
                            return false;
                        }
                    }
                    if mat.get(i, i) <= 0.0 {
                        return false;
                    }
                    det *= mat.get(i, i);
                }
                (det - 1.0).abs() <= CONSTRAINT_TOL * 10.0
            }
            GroupKind::UnipotentN(m) => {
                let m = *m;
                for i in 0..m {
                    if (mat.get(i, i) - 1.0).abs() > CONSTRAINT_TOL {
                        return false;
                    }
                    for j in 0..i {
                        if mat.get(i, j).abs() > CONSTRAINT_TOL {
                            return false;
                        }
                    }
                }
                true
            }
            GroupKind::SpecialOrthogonal(_) => {
                let gram = mat.transpose().mul(mat);
                let id = Matrix::identity(mat.rows);
                gram.sub(&id).max_abs() <= CONSTRAINT_TOL * 10.0
                    && (mat.det() - 1.0).abs() <= CONSTRAINT_TOL * 10.0
            }
            GroupKind::SpecialLinear2 => (mat.det() - 1.0).abs() <= CONSTRAINT_TOL * 10.0,
            GroupKind::Product(comps) => {
                // assign each ambient index to its component, then require
                // off-block entries to vanish and each block to pass its check
                let mut comp_of = Vec::with_capacity(self.ambient_dim);
                for (c, comp) in comps.iter().enumerate() {
                    comp_of.extend(std::iter::repeat(c).take(comp.ambient_dim));
                }
                for i in 0..mat.rows {
                    for j in 0..mat.cols {
                        if comp_of[i] != comp_of[j] && mat.get(i, j).abs() > CONSTRAINT_TOL {
                            return false;
                        }
                    }
                }
                let mut offset = 0;
                for comp in comps {
                    let block = extract_block(mat, offset, comp.ambient_dim);
                    if !comp.contains(&block) {
                        return false;
                    }
                    offset += comp.ambient_dim;
                }
                true
            }
        }
    }

    pub fn element(self: &Arc<Self>, mat: Matrix) -> Result<GroupElement> {
        if !self.contains(&mat) {
            return Err(Error::InvalidInput(format!(
                "matrix violates the defining constraints of {}",
                self.name
            )));
        }
        Ok(GroupElement { group: self.clone(), mat })
    }

    /// Linear combination of the Lie basis.
    pub fn algebra_from_coords(&self, coords: &[f64]) -> Matrix {
        debug_assert_eq!(coords.len(), self.dim());
        let mut x = Matrix::zeros(self.ambient_dim, self.ambient_dim);
        for (c, z) in coords.iter().zip(&self.lie_basis) {
            if *c != 0.0 {
                x = x.add(&z.scale(*c));
            }
        }
        x
    }

    pub fn exp_coords(self: &Arc<Self>, coords: &[f64]) -> Result<GroupElement> {
        let x = self.algebra_from_coords(coords);
        let mat = matrix_exp(&x)?;
        Ok(GroupElement { group: self.clone(), mat })
    }

    /// Chart coordinates of log(mat) in the Lie basis. Exact per-kind formulas
    /// for the globally-charted kinds; the generic near-identity log otherwise.
    pub fn log_coords(&self, mat: &Matrix) -> Result<Vec<f64>> {
        match &self.kind {
            GroupKind::Euclidean(n) => Ok((0..*n).map(|i| mat.get(i, *n)).collect()),
            GroupKind::DiagonalA(m) => {
                let x = Matrix::from_fn(*m, *m, |i, j| if i == j { mat.get(i, i).ln() } else { 0.0 });
                Ok(self.lie_basis.iter().map(|z| x.frobenius_inner(z)).collect())
            }
            GroupKind::UnipotentN(m) => {
                // Mercator series terminates exactly for nilpotent input.
                let e = mat.sub(&Matrix::identity(*m));
                let mut term = e.clone();
                let mut log = e.clone();
                for k in 2..*m {
                    term = term.mul(&e);
                    let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
                    log = log.add(&term.scale(sign / k as f64));
                }
                Ok(self.lie_basis.iter().map(|z| log.frobenius_inner(z)).collect())
            }
            GroupKind::SpecialOrthogonal(_) | GroupKind::SpecialLinear2 => {
                let x = matrix_log(mat)?;
                Ok(self.lie_basis.iter().map(|z| x.frobenius_inner(z)).collect())
            }
            GroupKind::Product(comps) => {
                let mut coords = Vec::with_capacity(self.dim());
                let mut offset = 0;
                for comp in comps {
                    let block = extract_block(mat, offset, comp.ambient_dim);
                    coords.extend(comp.log_coords(&block)?);
                    offset += comp.ambient_dim;
                }
                Ok(coords)
            }
        }
    }

    /// Chart norm: Euclidean for atomic groups, sup over components for products.
    pub fn chart_norm(&self, coords: &[f64]) -> f64 {
        match &self.kind {
            GroupKind::Product(comps) => {
                let mut worst = 0.0f64;
                let mut offset = 0;
                for comp in comps {
                    let d = comp.dim();
                    worst = worst.max(comp.chart_norm(&coords[offset..offset + d]));
                    offset += d;
                }
                worst
            }
            _ => coords.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }

    /// Chart norm of log(g); the distance from the identity in the chart metric.
    pub fn log_norm(&self, g: &GroupElement) -> Result<f64> {
        Ok(self.chart_norm(&self.log_coords(&g.mat)?))
    }
}

fn extract_block(mat: &Matrix, offset: usize, size: usize) -> Matrix {
    Matrix::from_fn(size, size, |i, j| mat.get(offset + i, offset + j))
}

impl GroupElement {
    pub fn mul(&self, other: &GroupElement) -> GroupElement {
        debug_assert_eq!(self.group.name, other.group.name);
        GroupElement { group: self.group.clone(), mat: self.mat.mul(&other.mat) }
    }

    pub fn inv(&self) -> GroupElement {
        let mat = match &self.group.kind {
            GroupKind::SpecialOrthogonal(_) => self.mat.transpose(),
            _ => self
                .mat
                .inverse()
                .expect("group elements are invertible by construction"),
        };
        GroupElement { group: self.group.clone(), mat }
    }
}

// ---------------------------------------------------------------------------
// sampling

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one value per call keeps the stream layout simple
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Uniform direction on the unit sphere in R^n.
pub fn unit_direction(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Uniform draw from the chart ball of radius eps: exp(Z) with Z uniform on
/// the Euclidean eps-ball in Lie-basis coordinates (per component for products).
pub fn ball_sample(ball: &CoordinateBall, rng: &mut ChaCha8Rng) -> GroupElement {
    let group = &ball.group;
    let coords = ball_coords(group, ball.epsilon, rng);
    group
        .exp_coords(&coords)
        .expect("exp of a chart ball element is always defined")
}

fn ball_coords(group: &Arc<GroupModel>, eps: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match &group.kind {
        GroupKind::Product(comps) => {
            let mut coords = Vec::with_capacity(group.dim());
            for comp in comps {
                coords.extend(ball_coords(comp, eps, rng));
            }
            coords
        }
        _ => {
            let d = group.dim();
            if eps == 0.0 {
                return vec![0.0; d];
            }
            let mut g: Vec<f64> = (0..d).map(|_| standard_normal(rng)).collect();
            let norm: f64 = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return vec![0.0; d];
            }
            let u: f64 = rng.gen();
            let r = eps * u.powf(1.0 / d as f64);
            g.iter_mut().for_each(|x| *x *= r / norm);
            g
        }
    }
}

/// Draw from the group's bounded proposal window together with the importance
/// weight (Haar density over proposal density). Weighted means multiplied by
/// the proposal volume estimate Haar integrals over the window.
pub fn haar_sample_window(
    group: &Arc<GroupModel>,
    rng: &mut ChaCha8Rng,
) -> Result<(GroupElement, f64)> {
    if group.haar_window.is_none() {
        return Err(Error::NoWindow(group.name.clone()));
    }
    let (mat, weight) = haar_sample_mat(group, rng)?;
    Ok((GroupElement { group: group.clone(), mat }, weight))
}

fn haar_sample_mat(group: &Arc<GroupModel>, rng: &mut ChaCha8Rng) -> Result<(Matrix, f64)> {
    match &group.kind {
        GroupKind::Euclidean(n) => {
            let n = *n;
            let mut mat = Matrix::identity(n + 1);
            for i in 0..n {
                mat.set(i, n, rng.gen_range(-2.0..=2.0));
            }
            Ok((mat, 1.0))
        }
        GroupKind::DiagonalA(_) => {
            let d = group.dim();
            let coords: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let x = group.algebra_from_coords(&coords);
            Ok((matrix_exp(&x)?, 1.0))
        }
        GroupKind::UnipotentN(m) => {
            let m = *m;
            let mut mat = Matrix::identity(m);
            for i in 0..m {
                for j in (i + 1)..m {
                    mat.set(i, j, rng.gen_range(-1.0..=1.0));
                }
            }
            // Haar on the unitriangular group is Lebesgue on the entries
            Ok((mat, 1.0))
        }
        GroupKind::SpecialOrthogonal(m) => {
            let m = *m;
            loop {
                let g = Matrix::from_fn(m, m, |_, _| standard_normal(rng));
                match kan_decompose(&g) {
                    Ok(d) => {
                        let mut k = d.k;
                        if k.det() < 0.0 {
                            // right-multiply by diag(1,..,1,-1): Haar-preserving map onto SO(m)
                            for i in 0..m {
                                let v = -k.get(i, m - 1);
                                k.set(i, m - 1, v);
                            }
                        }
                        return Ok((k, 1.0));
                    }
                    Err(_) => continue, // measure-zero singular draw; redraw
                }
            }
        }
        GroupKind::SpecialLinear2 => {
            let theta: f64 = rng.gen_range(0.0..2.0 * PI);
            let t: f64 = rng.gen_range(-1.0..=1.0);
            let x: f64 = rng.gen_range(-1.0..=1.0);
            let k = Matrix::new(2, 2, vec![theta.cos(), -theta.sin(), theta.sin(), theta.cos()])?;
            let a = Matrix::new(2, 2, vec![(t / 2.0).exp(), 0.0, 0.0, (-t / 2.0).exp()])?;
            let n = Matrix::new(2, 2, vec![1.0, x, 0.0, 1.0])?;
            // Haar in these coordinates has density proportional to e^t
            Ok((k.mul(&a).mul(&n), t.exp()))
        }
        GroupKind::Product(comps) => {
            let mut mat = Matrix::identity(group.ambient_dim);
            let mut weight = 1.0;
            let mut offset = 0;
            for comp in comps {
                let (block, w) = haar_sample_mat(comp, rng)?;
                for i in 0..comp.ambient_dim {
                    for j in 0..comp.ambient_dim {
                        mat.set(offset + i, offset + j, block.get(i, j));
                    }
                }
                weight *= w;
                offset += comp.ambient_dim;
            }
            Ok((mat, weight))
        }
    }
}

// ---------------------------------------------------------------------------
// adjoint and additivity

/// Matrix of Ad_g : Z -> g Z g^{-1} in the orthonormal Lie basis.
pub fn ad_matrix(g: &GroupElement) -> Matrix {
    let group = &g.group;
    let d = group.dim();
    let g_inv = g.inv();
    let mut ad = Matrix::zeros(d, d);
    for (j, z) in group.lie_basis.iter().enumerate() {
        let w = g.mat.mul(z).mul(&g_inv.mat);
        for (i, zi) in group.lie_basis.iter().enumerate() {
            ad.set(i, j, w.frobenius_inner(zi));
        }
    }
    ad
}

/// Largest singular value of Ad_g; the factor by which conjugation by g can
/// inflate coordinate balls.
pub fn ad_operator_norm(g: &GroupElement) -> f64 {
    ad_matrix(g).op_norm()
}

/// Sampled maximum of ||Ad_g|| over the Haar window; exact 1 for abelian and
/// orthogonal groups where conjugation is an isometry of the chart.
pub fn window_ad_bound(group: &Arc<GroupModel>, seed: u64) -> f64 {
    match &group.kind {
        GroupKind::Euclidean(_) | GroupKind::DiagonalA(_) => 1.0,
        GroupKind::SpecialOrthogonal(_) => 1.0,
        GroupKind::UnipotentN(2) => 1.0,
        GroupKind::Product(comps) => comps
            .iter()
            .map(|c| window_ad_bound(c, seed))
            .fold(1.0f64, f64::max),
        _ => {
            let tracker = accumulate(128, seed, MaxTracker::default(), |acc, rng| {
                if let Ok((g, _)) = haar_sample_window(group, rng) {
                    acc.push(ad_operator_norm(&g));
                }
            });
            tracker.max.max(1.0)
        }
    }
}

#[derive(Clone, Default)]
struct AdditivityPartial {
    max_ratio: f64,
    samples: usize,
}

impl Mergeable for AdditivityPartial {
    fn merge(&mut self, other: Self) {
        self.max_ratio = self.max_ratio.max(other.max_ratio);
        self.samples += other.samples;
    }
}

/// Empirical additivity constant: largest observed ||log(uv)|| / (eps+delta)
/// over u in O_eps, v in O_delta with eps, delta <= eps_max. Equals 1 exactly
/// for abelian models.
pub fn additivity_constant(
    group: &Arc<GroupModel>,
    eps_max: f64,
    n_samples: usize,
    seed: u64,
) -> AdditivityEstimate {
    if group.is_abelian {
        return AdditivityEstimate { c: 1.0, samples: 0, exact: true };
    }
    let part = accumulate(n_samples, seed, AdditivityPartial::default(), |acc, rng| {
        let eps = rng.gen_range(f64::EPSILON..=eps_max);
        let delta = rng.gen_range(f64::EPSILON..=eps_max);
        let u = ball_sample(&CoordinateBall { group: group.clone(), epsilon: eps }, rng);
        let v = ball_sample(&CoordinateBall { group: group.clone(), epsilon: delta }, rng);
        let w = u.mul(&v);
        if let Ok(norm) = group.log_norm(&w) {
            let ratio = norm / (eps + delta);
            if ratio > acc.max_ratio {
                acc.max_ratio = ratio;
            }
        }
        acc.samples += 1;
    });
    AdditivityEstimate { c: part.max_ratio.max(1.0), samples: part.samples, exact: false }
}
