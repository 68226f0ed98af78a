//! Lattice bases: shortest vectors, reduction into Siegel coordinates,
//! membership testing with active-constraint reporting, canonical sign
//! normalization, shape representatives, and the orthogonal-complement
//! duality map on split bases.

use crate::error::{Error, Result};
use crate::intmat::IntMatrix;
use crate::matrix::{kan_decompose, KanDecomposition, Matrix, TOL_LIN};
use serde::{Deserialize, Serialize};

/// Largest rank accepted by the enumeration routines.
pub const MAX_RANK: usize = 8;

/// Relative slack used when comparing lengths during membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Full-rank lattice basis; columns generate the lattice.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeBasis {
    pub mat: Matrix,
}

impl LatticeBasis {
    pub fn new(mat: Matrix) -> Result<Self> {
        if mat.rows != mat.cols {
            return Err(Error::InvalidInput(format!(
                "lattice basis must be square, got {}x{}",
                mat.rows, mat.cols
            )));
        }
        if mat.rows > MAX_RANK {
            return Err(Error::RankTooLarge(format!(
                "rank {} exceeds the enumeration cap {}",
                mat.rows, MAX_RANK
            )));
        }
        // reject singular input up front; kan_decompose applies the same test
        kan_decompose(&mat)?;
        Ok(LatticeBasis { mat })
    }

    pub fn rank(&self) -> usize {
        self.mat.rows
    }
}

/// A shortest nonzero lattice vector together with its integer coordinates
/// in the input basis.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShortestVector {
    pub vector: Vec<f64>,
    pub coefficients: Vec<i64>,
    pub length: f64,
    /// number of enumeration candidates inspected
    pub candidates_tested: usize,
}

/// Basis in Siegel coordinates: reduced = input * transform, with the
/// factorization reduced = k * diag(a) * n and phi the columns of k.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReducedBasis {
    pub reduced: Matrix,
    pub transform: IntMatrix,
    pub kan: KanDecomposition,
    pub a: Vec<f64>,
    pub n_coeffs: Matrix,
    pub phi: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SiegelMembershipReport {
    pub member: bool,
    pub violations: Vec<String>,
    /// constraints met with equality within MEMBERSHIP_TOL
    pub active_inequalities: Vec<String>,
    pub candidate_vectors_tested: usize,
}

// ---------------------------------------------------------------------------
// shortest vector

/// All integer coefficient vectors x != 0 with ||Rx|| <= bound, for R upper
/// triangular with positive diagonal. Returns (candidates, nodes visited).
fn enumerate_below(r: &Matrix, bound: f64) -> (Vec<(Vec<i64>, f64)>, usize) {
    let m = r.rows;
    let bound2 = bound * bound;
    let mut out = Vec::new();
    let mut x = vec![0i64; m];
    let mut tested = 0usize;

    // depth-first over coordinates m-1 down to 0; partial[i] = squared norm
    // contributed by coordinates > i
    fn descend(
        r: &Matrix,
        i: usize,
        x: &mut Vec<i64>,
        partial: f64,
        bound2: f64,
        out: &mut Vec<(Vec<i64>, f64)>,
        tested: &mut usize,
    ) {
        let m = r.rows;
        // residual budget for coordinate i
        let radius = ((bound2 - partial).max(0.0)).sqrt();
        let rii = r.get(i, i);
        // center of the allowed interval for x_i
        let mut shift = 0.0;
        for j in (i + 1)..m {
            shift += r.get(i, j) * x[j] as f64;
        }
        let center = -shift / rii;
        let lo = ((center - radius / rii) - 1e-12).ceil() as i64;
        let hi = ((center + radius / rii) + 1e-12).floor() as i64;
        for xi in lo..=hi {
            x[i] = xi;
            let term = rii * xi as f64 + shift;
            let new_partial = partial + term * term;
            if new_partial > bound2 * (1.0 + 1e-12) {
                continue;
            }
            *tested += 1;
            if i == 0 {
                if x.iter().any(|&c| c != 0) {
                    out.push((x.clone(), new_partial));
                }
            } else {
                descend(r, i - 1, x, new_partial, bound2, out, tested);
            }
        }
        x[i] = 0;
    }

    descend(r, m - 1, &mut x, 0.0, bound2, &mut out, &mut tested);
    (out, tested)
}

/// Floating-point LLL with delta = 0.99; returns the unimodular transform.
/// Used as preprocessing so the enumeration bound starts near the minimum.
fn lll_transform(basis: &Matrix) -> Result<IntMatrix> {
    let m = basis.cols;
    let mut b = basis.clone();
    let mut u = IntMatrix::identity(m);
    let delta = 0.99;
    let mut iterations = 0usize;
    loop {
        iterations += 1;
        if iterations > 10_000 {
            break; // float LLL can cycle on near-degenerate input; bail to enumeration
        }
        // size-reduce columns against earlier ones, freshest coefficients each step
        let mut touched = false;
        for j in 1..m {
            for i in (0..j).rev() {
                let kan = kan_decompose(&b)?;
                let q = kan.n.get(i, j).round();
                if q != 0.0 {
                    for rr in 0..b.rows {
                        let v = b.get(rr, j) - q * b.get(rr, i);
                        b.set(rr, j, v);
                    }
                    u.col_axpy(j, -(q as i64), i);
                    touched = true;
                }
            }
        }
        let kan = kan_decompose(&b)?;
        // Lovasz condition between consecutive columns
        let mut swapped = false;
        for j in 0..(m - 1) {
            let aj = kan.a[j];
            let aj1 = kan.a[j + 1];
            let mu = kan.n.get(j, j + 1);
            if aj1 * aj1 + (mu * aj) * (mu * aj) < delta * aj * aj {
                // swap columns j and j+1
                for rr in 0..b.rows {
                    let t = b.get(rr, j);
                    b.set(rr, j, b.get(rr, j + 1));
                    b.set(rr, j + 1, t);
                }
                let cj = u.column(j);
                let cj1 = u.column(j + 1);
                for rr in 0..m {
                    u.set(rr, j, cj1[rr]);
                    u.set(rr, j + 1, cj[rr]);
                }
                swapped = true;
                break;
            }
        }
        if !swapped && !touched {
            break;
        }
    }
    Ok(u)
}

/// Shortest nonzero vector of the lattice spanned by the columns of `basis`.
///
/// Ties at the minimum length are broken deterministically: each candidate is
/// sign-normalized so the first nonzero coordinate of the real vector is
/// positive, then the candidate with the smallest reversed-absolute
/// coefficient tuple (|x_m|, ..., |x_1|) wins, with the signed tuple as the
/// final key.
pub fn shortest_vector(basis: &Matrix) -> Result<ShortestVector> {
    if basis.rows != basis.cols {
        return Err(Error::InvalidInput(format!(
            "shortest_vector expects a square basis, got {}x{}",
            basis.rows, basis.cols
        )));
    }
    let m = basis.cols;
    if m > MAX_RANK {
        return Err(Error::RankTooLarge(format!(
            "rank {} exceeds the enumeration cap {}",
            m, MAX_RANK
        )));
    }
    // LLL preprocessing shrinks the enumeration bound
    let u = lll_transform(basis)?;
    let pre = basis.mul(&u.to_float());
    let kan = kan_decompose(&pre)?;
    let mut r = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            r.set(i, j, kan.a[i] * kan.n.get(i, j));
        }
    }
    // bound: shortest column of the preprocessed basis
    let mut bound2 = f64::INFINITY;
    for j in 0..m {
        let len2: f64 = (0..m).map(|i| pre.get(i, j) * pre.get(i, j)).sum();
        bound2 = bound2.min(len2);
    }
    let (candidates, tested) = enumerate_below(&r, bound2.sqrt() * (1.0 + 1e-9));
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no nonzero lattice vector found".into()));
    }
    let min2 = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let tol = min2 * 1e-12;
    let mut best: Option<(Vec<i64>, Vec<f64>)> = None;
    for (coeffs_pre, norm2) in &candidates {
        if *norm2 > min2 + tol {
            continue;
        }
        // map back to coefficients in the caller's basis
        let mut coeffs: Vec<i64> = (0..m)
            .map(|i| (0..m).map(|j| u.get(i, j) * coeffs_pre[j]).sum())
            .collect();
        let mut vector: Vec<f64> = (0..m)
            .map(|i| (0..m).map(|j| basis.get(i, j) * coeffs[j] as f64).sum())
            .collect();
        // sign normalization: first nonzero coordinate of the point positive
        if let Some(first) = vector.iter().find(|v| v.abs() > TOL_LIN) {
            if *first < 0.0 {
                coeffs.iter_mut().for_each(|c| *c = -*c);
                vector.iter_mut().for_each(|v| *v = -*v);
            }
        }
        let better = match &best {
            None => true,
            Some((bc, _)) => {
                let key = |c: &[i64]| -> (Vec<i64>, Vec<i64>) {
                    (c.iter().rev().map(|x| x.abs()).collect(), c.to_vec())
                };
                key(&coeffs) < key(bc)
            }
        };
        if better {
            best = Some((coeffs, vector));
        }
    }
    let (coefficients, vector) = best.unwrap();
    Ok(ShortestVector { vector, coefficients, length: min2.sqrt(), candidates_tested: tested })
}

// ---------------------------------------------------------------------------
// reduction

/// Extend a primitive integer vector to a unimodular matrix having it as the
/// first column, by inverting the elementary row operations that reduce the
/// vector to e_1.
fn unimodular_completion(alpha: &[i64]) -> Result<IntMatrix> {
    let k = alpha.len();
    let mut v = alpha.to_vec();
    let mut m = IntMatrix::identity(k);
    // gcd sweep: repeatedly reduce all entries modulo the smallest nonzero
    loop {
        let nonzero: Vec<usize> = (0..k).filter(|&i| v[i] != 0).collect();
        if nonzero.is_empty() {
            return Err(Error::InvalidInput("zero vector cannot be completed".into()));
        }
        if nonzero.len() == 1 {
            let p = nonzero[0];
            if v[p].abs() != 1 {
                return Err(Error::InvalidInput(format!(
                    "vector {:?} is not primitive",
                    alpha
                )));
            }
            // move to slot 0: swap rows p,0 of v  <=>  swap columns p,0 of m
            if p != 0 {
                v.swap(0, p);
                let c0 = m.column(0);
                let cp = m.column(p);
                for r in 0..k {
                    m.set(r, 0, cp[r]);
                    m.set(r, p, c0[r]);
                }
            }
            if v[0] == -1 {
                v[0] = 1;
                m.negate_column(0);
            }
            return Ok(m);
        }
        let p = *nonzero
            .iter()
            .min_by_key(|&&i| v[i].abs())
            .expect("nonempty");
        for &i in &nonzero {
            if i == p {
                continue;
            }
            let q = v[i] / v[p]; // truncated quotient keeps remainders shrinking
            if q != 0 {
                // row op v_i -= q v_p  <=>  column op m_p += q m_i
                v[i] -= q * v[p];
                m.col_axpy(p, q, i);
            } else {
                // |v_i| < |v_p| cannot happen for the minimum; swap roles next pass
            }
        }
        // entries with remainder 0 vanish; otherwise strictly smaller than |v_p|
    }
}

fn embed_block(v: &IntMatrix, offset: usize, m: usize) -> IntMatrix {
    let mut big = IntMatrix::identity(m);
    for i in 0..v.rows {
        for j in 0..v.cols {
            big.set(offset + i, offset + j, v.get(i, j));
        }
    }
    big
}

fn r_factor(kan: &KanDecomposition) -> Matrix {
    let m = kan.n.rows;
    Matrix::from_fn(m, m, |i, j| if j >= i { kan.a[i] * kan.n.get(i, j) } else { 0.0 })
}

fn submatrix(r: &Matrix, from: usize) -> Matrix {
    let s = r.rows - from;
    Matrix::from_fn(s, s, |i, j| r.get(from + i, from + j))
}

fn assemble(basis: &Matrix, u: &IntMatrix) -> Result<(Matrix, KanDecomposition)> {
    let reduced = basis.mul(&u.to_float());
    let kan = kan_decompose(&reduced)?;
    Ok((reduced, kan))
}

/// Reduce a basis into the Siegel set: at every level the chosen column
/// attains the minimum of the projected lattice, the unit-triangular
/// coefficients are size-reduced to |n_ij| <= 1/2, and the reduced basis has
/// positive determinant.
pub fn reduce_basis(basis: &LatticeBasis) -> Result<ReducedBasis> {
    let m = basis.rank();
    let mut u = IntMatrix::identity(m);
    for level in 0..m {
        let (_, kan) = assemble(&basis.mat, &u)?;
        let r = r_factor(&kan);
        let sub = submatrix(&r, level);
        let sv = shortest_vector(&sub)?;
        if level + 1 == m {
            // rank-one tail: just fix the sign
            if sv.coefficients[0] < 0 {
                u.negate_column(m - 1);
            }
        } else {
            let v = unimodular_completion(&sv.coefficients)?;
            u = u.mul(&embed_block(&v, level, m));
        }
    }
    // size reduction on the unit-triangular coefficients
    let (_, kan) = assemble(&basis.mat, &u)?;
    let mut n = kan.n.clone();
    for j in 1..m {
        for i in (0..j).rev() {
            let q = n.get(i, j).round();
            if q != 0.0 {
                for row in 0..=i {
                    let v = n.get(row, j) - q * n.get(row, i);
                    n.set(row, j, v);
                }
                u.col_axpy(j, -(q as i64), i);
            }
        }
    }
    // orientation: flipping the last column leaves all bounds intact
    let (reduced, kan) = assemble(&basis.mat, &u)?;
    if reduced.det() < 0.0 {
        u.negate_column(m - 1);
    }
    let (reduced, kan) = if reduced.det() < 0.0 {
        assemble(&basis.mat, &u)?
    } else {
        (reduced, kan)
    };
    debug_assert!(u.is_unimodular());
    let phi = (0..m).map(|j| kan.k.column(j)).collect();
    Ok(ReducedBasis {
        reduced,
        transform: u,
        a: kan.a.clone(),
        n_coeffs: kan.n.clone(),
        phi,
        kan,
    })
}

// ---------------------------------------------------------------------------
// membership

/// Check the Siegel conditions directly on a basis: every |n_ij| <= 1/2 and,
/// at every level, the diagonal entry a_j attains the minimum length of the
/// lattice projected past the first j columns.
pub fn is_in_reduced_siegel_set(basis: &LatticeBasis) -> Result<SiegelMembershipReport> {
    siegel_membership(basis, MEMBERSHIP_TOL)
}

/// Membership report with an explicit tolerance for both violations and
/// boundary activity, for callers that need a wider activity band.
pub fn siegel_membership(basis: &LatticeBasis, tol: f64) -> Result<SiegelMembershipReport> {
    let m = basis.rank();
    let kan = kan_decompose(&basis.mat)?;
    let mut violations = Vec::new();
    let mut active = Vec::new();
    let mut tested = 0usize;

    for j in 0..m {
        for i in 0..j {
            let nij = kan.n.get(i, j);
            if nij.abs() > 0.5 + tol {
                violations.push(format!("|n[{}][{}]| = {:.6} exceeds 1/2", i, j, nij.abs()));
            } else if (nij.abs() - 0.5).abs() <= tol {
                active.push(format!("|n[{}][{}]| = 1/2", i, j));
            }
        }
    }

    let r = r_factor(&kan);
    for level in 0..m {
        let sub = submatrix(&r, level);
        let sv = shortest_vector(&sub)?;
        tested += sv.candidates_tested;
        let aj = kan.a[level];
        if aj > sv.length * (1.0 + tol) {
            violations.push(format!(
                "level {}: a[{}] = {:.6} exceeds projected minimum {:.6}",
                level, level, aj, sv.length
            ));
        } else {
            // equality with a vector other than the chosen column marks the
            // basis as lying on the boundary of the region
            let (cands, extra) = enumerate_below(&sub, aj * (1.0 + tol));
            tested += extra;
            let tied_elsewhere = cands.iter().any(|(coeffs, _)| {
                !(coeffs[0].abs() == 1 && coeffs[1..].iter().all(|&c| c == 0))
            });
            if tied_elsewhere {
                active.push(format!("level {}: projected minimum attained twice", level));
            }
        }
    }

    Ok(SiegelMembershipReport {
        member: violations.is_empty(),
        violations,
        active_inequalities: active,
        candidate_vectors_tested: tested,
    })
}

// ---------------------------------------------------------------------------
// canonical signs

fn first_nonzero_sign(v: &[f64]) -> f64 {
    for &x in v {
        if x.abs() > TOL_LIN {
            return x.signum();
        }
    }
    0.0
}

/// Apply column sign flips s (product +1) to land in the canonical branch:
/// the governed first-row coefficients n_1j become nonnegative, free signs
/// prefer phi_j with positive leading coordinate, and of the two feasible
/// branches the one with the lexicographically larger phi-sign signature wins.
pub fn canonicalize(rb: &ReducedBasis) -> Result<ReducedBasis> {
    let m = rb.a.len();
    // governed column range for the first-row coefficients, 0-indexed
    let governed_start = if m % 2 == 0 { 2 } else { 1 };
    let zero_tol = 1e-12;

    let mut feasible: Vec<(Vec<f64>, Vec<f64>)> = Vec::new(); // (signs, signature)
    for &s1 in &[1.0f64, -1.0] {
        let mut s = vec![0.0f64; m];
        s[0] = s1;
        let mut free: Vec<usize> = Vec::new();
        for j in 1..m {
            if j >= governed_start && rb.n_coeffs.get(0, j).abs() > zero_tol {
                s[j] = s1 * rb.n_coeffs.get(0, j).signum();
            } else {
                // free index: prefer the sign that makes phi_j lead positive
                let lead = first_nonzero_sign(&rb.phi[j]);
                s[j] = if lead == 0.0 { 1.0 } else { lead };
                free.push(j);
            }
        }
        let parity: f64 = s.iter().product();
        if parity < 0.0 {
            match free.last() {
                Some(&j) => s[j] = -s[j],
                None => continue, // no free sign to absorb the parity flip
            }
        }
        let signature: Vec<f64> = (0..m)
            .map(|j| s[j] * first_nonzero_sign(&rb.phi[j]))
            .collect();
        feasible.push((s, signature));
    }
    let (s, _) = feasible
        .into_iter()
        .max_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .expect("signatures contain no NaN")
        })
        .ok_or_else(|| {
            Error::InvalidInput(
                "no feasible sign assignment; basis is degenerate".into(),
            )
        })?;

    // apply the flips to every view of the basis
    let mut transform = rb.transform.clone();
    let mut reduced = rb.reduced.clone();
    let mut k = rb.kan.k.clone();
    let mut n = rb.n_coeffs.clone();
    for j in 0..m {
        if s[j] < 0.0 {
            transform.negate_column(j);
            for i in 0..reduced.rows {
                reduced.set(i, j, -reduced.get(i, j));
                k.set(i, j, -k.get(i, j));
            }
        }
    }
    for i in 0..m {
        for j in (i + 1)..m {
            n.set(i, j, s[i] * s[j] * n.get(i, j));
        }
    }
    let phi = (0..m).map(|j| k.column(j)).collect();
    let kan = KanDecomposition { k, a: rb.a.clone(), n: n.clone() };
    Ok(ReducedBasis {
        reduced,
        transform,
        a: rb.a.clone(),
        n_coeffs: n,
        phi,
        kan,
    })
}

// ---------------------------------------------------------------------------
// shape and duality

/// Upper-triangular shape representative diag(a) * n, rescaled to unit
/// determinant; the orientation-and-rotation-free description of the lattice.
pub fn shape_representative(rb: &ReducedBasis) -> Matrix {
    let m = rb.a.len();
    let r = r_factor(&rb.kan);
    let det: f64 = rb.a.iter().product();
    let scale = det.powf(-1.0 / m as f64);
    Matrix::from_fn(m, m, |i, j| r.get(i, j) * scale)
}

/// Split basis (left | right) of complementary spans in R^m.
#[derive(Clone, Debug)]
pub struct SplitBasis {
    pub left: Matrix,
    pub right: Matrix,
}

/// Duality map on split bases: (A | B) -> (proj_{A-perp} B | A). Applying it
/// twice returns (A | proj_{A-perp} B).
pub fn duality_map(split: &SplitBasis) -> Result<SplitBasis> {
    let a = &split.left;
    let b = &split.right;
    if a.rows != b.rows {
        return Err(Error::DimensionMismatch(format!(
            "split parts live in different ambient spaces: {} vs {}",
            a.rows, b.rows
        )));
    }
    if a.cols + b.cols != a.rows {
        return Err(Error::InvalidInput(format!(
            "split must fill the ambient space: {} + {} != {}",
            a.cols, b.cols, a.rows
        )));
    }
    let gram = a.transpose().mul(a);
    let gram_inv = gram.inverse().map_err(|_| {
        Error::InvalidInput("left block is rank-deficient".into())
    })?;
    let projector = a.mul(&gram_inv).mul(&a.transpose());
    let mut perp = b.clone();
    let correction = projector.mul(b);
    for i in 0..perp.rows {
        for j in 0..perp.cols {
            let v = perp.get(i, j) - correction.get(i, j);
            perp.set(i, j, v);
        }
    }
    Ok(SplitBasis { left: perp, right: a.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::index_rng;
    use rand::Rng;

    fn mat(rows: usize, cols: usize, entries: &[f64]) -> Matrix {
        Matrix::new(rows, cols, entries.to_vec()).unwrap()
    }

    #[test]
    fn shortest_on_square_lattice_is_e1() {
        let sv = shortest_vector(&Matrix::identity(2)).unwrap();
        assert_eq!(sv.coefficients, vec![1, 0]);
        assert!((sv.length - 1.0).abs() < 1e-12);
        assert_eq!(sv.vector, vec![1.0, 0.0]);
    }

    #[test]
    fn shortest_on_hexagonal_lattice_prefers_first_column() {
        let b = mat(2, 2, &[1.0, 0.5, 0.0, 3.0f64.sqrt() / 2.0]);
        let sv = shortest_vector(&b).unwrap();
        assert_eq!(sv.coefficients, vec![1, 0]);
        assert!((sv.length - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shortest_on_sheared_basis() {
        let b = mat(2, 2, &[1.0, 0.5, 0.0, 0.1]);
        let sv = shortest_vector(&b).unwrap();
        assert_eq!(sv.coefficients, vec![-1, 2]);
        assert!((sv.length - 0.2).abs() < 1e-12);
        assert!((sv.vector[0]).abs() < 1e-12);
        assert!((sv.vector[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn shortest_rejects_rank_beyond_cap() {
        let b = Matrix::identity(9);
        assert!(matches!(shortest_vector(&b), Err(Error::RankTooLarge(_))));
    }

    #[test]
    fn unimodular_completion_small_cases() {
        for alpha in [vec![1i64, 0], vec![0, 1], vec![-1, 2], vec![3, -2, 4], vec![6, 10, 15]] {
            let v = unimodular_completion(&alpha).unwrap();
            assert!(v.is_unimodular(), "{:?}", alpha);
            assert_eq!(v.column(0), alpha, "first column must be the input");
        }
    }

    #[test]
    fn unimodular_completion_rejects_imprimitive() {
        assert!(unimodular_completion(&[2, 4]).is_err());
    }

    #[test]
    fn reduce_identity_basis_is_identity() {
        let b = LatticeBasis::new(Matrix::identity(3)).unwrap();
        let rb = reduce_basis(&b).unwrap();
        assert!(rb.transform.is_unimodular());
        assert!(rb.reduced.sub(&Matrix::identity(3)).max_abs() < 1e-12);
        assert_eq!(rb.a, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn reduce_sheared_basis_reaches_known_profile() {
        let b = LatticeBasis::new(mat(2, 2, &[1.0, 0.5, 0.0, 0.1])).unwrap();
        let rb = reduce_basis(&b).unwrap();
        assert!((rb.a[0] - 0.2).abs() < 1e-9, "a = {:?}", rb.a);
        assert!((rb.a[1] - 0.5).abs() < 1e-9, "a = {:?}", rb.a);
        assert!(rb.transform.is_unimodular());
        // reduced is exactly basis * transform
        let recon = b.mat.mul(&rb.transform.to_float());
        assert!(recon.sub(&rb.reduced).max_abs() < 1e-12);
        assert!(rb.reduced.det() > 0.0);
        let report = is_in_reduced_siegel_set(&LatticeBasis::new(rb.reduced.clone()).unwrap())
            .unwrap();
        assert!(report.member, "violations: {:?}", report.violations);
    }

    #[test]
    fn reduce_random_integer_bases_members() {
        let mut rng = index_rng(41, 0);
        let mut done = 0;
        while done < 25 {
            let m = 2 + (rng.gen::<u64>() % 3) as usize;
            let entries: Vec<f64> =
                (0..m * m).map(|_| rng.gen_range(-9..=9i64) as f64).collect();
            let cand = Matrix::new(m, m, entries).unwrap();
            let basis = match LatticeBasis::new(cand) {
                Ok(b) => b,
                Err(_) => continue, // singular draw
            };
            let rb = reduce_basis(&basis).unwrap();
            assert!(rb.transform.is_unimodular());
            let report =
                is_in_reduced_siegel_set(&LatticeBasis::new(rb.reduced.clone()).unwrap())
                    .unwrap();
            assert!(report.member, "violations: {:?}", report.violations);
            // successive projection lengths never collapse faster than sqrt(3)/2
            for j in 1..m {
                assert!(
                    rb.a[j] >= (3.0f64.sqrt() / 2.0 - 1e-9) * rb.a[j - 1],
                    "a = {:?}",
                    rb.a
                );
            }
            done += 1;
        }
    }

    #[test]
    fn membership_flags_oversized_coefficient() {
        let b = LatticeBasis::new(mat(2, 2, &[1.0, 0.9, 0.0, 1.0])).unwrap();
        let report = is_in_reduced_siegel_set(&b).unwrap();
        assert!(!report.member);
        assert!(report.violations.iter().any(|v| v.contains("n[0][1]")));
    }

    #[test]
    fn membership_flags_non_shortest_first_column() {
        let b = LatticeBasis::new(mat(2, 2, &[1.0, 0.0, 0.0, 0.2])).unwrap();
        let report = is_in_reduced_siegel_set(&b).unwrap();
        assert!(!report.member);
        assert!(report.violations.iter().any(|v| v.contains("level 0")));
    }

    #[test]
    fn membership_reports_boundary_contact() {
        // hexagonal lattice: the projected minimum at level 0 is attained by
        // three vector pairs and n_01 sits exactly at 1/2
        let b = LatticeBasis::new(mat(2, 2, &[1.0, 0.5, 0.0, 3.0f64.sqrt() / 2.0])).unwrap();
        let report = is_in_reduced_siegel_set(&b).unwrap();
        assert!(report.member);
        assert!(!report.active_inequalities.is_empty());
        assert!(report.candidate_vectors_tested > 0);
    }

    fn reduced_from_upper(n01: f64, m: usize) -> ReducedBasis {
        // identity-orthogonal basis with a single off-diagonal coefficient
        let mut nmat = Matrix::identity(m);
        nmat.set(0, 1, n01);
        let basis = LatticeBasis::new(nmat.clone()).unwrap();
        let rb = reduce_basis(&basis).unwrap();
        // keep the coefficient as given: reduction must not have altered it
        assert!((rb.n_coeffs.get(0, 1) - n01).abs() < 1e-12);
        rb
    }

    #[test]
    fn canonicalize_flips_negative_first_row_coefficient_odd_rank() {
        let rb = reduced_from_upper(-0.3, 3);
        let canon = canonicalize(&rb).unwrap();
        assert!((canon.n_coeffs.get(0, 1) - 0.3).abs() < 1e-12);
        // the chosen flip negates the last two columns
        assert_eq!(canon.transform.get(0, 0), rb.transform.get(0, 0));
        assert_eq!(canon.transform.get(1, 1), -rb.transform.get(1, 1));
        assert_eq!(canon.transform.get(2, 2), -rb.transform.get(2, 2));
        // lattice and profile unchanged
        assert_eq!(canon.a, rb.a);
        assert!(canon.transform.is_unimodular());
    }

    #[test]
    fn canonicalize_even_rank_leaves_ungoverned_column_to_parity() {
        let mut nmat = Matrix::identity(4);
        nmat.set(0, 1, -0.4);
        nmat.set(0, 2, -0.2);
        nmat.set(0, 3, 0.1);
        let basis = LatticeBasis::new(nmat).unwrap();
        let rb = reduce_basis(&basis).unwrap();
        let canon = canonicalize(&rb).unwrap();
        // governed columns j = 2, 3 end up nonnegative
        assert!(canon.n_coeffs.get(0, 2) >= 0.0);
        assert!(canon.n_coeffs.get(0, 3) >= 0.0);
        // product of signs is +1: determinant orientation preserved
        assert!(canon.reduced.det() > 0.0);
        assert!((canon.n_coeffs.get(0, 2) - 0.2).abs() < 1e-12);
        assert!((canon.n_coeffs.get(0, 3) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let mut rng = index_rng(43, 1);
        for _ in 0..10 {
            let m = 2 + (rng.gen::<u64>() % 3) as usize;
            let entries: Vec<f64> = (0..m * m).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let cand = Matrix::new(m, m, entries).unwrap();
            let basis = match LatticeBasis::new(cand) {
                Ok(b) => b,
                Err(_) => continue,
            };
            let rb = reduce_basis(&basis).unwrap();
            let c1 = canonicalize(&rb).unwrap();
            let c2 = canonicalize(&c1).unwrap();
            assert!(c1.reduced.sub(&c2.reduced).max_abs() < 1e-12);
        }
    }

    #[test]
    fn shape_representative_has_unit_determinant() {
        let b = LatticeBasis::new(mat(2, 2, &[1.0, 0.5, 0.0, 0.1])).unwrap();
        let rb = reduce_basis(&b).unwrap();
        let shape = shape_representative(&rb);
        assert!((shape.det() - 1.0).abs() < 1e-12);
        // lower triangle vanishes
        assert_eq!(shape.get(1, 0), 0.0);
    }

    #[test]
    fn duality_on_orthonormal_split_swaps_parts() {
        let a = mat(2, 1, &[1.0, 0.0]);
        let b = mat(2, 1, &[0.0, 1.0]);
        let out = duality_map(&SplitBasis { left: a.clone(), right: b.clone() }).unwrap();
        assert!(out.left.sub(&b).max_abs() < 1e-12);
        assert!(out.right.sub(&a).max_abs() < 1e-12);
    }

    #[test]
    fn duality_applied_twice_projects_the_right_part() {
        let mut rng = index_rng(47, 2);
        let a = Matrix::from_fn(3, 1, |_, _| rng.gen_range(-1.0..1.0));
        let b = Matrix::from_fn(3, 2, |_, _| rng.gen_range(-1.0..1.0));
        let once = duality_map(&SplitBasis { left: a.clone(), right: b.clone() }).unwrap();
        let twice = duality_map(&once).unwrap();
        // left part returns to A exactly, right part is the projection of B
        assert!(twice.left.sub(&a).max_abs() < 1e-10);
        assert!(twice.right.sub(&once.left).max_abs() < 1e-10);
        // and the projected part is orthogonal to A
        let gram = a.transpose().mul(&twice.right);
        assert!(gram.max_abs() < 1e-10);
    }
}
