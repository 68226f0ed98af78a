//! Fiber-family description documents.
//!
//! A family file is a small JSON document naming the base group and set, the
//! fiber group, and one of three fiber kinds: a constant set, a ball whose
//! radius varies sinusoidally with the base point, or an affine image of a
//! fixed set with a base-dependent shift.

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use wellround_core::calculus::BlcFamily;
use wellround_core::certifier::{ball_oracle, named_oracle, SetOracle};
use wellround_core::error::{Error, Result};
use wellround_core::group::{builtin_group, GroupKind};
use wellround_core::matrix::Matrix;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDoc {
    pub name: Option<String>,
    pub base_group: String,
    pub fiber_group: String,
    pub base_set: String,
    pub fiber: FiberDoc,
    #[serde(rename = "C_D")]
    pub c_d: f64,
    #[serde(rename = "V_min")]
    pub v_min: f64,
    pub bound_radius: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum FiberDoc {
    #[serde(rename = "constant")]
    Constant { set: String },
    #[serde(rename = "radius-function")]
    RadiusFunction {
        base: f64,
        amplitude: f64,
        #[serde(default = "default_frequency")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    #[serde(rename = "affine-image")]
    AffineImage {
        set: String,
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        shear: Option<Vec<Vec<f64>>>,
    },
}

fn default_frequency() -> f64 {
    1.0
}

pub fn load_family(path: &Path) -> Result<BlcFamily> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("reading {}: {e}", path.display())))?;
    let doc: FamilyDoc = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("bad family document {}: {e}", path.display())))?;
    build_family(doc)
}

fn to_matrix(rows: &[Vec<f64>], want_rows: usize, want_cols: usize, what: &str) -> Result<Matrix> {
    if rows.len() != want_rows || rows.iter().any(|r| r.len() != want_cols) {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be {want_rows}x{want_cols}"
        )));
    }
    Ok(Matrix::from_fn(want_rows, want_cols, |i, j| rows[i][j]))
}

pub fn build_family(doc: FamilyDoc) -> Result<BlcFamily> {
    let base_group = builtin_group(&doc.base_group)?;
    let fiber_group = builtin_group(&doc.fiber_group)?;
    let base_set = named_oracle(&base_group, &doc.base_set)?;
    let name = doc.name.unwrap_or_else(|| "family".into());

    let fiber: Arc<dyn Fn(&[f64]) -> Result<SetOracle> + Send + Sync> = match doc.fiber {
        FiberDoc::Constant { set } => {
            let oracle = named_oracle(&fiber_group, &set)?;
            Arc::new(move |_z| Ok(oracle.clone()))
        }
        FiberDoc::RadiusFunction { base, amplitude, frequency, phase } => {
            if !(base > 0.0) {
                return Err(Error::NonpositiveInput(format!(
                    "radius-function base must be positive, got {base}"
                )));
            }
            let fg = fiber_group.clone();
            Arc::new(move |z| {
                let r = base + amplitude * (frequency * z[0] + phase).sin();
                if !(r > 0.0) {
                    return Err(Error::NonpositiveInput(format!(
                        "fiber radius {r} at base point {} is not positive",
                        z[0]
                    )));
                }
                ball_oracle(&fg, r)
            })
        }
        FiberDoc::AffineImage { set, matrix, shear } => {
            let d_fiber = match fiber_group.kind {
                GroupKind::Euclidean(n) => n,
                _ => {
                    return Err(Error::InvalidInput(
                        "affine-image fibers need a euclidean fiber group".into(),
                    ))
                }
            };
            let d_base = base_group.dim();
            let m = to_matrix(&matrix, d_fiber, d_fiber, "fiber matrix")?;
            let m_inv = m.inverse()?;
            let m_norm = m.op_norm();
            let shear = match shear {
                Some(rows) => Some(to_matrix(&rows, d_fiber, d_base, "fiber shear")?),
                None => None,
            };
            let template = named_oracle(&fiber_group, &set)?;
            // distances in the image contract by at least the smallest
            // singular value, so this scaling understates depth on both
            // sides of the boundary
            let s_min = 1.0 / m_inv.op_norm();
            let fg = fiber_group.clone();
            Arc::new(move |z| {
                let shift: Vec<f64> = match &shear {
                    Some(s) => (0..d_fiber)
                        .map(|i| (0..d_base).map(|j| s.get(i, j) * z[j]).sum())
                        .collect(),
                    None => vec![0.0; d_fiber],
                };
                let shift_norm = shift.iter().map(|x| x * x).sum::<f64>().sqrt();
                let pull_back = {
                    let inv = m_inv.clone();
                    let group = fg.clone();
                    let shift = shift.clone();
                    move |el: &wellround_core::group::GroupElement| {
                        let x = group.log_coords(&el.mat).ok()?;
                        let y: Vec<f64> = (0..d_fiber)
                            .map(|i| (0..d_fiber).map(|j| inv.get(i, j) * (x[j] - shift[j])).sum())
                            .collect();
                        group.exp_coords(&y).ok()
                    }
                };
                let inner = template.clone();
                let member = {
                    let pull_back = pull_back.clone();
                    let inner = inner.clone();
                    move |el: &wellround_core::group::GroupElement| match pull_back(el) {
                        Some(e) => (inner.member)(&e),
                        None => false,
                    }
                };
                let signed_distance = inner.signed_distance.clone().map(|sd| {
                    let pull_back = pull_back.clone();
                    Arc::new(move |el: &wellround_core::group::GroupElement| match pull_back(el) {
                        Some(e) => s_min * sd(&e),
                        None => f64::INFINITY,
                    })
                        as Arc<dyn Fn(&wellround_core::group::GroupElement) -> f64 + Send + Sync>
                });
                Ok(SetOracle {
                    group: fg.clone(),
                    name: "affine-fiber".into(),
                    member: Arc::new(member),
                    signed_distance,
                    bounding_radius: m_norm * template.bounding_radius + shift_norm,
                })
            })
        }
    };

    Ok(BlcFamily {
        name,
        base_group,
        fiber_group,
        base_set,
        fiber,
        c_d: doc.c_d,
        v_min: doc.v_min,
        bound_radius: doc.bound_radius,
    })
}
