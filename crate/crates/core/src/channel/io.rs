//! JSON channel files.
//!
//! ```json
//! {"group": [2], "k": 2,
//!  "states": {"(0)": {"re": [[1,0],[0,0]], "im": [[0,0],[0,0]]},
//!             "(1)": {"branches": [{"w": 1.0, "label": "a", "re": [[0,0],[0,1]]}]}}}
//! ```
//!
//! Inputs are keyed by residue vectors; `"(1,0)"`, `"1,0"` and `"1"` are
//! all accepted. Matrices are row-major; a missing `im` means zero.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CqChannel, HybridBranch, HybridState};
use crate::error::{Error, Result};
use crate::group::{FiniteAbelianGroup, GroupElement};
use crate::linalg::{CMatrix, DensityMatrix, NumericTolerances};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub group: Vec<u32>,
    pub k: usize,
    pub states: BTreeMap<String, StateSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Hybrid { branches: Vec<BranchSpec> },
    Single(MatrixSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub w: f64,
    pub label: String,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

/// Parses and validates a channel from JSON text.
pub fn load_channel(json: &str, tol: &NumericTolerances) -> Result<CqChannel> {
    let file: ChannelFile =
        serde_json::from_str(json).map_err(|e| Error::validation(format!("malformed channel file: {e}")))?;
    channel_from_file(&file, tol)
}

pub fn channel_from_file(file: &ChannelFile, tol: &NumericTolerances) -> Result<CqChannel> {
    let group = FiniteAbelianGroup::cyclic_product(&file.group)?;
    if file.k == 0 {
        return Err(Error::validation("k must be positive"));
    }
    let mut outputs: Vec<Option<HybridState>> = vec![None; group.order()];
    for (key, spec) in &file.states {
        let x = parse_key(&group, key)?;
        let name = group.name(x).to_string();
        if outputs[x.index()].is_some() {
            return Err(Error::validation(format!("input {name} is given twice")));
        }
        let state = match spec {
            StateSpec::Single(m) => HybridState::single(
                density(&m.re, m.im.as_ref(), file.k, tol)
                    .map_err(|e| Error::invalid_at(format!("input {name}"), e))?,
            ),
            StateSpec::Hybrid { branches } => {
                let mut out = Vec::with_capacity(branches.len());
                for b in branches {
                    let st = density(&b.re, b.im.as_ref(), file.k, tol).map_err(|e| {
                        Error::invalid_at(format!("input {name}, branch `{}`", b.label), e)
                    })?;
                    out.push(HybridBranch {
                        weight: b.w,
                        label: b.label.clone(),
                        state: st,
                    });
                }
                HybridState { branches: out }
            }
        };
        outputs[x.index()] = Some(state);
    }
    let outputs: Vec<HybridState> = outputs
        .into_iter()
        .enumerate()
        .map(|(x, o)| {
            o.ok_or_else(|| {
                Error::validation(format!("missing state for input {}", group.name(GroupElement(x as u16))))
            })
        })
        .collect::<Result<_>>()?;
    CqChannel::from_hybrid(group, &outputs, tol)
}

fn parse_key(group: &FiniteAbelianGroup, key: &str) -> Result<GroupElement> {
    let orders = group.factor_orders().expect("cyclic product");
    let inner = key.trim().trim_start_matches('(').trim_end_matches(')');
    let parts: Vec<&str> = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(str::trim).collect()
    };
    let bad = || Error::validation(format!("input key `{key}` is not a residue vector for the group"));
    if parts.len() != orders.len() {
        return Err(bad());
    }
    let mut residues = Vec::with_capacity(parts.len());
    for (p, &n) in parts.iter().zip(orders) {
        let r: i64 = p.parse().map_err(|_| bad())?;
        if r < 0 || r >= n as i64 {
            return Err(bad());
        }
        residues.push(r);
    }
    group.element(&residues)
}

fn density(re: &[Vec<f64>], im: Option<&Vec<Vec<f64>>>, k: usize, tol: &NumericTolerances) -> Result<DensityMatrix> {
    let shape_ok = |m: &[Vec<f64>]| m.len() == k && m.iter().all(|r| r.len() == k);
    if !shape_ok(re) || im.is_some_and(|m| !shape_ok(m)) {
        return Err(Error::validation(format!("matrix must be {k}x{k}")));
    }
    let m = CMatrix::from_fn(k, k, |i, j| {
        Complex64::new(re[i][j], im.map_or(0.0, |m| m[i][j]))
    });
    DensityMatrix::new(m, tol)
}

/// Serializable form of a channel over a cyclic-product group.
///
/// Every block becomes a labelled branch; zero-weight branches are omitted.
pub fn channel_to_file(w: &CqChannel) -> Result<ChannelFile> {
    let orders = w
        .group()
        .factor_orders()
        .ok_or_else(|| Error::structural("only channels over cyclic-product groups can be saved"))?
        .to_vec();
    let mut states = BTreeMap::new();
    for x in w.group().elements() {
        let residues = w.group().residues(x).expect("cyclic product");
        let key = format!(
            "({})",
            residues.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",")
        );
        let branches = w
            .output(x)
            .branches
            .into_iter()
            .map(|b| {
                let m = b.state.matrix();
                let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
                    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
                };
                let im = rows(|z| z.im);
                BranchSpec {
                    w: b.weight,
                    label: b.label,
                    re: rows(|z| z.re),
                    im: im.iter().flatten().any(|v| *v != 0.0).then_some(im),
                }
            })
            .collect();
        states.insert(key, StateSpec::Hybrid { branches });
    }
    Ok(ChannelFile {
        group: orders,
        k: w.dim(),
        states,
    })
}
