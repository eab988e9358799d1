//! Binary state files: magic "SIPSTATE", version byte, a length-prefixed
//! JSON header describing named arrays, then the arrays as raw little-endian
//! f64 in header order. Round-trips are bit-exact.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use sip_core::graph::Graph;
use sip_core::project::{BasisState, GrarepOrderBasis, MethodBasis};
use sip_core::target::{Method, TargetSpec};

pub const MAGIC: &[u8; 8] = b"SIPSTATE";
pub const VERSION: u8 = 0x01;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ArrayDesc {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

/// How the fitted subgraph is rebuilt from the input edge list.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PipelineInfo {
    pub order: String,
    pub seed: u64,
    pub giant: bool,
    pub weighted: bool,
    pub allow_self_loops: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StateHeader {
    pub method: String,
    pub n: usize,
    pub d: usize,
    pub sigma1: f64,
    pub sigma2: f64,
    pub pipeline: PipelineInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arope_weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grarep_order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grarep_beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub netmf_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub netmf_window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub netmf_negatives: Option<f64>,
    pub arrays: Vec<ArrayDesc>,
    /// Node tokens of the fitted subgraph, in id order.
    pub tokens: Vec<String>,
}

pub struct StateFile {
    pub header: StateHeader,
    pub arrays: Vec<Vec<f64>>,
}

fn mat_to_vec(m: &Array2<f64>) -> Vec<f64> {
    m.iter().copied().collect()
}

fn vec_to_mat(v: &[f64], rows: usize, cols: usize) -> Result<Array2<f64>> {
    if v.len() != rows * cols {
        bail!("array length {} does not match {}x{}", v.len(), rows, cols);
    }
    Ok(Array2::from_shape_vec((rows, cols), v.to_vec())?)
}

impl StateFile {
    /// Assemble from a fitted basis plus the pipeline provenance.
    pub fn from_basis(basis: &MethodBasis<f64>, pipeline: PipelineInfo, tokens: &[String]) -> Self {
        let spec = &basis.spec;
        let n = basis.n;
        let mut arrays: Vec<(String, usize, usize, Vec<f64>)> = Vec::new();
        match &basis.state {
            BasisState::Le {
                u_d,
                sigma,
                sigma_clamped,
            } => {
                arrays.push(("u_d".into(), n, spec.dim, mat_to_vec(u_d)));
                arrays.push(("sigma".into(), 1, spec.dim, sigma.clone()));
                arrays.push(("sigma_clamped".into(), 1, spec.dim, sigma_clamped.clone()));
            }
            BasisState::Arope { v_d, sigma_d } => {
                arrays.push(("v_d".into(), n, spec.dim, mat_to_vec(v_d)));
                arrays.push(("sigma_d".into(), 1, spec.dim, sigma_d.clone()));
            }
            BasisState::Grarep { orders, .. } => {
                for (i, o) in orders.iter().enumerate() {
                    let dk = o.sigma.len();
                    arrays.push((format!("v_{}", i + 1), n, dk, mat_to_vec(&o.v)));
                    arrays.push((format!("sigma_{}", i + 1), 1, dk, o.sigma.clone()));
                }
            }
            BasisState::Netmf {
                u_h,
                lambda_h,
                v_d,
                sigma_d,
                vol,
                degrees0,
            } => {
                let h = lambda_h.len();
                arrays.push(("u_h".into(), n, h, mat_to_vec(u_h)));
                arrays.push(("lambda_h".into(), 1, h, lambda_h.clone()));
                arrays.push(("v_d".into(), n, spec.dim, mat_to_vec(v_d)));
                arrays.push(("sigma_d".into(), 1, spec.dim, sigma_d.clone()));
                arrays.push(("degrees0".into(), 1, n, degrees0.clone()));
                arrays.push(("vol".into(), 1, 1, vec![*vol]));
            }
        }
        let header = StateHeader {
            method: spec.method.name().to_string(),
            n,
            d: spec.dim,
            sigma1: basis.drift_sigma.0,
            sigma2: basis.drift_sigma.1,
            pipeline,
            arope_weights: matches!(spec.method, Method::Arope)
                .then(|| spec.arope_weights.clone()),
            grarep_order: matches!(spec.method, Method::Grarep).then_some(spec.grarep_order),
            grarep_beta: match &basis.state {
                BasisState::Grarep { beta, .. } => Some(*beta),
                _ => None,
            },
            netmf_rank: matches!(spec.method, Method::Netmf).then_some(spec.netmf_rank),
            netmf_window: matches!(spec.method, Method::Netmf).then_some(spec.netmf_window),
            netmf_negatives: matches!(spec.method, Method::Netmf).then_some(spec.netmf_negatives),
            arrays: arrays
                .iter()
                .map(|(name, rows, cols, _)| ArrayDesc {
                    name: name.clone(),
                    rows: *rows,
                    cols: *cols,
                })
                .collect(),
            tokens: tokens.to_vec(),
        };
        StateFile {
            header,
            arrays: arrays.into_iter().map(|(_, _, _, data)| data).collect(),
        }
    }

    /// Reconstruct the method spec recorded in the header.
    pub fn spec(&self) -> Result<TargetSpec<f64>> {
        let method = Method::parse(&self.header.method)
            .with_context(|| format!("unknown method {:?}", self.header.method))?;
        let mut spec = TargetSpec::<f64>::new(method, self.header.d);
        if let Some(w) = &self.header.arope_weights {
            spec.arope_weights = w.clone();
        }
        if let Some(k) = self.header.grarep_order {
            spec.grarep_order = k;
        }
        if let Some(b) = self.header.grarep_beta {
            spec.grarep_beta = Some(b);
        }
        if let Some(h) = self.header.netmf_rank {
            spec.netmf_rank = h;
        }
        if let Some(t) = self.header.netmf_window {
            spec.netmf_window = t;
        }
        if let Some(b) = self.header.netmf_negatives {
            spec.netmf_negatives = b;
        }
        Ok(spec)
    }

    /// Rebuild the projection basis against the provided fit graph.
    pub fn into_basis(&self, fit_graph: Graph<f64>) -> Result<MethodBasis<f64>> {
        let spec = self.spec()?;
        let n = self.header.n;
        if fit_graph.n() != n {
            bail!(
                "stale state: graph has {} nodes, state expects {}",
                fit_graph.n(),
                n
            );
        }
        let get = |name: &str| -> Result<(&ArrayDesc, &Vec<f64>)> {
            let idx = self
                .header
                .arrays
                .iter()
                .position(|a| a.name == name)
                .with_context(|| format!("missing array {:?}", name))?;
            Ok((&self.header.arrays[idx], &self.arrays[idx]))
        };
        let state = match spec.method {
            Method::Le => {
                let (d_ud, ud) = get("u_d")?;
                let (_, sigma) = get("sigma")?;
                let (_, clamped) = get("sigma_clamped")?;
                BasisState::Le {
                    u_d: vec_to_mat(ud, d_ud.rows, d_ud.cols)?,
                    sigma: sigma.clone(),
                    sigma_clamped: clamped.clone(),
                }
            }
            Method::Arope => {
                let (d_vd, vd) = get("v_d")?;
                let (_, sigma) = get("sigma_d")?;
                BasisState::Arope {
                    v_d: vec_to_mat(vd, d_vd.rows, d_vd.cols)?,
                    sigma_d: sigma.clone(),
                }
            }
            Method::Grarep => {
                let k = spec.grarep_order;
                let mut orders = Vec::with_capacity(k);
                for i in 1..=k {
                    let (d_v, v) = get(&format!("v_{}", i))?;
                    let (_, sigma) = get(&format!("sigma_{}", i))?;
                    orders.push(GrarepOrderBasis {
                        v: vec_to_mat(v, d_v.rows, d_v.cols)?,
                        sigma: sigma.clone(),
                    });
                }
                BasisState::Grarep {
                    orders,
                    beta: self
                        .header
                        .grarep_beta
                        .context("grarep state missing beta")?,
                }
            }
            Method::Netmf => {
                let (d_uh, uh) = get("u_h")?;
                let (_, lambda) = get("lambda_h")?;
                let (d_vd, vd) = get("v_d")?;
                let (_, sigma) = get("sigma_d")?;
                let (_, degrees) = get("degrees0")?;
                let (_, vol) = get("vol")?;
                BasisState::Netmf {
                    u_h: vec_to_mat(uh, d_uh.rows, d_uh.cols)?,
                    lambda_h: lambda.clone(),
                    v_d: vec_to_mat(vd, d_vd.rows, d_vd.cols)?,
                    sigma_d: sigma.clone(),
                    vol: vol[0],
                    degrees0: degrees.clone(),
                }
            }
        };
        Ok(MethodBasis {
            spec,
            n,
            drift_sigma: (self.header.sigma1, self.header.sigma2),
            fit_graph,
            state,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header_bytes = serde_json::to_vec(&self.header)?;
        let file = File::create(path)
            .with_context(|| format!("cannot create state file {}", path.display()))?;
        // Advisory single-writer lock for the duration of the write.
        if let Err(e) = file.try_lock() {
            bail!("state file {} is locked: {}", path.display(), e);
        }
        let mut out = std::io::BufWriter::new(&file);
        out.write_all(MAGIC)?;
        out.write_all(&[VERSION])?;
        out.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
        out.write_all(&header_bytes)?;
        for array in &self.arrays {
            for v in array {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        drop(out);
        let _ = file.unlock();
        Ok(())
    }

    pub fn load(path: &Path) -> Result<StateFile> {
        let mut file = File::open(path)
            .with_context(|| format!("cannot open state file {}", path.display()))?;
        let mut magic = [0u8; 8];
        file.read_exact(&mut magic)?;
        if &magic != MAGIC {
            bail!("{} is not a state file (bad magic)", path.display());
        }
        let mut version = [0u8; 1];
        file.read_exact(&mut version)?;
        if version[0] != VERSION {
            bail!("unsupported state version {}", version[0]);
        }
        let mut len = [0u8; 4];
        file.read_exact(&mut len)?;
        let header_len = u32::from_le_bytes(len) as usize;
        let mut header_bytes = vec![0u8; header_len];
        file.read_exact(&mut header_bytes)?;
        let header: StateHeader = serde_json::from_slice(&header_bytes)
            .context("corrupt state header")?;
        let mut arrays = Vec::with_capacity(header.arrays.len());
        for desc in &header.arrays {
            let count = desc.rows * desc.cols;
            let mut bytes = vec![0u8; count * 8];
            file.read_exact(&mut bytes)
                .with_context(|| format!("truncated array {:?}", desc.name))?;
            let data: Vec<f64> = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            arrays.push(data);
        }
        let mut trailing = Vec::new();
        file.read_to_end(&mut trailing)?;
        if !trailing.is_empty() {
            bail!("{} trailing bytes after arrays", trailing.len());
        }
        Ok(StateFile { header, arrays })
    }

    pub fn total_reals(&self) -> usize {
        self.arrays.iter().map(|a| a.len()).sum()
    }
}
