//! Three coupled message-passing networks over activation state `X`,
//! influence capacity `S` and influenceability `T`, plus the Q-value head.
//!
//! Every layer keeps width `l`. Parameters live in a [`ParamStore`] under
//! `gnn/layer{k}/...` and `qhead/...`; [`Model`] only records their ids.

mod forward;
mod qhead;

pub use forward::{GraphIndex, NodeState};
pub use qhead::QContext;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{init_uniform, ParamId, ParamStore, Tensor};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GnnConfig {
    /// Width `l` of `S` and `T`.
    pub dim: usize,
    /// Number of layers `K`.
    pub layers: usize,
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig { dim: 64, layers: 3 }
    }
}

/// Which attention vector scores an edge `u -> v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttentionKind {
    /// `eta`, normalized over the in-neighbors of `v`.
    Influ,
    /// `beta`, normalized over the out-neighbors of `u`.
    Source,
    /// `tau`, normalized over the in-neighbors of `v`.
    Target,
}

/// Three-layer gate `l -> l -> l -> l`, ReLU between layers, linear output.
#[derive(Clone, Copy, Debug)]
pub struct MlpIds {
    pub w: [ParamId; 3],
    pub b: [ParamId; 3],
}

#[derive(Clone, Copy, Debug)]
pub struct LayerIds {
    pub w: ParamId,
    pub eta: ParamId,
    pub beta: ParamId,
    pub tau: ParamId,
    pub delta1: ParamId,
    pub delta2: ParamId,
    pub xi_x: ParamId,
    pub xi_a: ParamId,
    pub lambda1: ParamId,
    pub lambda2: ParamId,
    pub gamma_s: ParamId,
    pub gamma_b: ParamId,
    pub gamma_x: ParamId,
    pub rho1: ParamId,
    pub rho2: ParamId,
    pub mu_s: ParamId,
    pub mu_c: ParamId,
    pub mu_x: ParamId,
    pub source_gate: MlpIds,
    pub target_gate: MlpIds,
}

impl LayerIds {
    pub fn attention(&self, kind: AttentionKind) -> ParamId {
        match kind {
            AttentionKind::Influ => self.eta,
            AttentionKind::Source => self.beta,
            AttentionKind::Target => self.tau,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QHeadIds {
    pub theta1: ParamId,
    pub theta2: ParamId,
    pub theta3: ParamId,
    pub theta4: ParamId,
}

const SCALARS: [&str; 14] = [
    "delta1", "delta2", "xi_x", "xi_a", "lambda1", "lambda2", "gamma_s", "gamma_b", "gamma_x", "rho1",
    "rho2", "mu_s", "mu_c", "mu_x",
];

/// Parameter layout of the network. Values live in a separate [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Model {
    cfg: GnnConfig,
    layers: Vec<LayerIds>,
    head: QHeadIds,
}

enum Spec {
    Uniform { fan_in: usize },
    Zero,
}

fn manifest(cfg: GnnConfig) -> Vec<(String, Vec<usize>, Spec)> {
    let l = cfg.dim;
    let mut out = Vec::new();
    for k in 0..cfg.layers {
        let p = format!("gnn/layer{k}");
        out.push((format!("{p}/W"), vec![l, l], Spec::Uniform { fan_in: l }));
        for a in ["eta", "beta", "tau"] {
            out.push((format!("{p}/{a}"), vec![2 * l], Spec::Uniform { fan_in: 2 * l }));
        }
        for s in SCALARS {
            out.push((format!("{p}/{s}"), vec![1], Spec::Uniform { fan_in: 1 }));
        }
        for gate in ["source_gate", "target_gate"] {
            for j in 1..=3 {
                out.push((format!("{p}/{gate}/w{j}"), vec![l, l], Spec::Uniform { fan_in: l }));
                out.push((format!("{p}/{gate}/b{j}"), vec![l], Spec::Zero));
            }
        }
    }
    out.push(("qhead/theta1".into(), vec![3 * l], Spec::Uniform { fan_in: 3 * l }));
    for t in ["theta2", "theta3", "theta4"] {
        out.push((format!("qhead/{t}"), vec![l, l], Spec::Uniform { fan_in: l }));
    }
    out
}

impl Model {
    /// Fresh parameters: matrices and vectors uniform in `+-1/sqrt(fan_in)`,
    /// scalar weights uniform in `[-1, 1]`, gate biases zero.
    pub fn init<R: Rng + ?Sized>(cfg: GnnConfig, rng: &mut R) -> Result<(Model, ParamStore)> {
        if cfg.dim == 0 || cfg.layers == 0 {
            return Err(Error::InvalidArgument("dim and layers must be >= 1".into()));
        }
        let mut store = ParamStore::new();
        for (name, shape, spec) in manifest(cfg) {
            let value = match spec {
                Spec::Uniform { fan_in } => init_uniform(&shape, fan_in, rng),
                Spec::Zero => Tensor::zeros(&shape),
            };
            store.add(&name, value)?;
        }
        let model = Model::bind(cfg, &store)?;
        Ok((model, store))
    }

    /// Resolves the layout against an existing store, checking every shape.
    pub fn bind(cfg: GnnConfig, store: &ParamStore) -> Result<Model> {
        for (name, shape, _) in manifest(cfg) {
            match store.get(&name) {
                Some(t) if t.shape() == shape.as_slice() => {}
                Some(t) => {
                    return Err(Error::shape(
                        "Model::bind",
                        format!("{name} has shape {:?}, expected {shape:?}", t.shape()),
                    ))
                }
                None => {
                    return Err(Error::Format {
                        what: "model parameters",
                        msg: format!("missing {name}"),
                    })
                }
            }
        }
        let id = |name: String| store.id(&name).expect("checked above");
        let layers = (0..cfg.layers)
            .map(|k| {
                let p = format!("gnn/layer{k}");
                let s = |n: &str| id(format!("{p}/{n}"));
                let gate = |g: &str| MlpIds {
                    w: [1, 2, 3].map(|j| id(format!("{p}/{g}/w{j}"))),
                    b: [1, 2, 3].map(|j| id(format!("{p}/{g}/b{j}"))),
                };
                LayerIds {
                    w: s("W"),
                    eta: s("eta"),
                    beta: s("beta"),
                    tau: s("tau"),
                    delta1: s("delta1"),
                    delta2: s("delta2"),
                    xi_x: s("xi_x"),
                    xi_a: s("xi_a"),
                    lambda1: s("lambda1"),
                    lambda2: s("lambda2"),
                    gamma_s: s("gamma_s"),
                    gamma_b: s("gamma_b"),
                    gamma_x: s("gamma_x"),
                    rho1: s("rho1"),
                    rho2: s("rho2"),
                    mu_s: s("mu_s"),
                    mu_c: s("mu_c"),
                    mu_x: s("mu_x"),
                    source_gate: gate("source_gate"),
                    target_gate: gate("target_gate"),
                }
            })
            .collect();
        let head = QHeadIds {
            theta1: id("qhead/theta1".into()),
            theta2: id("qhead/theta2".into()),
            theta3: id("qhead/theta3".into()),
            theta4: id("qhead/theta4".into()),
        };
        Ok(Model { cfg, layers, head })
    }

    /// Infers `(dim, layers)` from the parameter names present in `store`.
    pub fn infer_config(store: &ParamStore) -> Result<GnnConfig> {
        let bad = |msg: &str| Error::Format {
            what: "model parameters",
            msg: msg.into(),
        };
        let dim = store.get("gnn/layer0/W").ok_or_else(|| bad("missing gnn/layer0/W"))?.rows();
        let layers = (0..)
            .take_while(|k| store.id(&format!("gnn/layer{k}/W")).is_some())
            .count();
        Ok(GnnConfig { dim, layers })
    }

    pub fn config(&self) -> GnnConfig {
        self.cfg
    }

    pub fn layer(&self, k: usize) -> &LayerIds {
        &self.layers[k]
    }

    pub fn head(&self) -> &QHeadIds {
        &self.head
    }

    /// Unnormalized attention score `a . [W S_u, W T_v]` of layer `k`.
    pub fn attention_score(
        &self,
        store: &ParamStore,
        k: usize,
        kind: AttentionKind,
        s_u: &[f64],
        t_v: &[f64],
    ) -> Result<f64> {
        let l = self.cfg.dim;
        if s_u.len() != l || t_v.len() != l {
            return Err(Error::shape(
                "attention_score",
                format!("vectors of length {} and {}, width {l}", s_u.len(), t_v.len()),
            ));
        }
        let ids = &self.layers[k];
        let w = store.value(ids.w);
        let a = store.value(ids.attention(kind)).data();
        let ws = crate::numerics::ops::matvec(w, s_u)?;
        let wt = crate::numerics::ops::matvec(w, t_v)?;
        Ok(crate::numerics::ops::dot(&a[..l], &ws)? + crate::numerics::ops::dot(&a[l..], &wt)?)
    }
}

#[cfg(test)]
mod tests;
