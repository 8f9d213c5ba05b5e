use std::sync::Arc;

use super::{AttentionKind, LayerIds, MlpIds, Model, LEAKY_SLOPE};
use crate::diffusion::SeedSet;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::numerics::{ParamStore, Tape, Tensor, Var};
use crate::pdw::InitEmbedding;

/// Edge arrays of a graph in the form the taped forward pass consumes.
#[derive(Clone, Debug)]
pub struct GraphIndex {
    n: usize,
    src: Arc<[usize]>,
    dst: Arc<[usize]>,
    p: Tensor,
}

impl GraphIndex {
    pub fn new(g: &Graph) -> Self {
        GraphIndex {
            n: g.node_count(),
            src: g.edges().iter().map(|e| e.src).collect(),
            dst: g.edges().iter().map(|e| e.dst).collect(),
            p: Tensor::vector(g.edges().iter().map(|e| e.p).collect()),
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.src.len()
    }
}

/// `X`, `S` and `T` of every node at one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeState {
    pub x: Vec<f64>,
    /// `[n, l]`
    pub s: Tensor,
    /// `[n, l]`
    pub t: Tensor,
}

impl NodeState {
    pub fn node_count(&self) -> usize {
        self.x.len()
    }

    pub fn s(&self, u: NodeId) -> &[f64] {
        self.s.row(u)
    }

    pub fn t(&self, u: NodeId) -> &[f64] {
        self.t.row(u)
    }
}

/// Taped handles of one layer's `X` `[n]`, `S` and `T` `[n, l]`.
#[derive(Clone, Copy, Debug)]
pub struct TapedState {
    pub x: Var,
    pub s: Var,
    pub t: Var,
}

impl TapedState {
    pub fn read(&self, tape: &Tape) -> NodeState {
        NodeState {
            x: tape.value(self.x).data().to_vec(),
            s: tape.value(self.s).clone(),
            t: tape.value(self.t).clone(),
        }
    }
}

fn mlp(tape: &mut Tape, store: &ParamStore, ids: &MlpIds, input: Var) -> Result<Var> {
    let mut h = input;
    for j in 0..3 {
        let w = tape.param(store, ids.w[j]);
        let b = tape.param(store, ids.b[j]);
        let z = tape.matmul_t(h, w)?;
        h = tape.add_row(z, b)?;
        if j < 2 {
            h = tape.relu(h);
        }
    }
    Ok(h)
}

struct LayerCtx<'a> {
    store: &'a ParamStore,
    ids: &'a LayerIds,
    gi: &'a GraphIndex,
    l: usize,
}

impl LayerCtx<'_> {
    fn scalar(&self, tape: &mut Tape, id: crate::numerics::ParamId) -> Var {
        tape.param(self.store, id)
    }

    /// Per-edge attention weights, normalized within the kind's neighborhood.
    fn attention(&self, tape: &mut Tape, kind: AttentionKind, ws: Var, wt: Var) -> Result<Var> {
        let a = tape.param(self.store, self.ids.attention(kind));
        let a_src = tape.slice(a, 0, self.l)?;
        let a_dst = tape.slice(a, self.l, self.l)?;
        let ps = tape.matvec(ws, a_src)?;
        let pt = tape.matvec(wt, a_dst)?;
        let es = tape.gather(ps, self.gi.src.clone())?;
        let et = tape.gather(pt, self.gi.dst.clone())?;
        let e = tape.add(es, et)?;
        let e = tape.leaky_relu(e, LEAKY_SLOPE);
        let seg = match kind {
            AttentionKind::Source => self.gi.src.clone(),
            AttentionKind::Influ | AttentionKind::Target => self.gi.dst.clone(),
        };
        tape.segment_softmax(e, seg, self.gi.n)
    }

    /// `c1 * p + c2 * att` per edge.
    fn mix(&self, tape: &mut Tape, p: Var, c1: Var, c2: Var, att: Var) -> Result<Var> {
        let a = tape.scale(c1, p)?;
        let b = tape.scale(c2, att)?;
        tape.add(a, b)
    }

    fn step(&self, tape: &mut Tape, cur: TapedState, pin: (Var, Var)) -> Result<TapedState> {
        let ids = self.ids;
        let gi = self.gi;
        let p = tape.constant(gi.p.clone());
        let w = tape.param(self.store, ids.w);
        let ws = tape.matmul_t(cur.s, w)?;
        let wt = tape.matmul_t(cur.t, w)?;

        // state
        let eta = self.attention(tape, AttentionKind::Influ, ws, wt)?;
        let (d1, d2) = (self.scalar(tape, ids.delta1), self.scalar(tape, ids.delta2));
        let coef = self.mix(tape, p, d1, d2, eta)?;
        let xu = tape.gather(cur.x, gi.src.clone())?;
        let msg = tape.mul(coef, xu)?;
        let a = tape.scatter_add(msg, gi.dst.clone(), gi.n)?;
        let (xi_x, xi_a) = (self.scalar(tape, ids.xi_x), self.scalar(tape, ids.xi_a));
        let px = tape.scale(xi_x, cur.x)?;
        let pa = tape.scale(xi_a, a)?;
        let pre = tape.add(px, pa)?;
        let x = tape.sigmoid(pre);
        let x = tape.mul(x, pin.0)?;
        let x = tape.add(x, pin.1)?;

        // source, aggregated over out-neighbors
        let alpha = self.attention(tape, AttentionKind::Source, ws, wt)?;
        let (l1, l2) = (self.scalar(tape, ids.lambda1), self.scalar(tape, ids.lambda2));
        let coef = self.mix(tape, p, l1, l2, alpha)?;
        let gated = mlp(tape, self.store, &ids.source_gate, cur.t)?;
        let rows = tape.gather(gated, gi.dst.clone())?;
        let msg = tape.scale_rows(rows, coef)?;
        let b = tape.scatter_add(msg, gi.src.clone(), gi.n)?;
        let s = self.residual(tape, cur.s, b, cur.x, [ids.gamma_s, ids.gamma_b, ids.gamma_x])?;

        // target, aggregated over in-neighbors
        let phi = self.attention(tape, AttentionKind::Target, ws, wt)?;
        let (r1, r2) = (self.scalar(tape, ids.rho1), self.scalar(tape, ids.rho2));
        let coef = self.mix(tape, p, r1, r2, phi)?;
        let gated = mlp(tape, self.store, &ids.target_gate, cur.s)?;
        let rows = tape.gather(gated, gi.src.clone())?;
        let msg = tape.scale_rows(rows, coef)?;
        let c = tape.scatter_add(msg, gi.dst.clone(), gi.n)?;
        let t = self.residual(tape, cur.t, c, cur.x, [ids.mu_s, ids.mu_c, ids.mu_x])?;

        Ok(TapedState { x, s, t })
    }

    /// `sigmoid(w0 * own + w1 * agg + w2 * x)` with `x` added to every column.
    fn residual(
        &self,
        tape: &mut Tape,
        own: Var,
        agg: Var,
        x: Var,
        w: [crate::numerics::ParamId; 3],
    ) -> Result<Var> {
        let [w0, w1, w2] = w.map(|id| tape.param(self.store, id));
        let a = tape.scale(w0, own)?;
        let b = tape.scale(w1, agg)?;
        let c = tape.scale(w2, x)?;
        let sum = tape.add(a, b)?;
        let sum = tape.add_col(sum, c)?;
        Ok(tape.sigmoid(sum))
    }
}

impl Model {
    fn check_inputs(&self, gi: &GraphIndex, init: &InitEmbedding, seeds: &SeedSet) -> Result<()> {
        let n = gi.node_count();
        if init.node_count() != n || seeds.universe() != n {
            return Err(Error::shape(
                "forward",
                format!(
                    "graph has {n} nodes, embedding {}, seed universe {}",
                    init.node_count(),
                    seeds.universe()
                ),
            ));
        }
        if init.dim() != self.cfg.dim {
            return Err(Error::shape(
                "forward",
                format!("embedding width {} but model width {}", init.dim(), self.cfg.dim),
            ));
        }
        Ok(())
    }

    /// Records the `K`-layer pass on `tape` and returns every layer's state,
    /// layer 0 first. Layer 0 is `init` with seed activations set to 1.
    pub fn forward_taped(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        gi: &GraphIndex,
        init: &InitEmbedding,
        seeds: &SeedSet,
    ) -> Result<Vec<TapedState>> {
        self.check_inputs(gi, init, seeds)?;
        let n = gi.node_count();
        let l = self.cfg.dim;
        let mask = seeds.mask();
        let keep = Tensor::vector(mask.iter().map(|&m| if m { 0.0 } else { 1.0 }).collect());
        let ones = Tensor::vector(mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect());
        let x0: Vec<f64> = init
            .x()
            .iter()
            .zip(mask)
            .map(|(&x, &m)| if m { 1.0 } else { x })
            .collect();
        let mut cur = TapedState {
            x: tape.constant(Tensor::vector(x0)),
            s: tape.constant(Tensor::new(vec![n, l], init.s_all().to_vec())?),
            t: tape.constant(Tensor::new(vec![n, l], init.t_all().to_vec())?),
        };
        let pin = (tape.constant(keep), tape.constant(ones));
        let mut states = vec![cur];
        for ids in &self.layers {
            let ctx = LayerCtx { store, ids, gi, l };
            cur = ctx.step(tape, cur, pin)?;
            states.push(cur);
        }
        Ok(states)
    }

    /// State after `K` layers.
    pub fn forward(
        &self,
        store: &ParamStore,
        gi: &GraphIndex,
        init: &InitEmbedding,
        seeds: &SeedSet,
    ) -> Result<NodeState> {
        let mut tape = Tape::new();
        let states = self.forward_taped(&mut tape, store, gi, init, seeds)?;
        Ok(states.last().expect("at least layer 0").read(&tape))
    }

    /// States of layers `0..=K`.
    pub fn forward_layers(
        &self,
        store: &ParamStore,
        gi: &GraphIndex,
        init: &InitEmbedding,
        seeds: &SeedSet,
    ) -> Result<Vec<NodeState>> {
        let mut tape = Tape::new();
        let states = self.forward_taped(&mut tape, store, gi, init, seeds)?;
        Ok(states.iter().map(|s| s.read(&tape)).collect())
    }

    /// Normalized attention of layer `k` for every edge (in edge-id order),
    /// evaluated at the given layer-`k` state.
    pub fn attention_weights(
        &self,
        store: &ParamStore,
        gi: &GraphIndex,
        state: &NodeState,
        k: usize,
        kind: AttentionKind,
    ) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let ctx = LayerCtx {
            store,
            ids: &self.layers[k],
            gi,
            l: self.cfg.dim,
        };
        let s = tape.constant(state.s.clone());
        let t = tape.constant(state.t.clone());
        let w = tape.param(store, ctx.ids.w);
        let ws = tape.matmul_t(s, w)?;
        let wt = tape.matmul_t(t, w)?;
        let att = ctx.attention(&mut tape, kind, ws, wt)?;
        Ok(tape.value(att).data().to_vec())
    }
}
