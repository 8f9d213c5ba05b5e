use std::sync::Arc;

use super::forward::{NodeState, TapedState};
use super::Model;
use crate::diffusion::SeedSet;
use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::numerics::ops::{matvec, relu};
use crate::numerics::{ParamStore, Tape, Tensor, Var};

fn relu_dot(weights: &[f64], xs: &[f64]) -> f64 {
    weights.iter().zip(xs).map(|(w, &x)| w * relu(x)).sum()
}

fn check_candidate(seeds: &SeedSet, u: NodeId) -> Result<()> {
    if u >= seeds.universe() {
        return Err(Error::InvalidArgument(format!("node {u} out of range")));
    }
    if seeds.contains(u) {
        return Err(Error::InvalidArgument(format!("node {u} is already a seed")));
    }
    Ok(())
}

/// Q-values for one `(state, seed set)` pair. The seed-dependent parts and the
/// sum of `T` over non-seeds are computed once, so each candidate costs `O(l^2)`.
pub struct QContext<'a> {
    l: usize,
    theta1: &'a [f64],
    theta2: &'a Tensor,
    theta3: &'a Tensor,
    theta4: &'a Tensor,
    state: &'a NodeState,
    seeds: &'a SeedSet,
    seed_term: f64,
    /// `theta4 * (sum_all T - sum_seeds T)`
    theta4_rest: Vec<f64>,
}

impl<'a> QContext<'a> {
    pub fn new(model: &Model, store: &'a ParamStore, state: &'a NodeState, seeds: &'a SeedSet) -> Result<Self> {
        let l = model.cfg.dim;
        let n = state.node_count();
        if seeds.universe() != n || state.s.row_len() != l {
            return Err(Error::shape("QContext::new", "state, seeds and model disagree"));
        }
        let h = model.head();
        let theta1 = store.value(h.theta1).data();
        let mut seed_s = vec![0.0; l];
        let mut rest_t = vec![0.0; l];
        for v in 0..n {
            if seeds.contains(v) {
                seed_s.iter_mut().zip(state.s(v)).for_each(|(a, b)| *a += b);
            } else {
                rest_t.iter_mut().zip(state.t(v)).for_each(|(a, b)| *a += b);
            }
        }
        let seed_term = relu_dot(&theta1[l..2 * l], &matvec(store.value(h.theta3), &seed_s)?);
        let theta4 = store.value(h.theta4);
        Ok(QContext {
            l,
            theta1,
            theta2: store.value(h.theta2),
            theta3: store.value(h.theta3),
            theta4,
            state,
            seeds,
            seed_term,
            theta4_rest: matvec(theta4, &rest_t)?,
        })
    }

    /// Contribution of the seed block, shared by every candidate.
    pub fn seed_term(&self) -> f64 {
        self.seed_term
    }

    pub fn q(&self, u: NodeId) -> Result<f64> {
        check_candidate(self.seeds, u)?;
        let l = self.l;
        let own = relu_dot(&self.theta1[..l], &matvec(self.theta2, self.state.s(u))?);
        let t4u = matvec(self.theta4, self.state.t(u))?;
        let others: f64 = self.theta1[2 * l..]
            .iter()
            .zip(self.theta4_rest.iter().zip(&t4u))
            .map(|(w, (r, t))| w * relu(r - t))
            .sum();
        Ok(own + self.seed_term + others)
    }

    /// Same value as [`Self::q`], summing `T` over `V \ (S + u)` directly.
    pub fn q_direct(&self, u: NodeId) -> Result<f64> {
        check_candidate(self.seeds, u)?;
        let l = self.l;
        let n = self.state.node_count();
        let mut seed_s = vec![0.0; l];
        let mut rest_t = vec![0.0; l];
        for v in 0..n {
            if self.seeds.contains(v) {
                seed_s.iter_mut().zip(self.state.s(v)).for_each(|(a, b)| *a += b);
            } else if v != u {
                rest_t.iter_mut().zip(self.state.t(v)).for_each(|(a, b)| *a += b);
            }
        }
        let own = relu_dot(&self.theta1[..l], &matvec(self.theta2, self.state.s(u))?);
        let seed = relu_dot(&self.theta1[l..2 * l], &matvec(self.theta3, &seed_s)?);
        let others = relu_dot(&self.theta1[2 * l..], &matvec(self.theta4, &rest_t)?);
        Ok(own + seed + others)
    }

    /// `(node, Q)` for every non-seed node, in node order.
    pub fn q_all(&self) -> Result<Vec<(NodeId, f64)>> {
        (0..self.state.node_count())
            .filter(|&u| !self.seeds.contains(u))
            .map(|u| Ok((u, self.q(u)?)))
            .collect()
    }
}

impl Model {
    /// Q-values `[m]` of `candidates` recorded on `tape`.
    pub fn q_taped(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        state: &TapedState,
        seeds: &SeedSet,
        candidates: Arc<[usize]>,
    ) -> Result<Var> {
        for &u in candidates.iter() {
            check_candidate(seeds, u)?;
        }
        let l = self.cfg.dim;
        let h = self.head();
        let th1 = tape.param(store, h.theta1);
        let th2 = tape.param(store, h.theta2);
        let th3 = tape.param(store, h.theta3);
        let th4 = tape.param(store, h.theta4);
        let w_own = tape.slice(th1, 0, l)?;
        let w_seed = tape.slice(th1, l, l)?;
        let w_rest = tape.slice(th1, 2 * l, l)?;
        let seed_idx: Arc<[usize]> = seeds.nodes().into();

        let s_c = tape.gather(state.s, candidates.clone())?;
        let own = tape.matmul_t(s_c, th2)?;
        let own = tape.relu(own);
        let q_own = tape.matvec(own, w_own)?;

        let s_seeds = tape.gather(state.s, seed_idx.clone())?;
        let s_sum = tape.sum_rows(s_seeds);
        let seed_block = tape.matvec(th3, s_sum)?;
        let seed_block = tape.relu(seed_block);
        let q_seed = tape.dot(w_seed, seed_block)?;

        let t_all = tape.sum_rows(state.t);
        let t_seeds = tape.gather(state.t, seed_idx)?;
        let t_seeds = tape.sum_rows(t_seeds);
        let rest = tape.sub(t_all, t_seeds)?;
        let rest = tape.matvec(th4, rest)?;
        let t_c = tape.gather(state.t, candidates)?;
        let t_c = tape.matmul_t(t_c, th4)?;
        let minus = tape.constant(Tensor::scalar(-1.0));
        let t_c = tape.scale(minus, t_c)?;
        let rest = tape.add_row(t_c, rest)?;
        let rest = tape.relu(rest);
        let q_rest = tape.matvec(rest, w_rest)?;

        let q = tape.add(q_own, q_rest)?;
        tape.add_scalar(q, q_seed)
    }
}
