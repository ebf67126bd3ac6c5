use super::{scope, BlockIds, FtpModel};
use crate::autograd::{Graph, Var};
use crate::error::Result;
use crate::tensor::Scalar;

/// Attention weights recorded during a traced classifier pass, one
/// `[L, L]` matrix per (block, head).
#[derive(Clone, Debug, Default)]
pub struct ClassifierTrace {
    pub attention: Vec<Var>,
}

impl<S: Scalar> FtpModel<S> {
    /// Pre-norm block: `x + MHSA(LN(x))`, then `x + FFN(LN(x))`.
    fn block(
        &self,
        g: &mut Graph<S>,
        pv: &[Var],
        ids: &BlockIds,
        x: Var,
        trace: &mut Option<&mut ClassifierTrace>,
    ) -> Result<Var> {
        let p = |id: crate::params::ParamId| pv[id.index()];
        let c = &self.config;
        let eps = S::of(c.layer_norm_eps);
        let dh = c.dim / c.heads;
        let scale = S::of(1.0 / (dh as f64).sqrt());

        let h = g.layer_norm(x, p(ids.ln1_g), p(ids.ln1_b), eps)?;
        let q = g.linear(h, p(ids.q_w), Some(p(ids.q_b)))?;
        let k = g.linear(h, p(ids.k_w), Some(p(ids.k_b)))?;
        let v = g.linear(h, p(ids.v_w), Some(p(ids.v_b)))?;
        let mut heads: Option<Var> = None;
        for head in 0..c.heads {
            let qh = g.narrow(q, 1, head * dh, dh)?;
            let kh = g.narrow(k, 1, head * dh, dh)?;
            let vh = g.narrow(v, 1, head * dh, dh)?;
            let kt = g.transpose(kh)?;
            let scores = g.matmul(qh, kt)?;
            let scores = g.scale(scores, scale);
            let attn = g.softmax(scores, 1)?;
            if let Some(t) = trace.as_deref_mut() {
                t.attention.push(attn);
            }
            let out = g.matmul(attn, vh)?;
            heads = Some(match heads {
                Some(acc) => g.concat(acc, out, 1)?,
                None => out,
            });
        }
        let attn_out = g.linear(heads.expect("heads >= 1"), p(ids.o_w), Some(p(ids.o_b)))?;
        let x = g.add(x, attn_out)?;

        let h = g.layer_norm(x, p(ids.ln2_g), p(ids.ln2_b), eps)?;
        let h = g.linear(h, p(ids.fc1_w), Some(p(ids.fc1_b)))?;
        let h = g.gelu(h);
        let h = g.linear(h, p(ids.fc2_w), Some(p(ids.fc2_b)))?;
        g.add(x, h)
    }

    /// Flattens `f` to `[T*h*w, D]` tokens, runs both blocks and mean-pools;
    /// returns the pooled `[D]` vector.
    pub(crate) fn encode_tokens(
        &self,
        g: &mut Graph<S>,
        pv: &[Var],
        f: Var,
        traced: bool,
    ) -> Result<(Var, ClassifierTrace)> {
        let c = &self.config;
        let mut trace = ClassifierTrace::default();
        let mut slot = if traced { Some(&mut trace) } else { None };
        let prev = g.set_scope(scope::BLOCKS);
        let tokens = c.t * c.tokens();
        let mut x = g.reshape(f, &[tokens, c.dim])?;
        for ids in &self.ids.blocks {
            x = self.block(g, pv, ids, x, &mut slot)?;
        }
        g.set_scope(scope::HEAD);
        let pooled = g.mean_along(x, 0)?;
        g.set_scope(prev);
        Ok((pooled, trace))
    }

    /// Class logits `[C]` for an integrated feature map.
    pub fn classify_logits(&self, g: &mut Graph<S>, pv: &[Var], f: Var) -> Result<Var> {
        Ok(self.classify_traced(g, pv, f, false)?.0)
    }

    pub fn classify_traced(
        &self,
        g: &mut Graph<S>,
        pv: &[Var],
        f: Var,
        traced: bool,
    ) -> Result<(Var, ClassifierTrace)> {
        let c = &self.config;
        let (pooled, trace) = self.encode_tokens(g, pv, f, traced)?;
        let prev = g.set_scope(scope::HEAD);
        let row = g.reshape(pooled, &[1, c.dim])?;
        let logits = g.linear(row, pv[self.ids.head_w.index()], Some(pv[self.ids.head_b.index()]))?;
        let logits = g.reshape(logits, &[c.classes])?;
        g.set_scope(prev);
        Ok((logits, trace))
    }
}
