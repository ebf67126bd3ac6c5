use super::{scope, FtpModel};
use crate::autograd::{Graph, Var};
use crate::error::Result;
use crate::prompt::Prompt;
use crate::tensor::Scalar;

/// Spatial and temporal pooling of one feature map; shared by all processors.
pub struct Pooled {
    /// `[T, D]`, mean over the `N = h * w` positions.
    pub spatial: Var,
    /// `[N, D]`, mean over time.
    pub temporal: Var,
}

impl<S: Scalar> FtpModel<S> {
    pub(crate) fn pool(&self, g: &mut Graph<S>, m: Var) -> Result<Pooled> {
        self.check_feature_map(g, m)?;
        let c = &self.config;
        let prev = g.set_scope(scope::POOLING);
        let unfolded = g.reshape(m, &[c.t, c.tokens(), c.dim])?;
        let spatial = g.mean_along(unfolded, 1)?;
        let temporal = g.mean_along(unfolded, 0)?;
        g.set_scope(prev);
        Ok(Pooled { spatial, temporal })
    }

    pub(crate) fn project(&self, g: &mut Graph<S>, pv: &[Var], pooled: &Pooled, prompt: Prompt) -> Result<Var> {
        let ids = &self.ids.processors[prompt.slot()];
        let prev = g.set_scope(scope::PROCESSOR);
        let var = |id: crate::params::ParamId| pv[id.index()];
        let s = g.linear(pooled.spatial, var(ids.spatial_w), Some(var(ids.spatial_b)))?;
        let t = g.linear(pooled.temporal, var(ids.temporal_w), Some(var(ids.temporal_b)))?;
        let v = g.concat(s, t, 0)?;
        g.set_scope(prev);
        Ok(v)
    }

    /// `v_i = [proj_spatial(s_i); proj_temporal(t_i)]`, shape `[T + N, D]`,
    /// temporal-length block (one row per frame) first.
    pub fn feature_process(&self, g: &mut Graph<S>, pv: &[Var], m: Var, prompt: Prompt) -> Result<Var> {
        let pooled = self.pool(g, m)?;
        self.project(g, pv, &pooled, prompt)
    }
}

impl<S: Scalar> FtpModel<S> {
    /// Pools a batch `[B, T, h, w, D]` once for all processors.
    pub(crate) fn pool_batch(&self, g: &mut Graph<S>, maps: Var) -> Result<Pooled> {
        let c = &self.config;
        let want = [g.dims(maps)[0], c.t, c.grid_h, c.grid_w, c.dim];
        if g.dims(maps) != want {
            return Err(crate::error::Error::shape("feature batch", g.dims(maps), &want));
        }
        let b = want[0];
        let prev = g.set_scope(scope::POOLING);
        let by_frame = g.reshape(maps, &[b * c.t, c.tokens(), c.dim])?;
        let spatial = g.mean_along(by_frame, 1)?;
        let by_video = g.reshape(maps, &[b, c.t, c.tokens() * c.dim])?;
        let temporal = g.mean_along(by_video, 1)?;
        let temporal = g.reshape(temporal, &[b * c.tokens(), c.dim])?;
        g.set_scope(prev);
        Ok(Pooled { spatial, temporal })
    }

    /// Flattened `v_i` for a whole batch, `[B, (T + N) * D]`; row `j` equals
    /// `feature_process` of sample `j` read in row-major order.
    pub fn feature_process_batch(&self, g: &mut Graph<S>, pv: &[Var], maps: Var, prompt: Prompt) -> Result<Var> {
        let pooled = self.pool_batch(g, maps)?;
        self.project_batch(g, pv, &pooled, prompt)
    }

    pub(crate) fn project_batch(&self, g: &mut Graph<S>, pv: &[Var], pooled: &Pooled, prompt: Prompt) -> Result<Var> {
        let c = &self.config;
        let b = g.dims(pooled.spatial)[0] / c.t;
        let ids = &self.ids.processors[prompt.slot()];
        let prev = g.set_scope(scope::PROCESSOR);
        let var = |id: crate::params::ParamId| pv[id.index()];
        let s = g.linear(pooled.spatial, var(ids.spatial_w), Some(var(ids.spatial_b)))?;
        let s = g.reshape(s, &[b, c.t * c.dim])?;
        let t = g.linear(pooled.temporal, var(ids.temporal_w), Some(var(ids.temporal_b)))?;
        let t = g.reshape(t, &[b, c.tokens() * c.dim])?;
        let v = g.concat(s, t, 1)?;
        g.set_scope(prev);
        Ok(v)
    }
}
