use super::{scope, FtpModel};
use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Scalar;

impl<S: Scalar> FtpModel<S> {
    /// Folds processor outputs back into the feature map:
    ///
    /// `f[t, x, y] = m[t, x, y] + sum_i gain_i (P_time a_i[t] + P_space b_i[xy])`
    ///
    /// where `a_i` / `b_i` are the first `T` / last `N` rows of `v_i`. The
    /// projections are linear and shared across prompts, so the gain-weighted
    /// sums of `a_i` and `b_i` are projected once. `vs` has one slot per
    /// prompt; `None` slots contribute nothing.
    pub fn integrate(&self, g: &mut Graph<S>, pv: &[Var], m: Var, vs: &[Option<Var>]) -> Result<Var> {
        if vs.len() != 4 {
            return Err(Error::Contract(format!(
                "integrate expects 4 processor slots, got {}",
                vs.len()
            )));
        }
        self.check_feature_map(g, m)?;
        let c = &self.config;
        let (t, n, d) = (c.t, c.tokens(), c.dim);
        for v in vs.iter().flatten() {
            if g.dims(*v) != [t + n, d] {
                return Err(Error::shape("integrate", g.dims(*v), &[t + n, d]));
            }
        }
        if vs.iter().all(Option::is_none) {
            return Ok(m);
        }
        let prev = g.set_scope(scope::INTEGRATION);
        let ids = &self.ids.integration;
        let gain = pv[ids.gain.index()];
        let mut temporal: Option<Var> = None;
        let mut spatial: Option<Var> = None;
        for (slot, v) in vs.iter().enumerate() {
            let Some(v) = *v else { continue };
            let weighted = g.scale_by(v, gain, slot)?;
            let a = g.narrow(weighted, 0, 0, t)?;
            let b = g.narrow(weighted, 0, t, n)?;
            temporal = Some(match temporal {
                Some(acc) => g.add(acc, a)?,
                None => a,
            });
            spatial = Some(match spatial {
                Some(acc) => g.add(acc, b)?,
                None => b,
            });
        }
        let (a, b) = (temporal.expect("non-empty"), spatial.expect("non-empty"));
        let pa = g.matmul(a, pv[ids.time_w.index()])?;
        let pb = g.matmul(b, pv[ids.space_w.index()])?;
        // [T, D] replicated over positions, [N, D] replicated over time
        let ra = g.repeat(pa, 1, n)?;
        let rb = g.repeat(pb, 0, t)?;
        let m3 = g.reshape(m, &[t, n, d])?;
        let f = g.add(m3, ra)?;
        let f = g.add(f, rb)?;
        let f = g.reshape(f, &[t, c.grid_h, c.grid_w, d])?;
        g.set_scope(prev);
        Ok(f)
    }
}
