//! Reverse-mode gradients of the summed cross-entropy loss.

use ndarray::{s, Array1, Array2, Axis, Zip};

use crate::error::{Error, Result};
use crate::model::{ForwardTrace, ModelInputs, ModelParams};
use crate::training::loss::PROB_CLAMP;

/// `g ⊙ [pre > 0]`, optionally scaled by a dropout mask.
fn through_relu(mut g: Array2<f64>, pre: &Array2<f64>, mask: Option<&Array2<f64>>) -> Array2<f64> {
    if let Some(m) = mask {
        g *= m;
    }
    Zip::from(&mut g).and(pre).for_each(|g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
    g
}

/// Gradients of `Σ_{v ∈ nodes} bce(p_v, y_v)` with respect to every
/// parameter; `γ` is a fixed hyperparameter and has no gradient. Dropout
/// masks recorded in the trace are reused.
pub fn backward(
    trace: &ForwardTrace,
    inputs: &ModelInputs,
    params: &ModelParams,
    nodes: &[usize],
    targets: &[u8],
    class_weights: Option<[f64; 2]>,
) -> Result<ModelParams> {
    if !trace.is_current(params) {
        return Err(Error::StaleTrace);
    }
    if nodes.is_empty() {
        return Err(Error::EmptyNodeSet);
    }
    if nodes.len() != targets.len() {
        return Err(Error::dims("backward", nodes.len(), targets.len()));
    }
    let n = trace.probs.len();
    let mut grads = params.zeros_like();

    // d loss / d logit = w_y (p - y); zero where the probability clamp is active.
    let mut dlogit = Array1::<f64>::zeros(n);
    for (&v, &y) in nodes.iter().zip(targets) {
        let p = trace.probs[v];
        if p <= PROB_CLAMP || p >= 1.0 - PROB_CLAMP {
            continue;
        }
        let w = class_weights.map_or(1.0, |cw| cw[y as usize]);
        dlogit[v] += w * (p - y as f64);
    }

    // detection head
    let mut g = dlogit.insert_axis(Axis(1));
    let last = params.head.len() - 1;
    for i in (0..=last).rev() {
        if i != last {
            g = through_relu(g, &trace.head_pre[i], trace.head_masks[i].as_ref());
        }
        let layer = &params.head[i];
        grads.head[i].weight.assign(&trace.head_inputs[i].t().dot(&g));
        grads.head[i].bias.assign(&g.sum_axis(Axis(0)));
        g = g.dot(&layer.weight.t());
    }
    let dz = g;

    let dh = params
        .relations
        .first()
        .map(|r| r.gate_weights.ncols())
        .unwrap_or(0);
    for (r, (rt, rp)) in trace.relations.iter().zip(&params.relations).enumerate() {
        let prep = &inputs.relations()[r];
        let dfused = dz.slice(s![.., r * dh..(r + 1) * dh]).to_owned();

        // mean-aggregator branch
        let mut dout = dfused.clone();
        for k in (0..rp.sage.len()).rev() {
            let gk = through_relu(dout, &rt.sage_pre[k], rt.sage_masks[k].as_ref());
            grads.relations[r].sage[k].assign(&rt.sage_inputs[k].t().dot(&gk));
            if k == 0 {
                break;
            }
            let dinput = gk.dot(&rp.sage[k].t());
            let d_prev = rp.sage[k].nrows() / 2;
            let dself = dinput.slice(s![.., ..d_prev]);
            let dneigh = dinput.slice(s![.., d_prev..]).to_owned();
            dout = prep.mean_adjacency_t().spmm(&dneigh)? + dself;
        }

        // high-order experts and gating
        if trace.gamma == 0.0 {
            continue;
        }
        let dmixed = dfused * trace.gamma;
        let orders = rt.expert_out.len();
        let mut dalpha = Array2::<f64>::zeros((n, orders));
        for (l, h) in rt.expert_out.iter().enumerate() {
            let col = (h * &dmixed).sum_axis(Axis(1));
            dalpha.column_mut(l).assign(&col);
        }
        // softmax: df_l = α_l (dα_l - Σ_j α_j dα_j)
        let centered = (&rt.alpha * &dalpha).sum_axis(Axis(1)).insert_axis(Axis(1));
        let dscores = &rt.alpha * &(&dalpha - &centered);

        let grel = &mut grads.relations[r];
        for (l, h) in rt.expert_out.iter().enumerate() {
            let alpha_l = rt.alpha.column(l).insert_axis(Axis(1));
            let df = dscores.column(l);
            grel.gate_weights.row_mut(l).assign(&h.t().dot(&df));
            grel.gate_biases[l] = df.sum();

            let mut dh_l = &dmixed * &alpha_l;
            let w_l = rp.gate_weights.row(l);
            dh_l += &(&df.insert_axis(Axis(1)) * &w_l.insert_axis(Axis(0)));
            let dpre = through_relu(dh_l, &rt.expert_pre[l], None);
            grel.experts[l].assign(&prep.propagated().order(l + 1).t().dot(&dpre));
        }
    }
    Ok(grads)
}
