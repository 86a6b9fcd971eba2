//! LSTM kernels, grouped recurrent layers and the channel rearrangement
//! that exchanges information between groups.

use crate::error::{config_err, shape_err, Result};
use crate::linalg::{dot, Dense, LayerNorm};
use crate::macs::SublayerMacs;

/// One LSTM cell. Gate blocks are stacked in the order input, forget, cell,
/// output; `w_ih` is `[4H x I]`, `w_hh` is `[4H x H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_ih: Vec<f32>,
    pub w_hh: Vec<f32>,
    pub bias: Vec<f32>,
}

impl LstmWeights {
    pub fn new(
        input_dim: usize,
        hidden_dim: usize,
        w_ih: Vec<f32>,
        w_hh: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        let g = 4 * hidden_dim;
        if w_ih.len() != g * input_dim || w_hh.len() != g * hidden_dim || bias.len() != g {
            return Err(shape_err(format!(
                "lstm {input_dim}->{hidden_dim}: got w_ih {}, w_hh {}, bias {}",
                w_ih.len(),
                w_hh.len(),
                bias.len()
            )));
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            w_ih,
            w_hh,
            bias,
        })
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let g = 4 * hidden_dim;
        Self {
            input_dim,
            hidden_dim,
            w_ih: vec![0.0; g * input_dim],
            w_hh: vec![0.0; g * hidden_dim],
            bias: vec![0.0; g],
        }
    }

    /// MACs of one recurrence step.
    pub fn step_macs(&self) -> u64 {
        (4 * self.hidden_dim * (self.input_dim + self.hidden_dim)) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f32>,
    pub c: Vec<f32>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            h: vec![0.0; hidden_dim],
            c: vec![0.0; hidden_dim],
        }
    }
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Advances the cell by one input vector, updating `state` in place.
/// `gates` is scratch space reused across steps.
pub fn lstm_step(
    x: &[f32],
    state: &mut LstmState,
    w: &LstmWeights,
    gates: &mut Vec<f32>,
    macs: &mut u64,
) {
    let h_dim = w.hidden_dim;
    debug_assert_eq!(x.len(), w.input_dim);
    gates.resize(4 * h_dim, 0.0);
    let rows_ih = w.w_ih.chunks_exact(w.input_dim.max(1));
    let rows_hh = w.w_hh.chunks_exact(h_dim.max(1));
    for ((g, b), (wi, wh)) in gates.iter_mut().zip(&w.bias).zip(rows_ih.zip(rows_hh)) {
        *g = b + dot(wi, x) + dot(wh, &state.h);
    }
    for j in 0..h_dim {
        let i = sigmoid(gates[j]);
        let f = sigmoid(gates[h_dim + j]);
        let g = gates[2 * h_dim + j].tanh();
        let o = sigmoid(gates[3 * h_dim + j]);
        let c = f * state.c[j] + i * g;
        state.c[j] = c;
        state.h[j] = o * c.tanh();
    }
    *macs += w.step_macs();
}

/// A unidirectional or bidirectional LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnWeights {
    pub forward: LstmWeights,
    pub backward: Option<LstmWeights>,
}

impl RnnWeights {
    pub fn input_dim(&self) -> usize {
        self.forward.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.forward.hidden_dim
    }

    pub fn directions(&self) -> usize {
        if self.backward.is_some() {
            2
        } else {
            1
        }
    }

    pub fn output_dim(&self) -> usize {
        self.directions() * self.hidden_dim()
    }
}

struct OutputSlot<'a> {
    buf: &'a mut [f32],
    stride: usize,
    offset: usize,
}

fn run_direction(
    seq: &[f32],
    len: usize,
    w: &LstmWeights,
    reverse: bool,
    out: OutputSlot<'_>,
    macs: &mut u64,
) {
    let i_dim = w.input_dim;
    let h_dim = w.hidden_dim;
    let mut state = LstmState::zeros(h_dim);
    let mut gates = Vec::with_capacity(4 * h_dim);
    for s in 0..len {
        let t = if reverse { len - 1 - s } else { s };
        lstm_step(
            &seq[t * i_dim..(t + 1) * i_dim],
            &mut state,
            w,
            &mut gates,
            macs,
        );
        let o = t * out.stride + out.offset;
        out.buf[o..o + h_dim].copy_from_slice(&state.h);
    }
}

/// Runs the LSTM over a `[len x I]` sequence from zero state. A backward
/// cell, when present, scans the reversed sequence and its outputs are
/// appended after the forward ones at each position.
pub fn lstm_forward(seq: &[f32], w: &RnnWeights, macs: &mut u64) -> Vec<f32> {
    let i_dim = w.input_dim();
    let len = seq.len().checked_div(i_dim).unwrap_or(0);
    let h_dim = w.hidden_dim();
    let stride = w.output_dim();
    let mut out = vec![0.0; len * stride];
    let fwd = OutputSlot {
        buf: &mut out,
        stride,
        offset: 0,
    };
    run_direction(seq, len, &w.forward, false, fwd, macs);
    if let Some(bwd) = &w.backward {
        let slot = OutputSlot {
            buf: &mut out,
            stride,
            offset: h_dim,
        };
        run_direction(seq, len, bwd, true, slot, macs);
    }
    out
}

/// Channel shuffle over the last axis: channels viewed as `[g x C/g]` are
/// transposed to `[C/g x g]`.
pub fn rearrange(features: &[f32], channels: usize, groups: usize) -> Result<Vec<f32>> {
    if groups == 0 || !channels.is_multiple_of(groups) {
        return Err(config_err(format!(
            "cannot rearrange {channels} channels into {groups} groups"
        )));
    }
    if channels == 0 {
        return Ok(features.to_vec());
    }
    let per = channels / groups;
    let mut out = vec![0.0; features.len()];
    for (src, dst) in features
        .chunks_exact(channels)
        .zip(out.chunks_exact_mut(channels))
    {
        for g in 0..groups {
            for j in 0..per {
                dst[j * groups + g] = src[g * per + j];
            }
        }
    }
    Ok(out)
}

/// `g` independent recurrent cells over disjoint channel groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedRnn {
    pub groups: Vec<RnnWeights>,
}

impl GroupedRnn {
    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn input_dim(&self) -> usize {
        self.groups.iter().map(RnnWeights::input_dim).sum()
    }

    pub fn hidden_dim(&self) -> usize {
        self.groups.iter().map(RnnWeights::hidden_dim).sum()
    }

    pub fn output_dim(&self) -> usize {
        self.groups.iter().map(RnnWeights::output_dim).sum()
    }

    pub fn directions(&self) -> usize {
        self.groups.first().map_or(1, RnnWeights::directions)
    }

    pub fn check(&self) -> Result<()> {
        let first = self
            .groups
            .first()
            .ok_or_else(|| config_err("grouped rnn has no groups"))?;
        for (j, g) in self.groups.iter().enumerate() {
            if g.input_dim() != first.input_dim()
                || g.hidden_dim() != first.hidden_dim()
                || g.directions() != first.directions()
            {
                return Err(shape_err(format!(
                    "group {j} differs in shape from group 0"
                )));
            }
            if let Some(b) = &g.backward {
                if b.input_dim != g.input_dim() || b.hidden_dim != g.hidden_dim() {
                    return Err(shape_err(format!("group {j}: backward cell shape differs")));
                }
            }
        }
        Ok(())
    }

    /// Per-group recurrence without the closing rearrangement. Output
    /// channels of group `j` occupy the `j`-th block of `output_dim / g`.
    pub fn forward_groups(&self, seq: &[f32], macs: &mut u64) -> Vec<f32> {
        let g = self.group_count();
        let i_all = self.input_dim();
        let len = seq.len().checked_div(i_all).unwrap_or(0);
        if g == 1 {
            return lstm_forward(seq, &self.groups[0], macs);
        }
        let i_per = i_all / g;
        let o_all = self.output_dim();
        let o_per = o_all / g;
        let mut out = vec![0.0; len * o_all];
        let mut part = Vec::with_capacity(len * i_per);
        for (j, cell) in self.groups.iter().enumerate() {
            part.clear();
            for t in 0..len {
                let row = &seq[t * i_all..(t + 1) * i_all];
                part.extend_from_slice(&row[j * i_per..(j + 1) * i_per]);
            }
            let y = lstm_forward(&part, cell, macs);
            for t in 0..len {
                out[t * o_all + j * o_per..t * o_all + (j + 1) * o_per]
                    .copy_from_slice(&y[t * o_per..(t + 1) * o_per]);
            }
        }
        out
    }

    /// Grouped recurrence followed by the channel rearrangement.
    pub fn forward(&self, seq: &[f32], macs: &mut u64) -> Vec<f32> {
        let y = self.forward_groups(seq, macs);
        if self.group_count() == 1 {
            return y;
        }
        rearrange(&y, self.output_dim(), self.group_count())
            .expect("output width is a multiple of the group count")
    }
}

/// Applies `grouped` to a `[len x I]` sequence.
pub fn grouped_forward(seq: &[f32], grouped: &GroupedRnn, macs: &mut u64) -> Result<Vec<f32>> {
    grouped.check()?;
    let i_dim = grouped.input_dim();
    if i_dim == 0 || !seq.len().is_multiple_of(i_dim) {
        return Err(shape_err(format!(
            "sequence of {} values is not a multiple of input dim {i_dim}",
            seq.len()
        )));
    }
    Ok(grouped.forward(seq, macs))
}

/// One dual-path sublayer without its residual: layer norm, grouped LSTM,
/// then a dense map back to the feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedLayerWeights {
    pub norm: LayerNorm,
    pub rnn: GroupedRnn,
    pub proj: Dense,
}

impl GroupedLayerWeights {
    pub fn feature_dim(&self) -> usize {
        self.norm.dim()
    }

    pub fn check(&self) -> Result<()> {
        self.rnn.check()?;
        let n = self.feature_dim();
        if self.rnn.input_dim() != n {
            return Err(shape_err(format!(
                "rnn input dim {} does not match feature dim {n}",
                self.rnn.input_dim()
            )));
        }
        if self.proj.in_dim != self.rnn.output_dim() || self.proj.out_dim != n {
            return Err(shape_err(format!(
                "projection {} -> {} does not map rnn output {} back to {n}",
                self.proj.in_dim,
                self.proj.out_dim,
                self.rnn.output_dim()
            )));
        }
        Ok(())
    }

    /// Maps a `[len x N]` sequence to `[len x N]`; the caller adds the residual.
    pub fn apply(&self, seq: &[f32], macs: &mut SublayerMacs) -> Vec<f32> {
        let normed = self.norm.apply_rows(seq);
        let y = self.rnn.forward(&normed, &mut macs.recurrent);
        self.proj.apply_rows(&y, &mut macs.projection)
    }
}
