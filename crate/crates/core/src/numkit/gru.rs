//! Gated recurrent unit.
//!
//! Convention:
//!
//! ```text
//! z  = sigmoid(W_z x + U_z h + b_z)
//! r  = sigmoid(W_r x + U_r h + b_r)
//! h~ = tanh(W_h x + U_h (r * h) + b_h)
//! h' = (1 - z) * h + z * h~
//! ```
//!
//! `W_*` are hidden x input, `U_*` hidden x hidden. Parameters live in a
//! [`ParamSet`] under `"{prefix}w_z"`, `"{prefix}u_z"`, `"{prefix}b_z"` and
//! likewise for `r` and `h`.

use alloc::format;
use alloc::string::String;
use alloc::vec;

use super::array::Array;
use super::params::ParamSet;
use super::rng::Rng;
use super::tape::{Tape, Var};
use crate::error::{dim, Result};

pub const GRU_BLOCKS: [&str; 9] = ["w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h"];

fn key(prefix: &str, block: &str) -> String {
    format!("{prefix}{block}")
}

/// Adds the nine GRU blocks, weights uniform in `±1/sqrt(hidden)`, biases zero.
pub fn init_gru(params: &mut ParamSet, prefix: &str, input: usize, hidden: usize, rng: &mut Rng) -> Result<()> {
    let scale = 1.0 / libm::sqrt(hidden as f64);
    for gate in ["z", "r", "h"] {
        params.insert_uniform(key(prefix, &format!("w_{gate}")), hidden, input, scale, rng)?;
        params.insert_uniform(key(prefix, &format!("u_{gate}")), hidden, hidden, scale, rng)?;
        params.insert(key(prefix, &format!("b_{gate}")), Array::zeros(vec![hidden]), true)?;
    }
    Ok(())
}

/// `(input, hidden)` widths of the cell stored under `prefix`.
pub fn gru_width(params: &ParamSet, prefix: &str) -> Result<(usize, usize)> {
    let (hidden, input) = params.get(&key(prefix, "w_z"))?.matrix_dims();
    Ok((input, hidden))
}

/// One recurrent step recorded on `tape`.
pub fn gru_step<'p>(tape: &mut Tape<'p>, params: &'p ParamSet, prefix: &str, x: Var, h: Var) -> Result<Var> {
    let (input, hidden) = gru_width(params, prefix)?;
    dim("gru input width", input, tape.width(x))?;
    dim("gru hidden width", hidden, tape.width(h))?;
    let mut vars = [None; 9];
    for (slot, block) in vars.iter_mut().zip(GRU_BLOCKS) {
        *slot = Some(tape.param(params, &key(prefix, block))?);
    }
    let [wz, uz, bz, wr, ur, br, wh, uh, bh] = vars.map(Option::unwrap);

    let zx = tape.affine(x, wz, Some(bz))?;
    let zh = tape.affine(h, uz, None)?;
    let z = tape.add(zx, zh)?;
    let z = tape.sigmoid(z);

    let rx = tape.affine(x, wr, Some(br))?;
    let rh = tape.affine(h, ur, None)?;
    let r = tape.add(rx, rh)?;
    let r = tape.sigmoid(r);

    let rh = tape.mul(r, h)?;
    let cx = tape.affine(x, wh, Some(bh))?;
    let ch = tape.affine(rh, uh, None)?;
    let cand = tape.add(cx, ch)?;
    let cand = tape.tanh(cand);

    let delta = tape.sub(cand, h)?;
    let step = tape.mul(z, delta)?;
    tape.add(h, step)
}

/// Eager single step: returns the next hidden vector.
pub fn gru_cell(x: &Array, h: &Array, params: &ParamSet, prefix: &str) -> Result<Array> {
    let mut tape = Tape::new();
    let xv = tape.constant(x);
    let hv = tape.constant(h);
    let out = gru_step(&mut tape, params, prefix, xv, hv)?;
    Ok(Array::vector(tape.value(out).to_vec()))
}
