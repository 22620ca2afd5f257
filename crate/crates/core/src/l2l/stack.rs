//! The stacked LSTM that emits circuit angles, plus its gradients and
//! weight-file container.
//!
//! Architecture notes. The hidden width is `2D` so the top layer maps
//! linearly onto the `2D` rotation angles. The per-step conditioning vector
//! (previous cost, weighted syndromes, normalized |l|) is injected into every
//! layer; the first layer additionally sees the previous angles, and deeper
//! layers see the hidden state of the layer below in that slot. With that
//! wiring each layer has input width `1 + 2D + S + N` and the total parameter
//! count lands exactly on the closed-form complexity figure the experiment
//! sweeps assert.
//!
//! The same cells double as a plain syndrome decoder (`SoftBits` kind): input
//! `(s', |l|)`, deeper layers fed by the hidden state below, and a
//! tanh-squashed per-bit emission instead of angles.

use rand::Rng;
use std::io::{Read, Write};

use crate::{Error, Result};

/// Small row-major dense matrix; just enough for the cells here.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// out += A x
    pub fn matvec_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, slot) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *slot += acc;
        }
    }

    /// out += Aᵀ y
    pub fn matvec_t_add(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &yv) in y.iter().enumerate() {
            if yv == 0.0 {
                continue;
            }
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (slot, &a) in out.iter_mut().zip(row) {
                *slot += yv * a;
            }
        }
    }

    /// A += y xᵀ
    pub fn outer_add(&mut self, y: &[f64], x: &[f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (r, &yv) in y.iter().enumerate() {
            if yv == 0.0 {
                continue;
            }
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (slot, &xv) in row.iter_mut().zip(x) {
                *slot += yv * xv;
            }
        }
    }
}

/// One LSTM layer: stacked gate weights in i, f, g, o order.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LstmLayer {
    pub w_x: Mat, // 4H x in_dim
    pub w_h: Mat, // 4H x H
    pub b: Vec<f64>,
}

/// What the stack emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StackKind {
    /// Absolute rotation angles (gamma, beta), 2D outputs.
    Angles { qaoa_depth: usize },
    /// Tanh-squashed per-bit soft values, for the classical decoder baseline.
    SoftBits { out_dim: usize },
}

/// Stacked LSTM with a linear output map.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStack {
    kind: StackKind,
    pub(crate) layers: Vec<LstmLayer>,
    pub(crate) w_out: Mat,
    pub(crate) b_out: Vec<f64>,
    hidden: usize,
    s_dim: usize,
    n_dim: usize,
    t_steps: usize,
    emit_increments: bool,
}

/// Per-layer hidden and cell vectors.
#[derive(Debug, Clone)]
pub struct LstmState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl LstmState {
    pub fn zeros(stack: &LstmStack) -> Self {
        let depth = stack.layers.len();
        LstmState { h: vec![vec![0.0; stack.hidden]; depth], c: vec![vec![0.0; stack.hidden]; depth] }
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub xs: Vec<Vec<f64>>,
    pub h_prev: Vec<Vec<f64>>,
    pub c_prev: Vec<Vec<f64>>,
    /// post-activation gates per layer: [i, f, g, o]
    pub gates: Vec<[Vec<f64>; 4]>,
    pub c: Vec<Vec<f64>>,
    pub tanh_c: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub out: Vec<f64>,
}

/// Gradient mirror of the stack.
#[derive(Debug, Clone)]
pub(crate) struct StackGrads {
    pub layers: Vec<LstmLayer>,
    pub w_out: Mat,
    pub b_out: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmStack {
    fn layer_input_dim(kind: StackKind, hidden: usize, s_dim: usize, n_dim: usize, layer: usize) -> usize {
        match kind {
            // cost + (angles | hidden below) + syndromes + |l|, same width everywhere
            StackKind::Angles { .. } => 1 + hidden + s_dim + n_dim,
            StackKind::SoftBits { .. } => {
                if layer == 0 {
                    s_dim + n_dim
                } else {
                    hidden
                }
            }
        }
    }

    fn build(
        kind: StackKind,
        hidden: usize,
        lstm_depth: usize,
        s_dim: usize,
        n_dim: usize,
        t_steps: usize,
    ) -> Result<Self> {
        if hidden == 0 || lstm_depth == 0 || t_steps == 0 {
            return Err(Error::InvalidArgument("stack dimensions must be positive".into()));
        }
        let out_dim = match kind {
            StackKind::Angles { qaoa_depth } => {
                if 2 * qaoa_depth != hidden {
                    return Err(Error::InvalidArgument(
                        "angle stacks require hidden = 2 * depth".into(),
                    ));
                }
                2 * qaoa_depth
            }
            StackKind::SoftBits { out_dim } => out_dim,
        };
        let layers = (0..lstm_depth)
            .map(|l| {
                let in_dim = Self::layer_input_dim(kind, hidden, s_dim, n_dim, l);
                LstmLayer {
                    w_x: Mat::zeros(4 * hidden, in_dim),
                    w_h: Mat::zeros(4 * hidden, hidden),
                    b: vec![0.0; 4 * hidden],
                }
            })
            .collect();
        Ok(LstmStack {
            kind,
            layers,
            w_out: Mat::zeros(out_dim, hidden),
            b_out: vec![0.0; out_dim],
            hidden,
            s_dim,
            n_dim,
            t_steps,
            emit_increments: false,
        })
    }

    /// Zero-weight angle-emitting stack for a depth-D circuit.
    pub fn new_l2l(
        qaoa_depth: usize,
        lstm_depth: usize,
        s_dim: usize,
        n_dim: usize,
        t_steps: usize,
    ) -> Result<Self> {
        Self::build(StackKind::Angles { qaoa_depth }, 2 * qaoa_depth, lstm_depth, s_dim, n_dim, t_steps)
    }

    /// Zero-weight soft-bit decoder stack.
    pub fn new_soft_bits(
        out_dim: usize,
        hidden: usize,
        lstm_depth: usize,
        s_dim: usize,
        n_dim: usize,
        t_steps: usize,
    ) -> Result<Self> {
        Self::build(StackKind::SoftBits { out_dim }, hidden, lstm_depth, s_dim, n_dim, t_steps)
    }

    pub fn kind(&self) -> StackKind {
        self.kind
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn s_dim(&self) -> usize {
        self.s_dim
    }

    pub fn n_dim(&self) -> usize {
        self.n_dim
    }

    pub fn lstm_depth(&self) -> usize {
        self.layers.len()
    }

    /// Refinement steps the stack was trained for.
    pub fn t_steps(&self) -> usize {
        self.t_steps
    }

    pub fn set_t_steps(&mut self, t: usize) {
        self.t_steps = t;
    }

    pub fn emit_increments(&self) -> bool {
        self.emit_increments
    }

    pub fn set_emit_increments(&mut self, on: bool) {
        self.emit_increments = on;
    }

    pub fn out_dim(&self) -> usize {
        self.b_out.len()
    }

    /// Circuit depth for angle stacks.
    pub fn qaoa_depth(&self) -> Option<usize> {
        match self.kind {
            StackKind::Angles { qaoa_depth } => Some(qaoa_depth),
            StackKind::SoftBits { .. } => None,
        }
    }

    /// Xavier-uniform weight init, forget-gate bias raised to 1.
    ///
    /// Angle stacks start from a linear annealing schedule: output bias set
    /// to a gamma-up / beta-down ramp and the output weights damped. A deep
    /// circuit at random angles scrambles every Z expectation to nearly zero
    /// and training stalls on that plateau; the ramp start decodes at a
    /// useful accuracy before any training and leaves a usable gradient.
    pub fn init_random<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let h = self.hidden;
        for layer in &mut self.layers {
            for m in [&mut layer.w_x, &mut layer.w_h] {
                let limit = (6.0 / (m.rows + m.cols) as f64).sqrt();
                for v in &mut m.data {
                    *v = rng.random_range(-limit..limit);
                }
            }
            for v in &mut layer.b {
                *v = 0.0;
            }
            for v in &mut layer.b[h..2 * h] {
                *v = 1.0;
            }
        }
        let xavier = (6.0 / (self.w_out.rows + self.w_out.cols) as f64).sqrt();
        let limit = match self.kind {
            StackKind::Angles { .. } => 0.1 * xavier,
            StackKind::SoftBits { .. } => xavier,
        };
        for v in &mut self.w_out.data {
            *v = rng.random_range(-limit..limit);
        }
        for v in &mut self.b_out {
            *v = 0.0;
        }
        if let StackKind::Angles { qaoa_depth } = self.kind {
            for i in 0..qaoa_depth {
                let frac = (i as f64 + 0.5) / qaoa_depth as f64;
                self.b_out[i] = RAMP_SCALE * frac;
                self.b_out[qaoa_depth + i] = RAMP_SCALE * (1.0 - frac);
            }
        }
    }

    /// Exact number of scalars in the stack, biases and output map included.
    pub fn param_count(&self) -> usize {
        let mut count = 0;
        for l in &self.layers {
            count += l.w_x.data.len() + l.w_h.data.len() + l.b.len();
        }
        count + self.w_out.data.len() + self.b_out.len()
    }

    pub(crate) fn assemble_input(
        &self,
        layer: usize,
        cost: f64,
        params_or_below: &[f64],
        syndromes: &[f64],
        abs_l: &[f64],
    ) -> Vec<f64> {
        match self.kind {
            StackKind::Angles { .. } => {
                let mut x = Vec::with_capacity(1 + self.hidden + self.s_dim + self.n_dim);
                x.push(cost);
                x.extend_from_slice(params_or_below);
                x.extend_from_slice(syndromes);
                x.extend_from_slice(abs_l);
                x
            }
            StackKind::SoftBits { .. } => {
                if layer == 0 {
                    let mut x = Vec::with_capacity(self.s_dim + self.n_dim);
                    x.extend_from_slice(syndromes);
                    x.extend_from_slice(abs_l);
                    x
                } else {
                    params_or_below.to_vec()
                }
            }
        }
    }

    /// One step of the stack. `params` is the previous angle vector for angle
    /// stacks and is ignored for soft-bit stacks. Returns the raw emission.
    pub(crate) fn step(
        &self,
        cost: f64,
        params: &[f64],
        syndromes: &[f64],
        abs_l: &[f64],
        state: &mut LstmState,
        mut cache: Option<&mut StepCache>,
    ) -> Result<Vec<f64>> {
        if syndromes.len() != self.s_dim || abs_l.len() != self.n_dim {
            return Err(Error::InvalidArgument(format!(
                "conditioning dims ({}, {}) do not match stack ({}, {})",
                syndromes.len(),
                abs_l.len(),
                self.s_dim,
                self.n_dim
            )));
        }
        let h = self.hidden;
        let mut below: Vec<f64> = params.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let x = self.assemble_input(l, cost, &below, syndromes, abs_l);
            if x.len() != layer.w_x.cols {
                return Err(Error::InvalidArgument(format!(
                    "layer {l} input width {} does not match weights ({})",
                    x.len(),
                    layer.w_x.cols
                )));
            }
            let mut z = layer.b.clone();
            layer.w_x.matvec_add(&x, &mut z);
            layer.w_h.matvec_add(&state.h[l], &mut z);

            let mut a_i = vec![0.0; h];
            let mut a_f = vec![0.0; h];
            let mut a_g = vec![0.0; h];
            let mut a_o = vec![0.0; h];
            for j in 0..h {
                a_i[j] = sigmoid(z[j]);
                a_f[j] = sigmoid(z[h + j]);
                a_g[j] = z[2 * h + j].tanh();
                a_o[j] = sigmoid(z[3 * h + j]);
            }
            let mut c_new = vec![0.0; h];
            let mut tanh_c = vec![0.0; h];
            let mut h_new = vec![0.0; h];
            for j in 0..h {
                c_new[j] = a_f[j] * state.c[l][j] + a_i[j] * a_g[j];
                tanh_c[j] = c_new[j].tanh();
                h_new[j] = a_o[j] * tanh_c[j];
            }

            if let Some(cache) = cache.as_deref_mut() {
                cache.xs.push(x);
                cache.h_prev.push(state.h[l].clone());
                cache.c_prev.push(state.c[l].clone());
                cache.gates.push([a_i, a_f, a_g, a_o]);
                cache.c.push(c_new.clone());
                cache.tanh_c.push(tanh_c);
                cache.h.push(h_new.clone());
            }

            state.h[l] = h_new.clone();
            state.c[l] = c_new;
            below = h_new;
        }

        let mut out = self.b_out.clone();
        self.w_out.matvec_add(&below, &mut out);
        if let Some(cache) = cache {
            cache.out = out.clone();
        }
        Ok(out)
    }

    /// Backward through one step. `demission` is the adjoint of the raw
    /// emission; `dh_carry`/`dc_carry` hold the recurrent adjoints flowing in
    /// from the following step and are replaced with the ones for the
    /// preceding step. Returns the adjoints of the step's external inputs
    /// (previous cost, and the previous-angles slot for angle stacks).
    pub(crate) fn backward_step(
        &self,
        cache: &StepCache,
        demission: &[f64],
        dh_carry: &mut [Vec<f64>],
        dc_carry: &mut [Vec<f64>],
        grads: &mut StackGrads,
    ) -> (f64, Vec<f64>) {
        let h = self.hidden;
        let top = self.layers.len() - 1;

        grads.w_out.outer_add(demission, &cache.h[top]);
        for (g, d) in grads.b_out.iter_mut().zip(demission) {
            *g += d;
        }
        let mut dh_above = vec![0.0; h];
        self.w_out.matvec_t_add(demission, &mut dh_above);

        let mut dcost = 0.0;
        let mut dparams = vec![0.0; self.param_slot_width()];

        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let mut dh = dh_carry[l].clone();
            for (a, b) in dh.iter_mut().zip(&dh_above) {
                *a += b;
            }
            let [a_i, a_f, a_g, a_o] = &cache.gates[l];
            let tanh_c = &cache.tanh_c[l];
            let c_prev = &cache.c_prev[l];

            let mut dc = dc_carry[l].clone();
            let mut dz = vec![0.0; 4 * h];
            for j in 0..h {
                dc[j] += dh[j] * a_o[j] * (1.0 - tanh_c[j] * tanh_c[j]);
                let d_o = dh[j] * tanh_c[j];
                dz[3 * h + j] = d_o * a_o[j] * (1.0 - a_o[j]);
                let d_i = dc[j] * a_g[j];
                dz[j] = d_i * a_i[j] * (1.0 - a_i[j]);
                let d_f = dc[j] * c_prev[j];
                dz[h + j] = d_f * a_f[j] * (1.0 - a_f[j]);
                let d_g = dc[j] * a_i[j];
                dz[2 * h + j] = d_g * (1.0 - a_g[j] * a_g[j]);
            }

            grads.layers[l].w_x.outer_add(&dz, &cache.xs[l]);
            grads.layers[l].w_h.outer_add(&dz, &cache.h_prev[l]);
            for (g, d) in grads.layers[l].b.iter_mut().zip(&dz) {
                *g += d;
            }

            let mut dx = vec![0.0; layer.w_x.cols];
            layer.w_x.matvec_t_add(&dz, &mut dx);
            let mut dh_prev = vec![0.0; h];
            layer.w_h.matvec_t_add(&dz, &mut dh_prev);
            dh_carry[l] = dh_prev;
            for j in 0..h {
                dc_carry[l][j] = dc[j] * a_f[j];
            }

            dh_above = vec![0.0; h];
            match self.kind {
                StackKind::Angles { .. } => {
                    dcost += dx[0];
                    if l == 0 {
                        for (slot, &v) in dparams.iter_mut().zip(&dx[1..1 + h]) {
                            *slot += v;
                        }
                    } else {
                        dh_above.copy_from_slice(&dx[1..1 + h]);
                    }
                }
                StackKind::SoftBits { .. } => {
                    if l > 0 {
                        dh_above.copy_from_slice(&dx[..h]);
                    }
                }
            }
        }
        (dcost, dparams)
    }

    fn param_slot_width(&self) -> usize {
        match self.kind {
            StackKind::Angles { .. } => self.hidden,
            StackKind::SoftBits { .. } => 0,
        }
    }

    // ------------------------------------------------------------------
    // Flat parameter vector (canonical order: per layer w_x, w_h, b;
    // then w_out, b_out; matrices row-major)
    // ------------------------------------------------------------------

    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            flat.extend_from_slice(&l.w_x.data);
            flat.extend_from_slice(&l.w_h.data);
            flat.extend_from_slice(&l.b);
        }
        flat.extend_from_slice(&self.w_out.data);
        flat.extend_from_slice(&self.b_out);
        flat
    }

    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::WeightMismatch(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut pos = 0;
        let mut take = |buf: &mut [f64]| {
            buf.copy_from_slice(&flat[pos..pos + buf.len()]);
            pos += buf.len();
        };
        for l in &mut self.layers {
            take(&mut l.w_x.data);
            take(&mut l.w_h.data);
            take(&mut l.b);
        }
        take(&mut self.w_out.data);
        take(&mut self.b_out);
        Ok(())
    }

    pub(crate) fn grads_zeros(&self) -> StackGrads {
        StackGrads {
            layers: self
                .layers
                .iter()
                .map(|l| LstmLayer {
                    w_x: Mat::zeros(l.w_x.rows, l.w_x.cols),
                    w_h: Mat::zeros(l.w_h.rows, l.w_h.cols),
                    b: vec![0.0; l.b.len()],
                })
                .collect(),
            w_out: Mat::zeros(self.w_out.rows, self.w_out.cols),
            b_out: vec![0.0; self.b_out.len()],
        }
    }

    // ------------------------------------------------------------------
    // Weight file container
    // ------------------------------------------------------------------

    /// Serialize into the versioned binary weight container.
    pub fn save<P: AsRef<std::path::Path>>(&self, path: P) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(WEIGHT_MAGIC)?;
        w.write_all(&WEIGHT_VERSION.to_le_bytes())?;
        let (tag, head_dim) = match self.kind {
            StackKind::Angles { qaoa_depth } => (0u8, qaoa_depth as u32),
            StackKind::SoftBits { out_dim } => (1u8, out_dim as u32),
        };
        w.write_all(&[tag, self.emit_increments as u8])?;
        for v in [
            self.layers.len() as u32,
            head_dim,
            self.hidden as u32,
            self.s_dim as u32,
            self.n_dim as u32,
            self.t_steps as u32,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        let flat = self.to_flat();
        w.write_all(&(flat.len() as u64).to_le_bytes())?;
        for v in flat {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Load a weight container, refusing anything whose header does not
    /// describe a stack this code can rebuild exactly.
    pub fn load<P: AsRef<std::path::Path>>(path: P) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != WEIGHT_MAGIC {
            return Err(Error::Parse("not a weight container (bad magic)".into()));
        }
        let mut u16b = [0u8; 2];
        r.read_exact(&mut u16b)?;
        let version = u16::from_le_bytes(u16b);
        if version != WEIGHT_VERSION {
            return Err(Error::Parse(format!("unsupported weight container version {version}")));
        }
        let mut two = [0u8; 2];
        r.read_exact(&mut two)?;
        let (tag, increments) = (two[0], two[1] != 0);
        let mut u32b = [0u8; 4];
        let mut next_u32 = |r: &mut std::io::BufReader<std::fs::File>| -> Result<u32> {
            r.read_exact(&mut u32b)?;
            Ok(u32::from_le_bytes(u32b))
        };
        let lstm_depth = next_u32(&mut r)? as usize;
        let head_dim = next_u32(&mut r)? as usize;
        let hidden = next_u32(&mut r)? as usize;
        let s_dim = next_u32(&mut r)? as usize;
        let n_dim = next_u32(&mut r)? as usize;
        let t_steps = next_u32(&mut r)? as usize;

        let kind = match tag {
            0 => StackKind::Angles { qaoa_depth: head_dim },
            1 => StackKind::SoftBits { out_dim: head_dim },
            other => return Err(Error::Parse(format!("unknown stack kind tag {other}"))),
        };
        let mut stack = Self::build(kind, hidden, lstm_depth, s_dim, n_dim, t_steps)?;
        stack.emit_increments = increments;

        let mut u64b = [0u8; 8];
        r.read_exact(&mut u64b)?;
        let count = u64::from_le_bytes(u64b) as usize;
        if count != stack.param_count() {
            return Err(Error::WeightMismatch(format!(
                "container holds {count} parameters, architecture needs {}",
                stack.param_count()
            )));
        }
        let mut flat = vec![0.0f64; count];
        let mut f64b = [0u8; 8];
        for v in &mut flat {
            r.read_exact(&mut f64b)?;
            *v = f64::from_le_bytes(f64b);
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::Parse("trailing bytes after weight data".into()));
        }
        stack.set_from_flat(&flat)?;
        Ok(stack)
    }
}

/// Initial annealing-ramp amplitude for angle stacks.
const RAMP_SCALE: f64 = 0.3;

const WEIGHT_MAGIC: &[u8; 4] = b"QTL2";
const WEIGHT_VERSION: u16 = 1;

/// Closed-form parameter count the complexity table quotes for an angle
/// stack: `4 L_D (8D^2 + 2DS + 2DN + 4D) + 4D^2 + 2D`.
pub fn param_count_formula(d: usize, l_d: usize, s: usize, n: usize) -> usize {
    4 * l_d * (8 * d * d + 2 * d * s + 2 * d * n + 4 * d) + 4 * d * d + 2 * d
}
