//! Fully connected GRU: a two-layer tanh enrichment of each timestep's input
//! followed by the gated recurrent update.
//!
//! ```text
//! x'  = tanh(W2 · tanh(W1 · x + b1) + b2)
//! z   = σ(W_zx · x' + W_zh · h_prev + b_z)
//! r   = σ(W_rx · x' + W_rh · h_prev + b_r)
//! h   = z ⊙ h_prev + (1 − z) ⊙ tanh(W_hx · x' + W_hr · (r ⊙ h_prev) + b_h)
//! ```
//!
//! Everything is stored in row-vector convention, so `W1` is `C × u1` and the
//! products above are written `x · W1` in code.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{
    glorot_init, outer_acc, sigmoid, vec_mat_acc, vec_mat_t_acc, Matrix, Parameters,
    SeededRng,
};

/// How the per-timestep input is preprocessed before the gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Enrichment {
    /// Two fully connected tanh layers.
    FullyConnected,
    /// No enrichment; the cell is a plain GRU.
    Identity,
}

/// Which input feeds the candidate state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateInput {
    /// The enriched input, like the gates.
    Enriched,
    /// The raw timestep input instead of the enriched one.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FcgruConfig {
    pub input_channels: usize,
    pub fc1_units: usize,
    pub fc2_units: usize,
    pub hidden_units: usize,
    pub enrichment: Enrichment,
    pub candidate_input: CandidateInput,
}

impl FcgruConfig {
    /// Width of the input seen by the gates.
    pub fn gate_input_width(&self) -> usize {
        match self.enrichment {
            Enrichment::FullyConnected => self.fc2_units,
            Enrichment::Identity => self.input_channels,
        }
    }

    fn candidate_input_width(&self) -> usize {
        match self.candidate_input {
            CandidateInput::Enriched => self.gate_input_width(),
            CandidateInput::Raw => self.input_channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 || self.hidden_units == 0 {
            return Err(Error::input("recurrent cell needs at least one input channel and one hidden unit"));
        }
        if self.enrichment == Enrichment::FullyConnected && (self.fc1_units == 0 || self.fc2_units == 0) {
            return Err(Error::input("enrichment layers need at least one unit each"));
        }
        Ok(())
    }
}

/// Enrichment weights (`W1`, `b1`, `W2`, `b2`).
#[derive(Debug, Clone, PartialEq)]
pub struct EnrichParams {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

/// All weights of one FCGRU cell. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct FcgruParams {
    pub config: FcgruConfig,
    pub enrich: Option<EnrichParams>,
    pub w_zx: Matrix,
    pub w_zh: Matrix,
    pub b_z: Matrix,
    pub w_rx: Matrix,
    pub w_rh: Matrix,
    pub b_r: Matrix,
    pub w_hx: Matrix,
    pub w_hr: Matrix,
    pub b_h: Matrix,
}

/// Inverted dropout applied while training.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut SeededRng,
}

impl Dropout<'_> {
    fn mask(&mut self, rows: usize, cols: usize) -> Matrix {
        let keep = 1.0 - self.rate;
        let data = (0..rows * cols)
            .map(|_| if self.rng.uniform() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        Matrix::from_raw(rows, cols, data)
    }
}

/// Gate activations of a single step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub candidate: Vec<f64>,
    pub h: Vec<f64>,
}

/// Activations recorded by [`FcgruParams::unroll`] for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct FcgruTrace {
    pub x: Option<Matrix>,
    pub fc1: Option<Matrix>,
    pub fc1_mask: Option<Matrix>,
    pub enriched: Option<Matrix>,
    pub enriched_mask: Option<Matrix>,
    pub gate_input: Option<Matrix>,
    pub z: Option<Matrix>,
    pub r: Option<Matrix>,
    pub candidate: Option<Matrix>,
    pub h: Option<Matrix>,
}

fn recorded<'a>(m: &'a Option<Matrix>, what: &str) -> Result<&'a Matrix> {
    m.as_ref()
        .ok_or_else(|| Error::State(format!("backward requires a recorded forward pass ({what} missing)")))
}

impl FcgruParams {
    /// Glorot weights, zero biases.
    pub fn new(config: FcgruConfig, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let c = config.input_channels;
        let d = config.hidden_units;
        let enrich = match config.enrichment {
            Enrichment::FullyConnected => Some(EnrichParams {
                w1: glorot_init(c, config.fc1_units, rng),
                b1: Matrix::zeros(1, config.fc1_units),
                w2: glorot_init(config.fc1_units, config.fc2_units, rng),
                b2: Matrix::zeros(1, config.fc2_units),
            }),
            Enrichment::Identity => None,
        };
        let g = config.gate_input_width();
        let cand = config.candidate_input_width();
        Ok(FcgruParams {
            config,
            enrich,
            w_zx: glorot_init(g, d, rng),
            w_zh: glorot_init(d, d, rng),
            b_z: Matrix::zeros(1, d),
            w_rx: glorot_init(g, d, rng),
            w_rh: glorot_init(d, d, rng),
            b_r: Matrix::zeros(1, d),
            w_hx: glorot_init(cand, d, rng),
            w_hr: glorot_init(d, d, rng),
            b_h: Matrix::zeros(1, d),
        })
    }

    /// Same shapes, every entry zero.
    pub fn zeros_like(&self) -> Self {
        FcgruParams {
            config: self.config,
            enrich: self.enrich.as_ref().map(|e| EnrichParams {
                w1: e.w1.zeros_like(),
                b1: e.b1.zeros_like(),
                w2: e.w2.zeros_like(),
                b2: e.b2.zeros_like(),
            }),
            w_zx: self.w_zx.zeros_like(),
            w_zh: self.w_zh.zeros_like(),
            b_z: self.b_z.zeros_like(),
            w_rx: self.w_rx.zeros_like(),
            w_rh: self.w_rh.zeros_like(),
            b_r: self.b_r.zeros_like(),
            w_hx: self.w_hx.zeros_like(),
            w_hr: self.w_hr.zeros_like(),
            b_h: self.b_h.zeros_like(),
        }
    }

    pub fn hidden_units(&self) -> usize {
        self.config.hidden_units
    }

    fn enrich_rows(&self, x: &Matrix, dropout: Option<&mut Dropout<'_>>) -> Result<EnrichOut> {
        if x.cols() != self.config.input_channels {
            return Err(Error::Shape {
                op: "enrich",
                left: x.shape(),
                right: (x.rows(), self.config.input_channels),
            });
        }
        let Some(e) = &self.enrich else {
            return Ok(EnrichOut {
                fc1: None,
                fc1_mask: None,
                enriched: x.clone(),
            });
        };
        let fc1 = x.matmul(&e.w1)?.add_row(&e.b1)?.map(f64::tanh);
        let (fc1_mask, fc1_used) = match dropout {
            Some(d) => {
                let mask = d.mask(fc1.rows(), fc1.cols());
                let used = fc1.hadamard(&mask)?;
                (Some(mask), used)
            }
            None => (None, fc1.clone()),
        };
        let enriched = fc1_used.matmul(&e.w2)?.add_row(&e.b2)?.map(f64::tanh);
        Ok(EnrichOut {
            fc1: Some(fc1),
            fc1_mask,
            enriched,
        })
    }

    /// Enriches a single timestep row of `C` channels (no dropout).
    pub fn enrich(&self, x_t: &[f64]) -> Result<Vec<f64>> {
        let x = Matrix::new(1, x_t.len(), x_t.to_vec())?;
        Ok(self.enrich_rows(&x, None)?.enriched.into_data())
    }

    fn check_step_shapes(&self, x_gate: &[f64], x_cand: &[f64], h_prev: &[f64]) -> Result<()> {
        let d = self.config.hidden_units;
        if x_gate.len() != self.w_zx.rows() || x_cand.len() != self.w_hx.rows() || h_prev.len() != d {
            return Err(Error::Shape {
                op: "fcgru step",
                left: (x_gate.len(), h_prev.len()),
                right: (self.w_zx.rows(), d),
            });
        }
        Ok(())
    }

    fn cell(&self, x_gate: &[f64], x_cand: &[f64], h_prev: &[f64]) -> StepRecord {
        let d = self.config.hidden_units;
        let mut az = self.b_z.data().to_vec();
        vec_mat_acc(x_gate, &self.w_zx, &mut az);
        vec_mat_acc(h_prev, &self.w_zh, &mut az);
        let mut ar = self.b_r.data().to_vec();
        vec_mat_acc(x_gate, &self.w_rx, &mut ar);
        vec_mat_acc(h_prev, &self.w_rh, &mut ar);
        let z: Vec<f64> = az.into_iter().map(sigmoid).collect();
        let r: Vec<f64> = ar.into_iter().map(sigmoid).collect();
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
        let mut ac = self.b_h.data().to_vec();
        vec_mat_acc(x_cand, &self.w_hx, &mut ac);
        vec_mat_acc(&rh, &self.w_hr, &mut ac);
        let candidate: Vec<f64> = ac.into_iter().map(f64::tanh).collect();
        let h = (0..d)
            .map(|j| z[j] * h_prev[j] + (1.0 - z[j]) * candidate[j])
            .collect();
        StepRecord { z, r, candidate, h }
    }

    /// One gated update from an enriched input row.
    ///
    /// Requires [`CandidateInput::Enriched`]; the literal variant also needs
    /// the raw row, see [`FcgruParams::step_literal`].
    pub fn step(&self, x_enriched: &[f64], h_prev: &[f64]) -> Result<StepRecord> {
        if self.config.candidate_input == CandidateInput::Raw {
            return Err(Error::State("raw-candidate cell needs step_literal".into()));
        }
        self.check_step_shapes(x_enriched, x_enriched, h_prev)?;
        Ok(self.cell(x_enriched, x_enriched, h_prev))
    }

    /// One gated update where the candidate consumes the raw input row.
    pub fn step_literal(&self, x_raw: &[f64], x_enriched: &[f64], h_prev: &[f64]) -> Result<StepRecord> {
        let cand = match self.config.candidate_input {
            CandidateInput::Raw => x_raw,
            CandidateInput::Enriched => x_enriched,
        };
        self.check_step_shapes(x_enriched, cand, h_prev)?;
        Ok(self.cell(x_enriched, cand, h_prev))
    }

    /// Runs the cell over a `T × C` series from `h_0 = 0`.
    ///
    /// Returns the `T × d` hidden-state matrix and the recorded activations.
    /// Dropout masks are sampled per timestep only when `dropout` is given.
    pub fn unroll(&self, series: &Matrix, mut dropout: Option<Dropout<'_>>) -> Result<(Matrix, FcgruTrace)> {
        if series.rows() == 0 {
            return Err(Error::input("cannot unroll an empty series"));
        }
        let t_len = series.rows();
        let d = self.config.hidden_units;
        let enrich = self.enrich_rows(series, dropout.as_mut())?;
        let (enriched_mask, gate_input) = match dropout.as_mut() {
            Some(drop) => {
                let mask = drop.mask(t_len, enrich.enriched.cols());
                let used = enrich.enriched.hadamard(&mask)?;
                (Some(mask), used)
            }
            None => (None, enrich.enriched.clone()),
        };
        let cand_input = match self.config.candidate_input {
            CandidateInput::Enriched => &gate_input,
            CandidateInput::Raw => series,
        };
        self.check_step_shapes(gate_input.row(0), cand_input.row(0), &vec![0.0; d])?;

        let mut z = Matrix::zeros(t_len, d);
        let mut r = Matrix::zeros(t_len, d);
        let mut cand = Matrix::zeros(t_len, d);
        let mut h = Matrix::zeros(t_len, d);
        let mut h_prev = vec![0.0; d];
        for t in 0..t_len {
            let rec = self.cell(gate_input.row(t), cand_input.row(t), &h_prev);
            z.row_mut(t).copy_from_slice(&rec.z);
            r.row_mut(t).copy_from_slice(&rec.r);
            cand.row_mut(t).copy_from_slice(&rec.candidate);
            h.row_mut(t).copy_from_slice(&rec.h);
            h_prev = rec.h;
        }
        let trace = FcgruTrace {
            x: Some(series.clone()),
            fc1: enrich.fc1,
            fc1_mask: enrich.fc1_mask,
            enriched: Some(enrich.enriched),
            enriched_mask,
            gate_input: Some(gate_input),
            z: Some(z),
            r: Some(r),
            candidate: Some(cand),
            h: Some(h.clone()),
        };
        Ok((h, trace))
    }

    /// Backpropagates `d_h` (gradient of the loss w.r.t. every hidden state
    /// row) through a recorded unroll. Returns parameter gradients and the
    /// gradient w.r.t. the input series.
    pub fn backward(&self, trace: &FcgruTrace, d_h: &Matrix) -> Result<(FcgruParams, Matrix)> {
        let x = recorded(&trace.x, "input")?;
        let gate_input = recorded(&trace.gate_input, "gate input")?;
        let enriched = recorded(&trace.enriched, "enriched input")?;
        let z = recorded(&trace.z, "update gate")?;
        let r = recorded(&trace.r, "reset gate")?;
        let cand = recorded(&trace.candidate, "candidate")?;
        let h = recorded(&trace.h, "hidden states")?;
        if d_h.shape() != h.shape() {
            return Err(Error::Shape {
                op: "fcgru backward",
                left: h.shape(),
                right: d_h.shape(),
            });
        }
        let t_len = h.rows();
        let d = self.config.hidden_units;
        let mut g = self.zeros_like();

        let mut daz_all = Matrix::zeros(t_len, d);
        let mut dar_all = Matrix::zeros(t_len, d);
        let mut dac_all = Matrix::zeros(t_len, d);
        let mut d_next = vec![0.0; d];
        let zeros = vec![0.0; d];
        for t in (0..t_len).rev() {
            let h_prev: &[f64] = if t == 0 { &zeros } else { h.row(t - 1) };
            let (zt, rt, ct) = (z.row(t), r.row(t), cand.row(t));
            let dh: Vec<f64> = d_h.row(t).iter().zip(&d_next).map(|(a, b)| a + b).collect();

            let mut dh_prev: Vec<f64> = (0..d).map(|j| dh[j] * zt[j]).collect();
            let dac: Vec<f64> = (0..d)
                .map(|j| dh[j] * (1.0 - zt[j]) * (1.0 - ct[j] * ct[j]))
                .collect();
            let daz: Vec<f64> = (0..d)
                .map(|j| dh[j] * (h_prev[j] - ct[j]) * zt[j] * (1.0 - zt[j]))
                .collect();

            let mut d_rh = vec![0.0; d];
            vec_mat_t_acc(&dac, &self.w_hr, &mut d_rh);
            let rh: Vec<f64> = rt.iter().zip(h_prev).map(|(a, b)| a * b).collect();
            outer_acc(&mut g.w_hr, &rh, &dac);
            let dar: Vec<f64> = (0..d)
                .map(|j| d_rh[j] * h_prev[j] * rt[j] * (1.0 - rt[j]))
                .collect();
            for j in 0..d {
                dh_prev[j] += d_rh[j] * rt[j];
            }
            vec_mat_t_acc(&daz, &self.w_zh, &mut dh_prev);
            vec_mat_t_acc(&dar, &self.w_rh, &mut dh_prev);
            if t > 0 {
                outer_acc(&mut g.w_zh, h_prev, &daz);
                outer_acc(&mut g.w_rh, h_prev, &dar);
            }

            daz_all.row_mut(t).copy_from_slice(&daz);
            dar_all.row_mut(t).copy_from_slice(&dar);
            dac_all.row_mut(t).copy_from_slice(&dac);
            d_next = dh_prev;
        }

        g.w_zx = gate_input.t_matmul(&daz_all)?;
        g.w_rx = gate_input.t_matmul(&dar_all)?;
        g.b_z = daz_all.col_sum();
        g.b_r = dar_all.col_sum();
        g.b_h = dac_all.col_sum();

        let mut d_gate = daz_all.matmul_t(&self.w_zx)?;
        d_gate.add_assign(&dar_all.matmul_t(&self.w_rx)?)?;
        let d_cand = dac_all.matmul_t(&self.w_hx)?;
        let mut d_x = Matrix::zeros(x.rows(), x.cols());
        match self.config.candidate_input {
            CandidateInput::Enriched => {
                g.w_hx = gate_input.t_matmul(&dac_all)?;
                d_gate.add_assign(&d_cand)?;
            }
            CandidateInput::Raw => {
                g.w_hx = x.t_matmul(&dac_all)?;
                d_x.add_assign(&d_cand)?;
            }
        }

        let d_enriched = match &trace.enriched_mask {
            Some(mask) => d_gate.hadamard(mask)?,
            None => d_gate,
        };

        match (&self.enrich, g.enrich.as_mut()) {
            (Some(e), Some(ge)) => {
                let fc1 = recorded(&trace.fc1, "first enrichment layer")?;
                let fc1_used = match &trace.fc1_mask {
                    Some(mask) => fc1.hadamard(mask)?,
                    None => fc1.clone(),
                };
                let d_a2 = d_enriched.hadamard(&enriched.map(|y| 1.0 - y * y))?;
                ge.w2 = fc1_used.t_matmul(&d_a2)?;
                ge.b2 = d_a2.col_sum();
                let mut d_fc1 = d_a2.matmul_t(&e.w2)?;
                if let Some(mask) = &trace.fc1_mask {
                    d_fc1 = d_fc1.hadamard(mask)?;
                }
                let d_a1 = d_fc1.hadamard(&fc1.map(|y| 1.0 - y * y))?;
                ge.w1 = x.t_matmul(&d_a1)?;
                ge.b1 = d_a1.col_sum();
                d_x.add_assign(&d_a1.matmul_t(&e.w1)?)?;
            }
            _ => d_x.add_assign(&d_enriched)?,
        }
        Ok((g, d_x))
    }
}

struct EnrichOut {
    fc1: Option<Matrix>,
    fc1_mask: Option<Matrix>,
    enriched: Matrix,
}

impl Parameters for FcgruParams {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::with_capacity(13);
        if let Some(e) = &self.enrich {
            out.push(("w1".to_string(), &e.w1));
            out.push(("b1".to_string(), &e.b1));
            out.push(("w2".to_string(), &e.w2));
            out.push(("b2".to_string(), &e.b2));
        }
        for (name, m) in [
            ("w_zx", &self.w_zx),
            ("w_zh", &self.w_zh),
            ("b_z", &self.b_z),
            ("w_rx", &self.w_rx),
            ("w_rh", &self.w_rh),
            ("b_r", &self.b_r),
            ("w_hx", &self.w_hx),
            ("w_hr", &self.w_hr),
            ("b_h", &self.b_h),
        ] {
            out.push((name.to_string(), m));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = Vec::with_capacity(13);
        if let Some(e) = &mut self.enrich {
            out.extend([&mut e.w1, &mut e.b1, &mut e.w2, &mut e.b2]);
        }
        out.extend([
            &mut self.w_zx,
            &mut self.w_zh,
            &mut self.b_z,
            &mut self.w_rx,
            &mut self.w_rh,
            &mut self.b_r,
            &mut self.w_hx,
            &mut self.w_hr,
            &mut self.b_h,
        ]);
        out
    }
}
