//! Desk-scale simulation of a coded MIMO receiver whose channel decoder is a
//! variational quantum circuit.
//!
//! The receiver is a turbo loop: an orthogonal-AMP linear detector produces a
//! soft symbol estimate, a QAOA-ansatz circuit simulated on an exact
//! statevector decodes it, and the decoder's extrinsic log-likelihood ratios
//! feed back into the detector's nonlinear stage. The circuit's rotation
//! angles are not found by gradient descent at decode time; instead a small
//! stacked LSTM, trained end-to-end through the simulator, emits them in a
//! fixed number of refinement steps.
//!
//! Modules:
//! - [`channel`]: Haar-random linear channels and BPSK transmission.
//! - [`codes`]: binary linear block codes, syndromes, code-file I/O.
//! - [`qsim`]: exact statevector simulation, expectations, analytic gradients.
//! - [`l2l`]: the recurrent angle-emitting network and its trainer.
//! - [`turbo`]: the OAMP turbo loop with the circuit decoder in it.
//! - [`bench`]: exact-ML and classical-LSTM baselines, BER sweeps, config.

pub mod bench;
pub mod channel;
pub mod codes;
pub mod l2l;
pub mod qsim;
pub mod turbo;

mod error;

pub use error::{Error, Result};
