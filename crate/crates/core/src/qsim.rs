//! Exact statevector simulation of the QAOA-ansatz decoding circuit.
//!
//! The circuit acts on `K` qubits (one per info bit). Each layer applies the
//! diagonal cost operator `exp(i γ_d H_C)` — the cost Hamiltonian is a
//! weighted sum of Pauli-Z strings, one per codeword bit, with coefficient
//! `-l_j` and support taken from the generator row — followed by `RX(2 β_d)`
//! on every qubit. The initial state is the uniform superposition.
//!
//! Because `H_C` is diagonal, each Z-string term multiplies amplitude `b` by
//! `exp(±i γ c_j)` according to the parity of `b` on the term's support; no
//! gate decomposition is performed. Expectations are computed exactly from
//! the amplitudes. Gradients are adjoint-mode: one forward pass, then a
//! backward sweep that un-applies layers while accumulating
//! `2 Im ⟨λ| G |ψ⟩` terms, exact to machine precision.

use num_complex::Complex64;
use rand::Rng;

use crate::codes::LinearCode;
use crate::{Error, Result};

/// Hard cap on register width: a statevector is 2^K amplitudes.
pub const MAX_QUBITS: usize = 24;

// ---------------------------------------------------------------------------
// Statevector
// ---------------------------------------------------------------------------

/// A K-qubit register, stored as split real / imaginary arrays of the 2^K
/// amplitudes. Qubit `i` is bit `i` of the basis index.
#[derive(Debug, Clone)]
pub struct Statevector {
    re: Vec<f64>,
    im: Vec<f64>,
    k: usize,
}

impl Statevector {
    /// The uniform superposition `|+>^K` (a Hadamard on every qubit of the
    /// all-zeros register).
    pub fn plus_state(k: usize) -> Result<Self> {
        check_qubits(k)?;
        let len = 1usize << k;
        let amp = 1.0 / (len as f64).sqrt();
        Ok(Statevector { re: vec![amp; len], im: vec![0.0; len], k })
    }

    /// The computational basis state `|index>`.
    pub fn basis_state(k: usize, index: usize) -> Result<Self> {
        check_qubits(k)?;
        let len = 1usize << k;
        if index >= len {
            return Err(Error::InvalidArgument(format!("basis index {index} out of range")));
        }
        let mut re = vec![0.0; len];
        re[index] = 1.0;
        Ok(Statevector { re, im: vec![0.0; len], k })
    }

    /// Build from explicit amplitudes; the norm must already be 1 within 1e-10.
    pub fn from_amplitudes(k: usize, amps: &[Complex64]) -> Result<Self> {
        check_qubits(k)?;
        if amps.len() != 1 << k {
            return Err(Error::InvalidArgument(format!(
                "expected {} amplitudes, got {}",
                1 << k,
                amps.len()
            )));
        }
        let sv = Statevector {
            re: amps.iter().map(|a| a.re).collect(),
            im: amps.iter().map(|a| a.im).collect(),
            k,
        };
        if (sv.norm_sqr() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "state is not normalized: |psi|^2 = {}",
                sv.norm_sqr()
            )));
        }
        Ok(sv)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn amplitude(&self, b: usize) -> Complex64 {
        Complex64::new(self.re[b], self.im[b])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.re.iter().zip(&self.im).map(|(r, i)| r * r + i * i).sum()
    }

    /// Basis-state probabilities |amp|^2.
    pub fn probabilities(&self) -> Vec<f64> {
        self.re.iter().zip(&self.im).map(|(r, i)| r * r + i * i).collect()
    }
}

fn check_qubits(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidDimension("qubit count must be positive".into()));
    }
    if k > MAX_QUBITS {
        return Err(Error::UnsupportedSize(format!("{k} qubits exceeds the {MAX_QUBITS} cap")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Cost Hamiltonian and circuit parameters
// ---------------------------------------------------------------------------

/// One weighted Pauli-Z string: `coeff * Z_{i1} Z_{i2} ...` with the support
/// given as a bit mask over qubits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTerm {
    pub coeff: f64,
    pub support: u64,
}

/// The diagonal cost operator: a sum of weighted Z strings.
#[derive(Debug, Clone, PartialEq)]
pub struct CostHamiltonian {
    terms: Vec<CostTerm>,
    k: usize,
}

impl CostHamiltonian {
    /// Build the decoding cost operator from a code and a channel estimate:
    /// one term per codeword bit `j`, coefficient `-l_j`, support equal to
    /// generator row `j`.
    pub fn build(code: &LinearCode, l: &[f64]) -> Result<Self> {
        if l.len() != code.n() {
            return Err(Error::InvalidArgument(format!(
                "estimate length {} != n = {}",
                l.len(),
                code.n()
            )));
        }
        check_qubits(code.k())?;
        let mut terms = Vec::with_capacity(code.n());
        for (j, &g) in code.g_rows().iter().enumerate() {
            if g == 0 {
                return Err(Error::InvalidCode(format!(
                    "generator row {j} is empty: codeword bit {j} depends on no qubit"
                )));
            }
            terms.push(CostTerm { coeff: -l[j], support: g });
        }
        Ok(CostHamiltonian { terms, k: code.k() })
    }

    /// Assemble from explicit terms (mostly for tests and tooling).
    pub fn from_terms(k: usize, terms: Vec<CostTerm>) -> Result<Self> {
        check_qubits(k)?;
        let kmask = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
        for (j, t) in terms.iter().enumerate() {
            if t.support == 0 {
                return Err(Error::InvalidCode(format!("term {j} has empty support")));
            }
            if t.support & !kmask != 0 {
                return Err(Error::InvalidArgument(format!("term {j} addresses qubits >= {k}")));
            }
        }
        Ok(CostHamiltonian { terms, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn terms(&self) -> &[CostTerm] {
        &self.terms
    }

    /// The 2^K diagonal entries `E_b = sum_j c_j (-1)^{parity(b & support_j)}`.
    pub fn diagonal_energies(&self) -> Vec<f64> {
        let len = 1usize << self.k;
        let mut e = vec![0.0; len];
        for t in &self.terms {
            for (b, slot) in e.iter_mut().enumerate() {
                *slot += t.coeff * parity_sign(b as u64, t.support);
            }
        }
        e
    }
}

#[inline]
fn parity_sign(b: u64, support: u64) -> f64 {
    1.0 - 2.0 * ((b & support).count_ones() & 1) as f64
}

/// Rotation angles for a depth-D circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct QaoaParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl QaoaParams {
    pub fn new(gamma: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() || gamma.len() != beta.len() {
            return Err(Error::InvalidArgument(format!(
                "need equal, nonzero angle counts; got {} gammas and {} betas",
                gamma.len(),
                beta.len()
            )));
        }
        Ok(QaoaParams { gamma, beta })
    }

    /// Constant-filled parameters, the episode starting point.
    pub fn constant(depth: usize, value: f64) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidArgument("depth must be positive".into()));
        }
        Ok(QaoaParams { gamma: vec![value; depth], beta: vec![value; depth] })
    }

    pub fn depth(&self) -> usize {
        self.gamma.len()
    }
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Multiply amplitudes by `exp(i * angle * sign_b)` where `sign_b` is the
/// support parity of each basis state.
fn cost_term_layer(re: &mut [f64], im: &mut [f64], angle: f64, support: u64) {
    let (s, c) = angle.sin_cos();
    for b in 0..re.len() {
        let si = s * parity_sign(b as u64, support);
        let (r, i) = (re[b], im[b]);
        re[b] = r * c - i * si;
        im[b] = i * c + r * si;
    }
}

/// Apply `RX(2*beta)` to one qubit: the 2x2 block
/// `[[cos b, -i sin b], [-i sin b, cos b]]` on every amplitude pair.
fn rx_layer(re: &mut [f64], im: &mut [f64], qubit: usize, beta: f64) {
    let (s, c) = beta.sin_cos();
    let stride = 1usize << qubit;
    if qubit == 0 {
        for i0 in (0..re.len()).step_by(2) {
            let i1 = i0 + 1;
            let (r0, m0) = (re[i0], im[i0]);
            let (r1, m1) = (re[i1], im[i1]);
            re[i0] = c * r0 + s * m1;
            im[i0] = c * m0 - s * r1;
            re[i1] = c * r1 + s * m0;
            im[i1] = c * m1 - s * r0;
        }
        return;
    }
    let mut base = 0;
    while base < re.len() {
        let (re_lo, re_hi) = re[base..base + 2 * stride].split_at_mut(stride);
        let (im_lo, im_hi) = im[base..base + 2 * stride].split_at_mut(stride);
        for i in 0..stride {
            let (r0, m0) = (re_lo[i], im_lo[i]);
            let (r1, m1) = (re_hi[i], im_hi[i]);
            re_lo[i] = c * r0 + s * m1;
            im_lo[i] = c * m0 - s * r1;
            re_hi[i] = c * r1 + s * m0;
            im_hi[i] = c * m1 - s * r0;
        }
        base += 2 * stride;
    }
}

// ---------------------------------------------------------------------------
// Compiled circuit
// ---------------------------------------------------------------------------

/// A cost Hamiltonian compiled for repeated application: the full diagonal
/// `E_b` is tabulated once, so a cost layer is a single phase-multiply pass
/// `amp_b *= exp(i gamma E_b)` instead of one pass per term.
#[derive(Debug, Clone)]
pub struct CompiledCircuit {
    k: usize,
    energies: Vec<f64>,
}

/// Branch-free sin/cos pair for the phase kernels: Cody-Waite reduction by
/// multiples of pi, then odd/even Taylor polynomials on [-pi/2, pi/2]. Keeps
/// the inner loops vectorizable where libm calls would not be; absolute error
/// is below 1e-13 (checked against the standard library in the tests).
#[inline(always)]
fn fast_sincos(x: f64) -> (f64, f64) {
    const PI_HI: f64 = 3.141592653589793116;
    const PI_MID: f64 = 1.2246467991473531772e-16;
    const PI_LO: f64 = -2.9947698097183396659e-33;
    // round to nearest by shifting into the 2^52 mantissa window; the low
    // mantissa bit of the shifted value is the integer's parity
    const MAGIC: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    let shifted = x * std::f64::consts::FRAC_1_PI + MAGIC;
    let sign = 1.0 - 2.0 * ((shifted.to_bits() & 1) as f64);
    let q = shifted - MAGIC;
    let r = ((x - q * PI_HI) - q * PI_MID) - q * PI_LO;
    let r2 = r * r;
    let s = r * (1.0
        + r2 * (-1.0 / 6.0
            + r2 * (1.0 / 120.0
                + r2 * (-1.0 / 5040.0
                    + r2 * (1.0 / 362_880.0
                        + r2 * (-1.0 / 39_916_800.0
                            + r2 * (1.0 / 6_227_020_800.0
                                + r2 * (-1.0 / 1_307_674_368_000.0
                                    + r2 * (1.0 / 355_687_428_096_000.0)))))))));
    let c = 1.0
        + r2 * (-0.5
            + r2 * (1.0 / 24.0
                + r2 * (-1.0 / 720.0
                    + r2 * (1.0 / 40_320.0
                        + r2 * (-1.0 / 3_628_800.0
                            + r2 * (1.0 / 479_001_600.0
                                + r2 * (-1.0 / 87_178_291_200.0
                                    + r2 * (1.0 / 20_922_789_888_000.0))))))));
    (sign * s, sign * c)
}

/// Scratch space reused across layers within one call.
struct PhaseScratch {
    sin: Vec<f64>,
    cos: Vec<f64>,
}

impl PhaseScratch {
    fn new(len: usize) -> Self {
        PhaseScratch { sin: vec![0.0; len], cos: vec![0.0; len] }
    }
}

impl CompiledCircuit {
    pub fn new(hc: &CostHamiltonian) -> Self {
        CompiledCircuit { k: hc.k, energies: hc.diagonal_energies() }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Tabulate exp(i gamma E_b) into the scratch buffers.
    fn phase_table(&self, gamma: f64, scratch: &mut PhaseScratch) {
        for ((sc, cc), &e) in scratch.sin.iter_mut().zip(scratch.cos.iter_mut()).zip(&self.energies)
        {
            let (s, c) = fast_sincos(gamma * e);
            *sc = s;
            *cc = c;
        }
    }

    fn apply_phases(re: &mut [f64], im: &mut [f64], scratch: &PhaseScratch) {
        for b in 0..re.len() {
            let (r, m) = (re[b], im[b]);
            let (s, c) = (scratch.sin[b], scratch.cos[b]);
            re[b] = r * c - m * s;
            im[b] = m * c + r * s;
        }
    }

    fn mixer_layer(&self, re: &mut [f64], im: &mut [f64], beta: f64) {
        for q in 0..self.k {
            rx_layer(re, im, q, beta);
        }
    }

    /// Run the full circuit from the uniform superposition.
    pub fn apply(&self, params: &QaoaParams) -> Result<Statevector> {
        let mut sv = Statevector::plus_state(self.k)?;
        let mut scratch = PhaseScratch::new(sv.len());
        for d in 0..params.depth() {
            self.phase_table(params.gamma[d], &mut scratch);
            Self::apply_phases(&mut sv.re, &mut sv.im, &scratch);
            self.mixer_layer(&mut sv.re, &mut sv.im, params.beta[d]);
        }
        Ok(sv)
    }

    /// Per-qubit Z expectations and the cost expectation, in one pass over
    /// the probabilities.
    pub fn expectations(&self, sv: &Statevector) -> (Vec<f64>, f64) {
        let probs = sv.probabilities();
        let z = z_from_probs(&probs, self.k);
        let cost = self.energies.iter().zip(&probs).map(|(e, p)| e * p).sum();
        (z, cost)
    }

    /// Gradient of the mixed observable
    /// `sum_i z_weights[i] * <Z_i> + cost_weight * <H_C>`
    /// with respect to every rotation angle, by the adjoint method.
    pub fn gradient_weighted(
        &self,
        params: &QaoaParams,
        z_weights: &[f64],
        cost_weight: f64,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let psi = self.apply(params)?;
        self.gradient_weighted_from(&psi, params, z_weights, cost_weight)
    }

    /// [`Self::gradient_weighted`] with the already-evolved final state
    /// supplied by the caller, skipping the internal forward pass.
    pub fn gradient_weighted_from(
        &self,
        psi: &Statevector,
        params: &QaoaParams,
        z_weights: &[f64],
        cost_weight: f64,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if z_weights.len() != self.k || psi.k != self.k {
            return Err(Error::InvalidArgument(format!(
                "expected {} z-weights on a {}-qubit state, got {} on {}",
                self.k,
                self.k,
                z_weights.len(),
                psi.k
            )));
        }
        let depth = params.depth();

        // bra starts as O|psi> for the diagonal mixed observable O.
        let len = psi.len();
        let mut obs = vec![0.0; len];
        for b in 0..len {
            obs[b] = cost_weight * self.energies[b];
        }
        for (i, &w) in z_weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let bit = 1usize << i;
            for (b, slot) in obs.iter_mut().enumerate() {
                *slot += if b & bit == 0 { w } else { -w };
            }
        }
        let mut bra = psi.clone();
        for b in 0..len {
            bra.re[b] *= obs[b];
            bra.im[b] *= obs[b];
        }
        let mut ket = psi.clone();

        let mut scratch = PhaseScratch::new(len);
        let mut dgamma = vec![0.0; depth];
        let mut dbeta = vec![0.0; depth];
        for d in (0..depth).rev() {
            // d<O>/dbeta_d = 2 Im <bra| sum_q X_q |ket>
            let mut acc = 0.0;
            for q in 0..self.k {
                let stride = 1usize << q;
                let mut base = 0;
                while base < len {
                    for i0 in base..base + stride {
                        let i1 = i0 + stride;
                        acc += bra.re[i0] * ket.im[i1] - bra.im[i0] * ket.re[i1];
                        acc += bra.re[i1] * ket.im[i0] - bra.im[i1] * ket.re[i0];
                    }
                    base += stride << 1;
                }
            }
            dbeta[d] = 2.0 * acc;

            self.mixer_layer(&mut ket.re, &mut ket.im, -params.beta[d]);
            self.mixer_layer(&mut bra.re, &mut bra.im, -params.beta[d]);

            // d<O>/dgamma_d = -2 Im <bra| H_C |ket>
            let mut acc = 0.0;
            for b in 0..len {
                acc += self.energies[b] * (bra.re[b] * ket.im[b] - bra.im[b] * ket.re[b]);
            }
            dgamma[d] = -2.0 * acc;

            // one phase table serves both adjoint vectors
            self.phase_table(-params.gamma[d], &mut scratch);
            Self::apply_phases(&mut ket.re, &mut ket.im, &scratch);
            Self::apply_phases(&mut bra.re, &mut bra.im, &scratch);
        }
        Ok((dgamma, dbeta))
    }
}

fn z_from_probs(probs: &[f64], k: usize) -> Vec<f64> {
    let mut z = vec![0.0; k];
    for (i, zi) in z.iter_mut().enumerate() {
        let bit = 1usize << i;
        let mut acc = 0.0;
        for (b, &p) in probs.iter().enumerate() {
            acc += if b & bit == 0 { p } else { -p };
        }
        *zi = acc;
    }
    z
}

// ---------------------------------------------------------------------------
// One-shot operations
// ---------------------------------------------------------------------------

/// Evolve the uniform superposition through the depth-D circuit.
pub fn apply_qaoa(hc: &CostHamiltonian, params: &QaoaParams) -> Result<Statevector> {
    let mut sv = Statevector::plus_state(hc.k)?;
    for d in 0..params.depth() {
        for t in &hc.terms {
            cost_term_layer(&mut sv.re, &mut sv.im, params.gamma[d] * t.coeff, t.support);
        }
        for q in 0..hc.k {
            rx_layer(&mut sv.re, &mut sv.im, q, params.beta[d]);
        }
    }
    Ok(sv)
}

/// Exact per-qubit Pauli-Z expectations, each in [-1, +1].
pub fn expect_z(sv: &Statevector) -> Vec<f64> {
    z_from_probs(&sv.probabilities(), sv.k)
}

/// Exact expectation of the cost operator.
pub fn expect_cost(sv: &Statevector, hc: &CostHamiltonian) -> Result<f64> {
    if hc.k != sv.k {
        return Err(Error::InvalidArgument(format!(
            "operator on {} qubits applied to a {}-qubit state",
            hc.k, sv.k
        )));
    }
    let probs = sv.probabilities();
    let mut acc = 0.0;
    for t in &hc.terms {
        let mut term = 0.0;
        for (b, &p) in probs.iter().enumerate() {
            term += p * parity_sign(b as u64, t.support);
        }
        acc += t.coeff * term;
    }
    Ok(acc)
}

/// Shot-noise estimate of the Z expectations: sample `shots` basis states
/// from |amp|^2 and average the per-qubit signs. Robustness experiments only;
/// everything else uses the exact expectations.
pub fn sample_z<R: Rng + ?Sized>(sv: &Statevector, shots: u64, rng: &mut R) -> Result<Vec<f64>> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shot count must be positive".into()));
    }
    let probs = sv.probabilities();
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in &probs {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let mut counts = vec![0i64; sv.k];
    for _ in 0..shots {
        let r: f64 = rng.random_range(0.0..total);
        let b = cdf.partition_point(|&c| c <= r).min(probs.len() - 1);
        for (i, c) in counts.iter_mut().enumerate() {
            *c += if b & (1 << i) == 0 { 1 } else { -1 };
        }
    }
    Ok(counts.iter().map(|&c| c as f64 / shots as f64).collect())
}

/// Full Jacobian of the cost expectation and every Z expectation with respect
/// to every rotation angle.
#[derive(Debug, Clone)]
pub struct QaoaGradients {
    pub cost_gamma: Vec<f64>,
    pub cost_beta: Vec<f64>,
    /// `z_gamma[i][d]` = d<Z_i>/d gamma_d
    pub z_gamma: Vec<Vec<f64>>,
    pub z_beta: Vec<Vec<f64>>,
}

/// Exact analytic gradients via repeated adjoint sweeps (one per observable).
pub fn qaoa_gradients(hc: &CostHamiltonian, params: &QaoaParams) -> Result<QaoaGradients> {
    let circuit = CompiledCircuit::new(hc);
    let (cost_gamma, cost_beta) = circuit.gradient_weighted(params, &vec![0.0; hc.k], 1.0)?;
    let mut z_gamma = Vec::with_capacity(hc.k);
    let mut z_beta = Vec::with_capacity(hc.k);
    for i in 0..hc.k {
        let mut w = vec![0.0; hc.k];
        w[i] = 1.0;
        let (dg, db) = circuit.gradient_weighted(params, &w, 0.0)?;
        z_gamma.push(dg);
        z_beta.push(db);
    }
    Ok(QaoaGradients { cost_gamma, cost_beta, z_gamma, z_beta })
}

// ---------------------------------------------------------------------------
// Gate accounting
// ---------------------------------------------------------------------------

/// Operational gate counts of the depth-D circuit on a given cost operator.
#[derive(Debug, Clone, PartialEq)]
pub struct GateCount {
    /// Multi-qubit Z rotations: one per term per layer.
    pub multi_z_rotations: usize,
    /// Mean support size of the Z rotations.
    pub avg_multi_z_arity: f64,
    /// Single-qubit X rotations: one per qubit per layer.
    pub rx_count: usize,
    /// Hadamards: the initialization layer only.
    pub hadamard_count: usize,
    /// Trainable rotation angles: 2D.
    pub trainable_params: usize,
}

pub fn count_gates(hc: &CostHamiltonian, depth: usize) -> GateCount {
    let arity_sum: usize = hc.terms.iter().map(|t| t.support.count_ones() as usize).sum();
    GateCount {
        multi_z_rotations: depth * hc.terms.len(),
        avg_multi_z_arity: arity_sum as f64 / hc.terms.len() as f64,
        rx_count: depth * hc.k,
        hadamard_count: hc.k,
        trainable_params: 2 * depth,
    }
}
