//! Dense statevector simulation.
//!
//! Amplitudes are stored with qubit 0 as the most significant bit of the
//! basis index, so `|q0 q1 ... q(n-1)>` reads left to right. Callers that
//! want the opposite convention ask for it through [`BitOrder`].

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 12;
/// Largest register for which [`circuit_unitary`] builds a dense matrix.
pub const MAX_UNITARY_QUBITS: usize = 6;

const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("two-qubit gate references qubit {0} twice")]
    DuplicateQubit(usize),
    #[error("gate angle is not finite: {0}")]
    NonFiniteAngle(f64),
    #[error("register size {0} outside the supported range 1..={max}", max = MAX_QUBITS)]
    UnsupportedSize(usize),
    #[error("unitary extraction limited to {max} qubits, got {0}", max = MAX_UNITARY_QUBITS)]
    UnitaryTooLarge(usize),
    #[error("amplitude vector has length {len}, expected a power of two")]
    BadLength { len: usize },
    #[error("state norm {0} differs from 1")]
    NotNormalized(f64),
    #[error("invalid gate record: {0}")]
    BadRecord(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// How basis indices map onto qubits when probabilities leave the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitOrder {
    /// Qubit 0 is the leftmost (most significant) bit.
    #[default]
    Q0Msb,
    /// Qubit 0 is the rightmost (least significant) bit.
    Q0Lsb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Ry,
    Rz,
    H,
    X,
    Cz,
    Cnot,
    Cry,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Ry | GateKind::Rz | GateKind::H | GateKind::X => 1,
            GateKind::Cz | GateKind::Cnot | GateKind::Cry => 2,
        }
    }

    pub fn has_angle(self) -> bool {
        matches!(self, GateKind::Ry | GateKind::Rz | GateKind::Cry)
    }
}

/// A single gate. Angles are radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Ry { qubit: usize, theta: f64 },
    Rz { qubit: usize, theta: f64 },
    H(usize),
    X(usize),
    Cz(usize, usize),
    Cnot { control: usize, target: usize },
    Cry { control: usize, target: usize, theta: f64 },
}

impl Gate {
    pub fn ry(qubit: usize, theta: f64) -> Self {
        Gate::Ry { qubit, theta }
    }

    pub fn rz(qubit: usize, theta: f64) -> Self {
        Gate::Rz { qubit, theta }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    pub fn cry(control: usize, target: usize, theta: f64) -> Self {
        Gate::Cry { control, target, theta }
    }

    pub fn kind(&self) -> GateKind {
        match self {
            Gate::Ry { .. } => GateKind::Ry,
            Gate::Rz { .. } => GateKind::Rz,
            Gate::H(_) => GateKind::H,
            Gate::X(_) => GateKind::X,
            Gate::Cz(..) => GateKind::Cz,
            Gate::Cnot { .. } => GateKind::Cnot,
            Gate::Cry { .. } => GateKind::Cry,
        }
    }

    /// Qubits in declaration order (control first for controlled gates).
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Ry { qubit, .. } | Gate::Rz { qubit, .. } | Gate::H(qubit) | Gate::X(qubit) => {
                vec![qubit]
            }
            Gate::Cz(a, b) => vec![a, b],
            Gate::Cnot { control, target } | Gate::Cry { control, target, .. } => {
                vec![control, target]
            }
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Ry { theta, .. } | Gate::Rz { theta, .. } | Gate::Cry { theta, .. } => {
                Some(theta)
            }
            _ => None,
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        self.kind().arity() == 2
    }

    /// Rewrites every qubit index through `map`.
    pub fn remap(&self, map: impl Fn(usize) -> usize) -> Gate {
        match *self {
            Gate::Ry { qubit, theta } => Gate::Ry { qubit: map(qubit), theta },
            Gate::Rz { qubit, theta } => Gate::Rz { qubit: map(qubit), theta },
            Gate::H(q) => Gate::H(map(q)),
            Gate::X(q) => Gate::X(map(q)),
            Gate::Cz(a, b) => Gate::Cz(map(a), map(b)),
            Gate::Cnot { control, target } => Gate::Cnot { control: map(control), target: map(target) },
            Gate::Cry { control, target, theta } => {
                Gate::Cry { control: map(control), target: map(target), theta }
            }
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let qubits = self.qubits();
        for &q in &qubits {
            if q >= n_qubits {
                return Err(SimError::QubitOutOfRange { index: q, n_qubits });
            }
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(SimError::DuplicateQubit(qubits[0]));
        }
        if let Some(theta) = self.angle() {
            if !theta.is_finite() {
                return Err(SimError::NonFiniteAngle(theta));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::Ry { qubit, theta } => write!(f, "ry({:.4}°) q{qubit}", theta.to_degrees()),
            Gate::Rz { qubit, theta } => write!(f, "rz({:.4}°) q{qubit}", theta.to_degrees()),
            Gate::H(q) => write!(f, "h q{q}"),
            Gate::X(q) => write!(f, "x q{q}"),
            Gate::Cz(a, b) => write!(f, "cz q{a},q{b}"),
            Gate::Cnot { control, target } => write!(f, "cnot q{control},q{target}"),
            Gate::Cry { control, target, theta } => {
                write!(f, "cry({:.4}°) q{control},q{target}", theta.to_degrees())
            }
        }
    }
}

/// Wire form of a gate, degrees at the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_deg: Option<f64>,
}

impl From<&Gate> for GateRecord {
    fn from(g: &Gate) -> Self {
        GateRecord { kind: g.kind(), qubits: g.qubits(), angle_deg: g.angle().map(f64::to_degrees) }
    }
}

impl TryFrom<&GateRecord> for Gate {
    type Error = SimError;

    fn try_from(r: &GateRecord) -> Result<Gate> {
        if r.qubits.len() != r.kind.arity() {
            return Err(SimError::BadRecord(format!(
                "{:?} takes {} qubit(s), got {}",
                r.kind,
                r.kind.arity(),
                r.qubits.len()
            )));
        }
        let theta = match (r.kind.has_angle(), r.angle_deg) {
            (true, Some(d)) => d.to_radians(),
            (true, None) => return Err(SimError::BadRecord(format!("{:?} needs angle_deg", r.kind))),
            (false, Some(_)) => {
                return Err(SimError::BadRecord(format!("{:?} takes no angle", r.kind)))
            }
            (false, None) => 0.0,
        };
        let q = &r.qubits;
        Ok(match r.kind {
            GateKind::Ry => Gate::ry(q[0], theta),
            GateKind::Rz => Gate::rz(q[0], theta),
            GateKind::H => Gate::H(q[0]),
            GateKind::X => Gate::X(q[0]),
            GateKind::Cz => Gate::Cz(q[0], q[1]),
            GateKind::Cnot => Gate::cnot(q[0], q[1]),
            GateKind::Cry => Gate::cry(q[0], q[1], theta),
        })
    }
}

/// Ordered gate list over `n_qubits` logical qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    bit_order: BitOrder,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(SimError::UnsupportedSize(n_qubits));
        }
        Ok(Circuit { n_qubits, gates: Vec::new(), bit_order: BitOrder::default() })
    }

    pub fn from_gates(n_qubits: usize, gates: impl IntoIterator<Item = Gate>) -> Result<Self> {
        let mut c = Circuit::new(n_qubits)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn with_bit_order(mut self, order: BitOrder) -> Self {
        self.bit_order = order;
        self
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(self)
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<&mut Self> {
        for g in gates {
            self.push(g)?;
        }
        Ok(self)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn bit_order(&self) -> BitOrder {
        self.bit_order
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Runs the circuit on `|0...0>`.
    pub fn run(&self) -> Statevector {
        let mut state = Statevector::zero(self.n_qubits).expect("size validated at construction");
        for g in &self.gates {
            state.apply_in_place(g);
        }
        state
    }

    pub fn run_from(&self, initial: &Statevector) -> Result<Statevector> {
        if initial.n_qubits() != self.n_qubits {
            return Err(SimError::UnsupportedSize(initial.n_qubits()));
        }
        let mut state = initial.clone();
        for g in &self.gates {
            state.apply_in_place(g);
        }
        Ok(state)
    }

    /// Born probabilities of the final state, indexed in this circuit's bit order.
    pub fn probabilities(&self) -> Vec<f64> {
        let p = born_probabilities(&self.run());
        reorder(&p, BitOrder::Q0Msb, self.bit_order)
    }

    pub fn to_json_value(&self) -> CircuitRecord {
        CircuitRecord {
            n_qubits: self.n_qubits,
            bit_order: self.bit_order,
            gates: self.gates.iter().map(GateRecord::from).collect(),
        }
    }
}

/// Circuit JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitRecord {
    pub n_qubits: usize,
    #[serde(default)]
    pub bit_order: BitOrder,
    pub gates: Vec<GateRecord>,
}

impl TryFrom<&CircuitRecord> for Circuit {
    type Error = SimError;

    fn try_from(r: &CircuitRecord) -> Result<Circuit> {
        let gates = r.gates.iter().map(Gate::try_from).collect::<Result<Vec<_>>>()?;
        Ok(Circuit::from_gates(r.n_qubits, gates)?.with_bit_order(r.bit_order))
    }
}

impl Serialize for Circuit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Circuit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = CircuitRecord::deserialize(d)?;
        Circuit::try_from(&rec).map_err(serde::de::Error::custom)
    }
}

/// Dense amplitude vector of length `2^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// `|0...0>`
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(SimError::UnsupportedSize(n_qubits));
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(SimError::QubitOutOfRange { index, n_qubits });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Statevector { n_qubits, amplitudes })
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(SimError::BadLength { len });
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(SimError::UnsupportedSize(n_qubits));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(SimError::NotNormalized(norm));
        }
        Ok(Statevector { n_qubits, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Returns the state after `gate`, leaving `self` untouched.
    pub fn apply(&self, gate: &Gate) -> Result<Statevector> {
        gate.validate(self.n_qubits)?;
        let mut out = self.clone();
        out.apply_in_place(gate);
        Ok(out)
    }

    #[inline]
    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    /// Applies a validated gate. Panics on out-of-range qubits.
    pub(crate) fn apply_in_place(&mut self, gate: &Gate) {
        match *gate {
            Gate::Ry { qubit, theta } => {
                let (s, c) = (theta / 2.0).sin_cos();
                let m = [[c, -s], [s, c]].map(|row| row.map(|x| Complex64::new(x, 0.0)));
                self.apply_single(qubit, &m, None);
            }
            Gate::Rz { qubit, theta } => {
                let half = theta / 2.0;
                let d0 = Complex64::from_polar(1.0, -half);
                let d1 = Complex64::from_polar(1.0, half);
                let mask = self.mask(qubit);
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    *a *= if i & mask == 0 { d0 } else { d1 };
                }
            }
            Gate::H(qubit) => {
                let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                self.apply_single(qubit, &[[r, r], [r, -r]], None);
            }
            Gate::X(qubit) => {
                let mask = self.mask(qubit);
                for i in 0..self.amplitudes.len() {
                    if i & mask == 0 {
                        self.amplitudes.swap(i, i | mask);
                    }
                }
            }
            Gate::Cz(a, b) => {
                let m = self.mask(a) | self.mask(b);
                for (i, amp) in self.amplitudes.iter_mut().enumerate() {
                    if i & m == m {
                        *amp = -*amp;
                    }
                }
            }
            Gate::Cnot { control, target } => {
                let cm = self.mask(control);
                let tm = self.mask(target);
                for i in 0..self.amplitudes.len() {
                    if i & cm != 0 && i & tm == 0 {
                        self.amplitudes.swap(i, i | tm);
                    }
                }
            }
            Gate::Cry { control, target, theta } => {
                let (s, c) = (theta / 2.0).sin_cos();
                let m = [[c, -s], [s, c]].map(|row| row.map(|x| Complex64::new(x, 0.0)));
                let cm = self.mask(control);
                self.apply_single(target, &m, Some(cm));
            }
        }
    }

    /// Applies a 2x2 matrix to `qubit` on every amplitude pair, restricted to
    /// indices where `control_mask` bits are set when given.
    fn apply_single(&mut self, qubit: usize, m: &[[Complex64; 2]; 2], control_mask: Option<usize>) {
        let tm = self.mask(qubit);
        let cm = control_mask.unwrap_or(0);
        for i in 0..self.amplitudes.len() {
            if i & tm != 0 || i & cm != cm {
                continue;
            }
            let j = i | tm;
            let (a0, a1) = (self.amplitudes[i], self.amplitudes[j]);
            self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
            self.amplitudes[j] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

pub fn apply_gate(state: &Statevector, gate: &Gate) -> Result<Statevector> {
    state.apply(gate)
}

/// `|<b|psi>|^2` for every basis index, qubit 0 most significant.
pub fn born_probabilities(state: &Statevector) -> Vec<f64> {
    state.amplitudes.iter().map(|a| a.norm_sqr()).collect()
}

fn reverse_bits(mut i: usize, n_bits: usize) -> usize {
    let mut r = 0;
    for _ in 0..n_bits {
        r = (r << 1) | (i & 1);
        i >>= 1;
    }
    r
}

/// Re-indexes a probability (or any per-basis) vector between bit orders.
pub fn reorder<T: Copy>(values: &[T], from: BitOrder, to: BitOrder) -> Vec<T> {
    if from == to {
        return values.to_vec();
    }
    let n = values.len().trailing_zeros() as usize;
    (0..values.len()).map(|i| values[reverse_bits(i, n)]).collect()
}

/// Formats a basis index as a bitstring of width `n_bits`, most significant first.
pub fn bitstring(index: usize, n_bits: usize) -> String {
    (0..n_bits).rev().map(|k| if (index >> k) & 1 == 1 { '1' } else { '0' }).collect()
}

/// Square complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl Matrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        Matrix { dim, data }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "matrix must be square");
        Matrix { dim, data: rows.concat() }
    }

    /// Real-valued convenience constructor.
    pub fn from_real(rows: &[&[f64]]) -> Self {
        let rows: Vec<Vec<Complex64>> =
            rows.iter().map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect()).collect();
        Matrix::from_rows(&rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Matrix { dim: n, data }
    }

    pub fn adjoint(&self) -> Matrix {
        let n = self.dim;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        Matrix { dim: n, data }
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Largest elementwise deviation after removing the best global phase.
    ///
    /// The phase is taken from the overlap `tr(other^dagger self)`, which is the
    /// least-squares optimal unit scalar.
    pub fn max_diff_up_to_phase(&self, other: &Matrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        let overlap: Complex64 =
            self.data.iter().zip(&other.data).map(|(a, b)| b.conj() * a).sum();
        let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { Complex64::new(1.0, 0.0) };
        self.data.iter().zip(&other.data).map(|(a, b)| (a - phase * b).norm()).fold(0.0, f64::max)
    }

    pub fn equals_up_to_phase(&self, other: &Matrix, tol: f64) -> bool {
        self.max_diff_up_to_phase(other) < tol
    }

    /// Deviation of `U^dagger U` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        self.adjoint().mul(self).max_abs_diff(&Matrix::identity(self.dim))
    }
}

/// Product of gate unitaries in application order, qubit 0 most significant.
pub fn circuit_unitary(circuit: &Circuit) -> Result<Matrix> {
    let n = circuit.n_qubits();
    if n > MAX_UNITARY_QUBITS {
        return Err(SimError::UnitaryTooLarge(n));
    }
    let dim = 1usize << n;
    let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
    for col in 0..dim {
        let out = circuit.run_from(&Statevector::basis(n, col)?)?;
        for (row, amp) in out.amplitudes.iter().enumerate() {
            data[row * dim + col] = *amp;
        }
    }
    Ok(Matrix { dim, data })
}

/// Random circuit over the full gate set with angles in `[0, 4pi)`.
pub fn random_circuit<R: Rng + ?Sized>(rng: &mut R, n_qubits: usize, n_gates: usize) -> Circuit {
    let mut c = Circuit::new(n_qubits).expect("register size in range");
    let four_pi = 4.0 * std::f64::consts::PI;
    for _ in 0..n_gates {
        let kind = if n_qubits < 2 { rng.gen_range(0..4) } else { rng.gen_range(0..7) };
        let a = rng.gen_range(0..n_qubits);
        let b = if n_qubits > 1 { (a + rng.gen_range(1..n_qubits)) % n_qubits } else { a };
        let theta = rng.gen_range(0.0..four_pi);
        let g = match kind {
            0 => Gate::ry(a, theta),
            1 => Gate::rz(a, theta),
            2 => Gate::H(a),
            3 => Gate::X(a),
            4 => Gate::Cz(a, b),
            5 => Gate::cnot(a, b),
            _ => Gate::cry(a, b, theta),
        };
        c.push(g).expect("generated gate is valid");
    }
    c
}
