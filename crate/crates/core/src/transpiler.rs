//! Lowering to the native set `{RY, RZ, H, X, CZ}` under a coupling map.
//!
//! Pipeline: CRY is expanded into RY/CNOT, two-qubit gates are routed with a
//! greedy shortest-path SWAP router, every CNOT becomes
//! `H(t) RZ(counter) CZ H(t)`, and a peephole pass drops `H H` pairs and
//! zero-angle RZ. The router is not SABRE; for the three-qubit registers used
//! here the routing choice is forced anyway.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simkit::{circuit_unitary, born_probabilities, Circuit, Gate, Matrix, SimError, Statevector};

pub const ROUTER_NAME: &str = "greedy-bfs";

const ZERO_ANGLE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TranspileError {
    #[error("unknown qubit name '{0}'")]
    UnknownQubit(String),
    #[error("edge tuned qubit '{0}' is not one of its endpoints")]
    TunedNotEndpoint(String),
    #[error("edge phase error is not finite")]
    NonFinitePhase,
    #[error("qubits {0} and {1} are not coupled")]
    NotAnEdge(usize, usize),
    #[error("no path between physical qubits {0} and {1}")]
    Disconnected(usize, usize),
    #[error("circuit needs {needed} qubits, coupling map has {available}")]
    TooManyQubits { needed: usize, available: usize },
    #[error("initial layout is not an injective map into the coupling map")]
    BadLayout,
    #[error("truth-table check takes a 2-qubit sequence")]
    NotTwoQubit,
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// The flux-tuned (higher-frequency) endpoint.
    pub tuned: usize,
    /// Spurious phase the CZ leaves on the tuned qubit, radians.
    pub phase_error: f64,
}

/// Undirected device connectivity with per-edge CZ phase errors.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMap {
    names: Vec<String>,
    edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub a: String,
    pub b: String,
    pub tuned: String,
    #[serde(default)]
    pub phase_error_deg: f64,
}

/// Coupling map JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMapRecord {
    pub qubits: Vec<String>,
    pub edges: Vec<EdgeRecord>,
}

impl CouplingMap {
    pub fn from_record(r: &CouplingMapRecord) -> Result<Self, TranspileError> {
        let idx = |name: &str| {
            r.qubits
                .iter()
                .position(|q| q == name)
                .ok_or_else(|| TranspileError::UnknownQubit(name.to_string()))
        };
        let mut edges = Vec::with_capacity(r.edges.len());
        for e in &r.edges {
            let (a, b, tuned) = (idx(&e.a)?, idx(&e.b)?, idx(&e.tuned)?);
            if tuned != a && tuned != b {
                return Err(TranspileError::TunedNotEndpoint(e.tuned.clone()));
            }
            if !e.phase_error_deg.is_finite() {
                return Err(TranspileError::NonFinitePhase);
            }
            edges.push(Edge { a, b, tuned, phase_error: e.phase_error_deg.to_radians() });
        }
        Ok(CouplingMap { names: r.qubits.clone(), edges })
    }

    pub fn to_record(&self) -> CouplingMapRecord {
        CouplingMapRecord {
            qubits: self.names.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    a: self.names[e.a].clone(),
                    b: self.names[e.b].clone(),
                    tuned: self.names[e.tuned].clone(),
                    phase_error_deg: e.phase_error.to_degrees(),
                })
                .collect(),
        }
    }

    /// Three-qubit device preset: D3 coupled to A6 and to C4. The CZ leaves
    /// +135 deg on A6 and +90 deg on C4, which the counter-phases -135 / -90
    /// undo.
    pub fn contralto_3q() -> Self {
        let rec = CouplingMapRecord {
            qubits: vec!["D3".into(), "A6".into(), "C4".into()],
            edges: vec![
                EdgeRecord { a: "D3".into(), b: "A6".into(), tuned: "A6".into(), phase_error_deg: 135.0 },
                EdgeRecord { a: "D3".into(), b: "C4".into(), tuned: "C4".into(), phase_error_deg: 90.0 },
            ],
        };
        CouplingMap::from_record(&rec).expect("preset is valid")
    }

    /// Chain `names[0] - names[1] - ...`, tuned qubit the later one of each
    /// pair, all with the same phase error (degrees).
    pub fn linear(names: &[&str], phase_error_deg: f64) -> Result<Self, TranspileError> {
        let rec = CouplingMapRecord {
            qubits: names.iter().map(|s| s.to_string()).collect(),
            edges: names
                .windows(2)
                .map(|w| EdgeRecord {
                    a: w[0].into(),
                    b: w[1].into(),
                    tuned: w[1].into(),
                    phase_error_deg,
                })
                .collect(),
        };
        CouplingMap::from_record(&rec)
    }

    pub fn n_qubits(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn edge(&self, a: usize, b: usize) -> Option<&Edge> {
        self.edges.iter().find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
    }

    pub fn are_coupled(&self, a: usize, b: usize) -> bool {
        self.edge(a, b).is_some()
    }

    fn neighbours(&self, q: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |e| {
            if e.a == q {
                Some(e.b)
            } else if e.b == q {
                Some(e.a)
            } else {
                None
            }
        })
    }

    /// BFS shortest path, both endpoints included. Ties go to the neighbour
    /// listed first in the edge list.
    pub fn shortest_path(&self, from: usize, to: usize) -> Result<Vec<usize>, TranspileError> {
        let n = self.n_qubits();
        let mut prev = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(q) = queue.pop_front() {
            if q == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Ok(path);
            }
            for nb in self.neighbours(q) {
                if !seen[nb] {
                    seen[nb] = true;
                    prev[nb] = q;
                    queue.push_back(nb);
                }
            }
        }
        Err(TranspileError::Disconnected(from, to))
    }

    /// Counter-phase for a CNOT with this control and target: minus the
    /// edge's phase error when the target is the tuned qubit, else zero.
    pub fn default_counter_phase(&self, control: usize, target: usize) -> f64 {
        match self.edge(control, target) {
            Some(e) if e.tuned == target => -e.phase_error,
            _ => 0.0,
        }
    }
}

impl Serialize for CouplingMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CouplingMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = CouplingMapRecord::deserialize(d)?;
        CouplingMap::from_record(&r).map_err(serde::de::Error::custom)
    }
}

/// `H(t) RZ(counter_phase)(t) CZ(c, t) H(t)`.
pub fn decompose_cnot(control: usize, target: usize, counter_phase: f64) -> [Gate; 4] {
    [Gate::H(target), Gate::rz(target, counter_phase), Gate::Cz(control, target), Gate::H(target)]
}

/// `CRY(phi) = RY(phi/2) CNOT RY(-phi/2) CNOT` on the target, CNOTs lowered
/// with the given counter-phase.
pub fn decompose_cry(control: usize, target: usize, angle: f64, counter_phase: f64) -> Vec<Gate> {
    let mut out = vec![Gate::ry(target, angle / 2.0)];
    out.extend(decompose_cnot(control, target, counter_phase));
    out.push(Gate::ry(target, -angle / 2.0));
    out.extend(decompose_cnot(control, target, counter_phase));
    out
}

/// CRY as RY and CNOT, before CNOT lowering.
fn expand_cry(control: usize, target: usize, angle: f64) -> [Gate; 4] {
    [
        Gate::ry(target, angle / 2.0),
        Gate::cnot(control, target),
        Gate::ry(target, -angle / 2.0),
        Gate::cnot(control, target),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TranspileOptions {
    /// Insert each edge's default counter-phase into lowered CNOTs.
    pub counter_phase: bool,
    pub peephole: bool,
}

impl Default for TranspileOptions {
    fn default() -> Self {
        TranspileOptions { counter_phase: true, peephole: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranspileReport {
    pub output: Circuit,
    pub swap_count: usize,
    pub cz_count: usize,
    pub depth: usize,
    /// `initial_layout[logical] = physical`, padded to the map size.
    pub initial_layout: Vec<usize>,
    pub final_layout: Vec<usize>,
    pub router: &'static str,
}

/// Longest chain of gates sharing a qubit.
pub fn circuit_depth(c: &Circuit) -> usize {
    let mut level = vec![0usize; c.n_qubits()];
    for g in c.gates() {
        let qs = g.qubits();
        let d = qs.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
        for q in qs {
            level[q] = d;
        }
    }
    level.into_iter().max().unwrap_or(0)
}

pub fn cz_count(c: &Circuit) -> usize {
    c.gates().iter().filter(|g| matches!(g, Gate::Cz(..))).count()
}

/// Cancels adjacent `H H` on a qubit and drops zero-angle RZ.
pub fn peephole(c: &Circuit) -> Circuit {
    let mut out: Vec<Option<Gate>> = Vec::with_capacity(c.len());
    let mut last: Vec<Vec<usize>> = vec![Vec::new(); c.n_qubits()];
    for g in c.gates() {
        match *g {
            Gate::Rz { theta, .. } if theta.abs() < ZERO_ANGLE_TOL => continue,
            Gate::H(q) => {
                if let Some(&i) = last[q].last() {
                    if out[i] == Some(Gate::H(q)) {
                        out[i] = None;
                        last[q].pop();
                        continue;
                    }
                }
            }
            _ => {}
        }
        let idx = out.len();
        out.push(Some(*g));
        for q in g.qubits() {
            last[q].push(idx);
        }
    }
    Circuit::from_gates(c.n_qubits(), out.into_iter().flatten())
        .expect("gates already validated")
        .with_bit_order(c.bit_order())
}

/// Routes and lowers `circuit` onto `map`.
///
/// `initial_layout[i]` is the physical qubit of logical qubit `i`; `None`
/// means the identity layout. The output circuit's qubit `p` is the map's
/// qubit `p`.
pub fn route(
    circuit: &Circuit,
    map: &CouplingMap,
    initial_layout: Option<&[usize]>,
    options: TranspileOptions,
) -> Result<TranspileReport, TranspileError> {
    let n_phys = map.n_qubits();
    let n_log = circuit.n_qubits();
    if n_log > n_phys {
        return Err(TranspileError::TooManyQubits { needed: n_log, available: n_phys });
    }
    let layout0 = complete_layout(initial_layout, n_log, n_phys)?;
    let mut layout = layout0.clone();

    // Logical-level expansion of CRY.
    let mut logical: Vec<Gate> = Vec::with_capacity(circuit.len());
    for g in circuit.gates() {
        match *g {
            Gate::Cry { control, target, theta } => logical.extend(expand_cry(control, target, theta)),
            other => logical.push(other),
        }
    }

    let mut physical: Vec<Gate> = Vec::new();
    let mut swap_count = 0;
    for g in logical {
        if g.is_two_qubit() {
            let qs = g.qubits();
            let (pa, pb) = (layout[qs[0]], layout[qs[1]]);
            if !map.are_coupled(pa, pb) {
                let path = map.shortest_path(pa, pb)?;
                for w in path[..path.len() - 1].windows(2) {
                    let (x, y) = (w[0], w[1]);
                    physical.extend([Gate::cnot(x, y), Gate::cnot(y, x), Gate::cnot(x, y)]);
                    swap_count += 1;
                    for p in layout.iter_mut() {
                        if *p == x {
                            *p = y;
                        } else if *p == y {
                            *p = x;
                        }
                    }
                }
            }
        }
        physical.push(g.remap(|q| layout[q]));
    }

    let mut lowered = Circuit::new(n_phys)?.with_bit_order(circuit.bit_order());
    for g in physical {
        match g {
            Gate::Cnot { control, target } => {
                let cp = if options.counter_phase { map.default_counter_phase(control, target) } else { 0.0 };
                lowered.extend(decompose_cnot(control, target, cp))?;
            }
            other => {
                lowered.push(other)?;
            }
        }
    }
    let output = if options.peephole { peephole(&lowered) } else { lowered };
    Ok(TranspileReport {
        cz_count: cz_count(&output),
        depth: circuit_depth(&output),
        output,
        swap_count,
        initial_layout: layout0,
        final_layout: layout,
        router: ROUTER_NAME,
    })
}

fn complete_layout(
    initial: Option<&[usize]>,
    n_log: usize,
    n_phys: usize,
) -> Result<Vec<usize>, TranspileError> {
    let given: Vec<usize> = match initial {
        Some(l) => l.to_vec(),
        None => (0..n_log).collect(),
    };
    if given.len() < n_log || given.len() > n_phys {
        return Err(TranspileError::BadLayout);
    }
    let mut used = vec![false; n_phys];
    for &p in &given {
        if p >= n_phys || used[p] {
            return Err(TranspileError::BadLayout);
        }
        used[p] = true;
    }
    let mut layout = given;
    layout.extend((0..n_phys).filter(|&p| !used[p]));
    Ok(layout)
}

/// Permutation matrix sending logical basis states to physical ones under
/// `layout[logical] = physical` (qubit 0 most significant on both sides).
#[allow(clippy::needless_range_loop)]
pub fn layout_permutation(layout: &[usize]) -> Matrix {
    let n = layout.len();
    let dim = 1usize << n;
    let mut rows = vec![vec![num_complex::Complex64::new(0.0, 0.0); dim]; dim];
    for x in 0..dim {
        let mut y = 0usize;
        for (l, &p) in layout.iter().enumerate() {
            if (x >> (n - 1 - l)) & 1 == 1 {
                y |= 1 << (n - 1 - p);
            }
        }
        rows[y][x] = num_complex::Complex64::new(1.0, 0.0);
    }
    Matrix::from_rows(&rows)
}

/// Largest deviation (up to global phase) between the routed output and
/// `P_final U P_initial^-1`, where `U` is the input padded to the map size.
pub fn equivalence_error(input: &Circuit, report: &TranspileReport) -> Result<f64, TranspileError> {
    let n_phys = report.output.n_qubits();
    let mut padded = Circuit::new(n_phys)?;
    padded.extend(input.gates().iter().copied())?;
    let u = circuit_unitary(&padded)?;
    let expected = layout_permutation(&report.final_layout)
        .mul(&u)
        .mul(&layout_permutation(&report.initial_layout).adjoint());
    let got = circuit_unitary(&report.output)?;
    Ok(got.max_diff_up_to_phase(&expected))
}

/// Mean probability of the correct CNOT output over the four basis inputs.
///
/// `sequence` acts on qubits 0 and 1; after every CZ the spurious
/// `RZ(phase_error)` is applied to `tuned`.
pub fn verify_truth_table(
    sequence: &[Gate],
    control: usize,
    target: usize,
    tuned: usize,
    phase_error: f64,
) -> Result<f64, TranspileError> {
    if control > 1 || target > 1 || tuned > 1 || control == target {
        return Err(TranspileError::NotTwoQubit);
    }
    let mut noisy = Circuit::new(2)?;
    for g in sequence {
        noisy.push(*g)?;
        if matches!(g, Gate::Cz(..)) {
            noisy.push(Gate::rz(tuned, phase_error))?;
        }
    }
    let bit = |q: usize| 1usize << (1 - q);
    let mut score = 0.0;
    for c in 0..2usize {
        for t in 0..2usize {
            let input = if c == 1 { bit(control) } else { 0 } | if t == 1 { bit(target) } else { 0 };
            let out_t = t ^ c;
            let expected = if c == 1 { bit(control) } else { 0 } | if out_t == 1 { bit(target) } else { 0 };
            let state = noisy.run_from(&Statevector::basis(2, input)?)?;
            score += born_probabilities(&state)[expected];
        }
    }
    Ok(score / 4.0)
}
