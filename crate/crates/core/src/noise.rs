//! Finite-shot readout, assignment errors, and the CZ phase-error model.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{stream_rng, Execution};
use crate::simkit::{bitstring, Circuit, Gate, SimError};
use crate::transpiler::{CouplingMap, TranspileError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("confusion matrix is {got}x{got}, probability vector needs {want}x{want}")]
    Dimension { got: usize, want: usize },
    #[error("confusion matrix column {col} sums to {sum}, expected 1")]
    NotStochastic { col: usize, sum: f64 },
    #[error("confusion matrix entry ({row}, {col}) = {value} outside [0, 1]")]
    Entry { row: usize, col: usize, value: f64 },
    #[error("confusion matrix must be square with power-of-two size")]
    Shape,
    #[error("readout fidelity {0} outside [0, 1]")]
    Fidelity(f64),
    #[error("shot count must be positive")]
    NoShots,
    #[error("need at least 2 repetitions for a standard deviation, got {0}")]
    Repetitions(usize),
    #[error("symmetric pairs are defined for 2 or 3 qubits, got {0}")]
    PairSize(usize),
    #[error(transparent)]
    Transpile(#[from] TranspileError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

const STOCHASTIC_TOL: f64 = 1e-12;

/// Column-stochastic assignment matrix: column = prepared, row = read out.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    n_qubits: usize,
    /// Row-major, `dim x dim`.
    matrix: Vec<f64>,
}

impl ConfusionMatrix {
    pub fn identity(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = 1.0;
        }
        ConfusionMatrix { n_qubits, matrix }
    }

    /// Full matrix from rows, validated.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NoiseError> {
        let dim = rows.len();
        if dim < 2 || !dim.is_power_of_two() || rows.iter().any(|r| r.len() != dim) {
            return Err(NoiseError::Shape);
        }
        let cm = ConfusionMatrix { n_qubits: dim.trailing_zeros() as usize, matrix: rows.concat() };
        cm.validate()?;
        Ok(cm)
    }

    /// Tensor product of per-qubit 2x2 matrices; `factors[0]` acts on the
    /// most significant bit of the probability index.
    pub fn from_factors(factors: &[[[f64; 2]; 2]]) -> Result<Self, NoiseError> {
        let mut dim = 1usize;
        let mut m = vec![1.0];
        for f in factors {
            let nd = dim * 2;
            let mut next = vec![0.0; nd * nd];
            for i in 0..dim {
                for j in 0..dim {
                    for a in 0..2 {
                        for b in 0..2 {
                            next[(i * 2 + a) * nd + (j * 2 + b)] = m[i * dim + j] * f[a][b];
                        }
                    }
                }
            }
            m = next;
            dim = nd;
        }
        if factors.is_empty() {
            return Err(NoiseError::Shape);
        }
        let cm = ConfusionMatrix { n_qubits: factors.len(), matrix: m };
        cm.validate()?;
        Ok(cm)
    }

    /// Symmetric per-qubit readout with `P(read b | prepared b) = fidelity`.
    pub fn uniform_fidelity(n_qubits: usize, fidelity: f64) -> Result<Self, NoiseError> {
        if !(0.0..=1.0).contains(&fidelity) {
            return Err(NoiseError::Fidelity(fidelity));
        }
        let e = 1.0 - fidelity;
        Self::from_factors(&vec![[[fidelity, e], [e, fidelity]]; n_qubits])
    }

    fn validate(&self) -> Result<(), NoiseError> {
        let dim = self.dim();
        for col in 0..dim {
            let mut sum = 0.0;
            for row in 0..dim {
                let v = self.matrix[row * dim + col];
                if !(0.0..=1.0).contains(&v) {
                    return Err(NoiseError::Entry { row, col, value: v });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(NoiseError::NotStochastic { col, sum });
            }
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.dim() + col]
    }

    /// `M p`.
    pub fn apply(&self, probs: &[f64]) -> Result<Vec<f64>, NoiseError> {
        let dim = self.dim();
        if probs.len() != dim {
            return Err(NoiseError::Dimension { got: dim, want: probs.len() });
        }
        Ok((0..dim)
            .map(|row| (0..dim).map(|col| self.matrix[row * dim + col] * probs[col]).sum())
            .collect())
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix.chunks(self.dim()).map(|r| r.to_vec()).collect()
    }
}

pub fn apply_confusion(probs: &[f64], cm: &ConfusionMatrix) -> Result<Vec<f64>, NoiseError> {
    cm.apply(probs)
}

/// Confusion matrix JSON: either a full matrix or per-qubit factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReadoutSpec {
    Full { matrix: Vec<Vec<f64>> },
    Factors { factors: Vec<[[f64; 2]; 2]> },
    Uniform { fidelity: f64 },
}

impl ReadoutSpec {
    pub fn build(&self, n_qubits: usize) -> Result<ConfusionMatrix, NoiseError> {
        let cm = match self {
            ReadoutSpec::Full { matrix } => ConfusionMatrix::from_rows(matrix)?,
            ReadoutSpec::Factors { factors } => ConfusionMatrix::from_factors(factors)?,
            ReadoutSpec::Uniform { fidelity } => ConfusionMatrix::uniform_fidelity(n_qubits, *fidelity)?,
        };
        if cm.n_qubits() != n_qubits {
            return Err(NoiseError::Dimension { got: cm.dim(), want: 1 << n_qubits });
        }
        Ok(cm)
    }
}

/// Noise configuration JSON.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseConfig {
    #[serde(default)]
    pub readout: Option<ReadoutSpec>,
    /// Inject the coupling map's CZ phase errors before simulating.
    #[serde(default)]
    pub cz_phase: bool,
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub repetitions: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

/// Shot histogram keyed by bitstring (most significant bit first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotCounts {
    pub n_shots: u64,
    pub n_bits: usize,
    pub counts: BTreeMap<String, u64>,
}

impl ShotCounts {
    /// Empirical frequencies as a dense vector.
    pub fn frequencies(&self) -> Vec<f64> {
        let mut out = vec![0.0; 1 << self.n_bits];
        for (k, &c) in &self.counts {
            let idx = usize::from_str_radix(k, 2).expect("counts keys are bitstrings");
            out[idx] = c as f64 / self.n_shots as f64;
        }
        out
    }
}

/// Multinomial counts by sequential conditional binomials.
fn multinomial<R: Rng + ?Sized>(probs: &[f64], n_shots: u64, rng: &mut R) -> Vec<u64> {
    let mut remaining = n_shots;
    let mut mass_left = 1.0_f64;
    let mut out = vec![0u64; probs.len()];
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = remaining;
            break;
        }
        let q = if mass_left > 0.0 { (p.max(0.0) / mass_left).clamp(0.0, 1.0) } else { 0.0 };
        let k = if q >= 1.0 {
            remaining
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(remaining, q).expect("q in (0,1)").sample(rng)
        };
        out[i] = k;
        remaining -= k;
        mass_left -= p.max(0.0);
    }
    out
}

pub fn sample_counts<R: Rng + ?Sized>(probs: &[f64], n_shots: u64, rng: &mut R) -> ShotCounts {
    let n_bits = probs.len().trailing_zeros() as usize;
    let raw = multinomial(probs, n_shots, rng);
    let counts = raw
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .map(|(i, c)| (bitstring(i, n_bits), c))
        .collect();
    ShotCounts { n_shots, n_bits, counts }
}

/// Seeded multinomial draw of `n_shots` outcomes.
pub fn sample_shots(probs: &[f64], n_shots: u64, seed: u64) -> Result<ShotCounts, NoiseError> {
    if n_shots == 0 {
        return Err(NoiseError::NoShots);
    }
    Ok(sample_counts(probs, n_shots, &mut stream_rng(seed, 0)))
}

/// Shot frequencies as a dense vector.
pub fn sample_frequencies<R: Rng + ?Sized>(probs: &[f64], n_shots: u64, rng: &mut R) -> Vec<f64> {
    multinomial(probs, n_shots, rng).into_iter().map(|c| c as f64 / n_shots as f64).collect()
}

/// Appends `RZ(phase_error)` on the tuned qubit after every CZ.
///
/// Circuit qubit `i` is the coupling map's qubit `i`.
pub fn inject_cz_phase(circuit: &Circuit, map: &CouplingMap) -> Result<Circuit, NoiseError> {
    let mut out = Circuit::new(circuit.n_qubits())?.with_bit_order(circuit.bit_order());
    for g in circuit.gates() {
        out.push(*g)?;
        if let Gate::Cz(a, b) = *g {
            let edge = map.edge(a, b).ok_or(TranspileError::NotAnEdge(a, b))?;
            if edge.phase_error != 0.0 {
                out.push(Gate::rz(edge.tuned, edge.phase_error))?;
            }
        }
    }
    Ok(out)
}

/// Mean and sample standard deviation of one symmetric-pair difference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairStat {
    pub pair: (String, String),
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpamReport {
    pub repetitions: usize,
    pub shots_per_rep: Option<u64>,
    pub seed: u64,
    pub pairs: Vec<PairStat>,
}

/// Index pairs `(b, complement(b))` in the lower half of the register.
pub fn symmetric_pairs(n_qubits: usize) -> Result<Vec<(usize, usize)>, NoiseError> {
    if n_qubits != 2 && n_qubits != 3 {
        return Err(NoiseError::PairSize(n_qubits));
    }
    let dim = 1usize << n_qubits;
    Ok((0..dim / 2).map(|b| (b, dim - 1 - b)).collect())
}

/// Readout settings applied per repetition.
#[derive(Debug, Clone, Default)]
pub struct SpamNoise {
    pub readout: Option<ConfusionMatrix>,
    pub cz_phase: Option<CouplingMap>,
}

/// Repeats a shot experiment and reports mean +- std of `P(b) - P(~b)`.
///
/// Probabilities are taken in the register order `|q0 ... q(n-1)>`.
/// `shots_per_rep = None` uses exact probabilities for every repetition.
pub fn spam_statistics(
    circuit: &Circuit,
    noise: &SpamNoise,
    n_repetitions: usize,
    shots_per_rep: Option<u64>,
    seed: u64,
    exec: Execution,
) -> Result<SpamReport, NoiseError> {
    if n_repetitions < 2 {
        return Err(NoiseError::Repetitions(n_repetitions));
    }
    if shots_per_rep == Some(0) {
        return Err(NoiseError::NoShots);
    }
    let n = circuit.n_qubits();
    let pairs = symmetric_pairs(n)?;
    let circuit = match &noise.cz_phase {
        Some(map) => inject_cz_phase(circuit, map)?,
        None => circuit.clone(),
    };
    let mut probs = crate::simkit::born_probabilities(&circuit.run());
    if let Some(cm) = &noise.readout {
        probs = cm.apply(&probs)?;
    }
    let deltas: Vec<Vec<f64>> = exec.map_range(n_repetitions, |rep| {
        let p = match shots_per_rep {
            Some(shots) => sample_frequencies(&probs, shots, &mut stream_rng(seed, rep as u64)),
            None => probs.clone(),
        };
        pairs.iter().map(|&(a, b)| p[a] - p[b]).collect()
    });
    let reps = n_repetitions as f64;
    let stats = pairs
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let mean = deltas.iter().map(|d| d[k]).sum::<f64>() / reps;
            let var = deltas.iter().map(|d| (d[k] - mean).powi(2)).sum::<f64>() / (reps - 1.0);
            PairStat { pair: (bitstring(a, n), bitstring(b, n)), mean, std: var.sqrt() }
        })
        .collect();
    Ok(SpamReport { repetitions: n_repetitions, shots_per_rep, seed, pairs: stats })
}

/// Hardware-measured mean asymmetries at `(90, 191)` on the two-qubit loader,
/// kept for reference; the simulator models shot noise only.
pub const HARDWARE_DELTA_P_2Q: [f64; 2] = [0.02, 0.06];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{build_two_qubit_loader, GaussianLoaderParams};
    use crate::transpiler::CouplingMap;

    #[test]
    fn identity_channel() {
        let p = vec![0.1, 0.2, 0.3, 0.4];
        assert_eq!(ConfusionMatrix::identity(2).apply(&p).unwrap(), p);
    }

    #[test]
    fn per_qubit_readout_on_zero_state() {
        let cm = ConfusionMatrix::uniform_fidelity(2, 0.95).unwrap();
        let out = cm.apply(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        for (got, want) in out.iter().zip([0.9025, 0.0475, 0.0475, 0.0025]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_channel_keeps_uniform() {
        let cm = ConfusionMatrix::from_factors(&[[[0.9, 0.2], [0.1, 0.8]], [[0.97, 0.03], [0.03, 0.97]]])
            .unwrap();
        // not symmetric: uniform is not fixed
        let skewed = cm.apply(&[0.25; 4]).unwrap();
        assert!((skewed[0] - 0.25).abs() > 1e-3);
        let sym = ConfusionMatrix::uniform_fidelity(3, 0.9).unwrap();
        let out = sym.apply(&[0.125; 8]).unwrap();
        assert!(out.iter().all(|p| (p - 0.125).abs() < 1e-15));
    }

    #[test]
    fn confusion_validation() {
        assert!(matches!(
            ConfusionMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.9]]),
            Err(NoiseError::NotStochastic { .. })
        ));
        assert!(matches!(
            ConfusionMatrix::from_rows(&[vec![1.2, 0.0], vec![-0.2, 1.0]]),
            Err(NoiseError::Entry { .. })
        ));
        assert!(matches!(ConfusionMatrix::from_rows(&[vec![1.0]]), Err(NoiseError::Shape)));
        let cm = ConfusionMatrix::identity(2);
        assert!(matches!(cm.apply(&[1.0, 0.0]), Err(NoiseError::Dimension { .. })));
        assert!(ConfusionMatrix::uniform_fidelity(1, 1.5).is_err());
    }

    #[test]
    fn readout_spec_json() {
        let r: ReadoutSpec = serde_json::from_str(r#"{"fidelity":0.95}"#).unwrap();
        assert_eq!(r.build(2).unwrap(), ConfusionMatrix::uniform_fidelity(2, 0.95).unwrap());
        let r: ReadoutSpec =
            serde_json::from_str(r#"{"factors":[[[0.9,0.1],[0.1,0.9]]]}"#).unwrap();
        assert!(r.build(2).is_err());
        assert_eq!(r.build(1).unwrap().get(0, 0), 0.9);
        let r: ReadoutSpec = serde_json::from_str(r#"{"matrix":[[1,0],[0,1]]}"#).unwrap();
        assert_eq!(r.build(1).unwrap(), ConfusionMatrix::identity(1));
    }

    #[test]
    fn delta_distribution_sampling() {
        let c = sample_shots(&[0.0, 0.0, 1.0, 0.0], 1000, 3).unwrap();
        assert_eq!(c.counts.len(), 1);
        assert_eq!(c.counts["10"], 1000);
        assert!(sample_shots(&[1.0, 0.0], 0, 1).is_err());
    }

    #[test]
    fn uniform_sampling_within_five_sigma() {
        let sigma = (4096.0_f64 * 0.25 * 0.75).sqrt();
        for seed in 0..20 {
            let c = sample_shots(&[0.25; 4], 4096, seed).unwrap();
            assert_eq!(c.counts.values().sum::<u64>(), 4096);
            for v in c.counts.values() {
                assert!((*v as f64 - 1024.0).abs() < 5.0 * sigma);
            }
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let p = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(sample_shots(&p, 999, 42).unwrap(), sample_shots(&p, 999, 42).unwrap());
        assert_ne!(sample_shots(&p, 999, 42).unwrap(), sample_shots(&p, 999, 43).unwrap());
    }

    #[test]
    fn frequencies_round_trip() {
        let c = sample_shots(&[0.5, 0.5], 10, 1).unwrap();
        let f = c.frequencies();
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn injection_noop_for_zero_phase() {
        let map = CouplingMap::linear(&["a", "b"], 0.0).unwrap();
        let c = Circuit::from_gates(2, [Gate::H(1), Gate::Cz(0, 1), Gate::H(1)]).unwrap();
        assert_eq!(inject_cz_phase(&c, &map).unwrap(), c);
    }

    #[test]
    fn injection_on_preset_edge() {
        let map = CouplingMap::contralto_3q();
        let c = Circuit::from_gates(3, [Gate::Cz(0, 1)]).unwrap();
        let out = inject_cz_phase(&c, &map).unwrap();
        assert_eq!(out.gates()[1], Gate::rz(1, 135f64.to_radians()));
        let bad = Circuit::from_gates(3, [Gate::Cz(1, 2)]).unwrap();
        assert!(inject_cz_phase(&bad, &map).is_err());
    }

    #[test]
    fn symmetric_pair_indices() {
        assert_eq!(symmetric_pairs(2).unwrap(), vec![(0, 3), (1, 2)]);
        assert_eq!(symmetric_pairs(3).unwrap(), vec![(0, 7), (1, 6), (2, 5), (3, 4)]);
        assert!(symmetric_pairs(4).is_err());
    }

    #[test]
    fn exact_spam_means_vanish() {
        let c = build_two_qubit_loader(&GaussianLoaderParams::from_degrees(&[90.0, 191.0]).unwrap())
            .unwrap();
        let r = spam_statistics(&c, &SpamNoise::default(), 5, None, 0, Execution::Sequential).unwrap();
        for p in &r.pairs {
            assert!(p.mean.abs() < 1e-12 && p.std < 1e-12);
        }
        assert_eq!(r.pairs[0].pair, ("00".to_string(), "11".to_string()));
        assert!(spam_statistics(&c, &SpamNoise::default(), 1, None, 0, Execution::Sequential).is_err());
    }
}
