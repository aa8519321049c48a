//! Shallow Gaussian loaders and the GCI circuits built on them.
//!
//! The two-qubit loader is `RY(t0) q0, RY(t1) q1, CNOT(0,1)`; the three-qubit
//! loader adds `RY(t2) q2` and `CNOT(0,2)`. Both have closed-form amplitudes,
//! which are exposed here next to the circuit builders so they can be checked
//! against the simulator.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{stream_rng, Execution};
use crate::finmodel::GciModel;
use crate::noise::{self, ConfusionMatrix};
use crate::simkit::{BitOrder, Circuit, Gate, SimError};

/// Tolerance on angle conditions, radians.
pub const ANGLE_TOL: f64 = 1e-9;
/// Default tolerance for concavity classification of measured probabilities.
pub const CONCAVITY_TOL: f64 = 1e-3;

/// Fixed RZ angles of the hardware-ready GCI circuit, degrees.
pub const GCI_RZ_Q0_PRE_DEG: f64 = -44.40;
pub const GCI_RZ_Q0_POST_DEG: f64 = -125.47;
pub const GCI_RZ_Q2_PRE_DEG: f64 = -125.47;
pub const GCI_RZ_Q2_POST_DEG: f64 = -90.0;
/// Counter-phase on the first (D3 -> A6) CNOT of the hardware-ready circuit.
pub const GCI_COUNTER_PHASE_DEG: f64 = -135.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("expected {expected} loader angles, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("angle {0} is not finite")]
    NonFinite(f64),
    #[error("probability vector must have length 4 or 8, got {0}")]
    ProbLength(usize),
    #[error("the GCI circuit is built for a 2-qubit latent register, model has {0}")]
    UnsupportedRegister(usize),
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("invalid angle range: {0}")]
    BadRange(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Initial register state of a loader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Zeros,
    /// Every qubit flipped with an X before the rotations.
    Ones,
}

/// Loader rotation angles, radians.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLoaderParams {
    thetas: Vec<f64>,
    initial: InitialState,
}

impl GaussianLoaderParams {
    pub fn new(thetas: Vec<f64>) -> Result<Self, CircuitError> {
        if thetas.len() != 2 && thetas.len() != 3 {
            return Err(CircuitError::ParamCount { expected: 2, got: thetas.len() });
        }
        if let Some(&bad) = thetas.iter().find(|t| !t.is_finite()) {
            return Err(CircuitError::NonFinite(bad));
        }
        Ok(GaussianLoaderParams { thetas, initial: InitialState::Zeros })
    }

    pub fn from_degrees(degrees: &[f64]) -> Result<Self, CircuitError> {
        Self::new(degrees.iter().map(|d| d.to_radians()).collect())
    }

    pub fn with_initial_state(mut self, initial: InitialState) -> Self {
        self.initial = initial;
        self
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn n_qubits(&self) -> usize {
        self.thetas.len()
    }

    pub fn initial_state(&self) -> InitialState {
        self.initial
    }
}

fn initial_flips(n: usize, initial: InitialState) -> Vec<Gate> {
    match initial {
        InitialState::Zeros => Vec::new(),
        InitialState::Ones => (0..n).map(Gate::X).collect(),
    }
}

/// `RY(t0) q0, RY(t1) q1, CNOT(0,1)`.
pub fn build_two_qubit_loader(params: &GaussianLoaderParams) -> Result<Circuit, CircuitError> {
    let t = params.thetas();
    if t.len() != 2 {
        return Err(CircuitError::ParamCount { expected: 2, got: t.len() });
    }
    let mut gates = initial_flips(2, params.initial_state());
    gates.extend([Gate::ry(0, t[0]), Gate::ry(1, t[1]), Gate::cnot(0, 1)]);
    Ok(Circuit::from_gates(2, gates)?)
}

/// `RY(t0) q0, RY(t1) q1, RY(t2) q2, CNOT(0,1), CNOT(0,2)`.
pub fn build_three_qubit_loader(params: &GaussianLoaderParams) -> Result<Circuit, CircuitError> {
    let t = params.thetas();
    if t.len() != 3 {
        return Err(CircuitError::ParamCount { expected: 3, got: t.len() });
    }
    let mut gates = initial_flips(3, params.initial_state());
    gates.extend([
        Gate::ry(0, t[0]),
        Gate::ry(1, t[1]),
        Gate::ry(2, t[2]),
        Gate::cnot(0, 1),
        Gate::cnot(0, 2),
    ]);
    Ok(Circuit::from_gates(3, gates)?)
}

/// Dispatches on the parameter count.
pub fn build_loader(params: &GaussianLoaderParams) -> Result<Circuit, CircuitError> {
    match params.n_qubits() {
        2 => build_two_qubit_loader(params),
        _ => build_three_qubit_loader(params),
    }
}

/// Closed-form output amplitudes of the two-qubit loader, `|q0 q1>` order.
pub fn two_qubit_amplitudes_analytic(theta0: f64, theta1: f64) -> [f64; 4] {
    let (s0, c0) = (theta0 / 2.0).sin_cos();
    let (s1, c1) = (theta1 / 2.0).sin_cos();
    [c0 * c1, c0 * s1, s0 * s1, s0 * c1]
}

/// Closed-form output amplitudes of the three-qubit loader with `theta0 = pi/2`.
pub fn three_qubit_amplitudes_analytic(theta1: f64, theta2: f64) -> [f64; 8] {
    let (s1, c1) = (theta1 / 2.0).sin_cos();
    let (s2, c2) = (theta2 / 2.0).sin_cos();
    [c1 * c2, c1 * s2, s1 * c2, s1 * s2, s1 * s2, s1 * c2, c1 * s2, c1 * c2]
        .map(|a| FRAC_1_SQRT_2 * a)
}

/// Closed-form amplitudes of the three-qubit loader for any `theta0`.
///
/// `CNOT(0,1)` and `CNOT(0,2)` together flip both lower bits when `q0 = 1`,
/// which reverses the order of the lower block.
pub fn three_qubit_amplitudes_general(theta0: f64, theta1: f64, theta2: f64) -> [f64; 8] {
    let (s0, c0) = (theta0 / 2.0).sin_cos();
    let (s1, c1) = (theta1 / 2.0).sin_cos();
    let (s2, c2) = (theta2 / 2.0).sin_cos();
    let lower = [c1 * c2, c1 * s2, s1 * c2, s1 * s2];
    let mut out = [0.0; 8];
    for k in 0..4 {
        out[k] = c0 * lower[k];
        out[4 + k] = s0 * lower[3 - k];
    }
    out
}

/// Outcome of the closed-form symmetry and shape conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SymmetryReport {
    pub symmetric: bool,
    pub central_mass: bool,
    /// Only evaluated for three angles.
    pub ring_ordering: Option<bool>,
}

/// Distance from `x` to the nearest multiple of `period`.
fn dist_to_multiple(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    r.min(period - r)
}

/// `x` is an odd multiple of pi/2.
fn is_odd_half_pi(x: f64) -> bool {
    dist_to_multiple(x - FRAC_PI_2, PI) < ANGLE_TOL
}

/// `cos(t/2) < sin(t/2)` with the inequality held strict by `ANGLE_TOL`.
fn half_angle_favours_sine(theta: f64) -> bool {
    let (s, c) = (theta / 2.0).sin_cos();
    s - c > ANGLE_TOL
}

/// Evaluates the loader's angle conditions.
///
/// `symmetric`: both `theta0` and `theta1` are odd multiples of pi/2 and, for
/// three qubits, `theta2 = +-theta1 (mod 2pi)`. `central_mass`:
/// `cos(theta1/2) < sin(theta1/2)`. `ring_ordering`: additionally
/// `cos(theta2/2) < sin(theta2/2)`.
pub fn check_symmetry_conditions(theta0: f64, theta1: f64, theta2: Option<f64>) -> SymmetryReport {
    let mut symmetric = is_odd_half_pi(theta0) && is_odd_half_pi(theta1);
    let central_mass = half_angle_favours_sine(theta1);
    let ring_ordering = theta2.map(|t2| {
        let matches_theta1 = dist_to_multiple(t2 - theta1, 2.0 * PI) < ANGLE_TOL
            || dist_to_multiple(t2 + theta1, 2.0 * PI) < ANGLE_TOL;
        symmetric &= matches_theta1;
        central_mass && half_angle_favours_sine(t2)
    });
    SymmetryReport { symmetric, central_mass, ring_ordering }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConcavityClass {
    GaussianLike,
    Inverted,
    Uniform,
}

impl ConcavityClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ConcavityClass::GaussianLike => "GAUSSIAN_LIKE",
            ConcavityClass::Inverted => "INVERTED",
            ConcavityClass::Uniform => "UNIFORM",
        }
    }
}

/// Shape of a 4- or 8-bin histogram: the outer half of the bins against the
/// inner half.
pub fn classify_concavity(probs: &[f64], tol: f64) -> Result<ConcavityClass, CircuitError> {
    let n = probs.len();
    if n != 4 && n != 8 {
        return Err(CircuitError::ProbLength(n));
    }
    let max = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = probs.iter().cloned().fold(f64::INFINITY, f64::min);
    if max - min < tol {
        return Ok(ConcavityClass::Uniform);
    }
    let q = n / 4;
    let outer: f64 = probs[..q].iter().chain(&probs[n - q..]).sum::<f64>() / (2 * q) as f64;
    let inner: f64 = probs[q..n - q].iter().sum::<f64>() / (n - 2 * q) as f64;
    Ok(if inner - outer > tol {
        ConcavityClass::GaussianLike
    } else if outer - inner > tol {
        ConcavityClass::Inverted
    } else {
        ConcavityClass::Uniform
    })
}

/// Idealized GCI circuit: loader on `(q0, q1)`, asset on `q2`.
///
/// The asset qubit gets `RY(2 beta~)` followed by `CRY(2 alpha~ 2^j)` from
/// latent qubit `j`, so the total rotation is `2(alpha~ z_code + beta~)` with
/// `z_code = q0 + 2 q1`. Probabilities come out in `Q0Lsb` order, which puts
/// the asset bit leftmost in every bitstring.
pub fn build_gci_ideal(model: &GciModel, loader: &GaussianLoaderParams) -> Result<Circuit, CircuitError> {
    if model.n_z() != 2 {
        return Err(CircuitError::UnsupportedRegister(model.n_z()));
    }
    let t = loader.thetas();
    if t.len() != 2 {
        return Err(CircuitError::ParamCount { expected: 2, got: t.len() });
    }
    let mut c = Circuit::new(3)?.with_bit_order(BitOrder::Q0Lsb);
    c.extend(initial_flips(2, loader.initial_state()))?;
    c.extend([Gate::ry(0, t[0]), Gate::ry(1, t[1]), Gate::cnot(0, 1)])?;
    c.push(Gate::ry(2, 2.0 * model.beta_tilde()))?;
    for j in 0..model.n_z() {
        c.push(Gate::cry(j, 2, 2.0 * model.alpha_tilde() * (1u32 << j) as f64))?;
    }
    Ok(c)
}

/// Tunable angles of the hardware-ready GCI circuit, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranspiledGciAngles {
    /// Loader rotation on q0 (D3).
    pub theta0: f64,
    /// Loader rotation on q1 (A6).
    pub theta1: f64,
    /// Asset preparation on q2 (C4).
    pub theta2: f64,
    /// Asset rotation on q2.
    pub theta3: f64,
    /// Rotation on q0 after the entanglers.
    pub theta4: f64,
}

impl TranspiledGciAngles {
    pub fn from_degrees(d: [f64; 5]) -> Self {
        TranspiledGciAngles {
            theta0: d[0].to_radians(),
            theta1: d[1].to_radians(),
            theta2: d[2].to_radians(),
            theta3: d[3].to_radians(),
            theta4: d[4].to_radians(),
        }
    }

    /// The hyper-tuned configuration reported for the hardware run.
    pub fn hardware_optimum() -> Self {
        Self::from_degrees([90.0, 224.0, 90.0, 90.0, 180.0])
    }

    pub fn to_degrees(&self) -> [f64; 5] {
        [self.theta0, self.theta1, self.theta2, self.theta3, self.theta4].map(f64::to_degrees)
    }
}

/// The hardware-ready GCI circuit with both CNOTs in `H, RZ, CZ, H` form.
///
/// Only the first CNOT (q0 -> q1) carries a counter-phase; the second is
/// drawn without one. The four trailing RZ angles are fixed constants.
pub fn build_gci_transpiled(angles: &TranspiledGciAngles) -> Result<Circuit, CircuitError> {
    build_gci_transpiled_with_counter_phase(angles, GCI_COUNTER_PHASE_DEG.to_radians())
}

pub fn build_gci_transpiled_with_counter_phase(
    angles: &TranspiledGciAngles,
    counter_phase: f64,
) -> Result<Circuit, CircuitError> {
    let a = angles;
    for t in [a.theta0, a.theta1, a.theta2, a.theta3, a.theta4, counter_phase] {
        if !t.is_finite() {
            return Err(CircuitError::NonFinite(t));
        }
    }
    let mut c = Circuit::new(3)?.with_bit_order(BitOrder::Q0Lsb);
    c.extend([Gate::ry(0, a.theta0), Gate::ry(1, a.theta1), Gate::ry(2, a.theta2)])?;
    c.extend([Gate::H(1), Gate::rz(1, counter_phase), Gate::Cz(0, 1), Gate::H(1)])?;
    c.extend([Gate::H(2), Gate::Cz(0, 2), Gate::H(2)])?;
    c.extend(gci_tail(a))?;
    Ok(c)
}

/// Single-qubit gates after the entanglers.
pub fn gci_tail(a: &TranspiledGciAngles) -> [Gate; 6] {
    [
        Gate::rz(0, GCI_RZ_Q0_PRE_DEG.to_radians()),
        Gate::ry(0, a.theta4),
        Gate::rz(0, GCI_RZ_Q0_POST_DEG.to_radians()),
        Gate::rz(2, GCI_RZ_Q2_PRE_DEG.to_radians()),
        Gate::ry(2, a.theta3),
        Gate::rz(2, GCI_RZ_Q2_POST_DEG.to_radians()),
    ]
}

/// Inclusive arithmetic grid in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleRange {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
}

impl AngleRange {
    pub fn new(start_deg: f64, stop_deg: f64, step_deg: f64) -> Result<Self, CircuitError> {
        let r = AngleRange { start_deg, stop_deg, step_deg };
        r.validate()?;
        Ok(r)
    }

    pub fn point(deg: f64) -> Self {
        AngleRange { start_deg: deg, stop_deg: deg, step_deg: 1.0 }
    }

    fn validate(&self) -> Result<(), CircuitError> {
        if ![self.start_deg, self.stop_deg, self.step_deg].iter().all(|x| x.is_finite()) {
            return Err(CircuitError::BadRange("non-finite bound".into()));
        }
        if self.step_deg <= 0.0 {
            return Err(CircuitError::BadRange(format!("step {} must be positive", self.step_deg)));
        }
        Ok(())
    }

    /// Grid points `start + k step <= stop` (with 1e-9 slack on the end point).
    pub fn points(&self) -> Vec<f64> {
        if self.validate().is_err() || self.stop_deg < self.start_deg - 1e-9 {
            return Vec::new();
        }
        let n = ((self.stop_deg - self.start_deg) / self.step_deg + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.start_deg + k as f64 * self.step_deg).collect()
    }

    /// Parses `start:stop:step` or a single value.
    pub fn parse(s: &str) -> Result<Self, CircuitError> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| {
            p.trim().parse::<f64>().map_err(|_| CircuitError::BadRange(format!("cannot parse '{p}'")))
        };
        match parts.as_slice() {
            [v] => Ok(AngleRange::point(num(v)?)),
            [a, b, c] => AngleRange::new(num(a)?, num(b)?, num(c)?),
            _ => Err(CircuitError::BadRange(format!("expected start:stop:step, got '{s}'"))),
        }
    }
}

/// Which circuit family a sweep evaluates. Axes are explicit degree values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "ansatz")]
pub enum SweepAnsatz {
    /// Two-qubit loader over `theta0 x theta1`.
    TwoQubit { theta0: Vec<f64>, theta1: Vec<f64> },
    /// Three-qubit loader over `theta0 x theta1 x theta2`.
    ThreeQubit { theta0: Vec<f64>, theta1: Vec<f64>, theta2: Vec<f64> },
    /// Hardware-ready GCI circuit over `theta3 x theta4`; `fixed_deg` holds
    /// `theta0, theta1, theta2`.
    GciTranspiled { fixed_deg: [f64; 3], theta3: Vec<f64>, theta4: Vec<f64> },
}

/// Optional finite-shot readout applied at every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepNoise {
    pub shots: Option<u64>,
    pub readout: Option<ConfusionMatrix>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub ansatz: SweepAnsatz,
    pub noise: Option<SweepNoise>,
    pub concavity_tol: f64,
}

impl SweepSpec {
    pub fn new(ansatz: SweepAnsatz) -> Self {
        SweepSpec { ansatz, noise: None, concavity_tol: CONCAVITY_TOL }
    }

    /// `theta0 = 90`, `theta1` over `[90, 450]` in 21 degree steps.
    pub fn two_qubit_trend() -> Self {
        Self::new(SweepAnsatz::TwoQubit {
            theta0: vec![90.0],
            theta1: AngleRange { start_deg: 90.0, stop_deg: 450.0, step_deg: 21.0 }.points(),
        })
    }

    /// Coarse three-qubit scan, 36 degree steps on both free angles.
    pub fn three_qubit_coarse() -> Self {
        let r = AngleRange { start_deg: 90.0, stop_deg: 450.0, step_deg: 36.0 }.points();
        Self::new(SweepAnsatz::ThreeQubit { theta0: vec![90.0], theta1: r.clone(), theta2: r })
    }

    /// Refined three-qubit scan around the bell-shaped region.
    pub fn three_qubit_fine() -> Self {
        Self::new(SweepAnsatz::ThreeQubit {
            theta0: vec![90.0],
            theta1: AngleRange { start_deg: 100.0, stop_deg: 250.0, step_deg: 7.5 }.points(),
            theta2: AngleRange { start_deg: 90.0, stop_deg: 380.0, step_deg: 14.5 }.points(),
        })
    }

    /// 5 x 5 `theta3 x theta4` hyper-tuning grid on the hardware-ready GCI
    /// circuit, loader at `(90, 224)` and asset preparation at 90.
    pub fn gci_hypertuning() -> Self {
        Self::new(SweepAnsatz::GciTranspiled {
            fixed_deg: [90.0, 224.0, 90.0],
            theta3: vec![0.0, 30.0, 90.0, 180.0, 210.0],
            theta4: vec![30.0, 150.0, 180.0, 210.0, 330.0],
        })
    }

    /// Grid points as angle tuples in degrees, row-major.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        match &self.ansatz {
            SweepAnsatz::TwoQubit { theta0, theta1 } => cartesian(&[theta0, theta1]),
            SweepAnsatz::ThreeQubit { theta0, theta1, theta2 } => cartesian(&[theta0, theta1, theta2]),
            SweepAnsatz::GciTranspiled { theta3, theta4, .. } => cartesian(&[theta3, theta4]),
        }
    }

    pub fn angle_columns(&self) -> Vec<&'static str> {
        match self.ansatz {
            SweepAnsatz::TwoQubit { .. } => vec!["theta0_deg", "theta1_deg"],
            SweepAnsatz::ThreeQubit { .. } => vec!["theta0_deg", "theta1_deg", "theta2_deg"],
            SweepAnsatz::GciTranspiled { .. } => vec!["theta3_deg", "theta4_deg"],
        }
    }

    pub fn n_qubits(&self) -> usize {
        match self.ansatz {
            SweepAnsatz::TwoQubit { .. } => 2,
            _ => 3,
        }
    }

    fn circuit_at(&self, point: &[f64]) -> Result<Circuit, CircuitError> {
        match &self.ansatz {
            SweepAnsatz::TwoQubit { .. } | SweepAnsatz::ThreeQubit { .. } => {
                build_loader(&GaussianLoaderParams::from_degrees(point)?)
            }
            SweepAnsatz::GciTranspiled { fixed_deg, .. } => {
                let angles = TranspiledGciAngles::from_degrees([
                    fixed_deg[0],
                    fixed_deg[1],
                    fixed_deg[2],
                    point[0],
                    point[1],
                ]);
                // Register-order bitstrings so the histogram reads |q0 q1 q2>.
                Ok(build_gci_transpiled(&angles)?.with_bit_order(BitOrder::Q0Msb))
            }
        }
    }
}

fn cartesian(axes: &[&Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    if axes.iter().any(|a| a.is_empty()) {
        out.clear();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub angles_deg: Vec<f64>,
    pub probs: Vec<f64>,
    pub class: ConcavityClass,
}

/// Evaluates every grid point. Grid point `k` samples from RNG stream `k`.
pub fn run_sweep(spec: &SweepSpec, exec: Execution) -> Result<Vec<SweepRow>, CircuitError> {
    let grid = spec.grid();
    if grid.is_empty() {
        return Err(CircuitError::EmptyGrid);
    }
    let rows = exec.map_range(grid.len(), |k| -> Result<SweepRow, CircuitError> {
        let point = &grid[k];
        let mut probs = spec.circuit_at(point)?.probabilities();
        if let Some(n) = &spec.noise {
            if let Some(cm) = &n.readout {
                probs = cm.apply(&probs).map_err(|e| CircuitError::BadRange(e.to_string()))?;
            }
            if let Some(shots) = n.shots {
                let mut rng = stream_rng(n.seed, k as u64);
                probs = noise::sample_frequencies(&probs, shots, &mut rng);
            }
        }
        let class = classify_concavity(&probs, spec.concavity_tol)?;
        Ok(SweepRow { angles_deg: point.clone(), probs, class })
    });
    rows.into_iter().collect()
}

/// Renders sweep rows as CSV with full-precision round-trip numbers.
pub fn sweep_csv(spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let n = spec.n_qubits();
    let mut header: Vec<String> = spec.angle_columns().iter().map(|s| s.to_string()).collect();
    header.extend((0..1usize << n).map(|i| format!("p_{}", crate::simkit::bitstring(i, n))));
    header.push("class".into());
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let mut fields: Vec<String> = r.angles_deg.iter().map(|v| format!("{v:?}")).collect();
        fields.extend(r.probs.iter().map(|v| format!("{v:?}")));
        fields.push(r.class.as_str().into());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}
