//! Loss distributions from GCI measurement outcomes, plus VaR and CVaR.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::{build_gci_ideal, build_gci_transpiled, CircuitError, GaussianLoaderParams, TranspiledGciAngles};
use crate::exec::stream_rng;
use crate::finmodel::{GciModel, ModelError};
use crate::noise::{inject_cz_phase, sample_counts, NoiseConfig, NoiseError, ShotCounts};
use crate::simkit::{born_probabilities, reorder, BitOrder, SimError};
use crate::transpiler::{route, CouplingMap, TranspileOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("confidence level must be in (0, 1), got {0}")]
    Level(f64),
    #[error("invalid register layout: {0}")]
    Layout(String),
    #[error("outcome has {got} bits, layout expects {expected}")]
    Length { expected: usize, got: usize },
    #[error("loss distribution is empty")]
    Empty,
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Which bitstring positions (0 = leftmost) hold default flags and which
/// hold the latent code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterLayout {
    pub asset_bits: Vec<usize>,
    pub z_bits: Vec<usize>,
    pub lgd_per_asset: Vec<f64>,
}

impl RegisterLayout {
    /// Asset flags in the leftmost block, latent code after them.
    pub fn blocks(lgd_per_asset: Vec<f64>, n_z: usize) -> Result<Self, RiskError> {
        let n_a = lgd_per_asset.len();
        let l = RegisterLayout { asset_bits: (0..n_a).collect(), z_bits: (n_a..n_a + n_z).collect(), lgd_per_asset };
        l.validate()?;
        Ok(l)
    }

    pub fn width(&self) -> usize {
        self.asset_bits.len() + self.z_bits.len()
    }

    pub fn validate(&self) -> Result<(), RiskError> {
        if self.asset_bits.len() != self.lgd_per_asset.len() {
            return Err(RiskError::Layout("one LGD per asset bit".into()));
        }
        if self.lgd_per_asset.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(RiskError::Layout("LGD must be finite and nonnegative".into()));
        }
        let w = self.width();
        let mut seen = vec![false; w];
        for &b in self.asset_bits.iter().chain(&self.z_bits) {
            if b >= w || seen[b] {
                return Err(RiskError::Layout("bit positions must be disjoint and cover the string".into()));
            }
            seen[b] = true;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossDistribution {
    pub losses: Vec<f64>,
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
    pub expected_loss: f64,
    pub z_marginal: Vec<f64>,
    /// Marginal default probability per asset.
    pub default_marginals: Vec<f64>,
}

fn to_cents(x: f64) -> i64 {
    (x * 100.0).round() as i64
}

fn decode_weighted(
    outcomes: impl Iterator<Item = (Vec<bool>, f64)>,
    layout: &RegisterLayout,
) -> Result<LossDistribution, RiskError> {
    layout.validate()?;
    let mut by_cents: BTreeMap<i64, f64> = BTreeMap::new();
    let mut z_marginal = vec![0.0; 1 << layout.z_bits.len()];
    let mut defaults = vec![0.0; layout.asset_bits.len()];
    let mut total = 0.0;
    for (bits, w) in outcomes {
        if bits.len() != layout.width() {
            return Err(RiskError::Length { expected: layout.width(), got: bits.len() });
        }
        let code = layout.z_bits.iter().fold(0usize, |acc, &b| (acc << 1) | bits[b] as usize);
        z_marginal[code] += w;
        let mut cents = 0i64;
        for (k, &b) in layout.asset_bits.iter().enumerate() {
            if bits[b] {
                cents += to_cents(layout.lgd_per_asset[k]);
                defaults[k] += w;
            }
        }
        if w != 0.0 {
            *by_cents.entry(cents).or_insert(0.0) += w;
        }
        total += w;
    }
    if by_cents.is_empty() || total <= 0.0 {
        return Err(RiskError::Empty);
    }
    let losses: Vec<f64> = by_cents.keys().map(|&c| c as f64 / 100.0).collect();
    let pdf: Vec<f64> = by_cents.values().map(|w| w / total).collect();
    let mut acc = 0.0;
    let cdf = pdf
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    let expected_loss = losses.iter().zip(&pdf).map(|(l, p)| l * p).sum();
    Ok(LossDistribution {
        losses,
        pdf,
        cdf,
        expected_loss,
        z_marginal: z_marginal.into_iter().map(|w| w / total).collect(),
        default_marginals: defaults.into_iter().map(|w| w / total).collect(),
    })
}

fn index_bits(index: usize, n_bits: usize) -> Vec<bool> {
    (0..n_bits).map(|k| (index >> (n_bits - 1 - k)) & 1 == 1).collect()
}

/// Decodes a dense probability vector whose index, written MSB first, is
/// the output bitstring.
pub fn decode_probs(probs: &[f64], layout: &RegisterLayout) -> Result<LossDistribution, RiskError> {
    let n_bits = probs.len().trailing_zeros() as usize;
    if !probs.len().is_power_of_two() || n_bits != layout.width() {
        return Err(RiskError::Length { expected: layout.width(), got: n_bits });
    }
    decode_weighted(probs.iter().enumerate().map(|(i, &p)| (index_bits(i, n_bits), p)), layout)
}

pub fn decode_counts(counts: &ShotCounts, layout: &RegisterLayout) -> Result<LossDistribution, RiskError> {
    let mut outcomes = Vec::with_capacity(counts.counts.len());
    for (k, &c) in &counts.counts {
        let bits: Vec<bool> = k.chars().filter(|ch| !ch.is_whitespace()).map(|ch| ch == '1').collect();
        outcomes.push((bits, c as f64));
    }
    decode_weighted(outcomes.into_iter(), layout)
}

fn check_level(level: f64) -> Result<(), RiskError> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(RiskError::Level(level))
    }
}

/// Smallest loss with `CDF >= level`.
pub fn var(dist: &LossDistribution, level: f64) -> Result<f64, RiskError> {
    check_level(level)?;
    let i = dist.cdf.iter().position(|&c| c >= level).unwrap_or(dist.cdf.len() - 1);
    Ok(dist.losses[i])
}

/// Tail expectation beyond VaR with the boundary atom split so that exactly
/// `1 - level` of mass is averaged.
pub fn cvar(dist: &LossDistribution, level: f64) -> Result<f64, RiskError> {
    let v = var(dist, level)?;
    let i = dist.losses.iter().position(|&l| l == v).expect("VaR is one of the losses");
    let tail: f64 = dist.losses[i + 1..].iter().zip(&dist.pdf[i + 1..]).map(|(l, p)| l * p).sum();
    let boundary = (dist.cdf[i] - level).max(0.0);
    Ok((tail + v * boundary) / (1.0 - level))
}

/// Circuit used for the pipeline; angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GciCircuitChoice {
    Ideal { loader_deg: Vec<f64> },
    Transpiled { angles_deg: [f64; 5] },
}

impl GciCircuitChoice {
    /// Ideal circuit with the two-qubit loader fitted exactly to N(0,1) on
    /// `{-1, -1/3, 1/3, 1}`.
    pub fn gaussian_ideal() -> Self {
        GciCircuitChoice::Ideal { loader_deg: vec![90.0, 102.628_877_540_803_8] }
    }

    pub fn hardware_transpiled() -> Self {
        GciCircuitChoice::Transpiled { angles_deg: TranspiledGciAngles::hardware_optimum().to_degrees() }
    }
}

fn default_levels() -> Vec<f64> {
    vec![0.95, 0.99]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub circuit: GciCircuitChoice,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    /// Device map for CZ phase injection; the three-qubit preset if absent.
    #[serde(default)]
    pub coupling_map: Option<CouplingMap>,
}

impl PipelineConfig {
    pub fn new(circuit: GciCircuitChoice) -> Self {
        PipelineConfig { circuit, noise: NoiseConfig::default(), levels: default_levels(), coupling_map: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GciReport {
    #[serde(flatten)]
    pub distribution: LossDistribution,
    pub var: BTreeMap<String, f64>,
    pub cvar: BTreeMap<String, f64>,
    pub p_default: f64,
    pub shots: Option<u64>,
    pub seed: u64,
    /// Output probabilities before sampling, asset bit leftmost.
    pub outcome_probs: Vec<f64>,
}

/// Layout of the three-qubit GCI register: asset bit, then `q1 q0`.
pub fn gci_layout(model: &GciModel) -> RegisterLayout {
    RegisterLayout::blocks(vec![model.lgd()], model.n_z()).expect("single-asset layout is valid")
}

/// Simulate, add noise, decode, and summarize.
pub fn run_gci_pipeline(model: &GciModel, config: &PipelineConfig) -> Result<GciReport, RiskError> {
    for &l in &config.levels {
        check_level(l)?;
    }
    let circuit = match &config.circuit {
        GciCircuitChoice::Ideal { loader_deg } => build_gci_ideal(model, &GaussianLoaderParams::from_degrees(loader_deg)?)?,
        GciCircuitChoice::Transpiled { angles_deg } => {
            build_gci_transpiled(&TranspiledGciAngles::from_degrees(*angles_deg))?
        }
    };
    let noise = &config.noise;
    let n = circuit.n_qubits();
    let mut probs_msb = if noise.cz_phase {
        let map = config.coupling_map.clone().unwrap_or_else(CouplingMap::contralto_3q);
        match config.circuit {
            // already native and laid out on the device
            GciCircuitChoice::Transpiled { .. } => born_probabilities(&inject_cz_phase(&circuit, &map)?.run()),
            GciCircuitChoice::Ideal { .. } => {
                let routed = route(&circuit, &map, None, TranspileOptions::default()).map_err(NoiseError::from)?;
                let physical = born_probabilities(&inject_cz_phase(&routed.output, &map)?.run());
                physical_to_logical(&physical, &routed.final_layout, n)
            }
        }
    } else {
        born_probabilities(&circuit.run())
    };
    if let Some(spec) = &noise.readout {
        probs_msb = spec.build(n)?.apply(&probs_msb)?;
    }
    let probs = reorder(&probs_msb, BitOrder::Q0Msb, circuit.bit_order());
    let layout = gci_layout(model);
    let distribution = match noise.shots {
        Some(0) => return Err(NoiseError::NoShots.into()),
        Some(shots) => decode_counts(&sample_counts(&probs, shots, &mut stream_rng(noise.seed, 0)), &layout)?,
        None => decode_probs(&probs, &layout)?,
    };
    let mut var_map = BTreeMap::new();
    let mut cvar_map = BTreeMap::new();
    for &l in &config.levels {
        var_map.insert(level_key(l), var(&distribution, l)?);
        cvar_map.insert(level_key(l), cvar(&distribution, l)?);
    }
    Ok(GciReport {
        p_default: distribution.default_marginals[0],
        distribution,
        var: var_map,
        cvar: cvar_map,
        shots: noise.shots,
        seed: noise.seed,
        outcome_probs: probs,
    })
}

/// Marginal over the first `n_logical` logical qubits of a physical outcome
/// distribution, `layout[logical] = physical`, both qubit-0-MSB.
fn physical_to_logical(physical: &[f64], layout: &[usize], n_logical: usize) -> Vec<f64> {
    let n_phys = layout.len();
    let mut out = vec![0.0; 1 << n_logical];
    for (y, &p) in physical.iter().enumerate() {
        let x = (0..n_logical).fold(0usize, |acc, l| (acc << 1) | ((y >> (n_phys - 1 - layout[l])) & 1));
        out[x] += p;
    }
    out
}

pub fn level_key(level: f64) -> String {
    format!("{level}")
}

/// Two-column `loss,cdf` CSV.
pub fn cdf_csv(dist: &LossDistribution) -> String {
    let mut s = String::from("loss,cdf\n");
    for (l, c) in dist.losses.iter().zip(&dist.cdf) {
        s.push_str(&format!("{l:?},{c:?}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::ReadoutSpec;

    fn two_point() -> LossDistribution {
        let layout = RegisterLayout::blocks(vec![1000.0], 2).unwrap();
        // asset bit leftmost; 0.25 total default weight spread over z codes
        let probs = [0.3, 0.2, 0.15, 0.1, 0.05, 0.05, 0.1, 0.05];
        decode_probs(&probs, &layout).unwrap()
    }

    #[test]
    fn decode_two_point() {
        let d = two_point();
        assert_eq!(d.losses, vec![0.0, 1000.0]);
        assert!((d.pdf[0] - 0.75).abs() < 1e-15 && (d.pdf[1] - 0.25).abs() < 1e-15);
        assert!((d.cdf[1] - 1.0).abs() < 1e-12);
        assert!((d.expected_loss - 250.0).abs() < 1e-9);
        let z = [0.35, 0.25, 0.25, 0.15];
        for (a, b) in d.z_marginal.iter().zip(z) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn decode_trivial_and_additive() {
        let layout = RegisterLayout::blocks(vec![1000.0], 2).unwrap();
        let mut probs = [0.0; 8];
        probs[0] = 1.0;
        let d = decode_probs(&probs, &layout).unwrap();
        assert_eq!(d.losses, vec![0.0]);
        assert_eq!(d.pdf, vec![1.0]);
        assert_eq!(d.expected_loss, 0.0);

        let layout = RegisterLayout::blocks(vec![100.0, 250.0], 1).unwrap();
        let counts = ShotCounts { n_shots: 4, n_bits: 3, counts: BTreeMap::from([("110".to_string(), 4)]) };
        let d = decode_counts(&counts, &layout).unwrap();
        assert_eq!(d.losses, vec![350.0]);
        assert_eq!(d.default_marginals, vec![1.0, 1.0]);
    }

    #[test]
    fn identical_losses_collapse() {
        // 0.1 + 0.2 is not 0.3 in floating point; cents are
        let layout = RegisterLayout::blocks(vec![0.1, 0.2, 0.3], 0).unwrap();
        let counts = ShotCounts {
            n_shots: 2,
            n_bits: 3,
            counts: BTreeMap::from([("110".to_string(), 1), ("001".to_string(), 1)]),
        };
        let d = decode_counts(&counts, &layout).unwrap();
        assert_eq!(d.losses.len(), 1);
    }

    #[test]
    fn layout_and_length_errors() {
        let layout = RegisterLayout::blocks(vec![1000.0], 2).unwrap();
        assert!(matches!(decode_probs(&[0.5, 0.5], &layout), Err(RiskError::Length { .. })));
        let bad = RegisterLayout { asset_bits: vec![0], z_bits: vec![0, 1], lgd_per_asset: vec![1.0] };
        assert!(bad.validate().is_err());
        let bad = RegisterLayout { asset_bits: vec![0], z_bits: vec![1], lgd_per_asset: vec![] };
        assert!(bad.validate().is_err());
        let counts = ShotCounts { n_shots: 1, n_bits: 2, counts: BTreeMap::from([("10".to_string(), 1)]) };
        assert!(matches!(decode_counts(&counts, &layout), Err(RiskError::Length { expected: 3, got: 2 })));
    }

    #[test]
    fn var_examples() {
        let d = two_point();
        assert_eq!(var(&d, 0.95).unwrap(), 1000.0);
        assert_eq!(var(&d, 0.5).unwrap(), 0.0);
        let delta = LossDistribution {
            losses: vec![0.0],
            pdf: vec![1.0],
            cdf: vec![1.0],
            expected_loss: 0.0,
            z_marginal: vec![1.0],
            default_marginals: vec![0.0],
        };
        for l in [0.01, 0.5, 0.99] {
            assert_eq!(var(&delta, l).unwrap(), 0.0);
            assert_eq!(cvar(&delta, l).unwrap(), 0.0);
        }
        for bad in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(var(&d, bad).is_err());
            assert!(cvar(&d, bad).is_err());
        }
    }

    #[test]
    fn cvar_examples() {
        let d = two_point();
        assert!((cvar(&d, 0.95).unwrap() - 1000.0).abs() < 1e-9);
        let layout = RegisterLayout::blocks(vec![100.0, 200.0], 0).unwrap();
        // outcomes 00, 01, 10, 11 -> 0, 200, 100, 300
        let d = decode_probs(&[0.25; 4], &layout).unwrap();
        assert_eq!(d.losses, vec![0.0, 100.0, 200.0, 300.0]);
        assert!((cvar(&d, 0.5).unwrap() - 250.0).abs() < 1e-12);
        // boundary split: level 0.6 keeps 0.15 of the 200 atom
        let expected = (200.0 * 0.15 + 300.0 * 0.25) / 0.4;
        assert!((cvar(&d, 0.6).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn decoding_is_linear() {
        let layout = RegisterLayout::blocks(vec![1000.0], 2).unwrap();
        let a = [0.1, 0.2, 0.1, 0.1, 0.2, 0.1, 0.1, 0.1];
        let b = [0.4, 0.0, 0.1, 0.1, 0.0, 0.2, 0.1, 0.1];
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.3 * x + 0.7 * y).collect();
        let (da, db, dm) =
            (decode_probs(&a, &layout).unwrap(), decode_probs(&b, &layout).unwrap(), decode_probs(&mix, &layout).unwrap());
        for k in 0..2 {
            assert!((dm.pdf[k] - (0.3 * da.pdf[k] + 0.7 * db.pdf[k])).abs() < 1e-15);
        }
        for k in 0..4 {
            assert!((dm.z_marginal[k] - (0.3 * da.z_marginal[k] + 0.7 * db.z_marginal[k])).abs() < 1e-15);
        }
    }

    #[test]
    fn reference_pipeline_exact() {
        let model = GciModel::new(0.25, 0.027, 1000.0, 2, 1.0).unwrap();
        let r = run_gci_pipeline(&model, &PipelineConfig::new(GciCircuitChoice::gaussian_ideal())).unwrap();
        let d = &r.distribution;
        assert!((d.cdf[0] - 0.75).abs() < 0.02, "P(L<=0) = {}", d.cdf[0]);
        assert!((d.cdf.last().unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(r.var["0.95"], 1000.0);
        assert!((d.expected_loss - 250.0).abs() < 5.0);

        // p_default = sum_z p(z) sin^2(alpha~ z + beta~)
        let oracle: f64 = (0..4)
            .map(|c| d.z_marginal[c] * (model.alpha_tilde() * c as f64 + model.beta_tilde()).sin().powi(2))
            .sum();
        assert!((r.p_default - oracle).abs() < 1e-12);
    }

    #[test]
    fn z_marginal_matches_loader() {
        let model = GciModel::new(0.25, 0.027, 1000.0, 2, 1.0).unwrap();
        let r = run_gci_pipeline(&model, &PipelineConfig::new(GciCircuitChoice::gaussian_ideal())).unwrap();
        let loader = crate::circuits::build_two_qubit_loader(
            &GaussianLoaderParams::from_degrees(&[90.0, 102.628_877_540_803_8]).unwrap(),
        )
        .unwrap();
        let p = loader.probabilities(); // index 2 q0 + q1
        for q0 in 0..2 {
            for q1 in 0..2 {
                assert!((r.distribution.z_marginal[2 * q1 + q0] - p[2 * q0 + q1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_correlation_gives_baseline_pd() {
        let model = GciModel::new(0.25, 0.0, 1000.0, 2, 1.0).unwrap();
        for loader in [vec![90.0, 90.0], vec![17.0, 250.0]] {
            let r = run_gci_pipeline(&model, &PipelineConfig::new(GciCircuitChoice::Ideal { loader_deg: loader })).unwrap();
            assert!((r.p_default - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn shots_and_readout() {
        let model = GciModel::new(0.25, 0.027, 1000.0, 2, 1.0).unwrap();
        let mut cfg = PipelineConfig::new(GciCircuitChoice::gaussian_ideal());
        cfg.noise.shots = Some(4096);
        cfg.noise.readout = Some(ReadoutSpec::Uniform { fidelity: 0.95 });
        cfg.noise.seed = 11;
        let a = run_gci_pipeline(&model, &cfg).unwrap();
        let b = run_gci_pipeline(&model, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.var["0.95"], 1000.0);
        assert_eq!(a.seed, 11);
        cfg.noise.shots = Some(0);
        assert!(run_gci_pipeline(&model, &cfg).is_err());
    }

    #[test]
    fn transpiled_pipeline_runs() {
        let model = GciModel::new(0.25, 0.027, 1000.0, 2, 1.0).unwrap();
        let mut cfg = PipelineConfig::new(GciCircuitChoice::hardware_transpiled());
        let r = run_gci_pipeline(&model, &cfg).unwrap();
        assert!((r.distribution.pdf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        cfg.noise.cz_phase = true;
        let noisy = run_gci_pipeline(&model, &cfg).unwrap();
        assert_ne!(noisy.outcome_probs, r.outcome_probs);
        // routed ideal circuit on a map with no phase error matches the exact run
        let mut ideal = PipelineConfig::new(GciCircuitChoice::gaussian_ideal());
        let exact = run_gci_pipeline(&model, &ideal).unwrap();
        ideal.noise.cz_phase = true;
        ideal.coupling_map = Some(CouplingMap::linear(&["a", "b", "c"], 0.0).unwrap());
        let routed = run_gci_pipeline(&model, &ideal).unwrap();
        for (a, b) in routed.outcome_probs.iter().zip(&exact.outcome_probs) {
            assert!((a - b).abs() < 1e-12);
        }
        // on the device preset the counter-phases cancel the injected error
        ideal.coupling_map = None;
        let device = run_gci_pipeline(&model, &ideal).unwrap();
        assert!((device.p_default - exact.p_default).abs() < 0.05);
    }

    #[test]
    fn cdf_csv_round_trips() {
        let csv = cdf_csv(&two_point());
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("loss,cdf"));
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(row, vec![0.0, two_point().cdf[0]]);
    }
}
