//! One-factor Gaussian conditional independence credit model.
//!
//! The conditional default probability
//! `PD(z) = Phi((Phi^-1(p0) - sqrt(rho) z) / sqrt(1 - rho))`
//! is linearized in angle space, `arcsin sqrt(PD(z)) ~ alpha z + beta`, so a
//! single `RY(2(alpha z + beta))` on the asset qubit reproduces it. On an
//! `n_z`-qubit register the latent factor only takes grid values, and the
//! slope/offset are re-expressed against the integer code of the register.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("p0 must lie in (0, 1), got {0}")]
    BaselinePd(f64),
    #[error("rho must lie in [0, 1), got {0}")]
    Correlation(f64),
    #[error("lgd must be finite and nonnegative, got {0}")]
    Lgd(f64),
    #[error("z_max must be finite and positive, got {0}")]
    ZMax(f64),
    #[error("n_z must be between 1 and 10, got {0}")]
    RegisterSize(usize),
    #[error("quantile argument must lie in (0, 1), got {0}")]
    QuantileDomain(f64),
    #[error("z code {code} out of range for a {n_z}-qubit register")]
    ZCode { code: usize, n_z: usize },
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF through the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

// Acklam's rational approximation, ~1e-9 relative error before refinement.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.024_25;

fn acklam(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Inverse standard normal CDF: rational seed plus one Halley step.
pub fn normal_quantile(p: f64) -> Result<f64, ModelError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(ModelError::QuantileDomain(p));
    }
    let x = acklam(p);
    // Residual in the tail that keeps relative precision.
    let e = if x < 0.0 {
        0.5 * libm::erfc(-x * FRAC_1_SQRT_2) - p
    } else {
        (1.0 - p) - 0.5 * libm::erfc(x * FRAC_1_SQRT_2)
    };
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

/// Slope, offset and anchor of the angle-space linearization at `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearization {
    pub alpha: f64,
    pub beta: f64,
    pub psi: f64,
}

pub fn linearize(p0: f64, rho: f64) -> Result<Linearization, ModelError> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(ModelError::BaselinePd(p0));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(ModelError::Correlation(rho));
    }
    let psi = normal_quantile(p0)? / (1.0 - rho).sqrt();
    let phi = normal_cdf(psi);
    let beta = phi.sqrt().asin();
    let alpha = -(1.0 / (1.0 - phi).sqrt())
        * (1.0 / (2.0 * phi.sqrt()))
        * normal_pdf(psi)
        * (rho.sqrt() / (1.0 - rho).sqrt());
    Ok(Linearization { alpha, beta, psi })
}

/// Wire form: only the inputs, derived fields are recomputed on load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GciModelSpec {
    pub p0: f64,
    pub rho: f64,
    pub lgd: f64,
    pub n_z: usize,
    pub z_max: f64,
}

/// Derived linearization constants, emitted in reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    pub psi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub alpha_tilde: f64,
    pub beta_tilde: f64,
    pub delta_z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GciModel {
    spec: GciModelSpec,
    derived: DerivedParams,
}

impl GciModel {
    pub fn new(p0: f64, rho: f64, lgd: f64, n_z: usize, z_max: f64) -> Result<Self, ModelError> {
        Self::from_spec(GciModelSpec { p0, rho, lgd, n_z, z_max })
    }

    pub fn from_spec(spec: GciModelSpec) -> Result<Self, ModelError> {
        if !(spec.lgd.is_finite() && spec.lgd >= 0.0) {
            return Err(ModelError::Lgd(spec.lgd));
        }
        if !(spec.z_max.is_finite() && spec.z_max > 0.0) {
            return Err(ModelError::ZMax(spec.z_max));
        }
        if spec.n_z == 0 || spec.n_z > 10 {
            return Err(ModelError::RegisterSize(spec.n_z));
        }
        let lin = linearize(spec.p0, spec.rho)?;
        let delta_z = 2.0 * spec.z_max / ((1usize << spec.n_z) - 1) as f64;
        let derived = DerivedParams {
            psi: lin.psi,
            alpha: lin.alpha,
            beta: lin.beta,
            alpha_tilde: delta_z * lin.alpha,
            beta_tilde: lin.beta - lin.alpha * spec.z_max,
            delta_z,
        };
        Ok(GciModel { spec, derived })
    }

    pub fn spec(&self) -> &GciModelSpec {
        &self.spec
    }

    pub fn derived(&self) -> &DerivedParams {
        &self.derived
    }

    pub fn p0(&self) -> f64 {
        self.spec.p0
    }

    pub fn rho(&self) -> f64 {
        self.spec.rho
    }

    pub fn lgd(&self) -> f64 {
        self.spec.lgd
    }

    pub fn n_z(&self) -> usize {
        self.spec.n_z
    }

    pub fn z_max(&self) -> f64 {
        self.spec.z_max
    }

    pub fn alpha(&self) -> f64 {
        self.derived.alpha
    }

    pub fn beta(&self) -> f64 {
        self.derived.beta
    }

    pub fn psi(&self) -> f64 {
        self.derived.psi
    }

    pub fn alpha_tilde(&self) -> f64 {
        self.derived.alpha_tilde
    }

    pub fn beta_tilde(&self) -> f64 {
        self.derived.beta_tilde
    }

    pub fn n_codes(&self) -> usize {
        1 << self.spec.n_z
    }

    /// Exact conditional default probability.
    pub fn pd_exact(&self, z: f64) -> f64 {
        let threshold = normal_quantile(self.spec.p0).expect("p0 validated");
        normal_cdf((threshold - self.spec.rho.sqrt() * z) / (1.0 - self.spec.rho).sqrt())
    }

    /// `sin^2(alpha z + beta)`, the probability the asset qubit reads 1.
    pub fn pd_approx(&self, z: f64) -> f64 {
        (self.derived.alpha * z + self.derived.beta).sin().powi(2)
    }

    /// Latent factor value for a register code: `-z_max + code * dz`.
    pub fn z_of_code(&self, code: usize) -> Result<f64, ModelError> {
        self.check_code(code)?;
        Ok(-self.spec.z_max + code as f64 * self.derived.delta_z)
    }

    fn check_code(&self, code: usize) -> Result<(), ModelError> {
        if code >= self.n_codes() {
            return Err(ModelError::ZCode { code, n_z: self.spec.n_z });
        }
        Ok(())
    }

    /// Full RY angle `2(alpha_tilde * code + beta_tilde)` for a register code.
    pub fn coded_rotation_angle(&self, code: usize) -> Result<f64, ModelError> {
        self.check_code(code)?;
        Ok(2.0 * (self.derived.alpha_tilde * code as f64 + self.derived.beta_tilde))
    }
}

impl Serialize for GciModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.spec.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GciModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let spec = GciModelSpec::deserialize(d)?;
        GciModel::from_spec(spec).map_err(serde::de::Error::custom)
    }
}
