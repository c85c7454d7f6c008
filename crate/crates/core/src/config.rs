//! JSON run configuration.

use ratgeom::{parse_rat, parse_rats, Rat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{Claim, MarketModel, Piecewise};
use crate::solvency::{build_cone, ExchangeMatrix, SolvencyConeSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment<T> {
    pub until: f64,
    pub value: T,
}

/// A constant or a list of `{"until", "value"}` segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient<T> {
    Segments(Vec<Segment<T>>),
    Constant(T),
}

impl<T: Clone> Coefficient<T> {
    fn to_piecewise(&self) -> Result<Piecewise<T>> {
        match self {
            Coefficient::Constant(v) => Ok(Piecewise::constant(v.clone())),
            Coefficient::Segments(s) => Piecewise::new(s.iter().map(|seg| (seg.until, seg.value.clone())).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClaimConfig {
    ConstantPhysical { vector: Vec<String> },
    VanillaCall { asset: usize, strike: String },
    LinearBasket { weights: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Tree,
    Mc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub s0: Vec<f64>,
    #[serde(default = "zero_rate")]
    pub r: Coefficient<f64>,
    pub b: Coefficient<Vec<f64>>,
    pub sigma: Coefficient<Vec<Vec<f64>>>,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub periods: usize,
    /// Cost proportions as rational strings, `d × d`.
    pub mu: Vec<Vec<String>>,
    pub claim: ClaimConfig,
    /// Overrides the claim's default Lipschitz constant.
    #[serde(default)]
    pub lipschitz: Option<String>,
    #[serde(default)]
    pub eps: Vec<f64>,
    /// Candidate portfolio for ε queries, physical units.
    #[serde(default)]
    pub xi: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub allow_degenerate: bool,
    #[serde(default)]
    pub mode: Mode,
}

fn zero_rate() -> Coefficient<f64> {
    Coefficient::Constant(0.0)
}

fn default_paths() -> usize {
    10_000
}

fn default_steps() -> usize {
    16
}

/// Everything a command needs, validated.
#[derive(Debug, Clone)]
pub struct Validated {
    pub model: MarketModel,
    pub spec: SolvencyConeSpec,
    pub claim: Claim,
    pub config: RunConfig,
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn model(&self) -> Result<MarketModel> {
        MarketModel::new(
            self.s0.clone(),
            self.r.to_piecewise()?,
            self.b.to_piecewise()?,
            self.sigma.to_piecewise()?,
            self.horizon,
        )
    }

    pub fn exchange(&self) -> Result<ExchangeMatrix> {
        ExchangeMatrix::from_strings(&self.mu)
    }

    pub fn claim(&self, d: usize) -> Result<Claim> {
        let mut claim = match &self.claim {
            ClaimConfig::ConstantPhysical { vector } => Claim::constant_physical(parse_rats(vector)?),
            ClaimConfig::VanillaCall { asset, strike } => Claim::vanilla_call(d, *asset, parse_rat(strike)?)?,
            ClaimConfig::LinearBasket { weights } => Claim::linear_basket(parse_rats(weights)?),
        };
        if let Some(l) = &self.lipschitz {
            claim.lipschitz = parse_rat(l)?;
        }
        claim.validate(d)?;
        Ok(claim)
    }

    /// Validates every part before any computation runs.
    pub fn validate(&self) -> Result<Validated> {
        let model = self.model()?;
        let exchange = self.exchange()?;
        if exchange.d() != model.d() {
            return Err(Error::Config(format!("mu is {0} x {0} but the market has {1} assets", exchange.d(), model.d())));
        }
        if self.periods == 0 {
            return Err(Error::Config("periods must be at least 1".into()));
        }
        if self.n_paths == 0 || self.n_steps == 0 {
            return Err(Error::Config("n_paths and n_steps must be at least 1".into()));
        }
        if let Some(e) = self.eps.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(Error::Config(format!("eps values must lie in (0, 1], got {e}")));
        }
        if let Some(xi) = &self.xi {
            if xi.len() != model.d() || xi.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("xi must have {} finite entries", model.d())));
            }
        }
        let claim = self.claim(model.d())?;
        let spec = build_cone(exchange, self.allow_degenerate)?;
        Ok(Validated { model, spec, claim, config: self.clone() })
    }
}

/// The lipschitz field as a float, for ε queries.
pub fn lipschitz_f64(claim: &Claim) -> f64 {
    ratgeom::rat_to_f64(&claim.lipschitz)
}

/// Rational from a config string, for callers outside this module.
pub fn rat_field(s: &str) -> Result<Rat> {
    Ok(parse_rat(s)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "s0": [1.0, 1.0], "b": [0.0], "sigma": [[0.0], [0.2]], "T": 1.0, "periods": 1,
        "mu": [["0", "1/10"], ["1/10", "0"]],
        "claim": {"kind": "constant-physical", "vector": ["1", "0"]}
    }"#;

    #[test]
    fn parses_and_validates() {
        let c = RunConfig::from_json_str(BASE).unwrap();
        let v = c.validate().unwrap();
        assert_eq!(v.model.d(), 2);
        assert_eq!(c.mode, Mode::Tree);
        assert_eq!(c.n_paths, 10_000);
    }

    #[test]
    fn piecewise_coefficients() {
        let s = BASE.replace(
            r#""sigma": [[0.0], [0.2]]"#,
            r#""sigma": [{"until": 0.5, "value": [[0.0], [0.1]]}, {"until": 1.0, "value": [[0.0], [0.3]]}]"#,
        );
        let c = RunConfig::from_json_str(&s).unwrap();
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        let unknown = BASE.replace(r#""periods": 1"#, r#""periods": 1, "extra": 3"#);
        assert!(matches!(RunConfig::from_json_str(&unknown), Err(Error::Config(_))));
        let bad_claim = BASE.replace("constant-physical", "digital");
        assert!(RunConfig::from_json_str(&bad_claim).is_err());
        let degenerate = BASE.replace(r#"["0", "1/10"], ["1/10", "0"]"#, r#"["0", "0"], ["0", "0"]"#);
        let c = RunConfig::from_json_str(&degenerate).unwrap();
        assert_eq!(c.validate().unwrap_err(), Error::DegenerateCone { asset: 2 });
        let s0 = BASE.replace(r#""s0": [1.0, 1.0]"#, r#""s0": [2.0, 1.0]"#);
        assert!(matches!(RunConfig::from_json_str(&s0).unwrap().validate(), Err(Error::InvalidModel(_))));
        let eps = BASE.replace(r#""periods": 1"#, r#""periods": 1, "eps": [0.0]"#);
        assert!(matches!(RunConfig::from_json_str(&eps).unwrap().validate(), Err(Error::Config(_))));
    }
}
