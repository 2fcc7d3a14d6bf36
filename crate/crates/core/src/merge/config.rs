use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Dare,
    Knots,
    Ties,
}

/// The four supported method orderings. DARE and KnOTS only prepare inputs,
/// so every pipeline ends in TIES.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Ties,
    KnotsTies,
    DareTies,
    DareKnotsTies,
}

impl Pipeline {
    pub fn methods(self) -> &'static [Method] {
        match self {
            Pipeline::Ties => &[Method::Ties],
            Pipeline::KnotsTies => &[Method::Knots, Method::Ties],
            Pipeline::DareTies => &[Method::Dare, Method::Ties],
            Pipeline::DareKnotsTies => &[Method::Dare, Method::Knots, Method::Ties],
        }
    }

    pub fn uses_dare(self) -> bool {
        matches!(self, Pipeline::DareTies | Pipeline::DareKnotsTies)
    }

    pub fn uses_knots(self) -> bool {
        matches!(self, Pipeline::KnotsTies | Pipeline::DareKnotsTies)
    }
}

impl TryFrom<&[Method]> for Pipeline {
    type Error = Error;

    fn try_from(methods: &[Method]) -> Result<Self> {
        use Method::*;
        match methods {
            [Ties] => Ok(Pipeline::Ties),
            [Knots, Ties] => Ok(Pipeline::KnotsTies),
            [Dare, Ties] => Ok(Pipeline::DareTies),
            [Dare, Knots, Ties] => Ok(Pipeline::DareKnotsTies),
            other => Err(Error::Parameter(format!(
                "unsupported pipeline {other:?}; expected one of [TIES], [KNOTS,TIES], [DARE,TIES], [DARE,KNOTS,TIES]"
            ))),
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self
            .methods()
            .iter()
            .map(|m| match m {
                Method::Dare => "DARE",
                Method::Knots => "KNOTS",
                Method::Ties => "TIES",
            })
            .collect();
        f.write_str(&names.join("-"))
    }
}

/// Merge settings, as read from a JSON config:
///
/// ```json
/// {"pipeline":["DARE","TIES"],"density":0.5,"drop_rate":0.5,"weights":[1,1,1,1,1],"seed":42}
/// ```
///
/// `drop_rate` defaults to `1 - density`; missing `weights` means all ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeConfig {
    pub pipeline: Vec<Method>,
    pub density: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

impl MergeConfig {
    pub fn new(pipeline: Pipeline, density: f64) -> Self {
        Self {
            pipeline: pipeline.methods().to_vec(),
            density,
            drop_rate: None,
            weights: None,
            seed: 0,
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn with_drop_rate(mut self, p: f64) -> Self {
        self.drop_rate = Some(p);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parameter(format!("bad merge config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn pipeline(&self) -> Result<Pipeline> {
        Pipeline::try_from(self.pipeline.as_slice())
    }

    pub fn drop_rate(&self) -> f64 {
        self.drop_rate.unwrap_or(1.0 - self.density)
    }

    /// Weight vector for `n` inputs.
    pub fn weights_for(&self, n: usize) -> Result<Vec<f64>> {
        match &self.weights {
            None => Ok(vec![1.0; n]),
            Some(w) if w.len() != n => Err(Error::Parameter(format!(
                "{} weights given for {n} inputs",
                w.len()
            ))),
            Some(w) => {
                if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                    return Err(Error::Parameter(format!("weights must be positive, got {bad}")));
                }
                Ok(w.clone())
            }
        }
    }

    /// Check everything that does not depend on the inputs.
    pub fn validate(&self) -> Result<Pipeline> {
        let pipeline = self.pipeline()?;
        check_density(self.density)?;
        if pipeline.uses_dare() {
            check_drop_rate(self.drop_rate())?;
        }
        Ok(pipeline)
    }

    /// Short human-readable description, used as the merged output's label.
    pub fn summary(&self) -> String {
        let pipeline = self
            .pipeline()
            .map(|p| p.to_string())
            .unwrap_or_else(|_| format!("{:?}", self.pipeline));
        let mut s = format!("{pipeline} density={}", self.density);
        if self.pipeline.contains(&Method::Dare) {
            s.push_str(&format!(" drop_rate={} seed={}", self.drop_rate(), self.seed));
        }
        if let Some(w) = &self.weights {
            let w: Vec<String> = w.iter().map(|x| x.to_string()).collect();
            s.push_str(&format!(" weights=[{}]", w.join(",")));
        }
        s
    }
}

pub(crate) fn check_density(density: f64) -> Result<()> {
    if density > 0.0 && density <= 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("density must lie in (0, 1], got {density}")))
    }
}

pub(crate) fn check_drop_rate(p: f64) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("drop rate must lie in [0, 1), got {p}")))
    }
}
