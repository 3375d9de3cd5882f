use clap::Args;
use pcombine_core::pvalue::DEFAULT_TAU_SET;
use pcombine_core::{Method, MethodSpec};
use serde::Serialize;

use crate::config::Settings;
use crate::error::CliError;

#[derive(Args, Debug, Clone, Serialize)]
pub struct MethodArgs {
    /// Methods, comma separated (fisher, stouffer, minp, afp, afz, tfhard,
    /// tfsoft, otfhard, otfsoft, cauchy, trunccauchy, hm, pareto, bj, hc,
    /// pearson, fe, fecs)
    #[arg(long = "method", visible_alias = "methods", value_delimiter = ',', required = true)]
    pub methods: Vec<String>,

    /// Truncation threshold for tfhard / tfsoft
    #[arg(long)]
    pub tau: Option<f64>,

    /// Threshold set for otfhard / otfsoft
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,

    /// Truncation level of the Cauchy transform (trunccauchy, pareto, fe, fecs)
    #[arg(long)]
    pub delta: Option<f64>,

    /// Tail index of the Pareto transform
    #[arg(long)]
    pub gamma: Option<f64>,
}

impl MethodArgs {
    pub fn specs(&self, settings: &Settings) -> Result<Vec<MethodSpec>, CliError> {
        parse_specs(&self.methods, self.tau, self.taus.clone(), settings.delta(self.delta), self.gamma)
    }
}

pub fn parse_specs(
    names: &[String],
    tau: Option<f64>,
    taus: Option<Vec<f64>>,
    delta: f64,
    gamma: Option<f64>,
) -> Result<Vec<MethodSpec>, CliError> {
    names
        .iter()
        .filter(|n| !n.trim().is_empty())
        .map(|name| {
            let method: Method = name.parse().map_err(|_| CliError::Usage(format!("unknown method '{name}'")))?;
            let mut spec = MethodSpec::new(method).with_delta(delta);
            if let Some(g) = gamma {
                spec = spec.with_gamma(g);
            }
            match method {
                Method::TFhard | Method::TFsoft => {
                    let t = tau.ok_or_else(|| CliError::Usage(format!("{method} requires --tau")))?;
                    spec = spec.with_tau(t);
                }
                Method::OTFhard | Method::OTFsoft => {
                    spec = spec.with_tau_set(taus.clone().unwrap_or_else(|| DEFAULT_TAU_SET.to_vec()));
                }
                _ => {}
            }
            spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(spec)
        })
        .collect()
}
