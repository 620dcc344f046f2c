//! Flat run configuration read from a TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bsmrmr::gibbs::PredictionMode;
use bsmrmr::synth::SimulationScenario;
use bsmrmr::{Error, Hyperparameters, Result};

/// Every key is optional; anything not set falls back to the documented
/// default. Unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    /// Schema of `train`; defaults to the sidecar next to the CSV.
    pub schema: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub test_schema: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub chain: Option<PathBuf>,

    pub omega_id: Option<u8>,
    pub coeff_id: Option<u8>,
    pub n: Option<usize>,
    pub n_test: Option<usize>,
    pub blocks: Option<usize>,
    pub sigma_x: Option<f64>,
    pub l_b: Option<f64>,
    pub u_b: Option<f64>,

    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub a3: Option<f64>,
    pub a4: Option<f64>,
    pub a5: Option<f64>,
    pub a6: Option<f64>,
    pub sigma0: Option<f64>,
    pub sigma1: Option<f64>,
    pub lambda: Option<f64>,
    pub d: Option<f64>,
    pub sigma_tau_shape: Option<f64>,
    pub gauss_var_shape: Option<f64>,
    pub gauss_var_scale: Option<f64>,
    pub n_iter: Option<usize>,
    pub n_burnin: Option<usize>,
    pub mh_step: Option<f64>,
    pub em_interval: Option<usize>,
    pub adapt_interval: Option<usize>,
    #[serde(alias = "paper-literal-sigma-update")]
    pub paper_literal_sigma_update: Option<bool>,

    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub replicates: Option<usize>,
    /// Give every replicate the same streams.
    pub shared_seed: Option<bool>,
    /// `"mean-path"` or `"predictive"`.
    pub prediction_mode: Option<String>,
    /// Parameter ids for `diagnose`, e.g. `"B[1,1]"` or `"Omega[1,2]"`.
    pub trace_params: Option<Vec<String>>,
    pub max_lag: Option<usize>,
    /// Also write every `thin`-th draw of each chain as CSV.
    pub thin: Option<usize>,
    pub cv_folds: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = bsmrmr::io::read_text(path)?;
        toml::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.message().to_string(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn n_chains(&self) -> usize {
        self.chains.unwrap_or(1)
    }

    /// Study defaults for `q` responses with every configured key applied.
    pub fn hyperparameters(&self, q: usize) -> Result<Hyperparameters> {
        let mut h = Hyperparameters::defaults_for(q);
        macro_rules! apply {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { h.$f = v; } )* };
        }
        apply!(
            a1,
            a2,
            a3,
            a4,
            a5,
            a6,
            sigma0,
            sigma1,
            lambda,
            d,
            sigma_tau_shape,
            gauss_var_shape,
            gauss_var_scale,
            n_iter,
            n_burnin,
            mh_step,
            em_interval,
            adapt_interval,
            paper_literal_sigma_update
        );
        h.validate()?;
        Ok(h)
    }

    /// The standard scenario for `(omega_id, coeff_id)` with configured
    /// overrides. The scenario seed is the root seed.
    pub fn scenario(&self) -> Result<SimulationScenario> {
        let mut s = SimulationScenario::standard(self.omega_id.unwrap_or(1), self.coeff_id.unwrap_or(1), self.seed())?;
        macro_rules! apply {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { s.$f = v; } )* };
        }
        apply!(n, n_test, blocks, sigma_x, l_b, u_b);
        s.validate()?;
        Ok(s)
    }

    pub fn mode(&self) -> Result<PredictionMode> {
        match self.prediction_mode.as_deref() {
            None | Some("mean-path") => Ok(PredictionMode::MeanPath),
            Some("predictive") => Ok(PredictionMode::Predictive),
            Some(other) => Err(Error::Schema(format!(
                "prediction_mode must be \"mean-path\" or \"predictive\", got {other:?}"
            ))),
        }
    }

    /// Basic range checks that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("chains", self.chains),
            ("threads", self.threads),
            ("replicates", self.replicates),
            ("max_lag", self.max_lag),
            ("thin", self.thin),
        ];
        for (name, v) in positive {
            if v == Some(0) {
                return Err(Error::Schema(format!("{name} must be at least 1")));
            }
        }
        if matches!(self.cv_folds, Some(1)) {
            return Err(Error::Schema("cv_folds must be 0 (off) or at least 2".into()));
        }
        self.mode()?;
        Ok(())
    }

    pub fn require<'a>(&self, field: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        field
            .as_deref()
            .ok_or_else(|| Error::Schema(format!("config key {key:?} is required for this command")))
    }
}
