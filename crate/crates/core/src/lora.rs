//! Trainable-parameter accounting for low-rank adapters, and the training
//! configuration schema that accompanies fine-tuning runs.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl::{read_json, write_json};

/// The seven per-layer projections an adapter may target.
pub const TARGET_NAMES: [&str; 7] = [
    "q_proj",
    "k_proj",
    "v_proj",
    "o_proj",
    "gate_proj",
    "up_proj",
    "down_proj",
];

/// Published trainable-parameter counts at r = 16 over all seven targets.
pub const EXPECTED_COUNTS: [(&str, u64); 5] = [
    ("LLaMA-3.1-8B", 41_943_040),
    ("Mistral-7B-v0.3", 41_943_040),
    ("Qwen-2.5-Coder-3B", 29_933_568),
    ("Gemma-2-9B", 54_018_048),
    ("Phi-3.5-Mini-Instruct", 29_884_416),
];

const SHIPPED_SPECS: [&str; 5] = [
    include_str!("../data/architectures/llama-3.1-8b.json"),
    include_str!("../data/architectures/mistral-7b-v0.3.json"),
    include_str!("../data/architectures/qwen-2.5-coder-3b.json"),
    include_str!("../data/architectures/gemma-2-9b.json"),
    include_str!("../data/architectures/phi-3.5-mini-instruct.json"),
];

const DEFAULT_TRAINING_CONFIG: &str = include_str!("../data/training_config.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Projection {
    pub name: String,
    pub d_in: u64,
    pub d_out: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub model_label: String,
    pub num_layers: u64,
    /// One layer's projections; fused checkpoints are listed unfused.
    pub projections: Vec<Projection>,
}

impl ArchitectureSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ArchitectureSpec =
            serde_json::from_str(text).map_err(|e| Error::json("architecture spec", e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let spec: ArchitectureSpec = read_json(path)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::Validation(format!(
                "{}: num_layers must be ≥ 1",
                self.model_label
            )));
        }
        let mut seen = HashSet::new();
        for p in &self.projections {
            if p.d_in == 0 || p.d_out == 0 {
                return Err(Error::Validation(format!(
                    "{}: projection {} has a zero dimension",
                    self.model_label, p.name
                )));
            }
            if !seen.insert(p.name.as_str()) {
                return Err(Error::Validation(format!(
                    "{}: duplicate projection {}",
                    self.model_label, p.name
                )));
            }
        }
        Ok(())
    }
}

/// The specs for the five reference models, in table order.
pub fn shipped_specs() -> Vec<ArchitectureSpec> {
    SHIPPED_SPECS
        .iter()
        .map(|s| ArchitectureSpec::from_json(s).expect("shipped architecture spec is valid"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraConfig {
    pub rank: u64,
    pub alpha: f64,
    pub targets: Vec<String>,
}

impl Default for LoraConfig {
    fn default() -> Self {
        LoraConfig {
            rank: 16,
            alpha: 16.0,
            targets: TARGET_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl LoraConfig {
    pub fn with_rank(rank: u64) -> Self {
        LoraConfig {
            rank,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return Err(Error::Validation(format!(
                "lora alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if let Some(t) = self
            .targets
            .iter()
            .find(|t| !TARGET_NAMES.contains(&t.as_str()))
        {
            return Err(Error::Validation(format!("unknown lora target {t}")));
        }
        Ok(())
    }
}

/// Elements of A (r×d_in) and B (d_out×r) across all layers and targets.
pub fn lora_params(arch: &ArchitectureSpec, cfg: &LoraConfig) -> Result<u64> {
    let mut per_layer = 0u64;
    for target in &cfg.targets {
        let p = arch
            .projections
            .iter()
            .find(|p| &p.name == target)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "{}: no projection named {target}",
                    arch.model_label
                ))
            })?;
        per_layer += cfg.rank * (p.d_in + p.d_out);
    }
    Ok(arch.num_layers * per_layer)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verification {
    pub model: String,
    pub expected: Option<u64>,
    pub got: u64,
    pub pass: bool,
}

impl Verification {
    pub fn delta(&self) -> Option<i128> {
        self.expected.map(|e| self.got as i128 - e as i128)
    }
}

/// Compares each spec's count with the reference table. Models absent from
/// the table fail with `expected: None`.
pub fn verify_table3(specs: &[ArchitectureSpec], cfg: &LoraConfig) -> Result<Vec<Verification>> {
    specs
        .iter()
        .map(|spec| {
            let got = lora_params(spec, cfg)?;
            let expected = EXPECTED_COUNTS
                .iter()
                .find(|(m, _)| *m == spec.model_label)
                .map(|(_, c)| *c);
            Ok(Verification {
                model: spec.model_label.clone(),
                expected,
                got,
                pass: expected == Some(got),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub train_batch_size: u32,
    pub eval_batch_size: u32,
    pub gradient_accumulation_steps: u32,
    pub optimizer: String,
    pub learning_rate: f64,
    pub eval_strategy: String,
    pub eval_steps: u32,
    pub lr_scheduler: String,
    pub weight_decay: f64,
    pub epochs: u32,
    #[serde(default)]
    pub lora: LoraConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_TRAINING_CONFIG).expect("shipped training config is valid")
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let ints = [
            ("train_batch_size", self.train_batch_size),
            ("eval_batch_size", self.eval_batch_size),
            (
                "gradient_accumulation_steps",
                self.gradient_accumulation_steps,
            ),
            ("eval_steps", self.eval_steps),
            ("epochs", self.epochs),
        ];
        if let Some((name, _)) = ints.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Validation(format!("{name} must be positive")));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("weight_decay", self.weight_decay),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::Validation(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        self.lora.validate()
    }
}

pub fn load_training_config(path: &Path) -> Result<TrainingConfig> {
    let cfg: TrainingConfig = read_json(path)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn save_training_config(path: &Path, cfg: &TrainingConfig) -> Result<()> {
    cfg.validate()?;
    write_json(path, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(d: u64) -> ArchitectureSpec {
        ArchitectureSpec {
            model_label: "toy".into(),
            num_layers: 1,
            projections: vec![Projection {
                name: "q_proj".into(),
                d_in: d,
                d_out: d,
            }],
        }
    }

    fn only_q(rank: u64) -> LoraConfig {
        LoraConfig {
            rank,
            alpha: 16.0,
            targets: vec!["q_proj".into()],
        }
    }

    #[test]
    fn toy_counts() {
        assert_eq!(lora_params(&square(2), &only_q(16)).unwrap(), 64);
        assert_eq!(lora_params(&square(2), &only_q(0)).unwrap(), 0);
    }

    #[test]
    fn missing_target_is_named() {
        let err = lora_params(&square(2), &LoraConfig::default()).unwrap_err();
        assert!(err.to_string().contains("k_proj"), "{err}");
    }

    #[test]
    fn llama_count() {
        let llama = &shipped_specs()[0];
        assert_eq!(llama.model_label, "LLaMA-3.1-8B");
        assert_eq!(
            lora_params(llama, &LoraConfig::default()).unwrap(),
            41_943_040
        );
    }

    #[test]
    fn table_reproduced() {
        let v = verify_table3(&shipped_specs(), &LoraConfig::default()).unwrap();
        assert_eq!(v.len(), 5);
        assert!(v.iter().all(|r| r.pass), "{v:?}");
    }

    #[test]
    fn layer_off_by_one() {
        let mut spec = shipped_specs()[2].clone();
        let cfg = LoraConfig::default();
        let one_layer = lora_params(&spec, &cfg).unwrap() / spec.num_layers;
        spec.num_layers -= 1;
        let v = &verify_table3(&[spec], &cfg).unwrap()[0];
        assert!(!v.pass);
        assert_eq!(v.delta(), Some(-(one_layer as i128)));
    }

    #[test]
    fn training_defaults() {
        let cfg = TrainingConfig::default();
        assert_eq!(cfg.learning_rate, 2e-4);
        assert_eq!(cfg.epochs, 5);
        assert_eq!(cfg.weight_decay, 0.01);
        assert_eq!(
            (
                cfg.train_batch_size,
                cfg.eval_batch_size,
                cfg.gradient_accumulation_steps
            ),
            (8, 2, 4)
        );
        assert_eq!(cfg.optimizer, "AdamW");
        assert_eq!((cfg.eval_strategy.as_str(), cfg.eval_steps), ("steps", 5));
        assert_eq!(cfg.lr_scheduler, "linear");
        assert_eq!(cfg.lora.alpha, 16.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn training_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        let cfg = TrainingConfig::default();
        save_training_config(&path, &cfg).unwrap();
        assert_eq!(load_training_config(&path).unwrap(), cfg);
        let bad = TrainingConfig { epochs: 0, ..cfg };
        assert!(bad.validate().is_err());
        std::fs::write(&path, serde_json::to_string(&bad).unwrap()).unwrap();
        assert!(load_training_config(&path).is_err());
    }
}
