use super::model::MatcherModel;
use super::tensor::Matrix;
use super::weights::{Tensor, WeightFile};
use crate::error::{Error, Result};

/// Low-rank update `scale · A·B` for one attention projection.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    pub target: String,
    /// d × r
    pub a: Matrix,
    /// r × d
    pub b: Matrix,
    pub scale: f64,
}

impl LoraAdapter {
    pub fn new(target: impl Into<String>, a: Matrix, b: Matrix) -> Result<Self> {
        let adapter = Self {
            target: target.into(),
            a,
            b,
            scale: 1.0,
        };
        adapter.check_shape(adapter.a.rows())?;
        Ok(adapter)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn rank(&self) -> usize {
        self.a.cols()
    }

    /// `scale · A·B`.
    pub fn delta(&self) -> Matrix {
        let mut d = self.a.matmul(&self.b);
        d.data_mut().iter_mut().for_each(|v| *v *= self.scale);
        d
    }

    fn check_shape(&self, d: usize) -> Result<()> {
        let r = self.a.cols();
        if self.a.rows() != d || self.b.shape() != (r, d) || r == 0 || r > d {
            return Err(Error::Dimension(format!(
                "adapter `{}`: A is {:?}, B is {:?}; need d×r and r×d with 1 ≤ r ≤ d = {d}",
                self.target,
                self.a.shape(),
                self.b.shape()
            )));
        }
        Ok(())
    }
}

fn is_adaptable(target: &str) -> bool {
    let Some((owner, proj)) = target.split_once('.') else {
        return false;
    };
    let owner_ok = owner == "xattn"
        || owner
            .strip_prefix("blk")
            .is_some_and(|i| !i.is_empty() && i.bytes().all(|b| b.is_ascii_digit()));
    owner_ok && matches!(proj, "wq" | "wk" | "wv")
}

/// Returns a copy of `model` with every adapter folded into its target.
pub fn lora_merge(model: &MatcherModel, adapters: &[LoraAdapter]) -> Result<MatcherModel> {
    let mut merged = model.clone();
    for adapter in adapters {
        let w = merged.projection_mut(&adapter.target)?;
        adapter.check_shape(w.rows())?;
        w.add_scaled(&adapter.delta(), 1.0);
    }
    Ok(merged)
}

/// Reads `lora.{target}.A|B` (and optional `lora.{target}.scale`) entries.
pub fn adapters_from_weights(w: &WeightFile) -> Result<Vec<LoraAdapter>> {
    let mut targets: Vec<&str> = Vec::new();
    for name in w.names() {
        let rest = name
            .strip_prefix("lora.")
            .ok_or_else(|| Error::UnknownWeight(name.to_string()))?;
        let target = rest
            .strip_suffix(".A")
            .or_else(|| rest.strip_suffix(".B"))
            .or_else(|| rest.strip_suffix(".scale"))
            .ok_or_else(|| Error::UnknownWeight(name.to_string()))?;
        if !targets.contains(&target) {
            targets.push(target);
        }
    }
    targets
        .into_iter()
        .map(|target| {
            let a = w.require(&format!("lora.{target}.A"))?.to_matrix()?;
            let b = w.require(&format!("lora.{target}.B"))?.to_matrix()?;
            let scale = match w.get(&format!("lora.{target}.scale")) {
                None => 1.0,
                Some(t) if t.data.len() == 1 => t.data[0],
                Some(t) => {
                    return Err(Error::Dimension(format!(
                        "`lora.{target}.scale` has {} values, expected 1",
                        t.data.len()
                    )))
                }
            };
            Ok(LoraAdapter::new(target, a, b)?.with_scale(scale))
        })
        .collect()
}

/// Writes adapters under their canonical `lora.*` names.
pub fn adapters_to_weights(adapters: &[LoraAdapter]) -> WeightFile {
    let mut w = WeightFile::new();
    for a in adapters {
        w.insert(format!("lora.{}.A", a.target), Tensor::from_matrix(&a.a));
        w.insert(format!("lora.{}.B", a.target), Tensor::from_matrix(&a.b));
        if a.scale != 1.0 {
            w.insert(format!("lora.{}.scale", a.target), Tensor::scalar(a.scale));
        }
    }
    w
}

/// Folds adapters into the matching projections of a raw weight file.
pub fn merge_weight_files(base: &WeightFile, adapters: &[LoraAdapter]) -> Result<WeightFile> {
    let mut merged = base.clone();
    for adapter in adapters {
        if !is_adaptable(&adapter.target) {
            return Err(Error::UnknownWeight(adapter.target.clone()));
        }
        let tensor = merged
            .get_mut(&adapter.target)
            .ok_or_else(|| Error::UnknownWeight(adapter.target.clone()))?;
        let mut w = tensor.to_matrix()?;
        if w.rows() != w.cols() {
            return Err(Error::Dimension(format!(
                "`{}` is {:?}, expected a square projection",
                adapter.target,
                w.shape()
            )));
        }
        adapter.check_shape(w.rows())?;
        w.add_scaled(&adapter.delta(), 1.0);
        *tensor = Tensor::from_matrix(&w);
    }
    Ok(merged)
}
