use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FORMAT: &str = "twistbeam-linucb";
const VERSION: u32 = 1;

/// Ridge-regression statistics of one arm: `a = I + sum x x^T`,
/// `b = sum r x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub beam_size: usize,
    /// Row-major `d x d`.
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub b_vec: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinUcbState {
    d: usize,
    ucb_alpha: f64,
    arms: Vec<ArmState>,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    format: String,
    version: u32,
    d: usize,
    ucb_alpha: f64,
    arms: Vec<ArmState>,
}

struct Estimate {
    theta: DVector<f64>,
    a_inv_x: DVector<f64>,
}

impl ArmState {
    fn fresh(beam_size: usize, d: usize) -> Self {
        ArmState {
            beam_size,
            a: DMatrix::<f64>::identity(d, d)
                .transpose()
                .as_slice()
                .to_vec(),
            b_vec: vec![0.0; d],
        }
    }

    fn matrix(&self, d: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(d, d, &self.a)
    }

    fn estimate(&self, d: usize, x: &DVector<f64>, arm: usize) -> Result<Estimate> {
        let chol = self
            .matrix(d)
            .cholesky()
            .ok_or(Error::SingularMatrix { arm })?;
        Ok(Estimate {
            theta: chol.solve(&DVector::from_column_slice(&self.b_vec)),
            a_inv_x: chol.solve(x),
        })
    }
}

impl LinUcbState {
    pub fn new(beam_sizes: &[usize], d: usize, ucb_alpha: f64) -> Result<Self> {
        let state = LinUcbState {
            d,
            ucb_alpha,
            arms: beam_sizes.iter().map(|&b| ArmState::fresh(b, d)).collect(),
        };
        state.validate()?;
        Ok(state)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.d == 0 {
            return bad("context dimension must be >= 1".into());
        }
        if !(self.ucb_alpha.is_finite() && self.ucb_alpha >= 0.0) {
            return bad(format!(
                "ucb_alpha must be finite and >= 0, got {}",
                self.ucb_alpha
            ));
        }
        if self.arms.is_empty() {
            return bad("at least one arm is required".into());
        }
        if self
            .arms
            .windows(2)
            .any(|w| w[0].beam_size >= w[1].beam_size)
            || self.arms[0].beam_size == 0
        {
            return bad("beam sizes must be positive and strictly increasing".into());
        }
        for (i, arm) in self.arms.iter().enumerate() {
            if Some(arm.a.len()) != self.d.checked_mul(self.d) || arm.b_vec.len() != self.d {
                return bad(format!("arm {i} has wrong dimensions"));
            }
            if arm.a.iter().chain(&arm.b_vec).any(|v| !v.is_finite()) {
                return bad(format!("arm {i} has non-finite statistics"));
            }
            let m = arm.matrix(self.d);
            if m != m.transpose() {
                return bad(format!("arm {i} design matrix is not symmetric"));
            }
            if m.cholesky().is_none() {
                return Err(Error::SingularMatrix { arm: i });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn ucb_alpha(&self) -> f64 {
        self.ucb_alpha
    }

    pub fn arms(&self) -> &[ArmState] {
        &self.arms
    }

    pub fn beam_sizes(&self) -> Vec<usize> {
        self.arms.iter().map(|a| a.beam_size).collect()
    }

    fn check_context(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.d || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "context must be {} finite values, got {:?}",
                self.d, x
            )));
        }
        Ok(DVector::from_column_slice(x))
    }

    /// Upper confidence bound of every arm for context `x`.
    pub fn ucb_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let x = self.check_context(x)?;
        self.arms
            .iter()
            .enumerate()
            .map(|(i, arm)| {
                let est = arm.estimate(self.d, &x, i)?;
                let width = x.dot(&est.a_inv_x).max(0.0).sqrt();
                Ok(est.theta.dot(&x) + self.ucb_alpha * width)
            })
            .collect()
    }

    /// Ridge estimate `A^-1 b` of one arm.
    pub fn theta(&self, arm: usize) -> Result<Vec<f64>> {
        let state = self.arm(arm)?;
        let zero = DVector::zeros(self.d);
        Ok(state
            .estimate(self.d, &zero, arm)?
            .theta
            .as_slice()
            .to_vec())
    }

    fn arm(&self, arm: usize) -> Result<&ArmState> {
        self.arms
            .get(arm)
            .ok_or_else(|| Error::Invalid(format!("arm index {arm} out of range")))
    }

    /// Index of the arm with the highest UCB; ties go to the smaller beam.
    pub fn select_arm(&self, x: &[f64]) -> Result<usize> {
        let scores = self.ucb_scores(x)?;
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = i;
            }
        }
        Ok(best)
    }

    pub fn update_arm(&mut self, arm: usize, x: &[f64], reward: f64) -> Result<()> {
        self.arm(arm)?;
        self.check_context(x)?;
        if !reward.is_finite() {
            return Err(Error::Invalid(format!(
                "reward must be finite, got {reward}"
            )));
        }
        let d = self.d;
        let state = &mut self.arms[arm];
        for i in 0..d {
            for j in 0..d {
                state.a[i * d + j] += x[i] * x[j];
            }
            state.b_vec[i] += reward * x[i];
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&StateFile {
            format: FORMAT.into(),
            version: VERSION,
            d: self.d,
            ucb_alpha: self.ucb_alpha,
            arms: self.arms.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: StateFile = serde_json::from_str(text)?;
        if f.format != FORMAT || f.version != VERSION {
            return Err(Error::Invalid(format!(
                "unsupported bandit format {} v{}",
                f.format, f.version
            )));
        }
        let state = LinUcbState {
            d: f.d,
            ucb_alpha: f.ucb_alpha,
            arms: f.arms,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
