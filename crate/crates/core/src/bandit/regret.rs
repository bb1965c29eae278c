use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LinUcbState;
use crate::error::{Error, Result};

/// One decoding step recorded with the payoff every arm would have earned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub context: Vec<f64>,
    /// Beam size -> payoff.
    pub payoffs: BTreeMap<usize, f64>,
    /// Beam size actually used when recording.
    pub chosen: usize,
}

impl EpisodeStep {
    fn payoff(&self, step: usize, beam_size: usize) -> Result<f64> {
        self.payoffs
            .get(&beam_size)
            .copied()
            .ok_or(Error::MissingArmPayoff { step, beam_size })
    }

    fn best(&self, step: usize, arms: &[usize]) -> Result<f64> {
        arms.iter()
            .map(|&b| self.payoff(step, b))
            .try_fold(f64::NEG_INFINITY, |acc, p| Ok(acc.max(p?)))
    }
}

/// Cumulative regret of `policy`, which maps each step to a beam size.
pub fn offline_regret<F>(steps: &[EpisodeStep], arms: &[usize], mut policy: F) -> Result<f64>
where
    F: FnMut(usize, &EpisodeStep) -> Result<usize>,
{
    if arms.is_empty() {
        return Err(Error::Invalid("no arms to compare against".into()));
    }
    let mut total = 0.0;
    for (i, step) in steps.iter().enumerate() {
        let best = step.best(i, arms)?;
        let pick = policy(i, step)?;
        if !arms.contains(&pick) {
            return Err(Error::Invalid(format!(
                "policy chose unknown beam size {pick}"
            )));
        }
        total += best - step.payoff(i, pick)?;
    }
    Ok(total)
}

/// Regret of the choices stored in the episode itself.
pub fn recorded_regret(steps: &[EpisodeStep], arms: &[usize]) -> Result<f64> {
    offline_regret(steps, arms, |_, s| Ok(s.chosen))
}

/// Replays LinUCB over the recorded contexts. With `learn`, the replayed
/// policy is updated with the payoff of the arm it picked.
pub fn replay_regret(steps: &[EpisodeStep], state: &mut LinUcbState, learn: bool) -> Result<f64> {
    let arms = state.beam_sizes();
    offline_regret(steps, &arms.clone(), |i, step| {
        let arm = state.select_arm(&step.context)?;
        let beam = arms[arm];
        if learn {
            state.update_arm(arm, &step.context, step.payoff(i, beam)?)?;
        }
        Ok(beam)
    })
}

pub fn parse_episodes(text: &str) -> Result<Vec<EpisodeStep>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let step: EpisodeStep = serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if step
                .context
                .iter()
                .chain(step.payoffs.values())
                .any(|v| !v.is_finite())
            {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "non-finite value".into(),
                });
            }
            Ok(step)
        })
        .collect()
}

pub fn write_episodes(steps: &[EpisodeStep], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for s in steps {
        out.push_str(&serde_json::to_string(s)?);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    const ARMS: [usize; 3] = [10, 30, 60];

    fn step(p10: f64, p30: f64, p60: f64, chosen: usize) -> EpisodeStep {
        EpisodeStep {
            context: vec![0.0, 0.5, 0.0, 0.0, 1.0],
            payoffs: [(10, p10), (30, p30), (60, p60)].into_iter().collect(),
            chosen,
        }
    }

    fn argmax(s: &EpisodeStep) -> usize {
        let mut best = ARMS[0];
        for &b in &ARMS {
            if s.payoffs[&b] > s.payoffs[&best] {
                best = b;
            }
        }
        best
    }

    #[test]
    fn optimal_policy_has_zero_regret() {
        let steps = vec![
            step(0.3, 0.5, 0.4, 10),
            step(0.9, 0.1, 0.2, 60),
            step(-0.1, -0.2, 0.0, 30),
        ];
        let r = offline_regret(&steps, &ARMS, |_, s| Ok(argmax(s))).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn single_step_regret() {
        let steps = vec![step(0.3, 0.5, 0.4, 10)];
        let r = recorded_regret(&steps, &ARMS).unwrap();
        assert!((r - 0.2).abs() < 1e-12);
    }

    #[test]
    fn uniform_random_expected_regret() {
        let steps = vec![step(0.3, 0.5, 0.4, 10)];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                offline_regret(&steps, &ARMS, |_, _| Ok(ARMS[rng.random_range(0..3)])).unwrap()
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sigma = (var / n as f64).sqrt();
        assert!(
            (mean - 0.1).abs() < 3.0 * sigma,
            "mean {mean} sigma {sigma}"
        );
    }

    #[test]
    fn missing_payoff_is_error() {
        let mut s = step(0.3, 0.5, 0.4, 10);
        s.payoffs.remove(&60);
        assert!(matches!(
            recorded_regret(&[s], &ARMS),
            Err(Error::MissingArmPayoff {
                step: 0,
                beam_size: 60
            })
        ));
    }

    #[test]
    fn replay_is_nonnegative() {
        let steps: Vec<_> = (0..50)
            .map(|i| {
                let f = i as f64 / 50.0;
                step(f, 1.0 - f, 0.5, 10)
            })
            .collect();
        let mut state = LinUcbState::new(&ARMS, 5, 1.0).unwrap();
        assert!(replay_regret(&steps, &mut state, true).unwrap() >= 0.0);
    }

    #[test]
    fn jsonl_round_trip() {
        let steps = vec![step(0.3, 0.5, 0.4, 10), step(0.1, 0.2, 0.3, 60)];
        let text: String = steps
            .iter()
            .map(|s| serde_json::to_string(s).unwrap() + "\n")
            .collect();
        assert!(text.contains(r#""payoffs":{"10":0.3,"30":0.5,"60":0.4}"#));
        assert_eq!(parse_episodes(&text).unwrap(), steps);
        assert!(matches!(
            parse_episodes("{}\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
