use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::EmotionSet;
use crate::model::ActionVector;
use crate::{Error, Result};

/// An ordered list of action vectors, one per output frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ActionVector>", into = "Vec<ActionVector>")]
pub struct ActionSchedule {
    steps: Vec<ActionVector>,
}

impl TryFrom<Vec<ActionVector>> for ActionSchedule {
    type Error = Error;

    fn try_from(steps: Vec<ActionVector>) -> Result<Self> {
        Self::new(steps)
    }
}

impl From<ActionSchedule> for Vec<ActionVector> {
    fn from(s: ActionSchedule) -> Self {
        s.steps
    }
}

impl ActionSchedule {
    pub fn new(steps: Vec<ActionVector>) -> Result<Self> {
        let first = steps.first().ok_or_else(|| Error::Schedule("empty schedule".into()))?;
        if first.is_empty() {
            return Err(Error::Schedule("action vectors need at least one entry".into()));
        }
        if let Some(bad) = steps.iter().position(|s| s.len() != first.len()) {
            return Err(Error::Schedule(format!(
                "step {} has {} entries, expected {}",
                bad + 1,
                steps[bad].len(),
                first.len()
            )));
        }
        Ok(Self { steps })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows.into_iter().map(ActionVector::new).collect::<Result<_>>()?)
    }

    pub fn steps(&self) -> &[ActionVector] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Number of entries per vector.
    pub fn width(&self) -> usize {
        self.steps[0].len()
    }

    /// Degrees of entry `index` (0-based) across the schedule.
    pub fn column(&self, index: usize) -> Vec<f64> {
        self.steps.iter().map(|s| s.values()[index]).collect()
    }

    /// One line per frame, comma-separated degrees in emotion order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            let line: Vec<String> = s.values().iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Schedule(format!("line {}: bad degree {:?}", i + 1, v.trim())))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Fails unless every vector has one entry per emotion of the model.
    pub fn check_width(&self, n_emotions: usize) -> Result<()> {
        if self.width() != n_emotions {
            return Err(Error::Schedule(format!(
                "schedule has {} entries per step, model has {n_emotions} emotions",
                self.width()
            )));
        }
        Ok(())
    }
}

fn one_hot_schedule(emotions: &EmotionSet, name: &str, degrees: impl Iterator<Item = f64>) -> Result<ActionSchedule> {
    let label = emotions.get(name)?;
    ActionSchedule::new(
        degrees
            .map(|d| ActionVector::one_hot(emotions.len(), label.index, d))
            .collect::<Result<_>>()?,
    )
}

/// Degrees `k / count` for `k = 1..=count` on one emotion.
pub fn linear_schedule(emotions: &EmotionSet, emotion: &str, count: usize) -> Result<ActionSchedule> {
    if count < 1 {
        return Err(Error::Schedule("linear schedule needs count ≥ 1".into()));
    }
    one_hot_schedule(emotions, emotion, (1..=count).map(|k| k as f64 / count as f64))
}

/// Degrees rising from 0 to 1 and back to 0, symmetric about the middle.
pub fn unimodal_schedule(emotions: &EmotionSet, emotion: &str, count: usize) -> Result<ActionSchedule> {
    if count < 3 {
        return Err(Error::Schedule("unimodal schedule needs count ≥ 3".into()));
    }
    let half = ((count - 1) / 2) as f64;
    one_hot_schedule(
        emotions,
        emotion,
        (0..count).map(|i| i.min(count - 1 - i) as f64 / half),
    )
}

/// `from` ramps 1 to 0 while `to` ramps 0 to 1.
pub fn transfer_schedule(emotions: &EmotionSet, from: &str, to: &str, count: usize) -> Result<ActionSchedule> {
    if count < 2 {
        return Err(Error::Schedule("transfer schedule needs count ≥ 2".into()));
    }
    let a = emotions.get(from)?;
    let b = emotions.get(to)?;
    if a.index == b.index {
        return Err(Error::Schedule(format!("transfer needs two different emotions, got {from} twice")));
    }
    let steps = (0..count)
        .map(|k| {
            let t = k as f64 / (count - 1) as f64;
            let mut v = vec![0.0; emotions.len()];
            v[a.index - 1] = 1.0 - t;
            v[b.index - 1] = t;
            ActionVector::new(v)
        })
        .collect::<Result<_>>()?;
    ActionSchedule::new(steps)
}

/// A schedule given either explicitly or through one of the builders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScheduleSpec {
    Linear { emotion: String, count: usize },
    Unimodal { emotion: String, count: usize },
    Transfer { from: String, to: String, count: usize },
    Explicit { steps: Vec<Vec<f64>> },
}

impl ScheduleSpec {
    /// Parses builder arguments: `happy:10` for `linear`/`unimodal`,
    /// `angry:happy:10` for `transfer`.
    pub fn parse_builder(kind: &str, arg: &str) -> Result<Self> {
        let parts: Vec<&str> = arg.split(':').collect();
        let count = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Schedule(format!("bad frame count {s:?} in {arg:?}")))
        };
        match (kind, parts.as_slice()) {
            ("linear", [e, n]) => Ok(Self::Linear {
                emotion: e.to_string(),
                count: count(n)?,
            }),
            ("unimodal", [e, n]) => Ok(Self::Unimodal {
                emotion: e.to_string(),
                count: count(n)?,
            }),
            ("transfer", [f, t, n]) => Ok(Self::Transfer {
                from: f.to_string(),
                to: t.to_string(),
                count: count(n)?,
            }),
            ("linear" | "unimodal", _) => Err(Error::Schedule(format!("expected EMOTION:COUNT, got {arg:?}"))),
            ("transfer", _) => Err(Error::Schedule(format!("expected FROM:TO:COUNT, got {arg:?}"))),
            _ => Err(Error::Schedule(format!("unknown schedule builder {kind:?}"))),
        }
    }

    pub fn build(&self, emotions: &EmotionSet) -> Result<ActionSchedule> {
        let schedule = match self {
            Self::Linear { emotion, count } => linear_schedule(emotions, emotion, *count)?,
            Self::Unimodal { emotion, count } => unimodal_schedule(emotions, emotion, *count)?,
            Self::Transfer { from, to, count } => transfer_schedule(emotions, from, to, *count)?,
            Self::Explicit { steps } => ActionSchedule::from_rows(steps.clone())?,
        };
        schedule.check_width(emotions.len())?;
        Ok(schedule)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set() -> EmotionSet {
        EmotionSet::new(["angry", "happy", "sad"]).unwrap()
    }

    #[test]
    fn linear_values() {
        let s = linear_schedule(&set(), "happy", 10).unwrap();
        let want = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
        assert_eq!(s.column(1), want);
        assert!(s.column(0).iter().chain(&s.column(2)).all(|&v| v == 0.0));
        assert_eq!(linear_schedule(&set(), "happy", 1).unwrap().column(1), [1.0]);
        assert!(linear_schedule(&set(), "happy", 0).is_err());
        assert!(linear_schedule(&set(), "bored", 3).is_err());
    }

    #[test]
    fn unimodal_values() {
        let s = unimodal_schedule(&set(), "happy", 21).unwrap().column(1);
        let want: Vec<f64> = (0..=10).chain((0..10).rev()).map(|k| k as f64 / 10.0).collect();
        assert_eq!(s, want);
        assert_eq!(s[0], 0.0);
        assert_eq!(s[20], 0.0);
        assert_eq!(s.iter().cloned().fold(0.0, f64::max), 1.0);
        assert_eq!(unimodal_schedule(&set(), "happy", 3).unwrap().column(1), [0.0, 1.0, 0.0]);
        assert!(unimodal_schedule(&set(), "happy", 2).is_err());
    }

    #[test]
    fn transfer_values() {
        let s = transfer_schedule(&set(), "angry", "happy", 3).unwrap();
        assert_eq!(s.column(0), [1.0, 0.5, 0.0]);
        assert_eq!(s.column(1), [0.0, 0.5, 1.0]);
        assert!(s.steps()[0].is_one_hot() && s.steps()[2].is_one_hot());
        assert!(transfer_schedule(&set(), "angry", "angry", 3).is_err());
        assert!(transfer_schedule(&set(), "angry", "bored", 3).is_err());
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let s = transfer_schedule(&set(), "sad", "happy", 7).unwrap();
        let text = s.to_text();
        let back = ActionSchedule::parse(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_text(), text);
        assert!(ActionSchedule::parse("0.5,1.2\n").is_err());
        assert!(ActionSchedule::parse("0.5,0.2\n0.1\n").is_err());
        assert!(ActionSchedule::parse("\n").is_err());
    }

    #[test]
    fn builder_specs() {
        let e = set();
        let spec = ScheduleSpec::parse_builder("transfer", "angry:happy:10").unwrap();
        assert_eq!(spec.build(&e).unwrap().len(), 10);
        assert_eq!(
            ScheduleSpec::parse_builder("linear", "happy:10").unwrap(),
            ScheduleSpec::Linear {
                emotion: "happy".into(),
                count: 10
            }
        );
        assert!(ScheduleSpec::parse_builder("linear", "happy").is_err());
        assert!(ScheduleSpec::parse_builder("spiral", "happy:3").is_err());
        let json = r#"{"kind":"explicit","steps":[[0,0,0],[0,1,0]]}"#;
        let spec: ScheduleSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.build(&e).unwrap().len(), 2);
        let narrow = ScheduleSpec::Explicit { steps: vec![vec![0.0]] };
        assert!(narrow.build(&e).is_err());
    }
}
