use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::GroupKey;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityStat {
    pub mu: f64,
    /// Population standard deviation.
    pub sigma: f64,
    /// `sigma / mu`; absent when `mu` is not positive.
    pub cv: Option<f64>,
    pub n: usize,
}

impl SensitivityStat {
    pub fn is_sensitive(&self) -> bool {
        self.cv.is_some_and(|cv| cv > 1.0)
    }
}

pub fn population_stats(values: &[f64]) -> SensitivityStat {
    let n = values.len();
    let mu = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64;
    let sigma = var.sqrt();
    SensitivityStat {
        mu,
        sigma,
        cv: (mu > 0.0).then(|| sigma / mu),
        n,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PsResult {
    /// Percentage of eligible groups with CV > 1; `None` when no group qualifies.
    pub percent: Option<f64>,
    pub groups: usize,
    pub sensitive: usize,
    /// Singleton groups, excluded from the percentage.
    pub degenerate: usize,
    #[serde(skip)]
    pub stats: BTreeMap<GroupKey, SensitivityStat>,
}

pub fn parameter_sensitivity(scores: &[(GroupKey, f64)]) -> PsResult {
    let mut groups: BTreeMap<&GroupKey, Vec<f64>> = BTreeMap::new();
    for (k, v) in scores {
        groups.entry(k).or_default().push(*v);
    }
    let mut out = PsResult::default();
    for (k, values) in groups {
        if values.len() < 2 {
            out.degenerate += 1;
            continue;
        }
        let stat = population_stats(&values);
        out.groups += 1;
        out.sensitive += usize::from(stat.is_sensitive());
        out.stats.insert(k.clone(), stat);
    }
    if out.groups > 0 {
        out.percent = Some(100.0 * out.sensitive as f64 / out.groups as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key(scene: &str, o: i32) -> GroupKey {
        GroupKey {
            scene_id: scene.into(),
            ev_offset: o,
            lux: None,
        }
    }

    #[test]
    fn textbook_groups() {
        let s = population_stats(&[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(s.cv, Some(0.0));
        let s = population_stats(&[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.mu, 0.25);
        assert!((s.sigma - 0.75f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((s.cv.unwrap() - 3f64.sqrt()).abs() < 1e-12);
        assert!(s.is_sensitive());
        let z = population_stats(&[0.0, 0.0]);
        assert_eq!(z.cv, None);
        assert!(!z.is_sensitive());
    }

    #[test]
    fn counts_groups() {
        let scores = vec![
            (key("a", 0), 1.0),
            (key("a", 0), 0.0),
            (key("a", 0), 0.0),
            (key("a", 1), 1.0),
            (key("a", 1), 1.0),
            (key("b", 0), 0.0),
            (key("b", 0), 0.0),
            (key("c", 0), 1.0),
        ];
        let ps = parameter_sensitivity(&scores);
        assert_eq!((ps.groups, ps.sensitive, ps.degenerate), (3, 1, 1));
        assert!((ps.percent.unwrap() - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(parameter_sensitivity(&[]).percent, None);
    }

    proptest! {
        #[test]
        fn scale_invariant(values in proptest::collection::vec(0.01f64..10.0, 2..8), c in 0.1f64..100.0) {
            let a = population_stats(&values);
            let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
            let b = population_stats(&scaled);
            prop_assert!((a.cv.unwrap() - b.cv.unwrap()).abs() < 1e-9);
        }
    }
}
