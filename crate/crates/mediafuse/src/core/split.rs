use std::collections::BTreeMap;

use super::{CoreError, DatasetSplit, Outlet, Result, Task};
use crate::numkit::Rng;

/// A class too small to stratify reliably; its members were still placed,
/// train-first, by the quota rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratificationWarning {
    pub class_index: usize,
    pub members: usize,
}

#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub split: DatasetSplit,
    pub warnings: Vec<StratificationWarning>,
}

/// Stratified train/dev/test split over labeled outlets.
///
/// Per class: exact quotas `n_c * ratio` are floored, and the leftover units
/// go one at a time to the split with the largest accumulated fractional
/// shortfall across the classes processed so far (ties broken in
/// train, dev, test order). Every class therefore deviates from its exact
/// proportion by less than one outlet, and the totals track the ratios.
/// Within a class, membership is a seeded shuffle of the lexicographically
/// sorted domains. Deterministic for a fixed seed.
pub fn stratified_split(
    outlets: &[Outlet],
    ratios: (f64, f64, f64),
    seed: u64,
    task: Task,
) -> Result<SplitOutcome> {
    let r = [ratios.0, ratios.1, ratios.2];
    if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 || r.iter().any(|&x| x < 0.0) {
        return Err(CoreError::BadRatios(r));
    }

    let mut by_class: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for o in outlets {
        let label = o.label(task).ok_or_else(|| CoreError::MissingLabel(o.domain.clone()))?;
        by_class.entry(label).or_default().push(&o.domain);
    }

    let mut warnings = Vec::new();
    let mut out: [Vec<String>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    // fractional quota owed to each split minus units already granted
    let mut shortfall = [0.0_f64; 3];
    let mut rng = Rng::new(seed);

    for (&class_index, members) in &by_class {
        let n = members.len();
        if n < 3 {
            warnings.push(StratificationWarning { class_index, members: n });
        }
        let mut counts = [0usize; 3];
        let mut floored = 0;
        for s in 0..3 {
            let quota = n as f64 * r[s];
            counts[s] = quota.floor() as usize;
            shortfall[s] += quota - quota.floor();
            floored += counts[s];
        }
        for _ in floored..n {
            let mut best = 0;
            for s in 1..3 {
                if shortfall[s] > shortfall[best] + 1e-12 {
                    best = s;
                }
            }
            counts[best] += 1;
            shortfall[best] -= 1.0;
        }

        let mut pool: Vec<&str> = members.clone();
        pool.sort_unstable();
        rng.shuffle(&mut pool);
        let mut it = pool.into_iter();
        for s in 0..3 {
            for _ in 0..counts[s] {
                out[s].push(it.next().expect("quota sums to class size").to_string());
            }
        }
    }

    let [mut train, mut dev, mut test] = out;
    train.sort_unstable();
    dev.sort_unstable();
    test.sort_unstable();
    Ok(SplitOutcome { split: DatasetSplit { train, dev, test }, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outlets_with_bias(counts: &[usize]) -> Vec<Outlet> {
        let mut v = Vec::new();
        for (class, &n) in counts.iter().enumerate() {
            for i in 0..n {
                v.push(Outlet {
                    domain: format!("c{class}n{i:04}.com"),
                    bias: Some(class),
                    factuality: None,
                });
            }
        }
        v
    }

    #[test]
    fn two_classes_of_five_give_8_1_1() {
        let outlets = outlets_with_bias(&[5, 5]);
        let got = stratified_split(&outlets, (0.8, 0.1, 0.1), 42, Task::Bias).unwrap();
        assert_eq!(got.split.train.len(), 8);
        assert_eq!(got.split.dev.len(), 1);
        assert_eq!(got.split.test.len(), 1);
        // each class contributes exactly 4 to train
        for class in 0..2 {
            let prefix = format!("c{class}");
            let in_train =
                got.split.train.iter().filter(|d| d.starts_with(&prefix)).count();
            assert_eq!(in_train, 4);
        }
    }

    #[test]
    fn acl2020_bias_distribution_stays_within_one_of_proportion() {
        let outlets = outlets_with_bias(&[152, 178, 145]);
        let got = stratified_split(&outlets, (0.8, 0.1, 0.1), 7, Task::Bias).unwrap();
        let split = &got.split;
        assert_eq!(split.train.len() + split.dev.len() + split.test.len(), 475);
        for (class, &n) in [152usize, 178, 145].iter().enumerate() {
            let prefix = format!("c{class}");
            for (part, ratio) in
                [(&split.train, 0.8), (&split.dev, 0.1), (&split.test, 0.1)]
            {
                let count = part.iter().filter(|d| d.starts_with(&prefix)).count() as f64;
                let exact = n as f64 * ratio;
                assert!(
                    (count - exact).abs() <= 1.0 + 1e-9,
                    "class {class}: count {count} vs exact {exact}"
                );
            }
        }
    }

    #[test]
    fn same_seed_twice_is_identical() {
        let outlets = outlets_with_bias(&[13, 29, 8]);
        let a = stratified_split(&outlets, (0.8, 0.1, 0.1), 99, Task::Bias).unwrap();
        let b = stratified_split(&outlets, (0.8, 0.1, 0.1), 99, Task::Bias).unwrap();
        assert_eq!(a.split, b.split);
    }

    #[test]
    fn splits_are_disjoint_and_exhaustive() {
        let outlets = outlets_with_bias(&[11, 4, 23]);
        let got = stratified_split(&outlets, (0.8, 0.1, 0.1), 3, Task::Bias).unwrap().split;
        let mut all: Vec<&String> =
            got.train.iter().chain(&got.dev).chain(&got.test).collect();
        all.sort_unstable();
        let before = all.len();
        all.dedup();
        assert_eq!(all.len(), before, "overlap between splits");
        assert_eq!(before, outlets.len());
    }

    #[test]
    fn tiny_class_warns_and_lands_in_train() {
        let outlets = outlets_with_bias(&[2, 20]);
        let got = stratified_split(&outlets, (0.8, 0.1, 0.1), 1, Task::Bias).unwrap();
        assert_eq!(got.warnings, vec![StratificationWarning { class_index: 0, members: 2 }]);
        let in_train = got.split.train.iter().filter(|d| d.starts_with("c0")).count();
        assert!(in_train >= 1);
    }

    #[test]
    fn missing_label_is_an_error() {
        let outlets = vec![Outlet { domain: "a.com".into(), bias: None, factuality: None }];
        assert!(stratified_split(&outlets, (0.8, 0.1, 0.1), 1, Task::Bias).is_err());
    }

    #[test]
    fn bad_ratios_are_rejected() {
        let outlets = outlets_with_bias(&[5]);
        assert!(stratified_split(&outlets, (0.8, 0.1, 0.2), 1, Task::Bias).is_err());
    }
}
