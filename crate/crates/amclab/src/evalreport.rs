//! Cross-policy evaluation over one frozen test split, plus the CSV and
//! structured-text reports the CLI emits.

use std::io::Write;
use std::path::Path;

use crate::datastore::Dataset;
use crate::models::{Policy, Sample};
use crate::phy::{McsTable, N_CLASSES};
use crate::{Error, Result};

/// Accuracy, confusion counts, and per-scenario breakdown for one policy.
#[derive(Debug, Clone)]
pub struct PolicyResult {
    pub name: String,
    /// Exactly confusion trace / total.
    pub accuracy: f64,
    pub n: usize,
    /// Rows are true classes, columns predicted classes (class units, 0..15).
    pub confusion: Vec<[u64; N_CLASSES]>,
    /// (scenario tag, accuracy, samples) in tag order.
    pub per_scenario: Vec<(u16, f64, usize)>,
}

/// Every policy scored against the identical sample set.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    /// Checksum of the serialized test split all policies saw.
    pub dataset_checksum: u64,
    pub policies: Vec<PolicyResult>,
}

impl ComparisonReport {
    pub fn policy(&self, name: &str) -> Option<&PolicyResult> {
        self.policies.iter().find(|p| p.name == name)
    }
}

/// Score each policy on the same test split. Predictions outside the scheme
/// table are data errors; everything else is counted, never dropped.
pub fn compare_policies(policies: &[&dyn Policy], test: &Dataset) -> Result<ComparisonReport> {
    if test.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty split".into()));
    }
    let checksum = test.checksum()?;
    let mut results = Vec::with_capacity(policies.len());
    for &policy in policies {
        results.push(score_policy(policy, test)?);
    }
    Ok(ComparisonReport { dataset_checksum: checksum, policies: results })
}

fn score_policy(policy: &dyn Policy, test: &Dataset) -> Result<PolicyResult> {
    let mut confusion = vec![[0u64; N_CLASSES]; N_CLASSES];
    let mut per_tag: std::collections::BTreeMap<u16, (u64, u64)> = test
        .manifest
        .scenarios
        .iter()
        .map(|s| (s.tag, (0, 0)))
        .collect();
    for sample in &test.samples {
        let pred = policy.choose(sample)?;
        let pred_class = McsTable::class_of(pred) as usize;
        let true_class = sample.y as usize;
        confusion[true_class][pred_class] += 1;
        let (hits, total) = per_tag.entry(sample.scenario).or_insert((0, 0));
        *total += 1;
        if pred_class == true_class {
            *hits += 1;
        }
    }
    let total: u64 = confusion.iter().map(|r| r.iter().sum::<u64>()).sum();
    let trace: u64 = (0..N_CLASSES).map(|c| confusion[c][c]).sum();
    let per_scenario = per_tag
        .into_iter()
        .filter(|&(_, (_, n))| n > 0)
        .map(|(tag, (hits, n))| (tag, hits as f64 / n as f64, n as usize))
        .collect();
    Ok(PolicyResult {
        name: policy.name().to_string(),
        accuracy: trace as f64 / total as f64,
        n: total as usize,
        confusion,
        per_scenario,
    })
}

/// Accuracy gap between the recurrent model and its convolution-only ablation.
pub fn lstm_ablation_delta(report: &ComparisonReport) -> Result<f64> {
    let full = report
        .policy("cnn_lstm")
        .ok_or_else(|| Error::Data("report lacks a cnn_lstm entry".into()))?;
    let ablated = report
        .policy("cnn_only")
        .ok_or_else(|| Error::Data("report lacks a cnn_only entry".into()))?;
    Ok(full.accuracy - ablated.accuracy)
}

/// Wilson 95% score interval for k successes in n trials.
pub fn binomial_ci95(successes: usize, n: usize) -> (f64, f64) {
    assert!(n > 0 && successes <= n, "need 0 <= successes <= n, n > 0");
    let z = 1.959963984540054f64;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

pub fn write_comparison_csv<W: Write>(w: &mut W, report: &ComparisonReport) -> Result<()> {
    writeln!(w, "policy,accuracy,n")?;
    for p in &report.policies {
        writeln!(w, "{},{},{}", p.name, p.accuracy, p.n)?;
    }
    Ok(())
}

/// 15x15 counts; first column is the true scheme index, headers the predicted.
pub fn write_confusion_csv<W: Write>(w: &mut W, result: &PolicyResult) -> Result<()> {
    let mut header = String::from("true");
    for c in 0..N_CLASSES {
        header.push_str(&format!(",{}", McsTable::index_of(c)));
    }
    writeln!(w, "{header}")?;
    for (c, row) in result.confusion.iter().enumerate() {
        let mut line = format!("{}", McsTable::index_of(c));
        for &count in row {
            line.push_str(&format!(",{count}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Human-readable summary mirroring the CSV contents.
pub fn write_report_text<W: Write>(w: &mut W, report: &ComparisonReport) -> Result<()> {
    writeln!(w, "test split checksum: {:016x}", report.dataset_checksum)?;
    writeln!(w, "policies: {}", report.policies.len())?;
    for p in &report.policies {
        let hits = (p.accuracy * p.n as f64).round() as usize;
        let (lo, hi) = binomial_ci95(hits, p.n);
        writeln!(
            w,
            "{}: accuracy {:.4} ({hits}/{}), 95% CI [{lo:.4}, {hi:.4}]",
            p.name, p.accuracy, p.n
        )?;
        for &(tag, acc, n) in &p.per_scenario {
            writeln!(w, "  scenario {tag}: {acc:.4} (n={n})")?;
        }
    }
    Ok(())
}

/// Emit comparison.csv, per-policy confusion_<name>.csv, and report.txt
/// into `dir`.
pub fn emit_report_files(dir: &Path, report: &ComparisonReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("comparison.csv"))?);
    write_comparison_csv(&mut f, report)?;
    for p in &report.policies {
        let path = dir.join(format!("confusion_{}.csv", p.name));
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_confusion_csv(&mut f, p)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("report.txt"))?);
    write_report_text(&mut f, report)?;
    Ok(())
}

/// Replays the stored per-sample label; scores 1.0 by construction and pins
/// the evaluation plumbing in tests.
pub struct OraclePolicy;

impl Policy for OraclePolicy {
    fn name(&self) -> &str {
        "oracle"
    }

    fn choose(&self, sample: &Sample) -> Result<u8> {
        Ok(McsTable::index_of(sample.y as usize))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datastore::{generate_dataset, CatalogEntry};
    use crate::channel::ScenarioConfig;
    use crate::phy::LinkConfig;
    use crate::rng::{tag, Stream};

    fn small_dataset() -> Dataset {
        let catalog = vec![
            CatalogEntry {
                cfg: ScenarioConfig { n_bs: 8, n_ue: 4, master_seed: 31, ..ScenarioConfig::default() },
                frames: 20,
            },
            CatalogEntry {
                cfg: ScenarioConfig { n_bs: 8, n_ue: 4, master_seed: 32, ..ScenarioConfig::default() },
                frames: 20,
            },
        ];
        generate_dataset(&catalog, &LinkConfig::default(), 3).unwrap()
    }

    struct RandomPolicy {
        rng: std::cell::RefCell<Stream>,
    }

    impl Policy for RandomPolicy {
        fn name(&self) -> &str {
            "random"
        }

        fn choose(&self, _sample: &Sample) -> Result<u8> {
            let c = self.rng.borrow_mut().below(N_CLASSES as u64) as usize;
            Ok(McsTable::index_of(c))
        }
    }

    struct ConstantPolicy(u8);

    impl Policy for ConstantPolicy {
        fn name(&self) -> &str {
            "constant"
        }

        fn choose(&self, _sample: &Sample) -> Result<u8> {
            Ok(self.0)
        }
    }

    #[test]
    fn oracle_policy_scores_exactly_one() {
        let ds = small_dataset();
        let report = compare_policies(&[&OraclePolicy], &ds).unwrap();
        let p = report.policy("oracle").unwrap();
        assert_eq!(p.accuracy, 1.0);
        assert_eq!(p.n, ds.len());
        for &(_, acc, _) in &p.per_scenario {
            assert_eq!(acc, 1.0);
        }
    }

    #[test]
    fn uniform_random_policy_lands_near_one_fifteenth() {
        let ds = small_dataset();
        let policy = RandomPolicy {
            rng: std::cell::RefCell::new(Stream::new(99, &[tag::MONTE_CARLO])),
        };
        let report = compare_policies(&[&policy], &ds).unwrap();
        let p = report.policy("random").unwrap();
        let n = p.n as f64;
        let expect = 1.0 / N_CLASSES as f64;
        let sigma = (expect * (1.0 - expect) / n).sqrt();
        assert!(
            (p.accuracy - expect).abs() <= 3.0 * sigma,
            "accuracy {} vs {expect} +- {}",
            p.accuracy,
            3.0 * sigma
        );
    }

    #[test]
    fn confusion_trace_over_total_equals_accuracy_exactly() {
        let ds = small_dataset();
        let report = compare_policies(&[&ConstantPolicy(17)], &ds).unwrap();
        let p = report.policy("constant").unwrap();
        let trace: u64 = (0..N_CLASSES).map(|c| p.confusion[c][c]).sum();
        let total: u64 = p.confusion.iter().map(|r| r.iter().sum::<u64>()).sum();
        assert_eq!(total as usize, ds.len());
        assert_eq!(p.accuracy, trace as f64 / total as f64);
        // Row sums count true labels, so every prediction landed in one row.
        let col: u64 = p.confusion.iter().map(|r| r[McsTable::class_of(17) as usize]).sum();
        assert_eq!(col, total);
    }

    #[test]
    fn identical_policies_have_zero_ablation_delta() {
        struct Named(&'static str);
        impl Policy for Named {
            fn name(&self) -> &str {
                self.0
            }
            fn choose(&self, _s: &Sample) -> Result<u8> {
                Ok(12)
            }
        }
        let ds = small_dataset();
        let report =
            compare_policies(&[&Named("cnn_lstm"), &Named("cnn_only")], &ds).unwrap();
        assert_eq!(lstm_ablation_delta(&report).unwrap(), 0.0);
        let missing = compare_policies(&[&Named("cnn_lstm")], &ds).unwrap();
        assert!(lstm_ablation_delta(&missing).is_err());
    }

    #[test]
    fn wilson_interval_brackets_the_point_estimate() {
        let (lo, hi) = binomial_ci95(92, 100);
        assert!(lo < 0.92 && 0.92 < hi);
        assert!(lo > 0.84 && hi < 0.97);
        let (lo, hi) = binomial_ci95(0, 50);
        assert!(lo >= 0.0 && lo < 1e-12);
        assert!(hi > 0.0 && hi < 0.1);
        let (lo, hi) = binomial_ci95(50, 50);
        assert!(hi <= 1.0 && hi > 1.0 - 1e-12);
        assert!(lo > 0.9);
        // Wider sample, tighter interval.
        let (a_lo, a_hi) = binomial_ci95(920, 1000);
        assert!(a_hi - a_lo < hi - lo + 0.2);
        assert!(a_hi - a_lo < 0.04);
    }

    #[test]
    fn report_files_land_on_disk_with_expected_shapes() {
        let ds = small_dataset();
        let report = compare_policies(&[&OraclePolicy, &ConstantPolicy(10)], &ds).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_report_files(dir.path(), &report).unwrap();

        let comparison = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
        let lines: Vec<&str> = comparison.lines().collect();
        assert_eq!(lines[0], "policy,accuracy,n");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("oracle,1,"));

        let confusion = std::fs::read_to_string(dir.path().join("confusion_oracle.csv")).unwrap();
        let lines: Vec<&str> = confusion.lines().collect();
        assert_eq!(lines.len(), 1 + N_CLASSES);
        assert!(lines[0].starts_with("true,10,11,"));
        assert_eq!(lines[0].split(',').count(), 1 + N_CLASSES);

        let text = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
        assert!(text.contains("test split checksum"));
        assert!(text.contains("oracle: accuracy 1.0000"));
    }

    #[test]
    fn evaluation_rejects_empty_splits() {
        let mut ds = small_dataset();
        ds.samples.clear();
        ds.manifest.records = 0;
        for s in &mut ds.manifest.scenarios {
            s.records = 0;
        }
        assert!(compare_policies(&[&OraclePolicy], &ds).is_err());
    }
}
