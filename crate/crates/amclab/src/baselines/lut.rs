//! SNR-threshold lookup table calibrated from labeled data.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::models::{Policy, Sample};
use crate::phy::{McsTable, N_CLASSES};
use crate::{Error, Result};

/// Fifteen ascending SNR thresholds in dB: `t[0]` is the floor of the lowest
/// class, `t[c]` for c >= 1 the boundary below class c. A value sitting
/// exactly on a boundary takes the class below it, so the mapping is total
/// and monotone over all of R.
#[derive(Debug, Clone, PartialEq)]
pub struct LutThresholds {
    t: [f64; N_CLASSES],
}

impl LutThresholds {
    pub fn new(t: [f64; N_CLASSES]) -> Result<LutThresholds> {
        for (i, w) in t.windows(2).enumerate() {
            if !(w[0] < w[1]) {
                return Err(Error::Data(format!(
                    "thresholds must ascend strictly: t[{i}] = {} vs t[{}] = {}",
                    w[0],
                    i + 1,
                    w[1]
                )));
            }
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("thresholds must be finite".into()));
        }
        Ok(LutThresholds { t })
    }

    pub fn thresholds(&self) -> &[f64; N_CLASSES] {
        &self.t
    }

    /// Class index 0..14 for a SINR in dB.
    pub fn class_of(&self, sinr_db: f64) -> usize {
        let below = self.t.iter().filter(|&&t| t < sinr_db).count();
        below.saturating_sub(1).min(N_CLASSES - 1)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "class,threshold_db")?;
        for (c, t) in self.t.iter().enumerate() {
            writeln!(f, "{c},{t}")?;
        }
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<LutThresholds> {
        let f = BufReader::new(std::fs::File::open(path)?);
        let mut t = [f64::NAN; N_CLASSES];
        let mut seen = [false; N_CLASSES];
        for (ln, line) in f.lines().enumerate() {
            let line = line?;
            if ln == 0 {
                if line.trim() != "class,threshold_db" {
                    return Err(Error::Data(format!("unexpected header {line:?}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (c, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Data(format!("line {}: expected class,threshold", ln + 1)))?;
            let c: usize = c
                .trim()
                .parse()
                .map_err(|e| Error::Data(format!("line {}: bad class: {e}", ln + 1)))?;
            if c >= N_CLASSES || seen[c] {
                return Err(Error::Data(format!("line {}: class {c} out of range or repeated", ln + 1)));
            }
            t[c] = v
                .trim()
                .parse()
                .map_err(|e| Error::Data(format!("line {}: bad threshold: {e}", ln + 1)))?;
            seen[c] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::Data("table must define all 15 classes".into()));
        }
        LutThresholds::new(t)
    }
}

impl Policy for LutThresholds {
    fn name(&self) -> &str {
        "lut"
    }

    fn choose(&self, sample: &Sample) -> Result<u8> {
        Ok(lut_predict(self, sample.sinr_db))
    }
}

/// Bin lookup: MCS index for a SINR in dB. Nondecreasing in `sinr_db`.
pub fn lut_predict(lut: &LutThresholds, sinr_db: f64) -> u8 {
    McsTable::index_of(lut.class_of(sinr_db))
}

/// Fit thresholds from labeled samples: each boundary is the dB midpoint
/// between the mean SINRs of the adjacent classes. Classes absent from the
/// data inherit means interpolated linearly across class index, so every
/// boundary is defined; ordering violations are pooled away isotonically.
pub fn calibrate_lut(samples: &[Sample]) -> Result<LutThresholds> {
    let mut sum = [0.0f64; N_CLASSES];
    let mut count = [0usize; N_CLASSES];
    for s in samples {
        let c = s.y as usize;
        if c >= N_CLASSES {
            return Err(Error::Data(format!("label class {c} out of range")));
        }
        sum[c] += s.sinr_db;
        count[c] += 1;
    }
    let populated: Vec<usize> = (0..N_CLASSES).filter(|&c| count[c] > 0).collect();
    if populated.len() < 2 {
        return Err(Error::Data(
            "threshold calibration needs at least two distinct labels".into(),
        ));
    }

    // Effective per-class mean: observed where populated, linearly
    // interpolated across class index elsewhere (end slopes extended).
    let mean_at = |c: usize| sum[c] / count[c] as f64;
    let lerp = |a: usize, b: usize, c: usize| {
        let (ma, mb) = (mean_at(a), mean_at(b));
        ma + (mb - ma) * (c as f64 - a as f64) / (b as f64 - a as f64)
    };
    let (first, last) = (populated[0], *populated.last().unwrap());
    let (next_to_first, next_to_last) = (populated[1], populated[populated.len() - 2]);
    let mut mu = [0.0f64; N_CLASSES];
    for c in 0..N_CLASSES {
        mu[c] = if count[c] > 0 {
            mean_at(c)
        } else if c < first {
            lerp(first, next_to_first, c)
        } else if c > last {
            lerp(next_to_last, last, c)
        } else {
            let lo = *populated.iter().rev().find(|&&p| p < c).unwrap();
            let hi = *populated.iter().find(|&&p| p > c).unwrap();
            lerp(lo, hi, c)
        };
    }

    let mut t = [0.0f64; N_CLASSES];
    for c in 1..N_CLASSES {
        t[c] = 0.5 * (mu[c - 1] + mu[c]);
    }
    // The floor mirrors the first boundary around the lowest class mean; it
    // never affects predictions because everything below maps to class 0.
    t[0] = 2.0 * mu[0] - t[1];

    isotonic_fix(&mut t);
    LutThresholds::new(t)
}

/// Pool-adjacent-violators pass followed by an epsilon spread so the result
/// ascends strictly even where pooling produced ties.
fn isotonic_fix(t: &mut [f64; N_CLASSES]) {
    // Blocks of (sum, count); a block whose mean undercuts its predecessor
    // is pooled into it, repeatedly, then every member takes the block mean.
    let mut level: Vec<(f64, usize)> = Vec::with_capacity(N_CLASSES);
    for &v in t.iter() {
        let mut merged = (v, 1usize);
        while let Some(&(prev, n)) = level.last() {
            if prev / n as f64 > merged.0 / merged.1 as f64 {
                level.pop();
                merged = (prev + merged.0, n + merged.1);
            } else {
                break;
            }
        }
        level.push(merged);
    }
    let mut out = Vec::with_capacity(N_CLASSES);
    for (s, n) in level {
        let m = s / n as f64;
        for _ in 0..n {
            out.push(m);
        }
    }
    for (i, v) in out.into_iter().enumerate() {
        t[i] = v;
    }
    for i in 1..N_CLASSES {
        if t[i] <= t[i - 1] {
            t[i] = t[i - 1] + 1e-9 * t[i - 1].abs().max(1.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use crate::rng::{tag, Stream};

    fn sample(class: u8, sinr_db: f64) -> Sample {
        Sample {
            x: Tensor::zeros(&[1]),
            y: class,
            user_id: 0,
            scenario: 0,
            frame: 0,
            sinr_db,
            scale: 1.0,
        }
    }

    #[test]
    fn two_clusters_put_the_boundary_at_the_midpoint() {
        let mut data = Vec::new();
        for _ in 0..50 {
            data.push(sample(0, 0.0));
            data.push(sample(1, 10.0));
        }
        let lut = calibrate_lut(&data).unwrap();
        assert!((lut.thresholds()[1] - 5.0).abs() < 1e-12);
        assert_eq!(lut_predict(&lut, 0.0), 10);
        assert_eq!(lut_predict(&lut, 10.0), 11);
    }

    #[test]
    fn single_label_data_is_rejected() {
        let data: Vec<Sample> = (0..20).map(|_| sample(3, 7.0)).collect();
        assert!(matches!(calibrate_lut(&data), Err(Error::Data(_))));
    }

    #[test]
    fn step_function_labels_are_recovered_exactly() {
        // Tight clusters with clear gaps: calibration must separate them all.
        let mut rng = Stream::new(5, &[tag::MONTE_CARLO]);
        let mut data = Vec::new();
        for c in 0..N_CLASSES {
            for _ in 0..40 {
                let s = 2.0 * c as f64 + 0.3 * (rng.uniform() - 0.5);
                data.push(sample(c as u8, s));
            }
        }
        let lut = calibrate_lut(&data).unwrap();
        let hits = data.iter().filter(|s| lut.class_of(s.sinr_db) == s.y as usize).count();
        assert_eq!(hits, data.len());
    }

    #[test]
    fn empty_classes_inherit_interpolated_boundaries() {
        // Only classes 2 and 6 populated; everything between comes from the
        // straight line through their means, everything outside from its
        // extension. The result must still ascend strictly.
        let mut data = Vec::new();
        for _ in 0..30 {
            data.push(sample(2, 4.0));
            data.push(sample(6, 12.0));
        }
        let lut = calibrate_lut(&data).unwrap();
        let t = lut.thresholds();
        for w in t.windows(2) {
            assert!(w[0] < w[1]);
        }
        // Means interpolate as mu[c] = 4 + 2 (c - 2); boundaries are midpoints.
        assert!((t[3] - 5.0).abs() < 1e-12);
        assert!((t[6] - 11.0).abs() < 1e-12);
        assert!((t[14] - 27.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_values_take_the_lower_class() {
        let t: [f64; N_CLASSES] = std::array::from_fn(|i| i as f64);
        let lut = LutThresholds::new(t).unwrap();
        assert_eq!(lut_predict(&lut, -3.0), 10);
        assert_eq!(lut_predict(&lut, 5.0), 14);
        assert_eq!(lut_predict(&lut, 5.5), 15);
        assert_eq!(lut_predict(&lut, 99.0), 24);
    }

    #[test]
    fn prediction_is_monotone_in_sinr() {
        let mut rng = Stream::new(9, &[tag::MONTE_CARLO]);
        let t: [f64; N_CLASSES] = std::array::from_fn(|i| 1.7 * i as f64 - 3.0);
        let lut = LutThresholds::new(t).unwrap();
        let mut xs: Vec<f64> = (0..500).map(|_| rng.range(-10.0, 30.0)).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let preds: Vec<u8> = xs.iter().map(|&s| lut_predict(&lut, s)).collect();
        assert!(preds.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn midpoints_agree_with_a_brute_force_threshold_search() {
        // Symmetric per-class clusters: an exhaustive accuracy-maximizing
        // search over each boundary must land near the calibrated midpoint.
        let mut rng = Stream::new(11, &[tag::MONTE_CARLO]);
        let mut data = Vec::new();
        for c in 0..N_CLASSES {
            for _ in 0..80 {
                let s = 2.5 * c as f64 + 0.6 * rng.standard_normal();
                data.push(sample(c as u8, s));
            }
        }
        let lut = calibrate_lut(&data).unwrap();
        for c in 1..N_CLASSES {
            let lo = 2.5 * (c as f64 - 1.0);
            let hi = 2.5 * c as f64;
            let mut best = (f64::NEG_INFINITY, lo);
            let mut cand = lo;
            while cand <= hi {
                // Count agreement of the single boundary on the two classes
                // it separates; everything else is unaffected by it.
                let ok = data
                    .iter()
                    .filter(|s| s.y as usize == c - 1 || s.y as usize == c)
                    .filter(|s| {
                        let below = s.sinr_db <= cand;
                        below == (s.y as usize == c - 1)
                    })
                    .count();
                if ok as f64 > best.0 {
                    best = (ok as f64, cand);
                }
                cand += 0.01;
            }
            assert!(
                (lut.thresholds()[c] - best.1).abs() < 0.5,
                "boundary {c}: calibrated {} vs searched {}",
                lut.thresholds()[c],
                best.1
            );
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lut.csv");
        let t: [f64; N_CLASSES] = std::array::from_fn(|i| 1.37 * i as f64 - 4.2);
        let lut = LutThresholds::new(t).unwrap();
        lut.save_csv(&path).unwrap();
        let back = LutThresholds::load_csv(&path).unwrap();
        assert_eq!(lut, back);
    }

    #[test]
    fn descending_input_is_rejected_but_pooling_repairs_calibration() {
        let mut t: [f64; N_CLASSES] = std::array::from_fn(|i| i as f64);
        t[7] = 3.0;
        assert!(LutThresholds::new(t).is_err());

        let mut u: [f64; N_CLASSES] = std::array::from_fn(|i| i as f64);
        u[7] = 3.0;
        isotonic_fix(&mut u);
        for w in u.windows(2) {
            assert!(w[0] < w[1]);
        }
    }
}
