//! Genie rate selection: the highest scheme whose predicted coded error
//! rate stays under the link's target, given perfect knowledge of the
//! post-equalization SINR.

use super::{coded_ber, post_zf_sinr, zf_precoder, LinkConfig, SinrVector};
use crate::channel::ChannelFrame;
use crate::phy::mcs::{McsTable, FIRST_INDEX};
use crate::Result;

/// Highest table index whose coded error rate at this SINR is within the
/// target; falls back to the lowest index when none qualifies.
///
/// # Example
/// ```
/// # use amclab::phy::{oracle_mcs, LinkConfig, McsTable};
/// let table = McsTable::builtin();
/// let link = LinkConfig::default();
/// // Far below any threshold: the floor class.
/// assert_eq!(oracle_mcs(1e-3, &table, &link), 10);
/// // Far above every threshold: the top class.
/// assert_eq!(oracle_mcs(1e9, &table, &link), 24);
/// ```
pub fn oracle_mcs(sinr: f64, table: &McsTable, link: &LinkConfig) -> u8 {
    assert!(sinr.is_finite() && sinr > 0.0, "oracle needs a positive finite SINR, got {sinr}");
    for entry in table.entries().iter().rev() {
        let ber = coded_ber(sinr, entry, link.coding_gain_coeff_db)
            .expect("coded error rate is total over positive finite SINR");
        if ber <= link.ber_threshold {
            return entry.index;
        }
    }
    FIRST_INDEX
}

/// Per-user oracle labels for one channel frame: zero-forcing precoder,
/// post-equalization SINR, then the rate rule per user. Returns the labels
/// together with the SINR vector they were derived from.
pub fn label_frame(
    frame: &ChannelFrame,
    table: &McsTable,
    link: &LinkConfig,
) -> Result<(Vec<u8>, SinrVector)> {
    let w0 = zf_precoder(frame)?;
    let sinr = post_zf_sinr(&w0, link)?;
    let labels = sinr
        .as_slice()
        .iter()
        .map(|&s| oracle_mcs(s, table, link))
        .collect();
    Ok((labels, sinr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gen_static_frame, place_users, ScenarioConfig};
    use crate::phy::mcs::LAST_INDEX;

    #[test]
    fn oracle_is_monotone_in_sinr() {
        let table = McsTable::builtin();
        let link = LinkConfig::default();
        let mut prev = 0u8;
        for db10 in -100..400 {
            let sinr = 10f64.powf(db10 as f64 / 100.0);
            let m = oracle_mcs(sinr, &table, &link);
            assert!((FIRST_INDEX..=LAST_INDEX).contains(&m));
            assert!(m >= prev, "selection dropped from {prev} to {m} at {} dB", db10 as f64 / 10.0);
            prev = m;
        }
        assert_eq!(prev, LAST_INDEX);
    }

    #[test]
    fn oracle_floor_and_ceiling() {
        let table = McsTable::builtin();
        let link = LinkConfig::default();
        assert_eq!(oracle_mcs(1e-6, &table, &link), FIRST_INDEX);
        assert_eq!(oracle_mcs(1e12, &table, &link), LAST_INDEX);
    }

    #[test]
    fn selected_class_meets_target_and_next_exceeds_it() {
        let table = McsTable::builtin();
        let link = LinkConfig::default();
        for db in [18.0, 20.0, 21.5, 24.0, 27.0] {
            let sinr = 10f64.powf(db / 10.0);
            let m = oracle_mcs(sinr, &table, &link);
            if m > FIRST_INDEX {
                let entry = table.entry(m).unwrap();
                assert!(coded_ber(sinr, entry, link.coding_gain_coeff_db).unwrap() <= link.ber_threshold);
            }
            if m < LAST_INDEX {
                let next = table.entry(m + 1).unwrap();
                assert!(coded_ber(sinr, next, link.coding_gain_coeff_db).unwrap() > link.ber_threshold);
            }
        }
    }

    #[test]
    fn tighter_target_never_selects_higher() {
        let table = McsTable::builtin();
        let loose = LinkConfig { ber_threshold: 1e-2, ..LinkConfig::default() };
        let tight = LinkConfig { ber_threshold: 1e-5, ..LinkConfig::default() };
        for db10 in 150..300 {
            let sinr = 10f64.powf(db10 as f64 / 100.0);
            assert!(oracle_mcs(sinr, &table, &tight) <= oracle_mcs(sinr, &table, &loose));
        }
    }

    #[test]
    fn label_frame_covers_all_users_and_matches_sinr() {
        let cfg = ScenarioConfig { master_seed: 3, ..ScenarioConfig::default() };
        let table = McsTable::builtin();
        let link = LinkConfig::default();
        let geom = place_users(&cfg, 0).unwrap();
        let frame = gen_static_frame(&cfg, &geom, 0);
        let (labels, sinr) = label_frame(&frame, &table, &link).unwrap();
        assert_eq!(labels.len(), cfg.n_ue);
        assert_eq!(sinr.len(), cfg.n_ue);
        for (k, &m) in labels.iter().enumerate() {
            assert_eq!(m, oracle_mcs(sinr.user(k), &table, &link));
        }
    }
}
