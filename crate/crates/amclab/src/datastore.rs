//! Dataset pipeline: channel sequences to labeled sample windows, the binary
//! container they live in, deterministic splits, and label histograms.
//!
//! Labels are derived from the SINR **after** it has been rounded to the f32
//! stored in the file, so re-deriving them at load time agrees bit for bit.
//! The RMS removed by window normalization is not persisted.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::channel::{gen_sequence, ChannelFrame, LosState, Mobility, PlacementMode, ScenarioConfig};
use crate::models::{make_sample, Sample};
use crate::phy::{fnv1a, label_frame, LinkConfig, McsTable, FIRST_INDEX, LAST_INDEX, N_CLASSES};
use crate::rng::{tag, Stream};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"AMCD";
const FORMAT_VERSION: u16 = 1;

/// One scenario in a generation catalog: a channel configuration and how many
/// frames of it to simulate.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub cfg: ScenarioConfig,
    pub frames: u32,
}

/// Per-scenario bookkeeping carried in the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSummary {
    pub tag: u16,
    /// Short unique name, used in report file names.
    pub name: String,
    pub cfg: ScenarioConfig,
    pub frames: u32,
    pub records: u64,
}

/// Split provenance for files produced by [`split_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplitInfo {
    pub role: String,
    pub fraction: f64,
    pub seed: u64,
}

/// Structured description of a dataset file; serialized as key=value text.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub n_bs: usize,
    pub n_ue: usize,
    pub t: usize,
    pub link: LinkConfig,
    pub mcs_checksum: u64,
    pub records: u64,
    pub skipped_frames: u64,
    pub scenarios: Vec<ScenarioSummary>,
    pub split: Option<SplitInfo>,
}

fn scenario_name(tag: u16, cfg: &ScenarioConfig) -> String {
    format!("s{tag:02}_{}_{}_{}", cfg.los.as_str(), cfg.mode.as_str(), cfg.mobility.as_str())
}

impl Manifest {
    /// Canonical text form. Floats use shortest round-trip formatting, so
    /// render -> parse -> render is the identity on bytes.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("format={FORMAT_VERSION}\n"));
        s.push_str(&format!("n_bs={}\n", self.n_bs));
        s.push_str(&format!("n_ue={}\n", self.n_ue));
        s.push_str(&format!("t={}\n", self.t));
        s.push_str(&format!("tx_power_w={}\n", self.link.tx_power_w));
        s.push_str(&format!("noise_power_w={}\n", self.link.noise_power));
        s.push_str(&format!("ber_threshold={}\n", self.link.ber_threshold));
        s.push_str(&format!("coding_gain_coeff_db={}\n", self.link.coding_gain_coeff_db));
        s.push_str(&format!("mcs_checksum={:016x}\n", self.mcs_checksum));
        s.push_str(&format!("records={}\n", self.records));
        s.push_str(&format!("skipped_frames={}\n", self.skipped_frames));
        s.push_str(&format!("scenarios={}\n", self.scenarios.len()));
        for sc in &self.scenarios {
            let c = &sc.cfg;
            s.push_str(&format!(
                "scenario.{}=name={} frames={} records={} mode={} los={} mobility={} \
                 n_scatterers={} cluster_spread_rad={} rician_k_db={} speed_mps={} \
                 carrier_hz={} frame_s={} cell_radius_m={} master_seed={}\n",
                sc.tag,
                sc.name,
                sc.frames,
                sc.records,
                c.mode.as_str(),
                c.los.as_str(),
                c.mobility.as_str(),
                c.n_scatterers,
                c.cluster_spread_rad,
                c.rician_k_db,
                c.speed_mps,
                c.carrier_hz,
                c.frame_s,
                c.cell_radius_m,
                c.master_seed
            ));
        }
        if let Some(sp) = &self.split {
            s.push_str(&format!("split_role={}\n", sp.role));
            s.push_str(&format!("split_fraction={}\n", sp.fraction));
            s.push_str(&format!("split_seed={}\n", sp.seed));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let mut map = std::collections::BTreeMap::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Data(format!("manifest line without '=': {line:?}")))?;
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Data(format!("manifest repeats key {k}")));
            }
        }
        let get = |k: &str| {
            map.get(k).cloned().ok_or_else(|| Error::Data(format!("manifest lacks key {k}")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?.parse().map_err(|e| Error::Data(format!("manifest key {k}: {e}")))
        };
        let int = |k: &str| -> Result<u64> {
            get(k)?.parse().map_err(|e| Error::Data(format!("manifest key {k}: {e}")))
        };
        let version = int("format")?;
        if version != FORMAT_VERSION as u64 {
            return Err(Error::Data(format!("unsupported manifest format {version}")));
        }
        let n_bs = int("n_bs")? as usize;
        let n_ue = int("n_ue")? as usize;
        let t = int("t")? as usize;
        let link = LinkConfig {
            tx_power_w: num("tx_power_w")?,
            noise_power: num("noise_power_w")?,
            ber_threshold: num("ber_threshold")?,
            coding_gain_coeff_db: num("coding_gain_coeff_db")?,
        };
        let mcs_checksum = u64::from_str_radix(&get("mcs_checksum")?, 16)
            .map_err(|e| Error::Data(format!("manifest key mcs_checksum: {e}")))?;
        let records = int("records")?;
        let skipped_frames = int("skipped_frames")?;
        let n_scen = int("scenarios")? as usize;
        let mut scenarios = Vec::with_capacity(n_scen);
        for tag_id in 0..n_scen {
            let line = get(&format!("scenario.{tag_id}"))?;
            scenarios.push(parse_scenario_line(tag_id as u16, &line, n_bs, n_ue)?);
        }
        let split = if map.contains_key("split_role") {
            Some(SplitInfo {
                role: get("split_role")?,
                fraction: num("split_fraction")?,
                seed: int("split_seed")?,
            })
        } else {
            None
        };
        Ok(Manifest {
            n_bs,
            n_ue,
            t,
            link,
            mcs_checksum,
            records,
            skipped_frames,
            scenarios,
            split,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.t < 1 || self.n_bs == 0 || self.n_ue == 0 {
            return Err(Error::Data("manifest has degenerate geometry".into()));
        }
        let total: u64 = self.scenarios.iter().map(|s| s.records).sum();
        if total != self.records {
            return Err(Error::Data(format!(
                "scenario record counts sum to {total}, manifest says {}",
                self.records
            )));
        }
        if self.mcs_checksum != McsTable::builtin().checksum() {
            return Err(Error::Data(
                "dataset was built against a different scheme table".into(),
            ));
        }
        Ok(())
    }
}

fn parse_scenario_line(tag: u16, line: &str, n_bs: usize, n_ue: usize) -> Result<ScenarioSummary> {
    let mut kv = std::collections::BTreeMap::new();
    for part in line.split_whitespace() {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Data(format!("scenario field without '=': {part:?}")))?;
        kv.insert(k, v);
    }
    let get = |k: &str| {
        kv.get(k).copied().ok_or_else(|| Error::Data(format!("scenario.{tag} lacks field {k}")))
    };
    let fnum = |k: &str| -> Result<f64> {
        get(k)?.parse().map_err(|e| Error::Data(format!("scenario.{tag} field {k}: {e}")))
    };
    let inum = |k: &str| -> Result<u64> {
        get(k)?.parse().map_err(|e| Error::Data(format!("scenario.{tag} field {k}: {e}")))
    };
    let cfg = ScenarioConfig {
        n_bs,
        n_ue,
        mode: PlacementMode::parse(get("mode")?)?,
        los: LosState::parse(get("los")?)?,
        mobility: Mobility::parse(get("mobility")?)?,
        n_scatterers: inum("n_scatterers")? as usize,
        cluster_spread_rad: fnum("cluster_spread_rad")?,
        rician_k_db: fnum("rician_k_db")?,
        speed_mps: fnum("speed_mps")?,
        carrier_hz: fnum("carrier_hz")?,
        frame_s: fnum("frame_s")?,
        cell_radius_m: fnum("cell_radius_m")?,
        master_seed: inum("master_seed")?,
    };
    Ok(ScenarioSummary {
        tag,
        name: get("name")?.to_string(),
        cfg,
        frames: inum("frames")? as u32,
        records: inum("records")?,
    })
}

/// An in-memory dataset: manifest plus samples in canonical
/// (scenario, frame, user) order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Serialize to the container format.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.write_to(&mut out)?;
        Ok(out)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        if self.samples.len() as u64 != self.manifest.records {
            return Err(Error::Data(format!(
                "manifest says {} records, dataset holds {}",
                self.manifest.records,
                self.samples.len()
            )));
        }
        let text = self.manifest.render();
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(text.len() as u32).to_le_bytes())?;
        w.write_all(text.as_bytes())?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        let numel = self.manifest.t * 2 * self.manifest.n_bs * self.manifest.n_ue;
        for s in &self.samples {
            if s.x.data.len() != numel {
                return Err(Error::Data(format!(
                    "sample window has {} values, geometry implies {numel}",
                    s.x.data.len()
                )));
            }
            w.write_all(&s.scenario.to_le_bytes())?;
            w.write_all(&s.frame.to_le_bytes())?;
            w.write_all(&[s.user_id])?;
            w.write_all(&[McsTable::index_of(s.y as usize)])?;
            w.write_all(&(s.sinr_db as f32).to_le_bytes())?;
            for &v in &s.x.data {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Dataset> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Data("not a dataset file".into()));
        }
        let version = u16::from_le_bytes(read_array(r)?);
        if version != FORMAT_VERSION {
            return Err(Error::Data(format!("unsupported dataset version {version}")));
        }
        let text_len = u32::from_le_bytes(read_array(r)?) as usize;
        let mut text = vec![0u8; text_len];
        read_exact(r, &mut text)?;
        let text = String::from_utf8(text)
            .map_err(|e| Error::Data(format!("manifest is not UTF-8: {e}")))?;
        let manifest = Manifest::parse(&text)?;
        manifest.validate()?;
        let count = u64::from_le_bytes(read_array(r)?);
        if count != manifest.records {
            return Err(Error::Data(format!(
                "header says {count} records, manifest says {}",
                manifest.records
            )));
        }
        let table = McsTable::builtin();
        let numel = manifest.t * 2 * manifest.n_bs * manifest.n_ue;
        let shape = [manifest.t, 2, manifest.n_bs, manifest.n_ue];
        let mut samples = Vec::with_capacity(count as usize);
        for i in 0..count {
            let scenario = u16::from_le_bytes(read_array(r)?);
            let frame = u32::from_le_bytes(read_array(r)?);
            let user_id = u8::from_le_bytes(read_array(r)?);
            let label = u8::from_le_bytes(read_array(r)?);
            let sinr_db = f32::from_le_bytes(read_array(r)?);
            if !(FIRST_INDEX..=LAST_INDEX).contains(&label) {
                return Err(Error::Data(format!("record {i}: label {label} out of range")));
            }
            if !sinr_db.is_finite() {
                return Err(Error::Data(format!("record {i}: non-finite SINR")));
            }
            let rederived = derive_label(sinr_db, &table, &manifest.link);
            if rederived != label {
                return Err(Error::Data(format!(
                    "record {i}: label {label} does not re-derive from its SINR (got {rederived})"
                )));
            }
            let mut buf = vec![0u8; numel * 4];
            read_exact(r, &mut buf)?;
            let data: Vec<f64> = buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("record {i}: non-finite window value")));
            }
            samples.push(Sample {
                x: crate::autodiff::Tensor::from_vec(&shape, data),
                y: McsTable::class_of(label) as u8,
                user_id,
                scenario,
                frame,
                sinr_db: sinr_db as f64,
                scale: 1.0,
            });
        }
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(Error::Data("trailing bytes after the last record".into()));
        }
        Ok(Dataset { manifest, samples })
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Dataset::read_from(&mut f)
    }

    /// FNV-1a over the serialized bytes; recorded in evaluation reports.
    pub fn checksum(&self) -> Result<u64> {
        Ok(fnv1a(&self.to_bytes()?))
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Data("dataset truncated".into())
        } else {
            Error::Io(e)
        }
    })
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf)?;
    Ok(buf)
}

/// The label convention: round the dB SINR to f32 first, then ask the oracle.
pub fn derive_label(sinr_db_f32: f32, table: &McsTable, link: &LinkConfig) -> u8 {
    let linear = 10f64.powf(sinr_db_f32 as f64 / 10.0);
    crate::phy::oracle_mcs(linear, table, link)
}

/// Windowed samples for one scenario. `per_frame` holds, for each frame, the
/// per-user (sinr_db_f32, label) pairs, or None where the frame was singular.
/// A window is emitted only when its final frame has labels.
fn scenario_records(
    frames: &[ChannelFrame],
    per_frame: &[Option<Vec<(f32, u8)>>],
    scenario: u16,
    t_len: usize,
) -> Result<Vec<Sample>> {
    debug_assert_eq!(frames.len(), per_frame.len());
    let n_ue = frames[0].n_ue;
    let mut out = Vec::new();
    for f in (t_len - 1)..frames.len() {
        let Some(labels) = &per_frame[f] else { continue };
        let window = &frames[f + 1 - t_len..=f];
        for (user, &(sinr_db, label)) in labels.iter().enumerate().take(n_ue) {
            out.push(make_sample(window, t_len, user, label, scenario, sinr_db as f64)?);
        }
    }
    Ok(out)
}

/// Simulate every catalog scenario, label each frame, and emit stride-1
/// windows of `t_len` frames in canonical (scenario, frame, user) order.
/// Scenarios run in parallel; the merge order is fixed by the catalog.
pub fn generate_dataset(catalog: &[CatalogEntry], link: &LinkConfig, t_len: usize) -> Result<Dataset> {
    if catalog.is_empty() {
        return Err(Error::Config("catalog must list at least one scenario".into()));
    }
    if catalog.len() > u16::MAX as usize {
        return Err(Error::Config("catalog too large".into()));
    }
    if t_len < 1 {
        return Err(Error::Config("window length must be at least 1".into()));
    }
    for (i, e) in catalog.iter().enumerate() {
        if (e.frames as usize) < t_len {
            return Err(Error::Config(format!(
                "scenario {i} has {} frames, need at least {t_len}",
                e.frames
            )));
        }
        e.cfg.validate()?;
        if e.cfg.n_bs != catalog[0].cfg.n_bs || e.cfg.n_ue != catalog[0].cfg.n_ue {
            return Err(Error::Config("catalog scenarios must share one geometry".into()));
        }
    }
    link.validate()?;
    let table = McsTable::builtin();

    let per_scenario: Vec<Result<(Vec<Sample>, u64)>> = catalog
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let tag_id = i as u16;
            let (frames, _) = gen_sequence(&entry.cfg, entry.frames, 0)?;
            let mut skipped = 0u64;
            let mut per_frame = Vec::with_capacity(frames.len());
            for frame in &frames {
                match label_frame(frame, &table, link) {
                    Ok((_, sinrs)) => {
                        let pairs: Vec<(f32, u8)> = sinrs
                            .as_slice()
                            .iter()
                            .map(|&s| {
                                let db = (10.0 * s.log10()) as f32;
                                (db, derive_label(db, &table, link))
                            })
                            .collect();
                        per_frame.push(Some(pairs));
                    }
                    Err(Error::Numeric(_)) => {
                        skipped += 1;
                        per_frame.push(None);
                    }
                    Err(e) => return Err(e),
                }
            }
            let samples = scenario_records(&frames, &per_frame, tag_id, t_len)?;
            Ok((samples, skipped))
        })
        .collect();

    let mut samples = Vec::new();
    let mut scenarios = Vec::with_capacity(catalog.len());
    let mut skipped_frames = 0u64;
    for (i, res) in per_scenario.into_iter().enumerate() {
        let (scen_samples, skipped) = res?;
        let tag_id = i as u16;
        scenarios.push(ScenarioSummary {
            tag: tag_id,
            name: scenario_name(tag_id, &catalog[i].cfg),
            cfg: catalog[i].cfg.clone(),
            frames: catalog[i].frames,
            records: scen_samples.len() as u64,
        });
        skipped_frames += skipped;
        samples.extend(scen_samples);
    }

    let manifest = Manifest {
        n_bs: catalog[0].cfg.n_bs,
        n_ue: catalog[0].cfg.n_ue,
        t: t_len,
        link: link.clone(),
        mcs_checksum: table.checksum(),
        records: samples.len() as u64,
        skipped_frames,
        scenarios,
        split: None,
    };
    Ok(Dataset { manifest, samples })
}

/// Stratified split by scenario tag. Per-scenario train counts follow the
/// largest-remainder rule so the overall fraction is met exactly (after
/// rounding); both halves must end up nonempty.
pub fn split_dataset(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction.is_finite() && (0.0..=1.0).contains(&train_fraction)) {
        return Err(Error::Config(format!("train fraction {train_fraction} out of [0, 1]")));
    }
    let n = ds.samples.len();
    let train_total = (train_fraction * n as f64).round() as usize;
    if train_total == 0 || train_total == n {
        return Err(Error::Config(format!(
            "fraction {train_fraction} of {n} samples leaves an empty split"
        )));
    }

    // Group sample indices by scenario tag, keeping canonical order.
    let tags: Vec<u16> = ds.manifest.scenarios.iter().map(|s| s.tag).collect();
    let mut by_tag: std::collections::BTreeMap<u16, Vec<usize>> =
        tags.iter().map(|&t| (t, Vec::new())).collect();
    for (i, s) in ds.samples.iter().enumerate() {
        by_tag
            .get_mut(&s.scenario)
            .ok_or_else(|| Error::Data(format!("sample references unknown scenario {}", s.scenario)))?
            .push(i);
    }

    // Largest-remainder apportionment of the train quota across scenarios.
    let quotas: Vec<(u16, f64)> = by_tag
        .iter()
        .map(|(&t, idx)| (t, train_fraction * idx.len() as f64))
        .collect();
    let mut take: std::collections::BTreeMap<u16, usize> =
        quotas.iter().map(|&(t, q)| (t, q.floor() as usize)).collect();
    let mut leftover = train_total as i64 - take.values().map(|&v| v as i64).sum::<i64>();
    let mut order: Vec<(u16, f64)> =
        quotas.iter().map(|&(t, q)| (t, q - q.floor())).collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for (t, _) in order {
        if leftover <= 0 {
            break;
        }
        let cap = by_tag[&t].len();
        let slot = take.get_mut(&t).unwrap();
        if *slot < cap {
            *slot += 1;
            leftover -= 1;
        }
    }
    if leftover > 0 {
        return Err(Error::Config("split quota exceeds available samples".into()));
    }

    let mut train_idx = Vec::with_capacity(train_total);
    let mut test_idx = Vec::with_capacity(n - train_total);
    for (&t, idx) in &by_tag {
        let mut shuffled = idx.clone();
        Stream::new(seed, &[tag::SPLIT, t as u64]).shuffle(&mut shuffled);
        let k = take[&t];
        let (a, b) = shuffled.split_at(k);
        train_idx.extend_from_slice(a);
        test_idx.extend_from_slice(b);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let build = |role: &str, picks: &[usize]| -> Dataset {
        let samples: Vec<Sample> = picks.iter().map(|&i| ds.samples[i].clone()).collect();
        let mut manifest = ds.manifest.clone();
        manifest.records = samples.len() as u64;
        for sc in &mut manifest.scenarios {
            sc.records = samples.iter().filter(|s| s.scenario == sc.tag).count() as u64;
        }
        manifest.split = Some(SplitInfo {
            role: role.to_string(),
            fraction: train_fraction,
            seed,
        });
        Dataset { manifest, samples }
    };
    Ok((build("train", &train_idx), build("test", &test_idx)))
}

/// Counts per MCS index 10..24, optionally restricted to one scenario tag.
pub fn label_histogram(ds: &Dataset, scenario: Option<u16>) -> [u64; N_CLASSES] {
    let mut hist = [0u64; N_CLASSES];
    for s in &ds.samples {
        if scenario.map_or(true, |t| s.scenario == t) {
            hist[s.y as usize] += 1;
        }
    }
    hist
}

pub fn write_histogram_csv(path: &Path, hist: &[u64; N_CLASSES]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "mcs,count")?;
    for (c, n) in hist.iter().enumerate() {
        writeln!(f, "{},{}", McsTable::index_of(c), n)?;
    }
    Ok(())
}

/// Mean and variance (population) of the label distribution in class units.
pub fn histogram_stats(hist: &[u64; N_CLASSES]) -> (f64, f64) {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = hist
        .iter()
        .enumerate()
        .map(|(c, &n)| c as f64 * n as f64)
        .sum::<f64>()
        / total as f64;
    let var = hist
        .iter()
        .enumerate()
        .map(|(c, &n)| (c as f64 - mean).powi(2) * n as f64)
        .sum::<f64>()
        / total as f64;
    (mean, var)
}

fn default_template() -> ScenarioConfig {
    ScenarioConfig { speed_mps: 3.0, ..ScenarioConfig::default() }
}

/// The twelve-scenario study catalog: both line-of-sight states crossed with
/// the four static placements plus mobile co-located and mobile random
/// placement, each simulated for 336 frames. With the default geometry this
/// yields 16,032 windows, of which an 0.84375 split keeps 13,527 for training.
pub fn paper_catalog(base_seed: u64) -> Vec<CatalogEntry> {
    catalog_from_template(&default_template(), base_seed, 336, 336)
}

/// Small calibration catalog (about 4k windows at the default geometry):
/// the eight static scenarios run 62 frames, the four mobile ones 132.
pub fn desk_catalog(base_seed: u64) -> Vec<CatalogEntry> {
    catalog_from_template(&default_template(), base_seed, 62, 132)
}

/// The full scenario sweep built over a shared template: geometry, scatterer
/// statistics, and link timing come from `template`; placement mode, sight
/// state, mobility, and the per-scenario channel seed are swept. The
/// template's `speed_mps` applies to the mobile scenarios only.
pub fn catalog_from_template(
    template: &ScenarioConfig,
    base_seed: u64,
    static_frames: u32,
    mobile_frames: u32,
) -> Vec<CatalogEntry> {
    let mut entries = Vec::new();
    let mut tag_id = 0u64;
    for los in [LosState::Los, LosState::Nlos] {
        let static_modes = [
            PlacementMode::Uncorrelated,
            PlacementMode::OneCluster,
            PlacementMode::TwoClusters,
            PlacementMode::RandomPlacement,
        ];
        for mode in static_modes {
            entries.push(CatalogEntry {
                cfg: ScenarioConfig {
                    mode,
                    los,
                    mobility: Mobility::Static,
                    speed_mps: 0.0,
                    master_seed: base_seed + tag_id,
                    ..template.clone()
                },
                frames: static_frames,
            });
            tag_id += 1;
        }
        for mode in [PlacementMode::OneCluster, PlacementMode::RandomPlacement] {
            entries.push(CatalogEntry {
                cfg: ScenarioConfig {
                    mode,
                    los,
                    mobility: Mobility::Mobile,
                    master_seed: base_seed + tag_id,
                    ..template.clone()
                },
                frames: mobile_frames,
            });
            tag_id += 1;
        }
    }
    entries
}

/// Two-scenario smoke catalog (one static, one mobile), sized for command
/// pipelines that must finish in seconds.
pub fn mini_catalog_from_template(
    template: &ScenarioConfig,
    base_seed: u64,
    static_frames: u32,
    mobile_frames: u32,
) -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            cfg: ScenarioConfig {
                mode: PlacementMode::Uncorrelated,
                los: LosState::Nlos,
                mobility: Mobility::Static,
                speed_mps: 0.0,
                master_seed: base_seed,
                ..template.clone()
            },
            frames: static_frames,
        },
        CatalogEntry {
            cfg: ScenarioConfig {
                mode: PlacementMode::OneCluster,
                los: LosState::Nlos,
                mobility: Mobility::Mobile,
                master_seed: base_seed + 1,
                ..template.clone()
            },
            frames: mobile_frames,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_catalog(frames: u32) -> Vec<CatalogEntry> {
        let base = ScenarioConfig {
            n_bs: 8,
            n_ue: 4,
            master_seed: 77,
            ..ScenarioConfig::default()
        };
        vec![
            CatalogEntry { cfg: base.clone(), frames },
            CatalogEntry {
                cfg: ScenarioConfig {
                    mode: PlacementMode::OneCluster,
                    master_seed: 78,
                    ..base
                },
                frames,
            },
        ]
    }

    fn tiny_dataset() -> Dataset {
        generate_dataset(&tiny_catalog(12), &LinkConfig::default(), 3).unwrap()
    }

    #[test]
    fn window_count_matches_the_stride_one_arithmetic() {
        let catalog = vec![CatalogEntry {
            cfg: ScenarioConfig { n_bs: 8, n_ue: 4, master_seed: 5, ..ScenarioConfig::default() },
            frames: 10,
        }];
        let ds = generate_dataset(&catalog, &LinkConfig::default(), 3).unwrap();
        assert_eq!(ds.len(), (10 - 2) * 4);
        assert_eq!(ds.manifest.records, 32);
        assert_eq!(ds.manifest.skipped_frames, 0);
        // Canonical order: frame index major, user minor.
        let key: Vec<(u16, u32, u8)> =
            ds.samples.iter().map(|s| (s.scenario, s.frame, s.user_id)).collect();
        let mut sorted = key.clone();
        sorted.sort_unstable();
        assert_eq!(key, sorted);
    }

    #[test]
    fn generation_is_byte_identical_across_runs() {
        let a = tiny_dataset().to_bytes().unwrap();
        let b = tiny_dataset().to_bytes().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn file_round_trip_is_byte_exact_and_labels_rederive() {
        let ds = tiny_dataset();
        let bytes = ds.to_bytes().unwrap();
        let back = Dataset::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.manifest, ds.manifest);
        let table = McsTable::builtin();
        for s in &back.samples {
            let label = McsTable::index_of(s.y as usize);
            assert_eq!(derive_label(s.sinr_db as f32, &table, &back.manifest.link), label);
        }
    }

    #[test]
    fn truncated_and_padded_files_are_rejected() {
        let bytes = tiny_dataset().to_bytes().unwrap();
        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(Dataset::read_from(&mut &cut[..]), Err(Error::Data(_))));
        let mut padded = bytes.clone();
        padded.push(0);
        assert!(matches!(Dataset::read_from(&mut padded.as_slice()), Err(Error::Data(_))));
    }

    #[test]
    fn foreign_scheme_table_checksum_is_rejected() {
        let mut ds = tiny_dataset();
        ds.manifest.mcs_checksum ^= 1;
        let bytes = ds.to_bytes().unwrap();
        assert!(matches!(Dataset::read_from(&mut bytes.as_slice()), Err(Error::Data(_))));
    }

    #[test]
    fn manifest_text_round_trips_exactly() {
        let ds = tiny_dataset();
        let text = ds.manifest.render();
        let parsed = Manifest::parse(&text).unwrap();
        assert_eq!(parsed, ds.manifest);
        assert_eq!(parsed.render(), text);
    }

    #[test]
    fn singular_frames_drop_only_their_own_windows() {
        let catalog = vec![CatalogEntry {
            cfg: ScenarioConfig { n_bs: 8, n_ue: 2, master_seed: 9, ..ScenarioConfig::default() },
            frames: 8,
        }];
        let (frames, _) = gen_sequence(&catalog[0].cfg, 8, 0).unwrap();
        let mut per_frame: Vec<Option<Vec<(f32, u8)>>> =
            (0..8).map(|_| Some(vec![(10.0, 15), (12.0, 16)])).collect();
        per_frame[4] = None;
        let samples = scenario_records(&frames, &per_frame, 0, 3).unwrap();
        // Final frames 2..7 minus the singular frame 4: five frames, two users.
        assert_eq!(samples.len(), 5 * 2);
        assert!(samples.iter().all(|s| s.frame != 4));
    }

    #[test]
    fn split_is_stratified_disjoint_and_reproducible() {
        let ds = tiny_dataset();
        let (train, test) = split_dataset(&ds, 0.75, 13).unwrap();
        assert_eq!(train.len() + test.len(), ds.len());
        assert_eq!(train.len(), (0.75 * ds.len() as f64).round() as usize);
        for sc in &ds.manifest.scenarios {
            let total = sc.records;
            let t = train.samples.iter().filter(|s| s.scenario == sc.tag).count() as u64;
            let quota = 0.75 * total as f64;
            assert!(t == quota.floor() as u64 || t == quota.ceil() as u64);
        }
        let key = |s: &Sample| (s.scenario, s.frame, s.user_id);
        let mut seen: std::collections::HashSet<_> = train.samples.iter().map(key).collect();
        assert!(test.samples.iter().all(|s| seen.insert(key(s))));

        let (train2, test2) = split_dataset(&ds, 0.75, 13).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
        let (train3, _) = split_dataset(&ds, 0.75, 14).unwrap();
        assert_ne!(train, train3);
    }

    #[test]
    fn degenerate_splits_are_rejected() {
        let ds = tiny_dataset();
        assert!(split_dataset(&ds, 1.0, 1).is_err());
        assert!(split_dataset(&ds, 0.0, 1).is_err());
        assert!(split_dataset(&ds, f64::NAN, 1).is_err());
    }

    #[test]
    fn split_manifests_carry_their_role_and_counts() {
        let ds = tiny_dataset();
        let (train, test) = split_dataset(&ds, 0.8, 3).unwrap();
        assert_eq!(train.manifest.split.as_ref().unwrap().role, "train");
        assert_eq!(test.manifest.split.as_ref().unwrap().role, "test");
        let sum: u64 = train.manifest.scenarios.iter().map(|s| s.records).sum();
        assert_eq!(sum, train.manifest.records);
        // Split files still round-trip.
        let bytes = train.to_bytes().unwrap();
        let back = Dataset::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn histogram_counts_filter_and_sum() {
        let ds = tiny_dataset();
        let all = label_histogram(&ds, None);
        assert_eq!(all.iter().sum::<u64>() as usize, ds.len());
        let none = label_histogram(&ds, Some(999));
        assert!(none.iter().all(|&c| c == 0));
        let per_tag: u64 = ds
            .manifest
            .scenarios
            .iter()
            .map(|sc| label_histogram(&ds, Some(sc.tag)).iter().sum::<u64>())
            .sum();
        assert_eq!(per_tag as usize, ds.len());
    }

    #[test]
    fn histogram_csv_lists_every_mcs_index() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hist.csv");
        let ds = tiny_dataset();
        write_histogram_csv(&path, &label_histogram(&ds, None)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "mcs,count");
        assert_eq!(lines.len(), 1 + 15);
        assert!(lines[1].starts_with("10,"));
        assert!(lines[15].starts_with("24,"));
    }

    #[test]
    fn study_catalog_arithmetic_matches_the_documented_totals() {
        let paper = paper_catalog(1);
        assert_eq!(paper.len(), 12);
        let total: usize = paper.iter().map(|e| (e.frames as usize - 2) * 4).sum();
        assert_eq!(total, 16_032);
        assert_eq!((0.84375f64 * total as f64).round() as usize, 13_527);

        let desk = desk_catalog(1);
        assert_eq!(desk.len(), 12);
        let total: usize = desk.iter().map(|e| (e.frames as usize - 2) * 4).sum();
        assert_eq!(total, 4_000);

        // Every entry draws a distinct channel seed.
        let mut seeds: Vec<u64> = paper.iter().map(|e| e.cfg.master_seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 12);
    }

    #[test]
    fn catalog_geometry_mismatch_is_rejected() {
        let mut catalog = tiny_catalog(8);
        catalog[1].cfg.n_bs = 16;
        assert!(generate_dataset(&catalog, &LinkConfig::default(), 3).is_err());
        let short = vec![CatalogEntry {
            cfg: ScenarioConfig { n_bs: 8, n_ue: 2, master_seed: 1, ..ScenarioConfig::default() },
            frames: 2,
        }];
        assert!(generate_dataset(&short, &LinkConfig::default(), 3).is_err());
    }
}
