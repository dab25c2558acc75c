//! File formats shared by the pipeline stages, and run manifests.
//!
//! Dense vectors (distributions, eigenvalues) are stored as a little-endian `u32` site
//! count followed by `2ⁿ` little-endian `f64` values. Channel and family files are JSON
//! documents that reference those binaries by path relative to the JSON file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::counterfactual::{ChannelFamily, Member, ProjectionLog};
use crate::error::{LaceError, Result};
use crate::estimate::{DecayFit, FitSummary, LearnedChannel};
use crate::prob::{EigenvalueVector, ProbDist};
use crate::surface::CodeLayout;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Path of the manifest written beside `output`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// Provenance record of one CLI run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    /// SHA-256 over the arguments and every input file, in order.
    pub config_digest: String,
    pub master_seed: Option<u64>,
    pub tool_version: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
    pub finished_unix: u64,
}

pub struct ManifestBuilder {
    command: String,
    args: Vec<String>,
    seed: Option<u64>,
    hasher: Sha256,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    start: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, args: Vec<String>, seed: Option<u64>) -> Self {
        let mut hasher = Sha256::new();
        for a in &args {
            hasher.update(a.as_bytes());
            hasher.update([0]);
        }
        Self {
            command: command.to_string(),
            args,
            seed,
            hasher,
            inputs: vec![],
            outputs: vec![],
            start: Instant::now(),
        }
    }

    /// Record an input file and fold its bytes into the digest.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let mut f = BufReader::new(File::open(path)?);
        let mut buf = vec![0u8; 1 << 16];
        loop {
            let k = f.read(&mut buf)?;
            if k == 0 {
                break;
            }
            self.hasher.update(&buf[..k]);
        }
        self.inputs.push(path.to_path_buf());
        Ok(())
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn outputs(&mut self, paths: &[PathBuf]) {
        self.outputs.extend_from_slice(paths);
    }

    /// Write the manifest beside `primary` and return it.
    pub fn finish(self, primary: &Path) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: self.command,
            args: self.args,
            config_digest: hex::encode(self.hasher.finalize()),
            master_seed: self.seed,
            tool_version: TOOL_VERSION.to_string(),
            inputs: self.inputs,
            outputs: self.outputs,
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
            finished_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        };
        std::fs::write(manifest_path(primary), serde_json::to_string_pretty(&manifest)?)?;
        Ok(manifest)
    }
}

pub fn write_dist(path: &Path, p: &ProbDist) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    p.write_binary(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_dist(path: &Path) -> Result<ProbDist> {
    ProbDist::read_binary(BufReader::new(File::open(path)?))
}

pub fn write_eigen(path: &Path, l: &EigenvalueVector) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(l.num_sites() as u32).to_le_bytes())?;
    for v in l.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_eigen(path: &Path) -> Result<EigenvalueVector> {
    let mut r = BufReader::new(File::open(path)?);
    let mut head = [0u8; 4];
    r.read_exact(&mut head)?;
    let n = u32::from_le_bytes(head) as usize;
    if n > crate::prob::MAX_SITES {
        return Err(LaceError::Data(format!("eigenvalue file claims {n} sites")));
    }
    let mut bytes = vec![0u8; 8 << n];
    r.read_exact(&mut bytes)?;
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    EigenvalueVector::new(n, values)
}

/// `dir/stem.suffix` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn relative_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn resolve(json_path: &Path, name: &str) -> PathBuf {
    json_path.parent().map(|d| d.join(name)).unwrap_or_else(|| PathBuf::from(name))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutShape {
    pub rows: usize,
    pub cols: usize,
}

impl LayoutShape {
    pub fn of(layout: &CodeLayout) -> Self {
        Self { rows: layout.rows, cols: layout.cols }
    }

    pub fn build(&self) -> Result<CodeLayout> {
        CodeLayout::new(self.rows, self.cols)
    }
}

/// JSON part of a learned channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelHeader {
    pub layout: Option<LayoutShape>,
    pub sites: Vec<usize>,
    pub summary: FitSummary,
    pub single_site_fits: Vec<DecayFit>,
    /// Per-qubit error rates per stabilizer round.
    pub qubit_rates: Vec<f64>,
    pub eigenvalues_file: String,
    pub distribution_file: String,
}

/// A channel as read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelData {
    pub header: ChannelHeader,
    pub eigenvalues: EigenvalueVector,
    pub distribution: ProbDist,
}

/// Write `channel.json` plus its `.eig.bin` and `.dist.bin` siblings; returns every path written.
pub fn write_channel(path: &Path, ch: &LearnedChannel, layout: Option<&CodeLayout>) -> Result<Vec<PathBuf>> {
    let eig = sibling(path, "eig.bin");
    let dist = sibling(path, "dist.bin");
    write_eigen(&eig, &ch.eigenvalues)?;
    write_dist(&dist, &ch.distribution)?;
    let header = ChannelHeader {
        layout: layout.map(LayoutShape::of),
        sites: ch.sites.clone(),
        summary: ch.summary.clone(),
        single_site_fits: (0..ch.num_sites()).map(|k| ch.fits[1 << k]).collect(),
        qubit_rates: crate::estimate::qubit_error_rates(ch, true)?,
        eigenvalues_file: relative_name(&eig),
        distribution_file: relative_name(&dist),
    };
    std::fs::write(path, serde_json::to_string_pretty(&header)?)?;
    Ok(vec![path.to_path_buf(), eig, dist])
}

pub fn read_channel(path: &Path) -> Result<ChannelData> {
    let header: ChannelHeader = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let eigenvalues = read_eigen(&resolve(path, &header.eigenvalues_file))?;
    let distribution = read_dist(&resolve(path, &header.distribution_file))?;
    if eigenvalues.num_sites() != header.sites.len() || distribution.num_sites() != header.sites.len() {
        return Err(LaceError::Data("channel binaries disagree with the header".into()));
    }
    Ok(ChannelData { header, eigenvalues, distribution })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyEntry {
    pub t: f64,
    pub average_rate: f64,
    pub distribution_file: String,
    pub log: ProjectionLog,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyManifest {
    pub layout: Option<LayoutShape>,
    pub source: String,
    pub members: Vec<FamilyEntry>,
}

/// Write `family.json` plus one `.t<k>.bin` distribution per member.
pub fn write_family(
    path: &Path,
    family: &ChannelFamily,
    layout: Option<LayoutShape>,
    source: &str,
) -> Result<Vec<PathBuf>> {
    let mut written = vec![path.to_path_buf()];
    let mut members = Vec::new();
    for (k, m) in family.members.iter().enumerate() {
        let file = sibling(path, &format!("t{k}.bin"));
        write_dist(&file, &m.distribution)?;
        members.push(FamilyEntry {
            t: m.t,
            average_rate: m.distribution.mean_site_rate(),
            distribution_file: relative_name(&file),
            log: m.log.clone(),
        });
        written.push(file);
    }
    let manifest = FamilyManifest { layout, source: source.to_string(), members };
    std::fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(written)
}

pub fn read_family(path: &Path) -> Result<(FamilyManifest, ChannelFamily)> {
    let manifest: FamilyManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let members = manifest
        .members
        .iter()
        .map(|e| {
            Ok(Member { t: e.t, distribution: read_dist(&resolve(path, &e.distribution_file))?, log: e.log.clone() })
        })
        .collect::<Result<_>>()?;
    Ok((manifest, ChannelFamily { members }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_sits_beside_output() {
        assert_eq!(manifest_path(Path::new("/a/b/shots.lace")), PathBuf::from("/a/b/shots.lace.manifest.json"));
    }

    #[test]
    fn eigen_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let l = EigenvalueVector::new(2, vec![1.0, 0.5, -0.25, 0.125]).unwrap();
        let p = dir.path().join("x.bin");
        write_eigen(&p, &l).unwrap();
        assert_eq!(read_eigen(&p).unwrap(), l);
    }

    #[test]
    fn digest_depends_on_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        std::fs::write(&a, "{}").unwrap();
        let out = dir.path().join("out.json");
        let mut m1 = ManifestBuilder::new("plan", vec!["--seed".into(), "1".into()], Some(1));
        m1.input(&a).unwrap();
        let d1 = m1.finish(&out).unwrap().config_digest;
        std::fs::write(&a, "{ }").unwrap();
        let mut m2 = ManifestBuilder::new("plan", vec!["--seed".into(), "1".into()], Some(1));
        m2.input(&a).unwrap();
        let d2 = m2.finish(&out).unwrap().config_digest;
        assert_ne!(d1, d2);
        assert!(manifest_path(&out).exists());
    }
}
