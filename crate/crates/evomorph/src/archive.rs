//! On-disk run archives.
//!
//! A run directory holds a JSON manifest, three CSV tables, and per-robot
//! genome files:
//!
//! ```text
//! config.json                   manifest: schema, tool version, config
//! individuals.csv               one row per robot ever born
//! populations.csv               population membership per generation
//! learning.csv                  every assessment of every robot
//! genomes/robot_<id>.body.json  body genome (CPPN)
//! genomes/robot_<id>.brain.csv  brain weight matrix
//! genomes/robot_<id>.morph.json decoded body
//! ```
//!
//! All numeric CSV fields are formatted by the standard float formatter, so
//! equal runs produce byte-identical tables regardless of thread count. The
//! manifest records a creation timestamp and is excluded from that promise.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::brain::BrainGenome;
use crate::cppn::CppnGenome;
use crate::evolve::{EvolutionConfig, RunResult};
use crate::morphology::MorphologyTree;

pub const ARCHIVE_SCHEMA: u32 = 1;

pub const INDIVIDUALS_HEADER: &str =
    "generation,individual_id,parents,fitness_before,fitness_after,n_modules,n_joints,body_hash";
pub const POPULATIONS_HEADER: &str = "generation,individual_id";
pub const LEARNING_HEADER: &str = "robot_id,assessment,fitness";

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed archive: {0}")]
    Malformed(String),
}

fn malformed(msg: impl Into<String>) -> ArchiveError {
    ArchiveError::Malformed(msg.into())
}

/// Whether the run evolved bodies or froze them to the founders' shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Evolved,
    FixedBody,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchiveManifest {
    pub archive_schema: u32,
    pub tool_version: String,
    pub created_unix: u64,
    pub mode: RunMode,
    pub config: EvolutionConfig,
}

/// One row of `individuals.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualRecord {
    pub generation: usize,
    pub id: usize,
    pub parents: Option<(usize, usize)>,
    pub fitness_before: f64,
    pub fitness_after: f64,
    pub n_modules: usize,
    pub n_joints: usize,
    pub body_hash: String,
}

fn parents_field(parents: Option<(usize, usize)>) -> String {
    match parents {
        Some((a, b)) => format!("{a}|{b}"),
        None => "-".to_string(),
    }
}

fn parse_parents(field: &str) -> Result<Option<(usize, usize)>, ArchiveError> {
    if field == "-" {
        return Ok(None);
    }
    let (a, b) = field
        .split_once('|')
        .ok_or_else(|| malformed(format!("bad parents field {field:?}")))?;
    let a = a.parse().map_err(|e| malformed(format!("bad parent id {a:?}: {e}")))?;
    let b = b.parse().map_err(|e| malformed(format!("bad parent id {b:?}: {e}")))?;
    Ok(Some((a, b)))
}

fn genome_dir(root: &Path) -> PathBuf {
    root.join("genomes")
}

fn body_path(root: &Path, id: usize) -> PathBuf {
    genome_dir(root).join(format!("robot_{id}.body.json"))
}

fn brain_path(root: &Path, id: usize) -> PathBuf {
    genome_dir(root).join(format!("robot_{id}.brain.csv"))
}

fn morph_path(root: &Path, id: usize) -> PathBuf {
    genome_dir(root).join(format!("robot_{id}.morph.json"))
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Write a complete run archive into `dir` (created if needed).
pub fn save_run(
    dir: &Path,
    cfg: &EvolutionConfig,
    mode: RunMode,
    result: &RunResult,
) -> Result<(), ArchiveError> {
    fs::create_dir_all(genome_dir(dir))?;

    let manifest = ArchiveManifest {
        archive_schema: ARCHIVE_SCHEMA,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix: unix_now(),
        mode,
        config: cfg.clone(),
    };
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(&manifest)?)?;

    let mut individuals = String::from(INDIVIDUALS_HEADER);
    individuals.push('\n');
    for ind in &result.individuals {
        individuals.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            ind.generation,
            ind.id,
            parents_field(ind.parents),
            ind.fitness_before,
            ind.fitness_after,
            ind.body.len(),
            ind.body.n_joints(),
            ind.body.body_hash(),
        ));
    }
    fs::write(dir.join("individuals.csv"), individuals)?;

    let mut populations = String::from(POPULATIONS_HEADER);
    populations.push('\n');
    for (generation, population) in result.populations.iter().enumerate() {
        for id in population {
            populations.push_str(&format!("{generation},{id}\n"));
        }
    }
    fs::write(dir.join("populations.csv"), populations)?;

    let mut learning = fs::File::create(dir.join("learning.csv"))?;
    writeln!(learning, "{LEARNING_HEADER}")?;
    for ind in &result.individuals {
        for (assessment, fitness) in ind.learning_history.iter().enumerate() {
            writeln!(learning, "{},{assessment},{fitness}", ind.id)?;
        }
    }

    for ind in &result.individuals {
        fs::write(body_path(dir, ind.id), ind.cppn.to_json())?;
        fs::write(brain_path(dir, ind.id), ind.brain.to_csv(ind.learn_seed))?;
        fs::write(morph_path(dir, ind.id), ind.body.to_json())?;
    }
    Ok(())
}

/// A run directory opened for reading. The manifest and the two light CSV
/// tables are loaded eagerly; learning curves and genome files on demand.
#[derive(Debug)]
pub struct RunArchive {
    root: PathBuf,
    pub manifest: ArchiveManifest,
    pub individuals: Vec<IndividualRecord>,
    /// Population member ids per generation.
    pub populations: Vec<Vec<usize>>,
}

impl RunArchive {
    pub fn open(dir: &Path) -> Result<Self, ArchiveError> {
        let manifest: ArchiveManifest =
            serde_json::from_str(&fs::read_to_string(dir.join("config.json"))?)?;
        if manifest.archive_schema != ARCHIVE_SCHEMA {
            return Err(malformed(format!(
                "archive schema {} is not supported (expected {ARCHIVE_SCHEMA})",
                manifest.archive_schema
            )));
        }

        let individuals_text = fs::read_to_string(dir.join("individuals.csv"))?;
        let mut lines = individuals_text.lines();
        let header = lines.next().unwrap_or_default();
        if header != INDIVIDUALS_HEADER {
            return Err(malformed(format!("individuals.csv header {header:?}")));
        }
        let mut individuals = Vec::new();
        for (n, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(malformed(format!(
                    "individuals.csv row {n} has {} fields",
                    fields.len()
                )));
            }
            let num = |s: &str, what: &str| -> Result<usize, ArchiveError> {
                s.parse().map_err(|e| malformed(format!("row {n} {what} {s:?}: {e}")))
            };
            let float = |s: &str, what: &str| -> Result<f64, ArchiveError> {
                s.parse().map_err(|e| malformed(format!("row {n} {what} {s:?}: {e}")))
            };
            individuals.push(IndividualRecord {
                generation: num(fields[0], "generation")?,
                id: num(fields[1], "individual_id")?,
                parents: parse_parents(fields[2])?,
                fitness_before: float(fields[3], "fitness_before")?,
                fitness_after: float(fields[4], "fitness_after")?,
                n_modules: num(fields[5], "n_modules")?,
                n_joints: num(fields[6], "n_joints")?,
                body_hash: fields[7].to_string(),
            });
        }

        let populations_text = fs::read_to_string(dir.join("populations.csv"))?;
        let mut lines = populations_text.lines();
        let header = lines.next().unwrap_or_default();
        if header != POPULATIONS_HEADER {
            return Err(malformed(format!("populations.csv header {header:?}")));
        }
        let mut by_generation: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (n, line) in lines.enumerate() {
            let (generation, id) = line
                .split_once(',')
                .ok_or_else(|| malformed(format!("populations.csv row {n}: {line:?}")))?;
            let generation = generation
                .parse()
                .map_err(|e| malformed(format!("populations.csv row {n}: {e}")))?;
            let id = id.parse().map_err(|e| malformed(format!("populations.csv row {n}: {e}")))?;
            by_generation.entry(generation).or_default().push(id);
        }
        let generations = by_generation.len();
        if by_generation.keys().enumerate().any(|(i, &g)| i != g) {
            return Err(malformed("populations.csv generations are not contiguous from 0"));
        }
        let populations: Vec<Vec<usize>> = by_generation.into_values().collect();
        if generations == 0 {
            return Err(malformed("populations.csv lists no generations"));
        }

        Ok(RunArchive { root: dir.to_path_buf(), manifest, individuals, populations })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Assessment fitness per robot, in assessment order.
    pub fn learning_histories(&self) -> Result<BTreeMap<usize, Vec<f64>>, ArchiveError> {
        let text = fs::read_to_string(self.root.join("learning.csv"))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != LEARNING_HEADER {
            return Err(malformed(format!("learning.csv header {header:?}")));
        }
        let mut histories: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (n, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(malformed(format!("learning.csv row {n}: {line:?}")));
            }
            let robot: usize = fields[0]
                .parse()
                .map_err(|e| malformed(format!("learning.csv row {n}: {e}")))?;
            let assessment: usize = fields[1]
                .parse()
                .map_err(|e| malformed(format!("learning.csv row {n}: {e}")))?;
            let fitness: f64 = fields[2]
                .parse()
                .map_err(|e| malformed(format!("learning.csv row {n}: {e}")))?;
            let history = histories.entry(robot).or_default();
            if assessment != history.len() {
                return Err(malformed(format!(
                    "learning.csv row {n}: robot {robot} assessment {assessment} out of order"
                )));
            }
            history.push(fitness);
        }
        Ok(histories)
    }

    pub fn body_genome(&self, id: usize) -> Result<CppnGenome, ArchiveError> {
        let text = fs::read_to_string(body_path(&self.root, id))?;
        CppnGenome::from_json(&text).map_err(ArchiveError::Json)
    }

    pub fn brain(&self, id: usize) -> Result<(BrainGenome, u64), ArchiveError> {
        let text = fs::read_to_string(brain_path(&self.root, id))?;
        BrainGenome::from_csv(&text).map_err(|e| malformed(format!("robot {id} brain: {e}")))
    }

    pub fn morphology(&self, id: usize) -> Result<MorphologyTree, ArchiveError> {
        let text = fs::read_to_string(morph_path(&self.root, id))?;
        MorphologyTree::from_json(&text)
            .map_err(|e| malformed(format!("robot {id} morphology: {e}")))
    }

    /// Decoded bodies of every individual, indexed by id.
    pub fn morphologies(&self) -> Result<Vec<MorphologyTree>, ArchiveError> {
        (0..self.individuals.len()).map(|id| self.morphology(id)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaReport {
    pub individuals: usize,
    pub generations: usize,
    pub assessments: usize,
    pub problems: Vec<String>,
}

impl SchemaReport {
    pub fn is_clean(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Validate an archive: table shapes, cross-file consistency, genome files,
/// and body hashes. Structural damage surfaces as listed problems rather
/// than an error; only unreadable files error out.
pub fn schema_check(dir: &Path) -> Result<SchemaReport, ArchiveError> {
    let archive = RunArchive::open(dir)?;
    let mut problems = Vec::new();
    let cfg = &archive.manifest.config;

    if archive.individuals.len() != cfg.total_individuals() {
        problems.push(format!(
            "expected {} individuals, found {}",
            cfg.total_individuals(),
            archive.individuals.len()
        ));
    }
    for (n, record) in archive.individuals.iter().enumerate() {
        if record.id != n {
            problems.push(format!("individuals.csv row {n} has id {}", record.id));
            break;
        }
    }
    for record in &archive.individuals {
        match (record.generation, record.parents) {
            (0, Some(_)) => problems.push(format!("founder {} lists parents", record.id)),
            (g, None) if g > 0 => {
                problems.push(format!("offspring {} lists no parents", record.id))
            }
            _ => {}
        }
        if let Some((a, b)) = record.parents {
            if a >= record.id || b >= record.id {
                problems.push(format!("individual {} born before a parent", record.id));
            }
        }
    }

    if archive.populations.len() != cfg.generations {
        problems.push(format!(
            "expected {} generations in populations.csv, found {}",
            cfg.generations,
            archive.populations.len()
        ));
    }
    for (generation, population) in archive.populations.iter().enumerate() {
        if population.len() != cfg.population_size {
            problems.push(format!(
                "generation {generation} population has {} members",
                population.len()
            ));
        }
        for &id in population {
            if id >= archive.individuals.len() {
                problems.push(format!("generation {generation} lists unknown robot {id}"));
            }
        }
    }

    let mut assessments = 0;
    match archive.learning_histories() {
        Ok(histories) => {
            assessments = histories.values().map(Vec::len).sum();
            let expected = cfg.learn.total_samples();
            for (id, record) in archive.individuals.iter().enumerate() {
                match histories.get(&id) {
                    None => problems.push(format!("robot {id} has no learning curve")),
                    Some(history) => {
                        if history.len() != expected {
                            problems.push(format!(
                                "robot {id} has {} assessments, expected {expected}",
                                history.len()
                            ));
                        }
                        if history.first() != Some(&record.fitness_before) {
                            problems.push(format!(
                                "robot {id} fitness_before disagrees with learning.csv"
                            ));
                        }
                        let best =
                            history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        if best != record.fitness_after {
                            problems.push(format!(
                                "robot {id} fitness_after disagrees with learning.csv"
                            ));
                        }
                    }
                }
            }
        }
        Err(e) => problems.push(format!("learning.csv: {e}")),
    }

    for record in &archive.individuals {
        let id = record.id;
        match archive.morphology(id) {
            Ok(body) => {
                if body.body_hash() != record.body_hash {
                    problems.push(format!("robot {id} body hash mismatch"));
                }
                if body.len() != record.n_modules || body.n_joints() != record.n_joints {
                    problems.push(format!("robot {id} module counts disagree with its body"));
                }
            }
            Err(e) => problems.push(format!("robot {id}: {e}")),
        }
        if let Err(e) = archive.brain(id) {
            problems.push(format!("robot {id}: {e}"));
        }
        if let Err(e) = archive.body_genome(id) {
            problems.push(format!("robot {id} body genome: {e}"));
        }
    }

    Ok(SchemaReport {
        individuals: archive.individuals.len(),
        generations: archive.populations.len(),
        assessments,
        problems,
    })
}
