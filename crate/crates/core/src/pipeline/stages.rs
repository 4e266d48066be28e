//! The six batch stages. Each reads flat files, writes flat files into its
//! own output directory, and finishes with a `manifest.json` digesting both
//! sides. Stages only ever read the outputs of earlier stages.

use super::ledger::{write_ledger, LEDGER_FILE};
use super::manifest::{sha256_hex, RunManifest};
use crate::attribution::{
    aggregate, ds_substitution_report, fit_alpha, pg_attack, pg_serve_receive, pythagorean_winpct,
    AggregateBasis, AggregateLevel, MinContacts, PointsGainedEntry, DEFAULT_ALPHA,
};
use crate::error::{Error, Result};
use crate::ingest::{
    assemble_points, parse_contact_file, parse_lineup_file, read_point_archive,
    write_point_archive, IngestError, SchemaConfig,
};
use crate::markov::{
    absorb_with_tol, MarkovError, PwpTable, StateKey, TransitionModel, DEFAULT_BASELINE_SUPPORT,
    DEFAULT_RESIDUAL_TOL,
};
use crate::mixed::{load_fit, save_fit, FitOptions, MixedFit};
use crate::sos::{
    build_attack_dataset, build_serve_dataset, fit_attack_models, fit_serve_model, AttackModels,
    DEFAULT_TABLE_SUPPORT,
};
use crate::synth::{generate_season, SyntheticConfig};
use crate::types::{PointLog, SkillType, TeamId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const POINTS_FILE: &str = "points.jsonl";
pub const REJECTIONS_FILE: &str = "rejections.json";
pub const PWP_FILE: &str = "pwp.json";
pub const PWP_CSV_FILE: &str = "pwp_states.csv";
pub const MODEL_FILE: &str = "transition_model.json";
pub const SERVE_FIT_FILE: &str = "serve_fit.json";
pub const ATTACK_MODELS_FILE: &str = "attack_models.json";
pub const RESPONSIBILITY_FILE: &str = "responsibility.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONTACTS_FILE: &str = "contacts.csv";
pub const LINEUPS_FILE: &str = "lineups.csv";
pub const TRUTH_FILE: &str = "truth.json";
pub const REPORT_FILE: &str = "points_gained.csv";
pub const PYTHAGOREAN_FILE: &str = "pythagorean.csv";
pub const ALPHA_FIT_FILE: &str = "alpha_fit.json";
pub const DS_REPORT_FILE: &str = "ds_report.json";

pub fn attack_fit_file(k: usize) -> String {
    format!("attack_m{k}.json")
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

// ---------------------------------------------------------------- simulate

pub fn run_simulate(config: &SyntheticConfig, out_dir: &Path) -> Result<RunManifest> {
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::start("simulate");
    manifest.seed = Some(config.seed);
    manifest.config_digest = Some(sha256_hex(serde_json::to_string(config)?.as_bytes()));

    let season = generate_season(config)?;
    let contacts_path = out_dir.join(CONTACTS_FILE);
    let lineups_path = out_dir.join(LINEUPS_FILE);
    {
        let mut c = std::fs::File::create(&contacts_path)
            .map_err(|e| Error::io(contacts_path.display().to_string(), e))?;
        let mut l = std::fs::File::create(&lineups_path)
            .map_err(|e| Error::io(lineups_path.display().to_string(), e))?;
        season.write_files(&mut c, &mut l)?;
    }
    let truth_path = out_dir.join(TRUTH_FILE);
    write_json(
        &truth_path,
        &serde_json::json!({
            "config": config,
            "truth": season.truth,
            "match_results": season.match_results,
        }),
    )?;
    for p in [&contacts_path, &lineups_path, &truth_path] {
        manifest.record_output(p)?;
    }
    manifest.finish(out_dir)
}

// ------------------------------------------------------------------ ingest

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestSummary {
    pub points: usize,
    pub contacts: usize,
    pub contact_rejections: usize,
    pub lineup_rejections: usize,
    pub assembly_issues: usize,
}

pub fn run_ingest(
    contacts: &Path,
    lineups: &Path,
    schema: Option<&Path>,
    strict: bool,
    out_dir: &Path,
) -> Result<RunManifest> {
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::start("ingest");
    manifest.record_input(contacts)?;
    manifest.record_input(lineups)?;
    let schema_config = match schema {
        Some(path) => {
            manifest.record_input(path)?;
            SchemaConfig::from_path(path)?
        }
        None => SchemaConfig::canonical(),
    };

    let parsed = parse_contact_file(contacts, &schema_config)?;
    let (lineup_states, lineup_rejections) = parse_lineup_file(lineups, schema_config.delimiter)?;
    let assembled = assemble_points(&parsed.records, &lineup_states, &parsed.recorded_winners)?;

    if strict {
        let mut all = parsed.rejections.clone();
        all.extend(lineup_rejections.clone());
        all.extend(assembled.issues.clone());
        if let Some(first) = all.first() {
            return Err(IngestError::StrictRejection {
                count: all.len(),
                row: first.row,
                reason: first.reason.clone(),
            }
            .into());
        }
    }

    let points_path = out_dir.join(POINTS_FILE);
    write_point_archive(&points_path, &assembled.points)?;
    let rejections_path = out_dir.join(REJECTIONS_FILE);
    write_json(
        &rejections_path,
        &serde_json::json!({
            "contact_rejections": parsed.rejections,
            "lineup_rejections": lineup_rejections,
            "assembly_issues": assembled.issues,
        }),
    )?;
    let summary = IngestSummary {
        points: assembled.points.len(),
        contacts: parsed.records.len(),
        contact_rejections: parsed.rejections.len(),
        lineup_rejections: lineup_rejections.len(),
        assembly_issues: assembled.issues.len(),
    };
    let summary_path = out_dir.join(SUMMARY_FILE);
    write_json(&summary_path, &summary)?;
    for p in [&points_path, &rejections_path, &summary_path] {
        manifest.record_output(p)?;
    }
    manifest.finish(out_dir)
}

// ----------------------------------------------------------------- fit-pwp

/// `PwpTable` in a JSON-friendly layout (state keys as values, not map keys).
#[derive(Debug, Serialize, Deserialize)]
struct PwpDisk {
    rows: Vec<(StateKey, f64, u64, f64)>,
    backoff: Vec<(StateKey, StateKey)>,
    n_steps: u32,
    effective_steps: u32,
}

pub fn save_pwp(path: &Path, table: &PwpTable) -> Result<()> {
    let rows = table
        .v
        .iter()
        .map(|(s, &v)| (s.clone(), v, table.counts[s], table.residuals[s]))
        .collect();
    let backoff = table
        .backoff
        .iter()
        .map(|(a, b)| (a.clone(), b.clone()))
        .collect();
    write_json(
        path,
        &PwpDisk {
            rows,
            backoff,
            n_steps: table.n_steps,
            effective_steps: table.effective_steps,
        },
    )
}

pub fn load_pwp(path: &Path) -> Result<PwpTable> {
    let disk: PwpDisk = read_json(path)?;
    let mut table = PwpTable {
        v: BTreeMap::new(),
        counts: BTreeMap::new(),
        residuals: BTreeMap::new(),
        backoff: disk.backoff.into_iter().collect(),
        n_steps: disk.n_steps,
        effective_steps: disk.effective_steps,
    };
    for (s, v, count, residual) in disk.rows {
        table.counts.insert(s.clone(), count);
        table.residuals.insert(s.clone(), residual);
        table.v.insert(s, v);
    }
    Ok(table)
}

pub fn run_fit_pwp(
    points_path: &Path,
    support: u64,
    steps: u32,
    out_dir: &Path,
) -> Result<RunManifest> {
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::start("fit-pwp");
    manifest.record_input(points_path)?;

    let points = read_point_archive(points_path)?;
    let model = TransitionModel::fit(&points, support).map_err(MarkovError::from)?;
    let table = absorb_with_tol(&model, steps, DEFAULT_RESIDUAL_TOL)?;

    let model_path = out_dir.join(MODEL_FILE);
    let triplets: Vec<(usize, usize, u64)> = model
        .counts
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().map(move |(&j, &c)| (i, j, c)))
        .collect();
    write_json(
        &model_path,
        &serde_json::json!({
            "states": model.states,
            "counts": triplets,
            "support": model.support,
        }),
    )?;

    let pwp_path = out_dir.join(PWP_FILE);
    save_pwp(&pwp_path, &table)?;

    let csv_path = out_dir.join(PWP_CSV_FILE);
    let mut w = csv::Writer::from_path(&csv_path)
        .map_err(|e| Error::io(csv_path.display().to_string(), std::io::Error::other(e)))?;
    w.write_record(["state_key", "count", "v"])?;
    for (s, v) in &table.v {
        w.write_record([&s.to_string(), &table.counts[s].to_string(), &v.to_string()])?;
    }
    w.flush()
        .map_err(|e| Error::io(csv_path.display().to_string(), e))?;

    for p in [&model_path, &pwp_path, &csv_path] {
        manifest.record_output(p)?;
    }
    manifest.finish(out_dir)
}

// ----------------------------------------------------------------- fit-sos

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackModelIndex {
    pub rows: Vec<usize>,
    pub fitted: Vec<bool>,
}

pub fn load_attack_models(dir: &Path) -> Result<AttackModels> {
    let index: AttackModelIndex = read_json(&dir.join(ATTACK_MODELS_FILE))?;
    let mut fits: Vec<Option<MixedFit>> = Vec::with_capacity(7);
    for (k, &fitted) in index.fitted.iter().enumerate() {
        fits.push(if fitted {
            Some(load_fit(&dir.join(attack_fit_file(k + 1)))?)
        } else {
            None
        });
    }
    Ok(AttackModels {
        fits,
        rows: index.rows,
    })
}

pub fn run_fit_sos(
    points_path: &Path,
    pwp_dir: &Path,
    options: &FitOptions,
    out_dir: &Path,
) -> Result<RunManifest> {
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::start("fit-sos");
    manifest.record_input(points_path)?;
    let pwp_path = pwp_dir.join(PWP_FILE);
    manifest.record_input(&pwp_path)?;

    let points = read_point_archive(points_path)?;
    let pwp = load_pwp(&pwp_path)?;

    let serve_obs = build_serve_dataset(&points, &pwp)?;
    let serve_fit = fit_serve_model(&serve_obs, options)?;
    let serve_path = out_dir.join(SERVE_FIT_FILE);
    save_fit(&serve_path, &serve_fit)?;
    let mut outputs: Vec<PathBuf> = vec![serve_path];

    let dataset = build_attack_dataset(
        &points,
        &pwp,
        DEFAULT_TABLE_SUPPORT,
        DEFAULT_BASELINE_SUPPORT,
    )?;
    let models = fit_attack_models(&dataset.observations, options)?;
    for (k, fit) in models.fits.iter().enumerate() {
        if let Some(fit) = fit {
            let path = out_dir.join(attack_fit_file(k + 1));
            save_fit(&path, fit)?;
            outputs.push(path);
        }
    }
    let index_path = out_dir.join(ATTACK_MODELS_FILE);
    write_json(
        &index_path,
        &AttackModelIndex {
            rows: models.rows.clone(),
            fitted: models.fits.iter().map(Option::is_some).collect(),
        },
    )?;
    outputs.push(index_path);

    let resp_path = out_dir.join(RESPONSIBILITY_FILE);
    let mut w = csv::Writer::from_path(&resp_path)
        .map_err(|e| Error::io(resp_path.display().to_string(), std::io::Error::other(e)))?;
    w.write_record([
        "kind",
        "attack_code",
        "zone",
        "position",
        "count",
        "modal_count",
        "tied",
    ])?;
    let table = &dataset.table;
    let mut write_row =
        |kind: &str, code: &str, zone: &str, entry: &crate::sos::TableEntry| -> Result<()> {
            w.write_record([
                kind,
                code,
                zone,
                entry.position.name(),
                &entry.count.to_string(),
                &entry.modal_count.to_string(),
                &entry.tied.to_string(),
            ])?;
            Ok(())
        };
    for (code, entry) in &table.blocker {
        write_row("blocker", code, "", entry)?;
    }
    if let Some(entry) = &table.blocker_pooled {
        write_row("blocker_pooled", "", "", entry)?;
    }
    for ((code, zone), entry) in &table.digger {
        write_row("digger", code, &zone.to_string(), entry)?;
    }
    for (zone, entry) in &table.digger_by_zone {
        write_row("digger_zone", "", &zone.to_string(), entry)?;
    }
    if let Some(entry) = &table.digger_pooled {
        write_row("digger_pooled", "", "", entry)?;
    }
    w.flush()
        .map_err(|e| Error::io(resp_path.display().to_string(), e))?;
    outputs.push(resp_path);

    let summary_path = out_dir.join(SUMMARY_FILE);
    write_json(
        &summary_path,
        &serde_json::json!({
            "serve_observations": serve_obs.len(),
            "attack_observations": dataset.observations.len(),
            "unlabelable_attacks": dataset.unlabelable,
            "model_rows": models.rows,
            "serve_converged": serve_fit.convergence.converged,
        }),
    )?;
    outputs.push(summary_path);

    for p in &outputs {
        manifest.record_output(p)?;
    }
    manifest.finish(out_dir)
}

// --------------------------------------------------------------- attribute

pub fn compute_entries(
    points: &[PointLog],
    pwp: &PwpTable,
    serve_fit: &MixedFit,
    models: &AttackModels,
) -> Result<Vec<PointsGainedEntry>> {
    let serve_obs = build_serve_dataset(points, pwp)?;
    let dataset =
        build_attack_dataset(points, pwp, DEFAULT_TABLE_SUPPORT, DEFAULT_BASELINE_SUPPORT)?;
    let mut entries = Vec::new();
    for obs in &serve_obs {
        entries.extend(pg_serve_receive(obs, serve_fit));
    }
    for obs in &dataset.observations {
        entries.extend(pg_attack(obs, models)?);
    }
    Ok(entries)
}

pub fn run_attribute(
    points_path: &Path,
    pwp_dir: &Path,
    sos_dir: &Path,
    out_dir: &Path,
) -> Result<RunManifest> {
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::start("attribute");
    manifest.record_input(points_path)?;
    let pwp_path = pwp_dir.join(PWP_FILE);
    manifest.record_input(&pwp_path)?;
    let serve_path = sos_dir.join(SERVE_FIT_FILE);
    manifest.record_input(&serve_path)?;

    let points = read_point_archive(points_path)?;
    let pwp = load_pwp(&pwp_path)?;
    let serve_fit = load_fit(&serve_path)?;
    let models = load_attack_models(sos_dir)?;
    let entries = compute_entries(&points, &pwp, &serve_fit, &models)?;

    let ledger_path = out_dir.join(LEDGER_FILE);
    write_ledger(&ledger_path, &entries)?;

    let mut per_skill: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for e in &entries {
        let slot = per_skill.entry(e.skill.name()).or_default();
        slot.0 += 1;
        slot.1 += e.adjusted_pg;
    }
    let summary_path = out_dir.join(SUMMARY_FILE);
    write_json(
        &summary_path,
        &serde_json::json!({
            "entries": entries.len(),
            "per_skill": per_skill
                .into_iter()
                .map(|(k, (n, total))| (k, serde_json::json!({"entries": n, "total_adjusted_pg": total})))
                .collect::<BTreeMap<_, _>>(),
        }),
    )?;

    for p in [&ledger_path, &summary_path] {
        manifest.record_output(p)?;
    }
    manifest.finish(out_dir)
}

// ------------------------------------------------------------------ report

#[derive(Debug, Clone, Copy)]
pub struct ReportOptions {
    pub level: AggregateLevel,
    pub basis: AggregateBasis,
    pub min_contacts: u64,
    pub top: Option<usize>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            level: AggregateLevel::Player,
            basis: AggregateBasis::PerSet,
            min_contacts: 0,
            top: None,
        }
    }
}

const HISTOGRAM_BINS: usize = 60;
const HISTOGRAM_RANGE: f64 = 0.3;

fn write_histogram(path: &Path, values: &[f64]) -> Result<()> {
    let width = 2.0 * HISTOGRAM_RANGE / HISTOGRAM_BINS as f64;
    let mut counts = vec![0u64; HISTOGRAM_BINS];
    for &v in values {
        let idx = ((v + HISTOGRAM_RANGE) / width).floor();
        let idx = idx.clamp(0.0, (HISTOGRAM_BINS - 1) as f64) as usize;
        counts[idx] += 1;
    }
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::io(path.display().to_string(), std::io::Error::other(e)))?;
    w.write_record(["bin_lo", "bin_hi", "count"])?;
    for (i, c) in counts.iter().enumerate() {
        let lo = -HISTOGRAM_RANGE + i as f64 * width;
        w.write_record([&lo.to_string(), &(lo + width).to_string(), &c.to_string()])?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn run_report(
    points_path: &Path,
    attribute_dir: &Path,
    options: &ReportOptions,
    out_dir: &Path,
) -> Result<RunManifest> {
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::start("report");
    manifest.record_input(points_path)?;
    let ledger_path = attribute_dir.join(LEDGER_FILE);
    manifest.record_input(&ledger_path)?;

    let points = read_point_archive(points_path)?;
    let entries = super::ledger::read_ledger(&ledger_path)?;
    let mut outputs: Vec<PathBuf> = Vec::new();

    // Table-5 shaped aggregate: per-skill PG columns plus the mean SoS.
    let rows = aggregate(
        &entries,
        &points,
        options.level,
        options.basis,
        &MinContacts::uniform(options.min_contacts),
    );
    let shown = options.top.unwrap_or(rows.len()).min(rows.len());
    let report_path = out_dir.join(REPORT_FILE);
    let mut w = csv::Writer::from_path(&report_path)
        .map_err(|e| Error::io(report_path.display().to_string(), std::io::Error::other(e)))?;
    w.write_record([
        "entity",
        "team",
        "conference",
        "pos",
        "sets",
        "contacts",
        "srv",
        "pass",
        "set",
        "att",
        "blk",
        "total",
        "total_raw",
        "mean_sos",
    ])?;
    for row in &rows[..shown] {
        w.write_record([
            row.entity.as_str(),
            row.team.as_deref().unwrap_or(""),
            row.conference.as_deref().unwrap_or(""),
            row.pos.as_str(),
            &row.sets.to_string(),
            &row.contacts.to_string(),
            &opt(row.srv),
            &opt(row.pass),
            &opt(row.set),
            &opt(row.att),
            &opt(row.blk),
            &row.total.to_string(),
            &row.total_raw.to_string(),
            &row.mean_sos.to_string(),
        ])?;
    }
    w.flush()
        .map_err(|e| Error::io(report_path.display().to_string(), e))?;
    outputs.push(report_path);

    // Histogram data files, one per credited skill.
    let mut by_skill: BTreeMap<SkillType, Vec<f64>> = BTreeMap::new();
    for e in &entries {
        by_skill.entry(e.skill).or_default().push(e.adjusted_pg);
    }
    for (skill, values) in &by_skill {
        let path = out_dir.join(format!(
            "histogram_{}.csv",
            skill.name().to_ascii_lowercase()
        ));
        write_histogram(&path, values)?;
        outputs.push(path);
    }

    // Table-7 shaped Pythagorean summary over team seasons.
    let mut scored: BTreeMap<TeamId, (f64, f64)> = BTreeMap::new();
    let mut match_points: BTreeMap<(crate::types::MatchId, TeamId), u32> = BTreeMap::new();
    for p in &points {
        let loser = if p.winner == p.serving_team {
            &p.receiving_team
        } else {
            &p.serving_team
        };
        scored.entry(p.winner.clone()).or_default().0 += 1.0;
        scored.entry(loser.clone()).or_default().1 += 1.0;
        *match_points
            .entry((p.match_id.clone(), p.winner.clone()))
            .or_default() += 1;
    }
    let mut per_match: BTreeMap<crate::types::MatchId, Vec<(TeamId, u32)>> = BTreeMap::new();
    for ((m, team), pts) in &match_points {
        per_match
            .entry(m.clone())
            .or_default()
            .push((team.clone(), *pts));
    }
    let mut wins: BTreeMap<TeamId, (u32, u32)> = BTreeMap::new();
    for teams in per_match.values() {
        if let Some((winner, best)) = teams
            .iter()
            .max_by_key(|(_, pts)| *pts)
            .map(|(t, p)| (t.clone(), *p))
        {
            // A drawn match (possible in a fixed-length simulation) counts
            // for neither side.
            if teams.iter().filter(|(_, p)| *p == best).count() == 1 {
                for (team, _) in teams {
                    let slot = wins.entry(team.clone()).or_default();
                    slot.1 += 1;
                    if *team == winner {
                        slot.0 += 1;
                    }
                }
            }
        }
    }
    let pyth_path = out_dir.join(PYTHAGOREAN_FILE);
    let mut w = csv::Writer::from_path(&pyth_path)
        .map_err(|e| Error::io(pyth_path.display().to_string(), std::io::Error::other(e)))?;
    w.write_record([
        "team",
        "points_scored",
        "points_allowed",
        "matches",
        "match_wins",
        "actual_winpct",
        "expected_winpct",
    ])?;
    let mut records = Vec::new();
    for (team, &(ps, pa)) in &scored {
        let (won, played) = wins.get(team).copied().unwrap_or((0, 0));
        let actual = if played > 0 {
            won as f64 / played as f64
        } else {
            0.5
        };
        let expected = pythagorean_winpct(ps, pa, DEFAULT_ALPHA).unwrap_or(0.5);
        if played > 0 {
            records.push((ps, pa, actual));
        }
        w.write_record([
            team.as_str(),
            &ps.to_string(),
            &pa.to_string(),
            &played.to_string(),
            &won.to_string(),
            &actual.to_string(),
            &expected.to_string(),
        ])?;
    }
    w.flush()
        .map_err(|e| Error::io(pyth_path.display().to_string(), e))?;
    outputs.push(pyth_path);

    let alpha_path = out_dir.join(ALPHA_FIT_FILE);
    match fit_alpha(&records) {
        Ok(fit) => write_json(&alpha_path, &fit)?,
        Err(e) => write_json(&alpha_path, &serde_json::json!({ "error": e.to_string() }))?,
    }
    outputs.push(alpha_path);

    let ds_path = out_dir.join(DS_REPORT_FILE);
    match ds_substitution_report(&entries, &points) {
        Ok(report) => write_json(&ds_path, &report)?,
        Err(e) => write_json(&ds_path, &serde_json::json!({ "error": e.to_string() }))?,
    }
    outputs.push(ds_path);

    for p in &outputs {
        manifest.record_output(p)?;
    }
    manifest.finish(out_dir)
}
