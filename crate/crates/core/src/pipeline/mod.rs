//! Batch pipeline stages and the run manifest tying artifacts together.
//!
//! Stage order is simulate/ingest -> fit-pwp -> fit-sos -> attribute ->
//! report; each stage writes into its own directory and finishes with a
//! `manifest.json` digesting inputs and outputs, so determinism can be
//! checked by comparing digests across runs.

mod ledger;
mod manifest;
mod stages;

pub use ledger::{read_ledger, write_ledger, LEDGER_FILE};
pub use manifest::{sha256_file, sha256_hex, RunManifest, MANIFEST_FILE};
pub use stages::{
    attack_fit_file, compute_entries, load_attack_models, load_pwp, run_attribute, run_fit_pwp,
    run_fit_sos, run_ingest, run_report, run_simulate, save_pwp, AttackModelIndex, IngestSummary,
    ReportOptions, ALPHA_FIT_FILE, ATTACK_MODELS_FILE, CONTACTS_FILE, DS_REPORT_FILE, LINEUPS_FILE,
    MODEL_FILE, POINTS_FILE, PWP_CSV_FILE, PWP_FILE, PYTHAGOREAN_FILE, REJECTIONS_FILE,
    REPORT_FILE, RESPONSIBILITY_FILE, SERVE_FIT_FILE, SUMMARY_FILE, TRUTH_FILE,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixed::FitOptions;
    use crate::synth::{EffectSds, SyntheticConfig};
    use std::path::{Path, PathBuf};

    fn config() -> SyntheticConfig {
        SyntheticConfig {
            matches: 10,
            points_per_match: 50,
            effects: EffectSds::default(),
            seed: 21,
            ..SyntheticConfig::default()
        }
    }

    struct Dirs {
        _root: tempfile::TempDir,
        sim: PathBuf,
        ingest: PathBuf,
        pwp: PathBuf,
        sos: PathBuf,
        attr: PathBuf,
        report: PathBuf,
    }

    fn run_pipeline(config: &SyntheticConfig) -> Dirs {
        let root = tempfile::tempdir().unwrap();
        let d = |name: &str| root.path().join(name);
        let dirs = Dirs {
            sim: d("sim"),
            ingest: d("ingest"),
            pwp: d("pwp"),
            sos: d("sos"),
            attr: d("attr"),
            report: d("report"),
            _root: root,
        };
        run_simulate(config, &dirs.sim).unwrap();
        run_ingest(
            &dirs.sim.join(CONTACTS_FILE),
            &dirs.sim.join(LINEUPS_FILE),
            None,
            true,
            &dirs.ingest,
        )
        .unwrap();
        let points = dirs.ingest.join(POINTS_FILE);
        run_fit_pwp(&points, 20, 100, &dirs.pwp).unwrap();
        let options = FitOptions {
            max_iters: 200,
            tol: 1e-6,
        };
        run_fit_sos(&points, &dirs.pwp, &options, &dirs.sos).unwrap();
        run_attribute(&points, &dirs.pwp, &dirs.sos, &dirs.attr).unwrap();
        run_report(&points, &dirs.attr, &ReportOptions::default(), &dirs.report).unwrap();
        dirs
    }

    fn output_digests(dir: &Path) -> std::collections::BTreeMap<String, String> {
        RunManifest::load(dir).unwrap().output_digests
    }

    #[test]
    fn full_pipeline_runs_and_is_deterministic() {
        let config = config();
        let a = run_pipeline(&config);
        let b = run_pipeline(&config);
        for (da, db) in [
            (&a.sim, &b.sim),
            (&a.ingest, &b.ingest),
            (&a.pwp, &b.pwp),
            (&a.sos, &b.sos),
            (&a.attr, &b.attr),
            (&a.report, &b.report),
        ] {
            assert_eq!(output_digests(da), output_digests(db));
        }
        // Chain integrity: attribute consumed what fit-pwp produced.
        let pwp_manifest = RunManifest::load(&a.pwp).unwrap();
        let attr_manifest = RunManifest::load(&a.attr).unwrap();
        assert_eq!(
            pwp_manifest.output_digests.get(PWP_FILE),
            attr_manifest.input_digests.get(PWP_FILE)
        );
        assert!(a.report.join(REPORT_FILE).exists());
        assert!(a.report.join(PYTHAGOREAN_FILE).exists());
        assert!(a.report.join("histogram_serve.csv").exists());
    }

    #[test]
    fn pwp_table_round_trips_through_disk() {
        let season = crate::synth::generate_season(&config()).unwrap();
        let model = crate::markov::TransitionModel::fit(&season.points, 20).unwrap();
        let table = crate::markov::absorb(&model, 100).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(PWP_FILE);
        save_pwp(&path, &table).unwrap();
        let back = load_pwp(&path).unwrap();
        assert_eq!(table.v, back.v);
        assert_eq!(table.counts, back.counts);
        assert_eq!(table.backoff, back.backoff);
        assert_eq!(table.effective_steps, back.effective_steps);
    }

    #[test]
    fn strict_ingest_rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let sim = dir.path().join("sim");
        run_simulate(&config(), &sim).unwrap();
        let contacts = sim.join(CONTACTS_FILE);
        let mut text = std::fs::read_to_string(&contacts).unwrap();
        text.push_str("m9999,1,1,1,x,T,C,Attack,?,X5,,,5,T\n");
        std::fs::write(&contacts, text).unwrap();
        let err = run_ingest(
            &contacts,
            &sim.join(LINEUPS_FILE),
            None,
            true,
            &dir.path().join("out"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("strict mode"));
        // Non-strict records the rejection and proceeds.
        let manifest = run_ingest(
            &contacts,
            &sim.join(LINEUPS_FILE),
            None,
            false,
            &dir.path().join("out2"),
        )
        .unwrap();
        assert!(manifest.output_digests.contains_key(REJECTIONS_FILE));
    }
}
