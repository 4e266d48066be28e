//! Acceptance suite: one test per criterion, each printing a single
//! pass/fail line (run with `--nocapture` to see them on success).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use sideout_core::attribution::{
    fit_alpha, pythagorean_winpct, Component, PointsGainedEntry, Role, DEFAULT_ALPHA,
};
use sideout_core::ingest::test_fixtures::table_sample_point;
use sideout_core::markov::{
    absorb, encode_state_sequence, StateKey, TransitionModel, DEFAULT_BASELINE_SUPPORT,
};
use sideout_core::mixed::{fit, variance_ratio, FactorSpec, FitOptions, Observation};
use sideout_core::pipeline::{
    run_attribute, run_fit_pwp, run_fit_sos, run_ingest, run_report, run_simulate, ReportOptions,
    RunManifest, CONTACTS_FILE, LINEUPS_FILE, POINTS_FILE,
};
use sideout_core::sos::{
    build_attack_dataset, defensive_sos_terms, factors, in_model_subset, model_has_defense,
    model_has_digger, offensive_sos_terms, player_level, DEFAULT_TABLE_SUPPORT,
};
use sideout_core::synth::{
    generate_season, kernel_from_model, mc_point_win_prob, EffectSds, SyntheticConfig,
};
use sideout_core::types::PlayerId;
use std::collections::BTreeMap;
use std::time::Instant;

/// Run one criterion, print its verdict line, and enforce its time budget.
fn criterion(n: u32, name: &str, budget_secs: u64, body: impl FnOnce() -> Result<(), String>) {
    let start = Instant::now();
    let mut outcome = body();
    let elapsed = start.elapsed();
    if outcome.is_ok() && elapsed.as_secs() >= budget_secs {
        outcome = Err(format!(
            "runtime {elapsed:.1?} exceeds the {budget_secs} s budget"
        ));
    }
    match outcome {
        Ok(()) => println!("criterion {n} ({name}): pass [{elapsed:.1?}]"),
        Err(reason) => {
            println!("criterion {n} ({name}): FAIL — {reason}");
            panic!("criterion {n} failed: {reason}");
        }
    }
}

fn check(ok: bool, msg: impl Fn() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

#[test]
fn criterion_1_state_encoding_fidelity() {
    criterion(1, "state-encoding fidelity", 1, || {
        let states = encode_state_sequence(&table_sample_point())
            .map_err(|e| format!("encoding failed: {e}"))?;
        let rendered = states
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(" → ");
        let expected = "(S, SV) → (R, R#) → (R, R#S#) → (R, R#S#AX6) → (S, D+) → (S, D+S#) → \
                        (S, D+S#AV5) → (R, B+) → (S, D!) → (S, D!S#) → (S, D!S#AX5) → (S, W)";
        check(rendered == expected, || {
            format!("listing mismatch:\n  got      {rendered}\n  expected {expected}")
        })
    });
}

#[test]
fn criterion_2_absorption_correctness() {
    criterion(2, "absorption vs Monte Carlo", 120, || {
        let config = SyntheticConfig {
            matches: 1000,
            points_per_match: 100,
            seed: 2,
            ..SyntheticConfig::default()
        };
        let season = generate_season(&config).map_err(|e| e.to_string())?;
        let model = TransitionModel::fit(&season.points, 20).map_err(|e| e.to_string())?;
        for (i, row) in model.probs.iter().enumerate() {
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            check((sum - 1.0).abs() <= 1e-12, || {
                format!("row {} sums to {sum}", model.states[i])
            })?;
        }
        let table = absorb(&model, 100).map_err(|e| e.to_string())?;
        for (s, r) in &table.residuals {
            check(*r <= 1e-9, || format!("state {s} keeps residual {r}"))?;
        }
        // Roll the same fitted chain the powering consumed.
        let kernel = kernel_from_model(&model);
        let busy: Vec<usize> = (0..model.states.len())
            .filter(|&i| !model.states[i].is_terminal() && model.row_totals[i] >= 1000)
            .collect();
        check(busy.len() >= 20, || {
            format!("only {} states reached 1000 visits", busy.len())
        })?;
        let failures: Vec<String> = busy
            .par_iter()
            .filter_map(|&i| {
                let s = &model.states[i];
                let mut rng = ChaCha8Rng::seed_from_u64(0xABCD ^ i as u64);
                let (p, se) = mc_point_win_prob(&kernel, s, 100_000, &mut rng);
                let v = table.v[s];
                ((v - p).abs() > 3.0 * se + 1e-12)
                    .then(|| format!("{s}: v={v:.5} mc={p:.5} se={se:.5}"))
            })
            .collect();
        check(failures.is_empty(), || {
            format!(
                "{} of {} states outside 3 SE: {}",
                failures.len(),
                busy.len(),
                failures.join("; ")
            )
        })
    });
}

/// Balanced one-way layout: m groups of k observations.
fn one_way(m: usize, k: usize, mu: f64, sg: f64, se: f64, seed: u64) -> Vec<Observation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(m * k);
    for g in 0..m {
        let gz: f64 = rng.sample(StandardNormal);
        for _ in 0..k {
            let ez: f64 = rng.sample(StandardNormal);
            out.push(Observation::new(
                mu + sg * gz + se * ez,
                BTreeMap::from([("g".to_string(), format!("g{g:03}"))]),
            ));
        }
    }
    out
}

#[test]
fn criterion_3_reml_matches_balanced_oracle() {
    criterion(3, "REML vs balanced ANOVA oracle", 30, || {
        let (m, k) = (30usize, 20usize);
        for seed in 0..50u64 {
            let data = one_way(m, k, 0.6, 0.3, 0.8, seed);
            let fitted = fit(&[FactorSpec::new("g")], &data, &FitOptions::default())
                .map_err(|e| format!("seed {seed}: {e}"))?;

            // Closed-form balanced REML = ANOVA method-of-moments estimators.
            let grand: f64 = data.iter().map(|o| o.y).sum::<f64>() / (m * k) as f64;
            let mut group_means: BTreeMap<&str, f64> = BTreeMap::new();
            for o in &data {
                *group_means.entry(o.levels["g"].as_str()).or_default() += o.y / k as f64;
            }
            let ssb: f64 = group_means
                .values()
                .map(|gm| k as f64 * (gm - grand).powi(2))
                .sum();
            let ssw: f64 = data
                .iter()
                .map(|o| (o.y - group_means[o.levels["g"].as_str()]).powi(2))
                .sum();
            let mse = ssw / (m * (k - 1)) as f64;
            let msb = ssb / (m - 1) as f64;
            let sg_hat = ((msb - mse) / k as f64).max(0.0);

            check((fitted.residual_variance - mse).abs() / mse < 1e-6, || {
                format!(
                    "seed {seed}: residual {} vs oracle {mse}",
                    fitted.residual_variance
                )
            })?;
            check(
                (fitted.components["g"] - sg_hat).abs() / sg_hat.max(1e-8) < 1e-6,
                || {
                    format!(
                        "seed {seed}: group {} vs oracle {sg_hat}",
                        fitted.components["g"]
                    )
                },
            )?;
            for (level, blup) in &fitted.blups["g"] {
                let resid = group_means[level.as_str()] - grand;
                check(blup.abs() <= resid.abs() + 1e-12, || {
                    format!("seed {seed}: BLUP {blup} exceeds group residual {resid} at {level}")
                })?;
            }
        }
        Ok(())
    });
}

/// Spearman rank correlation; values are continuous so ties are ignored.
fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..a.len() {
        cov += (ra[i] - mean) * (rb[i] - mean);
        va += (ra[i] - mean).powi(2);
        vb += (rb[i] - mean).powi(2);
    }
    cov / (va.sqrt() * vb.sqrt())
}

#[test]
fn criterion_4_parameter_recovery() {
    criterion(4, "synthetic-league parameter recovery", 600, || {
        // Attacker:setter variance 9:1 (sd ratio 3:1).
        let config = SyntheticConfig {
            conferences: 4,
            teams_per_conference: 8,
            players_per_team: 10,
            matches: 600,
            points_per_match: 70,
            effects: EffectSds {
                attacker: 0.4,
                setter: 0.4 / 3.0,
                ..EffectSds::default()
            },
            ds_gap: 0.0,
            seed: 4,
        };
        let season = generate_season(&config).map_err(|e| e.to_string())?;
        let model = TransitionModel::fit(&season.points, 20).map_err(|e| e.to_string())?;
        let pwp = absorb(&model, 100).map_err(|e| e.to_string())?;
        let dataset = build_attack_dataset(
            &season.points,
            &pwp,
            DEFAULT_TABLE_SUPPORT,
            DEFAULT_BASELINE_SUPPORT,
        )
        .map_err(|e| e.to_string())?;
        let options = FitOptions {
            max_iters: 300,
            tol: 1e-6,
        };

        // Fit the offense-signal components (error avoidance, clean rate,
        // kill quality); the criterion's ratio is defined on model (1).
        let fit_model = |k: usize| {
            let data: Vec<Observation> = dataset
                .observations
                .iter()
                .filter(|o| in_model_subset(k, &o.flags))
                .filter_map(|o| {
                    let y = o.responses[k - 1]?;
                    let mut levels: BTreeMap<String, String> =
                        offensive_sos_terms(o).into_iter().collect();
                    if model_has_defense(k) {
                        levels.extend(defensive_sos_terms(o, model_has_digger(k)));
                    }
                    Some(Observation::new(y, levels))
                })
                .collect();
            let mut specs = vec![
                FactorSpec::new(factors::OFF_CONF),
                FactorSpec::nested(factors::OFF_TEAM, factors::OFF_CONF),
                FactorSpec::nested(factors::ATTACKER, factors::OFF_TEAM),
                FactorSpec::nested(factors::SETTER, factors::OFF_TEAM),
            ];
            if model_has_defense(k) {
                specs.push(FactorSpec::new(factors::DEF_CONF));
                specs.push(FactorSpec::nested(factors::DEF_TEAM, factors::DEF_CONF));
                specs.push(FactorSpec::nested(factors::BLOCKER, factors::DEF_TEAM));
                if model_has_digger(k) {
                    specs.push(FactorSpec::nested(factors::DIGGER, factors::DEF_TEAM));
                }
            }
            fit(&specs, &data, &options).map_err(|e| format!("model {k}: {e}"))
        };
        let m1 = fit_model(1)?;
        let m2 = fit_model(2)?;
        let m7 = fit_model(7)?;

        let (ratio, degenerate) = variance_ratio(
            m1.components[factors::ATTACKER],
            m1.components[factors::SETTER],
        );
        check(!degenerate && (ratio - 0.9).abs() <= 0.05, || {
            format!("variance ratio {ratio:.4} outside 0.9 ± 0.05")
        })?;

        // Recovered attacker effect: summed attacker BLUPs across the three
        // fitted components, scored against the drawn ground truth.
        let mut level_of: BTreeMap<String, PlayerId> = BTreeMap::new();
        let mut contacts: BTreeMap<String, usize> = BTreeMap::new();
        for o in &dataset.observations {
            let level = player_level(&o.off_team, &o.attacker);
            level_of
                .entry(level.clone())
                .or_insert_with(|| o.attacker.clone());
            *contacts.entry(level).or_default() += 1;
        }
        let mut truth_vals = Vec::new();
        let mut fitted_vals = Vec::new();
        for (level, player) in &level_of {
            if contacts[level] < 100 {
                continue;
            }
            let blup: f64 = [&m1, &m2, &m7]
                .iter()
                .filter_map(|f| f.blups.get(factors::ATTACKER).and_then(|m| m.get(level)))
                .sum();
            fitted_vals.push(blup);
            truth_vals.push(season.truth.player(player).attacker);
        }
        check(truth_vals.len() >= 100, || {
            format!("only {} attackers reached 100 contacts", truth_vals.len())
        })?;
        let rho = spearman(&fitted_vals, &truth_vals);
        check(rho >= 0.9, || {
            format!(
                "Spearman {rho:.4} < 0.9 over {} attackers",
                truth_vals.len()
            )
        })
    });
}

fn small_corpus(seed: u64) -> sideout_core::synth::SyntheticSeason {
    let config = SyntheticConfig {
        matches: 120,
        points_per_match: 70,
        seed,
        ..SyntheticConfig::default()
    };
    generate_season(&config).expect("valid config")
}

#[test]
fn criterion_5_attribution_identities() {
    criterion(5, "attribution identities", 600, || {
        use sideout_core::pipeline::compute_entries;
        use sideout_core::sos::{build_serve_dataset, fit_attack_models, fit_serve_model};

        let season = small_corpus(5);
        let model = TransitionModel::fit(&season.points, 20).map_err(|e| e.to_string())?;
        let pwp = absorb(&model, 100).map_err(|e| e.to_string())?;
        let options = FitOptions {
            max_iters: 200,
            tol: 1e-6,
        };
        let serve_obs = build_serve_dataset(&season.points, &pwp).map_err(|e| e.to_string())?;
        let serve_fit = fit_serve_model(&serve_obs, &options).map_err(|e| e.to_string())?;
        let dataset = build_attack_dataset(
            &season.points,
            &pwp,
            DEFAULT_TABLE_SUPPORT,
            DEFAULT_BASELINE_SUPPORT,
        )
        .map_err(|e| e.to_string())?;
        let models =
            fit_attack_models(&dataset.observations, &options).map_err(|e| e.to_string())?;
        let entries = compute_entries(&season.points, &pwp, &serve_fit, &models)
            .map_err(|e| e.to_string())?;
        check(!entries.is_empty(), || "no entries produced".to_string())?;

        // adjusted − raw = −sos, exactly, on every entry.
        for e in &entries {
            check(e.adjusted_pg == e.raw_pg - e.sos, || {
                format!("adjusted/raw/sos identity broken at {:?}", e.contact)
            })?;
            check(e.raw_pg == e.sign * e.share * e.y, || {
                format!("raw definition broken at {:?}", e.contact)
            })?;
        }

        // Shares per (contact, component, side of the net) sum to one.
        let mut side_sums: BTreeMap<(&sideout_core::types::ContactRef, Component, bool), f64> =
            BTreeMap::new();
        for e in &entries {
            *side_sums
                .entry((&e.contact, e.component, e.sign > 0.0))
                .or_default() += e.share;
        }
        for ((contact, component, offense), sum) in &side_sums {
            check((sum - 1.0).abs() <= 1e-12, || {
                format!(
                    "{} shares for {contact:?} component {component} sum to {sum}",
                    if *offense { "offense" } else { "defense" }
                )
            })?;
        }

        // Per attack: entries exist exactly for the reached components, and
        // each role spans its defining component range.
        let mut by_contact: BTreeMap<&sideout_core::types::ContactRef, Vec<&PointsGainedEntry>> =
            BTreeMap::new();
        for e in &entries {
            if e.component != Component::Sv {
                by_contact.entry(&e.contact).or_default().push(e);
            }
        }
        for obs in &dataset.observations {
            let reached: Vec<u8> = (1u8..=7)
                .filter(|&k| obs.responses[(k - 1) as usize].is_some())
                .collect();
            let entries = by_contact
                .get(&obs.contact)
                .ok_or_else(|| format!("attack {:?} produced no entries", obs.contact))?;
            let per_role = |role: Role| -> Vec<u8> {
                let mut ks: Vec<u8> = entries
                    .iter()
                    .filter(|e| e.role == role)
                    .map(|e| match e.component {
                        Component::Attack(k) => k,
                        Component::Sv => unreachable!("filtered above"),
                    })
                    .collect();
                ks.sort_unstable();
                ks
            };
            check(per_role(Role::Attacker) == reached, || {
                format!("attacker components mismatch at {:?}", obs.contact)
            })?;
            check(per_role(Role::Setter) == reached, || {
                format!("setter components mismatch at {:?}", obs.contact)
            })?;
            let def_reached: Vec<u8> = reached.iter().copied().filter(|&k| k >= 2).collect();
            let dig_reached: Vec<u8> = reached.iter().copied().filter(|&k| k >= 6).collect();
            check(per_role(Role::Blocker) == def_reached, || {
                format!("blocker components mismatch at {:?}", obs.contact)
            })?;
            check(per_role(Role::Digger) == dig_reached, || {
                format!("digger components mismatch at {:?}", obs.contact)
            })?;
        }
        Ok(())
    });
}

#[test]
fn criterion_6_baseline_centering() {
    criterion(6, "split-response centering", 600, || {
        let season = small_corpus(6);
        let model = TransitionModel::fit(&season.points, 20).map_err(|e| e.to_string())?;
        let pwp = absorb(&model, 100).map_err(|e| e.to_string())?;
        // Support 1 ⇒ every observed pre-state cell answers exactly: no
        // back-off can trigger.
        let dataset = build_attack_dataset(&season.points, &pwp, DEFAULT_TABLE_SUPPORT, 1)
            .map_err(|e| e.to_string())?;
        for o in &dataset.observations {
            check(!o.baseline_backoff, || {
                format!("unexpected back-off at {:?}", o.contact)
            })?;
        }
        // Per pre-state and component, the empirically-weighted mean response
        // vanishes: each split response is a deviation from its parent cell's
        // mean, weighted by the cell frequencies that defined that mean.
        let mut sums: BTreeMap<(&StateKey, usize), (f64, u64)> = BTreeMap::new();
        for o in &dataset.observations {
            for (k, y) in o.responses.iter().enumerate() {
                if let Some(y) = y {
                    let cell = sums.entry((&o.pre_state, k)).or_default();
                    cell.0 += y;
                    cell.1 += 1;
                }
            }
        }
        for ((state, k), (sum, count)) in &sums {
            let mean = sum / *count as f64;
            check(mean.abs() <= 1e-10, || {
                format!(
                    "pre-state {state} component {} mean {mean:.3e} over {count} attacks",
                    k + 1
                )
            })?;
        }
        Ok(())
    });
}

#[test]
fn criterion_7_pythagorean() {
    criterion(7, "Pythagorean expectation", 10, || {
        for alpha in [1.0, DEFAULT_ALPHA, 25.0] {
            for points in [1.0, 1500.0, 2863.0] {
                let w = pythagorean_winpct(points, points, alpha).map_err(|e| e.to_string())?;
                check(w == 0.5, || format!("PS=PA gave {w} at alpha {alpha}"))?;
            }
        }
        let w = pythagorean_winpct(502.0, 498.0, DEFAULT_ALPHA).map_err(|e| e.to_string())?;
        check((0.515..=0.522).contains(&w), || {
            format!("50.2% point share projects to {w}")
        })?;

        // Recover alpha from binomially-sampled seasons generated at 9.3.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut records = Vec::new();
        for i in 0..64 {
            let ps = 1300.0 + 6.0 * i as f64;
            let pa = 1500.0;
            let p = pythagorean_winpct(ps, pa, DEFAULT_ALPHA).map_err(|e| e.to_string())?;
            let matches = 28;
            let wins = (0..matches).filter(|_| rng.gen::<f64>() < p).count();
            records.push((ps, pa, wins as f64 / matches as f64));
        }
        let fitted = fit_alpha(&records).map_err(|e| e.to_string())?;
        check((fitted.alpha - DEFAULT_ALPHA).abs() <= 0.5, || {
            format!(
                "alpha {:.3} not within 0.5 of {DEFAULT_ALPHA}",
                fitted.alpha
            )
        })
    });
}

#[test]
fn criterion_8_pipeline_determinism() {
    criterion(8, "end-to-end determinism", 900, || {
        let config = SyntheticConfig {
            matches: 15,
            points_per_match: 60,
            seed: 8,
            ..SyntheticConfig::default()
        };
        let run_all = |root: &std::path::Path| -> Result<Vec<BTreeMap<String, String>>, String> {
            let d = |name: &str| root.join(name);
            let err = |e: sideout_core::Error| e.to_string();
            run_simulate(&config, &d("sim")).map_err(err)?;
            run_ingest(
                &d("sim").join(CONTACTS_FILE),
                &d("sim").join(LINEUPS_FILE),
                None,
                true,
                &d("ingest"),
            )
            .map_err(err)?;
            let points = d("ingest").join(POINTS_FILE);
            run_fit_pwp(&points, 20, 100, &d("pwp")).map_err(err)?;
            let options = FitOptions {
                max_iters: 200,
                tol: 1e-6,
            };
            run_fit_sos(&points, &d("pwp"), &options, &d("sos")).map_err(err)?;
            run_attribute(&points, &d("pwp"), &d("sos"), &d("attr")).map_err(err)?;
            run_report(&points, &d("attr"), &ReportOptions::default(), &d("report"))
                .map_err(err)?;
            ["sim", "ingest", "pwp", "sos", "attr", "report"]
                .iter()
                .map(|stage| {
                    RunManifest::load(&d(stage))
                        .map(|m| m.output_digests)
                        .map_err(|e| e.to_string())
                })
                .collect()
        };

        let root = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut digests: Vec<Vec<BTreeMap<String, String>>> = Vec::new();
        for (i, threads) in [1usize, 1, 4].into_iter().enumerate() {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| e.to_string())?;
            let dir = root.path().join(format!("run{i}"));
            digests.push(pool.install(|| run_all(&dir))?);
        }
        for (i, later) in digests.iter().enumerate().skip(1) {
            check(*later == digests[0], || {
                format!("run {i} digests diverge from run 0")
            })?;
        }
        Ok(())
    });
}
