//! Property tests for the invariants each module promises.

use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::strategy::Strategy as _;

use regional_complexity::complexity::{self, EciOptions, FitnessOptions};
use regional_complexity::diagnostics::{self, Transform};
use regional_complexity::ingest::{
    self, Crosswalk, CrosswalkKind, EmploymentValue, IndustryLevel, RawEmploymentRecord, SizeClassTable,
};
use regional_complexity::matrix::{self, EmploymentMatrix, Strategy, StrategyParams};
use regional_complexity::regress::{self, SeKind};
use regional_complexity::synth::{self, CapabilityParams};
use regional_complexity::Error;

fn employment(values: DMatrix<f64>) -> EmploymentMatrix {
    let regions = (0..values.nrows()).map(|r| format!("r{r}")).collect();
    let industries = (0..values.ncols()).map(|i| format!("i{i}")).collect();
    EmploymentMatrix { values, regions, industries }
}

/// Nonnegative integer employment with plenty of zeros.
fn employment_values() -> impl proptest::strategy::Strategy<Value = DMatrix<f64>> {
    (1usize..9, 1usize..9).prop_flat_map(|(nr, ni)| {
        prop::collection::vec(prop_oneof![Just(0u32), 0u32..2000], nr * ni)
            .prop_map(move |v| {
                let mut m = DMatrix::from_iterator(nr, ni, v.into_iter().map(f64::from));
                if m.sum() == 0.0 {
                    m[(0, 0)] = 1.0;
                }
                m
            })
    })
}

/// Binary matrix with no empty row or column.
fn pruned_binary() -> impl proptest::strategy::Strategy<Value = DMatrix<f64>> {
    (2usize..10, 2usize..10).prop_flat_map(|(nr, ni)| {
        prop::collection::vec(any::<bool>(), nr * ni).prop_map(move |bits| {
            let mut m = DMatrix::from_iterator(nr, ni, bits.into_iter().map(|b| f64::from(u8::from(b))));
            for r in 0..nr {
                m[(r, r % ni)] = 1.0;
            }
            for i in 0..ni {
                m[(i % nr, i)] = 1.0;
            }
            m
        })
    })
}

fn eci_or_skip(m: &DMatrix<f64>) -> Option<complexity::ComplexityScores> {
    match complexity::eci(m, &EciOptions::default()) {
        Ok(s) => Some(s),
        Err(Error::DegenerateNetwork(_) | Error::DegenerateSpectrum(_)) => None,
        Err(e) => panic!("unexpected error {e}"),
    }
}

fn raw_records() -> impl proptest::strategy::Strategy<Value = Vec<RawEmploymentRecord>> {
    let flags = ["A", "B", "C", "E", "F", "G"];
    prop::collection::btree_map((0u8..8, 0u8..10), (0u64..5000, 0usize..8), 1..60).prop_map(move |cells| {
        cells
            .into_iter()
            .map(|((c, n), (count, f))| RawEmploymentRecord {
                year: 2015,
                region_code: format!("0100{c}"),
                industry_code: format!("{}{}", 31 + n % 3, 1000 + u32::from(n)),
                value: if f < flags.len() { EmploymentValue::Suppressed(flags[f].into()) } else { EmploymentValue::Count(count) },
            })
            .collect()
    })
}

fn panel_bytes(p: &ingest::EmploymentPanel) -> Vec<u8> {
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    buf
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn aggregation_conserves_employment(recs in raw_records(), targets in prop::collection::vec(0u8..3, 8)) {
        let panel = ingest::impute_suppressed(&recs, &SizeClassTable::cbp_default()).unwrap();
        let pairs: Vec<(String, String)> =
            (0..8u8).map(|c| (format!("0100{c}"), format!("cbsa{}", targets[c as usize]))).collect();
        let geo = Crosswalk::new(CrosswalkKind::Geographic, pairs).unwrap();
        let a = ingest::aggregate_geography(&panel, &geo).unwrap();
        prop_assert_eq!(a.total_employment(), panel.total_employment());
        let b = ingest::aggregate_industry(&a, IndustryLevel::Digits(2)).unwrap();
        prop_assert!(b.errors.is_empty());
        prop_assert_eq!(b.panel.total_employment(), panel.total_employment());
        prop_assert_eq!(b.panel.imputed_employment(), panel.imputed_employment());
    }

    #[test]
    fn panel_serialization_is_deterministic(recs in raw_records()) {
        let t = SizeClassTable::cbp_default();
        let a = ingest::impute_suppressed(&recs, &t).unwrap();
        let mut reversed = recs.clone();
        reversed.reverse();
        let b = ingest::impute_suppressed(&reversed, &t).unwrap();
        prop_assert_eq!(panel_bytes(&a), panel_bytes(&b));
        let back = ingest::EmploymentPanel::read_csv(panel_bytes(&a).as_slice()).unwrap();
        prop_assert_eq!(panel_bytes(&back), panel_bytes(&a));
    }

    #[test]
    fn identity_crosswalk_is_a_no_op(recs in raw_records()) {
        let panel = ingest::impute_suppressed(&recs, &SizeClassTable::cbp_default()).unwrap();
        let regions = panel.regions().entries().iter().map(|e| e.code.clone()).collect::<Vec<_>>();
        let industries = panel.industries().entries().iter().map(|e| e.code.clone()).collect::<Vec<_>>();
        let geo = Crosswalk::identity(CrosswalkKind::Geographic, regions);
        let ind = Crosswalk::identity(CrosswalkKind::Industry, industries);
        let once = ingest::aggregate_geography(&panel, &geo).unwrap();
        let twice = ingest::aggregate_industry(&once, IndustryLevel::Crosswalk(&ind)).unwrap().panel;
        prop_assert_eq!(panel_bytes(&twice), panel_bytes(&panel));
    }

    #[test]
    fn scaling_by_powers_of_two_leaves_lq_matrices_unchanged(v in employment_values(), k in 1i32..12) {
        let c = 2f64.powi(k);
        let x = employment(v.clone());
        let cx = employment(v * c);
        for s in [Strategy::Bm, Strategy::Rlq, Strategy::Wm, Strategy::Presence] {
            let a = matrix::build_input_matrix(&x, s, StrategyParams::default()).unwrap();
            let b = matrix::build_input_matrix(&cx, s, StrategyParams::default()).unwrap();
            prop_assert_eq!(a.values, b.values, "strategy {}", s);
        }
    }

    #[test]
    fn indicator_containment(v in employment_values(), cutoff in 1.0f64..500.0) {
        let x = employment(v);
        let p = StrategyParams { cutoff };
        let get = |s| matrix::build_input_matrix(&x, s, p).unwrap().values;
        let (bm, cm, pr, rlq, wm) = (get(Strategy::Bm), get(Strategy::Cm), get(Strategy::Presence), get(Strategy::Rlq), get(Strategy::Wm));
        for k in 0..bm.len() {
            prop_assert!(pr[k] >= cm[k] && cm[k] >= bm[k]);
            prop_assert_eq!(bm[k], f64::from(u8::from(rlq[k] >= 1.0)));
        }
        for (j, col) in wm.column_iter().enumerate() {
            if x.values.column(j).sum() > 0.0 {
                prop_assert!((col.sum() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn eci_is_standardized_and_oriented(m in pruned_binary()) {
        if let Some(s) = eci_or_skip(&m) {
            let n = s.region_scores.len() as f64;
            let mean = s.region_scores.iter().sum::<f64>() / n;
            let sd = (s.region_scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((sd - 1.0).abs() < 1e-9);
            let div: Vec<f64> = m.row_iter().map(|r| r.sum()).collect();
            let dm = div.iter().sum::<f64>() / n;
            let cov: f64 = s.region_scores.iter().zip(&div).map(|(e, d)| e * (d - dm)).sum();
            prop_assert!(cov >= -1e-12);
        }
    }

    #[test]
    fn scores_follow_permutations(m in pruned_binary(), seed in any::<u64>()) {
        let (nr, ni) = m.shape();
        let mut rows: Vec<usize> = (0..nr).collect();
        let mut cols: Vec<usize> = (0..ni).collect();
        // deterministic shuffle from the seed
        let mut s = seed | 1;
        for v in [&mut rows, &mut cols] {
            for k in (1..v.len()).rev() {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                v.swap(k, (s % (k as u64 + 1)) as usize);
            }
        }
        let pm = DMatrix::from_fn(nr, ni, |r, c| m[(rows[r], cols[c])]);
        // when scores are orthogonal to the degree vector the sign is not
        // identified and a mirror-image permutation legitimately flips it
        let identified = |scores: &[f64], degree: Vec<f64>| {
            let dm = degree.iter().sum::<f64>() / degree.len() as f64;
            scores.iter().zip(&degree).map(|(e, d)| e * (d - dm)).sum::<f64>().abs() > 1e-9
        };
        if let (Some(a), Some(b)) = (eci_or_skip(&m), eci_or_skip(&pm)) {
            if identified(&a.region_scores, m.row_iter().map(|r| r.sum()).collect()) {
                for r in 0..nr {
                    prop_assert!((b.region_scores[r] - a.region_scores[rows[r]]).abs() < 1e-9);
                }
            }
            if identified(&a.industry_scores, m.column_iter().map(|c| c.sum()).collect()) {
                for c in 0..ni {
                    prop_assert!((b.industry_scores[c] - a.industry_scores[cols[c]]).abs() < 1e-9);
                }
            }
        }
        let fo = FitnessOptions::default();
        let (fa, fb) = (complexity::fitness(&m, &fo).unwrap(), complexity::fitness(&pm, &fo).unwrap());
        for r in 0..nr {
            prop_assert!((fb.region_scores[r] - fa.region_scores[rows[r]]).abs() <= 1e-9 * fa.region_scores[rows[r]].abs().max(1.0));
        }
    }

    #[test]
    fn bm_scores_ignore_employment_scale(v in employment_values(), c in 0.001f64..1000.0) {
        let a = matrix::build_input_matrix(&employment(v.clone()), Strategy::Bm, StrategyParams::default()).unwrap();
        let b = matrix::build_input_matrix(&employment(v * c), Strategy::Bm, StrategyParams::default()).unwrap();
        prop_assert_eq!(&a.values, &b.values);
        let (Ok((pa, _)), Ok((pb, _))) = (matrix::prune_empty(a), matrix::prune_empty(b)) else { return Ok(()) };
        match (complexity::eci(&pa.values, &EciOptions::default()), complexity::eci(&pb.values, &EciOptions::default())) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x.region_scores, y.region_scores),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "scaling changed solvability"),
        }
    }

    #[test]
    fn fitness_means_stay_at_one(m in pruned_binary()) {
        let mut worst: f64 = 0.0;
        complexity::fitness_with_observer(&m, &FitnessOptions::default(), |_, f, q| {
            let mf = f.iter().sum::<f64>() / f.len() as f64;
            let mq = q.iter().sum::<f64>() / q.len() as f64;
            worst = worst.max((mf - 1.0).abs()).max((mq - 1.0).abs());
        }).unwrap();
        prop_assert!(worst < 1e-9);
    }

    #[test]
    fn ordering_is_idempotent(m in pruned_binary()) {
        let first = diagnostics::order_plain(&m);
        let second = diagnostics::order_plain(&first.values);
        prop_assert_eq!(second.region_order, (0..m.nrows()).collect::<Vec<_>>());
        prop_assert_eq!(second.industry_order, (0..m.ncols()).collect::<Vec<_>>());
    }

    #[test]
    fn heatmap_csv_round_trip(v in employment_values()) {
        let view = diagnostics::order_plain(&v);
        let mut buf = Vec::new();
        diagnostics::write_triplet_csv(&view, &mut buf).unwrap();
        prop_assert_eq!(diagnostics::read_triplet_csv(buf.as_slice()).unwrap(), view.values);
    }

    #[test]
    fn correlation_symmetry_and_affine_invariance(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
        scale in 0.1f64..10.0,
        shift in -50.0f64..50.0,
    ) {
        let a: Vec<(String, f64)> = pairs.iter().enumerate().map(|(k, p)| (k.to_string(), p.0)).collect();
        let b: Vec<(String, f64)> = pairs.iter().enumerate().map(|(k, p)| (k.to_string(), p.1)).collect();
        let (Ok(ab), Ok(ba)) = (diagnostics::correlate(&a, &b, Transform::None), diagnostics::correlate(&b, &a, Transform::None)) else {
            return Ok(());
        };
        prop_assert_eq!(ab.r, ba.r);
        let moved: Vec<(String, f64)> = b.iter().map(|(k, v)| (k.clone(), scale * v + shift)).collect();
        let am = diagnostics::correlate(&a, &moved, Transform::None).unwrap();
        prop_assert!((am.r - ab.r).abs() < 1e-12);
    }

    #[test]
    fn group_means_average_to_zero(m in pruned_binary(), labels in prop::collection::vec(0u8..4, 10)) {
        if let Some(s) = eci_or_skip(&m) {
            let scores: Vec<(String, f64)> = s.region_scores.iter().enumerate().map(|(r, v)| (format!("r{r}"), *v)).collect();
            let pairs: Vec<(String, String)> = (0..m.nrows()).filter(|r| labels[*r] > 0).map(|r| (format!("r{r}"), format!("g{}", labels[r]))).collect();
            let attr = Crosswalk::new(CrosswalkKind::Attribute("g".into()), pairs).unwrap();
            let summary = diagnostics::group_summary(&scores, "g", &attr);
            let total: usize = summary.rows.iter().map(|r| r.count).sum();
            prop_assert_eq!(total, scores.len());
            let weighted: f64 = summary.rows.iter().map(|r| r.mean * r.count as f64).sum::<f64>() / total as f64;
            prop_assert!(weighted.abs() < 1e-9);
        }
    }

    #[test]
    fn adding_capabilities_keeps_industries(seed in any::<u64>()) {
        let p = CapabilityParams { n_regions: 15, n_industries: 12, n_capabilities: 6, seed, ..Default::default() };
        let Ok((mut model, before)) = synth::generate_capability_model(p) else { return Ok(()) };
        let r = (seed % 15) as usize;
        for c in model.region_capability[r].iter_mut() {
            *c = true;
        }
        let after = model.presence();
        prop_assert!(before.iter().zip(after.iter()).all(|(b, a)| a >= b));
    }

    #[test]
    fn nested_generator_needs_no_pruning(nr in 1usize..40, ni in 1usize..40) {
        let m = synth::generate_nested(nr, ni).unwrap();
        let input = matrix::InputMatrix {
            values: m.clone(),
            strategy: Strategy::Presence,
            regions: (0..nr).map(|r| r.to_string()).collect(),
            industries: (0..ni).map(|i| i.to_string()).collect(),
            params: StrategyParams::default(),
        };
        let (pruned, report) = matrix::prune_empty(input).unwrap();
        prop_assert!(report.is_empty());
        prop_assert_eq!(pruned.values, m);
    }

    #[test]
    fn shifting_a_regressor_moves_only_the_intercept(
        data in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0), 8..30),
        shift in -100.0f64..100.0,
    ) {
        let n = data.len();
        let y: Vec<f64> = data.iter().map(|d| d.2).collect();
        let x = DMatrix::from_fn(n, 3, |i, j| match j { 0 => data[i].0, 1 => data[i].1, _ => 1.0 });
        let names = vec!["a".to_string(), "b".to_string(), "Constant".to_string()];
        let Ok(base) = regress::ols(&y, &x, &names, SeKind::Hc1) else { return Ok(()) };
        let mut xs = x.clone();
        for i in 0..n { xs[(i, 0)] += shift; }
        let moved = regress::ols(&y, &xs, &names, SeKind::Hc1).unwrap();
        for j in 0..2 {
            prop_assert!((base.terms[j].coef - moved.terms[j].coef).abs() < 1e-9 * base.terms[j].coef.abs().max(1.0));
        }
    }
}

#[test]
fn imputed_values_lie_within_bounds() {
    let t = SizeClassTable::cbp_default();
    for c in t.classes() {
        if let Some(upper) = c.upper {
            assert!(c.imputed >= c.lower as f64 && c.imputed <= upper as f64, "{}", c.flag);
        } else {
            assert!(c.imputed >= c.lower as f64);
        }
    }
}

#[test]
fn hc1_equals_classical_for_equal_magnitude_residuals() {
    let n = 12;
    let xs: Vec<f64> = (0..n).map(|i| (i / 2) as f64).collect();
    // alternating residuals are orthogonal to both the constant and xs
    let e: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.7 } else { -0.7 }).collect();
    let y: Vec<f64> = (0..n).map(|i| 1.5 - 0.3 * xs[i] + e[i]).collect();
    let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { xs[i] } else { 1.0 });
    let names = vec!["x".to_string(), "Constant".to_string()];
    let hc1 = regress::ols(&y, &x, &names, SeKind::Hc1).unwrap();
    let classical = regress::ols(&y, &x, &names, SeKind::Classical).unwrap();
    for (a, b) in hc1.cov.iter().zip(classical.cov.iter()) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-12), "{a} vs {b}");
    }
}

#[test]
fn listwise_deletion_accounts_for_every_row() {
    let mut d = regress::Dataset::new();
    for e in 0..20 {
        let f = e as f64;
        let unemp = if e % 4 == 0 { f64::NAN } else { (f * 0.9).cos() };
        d.push(&format!("e{e}"), 2010, &[("eci", (f * 0.3).sin()), ("unemp", unemp), ("y", f * 100.0 + (f * 1.7).sin() * 300.0)])
            .unwrap();
    }
    d.push("other_year", 2011, &[("eci", 0.1), ("unemp", 0.2), ("y", 5.0)]).unwrap();
    let mut spec = regress::ModelSpec::new(regress::ModelKind::CrossSection, "y");
    spec.year = Some(2010);
    spec.economic = vec!["unemp".into()];
    let res = regress::run_cross_section(&d, &spec).unwrap();
    for r in &res {
        assert_eq!(r.n_obs + r.deleted, 20);
    }
    assert_eq!(res[0].deleted, 0);
    assert_eq!(res[1].deleted, 5);
}
