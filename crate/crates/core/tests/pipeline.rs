use lowdeg::agreement::{agreement_exact, check_equivalence, TestSpec};
use lowdeg::decoder::{decode, DecoderParams};
use lowdeg::spectral::{build_graph, case_report, sampling_suite, GraphCase};
use lowdeg::table::TableShape;
use lowdeg::{rng, Error, FieldCtx, SubspaceTable};

#[test]
fn planted_table_survives_disk_and_decodes() {
    let shape = TableShape::new(FieldCtx::prime(7).unwrap(), 4, 3, 1).unwrap();
    let g = shape.random_global(&mut rng::seeded(3));
    let t = SubspaceTable::gen_planted(&shape, &g, 0.7, 3).unwrap();
    let dir = std::env::temp_dir().join(format!("lowdeg-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("t.json");
    let hash = t.save(&path).unwrap();
    let back = SubspaceTable::load(&path).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(back.content_hash(), hash);

    let alpha = agreement_exact(&back, TestSpec::CXC, u128::MAX).unwrap().value;
    assert!(alpha > 0.49 && alpha < 0.75, "{alpha}");
    let rep = decode(&back, &DecoderParams { seed: 1, ..Default::default() }, u128::MAX).unwrap();
    let top = &rep.results[0];
    assert_eq!(top.g, g);
    assert!((top.support_value - 0.7).abs() < 0.05);
    let (hits, len) = top.support.split_once('/').unwrap();
    assert_eq!(len.parse::<usize>().unwrap(), back.len());
    assert_eq!(hits.parse::<usize>().unwrap(), back.support_mask(&g).iter().filter(|&&x| x).count());
}

#[test]
fn list_decoding_separates_a_mixture() {
    let shape = TableShape::new(FieldCtx::prime(7).unwrap(), 4, 3, 1).unwrap();
    let mut r = rng::seeded(8);
    let gs = vec![shape.random_global(&mut r), shape.random_global(&mut r)];
    let t = SubspaceTable::gen_mixture(&shape, &gs, &[0.6, 0.4], 8).unwrap();
    let rep = decode(&t, &DecoderParams { list: true, seed: 2, ..Default::default() }, u128::MAX).unwrap();
    for g in &gs {
        assert!(rep.results.iter().any(|x| &x.g == g));
    }
}

#[test]
fn random_table_has_no_decoding() {
    let shape = TableShape::new(FieldCtx::prime(7).unwrap(), 4, 3, 1).unwrap();
    let t = SubspaceTable::gen_random(&shape, 5).unwrap();
    let p = DecoderParams { epsilon: Some(0.5), seed: 5, ..Default::default() };
    assert!(matches!(decode(&t, &p, u128::MAX), Err(Error::NoCandidate)));
}

#[test]
fn equivalence_relations_on_honest_tables() {
    let shape = TableShape::new(FieldCtx::prime(5).unwrap(), 4, 2, 1).unwrap();
    let g = shape.random_global(&mut rng::seeded(2));
    let t = SubspaceTable::gen_honest(&shape, &g, 2).unwrap();
    let rep = check_equivalence(&t, 2, 1, 0, 2.0, u128::MAX).unwrap();
    assert!(rep.all_pass());
    assert_eq!(rep.alpha_srs, "1/1");
}

#[test]
fn caps_are_enforced() {
    let shape = TableShape::new(FieldCtx::prime(5).unwrap(), 4, 3, 1).unwrap();
    let t = SubspaceTable::gen_random(&shape, 1).unwrap();
    assert!(matches!(agreement_exact(&t, TestSpec::CXC, 10), Err(Error::CapExceeded { .. })));
    assert_eq!(Error::CapExceeded { needed: 1, cap: 0 }.exit_code(), 3);
    assert!(matches!(build_graph(&FieldCtx::prime(3).unwrap(), GraphCase::G4, 6, 100), Err(Error::CapExceeded { .. })));
}

#[test]
fn spectra_track_target_rates() {
    let f = FieldCtx::prime(3).unwrap();
    let r = case_report(&f, GraphCase::G6, 3, u128::MAX).unwrap();
    assert!((r.ratio.unwrap() - 1.0).abs() < 0.1);
    assert!(r.residual.unwrap() < 1e-9);
    assert!(matches!(case_report(&f, GraphCase::G2, 5, u128::MAX), Err(Error::OutOfRange(_))));
    let g = build_graph(&FieldCtx::prime(2).unwrap(), GraphCase::G6, 3, u128::MAX).unwrap().swapped();
    let s = sampling_suite(&g, &[0.25, 0.5], 4, true, 16, 1, u128::MAX).unwrap();
    assert!(s.all_pass);
    assert_eq!(s.trials.len(), 8);
}
