use fibermep::matching::match_sets;
use fibermep::oracle::delta_solve;
use fibermep::problems::{integer_example, instance_from_json, instance_to_json, load_instance, random_mep};
use fibermep::report::{to_json, write_certify_csv, write_condition_csv, write_eigenpair_csv};
use fibermep::{solve, CVec, SolveConfig, SolveReport};

fn data_file(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn eigenvalues(r: &SolveReport) -> Vec<CVec> {
    r.eigenpairs.iter().map(|p| p.lambda.clone()).collect()
}

#[test]
fn shipped_example_file_matches_builtin_instance() {
    let loaded = load_instance(data_file("integer_example.json")).unwrap();
    assert_eq!(loaded, integer_example());
    let again = instance_from_json(&instance_to_json(&loaded)).unwrap();
    assert_eq!(again, loaded);
}

#[test]
fn example_solves_with_two_paths() {
    let inst = integer_example();
    let report = solve(&inst, &SolveConfig { seed: 1, ..Default::default() }).unwrap();
    assert_eq!(report.start_count, 2);
    assert_eq!(report.divergent, 0);
    assert_eq!(report.eigenpairs.len(), 2);
    assert!(report.healthy());
    for p in &report.eigenpairs {
        for i in 0..2 {
            let r = inst.residual(i, p.lambda.as_slice(), &p.xs[i]).unwrap();
            assert!(r.norm() < 1e-10, "residual {}", r.norm());
        }
    }
}

#[test]
fn solver_agrees_with_the_oracle_on_eigenvectors() {
    for (dims, seed) in [([4, 4], 0u64), ([4, 4], 1), ([3, 5], 2), ([5, 2], 3)] {
        let inst = random_mep(2, &dims, seed).unwrap();
        let report = solve(&inst, &SolveConfig { seed, ..Default::default() }).unwrap();
        let oracle = delta_solve(&inst).unwrap();
        assert_eq!(report.eigenpairs.len(), dims[0] * dims[1]);
        let reference: Vec<CVec> = oracle.iter().map(|p| p.lambda.clone()).collect();
        let m = match_sets(&eigenvalues(&report), &reference);
        assert!(m.max_relative < 1e-8, "{dims:?}: {}", m.max_relative);
        for &(a, b, _) in &m.pairs {
            // unit eigenvectors agree up to a phase
            for i in 0..2 {
                let (x, y) = (&report.eigenpairs[a].xs[i], &oracle[b].xs[i]);
                let overlap = x.dotc(y).norm() / y.norm();
                assert!((overlap - 1.0).abs() < 1e-8, "{dims:?} block {i}: |⟨x, y⟩| = {overlap}");
            }
        }
    }
}

#[test]
fn eigenvalues_do_not_depend_on_the_seed() {
    let inst = random_mep(3, &[2, 3, 2], 17).unwrap();
    let a = solve(&inst, &SolveConfig { seed: 1, ..Default::default() }).unwrap();
    let b = solve(&inst, &SolveConfig { seed: 2, ..Default::default() }).unwrap();
    assert_eq!(a.eigenpairs.len(), 12);
    assert_eq!(b.eigenpairs.len(), 12);
    assert_ne!(a.slices, b.slices);
    assert!(match_sets(&eigenvalues(&a), &eigenvalues(&b)).max_relative < 1e-10);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let inst = random_mep(2, &[3, 4], 8).unwrap();
    let cfg = SolveConfig { seed: 5, alpha: true, kappa: true, kappa_trace: true, trace_paths: true, ..Default::default() };
    assert_eq!(to_json(&solve(&inst, &cfg).unwrap()), to_json(&solve(&inst, &cfg).unwrap()));
}

#[test]
fn report_files_have_one_row_per_eigenpair() {
    let inst = random_mep(2, &[3, 3], 4).unwrap();
    let cfg = SolveConfig { seed: 4, alpha: true, kappa: true, kappa_trace: true, ..Default::default() };
    let report = solve(&inst, &cfg).unwrap();
    let render = |f: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    };
    let pairs = &report.eigenpairs;
    let eig = render(&|b| write_eigenpair_csv(b, 2, pairs));
    let cert = render(&|b| write_certify_csv(b, 2, pairs));
    let cond = render(&|b| write_condition_csv(b, 2, pairs));
    for text in [&eig, &cert, &cond] {
        assert_eq!(text.lines().count(), 10);
    }
    assert!(cond.lines().next().unwrap().ends_with("kappa_t1.00"));
    assert!(cert.lines().skip(1).all(|l| l.contains(",true,")));
    let parsed: SolveReport = serde_json::from_str(&to_json(&report)).unwrap();
    assert_eq!(to_json(&parsed), to_json(&report));
}
