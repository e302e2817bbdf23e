use seqregret::impossibility::build_instance;
use seqregret::markov::MarkovParams;
use seqregret::process::DistributionTag;
use seqregret::{Alphabet, Error, Pmf, SequentialDistribution, StreamSeed};

fn a(s: usize) -> Alphabet {
    Alphabet::new(s).unwrap()
}

#[test]
fn uniform_kernel_and_sequence_probability() {
    let d = SequentialDistribution::uniform_iid(a(2), 3).unwrap();
    assert_eq!(d.kernel_eval(&[]).unwrap().probs(), &[0.5, 0.5]);
    assert_eq!(d.sequence_prob(&[0, 1, 0]).unwrap(), 0.125);
}

#[test]
fn impossibility_kernels() {
    let inst = build_instance(0.25, 0.125, 3).unwrap();
    assert_eq!(inst.p.kernel_eval(&[0]).unwrap().probs(), &[0.0, 0.0, 1.0]);
    for h in [&[][..], &[0], &[2, 1]] {
        assert_eq!(
            inst.q.kernel_eval(h).unwrap().probs(),
            &[0.25, 0.625, 0.125]
        );
    }
    assert_eq!(inst.p.sequence_prob(&[0, 2, 2]).unwrap(), 0.25);
    assert_eq!(inst.p.sequence_prob(&[0, 1, 2]).unwrap(), 0.0);
    assert_eq!(inst.p.tag(), DistributionTag::ImpossibilityP);
}

#[test]
fn kernel_input_errors() {
    let d = SequentialDistribution::uniform_iid(a(2), 2).unwrap();
    assert!(matches!(
        d.kernel_eval(&[0, 0]),
        Err(Error::InvalidInput(_))
    ));
    assert!(matches!(d.kernel_eval(&[5]), Err(Error::InvalidInput(_))));
    assert!(matches!(d.sequence_prob(&[0]), Err(Error::InvalidInput(_))));
}

#[test]
fn dirac_tabular_samples_its_atom() {
    let mut joint = vec![0.0; 8];
    joint[7] = 1.0;
    let d = SequentialDistribution::tabular_from_joint(a(2), 3, &joint).unwrap();
    for seed in 0..50 {
        assert_eq!(
            d.sample_sequence(StreamSeed::new(seed, 0)).unwrap(),
            vec![1, 1, 1]
        );
    }
}

#[test]
fn tabular_chain_rule_sums_to_one() {
    let joint: Vec<f64> = (1..=27).map(|k| k as f64 / 378.0).collect();
    let d = SequentialDistribution::tabular_from_joint(a(3), 3, &joint).unwrap();
    let mut total = 0.0;
    for (r, want) in joint.iter().enumerate() {
        let seq = [r / 9, r / 3 % 3, r % 3];
        let p = d.sequence_prob(&seq).unwrap();
        assert!((p - want).abs() < 1e-15);
        total += p;
    }
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn impossibility_p_after_zero_is_all_twos() {
    let inst = build_instance(0.25, 0.125, 12).unwrap();
    let mut seen = 0;
    for seed in 0..400 {
        let s = inst.p.sample_sequence(StreamSeed::new(seed, 0)).unwrap();
        if s[0] == 0 {
            seen += 1;
            assert!(s[1..].iter().all(|&z| z == 2));
        }
    }
    assert!(seen > 0);
}

#[test]
fn first_symbol_frequency() {
    let inst = build_instance(0.25, 0.125, 1).unwrap();
    let n = 100_000;
    let zeros = (0..n)
        .filter(|&s| inst.p.sample_sequence(StreamSeed::new(s, 0)).unwrap()[0] == 0)
        .count();
    let f = zeros as f64 / n as f64;
    assert!((f - 0.25).abs() <= 0.01, "{f}");
}

#[test]
fn markov_padding_uses_the_first_state() {
    let params = MarkovParams::new(1, a(2), vec![vec![0.9, 0.1], vec![0.3, 0.7]]).unwrap();
    assert_eq!(params.kernel(&[]).unwrap().probs(), &[0.9, 0.1]);
    // memory 2, one observed symbol 1: context (0, 1) is row 1
    let rows = vec![
        vec![1.0, 0.0],
        vec![0.2, 0.8],
        vec![0.5, 0.5],
        vec![0.0, 1.0],
    ];
    let params = MarkovParams::new(2, a(2), rows).unwrap();
    assert_eq!(params.kernel(&[1]).unwrap().probs(), &[0.2, 0.8]);
    assert_eq!(params.kernel(&[1, 1]).unwrap().probs(), &[0.0, 1.0]);
    let d = SequentialDistribution::markov(params, 4).unwrap();
    assert_eq!(d.kernel_eval(&[0, 1, 0]).unwrap().probs(), &[0.5, 0.5]);
}

#[test]
fn deterministic_chain_gives_dirac_kernels() {
    let params = MarkovParams::new(
        1,
        a(3),
        vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ],
    )
    .unwrap();
    let d = SequentialDistribution::markov(params, 6).unwrap();
    let s = d.sample_sequence(StreamSeed::new(1, 0)).unwrap();
    assert_eq!(s, vec![1, 2, 0, 1, 2, 0]);
    assert_eq!(
        d.kernel_eval(&[1, 2]).unwrap(),
        Pmf::dirac(a(3), 0).unwrap()
    );
}

#[test]
fn sampling_is_reproducible() {
    let d = SequentialDistribution::uniform_iid(a(4), 30).unwrap();
    let s = StreamSeed::new(9, 3);
    assert_eq!(d.sample_sequence(s).unwrap(), d.sample_sequence(s).unwrap());
    assert_ne!(
        d.sample_sequence(s).unwrap(),
        d.sample_sequence(StreamSeed::new(9, 4)).unwrap()
    );
}

#[test]
fn cursor_matches_kernel_eval() {
    let d = SequentialDistribution::laplace_mixture(2, a(3), 8).unwrap();
    let seq = [2, 0, 0, 1, 2, 2, 0, 1];
    let mut c = d.cursor();
    for (k, &z) in seq.iter().enumerate() {
        assert_eq!(c.pmf().unwrap(), d.kernel_eval(&seq[..k]).unwrap());
        c.push(z);
    }
}
