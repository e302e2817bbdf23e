//! Variational distance, Kullback-Leibler divergence, and their per-round
//! and expected versions between two sequential distributions.
//!
//! For a realised sequence `z`, round `t` compares the two kernels after the
//! prefix `z_1..z_{t-1}`:
//!
//! ```text
//! v_t = TV(P(·|z_<t), Q(·|z_<t))      V̂_T = (1/T) Σ v_t      V_T = E_P V̂_T
//! d_t = KL(P(·|z_<t) ‖ Q(·|z_<t))     D̂_T = (1/T) Σ d_t      D_T = E_P D̂_T
//! ```
//!
//! and `KL(P‖Q) = T · D_T` by the chain rule. Exact evaluation either runs a
//! forward recursion over a finite automaton (product, Markov, and the
//! lower-bound processes) or enumerates all `S^T` sequences; the joint
//! divergence in enumeration mode is summed over whole sequences, which
//! makes it an independent route to `T · D_T`.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::pmf::Pmf;
use crate::process::{Automaton, Cursor, SequentialDistribution};
use crate::rng::StreamSeed;

/// Largest `S^T` that exact enumeration will visit.
pub const ENUMERATION_CAP: usize = 1_000_000;

fn check_sizes(p: &Pmf, q: &Pmf) -> Result<()> {
    if p.len() != q.len() {
        return Err(invalid(format!(
            "pmf sizes differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

/// `sup_A |p(A) − q(A)|`, i.e. half the L1 distance.
pub fn tv_distance(p: &Pmf, q: &Pmf) -> Result<f64> {
    check_sizes(p, q)?;
    Ok(tv_unchecked(p, q))
}

#[inline]
fn tv_unchecked(p: &Pmf, q: &Pmf) -> f64 {
    let l1: f64 = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| (a - b).abs())
        .sum();
    (0.5 * l1).min(1.0)
}

/// `Σ p ln(p/q)` in nats, with `0 ln(0/q) = 0` and `p ln(p/0) = +∞`.
pub fn kl_divergence(p: &Pmf, q: &Pmf) -> Result<f64> {
    check_sizes(p, q)?;
    Ok(kl_unchecked(p, q))
}

#[inline]
fn kl_unchecked(p: &Pmf, q: &Pmf) -> f64 {
    let mut kl = 0.0;
    for (&a, &b) in p.probs().iter().zip(q.probs()) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            kl += a * (a / b).ln();
        }
    }
    kl.max(0.0)
}

/// Per-round distances along one realised sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceTrace {
    pub v: Vec<f64>,
    pub d: Vec<f64>,
    /// `V̂_T`
    pub avg_v: f64,
    /// `D̂_T`
    pub avg_d: f64,
}

impl DivergenceTrace {
    pub(crate) fn from_rounds(v: Vec<f64>, d: Vec<f64>) -> Self {
        let n = v.len().max(1) as f64;
        let avg_v = v.iter().sum::<f64>() / n;
        let avg_d = d.iter().sum::<f64>() / n;
        Self { v, d, avg_v, avg_d }
    }
}

/// Accumulates `v_t`/`d_t` while two cursors advance in lockstep.
pub(crate) struct TraceRecorder {
    v: Vec<f64>,
    d: Vec<f64>,
}

impl TraceRecorder {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            v: Vec::with_capacity(n),
            d: Vec::with_capacity(n),
        }
    }

    pub fn record(&mut self, p: &Pmf, q: &Pmf) {
        self.v.push(tv_unchecked(p, q));
        self.d.push(kl_unchecked(p, q));
    }

    pub fn finish(self) -> DivergenceTrace {
        DivergenceTrace::from_rounds(self.v, self.d)
    }
}

/// Per-round distances between `P` and `Q` along `seq`.
pub fn instantaneous_trace(
    p: &SequentialDistribution,
    q: &SequentialDistribution,
    seq: &[usize],
) -> Result<DivergenceTrace> {
    p.check_compatible(q)?;
    if seq.len() != p.horizon() {
        return Err(invalid(format!(
            "sequence length {} differs from horizon {}",
            seq.len(),
            p.horizon()
        )));
    }
    p.alphabet().check_sequence(seq)?;
    let mut pc = p.cursor();
    let mut qc = q.cursor();
    let mut rec = TraceRecorder::with_capacity(seq.len());
    for &z in seq {
        rec.record(&pc.pmf()?, &qc.pmf()?);
        pc.push(z);
        qc.push(z);
    }
    Ok(rec.finish())
}

/// How expectations over `P` are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Automaton recursion when both sides support it, otherwise
    /// enumeration of all sequences (subject to [`ENUMERATION_CAP`]).
    Exact,
    /// Always enumerate all sequences (subject to [`ENUMERATION_CAP`]).
    Enumerate,
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Automaton,
    Enumeration,
    MonteCarlo,
}

/// Standard errors of the Monte Carlo estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McStderr {
    pub v: f64,
    pub d: f64,
    pub joint_kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedDivergences {
    /// `V_T`
    pub v_expected: f64,
    /// `D_T`
    pub d_expected: f64,
    /// `KL(P‖Q)`
    pub joint_kl: f64,
    pub method: Method,
    pub mc_stderr: Option<McStderr>,
}

impl ExpectedDivergences {
    pub fn is_exact(&self) -> bool {
        self.method != Method::MonteCarlo
    }
}

/// `V_T`, `D_T` and `KL(P‖Q)`.
pub fn expected_quantities(
    p: &SequentialDistribution,
    q: &SequentialDistribution,
    mode: Mode,
) -> Result<ExpectedDivergences> {
    p.check_compatible(q)?;
    match mode {
        Mode::Exact => match (p.automaton(), q.automaton()) {
            (Some(pa), Some(qa)) => Ok(automaton_expectations(&pa, &qa, p.horizon())),
            _ => enumerate(p, q),
        },
        Mode::Enumerate => enumerate(p, q),
        Mode::MonteCarlo { samples, seed } => monte_carlo(p, q, samples, seed),
    }
}

/// `KL(P‖Q)` alone.
pub fn joint_kl(p: &SequentialDistribution, q: &SequentialDistribution, mode: Mode) -> Result<f64> {
    Ok(expected_quantities(p, q, mode)?.joint_kl)
}

fn automaton_expectations(
    pa: &Automaton<'_>,
    qa: &Automaton<'_>,
    horizon: usize,
) -> ExpectedDivergences {
    let nq = qa.states();
    let n = pa.states() * nq;
    let mut mass = vec![0.0; n];
    let mut next = vec![0.0; n];
    mass[pa.initial() * nq + qa.initial()] = 1.0;
    let p_kernels: Vec<Pmf> = (0..pa.states()).map(|s| pa.kernel(s)).collect();
    let q_kernels: Vec<Pmf> = (0..nq).map(|s| qa.kernel(s)).collect();
    let (mut v_sum, mut d_sum) = (0.0, 0.0);
    for _ in 0..horizon {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (idx, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let (sp, sq) = (idx / nq, idx % nq);
            let (pk, qk) = (&p_kernels[sp], &q_kernels[sq]);
            v_sum += m * tv_unchecked(pk, qk);
            d_sum += m * kl_unchecked(pk, qk);
            for (z, &pz) in pk.probs().iter().enumerate() {
                if pz > 0.0 {
                    next[pa.next(sp, z) * nq + qa.next(sq, z)] += m * pz;
                }
            }
        }
        std::mem::swap(&mut mass, &mut next);
    }
    let t = horizon as f64;
    ExpectedDivergences {
        v_expected: (v_sum / t).min(1.0),
        d_expected: d_sum / t,
        // chain rule: the joint divergence is the sum of expected per-round divergences
        joint_kl: d_sum,
        method: Method::Automaton,
        mc_stderr: None,
    }
}

#[derive(Default)]
struct EnumAcc {
    v: f64,
    d: f64,
    kl: f64,
}

fn enumerate(
    p: &SequentialDistribution,
    q: &SequentialDistribution,
) -> Result<ExpectedDivergences> {
    let s = p.alphabet().size();
    let fits = s
        .checked_pow(p.horizon() as u32)
        .is_some_and(|n| n <= ENUMERATION_CAP);
    if !fits {
        return Err(Error::Capacity(format!(
            "exact enumeration needs S^T = {s}^{} sequences (cap {ENUMERATION_CAP}); use monte-carlo mode",
            p.horizon()
        )));
    }
    let mut acc = EnumAcc::default();
    visit(
        &mut p.cursor(),
        &mut q.cursor(),
        1.0,
        1.0,
        p.horizon(),
        &mut acc,
    )?;
    let t = p.horizon() as f64;
    Ok(ExpectedDivergences {
        v_expected: (acc.v / t).min(1.0),
        d_expected: acc.d / t,
        joint_kl: acc.kl.max(0.0),
        method: Method::Enumeration,
        mc_stderr: None,
    })
}

// Only prefixes with positive P-probability are expanded.
fn visit(
    pc: &mut Cursor<'_>,
    qc: &mut Cursor<'_>,
    p_prob: f64,
    q_prob: f64,
    horizon: usize,
    acc: &mut EnumAcc,
) -> Result<()> {
    if pc.len() == horizon {
        acc.kl += if q_prob > 0.0 {
            p_prob * (p_prob / q_prob).ln()
        } else {
            f64::INFINITY
        };
        return Ok(());
    }
    let pk = pc.pmf()?;
    let qk = qc.pmf()?;
    acc.v += p_prob * tv_unchecked(&pk, &qk);
    acc.d += p_prob * kl_unchecked(&pk, &qk);
    for (z, &pz) in pk.probs().iter().enumerate() {
        if pz == 0.0 {
            continue;
        }
        let mut pc2 = pc.clone();
        let mut qc2 = qc.clone();
        pc2.push(z);
        qc2.push(z);
        visit(
            &mut pc2,
            &mut qc2,
            p_prob * pz,
            q_prob * qk.prob(z),
            horizon,
            acc,
        )?;
    }
    Ok(())
}

struct McSample {
    v: f64,
    d: f64,
    log_ratio: f64,
}

fn mean_and_stderr(xs: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = xs.clone().sum::<f64>() / nf;
    if !mean.is_finite() {
        return (mean, f64::INFINITY);
    }
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

fn monte_carlo(
    p: &SequentialDistribution,
    q: &SequentialDistribution,
    samples: usize,
    seed: u64,
) -> Result<ExpectedDivergences> {
    if samples == 0 {
        return Err(invalid("monte-carlo mode needs at least one sample"));
    }
    let draws: Vec<McSample> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = StreamSeed::new(seed, i).rng();
            let mut pc = p.cursor();
            let mut qc = q.cursor();
            let mut rec = TraceRecorder::with_capacity(p.horizon());
            let mut log_ratio = 0.0;
            for _ in 0..p.horizon() {
                let pk = pc.pmf()?;
                let qk = qc.pmf()?;
                rec.record(&pk, &qk);
                let z = pk.sample_with(rand::Rng::random(&mut rng));
                let qz = qk.prob(z);
                log_ratio += if qz > 0.0 {
                    (pk.prob(z) / qz).ln()
                } else {
                    f64::INFINITY
                };
                pc.push(z);
                qc.push(z);
            }
            let tr = rec.finish();
            Ok(McSample {
                v: tr.avg_v,
                d: tr.avg_d,
                log_ratio,
            })
        })
        .collect::<Result<_>>()?;
    let (v, sv) = mean_and_stderr(draws.iter().map(|s| s.v), samples);
    let (d, sd) = mean_and_stderr(draws.iter().map(|s| s.d), samples);
    let (kl, sk) = mean_and_stderr(draws.iter().map(|s| s.log_ratio), samples);
    Ok(ExpectedDivergences {
        v_expected: v,
        d_expected: d,
        joint_kl: kl,
        method: Method::MonteCarlo,
        mc_stderr: Some(McStderr {
            v: sv,
            d: sd,
            joint_kl: sk,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::Alphabet;

    fn pmf(v: &[f64]) -> Pmf {
        Pmf::new(v.to_vec()).unwrap()
    }

    #[test]
    fn tv_examples() {
        assert_eq!(
            tv_distance(&pmf(&[0.3, 0.7]), &pmf(&[0.3, 0.7])).unwrap(),
            0.0
        );
        assert_eq!(
            tv_distance(&pmf(&[0.5, 0.5]), &pmf(&[1.0, 0.0])).unwrap(),
            0.5
        );
        assert_eq!(
            tv_distance(&pmf(&[1.0, 0.0, 0.0]), &pmf(&[0.0, 1.0, 0.0])).unwrap(),
            1.0
        );
        assert!(tv_distance(&pmf(&[0.5, 0.5]), &pmf(&[0.2, 0.3, 0.5])).is_err());
    }

    #[test]
    fn kl_examples() {
        assert_eq!(
            kl_divergence(&pmf(&[0.3, 0.7]), &pmf(&[0.3, 0.7])).unwrap(),
            0.0
        );
        let v = kl_divergence(&pmf(&[1.0, 0.0]), &pmf(&[0.5, 0.5])).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(
            kl_divergence(&pmf(&[0.5, 0.5]), &pmf(&[1.0, 0.0])).unwrap(),
            f64::INFINITY
        );
        assert!(kl_divergence(&pmf(&[0.5, 0.5]), &pmf(&[0.2, 0.3, 0.5])).is_err());
    }

    #[test]
    fn identical_processes_have_zero_divergence() {
        let a = Alphabet::new(3).unwrap();
        let p = SequentialDistribution::markov(crate::markov::sample_theta(1, a, 3).unwrap(), 5)
            .unwrap();
        let tr = instantaneous_trace(&p, &p, &[0, 2, 1, 1, 0]).unwrap();
        assert!(tr.v.iter().chain(&tr.d).all(|x| *x == 0.0));
        for mode in [
            Mode::Exact,
            Mode::Enumerate,
            Mode::MonteCarlo {
                samples: 10,
                seed: 1,
            },
        ] {
            let e = expected_quantities(&p, &p, mode).unwrap();
            assert_eq!(
                (e.v_expected, e.d_expected, e.joint_kl),
                (0.0, 0.0, 0.0),
                "{mode:?}"
            );
        }
    }

    #[test]
    fn enumeration_cap() {
        let a = Alphabet::new(2).unwrap();
        let p = SequentialDistribution::uniform_iid(a, 21).unwrap();
        let q = SequentialDistribution::laplace_mixture(1, a, 21).unwrap();
        assert!(matches!(
            expected_quantities(&p, &q, Mode::Exact),
            Err(Error::Capacity(_))
        ));
        assert!(matches!(
            expected_quantities(&p, &p, Mode::Enumerate),
            Err(Error::Capacity(_))
        ));
        // the automaton route has no cap
        assert!(expected_quantities(&p, &p, Mode::Exact).is_ok());
    }

    #[test]
    fn automaton_and_enumeration_agree_on_markov_pairs() {
        let a = Alphabet::new(3).unwrap();
        let p = SequentialDistribution::markov(crate::markov::sample_theta(2, a, 10).unwrap(), 7)
            .unwrap();
        let q = SequentialDistribution::markov(crate::markov::sample_theta(1, a, 11).unwrap(), 7)
            .unwrap();
        let x = expected_quantities(&p, &q, Mode::Exact).unwrap();
        let y = expected_quantities(&p, &q, Mode::Enumerate).unwrap();
        assert_eq!(x.method, Method::Automaton);
        assert!((x.v_expected - y.v_expected).abs() < 1e-12);
        assert!((x.d_expected - y.d_expected).abs() < 1e-12);
        assert!((x.joint_kl - y.joint_kl).abs() < 1e-10);
    }

    #[test]
    fn absolute_continuity_failure_is_infinite() {
        let a = Alphabet::new(2).unwrap();
        let p = SequentialDistribution::uniform_iid(a, 3).unwrap();
        let q = SequentialDistribution::product(pmf(&[1.0, 0.0]), 3).unwrap();
        for mode in [Mode::Exact, Mode::Enumerate] {
            assert_eq!(joint_kl(&p, &q, mode).unwrap(), f64::INFINITY);
        }
    }
}
