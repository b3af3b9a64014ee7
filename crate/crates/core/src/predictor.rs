//! Per-step loss-minimizing prediction with a plug-in distribution.
//!
//! The policy treats its distribution as passive: conditionals must not react
//! to actions, which is probed at construction. Plugging in the true source
//! gives the informed predictor; plugging in a mixture gives the learning
//! one, whose posterior advances as percepts arrive.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{Env, LossMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{Action, HistoryViews, Percept};
use crate::util::bump;

/// A plug-in distribution paired with a loss matrix over (percept, action).
#[derive(Debug, Clone)]
pub struct PredictorPolicy<R> {
    rho: R,
    loss: LossMatrix<f64>,
}

/// Depth of the construction-time probe for action sensitivity.
const PROBE_DEPTH: usize = 2;

impl<R: Env<f64>> PredictorPolicy<R> {
    /// Builds the policy, first probing that `rho`'s conditionals ignore
    /// action components: every action fill of every short history must
    /// yield the identical conditional row (or be unreachable under all
    /// fills alike).
    pub fn new(rho: R, loss: LossMatrix<f64>) -> Result<Self> {
        let spaces = rho.spaces();
        if loss.n_percepts() != spaces.percept_count()
            || loss.n_actions() != spaces.actions.size()
        {
            return Err(Error::ShapeMismatch(format!(
                "loss matrix {}x{} does not fit {} percepts x {} actions",
                loss.n_percepts(),
                loss.n_actions(),
                spaces.percept_count(),
                spaces.actions.size()
            )));
        }
        let percepts = spaces.percepts();
        let n_actions = spaces.actions.size();
        for len in 0..=PROBE_DEPTH {
            let mut combo = vec![0usize; len];
            loop {
                // one percept history; compare conditional rows across all
                // action fills of length len+1
                let mut reference: Option<Option<Vec<f64>>> = None;
                let mut fill = vec![0usize; len + 1];
                loop {
                    let row = Self::probe_row(&rho, &percepts, &combo, &fill)?;
                    match &reference {
                        None => reference = Some(row),
                        Some(r) if *r == row => {}
                        Some(_) => {
                            return Err(Error::ActionDependent(format!(
                                "conditionals react to actions on a length-{len} history"
                            )));
                        }
                    }
                    if !bump(&mut fill, n_actions) {
                        break;
                    }
                }
                if !bump(&mut combo, percepts.len()) {
                    break;
                }
            }
        }
        Ok(Self { rho, loss })
    }

    fn probe_row(
        rho: &R,
        percepts: &[Percept],
        combo: &[usize],
        fill: &[usize],
    ) -> Result<Option<Vec<f64>>> {
        let mut ctx = rho.init_ctx();
        for (i, &pi) in combo.iter().enumerate() {
            let y = Action(fill[i]);
            let x = percepts[pi];
            if rho.step_prob(&ctx, y, x)? == 0.0 {
                return Ok(None);
            }
            ctx = rho.step_ctx(&ctx, y, x)?;
        }
        let y = Action(fill[combo.len()]);
        let row: Result<Vec<f64>> = percepts
            .iter()
            .map(|&x| rho.step_prob(&ctx, y, x))
            .collect();
        Ok(Some(row?))
    }

    pub fn rho(&self) -> &R {
        &self.rho
    }

    pub fn loss(&self) -> &LossMatrix<f64> {
        &self.loss
    }

    /// Expected loss of every action at the given conditioning context.
    pub fn expected_losses(&self, ctx: &R::Ctx) -> Result<Vec<f64>> {
        let percepts = self.rho.spaces().percepts();
        let cond: Result<Vec<f64>> = percepts
            .iter()
            .map(|&x| self.rho.step_prob(ctx, Action(0), x))
            .collect();
        let cond = cond?;
        (0..self.loss.n_actions())
            .map(|y| {
                let terms = cond
                    .iter()
                    .enumerate()
                    .map(|(xi, &p)| Ok(self.loss.get(xi, Action(y))? * p))
                    .collect::<Result<Vec<f64>>>()?;
                Ok(Scalar::sum(terms.into_iter()))
            })
            .collect()
    }

    /// The loss-minimizing action at a context; ties go to the smallest
    /// action index.
    pub fn bayes_action_at(&self, ctx: &R::Ctx) -> Result<Action> {
        let e = self.expected_losses(ctx)?;
        Ok(argmin(&e))
    }

    /// The loss-minimizing action after the given history views.
    pub fn bayes_action(&self, views: &HistoryViews) -> Result<Action> {
        let past: Vec<(Action, Percept)> = views.past_cycles().collect();
        let ctx = self.rho.ctx_after(&past)?;
        self.bayes_action_at(&ctx)
    }
}

/// Smallest index attaining the minimum.
fn argmin(values: &[f64]) -> Action {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    Action(best)
}

/// The decision cutoff for a binary 2x2 loss matrix: predicting 1 is optimal
/// exactly when the probability of percept 1 exceeds the returned value.
pub fn threshold_gamma(loss: &LossMatrix<f64>) -> Result<f64> {
    if loss.n_percepts() != 2 || loss.n_actions() != 2 {
        return Err(Error::ShapeMismatch(
            "threshold needs a 2x2 loss matrix".into(),
        ));
    }
    let l = |x: usize, y: usize| loss.get(x, Action(y)).unwrap();
    let d0 = l(0, 1) - l(0, 0);
    let d1 = l(1, 0) - l(1, 1);
    if d0 <= 0.0 || d1 <= 0.0 {
        return Err(Error::DegenerateLoss);
    }
    Ok(d0 / (d0 + d1))
}

/// The threshold rule itself: 1 above the cutoff, 0 below, 0 at equality.
pub fn threshold_action(gamma: f64, prob_one: f64) -> Action {
    if prob_one > gamma {
        Action(1)
    } else {
        Action(0)
    }
}

/// Per-cycle incurred losses and their running total.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossLedger {
    losses: Vec<f64>,
}

impl LossLedger {
    pub fn push(&mut self, loss: f64) {
        self.losses.push(loss);
    }

    pub fn cycles(&self) -> usize {
        self.losses.len()
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    /// Compensated sum of the per-cycle entries.
    pub fn total(&self) -> f64 {
        Scalar::sum(self.losses.iter().copied())
    }

    /// Total over the first `n` cycles.
    pub fn total_through(&self, n: usize) -> f64 {
        Scalar::sum(self.losses[..n.min(self.losses.len())].iter().copied())
    }
}

/// Totals of a learning ledger against an informed baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub difference: f64,
    /// Undefined when the baseline never lost.
    pub ratio: Option<f64>,
}

/// Compares cumulative losses of two equal-length ledgers.
pub fn regret_report(learning: &LossLedger, informed: &LossLedger) -> Result<RegretReport> {
    if learning.cycles() != informed.cycles() {
        return Err(Error::ShapeMismatch(format!(
            "ledger lengths differ: {} vs {}",
            learning.cycles(),
            informed.cycles()
        )));
    }
    let lx = learning.total();
    let lm = informed.total();
    Ok(RegretReport {
        difference: lx - lm,
        ratio: (lm > 0.0).then(|| lx / lm),
    })
}

/// What an observer sees after each simulated cycle.
pub struct CycleRecord<'a, C> {
    pub cycle: usize,
    pub action: Action,
    pub percept: Percept,
    pub loss: f64,
    pub cumulative: f64,
    /// The policy's conditioning context after the update on this percept.
    pub rho_ctx: &'a C,
}

/// Draws an `n`-cycle percept stream from an action-free source. The stream
/// is what any policy would face, since the source ignores actions.
pub fn sample_stream<T: Env<f64>>(truth: &T, n: usize, seed: u64) -> Result<Vec<Percept>> {
    if !truth.is_action_free() {
        return Err(Error::NotApplicable(
            "percept streams exist only for action-free sources".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ctx = truth.init_ctx();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let x = truth.sample_percept(&ctx, Action(0), &mut rng)?;
        ctx = truth.step_ctx(&ctx, Action(0), x)?;
        out.push(x);
    }
    Ok(out)
}

/// Replays a fixed percept stream against a policy, recording the loss of
/// every decision and reporting each cycle to `observe`.
pub fn run_prediction_on_stream<R, F>(
    policy: &PredictorPolicy<R>,
    stream: &[Percept],
    mut observe: F,
) -> Result<LossLedger>
where
    R: Env<f64>,
    F: FnMut(&CycleRecord<R::Ctx>),
{
    let mut ledger = LossLedger::default();
    let mut cumulative = crate::scalar::KahanSum::default();
    let mut ctx = policy.rho.init_ctx();
    for (i, &x) in stream.iter().enumerate() {
        let y = policy.bayes_action_at(&ctx)?;
        let loss = policy.loss.get(policy.rho.spaces().flat_index(x)?, y)?;
        ledger.push(loss);
        cumulative.add(loss);
        ctx = policy.rho.step_ctx(&ctx, y, x)?;
        observe(&CycleRecord {
            cycle: i + 1,
            action: y,
            percept: x,
            loss,
            cumulative: cumulative.total(),
            rho_ctx: &ctx,
        });
    }
    Ok(ledger)
}

/// Simulates `n` cycles of prediction against an action-free truth: the
/// policy picks an action, the truth samples a percept, the matrix charges
/// the loss, and a mixture policy's posterior moves on.
pub fn run_prediction<T, R>(
    truth: &T,
    policy: &PredictorPolicy<R>,
    n: usize,
    seed: u64,
) -> Result<LossLedger>
where
    T: Env<f64>,
    R: Env<f64>,
{
    if n == 0 {
        return Err(Error::ShapeMismatch("prediction needs n >= 1".into()));
    }
    if truth.spaces() != policy.rho.spaces() {
        return Err(Error::ShapeMismatch(
            "truth and plug-in must share alphabets".into(),
        ));
    }
    let stream = sample_stream(truth, n, seed)?;
    run_prediction_on_stream(policy, &stream, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::LossMatrix;
    use crate::environments::{make_action_table, make_bandit, make_bernoulli};
    use crate::mixture::{Mixture, ModelClass};
    use proptest::prelude::*;

    fn zero_one() -> LossMatrix<f64> {
        LossMatrix::zero_one(2).unwrap()
    }

    fn policy(p: f64, loss: LossMatrix<f64>) -> PredictorPolicy<crate::env::TableEnv<f64>> {
        PredictorPolicy::new(make_bernoulli(p).unwrap(), loss).unwrap()
    }

    #[test]
    fn bayes_action_enumerated_examples() {
        let pol = policy(0.7, zero_one());
        let ctx = pol.rho().init_ctx();
        assert_eq!(pol.bayes_action_at(&ctx).unwrap(), Action(1));
        let e = pol.expected_losses(&ctx).unwrap();
        assert!((e[0] - 0.7).abs() < 1e-15 && (e[1] - 0.3).abs() < 1e-15);

        // exact tie goes to the smaller index
        let pol = policy(0.5, zero_one());
        assert_eq!(pol.bayes_action_at(&pol.rho().init_ctx()).unwrap(), Action(0));

        let asym = LossMatrix::new(vec![vec![0.0, 1.0], vec![0.2, 0.0]]).unwrap();
        let pol = policy(0.9, asym);
        let ctx = pol.rho().init_ctx();
        let e = pol.expected_losses(&ctx).unwrap();
        assert!((e[0] - 0.18).abs() < 1e-15);
        assert!((e[1] - 0.1).abs() < 1e-15);
        assert_eq!(pol.bayes_action_at(&ctx).unwrap(), Action(1));
    }

    #[test]
    fn action_dependent_plug_in_is_rejected() {
        let err = PredictorPolicy::new(
            make_action_table(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap(),
            zero_one(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ActionDependent(_)));
        // embedded-loss machine: 4 percepts x 2 actions, reacting to the arm
        let err = PredictorPolicy::new(
            make_bandit(vec![0.2, 0.8]).unwrap(),
            LossMatrix::new(vec![vec![0.0, 0.0]; 4]).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ActionDependent(_)));
    }

    #[test]
    fn mixture_plug_in_passes_the_probe() {
        let class = ModelClass::uniform(vec![
            make_bernoulli(0.3).unwrap(),
            make_bernoulli(0.8).unwrap(),
        ])
        .unwrap();
        assert!(PredictorPolicy::new(Mixture::new(class), zero_one()).is_ok());
    }

    #[test]
    fn threshold_values() {
        assert_eq!(threshold_gamma(&zero_one()).unwrap(), 0.5);
        let asym = LossMatrix::new(vec![vec![0.0, 1.0], vec![0.2, 0.0]]).unwrap();
        let g = threshold_gamma(&asym).unwrap();
        assert!((g - 1.0 / 1.2).abs() < 1e-15);
        let degenerate = LossMatrix::new(vec![vec![0.1, 0.1], vec![0.5, 0.0]]).unwrap();
        assert!(matches!(
            threshold_gamma(&degenerate),
            Err(Error::DegenerateLoss)
        ));
    }

    #[test]
    fn threshold_rule_matches_bayes_action_on_random_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let l00: f64 = rng.gen_range(0.0..0.9);
            let l01 = rng.gen_range(l00 + 0.01..1.0);
            let l11: f64 = rng.gen_range(0.0..0.9);
            let l10 = rng.gen_range(l11 + 0.01..1.0);
            let loss = LossMatrix::new(vec![vec![l00, l01], vec![l10, l11]]).unwrap();
            let gamma = threshold_gamma(&loss).unwrap();
            let p: f64 = rng.gen_range(0.0..=1.0);
            let pol = policy(p, loss);
            let direct = pol.bayes_action_at(&pol.rho().init_ctx()).unwrap();
            assert_eq!(direct, threshold_action(gamma, p), "p={p} gamma={gamma}");
        }
    }

    #[test]
    fn chosen_action_is_per_step_optimal_exhaustively() {
        // three-symbol action-free source, full 3x3 loss table
        let row = vec![0.2, 0.5, 0.3];
        let env = make_action_table(vec![row.clone(), row.clone(), row]).unwrap();
        let loss = LossMatrix::new(vec![
            vec![0.0, 0.4, 1.0],
            vec![0.6, 0.0, 0.7],
            vec![1.0, 0.3, 0.1],
        ])
        .unwrap();
        let pol = PredictorPolicy::new(env, loss).unwrap();
        let ctx = pol.rho().init_ctx();
        let e = pol.expected_losses(&ctx).unwrap();
        let chosen = pol.bayes_action_at(&ctx).unwrap();
        for (alt, &ealt) in e.iter().enumerate() {
            assert!(e[chosen.0] <= ealt, "action {alt} beats the chosen one");
        }
    }

    proptest! {
        /// Positive scaling and constant shifts never change the argmin.
        #[test]
        fn affine_loss_invariance(
            l in proptest::collection::vec(0.0f64..0.5, 4),
            scale in 0.1f64..1.5,
            shift in 0.0f64..0.25,
            p in 0.0f64..1.0,
        ) {
            let base = LossMatrix::new(vec![vec![l[0], l[1]], vec![l[2], l[3]]]).unwrap();
            let moved = LossMatrix::new(vec![
                vec![l[0] * scale + shift, l[1] * scale + shift],
                vec![l[2] * scale + shift, l[3] * scale + shift],
            ]).unwrap();
            let pol = policy(p, base);
            let e = pol.expected_losses(&pol.rho().init_ctx()).unwrap();
            // rounding may flip near-ties, so only decided cases are comparable
            prop_assume!((e[0] - e[1]).abs() > 1e-9);
            let a = pol.bayes_action_at(&make_bernoulli(p).unwrap().init_ctx()).unwrap();
            let b = policy(p, moved).bayes_action_at(&make_bernoulli(p).unwrap().init_ctx()).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn perfect_prediction_loses_nothing() {
        let truth = make_bernoulli(1.0).unwrap();
        let pol = policy(1.0, zero_one());
        let ledger = run_prediction(&truth, &pol, 10, 0).unwrap();
        assert_eq!(ledger.total(), 0.0);
        assert_eq!(ledger.cycles(), 10);
    }

    #[test]
    fn informed_predictor_loss_rate_matches_the_source() {
        let truth = make_bernoulli(0.7).unwrap();
        let pol = policy(0.7, zero_one());
        let ledger = run_prediction(&truth, &pol, 10_000, 1).unwrap();
        let rate = ledger.total() / 10_000.0;
        assert!((rate - 0.3).abs() < 0.02, "rate {rate}");
    }

    #[test]
    fn ledger_totals_and_bounds() {
        let mut ledger = LossLedger::default();
        for l in [0.25, 0.5, 0.0, 1.0] {
            ledger.push(l);
        }
        assert!((ledger.total() - 1.75).abs() < 1e-12);
        assert!(ledger.total() >= 0.0 && ledger.total() <= ledger.cycles() as f64);
        assert_eq!(ledger.total_through(2), 0.75);
    }

    #[test]
    fn regret_report_examples() {
        let mk = |vals: &[f64]| {
            let mut l = LossLedger::default();
            for &v in vals {
                l.push(v);
            }
            l
        };
        let a = mk(&[0.5, 0.5]);
        let r = regret_report(&a, &a.clone()).unwrap();
        assert_eq!(r.difference, 0.0);
        assert_eq!(r.ratio, Some(1.0));

        // totals 330 vs 300 on equal-length ledgers
        let xi = mk(&vec![1.0; 330]);
        let mut mu_vals = vec![1.0; 300];
        mu_vals.extend(vec![0.0; 30]);
        let mu = mk(&mu_vals);
        let r = regret_report(&xi, &mu).unwrap();
        assert!((r.difference - 30.0).abs() < 1e-12);
        assert!((r.ratio.unwrap() - 1.1).abs() < 1e-12);

        let zero = mk(&[0.0, 0.0]);
        let some = mk(&[1.0, 0.0]);
        let r = regret_report(&some, &zero).unwrap();
        assert_eq!(r.ratio, None);
        assert_eq!(r.difference, 1.0);

        assert!(regret_report(&mk(&[0.0]), &mk(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn paired_streams_are_identical_for_any_policy() {
        let truth = make_bernoulli(0.7).unwrap();
        let s1 = sample_stream(&truth, 50, 3).unwrap();
        let s2 = sample_stream(&truth, 50, 3).unwrap();
        assert_eq!(s1, s2);
        let s3 = sample_stream(&truth, 50, 4).unwrap();
        assert_ne!(s1, s3);
    }
}
