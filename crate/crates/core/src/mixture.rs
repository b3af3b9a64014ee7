//! Weighted finite model classes and the Bayes mixture over them.
//!
//! The mixture is itself a chronological environment: its conditional is the
//! posterior-weighted average of member conditionals, and completing a cycle
//! performs the Bayes update on the weights. Planners and predictors consume
//! it through the same interface as any single environment.

use crate::env::Env;
use crate::environments::Describe;
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Scalar};
use crate::types::{Action, Percept, Spaces};

/// Tolerance on prior weights summing to 1.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Slack granted when checking the mixture-dominates-member inequality.
pub const DOMINANCE_SLACK: f64 = 1e-15;

/// How prior weights are assigned to class members.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightScheme {
    Uniform,
    /// Weight proportional to `2^-(canonical description length in tokens)`.
    PrefixCode,
    Explicit(Vec<f64>),
}

/// Normalized weights proportional to `2^-length`.
pub fn prefix_code_weights(lengths: &[usize]) -> Result<Vec<f64>> {
    if lengths.is_empty() {
        return Err(Error::EmptyClass);
    }
    let min = *lengths.iter().min().unwrap();
    let raw: Vec<f64> = lengths
        .iter()
        .map(|&l| 2f64.powi(-((l - min) as i32)))
        .collect();
    let total: f64 = Scalar::sum(raw.iter().copied());
    Ok(raw.into_iter().map(|r| r / total).collect())
}

/// An ordered finite set of candidate environments with positive prior
/// weights summing to one. All members share the same symbol spaces.
#[derive(Debug, Clone)]
pub struct ModelClass<M> {
    members: Vec<M>,
    weights: Vec<f64>,
}

impl<M: Env<f64>> ModelClass<M> {
    pub fn new(members: Vec<M>, weights: Vec<f64>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyClass);
        }
        if weights.len() != members.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for {} members",
                weights.len(),
                members.len()
            )));
        }
        for &w in &weights {
            if !(w > 0.0) {
                return Err(Error::ModelInvalid(format!(
                    "prior weight {w} must be positive"
                )));
            }
        }
        let total: f64 = Scalar::sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::ModelInvalid(format!(
                "prior weights sum to {total}, not 1"
            )));
        }
        let spaces = members[0].spaces();
        if members.iter().any(|m| m.spaces() != spaces) {
            return Err(Error::ShapeMismatch(
                "class members must share alphabets".into(),
            ));
        }
        Ok(Self { members, weights })
    }

    pub fn uniform(members: Vec<M>) -> Result<Self> {
        let k = members.len();
        if k == 0 {
            return Err(Error::EmptyClass);
        }
        Self::new(members, vec![1.0 / k as f64; k])
    }

    pub fn with_scheme(members: Vec<M>, scheme: &WeightScheme) -> Result<Self>
    where
        M: Describe,
    {
        match scheme {
            WeightScheme::Uniform => Self::uniform(members),
            WeightScheme::PrefixCode => {
                let lengths: Vec<usize> = members
                    .iter()
                    .map(|m| m.canonical_tokens().len())
                    .collect();
                let weights = prefix_code_weights(&lengths)?;
                Self::new(members, weights)
            }
            WeightScheme::Explicit(w) => Self::new(members, w.clone()),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[M] {
        &self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Posterior state of a mixture on some history: normalized log-weights and
/// one conditioning context per member. Members that assigned probability
/// zero to an observed percept stay at log-weight `-inf` forever.
#[derive(Debug, Clone)]
pub struct MixCtx<C> {
    log_w: Vec<f64>,
    members: Vec<C>,
}

impl<C> MixCtx<C> {
    /// Posterior weights in linear space; dead members report exactly 0.
    pub fn weights(&self) -> Vec<f64> {
        self.log_w.iter().map(|&lw| lw.exp()).collect()
    }
}

/// The Bayes mixture `Σ_i w_i μ_i` over a model class.
#[derive(Debug, Clone)]
pub struct Mixture<M> {
    class: ModelClass<M>,
}

impl<M: Env<f64>> Mixture<M> {
    pub fn new(class: ModelClass<M>) -> Self {
        Self { class }
    }

    pub fn class(&self) -> &ModelClass<M> {
        &self.class
    }

    /// Posterior weights at a context, in member order.
    pub fn posterior_weights(&self, ctx: &MixCtx<M::Ctx>) -> Vec<f64> {
        ctx.weights()
    }

    /// Joint sequence probability evaluated directly as the weighted sum of
    /// member joints (as opposed to chaining mixture conditionals).
    pub fn joint_direct(&self, percepts: &[Percept], actions: &[Action]) -> Result<f64> {
        let terms: Result<Vec<f64>> = self
            .class
            .members
            .iter()
            .zip(&self.class.weights)
            .map(|(m, &w)| Ok(w * m.joint(percepts, actions)?))
            .collect();
        Ok(Scalar::sum(terms?.into_iter()))
    }

    /// Whether the mixture dominates member `i` on the given sequence:
    /// `ξ(x_{1:n}|y_{1:n}) ≥ w_i · μ_i(x_{1:n}|y_{1:n})`, up to a tiny slack.
    pub fn dominance_check(
        &self,
        i: usize,
        percepts: &[Percept],
        actions: &[Action],
    ) -> Result<bool> {
        let member = self.class.members.get(i).ok_or(Error::AlphabetMismatch {
            what: "member index",
            index: i,
            size: self.class.len(),
        })?;
        let lhs = self.joint_direct(percepts, actions)?;
        let rhs = self.class.weights[i] * member.joint(percepts, actions)?;
        Ok(lhs >= rhs - DOMINANCE_SLACK)
    }

    /// One Bayes update; alias of the environment step.
    pub fn posterior_update(
        &self,
        ctx: &MixCtx<M::Ctx>,
        y: Action,
        x: Percept,
    ) -> Result<MixCtx<M::Ctx>> {
        self.step_ctx(ctx, y, x)
    }
}

impl<M: Env<f64>> Env<f64> for Mixture<M> {
    type Ctx = MixCtx<M::Ctx>;

    fn spaces(&self) -> &Spaces {
        self.class.members[0].spaces()
    }

    fn init_ctx(&self) -> Self::Ctx {
        MixCtx {
            log_w: self.class.weights.iter().map(|w| w.ln()).collect(),
            members: self.class.members.iter().map(|m| m.init_ctx()).collect(),
        }
    }

    fn step_prob(&self, ctx: &Self::Ctx, y: Action, x: Percept) -> Result<f64> {
        let terms: Result<Vec<f64>> = self
            .class
            .members
            .iter()
            .zip(&ctx.log_w)
            .zip(&ctx.members)
            .filter(|((_, &lw), _)| lw > f64::NEG_INFINITY)
            .map(|((m, &lw), mctx)| Ok(lw.exp() * m.step_prob(mctx, y, x)?))
            .collect();
        Ok(Scalar::sum(terms?.into_iter()))
    }

    fn step_ctx(&self, ctx: &Self::Ctx, y: Action, x: Percept) -> Result<Self::Ctx> {
        let mut log_w = Vec::with_capacity(ctx.log_w.len());
        let mut members = Vec::with_capacity(ctx.members.len());
        for ((m, &lw), mctx) in self
            .class
            .members
            .iter()
            .zip(&ctx.log_w)
            .zip(&ctx.members)
        {
            if lw > f64::NEG_INFINITY {
                let p = m.step_prob(mctx, y, x)?;
                if p > 0.0 {
                    log_w.push(lw + p.ln());
                    members.push(m.step_ctx(mctx, y, x)?);
                    continue;
                }
            }
            log_w.push(f64::NEG_INFINITY);
            members.push(mctx.clone());
        }
        let norm = log_sum_exp(&log_w);
        if norm == f64::NEG_INFINITY {
            return Err(Error::ClassExhausted);
        }
        for lw in &mut log_w {
            *lw -= norm;
        }
        Ok(MixCtx { log_w, members })
    }

    fn is_action_free(&self) -> bool {
        self.class.members.iter().all(|m| m.is_action_free())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::validate_env;
    use crate::environments::{make_action_table, make_bernoulli};
    use crate::types::HistoryTape;
    use proptest::prelude::*;

    type BernMix = Mixture<crate::env::TableEnv<f64>>;

    fn two_bern(p0: f64, p1: f64) -> BernMix {
        let class = ModelClass::uniform(vec![
            make_bernoulli(p0).unwrap(),
            make_bernoulli(p1).unwrap(),
        ])
        .unwrap();
        Mixture::new(class)
    }

    fn plain(bits: &[usize]) -> (Vec<Percept>, Vec<Action>) {
        (
            bits.iter().map(|&b| Percept::plain(b)).collect(),
            bits.iter().map(|_| Action(0)).collect(),
        )
    }

    #[test]
    fn uniform_weights() {
        let m = two_bern(0.5, 0.9);
        assert_eq!(m.class().weights(), &[0.5, 0.5]);
        let four = ModelClass::uniform(
            [0.1, 0.3, 0.5, 0.7]
                .map(|p| make_bernoulli(p).unwrap())
                .to_vec(),
        )
        .unwrap();
        assert_eq!(four.weights(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn prefix_code_weight_values() {
        assert_eq!(prefix_code_weights(&[3, 5]).unwrap(), vec![0.8, 0.2]);
        assert!(matches!(prefix_code_weights(&[]), Err(Error::EmptyClass)));
        // same-space members with token counts 2 and 5: ratio 2^3
        let class = ModelClass::with_scheme(
            vec![
                make_bernoulli(0.5).unwrap(),
                make_action_table(vec![vec![0.5, 0.5], vec![0.1, 0.9]]).unwrap(),
            ],
            &WeightScheme::PrefixCode,
        )
        .unwrap();
        let w = class.weights();
        assert_eq!(w[0] / w[1], 8.0);
        assert!((w[0] + w[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn class_validation() {
        assert!(matches!(
            ModelClass::<crate::env::TableEnv<f64>>::uniform(vec![]),
            Err(Error::EmptyClass)
        ));
        let members = vec![make_bernoulli(0.5).unwrap(), make_bernoulli(0.9).unwrap()];
        assert!(ModelClass::new(members.clone(), vec![0.7, 0.2]).is_err());
        assert!(ModelClass::new(members.clone(), vec![1.0, 0.0]).is_err());
        assert!(ModelClass::new(members, vec![0.5]).is_err());
    }

    #[test]
    fn joint_examples() {
        let m = two_bern(0.5, 0.9);
        let (xs, ys) = plain(&[1]);
        assert!((m.joint_direct(&xs, &ys).unwrap() - 0.7).abs() < 1e-15);
        let (xs, ys) = plain(&[1, 1]);
        assert!((m.joint_direct(&xs, &ys).unwrap() - 0.53).abs() < 1e-15);
        assert_eq!(m.joint_direct(&[], &[]).unwrap(), 1.0);
    }

    #[test]
    fn conditional_examples() {
        let m = two_bern(0.5, 0.9);
        let ctx = m.init_ctx();
        let one = Percept::plain(1);
        assert!((m.step_prob(&ctx, Action(0), one).unwrap() - 0.7).abs() < 1e-15);
        let ctx = m.step_ctx(&ctx, Action(0), one).unwrap();
        let cond = m.step_prob(&ctx, Action(0), one).unwrap();
        assert!((cond - 0.53 / 0.7).abs() < 1e-12);
    }

    #[test]
    fn posterior_update_examples() {
        let m = two_bern(0.5, 0.9);
        let ctx = m.init_ctx();
        let ctx = m.posterior_update(&ctx, Action(0), Percept::plain(1)).unwrap();
        let w = m.posterior_weights(&ctx);
        assert!((w[0] - 0.25 / 0.7).abs() < 1e-12);
        assert!((w[1] - 0.45 / 0.7).abs() < 1e-12);

        // identical likelihoods leave the posterior untouched
        let m = two_bern(0.5, 0.5);
        let ctx = m.posterior_update(&m.init_ctx(), Action(0), Percept::plain(1)).unwrap();
        assert_eq!(m.posterior_weights(&ctx), vec![0.5, 0.5]);
    }

    #[test]
    fn zero_likelihood_member_dies_permanently() {
        let m = two_bern(0.0, 0.5);
        let ctx = m.posterior_update(&m.init_ctx(), Action(0), Percept::plain(1)).unwrap();
        let w = m.posterior_weights(&ctx);
        assert_eq!(w[0], 0.0);
        assert_eq!(w[1], 1.0);
        // still dead after another observation of 0, which it would have liked
        let ctx = m.posterior_update(&ctx, Action(0), Percept::plain(0)).unwrap();
        assert_eq!(m.posterior_weights(&ctx)[0], 0.0);
    }

    #[test]
    fn class_exhaustion_is_an_error() {
        let class = ModelClass::uniform(vec![make_bernoulli(0.0).unwrap()]).unwrap();
        let m = Mixture::new(class);
        let err = m
            .posterior_update(&m.init_ctx(), Action(0), Percept::plain(1))
            .unwrap_err();
        assert!(matches!(err, Error::ClassExhausted));
    }

    #[test]
    fn single_member_mixture_reproduces_the_member_bitwise() {
        let inner = make_bernoulli(0.7).unwrap();
        let m = Mixture::new(ModelClass::new(vec![inner.clone()], vec![1.0]).unwrap());
        let mut ctx = m.init_ctx();
        let mut ictx = inner.init_ctx();
        for &b in &[1usize, 0, 1, 1, 0, 1] {
            let x = Percept::plain(b);
            assert_eq!(
                m.step_prob(&ctx, Action(0), x).unwrap(),
                inner.step_prob(&ictx, Action(0), x).unwrap()
            );
            ctx = m.step_ctx(&ctx, Action(0), x).unwrap();
            ictx = inner.step_ctx(&ictx, Action(0), x).unwrap();
            assert_eq!(m.posterior_weights(&ctx), vec![1.0]);
        }
    }

    #[test]
    fn mixture_satisfies_the_environment_contract() {
        let m = two_bern(0.3, 0.8);
        validate_env(&m, 3).unwrap();
        assert!(m.is_action_free());
    }

    #[test]
    fn incremental_matches_batch_posterior_exhaustively() {
        let m = two_bern(0.4, 0.9);
        for n in 1..=5usize {
            for code in 0..(1usize << n) {
                let bits: Vec<usize> = (0..n).map(|i| (code >> i) & 1).collect();
                let (xs, ys) = plain(&bits);
                let mut ctx = m.init_ctx();
                for (&x, &y) in xs.iter().zip(&ys) {
                    ctx = m.step_ctx(&ctx, y, x).unwrap();
                }
                let inc = m.posterior_weights(&ctx);
                // batch oracle straight from the definition
                let mut batch: Vec<f64> = m
                    .class()
                    .members()
                    .iter()
                    .zip(m.class().weights())
                    .map(|(mem, &w)| w * mem.joint(&xs, &ys).unwrap())
                    .collect();
                let total: f64 = batch.iter().sum();
                for b in &mut batch {
                    *b /= total;
                }
                for (a, b) in inc.iter().zip(&batch) {
                    assert!((a - b).abs() < 1e-10, "n={n} code={code}");
                }
            }
        }
    }

    proptest! {
        /// Dominance over every member on random classes and sequences.
        #[test]
        fn dominance_holds(
            ps in proptest::collection::vec(0.01f64..0.99, 1..5),
            bits in proptest::collection::vec(0usize..2, 0..6),
        ) {
            let mut members = Vec::new();
            let mut seen = Vec::new();
            for p in ps {
                if !seen.contains(&p) {
                    seen.push(p);
                    members.push(make_bernoulli(p).unwrap());
                }
            }
            let m = Mixture::new(ModelClass::uniform(members).unwrap());
            let (xs, ys) = plain(&bits);
            for i in 0..m.class().len() {
                prop_assert!(m.dominance_check(i, &xs, &ys).unwrap());
            }
        }

        /// Conditionals normalize after arbitrary update sequences, and the
        /// chain of conditionals agrees with the direct weighted joint.
        #[test]
        fn conditional_normalization_and_chain(bits in proptest::collection::vec(0usize..2, 1..8)) {
            let m = two_bern(0.2, 0.7);
            let mut ctx = m.init_ctx();
            let mut chain = 1.0f64;
            for &b in &bits {
                let total: f64 = m.spaces().percepts().iter()
                    .map(|&x| m.step_prob(&ctx, Action(0), x).unwrap())
                    .sum();
                prop_assert!((total - 1.0).abs() < 1e-10);
                let x = Percept::plain(b);
                chain *= m.step_prob(&ctx, Action(0), x).unwrap();
                ctx = m.step_ctx(&ctx, Action(0), x).unwrap();
            }
            let (xs, ys) = plain(&bits);
            let direct = m.joint_direct(&xs, &ys).unwrap();
            prop_assert!((chain - direct).abs() < 1e-12);
            let w = m.posterior_weights(&ctx);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn unreachable_conditioning_history_errors() {
        let class = ModelClass::uniform(vec![make_bernoulli(0.0).unwrap()]).unwrap();
        let m = Mixture::new(class);
        let mut tape = HistoryTape::new(m.spaces().clone());
        tape.push_cycle(Action(0), Percept::plain(1)).unwrap();
        tape.begin_cycle(Action(0)).unwrap();
        let views = tape.views(2).unwrap();
        assert!(matches!(
            m.conditional(&views, Percept::plain(0)),
            Err(Error::UnreachableHistory { .. })
        ));
    }
}
