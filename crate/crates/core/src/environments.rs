//! Checked builders for the concrete toy environments, plus the grid
//! families used to assemble finite model classes.

use crate::env::{Law, TableEnv};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::Spaces;

fn check_unit<S: Scalar>(what: &str, v: &S) -> Result<()> {
    if *v < S::zero() || *v > S::one() {
        return Err(Error::ModelInvalid(format!(
            "{what} {} outside [0,1]",
            v.to_f64()
        )));
    }
    Ok(())
}

fn check_row<S: Scalar>(what: &str, row: &[S]) -> Result<()> {
    for v in row {
        check_unit(what, v)?;
    }
    let total = S::sum(row.iter().cloned()).to_f64();
    if (total - 1.0).abs() > crate::env::NORMALIZATION_TOL {
        return Err(Error::ModelInvalid(format!(
            "{what} row sums to {total}, not 1"
        )));
    }
    Ok(())
}

/// An i.i.d. binary source emitting percept 1 with probability `p`,
/// indifferent to actions. Binary action alphabet, plain percepts.
pub fn make_bernoulli<S: Scalar>(p: S) -> Result<TableEnv<S>> {
    check_unit("bernoulli parameter", &p)?;
    Ok(TableEnv::from_parts(
        Spaces::plain(2, 2)?,
        Law::Bernoulli { p },
    ))
}

/// A stationary multi-armed machine with the loss bit embedded in the
/// percept: pulling arm `y` yields percept `(1,1)` with probability
/// `loss1[y]` and `(0,0)` otherwise.
pub fn make_bandit<S: Scalar>(loss1: Vec<S>) -> Result<TableEnv<S>> {
    if loss1.is_empty() {
        return Err(Error::ShapeMismatch("bandit needs at least one arm".into()));
    }
    for q in &loss1 {
        check_unit("arm loss probability", q)?;
    }
    Ok(TableEnv::from_parts(
        Spaces::with_loss_grid(2, loss1.len(), 2)?,
        Law::BanditArms { loss1 },
    ))
}

/// A memoryless action-conditioned law `rows[y][obs]` over plain percepts.
pub fn make_action_table<S: Scalar>(rows: Vec<Vec<S>>) -> Result<TableEnv<S>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::ShapeMismatch("action table must be non-empty".into()));
    }
    let n_obs = rows[0].len();
    for row in &rows {
        if row.len() != n_obs {
            return Err(Error::ShapeMismatch("ragged action table".into()));
        }
        check_row("action table", row)?;
    }
    Ok(TableEnv::from_parts(
        Spaces::plain(n_obs, rows.len())?,
        Law::ActionTable { rows },
    ))
}

/// A Markov law: the next percept depends only on the previous percept and
/// the current action. `rows[prev][y][next]`; the first percept is drawn
/// from `initial`.
pub fn make_markov<S: Scalar>(
    rows: Vec<Vec<Vec<S>>>,
    initial: Vec<S>,
) -> Result<TableEnv<S>> {
    let states = rows.len();
    if states == 0 {
        return Err(Error::ShapeMismatch("markov table must be non-empty".into()));
    }
    if initial.len() != states {
        return Err(Error::ShapeMismatch(format!(
            "initial distribution has {} entries for {states} states",
            initial.len()
        )));
    }
    let actions = rows[0].len();
    if actions == 0 {
        return Err(Error::ShapeMismatch("markov table needs actions".into()));
    }
    for per_state in &rows {
        if per_state.len() != actions {
            return Err(Error::ShapeMismatch("ragged markov table".into()));
        }
        for row in per_state {
            if row.len() != states {
                return Err(Error::ShapeMismatch("ragged markov table".into()));
            }
            check_row("transition", row)?;
        }
    }
    check_row("initial", &initial)?;
    Ok(TableEnv::from_parts(
        Spaces::plain(states, actions)?,
        Law::Markov { rows, initial },
    ))
}

/// One Bernoulli source per grid point. Grid values must be distinct.
pub fn bernoulli_grid<S: Scalar>(ps: &[S]) -> Result<Vec<TableEnv<S>>> {
    if ps.is_empty() {
        return Err(Error::EmptyClass);
    }
    for (i, p) in ps.iter().enumerate() {
        if ps[..i].contains(p) {
            return Err(Error::ModelInvalid(format!(
                "duplicate grid value {}",
                p.to_f64()
            )));
        }
    }
    ps.iter().map(|p| make_bernoulli(p.clone())).collect()
}

/// One embedded-loss machine per arm-probability vector. Vectors must share
/// a length and be distinct.
pub fn bandit_family<S: Scalar>(arm_sets: &[Vec<S>]) -> Result<Vec<TableEnv<S>>> {
    if arm_sets.is_empty() {
        return Err(Error::EmptyClass);
    }
    let arms = arm_sets[0].len();
    for (i, set) in arm_sets.iter().enumerate() {
        if set.len() != arms {
            return Err(Error::ShapeMismatch(
                "family members must share the arm count".into(),
            ));
        }
        if arm_sets[..i].contains(set) {
            return Err(Error::ModelInvalid("duplicate family member".into()));
        }
    }
    arm_sets.iter().map(|s| make_bandit(s.clone())).collect()
}

/// All distinct orderings of `values`, in lexicographic order. The two-arm
/// case yields exactly the vector and its reversal.
pub fn distinct_orderings<S: Scalar>(values: &[S]) -> Vec<Vec<S>> {
    fn permute<S: Clone>(prefix: &mut Vec<S>, rest: &mut Vec<S>, out: &mut Vec<Vec<S>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            prefix.push(v.clone());
            permute(prefix, rest, out);
            prefix.pop();
            rest.insert(i, v);
        }
    }
    let mut out = Vec::new();
    permute(&mut Vec::new(), &mut values.to_vec(), &mut out);
    out.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.to_f64().partial_cmp(&y.to_f64()).unwrap())
            .find(|c| !c.is_eq())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out.dedup();
    out
}

/// Canonical flat token form of an environment; token count drives the
/// description-length weight scheme.
pub trait Describe {
    fn canonical_tokens(&self) -> Vec<String>;
}

impl<S: Scalar> Describe for TableEnv<S> {
    fn canonical_tokens(&self) -> Vec<String> {
        let num = |v: &S| format!("{}", v.to_f64());
        match self.law() {
            Law::Bernoulli { p } => vec!["bernoulli".into(), num(p)],
            Law::BanditArms { loss1 } => {
                let mut t = vec!["bandit".to_string()];
                t.extend(loss1.iter().map(num));
                t
            }
            Law::ActionTable { rows } => {
                let mut t = vec!["table".to_string()];
                t.extend(rows.iter().flatten().map(num));
                t
            }
            Law::Markov { rows, initial } => {
                let mut t = vec!["markov".to_string()];
                t.extend(rows.iter().flatten().flatten().map(num));
                t.extend(initial.iter().map(num));
                t
            }
        }
    }
}
