//! Shared alphabets, symbols, and the interaction history.
//!
//! One interaction cycle is: the agent emits an action, then the environment
//! emits a percept. A percept carries an observation index and, when the
//! percept space embeds losses, a loss-level index into a discrete grid.

use crate::error::{Error, Result};

/// A finite, index-based symbol alphabet with optional human-readable labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    size: usize,
    labels: Option<Vec<String>>,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::ModelInvalid("alphabet must have size >= 1".into()));
        }
        Ok(Self { size, labels: None })
    }

    pub fn with_labels(size: usize, labels: Vec<String>) -> Result<Self> {
        if labels.len() != size {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for alphabet of size {size}",
                labels.len()
            )));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(Error::ModelInvalid(format!("duplicate label {a:?}")));
            }
        }
        Ok(Self {
            size,
            labels: Some(labels),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.as_ref().and_then(|l| l.get(index)).map(|s| s.as_str())
    }

    pub fn contains(&self, index: usize) -> bool {
        index < self.size
    }
}

/// One agent output per cycle: an index into the action alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action(pub usize);

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One environment output per cycle: an observation index plus, in
/// loss-in-percept mode, a loss-level index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Percept {
    pub obs: usize,
    pub loss_level: Option<usize>,
}

impl Percept {
    pub fn plain(obs: usize) -> Self {
        Self {
            obs,
            loss_level: None,
        }
    }

    pub fn with_loss(obs: usize, level: usize) -> Self {
        Self {
            obs,
            loss_level: Some(level),
        }
    }
}

impl std::fmt::Display for Percept {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.loss_level {
            Some(l) => write!(f, "{}:{}", self.obs, l),
            None => write!(f, "{}", self.obs),
        }
    }
}

/// Discrete loss levels `{0, 1/(levels-1), ..., 1}`. Two levels cover 0-1 loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossGrid {
    levels: usize,
}

impl LossGrid {
    pub fn new(levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::ModelInvalid(
                "loss grid needs at least two levels".into(),
            ));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn value(&self, level: usize) -> Result<f64> {
        if level >= self.levels {
            return Err(Error::AlphabetMismatch {
                what: "loss level",
                index: level,
                size: self.levels,
            });
        }
        Ok(level as f64 / (self.levels - 1) as f64)
    }

    /// Maps a loss value back to its grid level; errors unless the value is
    /// exactly representable.
    pub fn level_of(&self, value: f64) -> Result<usize> {
        let scaled = value * (self.levels - 1) as f64;
        let level = scaled.round() as usize;
        if level < self.levels && self.value(level)? == value {
            Ok(level)
        } else {
            Err(Error::Discretization {
                value,
                levels: self.levels,
            })
        }
    }
}

/// The symbol spaces of one interaction protocol: action alphabet,
/// observation alphabet, and the optional embedded-loss grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spaces {
    pub actions: Alphabet,
    pub observations: Alphabet,
    pub loss_grid: Option<LossGrid>,
}

impl Spaces {
    pub fn plain(n_obs: usize, n_actions: usize) -> Result<Self> {
        Ok(Self {
            actions: Alphabet::new(n_actions)?,
            observations: Alphabet::new(n_obs)?,
            loss_grid: None,
        })
    }

    pub fn with_loss_grid(n_obs: usize, n_actions: usize, levels: usize) -> Result<Self> {
        Ok(Self {
            actions: Alphabet::new(n_actions)?,
            observations: Alphabet::new(n_obs)?,
            loss_grid: Some(LossGrid::new(levels)?),
        })
    }

    /// Number of distinct percepts.
    pub fn percept_count(&self) -> usize {
        self.observations.size() * self.loss_grid.map_or(1, |g| g.levels())
    }

    /// Percepts in canonical order: observation-major, loss level minor.
    pub fn percepts(&self) -> Vec<Percept> {
        let mut out = Vec::with_capacity(self.percept_count());
        for obs in 0..self.observations.size() {
            match self.loss_grid {
                None => out.push(Percept::plain(obs)),
                Some(g) => {
                    for l in 0..g.levels() {
                        out.push(Percept::with_loss(obs, l));
                    }
                }
            }
        }
        out
    }

    /// Index of a percept in the canonical enumeration.
    pub fn flat_index(&self, x: Percept) -> Result<usize> {
        self.check_percept(x)?;
        Ok(match self.loss_grid {
            None => x.obs,
            Some(g) => x.obs * g.levels() + x.loss_level.unwrap(),
        })
    }

    pub fn check_action(&self, y: Action) -> Result<()> {
        if self.actions.contains(y.0) {
            Ok(())
        } else {
            Err(Error::AlphabetMismatch {
                what: "action",
                index: y.0,
                size: self.actions.size(),
            })
        }
    }

    pub fn check_percept(&self, x: Percept) -> Result<()> {
        if !self.observations.contains(x.obs) {
            return Err(Error::AlphabetMismatch {
                what: "observation",
                index: x.obs,
                size: self.observations.size(),
            });
        }
        match (self.loss_grid, x.loss_level) {
            (None, None) => Ok(()),
            (Some(g), Some(l)) if l < g.levels() => Ok(()),
            (Some(g), Some(l)) => Err(Error::AlphabetMismatch {
                what: "loss level",
                index: l,
                size: g.levels(),
            }),
            (None, Some(_)) => Err(Error::ShapeMismatch(
                "percept carries a loss level but the space has no loss grid".into(),
            )),
            (Some(_), None) => Err(Error::ShapeMismatch(
                "percept lacks a loss level required by the space".into(),
            )),
        }
    }
}

/// The alternating interaction record `y_1 x_1 ... y_t x_t`, append-only.
///
/// A tape may additionally end in a *pending* action: the current cycle's
/// action has been emitted but its percept has not arrived yet. That is the
/// state in which percepts are sampled and conditionals for the next percept
/// are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryTape {
    spaces: Spaces,
    cycles: Vec<(Action, Percept)>,
    pending: Option<Action>,
}

/// Borrowed conditioning context for cycle `t`: the percepts `x_{<t}` and the
/// actions `y_{1:t}` (the current action included).
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryViews {
    pub past_percepts: Vec<Percept>,
    pub actions: Vec<Action>,
}

impl HistoryViews {
    pub fn new(past_percepts: Vec<Percept>, actions: Vec<Action>) -> Result<Self> {
        if actions.len() != past_percepts.len() + 1 {
            return Err(Error::ShapeMismatch(format!(
                "views need t actions and t-1 percepts, got {} and {}",
                actions.len(),
                past_percepts.len()
            )));
        }
        Ok(Self {
            past_percepts,
            actions,
        })
    }

    /// The cycle index these views condition: `t = |y_{1:t}|`.
    pub fn cycle(&self) -> usize {
        self.actions.len()
    }

    pub fn current_action(&self) -> Action {
        *self.actions.last().expect("views hold at least one action")
    }

    /// The completed cycles `(y_i, x_i)` for `i < t`.
    pub fn past_cycles(&self) -> impl Iterator<Item = (Action, Percept)> + '_ {
        self.actions
            .iter()
            .copied()
            .zip(self.past_percepts.iter().copied())
    }
}

impl HistoryTape {
    pub fn new(spaces: Spaces) -> Self {
        Self {
            spaces,
            cycles: Vec::new(),
            pending: None,
        }
    }

    pub fn spaces(&self) -> &Spaces {
        &self.spaces
    }

    /// Number of completed cycles.
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty() && self.pending.is_none()
    }

    pub fn cycles(&self) -> &[(Action, Percept)] {
        &self.cycles
    }

    pub fn pending_action(&self) -> Option<Action> {
        self.pending
    }

    /// Appends one completed cycle, returning the extended tape.
    pub fn append_cycle(&self, y: Action, x: Percept) -> Result<Self> {
        let mut next = self.clone();
        next.push_cycle(y, x)?;
        Ok(next)
    }

    /// In-place variant of [`append_cycle`](Self::append_cycle).
    pub fn push_cycle(&mut self, y: Action, x: Percept) -> Result<()> {
        if self.pending.is_some() {
            return Err(Error::ShapeMismatch(
                "tape has a pending action; resolve it before appending a cycle".into(),
            ));
        }
        self.spaces.check_action(y)?;
        self.spaces.check_percept(x)?;
        self.cycles.push((y, x));
        Ok(())
    }

    /// Starts cycle `len+1` by committing its action.
    pub fn begin_cycle(&mut self, y: Action) -> Result<()> {
        if self.pending.is_some() {
            return Err(Error::ShapeMismatch("cycle already begun".into()));
        }
        self.spaces.check_action(y)?;
        self.pending = Some(y);
        Ok(())
    }

    /// Completes the pending cycle with its percept.
    pub fn resolve_cycle(&mut self, x: Percept) -> Result<()> {
        let y = self.pending.take().ok_or_else(|| {
            Error::ShapeMismatch("no pending action to resolve".into())
        })?;
        self.spaces.check_percept(x)?;
        self.cycles.push((y, x));
        Ok(())
    }

    /// The views `(x_{<t}, y_{1:t})` for cycle `t`.
    ///
    /// Valid for `1 <= t <= len`, or `t = len+1` when the tape ends in a
    /// pending action (so that `y_t` exists).
    pub fn views(&self, t: usize) -> Result<HistoryViews> {
        if t == 0 {
            return Err(Error::CycleOutOfRange {
                index: t,
                len: self.len(),
            });
        }
        let current = if t <= self.len() {
            self.cycles[t - 1].0
        } else if t == self.len() + 1 {
            self.pending.ok_or(Error::CycleOutOfRange {
                index: t,
                len: self.len(),
            })?
        } else {
            return Err(Error::CycleOutOfRange {
                index: t,
                len: self.len(),
            });
        };
        let mut actions: Vec<Action> = self.cycles[..t - 1].iter().map(|c| c.0).collect();
        actions.push(current);
        let past_percepts = self.cycles[..t - 1].iter().map(|c| c.1).collect();
        HistoryViews::new(past_percepts, actions)
    }

    /// Serializes the completed cycles as space-separated `y:x` pairs
    /// (`y:obs` or `y:obs:loss`), the form used in harness CSV logs.
    pub fn to_log_string(&self) -> String {
        self.cycles
            .iter()
            .map(|(y, x)| format!("{y}:{x}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Parses the `to_log_string` format against the given spaces.
    pub fn from_log_string(spaces: Spaces, s: &str) -> Result<Self> {
        let mut tape = HistoryTape::new(spaces);
        for pair in s.split_whitespace() {
            let parts: Vec<&str> = pair.split(':').collect();
            let parse = |p: &str| -> Result<usize> {
                p.parse()
                    .map_err(|_| Error::Config(format!("bad history token {pair:?}")))
            };
            let x = match parts.as_slice() {
                [_, obs] => Percept::plain(parse(obs)?),
                [_, obs, level] => Percept::with_loss(parse(obs)?, parse(level)?),
                _ => return Err(Error::Config(format!("bad history token {pair:?}"))),
            };
            tape.push_cycle(Action(parse(parts[0])?), x)?;
        }
        Ok(tape)
    }
}
