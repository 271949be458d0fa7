//! Unforgeability games: Setup, Learning, Challenge, Guess.
//!
//! Adversaries only ever see an [`Oracle`] handle during learning. The
//! handle forwards queries to the hidden qPUF and counts them against the
//! learning budget; it offers no way to reach the unitary itself.
//!
//! ```compile_fail
//! use qpuf_core::games::Oracle;
//! fn peek(o: &Oracle<'_>) {
//!     let _ = o.puf;
//! }
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, fidelity_pure, haar_state, span_projector, QuantumState, StateVector, UnitaryMatrix};
use crate::qpuf::{qeval, qgen, QPufGenParams, QPufInstance};
use crate::rng::{derive_seed, derived_rng, SimRng};
use crate::testers::{run_test, TestConfig, TestOutcome};

/// Slack allowed when checking μ-distinguishability of a chosen challenge.
pub const MU_CHECK_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GameMode {
    /// Existential: the adversary picks a challenge at least μ-distinguishable
    /// from every learned query.
    QEx { mu: f64 },
    /// Selective: the challenger draws a Haar-random challenge.
    QSel,
}

impl GameMode {
    pub fn label(&self) -> &'static str {
        match self {
            GameMode::QEx { .. } => "qex",
            GameMode::QSel => "qsel",
        }
    }
}

/// Default learning-budget cap `4n²`.
pub fn default_budget_cap(qubits: u32) -> usize {
    4 * (qubits as usize).pow(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub mode: GameMode,
    pub learning_budget: usize,
    pub test: TestConfig,
    pub gen: QPufGenParams,
    pub seed: u64,
}

impl GameConfig {
    /// Validates against the default cap `4n²`.
    pub fn new(
        mode: GameMode,
        learning_budget: usize,
        test: TestConfig,
        gen: QPufGenParams,
        seed: u64,
    ) -> Result<Self> {
        Self::with_cap(mode, learning_budget, test, gen, seed, default_budget_cap(gen.qubits()))
    }

    pub fn with_cap(
        mode: GameMode,
        learning_budget: usize,
        test: TestConfig,
        gen: QPufGenParams,
        seed: u64,
        cap: usize,
    ) -> Result<Self> {
        if learning_budget > cap {
            return Err(Error::InvalidParameter(format!(
                "learning budget {learning_budget} exceeds the cap {cap}"
            )));
        }
        if let GameMode::QEx { mu } = mode {
            if !(0.0..=1.0).contains(&mu) {
                return Err(Error::InvalidParameter(format!("mu {mu} outside [0, 1]")));
            }
        }
        Ok(Self {
            mode,
            learning_budget,
            test,
            gen,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.gen.dim()
    }

    /// Configuration for the `trial`-th independent game: fresh qPUF seed and
    /// fresh game randomness, both derived from `self.seed`.
    pub fn for_trial(&self, trial: u64) -> Self {
        let mut cfg = *self;
        cfg.gen.seed = derive_seed(self.seed, 2 * trial);
        cfg.seed = derive_seed(self.seed, 2 * trial + 1);
        cfg
    }
}

/// Query handle given to adversaries during the learning phase.
pub struct Oracle<'a> {
    puf: &'a QPufInstance,
    budget: usize,
    queries: Vec<StateVector>,
    responses: Vec<StateVector>,
    overdrawn: bool,
}

impl<'a> Oracle<'a> {
    fn new(puf: &'a QPufInstance, budget: usize) -> Self {
        Self {
            puf,
            budget,
            queries: Vec::new(),
            responses: Vec::new(),
            overdrawn: false,
        }
    }

    /// Sends one query; fails once the budget is spent.
    pub fn query(&mut self, psi: &StateVector) -> Result<StateVector> {
        if self.queries.len() >= self.budget {
            self.overdrawn = true;
            return Err(Error::BudgetExceeded { budget: self.budget });
        }
        let out = qeval(self.puf, psi)?;
        self.queries.push(psi.clone());
        self.responses.push(out.clone());
        Ok(out)
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.queries.len()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn dim(&self) -> usize {
        self.puf.dim()
    }

    pub fn qubits(&self) -> u32 {
        self.puf.qubits()
    }

    pub fn id(&self) -> &str {
        self.puf.id()
    }
}

/// A single physical copy of a selective challenge. The holder may
/// transform or measure it, or hand it back as a guess, but cannot read it.
pub struct ChallengeCopy {
    state: StateVector,
}

impl ChallengeCopy {
    fn new(state: StateVector) -> Self {
        Self { state }
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    pub fn apply_unitary(&mut self, u: &UnitaryMatrix) -> Result<()> {
        self.state = numerics::apply(u, &self.state)?;
        Ok(())
    }

    /// Computational-basis measurement; the copy collapses to the outcome.
    pub fn measure(&mut self, rng: &mut SimRng) -> usize {
        use rand::Rng;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let amps = self.state.amplitudes();
        let mut outcome = amps.len() - 1;
        for (i, a) in amps.iter().enumerate() {
            acc += a.norm_sqr();
            if u < acc {
                outcome = i;
                break;
            }
        }
        self.state = StateVector::basis(amps.len(), outcome).expect("outcome in range");
        outcome
    }

    pub fn submit(self) -> QuantumState {
        QuantumState::Pure(self.state)
    }
}

/// What the adversary receives in the challenge phase.
pub enum Challenge {
    /// Existential mode: the adversary's own chosen state.
    Chosen(StateVector),
    /// Selective mode: one opaque copy.
    Copy(ChallengeCopy),
    /// Selective mode, for adversaries granted the classical description.
    Described(StateVector),
}

pub trait Adversary {
    fn name(&self) -> &str;

    /// Learning phase.
    fn learn(&mut self, oracle: &mut Oracle<'_>, rng: &mut SimRng) -> Result<()>;

    /// Existential mode only: the challenge the adversary commits to.
    fn choose_challenge(&mut self, _mu: f64, _rng: &mut SimRng) -> Result<StateVector> {
        Err(Error::UnsupportedMode(format!(
            "{} does not choose existential challenges",
            self.name()
        )))
    }

    /// Selective mode: whether the adversary is granted the challenge's
    /// classical description instead of a single opaque copy.
    fn wants_challenge_description(&self) -> bool {
        false
    }

    /// Guess phase.
    fn respond(&mut self, challenge: Challenge, rng: &mut SimRng) -> Result<QuantumState>;
}

/// True iff `challenge` is at least μ-distinguishable from every learned
/// state: `F ≤ 1 − μ` up to [`MU_CHECK_SLACK`].
pub fn mu_check(challenge: &StateVector, learned: &[StateVector], mu: f64) -> Result<bool> {
    Ok(max_fidelity(challenge, learned)? <= 1.0 - mu + MU_CHECK_SLACK)
}

fn max_fidelity(challenge: &StateVector, learned: &[StateVector]) -> Result<f64> {
    learned
        .iter()
        .try_fold(0.0f64, |acc, q| Ok(acc.max(fidelity_pure(challenge, q)?)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub adversary: String,
    pub mode: GameMode,
    pub qubits: u32,
    pub budget: usize,
    pub queries: Vec<StateVector>,
    pub responses: Vec<StateVector>,
    pub challenge: StateVector,
    pub guess: QuantumState,
    pub fidelity_of_guess: f64,
    pub test_outcome: TestOutcome,
    pub outcome_b: u8,
}

/// One JSON-lines record of a finished game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub adversary: String,
    pub mode: String,
    pub mu: Option<f64>,
    pub n: u32,
    pub k: usize,
    pub queries_used: usize,
    pub d_spanned: usize,
    pub b: u8,
    pub fidelity_of_guess: f64,
    pub pass_count: usize,
    pub pairs_run: usize,
}

impl Transcript {
    pub fn won(&self) -> bool {
        self.outcome_b == 1
    }

    /// Rank of the span of the learning queries.
    pub fn d_spanned(&self) -> usize {
        if self.queries.is_empty() {
            0
        } else {
            span_projector(&self.queries).map(|p| p.rank()).unwrap_or(0)
        }
    }

    pub fn record(&self) -> TranscriptRecord {
        TranscriptRecord {
            adversary: self.adversary.clone(),
            mode: self.mode.label().to_string(),
            mu: match self.mode {
                GameMode::QEx { mu } => Some(mu),
                GameMode::QSel => None,
            },
            n: self.qubits,
            k: self.budget,
            queries_used: self.queries.len(),
            d_spanned: self.d_spanned(),
            b: self.outcome_b,
            fidelity_of_guess: self.fidelity_of_guess,
            pass_count: self.test_outcome.pass_count,
            pairs_run: self.test_outcome.pairs_run,
        }
    }

    pub fn to_json_line(&self) -> Result<String> {
        serde_json::to_string(&self.record()).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Plays one game against a fresh qPUF generated from `cfg.gen`.
pub fn run_game(cfg: &GameConfig, adversary: &mut dyn Adversary) -> Result<Transcript> {
    let puf = qgen(cfg.gen)?;
    let mut challenger_rng = derived_rng(cfg.seed, 1);
    let mut adversary_rng = derived_rng(cfg.seed, 2);
    let mut test_rng = derived_rng(cfg.seed, 3);

    let mut oracle = Oracle::new(&puf, cfg.learning_budget);
    let learned = adversary.learn(&mut oracle, &mut adversary_rng);
    if oracle.overdrawn {
        return Err(Error::BudgetExceeded {
            budget: cfg.learning_budget,
        });
    }
    learned?;
    let Oracle { queries, responses, .. } = oracle;

    let (challenge, guess) = match cfg.mode {
        GameMode::QEx { mu } => {
            let challenge = adversary.choose_challenge(mu, &mut adversary_rng)?;
            if challenge.dim() != puf.dim() {
                return Err(Error::DimensionMismatch {
                    expected: puf.dim(),
                    got: challenge.dim(),
                });
            }
            let worst = max_fidelity(&challenge, &queries)?;
            if worst > 1.0 - mu + MU_CHECK_SLACK {
                return Err(Error::MuViolation {
                    fidelity: worst,
                    limit: 1.0 - mu,
                });
            }
            let guess = adversary.respond(Challenge::Chosen(challenge.clone()), &mut adversary_rng)?;
            (challenge, guess)
        }
        GameMode::QSel => {
            let challenge = haar_state(puf.dim(), &mut challenger_rng)?;
            let handed = if adversary.wants_challenge_description() {
                Challenge::Described(challenge.clone())
            } else {
                Challenge::Copy(ChallengeCopy::new(challenge.clone()))
            };
            let guess = adversary.respond(handed, &mut adversary_rng)?;
            (challenge, guess)
        }
    };

    let target = qeval(&puf, &challenge)?;
    let test_outcome = run_test(&cfg.test, &target, &guess, &mut test_rng)?;
    let fidelity_of_guess = guess.fidelity_with_pure(&target)?;
    Ok(Transcript {
        adversary: adversary.name().to_string(),
        mode: cfg.mode,
        qubits: puf.qubits(),
        budget: cfg.learning_budget,
        queries,
        responses,
        challenge,
        guess,
        fidelity_of_guess,
        test_outcome,
        outcome_b: test_outcome.accepted as u8,
    })
}

/// Plays `trials` independent games in parallel. Trial `t` uses
/// [`GameConfig::for_trial`]`(t)` and a fresh adversary from `factory`, so
/// results match a sequential run exactly.
pub fn run_trials<F>(cfg: &GameConfig, factory: F, trials: usize) -> Result<Vec<Transcript>>
where
    F: Fn() -> Box<dyn Adversary> + Sync,
{
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut adversary = factory();
            run_game(&cfg.for_trial(t), adversary.as_mut())
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinRate {
    pub rate: f64,
    /// Binomial standard error `√(rate(1 − rate)/trials)`.
    pub stderr: f64,
    pub wins: usize,
    pub trials: usize,
}

impl WinRate {
    pub fn from_outcomes(outcomes: impl IntoIterator<Item = bool>) -> Result<Self> {
        let (mut wins, mut trials) = (0usize, 0usize);
        for won in outcomes {
            wins += won as usize;
            trials += 1;
        }
        if trials == 0 {
            return Err(Error::InvalidParameter("at least one trial is required".into()));
        }
        let rate = wins as f64 / trials as f64;
        Ok(Self {
            rate,
            stderr: (rate * (1.0 - rate) / trials as f64).sqrt(),
            wins,
            trials,
        })
    }
}

pub fn estimate_win_rate<F>(cfg: &GameConfig, factory: F, trials: usize) -> Result<WinRate>
where
    F: Fn() -> Box<dyn Adversary> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    let transcripts = run_trials(cfg, factory, trials)?;
    WinRate::from_outcomes(transcripts.iter().map(Transcript::won))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::C64;
    use crate::testers::TestKind;

    struct Greedy {
        queries: usize,
    }

    impl Adversary for Greedy {
        fn name(&self) -> &str {
            "greedy"
        }

        fn learn(&mut self, oracle: &mut Oracle<'_>, _rng: &mut SimRng) -> Result<()> {
            for i in 0..self.queries {
                oracle.query(&StateVector::basis(oracle.dim(), i % oracle.dim())?)?;
            }
            Ok(())
        }

        fn choose_challenge(&mut self, _mu: f64, _rng: &mut SimRng) -> Result<StateVector> {
            StateVector::basis(4, 0)
        }

        fn respond(&mut self, challenge: Challenge, _rng: &mut SimRng) -> Result<QuantumState> {
            match challenge {
                Challenge::Copy(copy) => Ok(copy.submit()),
                Challenge::Chosen(s) | Challenge::Described(s) => Ok(QuantumState::Pure(s)),
            }
        }
    }

    /// Swallows the budget error and carries on.
    struct Sneaky;

    impl Adversary for Sneaky {
        fn name(&self) -> &str {
            "sneaky"
        }

        fn learn(&mut self, oracle: &mut Oracle<'_>, _rng: &mut SimRng) -> Result<()> {
            for _ in 0..=oracle.budget() {
                let _ = oracle.query(&StateVector::basis(oracle.dim(), 0)?);
            }
            Ok(())
        }

        fn respond(&mut self, _c: Challenge, _rng: &mut SimRng) -> Result<QuantumState> {
            Ok(QuantumState::Pure(StateVector::basis(4, 0)?))
        }
    }

    fn config(mode: GameMode, budget: usize) -> GameConfig {
        GameConfig::new(
            mode,
            budget,
            TestConfig::ideal(0.5).unwrap(),
            QPufGenParams::new(2, 11).unwrap(),
            5,
        )
        .unwrap()
    }

    #[test]
    fn budget_cap_is_enforced_at_configuration() {
        let test = TestConfig::ideal(0.5).unwrap();
        let gen = QPufGenParams::new(2, 1).unwrap();
        assert!(GameConfig::new(GameMode::QSel, 16, test, gen, 0).is_ok());
        assert!(GameConfig::new(GameMode::QSel, 17, test, gen, 0).is_err());
        assert!(GameConfig::new(GameMode::QEx { mu: 1.5 }, 1, test, gen, 0).is_err());
    }

    #[test]
    fn overdrawing_the_budget_is_a_violation() {
        let cfg = config(GameMode::QSel, 3);
        assert!(run_game(&cfg, &mut Greedy { queries: 3 }).is_ok());
        assert_eq!(
            run_game(&cfg, &mut Greedy { queries: 4 }).unwrap_err(),
            Error::BudgetExceeded { budget: 3 }
        );
        assert_eq!(
            run_game(&cfg, &mut Sneaky).unwrap_err(),
            Error::BudgetExceeded { budget: 3 }
        );
    }

    #[test]
    fn mu_violation_is_a_distinct_error() {
        // challenge |0⟩ was itself queried
        let cfg = config(GameMode::QEx { mu: 0.5 }, 2);
        assert!(matches!(
            run_game(&cfg, &mut Greedy { queries: 1 }),
            Err(Error::MuViolation { .. })
        ));
        let cfg = config(GameMode::QEx { mu: 0.0 }, 2);
        assert!(run_game(&cfg, &mut Greedy { queries: 1 }).is_ok());
    }

    #[test]
    fn mu_check_cases() {
        let zero = StateVector::basis(2, 0).unwrap();
        let one = StateVector::basis(2, 1).unwrap();
        assert!(mu_check(&one, std::slice::from_ref(&zero), 1.0).unwrap());
        assert!(mu_check(&zero, std::slice::from_ref(&zero), 0.0).unwrap());
        assert!(!mu_check(&zero, std::slice::from_ref(&zero), 0.1).unwrap());
        for mu in [0.6f64, 0.75, 0.9] {
            let phi2 = StateVector::new(vec![C64::new(mu.sqrt(), 0.0), C64::new((1.0 - mu).sqrt(), 0.0)]).unwrap();
            assert!(mu_check(&one, &[zero.clone(), phi2], mu).unwrap());
        }
    }

    #[test]
    fn selective_game_without_queries_runs() {
        // the copy is the challenge itself, not its image, so this loses
        // unless U happens to fix it; the harness must still run cleanly
        let cfg = config(GameMode::QSel, 0);
        let t = run_game(&cfg, &mut Greedy { queries: 0 }).unwrap();
        assert_eq!(t.queries.len(), 0);
        assert!((0.0..=1.0).contains(&t.fidelity_of_guess));
    }

    #[test]
    fn trials_are_reproducible_and_order_stable() {
        let cfg = config(GameMode::QSel, 1);
        let factory = || Box::new(Greedy { queries: 1 }) as Box<dyn Adversary>;
        let a = run_trials(&cfg, factory, 16).unwrap();
        let b = run_trials(&cfg, factory, 16).unwrap();
        assert_eq!(a, b);
        for (t, tr) in a.iter().enumerate() {
            let seq = run_game(&cfg.for_trial(t as u64), &mut Greedy { queries: 1 }).unwrap();
            assert_eq!(&seq, tr);
        }
        let rate = estimate_win_rate(&cfg, factory, 16).unwrap();
        assert_eq!(rate.trials, 16);
        assert!((rate.stderr - (rate.rate * (1.0 - rate.rate) / 16.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn transcript_json_line() {
        let cfg = GameConfig::new(
            GameMode::QSel,
            2,
            TestConfig::new(TestKind::SwapAllPass, 3, 3).unwrap(),
            QPufGenParams::new(2, 3).unwrap(),
            9,
        )
        .unwrap();
        let t = run_game(&cfg, &mut Greedy { queries: 2 }).unwrap();
        let line = t.to_json_line().unwrap();
        let back: TranscriptRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back.mode, "qsel");
        assert_eq!(back.d_spanned, 2);
        assert_eq!(back.pairs_run, 3);
        assert!(!line.contains('\n'));
    }

    #[test]
    fn copy_measurement_collapses() {
        let mut rng = crate::rng::rng_from_seed(3);
        let mut copy = ChallengeCopy::new(StateVector::uniform(4).unwrap());
        let k = copy.measure(&mut rng);
        assert_eq!(copy.measure(&mut rng), k);
    }
}
