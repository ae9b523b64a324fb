//! Action diversity over random states and the side-swapped round-robin
//! tournament, with JSON and CSV reports.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arena::{ActionId, Arena, Observation};
use crate::dqn::Agent;
use crate::error::{Error, Result};
use crate::rollout::{play_round, Controller};
use crate::seed;

/// An agent entered into an evaluation under a display id.
#[derive(Clone, Copy)]
pub struct Entrant<'a> {
    pub id: &'a str,
    pub agent: &'a dyn Agent,
}

/// Player-0 observations at player-0 decision points of random-vs-random
/// rounds. Round `r` uses seed path `round/{r}`.
pub fn collect_random_states(arena: &Arena, n: usize, seed: u64) -> Result<Vec<Observation>> {
    if n == 0 {
        return Err(Error::Config("need at least one random state".into()));
    }
    let mut states = Vec::with_capacity(n);
    let mut round = 0usize;
    while states.len() < n {
        let mut rng = seed::rng(seed::derive_path(seed, &["round", &round.to_string()]));
        let log = play_round(arena, [Controller::Random, Controller::Random], &mut rng, [true, false])?;
        states.extend(log.decisions[0].iter().map(|d| d.obs).take(n - states.len()));
        round += 1;
    }
    Ok(states)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub agents: Vec<String>,
    pub states: usize,
    /// `matrix[i][j]`: percentage of states where agents i and j pick different actions.
    pub matrix: Vec<Vec<f64>>,
    /// Percentage of states where the agent's action differs from every other agent's.
    pub all_column: Vec<f64>,
}

pub fn diversity_matrix(entrants: &[Entrant<'_>], states: &[Observation]) -> Result<DiversityReport> {
    if entrants.len() < 2 {
        return Err(Error::Config("diversity needs at least two agents".into()));
    }
    if states.is_empty() {
        return Err(Error::Config("diversity needs at least one state".into()));
    }
    let actions: Vec<Vec<ActionId>> =
        entrants.par_iter().map(|e| states.iter().map(|s| e.agent.act(s)).collect()).collect();
    Ok(diversity_from_actions(entrants.iter().map(|e| e.id.to_string()).collect(), &actions))
}

/// Builds the report from each agent's action on each state.
pub fn diversity_from_actions(agents: Vec<String>, actions: &[Vec<ActionId>]) -> DiversityReport {
    let n = actions.len();
    let states = actions[0].len();
    let pct = |count: usize| 100.0 * count as f64 / states as f64;
    let matrix = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| pct((0..states).filter(|&s| actions[i][s] != actions[j][s]).count()))
                .collect()
        })
        .collect();
    let all_column = (0..n)
        .map(|i| pct((0..states).filter(|&s| (0..n).all(|j| j == i || actions[i][s] != actions[j][s])).count()))
        .collect();
    DiversityReport { agents, states, matrix, all_column }
}

impl DiversityReport {
    /// Mean of the off-diagonal entries.
    pub fn mean_pairwise(&self) -> f64 {
        let n = self.agents.len();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    total += self.matrix[i][j];
                }
            }
        }
        total / (n * (n - 1)) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("agent");
        for id in &self.agents {
            out.push(',');
            out.push_str(id);
        }
        out.push_str(",all\n");
        for (i, id) in self.agents.iter().enumerate() {
            out.push_str(id);
            for v in &self.matrix[i] {
                let _ = write!(out, ",{v:.1}");
            }
            let _ = writeln!(out, ",{:.1}", self.all_column[i]);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Record {
    pub wins: u32,
    pub losses: u32,
    pub ties: u32,
}

impl Record {
    fn add(&mut self, other: Record) {
        self.wins += other.wins;
        self.losses += other.losses;
        self.ties += other.ties;
    }

    pub fn flipped(self) -> Record {
        Record { wins: self.losses, losses: self.wins, ties: self.ties }
    }
}

impl std::fmt::Display for Record {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} - {} - {}", self.wins, self.losses, self.ties)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentReport {
    pub agents: Vec<String>,
    pub matches_per_pair: u32,
    pub rounds_per_match: u32,
    /// `records[i][j]`: matches of agent i against agent j, from i's side.
    pub records: Vec<Vec<Record>>,
    pub overall: Vec<Record>,
}

impl TournamentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("agent");
        for id in &self.agents {
            out.push(',');
            out.push_str(id);
        }
        out.push_str(",overall\n");
        for (i, id) in self.agents.iter().enumerate() {
            out.push_str(id);
            for (j, r) in self.records[i].iter().enumerate() {
                if i == j {
                    out.push_str(",-");
                } else {
                    let _ = write!(out, ",{r}");
                }
            }
            let _ = writeln!(out, ",{}", self.overall[i]);
        }
        out
    }
}

/// Rounds won by each side of one match, and the drawn rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub round_wins: [u32; 2],
    pub round_ties: u32,
}

impl MatchResult {
    /// +1 if side 0 won the match, -1 if side 1 did, 0 on equal round wins.
    pub fn winner_sign(&self) -> i32 {
        (self.round_wins[0].cmp(&self.round_wins[1])) as i32
    }
}

/// Plays `rounds` greedy rounds with `sides[0]` as player 0.
pub fn play_match(arena: &Arena, sides: [&dyn Agent; 2], rounds: u32, seed: u64) -> Result<MatchResult> {
    let mut result = MatchResult { round_wins: [0, 0], round_ties: 0 };
    for r in 0..rounds {
        let mut rng = seed::rng(seed::derive_path(seed, &["round", &r.to_string()]));
        let log = play_round(arena, [Controller::Agent(sides[0]), Controller::Agent(sides[1])], &mut rng, [false, false])?;
        match log.outcome.winner() {
            Some(w) => result.round_wins[w] += 1,
            None => result.round_ties += 1,
        }
    }
    Ok(result)
}

/// Every unordered pair plays `matches_per_pair` matches, the first half with
/// the lower-indexed agent as player 0 and the second half swapped.
pub fn tournament(
    arena: &Arena,
    entrants: &[Entrant<'_>],
    matches_per_pair: u32,
    rounds_per_match: u32,
    seed: u64,
) -> Result<TournamentReport> {
    if entrants.len() < 2 {
        return Err(Error::Config("a tournament needs at least two agents".into()));
    }
    if matches_per_pair == 0 || matches_per_pair % 2 != 0 {
        return Err(Error::Config(format!(
            "matches_per_pair must be a positive even number so sides split evenly, got {matches_per_pair}"
        )));
    }
    if rounds_per_match == 0 {
        return Err(Error::Config("rounds_per_match must be positive".into()));
    }
    let n = entrants.len();
    let jobs: Vec<(usize, usize, u32)> = (0..n)
        .flat_map(|i| ((i + 1)..n).flat_map(move |j| (0..matches_per_pair).map(move |m| (i, j, m))))
        .collect();
    let results: Vec<(usize, usize, i32)> = jobs
        .par_iter()
        .map(|&(i, j, m)| {
            let swapped = m >= matches_per_pair / 2;
            let sides = if swapped { [entrants[j].agent, entrants[i].agent] } else { [entrants[i].agent, entrants[j].agent] };
            let match_seed = seed::derive_path(seed, &["pair", &format!("{i}-{j}"), "match", &m.to_string()]);
            let result = play_match(arena, sides, rounds_per_match, match_seed)?;
            let sign = if swapped { -result.winner_sign() } else { result.winner_sign() };
            Ok((i, j, sign))
        })
        .collect::<Result<_>>()?;

    let mut records = vec![vec![Record::default(); n]; n];
    for (i, j, sign) in results {
        let r = match sign {
            1 => Record { wins: 1, ..Record::default() },
            -1 => Record { losses: 1, ..Record::default() },
            _ => Record { ties: 1, ..Record::default() },
        };
        records[i][j].add(r);
        records[j][i].add(r.flipped());
    }
    let overall = records
        .iter()
        .map(|row| {
            let mut total = Record::default();
            row.iter().for_each(|r| total.add(*r));
            total
        })
        .collect();
    Ok(TournamentReport {
        agents: entrants.iter().map(|e| e.id.to_string()).collect(),
        matches_per_pair,
        rounds_per_match,
        records,
        overall,
    })
}
