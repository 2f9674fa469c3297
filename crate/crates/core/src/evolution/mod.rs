//! Interactive GA over expression trees.
//!
//! The human (or a scripted oracle) picks display slots; individuals are
//! scored by least-squares similarity to the nearest pick, then bred with
//! tournament selection, subtree crossover and subtree mutation. Picks
//! survive verbatim into the next generation.

mod fitness;

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::expr::{self, Expr, InvariantViolation};

pub use fitness::{
    distance, fitness_from_distance, sampled_distance, LatticeError, SampleLattice, LATTICE_AXIS,
    LATTICE_TIMES, SQUARED_ERROR_CAP,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvolutionError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid selection: {0}")]
    InvalidSelection(String),
    #[error("generations must be at least 1")]
    ZeroGenerations,
    #[error("cannot inject expression: {0}")]
    Inject(#[from] InvariantViolation),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionParams {
    pub population_size: usize,
    pub subset_size: usize,
    pub crossover_prob: f64,
    /// Applied independently to each offspring.
    pub mutation_prob: f64,
    pub tournament_size: usize,
    pub seed: u64,
    pub lattice: SampleLattice,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        EvolutionParams {
            population_size: 200,
            subset_size: 9,
            crossover_prob: 0.9,
            mutation_prob: 0.2,
            tournament_size: 3,
            seed: 0,
            lattice: SampleLattice::default(),
        }
    }
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let fail = |msg: String| Err(EvolutionError::InvalidParams(msg));
        if self.subset_size < 1 {
            return fail("subset_size must be at least 1".into());
        }
        if self.population_size < self.subset_size {
            return fail(format!(
                "population_size ({}) must be at least subset_size ({})",
                self.population_size, self.subset_size
            ));
        }
        for (name, p) in [("crossover_prob", self.crossover_prob), ("mutation_prob", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.tournament_size < 1 {
            return fail("tournament_size must be at least 1".into());
        }
        if self.lattice.is_empty() {
            return fail("sample lattice is empty".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub expr: Expr,
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn unscored(expr: Expr) -> Self {
        Individual { expr, fitness: None }
    }
}

/// One user's evolution run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub params: EvolutionParams,
    pub population: Vec<Individual>,
    pub generation: u64,
    /// Population indices currently shown, one per display slot.
    pub display: Vec<usize>,
    /// Expressions picked at the last fitness assignment.
    pub references: Vec<Expr>,
    /// Index forced into the next display refresh.
    pinned: Option<usize>,
    rng: ChaCha8Rng,
}

/// 128 random bits, hex-encoded.
pub fn random_token() -> String {
    format!("{:032x}", rand::random::<u128>())
}

impl Session {
    /// Fresh ramped half-and-half population at generation 0 with a random display.
    pub fn init(params: EvolutionParams) -> Result<Session, EvolutionError> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let population = expr::ramped_half_and_half(params.population_size, &mut rng)
            .into_iter()
            .map(Individual::unscored)
            .collect();
        let mut session = Session {
            id: random_token(),
            params,
            population,
            generation: 0,
            display: Vec::new(),
            references: Vec::new(),
            pinned: None,
            rng,
        };
        session.select_subset();
        Ok(session)
    }

    /// Expression shown at display slot `slot`.
    pub fn displayed(&self, slot: usize) -> Option<&Expr> {
        self.display.get(slot).map(|&i| &self.population[i].expr)
    }

    pub fn displayed_exprs(&self) -> impl Iterator<Item = &Expr> + '_ {
        self.display.iter().map(move |&i| &self.population[i].expr)
    }

    /// Scores the population against the expressions at `selections`.
    ///
    /// With no selections every individual gets fitness 1.0, so the next
    /// breeding step is pure drift.
    pub fn assign_fitness(&mut self, selections: &[usize]) -> Result<(), EvolutionError> {
        let mut seen = HashSet::new();
        for &slot in selections {
            if slot >= self.display.len() {
                return Err(EvolutionError::InvalidSelection(format!(
                    "slot {slot} is outside 0..{}",
                    self.display.len()
                )));
            }
            if !seen.insert(slot) {
                return Err(EvolutionError::InvalidSelection(format!("slot {slot} selected twice")));
            }
        }
        self.references = selections
            .iter()
            .map(|&slot| self.population[self.display[slot]].expr.clone())
            .collect();
        if self.references.is_empty() {
            for ind in &mut self.population {
                ind.fitness = Some(1.0);
            }
        } else {
            self.score_against_references();
        }
        Ok(())
    }

    fn score_against_references(&mut self) {
        let scorer = ReferenceScorer::new(&self.references, &self.params.lattice);
        for ind in &mut self.population {
            ind.fitness = Some(scorer.fitness(&ind.expr));
        }
    }

    /// Breeds one generation: references copied in first, the rest filled by
    /// tournament selection, crossover and mutation.
    pub fn next_generation(&mut self) {
        let n = self.params.population_size;
        let mut next: Vec<Expr> = Vec::with_capacity(n);
        next.extend(self.references.iter().take(n).cloned());

        while next.len() < n {
            let a = self.tournament();
            let b = self.tournament();
            let (pa, pb) = (&self.population[a].expr, &self.population[b].expr);
            let (mut c1, mut c2) = if self.rng.gen_bool(self.params.crossover_prob) {
                expr::crossover(pa, pb, &mut self.rng)
            } else {
                (pa.clone(), pb.clone())
            };
            if self.rng.gen_bool(self.params.mutation_prob) {
                c1 = expr::mutate(&c1, &mut self.rng);
            }
            if self.rng.gen_bool(self.params.mutation_prob) {
                c2 = expr::mutate(&c2, &mut self.rng);
            }
            next.push(c1);
            if next.len() < n {
                next.push(c2);
            }
        }

        self.population = next.into_iter().map(Individual::unscored).collect();
        self.generation += 1;
        self.pinned = None;
        if !self.references.is_empty() {
            self.score_against_references();
        }
    }

    /// Tournament with replacement; highest fitness wins, ties go to the
    /// lower index. Unscored individuals rank below any scored one.
    fn tournament(&mut self) -> usize {
        let n = self.population.len();
        let mut best = self.rng.gen_range(0..n);
        for _ in 1..self.params.tournament_size {
            let challenger = self.rng.gen_range(0..n);
            let (fc, fb) = (rank_key(&self.population[challenger]), rank_key(&self.population[best]));
            if fc > fb || (fc == fb && challenger < best) {
                best = challenger;
            }
        }
        best
    }

    /// Refreshes the display and returns it.
    ///
    /// Scored populations show the fittest individuals, skipping duplicate
    /// serializations while distinct ones remain. Unscored populations show
    /// a uniform random sample. A pinned index always takes slot 0.
    pub fn select_subset(&mut self) -> &[usize] {
        let k = self.params.subset_size;
        let n = self.population.len();
        let mut chosen: Vec<usize> = Vec::with_capacity(k);
        if let Some(p) = self.pinned.take() {
            chosen.push(p);
        }

        if self.population.iter().all(|ind| ind.fitness.is_none()) {
            let mut rest: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            let need = k - chosen.len();
            let (picked, _) = rest.partial_shuffle(&mut self.rng, need);
            chosen.extend_from_slice(picked);
        } else {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                rank_key(&self.population[b])
                    .total_cmp(&rank_key(&self.population[a]))
                    .then(a.cmp(&b))
            });
            let mut seen: HashSet<String> =
                chosen.iter().map(|&i| expr::serialize(&self.population[i].expr)).collect();
            for &i in &order {
                if chosen.len() == k {
                    break;
                }
                if chosen.contains(&i) {
                    continue;
                }
                if seen.insert(expr::serialize(&self.population[i].expr)) {
                    chosen.push(i);
                }
            }
            for &i in &order {
                if chosen.len() == k {
                    break;
                }
                if !chosen.contains(&i) {
                    chosen.push(i);
                }
            }
        }

        self.display = chosen;
        &self.display
    }

    /// One user interaction: score once against `selections`, breed
    /// `generations` times against those same references, refresh the display.
    pub fn step(&mut self, selections: &[usize], generations: u32) -> Result<&[usize], EvolutionError> {
        if generations < 1 {
            return Err(EvolutionError::ZeroGenerations);
        }
        self.assign_fitness(selections)?;
        for _ in 0..generations {
            self.next_generation();
        }
        Ok(self.select_subset())
    }

    /// Replaces a random non-displayed individual with `e` and refreshes the
    /// display with `e` pinned to slot 0. Returns the population index used.
    pub fn inject(&mut self, e: Expr) -> Result<usize, EvolutionError> {
        e.validate()?;
        let candidates: Vec<usize> =
            (0..self.population.len()).filter(|i| !self.display.contains(i)).collect();
        let index = match candidates.choose(&mut self.rng) {
            Some(&i) => i,
            // Population equals the display: any slot will do.
            None => self.rng.gen_range(0..self.population.len()),
        };
        let fitness = if !self.references.is_empty() {
            Some(ReferenceScorer::new(&self.references, &self.params.lattice).fitness(&e))
        } else if self.population.iter().any(|ind| ind.fitness.is_some()) {
            Some(1.0)
        } else {
            None
        };
        self.population[index] = Individual { expr: e, fitness };
        self.pinned = Some(index);
        self.select_subset();
        Ok(index)
    }
}

fn rank_key(ind: &Individual) -> f64 {
    ind.fitness.unwrap_or(f64::NEG_INFINITY)
}

/// Pre-sampled references for repeated nearest-reference scoring.
struct ReferenceScorer<'a> {
    lattice: &'a SampleLattice,
    samples: Vec<Vec<f64>>,
}

impl<'a> ReferenceScorer<'a> {
    fn new(references: &[Expr], lattice: &'a SampleLattice) -> Self {
        let samples = references.iter().map(|r| lattice.sample(r)).collect();
        ReferenceScorer { lattice, samples }
    }

    fn fitness(&self, e: &Expr) -> f64 {
        let values = self.lattice.sample(e);
        let nearest = self
            .samples
            .iter()
            .map(|r| sampled_distance(&values, r))
            .fold(f64::INFINITY, f64::min);
        fitness_from_distance(nearest)
    }
}
