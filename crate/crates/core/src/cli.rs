//! Headless evolution driven by a scripted selector.
//!
//! [`OracleSelector`] stands in for the human: each generation it picks the
//! single displayed candidate closest to a fixed target expression.

use serde::{Deserialize, Serialize};

use crate::evolution::{distance, EvolutionError, EvolutionParams, SampleLattice, Session};
use crate::expr::{self, Expr};

#[derive(Clone, Debug)]
pub struct OracleSelector {
    target: Expr,
    lattice: SampleLattice,
}

impl OracleSelector {
    pub fn new(target: Expr, lattice: SampleLattice) -> Self {
        OracleSelector { target, lattice }
    }

    pub fn target(&self) -> &Expr {
        &self.target
    }

    pub fn distance_to_target(&self, e: &Expr) -> f64 {
        distance(e, &self.target, &self.lattice)
    }

    /// Slot of the displayed candidate nearest the target, with its distance.
    /// Ties go to the lower slot.
    pub fn pick(&self, session: &Session) -> Option<(usize, f64)> {
        session
            .displayed_exprs()
            .map(|e| self.distance_to_target(e))
            .enumerate()
            .fold(None, |best, (slot, d)| match best {
                Some((_, bd)) if bd <= d => best,
                _ => Some((slot, d)),
            })
    }
}

/// One line of the `evolve` report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub generation: u64,
    /// Distance from the target to the nearest displayed candidate.
    pub best_distance: f64,
    pub best_sexpr: String,
}

impl GenerationReport {
    fn from_display(session: &Session, oracle: &OracleSelector) -> (Self, usize) {
        let (slot, best_distance) = oracle.pick(session).expect("display is never empty");
        let best = session.displayed(slot).expect("picked slot is displayed");
        let report = GenerationReport {
            generation: session.generation,
            best_distance,
            best_sexpr: expr::serialize(best),
        };
        (report, slot)
    }
}

/// Runs `generations` oracle-driven steps, calling `emit` for generation 0
/// and after every step.
pub fn run_oracle_evolution<F>(
    target: Expr,
    params: EvolutionParams,
    generations: u32,
    mut emit: F,
) -> Result<Vec<GenerationReport>, EvolutionError>
where
    F: FnMut(&GenerationReport),
{
    let oracle = OracleSelector::new(target, params.lattice.clone());
    let mut session = Session::init(params)?;
    let mut reports = Vec::with_capacity(generations as usize + 1);

    let (report, mut slot) = GenerationReport::from_display(&session, &oracle);
    emit(&report);
    reports.push(report);
    for _ in 0..generations {
        session.step(&[slot], 1)?;
        let (report, next) = GenerationReport::from_display(&session, &oracle);
        emit(&report);
        reports.push(report);
        slot = next;
    }
    Ok(reports)
}

/// Parses `x,y,z,t` into four finite reals.
pub fn parse_point(text: &str) -> Result<crate::expr::EvalPoint, String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(format!("expected x,y,z,t but got {} component(s)", parts.len()));
    }
    let mut values = [0.0; 4];
    for (slot, part) in values.iter_mut().zip(&parts) {
        let v: f64 = part.parse().map_err(|_| format!("`{part}` is not a number"))?;
        if !v.is_finite() {
            return Err(format!("`{part}` is not finite"));
        }
        *slot = v;
    }
    Ok(crate::expr::EvalPoint::new(values[0], values[1], values[2], values[3]))
}
