//! Elitist genetic search over 28-bit segmentation chromosomes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GtsError, Result};
use crate::segmentation::{decode, Chromosome, GtsHypothesis, SplitBounds, CHROMOSOME_BITS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 20,
            generations: 15,
            crossover_prob: 0.6,
            mutation_prob: 0.03,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.crossover_prob) || !prob(self.mutation_prob) {
            return Err(GtsError::InvalidConfig("probabilities must lie in [0, 1]".into()));
        }
        if self.population < 2 || !self.population.is_multiple_of(2) {
            return Err(GtsError::InvalidConfig(format!(
                "population must be even and at least 2, got {}",
                self.population
            )));
        }
        if self.generations == 0 {
            return Err(GtsError::InvalidConfig("need at least one generation".into()));
        }
        Ok(())
    }
}

/// Per-covariate rates and the combined fitness
/// `(ccr_a / 2 + ccr_b / 6 + ccr_c / 3)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessReport {
    pub ccr_a: f64,
    pub ccr_b: f64,
    pub ccr_c: f64,
    pub fitness: f64,
}

impl FitnessReport {
    pub fn from_ccrs(ccr_a: f64, ccr_b: f64, ccr_c: f64) -> Self {
        let weighted = ccr_a / 2.0 + ccr_b / 6.0 + ccr_c / 3.0;
        FitnessReport {
            ccr_a,
            ccr_b,
            ccr_c,
            fitness: weighted * weighted,
        }
    }

    pub fn zero() -> Self {
        Self::from_ccrs(0.0, 0.0, 0.0)
    }
}

/// Anything that scores a chromosome. Must be deterministic for the
/// reproducibility guarantees of [`evolve`].
pub trait Objective: Sync {
    fn evaluate(&self, chrom: Chromosome) -> Result<FitnessReport>;
}

impl<F> Objective for F
where
    F: Fn(Chromosome) -> Result<FitnessReport> + Sync,
{
    fn evaluate(&self, chrom: Chromosome) -> Result<FitnessReport> {
        self(chrom)
    }
}

/// Uniform crossover: with probability `p` every bit position swaps between
/// the two offspring independently with probability 1/2, otherwise the
/// offspring copy their parents.
pub fn uniform_crossover<R: Rng>(
    a: Chromosome,
    b: Chromosome,
    p: f64,
    rng: &mut R,
) -> (Chromosome, Chromosome) {
    if rng.gen_bool(p) {
        let swap = Chromosome::from_bits(rng.gen::<u32>());
        crossover_with_mask(a, b, swap)
    } else {
        (a, b)
    }
}

/// Exchanges the bits selected by `swap` between `a` and `b`.
pub fn crossover_with_mask(a: Chromosome, b: Chromosome, swap: Chromosome) -> (Chromosome, Chromosome) {
    let (a, b, s) = (a.bits(), b.bits(), swap.bits());
    (
        Chromosome::from_bits((a & !s) | (b & s)),
        Chromosome::from_bits((b & !s) | (a & s)),
    )
}

/// Flips each bit independently with probability `p`.
pub fn mutate<R: Rng>(c: Chromosome, p: f64, rng: &mut R) -> Chromosome {
    let mut out = c;
    for i in 0..CHROMOSOME_BITS {
        if rng.gen_bool(p) {
            out = out.with_flipped(i);
        }
    }
    out
}

/// Roulette-wheel pick; uniform when every fitness is zero.
fn select_parent<R: Rng>(fitness: &[f64], rng: &mut R) -> usize {
    let total: f64 = fitness.iter().sum();
    if total <= 0.0 {
        return rng.gen_range(0..fitness.len());
    }
    let mut target = rng.gen::<f64>() * total;
    for (i, &f) in fitness.iter().enumerate() {
        if target < f {
            return i;
        }
        target -= f;
    }
    // Floating-point slack: fall back to the last positive entry.
    fitness.iter().rposition(|&f| f > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best: Chromosome,
    pub report: FitnessReport,
}

impl GenerationRecord {
    /// `generation,fitness,bits,ccr_a,ccr_b,ccr_c`
    pub fn to_log_line(&self) -> String {
        format!(
            "{},{:.6},{},{:.6},{:.6},{:.6}",
            self.generation,
            self.report.fitness,
            self.best,
            self.report.ccr_a,
            self.report.ccr_b,
            self.report.ccr_c
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub best: Chromosome,
    pub best_report: FitnessReport,
    pub history: Vec<GenerationRecord>,
}

fn evaluate_population<O: Objective>(objective: &O, population: &[Chromosome]) -> Result<Vec<FitnessReport>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        population.par_iter().map(|&c| objective.evaluate(c)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        population.iter().map(|&c| objective.evaluate(c)).collect()
    }
}

/// Runs the elitist GA. The best chromosome of each generation is copied
/// unchanged into the next; the rest of the population is bred by roulette
/// selection, uniform crossover and per-bit mutation. All random draws come
/// from one seeded stream in a fixed order, so results do not depend on how
/// evaluations are scheduled.
pub fn evolve<O: Objective>(config: &GaConfig, objective: &O) -> Result<Evolution> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut population: Vec<Chromosome> = (0..config.population)
        .map(|_| Chromosome::from_bits(rng.gen::<u32>()))
        .collect();
    let mut history = Vec::with_capacity(config.generations);

    for generation in 0..config.generations {
        let reports = evaluate_population(objective, &population)?;
        let mut elite = 0;
        for (i, r) in reports.iter().enumerate() {
            if r.fitness > reports[elite].fitness {
                elite = i;
            }
        }
        history.push(GenerationRecord {
            generation,
            best: population[elite],
            report: reports[elite],
        });
        if generation + 1 == config.generations {
            break;
        }

        let fitness: Vec<f64> = reports.iter().map(|r| r.fitness).collect();
        let mut next = Vec::with_capacity(config.population);
        next.push(population[elite]);
        while next.len() < config.population {
            let a = population[select_parent(&fitness, &mut rng)];
            let b = population[select_parent(&fitness, &mut rng)];
            let (c, d) = uniform_crossover(a, b, config.crossover_prob, &mut rng);
            next.push(mutate(c, config.mutation_prob, &mut rng));
            if next.len() < config.population {
                next.push(mutate(d, config.mutation_prob, &mut rng));
            }
        }
        population = next;
    }

    let last = history.last().expect("at least one generation");
    Ok(Evolution {
        best: last.best,
        best_report: last.report,
        history,
    })
}

/// Scores hypotheses; the GA-facing adapter decodes chromosomes first.
pub trait HypothesisObjective: Sync {
    fn evaluate_hypothesis(&self, h: &GtsHypothesis) -> Result<FitnessReport>;
}

/// Adapts a hypothesis objective to chromosomes through `decode`.
pub struct Decoded<'a, H> {
    pub bounds: SplitBounds,
    pub inner: &'a H,
}

impl<H: HypothesisObjective> Objective for Decoded<'_, H> {
    fn evaluate(&self, chrom: Chromosome) -> Result<FitnessReport> {
        self.inner.evaluate_hypothesis(&decode(chrom, &self.bounds))
    }
}

/// Evolves a segmentation hypothesis and returns it with the GA history.
pub fn evolve_hypothesis<H: HypothesisObjective>(
    config: &GaConfig,
    bounds: &SplitBounds,
    objective: &H,
) -> Result<(GtsHypothesis, Evolution)> {
    bounds.validate()?;
    let adapter = Decoded {
        bounds: *bounds,
        inner: objective,
    };
    let evolution = evolve(config, &adapter)?;
    Ok((decode(evolution.best, bounds), evolution))
}

/// Coordinate refinement of the row splits: scan `s_f` across its bounds
/// with `s_h` fixed, then `s_h` with the new `s_f`. The incumbent is only
/// replaced by a strictly better value, so fitness never drops. Splits the
/// mask does not depend on are left alone.
pub fn sequential_refine<H: HypothesisObjective>(
    h: &GtsHypothesis,
    bounds: &SplitBounds,
    objective: &H,
) -> Result<(GtsHypothesis, FitnessReport)> {
    let mut best = *h;
    let mut best_report = objective.evaluate_hypothesis(&best)?;

    if best.foot_split_matters() {
        let s_h = best.s_h;
        for s_f in bounds.foot.iter().filter(|&s| s > s_h) {
            let candidate = GtsHypothesis { s_f, ..best };
            let report = objective.evaluate_hypothesis(&candidate)?;
            if report.fitness > best_report.fitness {
                best = candidate;
                best_report = report;
            }
        }
    }
    if best.head_split_matters() {
        let s_f = best.s_f;
        for s_h in bounds.head.iter().filter(|&s| s < s_f) {
            let candidate = GtsHypothesis { s_h, ..best };
            let report = objective.evaluate_hypothesis(&candidate)?;
            if report.fitness > best_report.fitness {
                best = candidate;
                best_report = report;
            }
        }
    }
    Ok((best, best_report))
}
