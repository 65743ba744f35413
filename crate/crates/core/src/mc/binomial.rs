use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution};

use super::GenericModel;
use crate::special::{BetaPrior, BinomialModel};

/// Where focused parameter draws come from when an observation is given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Proposal {
    /// Conjugate posterior given the observed count.
    Posterior,
    Fixed(BetaPrior),
}

/// Binomial likelihood with a beta prior, exposed through [`GenericModel`].
#[derive(Debug, Clone)]
pub struct BinomialBetaModel {
    model: BinomialModel,
    prior: BetaPrior,
    proposal: Proposal,
    ln_choose: Vec<f64>,
}

impl BinomialBetaModel {
    pub fn new(model: BinomialModel, prior: BetaPrior) -> Self {
        Self {
            ln_choose: model.ln_choose_table(),
            model,
            prior,
            proposal: Proposal::Posterior,
        }
    }

    pub fn with_proposal(mut self, proposal: Proposal) -> Self {
        self.proposal = proposal;
        self
    }

    pub fn model(&self) -> &BinomialModel {
        &self.model
    }

    pub fn prior(&self) -> &BetaPrior {
        &self.prior
    }

    fn proposal_for(&self, observed: u64) -> BetaPrior {
        match self.proposal {
            Proposal::Posterior => self
                .prior
                .posterior(observed.min(self.model.trials()), &self.model),
            Proposal::Fixed(p) => p,
        }
    }
}

fn draw_beta<R: Rng + ?Sized>(rng: &mut R, shape: &BetaPrior) -> f64 {
    Beta::new(shape.a(), shape.b())
        .expect("validated beta shapes")
        .sample(rng)
}

impl GenericModel for BinomialBetaModel {
    type Param = f64;
    type Data = u64;

    fn likelihood(&self, data: &u64, param: &f64) -> f64 {
        if *data > self.model.trials() || !(0.0..=1.0).contains(param) {
            return 0.0;
        }
        self.model
            .ln_pmf_with(self.ln_choose[*data as usize], *data, *param)
            .exp()
    }

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        draw_beta(rng, &self.prior)
    }

    fn sample_data<R: Rng + ?Sized>(&self, rng: &mut R, param: &f64) -> u64 {
        Binomial::new(self.model.trials(), param.clamp(0.0, 1.0))
            .expect("probability in [0, 1]")
            .sample(rng)
    }

    fn sample_focused<R: Rng + ?Sized>(&self, rng: &mut R, observed: &u64) -> f64 {
        draw_beta(rng, &self.proposal_for(*observed))
    }

    fn prior_density_ratio(&self, param: &f64, observed: &u64) -> f64 {
        let proposal = self.proposal_for(*observed);
        (self.prior.ln_pdf(*param) - proposal.ln_pdf(*param)).exp()
    }
}
