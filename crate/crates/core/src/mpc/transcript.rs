use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{
    deal_program, mask_coefficients, mask_powers, party_eval_public_input, reconstruct_output, secret_input_eval,
    share_input_powers, CorrelationDealer, FixedPointParams, MaskedProducts, MpcError, PartyProgram, Reconstruction,
};
use crate::compiler::ExpandedNetworkPoly;

/// Who talks to whom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    PartyToParty,
    /// The model owner handing out coefficient shares or published masks.
    DealerToParty,
    ClientToParty,
    PartyToClient,
    CorrelatorToDealer,
    CorrelatorToParty,
    CorrelatorToClient,
}

impl Channel {
    pub const ALL: [Channel; 7] = [
        Channel::PartyToParty,
        Channel::DealerToParty,
        Channel::ClientToParty,
        Channel::PartyToClient,
        Channel::CorrelatorToDealer,
        Channel::CorrelatorToParty,
        Channel::CorrelatorToClient,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Channel::PartyToParty => "party_to_party",
            Channel::DealerToParty => "dealer_to_party",
            Channel::ClientToParty => "client_to_party",
            Channel::PartyToClient => "party_to_client",
            Channel::CorrelatorToDealer => "correlator_to_dealer",
            Channel::CorrelatorToParty => "correlator_to_party",
            Channel::CorrelatorToClient => "correlator_to_client",
        }
    }
}

/// Message counters per channel.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    counts: BTreeMap<Channel, u64>,
}

impl Transcript {
    pub fn record(&mut self, channel: Channel, messages: u64) {
        *self.counts.entry(channel).or_insert(0) += messages;
    }

    pub fn count(&self, channel: Channel) -> u64 {
        self.counts.get(&channel).copied().unwrap_or(0)
    }

    pub fn party_to_party(&self) -> u64 {
        self.count(Channel::PartyToParty)
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = Channel::ALL
            .iter()
            .map(|c| format!("{}={}", c.name(), self.count(*c)))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

/// In-process run of all roles with every message counted.
///
/// Parties are only ever handed their own program and the messages addressed
/// to them, so no code path exists for one party to read another's state.
pub struct Session {
    params: FixedPointParams,
    parties: usize,
    rng: ChaCha20Rng,
    pub transcript: Transcript,
}

impl Session {
    pub fn new(params: FixedPointParams, parties: usize, seed: u64) -> Result<Self, MpcError> {
        if parties < 2 {
            return Err(MpcError::TooFewParties { k: parties });
        }
        Ok(Session {
            params,
            parties,
            rng: ChaCha20Rng::seed_from_u64(seed),
            transcript: Transcript::default(),
        })
    }

    pub fn params(&self) -> &FixedPointParams {
        &self.params
    }

    /// The owner shares the program: one message per party.
    pub fn deal(&mut self, poly: &ExpandedNetworkPoly) -> Result<Vec<PartyProgram>, MpcError> {
        let programs = deal_program(poly, self.parties, &self.params, &mut self.rng)?;
        self.transcript.record(Channel::DealerToParty, self.parties as u64);
        Ok(programs)
    }

    /// Public input broadcast, independent local evaluation, output gathering.
    pub fn eval_public(&mut self, programs: &[PartyProgram], x: &[f64]) -> Result<Reconstruction, MpcError> {
        self.transcript.record(Channel::ClientToParty, programs.len() as u64);
        let outputs = programs
            .iter()
            .map(|pp| party_eval_public_input(pp, x))
            .collect::<Result<Vec<_>, _>>()?;
        self.transcript.record(Channel::PartyToClient, outputs.len() as u64);
        reconstruct_output(&outputs, &self.params)
    }

    /// Sets up a correlation dealer and has the owner publish its masked coefficients.
    pub fn setup_secret_input(
        &mut self,
        poly: &ExpandedNetworkPoly,
        programs: &[PartyProgram],
        seed: u64,
    ) -> Result<(CorrelationDealer, Vec<Vec<u128>>), MpcError> {
        let first = programs.first().ok_or(MpcError::MissingParty { party: 0 })?;
        let dealer = CorrelationDealer::new(self.params.field, &first.structure, seed)?;
        self.transcript.record(Channel::CorrelatorToDealer, 1);
        let masks = mask_coefficients(poly, &self.params, dealer.owner_masks())?;
        self.transcript.record(Channel::DealerToParty, self.parties as u64);
        Ok((dealer, masks))
    }

    /// One query on a secret univariate input.
    pub fn eval_secret(
        &mut self,
        programs: &[PartyProgram],
        dealer: &mut CorrelationDealer,
        coeff_masks: &[Vec<u128>],
        x: f64,
    ) -> Result<Reconstruction, MpcError> {
        let correlation = dealer.query(self.parties)?;
        self.transcript.record(Channel::CorrelatorToClient, 1);
        self.transcript.record(Channel::CorrelatorToParty, self.parties as u64);

        let shares = share_input_powers(&[x], dealer.max_power(), self.parties, &self.params, &mut self.rng)?;
        let power_masks = mask_powers(x, &self.params, &correlation.client_masks)?;
        // shares and public masks travel in one message per party
        self.transcript.record(Channel::ClientToParty, self.parties as u64);

        let scheme = MaskedProducts {
            field: self.params.field,
            coeff_masks,
            power_masks: &power_masks,
            party_products: &correlation.party_products,
        };
        let outputs = programs
            .iter()
            .map(|pp| secret_input_eval(pp, shares.for_party(pp.party_id), &scheme))
            .collect::<Result<Vec<_>, _>>()?;
        self.transcript.record(Channel::PartyToClient, outputs.len() as u64);
        reconstruct_output(&outputs, &self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::SoftmaxMode;
    use crate::mpc::clear_fixed_eval;
    use crate::polyalg::SparseMultiPoly;

    #[test]
    fn ten_parties_linear_example() {
        let poly = ExpandedNetworkPoly::new(vec![SparseMultiPoly::linear(&[4.0, 4.0], 0.0)], SoftmaxMode::DropArgmax);
        let mut s = Session::new(FixedPointParams::default(), 10, 1).unwrap();
        let pps = s.deal(&poly).unwrap();
        let r = s.eval_public(&pps, &[1.0, 2.0]).unwrap();
        assert_eq!(r.logits, vec![12.0]);
        assert_eq!(s.transcript.party_to_party(), 0);
        assert_eq!(s.transcript.count(Channel::DealerToParty), 10);
        assert_eq!(s.transcript.count(Channel::PartyToClient), 10);
    }

    #[test]
    fn public_queries_need_no_dealer_traffic() {
        let poly = ExpandedNetworkPoly::new(vec![SparseMultiPoly::linear(&[1.0, -2.0], 0.5)], SoftmaxMode::DropArgmax);
        let mut s = Session::new(FixedPointParams::default(), 3, 2).unwrap();
        let pps = s.deal(&poly).unwrap();
        let before = s.transcript.count(Channel::DealerToParty);
        for x in [[0.1, 0.2], [0.3, -0.4]] {
            s.eval_public(&pps, &x).unwrap();
        }
        assert_eq!(s.transcript.count(Channel::DealerToParty), before);
        assert_eq!(s.transcript.count(Channel::CorrelatorToParty), 0);
    }

    #[test]
    fn secret_input_session() {
        let terms = [0.5, -1.0, 0.25, 0.125].iter().enumerate().map(|(j, &c)| (vec![j as u32], c));
        let poly = ExpandedNetworkPoly::new(
            vec![SparseMultiPoly::from_terms(1, terms).unwrap()],
            SoftmaxMode::DropArgmax,
        );
        let params = FixedPointParams::default();
        let mut s = Session::new(params, 3, 3).unwrap();
        let pps = s.deal(&poly).unwrap();
        let (mut dealer, masks) = s.setup_secret_input(&poly, &pps, 4).unwrap();
        for x in [0.0, 0.7, -1.3] {
            let r = s.eval_secret(&pps, &mut dealer, &masks, x).unwrap();
            assert_eq!(r.values, clear_fixed_eval(&poly, &params, &[x]).unwrap());
        }
        assert_eq!(s.transcript.party_to_party(), 0);
        assert_eq!(s.transcript.count(Channel::CorrelatorToParty), 9);
        assert!(s.transcript.to_string().contains("party_to_party=0"));
    }
}
