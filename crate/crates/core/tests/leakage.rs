//! Features must not depend on the observer's own hidden cards.

mod common;

use hlbs::belief::{ExactBeliefTracker, TrackerConfig};
use hlbs::engine::Variant;
use hlbs::observe::{encode_belief_context, encode_public, Observation};
use hlbs::policy::RuleBlueprint;
use hlbs::rng::stream;
use hlbs::search::impute;

#[test]
fn swapping_the_hidden_hand_leaves_features_unchanged() {
    for v in [Variant::mini(), Variant::standard()] {
        for seed in 0..12u64 {
            let s = common::blueprint_state_at(v, &RuleBlueprint::V1, seed, 3 + seed as usize % 7);
            let p = s.current_player();
            let obs = Observation::new(&s, p);
            let t = ExactBeliefTracker::new(&obs, &RuleBlueprint::V1, TrackerConfig::default()).unwrap();
            let sampler = t.sampler();
            let mut rng = stream(seed, &[1]);
            let mut changed = 0;
            for _ in 0..8 {
                let hand = sampler.sample(&mut rng);
                let world = impute(&s, p, &hand, &mut rng);
                changed += (world.hand(p) != s.hand(p)) as usize;
                let other = Observation::new(&world, p);
                assert_eq!(other, obs);
                assert_eq!(encode_public(&other.public), encode_public(&obs.public));
                for k in 0..hand.len() {
                    let a = encode_belief_context(&obs.public, &obs.private, &s.hand(p)[..k]).unwrap();
                    let b = encode_belief_context(&other.public, &other.private, &s.hand(p)[..k]).unwrap();
                    assert_eq!(a, b);
                }
            }
            if v == Variant::standard() {
                assert!(changed > 0, "sampled hands never differed from the truth");
            }
        }
    }
}

#[test]
fn hidden_cards_only_reach_the_partner_view() {
    let v = Variant::standard();
    let s = common::blueprint_state_at(v, &RuleBlueprint::V1, 4, 5);
    let p = s.current_player();
    let mine = Observation::new(&s, p);
    let theirs = Observation::new(&s, 1 - p);
    assert_eq!(&mine.private.partner_hand[..], &s.hand(1 - p)[..]);
    assert_eq!(&theirs.private.partner_hand[..], &s.hand(p)[..]);
}
