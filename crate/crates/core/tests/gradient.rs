mod common;

use hlbs::engine::Variant;
use hlbs::observe::Observation;
use hlbs::policy::RuleBlueprint;

#[test]
fn chain_loss_gradient_matches_finite_differences() {
    let v = Variant::mini();
    for i in 0..20u64 {
        let s = common::blueprint_state_at(v, &RuleBlueprint::V1, i, (i % 9) as usize);
        let p = s.current_player();
        let mut m = common::random_model(v, i, 0.5);
        let err = common::gradient_check(&mut m, &Observation::new(&s, p), s.hand(p));
        assert!(err < 1e-4, "instance {i}: relative error {err}");
    }
}
