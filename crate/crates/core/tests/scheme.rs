// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use psmra::linalg::Subspace;
use psmra::mracode::{SchemeContext, SchemeError, SchemeParams};
use psmra::rng;

fn ctx(q: u64, nu: usize, n: usize, r: usize) -> SchemeContext {
    SchemeContext::new(SchemeParams::from_order(q, nu, n, r).unwrap()).unwrap()
}

fn check_round_trip(c: &SchemeContext, seed: u64) {
    let mut g = rng::from_seed(seed);
    let rule = c.sample_encoding_rule(&mut g);
    let s = c.sample_source_state(&mut g).unwrap();
    let m = c.encode(&s, &rule).unwrap();
    assert_eq!(c.space().classify(m.subspace()).unwrap(), c.message_type());
    assert_eq!(c.decode(m.subspace()).unwrap(), s);
    for i in 1..=c.params().n() {
        let key = c.derive_receiver_key(&rule, i).unwrap();
        assert!(c.verify(m.subspace(), &key).unwrap(), "receiver {i} rejected an honest message");
    }
}

#[test]
fn honest_messages_round_trip() {
    for (q, nu, n, r) in [(2, 5, 2, 4), (2, 6, 3, 5), (4, 5, 2, 4), (2, 7, 3, 5)] {
        let c = ctx(q, nu, n, r);
        for seed in 0..8 {
            check_round_trip(&c, seed);
        }
    }
}

#[test]
fn parameter_constraints() {
    let bad = [(2, 4, 2, 4), (2, 5, 1, 3), (2, 5, 2, 3), (2, 5, 2, 5)];
    for (q, nu, n, r) in bad {
        assert!(
            matches!(SchemeParams::from_order(q, nu, n, r), Err(SchemeError::ConstraintViolation(_))),
            "({q},{nu},{n},{r}) accepted"
        );
    }
    assert!(matches!(SchemeParams::from_order(3, 5, 2, 4), Err(SchemeError::NonBinaryField(3))));
    let p = SchemeParams::from_order(2, 5, 2, 4).unwrap();
    let json = serde_json::to_string(&p).unwrap();
    assert_eq!(json, r#"{"field":{"k":1,"poly":2},"nu":5,"n":2,"r":4}"#);
    assert_eq!(serde_json::from_str::<SchemeParams>(&json).unwrap(), p);
    assert!(serde_json::from_str::<SchemeParams>(r#"{"field":{"k":1,"poly":2},"nu":5,"n":2,"r":5}"#).is_err());
}

#[test]
fn fixed_types() {
    let c = ctx(2, 5, 2, 4);
    assert_eq!(c.source_type().to_string(), "(7,4,2,1)");
    assert_eq!(c.message_type().to_string(), "(9,8,4,1)");
    assert_eq!(c.u().dim(), 2);
    assert_eq!(c.u_perp().dim(), 10);
    assert!(c.u_perp().contains(c.u()).unwrap());
    let c = ctx(2, 6, 3, 5);
    assert_eq!(c.source_type().to_string(), "(8,4,2,1)");
    assert_eq!(c.message_type().to_string(), "(11,10,5,1)");
}

#[test]
fn malformed_inputs_are_rejected() {
    let c = ctx(2, 5, 2, 4);
    let sp = c.space();
    // right dimension, wrong type: misses the special vector
    let not_message = sp.span_e(&[1, 2, 3, 4, 5, 6, 8, 9, 10]);
    assert!(matches!(c.decode(&not_message), Err(SchemeError::MalformedMessage(_))));
    let key = c.derive_receiver_key(&c.sample_encoding_rule(&mut rng::from_seed(1)), 1).unwrap();
    assert!(matches!(c.verify(&not_message, &key), Err(SchemeError::MalformedMessage(_))));
    // keys are not interchangeable between indices
    assert!(c.parse_receiver_key(2, key.subspace()).is_err());
    assert!(matches!(
        c.derive_receiver_key(&c.sample_encoding_rule(&mut rng::from_seed(1)), 3),
        Err(SchemeError::ReceiverOutOfRange { .. })
    ));
    assert!(c.parse_encoding_rule(&sp.span_e(&[1, 2, 3, 4])).is_err());
    assert!(c.source_state(sp.span_e(&[1, 2, 11])).is_err());
    let wrong_ambient = Subspace::zero(*c.field(), 10);
    assert!(c.decode(&wrong_ambient).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rules_and_keys_parse_back(seed in any::<u64>(), big in any::<bool>()) {
        let c = if big { ctx(4, 5, 2, 4) } else { ctx(2, 6, 3, 5) };
        let n = c.params().n();
        let nu = c.params().nu();
        let rule = c.sample_encoding_rule(&mut rng::from_seed(seed));
        prop_assert_eq!(c.space().classify(rule.subspace()).unwrap(), c.rule_type());
        prop_assert_eq!(&c.parse_encoding_rule(rule.subspace()).unwrap(), &rule);
        prop_assert!(rule.subspace().contains(c.u()).unwrap());
        prop_assert_eq!(rule.subspace().intersect(c.u_perp()).unwrap(), c.u().clone());
        let special = c.space().span_e(&[2 * nu + 1]);
        for i in 1..=n {
            let key = c.derive_receiver_key(&rule, i).unwrap();
            prop_assert_eq!(key.subspace().dim(), n + 1);
            prop_assert!(rule.subspace().contains(key.subspace()).unwrap());
            prop_assert!(!key.subspace().contains(&special).unwrap());
            let others: Vec<usize> = (1..=n).filter(|&j| j != i).collect();
            let orth = c.space().perp(&c.space().span_e(&others)).unwrap();
            prop_assert!(orth.contains(key.subspace()).unwrap());
            prop_assert_eq!(&c.parse_receiver_key(i, key.subspace()).unwrap(), &key);
            let rebuilt = c.receiver_key(i, key.h3().to_vec(), key.h9()).unwrap();
            prop_assert_eq!(&rebuilt, &key);
        }
    }

    #[test]
    fn encode_decode_identity(seed in any::<u64>()) {
        let c = ctx(2, 5, 2, 4);
        let mut g = rng::from_seed(seed);
        let rule = c.sample_encoding_rule(&mut g);
        let s = c.sample_source_state(&mut g).unwrap();
        prop_assert_eq!(c.space().classify(s.subspace()).unwrap(), c.source_type());
        let m = c.encode(&s, &rule).unwrap();
        prop_assert_eq!(m.subspace().intersect(c.u_perp()).unwrap(), s.subspace().clone());
        prop_assert_eq!(c.decode(m.subspace()).unwrap(), s);
    }
}
