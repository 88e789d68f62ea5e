mod common;

use std::collections::BTreeSet;

use proptest::collection::{btree_set, vec};
use proptest::prelude::*;
use serde_json::json;

use tcfkit::codec::{ConsentRecord, Deciseconds};
use tcfkit::flow_sim::{build_world, EventTrace, Reader, UserChoice, WorldConfig};
use tcfkit::rules::{
    audit_banner, audit_flow, audit_vendor_breadth, BannerDescriptor, Control, ControlKind, Layer, RuleId, Severity,
    Threshold,
};

fn compliant() -> BannerDescriptor {
    serde_json::from_str(&common::fixture("banners/compliant.json")).unwrap()
}

fn find<'a>(b: &'a mut BannerDescriptor, kind: &str) -> &'a mut Control {
    b.layers[0].controls.iter_mut().find(|c| c.kind.name() == kind).unwrap()
}

type Mutation = (&'static str, fn(&mut BannerDescriptor), RuleId);

fn ids(b: &BannerDescriptor) -> Vec<RuleId> {
    audit_banner(b).into_iter().map(|f| f.rule_id).collect()
}

#[test]
fn mutation_matrix() {
    assert!(audit_banner(&compliant()).is_empty());

    let mutations: [Mutation; 6] = [
        (
            "pre-ticked",
            |b| {
                let t = b.layers[0].controls.iter_mut().find(|c| c.kind.is_toggle()).unwrap();
                if let ControlKind::PurposeToggle { default_on, .. } = &mut t.kind {
                    *default_on = true;
                }
            },
            RuleId::Preticked,
        ),
        ("no-reject-L1", |b| b.layers[0].controls.retain(|c| c.kind != ControlKind::RejectAll), RuleId::NoRejectL1),
        ("reject-below-fold", |b| find(b, "reject_all").above_fold = false, RuleId::RejectHarder),
        ("parity break", |b| find(b, "reject_all").parity_group = Some("secondary".into()), RuleId::FalseHierarchy),
        ("extra reject layer", |b| find(b, "reject_all").follow_up_layers = 1, RuleId::Obstruction),
        ("sneaked confirm", |b| find(b, "confirm_choices").above_fold = false, RuleId::Sneaking),
    ];
    for (name, mutate, expected) in mutations {
        let mut b = compliant();
        mutate(&mut b);
        assert_eq!(ids(&b), [expected], "{name}");
    }
}

#[test]
fn cookiepro_default_findings() {
    let b: BannerDescriptor = serde_json::from_str(&common::fixture("banners/cookiepro_default.json")).unwrap();
    let got = ids(&b);
    assert!(got.len() >= 3);
    assert_eq!(got, [RuleId::FalseHierarchy, RuleId::NoRejectL1, RuleId::RejectHarder, RuleId::Sneaking]);
}

const KINDS: [&str; 6] = ["accept_all", "reject_all", "confirm_choices", "settings_link", "purpose_toggle", "vendor_toggle"];

fn control() -> impl Strategy<Value = (usize, bool, Option<u8>, u32, bool)> {
    (0..KINDS.len(), any::<bool>(), proptest::option::of(0u8..2), 0u32..2, any::<bool>())
}

fn banner() -> impl Strategy<Value = BannerDescriptor> {
    vec(vec(control(), 0..6), 1..4).prop_map(|layers| BannerDescriptor {
        layers: layers
            .into_iter()
            .map(|cs| Layer {
                controls: cs
                    .into_iter()
                    .enumerate()
                    .map(|(i, (k, above_fold, parity, follow_up_layers, on))| Control {
                        kind: match KINDS[k] {
                            "accept_all" => ControlKind::AcceptAll,
                            "reject_all" => ControlKind::RejectAll,
                            "confirm_choices" => ControlKind::ConfirmChoices,
                            "settings_link" => ControlKind::SettingsLink,
                            "purpose_toggle" => ControlKind::PurposeToggle { purpose_id: 1, default_on: on },
                            _ => ControlKind::VendorToggle { vendor_id: 1, default_on: on },
                        },
                        order_index: i as u32,
                        above_fold,
                        parity_group: parity.map(|p| format!("g{p}")),
                        follow_up_layers,
                        label: None,
                    })
                    .collect(),
            })
            .collect(),
        offered_purposes: Default::default(),
        offered_li_purposes: Default::default(),
        offered_special_features: Default::default(),
        configured_vendor_ids: Default::default(),
        configured_li_vendor_ids: Default::default(),
    })
}

proptest! {
    #[test]
    fn banner_audit_shape(b in banner()) {
        let findings = audit_banner(&b);
        let rule_ids: Vec<RuleId> = findings.iter().map(|f| f.rule_id).collect();
        let mut sorted = rule_ids.clone();
        sorted.sort();
        sorted.dedup();
        prop_assert_eq!(&rule_ids, &sorted);

        let anchors: BTreeSet<String> = b.placed().map(|p| p.anchor()).chain(["L1".to_owned()]).collect();
        for f in &findings {
            prop_assert_eq!(f.severity, f.rule_id.severity());
            for a in &f.anchors {
                prop_assert!(anchors.contains(a), "dangling anchor {}", a);
            }
        }

        let preticked = b.placed().any(|p| p.control.kind.default_on());
        prop_assert_eq!(rule_ids.contains(&RuleId::Preticked), preticked);
        let reject_l1 = b.layers[0].controls.iter().any(|c| c.kind == ControlKind::RejectAll);
        prop_assert_eq!(rule_ids.contains(&RuleId::NoRejectL1), !reject_l1);
        prop_assert!(!(rule_ids.contains(&RuleId::Obstruction) && rule_ids.contains(&RuleId::RejectHarder)));
    }

    #[test]
    fn labels_and_declaration_order_are_irrelevant(b in banner()) {
        let mut c = b.clone();
        for layer in &mut c.layers {
            layer.controls.reverse();
            for ctl in &mut layer.controls {
                ctl.label = Some("x".into());
            }
        }
        prop_assert_eq!(audit_banner(&b), audit_banner(&c));
    }

    #[test]
    fn breadth_is_monotone(
        consented in btree_set(1u16..200, 0..80),
        extra in btree_set(1u16..200, 0..40),
        present in btree_set(1u16..200, 0..40),
        t in 0.05f64..=1.0,
        dt in 0.0f64..0.5,
    ) {
        let mut r = ConsentRecord::empty(Deciseconds(0));
        r.vendors_consent = consented.clone();
        let fires = |r: &ConsentRecord, t: f64| !audit_vendor_breadth(r, &present, Threshold::new(t).unwrap()).is_empty();
        let before = fires(&r, t);
        let lower = (t - dt).max(0.01);
        prop_assert!(!before || fires(&r, lower));
        // more consented vendors that are not on the site never clears the finding
        r.vendors_consent.extend(extra.difference(&present));
        prop_assert!(!before || fires(&r, t));
    }
}

fn flow_world(behavior: &str) -> WorldConfig {
    serde_json::from_value(json!({
        "cmps": [{"name": "c", "cmp_id": 1, "serving_mode": "delegated_subdomain", "registered": true, "behavior": behavior}],
        "sites": [{"id": "a", "domain": "a.example", "cmp": "c", "banner": compliant()}],
        "visitors": [{"id": "v", "ip": "192.0.2.1"}]
    }))
    .unwrap()
}

fn violations(trace: &EventTrace, observed: Option<&ConsentRecord>) -> Vec<RuleId> {
    audit_flow(trace, observed).into_iter().filter(|f| f.severity >= Severity::Violation).map(|f| f.rule_id).collect()
}

#[test]
fn positive_without_action_trace() {
    let mut w = build_world(&flow_world("positive_without_action"), 0).unwrap();
    w.visit("v", "a").unwrap();
    assert_eq!(violations(w.trace(), None), [RuleId::NoActionPositive]);
}

#[test]
fn positive_after_opt_out_trace() {
    let mut w = build_world(&flow_world("ignore_opt_out"), 0).unwrap();
    w.visit("v", "a").unwrap();
    w.interact("v", "a", &UserChoice::RejectAll).unwrap();
    let seen = w.vendor_request(&Reader::Cmp("c".into()), "v", "a").unwrap().record;
    assert_eq!(violations(w.trace(), seen.as_ref()), [RuleId::OptoutIgnored]);
    assert_eq!(audit_flow(w.trace(), seen.as_ref()).len(), 1);
}

#[test]
fn compliant_flows_are_clean() {
    for choice in [UserChoice::AcceptAll, UserChoice::RejectAll, UserChoice::None] {
        let mut w = build_world(&flow_world("compliant"), 0).unwrap();
        w.visit("v", "a").unwrap();
        w.interact("v", "a", &choice).unwrap();
        let seen = w.vendor_request(&Reader::Cmp("c".into()), "v", "a").unwrap().record;
        assert!(audit_flow(w.trace(), seen.as_ref()).is_empty(), "{choice:?}");
    }
}

#[test]
fn flow_findings_grow_with_the_trace() {
    let mut w = build_world(&flow_world("ignore_opt_out"), 0).unwrap();
    w.visit("v", "a").unwrap();
    w.interact("v", "a", &UserChoice::RejectAll).unwrap();
    w.interact("v", "a", &UserChoice::AcceptAll).unwrap();
    w.interact("v", "a", &UserChoice::RejectAll).unwrap();
    let full = w.trace().clone();
    let mut previous = 0;
    for n in 0..=full.len() {
        let prefix = EventTrace { events: full.events[..n].to_vec() };
        let anchors: usize = audit_flow(&prefix, None).iter().map(|f| f.anchors.len()).sum();
        assert!(anchors >= previous);
        previous = anchors;
    }
    assert_eq!(previous, 2);
}

#[test]
fn fixture_record_is_overly_broad() {
    let r: ConsentRecord = serde_json::from_str(&common::fixture("onetrust_record.json")).unwrap();
    let f = audit_vendor_breadth(&r, &BTreeSet::from([1, 2, 11]), Threshold::DEFAULT);
    assert_eq!(f.len(), 1);
    assert_eq!(f[0].rule_id, RuleId::PreRegistration);
}
