mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use serde_json::json;

use tcfkit::codec::ConsentRecord;
use tcfkit::flow_sim::{
    build_world, run_script, CustomChoice, EventKind, EventTrace, Reader, SimError, SimulationWorld, UserChoice, WorldConfig,
};

fn banner() -> serde_json::Value {
    json!({
        "layers": [{"controls": [
            {"kind": "accept_all", "order_index": 1, "above_fold": true, "parity_group": "p"},
            {"kind": "reject_all", "order_index": 2, "above_fold": true, "parity_group": "p"},
            {"kind": "confirm_choices", "order_index": 3, "above_fold": true}
        ]}],
        "offered_purposes": [1, 3, 4],
        "offered_special_features": [1],
        "configured_vendor_ids": [1, 2, 11]
    })
}

/// Two sites, each with one of the CMPs `g` (global scope) and `s`
/// (service-specific), plus an unregistered CMP `u` that never serves a site.
fn scope_world(cmp_a: &str, cmp_b: &str) -> WorldConfig {
    serde_json::from_value(json!({
        "vendor_list": {"version": 7, "vendors": [{"id": 1, "purposes_consent": [1]}]},
        "cmps": [
            {"name": "g", "cmp_id": 1, "serving_mode": "delegated_subdomain", "registered": true, "scope": "global"},
            {"name": "s", "cmp_id": 2, "serving_mode": "delegated_subdomain", "registered": true, "scope": "service_specific"},
            {"name": "u", "cmp_id": 3, "serving_mode": "own_domain", "own_domain": "cmp.u.example"}
        ],
        "sites": [
            {"id": "a", "domain": "a.example", "cmp": cmp_a, "banner": banner()},
            {"id": "b", "domain": "b.example", "cmp": cmp_b, "banner": banner()}
        ],
        "visitors": [{"id": "v1", "ip": "192.0.2.1"}, {"id": "v2", "ip": "192.0.2.2"}]
    }))
    .unwrap()
}

const SITES: [&str; 2] = ["a", "b"];
const VISITORS: [&str; 2] = ["v1", "v2"];

fn readers() -> Vec<(Reader, bool)> {
    vec![
        (Reader::Cmp("g".into()), true),
        (Reader::Cmp("s".into()), true),
        (Reader::Cmp("u".into()), false),
        (Reader::Vendor(1), true),
        (Reader::Vendor(99), false),
    ]
}

/// Expected visibility, tracked outside the simulator.
#[derive(Default)]
struct Model {
    global: BTreeMap<String, ConsentRecord>,
    local: BTreeMap<(String, String), ConsentRecord>,
}

impl Model {
    fn expect(&self, visitor: &str, site: &str, registered: bool) -> Option<&ConsentRecord> {
        if !registered {
            return None;
        }
        self.local.get(&(visitor.to_owned(), site.to_owned())).or_else(|| self.global.get(visitor))
    }
}

fn apply(world: &mut SimulationWorld, model: &mut Model, cmp_of: &BTreeMap<&str, &str>, v: &str, s: &str, accept: bool) {
    world.visit(v, s).unwrap();
    let choice = if accept { UserChoice::AcceptAll } else { UserChoice::RejectAll };
    let r = world.interact(v, s, &choice).unwrap();
    if cmp_of[s] == "g" {
        model.global.insert(v.to_owned(), r);
    } else {
        model.local.insert((v.to_owned(), s.to_owned()), r);
    }
}

fn check_reads(world: &mut SimulationWorld, model: &Model) {
    for v in VISITORS {
        for s in SITES {
            for (reader, registered) in readers() {
                let got = world.vendor_request(&reader, v, s).unwrap().record;
                assert_eq!(got.as_ref(), model.expect(v, s, registered), "{reader:?} reading {v} on {s}");
                if let (Some(g), None) = (model.global.get(v), model.local.get(&(v.to_owned(), s.to_owned()))) {
                    if registered {
                        assert_eq!(got.as_ref(), Some(g));
                    }
                }
                let other = if s == "a" { "b" } else { "a" };
                if let Some(foreign) = model.local.get(&(v.to_owned(), other.to_owned())) {
                    if model.expect(v, s, registered) != Some(foreign) {
                        assert_ne!(got.as_ref(), Some(foreign), "service-specific record of {other} leaked to {s}");
                    }
                }
            }
        }
    }
}

#[test]
fn scope_soundness_exhaustive() {
    let cmps = ["g", "s"];
    // each (visitor, site) pair: skip, accept or reject
    let pairs: Vec<(&str, &str)> = VISITORS.iter().flat_map(|v| SITES.iter().map(move |s| (*v, *s))).collect();
    for ca in cmps {
        for cb in cmps {
            let cmp_of = BTreeMap::from([("a", ca), ("b", cb)]);
            for mask in 0..3usize.pow(pairs.len() as u32) {
                let mut world = build_world(&scope_world(ca, cb), 0).unwrap();
                let mut model = Model::default();
                let mut m = mask;
                for &(v, s) in &pairs {
                    match m % 3 {
                        1 => apply(&mut world, &mut model, &cmp_of, v, s, true),
                        2 => apply(&mut world, &mut model, &cmp_of, v, s, false),
                        _ => {}
                    }
                    m /= 3;
                }
                check_reads(&mut world, &model);
            }
        }
    }
}

fn full_world() -> WorldConfig {
    serde_json::from_str(&common::fixture("world.json")).unwrap()
}

fn script() -> Vec<tcfkit::flow_sim::Step> {
    serde_json::from_str(&common::fixture("actions.json")).unwrap()
}

#[test]
fn same_seed_same_trace() {
    let a = run_script(&full_world(), 42, &script()).unwrap();
    let b = run_script(&full_world(), 42, &script()).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.trace.to_jsonl(), b.trace.to_jsonl());
}

#[test]
fn seed_changes_identifiers() {
    let cookie = |seed| {
        let out = run_script(&full_world(), seed, &script()).unwrap();
        out.trace
            .iter()
            .find_map(|e| match &e.kind {
                EventKind::CookieSet { name, value, .. } if name == "mc" => Some(value.clone()),
                _ => None,
            })
            .unwrap()
    };
    assert_eq!(cookie(1), cookie(1));
    assert_ne!(cookie(1), cookie(2));
}

#[test]
fn trace_is_causal() {
    let out = run_script(&full_world(), 3, &script()).unwrap();
    let events = &out.trace.events;
    assert!(events.windows(2).all(|w| w[0].seq < w[1].seq && w[0].at < w[1].at));
    let mut loaded: BTreeSet<(&str, &str, &str)> = BTreeSet::new();
    let mut acted: BTreeSet<(&str, &str)> = BTreeSet::new();
    for e in events {
        let ctx = (e.visitor.as_str(), e.site.as_str());
        match &e.kind {
            EventKind::ScriptLoad { from_domain, .. } | EventKind::PixelLoad { from_domain, .. } => {
                loaded.insert((ctx.0, ctx.1, from_domain));
            }
            EventKind::CookieSet { setter, .. } => {
                assert!(loaded.contains(&(ctx.0, ctx.1, setter.as_str())), "cookie from {setter} before it loaded");
            }
            EventKind::IpExposure { observer_domain, .. } => {
                assert!(loaded.contains(&(ctx.0, ctx.1, observer_domain.as_str())));
            }
            EventKind::UserAction { .. } => {
                acted.insert(ctx);
            }
            EventKind::ConsentStored { .. } => assert!(acted.contains(&ctx), "consent stored before any action"),
            EventKind::SignalRead { .. } => {}
        }
    }
}

#[test]
fn jsonl_round_trip() {
    let out = run_script(&full_world(), 9, &script()).unwrap();
    let text = out.trace.to_jsonl();
    assert_eq!(EventTrace::from_jsonl(&text).unwrap(), out.trace);
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(0, 1);
    assert!(EventTrace::from_jsonl(&lines.join("\n")).is_err());
}

#[test]
fn custom_choice_lattice() {
    let offered_p = [1u8, 3, 4];
    let offered_v = [1u16, 2, 11];
    for pm in 0..8u32 {
        for vm in 0..8u32 {
            let purposes: BTreeSet<u8> = offered_p.iter().enumerate().filter(|(i, _)| pm >> i & 1 == 1).map(|(_, p)| *p).collect();
            let vendors: BTreeSet<u16> = offered_v.iter().enumerate().filter(|(i, _)| vm >> i & 1 == 1).map(|(_, v)| *v).collect();
            let mut w = build_world(&scope_world("s", "g"), 0).unwrap();
            w.visit("v1", "a").unwrap();
            let choice = CustomChoice { purposes: purposes.clone(), vendors: vendors.clone(), ..Default::default() };
            let r = w.interact("v1", "a", &UserChoice::Custom(choice)).unwrap();
            assert_eq!(r.purposes_consent, purposes);
            assert_eq!(r.vendors_consent, vendors);
            assert!(r.special_feature_optins.is_empty() && r.purposes_li.is_empty() && r.vendors_li.is_empty());
            assert!(r.service_specific);
        }
    }
    let mut w = build_world(&scope_world("s", "g"), 0).unwrap();
    w.visit("v1", "a").unwrap();
    let bad = CustomChoice { purposes: [2].into(), ..Default::default() };
    assert_eq!(w.interact("v1", "a", &UserChoice::Custom(bad)), Err(SimError::InvalidChoice { field: "purpose", id: 2 }));
}

#[test]
fn interact_requires_visit_and_banner() {
    let mut w = build_world(&scope_world("g", "g"), 0).unwrap();
    assert!(matches!(w.interact("v1", "a", &UserChoice::AcceptAll), Err(SimError::NotVisited { .. })));
    assert!(matches!(w.visit("nobody", "a"), Err(SimError::UnknownId { .. })));
    let mut w = build_world(&serde_json::from_value(json!({
        "sites": [{"id": "x", "domain": "x.example"}],
        "visitors": [{"id": "v", "ip": "192.0.2.9"}]
    })).unwrap(), 0).unwrap();
    w.visit("v", "x").unwrap();
    assert!(matches!(w.interact("v", "x", &UserChoice::AcceptAll), Err(SimError::NoBanner { .. })));
}

#[test]
fn bad_configs_are_rejected() {
    let bad = [
        json!({"cmps": [{"name": "x", "cmp_id": 1, "serving_mode": "delegated_subdomain"}]}),
        json!({"cmps": [{"name": "x", "cmp_id": 1, "serving_mode": "own_domain"}]}),
        json!({"cmps": [{"name": "x", "cmp_id": 1, "serving_mode": "own_domain", "own_domain": "x.example", "scope": "global"}]}),
        json!({"cmps": [{"name": "x", "cmp_id": 5000, "serving_mode": "own_domain", "own_domain": "x.example"}]}),
        json!({"sites": [{"id": "a", "domain": "a.example", "cmp": "missing"}]}),
        json!({"sites": [{"id": "a", "domain": "a.example", "cookies": [
            {"name": "c", "domain": ".consensu.org", "value": {"kind": "per_visit"}}
        ]}]}),
    ];
    for cfg in bad {
        let cfg: WorldConfig = serde_json::from_value(cfg).unwrap();
        assert!(matches!(build_world(&cfg, 0), Err(SimError::ConfigError { .. })), "{cfg:?}");
    }
    assert!(build_world(&WorldConfig::default(), 0).is_ok());
}

fn behavior_world(behavior: &str) -> WorldConfig {
    serde_json::from_value(json!({
        "cmps": [{"name": "c", "cmp_id": 1, "serving_mode": "delegated_subdomain", "registered": true, "behavior": behavior}],
        "sites": [{"id": "a", "domain": "a.example", "cmp": "c", "banner": banner()}],
        "visitors": [{"id": "v", "ip": "192.0.2.1"}]
    }))
    .unwrap()
}

#[test]
fn misbehaving_cmps_store_positive_consent() {
    let mut w = build_world(&behavior_world("positive_without_action"), 0).unwrap();
    w.visit("v", "a").unwrap();
    let stored: Vec<_> = w.trace().iter().filter(|e| matches!(&e.kind, EventKind::ConsentStored { record, .. } if record.is_positive())).collect();
    assert_eq!(stored.len(), 1);

    let mut w = build_world(&behavior_world("ignore_opt_out"), 0).unwrap();
    w.visit("v", "a").unwrap();
    let returned = w.interact("v", "a", &UserChoice::RejectAll).unwrap();
    assert!(!returned.is_positive());
    let read = w.vendor_request(&Reader::Cmp("c".into()), "v", "a").unwrap();
    assert!(read.record.unwrap().is_positive());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn any_seed_is_reproducible(seed in any::<u64>()) {
        let a = run_script(&full_world(), seed, &script()).unwrap();
        let b = run_script(&full_world(), seed, &script()).unwrap();
        prop_assert_eq!(a, b);
    }
}
