use super::banner::{BannerDescriptor, ControlKind, PlacedControl};
use super::{Finding, RuleId};

fn cheapest<'a>(controls: &[PlacedControl<'a>]) -> Option<PlacedControl<'a>> {
    controls.iter().copied().min_by_key(|p| (p.interaction_cost(), !p.control.above_fold))
}

fn fewest_transitions(controls: &[PlacedControl<'_>]) -> Option<u32> {
    controls.iter().map(PlacedControl::transitions).min()
}

/// Audits a banner's structure. The result is sorted by rule id and holds
/// at most one finding per rule.
pub fn audit_banner(b: &BannerDescriptor) -> Vec<Finding> {
    let accepts: Vec<_> = b.controls_of(&ControlKind::AcceptAll).collect();
    let rejects: Vec<_> = b.controls_of(&ControlKind::RejectAll).collect();
    let confirms: Vec<_> = b.controls_of(&ControlKind::ConfirmChoices).collect();
    let preticked: Vec<_> = b.placed().filter(|p| p.control.kind.default_on()).collect();

    let refusals: &[PlacedControl<'_>] = if !rejects.is_empty() {
        &rejects
    } else if preticked.is_empty() {
        &confirms
    } else {
        &[]
    };

    let mut out = Vec::new();

    if !preticked.is_empty() {
        out.push(Finding::new(
            RuleId::Preticked,
            format!("{} toggle(s) are switched on by default", preticked.len()),
            preticked.iter().map(PlacedControl::anchor).collect(),
        ));
    }

    if !rejects.iter().any(|p| p.layer == 1) {
        out.push(Finding::new(RuleId::NoRejectL1, "the first layer offers no reject-all option", vec!["L1".into()]));
    }

    let mut unequal = Vec::new();
    for layer in 1..=b.layers.len() {
        for a in accepts.iter().filter(|p| p.layer == layer) {
            for r in rejects.iter().filter(|p| p.layer == layer) {
                let same = matches!((&a.control.parity_group, &r.control.parity_group), (Some(x), Some(y)) if x == y);
                if !same {
                    unequal.push(a.anchor());
                    unequal.push(r.anchor());
                }
            }
        }
    }
    if !unequal.is_empty() {
        unequal.sort();
        unequal.dedup();
        out.push(Finding::new(
            RuleId::FalseHierarchy,
            "accept and reject options on the same layer are not presented with equal prominence",
            unequal,
        ));
    }

    let best_accept = cheapest(&accepts);
    let best_refusal = cheapest(refusals);
    let mut obstruction = false;
    if let Some(acc) = best_accept {
        let t_accept = acc.transitions();
        let t_refuse = fewest_transitions(refusals);
        if t_refuse.is_none_or(|t| t > t_accept) {
            obstruction = true;
            let message = match t_refuse {
                Some(t) => format!("refusing needs {t} layer transition(s), accepting needs {t_accept}"),
                None => "no path lets the user refuse".to_owned(),
            };
            let mut anchors = vec![acc.anchor()];
            anchors.extend(best_refusal.map(|p| p.anchor()));
            out.push(Finding::new(RuleId::Obstruction, message, anchors));
        }

        let c_accept = acc.interaction_cost();
        let c_refuse = best_refusal.map(|p| p.interaction_cost());
        if !obstruction && c_refuse.is_none_or(|c| c > c_accept) {
            let mut anchors = vec![acc.anchor()];
            anchors.extend(best_refusal.map(|p| p.anchor()));
            out.push(Finding::new(
                RuleId::RejectHarder,
                format!(
                    "refusing costs {} interaction(s), accepting costs {c_accept}",
                    c_refuse.map_or("unbounded".to_owned(), |c| c.to_string())
                ),
                anchors,
            ));
        }

        if accepts.iter().any(|p| p.control.above_fold) {
            let mut hidden: Vec<String> = confirms.iter().filter(|p| !p.control.above_fold).map(|p| p.anchor()).collect();
            if let Some(rej) = cheapest(&rejects) {
                if !rej.control.above_fold && rej.interaction_cost() <= c_accept {
                    hidden.push(rej.anchor());
                }
            }
            if !hidden.is_empty() {
                hidden.sort();
                out.push(Finding::new(
                    RuleId::Sneaking,
                    "accept-all is visible immediately while other choices need scrolling",
                    hidden,
                ));
            }
        }
    }

    out.sort_by_key(|f| f.rule_id);
    out
}
