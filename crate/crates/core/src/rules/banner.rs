use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Structural description of a consent pop-up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BannerDescriptor {
    /// Layer 1 first. Reaching layer `n` costs `n - 1` transitions.
    pub layers: Vec<Layer>,
    #[serde(default)]
    pub offered_purposes: BTreeSet<u8>,
    #[serde(default)]
    pub offered_li_purposes: BTreeSet<u8>,
    #[serde(default)]
    pub offered_special_features: BTreeSet<u8>,
    #[serde(default)]
    pub configured_vendor_ids: BTreeSet<u16>,
    #[serde(default)]
    pub configured_li_vendor_ids: BTreeSet<u16>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub controls: Vec<Control>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Control {
    #[serde(flatten)]
    pub kind: ControlKind,
    pub order_index: u32,
    pub above_fold: bool,
    /// Controls sharing a tag have the same size, colour and prominence.
    #[serde(default)]
    pub parity_group: Option<String>,
    /// Extra layers the user must pass after activating this control before
    /// the choice takes effect (an "are you sure?" step, for example).
    #[serde(default)]
    pub follow_up_layers: u32,
    /// Display text. Never affects audit results.
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlKind {
    AcceptAll,
    RejectAll,
    ConfirmChoices,
    SettingsLink,
    PurposeToggle { purpose_id: u8, default_on: bool },
    VendorToggle { vendor_id: u16, default_on: bool },
}

impl ControlKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControlKind::AcceptAll => "accept_all",
            ControlKind::RejectAll => "reject_all",
            ControlKind::ConfirmChoices => "confirm_choices",
            ControlKind::SettingsLink => "settings_link",
            ControlKind::PurposeToggle { .. } => "purpose_toggle",
            ControlKind::VendorToggle { .. } => "vendor_toggle",
        }
    }

    pub fn is_toggle(&self) -> bool {
        matches!(self, ControlKind::PurposeToggle { .. } | ControlKind::VendorToggle { .. })
    }

    pub fn default_on(&self) -> bool {
        matches!(
            self,
            ControlKind::PurposeToggle { default_on: true, .. } | ControlKind::VendorToggle { default_on: true, .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BannerError {
    #[error("banner has no layers")]
    NoLayers,
    #[error("layer {layer} repeats order_index {order_index}")]
    DuplicateOrderIndex { layer: usize, order_index: u32 },
}

/// A control together with its 1-based layer number.
#[derive(Debug, Clone, Copy)]
pub struct PlacedControl<'a> {
    pub layer: usize,
    pub control: &'a Control,
}

impl PlacedControl<'_> {
    /// Layer transitions needed to reach the control and complete its action.
    pub fn transitions(&self) -> u32 {
        (self.layer as u32 - 1) + self.control.follow_up_layers
    }

    /// Layer transitions, plus one scroll when below the fold, plus the click.
    pub fn interaction_cost(&self) -> u32 {
        self.transitions() + u32::from(!self.control.above_fold) + 1
    }

    /// Anchor text such as `L2#7:reject_all`.
    pub fn anchor(&self) -> String {
        format!("L{}#{}:{}", self.layer, self.control.order_index, self.control.kind.name())
    }
}

impl BannerDescriptor {
    pub fn check(&self) -> Result<(), BannerError> {
        if self.layers.is_empty() {
            return Err(BannerError::NoLayers);
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let mut seen = HashSet::new();
            for c in &layer.controls {
                if !seen.insert(c.order_index) {
                    return Err(BannerError::DuplicateOrderIndex { layer: i + 1, order_index: c.order_index });
                }
            }
        }
        Ok(())
    }

    /// Every control with its layer, layer by layer in `order_index` order.
    pub fn placed(&self) -> impl Iterator<Item = PlacedControl<'_>> {
        self.layers.iter().enumerate().flat_map(|(i, l)| {
            let mut controls: Vec<&Control> = l.controls.iter().collect();
            controls.sort_by_key(|c| c.order_index);
            controls.into_iter().map(move |control| PlacedControl { layer: i + 1, control })
        })
    }

    pub fn controls_of<'a>(&'a self, kind: &'a ControlKind) -> impl Iterator<Item = PlacedControl<'a>> + 'a {
        self.placed().filter(move |p| p.control.kind.name() == kind.name())
    }

    /// 1-based layer of the first control of the given kind.
    pub fn layer_of(&self, kind: &ControlKind) -> Option<usize> {
        self.controls_of(kind).map(|p| p.layer).next()
    }
}
