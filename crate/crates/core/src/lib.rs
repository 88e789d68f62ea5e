pub mod bits;
pub mod codec;
pub mod domain;
pub mod flow_sim;
pub mod rules;
pub mod vendor_list;
pub mod receipt;
pub mod tracker_class;
