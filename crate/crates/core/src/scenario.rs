//! Network edits (bypasses, closures, upgrades) evaluated against a base
//! network under fixed weights.

use crate::error::{Error, Result};
use crate::network::{Link, Network};

#[derive(Clone, Debug, PartialEq)]
pub enum NetworkEdit {
    AddLink(Link),
    RemoveLink {
        link_id: String,
    },
    ModifyLink {
        link_id: String,
        t0: Option<f64>,
        q_max: Option<f64>,
        alpha1: Option<f64>,
        alpha2: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub edits: Vec<NetworkEdit>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, edits: Vec<NetworkEdit>) -> Self {
        Self {
            name: name.into(),
            edits,
        }
    }
}

/// Apply the edits to a copy of `base` and revalidate it.
pub fn apply_scenario(base: &Network, scenario: &Scenario) -> Result<Network> {
    let (nodes, mut links, anchors) = base.clone().into_parts();
    let find = |links: &[Link], id: &str| {
        links.iter().position(|l| l.link_id == id).ok_or_else(|| {
            Error::Config(format!("scenario {}: unknown link {id}", scenario.name))
        })
    };
    for edit in &scenario.edits {
        match edit {
            NetworkEdit::AddLink(link) => {
                if links.iter().any(|l| l.link_id == link.link_id) {
                    return Err(Error::Config(format!(
                        "scenario {}: link {} already exists",
                        scenario.name, link.link_id
                    )));
                }
                for node in [&link.from_node, &link.to_node] {
                    if base.node_index(node).is_none() {
                        return Err(Error::Config(format!(
                            "scenario {}: link {} references unknown node {node}",
                            scenario.name, link.link_id
                        )));
                    }
                }
                links.push(link.clone());
            }
            NetworkEdit::RemoveLink { link_id } => {
                let i = find(&links, link_id)?;
                links.remove(i);
            }
            NetworkEdit::ModifyLink {
                link_id,
                t0,
                q_max,
                alpha1,
                alpha2,
            } => {
                let i = find(&links, link_id)?;
                let link = &mut links[i];
                if let Some(v) = t0 {
                    link.t0 = *v;
                }
                if let Some(v) = q_max {
                    link.q_max = *v;
                }
                if let Some(v) = alpha1 {
                    link.alpha1 = *v;
                }
                if let Some(v) = alpha2 {
                    link.alpha2 = *v;
                }
            }
        }
    }
    Network::validated(nodes, links, anchors)
}
