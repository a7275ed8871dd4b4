//! File formats and result bundles.
//!
//! Networks and scenarios are TOML documents with unit-suffixed keys
//! (pressures in MPa, the usual SI elsewhere); unknown keys are rejected.
//! A solve produces a JSON result bundle that embeds the inputs, the SI
//! solution, the market report, and the audit report, and round-trips
//! losslessly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    Compressor, GNode, GNodeKind, GasConstants, MarketScenario, Network, NetworkBuilder, Node,
    Participant, Pipe, SideDraw, ValidationReport,
};
use crate::pricing::MarketReport;
use crate::solver::Solution;
use crate::verify::KktReport;

const MPA: f64 = 1.0e6;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: network validation failed: {report}")]
    Validation { path: String, report: ValidationReport },
    #[error("{path}: {message}")]
    Scenario { path: String, message: String },
}

// ---------------------------------------------------------------------------
// network documents

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindDoc {
    NgSupplier,
    H2Supplier,
    FlexibleConsumer,
    FixedConsumer,
}

impl From<KindDoc> for GNodeKind {
    fn from(k: KindDoc) -> Self {
        match k {
            KindDoc::NgSupplier => GNodeKind::NgSupplier,
            KindDoc::H2Supplier => GNodeKind::H2Supplier,
            KindDoc::FlexibleConsumer => GNodeKind::FlexibleConsumer,
            KindDoc::FixedConsumer => GNodeKind::FixedConsumer,
        }
    }
}

impl From<GNodeKind> for KindDoc {
    fn from(k: GNodeKind) -> Self {
        match k {
            GNodeKind::NgSupplier => KindDoc::NgSupplier,
            GNodeKind::H2Supplier => KindDoc::H2Supplier,
            GNodeKind::FlexibleConsumer => KindDoc::FlexibleConsumer,
            GNodeKind::FixedConsumer => KindDoc::FixedConsumer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: String,
    pub min_pressure_mpa: f64,
    pub max_pressure_mpa: f64,
    pub min_h2_fraction: f64,
    pub max_h2_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack_pressure_mpa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipeDoc {
    pub from: String,
    pub to: String,
    pub friction: f64,
    pub length_m: f64,
    pub diameter_m: f64,
    pub area_m2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressorDoc {
    pub from: String,
    pub to: String,
    pub max_boost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GNodeDoc {
    pub id: String,
    pub node: String,
    pub kind: KindDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub pipes: Vec<PipeDoc>,
    #[serde(default)]
    pub compressors: Vec<CompressorDoc>,
    #[serde(default)]
    pub gnodes: Vec<GNodeDoc>,
}

impl NetworkDoc {
    pub fn from_network(net: &Network<f64>) -> Self {
        NetworkDoc {
            nodes: net
                .nodes()
                .iter()
                .map(|n| NodeDoc {
                    id: n.id.clone(),
                    min_pressure_mpa: n.min_pressure / MPA,
                    max_pressure_mpa: n.max_pressure / MPA,
                    min_h2_fraction: n.min_h2_fraction,
                    max_h2_fraction: n.max_h2_fraction,
                    slack_pressure_mpa: n.slack_pressure.map(|p| p / MPA),
                })
                .collect(),
            pipes: net
                .pipes()
                .iter()
                .map(|p| PipeDoc {
                    from: p.from.clone(),
                    to: p.to.clone(),
                    friction: p.friction,
                    length_m: p.length,
                    diameter_m: p.diameter,
                    area_m2: p.area,
                })
                .collect(),
            compressors: net
                .compressors()
                .iter()
                .map(|c| CompressorDoc {
                    from: c.from.clone(),
                    to: c.to.clone(),
                    max_boost: c.max_boost,
                })
                .collect(),
            gnodes: net
                .gnodes()
                .iter()
                .map(|g| GNodeDoc {
                    id: g.id.clone(),
                    node: g.node.clone(),
                    kind: g.kind.into(),
                })
                .collect(),
        }
    }

    pub fn into_network(self, path: &str) -> Result<Network<f64>, IoError> {
        let builder = NetworkBuilder {
            nodes: self
                .nodes
                .into_iter()
                .map(|n| Node {
                    id: n.id,
                    min_pressure: n.min_pressure_mpa * MPA,
                    max_pressure: n.max_pressure_mpa * MPA,
                    min_h2_fraction: n.min_h2_fraction,
                    max_h2_fraction: n.max_h2_fraction,
                    slack_pressure: n.slack_pressure_mpa.map(|p| p * MPA),
                })
                .collect(),
            pipes: self
                .pipes
                .into_iter()
                .map(|p| Pipe {
                    from: p.from,
                    to: p.to,
                    friction: p.friction,
                    length: p.length_m,
                    diameter: p.diameter_m,
                    area: p.area_m2,
                })
                .collect(),
            compressors: self
                .compressors
                .into_iter()
                .map(|c| Compressor {
                    from: c.from,
                    to: c.to,
                    max_boost: c.max_boost,
                })
                .collect(),
            gnodes: self
                .gnodes
                .into_iter()
                .map(|g| GNode {
                    id: g.id,
                    node: g.node,
                    kind: g.kind.into(),
                })
                .collect(),
        };
        builder.build().map_err(|report| IoError::Validation {
            path: path.to_string(),
            report,
        })
    }
}

/// Parses and validates a network file.
pub fn load_network(path: impl AsRef<Path>) -> Result<Network<f64>, IoError> {
    let path_str = path.as_ref().display().to_string();
    let text = std::fs::read_to_string(path.as_ref()).map_err(|source| IoError::Read {
        path: path_str.clone(),
        source,
    })?;
    let doc: NetworkDoc = toml::from_str(&text).map_err(|e| IoError::Parse {
        path: path_str.clone(),
        message: e.to_string(),
    })?;
    doc.into_network(&path_str)
}

/// Serializes a network to the file format.
pub fn network_to_toml(net: &Network<f64>) -> String {
    toml::to_string_pretty(&NetworkDoc::from_network(net)).expect("network serializes")
}

// ---------------------------------------------------------------------------
// scenario documents

fn default_cost_rate() -> f64 {
    0.13 / 3600.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefaultsDoc {
    /// Incentive for avoided CO₂ applied to every consumer [$/kgCO₂].
    #[serde(default)]
    pub co2_incentive: f64,
    /// Compressor drive cost [$/kW/s].
    #[serde(default = "default_cost_rate")]
    pub compressor_cost_rate: f64,
}

impl Default for DefaultsDoc {
    fn default() -> Self {
        DefaultsDoc {
            co2_incentive: 0.0,
            compressor_cost_rate: default_cost_rate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsDoc {
    pub r_h2_mj_per_kg: f64,
    pub r_ng_mj_per_kg: f64,
    pub zeta: f64,
    pub a_h2_m_per_s: f64,
    pub a_ng_m_per_s: f64,
    pub compressor_work_coeff: f64,
    pub compressor_work_exponent: f64,
}

impl Default for ConstantsDoc {
    fn default() -> Self {
        let c = GasConstants::<f64>::default();
        ConstantsDoc {
            r_h2_mj_per_kg: c.r_h2,
            r_ng_mj_per_kg: c.r_ng,
            zeta: c.zeta,
            a_h2_m_per_s: c.a_h2,
            a_ng_m_per_s: c.a_ng,
            compressor_work_coeff: c.k_comp,
            compressor_work_exponent: c.m_nom,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfferDoc {
    pub price_per_kg: f64,
    /// Omit for a quantity-unbounded offer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_supply_kg_per_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidDoc {
    pub price_per_mj: f64,
    pub max_energy_mj_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedDoc {
    pub energy_mj_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideDrawDoc {
    pub node: String,
    #[serde(default)]
    pub ng_kg_per_s: f64,
    #[serde(default)]
    pub h2_kg_per_s: f64,
    #[serde(default)]
    pub blend_kg_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default)]
    pub defaults: DefaultsDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub offers: BTreeMap<String, OfferDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bids: BTreeMap<String, BidDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fixed: BTreeMap<String, FixedDoc>,
    /// Per-gNode CO₂ incentive overrides [$/kgCO₂].
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub incentives: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub side_draws: Vec<SideDrawDoc>,
}

impl ScenarioDoc {
    pub fn from_scenario(net: &Network<f64>, scen: &MarketScenario<f64>) -> Self {
        let mut doc = ScenarioDoc::default();
        doc.defaults.compressor_cost_rate = scen.compressor_cost_rate;
        let c = GasConstants::<f64>::default();
        if scen.constants != c {
            doc.constants = Some(ConstantsDoc {
                r_h2_mj_per_kg: scen.constants.r_h2,
                r_ng_mj_per_kg: scen.constants.r_ng,
                zeta: scen.constants.zeta,
                a_h2_m_per_s: scen.constants.a_h2,
                a_ng_m_per_s: scen.constants.a_ng,
                compressor_work_coeff: scen.constants.k_comp,
                compressor_work_exponent: scen.constants.m_nom,
            });
        }
        // the most common incentive becomes the default; the rest override
        let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
        for (m, _) in net.gnodes().iter().enumerate() {
            *counts.entry(scen.co2_incentive[m].to_bits()).or_default() += 1;
        }
        let default_bits = counts
            .iter()
            .max_by_key(|(_, n)| **n)
            .map(|(b, _)| *b)
            .unwrap_or(0);
        doc.defaults.co2_incentive = f64::from_bits(default_bits);
        for (m, g) in net.gnodes().iter().enumerate() {
            if scen.co2_incentive[m].to_bits() != default_bits {
                doc.incentives.insert(g.id.clone(), scen.co2_incentive[m]);
            }
            match &scen.participants[m] {
                Participant::NgSupplier {
                    offer_price,
                    max_supply,
                }
                | Participant::H2Supplier {
                    offer_price,
                    max_supply,
                } => {
                    doc.offers.insert(
                        g.id.clone(),
                        OfferDoc {
                            price_per_kg: *offer_price,
                            max_supply_kg_per_s: *max_supply,
                        },
                    );
                }
                Participant::FlexibleConsumer {
                    bid_price,
                    max_energy,
                } => {
                    doc.bids.insert(
                        g.id.clone(),
                        BidDoc {
                            price_per_mj: *bid_price,
                            max_energy_mj_per_s: *max_energy,
                        },
                    );
                }
                Participant::FixedConsumer { energy } => {
                    doc.fixed.insert(
                        g.id.clone(),
                        FixedDoc {
                            energy_mj_per_s: *energy,
                        },
                    );
                }
            }
        }
        doc.side_draws = scen
            .side_draws
            .iter()
            .map(|d| SideDrawDoc {
                node: net.nodes()[d.node].id.clone(),
                ng_kg_per_s: d.ng,
                h2_kg_per_s: d.h2,
                blend_kg_per_s: d.blend,
            })
            .collect();
        doc
    }

    pub fn into_scenario(
        self,
        net: &Network<f64>,
        path: &str,
    ) -> Result<MarketScenario<f64>, IoError> {
        let err = |message: String| IoError::Scenario {
            path: path.to_string(),
            message,
        };
        for id in self
            .offers
            .keys()
            .chain(self.bids.keys())
            .chain(self.fixed.keys())
            .chain(self.incentives.keys())
        {
            if net.gnode_index(id).is_none() {
                return Err(err(format!("scenario references unknown gNode `{id}`")));
            }
        }
        let mut participants = Vec::with_capacity(net.gnodes().len());
        for g in net.gnodes() {
            let p = match g.kind {
                GNodeKind::NgSupplier => {
                    let o = self
                        .offers
                        .get(&g.id)
                        .ok_or_else(|| err(format!("no offer for NG supplier `{}`", g.id)))?;
                    Participant::NgSupplier {
                        offer_price: o.price_per_kg,
                        max_supply: o.max_supply_kg_per_s,
                    }
                }
                GNodeKind::H2Supplier => {
                    let o = self
                        .offers
                        .get(&g.id)
                        .ok_or_else(|| err(format!("no offer for H2 supplier `{}`", g.id)))?;
                    Participant::H2Supplier {
                        offer_price: o.price_per_kg,
                        max_supply: o.max_supply_kg_per_s,
                    }
                }
                GNodeKind::FlexibleConsumer => {
                    let b = self
                        .bids
                        .get(&g.id)
                        .ok_or_else(|| err(format!("no bid for consumer `{}`", g.id)))?;
                    Participant::FlexibleConsumer {
                        bid_price: b.price_per_mj,
                        max_energy: b.max_energy_mj_per_s,
                    }
                }
                GNodeKind::FixedConsumer => {
                    let fdoc = self
                        .fixed
                        .get(&g.id)
                        .ok_or_else(|| err(format!("no fixed demand for consumer `{}`", g.id)))?;
                    Participant::FixedConsumer {
                        energy: fdoc.energy_mj_per_s,
                    }
                }
            };
            participants.push(p);
        }
        let co2_incentive = net
            .gnodes()
            .iter()
            .map(|g| {
                self.incentives
                    .get(&g.id)
                    .copied()
                    .unwrap_or(self.defaults.co2_incentive)
            })
            .collect();
        let constants = match &self.constants {
            None => GasConstants::default(),
            Some(c) => GasConstants {
                r_h2: c.r_h2_mj_per_kg,
                r_ng: c.r_ng_mj_per_kg,
                zeta: c.zeta,
                a_h2: c.a_h2_m_per_s,
                a_ng: c.a_ng_m_per_s,
                k_comp: c.compressor_work_coeff,
                m_nom: c.compressor_work_exponent,
                weymouth_factor: 1.0,
            },
        };
        let mut side_draws = Vec::new();
        for d in &self.side_draws {
            let node = net
                .node_index(&d.node)
                .ok_or_else(|| err(format!("side draw references unknown node `{}`", d.node)))?;
            side_draws.push(SideDraw {
                node,
                ng: d.ng_kg_per_s,
                h2: d.h2_kg_per_s,
                blend: d.blend_kg_per_s,
            });
        }
        let scen = MarketScenario {
            participants,
            co2_incentive,
            compressor_cost_rate: self.defaults.compressor_cost_rate,
            constants,
            side_draws,
        };
        scen.validate(net)
            .map_err(|e| err(format!("scenario validation failed: {e}")))?;
        Ok(scen)
    }
}

/// Parses a scenario file against an already-loaded network.
pub fn load_scenario(
    path: impl AsRef<Path>,
    net: &Network<f64>,
) -> Result<MarketScenario<f64>, IoError> {
    let path_str = path.as_ref().display().to_string();
    let text = std::fs::read_to_string(path.as_ref()).map_err(|source| IoError::Read {
        path: path_str.clone(),
        source,
    })?;
    let doc: ScenarioDoc = toml::from_str(&text).map_err(|e| IoError::Parse {
        path: path_str.clone(),
        message: e.to_string(),
    })?;
    doc.into_scenario(net, &path_str)
}

/// Serializes a scenario to the file format.
pub fn scenario_to_toml(net: &Network<f64>, scen: &MarketScenario<f64>) -> String {
    toml::to_string_pretty(&ScenarioDoc::from_scenario(net, scen)).expect("scenario serializes")
}

// ---------------------------------------------------------------------------
// result bundles

pub const BUNDLE_SCHEMA: &str = "blendmarket/bundle/v1";

/// Machine-readable record of one solve: inputs, SI solution, market
/// report, and audit outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultBundle {
    pub schema: String,
    pub network: NetworkDoc,
    pub scenario: ScenarioDoc,
    /// KKT tolerance the solve ran at (scaled units).
    pub tolerance: f64,
    pub solution: Solution<f64>,
    pub report: MarketReport<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kkt: Option<KktReport<f64>>,
}

impl ResultBundle {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn from_json(text: &str, path: &str) -> Result<Self, IoError> {
        let bundle: ResultBundle = serde_json::from_str(text).map_err(|e| IoError::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        if bundle.schema != BUNDLE_SCHEMA {
            return Err(IoError::Parse {
                path: path.to_string(),
                message: format!("unsupported bundle schema `{}`", bundle.schema),
            });
        }
        Ok(bundle)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IoError> {
        let path_str = path.as_ref().display().to_string();
        let text = std::fs::read_to_string(path.as_ref()).map_err(|source| IoError::Read {
            path: path_str.clone(),
            source,
        })?;
        Self::from_json(&text, &path_str)
    }

    /// Rebuilds the domain objects embedded in the bundle.
    pub fn rebuild(&self) -> Result<(Network<f64>, MarketScenario<f64>), IoError> {
        let net = self.network.clone().into_network("bundle.network")?;
        let scen = self.scenario.clone().into_scenario(&net, "bundle.scenario")?;
        Ok((net, scen))
    }
}

// ---------------------------------------------------------------------------
// human-readable tables

fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        format!("{v:.4}")
    } else {
        format!("{v:.3e}")
    }
}

/// Per-node and per-gNode tables plus the aggregate block.
pub fn render_table(report: &MarketReport<f64>) -> String {
    let mut out = String::new();
    out.push_str("Nodes (pressure in table exports comes from the solution bundle):\n");
    out.push_str(
        "node | gamma [-] | CI [kgCO2/MJ] | lambda_NG [$/kg] | lambda_H2 [$/kg] | lambda [$/kg] | lambda_e [$/MJ]\n",
    );
    for n in &report.nodal.per_node {
        let h2 = if n.h2_supported {
            fmt_sig(n.lambda_h2)
        } else {
            "-".into()
        };
        out.push_str(&format!(
            "{} | {} | {} | {} | {} | {} | {}\n",
            n.node,
            fmt_sig(n.gamma),
            fmt_sig(n.carbon_intensity),
            fmt_sig(n.lambda_ng),
            h2,
            fmt_sig(n.lambda_blend),
            fmt_sig(n.lambda_energy),
        ));
    }
    out.push_str("\ngNodes:\n");
    out.push_str(
        "gnode | node | flow [kg/s] | energy [MJ/s] | lambda_e [$/MJ] | lambda_c [$/MJ] | lambda_d [$/MJ] | credit [$/s]\n",
    );
    for c in &report.consumers {
        out.push_str(&format!(
            "{} | {} | {} | {} | {} | {} | {} | {}\n",
            c.gnode,
            c.node,
            fmt_sig(c.demand),
            fmt_sig(c.energy),
            fmt_sig(c.lambda_energy),
            fmt_sig(c.revenue_component),
            fmt_sig(c.decarb_premium),
            fmt_sig(c.credit),
        ));
    }
    out.push_str("\nAggregates:\n");
    let o = &report.objective;
    out.push_str(&format!(
        "Total NG Delivered [kg/s]            : {}\n\
         Total H2 Delivered [kg/s]            : {}\n\
         Total Energy Delivered [MJ/s]        : {}\n\
         Average Carbon Intensity [kgCO2/MJ]  : {}\n\
         Total CO2 [kgCO2/s]                  : {}\n\
         Market Revenue J_MR [$/s]            : {}\n\
         Carbon Emission Incentives J_CEM [$/s]: {}\n\
         Gas Compression Cost J_GC [$/s]      : {}\n\
         Total Economic Value J_EV [$/s]      : {}\n\
         Total Pass-Through Credits D_PTC [$/s]: {}\n",
        fmt_sig(report.total_ng_delivered),
        fmt_sig(report.total_h2_delivered),
        fmt_sig(report.total_energy_delivered),
        fmt_sig(report.average_carbon_intensity),
        fmt_sig(report.total_co2),
        fmt_sig(o.market_revenue),
        fmt_sig(o.emission_incentives),
        fmt_sig(o.compression_cost),
        fmt_sig(o.economic_value),
        fmt_sig(report.d_ptc),
    ));
    out
}

/// CSV export: one row per node, one row per consumer gNode, then the
/// aggregate block; numeric headers carry units.
pub fn render_csv(report: &MarketReport<f64>) -> String {
    let mut out = String::new();
    out.push_str(
        "node,gamma,ci_kgco2_per_mj,lambda_ng_usd_per_kg,lambda_h2_usd_per_kg,h2_supported,lambda_usd_per_kg,lambda_e_usd_per_mj\n",
    );
    for n in &report.nodal.per_node {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            n.node,
            n.gamma,
            n.carbon_intensity,
            n.lambda_ng,
            n.lambda_h2,
            n.h2_supported,
            n.lambda_blend,
            n.lambda_energy
        ));
    }
    out.push('\n');
    out.push_str(
        "gnode,node,flow_kg_per_s,energy_mj_per_s,lambda_e_usd_per_mj,lambda_c_usd_per_mj,lambda_d_usd_per_mj,credit_usd_per_s\n",
    );
    for c in &report.consumers {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            c.gnode,
            c.node,
            c.demand,
            c.energy,
            c.lambda_energy,
            c.revenue_component,
            c.decarb_premium,
            c.credit
        ));
    }
    out.push('\n');
    out.push_str("aggregate,value\n");
    let o = &report.objective;
    for (name, v) in [
        ("total_ng_delivered_kg_per_s", report.total_ng_delivered),
        ("total_h2_delivered_kg_per_s", report.total_h2_delivered),
        ("total_energy_delivered_mj_per_s", report.total_energy_delivered),
        (
            "average_carbon_intensity_kgco2_per_mj",
            report.average_carbon_intensity,
        ),
        ("total_co2_kgco2_per_s", report.total_co2),
        ("j_mr_usd_per_s", o.market_revenue),
        ("j_cem_usd_per_s", o.emission_incentives),
        ("j_gc_usd_per_s", o.compression_cost),
        ("j_ev_usd_per_s", o.economic_value),
        ("d_ptc_usd_per_s", report.d_ptc),
    ] {
        out.push_str(&format!("{name},{v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    #[test]
    fn network_round_trip_is_field_exact() {
        let net = bundled::eight_node_network();
        let text = network_to_toml(&net);
        let doc: NetworkDoc = toml::from_str(&text).unwrap();
        let reloaded = doc.into_network("mem").unwrap();
        assert_eq!(net.nodes(), reloaded.nodes());
        assert_eq!(net.pipes(), reloaded.pipes());
        assert_eq!(net.compressors(), reloaded.compressors());
        assert_eq!(net.gnodes(), reloaded.gnodes());
    }

    #[test]
    fn scenario_round_trip_is_field_exact() {
        let net = bundled::eight_node_network();
        let scen = bundled::eight_node_scenario(&net, 0.055);
        let text = scenario_to_toml(&net, &scen);
        let doc: ScenarioDoc = toml::from_str(&text).unwrap();
        let reloaded = doc.into_scenario(&net, "mem").unwrap();
        assert_eq!(scen, reloaded);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let net = bundled::eight_node_network();
        let mut text = scenario_to_toml(&net, &bundled::eight_node_scenario(&net, 0.0));
        text.push_str("\n[unknown_section]\nx = 1\n");
        let r: Result<ScenarioDoc, _> = toml::from_str(&text);
        assert!(r.is_err());
    }

    #[test]
    fn unknown_gnode_is_named_in_error() {
        let net = bundled::eight_node_network();
        let mut doc = ScenarioDoc::from_scenario(&net, &bundled::eight_node_scenario(&net, 0.0));
        doc.bids.insert(
            "D9".into(),
            BidDoc {
                price_per_mj: 0.01,
                max_energy_mj_per_s: 1.0,
            },
        );
        let e = doc.into_scenario(&net, "mem").unwrap_err().to_string();
        assert!(e.contains("D9"), "error should name the id: {e}");
    }

    #[test]
    fn empty_network_file_reports_position() {
        let doc: Result<NetworkDoc, _> = toml::from_str("");
        let msg = doc.unwrap_err().to_string();
        assert!(
            msg.contains("line") || msg.contains("column") || msg.contains("missing"),
            "parse error should locate the problem: {msg}"
        );
    }
}
