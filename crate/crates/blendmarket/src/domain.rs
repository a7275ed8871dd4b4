//! Data model for the pipeline network and the market participants.
//!
//! A network is a connected directed graph of physical junctions joined by
//! pipes and compressor stations. Market participants (gNodes) attach to
//! physical nodes and either inject natural gas or hydrogen, or withdraw the
//! blended gas. Closed-form blend quantities (calorific value, avoided
//! emissions, carbon intensity) live on [`GasConstants`].
//!
//! Everything here is immutable after construction and safe to share across
//! concurrent scenario solves.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::scalar::{lit, Real};

/// Physical junction with pressure and hydrogen-fraction limits.
///
/// `slack_pressure` is present iff the node anchors the boundary-value
/// problem with an externally fixed pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct Node<T> {
    pub id: String,
    /// Minimum operational pressure [Pa].
    pub min_pressure: T,
    /// Maximum operational pressure [Pa]; bounds compressor discharge into
    /// this node.
    pub max_pressure: T,
    /// Minimum hydrogen mass fraction [-].
    pub min_h2_fraction: T,
    /// Maximum hydrogen mass fraction [-].
    pub max_h2_fraction: T,
    /// Fixed pressure [Pa] if this is a slack node.
    pub slack_pressure: Option<T>,
}

/// Pipe segment modeled by the steady-state friction-dominated relation
/// between endpoint pressures and mass flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipe<T> {
    pub from: String,
    pub to: String,
    /// Friction factor [-].
    pub friction: T,
    /// Length [m].
    pub length: T,
    /// Diameter [m].
    pub diameter: T,
    /// Cross-sectional area [m²].
    pub area: T,
}

/// Compressor station boosting pressure from suction to discharge.
#[derive(Debug, Clone, PartialEq)]
pub struct Compressor<T> {
    pub from: String,
    pub to: String,
    /// Maximum boost ratio, at least 1.
    pub max_boost: T,
}

/// Role of a market participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GNodeKind {
    NgSupplier,
    H2Supplier,
    FlexibleConsumer,
    FixedConsumer,
}

impl fmt::Display for GNodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GNodeKind::NgSupplier => "ng-supplier",
            GNodeKind::H2Supplier => "h2-supplier",
            GNodeKind::FlexibleConsumer => "flexible-consumer",
            GNodeKind::FixedConsumer => "fixed-consumer",
        };
        f.write_str(s)
    }
}

/// Market participant bound to a physical node. Several gNodes may share
/// one physical node.
#[derive(Debug, Clone, PartialEq)]
pub struct GNode {
    pub id: String,
    pub node: String,
    pub kind: GNodeKind,
}

/// Unvalidated collection of network components.
///
/// [`validate_network`] reports every structural defect it can find;
/// [`NetworkBuilder::build`] resolves ids and derives adjacency, failing
/// with the same report when any issue is present.
#[derive(Debug, Clone, Default)]
pub struct NetworkBuilder<T> {
    pub nodes: Vec<Node<T>>,
    pub pipes: Vec<Pipe<T>>,
    pub compressors: Vec<Compressor<T>>,
    pub gnodes: Vec<GNode>,
}

/// A structural defect found during validation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Issue {
    #[error("duplicate node id `{0}`")]
    DuplicateNodeId(String),
    #[error("duplicate gNode id `{0}`")]
    DuplicateGNodeId(String),
    #[error("{entity} references missing node id `{id}`")]
    DanglingNodeId { entity: String, id: String },
    #[error("{entity} is a self-loop at `{id}`")]
    SelfLoop { entity: String, id: String },
    #[error("node `{0}`: pressure bounds must satisfy 0 < min <= max")]
    BadPressureBounds(String),
    #[error("node `{0}`: hydrogen fraction bounds must satisfy 0 <= min <= max <= 1")]
    BadFractionBounds(String),
    #[error("node `{0}`: slack pressure outside [min_pressure, max_pressure]")]
    SlackPressureOutOfBounds(String),
    #[error("{entity}: field `{field}` must be positive")]
    NonPositive { entity: String, field: String },
    #[error("compressor {0}: max_boost must be at least 1")]
    BoostBelowOne(String),
    #[error("network has no slack node")]
    NoSlackNode,
    #[error("node `{0}` is disconnected from the rest of the network")]
    Disconnected(String),
    #[error("consumer gNode `{0}` is not reachable from any supplier along edge orientations")]
    UnreachableConsumer(String),
}

/// Outcome of structural validation; empty issue list means valid.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "network valid");
        }
        writeln!(f, "{} issue(s):", self.issues.len())?;
        for issue in &self.issues {
            writeln!(f, "  - {issue}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of the component lists.
///
/// Returns an empty report iff all type invariants hold, the graph is
/// connected with at least one slack node, ids resolve, and every consumer
/// gNode is reachable from some supplier gNode along edge orientations.
pub fn validate_network<T: Real>(parts: &NetworkBuilder<T>) -> ValidationReport {
    let mut issues = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (j, node) in parts.nodes.iter().enumerate() {
        if index.insert(node.id.as_str(), j).is_some() {
            issues.push(Issue::DuplicateNodeId(node.id.clone()));
        }
        if !(node.min_pressure > T::zero() && node.min_pressure <= node.max_pressure) {
            issues.push(Issue::BadPressureBounds(node.id.clone()));
        }
        if !(node.min_h2_fraction >= T::zero()
            && node.min_h2_fraction <= node.max_h2_fraction
            && node.max_h2_fraction <= T::one())
        {
            issues.push(Issue::BadFractionBounds(node.id.clone()));
        }
        if let Some(sigma) = node.slack_pressure {
            if sigma < node.min_pressure || sigma > node.max_pressure {
                issues.push(Issue::SlackPressureOutOfBounds(node.id.clone()));
            }
        }
    }

    let check_endpoint = |entity: String, id: &str, issues: &mut Vec<Issue>| -> Option<usize> {
        match index.get(id) {
            Some(&j) => Some(j),
            None => {
                issues.push(Issue::DanglingNodeId {
                    entity,
                    id: id.to_string(),
                });
                None
            }
        }
    };

    // Undirected adjacency for the connectivity check, directed for
    // reachability.
    let n = parts.nodes.len();
    let mut undirected: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut directed: Vec<Vec<usize>> = vec![Vec::new(); n];
    let add_edge = |entity: String,
                        from: &str,
                        to: &str,
                        issues: &mut Vec<Issue>,
                        undirected: &mut Vec<Vec<usize>>,
                        directed: &mut Vec<Vec<usize>>| {
        let i = check_endpoint(format!("{entity} endpoint `from`"), from, issues);
        let j = check_endpoint(format!("{entity} endpoint `to`"), to, issues);
        if from == to {
            issues.push(Issue::SelfLoop {
                entity,
                id: from.to_string(),
            });
            return;
        }
        if let (Some(i), Some(j)) = (i, j) {
            undirected[i].push(j);
            undirected[j].push(i);
            directed[i].push(j);
        }
    };

    for (k, pipe) in parts.pipes.iter().enumerate() {
        let entity = format!("pipe #{k} ({}->{})", pipe.from, pipe.to);
        for (field, value) in [
            ("friction", pipe.friction),
            ("length", pipe.length),
            ("diameter", pipe.diameter),
            ("area", pipe.area),
        ] {
            if value <= T::zero() {
                issues.push(Issue::NonPositive {
                    entity: entity.clone(),
                    field: field.to_string(),
                });
            }
        }
        add_edge(
            entity,
            &pipe.from,
            &pipe.to,
            &mut issues,
            &mut undirected,
            &mut directed,
        );
    }
    for (k, comp) in parts.compressors.iter().enumerate() {
        let entity = format!("compressor #{k} ({}->{})", comp.from, comp.to);
        if comp.max_boost < T::one() {
            issues.push(Issue::BoostBelowOne(entity.clone()));
        }
        add_edge(
            entity,
            &comp.from,
            &comp.to,
            &mut issues,
            &mut undirected,
            &mut directed,
        );
    }

    let mut gnode_ids: HashMap<&str, ()> = HashMap::new();
    for g in &parts.gnodes {
        if gnode_ids.insert(g.id.as_str(), ()).is_some() {
            issues.push(Issue::DuplicateGNodeId(g.id.clone()));
        }
        if !index.contains_key(g.node.as_str()) {
            issues.push(Issue::DanglingNodeId {
                entity: format!("gNode `{}`", g.id),
                id: g.node.clone(),
            });
        }
    }

    if !parts.nodes.iter().any(|n| n.slack_pressure.is_some()) {
        issues.push(Issue::NoSlackNode);
    }

    // Connectivity: breadth-first from node 0 over undirected edges.
    if n > 0 {
        let mut seen = vec![false; n];
        let mut queue = vec![0usize];
        seen[0] = true;
        while let Some(j) = queue.pop() {
            for &k in &undirected[j] {
                if !seen[k] {
                    seen[k] = true;
                    queue.push(k);
                }
            }
        }
        for (j, node) in parts.nodes.iter().enumerate() {
            if !seen[j] {
                issues.push(Issue::Disconnected(node.id.clone()));
            }
        }
    }

    // Consumers must be reachable from some supplier along edge orientations.
    let mut reach = vec![false; n];
    let mut queue: Vec<usize> = Vec::new();
    for g in &parts.gnodes {
        if matches!(g.kind, GNodeKind::NgSupplier | GNodeKind::H2Supplier) {
            if let Some(&j) = index.get(g.node.as_str()) {
                if !reach[j] {
                    reach[j] = true;
                    queue.push(j);
                }
            }
        }
    }
    while let Some(j) = queue.pop() {
        for &k in &directed[j] {
            if !reach[k] {
                reach[k] = true;
                queue.push(k);
            }
        }
    }
    for g in &parts.gnodes {
        if matches!(
            g.kind,
            GNodeKind::FlexibleConsumer | GNodeKind::FixedConsumer
        ) {
            if let Some(&j) = index.get(g.node.as_str()) {
                if !reach[j] {
                    issues.push(Issue::UnreachableConsumer(g.id.clone()));
                }
            }
        }
    }

    ValidationReport { issues }
}

impl<T: Real> NetworkBuilder<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            pipes: Vec::new(),
            compressors: Vec::new(),
            gnodes: Vec::new(),
        }
    }

    /// Validates and resolves into an immutable [`Network`].
    pub fn build(self) -> Result<Network<T>, ValidationReport> {
        let report = validate_network(&self);
        if !report.is_valid() {
            return Err(report);
        }
        let index: HashMap<String, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(j, n)| (n.id.clone(), j))
            .collect();
        let n = self.nodes.len();
        let n_pipes = self.pipes.len();
        let pipe_ends: Vec<(usize, usize)> = self
            .pipes
            .iter()
            .map(|p| (index[&p.from], index[&p.to]))
            .collect();
        let comp_ends: Vec<(usize, usize)> = self
            .compressors
            .iter()
            .map(|c| (index[&c.from], index[&c.to]))
            .collect();

        let mut incoming = vec![Vec::new(); n];
        let mut outgoing = vec![Vec::new(); n];
        for (e, &(i, j)) in pipe_ends.iter().chain(comp_ends.iter()).enumerate() {
            outgoing[i].push(e);
            incoming[j].push(e);
        }
        let mut gnodes_at = vec![Vec::new(); n];
        let mut ng_suppliers = Vec::new();
        let mut h2_suppliers = Vec::new();
        let mut flexible_consumers = Vec::new();
        let mut fixed_consumers = Vec::new();
        for (m, g) in self.gnodes.iter().enumerate() {
            gnodes_at[index[&g.node]].push(m);
            match g.kind {
                GNodeKind::NgSupplier => ng_suppliers.push(m),
                GNodeKind::H2Supplier => h2_suppliers.push(m),
                GNodeKind::FlexibleConsumer => flexible_consumers.push(m),
                GNodeKind::FixedConsumer => fixed_consumers.push(m),
            }
        }
        let slack_nodes = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.slack_pressure.is_some())
            .map(|(j, _)| j)
            .collect();
        let gnode_node = self.gnodes.iter().map(|g| index[&g.node]).collect();

        Ok(Network {
            nodes: self.nodes,
            pipes: self.pipes,
            compressors: self.compressors,
            gnodes: self.gnodes,
            node_index: index,
            pipe_ends,
            comp_ends,
            n_pipes,
            incoming,
            outgoing,
            gnodes_at,
            gnode_node,
            ng_suppliers,
            h2_suppliers,
            flexible_consumers,
            fixed_consumers,
            slack_nodes,
        })
    }
}

/// Validated, id-resolved pipeline network with derived adjacency.
///
/// Edges are indexed with pipes first (`0..n_pipes()`) followed by
/// compressors; several derived index lists fix the deterministic ordering
/// used by problem assembly, solutions, and reports.
#[derive(Debug, Clone)]
pub struct Network<T> {
    nodes: Vec<Node<T>>,
    pipes: Vec<Pipe<T>>,
    compressors: Vec<Compressor<T>>,
    gnodes: Vec<GNode>,
    node_index: HashMap<String, usize>,
    pipe_ends: Vec<(usize, usize)>,
    comp_ends: Vec<(usize, usize)>,
    n_pipes: usize,
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
    gnodes_at: Vec<Vec<usize>>,
    gnode_node: Vec<usize>,
    ng_suppliers: Vec<usize>,
    h2_suppliers: Vec<usize>,
    flexible_consumers: Vec<usize>,
    fixed_consumers: Vec<usize>,
    slack_nodes: Vec<usize>,
}

impl<T: Real> Network<T> {
    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }
    pub fn pipes(&self) -> &[Pipe<T>] {
        &self.pipes
    }
    pub fn compressors(&self) -> &[Compressor<T>] {
        &self.compressors
    }
    pub fn gnodes(&self) -> &[GNode] {
        &self.gnodes
    }
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
    pub fn n_pipes(&self) -> usize {
        self.n_pipes
    }
    pub fn n_compressors(&self) -> usize {
        self.compressors.len()
    }
    /// Pipes and compressors combined; pipe edges come first.
    pub fn n_edges(&self) -> usize {
        self.n_pipes + self.compressors.len()
    }
    pub fn is_compressor_edge(&self, e: usize) -> bool {
        e >= self.n_pipes
    }
    /// Endpoints (from, to) of unified edge `e`.
    pub fn edge_ends(&self, e: usize) -> (usize, usize) {
        if e < self.n_pipes {
            self.pipe_ends[e]
        } else {
            self.comp_ends[e - self.n_pipes]
        }
    }
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }
    pub fn gnode_index(&self, id: &str) -> Option<usize> {
        self.gnodes.iter().position(|g| g.id == id)
    }
    /// Physical node hosting gNode `m`.
    pub fn gnode_node(&self, m: usize) -> usize {
        self.gnode_node[m]
    }
    /// Incoming edge ids at node `j`.
    pub fn incoming(&self, j: usize) -> &[usize] {
        &self.incoming[j]
    }
    /// Outgoing edge ids at node `j`.
    pub fn outgoing(&self, j: usize) -> &[usize] {
        &self.outgoing[j]
    }
    /// gNodes co-located at node `j`.
    pub fn gnodes_at(&self, j: usize) -> &[usize] {
        &self.gnodes_at[j]
    }
    pub fn ng_suppliers(&self) -> &[usize] {
        &self.ng_suppliers
    }
    pub fn h2_suppliers(&self) -> &[usize] {
        &self.h2_suppliers
    }
    pub fn flexible_consumers(&self) -> &[usize] {
        &self.flexible_consumers
    }
    pub fn fixed_consumers(&self) -> &[usize] {
        &self.fixed_consumers
    }
    pub fn slack_nodes(&self) -> &[usize] {
        &self.slack_nodes
    }
    /// All consumer gNode indices, flexible first then fixed.
    pub fn consumers(&self) -> impl Iterator<Item = usize> + '_ {
        self.flexible_consumers
            .iter()
            .chain(self.fixed_consumers.iter())
            .copied()
    }
}

/// Rejected input to one of the blend-quantity formulas.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("hydrogen mass fraction {0} outside [0, 1]")]
    FractionOutOfRange(f64),
    #[error("mass flow {0} must be nonnegative")]
    NegativeFlow(f64),
    #[error("{field} must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
}

/// Physical constants of the gas blend and the compressor cost model.
///
/// `weymouth_factor` multiplies the pipe-flow coefficient; it is 1 in SI
/// units and carries the velocity ratio introduced by non-dimensionalization.
#[derive(Debug, Clone, PartialEq)]
pub struct GasConstants<T> {
    /// Calorific value of hydrogen [MJ/kg].
    pub r_h2: T,
    /// Calorific value of natural gas [MJ/kg].
    pub r_ng: T,
    /// Ratio of molecular weights CO₂:CH₄ [-].
    pub zeta: T,
    /// Wave speed in hydrogen [m/s].
    pub a_h2: T,
    /// Wave speed in natural gas [m/s].
    pub a_ng: T,
    /// Compressor work coefficient [kJ/kg].
    pub k_comp: T,
    /// Compressor work exponent [-].
    pub m_nom: T,
    /// Pipe-flow coefficient prefactor [-].
    pub weymouth_factor: T,
}

impl<T: Real> Default for GasConstants<T> {
    fn default() -> Self {
        GasConstants {
            r_h2: lit(141.8),
            r_ng: lit(44.2),
            zeta: lit(44.0 / 16.0),
            a_h2: lit(1090.0),
            a_ng: lit(370.0),
            k_comp: lit(22.18),
            m_nom: lit(0.325),
            weymouth_factor: T::one(),
        }
    }
}

impl<T: Real> GasConstants<T> {
    fn check_fraction(&self, gamma: T) -> Result<(), DomainError> {
        if gamma < T::zero() || gamma > T::one() {
            return Err(DomainError::FractionOutOfRange(
                gamma.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(())
    }

    /// Calorific value R(γ) of the blend [MJ/kg], affine between the pure
    /// natural-gas and pure-hydrogen endpoints.
    pub fn calorific_value(&self, gamma: T) -> Result<T, DomainError> {
        self.check_fraction(gamma)?;
        Ok(self.calorific_value_unchecked(gamma))
    }

    #[inline]
    pub(crate) fn calorific_value_unchecked(&self, gamma: T) -> T {
        self.r_h2 * gamma + self.r_ng * (T::one() - gamma)
    }

    /// Emission intensity of displaced natural gas per unit of hydrogen mass
    /// delivered: (R_H₂/R_NG)·ζ [kgCO₂/kg H₂].
    #[inline]
    pub fn emission_factor(&self) -> T {
        self.r_h2 / self.r_ng * self.zeta
    }

    /// Avoided CO₂ emissions E for withdrawal `d` [kg/s] at hydrogen mass
    /// fraction γ [kgCO₂/s].
    pub fn avoided_emissions(&self, d: T, gamma: T) -> Result<T, DomainError> {
        self.check_fraction(gamma)?;
        if d < T::zero() {
            return Err(DomainError::NegativeFlow(d.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(d * gamma * self.emission_factor())
    }

    /// CO₂ emitted per MJ of delivered blend: (1-γ)·ζ / R(γ) [kgCO₂/MJ].
    pub fn carbon_intensity(&self, gamma: T) -> Result<T, DomainError> {
        self.check_fraction(gamma)?;
        Ok((T::one() - gamma) * self.zeta / self.calorific_value_unchecked(gamma))
    }
}

/// Per-gNode market position.
#[derive(Debug, Clone, PartialEq)]
pub enum Participant<T> {
    /// Natural gas offer (price [$/kg], optional quantity cap [kg/s];
    /// `None` means the offer is quantity-unbounded).
    NgSupplier { offer_price: T, max_supply: Option<T> },
    /// Hydrogen offer (price [$/kg], optional quantity cap [kg/s]).
    H2Supplier { offer_price: T, max_supply: Option<T> },
    /// Flexible bid (price [$/MJ], maximum energy [MJ/s]).
    FlexibleConsumer { bid_price: T, max_energy: T },
    /// Pre-determined demand [MJ/s] that must be served.
    FixedConsumer { energy: T },
}

impl<T> Participant<T> {
    pub fn kind(&self) -> GNodeKind {
        match self {
            Participant::NgSupplier { .. } => GNodeKind::NgSupplier,
            Participant::H2Supplier { .. } => GNodeKind::H2Supplier,
            Participant::FlexibleConsumer { .. } => GNodeKind::FlexibleConsumer,
            Participant::FixedConsumer { .. } => GNodeKind::FixedConsumer,
        }
    }
}

/// Fixed side withdrawal at a physical node, used for sensitivity analysis.
///
/// `ng`/`h2` withdraw a pure constituent; `blend` withdraws gas at the nodal
/// mixture fraction. Negative values inject.
#[derive(Debug, Clone, PartialEq)]
pub struct SideDraw<T> {
    pub node: usize,
    pub ng: T,
    pub h2: T,
    pub blend: T,
}

/// One auction round: offers, bids, incentives, and cost parameters.
///
/// `participants` and `co2_incentive` are parallel to the network's gNode
/// list; the incentive entries of suppliers are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketScenario<T> {
    pub participants: Vec<Participant<T>>,
    /// Incentive paid for avoided CO₂ emissions, per consumer gNode
    /// [$/kgCO₂].
    pub co2_incentive: Vec<T>,
    /// Cost of compressor drive power η [$/(kW·s)].
    pub compressor_cost_rate: T,
    pub constants: GasConstants<T>,
    pub side_draws: Vec<SideDraw<T>>,
}

/// Scenario inconsistent with the network or with sign constraints.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario has {got} participants for {expected} gNodes")]
    ParticipantCount { expected: usize, got: usize },
    #[error("participant for gNode `{id}` has kind {got}, network says {expected}")]
    KindMismatch {
        id: String,
        expected: GNodeKind,
        got: GNodeKind,
    },
    #[error("gNode `{id}`: {field} must be nonnegative")]
    NegativeQuantity { id: String, field: &'static str },
    #[error("co2_incentive list has {got} entries for {expected} gNodes")]
    IncentiveCount { expected: usize, got: usize },
    #[error("side draw references node index {0} out of range")]
    SideDrawNode(usize),
    #[error("compressor cost rate must be nonnegative")]
    NegativeCostRate,
}

impl<T: Real> MarketScenario<T> {
    /// Cross-checks the scenario against `net`: one participant per gNode,
    /// matching kinds, nonnegative prices and quantities.
    pub fn validate(&self, net: &Network<T>) -> Result<(), ScenarioError> {
        if self.participants.len() != net.gnodes().len() {
            return Err(ScenarioError::ParticipantCount {
                expected: net.gnodes().len(),
                got: self.participants.len(),
            });
        }
        if self.co2_incentive.len() != net.gnodes().len() {
            return Err(ScenarioError::IncentiveCount {
                expected: net.gnodes().len(),
                got: self.co2_incentive.len(),
            });
        }
        if self.compressor_cost_rate < T::zero() {
            return Err(ScenarioError::NegativeCostRate);
        }
        for (g, p) in net.gnodes().iter().zip(&self.participants) {
            if p.kind() != g.kind {
                return Err(ScenarioError::KindMismatch {
                    id: g.id.clone(),
                    expected: g.kind,
                    got: p.kind(),
                });
            }
            let bad = |field| ScenarioError::NegativeQuantity {
                id: g.id.clone(),
                field,
            };
            match p {
                Participant::NgSupplier {
                    offer_price,
                    max_supply,
                }
                | Participant::H2Supplier {
                    offer_price,
                    max_supply,
                } => {
                    if *offer_price < T::zero() {
                        return Err(bad("offer_price"));
                    }
                    if let Some(s) = max_supply {
                        if *s < T::zero() {
                            return Err(bad("max_supply"));
                        }
                    }
                }
                Participant::FlexibleConsumer {
                    bid_price,
                    max_energy,
                } => {
                    if *bid_price < T::zero() {
                        return Err(bad("bid_price"));
                    }
                    if *max_energy < T::zero() {
                        return Err(bad("max_energy"));
                    }
                }
                Participant::FixedConsumer { energy } => {
                    if *energy < T::zero() {
                        return Err(bad("energy"));
                    }
                }
            }
        }
        for (m, _) in self.co2_incentive.iter().enumerate() {
            if self.co2_incentive[m] < T::zero() {
                return Err(ScenarioError::NegativeQuantity {
                    id: net.gnodes()[m].id.clone(),
                    field: "co2_incentive",
                });
            }
        }
        for draw in &self.side_draws {
            if draw.node >= net.n_nodes() {
                return Err(ScenarioError::SideDrawNode(draw.node));
            }
        }
        Ok(())
    }

    /// CO₂ incentive for gNode `m`.
    pub fn incentive(&self, m: usize) -> T {
        self.co2_incentive[m]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain_node(id: &str) -> Node<f64> {
        Node {
            id: id.to_string(),
            min_pressure: 3.0e6,
            max_pressure: 6.0e6,
            min_h2_fraction: 0.0,
            max_h2_fraction: 0.1,
            slack_pressure: None,
        }
    }

    fn pipe(from: &str, to: &str) -> Pipe<f64> {
        Pipe {
            from: from.to_string(),
            to: to.to_string(),
            friction: 0.01,
            length: 5000.0,
            diameter: 0.5,
            area: 0.19635,
        }
    }

    #[test]
    fn calorific_value_endpoints_and_interior() {
        let c = GasConstants::<f64>::default();
        assert_eq!(c.calorific_value(0.0).unwrap(), 44.2);
        assert_eq!(c.calorific_value(1.0).unwrap(), 141.8);
        let r = c.calorific_value(0.1).unwrap();
        assert!((r - 53.96).abs() < 1e-12, "R(0.1) = {r}");
        assert!(c.calorific_value(-0.1).is_err());
        assert!(c.calorific_value(1.1).is_err());
    }

    #[test]
    fn calorific_value_is_affine_increasing() {
        let c = GasConstants::<f64>::default();
        let mut prev = c.calorific_value(0.0).unwrap();
        for k in 1..=100 {
            let g = k as f64 / 100.0;
            let r = c.calorific_value(g).unwrap();
            assert!(r > prev);
            // affine: r interpolates the endpoints exactly
            let interp = 44.2 + (141.8 - 44.2) * g;
            assert!((r - interp).abs() < 1e-12);
            prev = r;
        }
    }

    #[test]
    fn avoided_emissions_values() {
        let c = GasConstants::<f64>::default();
        // 37 kg/s at 10% hydrogen: d·γ·(R_H2/R_NG)·ζ
        let e = c.avoided_emissions(37.0, 0.1).unwrap();
        assert!((e - 32.642).abs() < 5e-3, "E = {e}");
        assert_eq!(c.avoided_emissions(100.0, 0.0).unwrap(), 0.0);
        assert_eq!(c.avoided_emissions(0.0, 0.5).unwrap(), 0.0);
        assert!(c.avoided_emissions(-1.0, 0.1).is_err());
    }

    #[test]
    fn avoided_emissions_is_bilinear_in_flow() {
        let c = GasConstants::<f64>::default();
        let base = c.avoided_emissions(12.5, 0.07).unwrap();
        for k in [0.0, 0.5, 2.0, 10.0] {
            let scaled = c.avoided_emissions(k * 12.5, 0.07).unwrap();
            assert!((scaled - k * base).abs() <= 1e-12 * base.max(1.0) * k.max(1.0));
        }
    }

    #[test]
    fn carbon_intensity_values_and_monotonicity() {
        let c = GasConstants::<f64>::default();
        let ci0 = c.carbon_intensity(0.0).unwrap();
        assert!((ci0 - 0.0622).abs() / 0.0622 < 5e-3, "CI(0) = {ci0}");
        let ci01 = c.carbon_intensity(0.1).unwrap();
        assert!((ci01 - 0.0458).abs() / 0.0458 < 5e-3, "CI(0.1) = {ci01}");
        assert_eq!(c.carbon_intensity(1.0).unwrap(), 0.0);
        let mut prev = ci0;
        for k in 1..=50 {
            let ci = c.carbon_intensity(k as f64 / 50.0).unwrap();
            assert!(ci < prev, "carbon intensity must decrease in gamma");
            prev = ci;
        }
    }

    #[test]
    fn single_node_without_slack_is_flagged() {
        let parts = NetworkBuilder::<f64> {
            nodes: vec![plain_node("J1")],
            ..Default::default()
        };
        let report = validate_network(&parts);
        assert!(report.issues.contains(&Issue::NoSlackNode));
    }

    #[test]
    fn dangling_pipe_endpoint_is_flagged() {
        let mut n1 = plain_node("J1");
        n1.slack_pressure = Some(4.0e6);
        let parts = NetworkBuilder {
            nodes: vec![n1, plain_node("J2")],
            pipes: vec![pipe("J1", "J9")],
            ..Default::default()
        };
        let report = validate_network(&parts);
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, Issue::DanglingNodeId { id, .. } if id == "J9")));
    }

    #[test]
    fn unreachable_consumer_is_flagged() {
        let mut n1 = plain_node("J1");
        n1.slack_pressure = Some(4.0e6);
        // Pipe oriented away from the consumer's node.
        let parts = NetworkBuilder {
            nodes: vec![n1, plain_node("J2")],
            pipes: vec![pipe("J2", "J1")],
            gnodes: vec![
                GNode {
                    id: "S1".into(),
                    node: "J1".into(),
                    kind: GNodeKind::NgSupplier,
                },
                GNode {
                    id: "D1".into(),
                    node: "J2".into(),
                    kind: GNodeKind::FlexibleConsumer,
                },
            ],
            ..Default::default()
        };
        let report = validate_network(&parts);
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, Issue::UnreachableConsumer(id) if id == "D1")));
    }

    #[test]
    fn adjacency_is_consistent_with_edge_lists() {
        let mut n1 = plain_node("J1");
        n1.slack_pressure = Some(4.0e6);
        let parts = NetworkBuilder {
            nodes: vec![n1, plain_node("J2"), plain_node("J3")],
            pipes: vec![pipe("J1", "J2"), pipe("J2", "J3")],
            compressors: vec![Compressor {
                from: "J1".into(),
                to: "J3".into(),
                max_boost: 1.4,
            }],
            gnodes: vec![],
        };
        let net = parts.build().unwrap();
        assert_eq!(net.n_edges(), 3);
        for e in 0..net.n_edges() {
            let (i, j) = net.edge_ends(e);
            assert!(net.outgoing(i).contains(&e));
            assert!(net.incoming(j).contains(&e));
            // and in no other adjacency set
            for v in 0..net.n_nodes() {
                if v != i {
                    assert!(!net.outgoing(v).contains(&e));
                }
                if v != j {
                    assert!(!net.incoming(v).contains(&e));
                }
            }
        }
    }
}
