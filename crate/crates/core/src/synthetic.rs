//! Seeded generators for synthetic object-centric logs.
//!
//! [`generate_synthetic`] produces the order-management shape used throughout
//! the tests (customers, orders, items). [`generate_loan_log`] produces a
//! loan-application shape (applications, offers, resources) used for the
//! benchmark queries.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oced::{AttributeValue, Event, Object, Oced, Qualifier, TimeDelta, Timestamp};
use crate::query::{
    BindingBox, LabelAggregation, LabelSpec, Predicate, QueryTree, VarDecl, VarKind,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub num_customers: usize,
    pub orders_per_customer: usize,
    pub items_per_order: usize,
    /// Chance of a payment reminder; applied again after each reminder.
    pub reminder_probability: f64,
    pub skip_payment_probability: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            num_customers: 10,
            orders_per_customer: 2,
            items_per_order: 2,
            reminder_probability: 0.3,
            skip_payment_probability: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("{0} must be within [0, 1]")]
    ProbabilityOutOfRange(&'static str),
}

impl SyntheticConfig {
    pub fn check(&self) -> Result<(), ConfigError> {
        for (name, p) in [
            ("reminderProbability", self.reminder_probability),
            ("skipPaymentProbability", self.skip_payment_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::ProbabilityOutOfRange(name));
            }
        }
        Ok(())
    }
}

const BASE: Timestamp = Timestamp::from_utc(2023, 1, 2, 8, 0, 0);
/// At most this many reminders per order, so `reminder_probability = 1`
/// terminates.
const MAX_REMINDERS: usize = 3;

/// Advances `clock` by a random gap of one minute to six hours.
fn tick(rng: &mut ChaCha8Rng, clock: &mut Timestamp) -> Timestamp {
    *clock = *clock + TimeDelta::from_millis(rng.random_range(60_000..=6 * 3_600_000));
    *clock
}

/// Generates the order-management log.
///
/// Each order is a trace: `place order` (customer, order, items), one
/// `pack item` per item, `ship items`, zero or more `payment reminder`s and,
/// unless skipped, `pay order`. Panics if a probability lies outside [0, 1].
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Oced {
    cfg.check().expect("valid synthetic config");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut events = Vec::new();
    let mut objects = Vec::new();
    let mut next_event = 0usize;
    let mut new_event = |activity: &str, time: Timestamp| {
        next_event += 1;
        Event::new(format!("e{next_event}"), activity, time)
    };

    let mut order_no = 0usize;
    let mut item_no = 0usize;
    for c in 0..cfg.num_customers {
        let customer_id = format!("c{}", c + 1);
        let mut customer = Object::new(customer_id.clone(), "customers");
        if rng.random_bool(0.5) {
            let city = ["Aachen", "Bonn", "Cologne", "Essen"][rng.random_range(0..4)];
            customer = customer.with_attribute("city", BASE, AttributeValue::String(city.into()));
        }
        for _ in 0..cfg.orders_per_customer {
            order_no += 1;
            let order_id = format!("ord{order_no}");
            let mut order = Object::new(order_id.clone(), "orders");
            let items: Vec<String> = (0..cfg.items_per_order)
                .map(|_| {
                    item_no += 1;
                    format!("it{item_no}")
                })
                .collect();
            customer = customer.with_object("places", &order_id);
            for it in &items {
                order = order.with_object("contains", it);
            }

            let mut clock = BASE + TimeDelta::MINUTE.times(rng.random_range(0..60 * 24 * 28));
            let mut place = new_event("place order", tick(&mut rng, &mut clock))
                .with_object("customer", &customer_id)
                .with_object("order", &order_id);
            for it in &items {
                place = place.with_object("item", it);
            }
            events.push(place);
            for it in &items {
                events.push(
                    new_event("pack item", tick(&mut rng, &mut clock)).with_object("item", it),
                );
            }
            if !items.is_empty() {
                let mut ship = new_event("ship items", tick(&mut rng, &mut clock));
                for it in &items {
                    ship = ship.with_object("ships", it);
                }
                events.push(ship);
            }
            let mut reminders = 0;
            while reminders < MAX_REMINDERS && rng.random_bool(cfg.reminder_probability) {
                reminders += 1;
                events.push(
                    new_event("payment reminder", tick(&mut rng, &mut clock))
                        .with_object("recipient", &customer_id)
                        .with_object("order", &order_id)
                        .with_attribute("fee", AttributeValue::Number(5.0 * reminders as f64)),
                );
            }
            if !rng.random_bool(cfg.skip_payment_probability) {
                events.push(
                    new_event("pay order", tick(&mut rng, &mut clock))
                        .with_object("order", &order_id),
                );
            }
            objects.push(order);
            objects.extend(items.into_iter().map(|id| Object::new(id, "items")));
        }
        objects.push(customer);
    }
    Oced::new(events, objects)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoanConfig {
    pub num_applications: usize,
    /// Offers per application are drawn from `1..=max_offers`.
    pub max_offers: usize,
    pub num_resources: usize,
    /// `W_` workflow events per application, each touching the application
    /// and a resource.
    pub workflow_events: usize,
    pub seed: u64,
}

impl Default for LoanConfig {
    fn default() -> Self {
        LoanConfig {
            num_applications: 100,
            max_offers: 2,
            num_resources: 10,
            workflow_events: 4,
            seed: 0,
        }
    }
}

const WORKFLOW: [&str; 4] = [
    "W_Complete application",
    "W_Call after offers",
    "W_Validate application",
    "W_Call incomplete files",
];

/// Generates a loan-application log.
///
/// Per application: `A_Create Application`, zero to two `A_Submitted`,
/// `W_Handle leads`, usually `A_Accepted`, and per offer `O_Create Offer`,
/// `O_Created`, `O_Sent`, zero to two `O_Returned` and sometimes
/// `O_Accepted`. Applications link to their offers by O2O.
pub fn generate_loan_log(cfg: &LoanConfig) -> Oced {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let resources: Vec<String> = (0..cfg.num_resources)
        .map(|r| format!("User_{}", r + 1))
        .collect();
    let est = cfg.num_applications * (8 + cfg.workflow_events + 5 * cfg.max_offers);
    let mut events = Vec::with_capacity(est);
    let mut objects: Vec<Object> =
        Vec::with_capacity(cfg.num_applications * (1 + cfg.max_offers) + cfg.num_resources);
    objects.extend(resources.iter().map(|r| Object::new(r.clone(), "Resource")));

    let mut next_event = 0usize;
    for a in 0..cfg.num_applications {
        let app_id = format!("Application_{}", a + 1);
        let mut app = Object::new(app_id.clone(), "Application");
        let start = BASE + TimeDelta::MINUTE.times(7 * a as i64);
        let mut clock = start;
        let mut emit = |rng: &mut ChaCha8Rng, activity: &str, with_resource: bool| {
            next_event += 1;
            let mut e = Event::new(format!("ev{next_event}"), activity, tick(rng, &mut clock));
            if with_resource && !resources.is_empty() {
                e = e.with_object("resource", &resources[rng.random_range(0..resources.len())]);
            }
            e
        };

        events
            .push(emit(&mut rng, "A_Create Application", true).with_object("application", &app_id));
        let submitted = match rng.random_range(0..10) {
            0 => 0,
            1 => 2,
            _ => 1,
        };
        for _ in 0..submitted {
            events.push(emit(&mut rng, "A_Submitted", false).with_object("application", &app_id));
        }
        events.push(emit(&mut rng, "W_Handle leads", true).with_object("application", &app_id));
        if rng.random_bool(0.85) {
            events.push(emit(&mut rng, "A_Accepted", true).with_object("application", &app_id));
        }

        let offers = if cfg.max_offers == 0 {
            0
        } else {
            rng.random_range(1..=cfg.max_offers)
        };
        for o in 0..offers {
            let offer_id = format!("Offer_{}_{}", a + 1, o + 1);
            app = app.with_object("offer", &offer_id);
            let amount = rng.random_range(5..=500) as f64 * 100.0;
            objects.push(Object::new(offer_id.clone(), "Offer").with_attribute(
                "offeredAmount",
                start,
                AttributeValue::Number(amount),
            ));
            events.push(
                emit(&mut rng, "O_Create Offer", true)
                    .with_object("offer", &offer_id)
                    .with_object("application", &app_id),
            );
            events.push(emit(&mut rng, "O_Created", false).with_object("offer", &offer_id));
            events.push(emit(&mut rng, "O_Sent", true).with_object("offer", &offer_id));
            let returned = match rng.random_range(0..10) {
                0..=2 => 0,
                3..=8 => 1,
                _ => 2,
            };
            for _ in 0..returned {
                events.push(emit(&mut rng, "O_Returned", false).with_object("offer", &offer_id));
            }
            if rng.random_bool(0.4) {
                events.push(
                    emit(&mut rng, "O_Accepted", true)
                        .with_object("offer", &offer_id)
                        .with_object("application", &app_id),
                );
            }
        }
        for _ in 0..cfg.workflow_events {
            let activity = WORKFLOW[rng.random_range(0..WORKFLOW.len())];
            events.push(emit(&mut rng, activity, true).with_object("application", &app_id));
        }
        objects.push(app);
    }
    Oced::new(events, objects)
}

/// Parameters for small logs in differential tests: at most 50 events and 20
/// objects.
pub fn small_config(seed: u64) -> SyntheticConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    SyntheticConfig {
        num_customers: rng.random_range(1..=2),
        orders_per_customer: rng.random_range(1..=2),
        items_per_order: rng.random_range(1..=3),
        reminder_probability: rng.random_range(0.0..0.7),
        skip_payment_probability: rng.random_range(0.0..0.5),
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomTreeConfig {
    /// Longest root-to-leaf path, in edges.
    pub max_depth: usize,
    /// Variables per node, inherited ones included.
    pub max_vars: usize,
    pub max_children: usize,
}

impl Default for RandomTreeConfig {
    fn default() -> Self {
        RandomTreeConfig {
            max_depth: 3,
            max_vars: 4,
            max_children: 2,
        }
    }
}

struct TreeGen<'a> {
    rng: ChaCha8Rng,
    cfg: &'a RandomTreeConfig,
    event_types: Vec<String>,
    object_types: Vec<String>,
    qualifiers: Vec<String>,
    next_var: usize,
    next_node: usize,
    next_edge: usize,
}

/// A random valid query tree over the types and qualifiers occurring in
/// `log`, mixing E2O, O2O, TBE and CBS predicates, constraints and labels.
pub fn random_query_tree(log: &Oced, cfg: &RandomTreeConfig, seed: u64) -> QueryTree {
    let mut event_types: Vec<String> = log.events().iter().map(|e| e.activity.clone()).collect();
    let mut object_types: Vec<String> = log.objects().iter().map(|o| o.otype.clone()).collect();
    let mut qualifiers: Vec<String> = log
        .events()
        .iter()
        .flat_map(|e| &e.e2o)
        .chain(log.objects().iter().flat_map(|o| &o.o2o))
        .map(|r| r.qualifier.clone())
        .collect();
    for v in [&mut event_types, &mut object_types, &mut qualifiers] {
        v.sort();
        v.dedup();
    }
    if event_types.is_empty() {
        event_types.push("none".into());
    }
    if object_types.is_empty() {
        object_types.push("none".into());
    }
    let mut g = TreeGen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        cfg,
        event_types,
        object_types,
        qualifiers,
        next_var: 0,
        next_node: 0,
        next_edge: 0,
    };
    let root_box = g.extend_box(BindingBox::new(), true);
    let mut tree = QueryTree::new("v0", root_box);
    g.next_node = 1;
    g.grow(&mut tree, 0, 0);
    tree
}

impl TreeGen<'_> {
    fn pick<'s>(&mut self, items: &'s [String]) -> &'s str {
        &items[self.rng.random_range(0..items.len())]
    }

    fn qualifier(&mut self) -> Qualifier {
        match self.rng.random_range(0..10) {
            0..=5 => Qualifier::Wildcard,
            6 => Qualifier::named("missing"),
            _ if self.qualifiers.is_empty() => Qualifier::Wildcard,
            _ => {
                let qs = core::mem::take(&mut self.qualifiers);
                let q = Qualifier::named(self.pick(&qs));
                self.qualifiers = qs;
                q
            }
        }
    }

    fn types(&mut self, kind: VarKind) -> Vec<String> {
        let pool = match kind {
            VarKind::Event => self.event_types.clone(),
            VarKind::Object => self.object_types.clone(),
        };
        let n = if pool.len() > 1 && self.rng.random_bool(0.25) {
            2
        } else {
            1
        };
        let mut out: Vec<String> = (0..n).map(|_| self.pick(&pool).into()).collect();
        out.dedup();
        out
    }

    fn tbe_bounds(&mut self) -> (Option<TimeDelta>, Option<TimeDelta>) {
        let h = TimeDelta::HOUR;
        match self.rng.random_range(0..6) {
            0 => (Some(TimeDelta::from_millis(0)), None),
            1 => (None, Some(TimeDelta::from_millis(0))),
            2 => (Some(h.times(-6)), Some(h.times(6))),
            3 => (Some(h), Some(TimeDelta::DAY.times(2))),
            4 => (None, None),
            _ => (Some(TimeDelta::from_millis(0)), Some(h.times(3))),
        }
    }

    /// A basic predicate relating `v` to some variable of `vars`, if any fits.
    fn relate(&mut self, v: &VarDecl, vars: &[VarDecl]) -> Option<Predicate> {
        let others: Vec<&VarDecl> = vars.iter().filter(|w| w.name != v.name).collect();
        if others.is_empty() {
            return None;
        }
        let w = others[self.rng.random_range(0..others.len())];
        let flip = self.rng.random_bool(0.5);
        Some(match (v.kind, w.kind) {
            (VarKind::Event, VarKind::Object) => Predicate::e2o(&v.name, &w.name, self.qualifier()),
            (VarKind::Object, VarKind::Event) => Predicate::e2o(&w.name, &v.name, self.qualifier()),
            (VarKind::Object, VarKind::Object) => {
                let (a, b) = if flip {
                    (&w.name, &v.name)
                } else {
                    (&v.name, &w.name)
                };
                Predicate::o2o(a, b, self.qualifier())
            }
            (VarKind::Event, VarKind::Event) => {
                let (a, b) = if flip {
                    (&w.name, &v.name)
                } else {
                    (&v.name, &w.name)
                };
                let (lo, hi) = self.tbe_bounds();
                Predicate::tbe(a, b, lo, hi)
            }
        })
    }

    /// Adds one or two variables (within the budget) and basic predicates.
    fn extend_box(&mut self, mut bx: BindingBox, root: bool) -> BindingBox {
        let room = self.cfg.max_vars.saturating_sub(bx.vars.len());
        let add = if room >= 2 && self.rng.random_bool(0.4) {
            2
        } else {
            room.min(1)
        };
        if root && add == 0 {
            return bx;
        }
        for _ in 0..add {
            self.next_var += 1;
            let kind = if self.rng.random_bool(0.5) {
                VarKind::Event
            } else {
                VarKind::Object
            };
            let name = match kind {
                VarKind::Event => format!("e{}", self.next_var),
                VarKind::Object => format!("o{}", self.next_var),
            };
            let types = self.types(kind);
            let decl = VarDecl::new(&name, kind, types);
            bx.vars.push(decl.clone());
            if self.rng.random_bool(0.75) {
                if let Some(p) = self.relate(&decl, &bx.vars) {
                    if !bx.predicates.contains(&p) {
                        bx.predicates.push(p);
                    }
                }
            }
        }
        if add > 0 && self.rng.random_bool(0.25) {
            let vars = bx.vars.clone();
            let v = &vars[self.rng.random_range(0..vars.len())];
            if let Some(p) = self.relate(v, &vars) {
                if !bx.predicates.contains(&p) {
                    bx.predicates.push(p);
                }
            }
        }
        bx
    }

    fn grow(&mut self, tree: &mut QueryTree, node: usize, depth: usize) {
        let parent_box = tree.nodes[node].binding_box.clone();
        let parent_id = tree.nodes[node].id.clone();
        let mut edges = Vec::new();
        if depth < self.cfg.max_depth && parent_box.vars.len() < self.cfg.max_vars {
            let max = if depth == 0 {
                self.cfg.max_children.max(1)
            } else {
                self.cfg.max_children
            };
            let lo = if depth == 0 { 1 } else { 0 };
            let n = self.rng.random_range(lo..=max);
            for _ in 0..n {
                let child_box = self.extend_box(parent_box.refine(), false);
                let id = format!("v{}", self.next_node);
                self.next_node += 1;
                let label = edge_label(self.next_edge);
                self.next_edge += 1;
                *tree = core::mem::replace(tree, QueryTree::new("", BindingBox::new()))
                    .with_child(&parent_id, &label, &id, child_box);
                let child = tree.nodes.len() - 1;
                edges.push((label, child));
                self.grow(tree, child, depth + 1);
            }
        }

        for (label, child) in &edges {
            let child_events: Vec<String> = tree.nodes[*child]
                .binding_box
                .vars
                .iter()
                .filter(|v| v.kind == VarKind::Event)
                .map(|v| v.name.clone())
                .collect();
            let bx = &mut tree.nodes[node].binding_box;
            let cbs = |rng: &mut ChaCha8Rng| {
                let min = rng.random_range(0..=2u64);
                let max = if rng.random_bool(0.3) {
                    None
                } else {
                    Some(min + rng.random_range(0..=2u64))
                };
                Predicate::cbs(label, min, max)
            };
            if self.rng.random_bool(0.4) {
                bx.predicates.push(cbs(&mut self.rng));
            }
            if self.rng.random_bool(0.4) {
                bx.constraints.push(cbs(&mut self.rng));
            }
            if self.rng.random_bool(0.4) {
                let name = format!("l{}", bx.labels.len());
                let agg = if child_events.is_empty() || self.rng.random_bool(0.4) {
                    LabelAggregation::Count {
                        edge: label.clone(),
                    }
                } else {
                    let from = child_events[self.rng.random_range(0..child_events.len())].clone();
                    let to = child_events[self.rng.random_range(0..child_events.len())].clone();
                    let edge = label.clone();
                    match self.rng.random_range(0..3) {
                        0 => LabelAggregation::MinDuration { edge, from, to },
                        1 => LabelAggregation::MaxDuration { edge, from, to },
                        _ => LabelAggregation::MeanDuration { edge, from, to },
                    }
                };
                bx.labels.push(LabelSpec {
                    name,
                    aggregation: agg,
                });
            }
        }
        let bx = tree.nodes[node].binding_box.clone();
        if !bx.vars.is_empty() && self.rng.random_bool(0.3) {
            let v = &bx.vars[self.rng.random_range(0..bx.vars.len())];
            if let Some(p) = self.relate(v, &bx.vars) {
                tree.nodes[node].binding_box.constraints.push(p);
            }
        }
    }
}

fn edge_label(i: usize) -> String {
    let letter = (b'A' + (i % 26) as u8) as char;
    if i < 26 {
        format!("{letter}")
    } else {
        format!("{letter}{}", i / 26)
    }
}
