//! Hand-built corpora with human-readable external ids.

use prodgraph::ingest::Dictionaries;
use prodgraph::model::{Action, BehaviorEvent, BipartiteGraph, Catalog, CategoryId, ItemId, UserId};

/// A small corpus plus the dictionaries that name it.
pub struct Fixture {
    pub events: Vec<BehaviorEvent>,
    pub dicts: Dictionaries,
}

impl Fixture {
    fn from_rows(action: Action, rows: &[(&str, &[(&str, u64)])]) -> Self {
        let mut dicts = Dictionaries::new();
        let mut events = Vec::new();
        for &(user, items) in rows {
            let user = UserId(dicts.users.intern(user));
            for &(item, timestamp) in items {
                events.push(BehaviorEvent {
                    user,
                    item: ItemId(dicts.items.intern(item)),
                    action,
                    timestamp,
                });
            }
        }
        Self { events, dicts }
    }

    pub fn item(&self, name: &str) -> ItemId {
        ItemId(self.dicts.items.get(name).expect("known item"))
    }

    pub fn user(&self, name: &str) -> UserId {
        UserId(self.dicts.users.get(name).expect("known user"))
    }

    pub fn graph(&self, action: Action) -> BipartiteGraph {
        BipartiteGraph::build(&self.events, action).expect("non-empty fixture")
    }

    /// The corpus in behavior-log TSV form.
    pub fn to_tsv(&self) -> String {
        let mut buf = Vec::new();
        prodgraph::ingest::write_events(&mut buf, &self.events, &self.dicts).unwrap();
        String::from_utf8(buf).unwrap()
    }
}

/// Five shoppers who all click seed item `h`; their remaining clicks
/// realize the worked wedge arithmetic: two heavy co-clickers (alice,
/// bob), a partial overlap through `p`, a tight pair through `q`, and
/// four single-edge items (`z`, `y`, `o`, `x`) that must score zero.
///
/// Scores for seed `h` with alpha = 1 and no user weighting:
/// p = 1/4 + 1/2 + 1/2 = 1.25, q = 1/2 + 1/2 + 1/2 = 1.5,
/// t = r = 1/4 = 0.25, ranking q > p > r = t > others.
pub fn five_shopper_clicks() -> Fixture {
    Fixture::from_rows(
        Action::Click,
        &[
            ("alice", &[("h", 1), ("t", 2), ("r", 3), ("p", 4), ("z", 5)]),
            ("bob", &[("h", 1), ("t", 2), ("r", 3), ("p", 4)]),
            ("chris", &[("h", 1), ("p", 2), ("q", 3), ("y", 4)]),
            ("david", &[("h", 1), ("q", 2)]),
            ("eric", &[("h", 1), ("q", 2), ("o", 3), ("x", 4)]),
        ],
    )
}

/// The five-shopper corpus padded with single-item clickers until the
/// popular items reach the stated degrees: |U_h| = 5, |U_t| = 15,
/// |U_p| = 40, |U_q| = 60, |U_z| = 4. Intersections with `h` stay at
/// t = 2, z = 1, p = 3, q = 3, so binary cosine ranks t > z > p > q.
pub fn padded_cosine_clicks() -> Fixture {
    let base = five_shopper_clicks();
    let mut dicts = base.dicts;
    let mut events = base.events;
    let mut pad_user = 0usize;
    for (item, target_degree) in [("t", 15usize), ("p", 40), ("q", 60), ("z", 4)] {
        let item_id = ItemId(dicts.items.get(item).unwrap());
        let current = events
            .iter()
            .map(|e| (e.user, e.item))
            .filter(|&(_, i)| i == item_id)
            .count();
        for _ in current..target_degree {
            let user = UserId(dicts.users.intern(&format!("pad{pad_user}")));
            pad_user += 1;
            events.push(BehaviorEvent {
                user,
                item: item_id,
                action: Action::Click,
                timestamp: 1,
            });
        }
    }
    Fixture { events, dicts }
}

/// Purchase fixture with a catalog: six users buy a phone and later one
/// accessory each (shell, membrane or a power bank), so the phone ranks
/// its accessories while no accessory ranks the phone.
pub fn phone_accessory_purchases() -> (Fixture, Catalog) {
    const DAY: u64 = 86_400;
    let fixture = Fixture::from_rows(
        Action::Purchase,
        &[
            ("u0", &[("phone", 0), ("shell", DAY)]),
            ("u1", &[("phone", 0), ("shell", DAY)]),
            ("u2", &[("phone", 0), ("membrane", DAY)]),
            ("u3", &[("phone", 0), ("membrane", 2 * DAY)]),
            ("u4", &[("phone", 0), ("power", DAY)]),
            ("u5", &[("phone", 0), ("power", DAY)]),
        ],
    );
    let mut dicts = fixture.dicts.clone();
    let mut catalog = Catalog::new();
    for (item, category) in [
        ("phone", "MobilePhone"),
        ("shell", "PhoneShell"),
        ("membrane", "PhoneMembrane"),
        ("power", "PortablePower"),
    ] {
        catalog.insert(
            ItemId(dicts.items.intern(item)),
            CategoryId(dicts.categories.intern(category)),
        );
    }
    let fixture = Fixture {
        events: fixture.events,
        dicts,
    };
    (fixture, catalog)
}

/// Catalog TSV for a list of (item, category) names.
pub fn catalog_tsv(pairs: &[(&str, &str)]) -> String {
    let mut out = String::new();
    for (item, category) in pairs {
        out.push_str(&format!("{item}\t{category}\n"));
    }
    out
}
