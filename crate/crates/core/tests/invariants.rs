//! Property tests over the public API, one block per module.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use proptest::sample::Index;

use pursuit_core::clustering::{cluster, dbscan, kmeans, ClusterMethod, ClusterParams, SofmConfig};
use pursuit_core::coalition::{form_coalitions, staffing_demand, FormationParams};
use pursuit_core::experiment::{Case, ExperimentConfig, Simulation};
use pursuit_core::grid_world::{AgentKind, GridConfig};
use pursuit_core::learning::{
    discounted_return, field_peaks, q_update, PriorityMode, QTable, RewardField, TransitionRecord,
};
use pursuit_core::membership::{
    membership_matrix, priority, priority_from_count, MembershipMatrix, MembershipModel,
};
use pursuit_core::{Action, AgentId, EvaderState, Position, PursuerState, WorldState};

/// A small random world: distinct cells for obstacles and agents.
fn world_strategy() -> impl Strategy<Value = WorldState> {
    (4usize..12, 4usize..12, 1usize..7, 1usize..5, 0usize..6, any::<u64>()).prop_map(
        |(w, h, n_p, n_e, n_o, seed)| {
            use rand::seq::index::sample;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cells = sample(&mut rng, w * h, n_p + n_e + n_o).into_vec();
            let at = |i: usize| Position::new(cells[i] % w, cells[i] / w);
            let pursuers = (0..n_p)
                .map(|i| PursuerState::new(AgentId(i as u32), at(i), 3))
                .collect();
            let evaders = (0..n_e)
                .map(|i| {
                    let d = 1 + (seed >> (2 * i)) as u32 % 4;
                    EvaderState::new(AgentId((n_p + i) as u32), at(n_p + i), d)
                })
                .collect();
            let obstacles = (0..n_o).map(|i| at(n_p + n_e + i));
            WorldState::new(GridConfig::new(w, h).with_obstacles(obstacles), pursuers, evaders)
                .expect("distinct cells")
        },
    )
}

fn random_actions(world: &WorldState, picks: &[Index]) -> BTreeMap<AgentId, Action> {
    let mut out = BTreeMap::new();
    let mut k = 0;
    let mut pick = |legal: Vec<Action>| {
        let a = if legal.is_empty() { None } else { Some(*picks[k % picks.len()].get(&legal)) };
        k += 1;
        a
    };
    for p in &world.pursuers {
        if let Some(a) = pick(world.legal_actions(p.pos, AgentKind::Pursuer)) {
            out.insert(p.id, a);
        }
    }
    for e in world.alive_evaders() {
        if let Some(a) = pick(world.legal_actions(e.pos, AgentKind::Evader)) {
            out.insert(e.id, a);
        }
    }
    out
}

fn matrix_strategy() -> impl Strategy<Value = MembershipMatrix> {
    (1usize..12, 1usize..6).prop_flat_map(|(rows, cols)| {
        prop::collection::vec(prop::collection::vec(0.0f64..1.0, cols), rows)
            .prop_map(|r| MembershipMatrix::from_vectors(r).unwrap())
    })
}

fn contiguous(labels: &[usize]) -> bool {
    let mut next = 0;
    for &l in labels {
        if l > next {
            return false;
        }
        if l == next {
            next += 1;
        }
    }
    true
}

fn partition(labels: &[usize]) -> BTreeSet<BTreeSet<usize>> {
    let mut groups: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().insert(i);
    }
    groups.into_values().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    // grid world

    #[test]
    fn steps_keep_the_world_consistent(world in world_strategy(), picks in prop::collection::vec(any::<Index>(), 1..32), ticks in 1usize..12) {
        let mut w = world;
        for t in 0..ticks {
            let before = w.clone();
            let actions = random_actions(&w, &picks[t % picks.len()..]);
            let outcome = w.step_in_place(&actions).unwrap();
            w.check_invariants().unwrap();
            prop_assert_eq!(w.tick, before.tick + 1);
            for (a, b) in before.pursuers.iter().zip(&w.pursuers) {
                prop_assert!(a.pos.manhattan(b.pos) <= 1);
                prop_assert!(!w.is_obstacle(b.pos));
            }
            let mut cells = BTreeSet::new();
            for p in &w.pursuers {
                prop_assert!(cells.insert(p.pos));
            }
            for (a, b) in before.evaders.iter().zip(&w.evaders) {
                prop_assert!(!a.captured || b.captured, "capture reverted");
                if b.alive() {
                    prop_assert!(a.pos.manhattan(b.pos) <= 1);
                    prop_assert!(cells.insert(b.pos));
                }
                let newly = b.captured && !a.captured;
                prop_assert_eq!(newly, outcome.captured.contains(&b.id));
            }
        }
    }

    #[test]
    fn step_is_a_pure_function(world in world_strategy(), picks in prop::collection::vec(any::<Index>(), 1..16)) {
        let actions = random_actions(&world, &picks);
        let a = world.step(&actions).unwrap();
        let b = world.step(&actions).unwrap();
        prop_assert_eq!(a.snapshot_json(), b.snapshot_json());
    }

    // membership

    #[test]
    fn membership_matrix_is_bounded(world in world_strategy(), cd in 0.0f64..2.0, cc in 0.0f64..2.0, cr in 0.01f64..2.0) {
        let model = MembershipModel::new(pursuit_core::membership::Coefficients::new(cd, cc, cr));
        let m = membership_matrix(&world, &model).unwrap();
        prop_assert_eq!(m.rows(), world.alive_evader_count());
        prop_assert_eq!(m.cols(), world.pursuers.len());
        for row in m.iter_rows() {
            for &v in row {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn priority_orders_by_difficulty_and_invaders(n in 0usize..40, d in 1u32..4) {
        prop_assert!(priority_from_count(n, d) > priority_from_count(n, d + 1));
        prop_assert!(priority_from_count(n + 1, d) > priority_from_count(n, d));
    }

    // clustering

    #[test]
    fn every_method_labels_every_row(m in matrix_strategy(), k in 1usize..5, seed in any::<u64>()) {
        let params = ClusterParams {
            kmeans_k: k.min(m.rows()),
            kmeans_seed: seed,
            sofm: SofmConfig { epochs: 20, seed, ..SofmConfig::default() },
            ..ClusterParams::default()
        };
        for method in [ClusterMethod::Sofm, ClusterMethod::Kmeans, ClusterMethod::Dbscan, ClusterMethod::Singleton] {
            let a = cluster(&m, method, &params).unwrap();
            prop_assert_eq!(a.labels.len(), m.rows());
            prop_assert!(contiguous(&a.labels));
            prop_assert_eq!(&a.evader_ids, &m.evader_ids);
            if method == ClusterMethod::Kmeans {
                prop_assert!(a.group_count() <= params.kmeans_k);
            }
            if method == ClusterMethod::Singleton {
                prop_assert_eq!(a.group_count(), m.rows());
            }
        }
    }

    #[test]
    fn kmeans_and_dbscan_ignore_row_order(m in matrix_strategy(), seed in any::<u64>(), eps in 0.05f64..0.8) {
        let n = m.rows();
        let order: Vec<usize> = (0..n).rev().collect();
        let shuffled = m.permuted(&order);
        let back = |labels: &[usize]| -> Vec<usize> {
            let mut out = vec![0; n];
            for (new_i, &old_i) in order.iter().enumerate() {
                out[old_i] = labels[new_i];
            }
            out
        };
        let k = 2.min(n);
        let a = kmeans(&m, k, seed).unwrap();
        let b = kmeans(&shuffled, k, seed).unwrap();
        prop_assert_eq!(partition(&a.labels), partition(&back(&b.labels)));
        let a = dbscan(&m, eps, 2).unwrap();
        let b = dbscan(&shuffled, eps, 2).unwrap();
        prop_assert_eq!(partition(&a.labels), partition(&back(&b.labels)));
    }

    // coalitions

    #[test]
    fn formation_covers_and_staffs_greedily(world in world_strategy()) {
        let mut w = world;
        let model = MembershipModel::default();
        let m = membership_matrix(&w, &model).unwrap();
        let assignment = kmeans(&m, 2.min(m.rows()), 1).unwrap();
        let before: Vec<u32> = w.pursuers.iter().map(|p| p.c_t).collect();
        let pre = w.clone();
        let (state, _) = form_coalitions(&mut w, &assignment, &FormationParams::default()).unwrap();
        state.check_conservation(&w).unwrap();
        let assigned: BTreeSet<AgentId> = state.coalitions.iter().flat_map(|c| c.pursuer_ids.clone()).collect();
        for c in &state.coalitions {
            let group: Vec<&EvaderState> = c.evader_ids.iter().map(|id| w.evader(*id).unwrap()).collect();
            prop_assert_eq!(c.demand, staffing_demand(&group).unwrap());
            prop_assert!(c.pursuer_ids.len() <= c.demand);
            prop_assert_eq!(c.life_remaining, c.life);
        }
        for (p, c_t) in w.pursuers.iter().zip(before) {
            let expected = state
                .coalition_of_pursuer(p.id)
                .map_or(0, |c| c.evader_ids.len() as u32);
            prop_assert_eq!(p.c_t, c_t + expected);
        }
        // no pursuer left free outscores a member of a fully staffed group
        let score = |p: &PursuerState, evs: &[AgentId]| {
            evs.iter()
                .map(|id| model.degree(pre.evader(*id).unwrap(), p, &pre.config))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        for c in state.coalitions.iter().filter(|c| !c.understaffed()) {
            let worst = c
                .pursuer_ids
                .iter()
                .map(|id| score(pre.pursuer(*id).unwrap(), &c.evader_ids))
                .fold(f64::INFINITY, f64::min);
            for p in pre.pursuers.iter().filter(|p| !assigned.contains(&p.id)) {
                prop_assert!(score(p, &c.evader_ids) <= worst);
            }
        }
        // free pursuers remain only when every group got what it asked for
        if assigned.len() < w.pursuers.len() {
            prop_assert!(state.coalitions.iter().all(|c| !c.understaffed()));
        }
    }

    // learning

    #[test]
    fn reward_field_peaks_at_a_lone_evader(w in 3usize..20, h in 3usize..20, ex in 0usize..20, ey in 0usize..20, weight in 0.1f64..10.0, spread in 0.2f64..4.0) {
        let e = Position::new(ex % w, ey % h);
        let f = RewardField::from_peaks(0, w, h, &[(e, weight)], spread);
        prop_assert!((f.at(e) - weight).abs() < 1e-12);
        for y in 0..h {
            for x in 0..w {
                let p = Position::new(x, y);
                prop_assert!(f.at(p) > 0.0 || e.distance_sq(p) as f64 > 60.0 * spread);
                prop_assert!(f.at(p) <= f.at(e));
            }
        }
    }

    #[test]
    fn q_update_moves_toward_the_target(q0 in -5.0f64..5.0, r in -5.0f64..5.0, next in -5.0f64..5.0, alpha in 0.01f64..1.0) {
        let mut t = QTable::new(AgentId(0), 3, 3, alpha, 0.9, 0.0);
        let s = Position::new(1, 1);
        let s2 = Position::new(1, 0);
        t.set(s, Action::Up, q0);
        for a in Action::MOVES {
            t.set(s2, a, next);
        }
        q_update(&mut t, &TransitionRecord { s_t: s, a_t: Action::Up, r_t: r, s_next: s2 });
        let target = r + 0.9 * next;
        let q1 = t.get(s, Action::Up);
        prop_assert!((q1 - (q0 + alpha * (target - q0))).abs() < 1e-12);
        prop_assert!((q1 - target).abs() <= (q0 - target).abs() + 1e-12);
    }

    #[test]
    fn discounted_return_is_linear(rs in prop::collection::vec(-3.0f64..3.0, 0..30), k in -2.0f64..2.0) {
        let scaled: Vec<f64> = rs.iter().map(|r| r * k).collect();
        prop_assert!((discounted_return(&scaled, 0.9) - k * discounted_return(&rs, 0.9)).abs() < 1e-9);
    }
}

fn small(case: Case, seed_scale: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::for_case(case);
    c.grid.width = 12 + (seed_scale % 6) as usize;
    c.grid.height = 12;
    c.agents.pursuers = 6;
    c.agents.evaders = 2 + (seed_scale % 2) as usize;
    c.agents.pursuer_range = 3;
    c.max_ticks = 1_500;
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // whole simulations

    #[test]
    fn simulations_conserve_membership_every_tick(case_i in 0usize..5, seed in 0u64..1_000) {
        let case = Case::ALL[case_i];
        let cfg = small(case, seed);
        let mut sim = Simulation::new(&cfg, seed).unwrap();
        let mut last_flex = 0;
        let mut captured = 0;
        while let Some(rec) = sim.step().unwrap() {
            sim.world().check_invariants().unwrap();
            if let Some(org) = sim.organizer() {
                if !sim.world().all_captured() {
                    org.check_conservation(sim.world()).unwrap();
                }
                prop_assert!(org.flexibility_count >= last_flex);
                last_flex = org.flexibility_count;
            }
            let now = rec.evaders.iter().filter(|e| e.captured).count();
            prop_assert!(now >= captured);
            captured = now;
            prop_assert!(rec.reward.is_finite() && rec.reward >= 0.0);
        }
        let m = sim.metrics();
        prop_assert!(m.capture_ticks <= cfg.max_ticks);
        prop_assert_eq!(m.completed, sim.world().all_captured());
        prop_assert_eq!(m.reward_trajectory.len() as u64, sim.world().tick);
        if m.completed {
            let last = m.per_evader_capture_ticks.iter().map(|t| t.unwrap()).max().unwrap();
            prop_assert_eq!(last, m.capture_ticks);
        }
    }

    #[test]
    fn field_peaks_follow_alive_evaders(world in world_strategy()) {
        let ids: Vec<AgentId> = world.alive_evaders().map(|e| e.id).collect();
        let group = pursuit_core::coalition::Coalition {
            group_id: 0,
            evader_ids: ids.clone(),
            captured: vec![],
            pursuer_ids: vec![],
            life_remaining: 30,
            life: 30,
            demand: 0,
            formed_tick: 0,
        };
        let peaks = field_peaks(&group, &world, PriorityMode::Recompute, |_| None);
        prop_assert_eq!(peaks.len(), ids.len());
        for ((pos, w), id) in peaks.iter().zip(&ids) {
            let e = world.evader(*id).unwrap();
            prop_assert_eq!(*pos, e.pos);
            prop_assert!((w - e.reward_mag * priority(e, &world)).abs() < 1e-12);
        }
    }
}
