mod common;

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

use common::*;
use hamforge::circuit::{count_resources, Circuit, Gate};
use hamforge::graphs::{self, Graph};
use hamforge::sim::{self, unitary_of};
use hamforge::synth::{self, DisorderedHeisenberg, Direction, Lowering, Mode};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_angles(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(-PI..PI)).collect()
}

#[test]
fn preft_template_is_exact_including_phase() {
    for a in random_angles(100, 1).into_iter().chain([0.0, FRAC_PI_8, FRAC_PI_4]) {
        let c = synth::heis_gate_preft(a);
        assert_eq!(count_resources(&c).cnot_count, 3);
        let u = unitary_of(&c).unwrap();
        assert!(distance(&u, &heis_oracle(a), false) <= 1e-10, "a = {a}");
    }
}

#[test]
fn ft_template_is_exact_and_has_one_parameter() {
    for a in random_angles(100, 2).into_iter().chain([0.0, FRAC_PI_4]) {
        let c = synth::heis_gate_ft(a);
        let params = c.ops().iter().filter(|g| g.angle().is_some()).count();
        assert_eq!(params, 1);
        let u = unitary_of(&c).unwrap();
        assert!(distance(&u, &heis_oracle(a), false) <= 1e-10, "a = {a}");
    }
}

#[test]
fn sqrt_swap_at_pi_over_eight() {
    let u = unitary_of(&synth::heis_gate_preft(FRAC_PI_8)).unwrap();
    let h = C::new(0.5, 0.5);
    let l = C::new(0.5, -0.5);
    let (o, z) = (C::new(1.0, 0.0), C::new(0.0, 0.0));
    let sqrt_swap = vec![
        vec![o, z, z, z],
        vec![z, h, l, z],
        vec![z, l, h, z],
        vec![z, z, z, o],
    ];
    assert!(distance(&u, &sqrt_swap, true) <= 1e-10);
}

fn czpow_matrix(a: f64) -> M {
    let o = C::new(1.0, 0.0);
    diag(&[o, o, o, C::from_polar(1.0, PI * a)])
}

#[test]
fn gadget_realizes_czpow_on_every_branch() {
    for a in random_angles(100, 3).into_iter().chain([0.0, 1.0]) {
        let u = unitary_of(&synth::cz_gadget(a)).unwrap();
        assert!(distance(&u, &czpow_matrix(a), false) <= 1e-10, "a = {a}");
    }
}

#[test]
fn gadget_branches_individually() {
    // Force each outcome by replacing the measurement with its projector
    // branch: feed the simulator a circuit where the clbit is pinned.
    let a = 0.37;
    let c = synth::cz_gadget(a);
    let ops = c.ops();
    let meas = ops.iter().position(|g| g.is_measurement()).unwrap();
    for outcome in [false, true] {
        let mut branch = Circuit::new(3);
        branch.set_ancillas(1);
        branch.set_phase(c.global_phase());
        for g in &ops[..meas] {
            branch.push(*g);
        }
        // X-basis outcome `outcome` then reset is H, projection, (X if 1).
        branch.push(Gate::H(2));
        let kept = unitary_with_projection(&branch, 2, outcome);
        let mut rest = Circuit::new(3);
        rest.set_ancillas(1);
        if outcome {
            rest.push(Gate::Cz(0, 1));
        }
        let corr = unitary_of(&rest).unwrap();
        let total = corr.mul(&kept).unwrap();
        assert!(distance(&total, &czpow_matrix(a), false) <= 1e-10);
    }
}

/// Data block of the circuit's action followed by projecting `anc` onto
/// `outcome`, moving that component to `|0⟩` and renormalizing.
fn unitary_with_projection(c: &Circuit, anc: usize, outcome: bool) -> sim::UnitaryMatrix {
    let mut full = c.clone();
    full.set_ancillas(0);
    let u = unitary_of(&full).unwrap();
    let d = 1 << c.num_data_qubits();
    let bit = 1usize << anc;
    let rows: Vec<Vec<C>> = (0..d)
        .map(|i| {
            let src = if outcome { i | bit } else { i };
            (0..d).map(|j| u.get(src, j) * std::f64::consts::SQRT_2).collect()
        })
        .collect();
    sim::UnitaryMatrix::from_rows(&rows).unwrap()
}

#[test]
fn lowered_ft_stage_matches_macro_stage() {
    let g = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
    let h = DisorderedHeisenberg::new(g, vec![0.3, -0.2, 0.8], 1.0, 1e-3).unwrap();
    let layout = synth::default_layout(h.graph());
    let m = synth::build_stage(&h, &layout, 0.21, Direction::Forward, Lowering::Macro).unwrap();
    let f = synth::build_stage(&h, &layout, 0.21, Direction::Forward, Lowering::Ft).unwrap();
    let gadgets = synth::lower_czpow_gadgets(&f);
    let um = unitary_of(&m).unwrap();
    assert!(sim::spectral_distance(&um, &unitary_of(&f).unwrap(), false).unwrap() < 1e-10);
    assert!(sim::spectral_distance(&um, &unitary_of(&gadgets).unwrap(), false).unwrap() < 1e-10);
    let r = count_resources(&gadgets);
    assert_eq!(r.t_count, 4 * 2);
    assert_eq!(r.rz_count, 2 + 3);
}

#[test]
fn hardness_circuit_is_cnot() {
    let u = unitary_of(&synth::cnot_from_heisenberg()).unwrap();
    let (o, z) = (C::new(1.0, 0.0), C::new(0.0, 0.0));
    // Control qubit 0 (low bit): |01⟩ ↔ |11⟩ in (q1 q0) order.
    let cnot = vec![
        vec![o, z, z, z],
        vec![z, z, z, o],
        vec![z, z, o, z],
        vec![z, o, z, z],
    ];
    assert!(distance(&u, &cnot, true) <= 1e-9);
    assert!(distance(&u, &cnot, false) <= 1e-9);
    assert!((u.get(0, 0) - o).norm() < 1e-9);
}

/// Direct product of stage exponentials `exp(-i s H_j)` in stage order.
fn stage_product_oracle(h: &DisorderedHeisenberg, order: u32, r: u64) -> M {
    let n = h.n();
    let layout = synth::default_layout(h.graph());
    let plan = synth::suzuki_stages(order, h.time(), r).unwrap();
    let mut u = eye(1 << n);
    let edge_exp = |s: f64, a: usize, b: usize| expm(&scale(&heis_generator(n, a, b), C::new(0.0, -s)));
    let disorder_exp = |s: f64| {
        let mut z = zeros(1 << n);
        for (q, &d) in h.disorders().iter().enumerate() {
            z = add(&z, &scale(&pauli_string(n, &[(q, 'Z')]), C::new(d, 0.0)));
        }
        expm(&scale(&z, C::new(0.0, -s)))
    };
    let mut block = eye(1 << n);
    for st in &plan.stages {
        let mut factors: Vec<M> = Vec::new();
        let edges: Vec<(usize, usize)> = layout.classes().iter().flatten().copied().collect();
        match st.direction {
            Direction::Forward => {
                factors.extend(edges.iter().map(|&(a, b)| edge_exp(st.scalar, a, b)));
                factors.push(disorder_exp(st.scalar));
            }
            Direction::Reverse => {
                factors.push(disorder_exp(st.scalar));
                factors.extend(edges.iter().rev().map(|&(a, b)| edge_exp(st.scalar, a, b)));
            }
        }
        for f in factors {
            block = mul(&f, &block);
        }
    }
    for _ in 0..r {
        u = mul(&block, &u);
    }
    u
}

#[test]
fn pf_circuit_matches_stage_exponentials() {
    let g = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
    let h = DisorderedHeisenberg::new(g, vec![0.5, -0.7, 0.1], 1.3, 1e-3).unwrap();
    for (order, r) in [(2, 1), (2, 3), (4, 1), (4, 2)] {
        let oracle = stage_product_oracle(&h, order, r);
        for mode in [Mode::PreFt, Mode::Ft] {
            let c = synth::build_pf_circuit(&h, order, r, mode).unwrap();
            let u = unitary_of(&c).unwrap();
            assert!(distance(&u, &oracle, false) <= 1e-9, "order {order} r {r} {mode}");
        }
    }
}

#[test]
fn pf_circuit_on_k4_matches_stage_exponentials() {
    let g = Graph::new(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
    let h = DisorderedHeisenberg::new(g, synth::random_disorders(4, 9), 0.7, 1e-3).unwrap();
    let oracle = stage_product_oracle(&h, 4, 1);
    let u = unitary_of(&synth::build_pf_circuit(&h, 4, 1, Mode::PreFt).unwrap()).unwrap();
    assert!(distance(&u, &oracle, false) <= 1e-9);
}

#[test]
fn stage_costs_on_random_regular_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 50 {
        let k = rng.random_range(2..=7usize);
        let n = rng.random_range(k + 1..=20usize);
        if n * k % 2 == 1 {
            continue;
        }
        let g = graphs::random_regular(n, k, rng.random()).unwrap();
        let h = DisorderedHeisenberg::new(g, synth::random_disorders(n, 1), 1.0, 1e-3).unwrap();
        let layout = synth::default_layout(h.graph());
        for dir in [Direction::Forward, Direction::Reverse] {
            let s = synth::build_stage(&h, &layout, 0.1, dir, Lowering::PreFt).unwrap();
            let r = count_resources(&s);
            assert_eq!(r.cnot_count as usize, 3 * n * k / 2);
            assert_eq!(r.two_qubit_depth as usize, 3 * layout.colors_used());
            assert!((3 * k..=3 * k + 3).contains(&(r.two_qubit_depth as usize)));
        }
        checked += 1;
    }
}
