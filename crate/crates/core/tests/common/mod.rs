#![allow(dead_code)]

use std::path::PathBuf;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lgnv::netlist::{random_netlist, Gate, GateOp, NodeRef};
use lgnv::schema::Feature;
use lgnv::solver::SolverConfig;
use lgnv::{FeatureSchema, Netlist};

pub fn solver_path() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_lgnv-sat"))
}

pub fn solver() -> SolverConfig {
    SolverConfig {
        timeout: Duration::from_secs(120),
        ..SolverConfig::with_executable(solver_path())
    }
}

/// Outputs are constants: class 0 block = `c0`, class 1 block = `c1`, L = 1.
pub fn constant_net(width: usize, c0: bool, c1: bool) -> Netlist {
    let op = |v: bool| if v { GateOp::TRUE } else { GateOp::FALSE };
    Netlist {
        input_width: width,
        num_classes: 2,
        block_size: 1,
        layers: vec![vec![
            Gate::new(op(c0), NodeRef::Input(0), NodeRef::Input(0)),
            Gate::new(op(c1), NodeRef::Input(0), NodeRef::Input(0)),
        ]],
    }
}

/// A 2-bit thermometer feature followed by a sensitive binary category.
pub fn flip_schema() -> FeatureSchema {
    FeatureSchema::new(vec![
        Feature::numerical("n", 2, 0.0, 3.0),
        Feature::categorical("s", 2, true),
    ])
}

/// Predicts the sensitive category itself, always with confidence 1.
pub fn flip_net() -> Netlist {
    Netlist {
        input_width: 4,
        num_classes: 2,
        block_size: 1,
        layers: vec![vec![
            Gate::new(GateOp::A, NodeRef::Input(2), NodeRef::Input(0)),
            Gate::new(GateOp::A, NodeRef::Input(3), NodeRef::Input(0)),
        ]],
    }
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub id: usize,
    pub seed: u64,
    pub netlist: Netlist,
    pub schema: FeatureSchema,
}

/// One or two thermometer features (B ≤ 4) and one or two categorical
/// features (m ≤ 3), exactly one of them sensitive, in random order, at
/// most 12 bits wide.
pub fn random_schema(rng: &mut ChaCha8Rng) -> FeatureSchema {
    loop {
        let n_num = rng.random_range(1..=2);
        let n_cat = rng.random_range(1..=2);
        let sensitive = rng.random_range(0..n_cat);
        let mut features: Vec<Feature> = (0..n_num)
            .map(|k| Feature::numerical(format!("n{k}"), rng.random_range(1..=4), 0.0, 1.0))
            .collect();
        features.extend((0..n_cat).map(|k| {
            Feature::categorical(format!("c{k}"), rng.random_range(2..=3), k == sensitive)
        }));
        features.shuffle(rng);
        let schema = FeatureSchema::new(features);
        if schema.width() <= 12 {
            return schema;
        }
    }
}

pub fn random_instance(id: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = random_schema(&mut rng);
    let classes = rng.random_range(2..=3);
    let block = [1, 2, 4][rng.random_range(0..3)];
    let mut sizes: Vec<usize> = (0..rng.random_range(1..=2))
        .map(|_| rng.random_range(2..=8))
        .collect();
    sizes.push(classes * block);
    let netlist = random_netlist(schema.width(), &sizes, classes, block, rng.random())
        .expect("valid dimensions");
    Instance {
        id,
        seed,
        netlist,
        schema,
    }
}

pub fn fleet(size: usize, base_seed: u64) -> Vec<Instance> {
    (0..size)
        .map(|i| random_instance(i, base_seed + i as u64))
        .collect()
}
