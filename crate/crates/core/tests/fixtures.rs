mod common;

use common::{fixture_path, random_policy_summary};

const FIXTURE: &str = "random_policy.txt";
const EPISODES: usize = 10_000;
const SEED: u64 = 2024;
const ENVS: [&str; 2] = ["pendulum", "double-integrator"];

fn summary() -> String {
    let mut text = String::from("# Uniform-random-action episode returns, computed by tests/fixtures.rs\n");
    for env in ENVS {
        text.push_str(&random_policy_summary(env, EPISODES, SEED));
    }
    text
}

/// Rewrites the fixture: `cargo test --test fixtures -- --ignored`.
#[test]
#[ignore]
fn regenerate_random_policy_fixture() {
    std::fs::write(fixture_path(FIXTURE), summary()).unwrap();
}

#[test]
fn random_policy_fixture_is_current() {
    let stored = std::fs::read_to_string(fixture_path(FIXTURE)).unwrap();
    assert_eq!(stored, summary());
}
